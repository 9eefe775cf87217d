//! Histogram distributions over trajectory sets and their Jensen-Shannon
//! divergence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geo::DistanceMetric;
use crate::model::Trajectory;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Number of 10-minute step-interval bins covering one day.
pub const SI_BINS: usize = 144;
/// Step-distance log bins between [`SD_MIN_KM`] and [`SD_MAX_KM`].
pub const SD_LOG_BINS: usize = 30;
pub const SD_MIN_KM: f64 = 0.1;
pub const SD_MAX_KM: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("label lists differ ({left} vs {right} labels)")]
    LabelMismatch { left: usize, right: usize },
    #[error("distribution mass sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("distribution has no mass")]
    Empty,
    #[error("labels and mass differ in length")]
    Shape,
}

/// A normalized histogram. Mass sums to 1, or is all zero when built from no
/// observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub labels: Vec<String>,
    pub mass: Vec<f64>,
}

impl Distribution {
    /// Normalizes raw counts. All-zero counts stay all-zero.
    pub fn from_counts(labels: Vec<String>, counts: &[f64]) -> Self {
        assert_eq!(labels.len(), counts.len(), "one count per label");
        let total: f64 = counts.iter().sum();
        let mass = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            vec![0.0; counts.len()]
        };
        Self { labels, mass }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.iter().all(|m| *m == 0.0)
    }

    fn check(&self) -> Result<(), DistributionError> {
        if self.labels.len() != self.mass.len() {
            return Err(DistributionError::Shape);
        }
        let total = self.total();
        if self.mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(DistributionError::NotNormalized(total));
        }
        if total == 0.0 {
            return Err(DistributionError::Empty);
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(())
    }

    /// Re-expresses this distribution over `labels`, a superset of its own
    /// labels. Missing labels get zero mass.
    pub fn reindex(&self, labels: &[String]) -> Self {
        let lookup: BTreeMap<&str, f64> =
            self.labels.iter().map(String::as_str).zip(self.mass.iter().copied()).collect();
        Self {
            labels: labels.to_vec(),
            mass: labels.iter().map(|l| lookup.get(l.as_str()).copied().unwrap_or(0.0)).collect(),
        }
    }
}

/// Aligns two label-keyed distributions onto the sorted union of their labels.
pub fn align(p: &Distribution, q: &Distribution) -> (Distribution, Distribution) {
    let union: BTreeSet<&String> = p.labels.iter().chain(&q.labels).collect();
    let labels: Vec<String> = union.into_iter().cloned().collect();
    (p.reindex(&labels), q.reindex(&labels))
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence with base-2 logarithms, in `[0, 1]`.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64, DistributionError> {
    if p.labels != q.labels {
        return Err(DistributionError::LabelMismatch {
            left: p.labels.len(),
            right: q.labels.len(),
        });
    }
    p.check()?;
    q.check()?;
    let m: Vec<f64> = p.mass.iter().zip(&q.mass).map(|(a, b)| 0.5 * (a + b)).collect();
    let value = 0.5 * kl_to_mixture(&p.mass, &m) + 0.5 * kl_to_mixture(&q.mass, &m);
    Ok(value.clamp(0.0, 1.0))
}

fn consecutive_pairs(trajs: &[Trajectory]) -> impl Iterator<Item = (&crate::model::Step, &crate::model::Step)> {
    trajs
        .iter()
        .flat_map(|t| t.steps.windows(2).map(|w| (&w[0], &w[1])))
}

pub fn si_labels() -> Vec<String> {
    (0..SI_BINS).map(|i| format!("{}-{}min", i * 10, (i + 1) * 10)).collect()
}

/// Bin of a step interval given in minutes.
pub fn si_bin(minutes: i64) -> usize {
    ((minutes.max(0) / 10) as usize).min(SI_BINS - 1)
}

/// Step-interval histogram in 10-minute bins over consecutive same-day pairs.
pub fn build_si_distribution(trajs: &[Trajectory]) -> Distribution {
    let mut counts = vec![0.0; SI_BINS];
    for (a, b) in consecutive_pairs(trajs) {
        let minutes = (b.at - a.at).num_minutes();
        counts[si_bin(minutes)] += 1.0;
    }
    Distribution::from_counts(si_labels(), &counts)
}

fn sd_edge(k: usize) -> f64 {
    SD_MIN_KM * 10f64.powf((SD_MAX_KM / SD_MIN_KM).log10() * k as f64 / SD_LOG_BINS as f64)
}

pub fn sd_labels() -> Vec<String> {
    let mut labels = Vec::with_capacity(SD_LOG_BINS + 2);
    labels.push(format!("<{SD_MIN_KM}"));
    for k in 0..SD_LOG_BINS {
        labels.push(format!("{:.4}-{:.4}", sd_edge(k), sd_edge(k + 1)));
    }
    labels.push(format!(">{SD_MAX_KM}"));
    labels
}

/// Bin of a step distance: 0 is underflow, 1..=30 the log bins (the last
/// one closed at 100), 31 overflow.
pub fn sd_bin(distance: f64) -> usize {
    if distance < SD_MIN_KM {
        return 0;
    }
    if distance > SD_MAX_KM {
        return SD_LOG_BINS + 1;
    }
    let span = (SD_MAX_KM / SD_MIN_KM).log10();
    let mut k = ((distance / SD_MIN_KM).log10() / span * SD_LOG_BINS as f64).floor() as usize;
    k = k.min(SD_LOG_BINS - 1);
    // Guard the edges against log rounding.
    if distance < sd_edge(k) {
        k = k.saturating_sub(1);
    } else if k + 1 < SD_LOG_BINS && distance >= sd_edge(k + 1) {
        k += 1;
    }
    k + 1
}

/// Step-distance histogram over consecutive same-day pairs.
pub fn build_sd_distribution(trajs: &[Trajectory], metric: DistanceMetric) -> Distribution {
    let mut counts = vec![0.0; SD_LOG_BINS + 2];
    for (a, b) in consecutive_pairs(trajs) {
        counts[sd_bin(metric.distance(a.visit.point, b.visit.point))] += 1.0;
    }
    Distribution::from_counts(sd_labels(), &counts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryGranularity {
    Category,
    #[default]
    Subcategory,
}

/// Visit share per category label, labels sorted. Align two of these with
/// [`align`] before comparing.
pub fn build_cd_distribution(trajs: &[Trajectory], granularity: CategoryGranularity) -> Distribution {
    let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
    for step in trajs.iter().flat_map(|t| &t.steps) {
        let label = match granularity {
            CategoryGranularity::Category => step.visit.category.as_str(),
            CategoryGranularity::Subcategory => step.visit.subcategory.as_str(),
        };
        *counts.entry(label).or_default() += 1.0;
    }
    let labels = counts.keys().map(|s| s.to_string()).collect();
    let values: Vec<f64> = counts.values().copied().collect();
    Distribution::from_counts(labels, &values)
}
