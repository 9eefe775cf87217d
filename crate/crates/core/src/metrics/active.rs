//! Active-user classification: a user is active when any of their days
//! contains at least one trip.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::GridSpec;
use crate::model::{Step, Trajectory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripRule {
    /// A consecutive pair at distinct POI ids or in distinct grid cells.
    #[default]
    DistinctPoiOrCell,
    /// A consecutive pair at distinct POI ids; falls back to distinct
    /// coordinates when either side has no POI id.
    DistinctPoi,
    /// A consecutive pair in distinct grid cells.
    DistinctCell,
}

impl TripRule {
    fn is_trip(self, a: &Step, b: &Step, grid: &GridSpec) -> bool {
        let distinct_poi = || match (&a.visit.poi_id, &b.visit.poi_id) {
            (Some(x), Some(y)) => x != y,
            _ => false,
        };
        let distinct_cell = || grid.cell_index(a.visit.point) != grid.cell_index(b.visit.point);
        match self {
            Self::DistinctPoiOrCell => distinct_poi() || distinct_cell(),
            Self::DistinctPoi => match (&a.visit.poi_id, &b.visit.poi_id) {
                (Some(x), Some(y)) => x != y,
                _ => a.visit.point != b.visit.point,
            },
            Self::DistinctCell => distinct_cell(),
        }
    }

    pub fn day_has_trip(self, traj: &Trajectory, grid: &GridSpec) -> bool {
        traj.steps.windows(2).any(|w| self.is_trip(&w[0], &w[1], grid))
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("user universes differ: {only_generated} only in generated, {only_truth} only in truth")]
pub struct UniverseMismatch {
    pub only_generated: usize,
    pub only_truth: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveUserScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl ActiveUserScores {
    /// Precision, recall and F1 from confusion counts; an undefined ratio is 0.
    pub fn from_confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            true_positive: tp,
            false_positive: fp,
            false_negative: fn_,
            true_negative: tn,
        }
    }
}

pub fn active_users(trajs: &[Trajectory], rule: TripRule, grid: &GridSpec) -> BTreeMap<String, bool> {
    let mut out: BTreeMap<String, bool> = BTreeMap::new();
    for t in trajs {
        let active = rule.day_has_trip(t, grid);
        *out.entry(t.user_id.clone()).or_default() |= active;
    }
    out
}

pub fn evaluate_active_users(
    generated: &[Trajectory],
    truth: &[Trajectory],
    rule: TripRule,
    grid: &GridSpec,
) -> Result<ActiveUserScores, UniverseMismatch> {
    let gen = active_users(generated, rule, grid);
    let tru = active_users(truth, rule, grid);
    let only_generated = gen.keys().filter(|k| !tru.contains_key(*k)).count();
    let only_truth = tru.keys().filter(|k| !gen.contains_key(*k)).count();
    if only_generated + only_truth > 0 {
        return Err(UniverseMismatch {
            only_generated,
            only_truth,
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (user, &g) in &gen {
        match (g, tru[user]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(ActiveUserScores::from_confusion(tp, fp, fn_, tn))
}
