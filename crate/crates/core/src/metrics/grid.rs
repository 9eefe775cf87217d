//! Spatial grid discretization and the top-cell spatial distribution.

use serde::{Deserialize, Serialize};

use super::distribution::Distribution;
use super::geo::{BoundingBox, DegenerateBox};
use crate::model::{GeoPoint, Trajectory};

/// Fraction of grid cells, ranked by reference visits, kept for evaluation.
pub const RETAINED_CELL_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub size: usize,
    pub bbox: BoundingBox,
}

impl GridSpec {
    pub fn new(size: usize, bbox: BoundingBox) -> Result<Self, DegenerateBox> {
        bbox.validate()?;
        if size == 0 {
            return Err(DegenerateBox("grid size must be at least 1".into()));
        }
        Ok(Self { size, bbox })
    }

    pub fn cell_count(&self) -> usize {
        self.size * self.size
    }

    /// `(row, col)` of `p`, rows along latitude. Points on the max edges land
    /// in the last row/column; points outside the box yield `None`.
    pub fn cell_of(&self, p: GeoPoint) -> Option<(usize, usize)> {
        if !self.bbox.contains(p) {
            return None;
        }
        let s = self.size as f64;
        let dlat = (self.bbox.lat_max - self.bbox.lat_min) / s;
        let dlon = (self.bbox.lon_max - self.bbox.lon_min) / s;
        let row = (((p.lat() - self.bbox.lat_min) / dlat).floor() as usize).min(self.size - 1);
        let col = (((p.lon() - self.bbox.lon_min) / dlon).floor() as usize).min(self.size - 1);
        Some((row, col))
    }

    pub fn cell_index(&self, p: GeoPoint) -> Option<usize> {
        self.cell_of(p).map(|(r, c)| r * self.size + c)
    }

    /// Number of retained cells, `ceil(0.25 * S^2)`.
    pub fn retained_len(&self) -> usize {
        (RETAINED_CELL_FRACTION * self.cell_count() as f64).ceil() as usize
    }
}

/// Per-cell visit tallies in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCounts {
    pub counts: Vec<u64>,
    pub dropped: u64,
}

pub fn cell_counts(trajs: &[Trajectory], grid: &GridSpec) -> CellCounts {
    let mut counts = vec![0u64; grid.cell_count()];
    let mut dropped = 0;
    for p in trajs.iter().flat_map(|t| t.points()) {
        match grid.cell_index(p) {
            Some(i) => counts[i] += 1,
            None => dropped += 1,
        }
    }
    CellCounts { counts, dropped }
}

/// Indices of the most-visited cells under `reference`, ties broken by lower
/// row-major index, returned in ascending index order.
pub fn retained_cells(grid: &GridSpec, reference: &CellCounts) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grid.cell_count()).collect();
    order.sort_by(|&a, &b| reference.counts[b].cmp(&reference.counts[a]).then(a.cmp(&b)));
    order.truncate(grid.retained_len());
    order.sort_unstable();
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdDistribution {
    pub distribution: Distribution,
    pub retained: Vec<usize>,
    /// Visits that fell outside the bounding box.
    pub dropped: u64,
}

/// Spatial distribution of `trajs` restricted to the top cells of
/// `reference` and renormalized.
pub fn build_sgd_distribution(trajs: &[Trajectory], grid: &GridSpec, reference: &CellCounts) -> SgdDistribution {
    let own = cell_counts(trajs, grid);
    let retained = retained_cells(grid, reference);
    let labels = retained
        .iter()
        .map(|i| format!("r{}c{}", i / grid.size, i % grid.size))
        .collect();
    let counts: Vec<f64> = retained.iter().map(|&i| own.counts[i] as f64).collect();
    SgdDistribution {
        distribution: Distribution::from_counts(labels, &counts),
        retained,
        dropped: own.dropped,
    }
}
