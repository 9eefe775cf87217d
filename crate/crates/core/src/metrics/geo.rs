use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GeoPoint;

/// Mean Earth radius (IUGG), km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance in km.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon() - a.lon()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Euclidean norm of the raw coordinate difference, in degrees.
pub fn degree_l2(a: GeoPoint, b: GeoPoint) -> f64 {
    (a.lat() - b.lat()).hypot(a.lon() - b.lon())
}

/// How consecutive-step distances are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Great-circle kilometres.
    #[default]
    Haversine,
    /// Plain L2 over (lat, lon) degrees. The SD bin edges are then read in
    /// degrees rather than kilometres.
    DegreeL2,
}

impl DistanceMetric {
    pub fn distance(self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            Self::Haversine => haversine_km(a, b),
            Self::DegreeL2 => degree_l2(a, b),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("radius of gyration needs at least one point")]
pub struct EmptyPoints;

/// Root-mean-square distance to the centroid, in km, after projecting onto
/// an equirectangular plane centred on the centroid.
pub fn radius_of_gyration_km(points: &[GeoPoint]) -> Result<f64, EmptyPoints> {
    if points.is_empty() {
        return Err(EmptyPoints);
    }
    let n = points.len() as f64;
    let lat0 = points.iter().map(|p| p.lat()).sum::<f64>() / n;
    let lon0 = points.iter().map(|p| p.lon()).sum::<f64>() / n;
    let kx = EARTH_RADIUS_KM * lat0.to_radians().cos() * std::f64::consts::PI / 180.0;
    let ky = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let msd = points
        .iter()
        .map(|p| {
            let x = (p.lon() - lon0) * kx;
            let y = (p.lat() - lat0) * ky;
            x * x + y * y
        })
        .sum::<f64>()
        / n;
    Ok(msd.sqrt())
}

#[derive(Debug, Error, PartialEq)]
#[error("degenerate bounding box: {0}")]
pub struct DegenerateBox(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<(), DegenerateBox> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lat_min >= self.lat_max || self.lon_min >= self.lon_max {
            return Err(DegenerateBox(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat()) && (self.lon_min..=self.lon_max).contains(&p.lon())
    }

    /// Tight box around `points`; `None` when there are no points.
    pub fn enclosing(points: impl IntoIterator<Item = GeoPoint>) -> Option<Self> {
        points.into_iter().fold(None, |acc, p| {
            Some(match acc {
                None => BoundingBox {
                    lat_min: p.lat(),
                    lat_max: p.lat(),
                    lon_min: p.lon(),
                    lon_max: p.lon(),
                },
                Some(b) => BoundingBox {
                    lat_min: b.lat_min.min(p.lat()),
                    lat_max: b.lat_max.max(p.lat()),
                    lon_min: b.lon_min.min(p.lon()),
                    lon_max: b.lon_max.max(p.lon()),
                },
            })
        })
    }
}
