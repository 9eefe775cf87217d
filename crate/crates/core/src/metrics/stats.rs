use serde::{Deserialize, Serialize};

use super::geo::{haversine_km, radius_of_gyration_km};
use crate::model::Trajectory;

/// Per-user-day mobility statistics averaged over all user-days.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MobilityStats {
    pub user_days: usize,
    pub mean_daily_checkins: f64,
    pub mean_radius_of_gyration_km: f64,
    pub mean_total_travel_distance_km: f64,
    pub mean_daily_activity_duration_hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayStats {
    pub checkins: usize,
    pub travel_km: f64,
    pub duration_hours: f64,
    pub gyration_km: f64,
}

pub fn day_statistics(traj: &Trajectory) -> DayStats {
    let points: Vec<_> = traj.points().collect();
    let travel_km = points.windows(2).map(|w| haversine_km(w[0], w[1])).sum();
    let duration_hours = match (traj.steps.first(), traj.steps.last()) {
        (Some(a), Some(b)) => (b.at - a.at).num_seconds() as f64 / 3600.0,
        _ => 0.0,
    };
    DayStats {
        checkins: points.len(),
        travel_km,
        duration_hours,
        gyration_km: radius_of_gyration_km(&points).unwrap_or(0.0),
    }
}

/// Empty days count as zero check-ins, zero distance and zero duration.
pub fn mobility_statistics(trajs: &[Trajectory]) -> MobilityStats {
    if trajs.is_empty() {
        return MobilityStats::default();
    }
    let n = trajs.len() as f64;
    let mut acc = MobilityStats {
        user_days: trajs.len(),
        ..Default::default()
    };
    for day in trajs.iter().map(day_statistics) {
        acc.mean_daily_checkins += day.checkins as f64;
        acc.mean_radius_of_gyration_km += day.gyration_km;
        acc.mean_total_travel_distance_km += day.travel_km;
        acc.mean_daily_activity_duration_hours += day.duration_hours;
    }
    acc.mean_daily_checkins /= n;
    acc.mean_radius_of_gyration_km /= n;
    acc.mean_total_travel_distance_km /= n;
    acc.mean_daily_activity_duration_hours /= n;
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::distribution::tests::traj;

    #[test]
    fn single_visit_day() {
        let s = mobility_statistics(&[traj("u", &[("09:00", 35.0, 139.0, "A")])]);
        assert_eq!(s.mean_daily_checkins, 1.0);
        assert_eq!(s.mean_total_travel_distance_km, 0.0);
        assert_eq!(s.mean_daily_activity_duration_hours, 0.0);
        assert_eq!(s.mean_radius_of_gyration_km, 0.0);
    }

    #[test]
    fn duration_is_first_to_last() {
        let s = mobility_statistics(&[traj("u", &[("09:00", 35.0, 139.0, "A"), ("18:00", 35.0, 139.0, "A")])]);
        assert_eq!(s.mean_daily_activity_duration_hours, 9.0);
    }

    #[test]
    fn empty_days_average_in() {
        let s = mobility_statistics(&[traj("u", &[("09:00", 35.0, 139.0, "A"), ("10:00", 35.0, 139.0, "A")]), traj("v", &[])]);
        assert_eq!(s.user_days, 2);
        assert_eq!(s.mean_daily_checkins, 1.0);
        assert_eq!(s.mean_daily_activity_duration_hours, 0.5);
        assert_eq!(mobility_statistics(&[]), MobilityStats::default());
    }
}
