use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::platform::GeoPoint;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid coordinates ({latitude}, {longitude})")]
pub struct InvalidCoordinates {
    pub latitude: f64,
    pub longitude: f64,
}

/// Great-circle (haversine) distance in metres.
pub fn compute_distance(a: GeoPoint, b: GeoPoint) -> Result<f64, InvalidCoordinates> {
    for p in [a, b] {
        if !p.is_valid() {
            return Err(InvalidCoordinates { latitude: p.latitude, longitude: p.longitude });
        }
    }
    let (lat1, lat2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin())
}

/// Ordinal distance ranges used as answer options. `edges_m` are the
/// ascending upper bounds of every range but the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceBuckets {
    pub edges_m: Vec<f64>,
}

impl Default for DistanceBuckets {
    fn default() -> Self {
        Self { edges_m: vec![500.0, 1000.0, 3000.0] }
    }
}

fn fmt_m(m: f64) -> String {
    if m >= 1000.0 {
        let km = m / 1000.0;
        if km.fract() == 0.0 {
            format!("{km:.0} km")
        } else {
            format!("{km} km")
        }
    } else {
        format!("{m:.0} m")
    }
}

impl DistanceBuckets {
    pub fn validate(&self) -> Result<(), String> {
        if self.edges_m.is_empty() || self.edges_m.len() > 19 {
            return Err("distance buckets need 1 to 19 edges".into());
        }
        if self.edges_m.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err("distance bucket edges must be positive".into());
        }
        if self.edges_m.windows(2).any(|w| w[0] >= w[1]) {
            return Err("distance bucket edges must ascend strictly".into());
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.edges_m.len() + 1
    }

    pub fn labels(&self) -> Vec<String> {
        let e = &self.edges_m;
        let mut out = vec![format!("Less than {}", fmt_m(e[0]))];
        for w in e.windows(2) {
            out.push(format!("{} to {}", fmt_m(w[0]), fmt_m(w[1])));
        }
        out.push(format!("More than {}", fmt_m(e[e.len() - 1])));
        out
    }

    /// Index of the range holding `meters`; edges belong to the upper range.
    pub fn bucket_of(&self, meters: f64) -> usize {
        self.edges_m.iter().take_while(|e| meters >= **e).count()
    }

    /// Relative distance to the nearest edge.
    pub fn edge_margin(&self, meters: f64) -> f64 {
        self.edges_m
            .iter()
            .map(|e| (meters - e).abs() / e)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_cases() {
        let p = GeoPoint::new(31.0, 121.0);
        assert_eq!(compute_distance(p, p).unwrap(), 0.0);
        let q = compute_distance(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 90.0)).unwrap();
        assert!((q - 10_007_543.4).abs() < 1.0, "{q}");
        assert!(compute_distance(GeoPoint::new(91.0, 0.0), p).is_err());
    }

    #[test]
    fn bucket_labels() {
        let b = DistanceBuckets::default();
        assert_eq!(
            b.labels(),
            ["Less than 500 m", "500 m to 1 km", "1 km to 3 km", "More than 3 km"]
        );
        assert_eq!(b.bucket_of(0.0), 0);
        assert_eq!(b.bucket_of(500.0), 1);
        assert_eq!(b.bucket_of(2999.0), 2);
        assert_eq!(b.bucket_of(1e6), 3);
    }
}
