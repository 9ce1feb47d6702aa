//! RSSI sources the engine can draw per-beacon measurements from.

use crate::propagation::{sample_rssi, PropagationError, RadioLinkParams, ShadowingModel};

/// Produces the RSSI the IVU measures for one beacon.
pub trait RssiSource {
    fn rssi_dbm(&self, distance_m: f64, beacon_index: u64) -> Result<f64, PropagationError>;
}

/// Free-space budget plus seeded log-normal shadowing.
#[derive(Debug, Clone, Copy)]
pub struct ModelChannel {
    pub radio: RadioLinkParams,
    pub shadowing: ShadowingModel,
}

impl RssiSource for ModelChannel {
    fn rssi_dbm(&self, distance_m: f64, beacon_index: u64) -> Result<f64, PropagationError> {
        sample_rssi(&self.radio, distance_m, &self.shadowing, beacon_index)
    }
}

/// Measured (distance, RSSI) pairs, linearly interpolated in distance and
/// clamped at both ends. Lets a recorded drive-by replace the model.
#[derive(Debug, Clone)]
pub struct TabulatedChannel {
    points: Vec<(f64, f64)>,
}

impl TabulatedChannel {
    /// Returns `None` for an empty table or non-finite entries.
    pub fn new(mut points: Vec<(f64, f64)>) -> Option<Self> {
        if points.is_empty() || points.iter().any(|(d, r)| !d.is_finite() || !r.is_finite()) {
            return None;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
        Some(Self { points })
    }

    /// Parses `distance_m,rssi_dbm` lines; a non-numeric first line is
    /// taken as a header.
    pub fn from_csv(text: &str) -> Option<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (d, r) = line.split_once(',')?;
            match (d.trim().parse::<f64>(), r.trim().parse::<f64>()) {
                (Ok(d), Ok(r)) => points.push((d, r)),
                _ if i == 0 => continue,
                _ => return None,
            }
        }
        Self::new(points)
    }

    pub fn lookup(&self, distance_m: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|(d, _)| *d < distance_m);
        if idx == 0 {
            return pts[0].1;
        }
        if idx == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (d0, r0) = pts[idx - 1];
        let (d1, r1) = pts[idx];
        r0 + (r1 - r0) * (distance_m - d0) / (d1 - d0)
    }
}

impl RssiSource for TabulatedChannel {
    fn rssi_dbm(&self, distance_m: f64, _beacon_index: u64) -> Result<f64, PropagationError> {
        if !(distance_m > 0.0) {
            return Err(PropagationError::InvalidDistance(distance_m));
        }
        Ok(self.lookup(distance_m))
    }
}
