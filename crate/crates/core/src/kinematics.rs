//! Longitudinal vehicle dynamics on a one-way road.

use thiserror::Error;

/// Acceleration applied when the limiter releases (m/s²).
pub const DEFAULT_ACCEL_CAP_MPS2: f64 = 2.0;

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

pub fn mps_to_kmh(mps: f64) -> f64 {
    mps * 3.6
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("range must be non-negative, got {0} m")]
    NegativeRange(f64),
    #[error("invalid friction model: {0}")]
    InvalidFriction(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionModel {
    /// Tyre-road friction coefficient, in (0, 1].
    pub mu: f64,
    /// Nominal deceleration rate (m/s²); braking happens at `mu * g_decel_mps2`.
    pub g_decel_mps2: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        Self { mu: 0.7, g_decel_mps2: 10.0 }
    }
}

impl FrictionModel {
    pub fn new(mu: f64, g_decel_mps2: f64) -> Result<Self, KinematicsError> {
        let model = Self { mu, g_decel_mps2 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(KinematicsError::InvalidFriction("mu must be in (0, 1]"));
        }
        if !(self.g_decel_mps2 > 0.0 && self.g_decel_mps2.is_finite()) {
            return Err(KinematicsError::InvalidFriction("g_decel_mps2 must be > 0"));
        }
        Ok(())
    }

    /// Effective braking deceleration μ·g (m/s²).
    pub fn braking_decel_mps2(&self) -> f64 {
        self.mu * self.g_decel_mps2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position_m: f64,
    pub speed_mps: f64,
    pub odometer_m: f64,
    pub desired_speed_mps: f64,
}

impl VehicleState {
    pub fn cruising(position_m: f64, speed_mps: f64) -> Self {
        Self { position_m, speed_mps, odometer_m: 0.0, desired_speed_mps: speed_mps }
    }

    /// The state after `dt_s` at constant speed; used to evaluate the limiter
    /// at the odometer the vehicle is about to reach.
    pub fn coasted(&self, dt_s: f64) -> Self {
        let ds = self.speed_mps * dt_s;
        Self { position_m: self.position_m + ds, odometer_m: self.odometer_m + ds, ..*self }
    }
}

/// Stopping distance u²/(2μg) in metres.
pub fn stopping_distance_m(u_mps: f64, friction: &FrictionModel) -> f64 {
    u_mps * u_mps / (2.0 * friction.braking_decel_mps2())
}

/// Speed after braking over `s_m` from `u_mps`: √(u² − 2gμs), zero past the
/// stopping point.
pub fn speed_at_distance_mps(u_mps: f64, friction: &FrictionModel, s_m: f64) -> f64 {
    let s = s_m.max(0.0);
    (u_mps * u_mps - 2.0 * friction.g_decel_mps2 * friction.mu * s).max(0.0).sqrt()
}

/// Time to cover `range_m` at a constant `speed_kmh`.
pub fn time_to_rsu_s(speed_kmh: f64, range_m: f64) -> Result<f64, KinematicsError> {
    if !(speed_kmh > 0.0) {
        return Err(KinematicsError::NonPositiveSpeed(speed_kmh));
    }
    if !(range_m >= 0.0) {
        return Err(KinematicsError::NegativeRange(range_m));
    }
    Ok(range_m / kmh_to_mps(speed_kmh))
}

/// Advances the vehicle by one fixed step.
///
/// The speed moves toward `min(desired, active_limit)`, bounded by μ·g when
/// braking and by `accel_cap_mps2` when speeding up. Distance is the
/// trapezoidal integral of speed over the step.
pub fn step_vehicle(
    state: &VehicleState,
    active_limit_mps: f64,
    friction: &FrictionModel,
    accel_cap_mps2: f64,
    dt_s: f64,
) -> VehicleState {
    debug_assert!(dt_s > 0.0);
    let target = state.desired_speed_mps.min(active_limit_mps).max(0.0);
    let v0 = state.speed_mps;
    let v1 = if v0 > target {
        (v0 - friction.braking_decel_mps2() * dt_s).max(target)
    } else {
        (v0 + accel_cap_mps2 * dt_s).min(target)
    };
    let ds = 0.5 * (v0 + v1) * dt_s;
    VehicleState {
        position_m: state.position_m + ds,
        speed_mps: v1,
        odometer_m: state.odometer_m + ds,
        desired_speed_mps: state.desired_speed_mps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const U120: f64 = 120.0 / 3.6;

    #[test]
    fn stopping_distances() {
        let f = FrictionModel::default();
        let s = stopping_distance_m(U120, &f);
        assert!((s - 79.37).abs() < 0.01);
        assert_eq!(s.ceil(), 80.0);
        assert_eq!(stopping_distance_m(0.0, &f), 0.0);
        assert!((stopping_distance_m(kmh_to_mps(80.0), &f) - 35.27).abs() < 0.01);
    }

    #[test]
    fn braking_profile_points() {
        let f = FrictionModel::default();
        assert_eq!(speed_at_distance_mps(U120, &f, 0.0), U120);
        assert!(speed_at_distance_mps(U120, &f, 79.37).abs() < 1e-3);
        assert!((speed_at_distance_mps(U120, &f, 40.0) - 23.48).abs() < 0.01);
        assert_eq!(speed_at_distance_mps(U120, &f, 500.0), 0.0);
    }

    #[test]
    fn profile_hits_zero_at_stopping_distance() {
        let f = FrictionModel::default();
        for kmh in [10.0, 60.0, 80.0, 120.0, 150.0] {
            let u = kmh_to_mps(kmh);
            assert!(speed_at_distance_mps(u, &f, stopping_distance_m(u, &f)) < 1e-9);
        }
    }

    #[test]
    fn approach_times() {
        assert!((time_to_rsu_s(80.0, 400.0).unwrap() - 18.0).abs() < 0.05);
        assert!((time_to_rsu_s(100.0, 400.0).unwrap() - 14.4).abs() < 0.05);
        assert!((time_to_rsu_s(120.0, 400.0).unwrap() - 12.0).abs() < 0.05);
        assert_eq!(time_to_rsu_s(0.0, 400.0), Err(KinematicsError::NonPositiveSpeed(0.0)));
        assert!(time_to_rsu_s(80.0, -1.0).is_err());
    }

    #[test]
    fn friction_validation() {
        assert!(FrictionModel::new(1.5, 10.0).is_err());
        assert!(FrictionModel::new(0.0, 10.0).is_err());
        assert!(FrictionModel::new(0.7, 0.0).is_err());
        assert!(FrictionModel::new(1.0, 9.81).is_ok());
    }

    #[test]
    fn step_unconstrained() {
        let f = FrictionModel::default();
        let s = VehicleState::cruising(0.0, U120);
        let n = step_vehicle(&s, U120, &f, DEFAULT_ACCEL_CAP_MPS2, 0.01);
        assert_eq!(n.speed_mps, U120);
        assert!((n.position_m - 0.3333).abs() < 1e-4);
        assert_eq!(n.odometer_m, n.position_m);
    }

    #[test]
    fn step_braking_is_capped() {
        let f = FrictionModel::default();
        let s = VehicleState::cruising(0.0, U120);
        let n = step_vehicle(&s, 0.0, &f, DEFAULT_ACCEL_CAP_MPS2, 0.01);
        assert!((n.speed_mps - 33.263).abs() < 1e-3);
    }

    #[test]
    fn step_holds_crawl_speed() {
        let f = FrictionModel::default();
        let crawl = kmh_to_mps(6.0);
        let s = VehicleState { desired_speed_mps: U120, ..VehicleState::cruising(0.0, crawl) };
        for dt in [0.001, 0.01, 0.5] {
            assert_eq!(step_vehicle(&s, crawl, &f, DEFAULT_ACCEL_CAP_MPS2, dt).speed_mps, crawl);
        }
    }

    #[test]
    fn step_accelerates_at_cap() {
        let f = FrictionModel::default();
        let s = VehicleState { desired_speed_mps: U120, ..VehicleState::cruising(0.0, 1.0) };
        let n = step_vehicle(&s, U120, &f, 2.0, 0.1);
        assert!((n.speed_mps - 1.2).abs() < 1e-12);
    }

    #[test]
    fn full_braking_time_120_to_6() {
        let f = FrictionModel::default();
        let dt = 0.01;
        let crawl = kmh_to_mps(6.0);
        let mut s = VehicleState::cruising(0.0, U120);
        let mut ticks = 0u32;
        while s.speed_mps > crawl + 1e-12 {
            s = step_vehicle(&s, crawl, &f, DEFAULT_ACCEL_CAP_MPS2, dt);
            ticks += 1;
        }
        let t = ticks as f64 * dt;
        assert!((t - 4.524).abs() <= dt + 1e-9, "{t}");
    }

    /// Feeding the closed-form profile as the limit (evaluated at the
    /// odometer the vehicle reaches at the end of each step) reproduces
    /// the braking curve.
    #[test]
    fn integrated_profile_matches_closed_form() {
        let f = FrictionModel::default();
        let dt = 0.01;
        let mut s = VehicleState::cruising(0.0, U120);
        let mut worst = 0.0f64;
        while s.speed_mps > 0.5 {
            let ahead = s.coasted(dt);
            let limit = speed_at_distance_mps(U120, &f, ahead.odometer_m);
            s = step_vehicle(&s, limit, &f, DEFAULT_ACCEL_CAP_MPS2, dt);
            let closed = speed_at_distance_mps(U120, &f, s.odometer_m);
            worst = worst.max((s.speed_mps - closed).abs() / closed);
        }
        assert!(worst < 0.005, "worst relative error {worst}");
    }

    proptest! {
        #[test]
        fn profile_non_increasing(u in 0.0f64..60.0, a in 0.0f64..200.0, b in 0.0f64..200.0) {
            let f = FrictionModel::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(speed_at_distance_mps(u, &f, hi) <= speed_at_distance_mps(u, &f, lo));
        }

        #[test]
        fn step_bounds(v in 0.0f64..50.0, limit in 0.0f64..50.0, desired in 0.0f64..50.0, dt in 0.001f64..0.5) {
            let f = FrictionModel::default();
            let s = VehicleState { position_m: 3.0, speed_mps: v, odometer_m: 3.0, desired_speed_mps: desired };
            let n = step_vehicle(&s, limit, &f, DEFAULT_ACCEL_CAP_MPS2, dt);
            prop_assert!(n.speed_mps >= 0.0);
            prop_assert!(n.odometer_m >= s.odometer_m);
            prop_assert!(n.position_m >= s.position_m);
            let slack = f.braking_decel_mps2() * dt;
            prop_assert!(n.speed_mps <= limit.max(v - slack) + 1e-9);
            if v <= limit + slack {
                prop_assert!(n.speed_mps <= limit + 1e-12);
            }
        }
    }
}
