//! In-vehicle unit: turns received beacons into a speed-limiter setting.
//!
//! The unit listens for RSU beacons, fills a 10 s RSSI window, decides
//! from the filtered trend whether it is approaching the RSU, and when the
//! filtered RSSI rises through the trigger level it anchors a braking
//! profile at the current odometer. The limit then follows
//! `v = √(u² − 2gμs)` down to the bump speed, holds it over the zone
//! length, and finally returns to the national maximum.

mod window;

use std::fmt;

pub use window::{classify_trend, fir_filter, FilterError, RssiSample, RssiWindow, Trend};

use crate::beacon::{BeaconPayload, DecodeError};
use crate::kinematics::{kmh_to_mps, speed_at_distance_mps, FrictionModel, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvuConfig {
    pub trigger_rssi_dbm: f64,
    pub acquisition_s: f64,
    pub max_legal_speed_kmh: f64,
    pub fallback_speed_kmh: u8,
    pub fallback_zone_m: u16,
    pub trend_hysteresis_db: f64,
    pub filter_order: usize,
    /// Nominal odometer distance from the trigger point to the bump site.
    pub bump_distance_m: f64,
}

impl Default for IvuConfig {
    fn default() -> Self {
        Self {
            trigger_rssi_dbm: -48.0,
            acquisition_s: 10.0,
            max_legal_speed_kmh: 120.0,
            fallback_speed_kmh: 6,
            fallback_zone_m: 20,
            trend_hysteresis_db: 1.0,
            filter_order: 2,
            bump_distance_m: 80.0,
        }
    }
}

impl IvuConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.trigger_rssi_dbm < 0.0) {
            return Err("ivu.trigger_rssi_dbm must be < 0");
        }
        if !(self.acquisition_s > 0.0) {
            return Err("ivu.acquisition_s must be > 0");
        }
        if !(self.max_legal_speed_kmh > 0.0) {
            return Err("ivu.max_legal_speed_kmh must be > 0");
        }
        if !(self.bump_distance_m > 0.0) {
            return Err("bump distance must be > 0");
        }
        if !(self.trend_hysteresis_db >= 0.0) {
            return Err("ivu.trend_hysteresis_db must be >= 0");
        }
        if self.fallback_payload().validate().is_err() {
            return Err("ivu fallback payload must satisfy 0 < speed <= 12 km/h and zone > 0");
        }
        if f64::from(self.fallback_speed_kmh) > self.max_legal_speed_kmh {
            return Err("ivu.fallback_speed_kmh must not exceed ivu.max_legal_speed_kmh");
        }
        Ok(())
    }

    pub fn fallback_payload(&self) -> BeaconPayload {
        BeaconPayload { bump_speed_kmh: self.fallback_speed_kmh, zone_length_m: self.fallback_zone_m }
    }

    pub fn max_legal_speed_mps(&self) -> f64 {
        kmh_to_mps(self.max_legal_speed_kmh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Acquiring,
    Approaching,
    Departing,
    Limiting,
    NearZeroZone,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::Acquiring => "Acquiring",
            Phase::Approaching => "Approaching",
            Phase::Departing => "Departing",
            Phase::Limiting => "Limiting",
            Phase::NearZeroZone => "NearZeroZone",
        }
    }

    /// Whether the braking profile has been anchored.
    pub fn is_triggered(&self) -> bool {
        matches!(self, Phase::Limiting | Phase::NearZeroZone)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the braking profile was anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerAnchor {
    pub odometer_m: f64,
    pub position_m: f64,
    pub t_s: f64,
    pub speed_mps: f64,
    /// Filtered RSSI that fired the trigger.
    pub filtered_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvuState {
    pub phase: Phase,
    /// Written once, when the trigger fires.
    pub trigger: Option<TriggerAnchor>,
    pub payload: Option<BeaconPayload>,
    /// Limiting began before any payload decoded.
    pub fallback_engaged: bool,
    pub zone_entry_odometer_m: Option<f64>,
    pub active_limit_mps: f64,
    pub last_filtered_dbm: Option<f64>,
    /// A filtered value below the trigger level has been seen.
    pub seen_below_trigger: bool,
    /// Trigger fired without ever observing the level from below, i.e. the
    /// acquisition window ended after the vehicle was already inside the
    /// trigger radius.
    pub delayed_trigger: bool,
    pub dropped_samples: u64,
    pub decode_failures: u64,
    pub last_decode_error: Option<DecodeError>,
}

impl IvuState {
    pub fn new(config: &IvuConfig) -> Self {
        Self {
            phase: Phase::Idle,
            trigger: None,
            payload: None,
            fallback_engaged: false,
            zone_entry_odometer_m: None,
            active_limit_mps: config.max_legal_speed_mps(),
            last_filtered_dbm: None,
            seen_below_trigger: false,
            delayed_trigger: false,
            dropped_samples: 0,
            decode_failures: 0,
            last_decode_error: None,
        }
    }

    pub fn trigger_odometer_m(&self) -> Option<f64> {
        self.trigger.map(|a| a.odometer_m)
    }

    pub fn u_at_trigger_mps(&self) -> Option<f64> {
        self.trigger.map(|a| a.speed_mps)
    }

    /// The decoded payload, or the configured fallback when none decoded.
    pub fn effective_payload(&self, config: &IvuConfig) -> BeaconPayload {
        self.payload.unwrap_or_else(|| config.fallback_payload())
    }

    /// Feeds one RSSI measurement through the window and the protocol.
    pub fn on_rssi_sample(
        &mut self,
        window: &mut RssiWindow,
        sample: RssiSample,
        vehicle: &VehicleState,
        config: &IvuConfig,
    ) {
        if !window.push(sample) {
            self.dropped_samples += 1;
            return;
        }
        let filtered = window.latest_filtered();
        self.last_filtered_dbm = filtered;

        match self.phase {
            Phase::Idle => self.phase = Phase::Acquiring,
            Phase::Acquiring | Phase::Approaching | Phase::Departing => {
                // The window slides, so the direction is re-estimated on
                // every sample; an indeterminate trend keeps the last call.
                match classify_trend(window, config) {
                    Ok(Trend::Approaching) => self.phase = Phase::Approaching,
                    Ok(Trend::Departing) => self.phase = Phase::Departing,
                    Ok(Trend::Indeterminate) | Err(_) => {}
                }
                if let Some(y) = filtered {
                    if self.phase == Phase::Approaching && y >= config.trigger_rssi_dbm {
                        self.begin_limiting(sample.t_s, y, vehicle);
                    } else if y < config.trigger_rssi_dbm {
                        self.seen_below_trigger = true;
                    }
                }
            }
            Phase::Limiting | Phase::NearZeroZone => {}
        }
    }

    fn begin_limiting(&mut self, t_s: f64, filtered_dbm: f64, vehicle: &VehicleState) {
        debug_assert!(self.trigger.is_none());
        self.trigger = Some(TriggerAnchor {
            odometer_m: vehicle.odometer_m,
            position_m: vehicle.position_m,
            t_s,
            speed_mps: vehicle.speed_mps,
            filtered_dbm,
        });
        self.delayed_trigger = !self.seen_below_trigger;
        self.fallback_engaged = self.payload.is_none();
        self.phase = Phase::Limiting;
    }

    /// Records a decode attempt. The first good payload is kept; failures
    /// are counted but never fault the unit.
    pub fn on_beacon(&mut self, decode_result: Result<BeaconPayload, DecodeError>) {
        match decode_result {
            Ok(p) => {
                if self.payload.is_none() {
                    self.payload = Some(p);
                }
            }
            Err(e) => {
                self.decode_failures += 1;
                self.last_decode_error = Some(e);
            }
        }
    }

    /// Moves Limiting to NearZeroZone once the profile reaches the bump
    /// speed at `vehicle.odometer_m`, then stores and returns the limit.
    ///
    /// The zone starts at the bump site, or where the floor is reached if
    /// that is later. A slow vehicle reaches the floor early and crawls up
    /// to the bump site before the zone length starts counting.
    pub fn update_limit(
        &mut self,
        vehicle: &VehicleState,
        friction: &FrictionModel,
        config: &IvuConfig,
    ) -> f64 {
        if let (Phase::Limiting, Some(anchor)) = (self.phase, self.trigger) {
            let bump = self.effective_payload(config).bump_speed_mps();
            let profile =
                speed_at_distance_mps(anchor.speed_mps, friction, vehicle.odometer_m - anchor.odometer_m);
            if profile <= bump {
                self.phase = Phase::NearZeroZone;
                let bump_site = anchor.odometer_m + config.bump_distance_m;
                self.zone_entry_odometer_m = Some(vehicle.odometer_m.max(bump_site));
            }
        }
        self.active_limit_mps = active_speed_limit(self, vehicle, friction, config);
        self.active_limit_mps
    }
}

/// Limiter setting for the vehicle's odometer under the current state.
pub fn active_speed_limit(
    state: &IvuState,
    vehicle: &VehicleState,
    friction: &FrictionModel,
    config: &IvuConfig,
) -> f64 {
    let max_legal = config.max_legal_speed_mps();
    let payload = state.effective_payload(config);
    let bump = payload.bump_speed_mps().min(max_legal);
    match (state.phase, state.trigger) {
        (Phase::Limiting, Some(anchor)) => {
            let s = vehicle.odometer_m - anchor.odometer_m;
            speed_at_distance_mps(anchor.speed_mps, friction, s).clamp(bump, max_legal)
        }
        (Phase::NearZeroZone, _) => {
            let entry = state.zone_entry_odometer_m.unwrap_or(vehicle.odometer_m);
            if vehicle.odometer_m - entry >= f64::from(payload.zone_length_m) {
                max_legal
            } else {
                bump
            }
        }
        _ => max_legal,
    }
}

/// Convenience wrapper bundling the protocol state with its RSSI window.
#[derive(Debug, Clone)]
pub struct InVehicleUnit {
    pub config: IvuConfig,
    pub state: IvuState,
    pub window: RssiWindow,
}

impl InVehicleUnit {
    pub fn new(config: IvuConfig) -> Self {
        Self { state: IvuState::new(&config), window: RssiWindow::for_config(&config), config }
    }

    pub fn on_rssi_sample(&mut self, sample: RssiSample, vehicle: &VehicleState) {
        self.state.on_rssi_sample(&mut self.window, sample, vehicle, &self.config);
    }

    pub fn on_beacon(&mut self, decode_result: Result<BeaconPayload, DecodeError>) {
        self.state.on_beacon(decode_result);
    }

    pub fn update_limit(&mut self, vehicle: &VehicleState, friction: &FrictionModel) -> f64 {
        self.state.update_limit(vehicle, friction, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const U120: f64 = 120.0 / 3.6;

    fn vehicle_at(odometer_m: f64, speed_mps: f64) -> VehicleState {
        VehicleState { position_m: odometer_m, speed_mps, odometer_m, desired_speed_mps: U120 }
    }

    /// A unit that has classified an approach over a rising ramp ending
    /// below the trigger level.
    fn approaching_unit() -> InVehicleUnit {
        let mut ivu = InVehicleUnit::new(IvuConfig::default());
        let v = vehicle_at(0.0, U120);
        for i in 0..=100 {
            let t = i as f64 * 0.1;
            ivu.on_rssi_sample(RssiSample::new(t, -70.0 + 2.1 * t), &v);
        }
        assert_eq!(ivu.state.phase, Phase::Approaching);
        ivu
    }

    fn limiting_state(u: f64) -> IvuState {
        let cfg = IvuConfig::default();
        let mut s = IvuState::new(&cfg);
        s.phase = Phase::Limiting;
        s.payload = Some(BeaconPayload::default());
        s.trigger = Some(TriggerAnchor {
            odometer_m: 100.0,
            position_m: 100.0,
            t_s: 0.0,
            speed_mps: u,
            filtered_dbm: -47.9,
        });
        s
    }

    #[test]
    fn first_sample_enters_acquiring() {
        let mut ivu = InVehicleUnit::new(IvuConfig::default());
        assert_eq!(ivu.state.phase, Phase::Idle);
        ivu.on_rssi_sample(RssiSample::new(0.0, -80.0), &vehicle_at(0.0, U120));
        assert_eq!(ivu.state.phase, Phase::Acquiring);
    }

    #[test]
    fn upward_crossing_triggers_once() {
        let mut ivu = approaching_unit();
        // drive the filtered value from just under to just over -48 dBm
        let v = vehicle_at(250.0, U120);
        for (k, rssi) in [-49.0, -49.0, -49.0].into_iter().enumerate() {
            ivu.on_rssi_sample(RssiSample::new(10.1 + k as f64 * 0.1, rssi), &v);
        }
        assert_eq!(ivu.state.phase, Phase::Approaching);
        assert_eq!(ivu.state.last_filtered_dbm, Some(-49.0));
        let v = vehicle_at(260.0, U120);
        ivu.on_rssi_sample(RssiSample::new(10.4, -44.5), &v);
        assert_eq!(ivu.state.last_filtered_dbm, Some(-47.5));
        assert_eq!(ivu.state.phase, Phase::Limiting);
        assert_eq!(ivu.state.trigger_odometer_m(), Some(260.0));
        assert_eq!(ivu.state.u_at_trigger_mps(), Some(U120));
        assert!(!ivu.state.delayed_trigger);

        let later = vehicle_at(300.0, 20.0);
        ivu.on_rssi_sample(RssiSample::new(10.5, -30.0), &later);
        assert_eq!(ivu.state.trigger_odometer_m(), Some(260.0));
    }

    #[test]
    fn departing_never_triggers() {
        let mut ivu = InVehicleUnit::new(IvuConfig::default());
        let v = vehicle_at(0.0, U120);
        for i in 0..=100 {
            let t = i as f64 * 0.1;
            ivu.on_rssi_sample(RssiSample::new(t, -20.0 - 2.0 * t), &v);
        }
        assert_eq!(ivu.state.phase, Phase::Departing);
        ivu.on_rssi_sample(RssiSample::new(10.1, -40.0), &v);
        ivu.on_rssi_sample(RssiSample::new(10.2, -40.0), &v);
        ivu.on_rssi_sample(RssiSample::new(10.3, -40.0), &v);
        assert_eq!(ivu.state.last_filtered_dbm, Some(-40.0));
        assert_eq!(ivu.state.phase, Phase::Departing);
        assert!(ivu.state.trigger.is_none());
    }

    #[test]
    fn malformed_samples_are_counted() {
        let mut ivu = InVehicleUnit::new(IvuConfig::default());
        let v = vehicle_at(0.0, U120);
        ivu.on_rssi_sample(RssiSample::new(1.0, -80.0), &v);
        ivu.on_rssi_sample(RssiSample::new(0.5, -80.0), &v);
        ivu.on_rssi_sample(RssiSample::new(2.0, f64::NAN), &v);
        assert_eq!(ivu.state.dropped_samples, 2);
        assert_eq!(ivu.window.len(), 1);
    }

    #[test]
    fn payload_storage() {
        let cfg = IvuConfig::default();
        let mut s = IvuState::new(&cfg);
        let p = BeaconPayload::new(6, 20).unwrap();
        s.on_beacon(Ok(p));
        assert_eq!(s.payload, Some(p));
        let before = s.clone();
        s.on_beacon(Ok(p));
        assert_eq!(s, before);
        s.on_beacon(Ok(BeaconPayload::new(10, 50).unwrap()));
        assert_eq!(s.payload, Some(p));
        s.on_beacon(Err(DecodeError::BadLength(3)));
        assert_eq!(s.decode_failures, 1);
        assert_eq!(s.payload, Some(p));
    }

    #[test]
    fn corrupt_beacons_fall_back() {
        let mut ivu = approaching_unit();
        for _ in 0..20 {
            ivu.on_beacon(Err(DecodeError::BadCrc { found: 0, computed: 1 }));
        }
        let v = vehicle_at(300.0, U120);
        ivu.on_rssi_sample(RssiSample::new(10.1, -40.0), &v);
        ivu.on_rssi_sample(RssiSample::new(10.2, -40.0), &v);
        assert_eq!(ivu.state.phase, Phase::Limiting);
        assert!(ivu.state.fallback_engaged);
        let p = ivu.state.effective_payload(&ivu.config);
        assert_eq!((p.bump_speed_kmh, p.zone_length_m), (6, 20));
    }

    #[test]
    fn limit_follows_profile_then_floor() {
        let cfg = IvuConfig::default();
        let f = FrictionModel::default();
        let s = limiting_state(U120);
        let lim = active_speed_limit(&s, &vehicle_at(140.0, 25.0), &f, &cfg);
        assert!((lim - 23.48).abs() < 0.01);
        let lim = active_speed_limit(&s, &vehicle_at(179.4, 1.0), &f, &cfg);
        assert!((lim - 6.0 / 3.6).abs() < 1e-12);
        assert_eq!(active_speed_limit(&s, &vehicle_at(100.0, U120), &f, &cfg), U120);
    }

    #[test]
    fn zone_holds_then_releases() {
        let cfg = IvuConfig::default();
        let f = FrictionModel::default();
        let mut s = limiting_state(U120);
        let crawl = 6.0 / 3.6;
        assert_eq!(s.update_limit(&vehicle_at(179.3, crawl), &f, &cfg), crawl);
        assert_eq!(s.phase, Phase::NearZeroZone);
        assert_eq!(s.zone_entry_odometer_m, Some(180.0));
        assert_eq!(s.update_limit(&vehicle_at(190.0, crawl), &f, &cfg), crawl);
        assert_eq!(s.update_limit(&vehicle_at(199.99, crawl), &f, &cfg), crawl);
        assert_eq!(s.update_limit(&vehicle_at(200.0, crawl), &f, &cfg), U120);
    }

    #[test]
    fn late_payload_updates_floor() {
        let cfg = IvuConfig::default();
        let f = FrictionModel::default();
        let mut s = limiting_state(U120);
        s.payload = None;
        s.fallback_engaged = true;
        let v = vehicle_at(179.36, 3.0);
        assert!((active_speed_limit(&s, &v, &f, &cfg) - 6.0 / 3.6).abs() < 1e-12);
        s.on_beacon(Ok(BeaconPayload::new(12, 30).unwrap()));
        assert!((active_speed_limit(&s, &v, &f, &cfg) - 12.0 / 3.6).abs() < 1e-12);
    }

    #[test]
    fn slow_vehicle_is_never_bound() {
        let cfg = IvuConfig::default();
        let f = FrictionModel::default();
        let mut s = limiting_state(1.0);
        let lim = s.update_limit(&vehicle_at(100.0, 1.0), &f, &cfg);
        assert_eq!(s.phase, Phase::NearZeroZone);
        assert!(lim >= 1.0);
    }

    #[test]
    fn non_limiting_phases_use_max_legal() {
        let cfg = IvuConfig::default();
        let f = FrictionModel::default();
        let mut s = IvuState::new(&cfg);
        for phase in [Phase::Idle, Phase::Acquiring, Phase::Approaching, Phase::Departing] {
            s.phase = phase;
            assert_eq!(active_speed_limit(&s, &vehicle_at(5.0, 10.0), &f, &cfg), U120);
        }
    }

    #[test]
    fn config_validation() {
        assert!(IvuConfig::default().validate().is_ok());
        assert!(IvuConfig { trigger_rssi_dbm: 3.0, ..IvuConfig::default() }.validate().is_err());
        assert!(IvuConfig { fallback_speed_kmh: 13, ..IvuConfig::default() }.validate().is_err());
        assert!(IvuConfig { fallback_zone_m: 0, ..IvuConfig::default() }.validate().is_err());
    }
}
