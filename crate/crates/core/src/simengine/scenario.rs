//! Scenario documents: flat `key = value` text with `#` comments.
//!
//! Every key is namespaced by the subsystem it configures. Keys left out
//! keep the canonical defaults, so an empty document is the reference
//! scenario: 120 km/h approach, RSU at 1000 m, bump site 80 m beyond it.
//!
//! Scripted RSU reconfiguration uses `rsu.at.<time_s>.<field>` with field
//! one of `enabled`, `bump_speed_kmh`, `zone_length_m`.

use std::str::FromStr;

use thiserror::Error;

use crate::beacon::{BeaconPayload, RsuConfig};
use crate::ivu::IvuConfig;
use crate::kinematics::{kmh_to_mps, FrictionModel, VehicleState, DEFAULT_ACCEL_CAP_MPS2};
use crate::propagation::{RadioLinkParams, ShadowingModel};

/// Upper bound on ticks per run, so a typo in `sim.dt_s` cannot hang a sweep.
const MAX_TICKS: f64 = 5.0e7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, value: String, reason: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Per-beacon impairments beyond the deterministic link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelImpairments {
    /// Probability a deliverable beacon is lost outright (no RSSI, no payload).
    pub loss_probability: f64,
    /// Probability a received frame arrives with a corrupted octet.
    pub corruption_probability: f64,
    /// Floor on the along-road separation used for path loss (m).
    pub min_distance_m: f64,
}

impl Default for ChannelImpairments {
    fn default() -> Self {
        Self { loss_probability: 0.0, corruption_probability: 0.0, min_distance_m: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RsuChange {
    Enabled(bool),
    BumpSpeedKmh(u8),
    ZoneLengthM(u16),
}

/// RSU reconfiguration applied from `at_s` onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsuUpdate {
    pub at_s: f64,
    pub change: RsuChange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub friction: FrictionModel,
    /// Carries the radio parameters used by the channel.
    pub rsu: RsuConfig,
    pub rsu_updates: Vec<RsuUpdate>,
    pub ivu_config: IvuConfig,
    pub shadowing: ShadowingModel,
    pub channel: ChannelImpairments,
    pub vehicle_initial: VehicleState,
    pub accel_cap_mps2: f64,
    pub bump_site_m: f64,
    pub dt_s: f64,
    pub duration_s: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        let rsu = RsuConfig::default();
        Self {
            friction: FrictionModel::default(),
            rsu,
            rsu_updates: Vec::new(),
            ivu_config: IvuConfig::default(),
            shadowing: ShadowingModel::default(),
            channel: ChannelImpairments::default(),
            vehicle_initial: VehicleState::cruising(0.0, kmh_to_mps(120.0)),
            accel_cap_mps2: DEFAULT_ACCEL_CAP_MPS2,
            bump_site_m: rsu.rsu_position_m + 80.0,
            dt_s: 0.01,
            duration_s: 75.0,
        }
    }
}

/// Every plain key a scenario document may set.
pub const SCENARIO_KEYS: &[&str] = &[
    "radio.tx_power_dbm",
    "radio.tx_gain_dbi",
    "radio.tx_loss_db",
    "radio.misc_loss_db",
    "radio.rx_gain_dbi",
    "radio.rx_loss_db",
    "radio.rx_sensitivity_dbm",
    "radio.frequency_hz",
    "friction.mu",
    "friction.g_decel_mps2",
    "rsu.enabled",
    "rsu.beacon_interval_s",
    "rsu.position_m",
    "rsu.bump_speed_kmh",
    "rsu.zone_length_m",
    "ivu.trigger_rssi_dbm",
    "ivu.acquisition_s",
    "ivu.max_legal_speed_kmh",
    "ivu.fallback_speed_kmh",
    "ivu.fallback_zone_m",
    "ivu.trend_hysteresis_db",
    "ivu.filter_order",
    "shadowing.sigma_db",
    "shadowing.seed",
    "channel.loss_probability",
    "channel.corruption_probability",
    "channel.min_distance_m",
    "vehicle.initial_position_m",
    "vehicle.initial_speed_kmh",
    "vehicle.desired_speed_kmh",
    "vehicle.accel_cap_mps2",
    "road.bump_site_m",
    "sim.dt_s",
    "sim.duration_s",
];

pub fn is_known_key(key: &str) -> bool {
    SCENARIO_KEYS.contains(&key) || parse_scripted_key(key).is_some()
}

fn parse_scripted_key(key: &str) -> Option<(f64, &str)> {
    let rest = key.strip_prefix("rsu.at.")?;
    let (time, field) = rest.rsplit_once('.')?;
    let at_s = time.parse::<f64>().ok().filter(|t| t.is_finite() && *t >= 0.0)?;
    matches!(field, "enabled" | "bump_speed_kmh" | "zone_length_m").then_some((at_s, field))
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T, ScenarioError>
where
    T::Err: std::fmt::Display,
{
    e.value.parse::<T>().map_err(|err| ScenarioError::InvalidValue {
        line: e.line,
        key: e.key.to_string(),
        value: e.value.to_string(),
        reason: err.to_string(),
    })
}

fn parse_f64(e: &Entry) -> Result<f64, ScenarioError> {
    let v: f64 = parse_value(e)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScenarioError::InvalidValue {
            line: e.line,
            key: e.key.to_string(),
            value: e.value.to_string(),
            reason: "value must be finite".into(),
        })
    }
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>, ScenarioError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| ScenarioError::Syntax { line, text: content.to_string() })?;
        if !is_known_key(key) {
            return Err(ScenarioError::UnknownKey { line, key: key.to_string() });
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(ScenarioError::DuplicateKey { line, key: key.to_string() });
        }
        entries.push(Entry { line, key, value });
    }
    Ok(entries)
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    load_scenario_with_overrides(text, &[])
}

/// Like [`load_scenario`], with `(key, value)` overrides applied after the
/// document. Override errors report line 0.
pub fn load_scenario_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<Scenario, ScenarioError> {
    let mut entries = tokenize(text)?;
    for (key, value) in overrides {
        if !is_known_key(key) {
            return Err(ScenarioError::UnknownKey { line: 0, key: key.clone() });
        }
        entries.retain(|e| e.key != key.as_str());
        entries.push(Entry { line: 0, key: key.as_str(), value: value.as_str() });
    }

    let mut sc = Scenario::default();
    let mut initial_speed_kmh = 120.0;
    let mut desired_speed_kmh: Option<f64> = None;
    let mut bump_site_m: Option<f64> = None;

    for e in &entries {
        let radio = &mut sc.rsu.radio;
        match e.key {
            "radio.tx_power_dbm" => radio.tx_power_dbm = parse_f64(e)?,
            "radio.tx_gain_dbi" => radio.tx_gain_dbi = parse_f64(e)?,
            "radio.tx_loss_db" => radio.tx_loss_db = parse_f64(e)?,
            "radio.misc_loss_db" => radio.misc_loss_db = parse_f64(e)?,
            "radio.rx_gain_dbi" => radio.rx_gain_dbi = parse_f64(e)?,
            "radio.rx_loss_db" => radio.rx_loss_db = parse_f64(e)?,
            "radio.rx_sensitivity_dbm" => radio.rx_sensitivity_dbm = parse_f64(e)?,
            "radio.frequency_hz" => radio.frequency_hz = parse_f64(e)?,
            "friction.mu" => sc.friction.mu = parse_f64(e)?,
            "friction.g_decel_mps2" => sc.friction.g_decel_mps2 = parse_f64(e)?,
            "rsu.enabled" => sc.rsu.enabled = parse_value(e)?,
            "rsu.beacon_interval_s" => sc.rsu.beacon_interval_s = parse_f64(e)?,
            "rsu.position_m" => sc.rsu.rsu_position_m = parse_f64(e)?,
            "rsu.bump_speed_kmh" => sc.rsu.payload.bump_speed_kmh = parse_value(e)?,
            "rsu.zone_length_m" => sc.rsu.payload.zone_length_m = parse_value(e)?,
            "ivu.trigger_rssi_dbm" => sc.ivu_config.trigger_rssi_dbm = parse_f64(e)?,
            "ivu.acquisition_s" => sc.ivu_config.acquisition_s = parse_f64(e)?,
            "ivu.max_legal_speed_kmh" => sc.ivu_config.max_legal_speed_kmh = parse_f64(e)?,
            "ivu.fallback_speed_kmh" => sc.ivu_config.fallback_speed_kmh = parse_value(e)?,
            "ivu.fallback_zone_m" => sc.ivu_config.fallback_zone_m = parse_value(e)?,
            "ivu.trend_hysteresis_db" => sc.ivu_config.trend_hysteresis_db = parse_f64(e)?,
            "ivu.filter_order" => sc.ivu_config.filter_order = parse_value(e)?,
            "shadowing.sigma_db" => sc.shadowing.sigma_db = parse_f64(e)?,
            "shadowing.seed" => sc.shadowing.seed = parse_value(e)?,
            "channel.loss_probability" => sc.channel.loss_probability = parse_f64(e)?,
            "channel.corruption_probability" => sc.channel.corruption_probability = parse_f64(e)?,
            "channel.min_distance_m" => sc.channel.min_distance_m = parse_f64(e)?,
            "vehicle.initial_position_m" => sc.vehicle_initial.position_m = parse_f64(e)?,
            "vehicle.initial_speed_kmh" => initial_speed_kmh = parse_f64(e)?,
            "vehicle.desired_speed_kmh" => desired_speed_kmh = Some(parse_f64(e)?),
            "vehicle.accel_cap_mps2" => sc.accel_cap_mps2 = parse_f64(e)?,
            "road.bump_site_m" => bump_site_m = Some(parse_f64(e)?),
            "sim.dt_s" => sc.dt_s = parse_f64(e)?,
            "sim.duration_s" => sc.duration_s = parse_f64(e)?,
            key => {
                let (at_s, field) = parse_scripted_key(key).expect("key checked in tokenize");
                let change = match field {
                    "enabled" => RsuChange::Enabled(parse_value(e)?),
                    "bump_speed_kmh" => RsuChange::BumpSpeedKmh(parse_value(e)?),
                    _ => RsuChange::ZoneLengthM(parse_value(e)?),
                };
                sc.rsu_updates.push(RsuUpdate { at_s, change });
            }
        }
    }

    sc.rsu_updates.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
    sc.vehicle_initial.speed_mps = kmh_to_mps(initial_speed_kmh);
    sc.vehicle_initial.desired_speed_mps = kmh_to_mps(desired_speed_kmh.unwrap_or(initial_speed_kmh));
    sc.vehicle_initial.odometer_m = 0.0;
    sc.bump_site_m = bump_site_m.unwrap_or(sc.rsu.rsu_position_m + 80.0);
    // the IVU is told the trigger-to-bump distance by the road layout
    sc.ivu_config.bump_distance_m = sc.bump_offset_m();
    sc.validate()?;
    Ok(sc)
}

fn invariant(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant(msg.into())
}

impl Scenario {
    pub fn radio(&self) -> &RadioLinkParams {
        &self.rsu.radio
    }

    /// Distance from the RSU to the bump site; the nominal braking distance.
    pub fn bump_offset_m(&self) -> f64 {
        self.bump_site_m - self.rsu.rsu_position_m
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.rsu.radio.validate().map_err(|e| invariant(e.to_string()))?;
        self.friction.validate().map_err(|e| invariant(format!("friction: {e}")))?;
        if !(self.rsu.beacon_interval_s > 0.0) {
            return Err(invariant("rsu.beacon_interval_s must be > 0"));
        }
        self.rsu.payload.validate().map_err(|e| invariant(format!("rsu payload: {e}")))?;
        for u in &self.rsu_updates {
            let mut p = self.rsu.payload;
            match u.change {
                RsuChange::BumpSpeedKmh(s) => p.bump_speed_kmh = s,
                RsuChange::ZoneLengthM(z) => p.zone_length_m = z,
                RsuChange::Enabled(_) => continue,
            }
            p.validate().map_err(|e| invariant(format!("rsu.at.{}: {e}", u.at_s)))?;
        }
        self.ivu_config.validate().map_err(invariant)?;
        if !(self.shadowing.sigma_db >= 0.0) {
            return Err(invariant("shadowing.sigma_db must be >= 0"));
        }
        let c = &self.channel;
        if !(0.0..=1.0).contains(&c.loss_probability) {
            return Err(invariant("channel.loss_probability must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&c.corruption_probability) {
            return Err(invariant("channel.corruption_probability must be in [0, 1]"));
        }
        if !(c.min_distance_m > 0.0) {
            return Err(invariant("channel.min_distance_m must be > 0"));
        }
        let v = &self.vehicle_initial;
        if !(v.speed_mps >= 0.0) {
            return Err(invariant("vehicle.initial_speed_kmh must be >= 0"));
        }
        if !(v.desired_speed_mps >= 0.0) {
            return Err(invariant("vehicle.desired_speed_kmh must be >= 0"));
        }
        if !(self.accel_cap_mps2 > 0.0) {
            return Err(invariant("vehicle.accel_cap_mps2 must be > 0"));
        }
        if !(v.position_m < self.rsu.rsu_position_m) {
            return Err(invariant("vehicle must start before the RSU (vehicle.initial_position_m < rsu.position_m)"));
        }
        if !(self.bump_site_m > self.rsu.rsu_position_m) {
            return Err(invariant("road.bump_site_m must lie beyond rsu.position_m"));
        }
        if !(self.dt_s > 0.0) {
            return Err(invariant("sim.dt_s must be > 0"));
        }
        if !(self.duration_s > 0.0) {
            return Err(invariant("sim.duration_s must be > 0"));
        }
        if self.duration_s / self.dt_s > MAX_TICKS {
            return Err(invariant("sim.duration_s / sim.dt_s exceeds the tick budget"));
        }
        Ok(())
    }
}

/// Applies one scripted change to the live RSU configuration.
pub(crate) fn apply_update(rsu: &mut RsuConfig, update: &RsuUpdate) {
    match update.change {
        RsuChange::Enabled(on) => rsu.enabled = on,
        RsuChange::BumpSpeedKmh(s) => rsu.payload = BeaconPayload { bump_speed_kmh: s, ..rsu.payload },
        RsuChange::ZoneLengthM(z) => rsu.payload = BeaconPayload { zone_length_m: z, ..rsu.payload },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_canonical() {
        let sc = load_scenario("").unwrap();
        assert_eq!(sc, Scenario::default());
        assert_eq!(sc.bump_offset_m(), 80.0);
        assert!((sc.vehicle_initial.speed_mps - 120.0 / 3.6).abs() < 1e-12);
        assert_eq!(sc.rsu.radio, RadioLinkParams::default());
        assert_eq!(sc.ivu_config.trigger_rssi_dbm, -48.0);
        assert_eq!(sc.rsu.beacon_interval_s, 0.1);
        assert_eq!(sc.dt_s, 0.01);
        assert_eq!(sc.friction, FrictionModel { mu: 0.7, g_decel_mps2: 10.0 });
    }

    #[test]
    fn comments_and_blank_lines() {
        let sc = load_scenario("# header\n\n  friction.mu = 0.8   # drier road\n").unwrap();
        assert_eq!(sc.friction.mu, 0.8);
    }

    #[test]
    fn mu_above_one_is_an_invariant_error() {
        let err = load_scenario("friction.mu = 1.5").unwrap_err();
        assert!(matches!(&err, ScenarioError::Invariant(m) if m.contains("mu")), "{err}");
    }

    #[test]
    fn initial_speed_sets_desired_speed() {
        let sc = load_scenario("vehicle.initial_speed_kmh = 80").unwrap();
        assert!((sc.vehicle_initial.speed_mps - 80.0 / 3.6).abs() < 1e-12);
        assert_eq!(sc.vehicle_initial.desired_speed_mps, sc.vehicle_initial.speed_mps);
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(
            load_scenario("friction.mu = 0.7\nbogus.key = 3").unwrap_err(),
            ScenarioError::UnknownKey { line: 2, key: "bogus.key".into() }
        );
        assert!(matches!(
            load_scenario("\n\nfriction.mu 0.7").unwrap_err(),
            ScenarioError::Syntax { line: 3, .. }
        ));
        assert!(matches!(
            load_scenario("friction.mu = fast").unwrap_err(),
            ScenarioError::InvalidValue { line: 1, .. }
        ));
        assert!(matches!(
            load_scenario("sim.dt_s = 0.01\nsim.dt_s = 0.02").unwrap_err(),
            ScenarioError::DuplicateKey { line: 2, .. }
        ));
        assert!(matches!(
            load_scenario("rsu.bump_speed_kmh = 300").unwrap_err(),
            ScenarioError::InvalidValue { .. }
        ));
    }

    #[test]
    fn geometry_invariants() {
        assert!(load_scenario("vehicle.initial_position_m = 1200").is_err());
        assert!(load_scenario("road.bump_site_m = 900").is_err());
        assert!(load_scenario("rsu.bump_speed_kmh = 13").is_err());
        assert!(load_scenario("sim.dt_s = 0").is_err());
        assert!(load_scenario("channel.loss_probability = 1.2").is_err());
        assert!(load_scenario("shadowing.sigma_db = -1").is_err());
        assert!(load_scenario("rsu.beacon_interval_s = 0").is_err());
    }

    #[test]
    fn bump_site_follows_rsu_when_unset() {
        let sc = load_scenario("rsu.position_m = 500").unwrap();
        assert_eq!(sc.bump_site_m, 580.0);
    }

    #[test]
    fn scripted_updates() {
        let sc = load_scenario("rsu.at.20.enabled = false\nrsu.at.5.bump_speed_kmh = 10").unwrap();
        assert_eq!(
            sc.rsu_updates,
            vec![
                RsuUpdate { at_s: 5.0, change: RsuChange::BumpSpeedKmh(10) },
                RsuUpdate { at_s: 20.0, change: RsuChange::Enabled(false) },
            ]
        );
        assert!(load_scenario("rsu.at.5.bump_speed_kmh = 20").is_err());
        assert!(matches!(load_scenario("rsu.at.x.enabled = true"), Err(ScenarioError::UnknownKey { .. })));
        assert!(matches!(load_scenario("rsu.at.5.position_m = 1"), Err(ScenarioError::UnknownKey { .. })));
    }

    #[test]
    fn overrides_replace_document_values() {
        let ov = vec![("shadowing.seed".to_string(), "17".to_string())];
        let sc = load_scenario_with_overrides("shadowing.seed = 3", &ov).unwrap();
        assert_eq!(sc.shadowing.seed, 17);
        let ov = vec![("nope".to_string(), "1".to_string())];
        assert!(matches!(
            load_scenario_with_overrides("", &ov),
            Err(ScenarioError::UnknownKey { line: 0, .. })
        ));
    }
}
