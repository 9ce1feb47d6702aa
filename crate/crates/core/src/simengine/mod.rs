//! Fixed-step world simulation: RSU beacons, the channel, the IVU and the
//! vehicle, advanced together and recorded every tick.
//!
//! Per tick, in order:
//!
//! 1. apply scripted RSU changes that are due;
//! 2. for each beacon emitted in `[t, t + dt)`: drop it when the mean
//!    received power is below sensitivity, optionally lose or corrupt it,
//!    otherwise hand the RSSI and the decode result to the IVU;
//! 3. ask the IVU for the limit at the odometer the vehicle reaches at the
//!    end of the tick;
//! 4. record the trace row and step the vehicle.
//!
//! Runs are single-threaded and a pure function of the scenario.

mod channel;
mod scenario;
mod trace;

pub use channel::{ModelChannel, RssiSource, TabulatedChannel};
pub use scenario::{
    is_known_key, load_scenario, load_scenario_with_overrides, ChannelImpairments, RsuChange,
    RsuUpdate, Scenario, ScenarioError, SCENARIO_KEYS,
};
pub use trace::{format_sig6, write_trace_csv, BeaconStatus, TraceRecord, TRACE_HEADER};

use rand::Rng;

use crate::beacon::{beacon_ticks, decode_frame, encode_frame, BeaconPayload};
use crate::ivu::{InVehicleUnit, IvuState, RssiSample, TriggerAnchor};
use crate::kinematics::step_vehicle;
use crate::propagation::{distance_from_rssi, indexed_rng, received_power_dbm};

const LOSS_STREAM: u64 = 0x4C4F_5353;
const CORRUPTION_STREAM: u64 = 0x4352_5054;

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub trigger: Option<TriggerAnchor>,
    /// Road position where the noiseless budget equals the trigger level.
    pub analytic_trigger_position_m: Option<f64>,
    /// Anchor position minus the analytic position (positive = late).
    pub trigger_error_m: Option<f64>,
    /// RSU position minus anchor position.
    pub trigger_distance_m: Option<f64>,
    /// Speed at the anchor plus the nominal RSU-to-bump distance.
    pub bump_site_speed_mps: Option<f64>,
    pub zone_entry_odometer_m: Option<f64>,
    pub zone_exit_odometer_m: Option<f64>,
    pub payload: BeaconPayload,
    pub fallback_engaged: bool,
    pub delayed_trigger: bool,
    pub beacons_sent: u64,
    pub beacons_delivered: u64,
    pub decode_failures: u64,
}

impl RunSummary {
    /// The vehicle reached the bump site at no more than the payload speed
    /// plus `tolerance_mps`.
    pub fn bump_site_ok(&self, tolerance_mps: f64) -> bool {
        self.bump_site_speed_mps
            .is_some_and(|v| v <= self.payload.bump_speed_mps() + tolerance_mps)
    }

    pub fn one_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), format_sig6);
        match self.trigger {
            None => format!(
                "no trigger; beacons_sent={} beacons_delivered={}",
                self.beacons_sent, self.beacons_delivered
            ),
            Some(a) => format!(
                "trigger_odometer_m={} trigger_error_m={} bump_site_speed_mps={} zone_exit_odometer_m={} payload={}km/h/{}m{}",
                format_sig6(a.odometer_m),
                opt(self.trigger_error_m),
                opt(self.bump_site_speed_mps),
                opt(self.zone_exit_odometer_m),
                self.payload.bump_speed_kmh,
                self.payload.zone_length_m,
                if self.fallback_engaged { " (fallback)" } else { "" },
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    pub ivu: IvuState,
    pub summary: RunSummary,
}

/// Runs the scenario with the modelled free-space channel.
pub fn run(scenario: &Scenario) -> RunOutcome {
    let channel = ModelChannel { radio: scenario.rsu.radio, shadowing: scenario.shadowing };
    run_with_source(scenario, &channel)
}

fn unit_draw(seed: u64, stream: u64, index: u64) -> f64 {
    indexed_rng(seed, stream, index).random::<f64>()
}

/// Runs the scenario, taking per-beacon RSSI from `source`. Delivery is
/// still decided by the scenario's link budget.
pub fn run_with_source(scenario: &Scenario, source: &dyn RssiSource) -> RunOutcome {
    let dt = scenario.dt_s;
    let seed = scenario.shadowing.seed;
    let impair = scenario.channel;
    let mut rsu = scenario.rsu;
    let mut pending = scenario.rsu_updates.iter().peekable();
    let mut vehicle = scenario.vehicle_initial;
    let mut ivu = InVehicleUnit::new(scenario.ivu_config);
    let ticks = scenario.tick_count();
    let mut trace = Vec::with_capacity(ticks as usize);
    let (mut sent, mut delivered) = (0u64, 0u64);

    for k in 0..ticks {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        while let Some(u) = pending.next_if(|u| u.at_s <= t0 + 1e-9) {
            scenario::apply_update(&mut rsu, u);
        }

        let mut status = BeaconStatus::NoBeacon;
        let mut raw = None;
        for beacon in beacon_ticks(&rsu, t0, t1) {
            sent += 1;
            let separation = (rsu.rsu_position_m - vehicle.position_m).abs().max(impair.min_distance_m);
            let mean_power = received_power_dbm(&rsu.radio, separation)
                .expect("separation and frequency validated positive");
            if mean_power < rsu.radio.rx_sensitivity_dbm {
                status = BeaconStatus::BelowSensitivity;
                continue;
            }
            if impair.loss_probability > 0.0
                && unit_draw(seed, LOSS_STREAM, beacon.index) < impair.loss_probability
            {
                status = BeaconStatus::Lost;
                continue;
            }
            let Ok(rssi) = source.rssi_dbm(separation, beacon.index) else {
                status = BeaconStatus::Lost;
                continue;
            };
            delivered += 1;

            let mut frame = *encode_frame(&rsu.payload).expect("payload validated at load").as_bytes();
            if impair.corruption_probability > 0.0 {
                let mut rng = indexed_rng(seed, CORRUPTION_STREAM, beacon.index);
                if rng.random::<f64>() < impair.corruption_probability {
                    let octet = rng.random_range(0..frame.len());
                    frame[octet] ^= 1 << rng.random_range(0..8u32);
                }
            }
            let decoded = decode_frame(&frame);
            status = match decoded {
                Ok(_) => BeaconStatus::Decoded,
                Err(e) => BeaconStatus::Failed(e),
            };
            ivu.on_beacon(decoded);
            ivu.on_rssi_sample(RssiSample::new(beacon.t_s, rssi), &vehicle);
            raw = Some(rssi);
        }

        let limit = ivu.update_limit(&vehicle.coasted(dt), &scenario.friction);
        trace.push(TraceRecord {
            t_s: t0,
            position_m: vehicle.position_m,
            speed_mps: vehicle.speed_mps,
            rssi_raw_dbm: raw,
            rssi_filtered_dbm: ivu.state.last_filtered_dbm,
            ivu_phase: ivu.state.phase,
            active_limit_mps: limit,
            beacon_decode_status: status,
        });
        vehicle = step_vehicle(&vehicle, limit, &scenario.friction, scenario.accel_cap_mps2, dt);
    }

    let summary = summarize(scenario, &ivu, &trace, sent, delivered);
    RunOutcome { trace, ivu: ivu.state, summary }
}

/// Linear interpolation of speed at `position_m`; `None` if never reached.
pub fn speed_at_position(trace: &[TraceRecord], position_m: f64) -> Option<f64> {
    let idx = trace.partition_point(|r| r.position_m < position_m);
    let hi = trace.get(idx)?;
    if idx == 0 || hi.position_m == position_m {
        return Some(hi.speed_mps);
    }
    let lo = &trace[idx - 1];
    let w = (position_m - lo.position_m) / (hi.position_m - lo.position_m);
    Some(lo.speed_mps + w * (hi.speed_mps - lo.speed_mps))
}

fn summarize(
    scenario: &Scenario,
    ivu: &InVehicleUnit,
    trace: &[TraceRecord],
    sent: u64,
    delivered: u64,
) -> RunSummary {
    let state = &ivu.state;
    let payload = state.effective_payload(&ivu.config);
    let analytic = distance_from_rssi(&scenario.rsu.radio, scenario.ivu_config.trigger_rssi_dbm)
        .ok()
        .map(|d| scenario.rsu.rsu_position_m - d);
    let anchor = state.trigger;
    let zone_exit = state.zone_entry_odometer_m.map(|z| z + f64::from(payload.zone_length_m));
    RunSummary {
        trigger: anchor,
        analytic_trigger_position_m: analytic,
        trigger_error_m: anchor.zip(analytic).map(|(a, p)| a.position_m - p),
        trigger_distance_m: anchor.map(|a| scenario.rsu.rsu_position_m - a.position_m),
        bump_site_speed_mps: anchor
            .and_then(|a| speed_at_position(trace, a.position_m + scenario.bump_offset_m())),
        zone_entry_odometer_m: state.zone_entry_odometer_m,
        zone_exit_odometer_m: zone_exit,
        payload,
        fallback_engaged: state.fallback_engaged,
        delayed_trigger: state.delayed_trigger,
        beacons_sent: sent,
        beacons_delivered: delivered,
        decode_failures: state.decode_failures,
    }
}
