use std::fmt::Write as _;

use crate::beacon::DecodeError;
use crate::ivu::Phase;

pub const TRACE_HEADER: &str =
    "t_s,position_m,speed_mps,rssi_raw_dbm,rssi_filtered_dbm,ivu_phase,active_limit_mps,beacon_decode_status";

/// What happened to the beacon handled in a tick, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeaconStatus {
    NoBeacon,
    Decoded,
    BelowSensitivity,
    Lost,
    Failed(DecodeError),
}

impl BeaconStatus {
    pub fn label(&self) -> &'static str {
        match self {
            BeaconStatus::NoBeacon => "none",
            BeaconStatus::Decoded => "ok",
            BeaconStatus::BelowSensitivity => "below_sensitivity",
            BeaconStatus::Lost => "lost",
            BeaconStatus::Failed(e) => e.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t_s: f64,
    pub position_m: f64,
    pub speed_mps: f64,
    pub rssi_raw_dbm: Option<f64>,
    pub rssi_filtered_dbm: Option<f64>,
    pub ivu_phase: Phase,
    pub active_limit_mps: f64,
    pub beacon_decode_status: BeaconStatus,
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros
/// trimmed, scientific notation outside [1e-4, 1e6).
pub fn format_sig6(v: f64) -> String {
    const DIGITS: i32 = 6;
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn push_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        out.push_str(&format_sig6(v));
    }
}

/// Renders the trace as CSV: the header row, then one row per record.
pub fn write_trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let _ = write!(out, "{},{},{},", format_sig6(r.t_s), format_sig6(r.position_m), format_sig6(r.speed_mps));
        push_opt(&mut out, r.rssi_raw_dbm);
        out.push(',');
        push_opt(&mut out, r.rssi_filtered_dbm);
        let _ = writeln!(
            out,
            ",{},{},{}",
            r.ivu_phase,
            format_sig6(r.active_limit_mps),
            r.beacon_decode_status.label()
        );
    }
    out
}
