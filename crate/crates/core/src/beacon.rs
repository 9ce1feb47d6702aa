//! Roadside unit: beacon payload codec and transmission schedule.
//!
//! Wire format, 5 octets:
//!
//! ```text
//! +------+-------------+-----------------------+------+
//! | 0xB5 | speed (u8)  | zone length (u16, LE) | crc8 |
//! +------+-------------+-----------------------+------+
//! ```
//!
//! The CRC is CRC-8 with polynomial 0x07, zero init, no reflection and no
//! final xor, computed over the first four octets.

use thiserror::Error;

use crate::propagation::RadioLinkParams;

pub const FRAME_MAGIC: u8 = 0xB5;
pub const FRAME_LEN: usize = 5;
/// Highest speed the near-zero zone may carry (km/h).
pub const MAX_BUMP_SPEED_KMH: u8 = 12;
pub const DEFAULT_BEACON_INTERVAL_S: f64 = 0.1;

const CRC8_POLY: u8 = 0x07;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("crc8 input is empty")]
    EmptyInput,
    #[error("bump speed {0} km/h outside 1..=12")]
    SpeedOutOfRange(u8),
    #[error("zone length must be positive")]
    ZeroZoneLength,
}

/// Reasons a received frame is rejected. Each variant is distinguishable so
/// the trace can record why a beacon failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame is {0} octets, expected 5")]
    BadLength(usize),
    #[error("bad magic 0x{0:02X}")]
    BadMagic(u8),
    #[error("crc mismatch: frame carries 0x{found:02X}, computed 0x{computed:02X}")]
    BadCrc { found: u8, computed: u8 },
    #[error("payload out of range: {0}")]
    OutOfRange(CodecError),
}

impl DecodeError {
    pub fn label(&self) -> &'static str {
        match self {
            DecodeError::BadLength(_) => "bad_length",
            DecodeError::BadMagic(_) => "bad_magic",
            DecodeError::BadCrc { .. } => "bad_crc",
            DecodeError::OutOfRange(_) => "out_of_range",
        }
    }
}

/// Application data broadcast by the RSU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BeaconPayload {
    pub bump_speed_kmh: u8,
    /// Distance over which the bump speed is held (m).
    pub zone_length_m: u16,
}

impl Default for BeaconPayload {
    fn default() -> Self {
        Self { bump_speed_kmh: 6, zone_length_m: 20 }
    }
}

impl BeaconPayload {
    pub fn new(bump_speed_kmh: u8, zone_length_m: u16) -> Result<Self, CodecError> {
        let p = Self { bump_speed_kmh, zone_length_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.bump_speed_kmh == 0 || self.bump_speed_kmh > MAX_BUMP_SPEED_KMH {
            return Err(CodecError::SpeedOutOfRange(self.bump_speed_kmh));
        }
        if self.zone_length_m == 0 {
            return Err(CodecError::ZeroZoneLength);
        }
        Ok(())
    }

    pub fn bump_speed_mps(&self) -> f64 {
        f64::from(self.bump_speed_kmh) / 3.6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconFrame([u8; FRAME_LEN]);

impl BeaconFrame {
    pub fn as_bytes(&self) -> &[u8; FRAME_LEN] {
        &self.0
    }

    pub fn header_byte(&self) -> u8 {
        self.0[0]
    }

    pub fn payload_bytes(&self) -> &[u8] {
        &self.0[1..4]
    }

    pub fn crc_byte(&self) -> u8 {
        self.0[4]
    }
}

/// Table-free CRC-8/0x07 (the SMBus variant).
pub fn crc8(data: &[u8]) -> Result<u8, CodecError> {
    if data.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    let mut crc = 0u8;
    for &byte in data {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ CRC8_POLY } else { crc << 1 };
        }
    }
    Ok(crc)
}

pub fn encode_frame(payload: &BeaconPayload) -> Result<BeaconFrame, CodecError> {
    payload.validate()?;
    let zone = payload.zone_length_m.to_le_bytes();
    let mut bytes = [FRAME_MAGIC, payload.bump_speed_kmh, zone[0], zone[1], 0];
    bytes[4] = crc8(&bytes[..4])?;
    Ok(BeaconFrame(bytes))
}

pub fn decode_frame(frame: &[u8]) -> Result<BeaconPayload, DecodeError> {
    let bytes: &[u8; FRAME_LEN] =
        frame.try_into().map_err(|_| DecodeError::BadLength(frame.len()))?;
    if bytes[0] != FRAME_MAGIC {
        return Err(DecodeError::BadMagic(bytes[0]));
    }
    let computed = crc8(&bytes[..4]).expect("non-empty prefix");
    if computed != bytes[4] {
        return Err(DecodeError::BadCrc { found: bytes[4], computed });
    }
    let payload = BeaconPayload {
        bump_speed_kmh: bytes[1],
        zone_length_m: u16::from_le_bytes([bytes[2], bytes[3]]),
    };
    payload.validate().map_err(DecodeError::OutOfRange)?;
    Ok(payload)
}

/// Runtime-adjustable RSU settings. A scenario may swap in a new value at a
/// scripted time to model remote reconfiguration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsuConfig {
    pub enabled: bool,
    pub beacon_interval_s: f64,
    pub payload: BeaconPayload,
    pub radio: RadioLinkParams,
    pub rsu_position_m: f64,
}

impl Default for RsuConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            beacon_interval_s: DEFAULT_BEACON_INTERVAL_S,
            payload: BeaconPayload::default(),
            radio: RadioLinkParams::default(),
            rsu_position_m: 1000.0,
        }
    }
}

/// A beacon emission: its sequence index on the RSU clock and its time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconTick {
    pub index: u64,
    pub t_s: f64,
}

/// Index of the first beacon at or after `t_s`. Times within a relative
/// 1e-9 of a grid point snap to it so that `k * dt` boundaries never lose
/// or duplicate a beacon to rounding.
fn first_index_at_or_after(t_s: f64, interval_s: f64) -> u64 {
    let x = t_s / interval_s;
    let nearest = x.round();
    let idx = if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) { nearest } else { x.ceil() };
    idx.max(0.0) as u64
}

/// Beacons emitted in `[t_start_s, t_end_s)`, with their sequence indices.
pub fn beacon_ticks(config: &RsuConfig, t_start_s: f64, t_end_s: f64) -> Vec<BeaconTick> {
    if !config.enabled || !(t_end_s > t_start_s) {
        return Vec::new();
    }
    let interval = config.beacon_interval_s;
    let first = first_index_at_or_after(t_start_s, interval);
    let end = first_index_at_or_after(t_end_s, interval);
    (first..end).map(|index| BeaconTick { index, t_s: index as f64 * interval }).collect()
}

/// Transmission timestamps in `[t_start_s, t_end_s)`; empty when disabled.
pub fn beacons_in_interval(config: &RsuConfig, t_start_s: f64, t_end_s: f64) -> Vec<f64> {
    beacon_ticks(config, t_start_s, t_end_s).into_iter().map(|b| b.t_s).collect()
}
