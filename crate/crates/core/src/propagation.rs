//! Free-space RF channel: path loss, link budget, link margin, range
//! inversion and seeded log-normal shadowing.
//!
//! Every quantity stays in the logarithmic domain (dB, dBm). Nothing here
//! holds state, so all functions may be called concurrently.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("distance must be positive and finite, got {0} m")]
    InvalidDistance(f64),
    #[error("frequency must be positive and finite, got {0} Hz")]
    InvalidFrequency(f64),
    #[error("link margin is negative even at 1 m ({margin_db:.2} dB); no coverage")]
    NoCoverage { margin_db: f64 },
    #[error("RSSI {rssi_dbm} dBm exceeds the 1 m received power {max_dbm} dBm")]
    RssiAboveModel { rssi_dbm: f64, max_dbm: f64 },
    #[error("invalid radio parameters: {0}")]
    InvalidParams(&'static str),
}

/// Transmit/receive chain of a single RSU to IVU link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioLinkParams {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub tx_loss_db: f64,
    pub misc_loss_db: f64,
    pub rx_gain_dbi: f64,
    pub rx_loss_db: f64,
    pub rx_sensitivity_dbm: f64,
    pub frequency_hz: f64,
}

impl Default for RadioLinkParams {
    /// 2.4 GHz ISM link: 10 dBm transmitter, 15 dBi yagi, 8 dBi receive
    /// antenna, 5 dB each of transmitter, miscellaneous and receiver loss,
    /// -90 dBm sensitivity.
    fn default() -> Self {
        Self {
            tx_power_dbm: 10.0,
            tx_gain_dbi: 15.0,
            tx_loss_db: 5.0,
            misc_loss_db: 5.0,
            rx_gain_dbi: 8.0,
            rx_loss_db: 5.0,
            rx_sensitivity_dbm: -90.0,
            frequency_hz: 2.4e9,
        }
    }
}

impl RadioLinkParams {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(PropagationError::InvalidParams("frequency_hz must be > 0"));
        }
        let losses = [self.tx_loss_db, self.misc_loss_db, self.rx_loss_db];
        if losses.iter().any(|l| !(*l >= 0.0)) {
            return Err(PropagationError::InvalidParams("loss fields must be >= 0"));
        }
        if !(self.rx_sensitivity_dbm < self.tx_power_dbm) {
            return Err(PropagationError::InvalidParams(
                "rx_sensitivity_dbm must be below tx_power_dbm",
            ));
        }
        Ok(())
    }
}

fn check_distance(distance_m: f64) -> Result<(), PropagationError> {
    if distance_m > 0.0 && distance_m.is_finite() {
        Ok(())
    } else {
        Err(PropagationError::InvalidDistance(distance_m))
    }
}

/// Free-space path loss in dB at `distance_m` and `frequency_hz`.
pub fn fspl_db(distance_m: f64, frequency_hz: f64) -> Result<f64, PropagationError> {
    check_distance(distance_m)?;
    if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
        return Err(PropagationError::InvalidFrequency(frequency_hz));
    }
    Ok(20.0 * distance_m.log10()
        + 20.0 * frequency_hz.log10()
        + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10())
}

/// Received power (dBm) from the link budget at `distance_m`.
pub fn received_power_dbm(params: &RadioLinkParams, distance_m: f64) -> Result<f64, PropagationError> {
    let path_loss = fspl_db(distance_m, params.frequency_hz)?;
    Ok(params.tx_power_dbm + params.tx_gain_dbi - params.tx_loss_db - path_loss
        - params.misc_loss_db
        + params.rx_gain_dbi
        - params.rx_loss_db)
}

/// Received power minus receiver sensitivity (dB).
pub fn link_margin_db(params: &RadioLinkParams, distance_m: f64) -> Result<f64, PropagationError> {
    Ok(received_power_dbm(params, distance_m)? - params.rx_sensitivity_dbm)
}

/// Distance at which the link margin reaches zero.
///
/// The 20·log10(d) law inverts in closed form: every 20 dB of margin at 1 m
/// buys one decade of range.
pub fn max_range_m(params: &RadioLinkParams) -> Result<f64, PropagationError> {
    let margin_at_1m = link_margin_db(params, 1.0)?;
    if margin_at_1m <= 0.0 {
        return Err(PropagationError::NoCoverage { margin_db: margin_at_1m });
    }
    Ok(10f64.powf(margin_at_1m / 20.0))
}

/// Inverts [`received_power_dbm`] under pure free-space loss.
pub fn distance_from_rssi(params: &RadioLinkParams, rssi_dbm: f64) -> Result<f64, PropagationError> {
    let at_1m = received_power_dbm(params, 1.0)?;
    if !(rssi_dbm <= at_1m) {
        return Err(PropagationError::RssiAboveModel { rssi_dbm, max_dbm: at_1m });
    }
    Ok(10f64.powf((at_1m - rssi_dbm) / 20.0))
}

/// Additive log-normal shadowing (normal in dB).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingModel {
    pub sigma_db: f64,
    pub seed: u64,
}

impl Default for ShadowingModel {
    fn default() -> Self {
        Self { sigma_db: 3.0, seed: 1 }
    }
}

impl ShadowingModel {
    pub fn noiseless() -> Self {
        Self { sigma_db: 0.0, seed: 0 }
    }

    /// Standard normal draw that depends only on `(seed, draw_index)`.
    pub fn standard_normal(&self, draw_index: u64) -> f64 {
        StandardNormal.sample(&mut indexed_rng(self.seed, SHADOWING_STREAM, draw_index))
    }
}

const SHADOWING_STREAM: u64 = 0x5348_4144;

/// A fresh generator keyed by `(seed, purpose, index)`. Draws are indexed
/// rather than sequential so results never depend on call order.
pub(crate) fn indexed_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.rotate_left(32));
    rng.set_stream(index);
    rng
}

/// One noisy RSSI reading at `distance_m`.
pub fn sample_rssi(
    params: &RadioLinkParams,
    distance_m: f64,
    shadowing: &ShadowingModel,
    draw_index: u64,
) -> Result<f64, PropagationError> {
    let mean = received_power_dbm(params, distance_m)?;
    if shadowing.sigma_db == 0.0 {
        return Ok(mean);
    }
    Ok(mean + shadowing.sigma_db * shadowing.standard_normal(draw_index))
}
