use std::collections::VecDeque;

use thiserror::Error;

use super::IvuConfig;

/// Slack for comparing beacon timestamps that sit on a 0.1 s grid.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FilterError {
    #[error("filter of order {order} needs more than {order} samples, got {len}")]
    TooShort { order: usize, len: usize },
    #[error("window spans {span_s:.3} s, classification needs {required_s:.3} s")]
    InsufficientData { span_s: f64, required_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiSample {
    pub t_s: f64,
    pub rssi_dbm: f64,
}

impl RssiSample {
    pub fn new(t_s: f64, rssi_dbm: f64) -> Self {
        Self { t_s, rssi_dbm }
    }
}

/// Direction of travel relative to the RSU, inferred from the RSSI trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Approaching,
    Departing,
    Indeterminate,
}

/// Moving-average FIR of the given order: each output is the mean of the
/// current input and the `order` inputs before it, so the output is
/// `order` samples shorter than the input.
pub fn fir_filter(samples: &[f64], order: usize) -> Result<Vec<f64>, FilterError> {
    if samples.len() <= order {
        return Err(FilterError::TooShort { order, len: samples.len() });
    }
    let taps = (order + 1) as f64;
    Ok(samples.windows(order + 1).map(|w| w.iter().sum::<f64>() / taps).collect())
}

/// Time-ordered RSSI history covering the most recent `capacity_s` seconds.
#[derive(Debug, Clone)]
pub struct RssiWindow {
    samples: VecDeque<RssiSample>,
    capacity_s: f64,
    order: usize,
    rejected: u64,
}

impl RssiWindow {
    pub fn new(capacity_s: f64, order: usize) -> Self {
        Self { samples: VecDeque::new(), capacity_s, order, rejected: 0 }
    }

    pub fn for_config(config: &IvuConfig) -> Self {
        Self::new(config.acquisition_s, config.filter_order)
    }

    /// Appends a sample, evicting anything older than the capacity. Samples
    /// that are non-finite or not strictly later than the newest one are
    /// dropped and counted; returns whether the sample was kept.
    pub fn push(&mut self, sample: RssiSample) -> bool {
        let in_order = self.samples.back().is_none_or(|last| sample.t_s > last.t_s);
        if !in_order || !sample.t_s.is_finite() || !sample.rssi_dbm.is_finite() {
            self.rejected += 1;
            return false;
        }
        self.samples.push_back(sample);
        let horizon = sample.t_s - self.capacity_s - TIME_EPS;
        while self.samples.front().is_some_and(|s| s.t_s < horizon) {
            self.samples.pop_front();
        }
        true
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity_s(&self) -> f64 {
        self.capacity_s
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn span_s(&self) -> f64 {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => b.t_s - a.t_s,
            _ => 0.0,
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = &RssiSample> {
        self.samples.iter()
    }

    pub fn raw(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rssi_dbm).collect()
    }

    /// Filtered values over the whole window.
    pub fn filtered(&self) -> Result<Vec<f64>, FilterError> {
        fir_filter(&self.raw(), self.order)
    }

    /// The filter output for the newest sample, once enough samples exist.
    pub fn latest_filtered(&self) -> Option<f64> {
        let n = self.order + 1;
        if self.samples.len() < n {
            return None;
        }
        Some(self.samples.iter().rev().take(n).map(|s| s.rssi_dbm).sum::<f64>() / n as f64)
    }
}

/// Classifies the trend from the first and last filtered values in the
/// window, with `trend_hysteresis_db` of dead band.
pub fn classify_trend(window: &RssiWindow, config: &IvuConfig) -> Result<Trend, FilterError> {
    let span_s = window.span_s();
    if span_s + TIME_EPS < config.acquisition_s {
        return Err(FilterError::InsufficientData { span_s, required_s: config.acquisition_s });
    }
    let filtered = window.filtered()?;
    let rise = filtered[filtered.len() - 1] - filtered[0];
    Ok(if rise >= config.trend_hysteresis_db {
        Trend::Approaching
    } else if rise <= -config.trend_hysteresis_db {
        Trend::Departing
    } else {
        Trend::Indeterminate
    })
}
