//! Free-space satellite/ground link: path loss, SNR, Shannon rate and
//! model-exchange time. Everything here works in linear units; dB only
//! appears in the conversion helpers used at the configuration boundary.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::orbital::EARTH;

pub const BOLTZMANN: f64 = 1.380649e-23;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmit power, watts.
    pub power: f64,
    /// Satellite antenna gain (linear).
    pub gain_sat: f64,
    /// Ground station antenna gain (linear).
    pub gain_gs: f64,
    pub bandwidth: f64,
    pub noise_temp: f64,
    pub carrier: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("transmit power (W)", self.power),
            ("satellite gain", self.gain_sat),
            ("ground station gain", self.gain_gs),
            ("bandwidth (Hz)", self.bandwidth),
            ("noise temperature (K)", self.noise_temp),
            ("carrier frequency (Hz)", self.carrier),
        ];
        for (what, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(what, v));
            }
        }
        Ok(())
    }

    /// Thermal noise power k_B T B.
    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * self.noise_temp * self.bandwidth
    }

    pub fn rate_at(&self, distance: f64) -> Result<f64> {
        data_rate(self, snr(self, distance, true)?)
    }

    /// Time to move `model_bits` over this link at slant range `distance`.
    pub fn exchange_time(&self, model_bits: f64, distance: f64) -> Result<f64> {
        comm_time(model_bits, self.rate_at(distance)?, distance)
    }
}

/// Free-space path loss (4π f d / c)², linear.
pub fn path_loss(distance: f64, carrier: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid("distance (m)", distance));
    }
    Ok((4.0 * PI * carrier * distance / EARTH.light_speed).powi(2))
}

pub fn snr(budget: &LinkBudget, distance: f64, visible: bool) -> Result<f64> {
    if !visible {
        return Ok(0.0);
    }
    let loss = path_loss(distance, budget.carrier)?;
    Ok(budget.power * budget.gain_sat * budget.gain_gs / (budget.noise_power() * loss))
}

/// Shannon capacity of an AWGN channel in bits/s.
pub fn data_rate(budget: &LinkBudget, snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::invalid("snr", snr));
    }
    Ok(budget.bandwidth * (1.0 + snr).log2())
}

/// Transmission plus propagation delay.
pub fn comm_time(model_bits: f64, rate: f64, distance: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::LinkUnavailable);
    }
    Ok(model_bits / rate + distance / EARTH.light_speed)
}
