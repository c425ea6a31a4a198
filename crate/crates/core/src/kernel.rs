//! PSP kernels and the time-constant calibration between them.
//!
//! All times are in milliseconds. Voltages are dimensionless with the
//! resting potential at zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Time in milliseconds.
pub type TimeMs = f64;

/// Membrane constant of the reference double-exponential kernel.
pub const DEFAULT_TAU_M: TimeMs = 20.0;
/// Synaptic constant of the reference double-exponential kernel.
pub const DEFAULT_TAU_S: TimeMs = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Time constant of the exponential kernel.
    pub tau: TimeMs,
    pub tau_m: TimeMs,
    pub tau_s: TimeMs,
}

impl KernelParams {
    /// Parameters whose `tau` is calibrated against the double-exponential
    /// kernel with the given constants.
    pub fn calibrated(tau_m: TimeMs, tau_s: TimeMs) -> Result<Self> {
        Ok(Self {
            tau: calibrate_tau(tau_m, tau_s)?,
            tau_m,
            tau_s,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        check_pair(self.tau_m, self.tau_s)
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self::calibrated(DEFAULT_TAU_M, DEFAULT_TAU_S).expect("default constants are valid")
    }
}

pub(crate) fn check_tau(tau: TimeMs) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(invalid("tau", format!("must be positive and finite, got {tau}")))
    }
}

fn check_pair(tau_m: TimeMs, tau_s: TimeMs) -> Result<()> {
    if !(tau_s.is_finite() && tau_m.is_finite() && tau_s > 0.0) {
        return Err(invalid("tau_s", format!("must be positive and finite, got {tau_s}")));
    }
    if tau_m <= tau_s {
        return Err(invalid(
            "tau_m",
            format!("must exceed tau_s ({tau_s}), got {tau_m}"),
        ));
    }
    Ok(())
}

/// Exponential PSP kernel `exp(-dt/tau)`, zero for `dt < 0`.
///
/// An input arriving exactly at the evaluation time contributes fully.
pub fn kappa(dt: TimeMs, tau: TimeMs) -> Result<f64> {
    check_tau(tau)?;
    Ok(kappa_unchecked(dt, tau))
}

#[inline]
pub(crate) fn kappa_unchecked(dt: TimeMs, tau: TimeMs) -> f64 {
    if dt < 0.0 {
        0.0
    } else {
        (-dt / tau).exp()
    }
}

/// Time at which the unnormalised double-exponential kernel peaks.
pub fn double_exp_peak_time(tau_m: TimeMs, tau_s: TimeMs) -> Result<TimeMs> {
    check_pair(tau_m, tau_s)?;
    Ok(tau_m * tau_s / (tau_m - tau_s) * (tau_m / tau_s).ln())
}

/// Normalisation factor that puts the double-exponential peak at one.
pub fn double_exp_norm(tau_m: TimeMs, tau_s: TimeMs) -> Result<f64> {
    let t_peak = double_exp_peak_time(tau_m, tau_s)?;
    Ok(1.0 / ((-t_peak / tau_m).exp() - (-t_peak / tau_s).exp()))
}

/// Peak-normalised double-exponential kernel, zero for `dt < 0`.
pub fn double_exp_kernel(dt: TimeMs, tau_m: TimeMs, tau_s: TimeMs) -> Result<f64> {
    let v0 = double_exp_norm(tau_m, tau_s)?;
    if dt < 0.0 {
        return Ok(0.0);
    }
    Ok(v0 * ((-dt / tau_m).exp() - (-dt / tau_s).exp()))
}

/// Exponential-kernel time constant with the same temporal integral as the
/// double-exponential kernel: `V0 * (tau_m - tau_s)`.
pub fn calibrate_tau(tau_m: TimeMs, tau_s: TimeMs) -> Result<TimeMs> {
    Ok(double_exp_norm(tau_m, tau_s)? * (tau_m - tau_s))
}
