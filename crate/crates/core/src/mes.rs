//! Discrete multivariable extremum seeking.
//!
//! Each learned parameter owns a dither channel. After every learning
//! iteration `h` the measured cost `Q` drives
//!
//! ```text
//! z_i(h+1)     = z_i(h) + a_i dT sin(w_i h dT + pi/2) Q
//! est_i(h+1)   = z_i(h+1) + a_i sin(w_i h dT - pi/2)
//! ```
//!
//! The phase is sampled once per iteration, so the dither a channel
//! actually sees is its effective frequency `w_i dT` folded into `[0, pi]`.
//! Frequency separation is checked on those folded values.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

const MODULE: &str = "mes";

/// Minimum separation between effective (folded) dither frequencies.
pub const FREQUENCY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DitherChannel {
    pub amplitude: f64,
    /// rad/s
    pub omega: f64,
    pub z: f64,
    pub estimate: f64,
}

impl DitherChannel {
    pub fn new(amplitude: f64, omega: f64) -> Self {
        Self {
            amplitude,
            omega,
            z: 0.0,
            estimate: 0.0,
        }
    }
}

/// Per-sample phase advance `w dT` folded into `[0, pi]`.
pub fn effective_frequency(omega: f64, dt_mes: f64) -> f64 {
    let wrapped = (omega * dt_mes).rem_euclid(TAU);
    if wrapped > PI {
        TAU - wrapped
    } else {
        wrapped
    }
}

fn fold(theta: f64) -> f64 {
    effective_frequency(theta, 1.0)
}

/// Every violation of the separation conditions (distinct effective
/// frequencies, no `w_i + w_j = w_k`), one message per offending tuple.
pub fn frequency_violations(omegas: &[f64], dt_mes: f64) -> Vec<String> {
    let eff: Vec<f64> = omegas.iter().map(|&w| effective_frequency(w, dt_mes)).collect();
    let mut out = Vec::new();
    for i in 0..eff.len() {
        for j in (i + 1)..eff.len() {
            if (eff[i] - eff[j]).abs() <= FREQUENCY_TOLERANCE {
                out.push(format!(
                    "dither channels {i} and {j} share effective frequency {:.6} rad/sample (omega {} and {})",
                    eff[i], omegas[i], omegas[j]
                ));
            }
        }
    }
    for i in 0..eff.len() {
        for j in (i + 1)..eff.len() {
            let sum = fold(eff[i] + eff[j]);
            for (k, &ek) in eff.iter().enumerate() {
                if k != i && k != j && (sum - ek).abs() <= FREQUENCY_TOLERANCE {
                    out.push(format!(
                        "dither channels {i} + {j} alias onto channel {k} (effective {:.6} rad/sample)",
                        ek
                    ));
                }
            }
        }
    }
    out
}

/// Upper bound on the number of learnable elements of an `(n, m, p)` model.
pub fn max_parameters(n: usize, m: usize, p: usize) -> usize {
    n * n + n * m + p * n + p * m
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesState {
    channels: Vec<DitherChannel>,
    iteration: usize,
    dt_mes: f64,
}

impl MesState {
    /// Fresh state with `z = 0` and zero estimates.
    pub fn new(channels: Vec<DitherChannel>, dt_mes: f64) -> Result<Self> {
        if !(dt_mes.is_finite() && dt_mes > 0.0) {
            return Err(Error::invalid(MODULE, format!("MES sample time {dt_mes} must be > 0")));
        }
        if channels.is_empty() {
            return Err(Error::invalid(MODULE, "at least one dither channel is required"));
        }
        for (i, c) in channels.iter().enumerate() {
            if !(c.amplitude.is_finite() && c.amplitude > 0.0) {
                return Err(Error::invalid(MODULE, format!("channel {i}: amplitude {} must be > 0", c.amplitude)));
            }
            if !(c.omega.is_finite() && c.omega > 0.0) {
                return Err(Error::invalid(MODULE, format!("channel {i}: frequency {} must be > 0", c.omega)));
            }
        }
        let omegas: Vec<f64> = channels.iter().map(|c| c.omega).collect();
        let violations = frequency_violations(&omegas, dt_mes);
        if !violations.is_empty() {
            return Err(Error::invalid(MODULE, violations.join("; ")));
        }
        let channels = channels
            .into_iter()
            .map(|c| DitherChannel::new(c.amplitude, c.omega))
            .collect();
        Ok(Self {
            channels,
            iteration: 0,
            dt_mes,
        })
    }

    pub fn channels(&self) -> &[DitherChannel] {
        &self.channels
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn dt_mes(&self) -> f64 {
        self.dt_mes
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.estimate).collect()
    }

    /// Apply the update law once with measured cost `q`.
    pub fn update(&self, q: f64) -> Result<MesState> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::invalid(MODULE, format!("cost {q} must be finite and >= 0")));
        }
        let t = self.iteration as f64 * self.dt_mes;
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let phase = c.omega * t;
                let z = c.z + c.amplitude * self.dt_mes * (phase + FRAC_PI_2).sin() * q;
                DitherChannel {
                    z,
                    estimate: z + c.amplitude * (phase - FRAC_PI_2).sin(),
                    ..*c
                }
            })
            .collect();
        Ok(MesState {
            channels,
            iteration: self.iteration + 1,
            dt_mes: self.dt_mes,
        })
    }
}
