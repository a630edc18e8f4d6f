use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A deterministic input `u(t)` of fixed dimension.
pub trait InputSignal: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, t: f64, out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("{what} has {got} rows; expected 1 or {dim}")]
    Rows { what: &'static str, got: usize, dim: usize },
    #[error("multisine row {row}: {amps} amplitudes but {freqs} frequencies")]
    Ragged { row: usize, amps: usize, freqs: usize },
    #[error("signal parameter {0} must be finite")]
    NonFinite(&'static str),
    #[error("band-limited signal needs bandwidth > 0 and components >= 1")]
    BadBand,
}

/// Input signal families for open-loop verification runs. Frequencies are in
/// rad/s; one row (or one amplitude) is broadcast to every channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Zero,
    /// `amplitude` from `start` on, zero before.
    Step {
        amplitude: Vec<f64>,
        #[serde(default)]
        start: f64,
    },
    /// `sum_i a_i sin(w_i t + phi_i)` per channel, phases drawn from the seed.
    Multisine {
        amplitudes: Vec<Vec<f64>>,
        frequencies: Vec<Vec<f64>>,
    },
    /// `components` sines per channel with frequencies uniform on
    /// `(0, bandwidth]` and random phases, each of amplitude
    /// `amplitude / components`, so `|u_i(t)| <= amplitude`.
    RandomBandLimited {
        amplitude: f64,
        bandwidth: f64,
        components: usize,
    },
}

impl SignalSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SignalSpec::Zero => "zero",
            SignalSpec::Step { .. } => "step",
            SignalSpec::Multisine { .. } => "multisine",
            SignalSpec::RandomBandLimited { .. } => "random_band_limited",
        }
    }

    pub fn realize(&self, dim: usize, seed: u64) -> Result<Signal, SignalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = match self {
            SignalSpec::Zero => Shape::Sines(vec![Vec::new(); dim]),
            SignalSpec::Step { amplitude, start } => {
                if !start.is_finite() || amplitude.iter().any(|a| !a.is_finite()) {
                    return Err(SignalError::NonFinite("step"));
                }
                Shape::Step {
                    level: broadcast("step amplitude", amplitude, dim)?,
                    start: *start,
                }
            }
            SignalSpec::Multisine {
                amplitudes,
                frequencies,
            } => {
                let a = broadcast("amplitudes", amplitudes, dim)?;
                let w = broadcast("frequencies", frequencies, dim)?;
                let mut chans = Vec::with_capacity(dim);
                for (row, (a, w)) in a.iter().zip(&w).enumerate() {
                    if a.len() != w.len() {
                        return Err(SignalError::Ragged {
                            row,
                            amps: a.len(),
                            freqs: w.len(),
                        });
                    }
                    if a.iter().chain(w).any(|v| !v.is_finite()) {
                        return Err(SignalError::NonFinite("multisine"));
                    }
                    chans.push(
                        a.iter()
                            .zip(w)
                            .map(|(a, w)| (*a, *w, rng.random::<f64>() * TAU))
                            .collect(),
                    );
                }
                Shape::Sines(chans)
            }
            SignalSpec::RandomBandLimited {
                amplitude,
                bandwidth,
                components,
            } => {
                if !amplitude.is_finite() {
                    return Err(SignalError::NonFinite("amplitude"));
                }
                if !(*bandwidth > 0.0 && bandwidth.is_finite()) || *components == 0 {
                    return Err(SignalError::BadBand);
                }
                let a = amplitude / *components as f64;
                let chans = (0..dim)
                    .map(|_| {
                        (0..*components)
                            .map(|_| {
                                // (0, 1] so no component is constant
                                let w = (1.0 - rng.random::<f64>()) * bandwidth;
                                (a, w, rng.random::<f64>() * TAU)
                            })
                            .collect()
                    })
                    .collect();
                Shape::Sines(chans)
            }
        };
        Ok(Signal { dim, shape })
    }
}

fn broadcast<T: Clone>(what: &'static str, rows: &[T], dim: usize) -> Result<Vec<T>, SignalError> {
    match rows.len() {
        1 => Ok(vec![rows[0].clone(); dim]),
        n if n == dim => Ok(rows.to_vec()),
        got => Err(SignalError::Rows { what, got, dim }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Step { level: Vec<f64>, start: f64 },
    /// `(amplitude, frequency, phase)` per channel.
    Sines(Vec<Vec<(f64, f64, f64)>>),
}

/// A realized [`SignalSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    dim: usize,
    shape: Shape,
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            shape: Shape::Sines(vec![Vec::new(); dim]),
        }
    }

    pub fn constant(level: Vec<f64>) -> Self {
        Self {
            dim: level.len(),
            shape: Shape::Step { level, start: 0.0 },
        }
    }
}

impl InputSignal for Signal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, t: f64, out: &mut [f64]) {
        match &self.shape {
            Shape::Step { level, start } => {
                if t >= *start {
                    out.copy_from_slice(level);
                } else {
                    out.fill(0.0);
                }
            }
            Shape::Sines(chans) => {
                for (o, c) in out.iter_mut().zip(chans) {
                    *o = c.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum();
                }
            }
        }
    }
}
