use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|f(0)|`.
pub const ORIGIN_TOL: f64 = 1e-12;

/// Distance of the axis probes from the origin.
pub const AXIS_PROBE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("box must strictly contain the origin in every coordinate (coordinate {0})")]
    BadBox(usize),
    #[error("function evaluated to {value} at {point:?}")]
    Evaluation { point: Vec<f64>, value: f64 },
}

/// Outcome of a sampled positive-definiteness check. A pass certifies the
/// sampled box only; it is not a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum PdVerdict {
    PassedSampling { points: usize, min_value: f64 },
    FailedAt { point: Vec<f64>, value: f64 },
}

impl PdVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, PdVerdict::PassedSampling { .. })
    }
}

fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` points of the Halton sequence in `[0, 1)^dim`, shifted modulo 1 by
/// a seeded random offset (Cranley-Patterson rotation).
pub fn halton_points(dim: usize, count: usize, seed: u64) -> impl Iterator<Item = Vec<f64>> {
    let bases = primes(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64).map(move |i| {
        bases
            .iter()
            .zip(&shift)
            .map(|(b, s)| (radical_inverse(i, *b) + s).fract())
            .collect()
    })
}

/// Check `f(0) ~ 0` and `f(x) > 0` at `samples` quasi-random points of the box
/// plus the `2n` axis points at distance [`AXIS_PROBE`] from the origin.
pub fn sampled_positive_definite<F>(
    f: F,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<PdVerdict, SamplingError>
where
    F: Fn(&[f64]) -> f64,
{
    let n = bounds.len();
    if let Some(i) = bounds.iter().position(|(lo, hi)| !(*lo < 0.0 && 0.0 < *hi)) {
        return Err(SamplingError::BadBox(i));
    }
    let eval = |x: &[f64]| -> Result<f64, SamplingError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SamplingError::Evaluation {
                point: x.to_vec(),
                value: v,
            })
        }
    };

    let origin = vec![0.0; n];
    let at_origin = eval(&origin)?;
    if at_origin.abs() > ORIGIN_TOL {
        return Ok(PdVerdict::FailedAt {
            point: origin,
            value: at_origin,
        });
    }

    let axis = (0..n).flat_map(|i| {
        [AXIS_PROBE, -AXIS_PROBE].into_iter().map(move |s| {
            let mut x = vec![0.0; n];
            x[i] = s;
            x
        })
    });
    let interior = halton_points(n, samples, seed).map(|u| {
        u.iter()
            .zip(bounds)
            .map(|(u, (lo, hi))| lo + (hi - lo) * u)
            .collect::<Vec<f64>>()
    });

    let mut points = 0;
    let mut min_value = f64::INFINITY;
    for x in axis.chain(interior) {
        if x.iter().all(|c| *c == 0.0) {
            continue;
        }
        let v = eval(&x)?;
        points += 1;
        if v <= 0.0 {
            return Ok(PdVerdict::FailedAt { point: x, value: v });
        }
        min_value = min_value.min(v);
    }
    Ok(PdVerdict::PassedSampling { points, min_value })
}
