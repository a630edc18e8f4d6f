use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{SimError, Trajectory};
use crate::uncertainty::Interconnection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_pass(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Derivative of a uniformly sampled series: central differences inside,
/// second-order one-sided stencils at both ends.
pub fn finite_difference(values: &[f64], dt: f64) -> Result<Vec<f64>, SimError> {
    let n = values.len();
    if n < 3 {
        return Err(SimError::TooShort(n));
    }
    let h2 = 2.0 * dt;
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / h2);
    for k in 1..n - 1 {
        d.push((values[k + 1] - values[k - 1]) / h2);
    }
    d.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / h2);
    Ok(d)
}

/// Column-wise derivative of per-step vectors.
fn differentiate_rows(len: usize, width: usize, dt: f64, row: impl Fn(usize) -> Vec<f64>) -> Result<Vec<Vec<f64>>, SimError> {
    let rows: Vec<Vec<f64>> = (0..len).map(row).collect();
    let cols = (0..width)
        .map(|j| finite_difference(&rows.iter().map(|r| r[j]).collect::<Vec<_>>(), dt))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..len).map(|k| cols.iter().map(|c| c[k]).collect()).collect())
}

fn check_tol(tol: f64) -> Result<(), SimError> {
    if tol >= 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(SimError::BadTolerance(tol))
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, x)| if x > best.1 { (k, x) } else { best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub epsilon: f64,
    pub tol: f64,
    /// `max_k V'_k - v_k' y'_k + epsilon |y'_k|^2`.
    pub max_residual: f64,
    pub max_residual_time: f64,
    /// The same maximum with `epsilon = 0`.
    pub max_residual_ni: f64,
    pub ni: Verdict,
    /// `None` when `epsilon = 0`: output strictness is not claimed.
    pub osni: Option<Verdict>,
    #[serde(skip)]
    pub residual: Vec<f64>,
}

impl DissipationReport {
    /// The verdict for the inequality at the declared `epsilon`.
    pub fn verdict(&self) -> Verdict {
        self.osni.unwrap_or(self.ni)
    }
}

/// Check `V' <= v' y' - epsilon |y'|^2` along a trajectory, with `V'` and `y'`
/// from finite differences, `v` the recorded input and `y` the recorded output.
pub fn check_dissipation(
    traj: &Trajectory,
    storage: &dyn Fn(&[f64]) -> f64,
    epsilon: f64,
    tol: f64,
) -> Result<DissipationReport, SimError> {
    check_tol(tol)?;
    check_tol(epsilon)?;
    let p = traj.output_names().len();
    if traj.input_names().len() != p {
        return Err(SimError::Dimension {
            what: "recorded input vs output",
            expected: p,
            got: traj.input_names().len(),
        });
    }
    let n = traj.len();
    let v: Vec<f64> = traj.states().map(storage).collect();
    let dv = finite_difference(&v, traj.dt())?;
    let dy = differentiate_rows(n, p, traj.dt(), |k| traj.output(k).to_vec())?;

    let mut residual = Vec::with_capacity(n);
    let mut residual_ni = Vec::with_capacity(n);
    for k in 0..n {
        let supply: f64 = traj.input(k).iter().zip(&dy[k]).map(|(a, b)| a * b).sum();
        let rate: f64 = dy[k].iter().map(|d| d * d).sum();
        residual_ni.push(dv[k] - supply);
        residual.push(dv[k] - supply + epsilon * rate);
    }
    let (kmax, max_residual) = argmax(&residual);
    let (_, max_residual_ni) = argmax(&residual_ni);
    Ok(DissipationReport {
        epsilon,
        tol,
        max_residual,
        max_residual_time: traj.time(kmax),
        max_residual_ni,
        ni: Verdict::from_pass(max_residual_ni <= tol),
        osni: (epsilon > 0.0).then(|| Verdict::from_pass(max_residual <= tol)),
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WDecreaseReport {
    pub tol: f64,
    pub max_dw: f64,
    pub max_dw_time: f64,
    /// `max_k W'_k + epsilon |y'_k|^2 + epsilon_sigma |w'_k|^2`.
    pub max_bound_excess: f64,
    /// Largest one-step increase `W_{k+1} - W_k`.
    pub max_step_increase: f64,
    pub w_start: f64,
    pub w_end: f64,
    /// `W(t_end) <= W(0)`.
    pub monotone_end: bool,
    /// `max W' <= tol`.
    pub decrease: Verdict,
    /// `max (W' + epsilon |y'|^2 + epsilon_sigma |w'|^2) <= tol`.
    pub bound: Verdict,
    /// `decrease`, `bound` and `monotone_end` together.
    pub verdict: Verdict,
    #[serde(skip)]
    pub w: Vec<f64>,
}

/// Finite-difference `W'` along an interconnection trajectory.
pub fn check_w_decrease(traj: &Trajectory, ic: &Interconnection, tol: f64) -> Result<WDecreaseReport, SimError> {
    check_tol(tol)?;
    let n = traj.len();
    if traj.state_names().len() != ic.state_dim() {
        return Err(SimError::Dimension {
            what: "interconnection state",
            expected: ic.state_dim(),
            got: traj.state_names().len(),
        });
    }
    let p = ic.uncertainty().output_dim();
    let w: Vec<f64> = traj.states().map(|x| ic.composite_w(x)).collect();
    let dw = finite_difference(&w, traj.dt())?;
    let dy = differentiate_rows(n, p, traj.dt(), |k| {
        let mut y = vec![0.0; p];
        ic.y(traj.state(k), &mut y);
        y
    })?;
    let dws = differentiate_rows(n, p, traj.dt(), |k| {
        let mut s = vec![0.0; p];
        ic.w(traj.state(k), &mut s);
        s
    })?;
    let (eps, eps_s) = (ic.closed_loop().epsilon(), ic.uncertainty().epsilon());
    let excess: Vec<f64> = (0..n)
        .map(|k| {
            let ry: f64 = dy[k].iter().map(|d| d * d).sum();
            let rw: f64 = dws[k].iter().map(|d| d * d).sum();
            dw[k] + eps * ry + eps_s * rw
        })
        .collect();
    let (kmax, max_dw) = argmax(&dw);
    let (_, max_bound_excess) = argmax(&excess);
    let max_step_increase = w.windows(2).map(|s| s[1] - s[0]).fold(f64::NEG_INFINITY, f64::max);
    let (w_start, w_end) = (w[0], w[n - 1]);
    let monotone_end = w_end <= w_start;
    let decrease = Verdict::from_pass(max_dw <= tol);
    let bound = Verdict::from_pass(max_bound_excess <= tol);
    Ok(WDecreaseReport {
        tol,
        max_dw,
        max_dw_time: traj.time(kmax),
        max_bound_excess,
        max_step_increase,
        w_start,
        w_end,
        monotone_end,
        decrease,
        bound,
        verdict: Verdict::from_pass(decrease.passed() && bound.passed() && monotone_end),
        w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMetrics {
    pub final_norm: f64,
    /// First grid time after which the norm stays below `threshold` to the
    /// end of the run, provided that tail lasts at least `window`.
    pub settled_time: Option<f64>,
    pub threshold: f64,
    pub window: f64,
}

impl ConvergenceMetrics {
    pub fn converged(&self) -> bool {
        self.final_norm <= self.threshold
    }
}

/// Metrics on the full state.
pub fn convergence_metrics(traj: &Trajectory, threshold: f64, window: f64) -> ConvergenceMetrics {
    convergence_metrics_of(traj, 0..traj.state_names().len(), threshold, window)
}

/// Metrics on the state coordinates in `range`.
pub fn convergence_metrics_of(
    traj: &Trajectory,
    range: Range<usize>,
    threshold: f64,
    window: f64,
) -> ConvergenceMetrics {
    let norms: Vec<f64> = traj
        .states()
        .map(|x| x[range.clone()].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let final_norm = norms.last().copied().unwrap_or(0.0);
    let first = norms.iter().rposition(|v| *v >= threshold).map_or(0, |k| k + 1);
    let t_end = traj.time(traj.len().saturating_sub(1));
    let settled_time = (first < norms.len())
        .then(|| traj.time(first))
        .filter(|t| t_end - t >= window);
    ConvergenceMetrics {
        final_norm,
        settled_time,
        threshold,
        window,
    }
}
