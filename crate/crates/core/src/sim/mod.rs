//! Fixed-step RK4 simulation and trajectory-based certificates: dissipation
//! inequalities, decrease of the interconnection storage `W`, and convergence.

mod check;
mod signal;
mod systems;
mod trajectory;

use thiserror::Error;

pub use check::{
    check_dissipation, check_w_decrease, convergence_metrics, convergence_metrics_of, finite_difference,
    ConvergenceMetrics, DissipationReport, Verdict, WDecreaseReport,
};
pub use signal::{InputSignal, Signal, SignalError, SignalSpec};
pub use systems::FnDynamics;
pub use trajectory::{Channel, Trajectory};

/// Default bound on `||x||` before a run is declared divergent.
pub const DEFAULT_BLOWUP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dt must be finite and > 0, got {0}")]
    BadStep(f64),
    #[error("t_end must be finite and >= dt, got t_end = {t_end}, dt = {dt}")]
    BadHorizon { t_end: f64, dt: f64 },
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite state at step {step} (t = {t}); last finite state {last:?}")]
    NonFinite {
        step: usize,
        t: f64,
        last: Vec<f64>,
        partial: Box<Trajectory>,
    },
    #[error("state norm {norm:.3e} exceeded the blow-up bound at step {step} (t = {t})")]
    Diverged {
        step: usize,
        t: f64,
        norm: f64,
        partial: Box<Trajectory>,
    },
    #[error("vector field failed at step {step} (t = {t}): {message}")]
    Rhs {
        step: usize,
        t: f64,
        message: String,
        partial: Box<Trajectory>,
    },
    #[error("trajectory has {0} points, at least 3 are needed")]
    TooShort(usize),
    #[error("tolerance must be finite and >= 0, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

impl SimError {
    /// The trajectory recorded before an aborted run, if any.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            SimError::NonFinite { partial, .. }
            | SimError::Diverged { partial, .. }
            | SimError::Rhs { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// A vector field `x' = f(x, u)` with output `y = h(x)`.
pub trait Dynamics: Sync {
    fn state_names(&self) -> Vec<String>;
    /// Dimension of the external input signal.
    fn input_dim(&self) -> usize;
    fn output_names(&self) -> Vec<String>;
    fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), String>;
    fn output(&self, x: &[f64], y: &mut [f64]);

    /// Names of the recorded input columns; by default the external input.
    fn recorded_input_names(&self) -> Vec<String> {
        (1..=self.input_dim()).map(|i| format!("v{i}")).collect()
    }

    /// The input recorded with each step; by default the external input.
    fn recorded_input(&self, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
}

/// Integrate with the default blow-up bound.
pub fn integrate(
    sys: &dyn Dynamics,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    input: &dyn InputSignal,
) -> Result<Trajectory, SimError> {
    integrate_with(sys, x0, t_end, dt, input, DEFAULT_BLOWUP)
}

/// Classical RK4 on the grid `t_k = k dt`, `k = 0..=round(t_end / dt)`, with
/// the input held at `u(t_k)` over each step.
pub fn integrate_with(
    sys: &dyn Dynamics,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    input: &dyn InputSignal,
    blowup: f64,
) -> Result<Trajectory, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::BadStep(dt));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(SimError::BadHorizon { t_end, dt });
    }
    let names = sys.state_names();
    let n = names.len();
    if x0.len() != n {
        return Err(SimError::Dimension {
            what: "initial state",
            expected: n,
            got: x0.len(),
        });
    }
    if input.dim() != sys.input_dim() {
        return Err(SimError::Dimension {
            what: "input signal",
            expected: sys.input_dim(),
            got: input.dim(),
        });
    }
    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory::new(dt, names, sys.recorded_input_names(), sys.output_names(), steps + 1);

    let mut u = vec![0.0; sys.input_dim()];
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let nonfinite = |step: usize, last: Vec<f64>, traj: Trajectory| SimError::NonFinite {
        step,
        t: step as f64 * dt,
        last,
        partial: Box::new(traj),
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(nonfinite(0, x, traj));
    }

    for k in 0..=steps {
        let t = k as f64 * dt;
        input.sample(t, &mut u);
        if !traj.push(sys, &x, &u) {
            return Err(nonfinite(k, x, traj));
        }
        if k == steps {
            break;
        }
        let rhs_err = |message: String, traj: Trajectory| SimError::Rhs {
            step: k,
            t,
            message,
            partial: Box::new(traj),
        };
        if let Err(m) = sys.rhs(&x, &u, &mut k1) {
            return Err(rhs_err(m, traj));
        }
        axpy(&mut tmp, &x, 0.5 * dt, &k1);
        if let Err(m) = sys.rhs(&tmp, &u, &mut k2) {
            return Err(rhs_err(m, traj));
        }
        axpy(&mut tmp, &x, 0.5 * dt, &k2);
        if let Err(m) = sys.rhs(&tmp, &u, &mut k3) {
            return Err(rhs_err(m, traj));
        }
        axpy(&mut tmp, &x, dt, &k3);
        if let Err(m) = sys.rhs(&tmp, &u, &mut k4) {
            return Err(rhs_err(m, traj));
        }
        for i in 0..n {
            tmp[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if tmp.iter().any(|v| !v.is_finite()) {
            return Err(nonfinite(k + 1, x, traj));
        }
        let norm = tmp.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > blowup {
            return Err(SimError::Diverged {
                step: k + 1,
                t: (k + 1) as f64 * dt,
                norm,
                partial: Box::new(traj),
            });
        }
        std::mem::swap(&mut x, &mut tmp);
    }
    Ok(traj)
}

fn axpy(out: &mut [f64], x: &[f64], a: f64, d: &[f64]) {
    for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
        *o = xi + a * di;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnDynamics<impl Fn(&[f64], &[f64], &mut [f64]) + Sync> {
        FnDynamics::new(1, 0, |x: &[f64], _u: &[f64], dx: &mut [f64]| dx[0] = -x[0])
    }

    #[test]
    fn zero_field_is_constant() {
        let sys = FnDynamics::new(2, 0, |_x: &[f64], _u: &[f64], dx: &mut [f64]| dx.fill(0.0));
        let tr = integrate(&sys, &[1.5, -2.0], 1.0, 0.1, &Signal::zero(0)).unwrap();
        assert_eq!(tr.len(), 11);
        for k in 0..tr.len() {
            assert_eq!(tr.state(k), &[1.5, -2.0]);
        }
    }

    #[test]
    fn exponential_decay() {
        let tr = integrate(&decay(), &[1.0], 1.0, 1e-3, &Signal::zero(0)).unwrap();
        let x1 = tr.final_state()[0];
        assert!((x1 - (-1.0f64).exp()).abs() < 1e-9, "{x1}");
        assert!((tr.time(tr.len() - 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_conserves_norm() {
        let sys = FnDynamics::new(2, 0, |x: &[f64], _u: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        });
        let tr = integrate(&sys, &[1.0, 0.0], 1.0, 1e-2, &Signal::zero(0)).unwrap();
        let x = tr.final_state();
        let drift = (x[0].hypot(x[1]) - 1.0).abs();
        // RK4 on a rotation loses |1 - (h^6)/144 ...| per step
        assert!(drift < 1e-10, "{drift}");
    }

    #[test]
    fn divergence_keeps_the_partial_trajectory() {
        let sys = FnDynamics::new(1, 0, |x: &[f64], _u: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let err = integrate(&sys, &[1.0], 2.0, 1e-3, &Signal::zero(0)).unwrap_err();
        match &err {
            SimError::Diverged { step, partial, .. } => {
                assert_eq!(partial.len(), *step);
                assert!((partial.time(partial.len() - 1) - 1.0).abs() < 0.01);
            }
            other => panic!("{other:?}"),
        }
        assert!(err.partial().is_some());
    }

    #[test]
    fn nan_is_reported() {
        let sys = FnDynamics::new(1, 0, |x: &[f64], _u: &[f64], dx: &mut [f64]| {
            dx[0] = if x[0] > 1.5 { f64::NAN } else { 1.0 }
        });
        let err = integrate(&sys, &[1.0], 2.0, 0.1, &Signal::zero(0)).unwrap_err();
        assert!(matches!(err, SimError::NonFinite { .. }), "{err:?}");
    }

    #[test]
    fn argument_checks() {
        let z = Signal::zero(0);
        assert_eq!(integrate(&decay(), &[1.0], 1.0, 0.0, &z).unwrap_err(), SimError::BadStep(0.0));
        assert!(matches!(
            integrate(&decay(), &[1.0], 1e-4, 1e-3, &z),
            Err(SimError::BadHorizon { .. })
        ));
        assert!(matches!(
            integrate(&decay(), &[1.0, 2.0], 1.0, 1e-3, &z),
            Err(SimError::Dimension { .. })
        ));
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let tr = integrate(&decay(), &[1.0], 1.0, dt, &Signal::zero(0)).unwrap();
            (tr.final_state()[0] - (-1.0f64).exp()).abs()
        };
        let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
        for r in [e1 / e2, e2 / e3] {
            assert!((12.0..=20.0).contains(&r), "{r}");
        }
    }
}
