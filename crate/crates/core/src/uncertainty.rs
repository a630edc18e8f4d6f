//! Nonlinear OSNI uncertainty `x' = f(x, u)`, `y = h(x)` and its positive
//! feedback interconnection with a synthesized closed loop (`w = y_sigma`,
//! `u_sigma = y`).
//!
//! Uncertainty variables are `xs1..xsn` (state) and `us1..usp` (input).

use std::ops::Range;

use thiserror::Error;

use crate::expr::{parse_expr, CompiledExpr, Expr, ExprError};
use crate::lyapunov::{sampled_positive_definite, PdVerdict, SamplingError};
use crate::synthesis::ClosedLoopSystem;

/// Tolerance for the zero-equilibrium checks.
pub const ORIGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("uncertainty needs at least one state and one output")]
    Empty,
    #[error("{what} must vanish at the origin, got {value:e} in entry {index}")]
    NonzeroAtOrigin {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("epsilon_sigma must be finite and > 0, got {0}")]
    BadEpsilon(f64),
    #[error("uncertainty has {got} outputs, the plant has {expected}")]
    OutputMismatch { expected: usize, got: usize },
}

pub fn state_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("xs{i}")).collect()
}

pub fn input_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("us{i}")).collect()
}

#[derive(Debug, Clone)]
pub struct OsniUncertainty {
    f: Vec<Expr>,
    h: Vec<Expr>,
    v: Expr,
    epsilon: f64,
    f_c: Vec<CompiledExpr>,
    h_c: Vec<CompiledExpr>,
    v_c: CompiledExpr,
}

impl OsniUncertainty {
    /// `f` has one entry per state; `h` one per output. `f` may use states and
    /// inputs, `h` and `v` only states.
    pub fn new(f: Vec<Expr>, h: Vec<Expr>, v: Expr, epsilon: f64) -> Result<Self, UncertaintyError> {
        let (n, p) = (f.len(), h.len());
        if n == 0 || p == 0 {
            return Err(UncertaintyError::Empty);
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(UncertaintyError::BadEpsilon(epsilon));
        }
        let xs = state_names(n);
        let mut xu = xs.clone();
        xu.extend(input_names(p));
        for e in &f {
            e.check_declared(&xu)?;
        }
        for e in h.iter().chain([&v]) {
            e.check_declared(&xs)?;
        }
        let f_c: Vec<CompiledExpr> = f.iter().map(|e| e.compile(&xu)).collect::<Result<_, _>>()?;
        let h_c: Vec<CompiledExpr> = h.iter().map(|e| e.compile(&xs)).collect::<Result<_, _>>()?;
        let v_c = v.compile(&xs)?;

        let zeros = vec![0.0; n + p];
        let at_zero = |what, cs: &[CompiledExpr]| {
            for (index, c) in cs.iter().enumerate() {
                let value = c.eval(&zeros);
                if !(value.abs() <= ORIGIN_TOL) {
                    return Err(UncertaintyError::NonzeroAtOrigin { what, index, value });
                }
            }
            Ok(())
        };
        at_zero("f_sigma(0, 0)", &f_c)?;
        at_zero("h_sigma(0)", &h_c)?;
        at_zero("V_sigma(0)", std::slice::from_ref(&v_c))?;

        Ok(Self {
            f,
            h,
            v,
            epsilon,
            f_c,
            h_c,
            v_c,
        })
    }

    pub fn parse(f: &[&str], h: &[&str], v: &str, epsilon: f64) -> Result<Self, UncertaintyError> {
        let (n, p) = (f.len(), h.len());
        let xs = state_names(n);
        let mut xu = xs.clone();
        xu.extend(input_names(p));
        let f = f.iter().map(|s| parse_expr(s, &xu)).collect::<Result<_, _>>()?;
        let h = h.iter().map(|s| parse_expr(s, &xs)).collect::<Result<_, _>>()?;
        let v = parse_expr(v, &xs)?;
        Self::new(f, h, v, epsilon)
    }

    pub fn state_dim(&self) -> usize {
        self.f.len()
    }

    pub fn output_dim(&self) -> usize {
        self.h.len()
    }

    pub fn f(&self) -> &[Expr] {
        &self.f
    }

    pub fn h(&self) -> &[Expr] {
        &self.h
    }

    pub fn storage_expr(&self) -> &Expr {
        &self.v
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn state_names(&self) -> Vec<String> {
        state_names(self.state_dim())
    }

    pub fn input_names(&self) -> Vec<String> {
        input_names(self.output_dim())
    }

    pub fn output_names(&self) -> Vec<String> {
        (1..=self.output_dim()).map(|i| format!("ys{i}")).collect()
    }

    /// `x' = f(x, u)`.
    pub fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let mut xu = Vec::with_capacity(x.len() + u.len());
        xu.extend_from_slice(x);
        xu.extend_from_slice(u);
        for (d, c) in dx.iter_mut().zip(&self.f_c) {
            *d = c.eval(&xu);
        }
    }

    /// `y = h(x)`.
    pub fn output(&self, x: &[f64], y: &mut [f64]) {
        for (o, c) in y.iter_mut().zip(&self.h_c) {
            *o = c.eval(x);
        }
    }

    pub fn storage(&self, x: &[f64]) -> f64 {
        self.v_c.eval(x)
    }

    pub fn check_storage(&self, half_width: f64, samples: usize, seed: u64) -> Result<PdVerdict, UncertaintyError> {
        let bounds = vec![(-half_width, half_width); self.state_dim()];
        Ok(sampled_positive_definite(|x| self.storage(x), &bounds, samples, seed)?)
    }

    /// The same system with `h` negated; its declared storage no longer
    /// certifies anything.
    pub fn with_flipped_output(&self) -> Self {
        let h: Vec<Expr> = self.h.iter().map(|e| (-e.clone()).fold()).collect();
        Self::new(self.f.clone(), h, self.v.clone(), self.epsilon).expect("negation keeps h(0) = 0")
    }
}

/// Joint state `(z, xi1, xi2, xi3, xs)`.
#[derive(Debug, Clone)]
pub struct Interconnection {
    closed_loop: ClosedLoopSystem,
    uncertainty: OsniUncertainty,
}

impl Interconnection {
    pub fn new(closed_loop: ClosedLoopSystem, uncertainty: OsniUncertainty) -> Result<Self, UncertaintyError> {
        let expected = closed_loop.plant().output_dim();
        if uncertainty.output_dim() != expected {
            return Err(UncertaintyError::OutputMismatch {
                expected,
                got: uncertainty.output_dim(),
            });
        }
        Ok(Self {
            closed_loop,
            uncertainty,
        })
    }

    pub fn closed_loop(&self) -> &ClosedLoopSystem {
        &self.closed_loop
    }

    pub fn uncertainty(&self) -> &OsniUncertainty {
        &self.uncertainty
    }

    pub fn plant_range(&self) -> Range<usize> {
        0..self.closed_loop.plant().state_dim()
    }

    pub fn sigma_range(&self) -> Range<usize> {
        let n = self.closed_loop.plant().state_dim();
        n..n + self.uncertainty.state_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.sigma_range().end
    }

    pub fn state_names(&self) -> Vec<String> {
        let mut v = self.closed_loop.plant().state_names();
        v.extend(self.uncertainty.state_names());
        v
    }

    /// Names of the plant input `w = h_sigma(x_sigma)`.
    pub fn w_names(&self) -> Vec<String> {
        (1..=self.uncertainty.output_dim()).map(|i| format!("w{i}")).collect()
    }

    pub fn w(&self, x: &[f64], w: &mut [f64]) {
        self.uncertainty.output(&x[self.sigma_range()], w);
    }

    pub fn y(&self, x: &[f64], y: &mut [f64]) {
        self.closed_loop.output(&x[self.plant_range()], y);
    }

    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        let p = self.uncertainty.output_dim();
        let mut w = vec![0.0; p];
        let mut y = vec![0.0; p];
        self.w(x, &mut w);
        self.y(x, &mut y);
        let (pr, sr) = (self.plant_range(), self.sigma_range());
        self.closed_loop.rhs(&x[pr.clone()], &w, &mut dx[pr]);
        self.uncertainty.rhs(&x[sr.clone()], &y, &mut dx[sr]);
    }

    /// `W = V + V_sigma - h_sigma' y`.
    pub fn composite_w(&self, x: &[f64]) -> f64 {
        let (v, vs, cross) = self.w_parts(x);
        v + vs - cross
    }

    /// `(V, V_sigma, h_sigma' y)`.
    pub fn w_parts(&self, x: &[f64]) -> (f64, f64, f64) {
        let p = self.uncertainty.output_dim();
        let mut w = vec![0.0; p];
        let mut y = vec![0.0; p];
        self.w(x, &mut w);
        self.y(x, &mut y);
        let v = self.closed_loop.storage_v(&x[self.plant_range()]);
        let vs = self.uncertainty.storage(&x[self.sigma_range()]);
        let cross = w.iter().zip(&y).map(|(a, b)| a * b).sum();
        (v, vs, cross)
    }

    /// Sampled positive definiteness of `W` on `[-half_width, half_width]^n`.
    pub fn check_w(&self, half_width: f64, samples: usize, seed: u64) -> Result<PdVerdict, UncertaintyError> {
        let bounds = vec![(-half_width, half_width); self.state_dim()];
        Ok(sampled_positive_definite(|x| self.composite_w(x), &bounds, samples, seed)?)
    }
}
