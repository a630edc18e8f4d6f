use super::Dynamics;
use crate::synthesis::{ClosedLoopSystem, GeneralFormClosedLoop};
use crate::uncertainty::{Interconnection, OsniUncertainty};

/// A vector field given by a closure; the output is the full state.
pub struct FnDynamics<F> {
    n: usize,
    m: usize,
    f: F,
}

impl<F> FnDynamics<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    pub fn new(n: usize, m: usize, f: F) -> Self {
        Self { n, m, f }
    }
}

impl<F> Dynamics for FnDynamics<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    fn state_names(&self) -> Vec<String> {
        (1..=self.n).map(|i| format!("x{i}")).collect()
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn output_names(&self) -> Vec<String> {
        (1..=self.n).map(|i| format!("y{i}")).collect()
    }

    fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), String> {
        (self.f)(x, u, dx);
        Ok(())
    }

    fn output(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl Dynamics for ClosedLoopSystem {
    fn state_names(&self) -> Vec<String> {
        self.plant().state_names()
    }

    fn input_dim(&self) -> usize {
        self.plant().output_dim()
    }

    fn output_names(&self) -> Vec<String> {
        self.plant().output_names()
    }

    fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), String> {
        ClosedLoopSystem::rhs(self, x, u, dx);
        Ok(())
    }

    fn output(&self, x: &[f64], y: &mut [f64]) {
        ClosedLoopSystem::output(self, x, y)
    }
}

impl Dynamics for GeneralFormClosedLoop {
    fn state_names(&self) -> Vec<String> {
        self.closed_loop().plant().state_names()
    }

    fn input_dim(&self) -> usize {
        self.closed_loop().plant().output_dim()
    }

    fn output_names(&self) -> Vec<String> {
        self.closed_loop().plant().output_names()
    }

    fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), String> {
        GeneralFormClosedLoop::rhs(self, x, u, dx).map_err(|e| e.to_string())
    }

    fn output(&self, x: &[f64], y: &mut [f64]) {
        self.closed_loop().output(x, y)
    }
}

impl Dynamics for OsniUncertainty {
    fn state_names(&self) -> Vec<String> {
        OsniUncertainty::state_names(self)
    }

    fn input_dim(&self) -> usize {
        self.output_dim()
    }

    fn output_names(&self) -> Vec<String> {
        OsniUncertainty::output_names(self)
    }

    fn recorded_input_names(&self) -> Vec<String> {
        self.input_names()
    }

    fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<(), String> {
        OsniUncertainty::rhs(self, x, u, dx);
        Ok(())
    }

    fn output(&self, x: &[f64], y: &mut [f64]) {
        OsniUncertainty::output(self, x, y)
    }
}

/// Autonomous; records the plant input `w = h_sigma(x_sigma)` and outputs `y`.
impl Dynamics for Interconnection {
    fn state_names(&self) -> Vec<String> {
        Interconnection::state_names(self)
    }

    fn input_dim(&self) -> usize {
        0
    }

    fn output_names(&self) -> Vec<String> {
        self.closed_loop().plant().output_names()
    }

    fn recorded_input_names(&self) -> Vec<String> {
        self.w_names()
    }

    fn recorded_input(&self, x: &[f64], _u: &[f64], out: &mut [f64]) {
        self.w(x, out)
    }

    fn rhs(&self, x: &[f64], _u: &[f64], dx: &mut [f64]) -> Result<(), String> {
        Interconnection::rhs(self, x, dx);
        Ok(())
    }

    fn output(&self, x: &[f64], y: &mut [f64]) {
        self.y(x, y)
    }
}
