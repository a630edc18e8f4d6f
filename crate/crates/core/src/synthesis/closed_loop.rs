use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::plant::output_names;
use super::{NormalFormPlant, SynthesisError};
use crate::expr::{CompiledExpr, Expr};
use crate::lyapunov::{sampled_positive_definite, PdVerdict, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Target {
    Ni,
    Osni,
}

impl Target {
    pub fn default_lambda(self) -> f64 {
        match self {
            Target::Ni => 0.0,
            Target::Osni => 1.0,
        }
    }
}

/// Designer choices: `V1(alpha) = alpha' P alpha`, `V2(y)`, and the damping `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSpec {
    p: SquareMatrix,
    v2: Expr,
    lambda: f64,
    target: Target,
}

impl SynthesisSpec {
    pub fn new(p: SquareMatrix, v2: Expr, lambda: f64, target: Target) -> Result<Self, SynthesisError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SynthesisError::BadLambda(lambda));
        }
        if target == Target::Osni && lambda == 0.0 {
            return Err(SynthesisError::OsniNeedsPositiveLambda);
        }
        let m = p.as_matrix();
        if !p.is_symmetric(1e-12 * m.amax().max(1.0)) {
            return Err(SynthesisError::PNotSymmetric);
        }
        let sym = (m + m.transpose()) * 0.5;
        if sym.cholesky().is_none() {
            return Err(SynthesisError::PNotPositiveDefinite);
        }
        Ok(Self {
            p,
            v2,
            lambda,
            target,
        })
    }

    /// `V2 = ||y||^2` and the target's default `lambda`.
    pub fn with_defaults(plant: &NormalFormPlant, p: SquareMatrix, target: Target) -> Result<Self, SynthesisError> {
        Self::new(p, default_v2(plant), target.default_lambda(), target)
    }

    pub fn p(&self) -> &SquareMatrix {
        &self.p
    }

    pub fn v2(&self) -> &Expr {
        &self.v2
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// `min{1, lambda}`.
    pub fn epsilon(&self) -> f64 {
        self.lambda.min(1.0)
    }

    /// Sampled positive-definiteness of `V2` on `[-half_width, half_width]^p`.
    pub fn check_v2(
        &self,
        plant: &NormalFormPlant,
        half_width: f64,
        samples: usize,
        seed: u64,
    ) -> Result<PdVerdict, SynthesisError> {
        let v2 = self.v2.compile(&plant.output_names())?;
        let bounds = vec![(-half_width, half_width); plant.output_dim()];
        Ok(sampled_positive_definite(|y| v2.eval(y), &bounds, samples, seed)?)
    }
}

pub(crate) fn default_v2(plant: &NormalFormPlant) -> Expr {
    Expr::sum(plant.output_names().iter().map(|n| Expr::var(n).powi(2)))
}

/// Deliberate law defects used to show that the checkers can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawMutation {
    /// `u2 = -(dV/dxi2)'` without the `-lambda xi3` term; `epsilon` is unchanged.
    DropDamping,
    /// `u1 = +(dV/dxi1)'`.
    FlipU1Gradient,
}

#[derive(Debug, Clone)]
struct Compiled {
    u1: Vec<CompiledExpr>,
    u2: Vec<CompiledExpr>,
    v2: CompiledExpr,
}

/// The plant under `u1 = v1 - (dV/dxi1)'`, `u2 = v2 - (dV/dxi2)' - lambda xi3`.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    plant: NormalFormPlant,
    spec: SynthesisSpec,
    storage: Expr,
    grad_xi1: Vec<Expr>,
    grad_xi2: Vec<Expr>,
    u1: Vec<Expr>,
    u2: Vec<Expr>,
    mutation: Option<LawMutation>,
    compiled: Compiled,
}

impl ClosedLoopSystem {
    pub fn new(plant: NormalFormPlant, spec: SynthesisSpec) -> Result<Self, SynthesisError> {
        Self::build(plant, spec, None)
    }

    /// The same synthesis with a defective law.
    pub fn mutated(&self, mutation: LawMutation) -> Result<Self, SynthesisError> {
        Self::build(self.plant.clone(), self.spec.clone(), Some(mutation))
    }

    fn build(
        plant: NormalFormPlant,
        spec: SynthesisSpec,
        mutation: Option<LawMutation>,
    ) -> Result<Self, SynthesisError> {
        let m = plant.m();
        if spec.p.order() != m {
            return Err(SynthesisError::Dimension {
                what: "P",
                expected: m,
                got: spec.p.order(),
            });
        }
        let y_names = plant.output_names();
        spec.v2.check_declared(&y_names)?;
        let inv = plant.a11_inverse().ok_or(SynthesisError::SingularA11)?.clone();

        let storage = storage_expr(&plant, &inv, spec.p.as_matrix(), &spec.v2);
        let names = plant.state_names();
        let xi1 = &names[plant.xi1_range()];
        let xi2 = &names[plant.xi2_range()];
        let xi3 = &names[plant.xi3_range()];
        let grad_xi1: Vec<Expr> = xi1.iter().map(|n| storage.derivative(n)).collect();
        let grad_xi2: Vec<Expr> = xi2.iter().map(|n| storage.derivative(n)).collect();

        let u1: Vec<Expr> = grad_xi1
            .iter()
            .map(|g| match mutation {
                Some(LawMutation::FlipU1Gradient) => g.clone(),
                _ => (-g.clone()).fold(),
            })
            .collect();
        let damping = match mutation {
            Some(LawMutation::DropDamping) => 0.0,
            _ => spec.lambda,
        };
        let u2: Vec<Expr> = grad_xi2
            .iter()
            .zip(xi3)
            .map(|(g, x3)| (-g.clone() - Expr::constant(damping) * Expr::var(x3)).fold())
            .collect();

        let compiled = Compiled {
            u1: u1.iter().map(|e| e.compile(&names)).collect::<Result<_, _>>()?,
            u2: u2.iter().map(|e| e.compile(&names)).collect::<Result<_, _>>()?,
            v2: spec.v2.compile(&output_names(plant.p1(), plant.p2()))?,
        };
        Ok(Self {
            plant,
            spec,
            storage,
            grad_xi1,
            grad_xi2,
            u1,
            u2,
            mutation,
            compiled,
        })
    }

    pub fn plant(&self) -> &NormalFormPlant {
        &self.plant
    }

    pub fn spec(&self) -> &SynthesisSpec {
        &self.spec
    }

    pub fn mutation(&self) -> Option<LawMutation> {
        self.mutation
    }

    /// `min{1, lambda}`.
    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon()
    }

    /// `V` with `alpha` substituted, as differentiated for the laws.
    pub fn storage_expr(&self) -> &Expr {
        &self.storage
    }

    pub fn grad_xi1(&self) -> &[Expr] {
        &self.grad_xi1
    }

    pub fn grad_xi2(&self) -> &[Expr] {
        &self.grad_xi2
    }

    /// Feedback parts of `u1` and `u2`; the new input `v` is added on top.
    pub fn synthesize_feedback(&self) -> (Vec<Expr>, Vec<Expr>) {
        (self.u1.clone(), self.u2.clone())
    }

    /// Laws for the uncertain interconnection, where `w` replaces `v`. They
    /// coincide with [`Self::synthesize_feedback`].
    pub fn uncertain_feedback(&self) -> (Vec<Expr>, Vec<Expr>) {
        self.synthesize_feedback()
    }

    /// `V = alpha' P alpha + V2(y) + |xi3|^2 / 2`, evaluated numerically.
    pub fn storage_v(&self, x: &[f64]) -> f64 {
        let pl = &self.plant;
        let alpha = self.alpha(x);
        let p = self.spec.p.as_matrix();
        let m = pl.m();
        let mut v1 = 0.0;
        for i in 0..m {
            for j in 0..m {
                v1 += alpha[i] * p[(i, j)] * alpha[j];
            }
        }
        let v2 = self.compiled.v2.eval(&x[pl.y_range()]);
        let v3 = 0.5 * x[pl.xi3_range()].iter().map(|s| s * s).sum::<f64>();
        v1 + v2 + v3
    }

    pub fn alpha(&self, x: &[f64]) -> Vec<f64> {
        let pl = &self.plant;
        pl.alpha(&x[pl.z_range()], &x[pl.y_range()])
            .expect("A11 invertibility checked at synthesis")
    }

    /// Evaluate the feedback laws at `x`, writing `u1` then `u2` into `u`.
    pub fn feedback(&self, x: &[f64], u: &mut [f64]) {
        for (o, c) in u.iter_mut().zip(self.compiled.u1.iter().chain(&self.compiled.u2)) {
            *o = c.eval(x);
        }
    }

    /// Closed-loop vector field with new input `v = (v1, v2)`.
    pub fn rhs(&self, x: &[f64], v: &[f64], dx: &mut [f64]) {
        let pl = &self.plant;
        let a = pl.a11().as_matrix();
        let m = pl.m();
        let mut py = vec![0.0; m];
        pl.eval_p(&x[pl.y_range()], &mut py);
        for i in 0..m {
            dx[i] = py[i] + (0..m).map(|j| a[(i, j)] * x[j]).sum::<f64>();
        }
        let p1 = pl.p1();
        for (k, (i, c)) in pl.xi1_range().zip(&self.compiled.u1).enumerate() {
            dx[i] = v[k] + c.eval(x);
        }
        for (i, j) in pl.xi2_range().zip(pl.xi3_range()) {
            dx[i] = x[j];
        }
        for (k, (i, c)) in pl.xi3_range().zip(&self.compiled.u2).enumerate() {
            dx[i] = v[p1 + k] + c.eval(x);
        }
    }

    pub fn output(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&x[self.plant.y_range()]);
    }
}

fn storage_expr(plant: &NormalFormPlant, inv: &DMatrix<f64>, p: &DMatrix<f64>, v2: &Expr) -> Expr {
    let m = plant.m();
    let names = plant.state_names();
    let alpha: Vec<Expr> = (0..m)
        .map(|i| {
            let shift = Expr::sum(
                plant
                    .p()
                    .iter()
                    .enumerate()
                    .filter(|(j, pj)| inv[(i, *j)] != 0.0 && !pj.is_zero())
                    .map(|(j, pj)| Expr::constant(inv[(i, j)]) * pj.clone()),
            );
            let z = Expr::var(&names[i]);
            if shift.is_zero() {
                z
            } else {
                z + shift
            }
        })
        .collect();
    let mut terms = Vec::new();
    for i in 0..m {
        if p[(i, i)] != 0.0 {
            terms.push(Expr::constant(p[(i, i)]) * alpha[i].clone().powi(2));
        }
        for j in i + 1..m {
            let c = p[(i, j)] + p[(j, i)];
            if c != 0.0 {
                terms.push(Expr::constant(c) * alpha[i].clone() * alpha[j].clone());
            }
        }
    }
    terms.push(v2.clone());
    for n in &names[plant.xi3_range()] {
        terms.push(Expr::constant(0.5) * Expr::var(n).powi(2));
    }
    Expr::sum(terms)
}
