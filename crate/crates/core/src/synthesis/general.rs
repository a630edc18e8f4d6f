use nalgebra::{DMatrix, DVector, SVD};

use super::{ClosedLoopSystem, NormalFormPlant, SynthesisError};
use crate::expr::{CompiledExpr, Expr};

/// Largest accepted condition number of `[l1; l2]`.
pub const MAX_GAIN_CONDITION: f64 = 1e10;

/// Input channels of the general normal form,
/// `xi1' = j1 + l1 u~1`, `xi3' = j2 + l2 u~2`, with `j`, `l` functions of the state.
#[derive(Debug, Clone)]
pub struct GeneralForm {
    j: Vec<Expr>,
    l: Vec<Vec<Expr>>,
    j_c: Vec<CompiledExpr>,
    l_c: Vec<Vec<CompiledExpr>>,
}

impl GeneralForm {
    /// `j1` has `p1` entries, `j2` has `p2`; `l1` is `p1 x p`, `l2` is `p2 x p`.
    pub fn new(
        plant: &NormalFormPlant,
        j1: Vec<Expr>,
        j2: Vec<Expr>,
        l1: Vec<Vec<Expr>>,
        l2: Vec<Vec<Expr>>,
    ) -> Result<Self, SynthesisError> {
        let p = plant.output_dim();
        let check = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(SynthesisError::Dimension { what, expected, got })
            }
        };
        check("j1", plant.p1(), j1.len())?;
        check("j2", plant.p2(), j2.len())?;
        check("l1 rows", plant.p1(), l1.len())?;
        check("l2 rows", plant.p2(), l2.len())?;
        for row in l1.iter().chain(&l2) {
            check("l row", p, row.len())?;
        }
        let names = plant.state_names();
        let j: Vec<Expr> = j1.into_iter().chain(j2).collect();
        let l: Vec<Vec<Expr>> = l1.into_iter().chain(l2).collect();
        let j_c = j.iter().map(|e| e.compile(&names)).collect::<Result<_, _>>()?;
        let l_c = l
            .iter()
            .map(|r| r.iter().map(|e| e.compile(&names)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        Ok(Self { j, l, j_c, l_c })
    }

    /// `j = 0`, `l = I`: the plant is already in normal form.
    pub fn identity(plant: &NormalFormPlant) -> Self {
        let p = plant.output_dim();
        let j = vec![Expr::zero(); p];
        let l = (0..p)
            .map(|r| (0..p).map(|c| Expr::constant(if r == c { 1.0 } else { 0.0 })).collect())
            .collect();
        let (p1, p2) = (plant.p1(), plant.p2());
        let (j1, j2) = split(j, p1);
        let (l1, l2) = split(l, p1);
        debug_assert_eq!(j2.len(), p2);
        Self::new(plant, j1, j2, l1, l2).expect("identity form is well-formed")
    }

    pub fn j(&self) -> &[Expr] {
        &self.j
    }

    pub fn l(&self) -> &[Vec<Expr>] {
        &self.l
    }

    /// `(j(x), [l1; l2](x))`.
    pub fn evaluate(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.j_c.len();
        let j = DVector::from_iterator(p, self.j_c.iter().map(|c| c.eval(x)));
        let l = DMatrix::from_fn(p, p, |r, c| self.l_c[r][c].eval(x));
        (j, l)
    }

    /// `u~ = [l1; l2]^-1 (u - j)` at state `x`.
    pub fn input_transform(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, SynthesisError> {
        let (j, l) = self.evaluate(x);
        let svd = SVD::new(l.clone(), false, false);
        let (max, min) = (svd.singular_values.max(), svd.singular_values.min());
        if !(min > 0.0) || !max.is_finite() {
            return Err(SynthesisError::SingularGain);
        }
        if max / min > MAX_GAIN_CONDITION {
            return Err(SynthesisError::IllConditionedGain(max / min));
        }
        let rhs = DVector::from_column_slice(u) - j;
        let sol = l.lu().solve(&rhs).ok_or(SynthesisError::SingularGain)?;
        Ok(sol.iter().copied().collect())
    }
}

fn split<T>(mut v: Vec<T>, at: usize) -> (Vec<T>, Vec<T>) {
    let tail = v.split_off(at);
    (v, tail)
}

/// Map a desired normal-form input `u = (u1, u2)` to the applied input of the
/// general form at state `x`.
pub fn reduce_general_form(form: &GeneralForm, x: &[f64], u: &[f64]) -> Result<Vec<f64>, SynthesisError> {
    form.input_transform(x, u)
}

/// A synthesized closed loop realized on a general-form plant: the normal-form
/// input is pushed through [`reduce_general_form`] and applied to
/// `xi1' = j1 + l1 u~1`, `xi3' = j2 + l2 u~2`.
#[derive(Debug, Clone)]
pub struct GeneralFormClosedLoop {
    closed_loop: ClosedLoopSystem,
    form: GeneralForm,
}

impl GeneralFormClosedLoop {
    pub fn new(closed_loop: ClosedLoopSystem, form: GeneralForm) -> Self {
        Self { closed_loop, form }
    }

    pub fn closed_loop(&self) -> &ClosedLoopSystem {
        &self.closed_loop
    }

    pub fn form(&self) -> &GeneralForm {
        &self.form
    }

    pub fn rhs(&self, x: &[f64], v: &[f64], dx: &mut [f64]) -> Result<(), SynthesisError> {
        let pl = self.closed_loop.plant();
        let p = pl.output_dim();
        // drift of z and xi2 is unchanged; only the input channels differ
        self.closed_loop.rhs(x, v, dx);
        let mut u = vec![0.0; p];
        self.closed_loop.feedback(x, &mut u);
        for (ui, vi) in u.iter_mut().zip(v) {
            *ui += vi;
        }
        let applied = self.form.input_transform(x, &u)?;
        let (j, l) = self.form.evaluate(x);
        let channel = &j + &l * DVector::from_column_slice(&applied);
        for (k, i) in pl.xi1_range().chain(pl.xi3_range()).enumerate() {
            dx[i] = channel[k];
        }
        Ok(())
    }
}
