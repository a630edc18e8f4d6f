use std::ops::Range;

use nalgebra::DMatrix;

use super::{block_names, SynthesisError};
use crate::expr::{parse_expr, CompiledExpr, Expr};
use crate::lyapunov::{classify_stability, construct_v1, default_tolerance, SquareMatrix};

/// Tolerance for `p(0) = 0`.
pub const ORIGIN_TOL: f64 = 1e-12;

/// `z' = A11 z + p(y)`, `xi1' = u1`, `xi2' = xi3`, `xi3' = u2`, `y = (xi1, xi2)`.
#[derive(Debug, Clone)]
pub struct NormalFormPlant {
    a11: SquareMatrix,
    p: Vec<Expr>,
    p1: usize,
    p2: usize,
    a11_inv: Option<DMatrix<f64>>,
    p_compiled: Vec<CompiledExpr>,
}

impl NormalFormPlant {
    pub fn new(a11: SquareMatrix, p: Vec<Expr>, p1: usize, p2: usize) -> Result<Self, SynthesisError> {
        if p1 + p2 == 0 {
            return Err(SynthesisError::NoOutputs);
        }
        let m = a11.order();
        if p.len() != m {
            return Err(SynthesisError::Dimension {
                what: "p(y)",
                expected: m,
                got: p.len(),
            });
        }
        let y_names = output_names(p1, p2);
        for e in &p {
            e.check_declared(&y_names)?;
        }
        let p_compiled = p
            .iter()
            .map(|e| e.compile(&y_names))
            .collect::<Result<Vec<_>, _>>()?;
        let zero = vec![0.0; p1 + p2];
        for (index, c) in p_compiled.iter().enumerate() {
            let value = c.eval(&zero);
            if !(value.abs() <= ORIGIN_TOL) {
                return Err(SynthesisError::NonzeroAtOrigin { index, value });
            }
        }
        let a11_inv = invert(a11.as_matrix());
        Ok(Self {
            a11,
            p,
            p1,
            p2,
            a11_inv,
            p_compiled,
        })
    }

    /// Parse the entries of `p(y)` against the output variable names.
    pub fn parse(a11: SquareMatrix, p: &[&str], p1: usize, p2: usize) -> Result<Self, SynthesisError> {
        let names = output_names(p1, p2);
        let exprs = p
            .iter()
            .map(|s| parse_expr(s, &names))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(a11, exprs, p1, p2)
    }

    pub fn a11(&self) -> &SquareMatrix {
        &self.a11
    }

    /// Replace `A11` and refactorize the cached inverse.
    pub fn set_a11(&mut self, a11: SquareMatrix) -> Result<(), SynthesisError> {
        if a11.order() != self.m() {
            return Err(SynthesisError::Dimension {
                what: "A11",
                expected: self.m(),
                got: a11.order(),
            });
        }
        self.a11_inv = invert(a11.as_matrix());
        self.a11 = a11;
        Ok(())
    }

    /// `inv(A11)`, computed once by LU factorization; `None` when singular.
    pub fn a11_inverse(&self) -> Option<&DMatrix<f64>> {
        self.a11_inv.as_ref()
    }

    pub fn p(&self) -> &[Expr] {
        &self.p
    }

    pub fn m(&self) -> usize {
        self.a11.order()
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn output_dim(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn state_dim(&self) -> usize {
        self.m() + self.p1 + 2 * self.p2
    }

    pub fn z_range(&self) -> Range<usize> {
        0..self.m()
    }

    pub fn xi1_range(&self) -> Range<usize> {
        let s = self.m();
        s..s + self.p1
    }

    pub fn xi2_range(&self) -> Range<usize> {
        let s = self.m() + self.p1;
        s..s + self.p2
    }

    pub fn xi3_range(&self) -> Range<usize> {
        let s = self.m() + self.p1 + self.p2;
        s..s + self.p2
    }

    /// `y = (xi1, xi2)` occupies a contiguous slice of the state.
    pub fn y_range(&self) -> Range<usize> {
        let s = self.m();
        s..s + self.p1 + self.p2
    }

    pub fn z_names(&self) -> Vec<String> {
        match self.m() {
            1 => vec!["z".to_string()],
            m => (1..=m).map(|i| format!("z{i}")).collect(),
        }
    }

    pub fn output_names(&self) -> Vec<String> {
        output_names(self.p1, self.p2)
    }

    pub fn xi3_names(&self) -> Vec<String> {
        block_names("xi3", self.p2)
    }

    pub fn state_names(&self) -> Vec<String> {
        let mut v = self.z_names();
        v.extend(self.output_names());
        v.extend(self.xi3_names());
        v
    }

    pub fn eval_p(&self, y: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.p_compiled) {
            *o = c.eval(y);
        }
    }

    /// `alpha = z + inv(A11) p(y)`.
    pub fn alpha(&self, z: &[f64], y: &[f64]) -> Result<Vec<f64>, SynthesisError> {
        let inv = self.a11_inv.as_ref().ok_or(SynthesisError::SingularA11)?;
        let m = self.m();
        if z.len() != m || y.len() != self.output_dim() {
            return Err(SynthesisError::Dimension {
                what: "alpha arguments",
                expected: m + self.output_dim(),
                got: z.len() + y.len(),
            });
        }
        let mut py = vec![0.0; m];
        self.eval_p(y, &mut py);
        Ok((0..m)
            .map(|i| z[i] + (0..m).map(|j| inv[(i, j)] * py[j]).sum::<f64>())
            .collect())
    }
}

pub(crate) fn output_names(p1: usize, p2: usize) -> Vec<String> {
    let mut v = block_names("xi1", p1);
    v.extend(block_names("xi2", p2));
    v
}

fn invert(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = a.clone().lu().try_inverse()?;
    inv.iter().all(|x| x.is_finite()).then_some(inv)
}

/// Quadratic `V1` certificate for the plant's `A11` (the "auto" choice of `P`).
pub fn auto_certificate(plant: &NormalFormPlant) -> Result<SquareMatrix, SynthesisError> {
    let verdict = classify_stability(plant.a11(), default_tolerance(plant.a11()))?;
    Ok(construct_v1(plant.a11(), &verdict)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_plant() -> NormalFormPlant {
        NormalFormPlant::parse(SquareMatrix::scalar(-1.0), &["xi1^2*xi2"], 1, 1).unwrap()
    }

    #[test]
    fn example_layout() {
        let p = example_plant();
        assert_eq!(p.state_names(), vec!["z", "xi1", "xi2", "xi3"]);
        assert_eq!(p.state_dim(), 4);
        assert_eq!(p.y_range(), 1..3);
        assert_eq!(p.xi3_range(), 3..4);
    }

    #[test]
    fn alpha_on_the_example() {
        let p = example_plant();
        // alpha = z - xi1^2 xi2
        assert_eq!(p.alpha(&[0.0], &[1.0, 2.0]).unwrap(), vec![-2.0]);
        assert_eq!(p.alpha(&[0.7], &[0.0, 0.0]).unwrap(), vec![0.7]);
        let a = p.alpha(&[0.3], &[-1.5, 0.4]).unwrap()[0];
        assert!((a - (0.3 - 1.5 * 1.5 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn multi_block_names() {
        let a = SquareMatrix::identity(2);
        let p = NormalFormPlant::parse(a, &["xi1_1*xi2", "0"], 2, 1).unwrap();
        assert_eq!(
            p.state_names(),
            vec!["z1", "z2", "xi1_1", "xi1_2", "xi2", "xi3"]
        );
    }

    #[test]
    fn empty_blocks_are_allowed() {
        let only_xi1 = NormalFormPlant::parse(SquareMatrix::scalar(-1.0), &["xi1^3"], 1, 0).unwrap();
        assert_eq!(only_xi1.state_names(), vec!["z", "xi1"]);
        let only_xi2 = NormalFormPlant::parse(SquareMatrix::scalar(-1.0), &["xi2"], 0, 1).unwrap();
        assert_eq!(only_xi2.state_names(), vec!["z", "xi2", "xi3"]);
        assert_eq!(
            NormalFormPlant::parse(SquareMatrix::scalar(-1.0), &["0"], 0, 0).unwrap_err(),
            SynthesisError::NoOutputs
        );
    }

    #[test]
    fn rejects_bad_p() {
        let a = SquareMatrix::scalar(-1.0);
        assert!(matches!(
            NormalFormPlant::parse(a.clone(), &["xi1 + 1"], 1, 1),
            Err(SynthesisError::NonzeroAtOrigin { index: 0, .. })
        ));
        assert!(matches!(
            NormalFormPlant::parse(a.clone(), &["z*xi1"], 1, 1),
            Err(SynthesisError::Expr(_))
        ));
        assert!(matches!(
            NormalFormPlant::parse(a, &["xi1", "xi2"], 1, 1),
            Err(SynthesisError::Dimension { .. })
        ));
    }

    #[test]
    fn singular_a11_has_no_alpha() {
        let a = SquareMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let mut p = NormalFormPlant::parse(a, &["0", "xi1"], 1, 0).unwrap();
        assert!(p.a11_inverse().is_some());
        p.set_a11(SquareMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap())
            .unwrap();
        assert!(p.a11_inverse().is_none());
        assert_eq!(p.alpha(&[1.0, 1.0], &[1.0]), Err(SynthesisError::SingularA11));
    }

    #[test]
    fn auto_certificate_for_the_example_is_one_half() {
        let p = auto_certificate(&example_plant()).unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-15);
    }
}
