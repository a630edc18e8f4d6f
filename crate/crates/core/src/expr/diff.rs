use super::Expr;

impl Expr {
    /// Exact symbolic derivative with respect to `var`.
    ///
    /// The result is not simplified; call [`Expr::fold`] (or use
    /// [`Expr::derivative`]) for a compact form.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Var(name) => Expr::Const(if name.as_ref() == var { 1.0 } else { 0.0 }),
            Expr::Const(_) => Expr::zero(),
            Expr::Add(a, b) => a.differentiate(var) + b.differentiate(var),
            Expr::Mul(a, b) => {
                a.differentiate(var) * (**b).clone() + (**a).clone() * b.differentiate(var)
            }
            Expr::Neg(a) => -a.differentiate(var),
            Expr::Pow(base, e) => {
                if e.is_zero() {
                    return Expr::zero();
                }
                Expr::Const(e.as_f64()) * (**base).clone().pow(e.minus_one()) * base.differentiate(var)
            }
        }
    }

    /// Derivative followed by constant folding.
    pub fn derivative(&self, var: &str) -> Expr {
        self.differentiate(var).fold()
    }
}
