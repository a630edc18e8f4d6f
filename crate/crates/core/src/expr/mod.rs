//! Scalar expressions over named real variables.
//!
//! The grammar is deliberately small: sums, products, negation and powers with
//! integer or odd-denominator rational exponents. Odd denominators keep every
//! power real-valued on negative bases (`x^(1/3)` is the real cube root), so an
//! expression such as `xi1^(4/3) + xi2^2` is defined on all of `R^n`.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary ('*' unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' exponent)?
//! exponent := literal ('^' literal)*          (right-associative)
//! literal  := ['-'] INT | '(' ['-'] INT ['/' INT] ')'
//! atom     := NUMBER ['/' INT] | IDENT | '(' expr ')'
//! ```

mod compile;
mod diff;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops;
use std::sync::Arc;

use thiserror::Error;

pub use compile::CompiledExpr;
pub use parse::parse_expr;

/// Errors raised while parsing, binding or evaluating expressions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("undeclared variable `{name}` at position {pos}")]
    UndeclaredVariable { name: String, pos: usize },
    #[error("rational exponent {num}/{den} has an even denominator and is not real-valued on negative bases")]
    EvenDenominator { num: i64, den: i64 },
    #[error("zero denominator in rational literal")]
    ZeroDenominator,
    #[error("no binding for variable `{0}`")]
    MissingBinding(String),
}

/// Exponent of a power node: a rational `num/den` in lowest terms with an odd,
/// positive denominator. Integer exponents have `den == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exponent {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl Exponent {
    pub fn new(num: i64, den: i64) -> Result<Self, ExprError> {
        if den == 0 {
            return Err(ExprError::ZeroDenominator);
        }
        let g = gcd(num, den).max(1);
        let (mut num, mut den) = (num / g, den / g);
        if den < 0 {
            num = -num;
            den = -den;
        }
        if den % 2 == 0 {
            return Err(ExprError::EvenDenominator { num, den });
        }
        Ok(Self { num, den })
    }

    pub const fn integer(n: i64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self - 1`; the denominator stays odd.
    pub fn minus_one(self) -> Self {
        Self {
            num: self.num - self.den,
            den: self.den,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Real power with the sign-preserving odd root: `x^(p/q) = sign(x)^p * |x|^(p/q)`.
pub(crate) fn real_pow(x: f64, e: Exponent) -> f64 {
    if e.den == 1 {
        return int_pow(x, e.num);
    }
    let root = if e.den == 3 {
        x.abs().cbrt()
    } else {
        x.abs().powf(1.0 / e.den as f64)
    };
    let mag = int_pow(root, e.num);
    if x < 0.0 && e.num % 2 != 0 {
        -mag
    } else {
        mag
    }
}

fn int_pow(x: f64, n: i64) -> f64 {
    match i32::try_from(n) {
        Ok(n) => x.powi(n),
        Err(_) => x.powf(n as f64),
    }
}

/// Abstract syntax tree of a scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(Arc<str>),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Exponent),
}

/// Source of variable values for [`Expr::eval`].
pub trait Binding {
    fn value(&self, name: &str) -> Option<f64>;
}

impl Binding for HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Binding for BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Binding for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Binding for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

/// Parallel slices of names and values.
pub struct NamedValues<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
}

impl Binding for NamedValues<'_> {
    fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(Arc::from(name))
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn powi(self, n: i64) -> Self {
        Expr::Pow(Box::new(self), Exponent::integer(n))
    }

    pub fn pow(self, e: Exponent) -> Self {
        Expr::Pow(Box::new(self), e)
    }

    /// Sum of the given terms, `0` when empty.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Self {
        terms
            .into_iter()
            .reduce(|acc, t| acc + t)
            .unwrap_or_else(Expr::zero)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn eval<B: Binding + ?Sized>(&self, binding: &B) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Var(name) => binding
                .value(name)
                .ok_or_else(|| ExprError::MissingBinding(name.to_string()))?,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(binding)? + b.eval(binding)?,
            Expr::Mul(a, b) => a.eval(binding)? * b.eval(binding)?,
            Expr::Neg(a) => -a.eval(binding)?,
            Expr::Pow(b, e) => real_pow(b.eval(binding)?, *e),
        })
    }

    /// Names of all variables referenced by the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(n) => {
                out.insert(n.to_string());
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_vars(out),
        }
    }

    /// Check every variable against a declared set.
    pub fn check_declared<S: AsRef<str>>(&self, declared: &[S]) -> Result<(), ExprError> {
        match self
            .variables()
            .into_iter()
            .find(|v| !declared.iter().any(|d| d.as_ref() == v))
        {
            Some(name) => Err(ExprError::UndeclaredVariable { name, pos: 0 }),
            None => Ok(()),
        }
    }

    /// Constant folding with the usual identities (`0*x`, `1*x`, `x+0`, `x^1`, ...).
    ///
    /// The result evaluates to the same value as `self` wherever `self` is finite.
    pub fn fold(&self) -> Expr {
        match self {
            Expr::Var(_) | Expr::Const(_) => self.clone(),
            Expr::Add(a, b) => match (a.fold(), b.fold()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
                (x, y) if x.is_zero() => y,
                (x, y) if y.is_zero() => x,
                (x, y) => x + y,
            },
            Expr::Mul(a, b) => match (a.fold(), b.fold()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
                (x, y) if x.is_zero() || y.is_zero() => Expr::zero(),
                (Expr::Const(c), y) if c == 1.0 => y,
                (x, Expr::Const(c)) if c == 1.0 => x,
                (Expr::Const(c), y) if c == -1.0 => Expr::Neg(Box::new(y)).fold(),
                (x, Expr::Const(c)) if c == -1.0 => Expr::Neg(Box::new(x)).fold(),
                // hoist constants to the left so that c1*(c2*x) folds
                (x, Expr::Const(c)) => Expr::Const(c) * x,
                (Expr::Const(c1), Expr::Mul(l, r)) if matches!(*l, Expr::Const(_)) => {
                    let Expr::Const(c2) = *l else { unreachable!() };
                    (Expr::Const(c1 * c2) * *r).fold()
                }
                (Expr::Const(c), Expr::Neg(inner)) => (Expr::Const(-c) * *inner).fold(),
                (x, y) => x * y,
            },
            Expr::Neg(a) => match a.fold() {
                Expr::Const(c) => Expr::Const(-c),
                Expr::Neg(inner) => *inner,
                x => -x,
            },
            Expr::Pow(b, e) => {
                if e.is_zero() {
                    return Expr::Const(1.0);
                }
                let base = b.fold();
                if *e == Exponent::integer(1) {
                    return base;
                }
                if let Expr::Const(c) = base {
                    let v = real_pow(c, *e);
                    if v.is_finite() {
                        return Expr::Const(v);
                    }
                }
                base.pow(*e)
            }
        }
    }

    /// Canonical form under the printer/parser round trip: negative constants
    /// become negated positive constants.
    pub fn normalize(&self) -> Expr {
        match self {
            Expr::Var(_) => self.clone(),
            Expr::Const(c) if c.is_sign_negative() => Expr::Neg(Box::new(Expr::Const(-c))),
            Expr::Const(_) => self.clone(),
            Expr::Add(a, b) => a.normalize() + b.normalize(),
            Expr::Mul(a, b) => a.normalize() * b.normalize(),
            Expr::Neg(a) => -a.normalize(),
            Expr::Pow(b, e) => b.normalize().pow(*e),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) => 1,
            Expr::Add(a, b) | Expr::Mul(a, b) => 1 + a.size() + b.size(),
            Expr::Neg(a) | Expr::Pow(a, _) => 1 + a.size(),
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(Expr::Neg(Box::new(rhs))))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
