use super::{real_pow, Expr, ExprError, Exponent};

#[derive(Debug, Clone)]
enum Node {
    Var(usize),
    Const(f64),
    Add(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, Exponent),
}

/// An expression with variables resolved to slots of a value slice.
///
/// Evaluation performs the same floating-point operations in the same order
/// as [`Expr::eval`], so both routes return bit-identical results.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    root: Node,
}

impl Expr {
    /// Resolve variables against `slots`; `values[i]` will bind `slots[i]`.
    pub fn compile<S: AsRef<str>>(&self, slots: &[S]) -> Result<CompiledExpr, ExprError> {
        Ok(CompiledExpr {
            root: lower(self, slots)?,
        })
    }
}

fn lower<S: AsRef<str>>(e: &Expr, slots: &[S]) -> Result<Node, ExprError> {
    Ok(match e {
        Expr::Var(name) => Node::Var(
            slots
                .iter()
                .position(|s| s.as_ref() == name.as_ref())
                .ok_or_else(|| ExprError::MissingBinding(name.to_string()))?,
        ),
        Expr::Const(c) => Node::Const(*c),
        Expr::Add(a, b) => Node::Add(Box::new(lower(a, slots)?), Box::new(lower(b, slots)?)),
        Expr::Mul(a, b) => Node::Mul(Box::new(lower(a, slots)?), Box::new(lower(b, slots)?)),
        Expr::Neg(a) => Node::Neg(Box::new(lower(a, slots)?)),
        Expr::Pow(b, e) => Node::Pow(Box::new(lower(b, slots)?), *e),
    })
}

fn run(n: &Node, v: &[f64]) -> f64 {
    match n {
        Node::Var(i) => v[*i],
        Node::Const(c) => *c,
        Node::Add(a, b) => run(a, v) + run(b, v),
        Node::Mul(a, b) => run(a, v) * run(b, v),
        Node::Neg(a) => -run(a, v),
        Node::Pow(b, e) => real_pow(run(b, v), *e),
    }
}

impl CompiledExpr {
    /// Panics if `values` is shorter than the slot list used at compile time.
    pub fn eval(&self, values: &[f64]) -> f64 {
        run(&self.root, values)
    }
}
