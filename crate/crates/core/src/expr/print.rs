use std::fmt;

use super::Expr;

const ADD: u8 = 1;
const MUL: u8 = 2;
const UNARY: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) => ADD,
        Expr::Mul(..) => MUL,
        Expr::Neg(_) => UNARY,
        Expr::Pow(..) => POW,
        Expr::Const(c) if c.is_sign_negative() => UNARY,
        Expr::Var(_) | Expr::Const(_) => ATOM,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        f.write_str("(")?;
        write_expr(f, e)?;
        f.write_str(")")
    } else {
        write_expr(f, e)
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // Display for f64 is the shortest string that parses back to the same bits
    if c.is_sign_negative() {
        write!(f, "-{}", -c)
    } else {
        write!(f, "{c}")
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Var(name) => f.write_str(name),
        Expr::Const(c) => write_const(f, *c),
        Expr::Add(a, b) => {
            write_at(f, a, ADD)?;
            if let Expr::Neg(inner) = b.as_ref() {
                f.write_str(" - ")?;
                write_at(f, inner, MUL)
            } else {
                f.write_str(" + ")?;
                write_at(f, b, MUL)
            }
        }
        Expr::Mul(a, b) => {
            write_at(f, a, MUL)?;
            f.write_str("*")?;
            write_at(f, b, UNARY)
        }
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_at(f, a, UNARY)
        }
        Expr::Pow(b, e) => {
            write_at(f, b, ATOM)?;
            if e.is_integer() && e.num() >= 0 {
                write!(f, "^{}", e.num())
            } else {
                write!(f, "^({e})")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
