//! Differentiation (total) and antidifferentiation (a restricted table).
//!
//! The table covers what the closed-form solvers actually produce: powers of
//! a linear argument (including the `1/v -> ln|v|` case), exponentials and
//! sines/cosines of linear arguments, `sec^2`/`csc^2` of linear arguments,
//! and anything that expands to a linear combination of those. Everything
//! else reports `UnsupportedIntegral` so callers can fall back.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::expr::algebra::{collect_terms, expand_terms, linear_in, Term};
use crate::expr::{Expr, Quadrature, Symbol};

impl Expr {
    /// Partial derivative with respect to `sym`.
    pub fn differentiate(&self, sym: Symbol) -> Expr {
        diff(self, sym).simplify()
    }

    /// Antiderivative with respect to `sym`, or `UnsupportedIntegral`.
    pub fn integrate(&self, sym: Symbol) -> Result<Expr> {
        let terms = collect_terms(&expand_terms(self));
        let mut parts = Vec::with_capacity(terms.len());
        for t in &terms {
            parts.push(integrate_term(t, sym)?);
        }
        Ok(Expr::Sum(parts).simplify())
    }
}

fn diff(e: &Expr, v: Symbol) -> Expr {
    match e {
        Expr::Constant(_) => Expr::zero(),
        Expr::Var(s) => {
            if *s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| diff(t, v)).collect()),
        Expr::Product(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (i, f) in fs.iter().enumerate() {
                let mut factors = vec![diff(f, v)];
                factors.extend(
                    fs.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, g)| g.clone()),
                );
                terms.push(Expr::Product(factors));
            }
            Expr::Sum(terms)
        }
        Expr::Power(b, r) => {
            let inner = diff(b, v);
            Expr::num(crate::expr::rat_to_f64(*r))
                * (*b.clone()).pow(*r - Rational64::from_integer(1))
                * inner
        }
        Expr::Exp(u) => (*u.clone()).exp() * diff(u, v),
        Expr::Ln(u) | Expr::AbsLn(u) => diff(u, v) / *u.clone(),
        Expr::Sin(u) => (*u.clone()).cos() * diff(u, v),
        Expr::Cos(u) => -((*u.clone()).sin() * diff(u, v)),
        Expr::Quadrature(q) => {
            if q.var == v {
                q.integrand.clone()
            } else {
                Expr::Quadrature(Box::new(Quadrature {
                    integrand: diff(&q.integrand, v),
                    var: q.var,
                    lower: q.lower,
                }))
            }
        }
    }
}

/// The linear form `a*v + b` of `u`, requiring `a` and `b` free of `v` and
/// `a` not identically zero.
fn linear_arg(u: &Expr, v: Symbol) -> Option<(Expr, Expr)> {
    let (a, b) = linear_in(u, v)?;
    if a.is_zero() {
        return None;
    }
    Some((a, b))
}

fn integrate_term(t: &Term, v: Symbol) -> Result<Expr> {
    let unsupported = || Error::UnsupportedIntegral(t.to_expr().to_string());

    // Split the term into v-free context and v-dependent factors.
    let mut context = Term {
        coeff: t.coeff,
        factors: t.factors.clone(),
        exp_arg: None,
    };
    let mut dependent: Vec<(Expr, Rational64)> = Vec::new();
    let keys: Vec<String> = context.factors.keys().cloned().collect();
    for key in keys {
        let (base, _) = &context.factors[&key];
        if base.depends_on(v) {
            let (base, exponent) = context.factors.remove(&key).unwrap();
            dependent.push((base, exponent));
        }
    }
    let exp_dep = match &t.exp_arg {
        Some(arg) if arg.depends_on(v) => Some(arg.clone()),
        Some(arg) => {
            context.exp_arg = Some(arg.clone());
            None
        }
        None => None,
    };
    let context = context.to_expr();

    let antiderivative = match (dependent.as_slice(), exp_dep) {
        // v-free: c dv -> c v
        ([], None) => Expr::Var(v),
        // c e^(a v + b) dv -> c e^(a v + b)/a
        ([], Some(arg)) => {
            let (a, _) = linear_arg(&arg, v).ok_or_else(unsupported)?;
            arg.exp() / a
        }
        ([(base, r)], None) => {
            let one = Rational64::from_integer(1);
            match base {
                // (a v + b)^r
                _ if linear_arg(base, v).is_some() => {
                    let (a, _) = linear_arg(base, v).unwrap();
                    if *r == Rational64::from_integer(-1) {
                        base.clone().abs_ln() / a
                    } else {
                        base.clone().pow(*r + one)
                            / (a * Expr::num(crate::expr::rat_to_f64(*r + one)))
                    }
                }
                // sin / cos of a linear argument
                Expr::Sin(u) if *r == one => {
                    let (a, _) = linear_arg(u, v).ok_or_else(unsupported)?;
                    -((*u.clone()).cos()) / a
                }
                Expr::Cos(u) if *r == one => {
                    let (a, _) = linear_arg(u, v).ok_or_else(unsupported)?;
                    (*u.clone()).sin() / a
                }
                // csc^2 and sec^2 of a linear argument
                Expr::Sin(u) if *r == Rational64::from_integer(-2) => {
                    let (a, _) = linear_arg(u, v).ok_or_else(unsupported)?;
                    -((*u.clone()).cos() * (*u.clone()).sin().powi(-1)) / a
                }
                Expr::Cos(u) if *r == Rational64::from_integer(-2) => {
                    let (a, _) = linear_arg(u, v).ok_or_else(unsupported)?;
                    (*u.clone()).sin() * (*u.clone()).cos().powi(-1) / a
                }
                _ => return Err(unsupported()),
            }
        }
        _ => return Err(unsupported()),
    };
    Ok((context * antiderivative).simplify())
}
