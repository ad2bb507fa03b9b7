//! Expression trees.
//!
//! The node set is deliberately closed: constants, variables, n-ary sums and
//! products, powers with *rational* exponents, `exp`, `ln`, `ln|.|`, `sin`,
//! `cos`, and an opaque cumulative-quadrature node produced by the fallback
//! integrator. Everything the solvers emit is built from these.
//!
//! [`Expr::simplify`] is conservative: it flattens nested sums and products,
//! folds constant subtrees, and cancels multiplicative/additive identities.
//! It never factors and never reorders beyond placing the folded constant in
//! a fixed position, so simplification is idempotent and cheap. Heavier
//! rewriting (distribution, like-term collection) lives in [`algebra`].

pub mod algebra;
pub mod calculus;
pub mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

pub use parser::parse;

/// Shorthand for building a rational exponent.
pub fn rat(num: i64, den: i64) -> Rational64 {
    Rational64::new(num, den)
}

pub(crate) fn rat_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Converts a float to a nearby small-denominator rational, if one exists
/// within `1e-12` relative error (continued-fraction expansion, denominators
/// up to 10^6). Used for exponents and for recognising rational coefficients.
pub fn f64_to_rat(v: f64) -> Option<Rational64> {
    if !v.is_finite() || v.abs() >= 9.0e15 {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, v.floor() as i64, 1i64);
    let mut frac = v - v.floor();
    for _ in 0..40 {
        let approx = p1 as f64 / q1 as f64;
        if (approx - v).abs() <= 1e-12 * (1.0 + v.abs()) {
            return Some(Rational64::new(p1, q1));
        }
        if frac == 0.0 {
            break;
        }
        let r = 1.0 / frac;
        let a = r.floor();
        frac = r - a;
        let a = a as i64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > 1_000_000 {
            return None;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    let approx = p1 as f64 / q1 as f64;
    ((approx - v).abs() <= 1e-12 * (1.0 + v.abs())).then(|| Rational64::new(p1, q1))
}

/// An atom name: the independent variable `x`, the dependent variable `y`,
/// the transform variable `s`, or a free constant introduced by a solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    X,
    Y,
    S,
    Param(char),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::X => write!(f, "x"),
            Symbol::Y => write!(f, "y"),
            Symbol::S => write!(f, "s"),
            Symbol::Param(c) => write!(f, "{c}"),
        }
    }
}

/// A value for each symbol an expression may mention.
#[derive(Clone, Debug, Default)]
pub struct Bindings(BTreeMap<Symbol, f64>);

impl Bindings {
    pub fn new() -> Self {
        Bindings(BTreeMap::new())
    }

    pub fn x(v: f64) -> Self {
        Bindings::new().with(Symbol::X, v)
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Bindings::new().with(Symbol::X, x).with(Symbol::Y, y)
    }

    pub fn s(v: f64) -> Self {
        Bindings::new().with(Symbol::S, v)
    }

    pub fn with(mut self, sym: Symbol, v: f64) -> Self {
        self.0.insert(sym, v);
        self
    }

    pub fn set(&mut self, sym: Symbol, v: f64) {
        self.0.insert(sym, v);
    }

    pub fn get(&self, sym: Symbol) -> Option<f64> {
        self.0.get(&sym).copied()
    }
}

/// Cumulative quadrature: as a function of its variable `var`, the node's
/// value at `var = b` is the adaptive-Simpson integral of `integrand` (read
/// as a function of `var`) from `lower` to `b`. Only evaluation and
/// differentiation are supported; it never appears in parsed input.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub integrand: Expr,
    pub var: Symbol,
    pub lower: f64,
}

impl Quadrature {
    fn eval(&self, bindings: &Bindings) -> Result<f64> {
        let upper = bindings
            .get(self.var)
            .ok_or(Error::UnboundVariable(self.var))?;
        adaptive_simpson(
            |t| {
                let mut b = bindings.clone();
                b.set(self.var, t);
                self.integrand.eval(&b)
            },
            self.lower,
            upper,
            1e-10,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Constant(f64),
    Var(Symbol),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Box<Expr>, Rational64),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    /// Natural log of the absolute value of the argument.
    AbsLn(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Quadrature(Box<Quadrature>),
}

impl Expr {
    pub fn num(c: f64) -> Expr {
        Expr::Constant(c)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Constant(n as f64)
    }

    pub fn zero() -> Expr {
        Expr::Constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::Constant(1.0)
    }

    pub fn x() -> Expr {
        Expr::Var(Symbol::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Symbol::Y)
    }

    pub fn s() -> Expr {
        Expr::Var(Symbol::S)
    }

    pub fn param(name: char) -> Expr {
        Expr::Var(Symbol::Param(name))
    }

    pub fn pow(self, r: Rational64) -> Expr {
        Expr::Power(Box::new(self), r)
    }

    pub fn powi(self, n: i64) -> Expr {
        self.pow(Rational64::from_integer(n))
    }

    pub fn sqrt(self) -> Expr {
        self.pow(rat(1, 2))
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn ln(self) -> Expr {
        Expr::Ln(Box::new(self))
    }

    pub fn abs_ln(self) -> Expr {
        Expr::AbsLn(Box::new(self))
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    /// Multiplicative inverse, pushed into the structure where that is exact.
    pub fn recip(self) -> Expr {
        match self {
            Expr::Constant(c) if c != 0.0 => Expr::Constant(1.0 / c),
            Expr::Power(b, r) => Expr::Power(b, -r),
            Expr::Exp(u) => Expr::Exp(Box::new(-*u)),
            Expr::Product(fs) => Expr::Product(fs.into_iter().map(Expr::recip).collect()),
            other => other.powi(-1),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Constant(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Constant(c) if *c == 1.0)
    }

    /// The numeric value of a closed (symbol-free) expression, if it has one.
    pub fn constant_value(&self) -> Option<f64> {
        if self.free_symbols().is_empty() {
            self.eval(&Bindings::new()).ok()
        } else {
            None
        }
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<f64> {
        let v = match self {
            Expr::Constant(c) => *c,
            Expr::Var(sym) => bindings.get(*sym).ok_or(Error::UnboundVariable(*sym))?,
            Expr::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(bindings)?;
                }
                acc
            }
            Expr::Product(factors) => {
                let mut acc = 1.0;
                for t in factors {
                    acc *= t.eval(bindings)?;
                }
                acc
            }
            Expr::Power(base, r) => pow_eval(base.eval(bindings)?, *r)?,
            Expr::Exp(u) => u.eval(bindings)?.exp(),
            Expr::Ln(u) => {
                let v = u.eval(bindings)?;
                if v <= 0.0 {
                    return Err(Error::domain(format!("ln of non-positive value {v}")));
                }
                v.ln()
            }
            Expr::AbsLn(u) => {
                let v = u.eval(bindings)?;
                if v == 0.0 {
                    return Err(Error::domain("ln|0| is undefined"));
                }
                v.abs().ln()
            }
            Expr::Sin(u) => u.eval(bindings)?.sin(),
            Expr::Cos(u) => u.eval(bindings)?.cos(),
            Expr::Quadrature(q) => q.eval(bindings)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("non-finite value from `{self}`")))
        }
    }

    /// Replaces every free occurrence of `sym` by `replacement`.
    pub fn subst(&self, sym: Symbol, replacement: &Expr) -> Expr {
        match self {
            Expr::Constant(_) => self.clone(),
            Expr::Var(s) if *s == sym => replacement.clone(),
            Expr::Var(_) => self.clone(),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| t.subst(sym, replacement)).collect()),
            Expr::Product(ts) => {
                Expr::Product(ts.iter().map(|t| t.subst(sym, replacement)).collect())
            }
            Expr::Power(b, r) => Expr::Power(Box::new(b.subst(sym, replacement)), *r),
            Expr::Exp(u) => u.subst(sym, replacement).exp(),
            Expr::Ln(u) => u.subst(sym, replacement).ln(),
            Expr::AbsLn(u) => u.subst(sym, replacement).abs_ln(),
            Expr::Sin(u) => u.subst(sym, replacement).sin(),
            Expr::Cos(u) => u.subst(sym, replacement).cos(),
            Expr::Quadrature(q) if q.var == sym => self.clone(),
            Expr::Quadrature(q) => Expr::Quadrature(Box::new(Quadrature {
                integrand: q.integrand.subst(sym, replacement),
                var: q.var,
                lower: q.lower,
            })),
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut set = BTreeSet::new();
        self.collect_symbols(&mut set);
        set
    }

    fn collect_symbols(&self, set: &mut BTreeSet<Symbol>) {
        match self {
            Expr::Constant(_) => {}
            Expr::Var(s) => {
                set.insert(*s);
            }
            Expr::Sum(ts) | Expr::Product(ts) => {
                for t in ts {
                    t.collect_symbols(set);
                }
            }
            Expr::Power(b, _) => b.collect_symbols(set),
            Expr::Exp(u) | Expr::Ln(u) | Expr::AbsLn(u) | Expr::Sin(u) | Expr::Cos(u) => {
                u.collect_symbols(set)
            }
            Expr::Quadrature(q) => {
                q.integrand.collect_symbols(set);
                set.insert(q.var);
            }
        }
    }

    pub fn depends_on(&self, sym: Symbol) -> bool {
        self.free_symbols().contains(&sym)
    }

    /// Canonical text form: simplify, then render. The result reparses to the
    /// same tree (for parseable node kinds).
    pub fn print(&self) -> String {
        self.simplify().to_string()
    }

    pub fn simplify(&self) -> Expr {
        let mut cur = simplify_once(self);
        for _ in 0..8 {
            let next = simplify_once(&cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

fn pow_eval(base: f64, r: Rational64) -> Result<f64> {
    if r.is_integer() {
        let n = r.to_integer();
        if base == 0.0 && n < 0 {
            return Err(Error::domain("division by zero"));
        }
        if n.unsigned_abs() > i32::MAX as u64 {
            return Err(Error::domain("exponent out of range"));
        }
        Ok(base.powi(n as i32))
    } else if base > 0.0 {
        Ok(base.powf(rat_to_f64(r)))
    } else if base == 0.0 {
        if r > Rational64::from_integer(0) {
            Ok(0.0)
        } else {
            Err(Error::domain("division by zero"))
        }
    } else if r.denom() % 2 == 1 {
        // Odd root of a negative number: take the real branch.
        let mag = (-base).powf(rat_to_f64(r));
        Ok(if r.numer() % 2 == 0 { mag } else { -mag })
    } else {
        Err(Error::domain(format!("even root of negative value {base}")))
    }
}

fn simplify_once(e: &Expr) -> Expr {
    match e {
        Expr::Constant(_) | Expr::Var(_) => e.clone(),
        Expr::Sum(terms) => {
            let mut flat = Vec::new();
            let mut constant = 0.0;
            for t in terms {
                match simplify_once(t) {
                    Expr::Constant(c) => constant += c,
                    Expr::Sum(inner) => {
                        for u in inner {
                            match u {
                                Expr::Constant(c) => constant += c,
                                other => flat.push(other),
                            }
                        }
                    }
                    other => flat.push(other),
                }
            }
            if constant != 0.0 || flat.is_empty() {
                flat.push(Expr::Constant(constant));
            }
            if flat.len() == 1 {
                flat.pop().unwrap()
            } else {
                Expr::Sum(flat)
            }
        }
        Expr::Product(factors) => {
            let mut flat = Vec::new();
            let mut constant = 1.0;
            for t in factors {
                match simplify_once(t) {
                    Expr::Constant(c) => constant *= c,
                    Expr::Product(inner) => {
                        for u in inner {
                            match u {
                                Expr::Constant(c) => constant *= c,
                                other => flat.push(other),
                            }
                        }
                    }
                    other => flat.push(other),
                }
            }
            if constant == 0.0 {
                return Expr::Constant(0.0);
            }
            if constant != 1.0 || flat.is_empty() {
                flat.insert(0, Expr::Constant(constant));
            }
            if flat.len() == 1 {
                flat.pop().unwrap()
            } else {
                Expr::Product(flat)
            }
        }
        Expr::Power(base, r) => {
            let b = simplify_once(base);
            if *r == Rational64::from_integer(0) {
                return Expr::Constant(1.0);
            }
            if *r == Rational64::from_integer(1) {
                return b;
            }
            match b {
                Expr::Constant(c) => match pow_eval(c, *r) {
                    Ok(v) if v.is_finite() => Expr::Constant(v),
                    _ => Expr::Constant(c).pow(*r),
                },
                // (u^a)^n = u^(a n) is exact for integer n.
                Expr::Power(inner, a) if r.is_integer() => Expr::Power(inner, a * *r),
                other => other.pow(*r),
            }
        }
        Expr::Exp(u) => match simplify_once(u) {
            Expr::Constant(c) => {
                let v = c.exp();
                if v.is_finite() {
                    Expr::Constant(v)
                } else {
                    Expr::Constant(c).exp()
                }
            }
            other => other.exp(),
        },
        Expr::Ln(u) => match simplify_once(u) {
            Expr::Constant(c) if c > 0.0 => Expr::Constant(c.ln()),
            other => other.ln(),
        },
        Expr::AbsLn(u) => match simplify_once(u) {
            Expr::Constant(c) if c != 0.0 => Expr::Constant(c.abs().ln()),
            other => other.abs_ln(),
        },
        Expr::Sin(u) => match simplify_once(u) {
            Expr::Constant(c) => Expr::Constant(c.sin()),
            other => other.sin(),
        },
        Expr::Cos(u) => match simplify_once(u) {
            Expr::Constant(c) => Expr::Constant(c.cos()),
            other => other.cos(),
        },
        Expr::Quadrature(q) => Expr::Quadrature(Box::new(Quadrature {
            integrand: simplify_once(&q.integrand),
            var: q.var,
            lower: q.lower,
        })),
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Sum(mut a), Expr::Sum(b)) => {
                a.extend(b);
                Expr::Sum(a)
            }
            (Expr::Sum(mut a), b) => {
                a.push(b);
                Expr::Sum(a)
            }
            (a, Expr::Sum(mut b)) => {
                b.insert(0, a);
                Expr::Sum(b)
            }
            (a, b) => Expr::Sum(vec![a, b]),
        }
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Product(mut a), Expr::Product(b)) => {
                a.extend(b);
                Expr::Product(a)
            }
            (Expr::Product(mut a), b) => {
                a.push(b);
                Expr::Product(a)
            }
            (a, Expr::Product(mut b)) => {
                b.insert(0, a);
                Expr::Product(b)
            }
            (a, b) => Expr::Product(vec![a, b]),
        }
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    // Quotients are stored as products with a reciprocal factor.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Expr) -> Expr {
        self * rhs.recip()
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Constant(c) => Expr::Constant(-c),
            Expr::Product(mut fs) => {
                if let Some(Expr::Constant(c)) = fs.first() {
                    let c = *c;
                    fs[0] = Expr::Constant(-c);
                    Expr::Product(fs)
                } else {
                    fs.insert(0, Expr::Constant(-1.0));
                    Expr::Product(fs)
                }
            }
            other => Expr::Product(vec![Expr::Constant(-1.0), other]),
        }
    }
}

// Rendering. The output reparses to the same tree under the expression
// grammar, provided the tree contains no quadrature node.

fn fmt_constant(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c == c.trunc() && c.abs() < 1e15 {
        write!(f, "{}", c as i64)
    } else {
        write!(f, "{c}")
    }
}

/// If `e` is "negative-looking" (a negative constant, or a product with a
/// negative leading constant), returns its negation for `a - b` rendering.
fn negated_form(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Constant(c) if *c < 0.0 => Some(Expr::Constant(-c)),
        Expr::Product(fs) => match fs.first() {
            Some(Expr::Constant(c)) if *c < 0.0 => {
                let mut rest: Vec<Expr> = fs[1..].to_vec();
                if *c != -1.0 {
                    rest.insert(0, Expr::Constant(-c));
                }
                match rest.len() {
                    0 => Some(Expr::Constant(1.0)),
                    1 => Some(rest.pop().unwrap()),
                    _ => Some(Expr::Product(rest)),
                }
            }
            _ => None,
        },
        _ => None,
    }
}

fn needs_parens_in_product(e: &Expr) -> bool {
    matches!(e, Expr::Sum(_))
}

fn fmt_power_base(base: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let atom = matches!(
        base,
        Expr::Var(_)
            | Expr::Exp(_)
            | Expr::Ln(_)
            | Expr::AbsLn(_)
            | Expr::Sin(_)
            | Expr::Cos(_)
            | Expr::Quadrature(_)
    ) || matches!(base, Expr::Constant(c) if *c >= 0.0);
    if atom {
        write!(f, "{base}")
    } else {
        write!(f, "({base})")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Constant(c) => fmt_constant(*c, f),
            Expr::Var(s) => write!(f, "{s}"),
            Expr::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if i == 0 {
                        write!(f, "{t}")?;
                    } else if let Some(neg) = negated_form(t) {
                        // A negated sum needs parens to keep precedence.
                        if matches!(neg, Expr::Sum(_)) {
                            write!(f, " - ({neg})")?;
                        } else {
                            write!(f, " - {neg}")?;
                        }
                    } else {
                        write!(f, " + {t}")?;
                    }
                }
                Ok(())
            }
            Expr::Product(factors) => {
                for (i, t) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    if needs_parens_in_product(t) {
                        write!(f, "({t})")?;
                    } else {
                        write!(f, "{t}")?;
                    }
                }
                Ok(())
            }
            Expr::Power(base, r) => {
                fmt_power_base(base, f)?;
                if r.is_integer() {
                    write!(f, "^{}", r.to_integer())
                } else {
                    write!(f, "^({}/{})", r.numer(), r.denom())
                }
            }
            Expr::Exp(u) => write!(f, "exp({u})"),
            Expr::Ln(u) => write!(f, "ln({u})"),
            Expr::AbsLn(u) => write!(f, "ln(abs({u}))"),
            Expr::Sin(u) => write!(f, "sin({u})"),
            Expr::Cos(u) => write!(f, "cos({u})"),
            Expr::Quadrature(q) => {
                write!(f, "quad({}, {}, {})", q.integrand, q.var, q.lower)
            }
        }
    }
}
