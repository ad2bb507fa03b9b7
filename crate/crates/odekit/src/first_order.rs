//! Classification and closed-form solution of first-order equations.
//!
//! Equations enter as a differential form `F dx + G dy = 0`; an explicit
//! slope `dy/dx = f(x, y)` is the special case `f dx - dy = 0` (see
//! [`form_from_slope`]). Classification tries a fixed priority order and
//! [`solve_first_order`] walks the same order, falling through to the next
//! matching class when a solver hits an unsupported integral.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::expr::algebra::{collect_poly_in, exp_of, expand, linear_in};
use crate::expr::{Bindings, Expr, Symbol};
use crate::verify;

/// Fixed sample points for the numeric identity checks used during
/// classification. Classification must be deterministic, so these stand in
/// for "random" probes.
const CHECK_POINTS: [(f64, f64); 16] = [
    (0.7, 1.3),
    (1.2, 0.6),
    (-0.8, 1.1),
    (0.5, -1.2),
    (1.7, 2.1),
    (-1.4, -0.7),
    (0.9, 0.4),
    (2.3, 1.8),
    (0.3, 2.2),
    (-1.1, 0.8),
    (1.5, -0.9),
    (-0.6, -1.3),
    (2.1, 0.7),
    (0.4, 1.9),
    (-2.2, 1.4),
    (1.05, -1.6),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub x0: f64,
    pub y0: f64,
}

/// `dy/dx = f(x) / g(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable {
    pub f: Expr,
    pub g: Expr,
}

/// `dy/dx + p(x) y = q(x)`, already divided through by the leading
/// coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNormal {
    pub p: Expr,
    pub q: Expr,
}

/// `f(x, y) dx + g(x, y) dy = 0` with symmetric mixed partials.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialForm {
    pub f: Expr,
    pub g: Expr,
}

/// `dy/dx + p(x) y = q(x) y^n` with integer `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bernoulli {
    pub p: Expr,
    pub q: Expr,
    pub n: i64,
}

/// `m dx + n dy = 0` with `m`, `n` homogeneous of the same degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousForm {
    pub m: Expr,
    pub n: Expr,
    pub degree: i64,
}

/// `dy/dx = p(x) + q(x) y + r(x) y^2` with a known particular solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Riccati {
    pub p: Expr,
    pub q: Expr,
    pub r: Expr,
    pub y1: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FirstOrderClass {
    Separable(Separable),
    LinearNormal(LinearNormal),
    DifferentialForm(DifferentialForm),
    Bernoulli(Bernoulli),
    HomogeneousForm(HomogeneousForm),
    Riccati(Riccati),
}

impl FirstOrderClass {
    pub fn name(&self) -> &'static str {
        match self {
            FirstOrderClass::Separable(_) => "separable",
            FirstOrderClass::LinearNormal(_) => "linear",
            FirstOrderClass::DifferentialForm(_) => "exact differential form",
            FirstOrderClass::Bernoulli(_) => "bernoulli",
            FirstOrderClass::HomogeneousForm(_) => "homogeneous",
            FirstOrderClass::Riccati(_) => "riccati",
        }
    }
}

impl std::fmt::Display for FirstOrderClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassifyOptions {
    /// Known particular solution, required for the Riccati class.
    pub riccati_particular: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    General,
    Particular,
}

/// A closed-form solution. Explicit solutions live in `expression`; when
/// the relation cannot be inverted for y the solution set is
/// `implicit_relation = C` instead (with `level` holding the resolved
/// constant for particular solutions).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSolution {
    pub expression: Option<Expr>,
    pub implicit_relation: Option<Expr>,
    pub level: Option<f64>,
    pub kind: SolutionKind,
    pub method: &'static str,
    pub notes: Vec<String>,
}

impl AnalyticSolution {
    fn explicit(expr: Expr, kind: SolutionKind, method: &'static str) -> Self {
        AnalyticSolution {
            expression: Some(expr),
            implicit_relation: None,
            level: None,
            kind,
            method,
            notes: Vec::new(),
        }
    }

    fn implicit(relation: Expr, level: Option<f64>, method: &'static str) -> Self {
        let kind = if level.is_some() {
            SolutionKind::Particular
        } else {
            SolutionKind::General
        };
        AnalyticSolution {
            expression: None,
            implicit_relation: Some(relation),
            level,
            kind,
            method,
            notes: Vec::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

impl std::fmt::Display for AnalyticSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(expr) = &self.expression {
            return write!(f, "y = {}", expr.print());
        }
        let relation = self.implicit_relation.as_ref().expect("solution form");
        match self.level {
            Some(level) => write!(f, "{} = {}", relation.print(), level),
            None => write!(f, "{} = C", relation.print()),
        }
    }
}

/// The differential form of an explicit slope equation `dy/dx = rhs`.
pub fn form_from_slope(rhs: &Expr) -> (Expr, Expr) {
    (rhs.clone(), Expr::num(-1.0))
}

fn slope_of_form(f: &Expr, g: &Expr) -> Expr {
    (-(f.clone()) / g.clone()).simplify()
}

/// First matching class in the priority order separable, linear, exact,
/// Bernoulli, homogeneous, Riccati.
pub fn classify_first_order(f: &Expr, g: &Expr, opts: &ClassifyOptions) -> Result<FirstOrderClass> {
    classify_all(f, g, opts)
        .into_iter()
        .next()
        .ok_or(Error::Unclassified)
}

/// Every class the equation matches, in priority order. An equation often
/// belongs to several (for instance `dy/dx = -2y/x` is separable, linear,
/// homogeneous, and arises from an exact form).
pub fn classify_all(f: &Expr, g: &Expr, opts: &ClassifyOptions) -> Vec<FirstOrderClass> {
    let slope = slope_of_form(f, g);
    let mut out = Vec::new();
    if let Some(c) = detect_separable(&slope) {
        out.push(FirstOrderClass::Separable(c));
    }
    if let Some(c) = detect_linear(&slope) {
        out.push(FirstOrderClass::LinearNormal(c));
    }
    if let Some(c) = detect_exact(f, g) {
        out.push(FirstOrderClass::DifferentialForm(c));
    }
    if let Some(c) = detect_bernoulli(&slope) {
        out.push(FirstOrderClass::Bernoulli(c));
    }
    if let Some(c) = detect_homogeneous(f, g) {
        out.push(FirstOrderClass::HomogeneousForm(c));
    }
    if let Some(c) = detect_riccati(&slope, opts) {
        out.push(FirstOrderClass::Riccati(c));
    }
    out
}

// ---------------------------------------------------------------- detection

fn detect_separable(slope: &Expr) -> Option<Separable> {
    let (x_part, y_part) = separate(slope)?;
    // Spot check the split against the original slope; the structural
    // partition above is conservative but this guards its edge cases.
    let mut checked = 0;
    for &(px, py) in &CHECK_POINTS[..8] {
        let at = Bindings::xy(px, py);
        let sv = match slope.eval(&at) {
            Ok(v) if v.is_finite() => v,
            _ => continue,
        };
        let (fv, yv) = match (x_part.eval(&at), y_part.eval(&at)) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
            _ => continue,
        };
        if (sv - fv * yv).abs() > 1e-9 * (1.0 + sv.abs()) {
            return None;
        }
        checked += 1;
    }
    if checked < 3 {
        return None;
    }
    Some(Separable {
        f: x_part,
        g: y_part.recip().simplify(),
    })
}

/// Splits an expression into an x-only and a y-only factor, or `None` when
/// no such multiplicative split is visible.
fn separate(e: &Expr) -> Option<(Expr, Expr)> {
    let s = e.simplify();
    let factors = match s {
        Expr::Product(fs) => fs,
        other => vec![other],
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for factor in &factors {
        split_factor(factor, &mut xs, &mut ys)?;
    }
    let x_part = xs
        .into_iter()
        .fold(Expr::one(), |acc, f| acc * f)
        .simplify();
    let y_part = ys
        .into_iter()
        .fold(Expr::one(), |acc, f| acc * f)
        .simplify();
    Some((x_part, y_part))
}

fn split_factor(factor: &Expr, xs: &mut Vec<Expr>, ys: &mut Vec<Expr>) -> Option<()> {
    let dy = factor.depends_on(Symbol::Y);
    if !dy {
        xs.push(factor.clone());
        return Some(());
    }
    if !factor.depends_on(Symbol::X) {
        ys.push(factor.clone());
        return Some(());
    }
    match factor {
        // exp(u(x) + v(y)) splits into exp(u) * exp(v).
        Expr::Exp(arg) => {
            let expanded = expand(arg);
            let addends = match expanded {
                Expr::Sum(ts) => ts,
                other => vec![other],
            };
            let mut ax = Expr::zero();
            let mut ay = Expr::zero();
            for t in addends {
                match (t.depends_on(Symbol::X), t.depends_on(Symbol::Y)) {
                    (true, true) => return None,
                    (_, true) => ay = ay + t,
                    _ => ax = ax + t,
                }
            }
            xs.push(ax.simplify().exp());
            ys.push(ay.simplify().exp());
            Some(())
        }
        Expr::Power(base, r) => {
            let (bx, by) = separate(base)?;
            xs.push(bx.pow(*r));
            ys.push(by.pow(*r));
            Some(())
        }
        Expr::Product(fs) => {
            for f in fs {
                split_factor(f, xs, ys)?;
            }
            Some(())
        }
        Expr::Sum(_) => {
            // A mixed sum only separates if expansion collapses it.
            let expanded = expand(factor);
            if matches!(expanded, Expr::Sum(_)) {
                let dy = expanded.depends_on(Symbol::Y);
                let dx = expanded.depends_on(Symbol::X);
                match (dx, dy) {
                    (_, false) => {
                        xs.push(expanded);
                        Some(())
                    }
                    (false, true) => {
                        ys.push(expanded);
                        Some(())
                    }
                    _ => None,
                }
            } else {
                split_factor(&expanded, xs, ys)
            }
        }
        _ => None,
    }
}

fn detect_linear(slope: &Expr) -> Option<LinearNormal> {
    let coeffs = collect_poly_in(slope, Symbol::Y)?;
    if coeffs.len() > 2 {
        return None;
    }
    let q = coeffs.first().cloned().unwrap_or_else(Expr::zero);
    let c1 = coeffs.get(1).cloned().unwrap_or_else(Expr::zero);
    Some(LinearNormal {
        p: (-c1).simplify(),
        q: q.simplify(),
    })
}

fn exactness_holds(f: &Expr, g: &Expr) -> bool {
    let fy = f.differentiate(Symbol::Y);
    let gx = g.differentiate(Symbol::X);
    if expand(&(fy.clone() - gx.clone())).is_zero() {
        return true;
    }
    // Simplification can miss a cancellation; fall back to sampling.
    let mut checked = 0;
    for &(px, py) in &CHECK_POINTS {
        let at = Bindings::xy(px, py);
        let (a, b) = match (fy.eval(&at), gx.eval(&at)) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
            _ => continue,
        };
        if (a - b).abs() > 1e-9 * (1.0 + a.abs() + b.abs()) {
            return false;
        }
        checked += 1;
    }
    checked >= 8
}

fn detect_exact(f: &Expr, g: &Expr) -> Option<DifferentialForm> {
    if !exactness_holds(f, g) {
        return None;
    }
    Some(DifferentialForm {
        f: f.clone(),
        g: g.clone(),
    })
}

fn detect_bernoulli(slope: &Expr) -> Option<Bernoulli> {
    let coeffs = collect_poly_in(slope, Symbol::Y)?;
    let n = coeffs.len().checked_sub(1)?;
    if n < 2 {
        return None;
    }
    // Exactly the y and y^n powers may appear: dy/dx = -p y + q y^n.
    if !coeffs[0].is_zero() {
        return None;
    }
    for c in &coeffs[2..n] {
        if !c.is_zero() {
            return None;
        }
    }
    Some(Bernoulli {
        p: (-coeffs[1].clone()).simplify(),
        q: coeffs[n].clone(),
        n: n as i64,
    })
}

/// Degree of numeric homogeneity: `e(lx, ly) = l^d e(x, y)` checked at
/// fixed points for l in {2, 3}.
fn homogeneity_degree(e: &Expr) -> Option<i64> {
    let mut degree: Option<i64> = None;
    let mut checked = 0;
    for &(px, py) in &CHECK_POINTS[..8] {
        let base = match e.eval(&Bindings::xy(px, py)) {
            Ok(v) if v.is_finite() && v.abs() > 1e-9 => v,
            _ => continue,
        };
        let mut point_ok = true;
        for lambda in [2.0_f64, 3.0] {
            let scaled = match e.eval(&Bindings::xy(lambda * px, lambda * py)) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    point_ok = false;
                    break;
                }
            };
            let ratio = scaled / base;
            if ratio <= 0.0 {
                return None;
            }
            let d = ratio.ln() / lambda.ln();
            let rounded = d.round();
            if (d - rounded).abs() > 1e-6 {
                return None;
            }
            if (ratio - lambda.powi(rounded as i32)).abs() > 1e-9 * ratio.abs() {
                return None;
            }
            match degree {
                Some(existing) if existing != rounded as i64 => return None,
                _ => degree = Some(rounded as i64),
            }
        }
        if point_ok {
            checked += 1;
        }
    }
    if checked >= 5 {
        degree
    } else {
        None
    }
}

fn detect_homogeneous(f: &Expr, g: &Expr) -> Option<HomogeneousForm> {
    let dm = homogeneity_degree(f)?;
    let dn = homogeneity_degree(g)?;
    if dm != dn {
        return None;
    }
    Some(HomogeneousForm {
        m: f.clone(),
        n: g.clone(),
        degree: dm,
    })
}

fn detect_riccati(slope: &Expr, opts: &ClassifyOptions) -> Option<Riccati> {
    let y1 = opts.riccati_particular.clone()?;
    let coeffs = collect_poly_in(slope, Symbol::Y)?;
    if coeffs.len() != 3 || coeffs[2].is_zero() {
        return None;
    }
    Some(Riccati {
        p: coeffs[0].clone(),
        q: coeffs[1].clone(),
        r: coeffs[2].clone(),
        y1,
    })
}

// ------------------------------------------------------------------ solving

/// Outcome of inverting a separated relation `G(v) = F(x) + C` for v.
enum Separated {
    /// `v` as an expression in x (and the parameter C unless resolved).
    Explicit(Expr),
    /// Relation left as `G(v) - F(x) = C`, with the level fixed by an
    /// initial condition when one was given.
    Implicit(Expr, Option<f64>),
}

/// Matches `c * ln|u|` or `c * ln(u)`.
fn log_shape(e: &Expr) -> Option<(f64, Expr)> {
    match e {
        Expr::AbsLn(u) | Expr::Ln(u) => Some((1.0, (**u).clone())),
        Expr::Product(fs) if fs.len() == 2 => match (&fs[0], &fs[1]) {
            (Expr::Constant(c), Expr::AbsLn(u)) | (Expr::Constant(c), Expr::Ln(u)) => {
                Some((*c, (**u).clone()))
            }
            _ => None,
        },
        _ => None,
    }
}

/// Matches `c * v^r` for the given variable.
fn power_shape(e: &Expr, var: Symbol) -> Option<(f64, Rational64)> {
    fn var_power(e: &Expr, var: Symbol) -> Option<Rational64> {
        match e {
            Expr::Var(v) if *v == var => Some(Rational64::from_integer(1)),
            Expr::Power(base, r) => match base.as_ref() {
                Expr::Var(v) if *v == var => Some(*r),
                _ => None,
            },
            _ => None,
        }
    }
    match e {
        Expr::Product(fs) if fs.len() == 2 => match &fs[0] {
            Expr::Constant(c) => Some((*c, var_power(&fs[1], var)?)),
            _ => None,
        },
        other => Some((1.0, var_power(other, var)?)),
    }
}

/// Inverts `G(v) = F(x) + C` for v where G has one of the invertible
/// shapes (logarithm of a linear expression, pure power, linear);
/// otherwise returns the implicit relation. `ic` is `(x0, v0)`.
fn invert_separated(
    big_g: &Expr,
    big_f: &Expr,
    var: Symbol,
    ic: Option<(f64, f64)>,
) -> Result<Separated> {
    let g_simpl = big_g.simplify();
    let level = match ic {
        Some((x0, v0)) => {
            Some(big_g.eval(&Bindings::new().with(var, v0))? - big_f.eval(&Bindings::x(x0))?)
        }
        None => None,
    };

    if let Some((cval, u)) = log_shape(&g_simpl) {
        if let Some((a, b)) = linear_in(&u, var) {
            if let (Some(av), Some(bv)) = (a.constant_value(), b.constant_value()) {
                if av != 0.0 && cval != 0.0 {
                    // ln|u| = (F + C)/c, so u = K e^{F/c} with K = +-e^{C/c}
                    // carrying the branch sign.
                    let k = match ic {
                        None => Expr::param('C'),
                        Some((x0, v0)) => {
                            let f0 = big_f.eval(&Bindings::x(x0))?;
                            Expr::num((av * v0 + bv) * (-f0 / cval).exp())
                        }
                    };
                    let grown = exp_of(&(big_f.clone() * Expr::num(1.0 / cval)).simplify());
                    let expr = ((k * grown - b) * Expr::num(1.0 / av)).simplify();
                    return finish_explicit(expr, var, ic, big_g, big_f, level);
                }
            }
        }
        return Ok(Separated::Implicit(
            (big_g.clone() - big_f.clone()).simplify(),
            level,
        ));
    }

    if let Some((cval, r)) = power_shape(&g_simpl, var) {
        if cval != 0.0 && r != Rational64::from_integer(0) {
            let constant = match level {
                Some(value) => Expr::num(value),
                None => Expr::param('C'),
            };
            let inner = (big_f.clone() + constant) * Expr::num(1.0 / cval);
            let expr = if r == Rational64::from_integer(1) {
                inner.simplify()
            } else {
                inner.simplify().pow(r.recip()).simplify()
            };
            return finish_explicit(expr, var, ic, big_g, big_f, level);
        }
    }

    Ok(Separated::Implicit(
        (big_g.clone() - big_f.clone()).simplify(),
        level,
    ))
}

/// Accepts an explicit inversion if it reproduces the initial condition,
/// trying the opposite branch sign first and the implicit relation as the
/// last resort.
fn finish_explicit(
    expr: Expr,
    var: Symbol,
    ic: Option<(f64, f64)>,
    big_g: &Expr,
    big_f: &Expr,
    level: Option<f64>,
) -> Result<Separated> {
    let (x0, v0) = match ic {
        None => return Ok(Separated::Explicit(expr)),
        Some(pair) => pair,
    };
    let _ = var;
    let tol = 1e-9 * (1.0 + v0.abs());
    if let Ok(v) = expr.eval(&Bindings::x(x0)) {
        if (v - v0).abs() <= tol {
            return Ok(Separated::Explicit(expr));
        }
    }
    let negated = (-expr).simplify();
    if let Ok(v) = negated.eval(&Bindings::x(x0)) {
        if (v - v0).abs() <= tol {
            return Ok(Separated::Explicit(negated));
        }
    }
    Ok(Separated::Implicit(
        (big_g.clone() - big_f.clone()).simplify(),
        level,
    ))
}

/// Separation of variables: `g(y) dy = f(x) dx` integrates to
/// `G(y) = F(x) + C`, solved for y when G is invertible.
pub fn solve_separable(c: &Separable, ic: Option<InitialCondition>) -> Result<AnalyticSolution> {
    let big_g = c.g.integrate(Symbol::Y)?;
    let big_f = c.f.integrate(Symbol::X)?;
    let kind = solution_kind(ic);
    let method = "separation of variables";
    match invert_separated(&big_g, &big_f, Symbol::Y, ic.map(|i| (i.x0, i.y0)))? {
        Separated::Explicit(expr) => Ok(AnalyticSolution::explicit(expr, kind, method)),
        Separated::Implicit(relation, level) => {
            Ok(AnalyticSolution::implicit(relation, level, method)
                .with_note("relation not invertible for y in closed form"))
        }
    }
}

/// Integrating factor: `mu = e^{int p}`, `y = (int mu q dx + C)/mu`.
pub fn solve_linear_first_order(
    c: &LinearNormal,
    ic: Option<InitialCondition>,
) -> Result<AnalyticSolution> {
    let integral_p = c.p.integrate(Symbol::X)?;
    let mu = exp_of(&integral_p);
    let int_mu_q = (mu.clone() * c.q.clone()).integrate(Symbol::X)?;
    let constant = match ic {
        None => Expr::param('C'),
        Some(InitialCondition { x0, y0 }) => {
            let at = Bindings::x(x0);
            Expr::num(y0 * mu.eval(&at)? - int_mu_q.eval(&at)?)
        }
    };
    let y = ((int_mu_q + constant) * mu.recip()).simplify();
    Ok(AnalyticSolution::explicit(
        y,
        solution_kind(ic),
        "integrating factor",
    ))
}

/// Potential reconstruction for an exact form: find `g` with
/// `dg = f dx + g dy`; solutions are the level curves `g(x, y) = C`.
pub fn solve_exact(c: &DifferentialForm, ic: Option<InitialCondition>) -> Result<AnalyticSolution> {
    if !exactness_holds(&c.f, &c.g) {
        return Err(Error::NotExact);
    }
    let u = c.f.integrate(Symbol::X)?;
    let rem = expand(&(c.g.clone() - u.differentiate(Symbol::Y)));
    if rem.depends_on(Symbol::X) {
        return Err(Error::domain(
            "potential split left an x-dependent remainder",
        ));
    }
    let h = rem.integrate(Symbol::Y)?;
    let potential = (u + h).simplify();

    // The construction is only accepted if its gradient reproduces the
    // form, measured by finite differences.
    let mut checked = 0;
    for &(px, py) in &CHECK_POINTS[..8] {
        let hx = 1e-6 * (1.0 + px.abs());
        let hy = 1e-6 * (1.0 + py.abs());
        let p = |xa: f64, ya: f64| potential.eval(&Bindings::xy(xa, ya));
        let (gx, gy) = match (
            p(px + hx, py).and_then(|a| p(px - hx, py).map(|b| (a - b) / (2.0 * hx))),
            p(px, py + hy).and_then(|a| p(px, py - hy).map(|b| (a - b) / (2.0 * hy))),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let at = Bindings::xy(px, py);
        let (fv, gv) = match (c.f.eval(&at), c.g.eval(&at)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        if (gx - fv).abs() > 1e-9 * (1.0 + fv.abs() + gx.abs())
            || (gy - gv).abs() > 1e-9 * (1.0 + gv.abs() + gy.abs())
        {
            return Err(Error::domain("potential gradient check failed"));
        }
        checked += 1;
    }
    if checked < 4 {
        return Err(Error::domain("potential gradient check had too few points"));
    }

    let level = match ic {
        None => None,
        Some(InitialCondition { x0, y0 }) => Some(potential.eval(&Bindings::xy(x0, y0))?),
    };
    Ok(AnalyticSolution::implicit(
        potential,
        level,
        "exact potential",
    ))
}

/// Bernoulli substitution `z = y^{1-n}` turning the equation linear.
pub fn solve_bernoulli(c: &Bernoulli, ic: Option<InitialCondition>) -> Result<AnalyticSolution> {
    if c.n < 2 {
        return Err(Error::invalid("bernoulli exponent must be an integer >= 2"));
    }
    if let Some(InitialCondition { y0, .. }) = ic {
        if y0 == 0.0 {
            // y = 0 solves the equation and is the unique solution here.
            return Ok(AnalyticSolution::explicit(
                Expr::zero(),
                SolutionKind::Particular,
                "bernoulli substitution",
            )
            .with_note("initial condition lies on the y = 0 solution"));
        }
    }
    let factor = 1.0 - c.n as f64;
    let pz = (Expr::num(factor) * c.p.clone()).simplify();
    let qz = (Expr::num(factor) * c.q.clone()).simplify();
    let ic_z = ic.map(|InitialCondition { x0, y0 }| InitialCondition {
        x0,
        y0: y0.powi(1 - c.n as i32),
    });
    let z_sol = solve_linear_first_order(&LinearNormal { p: pz, q: qz }, ic_z)?;
    let z_expr = z_sol.expression.expect("linear solver is explicit");
    let exponent = Rational64::new(1, 1 - c.n);
    let mut y = z_expr.pow(exponent).simplify();

    if let Some(InitialCondition { x0, y0 }) = ic {
        // Even-root branches lose the sign of y; restore it against the
        // initial condition.
        let tol = 1e-9 * (1.0 + y0.abs());
        let direct = y.eval(&Bindings::x(x0));
        if !matches!(direct, Ok(v) if (v - y0).abs() <= tol) {
            let negated = (-y.clone()).simplify();
            match negated.eval(&Bindings::x(x0)) {
                Ok(v) if (v - y0).abs() <= tol => y = negated,
                _ => {
                    return Err(Error::domain(
                        "bernoulli back-substitution missed the initial condition",
                    ))
                }
            }
        }
    }
    Ok(
        AnalyticSolution::explicit(y, solution_kind(ic), "bernoulli substitution")
            .with_note("y = 0 is also a solution"),
    )
}

/// Homogeneous substitution `y = vx`, giving `x dv/dx = R(v) - v` which
/// separates against `dx/x`.
pub fn solve_homogeneous(
    c: &HomogeneousForm,
    ic: Option<InitialCondition>,
) -> Result<AnalyticSolution> {
    let slope = slope_of_form(&c.m, &c.n);
    // R(v) with the ratio v carried by the y symbol.
    let r_v = slope.subst(Symbol::X, &Expr::one()).simplify();
    let method = "homogeneous substitution";
    let denom = (r_v - Expr::y()).simplify();
    let ic_v = match ic {
        None => None,
        Some(InitialCondition { x0, y0 }) => {
            if x0 == 0.0 {
                return Err(Error::domain(
                    "homogeneous substitution needs x0 != 0 for the ratio y/x",
                ));
            }
            Some((x0, y0 / x0))
        }
    };
    if expand(&denom).is_zero() {
        // dy/dx = y/x: every ray through the origin is a solution.
        let constant = match ic_v {
            None => Expr::param('C'),
            Some((_, v0)) => Expr::num(v0),
        };
        return Ok(AnalyticSolution::explicit(
            (constant * Expr::x()).simplify(),
            solution_kind(ic),
            method,
        )
        .with_note("R(v) = v identically; the ray family y = Cx solves the equation"));
    }
    let big_g = denom.recip().integrate(Symbol::Y)?;
    let big_f = Expr::x().abs_ln();
    match invert_separated(&big_g, &big_f, Symbol::Y, ic_v)? {
        Separated::Explicit(phi) => Ok(AnalyticSolution::explicit(
            (Expr::x() * phi).simplify(),
            solution_kind(ic),
            method,
        )),
        Separated::Implicit(rel, level) => {
            let ratio = Expr::y() / Expr::x();
            let relation = rel.subst(Symbol::Y, &ratio).simplify();
            Ok(AnalyticSolution::implicit(relation, level, method)
                .with_note("relation in v = y/x not invertible in closed form"))
        }
    }
}

/// Riccati reduction about the known particular solution: `y = y1 + 1/w`
/// with w satisfying a first-order linear equation.
pub fn solve_riccati(c: &Riccati, ic: Option<InitialCondition>) -> Result<AnalyticSolution> {
    let rhs = (c.p.clone() + c.q.clone() * Expr::y() + c.r.clone() * Expr::y().powi(2)).simplify();
    let (lo, hi) = verify::working_interval(&c.y1, (0.5, 1.5))?;
    let residual = verify::explicit_residual(&rhs, &c.y1, lo, hi, 64)?;
    if residual > 1e-9 {
        return Err(Error::BadParticular(residual));
    }
    let method = "riccati reduction";

    let ic_w = match ic {
        None => None,
        Some(InitialCondition { x0, y0 }) => {
            let z0 = y0 - c.y1.eval(&Bindings::x(x0))?;
            if z0.abs() <= 1e-12 * (1.0 + y0.abs()) {
                return Ok(AnalyticSolution::explicit(
                    c.y1.clone(),
                    SolutionKind::Particular,
                    method,
                )
                .with_note("initial condition lies on the supplied particular solution"));
            }
            Some(InitialCondition { x0, y0: 1.0 / z0 })
        }
    };
    let pw = (c.q.clone() + Expr::num(2.0) * c.r.clone() * c.y1.clone()).simplify();
    let qw = (-c.r.clone()).simplify();
    let w_sol = solve_linear_first_order(&LinearNormal { p: pw, q: qw }, ic_w)?;
    let w_expr = w_sol.expression.expect("linear solver is explicit");
    let y = (c.y1.clone() + w_expr.recip()).simplify();
    Ok(AnalyticSolution::explicit(y, solution_kind(ic), method))
}

fn solution_kind(ic: Option<InitialCondition>) -> SolutionKind {
    if ic.is_some() {
        SolutionKind::Particular
    } else {
        SolutionKind::General
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub ic: Option<InitialCondition>,
    pub riccati_particular: Option<Expr>,
}

/// Classifies the form and walks the matching classes in priority order,
/// returning the first solver that succeeds. A solver failing on an
/// unsupported integral hands over to the next class.
pub fn solve_first_order(f: &Expr, g: &Expr, opts: &SolveOptions) -> Result<AnalyticSolution> {
    let copts = ClassifyOptions {
        riccati_particular: opts.riccati_particular.clone(),
    };
    let classes = classify_all(f, g, &copts);
    if classes.is_empty() {
        return Err(Error::Unclassified);
    }
    let mut first_err = None;
    for class in &classes {
        let attempt = match class {
            FirstOrderClass::Separable(c) => solve_separable(c, opts.ic),
            FirstOrderClass::LinearNormal(c) => solve_linear_first_order(c, opts.ic),
            FirstOrderClass::DifferentialForm(c) => solve_exact(c, opts.ic),
            FirstOrderClass::Bernoulli(c) => solve_bernoulli(c, opts.ic),
            FirstOrderClass::HomogeneousForm(c) => solve_homogeneous(c, opts.ic),
            FirstOrderClass::Riccati(c) => solve_riccati(c, opts.ic),
        };
        match attempt {
            Ok(solution) => return Ok(solution),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("at least one class attempted"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ic(x0: f64, y0: f64) -> Option<InitialCondition> {
        Some(InitialCondition { x0, y0 })
    }

    fn slope_form(src: &str) -> (Expr, Expr) {
        form_from_slope(&parse(src).unwrap())
    }

    /// Residual of an explicit general solution for several constants.
    fn assert_general_solves(rhs_src: &str, sol: &AnalyticSolution, cs: &[f64]) {
        let rhs = parse(rhs_src).unwrap();
        let expr = sol.expression.as_ref().expect("explicit solution");
        for &cv in cs {
            let bound = verify::bind_params(expr, &[('C', cv)]);
            let (lo, hi) = verify::working_interval(&bound, (0.5, 1.5)).unwrap();
            let r = verify::explicit_residual(&rhs, &bound, lo, hi, 64).unwrap();
            assert!(r < 1e-9, "residual {r} for C = {cv}");
        }
    }

    #[test]
    fn decay_classifies_separable_and_solves() {
        let (f, g) = slope_form("-6*y");
        let class = classify_first_order(&f, &g, &ClassifyOptions::default()).unwrap();
        match &class {
            FirstOrderClass::Separable(c) => {
                assert_eq!(c.f.print(), "-6");
                assert_eq!(c.g.print(), "y^-1");
            }
            other => panic!("expected separable, got {other}"),
        }
        let sol = solve_first_order(&f, &g, &SolveOptions::default()).unwrap();
        assert_eq!(sol.kind, SolutionKind::General);
        assert_general_solves("-6*y", &sol, &[-1.0, 0.0, 1.0, 2.0]);

        let particular = solve_first_order(
            &f,
            &g,
            &SolveOptions {
                ic: ic(0.0, 1.0),
                ..Default::default()
            },
        )
        .unwrap();
        let expr = particular.expression.unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            let got = expr.eval(&Bindings::x(x)).unwrap();
            assert!((got - (-6.0 * x).exp()).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn quadrature_slope_solves_with_ic() {
        let (f, g) = slope_form("2*x + 1");
        let sol = solve_first_order(
            &f,
            &g,
            &SolveOptions {
                ic: ic(0.0, 0.0),
                ..Default::default()
            },
        )
        .unwrap();
        let expr = sol.expression.unwrap();
        let want = parse("x^2 + x").unwrap();
        for i in 0..8 {
            let x = -1.0 + i as f64 * 0.4;
            assert!(
                (expr.eval(&Bindings::x(x)).unwrap() - want.eval(&Bindings::x(x)).unwrap()).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn constant_slope_keeps_level() {
        let (f, g) = slope_form("0");
        let sol = solve_first_order(
            &f,
            &g,
            &SolveOptions {
                ic: ic(0.0, 5.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sol.expression.unwrap().print(), "5");
    }

    #[test]
    fn linear_with_variable_coefficient() {
        // dy/dx - y/x = x^2 has integrating factor 1/x.
        let (f, g) = slope_form("y/x + x^2");
        let class = classify_first_order(&f, &g, &ClassifyOptions::default()).unwrap();
        match &class {
            FirstOrderClass::LinearNormal(c) => {
                assert!(expand(&(c.p.clone() + parse("1/x").unwrap())).is_zero());
                assert!(expand(&(c.q.clone() - parse("x^2").unwrap())).is_zero());
            }
            other => panic!("expected linear, got {other}"),
        }
        let sol = solve_first_order(&f, &g, &SolveOptions::default()).unwrap();
        let expr = sol.expression.as_ref().unwrap();
        let want = parse("x^3/2").unwrap() + Expr::param('C') * Expr::x();
        assert!(
            expand(&(expr.clone() - want)).is_zero(),
            "got {}",
            expr.print()
        );
        assert_general_solves("y/x + x^2", &sol, &[-1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn classify_all_sees_secondary_classes() {
        // 2xy dx + x^2 dy = 0 is exact, but as a slope it is also
        // separable and linear, which outrank it.
        let f = parse("2*x*y").unwrap();
        let g = parse("x^2").unwrap();
        let classes = classify_all(&f, &g, &ClassifyOptions::default());
        let names: Vec<&str> = classes.iter().map(|c| c.name()).collect();
        assert_eq!(names[0], "separable");
        assert!(names.contains(&"exact differential form"));
        assert!(names.contains(&"linear"));
        assert!(names.contains(&"homogeneous"));
    }

    #[test]
    fn exact_form_builds_potential() {
        let c = DifferentialForm {
            f: parse("2*x*y").unwrap(),
            g: parse("x^2").unwrap(),
        };
        let sol = solve_exact(&c, None).unwrap();
        let relation = sol.implicit_relation.as_ref().unwrap();
        assert!(expand(&(relation.clone() - parse("x^2*y").unwrap())).is_zero());

        let fixed = solve_exact(&c, ic(1.0, 3.0)).unwrap();
        assert_eq!(fixed.level, Some(3.0));
        assert_eq!(fixed.kind, SolutionKind::Particular);
    }

    #[test]
    fn non_exact_form_is_rejected() {
        // x dy - y dx = 0: f = -y, g = x has asymmetric mixed partials.
        let c = DifferentialForm {
            f: parse("-y").unwrap(),
            g: parse("x").unwrap(),
        };
        assert!(matches!(solve_exact(&c, None), Err(Error::NotExact)));
    }

    #[test]
    fn bernoulli_logistic_style() {
        let (f, g) = slope_form("y^2 - y");
        let copts = ClassifyOptions::default();
        let classes = classify_all(&f, &g, &copts);
        assert!(classes
            .iter()
            .any(|c| matches!(c, FirstOrderClass::Bernoulli(b) if b.n == 2)));

        // The separable route leads to an unsupported rational integral,
        // so the pipeline falls through to the Bernoulli substitution.
        let sol = solve_first_order(&f, &g, &SolveOptions::default()).unwrap();
        assert_eq!(sol.method, "bernoulli substitution");
        assert_general_solves("y^2 - y", &sol, &[-1.0, 0.0, 1.0, 2.0]);

        let particular = solve_first_order(
            &f,
            &g,
            &SolveOptions {
                ic: ic(0.0, 2.0),
                ..Default::default()
            },
        )
        .unwrap();
        let expr = particular.expression.unwrap();
        assert!((expr.eval(&Bindings::x(0.0)).unwrap() - 2.0).abs() < 1e-12);
        // y = 1/(1 - e^x/2) at x = -1.
        let want = 1.0 / (1.0 - 0.5 * (-1.0_f64).exp());
        assert!((expr.eval(&Bindings::x(-1.0)).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_inverse_power_family() {
        // y' + y^2 = 0 gives y = 1/(x + C).
        let c = Bernoulli {
            p: Expr::zero(),
            q: Expr::num(-1.0),
            n: 2,
        };
        let sol = solve_bernoulli(&c, None).unwrap();
        assert_general_solves("-y^2", &sol, &[-0.25, 0.5, 1.0, 2.0]);
        let fixed = solve_bernoulli(&c, ic(0.0, 1.0)).unwrap();
        let expr = fixed.expression.unwrap();
        assert!((expr.eval(&Bindings::x(1.0)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_ray_sum() {
        // dy/dx = (x + y)/x solves to y = x ln|x| + Cx.
        let c = HomogeneousForm {
            m: parse("x + y").unwrap(),
            n: Expr::num(-1.0),
            degree: 0,
        };
        let sol = solve_homogeneous(&c, None).unwrap();
        assert_general_solves("(x + y)/x", &sol, &[-1.0, 0.0, 1.0, 2.0]);
        let fixed = solve_homogeneous(&c, ic(1.0, 2.0)).unwrap();
        let expr = fixed.expression.unwrap();
        assert!((expr.eval(&Bindings::x(1.0)).unwrap() - 2.0).abs() < 1e-12);
        let want = |x: f64| x * x.abs().ln() + 2.0 * x;
        assert!((expr.eval(&Bindings::x(2.0)).unwrap() - want(2.0)).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_degree_two_classifies() {
        let (f, g) = slope_form("(x^2 + y^2)/(x*y)");
        let class = classify_first_order(&f, &g, &ClassifyOptions::default()).unwrap();
        match &class {
            FirstOrderClass::HomogeneousForm(h) => assert_eq!(h.degree, 0),
            other => panic!("expected homogeneous, got {other}"),
        }
        let sol = solve_first_order(&f, &g, &SolveOptions::default()).unwrap();
        assert_eq!(sol.method, "homogeneous substitution");
        let expr = sol.expression.as_ref().unwrap();
        // y = x sqrt(2 ln|x| + C'); check residual for constants keeping
        // the radicand positive on the probe intervals.
        let rhs = parse("(x^2 + y^2)/(x*y)").unwrap();
        for cv in [0.5, 1.0, 2.0] {
            let bound = verify::bind_params(expr, &[('C', cv)]);
            let (lo, hi) = verify::working_interval(&bound, (1.1, 2.0)).unwrap();
            let r = verify::explicit_residual(&rhs, &bound, lo, hi, 64).unwrap();
            assert!(r < 1e-9, "residual {r} for C = {cv}");
        }
    }

    #[test]
    fn ray_family_fixed_point() {
        let (f, g) = slope_form("y/x");
        let sol = solve_first_order(
            &f,
            &g,
            &SolveOptions {
                ic: ic(1.0, 3.0),
                ..Default::default()
            },
        )
        .unwrap();
        let expr = sol.expression.unwrap();
        assert!(expand(&(expr - parse("3*x").unwrap())).is_zero());
    }

    #[test]
    fn riccati_reduces_to_linear() {
        let c = Riccati {
            p: parse("2/x^2").unwrap(),
            q: Expr::zero(),
            r: Expr::num(-1.0),
            y1: parse("-1/x").unwrap(),
        };
        let sol = solve_riccati(&c, None).unwrap();
        assert_eq!(sol.method, "riccati reduction");
        let rhs = "2/x^2 - y^2";
        let expr = sol.expression.as_ref().unwrap();
        let parsed_rhs = parse(rhs).unwrap();
        for cv in [-1.0, 0.0, 1.0, 2.0] {
            let bound = verify::bind_params(expr, &[('C', cv)]);
            let (lo, hi) = verify::working_interval(&bound, (2.0, 3.0)).unwrap();
            let r = verify::explicit_residual(&parsed_rhs, &bound, lo, hi, 64).unwrap();
            assert!(r < 1e-9, "residual {r} for C = {cv}");
        }

        let fixed = solve_riccati(&c, ic(1.0, 1.0)).unwrap();
        let expr = fixed.expression.unwrap();
        assert!((expr.eval(&Bindings::x(1.0)).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn riccati_rejects_bad_particular() {
        // With these coefficients +1/x misses the equation by 2/x^2.
        let c = Riccati {
            p: parse("2/x^2").unwrap(),
            q: Expr::zero(),
            r: Expr::num(-1.0),
            y1: parse("1/x").unwrap(),
        };
        match solve_riccati(&c, None) {
            Err(Error::BadParticular(r)) => assert!(r > 1e-3, "residual {r}"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn separable_and_linear_agree_on_decay() {
        let sep = solve_separable(
            &Separable {
                f: Expr::num(-6.0),
                g: parse("1/y").unwrap(),
            },
            ic(0.0, 1.0),
        )
        .unwrap();
        let lin = solve_linear_first_order(
            &LinearNormal {
                p: Expr::num(6.0),
                q: Expr::zero(),
            },
            ic(0.0, 1.0),
        )
        .unwrap();
        let a = sep.expression.unwrap();
        let b = lin.expression.unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            let av = a.eval(&Bindings::x(x)).unwrap();
            let bv = b.eval(&Bindings::x(x)).unwrap();
            assert!((av - bv).abs() < 1e-12, "x = {x}: {av} vs {bv}");
        }
    }

    #[test]
    fn integrating_factor_makes_linear_form_exact() {
        // (P y - Q) dx + dy = 0 scaled by mu is exact for the linear
        // equation y' - y/x = x^2 with mu = 1/x.
        let mu = parse("1/x").unwrap();
        let f = (mu.clone() * parse("-y/x - x^2").unwrap()).simplify();
        let g = mu;
        assert!(exactness_holds(&f, &g));
    }

    #[test]
    fn implicit_when_not_invertible() {
        // dy/dx = x/(y + 1): G(y) = y^2/2 + y is not in the invertible
        // shape set, so the relation stays implicit.
        let (f, g) = slope_form("x/(y + 1)");
        let sol = solve_first_order(
            &f,
            &g,
            &SolveOptions {
                ic: ic(0.0, 1.0),
                ..Default::default()
            },
        )
        .unwrap();
        let relation = sol.implicit_relation.as_ref().unwrap();
        assert_eq!(sol.level, Some(1.5));
        let rhs = parse("x/(y + 1)").unwrap();
        let pts: Vec<(f64, f64)> = (1..5)
            .flat_map(|i| (1..4).map(move |j| (i as f64 * 0.4, j as f64 * 0.5)))
            .collect();
        let r = verify::implicit_residual(relation, &rhs, &pts).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn unsupported_integrals_surface_as_errors() {
        let (f, g) = slope_form("exp(x^2)*y");
        match solve_first_order(&f, &g, &SolveOptions::default()) {
            Err(Error::UnsupportedIntegral(_)) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn unclassifiable_input_reports_unclassified() {
        let (f, g) = slope_form("sin(x*y)");
        assert!(classify_all(&f, &g, &ClassifyOptions::default()).is_empty());
        match solve_first_order(&f, &g, &SolveOptions::default()) {
            Err(Error::Unclassified) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn classifier_is_deterministic() {
        let (f, g) = slope_form("(x^2 + y^2)/(x*y)");
        let first = classify_all(&f, &g, &ClassifyOptions::default());
        for _ in 0..5 {
            assert_eq!(first, classify_all(&f, &g, &ClassifyOptions::default()));
        }
    }
}
