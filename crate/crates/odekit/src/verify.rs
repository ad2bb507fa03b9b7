//! Independent residual checks for symbolic solutions.
//!
//! Everything here measures derivatives by finite differences on the
//! evaluated solution, deliberately avoiding the symbolic differentiator so
//! a bug there cannot vouch for itself.

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Symbol};

/// Five-point central first derivative, O(h^4).
pub fn fd_derivative1<F>(f: &F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok((f(x - 2.0 * h)? - 8.0 * f(x - h)? + 8.0 * f(x + h)? - f(x + 2.0 * h)?) / (12.0 * h))
}

/// Five-point central second derivative, O(h^4).
pub fn fd_derivative2<F>(f: &F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok(
        (-f(x - 2.0 * h)? + 16.0 * f(x - h)? - 30.0 * f(x)? + 16.0 * f(x + h)? - f(x + 2.0 * h)?)
            / (12.0 * h * h),
    )
}

/// Evaluation points used by the residual checks: midpoints of `samples`
/// equal subdivisions, which keeps the stencil off the interval endpoints.
fn sample_points(x_lo: f64, x_hi: f64, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| x_lo + (i as f64 + 0.5) / samples as f64 * (x_hi - x_lo))
        .collect()
}

/// Picks an interval on which `solution` evaluates cleanly, preferring the
/// given one and otherwise probing a few shifted windows. This dodges
/// singularities such as a logarithm or a pole at the origin.
pub fn working_interval(solution: &Expr, preferred: (f64, f64)) -> Result<(f64, f64)> {
    let candidates = [
        preferred,
        (0.5, 1.5),
        (1.0, 2.0),
        (0.1, 0.9),
        (-1.5, -0.5),
        (2.0, 3.0),
        (-3.0, -2.0),
    ];
    'candidate: for &(lo, hi) in &candidates {
        // The negated comparison also rejects NaN endpoints.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(hi > lo) {
            continue;
        }
        // Probe a margin past each end so finite difference stencils fit.
        let margin = 0.01 * (hi - lo);
        for &x in sample_points(lo - margin, hi + margin, 9).iter() {
            let value = match solution.eval(&Bindings::x(x)) {
                Ok(v) => v,
                Err(_) => continue 'candidate,
            };
            if !value.is_finite() || value.abs() > 1e12 {
                continue 'candidate;
            }
        }
        return Ok((lo, hi));
    }
    Err(Error::domain(format!(
        "no usable interval found for {solution}"
    )))
}

/// Maximum defect `|y'(x) - rhs(x, y(x))|` of an explicit solution `y(x)`,
/// the derivative taken by central difference with step `1e-6 (1 + |x|)`.
pub fn explicit_residual(
    rhs: &Expr,
    solution: &Expr,
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<f64> {
    let y = |x: f64| solution.eval(&Bindings::x(x));
    let mut worst = 0.0_f64;
    for x in sample_points(x_lo, x_hi, samples) {
        let h = 1e-6 * (1.0 + x.abs());
        let deriv = (y(x + h)? - y(x - h)?) / (2.0 * h);
        let slope = rhs.eval(&Bindings::xy(x, y(x)?))?;
        worst = worst.max((deriv - slope).abs());
    }
    Ok(worst)
}

/// Checks an implicit solution `F(x, y) = C` of `y' = rhs(x, y)`. Along any
/// level curve `dF/dx + dF/dy * y' = 0`, and for a correct potential that
/// combination vanishes identically, so it is sampled over a rectangle of
/// `(x, y)` pairs rather than on one curve. Partials are taken by central
/// difference. Returns the worst defect, normalized by the gradient size.
pub fn implicit_residual(potential: &Expr, rhs: &Expr, points: &[(f64, f64)]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &(x, y) in points {
        let hx = 1e-6 * (1.0 + x.abs());
        let hy = 1e-6 * (1.0 + y.abs());
        let f = |xa: f64, ya: f64| potential.eval(&Bindings::xy(xa, ya));
        let fx = (f(x + hx, y)? - f(x - hx, y)?) / (2.0 * hx);
        let fy = (f(x, y + hy)? - f(x, y - hy)?) / (2.0 * hy);
        let slope = rhs.eval(&Bindings::xy(x, y))?;
        let defect = (fx + fy * slope).abs();
        let scale = 1.0 + fx.abs() + (fy * slope).abs();
        worst = worst.max(defect / scale);
    }
    Ok(worst)
}

/// Maximum defect `|y'' + p1 y' + p0 y - forcing|` of a candidate solution
/// to a linear second-order equation, derivatives taken by five-point
/// stencils with step `1e-3 (1 + |x|)`.
pub fn linear_second_order_residual(
    p1: &Expr,
    p0: &Expr,
    forcing: &Expr,
    solution: &Expr,
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<f64> {
    let y = |x: f64| solution.eval(&Bindings::x(x));
    let mut worst = 0.0_f64;
    for x in sample_points(x_lo, x_hi, samples) {
        let h = 1e-3 * (1.0 + x.abs());
        let d1 = fd_derivative1(&y, x, h)?;
        let d2 = fd_derivative2(&y, x, h)?;
        let at_x = Bindings::x(x);
        let defect = d2 + p1.eval(&at_x)? * d1 + p0.eval(&at_x)? * y(x)? - forcing.eval(&at_x)?;
        worst = worst.max(defect.abs());
    }
    Ok(worst)
}

/// Substitutes numeric values for free parameters such as the constants of
/// integration.
pub fn bind_params(expr: &Expr, values: &[(char, f64)]) -> Expr {
    let mut out = expr.clone();
    for &(name, value) in values {
        out = out.subst(Symbol::Param(name), &Expr::num(value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn stencils_differentiate_a_cubic_exactly() {
        let f = |x: f64| Ok(x * x * x - 2.0 * x);
        assert!((fd_derivative1(&f, 1.5, 1e-3).unwrap() - (3.0 * 2.25 - 2.0)).abs() < 1e-9);
        assert!((fd_derivative2(&f, 1.5, 1e-3).unwrap() - 9.0).abs() < 1e-6);
    }

    #[test]
    fn working_interval_avoids_the_origin_pole() {
        let sol = parse("1/x").unwrap();
        let (lo, hi) = working_interval(&sol, (-1.0, 1.0)).unwrap();
        assert!(lo * hi > 0.0, "interval ({lo}, {hi}) straddles the pole");
        let plain = parse("x^2").unwrap();
        assert_eq!(working_interval(&plain, (-1.0, 1.0)).unwrap(), (-1.0, 1.0));
    }

    #[test]
    fn explicit_residual_accepts_true_solution() {
        let rhs = parse("-6*y").unwrap();
        let sol = parse("exp(-6*x)").unwrap();
        let r = explicit_residual(&rhs, &sol, 0.0, 1.0, 32).unwrap();
        assert!(r < 1e-7, "residual {r}");
    }

    #[test]
    fn explicit_residual_rejects_wrong_solution() {
        let rhs = parse("-6*y").unwrap();
        let sol = parse("exp(-5*x)").unwrap();
        let r = explicit_residual(&rhs, &sol, 0.0, 1.0, 32).unwrap();
        assert!(r > 1e-2, "residual {r}");
    }

    #[test]
    fn implicit_residual_checks_level_curves() {
        // x^2 y is conserved along y' = -2 x y / x^2.
        let potential = parse("x^2*y").unwrap();
        let rhs = parse("-2*y/x").unwrap();
        let pts: Vec<(f64, f64)> = (1..5)
            .flat_map(|i| (1..5).map(move |j| (i as f64 * 0.5, j as f64 * 0.5)))
            .collect();
        let good = implicit_residual(&potential, &rhs, &pts).unwrap();
        assert!(good < 1e-8, "residual {good}");

        let wrong = parse("x*y^2").unwrap();
        let bad = implicit_residual(&wrong, &rhs, &pts).unwrap();
        assert!(bad > 1e-3, "residual {bad}");
    }

    #[test]
    fn second_order_residual_accepts_true_solution() {
        // y'' + 3 y' + 2 y = 0 with y = 2 exp(-x) - exp(-2 x).
        let sol = parse("2*exp(-x) - exp(-2*x)").unwrap();
        let r = linear_second_order_residual(
            &Expr::num(3.0),
            &Expr::num(2.0),
            &Expr::zero(),
            &sol,
            0.0,
            1.0,
            32,
        )
        .unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn second_order_residual_rejects_wrong_solution() {
        let sol = parse("2*exp(-x) - exp(-2.1*x)").unwrap();
        let r = linear_second_order_residual(
            &Expr::num(3.0),
            &Expr::num(2.0),
            &Expr::zero(),
            &sol,
            0.0,
            1.0,
            32,
        )
        .unwrap();
        assert!(r > 1e-3, "residual {r}");
    }

    #[test]
    fn bind_params_replaces_constants() {
        let e = parse("x^2").unwrap() + Expr::param('C');
        let bound = bind_params(&e, &[('C', 2.5)]);
        assert_eq!(bound.eval(&Bindings::x(1.0)).unwrap(), 3.5);
    }
}
