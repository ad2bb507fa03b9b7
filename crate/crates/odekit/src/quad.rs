//! Adaptive Simpson quadrature with an absolute tolerance. Backs the
//! cumulative-quadrature expression node.

use crate::error::Result;

pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    recurse(&f, a, b, fa, fm, fb, tol, 30)
}

fn estimate(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let whole = estimate(a, b, fa, fm, fb);
    let left = estimate(a, m, fa, flm, fm);
    let right = estimate(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        Ok(recurse(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)?)
    }
}
