//! Fixed-step initial value problem solvers and their error reporting.
//!
//! Three single-step methods are provided: explicit Euler, the improved
//! Euler method (Heun's trapezoidal predictor-corrector), and the classic
//! fourth-order Runge-Kutta scheme. Abscissae are always computed as
//! `x0 + step * h` rather than by accumulation so long integrations do not
//! drift off the grid.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Hard cap on the number of fixed steps one integration may take.
const MAX_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Euler,
    ImprovedEuler,
    Rk4,
}

impl Method {
    /// Right-hand side evaluations one step costs.
    pub fn evals_per_step(&self) -> usize {
        match self {
            Method::Euler => 1,
            Method::ImprovedEuler => 2,
            Method::Rk4 => 4,
        }
    }

    /// Classical order of accuracy.
    pub fn order(&self) -> usize {
        match self {
            Method::Euler => 1,
            Method::ImprovedEuler => 2,
            Method::Rk4 => 4,
        }
    }

    pub fn all() -> [Method; 3] {
        [Method::Euler, Method::ImprovedEuler, Method::Rk4]
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Euler => "euler",
            Method::ImprovedEuler => "heun",
            Method::Rk4 => "rk4",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "heun" | "improved-euler" => Ok(Method::ImprovedEuler),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::invalid(format!(
                "unknown method {other:?}; expected euler, heun, or rk4"
            ))),
        }
    }
}

/// One explicit Euler step `y + h f(x, y)`.
pub fn euler_step<F>(rhs: &F, x: f64, y: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let k1 = rhs(x, y)?;
    finite(y + h * k1)
}

/// One improved Euler step: trapezoidal average of the slope at the left
/// end and at the Euler predictor.
pub fn improved_euler_step<F>(rhs: &F, x: f64, y: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let k1 = rhs(x, y)?;
    let k2 = rhs(x + h, y + h * k1)?;
    finite(y + 0.5 * h * (k1 + k2))
}

/// One classic fourth-order Runge-Kutta step.
pub fn rk4_step<F>(rhs: &F, x: f64, y: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let k1 = rhs(x, y)?;
    let k2 = rhs(x + 0.5 * h, y + 0.5 * h * k1)?;
    let k3 = rhs(x + 0.5 * h, y + 0.5 * h * k2)?;
    let k4 = rhs(x + h, y + h * k3)?;
    finite(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

fn finite(y: f64) -> Result<f64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite(0))
    }
}

/// One step of the chosen method.
pub fn step<F>(method: Method, rhs: &F, x: f64, y: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    match method {
        Method::Euler => euler_step(rhs, x, y, h),
        Method::ImprovedEuler => improved_euler_step(rhs, x, y, h),
        Method::Rk4 => rk4_step(rhs, x, y, h),
    }
}

/// A fixed-step numerical solution: the grid points `(x, y)` including the
/// initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub h: f64,
    pub points: Vec<(f64, f64)>,
    /// End abscissa the caller asked for. When it is not a whole number of
    /// steps past x0 the trajectory stops at the nearest grid point
    /// instead, and this field records the request.
    pub requested_end: f64,
}

impl Trajectory {
    pub fn x0(&self) -> f64 {
        self.points[0].0
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// True when the requested end abscissa was rounded to the grid.
    pub fn end_adjusted(&self) -> bool {
        (self.end() - self.requested_end).abs() > 1e-12 * (1.0 + self.requested_end.abs())
    }

    /// Value at a grid point; x must land on the grid within 1e-12.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let idx = ((x - self.x0()) / self.h).round();
        if idx < 0.0 || idx >= self.points.len() as f64 {
            return Err(Error::OffGrid(x));
        }
        let (gx, gy) = self.points[idx as usize];
        if (gx - x).abs() > 1e-12 * (1.0 + x.abs()) {
            return Err(Error::OffGrid(x));
        }
        Ok(gy)
    }

    /// Piecewise linear interpolation between grid points.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let t = (x - self.x0()) / self.h;
        if t < 0.0 || t > (self.points.len() - 1) as f64 {
            return Err(Error::OffGrid(x));
        }
        let i = (t.floor() as usize).min(self.points.len() - 2);
        let (xa, ya) = self.points[i];
        let (xb, yb) = self.points[i + 1];
        let w = (x - xa) / (xb - xa);
        Ok(ya + w * (yb - ya))
    }

    pub fn final_value(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }
}

/// Integrates `y' = rhs(x, y)`, `y(x0) = y0` up to `x_end` with fixed step
/// `h > 0`. When `x_end` is not a whole number of steps past `x0` the count
/// is rounded and the trajectory notes the requested end.
pub fn integrate_fixed<F>(
    rhs: &F,
    x0: f64,
    y0: f64,
    x_end: f64,
    h: f64,
    method: Method,
) -> Result<Trajectory>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::invalid(format!(
            "step size must be positive, got {h}"
        )));
    }
    if x_end < x0 {
        return Err(Error::invalid(format!(
            "integration runs forward; end {x_end} is before start {x0}"
        )));
    }
    let steps_f = ((x_end - x0) / h).round();
    if steps_f > MAX_STEPS as f64 {
        return Err(Error::TooManySteps(steps_f as u64));
    }
    let steps = steps_f as u64;

    let mut points = Vec::with_capacity(steps as usize + 1);
    points.push((x0, y0));
    let mut y = y0;
    for r in 0..steps {
        let x = x0 + r as f64 * h;
        y = step(method, rhs, x, y, h).map_err(|e| match e {
            Error::NonFinite(_) => Error::NonFinite(r as usize + 1),
            other => other,
        })?;
        points.push((x0 + (r + 1) as f64 * h, y));
    }
    Ok(Trajectory {
        method,
        h,
        points,
        requested_end: x_end,
    })
}

/// Pointwise comparison of a trajectory against a reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub x: f64,
    pub computed: f64,
    pub exact: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: Method,
    pub h: f64,
    pub rows: Vec<ErrorRow>,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub final_abs_error: f64,
}

/// Evaluates the reference solution on the trajectory's grid and collects
/// the absolute errors.
pub fn error_report<E>(traj: &Trajectory, exact: &E) -> Result<ErrorReport>
where
    E: Fn(f64) -> Result<f64>,
{
    let mut rows = Vec::with_capacity(traj.points.len());
    let mut max_abs = 0.0_f64;
    let mut sum_abs = 0.0_f64;
    for &(x, computed) in &traj.points {
        let reference = exact(x)?;
        let abs_error = (computed - reference).abs();
        max_abs = max_abs.max(abs_error);
        sum_abs += abs_error;
        rows.push(ErrorRow {
            x,
            computed,
            exact: reference,
            abs_error,
        });
    }
    let final_abs_error = rows.last().map(|r| r.abs_error).unwrap_or(0.0);
    Ok(ErrorReport {
        method: traj.method,
        h: traj.h,
        mean_abs_error: sum_abs / rows.len() as f64,
        max_abs_error: max_abs,
        final_abs_error,
        rows,
    })
}

/// Maximum error of one refinement level, measured on the coarsest grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub method: Method,
    pub levels: Vec<ConvergenceLevel>,
    /// Observed order between consecutive levels: `log2(E_i / E_{i+1})`.
    /// Infinity marks a level whose error vanished exactly.
    pub orders: Vec<f64>,
    pub mean_order: f64,
}

/// Runs the method over a ladder of halving step sizes and estimates the
/// observed order of convergence from the maximum errors. All levels are
/// compared on the grid of the coarsest step so the maxima range over the
/// same abscissae.
pub fn estimate_order<F, E>(
    rhs: &F,
    exact: &E,
    x0: f64,
    y0: f64,
    x_end: f64,
    hs: &[f64],
    method: Method,
) -> Result<ConvergenceReport>
where
    F: Fn(f64, f64) -> Result<f64>,
    E: Fn(f64) -> Result<f64>,
{
    if hs.len() < 2 {
        return Err(Error::invalid(
            "order estimation needs at least two step sizes",
        ));
    }
    for pair in hs.windows(2) {
        let ratio = pair[0] / pair[1];
        if !(ratio.is_finite() && (ratio - 2.0).abs() <= 1e-9) {
            return Err(Error::invalid(format!(
                "step sizes must halve level to level; got {} then {}",
                pair[0], pair[1]
            )));
        }
    }

    let mut levels = Vec::with_capacity(hs.len());
    for (level, &h) in hs.iter().enumerate() {
        let traj = integrate_fixed(rhs, x0, y0, x_end, h, method)?;
        // Index stride back onto the coarsest grid: level i is 2^i finer.
        let stride = 1usize << level;
        let mut max_abs = 0.0_f64;
        for (idx, &(x, computed)) in traj.points.iter().enumerate() {
            if idx % stride != 0 {
                continue;
            }
            let abs_error = (computed - exact(x)?).abs();
            max_abs = max_abs.max(abs_error);
        }
        levels.push(ConvergenceLevel {
            h,
            max_abs_error: max_abs,
        });
    }

    let orders: Vec<f64> = levels
        .windows(2)
        .map(|pair| {
            if pair[1].max_abs_error == 0.0 {
                f64::INFINITY
            } else {
                (pair[0].max_abs_error / pair[1].max_abs_error).log2()
            }
        })
        .collect();
    let mean_order = orders.iter().sum::<f64>() / orders.len() as f64;
    Ok(ConvergenceReport {
        method,
        levels,
        orders,
        mean_order,
    })
}

/// Maximum defect `|y'(x) - rhs(x, y(x))|` of a candidate solution over
/// equally spaced sample points, the derivative taken by central
/// difference.
pub fn residual_check<F, S>(
    rhs: &F,
    solution: &S,
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
    S: Fn(f64) -> Result<f64>,
{
    // The negated comparison also rejects NaN endpoints.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if samples == 0 || !(x_hi > x_lo) {
        return Err(Error::invalid("residual check needs a nonempty interval"));
    }
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let t = (i as f64 + 0.5) / samples as f64;
        let x = x_lo + t * (x_hi - x_lo);
        let delta = 1e-6 * (1.0 + x.abs());
        let deriv = (solution(x + delta)? - solution(x - delta)?) / (2.0 * delta);
        let defect = (deriv - rhs(x, solution(x)?)?).abs();
        worst = worst.max(defect);
    }
    Ok(worst)
}
