//! Behavioural properties of the analytic and numeric solvers: a battery
//! of in-class first-order instances whose returned solutions must pass
//! an independent residual check, classifier determinism, the
//! integrating-factor exactness contract, agreement between analytic and
//! numeric solutions, error decay and method dominance, stability of the
//! repeated-root complementary solution, and a characterisation of the
//! interpolated-trajectory defect.

use odekit::first_order::{
    classify_all, form_from_slope, solve_first_order, AnalyticSolution, ClassifyOptions,
    InitialCondition, SolveOptions,
};
use odekit::numeric::{self, Method};
use odekit::second_order::{auxiliary_roots, complementary_solution, AuxiliaryRoots};
use odekit::verify;
use odekit::{Bindings, Expr, Symbol};

/// One first-order problem built to lie in a known solvable family,
/// kept as the differential form `f dx + g dy = 0` so exact structure
/// survives intact.
struct Instance {
    name: String,
    f: Expr,
    g: Expr,
    particular: Option<Expr>,
}

impl Instance {
    fn from_slope(name: String, rhs: Expr) -> Self {
        let (f, g) = form_from_slope(&rhs);
        Instance {
            name,
            f,
            g,
            particular: None,
        }
    }

    fn from_form(name: String, f: Expr, g: Expr) -> Self {
        Instance {
            name,
            f,
            g,
            particular: None,
        }
    }

    fn slope(&self) -> Expr {
        (-(self.f.clone()) / self.g.clone()).simplify()
    }
}

fn num(v: f64) -> Expr {
    Expr::num(v)
}

fn x() -> Expr {
    Expr::x()
}

fn y() -> Expr {
    Expr::y()
}

/// Every battery instance. Families overlap several classifier classes on
/// purpose; the point is that whatever route solves them, the result must
/// satisfy the equation.
fn battery() -> Vec<Instance> {
    let mut out = Vec::new();

    // Separable: y' = a x^j y^k.
    for &a in &[-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0] {
        for j in 0..=3i64 {
            for &k in &[1i64, 2] {
                out.push(Instance::from_slope(
                    format!("separable a={a} j={j} k={k}"),
                    num(a) * x().powi(j) * y().powi(k),
                ));
            }
        }
    }

    // Linear with variable coefficient: y' + (b/x) y = k x^j.
    for &b in &[-2.0, -1.0, 1.0, 2.0] {
        for &k in &[-1.0, 0.5, 2.0] {
            for j in 0..=2i64 {
                out.push(Instance::from_slope(
                    format!("linear b={b} k={k} j={j}"),
                    num(k) * x().powi(j) - num(b) * x().powi(-1) * y(),
                ));
            }
        }
    }

    // Constant-coefficient linear (also separable in y): y' = q0 - a y.
    for &a in &[-2.0, -0.5, 1.0, 3.0] {
        for &q0 in &[-1.0, 2.0] {
            out.push(Instance::from_slope(
                format!("linear const a={a} q0={q0}"),
                num(q0) - num(a) * y(),
            ));
        }
    }

    // Exact forms from the potential u = s1 x^i y^j + s2 x^k + s3 y^l.
    for &(i, j) in &[(1i64, 1i64), (1, 2), (2, 1), (2, 2), (3, 1)] {
        for &(s1, s2, s3) in &[(1.0, 1.0, 1.0), (0.5, 1.0, 2.0), (2.0, 0.5, 1.0)] {
            for &(k, l) in &[(1i64, 2i64), (2, 1)] {
                let u = num(s1) * x().powi(i) * y().powi(j)
                    + num(s2) * x().powi(k)
                    + num(s3) * y().powi(l);
                let f = u.differentiate(Symbol::X).simplify();
                let g = u.differentiate(Symbol::Y).simplify();
                out.push(Instance::from_form(
                    format!("exact u: i={i} j={j} k={k} l={l} s=({s1},{s2},{s3})"),
                    f,
                    g,
                ));
            }
        }
    }

    // Slope a + b y/x: linear route, homogeneous in shape.
    for &a in &[-1.5, -0.5, 0.5, 1.0, 2.0] {
        for &b in &[-1.0, 0.5, 2.0] {
            out.push(Instance::from_slope(
                format!("affine ratio a={a} b={b}"),
                num(a) + num(b) * y() / x(),
            ));
        }
    }

    // Slope (a x^2 + y^2) / (x y): degree-zero homogeneous.
    for &a in &[-2.0, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 3.0] {
        out.push(Instance::from_slope(
            format!("homogeneous ratio a={a}"),
            (num(a) * x().powi(2) + y().powi(2)) / (x() * y()),
        ));
    }

    // Bernoulli: y' + a y = b y^n.
    for &a in &[-2.0, -1.0, 0.5, 1.0, 2.0] {
        for &b in &[-1.0, 0.5, 1.0] {
            for &n in &[2i64, 3] {
                out.push(Instance::from_slope(
                    format!("bernoulli a={a} b={b} n={n}"),
                    num(b) * y().powi(n) - num(a) * y(),
                ));
            }
        }
    }

    // Riccati: y' = c y^2 - c a^2 with particular solution y = a.
    for &a in &[0.5, 1.0, 1.5, 2.0, 3.0] {
        for &c in &[0.5, 1.0, 2.0] {
            let mut inst = Instance::from_slope(
                format!("riccati shifted a={a} c={c}"),
                num(c) * y().powi(2) - num(c * a * a),
            );
            inst.particular = Some(num(a));
            out.push(inst);
        }
    }
    // Riccati with a variable-coefficient particular solution.
    let mut inst = Instance::from_slope(
        "riccati 2/x^2 - y^2".into(),
        num(2.0) * x().powi(-2) - y().powi(2),
    );
    inst.particular = Some(num(-1.0) * x().powi(-1));
    out.push(inst);

    out
}

fn solve_instance(inst: &Instance) -> AnalyticSolution {
    let opts = SolveOptions {
        ic: None,
        riccati_particular: inst.particular.clone(),
    };
    solve_first_order(&inst.f, &inst.g, &opts)
        .unwrap_or_else(|e| panic!("instance `{}` failed to solve: {e}", inst.name))
}

const WINDOWS: [(f64, f64); 6] = [
    (0.5, 1.5),
    (1.0, 2.0),
    (2.0, 3.0),
    (0.1, 0.9),
    (-1.5, -0.5),
    (-3.0, -2.0),
];

/// Independent residual of a solution against the slope field: max over
/// the constants of integration of the min over sample windows. A wrong
/// solution stays large on every window; a correct one is tiny wherever
/// it is defined.
fn residual_of(rhs: &Expr, solution: &AnalyticSolution) -> f64 {
    if let Some(expr) = &solution.expression {
        let constants: &[f64] = if expr.depends_on(Symbol::Param('C')) {
            &[-1.0, 0.0, 1.0, 2.0]
        } else {
            &[0.0]
        };
        let mut worst: Option<f64> = None;
        for &c in constants {
            let bound = verify::bind_params(expr, &[('C', c)]);
            let mut best: Option<f64> = None;
            for &(lo, hi) in &WINDOWS {
                let Ok((lo, hi)) = verify::working_interval(&bound, (lo, hi)) else {
                    continue;
                };
                if let Ok(r) = verify::explicit_residual(rhs, &bound, lo, hi, 48) {
                    best = Some(best.map_or(r, |b: f64| b.min(r)));
                }
            }
            if let Some(r) = best {
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
        return worst.expect("no window admitted the solution");
    }
    let relation = solution.implicit_relation.as_ref().expect("solution form");
    let mut points = Vec::new();
    for i in 1..=3 {
        for j in 1..=3 {
            points.push((0.4 * f64::from(i), 0.5 * f64::from(j) + 0.1));
        }
    }
    verify::implicit_residual(relation, rhs, &points).expect("implicit residual evaluates")
}

#[test]
fn residual_battery_on_in_class_instances() {
    let instances = battery();
    assert!(
        instances.len() >= 200,
        "battery holds {} instances",
        instances.len()
    );
    for inst in &instances {
        let solution = solve_instance(inst);
        let residual = residual_of(&inst.slope(), &solution);
        assert!(
            residual < 1e-8,
            "instance `{}` solved by `{}` has residual {residual:.3e}: {solution}",
            inst.name,
            solution.method,
        );
    }
}

#[test]
fn classification_and_solutions_are_deterministic() {
    for inst in battery() {
        let opts = ClassifyOptions {
            riccati_particular: inst.particular.clone(),
        };
        let first = format!("{:?}", classify_all(&inst.f, &inst.g, &opts));
        let second = format!("{:?}", classify_all(&inst.f, &inst.g, &opts));
        assert_eq!(first, second, "classification of `{}`", inst.name);

        let a = solve_instance(&inst).to_string();
        let b = solve_instance(&inst).to_string();
        assert_eq!(a, b, "solution text of `{}`", inst.name);
    }
}

#[test]
fn integrating_factor_turns_linear_forms_exact() {
    // y' + (b/x) y = k x^j in differential form has F = (b/x) y - k x^j,
    // G = 1; after scaling by the factor x^b the mixed partials agree.
    for &b in &[-2.0, -1.0, 1.0, 2.0, 3.0] {
        for &(k, j) in &[(1.0, 0i64), (2.0, 1), (-1.0, 2)] {
            let f = num(b) * x().powi(-1) * y() - num(k) * x().powi(j);
            let g = num(1.0);
            let mu = x().powi(b as i64);
            let mf = (mu.clone() * f).simplify();
            let mg = (mu * g).simplify();
            for i in 0..8 {
                let (px, py) = (0.6 + 0.2 * f64::from(i), 0.8 + 0.15 * f64::from(i));
                let h = 1e-6;
                let dy = (mf.eval(&Bindings::xy(px, py + h)).unwrap()
                    - mf.eval(&Bindings::xy(px, py - h)).unwrap())
                    / (2.0 * h);
                let dx = (mg.eval(&Bindings::xy(px + h, py)).unwrap()
                    - mg.eval(&Bindings::xy(px - h, py)).unwrap())
                    / (2.0 * h);
                assert!(
                    (dy - dx).abs() <= 1e-6 * (1.0 + dy.abs().max(dx.abs())),
                    "mixed partials for b={b} k={k} j={j} at ({px},{py}): {dy} vs {dx}"
                );
            }
        }
    }
}

#[test]
fn analytic_particular_solutions_agree_with_rk4() {
    let mut cases: Vec<(String, Expr, f64, f64, f64)> = Vec::new();
    for &a in &[-2.0, -1.0, 0.5, 1.0] {
        for j in 0..=2i64 {
            cases.push((
                format!("separable a={a} j={j}"),
                num(a) * x().powi(j) * y(),
                0.4,
                1.2,
                0.9,
            ));
        }
    }
    for &a in &[-2.0, 1.0, 3.0] {
        for &q0 in &[-1.0, 2.0] {
            cases.push((
                format!("linear const a={a} q0={q0}"),
                num(q0) - num(a) * y(),
                0.0,
                0.7,
                0.5,
            ));
        }
    }
    cases.push((
        "bernoulli n=2".into(),
        num(0.5) * y().powi(2) - y(),
        0.0,
        0.8,
        0.5,
    ));
    cases.push((
        "bernoulli n=3".into(),
        num(-1.0) * y().powi(3) - num(2.0) * y(),
        0.0,
        0.8,
        0.5,
    ));

    for (name, rhs, x0, y0, xend) in cases {
        let (f, g) = form_from_slope(&rhs);
        let opts = SolveOptions {
            ic: Some(InitialCondition { x0, y0 }),
            riccati_particular: None,
        };
        let solution =
            solve_first_order(&f, &g, &opts).unwrap_or_else(|e| panic!("case `{name}`: {e}"));
        let expr = solution
            .expression
            .unwrap_or_else(|| panic!("case `{name}` should be explicit"));

        let rhs_fn = |xv: f64, yv: f64| rhs.eval(&Bindings::xy(xv, yv));
        let traj = numeric::integrate_fixed(&rhs_fn, x0, y0, xend, 1e-3, Method::Rk4).unwrap();
        let numeric_end = traj.final_value();
        let analytic_end = expr.eval(&Bindings::x(xend)).unwrap();
        assert!(
            (numeric_end - analytic_end).abs() <= 1e-6 * (1.0 + analytic_end.abs()),
            "case `{name}`: rk4 {numeric_end} vs analytic {analytic_end}"
        );
    }
}

#[test]
fn halving_the_step_shrinks_the_error_for_every_method() {
    for &lambda in &[-6.0, -3.0, -1.0] {
        let rhs = |_x: f64, yv: f64| Ok(lambda * yv);
        let exact = |xv: f64| Ok((lambda * xv).exp());
        for method in Method::all() {
            let mut previous: Option<f64> = None;
            for &h in &[0.1, 0.05, 0.025] {
                let traj = numeric::integrate_fixed(&rhs, 0.0, 1.0, 1.0, h, method).unwrap();
                let report = numeric::error_report(&traj, &exact).unwrap();
                if let Some(coarser) = previous {
                    assert!(
                        report.max_abs_error < coarser,
                        "{method} at h={h} for lambda={lambda}: {} !< {coarser}",
                        report.max_abs_error
                    );
                }
                previous = Some(report.max_abs_error);
            }
        }
    }
}

#[test]
fn higher_order_methods_dominate_at_equal_step() {
    for &lambda in &[-6.0, -3.0, -1.0] {
        let rhs = |_x: f64, yv: f64| Ok(lambda * yv);
        let exact = |xv: f64| Ok((lambda * xv).exp());
        let max_err = |method: Method| -> f64 {
            let traj = numeric::integrate_fixed(&rhs, 0.0, 1.0, 1.0, 0.05, method).unwrap();
            numeric::error_report(&traj, &exact).unwrap().max_abs_error
        };
        let euler = max_err(Method::Euler);
        let heun = max_err(Method::ImprovedEuler);
        let rk4 = max_err(Method::Rk4);
        assert!(
            rk4 < heun && heun < euler,
            "lambda={lambda}: rk4 {rk4}, heun {heun}, euler {euler}"
        );
    }
}

#[test]
fn repeated_root_solution_is_stable_under_discriminant_jitter() {
    // b^2 = 4ac exactly at (1, 2, 1); nudging c by one part in 1e13 must
    // neither flip the classification nor move the solution.
    let mut references: Vec<f64> = Vec::new();
    for &eps in &[0.0, 1e-13, -1e-13] {
        let c = 1.0 * (1.0 + eps);
        let roots = auxiliary_roots(1.0, 2.0, c).unwrap();
        assert!(
            matches!(roots, AuxiliaryRoots::RepeatedReal { .. }),
            "eps={eps} gave {roots:?}"
        );
        let template = complementary_solution(&roots);
        let bound = verify::bind_params(&template, &[('C', 1.3), ('D', -0.7)]);

        let residual = verify::linear_second_order_residual(
            &num(2.0),
            &num(c),
            &num(0.0),
            &bound,
            0.0,
            1.0,
            33,
        )
        .unwrap();
        assert!(residual < 1e-8, "eps={eps}: residual {residual:.3e}");

        for i in 0..=10 {
            let xv = f64::from(i) / 10.0;
            let value = bound.eval(&Bindings::x(xv)).unwrap();
            assert!(value.is_finite());
            if eps == 0.0 {
                references.push(value);
            } else {
                let want = references[i as usize];
                assert!(
                    (value - want).abs() <= 1e-6 * (1.0 + want.abs()),
                    "eps={eps} at x={xv}: {value} vs {want}"
                );
            }
        }
    }
}

#[test]
fn interpolated_trajectory_defect_stays_in_its_band() {
    // Linear interpolation between grid points leaves an O(h) kink defect
    // near the nodes, orders of magnitude above the 1e-8 gates used for
    // closed forms. Pinned here so nobody mistakes interpolated
    // trajectories for residual-grade solutions; on-grid values via
    // value_at are the ones error reports should use.
    let rhs = |_x: f64, yv: f64| Ok(-6.0 * yv);
    let traj = numeric::integrate_fixed(&rhs, 0.0, 1.0, 1.0, 0.01, Method::Rk4).unwrap();
    let defect =
        numeric::residual_check(&rhs, &|xv: f64| traj.interpolate(xv), 0.05, 0.95, 101).unwrap();
    assert!(
        (1e-4..=0.5).contains(&defect),
        "interpolated defect {defect:.3e} left its characterisation band"
    );
}
