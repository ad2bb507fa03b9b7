//! Command-line front end: CSV comparison tables against an exact
//! solution, convergence-order reports, raw numeric trajectories, and
//! closed-form solutions with a residual gate.
//!
//! Exit codes: 0 success, 1 residual gate failed, 2 parse/usage error,
//! 3 unclassified or unsupported analytically, 4 numeric blowup, 5 I/O.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use odekit::first_order::{
    classify_first_order, form_from_slope, solve_first_order, AnalyticSolution, ClassifyOptions,
    InitialCondition, SolveOptions,
};
use odekit::numeric::{self, Method, Trajectory};
use odekit::verify;
use odekit::{parse, Bindings, Error, Expr};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Parser)]
#[command(
    name = "odekit",
    version,
    about = "Analytic and fixed-step numeric solvers for first- and second-order ODEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate numeric methods against the exact solution as CSV.
    Compare(CompareArgs),
    /// Estimate convergence orders over a halving step-size ladder.
    Convergence(ConvergenceArgs),
    /// Emit raw fixed-step trajectories as CSV.
    SolveNumeric(SolveNumericArgs),
    /// Classify and solve in closed form, reporting a residual check.
    SolveAnalytic(SolveAnalyticArgs),
}

#[derive(Args)]
struct CompareArgs {
    /// Right-hand side f(x, y) of y' = f(x, y).
    #[arg(long, allow_hyphen_values = true)]
    rhs: String,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, allow_negative_numbers = true)]
    y0: f64,
    #[arg(long, allow_negative_numbers = true)]
    xend: f64,
    /// Step size; repeat for several blocks.
    #[arg(long = "h", required = true)]
    h: Vec<f64>,
    /// Comma-separated subset of euler, heun, rk4.
    #[arg(long, default_value = "euler,rk4")]
    methods: String,
    /// Exact solution y(x); derived analytically when omitted.
    #[arg(long, allow_hyphen_values = true)]
    exact: Option<String>,
    /// Spacing of reported rows (rows are selected by trajectory index).
    #[arg(long = "report-every", default_value_t = 0.1)]
    report_every: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, allow_hyphen_values = true)]
    rhs: String,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, allow_negative_numbers = true)]
    y0: f64,
    #[arg(long, allow_negative_numbers = true)]
    xend: f64,
    /// Halving ladder of step sizes, largest first; repeat the flag.
    #[arg(long = "h", required = true)]
    h: Vec<f64>,
    #[arg(long, default_value = "euler,heun,rk4")]
    methods: String,
    #[arg(long, allow_hyphen_values = true)]
    exact: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveNumericArgs {
    #[arg(long, allow_hyphen_values = true)]
    rhs: String,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, allow_negative_numbers = true)]
    y0: f64,
    #[arg(long, allow_negative_numbers = true)]
    xend: f64,
    #[arg(long = "h", required = true)]
    h: Vec<f64>,
    #[arg(long, default_value = "rk4")]
    methods: String,
    #[arg(long = "report-every", default_value_t = 0.1)]
    report_every: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveAnalyticArgs {
    #[arg(long, allow_hyphen_values = true)]
    rhs: String,
    /// Initial abscissa; with --y0 selects a particular solution.
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y0: Option<f64>,
    /// Known particular solution, enabling the Riccati route.
    #[arg(long, allow_hyphen_values = true)]
    particular: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Syntax { .. } => EXIT_PARSE,
            Error::Invalid(_) => EXIT_PARSE,
            Error::NonFinite(_) | Error::TooManySteps(_) => EXIT_BLOWUP,
            _ => EXIT_UNSUPPORTED,
        };
        Failure::new(code, e.to_string())
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Compare(args) => run_compare(&args),
        Command::Convergence(args) => run_convergence(&args),
        Command::SolveNumeric(args) => run_solve_numeric(&args),
        Command::SolveAnalytic(args) => run_solve_analytic(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn parse_methods(text: &str) -> Result<Vec<Method>, Failure> {
    let mut selected = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let m: Method = part
            .parse()
            .map_err(|e: Error| Failure::new(EXIT_PARSE, e.to_string()))?;
        if !selected.contains(&m) {
            selected.push(m);
        }
    }
    if selected.is_empty() {
        return Err(Failure::new(EXIT_PARSE, "no methods selected"));
    }
    // Canonical column order regardless of the flag order.
    Ok(Method::all()
        .into_iter()
        .filter(|m| selected.contains(m))
        .collect())
}

fn check_range(x0: f64, xend: f64, hs: &[f64]) -> Result<(), Failure> {
    // The negated comparison also rejects NaN bounds.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(xend > x0) {
        return Err(Failure::new(
            EXIT_PARSE,
            format!("integration range is empty: xend {xend} must exceed x0 {x0}"),
        ));
    }
    for &h in hs {
        if h <= 0.0 || !h.is_finite() {
            return Err(Failure::new(
                EXIT_PARSE,
                format!("step size must be positive, got {h}"),
            ));
        }
    }
    Ok(())
}

fn parse_expr(text: &str) -> Result<Expr, Failure> {
    parse(text).map_err(Failure::from)
}

/// The exact solution: taken from --exact, or derived by the analytic
/// pipeline from the slope and initial condition.
fn exact_expression(exact: &Option<String>, rhs: &Expr, x0: f64, y0: f64) -> Result<Expr, Failure> {
    if let Some(text) = exact {
        return parse_expr(text);
    }
    let (f, g) = form_from_slope(rhs);
    let opts = SolveOptions {
        ic: Some(InitialCondition { x0, y0 }),
        riccati_particular: None,
    };
    let solution = solve_first_order(&f, &g, &opts).map_err(Failure::from)?;
    solution.expression.ok_or_else(|| {
        Failure::new(
            EXIT_UNSUPPORTED,
            "analytic pipeline produced only an implicit relation; pass --exact",
        )
    })
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display()))),
    }
}

fn fmt15(v: f64) -> String {
    format!("{v:.15}")
}

fn fmt_sci(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.5e}")
    }
}

fn report_stride(report_every: f64, h: f64) -> usize {
    ((report_every / h).round() as usize).max(1)
}

/// Domain failures while stepping (overflowed rhs, trajectory leaving the
/// domain of a log or root) are numeric blowups, not analytic limits.
fn promote_domain(e: Error) -> Failure {
    match &e {
        Error::Domain(_) => Failure::new(EXIT_BLOWUP, e.to_string()),
        _ => Failure::from(e),
    }
}

fn integrate(
    rhs: &Expr,
    x0: f64,
    y0: f64,
    xend: f64,
    h: f64,
    method: Method,
) -> Result<Trajectory, Failure> {
    let f = |x: f64, y: f64| rhs.eval(&Bindings::xy(x, y));
    numeric::integrate_fixed(&f, x0, y0, xend, h, method).map_err(promote_domain)
}

fn run_compare(args: &CompareArgs) -> Result<i32, Failure> {
    check_range(args.x0, args.xend, &args.h)?;
    let methods = parse_methods(&args.methods)?;
    let rhs = parse_expr(&args.rhs)?;
    let exact = exact_expression(&args.exact, &rhs, args.x0, args.y0)?;

    let mut buf = String::new();
    for (block, &h) in args.h.iter().enumerate() {
        if block > 0 {
            buf.push('\n');
        }
        let trajectories: Vec<Trajectory> = methods
            .iter()
            .map(|&m| integrate(&rhs, args.x0, args.y0, args.xend, h, m))
            .collect::<Result<_, _>>()?;

        buf.push('x');
        buf.push_str(",exact");
        for m in &methods {
            let _ = write!(buf, ",{m},{m}_abs_err");
        }
        buf.push('\n');

        let stride = report_stride(args.report_every, h);
        let rows = trajectories[0].points.len();
        for idx in (0..rows).step_by(stride) {
            let x = trajectories[0].points[idx].0;
            let exact_v = exact.eval(&Bindings::x(x)).map_err(promote_domain)?;
            let _ = write!(buf, "{},{}", fmt15(x), fmt15(exact_v));
            for t in &trajectories {
                let y = t.points[idx].1;
                let _ = write!(buf, ",{},{}", fmt15(y), fmt15((y - exact_v).abs()));
            }
            buf.push('\n');
        }
    }
    write_output(&args.out, &buf)?;
    Ok(EXIT_OK)
}

fn run_convergence(args: &ConvergenceArgs) -> Result<i32, Failure> {
    check_range(args.x0, args.xend, &args.h)?;
    if args.h.len() < 2 {
        return Err(Failure::new(
            EXIT_PARSE,
            "convergence needs at least two halving step sizes",
        ));
    }
    let methods = parse_methods(&args.methods)?;
    let rhs = parse_expr(&args.rhs)?;
    let exact = exact_expression(&args.exact, &rhs, args.x0, args.y0)?;
    let f = |x: f64, y: f64| rhs.eval(&Bindings::xy(x, y));
    let e = |x: f64| exact.eval(&Bindings::x(x));

    let mut buf = String::from("method,h,max_abs_err,local_order\n");
    for &m in &methods {
        let report = numeric::estimate_order(&f, &e, args.x0, args.y0, args.xend, &args.h, m)
            .map_err(promote_domain)?;
        for (i, level) in report.levels.iter().enumerate() {
            let order = if i == 0 {
                String::new()
            } else {
                fmt_sci(report.orders[i - 1])
            };
            let _ = writeln!(
                buf,
                "{m},{},{},{order}",
                level.h,
                fmt_sci(level.max_abs_error)
            );
        }
        let _ = writeln!(buf, "{m},mean,,{}", fmt_sci(report.mean_order));
    }
    write_output(&args.out, &buf)?;
    Ok(EXIT_OK)
}

fn run_solve_numeric(args: &SolveNumericArgs) -> Result<i32, Failure> {
    check_range(args.x0, args.xend, &args.h)?;
    let methods = parse_methods(&args.methods)?;
    let rhs = parse_expr(&args.rhs)?;

    let mut buf = String::new();
    for (block, &h) in args.h.iter().enumerate() {
        if block > 0 {
            buf.push('\n');
        }
        let trajectories: Vec<Trajectory> = methods
            .iter()
            .map(|&m| integrate(&rhs, args.x0, args.y0, args.xend, h, m))
            .collect::<Result<_, _>>()?;
        buf.push('x');
        for m in &methods {
            let _ = write!(buf, ",{m}");
        }
        buf.push('\n');
        let stride = report_stride(args.report_every, h);
        let rows = trajectories[0].points.len();
        for idx in (0..rows).step_by(stride) {
            let x = trajectories[0].points[idx].0;
            let _ = write!(buf, "{}", fmt15(x));
            for t in &trajectories {
                let _ = write!(buf, ",{}", fmt15(t.points[idx].1));
            }
            buf.push('\n');
        }
    }
    write_output(&args.out, &buf)?;
    Ok(EXIT_OK)
}

/// Residual of an analytic solution against the slope field. General
/// solutions are checked for several values of the constant C; implicit
/// relations are checked through the level-curve slope at grid points.
///
/// Each curve is sampled on several candidate windows and the smallest
/// residual is kept: a correct solution is tiny on any window clear of
/// its poles, while a wrong one stays large everywhere.
fn solution_residual(rhs: &Expr, solution: &AnalyticSolution) -> Result<f64, Failure> {
    const WINDOWS: [(f64, f64); 6] = [
        (0.5, 1.5),
        (1.0, 2.0),
        (2.0, 3.0),
        (0.1, 0.9),
        (-1.5, -0.5),
        (-3.0, -2.0),
    ];
    if let Some(expr) = &solution.expression {
        let constants: &[f64] = if expr.depends_on(odekit::Symbol::Param('C')) {
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
                if let Ok(r) = verify::explicit_residual(rhs, &bound, lo, hi, 64) {
                    best = Some(best.map_or(r, |b: f64| b.min(r)));
                }
            }
            if let Some(r) = best {
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
        return worst.ok_or_else(|| {
            Failure::new(
                EXIT_UNSUPPORTED,
                "could not find a working interval for the residual check",
            )
        });
    }
    let relation = solution
        .implicit_relation
        .as_ref()
        .expect("solution has one of the two forms");
    let mut points = Vec::new();
    for i in 1..5 {
        for j in 1..5 {
            points.push((0.4 * i as f64, 0.45 * j as f64));
        }
    }
    verify::implicit_residual(relation, rhs, &points).map_err(Failure::from)
}

fn run_solve_analytic(args: &SolveAnalyticArgs) -> Result<i32, Failure> {
    let rhs = parse_expr(&args.rhs)?;
    let particular = match &args.particular {
        None => None,
        Some(text) => Some(parse_expr(text)?),
    };
    let ic = match (args.x0, args.y0) {
        (Some(x0), Some(y0)) => Some(InitialCondition { x0, y0 }),
        (None, None) => None,
        _ => {
            return Err(Failure::new(
                EXIT_PARSE,
                "an initial condition needs both --x0 and --y0",
            ))
        }
    };

    let (f, g) = form_from_slope(&rhs);
    let class_opts = ClassifyOptions {
        riccati_particular: particular.clone(),
    };
    let class = classify_first_order(&f, &g, &class_opts).map_err(|e| {
        let mut failure = Failure::from(e);
        if failure.code == EXIT_UNSUPPORTED {
            failure.message.push_str("; try solve-numeric");
        }
        failure
    })?;
    let solve_opts = SolveOptions {
        ic,
        riccati_particular: particular,
    };
    let solution = solve_first_order(&f, &g, &solve_opts).map_err(|e| {
        let mut failure = Failure::from(e);
        if failure.code == EXIT_UNSUPPORTED {
            failure.message.push_str("; try solve-numeric");
        }
        failure
    })?;
    let residual = solution_residual(&rhs, &solution)?;

    let mut buf = String::new();
    let _ = writeln!(buf, "class: {class}");
    let _ = writeln!(buf, "method: {}", solution.method);
    let _ = writeln!(buf, "solution: {solution}");
    for note in &solution.notes {
        let _ = writeln!(buf, "note: {note}");
    }
    let _ = writeln!(buf, "residual: {}", fmt_sci(residual));
    write_output(&args.out, &buf)?;
    Ok(if residual < 1e-8 {
        EXIT_OK
    } else {
        EXIT_RESIDUAL
    })
}
