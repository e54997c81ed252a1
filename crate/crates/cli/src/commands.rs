use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use fourex::approx::{evaluate, sample, sup_error, TestFunction, GRID_FACTOR};
use fourex::formats::{CoefficientFile, SampleFile};
use fourex::params::{parse_rational, rational_to_f64};
use fourex::plunge::{plunge_window, validated_plunge};
use fourex::solver::{continuous_moments, solve, solve_continuous};
use fourex::{Error, Method, ProblemConfig, Rational, SampleVector64, SolveReport64};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::{BenchArgs, EvalArgs, FitArgs, PlungeArgs, SweepArgs};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_SKETCH: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Io(_) => EXIT_IO,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::RankDeficientSketch { .. } | Error::SketchFailure => EXIT_SKETCH,
        _ => EXIT_USAGE,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: EXIT_IO, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// 17 significant digits: doubles round-trip.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError { code: EXIT_IO, message: format!("cannot write {}: {e}", path.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_t(s: &str) -> CliResult<Rational> {
    parse_rational(s).map_err(|e| CliError::usage(e.to_string()))
}

fn parse_method(s: &str) -> CliResult<Method> {
    Method::from_str(s).map_err(|e| CliError::usage(e.to_string()))
}

fn parse_func(s: &str) -> CliResult<TestFunction> {
    TestFunction::from_str(s).map_err(|e| CliError::usage(e.to_string()))
}

fn is_continuous(m: Method) -> bool {
    matches!(m, Method::ContinuousExplicit | Method::ContinuousImplicit)
}

/// Right-hand side in the form the method consumes.
enum Data {
    Samples(SampleVector64),
    Moments(Vec<Complex64>),
}

struct Problem {
    config: ProblemConfig,
    data: Data,
}

impl Problem {
    fn from_function(f: &TestFunction, config: ProblemConfig, method: Method) -> CliResult<Self> {
        let data = if is_continuous(method) {
            let g = f.clone();
            Data::Moments(continuous_moments(move |x| g.eval(x).unwrap_or(0.0), config.n_basis, config.t))
        } else {
            Data::Samples(sample(f, &config)?)
        };
        Ok(Problem { config, data })
    }

    fn solve(&self, method: Method, seed: u64) -> CliResult<SolveReport64> {
        let c = &self.config;
        Ok(match &self.data {
            Data::Samples(b) => solve(c, b, method, seed)?,
            Data::Moments(mu) => solve_continuous(c.n_basis, c.t, mu, c.tau, method, seed)?,
        })
    }
}

fn resolve_config(t: Rational, n: usize, gamma: f64, tau: f64) -> CliResult<ProblemConfig> {
    if !(gamma.is_finite() && gamma > 0.0) || !(tau.is_finite() && tau > 0.0) {
        return Err(CliError::usage(format!("gamma and tau must be positive, got {gamma} and {tau}")));
    }
    Ok(fourex::resolve(t, n, gamma, tau)?)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn fit(a: FitArgs) -> CliResult {
    let t = parse_t(&a.problem.t)?;
    let method = parse_method(&a.method)?;
    let (problem, func) = match (&a.func, &a.samples) {
        (Some(name), None) => {
            let f = parse_func(name)?;
            let config = resolve_config(t, a.n, a.problem.gamma, a.problem.tau)?;
            (Problem::from_function(&f, config, method)?, Some(f))
        }
        (None, Some(path)) => {
            if is_continuous(method) {
                return Err(CliError::usage("continuous methods need --func (moments are computed by quadrature)"));
            }
            let file = SampleFile::read(path)?;
            let config = ProblemConfig::with_samples(t, a.n, file.m, a.problem.tau)?;
            let b = sample(&TestFunction::External(file.values), &config)?;
            (Problem { config, data: Data::Samples(b) }, None)
        }
        _ => return Err(CliError::usage("exactly one of --func and --samples is required")),
    };
    let report = problem.solve(method, a.seed)?;
    let c = &problem.config;
    emit(a.out.as_deref(), &CoefficientFile::from_coefficients(&report.coefficients).render())?;

    let mut line = format!(
        "fit: method={method} T={} N={} M={} L={} residual={:.3e} plunge={} wall={:.3}s converged={}",
        c.t,
        c.n_basis,
        c.n_samples,
        c.fft_len,
        report.residual_l2,
        report.plunge_size,
        report.wall_seconds,
        yes_no(report.converged)
    );
    if let Some(f) = &func {
        let e = sup_error(f, &report.coefficients, c, GRID_FACTOR)?;
        let _ = write!(line, " sup_error={e:.3e}");
    }
    eprintln!("{line}");
    report.ensure_converged(c.tau)?;
    Ok(())
}

fn read_points(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError { code: EXIT_IO, message: format!("cannot read {}: {e}", path.display()) })?;
    let mut points = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x: f64 = line.parse().map_err(|_| CliError {
            code: EXIT_IO,
            message: format!("{}:{}: not a number: '{line}'", path.display(), no + 1),
        })?;
        points.push(x);
    }
    Ok(points)
}

fn linspace(p: usize) -> Vec<f64> {
    match p {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..p).map(|i| -1.0 + 2.0 * i as f64 / (p - 1) as f64).collect(),
    }
}

pub fn eval(a: EvalArgs) -> CliResult {
    let coeffs = CoefficientFile::read(&a.coeffs)?.to_coefficients::<f64>()?;
    let points = match (&a.points, a.grid) {
        (Some(path), None) => read_points(path)?,
        (None, Some(p)) => linspace(p),
        _ => return Err(CliError::usage("exactly one of --points and --grid is required")),
    };
    let values = evaluate(&coeffs, &points);
    let mut out = String::from("x,re,im\n");
    for (x, v) in points.iter().zip(&values) {
        let _ = writeln!(out, "{},{},{}", num(*x), num(v.re), num(v.im));
    }
    emit(None, &out)
}

fn geometric_grid(n_min: usize, n_max: usize, steps: usize) -> CliResult<Vec<usize>> {
    if n_min == 0 || n_max < n_min || steps == 0 {
        return Err(CliError::usage(format!(
            "need 1 <= Nmin <= Nmax and geom-steps >= 1, got {n_min}, {n_max}, {steps}"
        )));
    }
    if steps == 1 || n_min == n_max {
        return Ok(vec![n_min]);
    }
    let ratio = n_max as f64 / n_min as f64;
    let mut grid: Vec<usize> =
        (0..steps).map(|i| (n_min as f64 * ratio.powf(i as f64 / (steps - 1) as f64)).round() as usize).collect();
    grid.dedup();
    Ok(grid)
}

struct Row {
    method: Method,
    t: Rational,
    gamma: f64,
    n: usize,
    config: Option<ProblemConfig>,
    outcome: Result<(SolveReport64, f64), CliError>,
}

fn sweep_row(f: &TestFunction, t: Rational, gamma: f64, n: usize, method: Method, tau: f64, seed: u64) -> Row {
    let config = resolve_config(t, n, gamma, tau).ok();
    let outcome = (|| {
        let config = resolve_config(t, n, gamma, tau)?;
        let problem = Problem::from_function(f, config, method)?;
        let report = problem.solve(method, seed)?;
        let e = sup_error(f, &report.coefficients, &problem.config, GRID_FACTOR)?;
        Ok((report, e))
    })();
    Row { method, t, gamma, n, config, outcome }
}

pub const SWEEP_HEADER: &str = "method,T,gamma,N,M,L,tau,sup_error,residual,plunge_size,wall_seconds";

pub fn sweep(a: SweepArgs) -> CliResult {
    let f = parse_func(&a.func)?;
    if !f.is_analytic() {
        return Err(CliError::usage("sweep needs a closed-form function"));
    }
    let ts: Vec<Rational> = a.t.iter().map(|s| parse_t(s)).collect::<CliResult<_>>()?;
    let methods: Vec<Method> = a.method.iter().map(|s| parse_method(s)).collect::<CliResult<_>>()?;
    let ns = if !a.n_list.is_empty() {
        a.n_list.clone()
    } else {
        match (a.n_min, a.n_max) {
            (Some(lo), Some(hi)) => geometric_grid(lo, hi, a.geom_steps)?,
            _ => return Err(CliError::usage("give --Nmin and --Nmax, or --Nlist")),
        }
    };
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let mut tasks = Vec::new();
    for &t in &ts {
        let gamma = if a.fixed_length { a.gamma * 2.0 / rational_to_f64(t) } else { a.gamma };
        for &m in &methods {
            for &n in &ns {
                tasks.push((t, gamma, n, m));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {} workers: {e}", a.jobs)))?;
    let rows: Vec<Row> = pool
        .install(|| tasks.par_iter().map(|&(t, gamma, n, m)| sweep_row(&f, t, gamma, n, m, a.tau, a.seed)).collect());

    let mut out = format!("{SWEEP_HEADER}\n");
    let mut first_error: Option<CliError> = None;
    for row in rows {
        let (m_samples, len) = row.config.as_ref().map_or((0, 0), |c| (c.n_samples, c.fft_len));
        let (sup, res, plunge, wall) = match row.outcome {
            Ok((r, e)) => (e, r.residual_l2, r.plunge_size, r.wall_seconds),
            Err(e) => {
                eprintln!("sweep: {} T={} N={}: {e}", row.method, row.t, row.n);
                first_error.get_or_insert(e);
                (f64::NAN, f64::NAN, 0, f64::NAN)
            }
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.method,
            row.t,
            num(row.gamma),
            row.n,
            m_samples,
            len,
            num(a.tau),
            num(sup),
            num(res),
            plunge,
            num(wall)
        );
    }
    emit(a.out.as_deref(), &out)?;
    first_error.map_or(Ok(()), Err)
}

pub fn plunge(a: PlungeArgs) -> CliResult {
    let t = parse_t(&a.problem.t)?;
    let c = resolve_config(t, a.n, a.problem.gamma, a.problem.tau)?;
    let initial = plunge_window(&c);
    let basis = validated_plunge::<f64>(&c)?;
    let w = basis.window;
    let mut out = format!(
        "# window lo={} hi={} initial_lo={} initial_hi={} center={} plunge_size={} T={} N={} M={} L={} tau={}\nindex,sigma\n",
        w.lo,
        w.hi,
        initial.lo,
        initial.hi,
        num(w.center),
        basis.plunge_size(),
        c.t,
        c.n_basis,
        c.n_samples,
        c.fft_len,
        num(c.tau)
    );
    for (i, s) in (w.lo..).zip(basis.sigmas()) {
        let _ = writeln!(out, "{i},{}", num(s));
    }
    emit(a.out.as_deref(), &out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub const BENCH_HEADER: &str = "method,T,gamma,N,M,L,repeats,median_seconds,min_seconds";

pub fn bench(a: BenchArgs) -> CliResult {
    let t = parse_t(&a.problem.t)?;
    let f = parse_func(&a.func)?;
    let methods: Vec<Method> = a.method.iter().map(|s| parse_method(s)).collect::<CliResult<_>>()?;
    if a.repeats == 0 {
        return Err(CliError::usage("--repeats must be at least 1"));
    }
    let mut out = format!("{BENCH_HEADER}\n");
    for &n in &a.n_list {
        let config = resolve_config(t, n, a.problem.gamma, a.problem.tau)?;
        for &m in &methods {
            let problem = Problem::from_function(&f, config.clone(), m)?;
            let mut times = Vec::with_capacity(a.repeats);
            for _ in 0..a.repeats {
                let start = Instant::now();
                problem.solve(m, a.seed)?;
                times.push(start.elapsed().as_secs_f64());
            }
            let min = times.iter().copied().fold(f64::INFINITY, f64::min);
            let _ = writeln!(
                out,
                "{m},{t},{},{n},{},{},{},{},{}",
                num(a.problem.gamma),
                config.n_samples,
                config.fft_len,
                a.repeats,
                num(median(times)),
                num(min)
            );
            eprintln!("bench: {m} N={n} done");
        }
    }
    emit(a.out.as_deref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_endpoints() {
        assert_eq!(geometric_grid(11, 11, 5).unwrap(), vec![11]);
        assert_eq!(geometric_grid(10, 1000, 3).unwrap(), vec![10, 100, 1000]);
        let g = geometric_grid(1, 4, 10).unwrap();
        assert_eq!((g[0], *g.last().unwrap()), (1, 4));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(geometric_grid(5, 4, 3).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0]), 2.5);
        assert_eq!(median(vec![7.0]), 7.0);
    }

    #[test]
    fn linspace_includes_endpoints() {
        assert_eq!(linspace(3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(1), vec![0.0]);
        assert!(linspace(0).is_empty());
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_IO);
        assert_eq!(exit_code(&Error::SketchFailure), EXIT_SKETCH);
        assert_eq!(exit_code(&Error::NotConverged { residual: 1.0, bound: 0.0 }), EXIT_NOT_CONVERGED);
        assert_eq!(exit_code(&Error::TleOne("1".into())), EXIT_USAGE);
    }
}
