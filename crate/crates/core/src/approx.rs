//! Test functions, sampling, evaluation of Fourier extensions, error
//! measurement and convergence sweeps.

use std::fmt;
use std::str::FromStr;

use nalgebra::RealField;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{fft_plan, Coefficients, SampleVector};
use crate::params::{rational_to_f64, resolve, ProblemConfig, Rational};
use crate::scalar::Real;
use crate::solver::{solve, Method, SolveReport};

/// Default refinement of the error grid relative to the sample grid.
pub const GRID_FACTOR: usize = 10;

/// Functions on the real line used to exercise the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `x^2`
    Square,
    /// `1 / (1.1 - x^2)`, poles at `+-sqrt(1.1)`
    RungeLike,
    /// `|x|`
    Abs,
    /// `sin(omega x)`
    Oscillatory(f64),
    /// Samples `f(l/m)`, `l = -m..=m`, with no closed form.
    External(Vec<f64>),
}

impl TestFunction {
    /// Value at `x`; `None` for sampled data.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            TestFunction::Square => Some(x * x),
            TestFunction::RungeLike => Some(1.0 / (1.1 - x * x)),
            TestFunction::Abs => Some(x.abs()),
            TestFunction::Oscillatory(w) => Some((w * x).sin()),
            TestFunction::External(_) => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, TestFunction::External(_))
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Square => f.write_str("square"),
            TestFunction::RungeLike => f.write_str("runge"),
            TestFunction::Abs => f.write_str("abs"),
            TestFunction::Oscillatory(w) => write!(f, "sin:{w}"),
            TestFunction::External(_) => f.write_str("samples"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `square`, `runge`, `abs`, or `sin:<omega>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "square" | "x2" | "f1" => return Ok(TestFunction::Square),
            "runge" | "f3" => return Ok(TestFunction::RungeLike),
            "abs" | "f4" => return Ok(TestFunction::Abs),
            _ => {}
        }
        if let Some(w) = lower.strip_prefix("sin:").or_else(|| lower.strip_prefix("oscillatory:")) {
            let w: f64 = w.parse().map_err(|_| Error::Parse(format!("bad frequency in '{s}'")))?;
            if w.is_finite() {
                return Ok(TestFunction::Oscillatory(w));
            }
        }
        Err(Error::Parse(format!("unknown function '{s}' (square, runge, abs, sin:<omega>)")))
    }
}

/// `b_l = f(l/m) / sqrt(m)`, `l = -m..=m`.
pub fn sample<F: Real>(f: &TestFunction, config: &ProblemConfig) -> Result<SampleVector<F>> {
    let m = config.m;
    let scale = 1.0 / (m as f64).sqrt();
    let values: Vec<f64> = match f {
        TestFunction::External(v) => {
            if v.len() != config.n_samples {
                return Err(Error::DimensionMismatch { expected: config.n_samples, found: v.len() });
            }
            v.clone()
        }
        _ => {
            let mi = m as isize;
            (-mi..=mi).map(|l| f.eval(l as f64 / m as f64).unwrap_or(0.0)).collect()
        }
    };
    Ok(SampleVector {
        values: values.iter().map(|&v| Complex::new(F::of(v * scale), F::zero())).collect(),
        weighted: true,
    })
}

/// `sum_k c_k (2T)^{-1/2} exp(i pi k x / T)` at each point, by direct summation.
pub fn evaluate<F: Real>(coeffs: &Coefficients<F>, points: &[F]) -> Vec<Complex<F>> {
    let t = F::of(rational_to_f64(coeffs.t));
    let scale = F::one() / (F::of(2.0) * t).sqrt();
    let n = coeffs.half_bandwidth() as isize;
    points
        .iter()
        .map(|&x| {
            let w = F::PI() * x / t;
            let mut acc = Complex::new(F::zero(), F::zero());
            for (k, &c) in (-n..=n).zip(&coeffs.values) {
                let (s, co) = (w * F::of(k as f64)).sin_cos();
                acc = acc + c * Complex::new(co, s);
            }
            acc * scale
        })
        .collect()
}

/// Evaluation at `x_l = l/q`, `l = -q..=q`, with one FFT of length `2Tq`.
/// Returns `None` if `2Tq` is not an integer.
pub fn evaluate_grid<F: Real>(coeffs: &Coefficients<F>, q: usize) -> Option<Vec<Complex<F>>> {
    let t = coeffs.t;
    let num = 2 * (*t.numer() as i128) * q as i128;
    let den = *t.denom() as i128;
    if q == 0 || num % den != 0 {
        return None;
    }
    let len = (num / den) as usize;
    let mut buf = vec![Complex::new(F::zero(), F::zero()); len];
    let n = coeffs.half_bandwidth() as isize;
    for (k, &c) in (-n..=n).zip(&coeffs.values) {
        let bin = k.rem_euclid(len as isize) as usize;
        buf[bin] = buf[bin] + c;
    }
    fft_plan::<F>(len, true).process(&mut buf);
    let scale = F::one() / (F::of(2.0) * F::of(rational_to_f64(t))).sqrt();
    let qi = q as isize;
    Some((-qi..=qi).map(|l| buf[l.rem_euclid(len as isize) as usize] * scale).collect())
}

/// `max |f(x_j) - Re(eval(x_j))|` over `x_j = l/(factor m)`, endpoints included.
pub fn sup_error<F: Real>(
    f: &TestFunction,
    coeffs: &Coefficients<F>,
    config: &ProblemConfig,
    factor: usize,
) -> Result<F> {
    if !f.is_analytic() {
        return Err(Error::Domain("sup-error needs a closed-form function".into()));
    }
    let q = factor.max(1) * config.m;
    let values = evaluate_grid(coeffs, q).ok_or_else(|| Error::Domain("grid incompatible with T".into()))?;
    let qi = q as isize;
    Ok((-qi..=qi).zip(&values).fold(F::zero(), |acc, (l, v)| {
        let x = l as f64 / q as f64;
        let exact = F::of(f.eval(x).unwrap_or(0.0));
        acc.max((exact - v.re).abs())
    }))
}

/// A solve together with its error on the refined grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<F> {
    pub report: SolveReport<F>,
    /// `None` for sampled data.
    pub sup_error: Option<F>,
    pub grid_factor: usize,
}

pub fn fit<F: Real + RealField>(
    f: &TestFunction,
    config: &ProblemConfig,
    method: Method,
    seed: u64,
) -> Result<FitResult<F>> {
    let b = sample::<F>(f, config)?;
    let report = solve(config, &b, method, seed)?;
    let sup_error = if f.is_analytic() { Some(sup_error(f, &report.coefficients, config, GRID_FACTOR)?) } else { None };
    Ok(FitResult { report, sup_error, grid_factor: GRID_FACTOR })
}

/// One row of a convergence sweep. Failed points keep `error` and NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: Method,
    #[serde(with = "crate::params::rational_serde")]
    pub t: Rational,
    pub gamma: f64,
    pub n_basis: usize,
    pub n_samples: usize,
    pub fft_len: usize,
    pub tau: f64,
    pub sup_error: f64,
    pub residual: f64,
    pub plunge_size: usize,
    pub wall_seconds: f64,
    pub converged: bool,
    pub error: Option<String>,
}

/// Fits `f` at half-bandwidth `n`; never fails, errors are recorded.
pub fn sweep_point<F: Real + RealField>(
    f: &TestFunction,
    t: Rational,
    gamma: f64,
    n: usize,
    method: Method,
    tau: f64,
    seed: u64,
) -> SweepRecord {
    let mut rec = SweepRecord {
        method,
        t,
        gamma,
        n_basis: 2 * n + 1,
        n_samples: 0,
        fft_len: 0,
        tau,
        sup_error: f64::NAN,
        residual: f64::NAN,
        plunge_size: 0,
        wall_seconds: f64::NAN,
        converged: false,
        error: None,
    };
    let config = match resolve(t, n, gamma, tau) {
        Ok(c) => c,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.n_samples = config.n_samples;
    rec.fft_len = config.fft_len;
    match fit::<F>(f, &config, method, seed) {
        Ok(r) => {
            rec.sup_error = r.sup_error.map_or(f64::NAN, |e| e.to_f64_lossy());
            rec.residual = r.report.residual_l2.to_f64_lossy();
            rec.plunge_size = r.report.plunge_size;
            rec.wall_seconds = r.report.wall_seconds;
            rec.converged = r.report.converged;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Sequential sweep over half-bandwidths, in input order.
pub fn convergence_sweep<F: Real + RealField>(
    f: &TestFunction,
    t: Rational,
    gamma: f64,
    n_list: &[usize],
    method: Method,
    tau: f64,
    seed: u64,
) -> Vec<SweepRecord> {
    n_list.iter().map(|&n| sweep_point::<F>(f, t, gamma, n, method, tau, seed)).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ProblemConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t2() -> Rational {
        Rational::from_integer(2)
    }

    #[test]
    fn sampling() {
        let c = ProblemConfig::with_samples(t2(), 1, 4, 1e-14).unwrap();
        let b = sample::<f64>(&TestFunction::External(vec![1.0; 9]), &c).unwrap();
        assert!(b.values.iter().all(|z| (z.re - 0.5).abs() < 1e-15 && z.im == 0.0));
        let c = ProblemConfig::with_samples(t2(), 1, 2, 1e-14).unwrap();
        let s = 2f64.sqrt();
        let abs: Vec<f64> = sample::<f64>(&TestFunction::Abs, &c).unwrap().values.iter().map(|z| z.re).collect();
        let sq: Vec<f64> = sample::<f64>(&TestFunction::Square, &c).unwrap().values.iter().map(|z| z.re).collect();
        for (got, want) in abs.iter().zip([1.0, 0.5, 0.0, 0.5, 1.0]) {
            assert!((got - want / s).abs() < 1e-15);
        }
        for (got, want) in sq.iter().zip([1.0, 0.25, 0.0, 0.25, 1.0]) {
            assert!((got - want / s).abs() < 1e-15);
        }
        assert!(matches!(
            sample::<f64>(&TestFunction::External(vec![1.0; 3]), &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_mode_evaluates_flat() {
        let c = ProblemConfig::with_samples(t2(), 3, 6, 1e-14).unwrap();
        let e0 = Coefficients::<f64>::unit(&c, 0);
        for v in evaluate(&e0, &[-1.0, -0.3, 0.0, 0.77, 1.0]) {
            assert!((v.re - 0.5).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn grid_path_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = ProblemConfig::with_samples(t2(), 20, 40, 1e-14).unwrap();
        let coeffs = Coefficients::new(
            (0..41).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
            c.t,
        );
        let q = 10 * c.m;
        let fast = evaluate_grid(&coeffs, q).unwrap();
        let pts: Vec<f64> = (-(q as isize)..=q as isize).map(|l| l as f64 / q as f64).collect();
        let slow = evaluate(&coeffs, &pts);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
        let third = Coefficients::<f64>::new(coeffs.values.clone(), Rational::new(4, 3));
        assert!(evaluate_grid(&third, 1).is_none());
    }

    #[test]
    fn fits_of_real_data_are_nearly_real() {
        let c = resolve(t2(), 17, 2.0, 1e-14).unwrap();
        let fit = fit::<f64>(&TestFunction::Square, &c, Method::Explicit, 0).unwrap();
        assert!(fit.sup_error.unwrap() <= 1e-10);
        let vals = evaluate_grid(&fit.report.coefficients, 10 * c.m).unwrap();
        assert!(vals.iter().all(|v| v.im.abs() <= 1e-10));
        let coarse = sup_error(&TestFunction::Square, &fit.report.coefficients, &c, 10).unwrap();
        let fine = sup_error(&TestFunction::Square, &fit.report.coefficients, &c, 20).unwrap();
        assert!(fine >= coarse);
    }

    #[test]
    fn zero_function_has_zero_error() {
        let c = resolve(t2(), 8, 2.0, 1e-14).unwrap();
        let fit = fit::<f64>(&TestFunction::Oscillatory(0.0), &c, Method::Explicit, 0).unwrap();
        assert_eq!(fit.sup_error, Some(0.0));
    }

    #[test]
    fn abs_error_level() {
        let c = resolve(t2(), 601, 2.0, 1e-14).unwrap();
        let e = fit::<f64>(&TestFunction::Abs, &c, Method::Explicit, 0).unwrap().sup_error.unwrap();
        assert!((1e-4..=3e-3).contains(&e), "{e}");
    }

    #[test]
    fn sweeps() {
        // basis sizes 11 and 35
        let recs = convergence_sweep::<f64>(&TestFunction::Square, t2(), 2.0, &[5, 17], Method::Implicit, 1e-14, 3);
        assert_eq!(recs.len(), 2);
        assert!(recs[1].sup_error <= recs[0].sup_error * 1e-6);
        assert!(convergence_sweep::<f64>(&TestFunction::Square, t2(), 2.0, &[], Method::Explicit, 1e-14, 3).is_empty());
        let bad =
            sweep_point::<f64>(&TestFunction::Square, Rational::from_integer(1), 2.0, 4, Method::Explicit, 1e-14, 3);
        assert!(bad.error.is_some() && bad.sup_error.is_nan());
    }

    #[test]
    fn oscillatory_in_and_out_of_band() {
        // T near 1 converges more slowly and needs a wider margin
        for (t, margin) in [(t2(), 40), (Rational::new(11, 10), 80)] {
            let tf = rational_to_f64(t);
            let n = (2.0 * tf * 10.0 / std::f64::consts::PI).ceil() as usize + margin;
            let gamma = crate::params::constant_length_oversampling(tf, 2.0, 2.0);
            let c = resolve(t, n, gamma, 1e-14).unwrap();
            let e = fit::<f64>(&TestFunction::Oscillatory(10.0), &c, Method::Explicit, 0).unwrap();
            assert!(e.sup_error.unwrap() <= 1e-9);
        }
        let t = Rational::new(19, 5);
        let c = resolve(t, 100, 1.0526, 1e-14).unwrap();
        let e = fit::<f64>(&TestFunction::Oscillatory(100.0), &c, Method::Explicit, 0).unwrap();
        assert!(!e.report.converged || e.sup_error.unwrap() > 0.1);
    }

    #[test]
    fn parse_functions() {
        assert_eq!("square".parse::<TestFunction>().unwrap(), TestFunction::Square);
        assert_eq!("sin:10".parse::<TestFunction>().unwrap(), TestFunction::Oscillatory(10.0));
        assert_eq!(TestFunction::Oscillatory(2.5).to_string(), "sin:2.5");
        assert!("sin:x".parse::<TestFunction>().is_err());
        assert!("airy".parse::<TestFunction>().is_err());
    }

    #[test]
    fn slope() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 / v).collect();
        assert!((loglog_slope(&x, &y) + 1.0).abs() < 1e-12);
    }
}
