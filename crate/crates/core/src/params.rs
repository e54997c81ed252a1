//! Problem parameters for one Fourier extension instance and the closed-form
//! utilities for choosing the extension length.
//!
//! The extension length `T` is carried as an exact rational so that the FFT
//! length `L = 2Tm` is decidably an integer.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exact extension length `T = p/q`.
pub type Rational = Ratio<i64>;

/// Largest sample half-count `resolve` will search before giving up.
pub const MAX_HALF_SAMPLES: u64 = 1_000_000_000;

/// Default truncation threshold of the regularized solve.
pub const DEFAULT_TAU: f64 = 1e-14;

/// Largest denominator accepted when converting a decimal `T`.
pub const MAX_DENOMINATOR: i64 = 1000;

/// Validated parameter bundle for one discrete Fourier extension problem.
///
/// Basis functions are indexed `k = -n..=n` (`N = 2n+1` of them) and samples
/// `x_l = l/m` for `l = -m..=m` (`M = 2m+1`). The FFT length is `L = 2Tm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub n: usize,
    pub n_basis: usize,
    pub m: usize,
    pub n_samples: usize,
    #[serde(with = "rational_serde")]
    pub t: Rational,
    pub fft_len: usize,
    pub gamma: f64,
    pub tau: f64,
}

impl ProblemConfig {
    /// Builds a config with an explicit sample half-count `m`.
    pub fn with_samples(t: Rational, n: usize, m: usize, tau: f64) -> Result<Self> {
        check_t(t)?;
        if n < 1 {
            return Err(Error::Domain(format!("n must be at least 1, got {n}")));
        }
        check_tau(tau)?;
        let fft_len = fft_len_for(t, m).ok_or_else(|| Error::Domain(format!("2*({t})*{m} is not an integer")))?;
        let cfg = ProblemConfig {
            n,
            n_basis: 2 * n + 1,
            m,
            n_samples: 2 * m + 1,
            t,
            fft_len,
            gamma: (2 * m + 1) as f64 / (2 * n + 1) as f64,
            tau,
        };
        if cfg.n_samples < cfg.n_basis {
            return Err(Error::Domain(format!("M = {} must be at least N = {}", cfg.n_samples, cfg.n_basis)));
        }
        if cfg.fft_len < cfg.n_samples {
            return Err(Error::Domain(format!("L = {} must be at least M = {}", cfg.fft_len, cfg.n_samples)));
        }
        Ok(cfg)
    }

    /// `T` as a floating-point value.
    pub fn t_value<F: Real>(&self) -> F {
        F::of(rational_to_f64(self.t))
    }

    /// Effective oversampling `M/N` after rounding `m` up.
    pub fn oversampling(&self) -> f64 {
        self.n_samples as f64 / self.n_basis as f64
    }

    /// Center `NM/L` of the plunge region in the descending singular spectrum.
    pub fn plunge_center(&self) -> f64 {
        (self.n_basis as f64) * (self.n_samples as f64) / (self.fft_len as f64)
    }

    /// Number of nonzero singular values, `min(N, M)`.
    pub fn rank_bound(&self) -> usize {
        self.n_basis.min(self.n_samples)
    }
}

fn check_t(t: Rational) -> Result<()> {
    if *t.denom() <= 0 || t <= Rational::from_integer(1) {
        return Err(Error::TleOne(t.to_string()));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
    }
    Ok(())
}

fn fft_len_for(t: Rational, m: usize) -> Option<usize> {
    let num = 2 * (*t.numer() as i128) * (m as i128);
    let den = *t.denom() as i128;
    (num % den == 0).then(|| (num / den) as usize)
}

/// Resolves `m` as the smallest integer `>= gamma * n` for which `2Tm` is an
/// integer, `L >= M` and `M >= N`.
pub fn resolve(t: Rational, n: usize, gamma: f64, tau: f64) -> Result<ProblemConfig> {
    check_t(t)?;
    if n < 1 {
        return Err(Error::Domain(format!("n must be at least 1, got {n}")));
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be at least 1, got {gamma}")));
    }
    check_tau(tau)?;

    // 2pm/q is an integer iff q/gcd(q,2) divides m, since gcd(p,q) = 1.
    let q = *t.denom();
    let step = (q / q.gcd(&2)) as u64;
    let target = (gamma * n as f64 * (1.0 - 1e-12)).ceil().max(n as f64);
    if target > MAX_HALF_SAMPLES as f64 {
        return Err(Error::Infeasible { limit: MAX_HALF_SAMPLES });
    }
    let mut m = (target as u64).div_ceil(step) * step;
    loop {
        if m > MAX_HALF_SAMPLES {
            return Err(Error::Infeasible { limit: MAX_HALF_SAMPLES });
        }
        let l = fft_len_for(t, m as usize).expect("m is a multiple of the step");
        if l as u64 > 2 * m && m >= n as u64 {
            let mut cfg = ProblemConfig::with_samples(t, n, m as usize, tau)?;
            cfg.gamma = cfg.oversampling();
            return Ok(cfg);
        }
        m += step;
    }
}

/// Oversampling that keeps `L = 2Tm` fixed relative to a reference `(T, gamma)`.
///
/// Comparing several extension lengths at equal conditioning uses
/// `gamma(T) = gamma_ref * T_ref / T`, floored at 1.
pub fn constant_length_oversampling(t: f64, reference_t: f64, reference_gamma: f64) -> f64 {
    (reference_gamma * reference_t / t).max(1.0)
}

/// Fourier extension constant `cot^2(pi / 4T)`.
pub fn extension_constant<F: Real>(t: F) -> Result<F> {
    if !(t >= F::one()) {
        return Err(Error::Domain(format!("T must be at least 1, got {t}")));
    }
    let cot = F::one() / (F::PI() / (F::of(4.0) * t)).tan();
    Ok(cot * cot)
}

/// Upper bound `2T sin(pi / 2T)` on the resolution constant.
pub fn resolution_bound<F: Real>(t: F) -> Result<F> {
    if !(t >= F::one()) {
        return Err(Error::Domain(format!("T must be at least 1, got {t}")));
    }
    let two_t = F::of(2.0) * t;
    Ok(two_t * (F::PI() / two_t).sin())
}

/// Extension length `(pi/4) / arctan(eps^(1/2N))` that balances resolution
/// against the attainable accuracy `eps_tol` for `N` degrees of freedom.
pub fn optimal_t<F: Real>(n_basis: usize, eps_tol: F) -> Result<F> {
    if n_basis < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if !(eps_tol > F::zero() && eps_tol <= F::one()) {
        return Err(Error::Domain(format!("eps_tol must lie in (0, 1], got {eps_tol}")));
    }
    let root = eps_tol.powf(F::one() / F::of_usize(2 * n_basis));
    Ok(F::FRAC_PI_4() / root.atan())
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses `T` given as `p/q`, an integer, or a decimal.
///
/// Decimals are read exactly when their denominator is at most
/// [`MAX_DENOMINATOR`], otherwise replaced by the best rational approximation
/// with a bounded denominator.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid extension length {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Rational::from_integer(i));
    }
    let (int_part, frac_part) = s.split_once('.').ok_or_else(bad)?;
    let all_digits = |t: &str| t.chars().all(|c| c.is_ascii_digit());
    let (neg, int_digits) = match int_part.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, int_part),
    };
    if all_digits(int_digits) && all_digits(frac_part) && frac_part.len() <= 15 && int_digits.len() <= 6 {
        let den = 10i64.pow(frac_part.len() as u32);
        let whole: i64 = if int_digits.is_empty() { 0 } else { int_digits.parse().map_err(|_| bad())? };
        let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let r = Rational::new(whole * den + frac, den);
        let r = if neg { -r } else { r };
        if *r.denom() <= MAX_DENOMINATOR {
            return Ok(r);
        }
    }
    let x: f64 = s.parse().map_err(|_| bad())?;
    best_rational(x, MAX_DENOMINATOR).ok_or_else(bad)
}

/// Best rational approximation with denominator at most `max_den`, by
/// continued fractions with a final semiconvergent check.
pub fn best_rational(x: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() || max_den < 1 {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            // largest semiconvergent that still fits
            let k = (max_den - q0) / q1;
            let (ps, qs) = (p0 + k * p1, q0 + k * q1);
            let best =
                if (x - ps as f64 / qs as f64).abs() < (x - p1 as f64 / q1 as f64).abs() { (ps, qs) } else { (p1, q1) };
            return Some(Rational::new(best.0, best.1));
        }
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    Some(Rational::new(p1, q1))
}

pub(crate) mod rational_serde {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn resolve_examples() {
        let c = resolve(r(2, 1), 5, 2.0, 1e-14).unwrap();
        assert_eq!((c.m, c.n_samples, c.fft_len), (10, 21, 40));
        let c = resolve(r(11, 10), 10, 2.0, 1e-14).unwrap();
        assert_eq!((c.m, c.n_samples, c.fft_len), (20, 41, 44));
        let c = resolve(r(19, 5), 10, 2.0, 1e-14).unwrap();
        assert_eq!((c.m, c.n_samples, c.fft_len), (20, 41, 152));
    }

    #[test]
    fn resolve_rounds_up_to_feasible_m() {
        // m must be a multiple of 5 for T = 11/10
        let c = resolve(r(11, 10), 7, 2.0, 1e-14).unwrap();
        assert_eq!(c.m, 15);
        assert_eq!(c.fft_len, 33);
        assert!(c.gamma >= 2.0);
        // fractional gamma * n
        let c = resolve(r(2, 1), 3, 1.5, 1e-14).unwrap();
        assert_eq!(c.m, 5);
    }

    #[test]
    fn resolve_enforces_l_at_least_m() {
        // T = 11/10 with tiny m would give L < M
        let c = resolve(r(11, 10), 1, 1.0, 1e-14).unwrap();
        assert!(c.fft_len >= c.n_samples);
        assert_eq!(c.m, 5);
    }

    #[test]
    fn resolve_errors() {
        assert!(matches!(resolve(r(1, 1), 5, 2.0, 1e-14), Err(Error::TleOne(_))));
        assert!(matches!(resolve(r(9, 10), 5, 2.0, 1e-14), Err(Error::TleOne(_))));
        assert!(matches!(resolve(r(2, 1), 0, 2.0, 1e-14), Err(Error::Domain(_))));
        assert!(matches!(resolve(r(2, 1), 5, 0.5, 1e-14), Err(Error::Domain(_))));
        assert!(matches!(resolve(r(2, 1), 5, 2.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(resolve(r(2, 1), 600_000_000, 2.0, 1e-14), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn extension_constant_values() {
        assert!((extension_constant(1.0f64).unwrap() - 1.0).abs() < 1e-14);
        // cot^2(pi/8) = (1 + sqrt 2)^2 = 3 + 2 sqrt 2
        let e2 = 3.0 + 2.0 * 2.0f64.sqrt();
        assert!((extension_constant(2.0f64).unwrap() - e2).abs() < 1e-12);
        assert!((extension_constant(2.0f64).unwrap() - 5.828427).abs() < 1e-6);
        // cot^2(pi/15.2), evaluated to 30 digits
        let e38 = extension_constant(3.8f64).unwrap();
        assert!((e38 - 22.745_446_906_221_557).abs() < 1e-12, "{e38}");
        assert!(extension_constant(0.5f64).is_err());
    }

    #[test]
    fn extension_constant_increasing() {
        let mut prev = 0.0;
        for i in 0..100 {
            let t = 1.0 + 9.0 * i as f64 / 99.0;
            let e = extension_constant(t).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn resolution_bound_values() {
        assert!((resolution_bound(1.0f64).unwrap() - 2.0).abs() < 1e-15);
        assert!((resolution_bound(2.0f64).unwrap() - 2.0 * 2.0f64.sqrt()).abs() < 1e-14);
        assert!((resolution_bound(1000.0f64).unwrap() - std::f64::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn optimal_t_values() {
        for n in [1, 7, 50, 1000] {
            assert!((optimal_t(n, 1.0f64).unwrap() - 1.0).abs() < 1e-15);
        }
        // (pi/4) / atan(1e-14^(1/100))
        let expected = std::f64::consts::FRAC_PI_4 / (1e-14f64.powf(0.01)).atan();
        let t = optimal_t(50, 1e-14f64).unwrap();
        assert!((t - expected).abs() < 1e-14);
        assert!((t - 1.252_751_762_200_719_7).abs() < 1e-12, "{t}");
        assert!(optimal_t(50, 0.0f64).is_err());
        assert!(optimal_t(50, -1.0f64).is_err());
    }

    #[test]
    fn optimal_t_monotone() {
        for &eps in &[1e-14, 1e-10, 1e-6, 1e-2] {
            let mut prev = f64::INFINITY;
            for n in (1..400).step_by(7) {
                let t = optimal_t(n, eps).unwrap();
                assert!(t < prev && t > 1.0);
                prev = t;
            }
        }
        // a looser tolerance needs less extension: decreasing in eps_tol
        for n in [5, 50, 500] {
            let mut prev = f64::INFINITY;
            for &eps in &[1e-14, 1e-10, 1e-6, 1e-2, 0.5] {
                let t = optimal_t(n, eps).unwrap();
                assert!(t < prev, "n={n} eps={eps}");
                prev = t;
            }
        }
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("19/5").unwrap(), r(19, 5));
        assert_eq!(parse_rational("2").unwrap(), r(2, 1));
        assert_eq!(parse_rational("1.1").unwrap(), r(11, 10));
        assert_eq!(parse_rational("3.8").unwrap(), r(19, 5));
        assert_eq!(parse_rational("4/2").unwrap(), r(2, 1));
        // pi has no exact short decimal; closest fraction with den <= 1000
        assert_eq!(parse_rational("3.14159265358979").unwrap(), r(355, 113));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn config_serde_keeps_exact_t() {
        let c = resolve(r(19, 5), 10, 2.0, 1e-14).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"19/5\""));
        let back: ProblemConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
