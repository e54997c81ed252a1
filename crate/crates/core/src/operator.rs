//! Matrix-free application of the Fourier extension matrix
//! `A_{l,k} = L^{-1/2} exp(2 pi i k l / L)` and its relatives through FFTs of
//! the (arbitrary) length `L = 2Tm`, plus dense constructors used as oracles.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::{ProblemConfig, Rational};
use crate::scalar::Real;

/// Dense oracles refuse problems with more than this many matrix entries.
pub const ORACLE_BUDGET: usize = 4_000_000;

type PlanKey = (TypeId, usize, bool);
type PlanCache = RwLock<HashMap<PlanKey, Box<dyn Any + Send + Sync>>>;

static PLANS: OnceLock<PlanCache> = OnceLock::new();

/// Returns a cached FFT plan of the given length and direction.
///
/// Reads take a shared lock; a miss upgrades to the write lock, so insertion
/// is serialized.
pub(crate) fn fft_plan<F: Real>(len: usize, inverse: bool) -> Arc<dyn Fft<F>> {
    let cache = PLANS.get_or_init(Default::default);
    let key = (TypeId::of::<F>(), len, inverse);
    if let Some(plan) = cache.read().expect("plan cache poisoned").get(&key) {
        return plan.downcast_ref::<Arc<dyn Fft<F>>>().expect("plan cache keyed by scalar type").clone();
    }
    let mut guard = cache.write().expect("plan cache poisoned");
    guard
        .entry(key)
        .or_insert_with(|| {
            let mut planner = FftPlanner::<F>::new();
            let plan = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
            Box::new(plan)
        })
        .downcast_ref::<Arc<dyn Fft<F>>>()
        .expect("plan cache keyed by scalar type")
        .clone()
}

/// Fourier coefficients `c_k`, `k = -n..=n`, stored at offset `k + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<F> {
    pub values: Vec<Complex<F>>,
    pub t: Rational,
}

impl<F: Real> Coefficients<F> {
    pub fn zeros(config: &ProblemConfig) -> Self {
        Coefficients { values: vec![Complex::new(F::zero(), F::zero()); config.n_basis], t: config.t }
    }

    pub fn new(values: Vec<Complex<F>>, t: Rational) -> Self {
        Coefficients { values, t }
    }

    /// Unit coefficient at frequency `k`.
    pub fn unit(config: &ProblemConfig, k: isize) -> Self {
        let mut c = Self::zeros(config);
        c.values[(k + config.n as isize) as usize] = Complex::new(F::one(), F::zero());
        c
    }

    /// Half-bandwidth `n`.
    pub fn half_bandwidth(&self) -> usize {
        self.values.len() / 2
    }

    pub fn norm(&self) -> F {
        norm2(&self.values)
    }
}

/// Samples `b_l`, `l = -m..=m`, stored at offset `l + m`.
///
/// `weighted` records whether the `1/sqrt(m)` data weight has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector<F> {
    pub values: Vec<Complex<F>>,
    pub weighted: bool,
}

impl<F: Real> SampleVector<F> {
    pub fn zeros(config: &ProblemConfig) -> Self {
        SampleVector { values: vec![Complex::new(F::zero(), F::zero()); config.n_samples], weighted: true }
    }

    pub fn norm(&self) -> F {
        norm2(&self.values)
    }
}

pub(crate) fn norm2<F: Real>(v: &[Complex<F>]) -> F {
    v.iter().fold(F::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[inline]
fn wrap(index: isize, len: usize) -> usize {
    index.rem_euclid(len as isize) as usize
}

/// FFT-backed operator for one problem configuration.
///
/// Frequency `k` is embedded at DFT bin `k mod L` and sample `l` is read from
/// position `l mod L`, which reproduces the symmetric index convention exactly.
#[derive(Clone)]
pub struct FftOperator<F: Real> {
    n: usize,
    m: usize,
    len: usize,
    scale: F,
    forward: Arc<dyn Fft<F>>,
    inverse: Arc<dyn Fft<F>>,
}

impl<F: Real> std::fmt::Debug for FftOperator<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftOperator").field("n", &self.n).field("m", &self.m).field("len", &self.len).finish()
    }
}

impl<F: Real> FftOperator<F> {
    pub fn new(config: &ProblemConfig) -> Self {
        let len = config.fft_len;
        FftOperator {
            n: config.n,
            m: config.m,
            len,
            scale: F::one() / F::of_usize(len).sqrt(),
            forward: fft_plan(len, false),
            inverse: fft_plan(len, true),
        }
    }

    pub fn n_basis(&self) -> usize {
        2 * self.n + 1
    }

    pub fn n_samples(&self) -> usize {
        2 * self.m + 1
    }

    /// `A c`.
    pub fn apply(&self, coeffs: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
        check_len(self.n_basis(), coeffs.len())?;
        let mut buf = vec![Complex::new(F::zero(), F::zero()); self.len];
        let n = self.n as isize;
        for (k, &c) in (-n..=n).zip(coeffs) {
            buf[wrap(k, self.len)] = c;
        }
        self.inverse.process(&mut buf);
        let m = self.m as isize;
        Ok((-m..=m).map(|l| buf[wrap(l, self.len)] * self.scale).collect())
    }

    /// `A' y` (conjugate transpose).
    pub fn apply_adjoint(&self, samples: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
        check_len(self.n_samples(), samples.len())?;
        let mut buf = vec![Complex::new(F::zero(), F::zero()); self.len];
        let m = self.m as isize;
        for (l, &y) in (-m..=m).zip(samples) {
            buf[wrap(l, self.len)] = y;
        }
        self.forward.process(&mut buf);
        let n = self.n as isize;
        Ok((-n..=n).map(|k| buf[wrap(k, self.len)] * self.scale).collect())
    }

    /// `P y = (A A' - I) y`.
    pub fn apply_p(&self, samples: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
        let mut out = self.apply(&self.apply_adjoint(samples)?)?;
        for (o, &y) in out.iter_mut().zip(samples) {
            *o = *o - y;
        }
        Ok(out)
    }

    /// `A v` for a real vector.
    pub fn apply_real(&self, coeffs: &[F]) -> Result<Vec<Complex<F>>> {
        let c: Vec<_> = coeffs.iter().map(|&x| Complex::new(x, F::zero())).collect();
        self.apply(&c)
    }
}

/// `A c` for a typed coefficient vector.
pub fn apply_a<F: Real>(config: &ProblemConfig, c: &Coefficients<F>) -> Result<SampleVector<F>> {
    let values = FftOperator::new(config).apply(&c.values)?;
    Ok(SampleVector { values, weighted: true })
}

/// `A' y` for a typed sample vector.
pub fn apply_a_adjoint<F: Real>(config: &ProblemConfig, y: &SampleVector<F>) -> Result<Coefficients<F>> {
    let values = FftOperator::new(config).apply_adjoint(&y.values)?;
    Ok(Coefficients { values, t: config.t })
}

/// `(A A' - I) y`.
pub fn apply_p<F: Real>(config: &ProblemConfig, y: &SampleVector<F>) -> Result<SampleVector<F>> {
    let values = FftOperator::new(config).apply_p(&y.values)?;
    Ok(SampleVector { values, weighted: y.weighted })
}

fn unit_phase<F: Real>(numer: i128, len: usize) -> Complex<F> {
    let r = numer.rem_euclid(len as i128) as f64 / len as f64;
    let angle = F::of(2.0 * std::f64::consts::PI * r);
    Complex::new(angle.cos(), angle.sin())
}

fn check_budget(rows: usize, cols: usize) -> Result<()> {
    if rows.saturating_mul(cols) > ORACLE_BUDGET {
        return Err(Error::TooLarge { rows, cols });
    }
    Ok(())
}

/// Dense `M x N` matrix `A`. Oracle use only.
pub fn dense_a<F: Real>(config: &ProblemConfig) -> Result<DMatrix<Complex<F>>> {
    let (rows, cols) = (config.n_samples, config.n_basis);
    check_budget(rows, cols)?;
    let scale = F::one() / F::of_usize(config.fft_len).sqrt();
    let (m, n) = (config.m as i128, config.n as i128);
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let l = i as i128 - m;
        let k = j as i128 - n;
        unit_phase::<F>(k * l, config.fft_len) * scale
    }))
}

/// Dirichlet kernel `(1/L) sin(P pi d / L) / sin(pi d / L)`, equal to `P/L` at `d = 0 mod L`.
fn dirichlet<F: Real>(width: usize, len: usize, d: isize) -> F {
    let lf = F::of_usize(len);
    if d.rem_euclid(len as isize) == 0 {
        return F::of_usize(width) / lf;
    }
    let x = F::PI() * F::of(d as f64) / lf;
    (F::of_usize(width) * x).sin() / x.sin() / lf
}

/// `A'A` assembled from its closed form, an `N x N` real symmetric Toeplitz matrix.
pub fn gram_discrete<F: Real>(config: &ProblemConfig) -> Result<DMatrix<F>> {
    let size = config.n_basis;
    check_budget(size, size)?;
    Ok(DMatrix::from_fn(size, size, |p, q| dirichlet(config.n_samples, config.fft_len, p as isize - q as isize)))
}

/// The `L x L` circulant low-pass filter passing `n_band` frequencies.
pub fn dense_lowpass<F: Real>(n_band: usize, len: usize) -> Result<DMatrix<F>> {
    check_budget(len, len)?;
    Ok(DMatrix::from_fn(len, len, |p, l| dirichlet(n_band, len, p as isize - l as isize)))
}

fn sinc_entry<F: Real>(d: isize, t: F) -> F {
    if d == 0 {
        return F::one() / t;
    }
    let x = F::PI() * F::of(d as f64);
    (x / t).sin() / x
}

/// Continuous Grammian `sin(pi (i-j)/T) / (pi (i-j))`, diagonal `1/T`.
pub fn gram_continuous<F: Real>(n_basis: usize, t: F) -> Result<DMatrix<F>> {
    check_budget(n_basis, n_basis)?;
    Ok(DMatrix::from_fn(n_basis, n_basis, |i, j| sinc_entry(i as isize - j as isize, t)))
}

/// Fast multiplication by the continuous Grammian through a circulant
/// embedding of length `2N`.
#[derive(Clone)]
pub struct ContinuousGram<F: Real> {
    size: usize,
    symbol: Vec<Complex<F>>,
    forward: Arc<dyn Fft<F>>,
    inverse: Arc<dyn Fft<F>>,
}

impl<F: Real> ContinuousGram<F> {
    pub fn new(n_basis: usize, t: F) -> Self {
        let len = 2 * n_basis;
        let forward = fft_plan::<F>(len, false);
        let inverse = fft_plan::<F>(len, true);
        let mut symbol = vec![Complex::new(F::zero(), F::zero()); len];
        for d in 0..n_basis {
            let g = Complex::new(sinc_entry(d as isize, t), F::zero());
            symbol[d] = g;
            if d > 0 {
                symbol[len - d] = g;
            }
        }
        forward.process(&mut symbol);
        let inv_len = F::one() / F::of_usize(len);
        for s in symbol.iter_mut() {
            *s = *s * inv_len;
        }
        ContinuousGram { size: n_basis, symbol, forward, inverse }
    }

    pub fn apply(&self, x: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
        check_len(self.size, x.len())?;
        let mut buf = vec![Complex::new(F::zero(), F::zero()); 2 * self.size];
        buf[..self.size].copy_from_slice(x);
        self.forward.process(&mut buf);
        for (b, &s) in buf.iter_mut().zip(&self.symbol) {
            *b = *b * s;
        }
        self.inverse.process(&mut buf);
        buf.truncate(self.size);
        Ok(buf)
    }

    pub fn apply_real(&self, x: &[F]) -> Result<Vec<Complex<F>>> {
        let c: Vec<_> = x.iter().map(|&v| Complex::new(v, F::zero())).collect();
        self.apply(&c)
    }
}

/// `Ā x` in `O(N log N)`.
pub fn apply_gram_continuous<F: Real>(n_basis: usize, t: F, x: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
    ContinuousGram::new(n_basis, t).apply(x)
}
