//! Solvers for the Fourier extension least-squares problem: the explicit and
//! implicit plunge projections, the dense TSVD oracle, and the continuous
//! (Grammian) variants.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{check_len, dense_a, norm2, Coefficients, ContinuousGram, FftOperator, SampleVector};
use crate::params::{rational_to_f64, ProblemConfig, Rational};
use crate::plunge::{self, sketch_for, validate_window, window_around, SKETCH_C, SKETCH_D};
use crate::scalar::Real;
use crate::tridiagonal::{build_commuting_continuous, splitmix};

/// A solve counts as converged when `||A x - b|| <= CONVERGENCE_FACTOR * tau * ||b||`.
pub const CONVERGENCE_FACTOR: f64 = 100.0;

/// Extra sketch columns on the retry after a rejected sketch.
pub const SKETCH_RETRY_EXTRA: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Explicit,
    Implicit,
    DenseTsvd,
    ContinuousExplicit,
    ContinuousImplicit,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Explicit => "explicit",
            Method::Implicit => "implicit",
            Method::DenseTsvd => "dense",
            Method::ContinuousExplicit => "continuous-explicit",
            Method::ContinuousImplicit => "continuous-implicit",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(Method::Explicit),
            "implicit" => Ok(Method::Implicit),
            "dense" | "tsvd" | "densetsvd" => Ok(Method::DenseTsvd),
            "continuous-explicit" => Ok(Method::ContinuousExplicit),
            "continuous-implicit" => Ok(Method::ContinuousImplicit),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// Outcome of one solve. `residual_l2` is recomputed from the returned
/// coefficients.
///
/// `converged` is false when the residual exceeds `100 tau ||b||`, i.e. the
/// data still has weight in the `sigma < tau` part of the spectrum and `N`
/// should grow. The coefficients are still the regularized solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<F> {
    pub coefficients: Coefficients<F>,
    pub residual_l2: F,
    pub rhs_norm: F,
    pub coefficient_norm: F,
    pub plunge_size: usize,
    pub method: Method,
    pub wall_seconds: f64,
    pub converged: bool,
}

impl<F: Real> SolveReport<F> {
    fn finish(
        coefficients: Coefficients<F>,
        residual_l2: F,
        rhs_norm: F,
        tau: f64,
        plunge_size: usize,
        method: Method,
        start: Instant,
    ) -> Self {
        let bound = F::of(CONVERGENCE_FACTOR * tau) * rhs_norm;
        SolveReport {
            coefficient_norm: coefficients.norm(),
            coefficients,
            residual_l2,
            rhs_norm,
            plunge_size,
            method,
            wall_seconds: start.elapsed().as_secs_f64(),
            converged: residual_l2 <= bound,
        }
    }

    /// Turns a non-converged report into [`Error::NotConverged`].
    pub fn ensure_converged(self, tau: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                residual: self.residual_l2.to_f64_lossy(),
                bound: CONVERGENCE_FACTOR * tau * self.rhs_norm.to_f64_lossy(),
            })
        }
    }
}

/// `x + A'(b - A x)`: recovers the `sigma ~ 1` part of the solution.
pub fn alpha_complete<F: Real>(
    config: &ProblemConfig,
    b: &SampleVector<F>,
    x_partial: &Coefficients<F>,
) -> Result<Coefficients<F>> {
    let op = FftOperator::new(config);
    let values = complete(&op, &b.values, &x_partial.values)?;
    Ok(Coefficients::new(values, x_partial.t))
}

fn complete<F: Real>(op: &FftOperator<F>, b: &[Complex<F>], x: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
    check_len(op.n_samples(), b.len())?;
    let ax = op.apply(x)?;
    let r: Vec<_> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let corr = op.apply_adjoint(&r)?;
    Ok(x.iter().zip(&corr).map(|(&xi, &ci)| xi + ci).collect())
}

/// `||A x - b||_2` with one fast application.
pub fn residual<F: Real>(config: &ProblemConfig, x: &Coefficients<F>, b: &SampleVector<F>) -> Result<F> {
    residual_with(&FftOperator::new(config), &x.values, &b.values)
}

fn residual_with<F: Real>(op: &FftOperator<F>, x: &[Complex<F>], b: &[Complex<F>]) -> Result<F> {
    check_len(op.n_samples(), b.len())?;
    let ax = op.apply(x)?;
    let r: Vec<_> = ax.iter().zip(b).map(|(&a, &bi)| a - bi).collect();
    Ok(norm2(&r))
}

/// Explicit projection: TSVD restricted to the computed plunge triplets,
/// followed by the completion step.
pub fn solve_explicit<F: Real>(config: &ProblemConfig, b: &SampleVector<F>) -> Result<SolveReport<F>> {
    let start = Instant::now();
    let op = FftOperator::new(config);
    check_len(config.n_samples, b.values.len())?;
    let basis = plunge::validated_plunge::<F>(config)?;
    let tau = F::of(config.tau);
    let zero = Complex::new(F::zero(), F::zero());
    let stage = |rhs: &[Complex<F>]| -> Result<Vec<Complex<F>>> {
        let mut x = vec![zero; config.n_basis];
        for t in basis.triplets.iter().filter(|t| t.sigma > tau) {
            let ub = t.u.iter().zip(rhs).fold(zero, |acc, (&u, &bi)| acc + bi * u);
            let c = ub * t.phase.conj() / t.sigma;
            for (xi, &vi) in x.iter_mut().zip(&t.v) {
                *xi = *xi + c * vi;
            }
        }
        complete(&op, rhs, &x)
    };
    // One refinement pass on the residual. Eigenvector errors of the
    // plunge triplets grow with N and otherwise leave an error floor at the
    // samples nearest the endpoints.
    let x0 = stage(&b.values)?;
    let ax = op.apply(&x0)?;
    let r: Vec<_> = b.values.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let dx = stage(&r)?;
    let x: Vec<_> = x0.iter().zip(&dx).map(|(&a, &d)| a + d).collect();
    let res = residual_with(&op, &x, &b.values)?;
    Ok(SolveReport::finish(
        Coefficients::new(x, config.t),
        res,
        norm2(&b.values),
        config.tau,
        basis.plunge_size(),
        Method::Explicit,
        start,
    ))
}

/// Implicit projection through a random sketch. A rejected sketch is retried
/// once with `R + 10` columns and a derived seed.
pub fn solve_implicit<F: Real>(config: &ProblemConfig, b: &SampleVector<F>, seed: u64) -> Result<SolveReport<F>> {
    let start = Instant::now();
    let op = FftOperator::new(config);
    check_len(config.n_samples, b.values.len())?;
    let tau = F::of(config.tau);
    let attempt = |extra: usize, seed: u64| {
        let sketch = sketch_for::<F>(config.n_basis, SKETCH_C, SKETCH_D + extra, seed);
        plunge::sketched_solve(
            config.n_basis,
            tau,
            &b.values,
            &sketch,
            |w| op.apply_p(&op.apply_real(w)?),
            |y| op.apply_p(y),
        )
    };
    let (x, rank) = match attempt(0, seed) {
        Err(Error::RankDeficientSketch { .. }) => match attempt(SKETCH_RETRY_EXTRA, splitmix(seed)) {
            Err(Error::RankDeficientSketch { .. }) => return Err(Error::SketchFailure),
            other => other?,
        },
        other => other?,
    };
    let x = complete(&op, &b.values, &x)?;
    let res = residual_with(&op, &x, &b.values)?;
    Ok(SolveReport::finish(
        Coefficients::new(x, config.t),
        res,
        norm2(&b.values),
        config.tau,
        rank,
        Method::Implicit,
        start,
    ))
}

/// Dense truncated SVD, `x = V S^+ U' b` with `S^+_ii = 0` for `S_ii <= tau`.
/// Reference only: cubic cost, limited to `N M <= 4e6`.
pub fn solve_tsvd_dense<F: Real + RealField>(config: &ProblemConfig, b: &SampleVector<F>) -> Result<SolveReport<F>> {
    let start = Instant::now();
    check_len(config.n_samples, b.values.len())?;
    let a = dense_a::<F>(config)?;
    let svd = a.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Domain("dense SVD did not return singular vectors".into())),
    };
    let tau = <F as Real>::of(config.tau);
    let bv = DVector::from_column_slice(&b.values);
    let utb = u.adjoint() * &bv;
    let mut scaled = DVector::<Complex<F>>::zeros(utb.len());
    let mut plunge_size = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tau {
            scaled[i] = utb[i] / Complex::new(s, F::zero());
        }
        if s > tau && s < F::one() - tau {
            plunge_size += 1;
        }
    }
    let x: Vec<Complex<F>> = (vt.adjoint() * scaled).iter().copied().collect();
    let op = FftOperator::new(config);
    let res = residual_with(&op, &x, &b.values)?;
    Ok(SolveReport::finish(
        Coefficients::new(x, config.t),
        res,
        norm2(&b.values),
        config.tau,
        plunge_size,
        Method::DenseTsvd,
        start,
    ))
}

/// Fast path (`Explicit`/`Implicit`) or the dense oracle, by method.
pub fn solve<F: Real + RealField>(
    config: &ProblemConfig,
    b: &SampleVector<F>,
    method: Method,
    seed: u64,
) -> Result<SolveReport<F>> {
    match method {
        Method::Explicit => solve_explicit(config, b),
        Method::Implicit => solve_implicit(config, b, seed),
        Method::DenseTsvd => solve_tsvd_dense(config, b),
        Method::ContinuousExplicit | Method::ContinuousImplicit => {
            Err(Error::Domain("continuous methods take moments; use solve_continuous".into()))
        }
    }
}

/// Eigenpairs of the continuous Grammian in the window around `N/T`,
/// descending in eigenvalue, each `(lambda, psi)` with `lambda = psi' G psi`.
pub fn continuous_eigenpairs<F: Real>(
    n_basis: usize,
    t: Rational,
    tau: f64,
) -> Result<(plunge::PlungeWindow, Vec<(F, Vec<F>)>)> {
    let tf = F::of(rational_to_f64(t));
    let tri = build_commuting_continuous(n_basis, tf)?;
    let gram = ContinuousGram::new(n_basis, tf);
    let center = n_basis as f64 / rational_to_f64(t);
    let compute = |lo: usize, hi: usize| -> Result<Vec<(F, Vec<F>)>> {
        let sel = tri.eig_range(n_basis - 1 - hi, n_basis - 1 - lo)?;
        sel.vectors
            .into_iter()
            .rev()
            .map(|psi| {
                let g = gram.apply_real(&psi)?;
                let lambda = psi.iter().zip(&g).fold(F::zero(), |acc, (&p, gi)| acc + p * gi.re);
                Ok((lambda, psi))
            })
            .collect()
    };
    validate_window(window_around(center, n_basis, n_basis, tau), n_basis, n_basis, compute, |p: &(F, Vec<F>)| p.0)
}

/// Solves `G a = b` for the continuous Grammian `G` given moments
/// `b_k = int_{-1}^{1} f conj(phi_k)`. Accuracy is limited to `O(sqrt(tau))`.
pub fn solve_continuous<F: Real>(
    n_basis: usize,
    t: Rational,
    moments: &[Complex<F>],
    tau: f64,
    method: Method,
    seed: u64,
) -> Result<SolveReport<F>> {
    let start = Instant::now();
    check_len(n_basis, moments.len())?;
    if n_basis.is_multiple_of(2) {
        return Err(Error::Domain(format!("basis size must be odd, got {n_basis}")));
    }
    if t <= Rational::from_integer(1) {
        return Err(Error::TleOne(t.to_string()));
    }
    let gram = ContinuousGram::new(n_basis, F::of(rational_to_f64(t)));
    let tau_f = F::of(tau);
    let zero = Complex::new(F::zero(), F::zero());
    let (partial, size) = match method {
        Method::ContinuousExplicit => {
            let (_, pairs) = continuous_eigenpairs::<F>(n_basis, t, tau)?;
            let mut a = vec![zero; n_basis];
            let mut size = 0;
            for (lambda, psi) in pairs.iter().filter(|p| p.0 > tau_f) {
                if *lambda < F::one() - tau_f {
                    size += 1;
                }
                let c = psi.iter().zip(moments).fold(zero, |acc, (&p, &bi)| acc + bi * p) / *lambda;
                for (ai, &p) in a.iter_mut().zip(psi) {
                    *ai = *ai + c * p;
                }
            }
            (a, size)
        }
        Method::ContinuousImplicit => {
            let p = |y: &[Complex<F>]| -> Result<Vec<Complex<F>>> {
                let g = gram.apply(y)?;
                Ok(g.iter().zip(y).map(|(&gi, &yi)| gi - yi).collect())
            };
            let pg = |w: &[F]| p(&gram.apply_real(w)?);
            let attempt = |extra: usize, seed: u64| {
                let sketch = sketch_for::<F>(n_basis, SKETCH_C, SKETCH_D + extra, seed);
                plunge::sketched_solve(n_basis, tau_f, moments, &sketch, pg, p)
            };
            match attempt(0, seed) {
                Err(Error::RankDeficientSketch { .. }) => match attempt(SKETCH_RETRY_EXTRA, splitmix(seed)) {
                    Err(Error::RankDeficientSketch { .. }) => return Err(Error::SketchFailure),
                    other => other?,
                },
                other => other?,
            }
        }
        other => return Err(Error::Domain(format!("{other} is not a continuous method"))),
    };
    let ga = gram.apply(&partial)?;
    let a: Vec<_> = partial.iter().zip(moments.iter().zip(&ga)).map(|(&x, (&bi, &gi))| x + bi - gi).collect();
    let ga = gram.apply(&a)?;
    let r: Vec<_> = ga.iter().zip(moments).map(|(&g, &bi)| g - bi).collect();
    Ok(SolveReport::finish(Coefficients::new(a, t), norm2(&r), norm2(moments), tau, size, method, start))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the three-term
/// recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                dp = legendre(n, x).1;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Moments `int_{-1}^{1} f(x) conj(phi_k(x)) dx`, `phi_k = e^{i pi k x/T}/sqrt(2T)`,
/// by Gauss-Legendre with `N + 32` nodes per half-bandwidth (`2N+32` total).
pub fn continuous_moments<F: Real>(f: impl Fn(f64) -> f64, n_basis: usize, t: Rational) -> Vec<Complex<F>> {
    let (nodes, weights) = gauss_legendre(2 * n_basis + 32);
    let tf = rational_to_f64(t);
    let scale = 1.0 / (2.0 * tf).sqrt();
    let n = (n_basis / 2) as isize;
    let fx: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    (-n..=n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for ((&x, &w), &fv) in nodes.iter().zip(&weights).zip(&fx) {
                let arg = -std::f64::consts::PI * k as f64 * x / tf;
                re += w * fv * arg.cos();
                im += w * fv * arg.sin();
            }
            Complex::new(F::of(re * scale), F::of(im * scale))
        })
        .collect()
}

/// Dense eigenvalues of the continuous Grammian, descending (oracle only).
pub fn dense_continuous_eigenvalues<F: Real + RealField>(n_basis: usize, t: Rational) -> Result<Vec<F>> {
    let g: DMatrix<F> = crate::operator::gram_continuous::<F>(n_basis, <F as Real>::of(rational_to_f64(t)))?;
    let mut vals: Vec<F> = g.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(vals)
}
