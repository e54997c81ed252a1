//! The plunge region `I_beta` of the singular spectrum of `A`: its index
//! window, its singular triplets (from the commuting tridiagonals), and the
//! sketched least-squares solve restricted to it.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lstsq::TruncatedLstsq;
use crate::operator::{check_len, norm2, Coefficients, FftOperator, SampleVector};
use crate::params::ProblemConfig;
use crate::scalar::Real;
use crate::tridiagonal::{build_commuting, dot, SymTridiag};

/// Half-width constant on the `sigma ~ 1` side of the window, in units of `ln N`.
pub const C_HI: f64 = 3.0;
/// Half-width constant on the `sigma ~ 0` side.
pub const C_LO: f64 = 6.0;
/// Widening per validation retry, in units of `ln N`.
pub const C_WIDEN: f64 = 2.0;
pub const MAX_WIDENINGS: usize = 3;

/// Sketch rank `R = round(C ln N) + D` defaults.
pub const SKETCH_C: f64 = 9.0;
pub const SKETCH_D: usize = 10;

/// Index window in the descending singular spectrum. `[0, lo)` is `I_alpha`,
/// `(hi, min(N, M))` is `I_gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlungeWindow {
    pub lo: usize,
    pub hi: usize,
    pub center: f64,
    pub tau: f64,
}

impl PlungeWindow {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One singular triplet: `A v = phase * sigma * u` with `u`, `v` real.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet<F> {
    pub sigma: F,
    pub u: Vec<F>,
    pub v: Vec<F>,
    pub phase: Complex<F>,
}

/// Triplets for the window, ordered by descending `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlungeBasis<F> {
    pub window: PlungeWindow,
    pub triplets: Vec<Triplet<F>>,
}

impl<F: Real> PlungeBasis<F> {
    pub fn sigmas(&self) -> Vec<F> {
        self.triplets.iter().map(|t| t.sigma).collect()
    }

    /// Number of singular values strictly inside `(tau, 1 - tau)`.
    pub fn plunge_size(&self) -> usize {
        let tau = F::of(self.window.tau);
        self.triplets.iter().filter(|t| t.sigma > tau && t.sigma < F::one() - tau).count()
    }
}

/// Random sketch `W`, stored by columns (each of length `N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch<F> {
    pub columns: Vec<Vec<F>>,
    pub rank: usize,
    pub seed: u64,
}

/// Initial (unvalidated) window around `NM/L`.
pub fn plunge_window(config: &ProblemConfig) -> PlungeWindow {
    window_around(config.plunge_center(), config.n_basis, config.rank_bound(), config.tau)
}

/// Window `[floor(c - C_HI ln N), ceil(c + C_LO ln N)]` clipped to `[0, rank)`.
pub fn window_around(center: f64, n_basis: usize, rank: usize, tau: f64) -> PlungeWindow {
    let ln_n = (n_basis as f64).ln();
    let last = rank - 1;
    let lo = (center - C_HI * ln_n).floor().max(0.0) as usize;
    let hi = ((center + C_LO * ln_n).ceil().max(0.0) as usize).min(last);
    PlungeWindow { lo: lo.min(hi), hi, center, tau }
}

/// Widens `window` until its end values straddle `[tau, 1 - tau]`, computing
/// only the added entries. `compute(lo, hi)` returns entries for positions
/// `lo..=hi` in descending order.
pub(crate) fn validate_window<F: Real, T>(
    mut window: PlungeWindow,
    n_basis: usize,
    rank: usize,
    mut compute: impl FnMut(usize, usize) -> Result<Vec<T>>,
    value: impl Fn(&T) -> F,
) -> Result<(PlungeWindow, Vec<T>)> {
    let last = rank - 1;
    let tau = F::of(window.tau).max(F::of(8.0) * F::epsilon());
    let widen = (C_WIDEN * (n_basis as f64).ln()).ceil().max(1.0) as usize;
    let mut items = compute(window.lo, window.hi)?;
    for attempt in 0..=MAX_WIDENINGS {
        check_monotone(items.iter().map(&value), window.lo)?;
        let ok_lo = window.lo == 0 || value(&items[0]) >= F::one() - tau;
        let ok_hi = window.hi == last || value(&items[items.len() - 1]) <= tau;
        if ok_lo && ok_hi {
            return Ok((window, items));
        }
        if attempt == MAX_WIDENINGS {
            break;
        }
        if !ok_lo {
            let lo = window.lo.saturating_sub(widen);
            let mut front = compute(lo, window.lo - 1)?;
            front.append(&mut items);
            items = front;
            window.lo = lo;
        }
        if !ok_hi {
            let hi = (window.hi + widen).min(last);
            items.extend(compute(window.hi + 1, hi)?);
            window.hi = hi;
        }
    }
    Err(Error::WindowOverflow { lo: window.lo, hi: window.hi })
}

struct Commuting<F> {
    right: SymTridiag<F>,
    left: SymTridiag<F>,
}

impl<F: Real> Commuting<F> {
    fn new(config: &ProblemConfig) -> Result<Self> {
        Ok(Commuting {
            right: build_commuting(config.n_basis, config.n_samples, config.fft_len)?,
            left: build_commuting(config.n_samples, config.n_basis, config.fft_len)?,
        })
    }

    /// Triplets for descending positions `lo..=hi`. The i-th largest singular
    /// value pairs with the i-th largest eigenvalue of both tridiagonals.
    fn triplets(&self, op: &FftOperator<F>, lo: usize, hi: usize) -> Result<Vec<Triplet<F>>> {
        let n = self.right.size();
        let m = self.left.size();
        let vs = self.right.eig_range(n - 1 - hi, n - 1 - lo)?;
        let us = self.left.eig_range(m - 1 - hi, m - 1 - lo)?;
        let mut out = Vec::with_capacity(hi - lo + 1);
        for (v, u) in vs.vectors.into_iter().rev().zip(us.vectors.into_iter().rev()) {
            let av = op.apply_real(&v)?;
            let s = u.iter().zip(&av).fold(Complex::new(F::zero(), F::zero()), |acc, (&ui, &a)| acc + a * ui);
            let sigma = s.norm();
            let phase = if sigma > F::zero() { s / sigma } else { Complex::new(F::one(), F::zero()) };
            out.push(Triplet { sigma, u, v, phase });
        }
        Ok(out)
    }
}

pub(crate) fn check_monotone<F: Real>(values: impl Iterator<Item = F>, offset: usize) -> Result<()> {
    let tol = F::epsilon().sqrt();
    let mut prev: Option<F> = None;
    for (i, x) in values.enumerate() {
        if let Some(p) = prev {
            if x > p + tol {
                return Err(Error::MappingMismatch { position: offset + i });
            }
        }
        prev = Some(x);
    }
    Ok(())
}

/// Singular triplets for the positions of `window`, without validation.
pub fn pdpss_triplets<F: Real>(config: &ProblemConfig, window: PlungeWindow) -> Result<PlungeBasis<F>> {
    let rank = config.rank_bound();
    if window.lo > window.hi || window.hi >= rank {
        return Err(Error::IndexOutOfRange { lo: window.lo, hi: window.hi, size: rank });
    }
    let op = FftOperator::new(config);
    let triplets = Commuting::new(config)?.triplets(&op, window.lo, window.hi)?;
    check_monotone(triplets.iter().map(|t| t.sigma), window.lo)?;
    Ok(PlungeBasis { window, triplets })
}

/// Window and triplets after self-validation: `sigma_lo >= 1 - tau` (unless
/// `lo = 0`) and `sigma_hi <= tau` (unless `hi` is the last index). A failing
/// side is widened by `2 ln N`, computing only the new triplets.
pub fn validated_plunge<F: Real>(config: &ProblemConfig) -> Result<PlungeBasis<F>> {
    let op = FftOperator::new(config);
    let pair = Commuting::new(config)?;
    let (window, triplets) = validate_window(
        plunge_window(config),
        config.n_basis,
        config.rank_bound(),
        |lo, hi| pair.triplets(&op, lo, hi),
        |t: &Triplet<F>| t.sigma,
    )?;
    Ok(PlungeBasis { window, triplets })
}

/// Uniform `[-1, 1]` sketch with `R = round(C ln N) + D` columns, clipped to `[1, N]`.
pub fn random_sketch<F: Real>(config: &ProblemConfig, c: f64, d: usize, seed: u64) -> Sketch<F> {
    sketch_for(config.n_basis, c, d, seed)
}

pub(crate) fn sketch_for<F: Real>(n: usize, c: f64, d: usize, seed: u64) -> Sketch<F> {
    let rank = ((c * (n as f64).ln()).round() as usize + d).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = (0..rank).map(|_| (0..n).map(|_| F::of(rng.gen_range(-1.0..=1.0))).collect()).collect();
    Sketch { columns, rank, seed }
}

const PROBES: usize = 2;
const PROBE_SALT: u64 = 0x005E_ED0F_BEEF;

/// Solves `P A W y = P b` in the least-squares sense and returns `x_W = W y`.
///
/// The sketch is accepted if it captures the range of `PA`: for a couple of
/// independent random probes `g`, the part of `PA g` outside the numerical
/// range of `PAW` must stay below `10 tau ||g||`. Otherwise
/// [`Error::RankDeficientSketch`].
pub fn implicit_plunge_solve<F: Real>(
    config: &ProblemConfig,
    b: &SampleVector<F>,
    sketch: &Sketch<F>,
) -> Result<Coefficients<F>> {
    let op = FftOperator::new(config);
    let pb = |y: &[Complex<F>]| op.apply_p(y);
    let pa = |w: &[F]| op.apply_p(&op.apply_real(w)?);
    check_len(config.n_samples, b.values.len())?;
    let (x, _) = sketched_solve(config.n_basis, F::of(config.tau), &b.values, sketch, pa, pb)?;
    Ok(Coefficients::new(x, config.t))
}

/// Shared core of the discrete and continuous implicit solves: `pa` applies
/// the projected operator to a real vector, `p` applies the projection.
/// Returns `x_W` and the numerical rank of the sketched matrix.
pub(crate) fn sketched_solve<F: Real>(
    n_basis: usize,
    tau: F,
    b: &[Complex<F>],
    sketch: &Sketch<F>,
    pa: impl Fn(&[F]) -> Result<Vec<Complex<F>>>,
    p: impl Fn(&[Complex<F>]) -> Result<Vec<Complex<F>>>,
) -> Result<(Vec<Complex<F>>, usize)> {
    for w in &sketch.columns {
        check_len(n_basis, w.len())?;
    }
    let zero = Complex::new(F::zero(), F::zero());
    if norm2(b) == F::zero() {
        return Ok((vec![zero; n_basis], 0));
    }
    // An orthonormal basis of range(W) leaves the solution set unchanged but
    // makes the singular values of PAQ those of PA on that range, so the
    // cutoff acts on sigma - sigma^3 instead of mixing in the conditioning
    // of W.
    let q = orthonormalize(&sketch.columns);
    let k: Vec<_> = q.iter().map(|w| pa(w)).collect::<Result<_>>()?;
    let lstsq = TruncatedLstsq::with_absolute_cutoff(&k, tau);

    let probes = probe_vectors::<F>(n_basis, sketch.seed ^ PROBE_SALT);
    let bound = F::of(10.0) * tau.max(F::of(8.0) * F::epsilon());
    for g in &probes {
        let (_, miss) = lstsq.solve(&pa(g)?);
        let scale = dot(g, g).sqrt();
        if miss > bound * scale {
            return Err(Error::RankDeficientSketch {
                residual: (miss / scale).to_f64_lossy(),
                bound: bound.to_f64_lossy(),
            });
        }
    }

    let (y, _) = lstsq.solve(&p(b)?);
    let mut x = vec![zero; n_basis];
    for (w, &yj) in q.iter().zip(&y) {
        for (xi, &wi) in x.iter_mut().zip(w) {
            *xi = *xi + yj * wi;
        }
    }
    Ok((x, lstsq.rank()))
}

/// Gram-Schmidt with one reorthogonalization pass; columns that vanish
/// against the earlier ones are dropped.
fn orthonormalize<F: Real>(columns: &[Vec<F>]) -> Vec<Vec<F>> {
    let mut q: Vec<Vec<F>> = Vec::with_capacity(columns.len());
    for w in columns {
        let mut v = w.clone();
        let start = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for e in &q {
                let h = dot(e, &v);
                for (vi, &ei) in v.iter_mut().zip(e) {
                    *vi = *vi - h * ei;
                }
            }
        }
        let len = dot(&v, &v).sqrt();
        if len > F::of(1e3) * F::epsilon() * start {
            q.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    q
}

fn probe_vectors<F: Real>(n: usize, seed: u64) -> Vec<Vec<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PROBES).map(|_| (0..n).map(|_| F::of(rng.gen_range(-1.0..=1.0))).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::dense_a;
    use crate::params::{resolve, Rational};
    use nalgebra::DVector;

    fn cfg(t: (i64, i64), n: usize, gamma: f64) -> ProblemConfig {
        resolve(Rational::new(t.0, t.1), n, gamma, 1e-14).unwrap()
    }

    #[test]
    fn fig2_window() {
        let c = cfg((2, 1), 200, 2.0);
        assert_eq!((c.n_basis, c.n_samples, c.fft_len), (401, 801, 1600));
        let w = plunge_window(&c);
        assert!((w.center - 200.750625).abs() < 1e-12);
        assert_eq!((w.lo, w.hi), (182, 237));
        let basis = validated_plunge::<f64>(&c).unwrap();
        assert!(basis.window.lo <= 183 && basis.window.hi >= 236);
        assert!(basis.window.lo as f64 <= w.center && w.center <= basis.window.hi as f64);
        assert!(basis.triplets[0].sigma >= 1.0 - 1e-14);
        assert!(basis.triplets.last().unwrap().sigma <= 1e-14);
    }

    #[test]
    fn degenerate_window_is_full_range() {
        let c = ProblemConfig::with_samples(Rational::new(2, 1), 1, 2, 1e-14).unwrap();
        assert_eq!((c.n_basis, c.n_samples, c.fft_len), (3, 5, 8));
        let w = plunge_window(&c);
        assert_eq!((w.lo, w.hi), (0, 2));
    }

    #[test]
    fn triplets_match_dense_svd() {
        let c = cfg((2, 1), 5, 2.0);
        assert_eq!((c.n_basis, c.n_samples), (11, 21));
        let full = PlungeWindow { lo: 0, hi: 10, center: c.plunge_center(), tau: c.tau };
        let basis = pdpss_triplets::<f64>(&c, full).unwrap();
        let a = dense_a::<f64>(&c).unwrap();
        let svd = a.clone().svd(true, true);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (t, s) in basis.triplets.iter().zip(&sv) {
            assert!((t.sigma - s).abs() < 1e-10, "{} vs {}", t.sigma, s);
            let v = DVector::from_iterator(11, t.v.iter().map(|&x| Complex::new(x, 0.0)));
            let u = DVector::from_iterator(21, t.u.iter().map(|&x| Complex::new(x, 0.0)));
            let r = &a * &v - u * (t.phase * t.sigma);
            assert!(r.norm() < 1e-9);
        }
        for (i, ti) in basis.triplets.iter().enumerate() {
            for tj in &basis.triplets[..i] {
                assert!(dot(&ti.u, &tj.u).abs() < 1e-10);
                assert!(dot(&ti.v, &tj.v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wrong_window_rejected() {
        let c = cfg((2, 1), 5, 2.0);
        let w = PlungeWindow { lo: 3, hi: 11, center: 0.0, tau: 1e-14 };
        assert!(matches!(pdpss_triplets::<f64>(&c, w), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn sketch_shape_and_determinism() {
        let c = cfg((2, 1), 200, 2.0);
        let s1 = random_sketch::<f64>(&c, SKETCH_C, SKETCH_D, 42);
        let s2 = random_sketch::<f64>(&c, SKETCH_C, SKETCH_D, 42);
        assert_eq!(s1, s2);
        assert_eq!(s1.rank, 64);
        let target = (401.0f64 / 3.0).sqrt();
        for col in &s1.columns {
            assert!(col.iter().all(|x| x.abs() <= 1.0));
            let nrm = dot(col, col).sqrt();
            assert!((nrm / target - 1.0).abs() < 0.2);
        }
        let small = cfg((2, 1), 2, 2.0);
        assert_eq!(random_sketch::<f64>(&small, SKETCH_C, SKETCH_D, 1).rank, 5);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let c = cfg((2, 1), 5, 2.0);
        let s = random_sketch::<f64>(&c, SKETCH_C, SKETCH_D, 3);
        let x = implicit_plunge_solve(&c, &SampleVector::zeros(&c), &s).unwrap();
        assert!(x.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn projected_residual_matches_dense_oracle() {
        let c = cfg((2, 1), 5, 2.0);
        let a = dense_a::<f64>(&c).unwrap();
        let p = &a * a.adjoint() - nalgebra::DMatrix::<Complex<f64>>::identity(21, 21);
        let pa = &p * &a;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let b = DVector::from_fn(21, |_, _| Complex::new(rng.gen_range(-1.0..1.0), 0.0));
            let pb = &p * &b;
            let oracle = pa.clone().svd(true, true).solve(&pb, 1e-14 * 0.385).unwrap();
            let oracle_res = (&pa * oracle - &pb).norm();
            let s = random_sketch::<f64>(&c, SKETCH_C, SKETCH_D, 9);
            let sv = SampleVector { values: b.iter().copied().collect(), weighted: true };
            let x = implicit_plunge_solve(&c, &sv, &s).unwrap();
            let xv = DVector::from_vec(x.values);
            let res = (&pa * xv - &pb).norm();
            assert!(res <= 10.0 * oracle_res + 1e-14 * b.norm(), "{res} vs {oracle_res}");
        }
    }

    #[test]
    fn tiny_sketch_is_rejected() {
        let c = cfg((2, 1), 200, 2.0);
        let s = random_sketch::<f64>(&c, 0.0, 5, 1);
        let b = SampleVector { values: vec![Complex::new(1.0, 0.0); c.n_samples], weighted: true };
        assert!(matches!(implicit_plunge_solve(&c, &b, &s), Err(Error::RankDeficientSketch { .. })));
    }
}
