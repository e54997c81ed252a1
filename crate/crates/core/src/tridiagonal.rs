//! Symmetric tridiagonal matrices that commute with the Fourier extension
//! Gram matrices, and a selected-eigenpair solver (Sturm bisection followed by
//! inverse iteration) costing `O(k P)` for `k` eigenpairs of a size-`P` matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maximum inverse-iteration sweeps per eigenvector.
pub const MAX_INVERSE_SWEEPS: usize = 40;

/// Symmetric tridiagonal matrix with diagonal `diag` (length `P`) and
/// off-diagonal `offdiag` (length `P-1`).
///
/// `seed` feeds the inverse-iteration start vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag<F> {
    pub diag: Vec<F>,
    pub offdiag: Vec<F>,
    pub seed: u64,
}

/// Selected eigenpairs, ascending in value.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSelection<F> {
    pub values: Vec<F>,
    /// Unit eigenvectors; `vectors[j]` belongs to `values[j]`.
    pub vectors: Vec<Vec<F>>,
    pub index_lo: usize,
    pub index_hi: usize,
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Size-`P` matrix of the second-order difference equation with
/// `b_k = sin(pi k/L) sin(pi (P-k)/L)` and
/// `c_k = -cos(pi (2k+1-P)/L) cos(pi Q/L)`.
///
/// `(P, Q) = (N, M)` commutes with `A'A`; `(P, Q) = (M, N)` commutes with `AA'`.
pub fn build_commuting<F: Real>(p: usize, q: usize, len: usize) -> Result<SymTridiag<F>> {
    if p < 1 || q < 1 || p > len || q > len {
        return Err(Error::Domain(format!("commuting matrix needs 1 <= P, Q <= L, got P={p} Q={q} L={len}")));
    }
    let lf = F::of_usize(len);
    let pi = F::PI();
    let cq = (pi * F::of_usize(q) / lf).cos();
    let diag = (0..p)
        .map(|k| {
            let arg = F::of(2.0 * k as f64 + 1.0 - p as f64);
            -(pi * arg / lf).cos() * cq
        })
        .collect();
    let offdiag = (1..p).map(|k| (pi * F::of_usize(k) / lf).sin() * (pi * F::of_usize(p - k) / lf).sin()).collect();
    let seed = splitmix(splitmix(splitmix(p as u64) ^ q as u64) ^ len as u64);
    Ok(SymTridiag { diag, offdiag, seed })
}

/// Tridiagonal matrix commuting with the continuous Grammian:
/// `c_i = ((N-1)/2 - i)^2 cos(pi/T)`, `b_i = i (N-i) / 2`.
pub fn build_commuting_continuous<F: Real>(n_basis: usize, t: F) -> Result<SymTridiag<F>> {
    if n_basis < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let ct = (F::PI() / t).cos();
    let half = F::of((n_basis as f64 - 1.0) / 2.0);
    let diag = (0..n_basis)
        .map(|i| {
            let d = half - F::of_usize(i);
            d * d * ct
        })
        .collect();
    let offdiag = (1..n_basis).map(|i| F::of_usize(i * (n_basis - i)) / F::of(2.0)).collect();
    let seed = splitmix(splitmix(n_basis as u64) ^ t.to_f64_lossy().to_bits());
    Ok(SymTridiag { diag, offdiag, seed })
}

impl<F: Real> SymTridiag<F> {
    pub fn new(diag: Vec<F>, offdiag: Vec<F>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch { expected: diag.len().saturating_sub(1), found: offdiag.len() });
        }
        Ok(SymTridiag { diag, offdiag, seed: 0 })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> F {
        let p = self.size();
        (0..p)
            .map(|i| {
                let left = if i > 0 { self.offdiag[i - 1].abs() } else { F::zero() };
                let right = if i + 1 < p { self.offdiag[i].abs() } else { F::zero() };
                self.diag[i].abs() + left + right
            })
            .fold(F::zero(), F::max)
    }

    fn gershgorin(&self) -> (F, F) {
        let p = self.size();
        let mut lo = F::infinity();
        let mut hi = F::neg_infinity();
        for i in 0..p {
            let left = if i > 0 { self.offdiag[i - 1].abs() } else { F::zero() };
            let right = if i + 1 < p { self.offdiag[i].abs() } else { F::zero() };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// `T x`.
    pub fn apply(&self, x: &[F]) -> Vec<F> {
        let p = self.size();
        (0..p)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s = s + self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < p {
                    s = s + self.offdiag[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: F) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < F::zero() {
            count += 1;
        }
        for i in 1..self.size() {
            let b = self.offdiag[i - 1];
            d = (self.diag[i] - x) - b * b / d;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < F::zero() {
                count += 1;
            }
        }
        count
    }

    fn pivmin(&self) -> F {
        let bmax = self.offdiag.iter().fold(F::one(), |a, &b| a.max(b * b));
        F::min_positive_value() * bmax
    }

    /// Eigenpairs with ascending positions `index_lo..=index_hi` of the spectrum.
    pub fn eig_range(&self, index_lo: usize, index_hi: usize) -> Result<EigenSelection<F>> {
        let p = self.size();
        if index_lo > index_hi || index_hi >= p {
            return Err(Error::IndexOutOfRange { lo: index_lo, hi: index_hi, size: p });
        }
        let norm = self.norm_bound().max(F::min_positive_value());
        let eps = F::epsilon();
        let (glo, ghi) = self.gershgorin();
        let pad = eps * norm * F::of(4.0) + self.pivmin();
        let (glo, ghi) = (glo - pad, ghi + pad);

        let mut values = Vec::with_capacity(index_hi - index_lo + 1);
        let mut floor = glo;
        for j in index_lo..=index_hi {
            let theta = self.bisect(j, floor, ghi, norm);
            floor = theta - pad;
            values.push(theta);
        }

        let cluster_tol = norm * F::of(1e-10).max(F::of(1e3) * eps);
        let sep = F::of(10.0) * eps * norm;
        let tol = F::of(8.0) * eps * norm * F::of_usize(p).sqrt().max(F::one());
        let mut vectors: Vec<Vec<F>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        let mut shifts = values.clone();
        for jj in 0..values.len() {
            if jj > 0 {
                if values[jj] - values[jj - 1] > cluster_tol {
                    cluster_start = jj;
                } else if shifts[jj] - shifts[jj - 1] < sep {
                    // separate coincident shifts so the iterates differ
                    shifts[jj] = shifts[jj - 1] + sep;
                }
            }
            let index = index_lo + jj;
            let v = self.inverse_iteration(shifts[jj], values[jj], index, &vectors[cluster_start..jj], tol)?;
            vectors.push(v);
        }
        Ok(EigenSelection { values, vectors, index_lo, index_hi })
    }

    fn bisect(&self, j: usize, lo: F, hi: F, norm: F) -> F {
        let (mut lo, mut hi) = (lo, hi);
        let eps = F::epsilon();
        let two = F::of(2.0);
        for _ in 0..200 {
            let width = hi - lo;
            if width <= two * eps * (lo.abs().max(hi.abs())) || width <= eps * norm {
                break;
            }
            let mid = lo + width / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo + (hi - lo) / two
    }

    fn inverse_iteration(&self, shift: F, theta: F, index: usize, previous: &[Vec<F>], tol: F) -> Result<Vec<F>> {
        let p = self.size();
        if p == 1 {
            return Ok(vec![F::one()]);
        }
        let lu = ShiftedLu::new(self, shift);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ splitmix(index as u64)));
        let mut x: Vec<F> = (0..p).map(|_| F::of(rng.gen_range(-1.0..1.0))).collect();
        normalize(&mut x);
        let mut converged_sweeps = 0;
        for _ in 0..MAX_INVERSE_SWEEPS {
            lu.solve(&mut x);
            for v in previous {
                let d = dot(v, &x);
                for (xi, &vi) in x.iter_mut().zip(v) {
                    *xi = *xi - d * vi;
                }
            }
            if !normalize(&mut x) {
                // start vector annihilated by orthogonalization; reseed
                x = (0..p).map(|_| F::of(rng.gen_range(-1.0..1.0))).collect();
                normalize(&mut x);
                continue;
            }
            let tx = self.apply(&x);
            let res = tx.iter().zip(&x).fold(F::zero(), |acc, (&a, &b)| {
                let r = a - theta * b;
                acc + r * r
            });
            if res.sqrt() <= tol {
                converged_sweeps += 1;
                if converged_sweeps >= 2 {
                    fix_sign(&mut x);
                    return Ok(x);
                }
            }
        }
        Err(Error::ConvergenceFailure { index })
    }
}

/// Free-function form of [`SymTridiag::eig_range`].
pub fn eig_range<F: Real>(t: &SymTridiag<F>, index_lo: usize, index_hi: usize) -> Result<EigenSelection<F>> {
    t.eig_range(index_lo, index_hi)
}

pub(crate) fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

fn normalize<F: Real>(x: &mut [F]) -> bool {
    let scale = x.iter().fold(F::zero(), |a, &v| a.max(v.abs()));
    if !(scale > F::zero()) || !scale.is_finite() {
        return false;
    }
    for v in x.iter_mut() {
        *v = *v / scale;
    }
    let n = dot(x, x).sqrt();
    for v in x.iter_mut() {
        *v = *v / n;
    }
    true
}

/// Flips `x` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign<F: Real>(x: &mut [F]) {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    if x[best] < F::zero() {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

/// LU factorization of `T - shift I` with partial pivoting; `U` has two
/// superdiagonals.
struct ShiftedLu<F> {
    u0: Vec<F>,
    u1: Vec<F>,
    u2: Vec<F>,
    mult: Vec<F>,
    swapped: Vec<bool>,
}

impl<F: Real> ShiftedLu<F> {
    fn new(t: &SymTridiag<F>, shift: F) -> Self {
        let p = t.size();
        let tiny = F::epsilon() * t.norm_bound().max(F::min_positive_value());
        let mut u0 = vec![F::zero(); p];
        let mut u1 = vec![F::zero(); p];
        let mut u2 = vec![F::zero(); p];
        let mut mult = vec![F::zero(); p.saturating_sub(1)];
        let mut swapped = vec![false; p.saturating_sub(1)];
        // working row i holds columns (i, i+1)
        let mut d = t.diag[0] - shift;
        let mut e = if p > 1 { t.offdiag[0] } else { F::zero() };
        for i in 0..p - 1 {
            let sub = t.offdiag[i];
            let next_d = t.diag[i + 1] - shift;
            let next_e = if i + 2 < p { t.offdiag[i + 1] } else { F::zero() };
            if sub.abs() > d.abs() {
                swapped[i] = true;
                let mu = d / sub;
                u0[i] = sub;
                u1[i] = next_d;
                u2[i] = next_e;
                mult[i] = mu;
                d = e - mu * next_d;
                e = -mu * next_e;
            } else {
                if d.abs() < tiny {
                    d = if d < F::zero() { -tiny } else { tiny };
                }
                let mu = sub / d;
                u0[i] = d;
                u1[i] = e;
                u2[i] = F::zero();
                mult[i] = mu;
                d = next_d - mu * e;
                e = next_e;
            }
        }
        if d.abs() < tiny {
            d = if d < F::zero() { -tiny } else { tiny };
        }
        u0[p - 1] = d;
        ShiftedLu { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, x: &mut [F]) {
        let p = x.len();
        for i in 0..p - 1 {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] = x[i + 1] - self.mult[i] * x[i];
        }
        for i in (0..p).rev() {
            let mut s = x[i];
            if i + 1 < p {
                s = s - self.u1[i] * x[i + 1];
            }
            if i + 2 < p {
                s = s - self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
            if !x[i].is_finite() {
                // rescale on overflow; the direction is what matters
                let big = F::max_value().sqrt();
                x[i] = if s < F::zero() { -big } else { big };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{gram_continuous, gram_discrete};
    use crate::params::{resolve, Rational};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense(t: &SymTridiag<f64>) -> DMatrix<f64> {
        let p = t.size();
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                t.diag[i]
            } else if i + 1 == j {
                t.offdiag[i]
            } else if j + 1 == i {
                t.offdiag[j]
            } else {
                0.0
            }
        })
    }

    fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(m);
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    #[test]
    fn small_known_spectra() {
        let t = SymTridiag::<f64>::new(vec![1.0, 1.0], vec![0.5]).unwrap();
        let e = t.eig_range(0, 1).unwrap();
        assert!((e.values[0] - 0.5).abs() < 1e-15 && (e.values[1] - 1.5).abs() < 1e-15);
        let t = SymTridiag::<f64>::new(vec![0.0; 3], vec![1.0, 1.0]).unwrap();
        let e = t.eig_range(0, 2).unwrap();
        let r2 = 2f64.sqrt();
        for (got, want) in e.values.iter().zip([-r2, 0.0, r2]) {
            assert!((got - want).abs() < 1e-14);
        }
        let t = SymTridiag::<f64>::new(vec![3.0], vec![]).unwrap();
        let e = t.eig_range(0, 0).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-15);
        assert_eq!(e.vectors, vec![vec![1.0]]);
    }

    #[test]
    fn index_errors() {
        let t = SymTridiag::<f64>::new(vec![0.0; 3], vec![1.0, 1.0]).unwrap();
        assert!(matches!(t.eig_range(0, 3), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(t.eig_range(2, 1), Err(Error::IndexOutOfRange { .. })));
        assert!(SymTridiag::<f64>::new(vec![0.0; 3], vec![1.0]).is_err());
    }

    #[test]
    fn commuting_entries() {
        let t = build_commuting::<f64>(3, 5, 8).unwrap();
        let b1 = (std::f64::consts::PI / 8.0).sin() * (2.0 * std::f64::consts::PI / 8.0).sin();
        assert!((t.offdiag[0] - b1).abs() < 1e-15);
        assert!((t.offdiag[0] - 0.270598).abs() < 1e-6);
        assert_eq!(t.diag[0], t.diag[2]);
        assert!(build_commuting::<f64>(9, 5, 8).is_err());
        assert!(build_commuting::<f64>(0, 5, 8).is_err());
    }

    #[test]
    fn centrosymmetric() {
        for (p, q, l) in [(11, 21, 40), (41, 83, 152), (20, 7, 33)] {
            let t = build_commuting::<f64>(p, q, l).unwrap();
            let rd: Vec<f64> = t.diag.iter().rev().copied().collect();
            let ro: Vec<f64> = t.offdiag.iter().rev().copied().collect();
            for (a, b) in t.diag.iter().zip(&rd) {
                assert!((a - b).abs() < 1e-15);
            }
            for (a, b) in t.offdiag.iter().zip(&ro) {
                assert!((a - b).abs() < 1e-15);
            }
            assert!(t.offdiag.iter().all(|&b| b > 0.0));
        }
    }

    #[test]
    fn commutes_with_discrete_gram() {
        let c = resolve(Rational::from(2), 2, 2.0, 1e-14).unwrap();
        assert_eq!((c.n_basis, c.n_samples, c.fft_len), (5, 9, 16));
        let g = gram_discrete::<f64>(&c).unwrap();
        let t = dense(&build_commuting(c.n_basis, c.n_samples, c.fft_len).unwrap());
        let comm = (&t * &g - &g * &t).norm() / g.norm();
        assert!(comm < 1e-12, "{comm}");
    }

    #[test]
    fn continuous_entries_and_commutation() {
        let t = build_commuting_continuous::<f64>(5, 2.0).unwrap();
        assert!(t.diag.iter().all(|c| c.abs() < 1e-15));
        assert_eq!(t.offdiag[1], 3.0);
        let g = gram_continuous::<f64>(9, 3.8).unwrap();
        let t = dense(&build_commuting_continuous(9, 3.8).unwrap());
        let comm = (&t * &g - &g * &t).norm() / g.norm();
        assert!(comm < 1e-12, "{comm}");
    }

    #[test]
    fn matches_dense_eigensolver() {
        let t = build_commuting::<f64>(5, 9, 16).unwrap();
        let (vals, vecs) = sorted_eigen(dense(&t));
        let sel = t.eig_range(1, 3).unwrap();
        for (j, i) in (1..=3).enumerate() {
            assert!((sel.values[j] - vals[i]).abs() < 1e-12);
            let cos: f64 = sel.vectors[j].iter().zip(vecs.column(i).iter()).map(|(a, b)| a * b).sum();
            assert!((1.0 - cos.abs()) < 1e-10, "angle {}", 1.0 - cos.abs());
        }
    }

    #[test]
    fn residual_and_orthogonality() {
        for (p, q, l) in [(401, 801, 1600), (125, 461, 506), (439, 471, 1672)] {
            let t = build_commuting::<f64>(p, q, l).unwrap();
            let norm = t.norm_bound();
            let sel = t.eig_range(p / 3, p / 3 + 30).unwrap();
            for (j, v) in sel.vectors.iter().enumerate() {
                let tv = t.apply(v);
                let r: f64 = tv.iter().zip(v).map(|(a, b)| (a - sel.values[j] * b).powi(2)).sum::<f64>().sqrt();
                assert!(r <= 1e-12 * norm, "residual {r}");
                for w in &sel.vectors[..j] {
                    assert!(dot(v, w).abs() < 1e-12);
                }
            }
            assert!(sel.values.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn eigenvectors_symmetric_or_antisymmetric() {
        let t = build_commuting::<f64>(41, 83, 164).unwrap();
        let sel = t.eig_range(0, 40).unwrap();
        for v in &sel.vectors {
            let sym: f64 = v.iter().zip(v.iter().rev()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let anti: f64 = v.iter().zip(v.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            assert!(sym.min(anti) < 1e-8);
        }
    }

    #[test]
    fn deterministic() {
        let t = build_commuting::<f64>(101, 203, 400).unwrap();
        assert_eq!(t.eig_range(30, 60).unwrap(), t.eig_range(30, 60).unwrap());
    }

    #[test]
    fn sturm_count_matches_dense() {
        let t = build_commuting::<f64>(23, 45, 88).unwrap();
        let (vals, _) = sorted_eigen(dense(&t));
        for (i, w) in vals.windows(2).enumerate() {
            let mid = 0.5 * (w[0] + w[1]);
            assert_eq!(t.count_below(mid), i + 1);
        }
        assert!(vals.windows(2).all(|w| w[1] - w[0] > 0.0));
    }

    #[test]
    fn single_precision_eigenpairs() {
        let t = build_commuting::<f32>(31, 61, 120).unwrap();
        let sel = t.eig_range(10, 20).unwrap();
        for (j, v) in sel.vectors.iter().enumerate() {
            let tv = t.apply(v);
            let r: f32 = tv.iter().zip(v).map(|(a, b)| (a - sel.values[j] * b).powi(2)).sum::<f32>().sqrt();
            assert!(r < 1e-5);
        }
    }
}
