//! Small dense complex least squares: Householder QR followed by a one-sided
//! Jacobi SVD of the triangular factor, with relative singular-value cutoff.

use num_complex::Complex;

use crate::scalar::Real;

fn cdot<F: Real>(a: &[Complex<F>], b: &[Complex<F>]) -> Complex<F> {
    a.iter().zip(b).fold(Complex::new(F::zero(), F::zero()), |acc, (x, y)| acc + x.conj() * y)
}

fn cnorm<F: Real>(a: &[Complex<F>]) -> F {
    a.iter().fold(F::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Orthogonal factorization `K = Q [R; 0]`, `R = U S V'` of a tall complex
/// matrix given by columns, truncated at `rel_cutoff * s_max` (or at an
/// absolute level).
#[derive(Debug, Clone)]
pub struct TruncatedLstsq<F: Real> {
    reflectors: Vec<(usize, Vec<Complex<F>>)>,
    left: Vec<Vec<Complex<F>>>,
    right: Vec<Vec<Complex<F>>>,
    singular: Vec<F>,
    cols: usize,
}

impl<F: Real> TruncatedLstsq<F> {
    pub fn new(columns: &[Vec<Complex<F>>], rel_cutoff: F) -> Self {
        Self::build(columns, |smax| rel_cutoff * smax)
    }

    /// As [`TruncatedLstsq::new`], but discards singular values `<= cutoff`.
    pub fn with_absolute_cutoff(columns: &[Vec<Complex<F>>], cutoff: F) -> Self {
        Self::build(columns, |_| cutoff)
    }

    fn build(columns: &[Vec<Complex<F>>], threshold: impl Fn(F) -> F) -> Self {
        let ncols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let zero = Complex::new(F::zero(), F::zero());
        let mut a: Vec<Vec<Complex<F>>> = columns.to_vec();
        let steps = ncols.min(rows);
        let mut reflectors = Vec::with_capacity(steps);

        for j in 0..steps {
            let alpha_norm = cnorm(&a[j][j..]);
            if alpha_norm == F::zero() {
                continue;
            }
            let x0 = a[j][j];
            let phase = if x0.norm() > F::zero() { x0 / x0.norm() } else { Complex::new(F::one(), F::zero()) };
            let mut v: Vec<Complex<F>> = a[j][j..].to_vec();
            v[0] = v[0] + phase * alpha_norm;
            let vnorm = cnorm(&v);
            for z in v.iter_mut() {
                *z = *z / vnorm;
            }
            for col in a.iter_mut().skip(j) {
                reflect(&v, &mut col[j..]);
            }
            for c in a[j][j + 1..].iter_mut() {
                *c = zero;
            }
            reflectors.push((j, v));
        }

        let mut r: Vec<Vec<Complex<F>>> = a.iter().map(|col| col[..steps].to_vec()).collect();
        let mut v: Vec<Vec<Complex<F>>> = (0..ncols)
            .map(|j| {
                let mut e = vec![zero; ncols];
                e[j] = Complex::new(F::one(), F::zero());
                e
            })
            .collect();
        jacobi(&mut r, &mut v);

        let norms: Vec<F> = r.iter().map(|col| cnorm(col)).collect();
        let smax = norms.iter().fold(F::zero(), |a, &s| a.max(s));
        let (mut left, mut right, mut singular) = (Vec::new(), Vec::new(), Vec::new());
        let cut = threshold(smax);
        for ((col, vj), s) in r.into_iter().zip(v).zip(norms) {
            if smax == F::zero() || s <= cut {
                continue;
            }
            left.push(col.into_iter().map(|z| z / s).collect());
            right.push(vj);
            singular.push(s);
        }
        TruncatedLstsq { reflectors, left, right, singular, cols: ncols }
    }

    /// Numerical rank kept after truncation.
    pub fn rank(&self) -> usize {
        self.singular.len()
    }

    pub fn singular_values(&self) -> &[F] {
        &self.singular
    }

    fn reduce(&self, rhs: &[Complex<F>]) -> Vec<Complex<F>> {
        let mut b = rhs.to_vec();
        for (j, v) in &self.reflectors {
            reflect(v, &mut b[*j..]);
        }
        b
    }

    /// Minimum-norm truncated solution and the norm of `rhs - K y`, the
    /// latter evaluated in the orthogonal basis (no cancellation).
    pub fn solve(&self, rhs: &[Complex<F>]) -> (Vec<Complex<F>>, F) {
        let zero = Complex::new(F::zero(), F::zero());
        let b = self.reduce(rhs);
        let steps = self.cols.min(rhs.len());
        let mut head: Vec<Complex<F>> = b[..steps].to_vec();
        let tail = cnorm(&b[steps..]);
        let mut y = vec![zero; self.cols];
        for ((u, vj), &s) in self.left.iter().zip(&self.right).zip(&self.singular) {
            let c = cdot(u, &head);
            for (h, &ui) in head.iter_mut().zip(u) {
                *h = *h - ui * c;
            }
            let coef = c / s;
            for (yi, &vi) in y.iter_mut().zip(vj) {
                *yi = *yi + vi * coef;
            }
        }
        let res = (tail * tail + cnorm(&head).powi(2)).sqrt();
        (y, res)
    }
}

fn reflect<F: Real>(v: &[Complex<F>], x: &mut [Complex<F>]) {
    let d = cdot(v, x) * F::of(2.0);
    for (c, &vi) in x.iter_mut().zip(v) {
        *c = *c - vi * d;
    }
}

/// One-sided (Hestenes) Jacobi: orthogonalizes the columns of `r`,
/// accumulating the rotations in `v`.
fn jacobi<F: Real>(r: &mut [Vec<Complex<F>>], v: &mut [Vec<Complex<F>>]) {
    let n = r.len();
    let eps = F::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = cdot(&r[p], &r[p]).re;
                let beta = cdot(&r[q], &r[q]).re;
                let gamma = cdot(&r[p], &r[q]);
                let g = gamma.norm();
                if g == F::zero() || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = gamma / g;
                let zeta = (beta - alpha) / (F::of(2.0) * g);
                let t = zeta.signum() / (zeta.abs() + (F::one() + zeta * zeta).sqrt());
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = c * t;
                for mat in [&mut *r, &mut *v] {
                    let (left, right) = mat.split_at_mut(q);
                    for (xp, xq) in left[p].iter_mut().zip(right[0].iter_mut()) {
                        let yq = *xq * ph.conj();
                        let np = *xp * c - yq * s;
                        let nq = *xp * s + yq * c;
                        *xp = np;
                        *xq = nq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Convenience wrapper: truncated solution of `K y ~ rhs` and the kept rank.
pub fn truncated_lstsq<F: Real>(
    columns: &[Vec<Complex<F>>],
    rhs: &[Complex<F>],
    rel_cutoff: F,
) -> (Vec<Complex<F>>, usize) {
    let f = TruncatedLstsq::new(columns, rel_cutoff);
    let (y, _) = f.solve(rhs);
    (y, f.rank())
}
