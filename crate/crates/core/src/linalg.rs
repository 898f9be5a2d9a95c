//! Small dense linear algebra: Householder QR, Jacobi eigen/singular value
//! solvers, seeded Gaussian draws and column sampling.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};

/// Seed for every random stream in the crate. Equal seeds and call sequences
/// give bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Per-mode seed: `seed ⊕ mode`.
    pub fn for_mode(self, mode: usize) -> RngSeed {
        RngSeed(self.0 ^ mode as u64)
    }

    /// Decorrelated child stream for a named purpose (splitmix64 finalizer).
    pub fn derive(self, purpose: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(purpose.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl std::fmt::Display for RngSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn gaussian_vec(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `rows × cols` matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: RngSeed) -> DenseMatrix {
    let mut rng = seed.rng();
    let data = gaussian_vec(rows * cols, &mut rng);
    DenseMatrix::from_col_major(rows, cols, data).expect("length matches")
}

fn check_rate(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "sampling_rate",
            reason: format!("{omega} is outside (0, 1]"),
        });
    }
    Ok(())
}

/// Number of columns kept at rate `omega`: `⌈omega · cols⌉`, at least one.
pub fn sampled_count(cols: usize, omega: f64) -> usize {
    // the small offset keeps e.g. 0.3 * 10 from rounding up to 4
    let k = (omega * cols as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(cols)
}

/// Sorted column indices drawn uniformly without replacement.
pub fn sample_column_indices(cols: usize, omega: f64, seed: RngSeed) -> Result<Vec<usize>> {
    check_rate(omega)?;
    let k = sampled_count(cols, omega);
    if k == cols {
        return Ok((0..cols).collect());
    }
    let mut rng = seed.rng();
    let mut idx = index::sample(&mut rng, cols, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Keeps `⌈omega · cols⌉` uniformly chosen columns in their original order.
pub fn sample_columns(m: &DenseMatrix, omega: f64, seed: RngSeed) -> Result<DenseMatrix> {
    check_rate(omega)?;
    if omega == 1.0 {
        return Ok(m.clone());
    }
    let idx = sample_column_indices(m.cols(), omega, seed)?;
    Ok(m.select_columns(&idx))
}

struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, col: &mut [f64]) {
        if self.beta == 0.0 {
            return;
        }
        let tail = &mut col[self.start..];
        let w = self.beta * dot(&self.v, tail);
        for (x, v) in tail.iter_mut().zip(&self.v) {
            *x -= w * v;
        }
    }
}

struct Householder {
    reflectors: Vec<Reflector>,
    /// Column index each reflector was built from.
    pivots: Vec<usize>,
    /// Working copy holding R above the diagonal after factorization.
    work: DenseMatrix,
    diag: Vec<f64>,
}

/// Column-by-column Householder factorization. With `skip_below`, a column
/// whose residual norm falls under the threshold is treated as dependent and
/// gets no reflector.
fn householder(m: &DenseMatrix, skip_below: Option<f64>) -> Householder {
    let rows = m.rows();
    let cols = m.cols();
    let mut work = m.clone();
    let mut reflectors: Vec<Reflector> = Vec::new();
    let mut pivots = Vec::new();
    let mut diag = Vec::new();
    for j in 0..cols {
        let k = reflectors.len();
        if k == rows {
            break;
        }
        let col = work.column_mut(j);
        let tail = &col[k..];
        let nrm = norm2(tail);
        if let Some(tol) = skip_below {
            if nrm <= tol {
                continue;
            }
        }
        let x0 = tail[0];
        let alpha = if x0 >= 0.0 { -nrm } else { nrm };
        let mut v = tail.to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        let beta = if vv == 0.0 { 0.0 } else { 2.0 / vv };
        let refl = Reflector { start: k, v, beta };
        col[k] = alpha;
        for x in &mut col[k + 1..] {
            *x = 0.0;
        }
        for jj in j + 1..cols {
            refl.apply(work.column_mut(jj));
        }
        diag.push(alpha);
        pivots.push(j);
        reflectors.push(refl);
    }
    Householder {
        reflectors,
        pivots,
        work,
        diag,
    }
}

impl Householder {
    fn q(&self, rows: usize) -> DenseMatrix {
        let k = self.reflectors.len();
        let mut q = DenseMatrix::zeros(rows, k);
        for j in 0..k {
            q.set(j, j, 1.0);
        }
        for r in self.reflectors.iter().rev() {
            for j in 0..k {
                r.apply(q.column_mut(j));
            }
        }
        q
    }
}

/// Orthonormal basis for the range of `m` with rank detection at
/// `1e-12 · ‖m‖_F`. A zero matrix yields a basis with no columns.
pub fn economical_qr(m: &DenseMatrix) -> DenseMatrix {
    qr_basis_with_tol(m, 1e-12 * m.frobenius_norm())
}

pub(crate) fn qr_basis_with_tol(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    let h = householder(m, Some(tol));
    h.q(m.rows())
}

/// Thin QR without rank detection for `rows ≥ cols`: `m = Q R` with `Q`
/// `rows × cols` and `R` upper triangular.
pub(crate) fn thin_qr(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    assert!(m.rows() >= m.cols(), "thin_qr needs a tall matrix");
    let h = householder(m, None);
    let n = m.cols();
    debug_assert_eq!(h.pivots.len(), n);
    let mut r = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            r.set(i, j, h.work.get(i, j));
        }
        r.set(j, j, h.diag[j]);
    }
    (h.q(m.rows()), r)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Non-increasing.
    pub values: Vec<f64>,
    /// Column `j` pairs with `values[j]`.
    pub vectors: DenseMatrix,
}

const JACOBI_SWEEPS: usize = 30;

/// Cyclic Jacobi eigensolver. The input is symmetrized as `(a + aᵀ)/2`.
///
/// Eigenvalues come back non-increasing (stable on ties) and each vector is
/// signed so its largest-magnitude entry is positive.
pub fn sym_eig(a: &DenseMatrix) -> Result<EigenPairs> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "sym_eig",
            detail: format!("{}x{} matrix is not square", n, a.cols()),
        });
    }
    let mut w = a.clone();
    w.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let target = 1e-12 * w.frobenius_norm();

    for _ in 0..JACOBI_SWEEPS {
        if off_diagonal_norm(&w) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = w.get(p, p);
                let aqq = w.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate_columns(w.data_mut(), n, p, q, c, s);
                for k in 0..n {
                    if k != p && k != q {
                        let (kp, kq) = (w.get(k, p), w.get(k, q));
                        w.set(p, k, kp);
                        w.set(q, k, kq);
                    }
                }
                w.set(p, p, app - t * apq);
                w.set(q, q, aqq + t * apq);
                w.set(p, q, 0.0);
                w.set(q, p, 0.0);
                rotate_columns(v.data_mut(), n, p, q, c, s);
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| w.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = v.select_columns(&order);
    for j in 0..n {
        normalize_sign(vectors.column_mut(j));
    }
    Ok(EigenPairs { values, vectors })
}

/// `[x_p, x_q] <- [c x_p - s x_q, s x_p + c x_q]` on two columns of a
/// column-major matrix with `rows` rows.
fn rotate_columns(data: &mut [f64], rows: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Flips the vector so its largest-magnitude entry (lowest index on ties) is
/// positive.
pub(crate) fn normalize_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    if col.get(best).is_some_and(|&x| x < 0.0) {
        for x in col.iter_mut() {
            *x = -*x;
        }
    }
}

fn check_rank(k: usize, upper: usize) -> Result<()> {
    if k == 0 || k > upper {
        return Err(Error::RankOutOfRange {
            rank: k,
            lower: 1,
            upper,
        });
    }
    Ok(())
}

/// Leading `k` left singular vectors of `m`, from the eigenvectors of `m mᵀ`.
pub fn truncated_left_singular(m: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_rank(k, m.rows().min(m.cols()))?;
    leading_eigenvectors(&m.gram(), k)
}

/// Top-`k` eigenvectors of a symmetric positive semidefinite matrix.
pub(crate) fn leading_eigenvectors(gram: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let eig = sym_eig(gram)?;
    Ok(eig.vectors.leading_columns(k))
}

/// Extends orthonormal columns `q` to `k` orthonormal columns by
/// Gram–Schmidt over the coordinate vectors.
pub(crate) fn complete_orthonormal(q: &DenseMatrix, k: usize) -> DenseMatrix {
    let rows = q.rows();
    assert!(k <= rows);
    let mut cols: Vec<Vec<f64>> = (0..q.cols()).map(|j| q.column(j).to_vec()).collect();
    let mut e = 0;
    while cols.len() < k && e < rows {
        let mut v = vec![0.0; rows];
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for c in &cols {
                let d = dot(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= d * y;
                }
            }
        }
        let nrm = norm2(&v);
        if nrm > 0.5 {
            v.iter_mut().for_each(|x| *x /= nrm);
            cols.push(v);
        }
    }
    let data = cols.into_iter().take(k).flatten().collect();
    DenseMatrix::from_col_major(rows, k, data).expect("k columns collected")
}

/// Thin singular value decomposition `m = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    /// Non-increasing.
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided Jacobi SVD, accurate to high relative precision. Intended for
/// small matrices; large tall inputs should be reduced with a QR first.
pub fn svd(m: &DenseMatrix) -> Svd {
    if m.rows() < m.cols() {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let n = m.cols();
    let rows = m.rows();
    let mut u = m.clone();
    let mut v = DenseMatrix::identity(n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(u.column(p), u.column(p));
                let beta = dot(u.column(q), u.column(q));
                let gamma = dot(u.column(p), u.column(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(u.data_mut(), rows, p, q, c, s);
                rotate_columns(v.data_mut(), n, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| norm2(u.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut uu = u.select_columns(&order);
    let vv = v.select_columns(&order);
    for (j, &sj) in s.iter().enumerate() {
        if sj > 0.0 {
            uu.column_mut(j).iter_mut().for_each(|x| *x /= sj);
        }
    }
    Svd { u: uu, s, v: vv }
}

/// Singular values of `m` in non-increasing order, `min(rows, cols)` of them.
///
/// The tall orientation is first reduced to its triangular factor so the
/// Jacobi sweeps run on a square matrix; small singular values keep their
/// relative accuracy, unlike the square roots of Gram eigenvalues.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let tall = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    if tall.cols() == 0 {
        return Vec::new();
    }
    let (_, r) = thin_qr(&tall);
    svd(&r).s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projector_residual(q: &DenseMatrix, m: &DenseMatrix) -> f64 {
        m.sub(&q.matmul(&q.t_matmul(m))).frobenius_norm()
    }

    #[test]
    fn seeded_gaussian_is_reproducible() {
        let a = gaussian_matrix(7, 3, RngSeed(5));
        let b = gaussian_matrix(7, 3, RngSeed(5));
        assert_eq!(a, b);
        assert_ne!(a, gaussian_matrix(7, 3, RngSeed(6)));
    }

    #[test]
    fn gaussian_moments() {
        let m = gaussian_matrix(1000, 100, RngSeed(42));
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn mode_seeds_xor() {
        assert_eq!(RngSeed(12).for_mode(3), RngSeed(15));
        assert_ne!(RngSeed(12).derive(0), RngSeed(12).derive(1));
    }

    #[test]
    fn sample_columns_cardinality_and_membership() {
        let m = DenseMatrix::from_fn(3, 10, |i, j| (10 * j + i) as f64);
        let s = sample_columns(&m, 0.5, RngSeed(1)).unwrap();
        assert_eq!(s.cols(), 5);
        let mut last = None;
        for j in 0..5 {
            let src = (s.get(0, j) / 10.0) as usize;
            assert_eq!(s.column(j), m.column(src));
            assert!(last.is_none_or(|l| l < src), "order preserved");
            last = Some(src);
        }
        assert_eq!(sample_columns(&m, 1.0, RngSeed(1)).unwrap(), m);
        assert_eq!(
            sample_column_indices(10, 0.3, RngSeed(9)).unwrap(),
            sample_column_indices(10, 0.3, RngSeed(9)).unwrap()
        );
        assert_eq!(sampled_count(10, 0.3), 3);
        assert_eq!(sampled_count(40_000, 0.1), 4000);
        assert!(sample_columns(&m, 0.0, RngSeed(1)).is_err());
        assert!(sample_columns(&m, 1.5, RngSeed(1)).is_err());
    }

    #[test]
    fn qr_of_orthonormal_spans_same_space() {
        let q0 = economical_qr(&gaussian_matrix(9, 4, RngSeed(3)));
        let q = economical_qr(&q0);
        assert_eq!(q.cols(), 4);
        assert!(projector_residual(&q, &q0) < 1e-12);
    }

    #[test]
    fn qr_detects_duplicate_columns() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(economical_qr(&m).cols(), 1);
        assert_eq!(economical_qr(&DenseMatrix::zeros(4, 3)).cols(), 0);
    }

    #[test]
    fn qr_random_tall() {
        let m = gaussian_matrix(50, 8, RngSeed(11));
        let q = economical_qr(&m);
        assert_eq!(q.cols(), 8);
        assert!(q.orthonormality_defect() < 1e-10);
        assert!(projector_residual(&q, &m) < 1e-10 * m.frobenius_norm());
        let p = q.matmul_t(&q);
        assert!(p.matmul(&p).sub(&p).frobenius_norm() < 1e-10);
    }

    #[test]
    fn qr_wide_caps_at_rows() {
        let m = gaussian_matrix(4, 9, RngSeed(2));
        let q = economical_qr(&m);
        assert_eq!(q.cols(), 4);
        assert!(q.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn thin_qr_reconstructs() {
        let m = gaussian_matrix(12, 5, RngSeed(8));
        let (q, r) = thin_qr(&m);
        assert!(q.matmul(&r).sub(&m).frobenius_norm() < 1e-12 * m.frobenius_norm());
        for j in 0..5 {
            for i in j + 1..5 {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn eig_of_diagonal() {
        let a = DenseMatrix::from_fn(4, 4, |i, j| if i == j { [2.0, -1.0, 5.0, 0.5][i] } else { 0.0 });
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values, vec![5.0, 2.0, 0.5, -1.0]);
        let perm = [2, 0, 3, 1];
        for (j, &p) in perm.iter().enumerate() {
            for i in 0..4 {
                assert_eq!(e.vectors.get(i, j), if i == p { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn eig_of_identity_and_ties_are_stable() {
        let e = sym_eig(&DenseMatrix::identity(5)).unwrap();
        assert_eq!(e.values, vec![1.0; 5]);
        assert_eq!(e.vectors, DenseMatrix::identity(5));
    }

    #[test]
    fn eig_random_symmetric_reconstructs() {
        let g = gaussian_matrix(12, 12, RngSeed(4));
        let a = DenseMatrix::from_fn(12, 12, |i, j| g.get(i, j) + g.get(j, i));
        let e = sym_eig(&a).unwrap();
        let vd = DenseMatrix::from_fn(12, 12, |i, j| e.vectors.get(i, j) * e.values[j]);
        let rec = vd.matmul_t(&e.vectors);
        assert!(rec.sub(&a).frobenius_norm() <= 1e-9 * a.frobenius_norm());
        assert!(e.vectors.orthonormality_defect() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = (0..12).map(|i| a.get(i, i)).sum();
        let sum: f64 = e.values.iter().sum();
        assert!((trace - sum).abs() <= 1e-9 * trace.abs().max(1.0));
        for j in 0..12 {
            let col = e.vectors.column(j);
            let mut best = 0;
            for i in 0..12 {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] > 0.0);
        }
    }

    #[test]
    fn eig_rejects_nonsquare() {
        assert!(sym_eig(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn left_singular_rank_one() {
        let u = [1.0, -3.0, 2.0];
        let v = [0.5, 1.0, -1.0, 2.0];
        let m = DenseMatrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let uk = truncated_left_singular(&m, 1).unwrap();
        let nu = norm2(&u);
        // largest entry -3 flips to positive
        for i in 0..3 {
            assert!((uk.get(i, 0) + u[i] / nu).abs() < 1e-12);
        }
    }

    #[test]
    fn left_singular_full_orthogonal() {
        let q = economical_qr(&gaussian_matrix(6, 6, RngSeed(7)));
        let uk = truncated_left_singular(&q, 6).unwrap();
        assert!(uk.matmul_t(&uk).sub(&DenseMatrix::identity(6)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn left_singular_residual_matches_spectrum() {
        let m = gaussian_matrix(20, 30, RngSeed(13));
        let uk = truncated_left_singular(&m, 5).unwrap();
        let res = projector_residual(&uk, &m).powi(2);
        let eig = sym_eig(&m.gram()).unwrap();
        let tail: f64 = eig.values[5..].iter().sum();
        assert!((res - tail).abs() <= 1e-8 * tail);
        assert!(truncated_left_singular(&m, 0).is_err());
        assert!(truncated_left_singular(&m, 21).is_err());
    }

    #[test]
    fn svd_reconstructs_and_orders() {
        for (r, c) in [(7, 4), (4, 7), (5, 5)] {
            let m = gaussian_matrix(r, c, RngSeed(r as u64 * 10 + c as u64));
            let d = svd(&m);
            let us = DenseMatrix::from_fn(d.u.rows(), d.s.len(), |i, j| d.u.get(i, j) * d.s[j]);
            let rec = us.matmul_t(&d.v);
            assert!(rec.sub(&m).frobenius_norm() < 1e-12 * m.frobenius_norm());
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            assert!(d.u.orthonormality_defect() < 1e-12);
            assert!(d.v.orthonormality_defect() < 1e-12);
        }
    }

    #[test]
    fn singular_values_resolve_tiny_values() {
        let u = economical_qr(&gaussian_matrix(30, 4, RngSeed(1)));
        let v = economical_qr(&gaussian_matrix(50, 4, RngSeed(2)));
        let s = [3.0, 1.0, 1e-5, 1e-9];
        let us = DenseMatrix::from_fn(30, 4, |i, j| u.get(i, j) * s[j]);
        let m = us.matmul_t(&v);
        let got = singular_values(&m);
        assert_eq!(got.len(), 30);
        for (g, e) in got.iter().zip(s) {
            assert!((g - e).abs() <= 1e-9 * e + 1e-14, "{g} vs {e}");
        }
        assert!(got[4..].iter().all(|&g| g < 1e-14));
    }

    #[test]
    fn gram_singular_values_match_power_method() {
        let m = gaussian_matrix(8, 8, RngSeed(21));
        let eig = sym_eig(&m.gram()).unwrap();
        // deflated power iteration on mᵀm as an independent oracle
        let mut a = m.t_matmul(&m);
        for k in 0..3 {
            let mut x = vec![1.0; 8];
            let mut lambda = 0.0;
            for _ in 0..5000 {
                let y: Vec<f64> = (0..8).map(|i| (0..8).map(|j| a.get(i, j) * x[j]).sum()).collect();
                lambda = norm2(&y);
                x = y.iter().map(|v| v / lambda).collect();
            }
            let expect = eig.values[k].sqrt();
            assert!((lambda.sqrt() - expect).abs() <= 1e-6 * expect, "k={k}");
            a = DenseMatrix::from_fn(8, 8, |i, j| a.get(i, j) - lambda * x[i] * x[j]);
        }
    }

    #[test]
    fn complete_orthonormal_pads() {
        let q = economical_qr(&gaussian_matrix(6, 2, RngSeed(3)));
        let full = complete_orthonormal(&q, 5);
        assert_eq!(full.cols(), 5);
        assert!(full.orthonormality_defect() < 1e-12);
        assert_eq!(full.leading_columns(2), q);
    }
}
