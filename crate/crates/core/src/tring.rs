//! Tensor ring model: reconstruction, sub-chain unfoldings, the ALS solver
//! and the Tucker-compressed hierarchical variant.
//!
//! Core `k` has shape `(R_{k-1}, I_k, R_k)` with indices taken cyclically, so
//! `x(i_0, …, i_{N-1}) = trace(X_0(i_0) X_1(i_1) ⋯ X_{N-1}(i_{N-1}))` where
//! `X_k(i)` is the `R_{k-1} × R_k` lateral slice.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_vec, svd, thin_qr, RngSeed};
use crate::matrix::{dot, gemm, DenseMatrix, MatMut, MatRef};
use crate::sketch::SketchMethod;
use crate::tensor::{mode_product, split_shape, unfold, unfolding_mul, DenseTensor};
use crate::tucker::{sketched_tucker, MultilinearRank, TuckerFactors};

/// Ring ranks; `ranks[k]` joins core `k` to core `k + 1 (mod N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TRRank(pub Vec<usize>);

impl TRRank {
    pub fn uniform(order: usize, r: usize) -> Self {
        TRRank(vec![r; order])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// Left rank of core `k`.
    pub fn left(&self, k: usize) -> usize {
        let n = self.0.len();
        self.0[(k + n - 1) % n]
    }

    fn validate(&self, order: usize) -> Result<()> {
        if self.0.len() != order {
            return Err(Error::DimensionMismatch {
                op: "TRRank",
                detail: format!("{} ranks for an order-{order} tensor", self.0.len()),
            });
        }
        if order < 2 {
            return Err(Error::InvalidShape {
                shape: vec![order],
                reason: "a tensor ring needs at least two cores".into(),
            });
        }
        if let Some(&r) = self.0.iter().find(|&&r| r == 0) {
            return Err(Error::RankOutOfRange {
                rank: r,
                lower: 1,
                upper: usize::MAX,
            });
        }
        Ok(())
    }
}

/// Cyclic chain of third-order cores.
#[derive(Debug, Clone, PartialEq)]
pub struct TRFactors {
    cores: Vec<DenseTensor>,
}

impl TRFactors {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        let n = cores.len();
        if n < 2 {
            return Err(Error::InvalidShape {
                shape: vec![n],
                reason: "a tensor ring needs at least two cores".into(),
            });
        }
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(Error::InvalidShape {
                    shape: c.shape().to_vec(),
                    reason: format!("core {k} must be third-order"),
                });
            }
        }
        for k in 0..n {
            let left = (k + n - 1) % n;
            let left_rank = cores[left].shape()[2];
            let right_rank = cores[k].shape()[0];
            if left_rank != right_rank {
                return Err(Error::RingClosure {
                    left,
                    left_rank,
                    right: k,
                    right_rank,
                });
            }
        }
        Ok(TRFactors { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn ranks(&self) -> TRRank {
        TRRank(self.cores.iter().map(|c| c.shape()[2]).collect())
    }

    /// Gaussian cores for the given dimensions and ranks.
    pub fn random(dims: &[usize], rank: &TRRank, seed: RngSeed) -> Result<Self> {
        rank.validate(dims.len())?;
        let mut rng = seed.rng();
        let cores = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let shape = vec![rank.left(k), d, rank.0[k]];
                let len = shape.iter().product();
                DenseTensor::new(shape, gaussian_vec(len, &mut rng))
            })
            .collect::<Result<Vec<_>>>()?;
        TRFactors::new(cores)
    }
}

/// Contracts the cores listed in `order` left to right. The result is laid out
/// as `(r_left, i_first, …, i_last, r_right)`, first index fastest.
fn merge_chain(cores: &[DenseTensor], order: &[usize]) -> (Vec<f64>, usize, usize, usize) {
    let first = &cores[order[0]];
    let left = first.shape()[0];
    let mut right = first.shape()[2];
    let mut mid = first.shape()[1];
    let mut acc = first.data().to_vec();
    for &k in &order[1..] {
        let c = &cores[k];
        let (d, r) = (c.shape()[1], c.shape()[2]);
        let rows = left * mid;
        let mut out = vec![0.0; rows * d * r];
        gemm(
            1.0,
            MatRef::col_major(&acc, rows, right),
            MatRef::col_major(c.data(), right, d * r),
            0.0,
            MatMut::col_major(&mut out, rows, d * r),
        );
        acc = out;
        mid *= d;
        right = r;
    }
    (acc, left, mid, right)
}

/// Full tensor from its ring cores via chained products and a final trace.
pub fn tr_reconstruct(f: &TRFactors) -> DenseTensor {
    let n = f.order();
    let dims = f.dims();
    let order: Vec<usize> = (0..n - 1).collect();
    // (r_{N-1}, i_0 … i_{N-2}, r_{N-2}) merged, closed against the last core
    let (acc, r, mid, s) = merge_chain(&f.cores, &order);
    let last = &f.cores[n - 1];
    let d = dims[n - 1];
    let mut out = vec![0.0; mid * d];
    for t in 0..r {
        let lhs = MatRef {
            data: &acc[t..],
            rows: mid,
            cols: s,
            rs: r,
            cs: r * mid,
        };
        let rhs = MatRef {
            data: &last.data()[s * d * t..],
            rows: s,
            cols: d,
            rs: 1,
            cs: s,
        };
        gemm(1.0, lhs, rhs, 1.0, MatMut::col_major(&mut out, mid, d));
    }
    DenseTensor::new(dims, out).expect("dims from cores")
}

/// Unfolding with mode `n` as rows and the remaining modes in cyclic order
/// `n+1, …, N-1, 0, …, n-1` (mode `n+1` fastest) as columns.
pub fn cyclic_unfold(x: &DenseTensor, n: usize) -> Result<DenseMatrix> {
    let native = unfold(x, n)?;
    let (a, _, b) = split_shape(x.shape(), n);
    let dim = native.rows();
    Ok(DenseMatrix::from_fn(dim, a * b, |i, c| {
        let (beta, alpha) = (c % b, c / b);
        native.get(i, alpha + a * beta)
    }))
}

/// Core `n` unfolded along its dimension mode: `I_n × R_{n-1} R_n`, column
/// `r_{n-1} + R_{n-1} r_n`.
pub fn core_unfolding(f: &TRFactors, n: usize) -> DenseMatrix {
    unfold(&f.cores[n], 1).expect("third-order core")
}

fn subchain_cyclic(f: &TRFactors, n: usize) -> DenseMatrix {
    let order: Vec<usize> = (1..f.order()).map(|k| (n + k) % f.order()).collect();
    let (acc, rn, mid, rm) = merge_chain(&f.cores, &order);
    // acc(r_n, row, r_{n-1}) -> column r_{n-1} + R_{n-1} r_n
    DenseMatrix::from_fn(mid, rm * rn, |p, col| {
        let (rm_i, rn_i) = (col % rm, col / rm);
        acc[rn_i + rn * (p + mid * rm_i)]
    })
}

/// Merged sub-chain of every core except `n`, as a `Π_{p≠n} I_p × R_{n-1}R_n`
/// matrix whose rows follow [`cyclic_unfold`] and whose columns pair with
/// [`core_unfolding`], so that `cyclic_unfold(x, n) = core_unfolding(n) ·
/// subchainᵀ` for an exact ring.
pub fn subchain_unfolding(f: &TRFactors, n: usize) -> Result<DenseMatrix> {
    if n >= f.order() {
        return Err(Error::ModeOutOfRange {
            mode: n,
            order: f.order(),
        });
    }
    Ok(subchain_cyclic(f, n))
}

/// Reorders sub-chain rows from cyclic to the native unfolding order.
fn cyclic_rows_to_native(m: &DenseMatrix, a: usize, b: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for j in 0..m.cols() {
        let src = m.column(j);
        let dst = out.column_mut(j);
        for alpha in 0..a {
            for beta in 0..b {
                dst[alpha + a * beta] = src[beta + b * alpha];
            }
        }
    }
    out
}

/// ALS stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    pub max_iter: usize,
    /// Stop once consecutive sweep fits (in percent) differ by at most this.
    pub tol: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            max_iter: 20,
            tol: 1e-3,
        }
    }
}

/// Result of an ALS run with its convergence trace.
#[derive(Debug, Clone)]
pub struct TrAlsOutcome {
    pub factors: TRFactors,
    /// Fit (percent) of the initial cores followed by the fit after each sweep.
    pub fit_history: Vec<f64>,
    /// Squared residual after each single-core update.
    pub objective_history: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Some update had more unknowns per row than sub-chain rows.
    pub underdetermined: bool,
}

struct LsStep {
    core: DenseMatrix,
    /// Residual before and after the update.
    before: f64,
    after: f64,
}

/// Least-squares update of one core: minimizes `‖X − A Bᵀ‖_F` over `A`.
fn solve_core(x: &DenseTensor, n: usize, b: &DenseMatrix, old: &DenseMatrix, norm_sq: f64) -> LsStep {
    let k = b.cols();
    // B = P W with P orthonormal; then X B = (X P) W.
    let (xp, w, svd_w) = if b.rows() >= k {
        let (qb, rb) = thin_qr(b);
        let xp = unfolding_mul(x, n, &qb);
        let s = svd(&rb);
        (xp, rb, s)
    } else {
        let s = svd(b);
        let xp = unfolding_mul(x, n, &s.u);
        let w = DenseMatrix::from_fn(s.u.cols(), k, |i, j| s.s[i] * s.v.get(j, i));
        (xp, w, s)
    };
    let xb = xp.matmul(&w);
    let btb = w.t_matmul(&w);
    let residual = |a: &DenseMatrix| {
        let ata = a.t_matmul(a);
        norm_sq - 2.0 * dot(xb.data(), a.data()) + dot(ata.data(), btb.data())
    };
    let before = residual(old);

    // A = X B⁺ᵀ with small singular values of W truncated.
    let smax = svd_w.s.first().copied().unwrap_or(0.0);
    let cut = 1e-10 * smax;
    let (u, v) = if b.rows() >= k {
        (svd_w.u.clone(), svd_w.v.clone())
    } else {
        (DenseMatrix::identity(svd_w.u.cols()), svd_w.v.clone())
    };
    let xu = xp.matmul(&u);
    let scaled = DenseMatrix::from_fn(xu.rows(), svd_w.s.len(), |i, j| {
        let s = svd_w.s[j];
        if s > cut && s > 0.0 {
            xu.get(i, j) / s
        } else {
            0.0
        }
    });
    let core = scaled.matmul_t(&v);
    let after = residual(&core);
    LsStep { core, before, after }
}

fn fit_from_residual(res_sq: f64, norm_sq: f64) -> f64 {
    (1.0 - (res_sq.max(0.0) / norm_sq).sqrt()) * 100.0
}

/// Alternating least squares from Gaussian initial cores.
pub fn tr_als_detailed(x: &DenseTensor, rank: &TRRank, cfg: AlsConfig, seed: RngSeed) -> Result<TrAlsOutcome> {
    if cfg.max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            reason: "must be at least 1".into(),
        });
    }
    if !(cfg.tol >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("{} must be nonnegative", cfg.tol),
        });
    }
    rank.validate(x.order())?;
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroInput("tensor"));
    }
    let norm_sq = norm * norm;
    let order = x.order();
    let mut f = TRFactors::random(x.shape(), rank, seed)?;
    let mut fit_history = Vec::new();
    let mut objective_history = Vec::new();
    let mut underdetermined = false;
    let mut converged = false;
    let mut sweeps = 0;

    for _ in 0..cfg.max_iter {
        let mut last = f64::NAN;
        for n in 0..order {
            let (a, dim, b) = split_shape(x.shape(), n);
            let sub = cyclic_rows_to_native(&subchain_cyclic(&f, n), a, b);
            if sub.cols() > sub.rows() {
                underdetermined = true;
            }
            let old = core_unfolding(&f, n);
            let step = solve_core(x, n, &sub, &old, norm_sq);
            if fit_history.is_empty() {
                fit_history.push(fit_from_residual(step.before, norm_sq));
            }
            objective_history.push(step.after);
            last = step.after;
            let shape = vec![rank.left(n), dim, rank.0[n]];
            f.cores[n] = crate::tensor::fold(&step.core, 1, &shape)?;
        }
        sweeps += 1;
        let fit = fit_from_residual(last, norm_sq);
        let prev = *fit_history.last().expect("initial fit recorded");
        fit_history.push(fit);
        if (fit - prev).abs() <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(TrAlsOutcome {
        factors: f,
        fit_history,
        objective_history,
        sweeps,
        converged,
        underdetermined,
    })
}

pub fn tr_als(x: &DenseTensor, rank: &TRRank, max_iter: usize, tol: f64, seed: RngSeed) -> Result<TRFactors> {
    Ok(tr_als_detailed(x, rank, AlsConfig { max_iter, tol }, seed)?.factors)
}

/// `min(5 R_n, I_n)` per mode.
pub fn default_compress_sizes(shape: &[usize], rank: &TRRank) -> Vec<usize> {
    rank.0.iter().zip(shape).map(|(&r, &d)| (5 * r).min(d)).collect()
}

/// Output of the compressed ring solver.
#[derive(Debug, Clone)]
pub struct CompressedTrOutcome {
    pub factors: TRFactors,
    pub compression: TuckerFactors,
    pub core_als: TrAlsOutcome,
}

/// Tucker-compresses `x` to `compress_sizes` with block Krylov sketches,
/// fits a ring to the small core, and lifts each ring core back through the
/// matching Tucker factor. Sketch size equals the compressed size per mode.
#[allow(clippy::too_many_arguments)]
pub fn rbki_tk_tr_detailed(
    x: &DenseTensor,
    compress_sizes: &[usize],
    rank: &TRRank,
    q: usize,
    omega: f64,
    als: AlsConfig,
    seed: RngSeed,
) -> Result<CompressedTrOutcome> {
    rank.validate(x.order())?;
    let ml = MultilinearRank(compress_sizes.to_vec());
    let compression = sketched_tucker(x, compress_sizes, &ml, SketchMethod::Rbki, q, omega, seed)?.factors;
    let core_als = tr_als_detailed(compression.core(), rank, als, seed)?;
    let cores = core_als
        .factors
        .cores()
        .iter()
        .zip(compression.factors())
        .map(|(g, u)| mode_product(g, u, 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressedTrOutcome {
        factors: TRFactors::new(cores)?,
        compression,
        core_als,
    })
}

pub fn rbki_tk_tr(
    x: &DenseTensor,
    compress_sizes: &[usize],
    rank: &TRRank,
    q: usize,
    omega: f64,
    seed: RngSeed,
) -> Result<TRFactors> {
    Ok(rbki_tk_tr_detailed(x, compress_sizes, rank, q, omega, AlsConfig::default(), seed)?.factors)
}
