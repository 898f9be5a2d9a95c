//! Tucker solvers: block-Krylov sketched Tucker, truncated HOSVD and the
//! Gaussian / power-iteration randomized HOSVD baselines.

use crate::error::{Error, Result};
use crate::linalg::{complete_orthonormal, leading_eigenvectors, sample_column_indices, sym_eig, RngSeed};
use crate::matrix::DenseMatrix;
use crate::sketch::{range_basis, sampling_seed, ModeView, SketchMethod};
use crate::tensor::{
    mode_product, multi_mode_product, multi_mode_project, unfolding_columns, unfolding_gram,
    unfolding_t_mul, DenseTensor,
};

/// Oversampling added to each target rank by default.
pub const DEFAULT_OVERSAMPLING: usize = 5;

/// Per-mode target ranks `(R_0, …, R_{N-1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilinearRank(pub Vec<usize>);

impl MultilinearRank {
    pub fn uniform(order: usize, r: usize) -> Self {
        MultilinearRank(vec![r; order])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// Checks `1 ≤ R_n ≤ I_n` for every mode.
    pub fn validate(&self, shape: &[usize]) -> Result<()> {
        if self.0.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                op: "MultilinearRank",
                detail: format!("{} ranks for an order-{} tensor", self.0.len(), shape.len()),
            });
        }
        for (&r, &d) in self.0.iter().zip(shape) {
            if r == 0 || r > d {
                return Err(Error::RankOutOfRange {
                    rank: r,
                    lower: 1,
                    upper: d,
                });
            }
        }
        Ok(())
    }
}

/// Core tensor and one orthonormal factor per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    core: DenseTensor,
    factors: Vec<DenseMatrix>,
}

impl TuckerFactors {
    /// Validates that factor column counts match the core and that every
    /// factor is orthonormal within `1e-9`.
    pub fn new(core: DenseTensor, factors: Vec<DenseMatrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::DimensionMismatch {
                op: "TuckerFactors::new",
                detail: format!("{} factors for an order-{} core", factors.len(), core.order()),
            });
        }
        for (n, u) in factors.iter().enumerate() {
            if u.cols() != core.shape()[n] {
                return Err(Error::DimensionMismatch {
                    op: "TuckerFactors::new",
                    detail: format!("factor {n} has {} columns, core mode has {}", u.cols(), core.shape()[n]),
                });
            }
            let defect = u.orthonormality_defect();
            if defect > 1e-9 {
                return Err(Error::InvalidParameter {
                    name: "factors",
                    reason: format!("factor {n} is not orthonormal (defect {defect:.3e})"),
                });
            }
        }
        Ok(TuckerFactors { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    pub fn ranks(&self) -> MultilinearRank {
        MultilinearRank(self.core.shape().to_vec())
    }

    /// Shape of the approximated tensor.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(DenseMatrix::rows).collect()
    }

    pub fn into_parts(self) -> (DenseTensor, Vec<DenseMatrix>) {
        (self.core, self.factors)
    }
}

/// Tucker factors together with the per-mode sketch bases they came from.
#[derive(Debug, Clone)]
pub struct SketchedTucker {
    pub factors: TuckerFactors,
    pub bases: Vec<DenseMatrix>,
}

/// `min(R_n + 5, I_n, Π_{p≠n} I_p)` per mode.
pub fn default_sketch_sizes(shape: &[usize], rank: &MultilinearRank) -> Vec<usize> {
    let total: usize = shape.iter().product();
    rank.0
        .iter()
        .zip(shape)
        .map(|(&r, &d)| (r + DEFAULT_OVERSAMPLING).min(d).min(total / d))
        .collect()
}

fn validate_sketch(shape: &[usize], sizes: &[usize], rank: &MultilinearRank) -> Result<()> {
    rank.validate(shape)?;
    if sizes.len() != shape.len() {
        return Err(Error::DimensionMismatch {
            op: "sketch sizes",
            detail: format!("{} sizes for an order-{} tensor", sizes.len(), shape.len()),
        });
    }
    let total: usize = shape.iter().product();
    for (n, (&s, &d)) in sizes.iter().zip(shape).enumerate() {
        let r = rank.0[n];
        if r == d {
            continue;
        }
        if r > s {
            return Err(Error::RankExceedsSketch {
                mode: n,
                rank: r,
                sketch: s,
            });
        }
        let limit = d.min(total / d);
        if s > limit {
            return Err(Error::SketchTooLarge {
                mode: n,
                sketch: s,
                limit,
            });
        }
    }
    Ok(())
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

/// Leading `r` directions of `Qᵀ X` lifted back through `Q`, padded to `r`
/// orthonormal columns when the basis came up short.
fn factor_from_basis(q: &DenseMatrix, z: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let k = r.min(q.cols());
    let u = q.matmul(&sym_eig(z)?.vectors.leading_columns(k));
    Ok(if k < r { complete_orthonormal(&u, r) } else { u })
}

/// Shared pipeline of every sketched solver. Mode `n` uses seed
/// `seed ⊕ n`.
pub fn sketched_tucker(
    x: &DenseTensor,
    sketch_sizes: &[usize],
    rank: &MultilinearRank,
    method: SketchMethod,
    q: usize,
    omega: f64,
    seed: RngSeed,
) -> Result<SketchedTucker> {
    validate_sketch(x.shape(), sketch_sizes, rank)?;
    check_rate(omega)?;
    if x.data().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroInput("tensor"));
    }
    let mut factors = Vec::with_capacity(x.order());
    let mut bases = Vec::with_capacity(x.order());
    for n in 0..x.order() {
        let dim = x.shape()[n];
        let r = rank.0[n];
        if r == dim {
            factors.push(DenseMatrix::identity(dim));
            bases.push(DenseMatrix::identity(dim));
            continue;
        }
        let mode_seed = seed.for_mode(n);
        let view = ModeView { x, n };
        let sketch = if omega < 1.0 {
            let cols = x.len() / dim;
            let idx = sample_column_indices(cols, omega, sampling_seed(mode_seed))?;
            let a = unfolding_columns(x, n, &idx);
            let mut s = range_basis(&a, method, sketch_sizes[n], q, mode_seed)?;
            // the cached projection belongs to the sampled matrix
            s.projected_gram = None;
            s
        } else {
            range_basis(&view, method, sketch_sizes[n], q, mode_seed)?
        };
        let z = match sketch.projected_gram {
            Some(z) => z,
            None => {
                let y = unfolding_t_mul(x, n, &sketch.basis);
                let mut z = y.t_matmul(&y);
                z.symmetrize();
                z
            }
        };
        factors.push(factor_from_basis(&sketch.basis, &z, r)?);
        bases.push(sketch.basis);
    }
    let core = multi_mode_project(x, &factors)?;
    Ok(SketchedTucker {
        factors: TuckerFactors { core, factors },
        bases,
    })
}

/// Block-Krylov sketched Tucker decomposition.
pub fn rbki_tucker(
    x: &DenseTensor,
    sketch_sizes: &[usize],
    rank: &MultilinearRank,
    q: usize,
    omega: f64,
    seed: RngSeed,
) -> Result<TuckerFactors> {
    Ok(sketched_tucker(x, sketch_sizes, rank, SketchMethod::Rbki, q, omega, seed)?.factors)
}

/// Randomized HOSVD with the chosen range finder and no column sampling.
pub fn randomized_hosvd(
    x: &DenseTensor,
    sketch_sizes: &[usize],
    rank: &MultilinearRank,
    method: SketchMethod,
    q: usize,
    seed: RngSeed,
) -> Result<TuckerFactors> {
    Ok(sketched_tucker(x, sketch_sizes, rank, method, q, 1.0, seed)?.factors)
}

/// Leading `r` left singular vectors of the mode-`n` unfolding.
pub fn tsvd_factor(x: &DenseTensor, n: usize, r: usize) -> Result<DenseMatrix> {
    if n >= x.order() {
        return Err(Error::ModeOutOfRange {
            mode: n,
            order: x.order(),
        });
    }
    let dim = x.shape()[n];
    if r == 0 || r > dim {
        return Err(Error::RankOutOfRange {
            rank: r,
            lower: 1,
            upper: dim,
        });
    }
    if r == dim {
        return Ok(DenseMatrix::identity(dim));
    }
    leading_eigenvectors(&unfolding_gram(x, n), r)
}

/// Truncated HOSVD.
pub fn truncated_hosvd(x: &DenseTensor, rank: &MultilinearRank) -> Result<TuckerFactors> {
    rank.validate(x.shape())?;
    let factors = (0..x.order())
        .map(|n| tsvd_factor(x, n, rank.0[n]))
        .collect::<Result<Vec<_>>>()?;
    let core = multi_mode_project(x, &factors)?;
    Ok(TuckerFactors { core, factors })
}

pub fn tucker_reconstruct(tf: &TuckerFactors) -> DenseTensor {
    multi_mode_product(&tf.core, &tf.factors).expect("factor shapes checked at construction")
}

/// `x ×_0 P_0 … ×_{N-1} P_{N-1}` with `P_n = Q_n Q_nᵀ`.
pub fn project_onto_bases(x: &DenseTensor, bases: &[DenseMatrix]) -> Result<DenseTensor> {
    let core = multi_mode_project(x, bases)?;
    multi_mode_product(&core, bases)
}

/// Numerical check of the deterministic-versus-sketched error sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchBoundReport {
    /// `‖x − x̃‖_F` for the full multilinear sketch `x̃`.
    pub alpha: f64,
    /// `‖x − x_k‖_F` for the truncated HOSVD at the target rank.
    pub beta: f64,
    /// `‖x − x̃_k‖_F` for the solver output.
    pub achieved: f64,
    /// `‖x − x̃‖²_F`.
    pub sketch_residual_sq: f64,
    /// `Σ_n ‖x − x ×_n Q_n Q_nᵀ‖²_F`.
    pub mode_residual_sq_sum: f64,
    /// `β − 1e-9 ≤ achieved ≤ 2α + β + 1e-9`.
    pub sandwich_holds: bool,
    /// `sketch_residual_sq ≤ mode_residual_sq_sum + 1e-9`.
    pub pythagorean_holds: bool,
}

impl SketchBoundReport {
    pub fn holds(&self) -> bool {
        self.sandwich_holds && self.pythagorean_holds
    }
}

pub const BOUND_SLACK: f64 = 1e-9;

pub fn sketch_error_bounds_check(
    x: &DenseTensor,
    sketched: &SketchedTucker,
    rank: &MultilinearRank,
) -> Result<SketchBoundReport> {
    let optimum = tucker_reconstruct(&truncated_hosvd(x, rank)?);
    let beta = x.distance(&optimum)?;
    let sketch = project_onto_bases(x, &sketched.bases)?;
    let alpha = x.distance(&sketch)?;
    let achieved = x.distance(&tucker_reconstruct(&sketched.factors))?;
    let mut mode_residual_sq_sum = 0.0;
    for (n, q) in sketched.bases.iter().enumerate() {
        let proj = mode_product(x, &q.matmul_t(q), n)?;
        mode_residual_sq_sum += x.distance(&proj)?.powi(2);
    }
    let sketch_residual_sq = alpha * alpha;
    Ok(SketchBoundReport {
        alpha,
        beta,
        achieved,
        sketch_residual_sq,
        mode_residual_sq_sum,
        sandwich_holds: beta - BOUND_SLACK <= achieved && achieved <= 2.0 * alpha + beta + BOUND_SLACK,
        pythagorean_holds: sketch_residual_sq <= mode_residual_sq_sum + BOUND_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::tensor::unfold;

    fn gaussian_tucker(dims: &[usize], ranks: &[usize], seed: u64) -> DenseTensor {
        let mut rng_seed = seed;
        let core = DenseTensor::new(
            ranks.to_vec(),
            gaussian_matrix(ranks.iter().product(), 1, RngSeed(seed)).into_data(),
        )
        .unwrap();
        let factors: Vec<_> = dims
            .iter()
            .zip(ranks)
            .map(|(&d, &r)| {
                rng_seed += 7;
                gaussian_matrix(d, r, RngSeed(rng_seed))
            })
            .collect();
        multi_mode_product(&core, &factors).unwrap()
    }

    fn fit(x: &DenseTensor, y: &DenseTensor) -> f64 {
        (1.0 - x.distance(y).unwrap() / x.frobenius_norm()) * 100.0
    }

    #[test]
    fn rbki_recovers_exact_tucker() {
        let x = gaussian_tucker(&[20, 18, 16], &[3, 4, 2], 1);
        let rank = MultilinearRank(vec![3, 4, 2]);
        let tf = rbki_tucker(&x, &[3, 4, 2], &rank, 2, 1.0, RngSeed(5)).unwrap();
        assert!(fit(&x, &tucker_reconstruct(&tf)) >= 99.99);
        for u in tf.factors() {
            assert!(u.orthonormality_defect() <= 1e-9);
        }
    }

    #[test]
    fn full_sketch_matches_tsvd_projectors() {
        let g = gaussian_tucker(&[8, 9, 7], &[8, 9, 7], 2);
        let rank = MultilinearRank(vec![3, 3, 3]);
        let tf = rbki_tucker(&g, &[8, 9, 7], &rank, 0, 1.0, RngSeed(3)).unwrap();
        let ts = truncated_hosvd(&g, &rank).unwrap();
        for n in 0..3 {
            let a = tf.factors()[n].matmul_t(&tf.factors()[n]);
            let b = ts.factors()[n].matmul_t(&ts.factors()[n]);
            assert!(a.sub(&b).frobenius_norm() <= 1e-8, "mode {n}");
        }
    }

    #[test]
    fn tsvd_exact_and_full_rank() {
        let x = gaussian_tucker(&[10, 9, 8], &[2, 3, 4], 4);
        let ts = truncated_hosvd(&x, &MultilinearRank(vec![2, 3, 4])).unwrap();
        let rec = tucker_reconstruct(&ts);
        assert!(x.distance(&rec).unwrap() <= 1e-8 * x.frobenius_norm());

        let y = gaussian_tucker(&[4, 5, 3], &[4, 5, 3], 5);
        let full = truncated_hosvd(&y, &MultilinearRank(vec![4, 5, 3])).unwrap();
        assert!(y.distance(&tucker_reconstruct(&full)).unwrap() <= 1e-10 * y.frobenius_norm());
        assert!((full.core().frobenius_norm() - y.frobenius_norm()).abs() <= 1e-9);
    }

    #[test]
    fn tsvd_per_mode_residual_is_tail_energy() {
        let x = DenseTensor::new(vec![6, 7, 5], gaussian_matrix(210, 1, RngSeed(9)).into_data()).unwrap();
        for n in 0..3 {
            let u = tsvd_factor(&x, n, 2).unwrap();
            let proj = mode_product(&x, &u.matmul_t(&u), n).unwrap();
            let res = x.distance(&proj).unwrap().powi(2);
            let eig = sym_eig(&unfold(&x, n).unwrap().gram()).unwrap();
            let tail: f64 = eig.values[2..].iter().sum();
            assert!((res - tail).abs() <= 1e-6 * tail);
        }
    }

    #[test]
    fn dispatch_matches_rbki() {
        let x = gaussian_tucker(&[12, 11, 10], &[3, 3, 3], 6);
        let rank = MultilinearRank::uniform(3, 2);
        let a = rbki_tucker(&x, &[4, 4, 4], &rank, 2, 1.0, RngSeed(1)).unwrap();
        let b = randomized_hosvd(&x, &[4, 4, 4], &rank, SketchMethod::Rbki, 2, RngSeed(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_mode_skips_sketching() {
        let x = gaussian_tucker(&[10, 9, 3], &[2, 2, 3], 7);
        let rank = MultilinearRank(vec![2, 2, 3]);
        let tf = rbki_tucker(&x, &[4, 4, 3], &rank, 2, 1.0, RngSeed(1)).unwrap();
        assert_eq!(tf.factors()[2], DenseMatrix::identity(3));
    }

    #[test]
    fn validation_errors() {
        let x = gaussian_tucker(&[6, 6, 6], &[2, 2, 2], 8);
        let rank = MultilinearRank::uniform(3, 3);
        assert!(matches!(
            rbki_tucker(&x, &[2, 3, 3], &rank, 2, 1.0, RngSeed(0)),
            Err(Error::RankExceedsSketch { mode: 0, .. })
        ));
        assert!(matches!(
            rbki_tucker(&x, &[7, 3, 3], &rank, 2, 1.0, RngSeed(0)),
            Err(Error::SketchTooLarge { mode: 0, .. })
        ));
        assert!(matches!(
            truncated_hosvd(&x, &MultilinearRank(vec![7, 1, 1])),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(rbki_tucker(&x, &[3, 3, 3], &rank, 2, 0.0, RngSeed(0)).is_err());
    }

    #[test]
    fn reconstruct_rank_one_outer_product() {
        let u = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![-1.0], vec![0.5], vec![3.0]]).unwrap();
        let w = DenseMatrix::from_rows(&[vec![2.0], vec![1.0]]).unwrap();
        let core = DenseTensor::new(vec![1, 1, 1], vec![1.5]).unwrap();
        let rec = multi_mode_product(&core, &[u.clone(), v.clone(), w.clone()]).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    let e = 1.5 * u.get(i, 0) * v.get(j, 0) * w.get(k, 0);
                    assert!((rec.get(&[i, j, k]) - e).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn identity_factors_reconstruct_core() {
        let x = gaussian_tucker(&[3, 4, 2], &[3, 4, 2], 9);
        let eyes = vec![DenseMatrix::identity(3), DenseMatrix::identity(4), DenseMatrix::identity(2)];
        let tf = TuckerFactors::new(x.clone(), eyes).unwrap();
        assert_eq!(tucker_reconstruct(&tf), x);
    }

    #[test]
    fn factors_must_be_orthonormal() {
        let core = DenseTensor::zeros(vec![1, 1]).unwrap();
        let bad = DenseMatrix::from_rows(&[vec![2.0], vec![0.0]]).unwrap();
        assert!(TuckerFactors::new(core, vec![bad.clone(), bad]).is_err());
    }

    #[test]
    fn sampled_rbki_still_recovers_exact_tucker() {
        let x = gaussian_tucker(&[15, 15, 15], &[3, 3, 3], 10);
        let rank = MultilinearRank::uniform(3, 3);
        let tf = rbki_tucker(&x, &[5, 5, 5], &rank, 2, 0.3, RngSeed(2)).unwrap();
        assert!(fit(&x, &tucker_reconstruct(&tf)) >= 99.99);
    }

    #[test]
    fn bound_report_with_lossless_sketch() {
        let x = DenseTensor::new(vec![6, 6, 6], gaussian_matrix(216, 1, RngSeed(11)).into_data()).unwrap();
        let rank = MultilinearRank::uniform(3, 2);
        let sk = sketched_tucker(&x, &[6, 6, 6], &rank, SketchMethod::Rbki, 0, 1.0, RngSeed(1)).unwrap();
        let rep = sketch_error_bounds_check(&x, &sk, &rank).unwrap();
        assert!(rep.alpha <= 1e-10 * x.frobenius_norm());
        assert!((rep.achieved - rep.beta).abs() <= 1e-10 * x.frobenius_norm());
        assert!(rep.holds());
    }

    #[test]
    fn default_sizes_are_capped() {
        let s = default_sketch_sizes(&[200, 8, 3], &MultilinearRank(vec![10, 5, 3]));
        assert_eq!(s, vec![15, 8, 3]);
        let s = default_sketch_sizes(&[30, 2], &MultilinearRank(vec![1, 1]));
        assert_eq!(s, vec![2, 2]);
    }
}
