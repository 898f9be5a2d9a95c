//! Orthonormal range finders for tensor unfoldings: randomized block Krylov
//! iteration, the one-pass Gaussian range finder and subspace power
//! iteration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, qr_basis_with_tol, sample_columns, singular_values, RngSeed};
use crate::matrix::DenseMatrix;
use crate::tensor::{unfolding_mul, unfolding_t_mul, DenseTensor};

const OMEGA_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

/// Range-finding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchMethod {
    /// Block Krylov: basis of `[W, (AAᵀ)W, …, (AAᵀ)^q W]`.
    Rbki,
    /// One pass: basis of `W = AΩ`.
    Rrf,
    /// Basis of `(AAᵀ)^q W`, re-orthonormalized after every product.
    PowerIteration,
}

impl SketchMethod {
    pub const ALL: [SketchMethod; 3] = [SketchMethod::Rrf, SketchMethod::PowerIteration, SketchMethod::Rbki];

    pub fn label(self) -> &'static str {
        match self {
            SketchMethod::Rbki => "rbki",
            SketchMethod::Rrf => "rrf",
            SketchMethod::PowerIteration => "power",
        }
    }
}

impl fmt::Display for SketchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SketchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbki" | "bk-iter" => Ok(SketchMethod::Rbki),
            "rrf" | "non-iter" => Ok(SketchMethod::Rrf),
            "power" | "p-iter" => Ok(SketchMethod::PowerIteration),
            _ => Err(Error::InvalidParameter {
                name: "method",
                reason: format!("unknown sketch method '{s}'"),
            }),
        }
    }
}

/// Parameters shared by every range finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConfig {
    pub sketch_size: usize,
    /// Number of Krylov/power steps `q`.
    pub krylov_depth: usize,
    /// Fraction of columns kept, in `(0, 1]`.
    pub sampling_rate: f64,
    pub seed: RngSeed,
}

impl SketchConfig {
    pub const DEFAULT_DEPTH: usize = 2;

    pub fn new(sketch_size: usize, seed: RngSeed) -> Self {
        SketchConfig {
            sketch_size,
            krylov_depth: Self::DEFAULT_DEPTH,
            sampling_rate: 1.0,
            seed,
        }
    }

    pub fn with_depth(mut self, q: usize) -> Self {
        self.krylov_depth = q;
        self
    }

    pub fn with_rate(mut self, omega: f64) -> Self {
        self.sampling_rate = omega;
        self
    }

    pub(crate) fn validate(&self, mode: usize, rows: usize, cols: usize) -> Result<()> {
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "sampling_rate",
                reason: format!("{} is outside (0, 1]", self.sampling_rate),
            });
        }
        if self.sketch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "sketch_size",
                reason: "must be positive".into(),
            });
        }
        let limit = rows.min(cols);
        if self.sketch_size > limit {
            return Err(Error::SketchTooLarge {
                mode,
                sketch: self.sketch_size,
                limit,
            });
        }
        Ok(())
    }
}

/// Linear operator view of an unfolding; lets the tensor solvers avoid
/// materializing `X_(n)`.
pub(crate) trait Unfolding {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `A · y`.
    fn mul(&self, y: &DenseMatrix) -> DenseMatrix;
    /// `Aᵀ · v`.
    fn t_mul(&self, v: &DenseMatrix) -> DenseMatrix;
    /// `A Aᵀ`.
    fn gram(&self) -> DenseMatrix;
    fn is_zero(&self) -> bool;
}

impl Unfolding for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }
    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }
    fn mul(&self, y: &DenseMatrix) -> DenseMatrix {
        self.matmul(y)
    }
    fn t_mul(&self, v: &DenseMatrix) -> DenseMatrix {
        self.t_matmul(v)
    }
    fn gram(&self) -> DenseMatrix {
        DenseMatrix::gram(self)
    }
    fn is_zero(&self) -> bool {
        self.data().iter().all(|&v| v == 0.0)
    }
}

/// Mode-`n` unfolding of a tensor, never materialized.
pub(crate) struct ModeView<'a> {
    pub x: &'a DenseTensor,
    pub n: usize,
}

impl Unfolding for ModeView<'_> {
    fn rows(&self) -> usize {
        self.x.shape()[self.n]
    }
    fn cols(&self) -> usize {
        self.x.len() / self.rows()
    }
    fn mul(&self, y: &DenseMatrix) -> DenseMatrix {
        unfolding_mul(self.x, self.n, y)
    }
    fn t_mul(&self, v: &DenseMatrix) -> DenseMatrix {
        unfolding_t_mul(self.x, self.n, v)
    }
    fn gram(&self) -> DenseMatrix {
        crate::tensor::unfolding_gram(self.x, self.n)
    }
    fn is_zero(&self) -> bool {
        self.x.data().iter().all(|&v| v == 0.0)
    }
}

/// A basis plus, when it came for free, `Qᵀ A Aᵀ Q`.
pub(crate) struct Sketch {
    pub basis: DenseMatrix,
    pub projected_gram: Option<DenseMatrix>,
}

/// Removes the span of `q` from `b` (classical Gram–Schmidt, one pass).
fn project_out(q: &DenseMatrix, b: &mut DenseMatrix) {
    if q.cols() == 0 || b.cols() == 0 {
        return;
    }
    let c = q.t_matmul(b);
    let qc = q.matmul(&c);
    for (x, y) in b.data_mut().iter_mut().zip(qc.data()) {
        *x -= y;
    }
}

/// Orthonormal columns spanning the part of `next` outside `range(q)`.
fn new_directions(q: &DenseMatrix, next: DenseMatrix) -> DenseMatrix {
    let scale = next.frobenius_norm();
    let mut b = next;
    project_out(q, &mut b);
    project_out(q, &mut b);
    let mut v = qr_basis_with_tol(&b, 1e-12 * scale);
    if v.cols() == 0 {
        return v;
    }
    // The triangular solve inside QR can amplify the leftover overlap with
    // `q` on ill-conditioned blocks; one more pass restores it.
    project_out(q, &mut v);
    qr_basis_with_tol(&v, 0.1)
}

/// Whether forming `AAᵀ` once is cheaper than `2q` products with `A`.
fn use_gram_route(rows: usize, size: usize, q: usize) -> bool {
    q > 0 && rows <= size * (2 * q + 1)
}

pub(crate) fn range_basis<A: Unfolding>(
    a: &A,
    method: SketchMethod,
    size: usize,
    q: usize,
    seed: RngSeed,
) -> Result<Sketch> {
    let depth = if method == SketchMethod::Rrf { 0 } else { q };
    range_basis_routed(a, method, size, q, seed, use_gram_route(a.rows(), size, depth))
}

fn range_basis_routed<A: Unfolding>(
    a: &A,
    method: SketchMethod,
    size: usize,
    q: usize,
    seed: RngSeed,
    via_gram: bool,
) -> Result<Sketch> {
    if a.is_zero() {
        return Err(Error::ZeroInput("unfolding"));
    }
    let rows = a.rows();
    let omega = gaussian_matrix(a.cols(), size, seed.derive(OMEGA_STREAM));
    let w = a.mul(&omega);
    drop(omega);
    let first = qr_basis_with_tol(&w, 1e-12 * w.frobenius_norm());
    let depth = if method == SketchMethod::Rrf { 0 } else { q };
    let gram = if via_gram && depth > 0 {
        Some(a.gram())
    } else {
        None
    };
    let apply = |v: &DenseMatrix, t_cache: &mut Option<DenseMatrix>| -> DenseMatrix {
        match &gram {
            Some(g) => g.matmul(v),
            None => {
                let t = a.t_mul(v);
                let out = a.mul(&t);
                *t_cache = Some(t);
                out
            }
        }
    };

    match method {
        SketchMethod::Rrf | SketchMethod::PowerIteration => {
            let mut v = first;
            for _ in 0..depth {
                if v.cols() == 0 {
                    break;
                }
                let next = apply(&v, &mut None);
                v = qr_basis_with_tol(&next, 1e-12 * next.frobenius_norm());
            }
            let projected_gram = gram.map(|g| v.t_matmul(&g.matmul(&v)));
            Ok(Sketch {
                basis: v,
                projected_gram,
            })
        }
        SketchMethod::Rbki => {
            let mut blocks = vec![first];
            let mut transposed: Vec<DenseMatrix> = Vec::new();
            let mut q_acc = blocks[0].clone();
            for _ in 0..depth {
                let last = blocks.last().expect("first block present");
                if last.cols() == 0 || q_acc.cols() >= rows {
                    break;
                }
                let mut t = None;
                let next = apply(last, &mut t);
                if let Some(t) = t {
                    transposed.push(t);
                }
                let v = new_directions(&q_acc, next);
                if v.cols() == 0 {
                    break;
                }
                q_acc = DenseMatrix::hcat(&[&q_acc, &v]);
                blocks.push(v);
            }
            let projected_gram = match gram {
                Some(g) => Some(q_acc.t_matmul(&g.matmul(&q_acc))),
                None => {
                    // Aᵀ of every accepted block was formed on the way except
                    // for the blocks after the last product.
                    for b in &blocks[transposed.len()..] {
                        transposed.push(a.t_mul(b));
                    }
                    let refs: Vec<&DenseMatrix> = transposed.iter().collect();
                    let y = DenseMatrix::hcat(&refs);
                    let mut z = y.t_matmul(&y);
                    z.symmetrize();
                    Some(z)
                }
            };
            Ok(Sketch {
                basis: q_acc,
                projected_gram,
            })
        }
    }
}

fn basis_for(x_unf: &DenseMatrix, cfg: &SketchConfig, method: SketchMethod) -> Result<DenseMatrix> {
    cfg.validate(0, x_unf.rows(), x_unf.cols())?;
    let sampled;
    let a = if cfg.sampling_rate < 1.0 {
        sampled = sample_columns(x_unf, cfg.sampling_rate, cfg.seed.derive(SAMPLE_STREAM))?;
        &sampled
    } else {
        x_unf
    };
    Ok(range_basis(a, method, cfg.sketch_size, cfg.krylov_depth, cfg.seed)?.basis)
}

pub(crate) fn sampling_seed(seed: RngSeed) -> RngSeed {
    seed.derive(SAMPLE_STREAM)
}

/// Block Krylov range finder. Returns at most
/// `min(rows, sketch_size · (q + 1))` orthonormal columns.
pub fn rbki_basis(x_unf: &DenseMatrix, cfg: &SketchConfig) -> Result<DenseMatrix> {
    basis_for(x_unf, cfg, SketchMethod::Rbki)
}

/// Gaussian range finder: `qr(AΩ)`, i.e. block Krylov with `q = 0`.
pub fn rrf_basis(x_unf: &DenseMatrix, cfg: &SketchConfig) -> Result<DenseMatrix> {
    basis_for(x_unf, cfg, SketchMethod::Rrf)
}

/// Subspace power iteration: basis of `(AAᵀ)^q AΩ`.
pub fn power_iter_basis(x_unf: &DenseMatrix, cfg: &SketchConfig) -> Result<DenseMatrix> {
    basis_for(x_unf, cfg, SketchMethod::PowerIteration)
}

pub fn basis(x_unf: &DenseMatrix, cfg: &SketchConfig, method: SketchMethod) -> Result<DenseMatrix> {
    basis_for(x_unf, cfg, method)
}

/// Singular values of `Qᵀ X` for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub method: String,
    /// Non-increasing.
    pub values: Vec<f64>,
}

impl SpectrumRow {
    /// `Σ_{i ≥ rank} σ_i²`.
    pub fn tail_mass(&self, rank: usize) -> f64 {
        self.values.iter().skip(rank).map(|s| s * s).sum()
    }
}

/// Spectra of `Qᵀ X` for every method at Krylov depth `q`.
pub fn tail_spectrum_report(x_unf: &DenseMatrix, q: usize, cfg: &SketchConfig) -> Result<Vec<SpectrumRow>> {
    let cfg = cfg.with_depth(q);
    SketchMethod::ALL
        .iter()
        .map(|&m| {
            let qb = basis_for(x_unf, &cfg, m)?;
            Ok(SpectrumRow {
                method: m.label().to_string(),
                values: singular_values(&qb.t_matmul(x_unf)),
            })
        })
        .collect()
}

/// Writes `method,index,singular_value` rows (1-based index).
pub fn write_spectrum_csv(rows: &[SpectrumRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "method,index,singular_value")?;
    for row in rows {
        for (i, s) in row.values.iter().enumerate() {
            writeln!(out, "{},{},{:.17e}", row.method, i + 1, s)?;
        }
    }
    Ok(())
}
