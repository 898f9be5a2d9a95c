//! Dense N-way tensors and the multilinear algebra the decompositions are
//! written against.
//!
//! Storage is first-index-fastest. Modes are 0-based throughout the API. The
//! mode-`n` unfolding follows the Kolda convention: entry `(i_n, j)` holds
//! `x(i_0, .., i_{N-1})` with
//!
//! ```text
//! j = Σ_{k≠n} i_k · J_k,   J_k = Π_{m<k, m≠n} I_m
//! ```
//!
//! so the remaining indices keep their relative order, lowest mode fastest.
//! Under this convention the Tucker model unfolds as
//! `X_(n) = U_n · G_(n) · (U_{N-1} ⊗ … ⊗ U_{n+1} ⊗ U_{n-1} ⊗ … ⊗ U_0)ᵀ`.

use crate::error::{Error, Result};
use crate::matrix::{gemm, norm2, DenseMatrix, MatMut, MatRef};

/// N-way dense array of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl std::fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DenseTensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "order must be at least 1".into(),
        });
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "every dimension must be positive".into(),
        });
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "element count overflows".into(),
        })
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(Error::DimensionMismatch {
                op: "DenseTensor::new",
                detail: format!("{} values for shape {:?}", data.len(), shape),
            });
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(DenseTensor {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Fills a tensor by evaluating `f` on every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        Ok(DenseTensor { shape, data })
    }

    /// Views a matrix as a 2-way tensor (the storage orders coincide).
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        Self::new(vec![m.rows(), m.cols()], m.data().to_vec())
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Linear offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.shape) {
            debug_assert!(i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    /// Element-wise `self - rhs`.
    pub fn sub(&self, rhs: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(rhs, "DenseTensor::sub", |a, b| a - b)
    }

    /// Element-wise `self + rhs`.
    pub fn add(&self, rhs: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(rhs, "DenseTensor::add", |a, b| a + b)
    }

    pub fn scaled(&self, s: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `‖self − rhs‖_F`.
    pub fn distance(&self, rhs: &DenseTensor) -> Result<f64> {
        self.ensure_same_shape(rhs, "DenseTensor::distance")?;
        let diff: Vec<f64> = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(norm2(&diff))
    }

    pub(crate) fn ensure_same_shape(&self, rhs: &DenseTensor, op: &'static str) -> Result<()> {
        if self.shape != rhs.shape {
            return Err(Error::DimensionMismatch {
                op,
                detail: format!("shapes {:?} and {:?}", self.shape, rhs.shape),
            });
        }
        Ok(())
    }

    fn zip_with(
        &self,
        rhs: &DenseTensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseTensor> {
        self.ensure_same_shape(rhs, op)?;
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode: n,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// `(Π_{p<n} I_p, I_n, Π_{p>n} I_p)`.
    pub(crate) fn split(&self, n: usize) -> (usize, usize, usize) {
        split_shape(&self.shape, n)
    }
}

pub(crate) fn split_shape(shape: &[usize], n: usize) -> (usize, usize, usize) {
    let before = shape[..n].iter().product();
    let after = shape[n + 1..].iter().product();
    (before, shape[n], after)
}

/// Mode-`n` unfolding, shape `I_n × Π_{p≠n} I_p`.
pub fn unfold(x: &DenseTensor, n: usize) -> Result<DenseMatrix> {
    x.check_mode(n)?;
    let (a, dim, b) = x.split(n);
    let cols = a * b;
    let mut out = vec![0.0; dim * cols];
    if a == 1 {
        out.copy_from_slice(&x.data);
    } else {
        for beta in 0..b {
            for i in 0..dim {
                let src = &x.data[a * (i + dim * beta)..a * (i + dim * beta) + a];
                for (alpha, &v) in src.iter().enumerate() {
                    out[i + dim * (alpha + a * beta)] = v;
                }
            }
        }
    }
    DenseMatrix::from_col_major(dim, cols, out)
}

/// Inverse of [`unfold`]: rebuilds a tensor of `shape` from its mode-`n`
/// unfolding.
pub fn fold(m: &DenseMatrix, n: usize, shape: &[usize]) -> Result<DenseTensor> {
    let len = check_shape(shape)?;
    if n >= shape.len() {
        return Err(Error::ModeOutOfRange {
            mode: n,
            order: shape.len(),
        });
    }
    let (a, dim, b) = split_shape(shape, n);
    if m.rows() != dim || m.cols() != a * b {
        return Err(Error::DimensionMismatch {
            op: "fold",
            detail: format!(
                "{}x{} matrix cannot fold along mode {n} into {:?}",
                m.rows(),
                m.cols(),
                shape
            ),
        });
    }
    let src = m.data();
    let mut data = vec![0.0; len];
    if a == 1 {
        data.copy_from_slice(src);
    } else {
        for beta in 0..b {
            for i in 0..dim {
                let dst = &mut data[a * (i + dim * beta)..a * (i + dim * beta) + a];
                for (alpha, v) in dst.iter_mut().enumerate() {
                    *v = src[i + dim * (alpha + a * beta)];
                }
            }
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}

/// Mode-`n` product `x ×_n u`: replaces `I_n` by `u.rows()`.
pub fn mode_product(x: &DenseTensor, u: &DenseMatrix, n: usize) -> Result<DenseTensor> {
    x.check_mode(n)?;
    if u.cols() != x.shape[n] {
        return Err(Error::DimensionMismatch {
            op: "mode_product",
            detail: format!(
                "factor has {} columns but mode {n} has size {}",
                u.cols(),
                x.shape[n]
            ),
        });
    }
    let (a, dim, b) = x.split(n);
    let new_dim = u.rows();
    let mut shape = x.shape.clone();
    shape[n] = new_dim;
    let mut out = vec![0.0; a * new_dim * b];
    if a == 1 {
        // result(j, β) = Σ_i u(j, i) x(i, β): a single product.
        gemm(
            1.0,
            u.view(),
            MatRef::col_major(&x.data, dim, b),
            0.0,
            MatMut::col_major(&mut out, new_dim, b),
        );
    } else {
        // Each β-slice is an a×I_n matrix multiplied on the right by uᵀ.
        let ut = u.view().t();
        for beta in 0..b {
            let src = &x.data[a * dim * beta..a * dim * (beta + 1)];
            let dst = &mut out[a * new_dim * beta..a * new_dim * (beta + 1)];
            gemm(
                1.0,
                MatRef::col_major(src, a, dim),
                ut,
                0.0,
                MatMut::col_major(dst, a, new_dim),
            );
        }
    }
    DenseTensor::new(shape, out)
}

/// `g ×_0 U_0 ×_1 U_1 … ×_{N-1} U_{N-1}`, applied in ascending mode order.
pub fn multi_mode_product(g: &DenseTensor, factors: &[DenseMatrix]) -> Result<DenseTensor> {
    if factors.len() != g.order() {
        return Err(Error::DimensionMismatch {
            op: "multi_mode_product",
            detail: format!("{} factors for an order-{} tensor", factors.len(), g.order()),
        });
    }
    for (n, u) in factors.iter().enumerate() {
        if u.cols() != g.shape[n] {
            return Err(Error::DimensionMismatch {
                op: "multi_mode_product",
                detail: format!(
                    "factor {n} has {} columns but mode {n} has size {}",
                    u.cols(),
                    g.shape[n]
                ),
            });
        }
    }
    let mut out = g.clone();
    for (n, u) in factors.iter().enumerate() {
        out = mode_product(&out, u, n)?;
    }
    Ok(out)
}

/// `x ×_0 U_0ᵀ … ×_{N-1} U_{N-1}ᵀ`: projects onto the factor subspaces.
pub fn multi_mode_project(x: &DenseTensor, factors: &[DenseMatrix]) -> Result<DenseTensor> {
    let transposed: Vec<DenseMatrix> = factors.iter().map(DenseMatrix::transpose).collect();
    multi_mode_product(x, &transposed)
}

pub fn frobenius_norm(x: &DenseTensor) -> f64 {
    norm2(&x.data)
}

/// `X_(n) · y` for `y` of shape `Π_{p≠n} I_p × k`, without materializing the
/// unfolding.
pub(crate) fn unfolding_mul(x: &DenseTensor, n: usize, y: &DenseMatrix) -> DenseMatrix {
    let (a, dim, b) = x.split(n);
    assert_eq!(y.rows(), a * b, "unfolding_mul row mismatch");
    let k = y.cols();
    let mut out = DenseMatrix::zeros(dim, k);
    if a == 1 {
        gemm(
            1.0,
            MatRef::col_major(&x.data, dim, b),
            y.view(),
            0.0,
            MatMut::col_major(out.data_mut(), dim, k),
        );
        return out;
    }
    let yd = y.data();
    for beta in 0..b {
        let slice = MatRef::col_major(&x.data[a * dim * beta..a * dim * (beta + 1)], a, dim);
        // rows a·β .. a·β+a of y
        let yblock = MatRef {
            data: &yd[a * beta..],
            rows: a,
            cols: k,
            rs: 1,
            cs: a * b,
        };
        gemm(
            1.0,
            slice.t(),
            yblock,
            1.0,
            MatMut::col_major(out.data_mut(), dim, k),
        );
    }
    out
}

/// `X_(n)ᵀ · v` for `v` of shape `I_n × k`, without materializing the
/// unfolding.
pub(crate) fn unfolding_t_mul(x: &DenseTensor, n: usize, v: &DenseMatrix) -> DenseMatrix {
    let (a, dim, b) = x.split(n);
    assert_eq!(v.rows(), dim, "unfolding_t_mul row mismatch");
    let k = v.cols();
    let m = a * b;
    let mut out = DenseMatrix::zeros(m, k);
    if a == 1 {
        gemm(
            1.0,
            MatRef::col_major(&x.data, dim, b).t(),
            v.view(),
            0.0,
            MatMut::col_major(out.data_mut(), m, k),
        );
        return out;
    }
    let od = out.data_mut();
    for beta in 0..b {
        let slice = MatRef::col_major(&x.data[a * dim * beta..a * dim * (beta + 1)], a, dim);
        let dst = MatMut {
            data: &mut od[a * beta..],
            rows: a,
            cols: k,
            rs: 1,
            cs: m,
        };
        gemm(1.0, slice, v.view(), 0.0, dst);
    }
    out
}

/// `X_(n) X_(n)ᵀ` accumulated slice by slice.
pub(crate) fn unfolding_gram(x: &DenseTensor, n: usize) -> DenseMatrix {
    let (a, dim, b) = x.split(n);
    let mut g = DenseMatrix::zeros(dim, dim);
    if a == 1 {
        let m = MatRef::col_major(&x.data, dim, b);
        gemm(1.0, m, m.t(), 0.0, MatMut::col_major(g.data_mut(), dim, dim));
    } else {
        for beta in 0..b {
            let slice = MatRef::col_major(&x.data[a * dim * beta..a * dim * (beta + 1)], a, dim);
            gemm(1.0, slice.t(), slice, 1.0, MatMut::col_major(g.data_mut(), dim, dim));
        }
    }
    g.symmetrize();
    g
}

/// Selected columns of the mode-`n` unfolding, in the order given.
pub(crate) fn unfolding_columns(x: &DenseTensor, n: usize, idx: &[usize]) -> DenseMatrix {
    let (a, dim, _) = x.split(n);
    let mut out = Vec::with_capacity(dim * idx.len());
    for &j in idx {
        let (alpha, beta) = (j % a, j / a);
        let base = alpha + a * dim * beta;
        out.extend((0..dim).map(|i| x.data[base + a * i]));
    }
    DenseMatrix::from_col_major(dim, idx.len(), out).expect("sizes match")
}
