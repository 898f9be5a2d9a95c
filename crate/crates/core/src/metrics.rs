//! Accuracy metrics: fit percentage, error relative to the truncated-HOSVD
//! optimum, and PSNR.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// `(1 − ‖x − x̂‖_F / ‖x‖_F) · 100`. Negative when `x̂` is farther from `x`
/// than zero is.
pub fn fit(x: &DenseTensor, xhat: &DenseTensor) -> Result<f64> {
    let nx = x.frobenius_norm();
    if nx == 0.0 {
        return Err(Error::ZeroInput("reference tensor"));
    }
    Ok((1.0 - x.distance(xhat)? / nx) * 100.0)
}

/// `‖x − x̂‖_F / ‖x − x_opt‖_F`; 1 means as good as the reference optimum.
pub fn rerr(x: &DenseTensor, xhat: &DenseTensor, x_opt: &DenseTensor) -> Result<f64> {
    let den = x.distance(x_opt)?;
    if den < 1e-14 * x.frobenius_norm() || den == 0.0 {
        return Err(Error::ExactReference);
    }
    Ok(x.distance(xhat)? / den)
}

/// How the mean-square error is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MseKind {
    /// `‖x − x̂‖_F / num(x)`: the unsquared norm over the element count.
    #[default]
    Unsquared,
    /// `‖x − x̂‖²_F / num(x)`: the conventional definition.
    Squared,
}

pub fn mse(x: &DenseTensor, xhat: &DenseTensor, kind: MseKind) -> Result<f64> {
    let d = x.distance(xhat)?;
    let num = x.len() as f64;
    Ok(match kind {
        MseKind::Unsquared => d / num,
        MseKind::Squared => d * d / num,
    })
}

/// Peak signal-to-noise ratio, or the marker for identical inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Exact,
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Exact => None,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v}"),
            Psnr::Exact => f.write_str("exact"),
        }
    }
}

/// `10 log10(255² / MSE)` for an MSE value.
pub fn psnr_from_mse(mse: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::Exact
    } else {
        Psnr::Db(10.0 * (255.0f64 * 255.0 / mse).log10())
    }
}

/// PSNR of `xhat` against `x` with 8-bit peak 255.
pub fn psnr(x: &DenseTensor, xhat: &DenseTensor, kind: MseKind) -> Result<Psnr> {
    Ok(psnr_from_mse(mse(x, xhat, kind)?))
}

/// One method's scores on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub run_id: usize,
    pub method: String,
    pub dims: Vec<usize>,
    pub rank: Vec<usize>,
    pub sketch: Vec<usize>,
    pub q: Option<usize>,
    pub omega: Option<f64>,
    pub snr_db: Option<f64>,
    pub fit_percent: f64,
    pub rerr: Option<f64>,
    pub psnr_db: Option<Psnr>,
    pub mse: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
    pub config_digest: String,
}

pub const CSV_HEADER: &str = "run_id,method,N,dims,rank,sketch,q,omega,snr_db,fit,rerr,psnr,time_s,seed";

pub(crate) fn join_dims(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

impl MetricsReport {
    /// CSV fields in [`CSV_HEADER`] order; the timing field is last but one.
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.run_id.to_string(),
            self.method.clone(),
            self.dims.len().to_string(),
            join_dims(&self.dims),
            join_dims(&self.rank),
            join_dims(&self.sketch),
            opt(&self.q),
            opt(&self.omega),
            opt(&self.snr_db),
            self.fit_percent.to_string(),
            opt(&self.rerr),
            opt(&self.psnr_db),
            format!("{:.6}", self.wall_time_s),
            self.seed.to_string(),
        ]
    }

    pub fn csv_row(&self) -> String {
        self.csv_fields().join(",")
    }
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
