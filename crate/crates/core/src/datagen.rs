//! Synthetic test tensors and SNR-controlled Gaussian noise.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_vec, RngSeed};
use crate::matrix::DenseMatrix;
use crate::tensor::{multi_mode_product, DenseTensor};
use crate::tring::{tr_reconstruct, TRFactors, TRRank};
use crate::tucker::MultilinearRank;

/// Additive noise at a target signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: RngSeed,
}

/// `G ×_0 U_0 … ×_{N-1} U_{N-1}` with i.i.d. standard normal core and factors.
/// The core is drawn first, then the factors in mode order, from one stream.
pub fn gaussian_tucker_tensor(dims: &[usize], rank: &MultilinearRank, seed: RngSeed) -> Result<DenseTensor> {
    rank.validate(dims)?;
    let mut rng = seed.rng();
    let core_len = rank.0.iter().product();
    let core = DenseTensor::new(rank.0.clone(), gaussian_vec(core_len, &mut rng))?;
    let factors = dims
        .iter()
        .zip(&rank.0)
        .map(|(&d, &r)| DenseMatrix::from_col_major(d, r, gaussian_vec(d * r, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    multi_mode_product(&core, &factors)
}

/// Which indices enter the power sum of the power-functional tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerSum {
    /// `(i_0^p + i_1^p + i_2^p)^(-1/p)`; further modes only replicate the
    /// 3-way values.
    #[default]
    LeadingThree,
    /// `(Σ_m i_m^p)^(-1/p)` over every mode.
    AllModes,
}

impl fmt::Display for PowerSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerSum::LeadingThree => "leading-three",
            PowerSum::AllModes => "all",
        })
    }
}

impl FromStr for PowerSum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leading-three" | "3" => Ok(PowerSum::LeadingThree),
            "all" => Ok(PowerSum::AllModes),
            _ => Err(Error::InvalidParameter {
                name: "p_modes",
                reason: format!("'{s}' is neither 'leading-three' nor 'all'"),
            }),
        }
    }
}

/// `x(i, j, k) = (i^p + j^p + k^p)^(-1/p)` with 1-based indices.
pub fn power_functional_tensor(dims: &[usize], p: f64) -> Result<DenseTensor> {
    power_functional_tensor_with(dims, p, PowerSum::LeadingThree)
}

pub fn power_functional_tensor_with(dims: &[usize], p: f64, sum: PowerSum) -> Result<DenseTensor> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("power {p} must be a finite value >= 1"),
        });
    }
    let used = match sum {
        PowerSum::LeadingThree => dims.len().min(3),
        PowerSum::AllModes => dims.len(),
    };
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        let s: f64 = idx[..used].iter().map(|&i| ((i + 1) as f64).powf(p)).sum();
        s.powf(-1.0 / p)
    })
}

/// Ring-structured tensor from Gaussian cores.
pub fn planted_ring_tensor(dims: &[usize], rank: &TRRank, seed: RngSeed) -> Result<DenseTensor> {
    Ok(tr_reconstruct(&TRFactors::random(dims, rank, seed)?))
}

/// Returns `x + λN` and `λ`, with `λ` solved from the realized noise norm so
/// the output hits `snr_db` exactly.
pub fn add_noise(x: &DenseTensor, spec: NoiseSpec) -> Result<(DenseTensor, f64)> {
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidParameter {
            name: "snr_db",
            reason: format!("{} is not finite", spec.snr_db),
        });
    }
    let nx = x.frobenius_norm();
    if nx == 0.0 {
        return Err(Error::ZeroInput("signal tensor"));
    }
    let mut rng = spec.seed.rng();
    let noise = gaussian_vec(x.len(), &mut rng);
    let nn = crate::matrix::norm2(&noise);
    let lambda = nx / (nn * 10f64.powf(spec.snr_db / 20.0));
    let data = x.data().iter().zip(&noise).map(|(a, b)| a + lambda * b).collect();
    Ok((DenseTensor::new(x.shape().to_vec(), data)?, lambda))
}

/// `20 log10(‖signal‖ / ‖noise‖)`.
pub fn snr_db(signal: &DenseTensor, noise: &DenseTensor) -> f64 {
    20.0 * (signal.frobenius_norm() / noise.frobenius_norm()).log10()
}
