//! Declarative experiment configuration (TOML) and its validation into a
//! fully resolved [`Plan`].

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rbki_core::datagen::PowerSum;
use rbki_core::io::read_tensor;
use rbki_core::metrics::MseKind;
use rbki_core::tring::AlsConfig;
use rbki_core::tucker::default_sketch_sizes;
use rbki_core::{DenseTensor, MultilinearRank, TRRank};
use serde::Deserialize;

use crate::BenchError;

/// Decomposition methods the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Method {
    /// Truncated HOSVD.
    Tsvd,
    /// Randomized HOSVD with a one-pass Gaussian range finder.
    GrSvd,
    /// Randomized HOSVD with subspace power iteration.
    GrpiSvd,
    /// Block Krylov sketched Tucker.
    RbkiTk,
    /// Tensor-ring ALS on the full tensor.
    TrAls,
    /// Tensor-ring ALS on a block Krylov Tucker compression.
    RbkiTkTr,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Tsvd,
        Method::GrSvd,
        Method::GrpiSvd,
        Method::RbkiTk,
        Method::TrAls,
        Method::RbkiTkTr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Tsvd => "T-SVD",
            Method::GrSvd => "GR-SVD",
            Method::GrpiSvd => "GRpi-SVD",
            Method::RbkiTk => "rBKI-TK",
            Method::TrAls => "TR-ALS",
            Method::RbkiTkTr => "rBKI-TK-TR",
        }
    }

    pub fn is_ring(self) -> bool {
        matches!(self, Method::TrAls | Method::RbkiTkTr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.label()).collect();
                format!("unknown method '{s}' (expected one of {})", known.join(", "))
            })
    }
}

impl TryFrom<String> for Method {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// A single value applied to every mode, or one value per mode.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum PerMode {
    All(usize),
    Each(Vec<usize>),
}

impl PerMode {
    fn resolve(&self, key: &str, order: usize) -> Result<Vec<usize>, BenchError> {
        match self {
            PerMode::All(v) => Ok(vec![*v; order]),
            PerMode::Each(v) if v.len() == order => Ok(v.clone()),
            PerMode::Each(v) => Err(reject(format!(
                "{key} has {} entries but the tensor has order {order}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianTucker,
    PowerFunctional,
    PlantedRing,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub methods: Vec<Method>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub family: Family,
    pub dims: Option<Vec<usize>>,
    /// Multilinear rank for `gaussian-tucker`, ring rank for `planted-ring`.
    pub rank: Option<PerMode>,
    pub p: Option<f64>,
    /// `leading-three` or `all`.
    pub p_modes: Option<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub snr_db: f64,
}

fn default_q() -> usize {
    2
}

fn default_omega() -> f64 {
    1.0
}

fn default_max_iter() -> usize {
    AlsConfig::default().max_iter
}

fn default_tol() -> f64 {
    AlsConfig::default().tol
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Target multilinear rank of the Tucker methods.
    pub rank: Option<PerMode>,
    /// Explicit sketch sizes; otherwise `R + ceil(1/gamma)` capped by the mode.
    pub sketch: Option<PerMode>,
    pub gamma: Option<f64>,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub tr_rank: Option<PerMode>,
    /// Tucker compression sizes of `rBKI-TK-TR`; default `min(5R, I)`.
    pub compress: Option<PerMode>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            rank: None,
            sketch: None,
            gamma: None,
            q: default_q(),
            omega: default_omega(),
            tr_rank: None,
            compress: None,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default)]
    pub psnr: bool,
    /// `unsquared` (default) or `squared`.
    pub mse: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub omegas: Option<Vec<f64>>,
}

/// Parsed configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Source of the clean tensor.
#[derive(Debug, Clone)]
pub enum DataPlan {
    GaussianTucker(MultilinearRank),
    PowerFunctional { p: f64, sum: PowerSum },
    PlantedRing(TRRank),
    File(DenseTensor),
}

/// A validated configuration with every default resolved.
#[derive(Debug, Clone)]
pub struct Plan {
    pub runs: usize,
    pub base_seed: u64,
    pub dims: Vec<usize>,
    pub data: DataPlan,
    pub snr_db: Option<f64>,
    pub methods: Vec<Method>,
    pub tucker_rank: Option<MultilinearRank>,
    pub sketch: Option<Vec<usize>>,
    pub q: usize,
    pub omega: f64,
    pub tr_rank: Option<TRRank>,
    pub compress: Option<Vec<usize>>,
    pub als: AlsConfig,
    pub psnr: Option<MseKind>,
    pub omegas: Vec<f64>,
    pub output: Option<PathBuf>,
    /// FNV-1a digest of the configuration text.
    pub digest: String,
}

/// Default sweep grid `0.1, 0.2, …, 1.0`.
pub fn default_omegas() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

fn reject(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

fn fnv1a(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn check_bounds(key: &str, values: &[usize], lower: &[usize], upper: &[usize]) -> Result<(), BenchError> {
    for (n, ((&v, &lo), &hi)) in values.iter().zip(lower).zip(upper).enumerate() {
        if v < lo || v > hi {
            return Err(reject(format!("{key}[{n}] = {v} must satisfy {lo} <= {key}[{n}] <= {hi}")));
        }
    }
    Ok(())
}

fn ratio_limits(dims: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    dims.iter().map(|&d| d.min(total / d)).collect()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| reject(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<(Self, String), BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| reject(format!("cannot read config {}: {e}", path.display())))?;
        Ok((Self::from_toml_str(&text)?, text))
    }

    /// Checks every constraint the configured commands depend on and
    /// resolves defaults. `text` feeds the digest only.
    pub fn plan(&self, text: &str) -> Result<Plan, BenchError> {
        let exp = &self.experiment;
        if exp.runs == 0 {
            return Err(reject("experiment.runs must be at least 1"));
        }
        let mut seen = HashSet::new();
        for m in &exp.methods {
            if !seen.insert(*m) {
                return Err(reject(format!("experiment.methods lists {m} twice")));
            }
        }

        let data_sec = &self.data;
        let (dims, data) = match data_sec.family {
            Family::File => {
                let path = data_sec
                    .path
                    .as_ref()
                    .ok_or_else(|| reject("data.path is required for family = \"file\""))?;
                let x = read_tensor(path).map_err(|e| reject(format!("data.path {}: {e}", path.display())))?;
                if let Some(d) = &data_sec.dims {
                    if d.as_slice() != x.shape() {
                        return Err(reject(format!(
                            "data.dims {d:?} disagrees with the file's shape {:?}",
                            x.shape()
                        )));
                    }
                }
                if x.frobenius_norm() == 0.0 {
                    return Err(reject("data.path holds an all-zero tensor"));
                }
                (x.shape().to_vec(), DataPlan::File(x))
            }
            family => {
                let dims = data_sec
                    .dims
                    .clone()
                    .ok_or_else(|| reject("data.dims is required for generated data"))?;
                if dims.is_empty() || dims.contains(&0) {
                    return Err(reject(format!("data.dims {dims:?} must be non-empty with positive entries")));
                }
                let plan = match family {
                    Family::GaussianTucker => {
                        let r = data_sec
                            .rank
                            .as_ref()
                            .ok_or_else(|| reject("data.rank is required for family = \"gaussian-tucker\""))?
                            .resolve("data.rank", dims.len())?;
                        check_bounds("data.rank", &r, &vec![1; dims.len()], &dims)?;
                        DataPlan::GaussianTucker(MultilinearRank(r))
                    }
                    Family::PowerFunctional => {
                        let p = data_sec
                            .p
                            .ok_or_else(|| reject("data.p is required for family = \"power-functional\""))?;
                        if !p.is_finite() || p < 1.0 {
                            return Err(reject(format!("data.p = {p} must be a finite value >= 1")));
                        }
                        let sum = match &data_sec.p_modes {
                            None => PowerSum::default(),
                            Some(s) => s.parse().map_err(|e: rbki_core::Error| reject(format!("data.p_modes: {e}")))?,
                        };
                        DataPlan::PowerFunctional { p, sum }
                    }
                    Family::PlantedRing => {
                        if dims.len() < 2 {
                            return Err(reject("family = \"planted-ring\" needs at least 2 modes"));
                        }
                        let r = data_sec
                            .rank
                            .as_ref()
                            .ok_or_else(|| reject("data.rank is required for family = \"planted-ring\""))?
                            .resolve("data.rank", dims.len())?;
                        if let Some(n) = r.iter().position(|&v| v == 0) {
                            return Err(reject(format!("data.rank[{n}] must be at least 1")));
                        }
                        DataPlan::PlantedRing(TRRank(r))
                    }
                    Family::File => unreachable!(),
                };
                (dims, plan)
            }
        };
        let order = dims.len();

        let snr_db = match &self.noise {
            Some(n) if !n.snr_db.is_finite() => {
                return Err(reject(format!("noise.snr_db = {} is not finite", n.snr_db)))
            }
            Some(n) => Some(n.snr_db),
            None => None,
        };

        let sol = &self.solver;
        if !(sol.omega > 0.0 && sol.omega <= 1.0) {
            return Err(reject(format!("solver.omega = {} must lie in (0, 1]", sol.omega)));
        }
        if sol.max_iter == 0 {
            return Err(reject("solver.max_iter must be at least 1"));
        }
        if !sol.tol.is_finite() || sol.tol < 0.0 {
            return Err(reject(format!("solver.tol = {} must be finite and non-negative", sol.tol)));
        }
        if sol.sketch.is_some() && sol.gamma.is_some() {
            return Err(reject("set at most one of solver.sketch and solver.gamma"));
        }

        let tucker_rank = match (&sol.rank, &data) {
            (Some(r), _) => Some(MultilinearRank(r.resolve("solver.rank", order)?)),
            (None, DataPlan::GaussianTucker(r)) => Some(r.clone()),
            (None, _) => None,
        };
        let limits = ratio_limits(&dims);
        let mut sketch = None;
        if let Some(rank) = &tucker_rank {
            check_bounds("solver.rank", &rank.0, &vec![1; order], &dims)?;
            let sizes = match (&sol.sketch, sol.gamma) {
                (Some(s), _) => s.resolve("solver.sketch", order)?,
                (None, Some(g)) => {
                    if !(g > 0.0 && g <= 1.0) {
                        return Err(reject(format!("solver.gamma = {g} must lie in (0, 1]")));
                    }
                    let extra = (1.0 / g - 1e-9).ceil() as usize;
                    rank.0.iter().zip(&limits).map(|(&r, &l)| (r + extra).min(l)).collect()
                }
                (None, None) => default_sketch_sizes(&dims, rank),
            };
            check_bounds("solver.sketch", &sizes, &rank.0, &limits)?;
            sketch = Some(sizes);
        }

        let tr_rank = match &sol.tr_rank {
            Some(r) => {
                if order < 2 {
                    return Err(reject("solver.tr_rank needs a tensor with at least 2 modes"));
                }
                let r = r.resolve("solver.tr_rank", order)?;
                if let Some(n) = r.iter().position(|&v| v == 0) {
                    return Err(reject(format!("solver.tr_rank[{n}] must be at least 1")));
                }
                Some(TRRank(r))
            }
            None => None,
        };
        let compress = match (&tr_rank, &sol.compress) {
            (Some(r), c) => {
                let sizes = match c {
                    Some(c) => c.resolve("solver.compress", order)?,
                    None => rbki_core::tring::default_compress_sizes(&dims, r),
                };
                check_bounds("solver.compress", &sizes, &vec![1; order], &limits)?;
                Some(sizes)
            }
            (None, Some(_)) => return Err(reject("solver.compress is set but solver.tr_rank is missing")),
            (None, None) => None,
        };

        for m in &exp.methods {
            if m.is_ring() && tr_rank.is_none() {
                return Err(reject(format!("method {m} requires solver.tr_rank")));
            }
            if !m.is_ring() && tucker_rank.is_none() {
                return Err(reject(format!(
                    "method {m} requires solver.rank (no default for this data family)"
                )));
            }
        }

        let psnr = if self.metrics.psnr {
            Some(match self.metrics.mse.as_deref() {
                None | Some("unsquared") => MseKind::Unsquared,
                Some("squared") => MseKind::Squared,
                Some(other) => {
                    return Err(reject(format!(
                        "metrics.mse = '{other}' must be 'unsquared' or 'squared'"
                    )))
                }
            })
        } else {
            if self.metrics.mse.is_some() {
                return Err(reject("metrics.mse is set but metrics.psnr is false"));
            }
            None
        };

        let omegas = self.sweep.omegas.clone().unwrap_or_else(default_omegas);
        if omegas.is_empty() {
            return Err(reject("sweep.omegas must not be empty"));
        }
        if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(reject(format!("sweep.omegas contains {w}, outside (0, 1]")));
        }

        Ok(Plan {
            runs: exp.runs,
            base_seed: exp.seed,
            dims,
            data,
            snr_db,
            methods: exp.methods.clone(),
            tucker_rank,
            sketch,
            q: sol.q,
            omega: sol.omega,
            tr_rank,
            compress,
            als: AlsConfig {
                max_iter: sol.max_iter,
                tol: sol.tol,
            },
            psnr,
            omegas,
            output: exp.output.clone(),
            digest: fnv1a(text),
        })
    }
}

/// Parses and validates configuration text in one step.
pub fn plan_from_str(text: &str) -> Result<Plan, BenchError> {
    ExperimentConfig::from_toml_str(text)?.plan(text)
}
