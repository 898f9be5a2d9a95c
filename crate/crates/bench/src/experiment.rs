//! Monte Carlo experiment runner, spectrum study and sampling-rate sweep.

use std::io::Write;
use std::time::Instant;

use rbki_core::datagen::{add_noise, gaussian_tucker_tensor, planted_ring_tensor, power_functional_tensor_with, NoiseSpec};
use rbki_core::linalg::singular_values;
use rbki_core::metrics::{fit, mean_std, psnr, rerr, MetricsReport, Psnr, CSV_HEADER};
use rbki_core::sketch::{tail_spectrum_report, SpectrumRow};
use rbki_core::tensor::unfold;
use rbki_core::tring::{rbki_tk_tr_detailed, tr_als_detailed, tr_reconstruct};
use rbki_core::tucker::{randomized_hosvd, rbki_tucker, truncated_hosvd, tucker_reconstruct};
use rbki_core::{DenseTensor, RngSeed, SketchConfig, SketchMethod};

use crate::config::{DataPlan, Method, Plan};
use crate::BenchError;

const DATA_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const METHOD_STREAM: u64 = 2;

/// Seeds used by one Monte Carlo repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    /// `base_seed + run index`.
    pub run: u64,
    pub data: RngSeed,
    pub noise: RngSeed,
    /// Shared by every method of the run.
    pub method: RngSeed,
}

impl RunSeeds {
    pub fn new(base: u64, run: usize) -> Self {
        let s = RngSeed(base.wrapping_add(run as u64));
        RunSeeds {
            run: s.0,
            data: s.derive(DATA_STREAM),
            noise: s.derive(NOISE_STREAM),
            method: s.derive(METHOD_STREAM),
        }
    }
}

/// One method on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub report: MetricsReport,
    pub seeds: RunSeeds,
}

/// Mean and sample standard deviation of one method over all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub fit: (f64, f64),
    pub rerr: Option<(f64, f64)>,
    pub psnr: Option<(f64, f64)>,
    pub time_s: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Wall-clock time of the whole experiment, data generation included.
    pub total_time_s: f64,
}

impl ExperimentOutcome {
    pub fn aggregate(&self, m: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == m)
    }
}

/// Clean and observed tensors of one run.
pub fn generate(plan: &Plan, seeds: &RunSeeds) -> Result<(DenseTensor, DenseTensor), BenchError> {
    let clean = match &plan.data {
        DataPlan::GaussianTucker(r) => gaussian_tucker_tensor(&plan.dims, r, seeds.data)?,
        DataPlan::PowerFunctional { p, sum } => power_functional_tensor_with(&plan.dims, *p, *sum)?,
        DataPlan::PlantedRing(r) => planted_ring_tensor(&plan.dims, r, seeds.data)?,
        DataPlan::File(x) => x.clone(),
    };
    let noisy = match plan.snr_db {
        Some(snr_db) => add_noise(&clean, NoiseSpec { snr_db, seed: seeds.noise })?.0,
        None => clean.clone(),
    };
    Ok((clean, noisy))
}

fn timed<T>(f: impl FnOnce() -> Result<T, rbki_core::Error>) -> Result<(T, f64), BenchError> {
    let t = Instant::now();
    let out = f()?;
    Ok((out, t.elapsed().as_secs_f64()))
}

struct Solved {
    approx: DenseTensor,
    time_s: f64,
    rank: Vec<usize>,
    sketch: Vec<usize>,
    q: Option<usize>,
    omega: Option<f64>,
}

fn solve(plan: &Plan, m: Method, x: &DenseTensor, seed: RngSeed) -> Result<Solved, BenchError> {
    let tucker = || plan.tucker_rank.clone().expect("validated");
    let sketch = || plan.sketch.clone().expect("validated");
    let ring = || plan.tr_rank.clone().expect("validated");
    let q = plan.q;
    let solved = match m {
        Method::Tsvd => {
            let r = tucker();
            let (tf, t) = timed(|| truncated_hosvd(x, &r))?;
            (tucker_reconstruct(&tf), t, r.0, vec![], None, None)
        }
        Method::GrSvd | Method::GrpiSvd | Method::RbkiTk => {
            let (r, s) = (tucker(), sketch());
            let (tf, t, q_used, omega) = match m {
                Method::GrSvd => {
                    let (tf, t) = timed(|| randomized_hosvd(x, &s, &r, SketchMethod::Rrf, 0, seed))?;
                    (tf, t, 0, None)
                }
                Method::GrpiSvd => {
                    let (tf, t) = timed(|| randomized_hosvd(x, &s, &r, SketchMethod::PowerIteration, q, seed))?;
                    (tf, t, q, None)
                }
                _ => {
                    let (tf, t) = timed(|| rbki_tucker(x, &s, &r, q, plan.omega, seed))?;
                    (tf, t, q, Some(plan.omega))
                }
            };
            (tucker_reconstruct(&tf), t, r.0, s, Some(q_used), omega)
        }
        Method::TrAls => {
            let r = ring();
            let (out, t) = timed(|| tr_als_detailed(x, &r, plan.als, seed))?;
            (tr_reconstruct(&out.factors), t, r.0, vec![], None, None)
        }
        Method::RbkiTkTr => {
            let (r, c) = (ring(), plan.compress.clone().expect("validated"));
            let (out, t) = timed(|| rbki_tk_tr_detailed(x, &c, &r, q, plan.omega, plan.als, seed))?;
            (tr_reconstruct(&out.factors), t, r.0, c, Some(q), Some(plan.omega))
        }
    };
    let (approx, time_s, rank, sketch, q, omega) = solved;
    Ok(Solved {
        approx,
        time_s,
        rank,
        sketch,
        q,
        omega,
    })
}

/// Runs every configured method on every repetition. Fit is scored against
/// the clean tensor and RErr against truncated HOSVD of the observed tensor.
pub fn run_experiment(plan: &Plan) -> Result<ExperimentOutcome, BenchError> {
    if plan.methods.is_empty() {
        return Err(BenchError::Config("experiment.methods must list at least one method".into()));
    }
    let start = Instant::now();
    let mut records = Vec::with_capacity(plan.runs * plan.methods.len());
    for run in 0..plan.runs {
        let seeds = RunSeeds::new(plan.base_seed, run);
        let (clean, noisy) = generate(plan, &seeds)?;
        let mut solved: Vec<(Method, Solved)> = Vec::with_capacity(plan.methods.len());
        for &m in &plan.methods {
            solved.push((m, solve(plan, m, &noisy, seeds.method)?));
        }
        let reference = match (&plan.tucker_rank, solved.iter().find(|(m, _)| *m == Method::Tsvd)) {
            (_, Some((_, s))) => Some(s.approx.clone()),
            (Some(r), None) => Some(tucker_reconstruct(&truncated_hosvd(&noisy, r)?)),
            (None, None) => None,
        };
        for (m, s) in solved {
            let rerr_v = match &reference {
                Some(opt) => match rerr(&clean, &s.approx, opt) {
                    Ok(v) => Some(v),
                    Err(rbki_core::Error::ExactReference) => None,
                    Err(e) => return Err(e.into()),
                },
                None => None,
            };
            let psnr_v = match plan.psnr {
                Some(kind) => Some(psnr(&clean, &s.approx, kind)?),
                None => None,
            };
            records.push(RunRecord {
                report: MetricsReport {
                    run_id: run,
                    method: m.label().to_string(),
                    dims: plan.dims.clone(),
                    rank: s.rank,
                    sketch: s.sketch,
                    q: s.q,
                    omega: s.omega,
                    snr_db: plan.snr_db,
                    fit_percent: fit(&clean, &s.approx)?,
                    rerr: rerr_v,
                    psnr_db: psnr_v,
                    mse: None,
                    wall_time_s: s.time_s,
                    seed: seeds.run,
                    config_digest: plan.digest.clone(),
                },
                seeds,
            });
        }
    }
    let aggregates = plan.methods.iter().map(|&m| aggregate(m, &records)).collect();
    Ok(ExperimentOutcome {
        records,
        aggregates,
        total_time_s: start.elapsed().as_secs_f64(),
    })
}

fn all_some(values: impl Iterator<Item = Option<f64>>) -> Option<Vec<f64>> {
    values.collect()
}

fn aggregate(m: Method, records: &[RunRecord]) -> Aggregate {
    let rows: Vec<&MetricsReport> = records
        .iter()
        .map(|r| &r.report)
        .filter(|r| r.method == m.label())
        .collect();
    let col = |f: &dyn Fn(&MetricsReport) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
    Aggregate {
        method: m,
        fit: col(&|r| r.fit_percent),
        rerr: all_some(rows.iter().map(|r| r.rerr)).map(|v| mean_std(&v)),
        psnr: all_some(rows.iter().map(|r| r.psnr_db.and_then(Psnr::db))).map(|v| mean_std(&v)),
        time_s: col(&|r| r.wall_time_s),
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Per-run rows followed by one `mean` and one `std` row per method.
pub fn write_experiment_csv(outcome: &ExperimentOutcome, plan: &Plan, mut out: impl Write) -> Result<(), BenchError> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &outcome.records {
        writeln!(out, "{}", r.report.csv_row())?;
    }
    for a in &outcome.aggregates {
        let Some(template) = outcome.records.iter().find(|r| r.report.method == a.method.label()) else {
            continue;
        };
        for (label, pick) in [("mean", 0usize), ("std", 1)] {
            let get = |p: (f64, f64)| if pick == 0 { p.0 } else { p.1 };
            let mut fields = template.report.csv_fields();
            fields[0] = label.to_string();
            fields[9] = get(a.fit).to_string();
            fields[10] = opt_field(a.rerr.map(get));
            fields[11] = opt_field(a.psnr.map(get));
            fields[12] = format!("{:.6}", get(a.time_s));
            fields[13] = plan.base_seed.to_string();
            writeln!(out, "{}", fields.join(","))?;
        }
    }
    Ok(())
}

/// Spectra of one run: clean and observed unfoldings plus each sketch.
#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub seed: u64,
    pub rows: Vec<SpectrumRow>,
}

#[derive(Debug, Clone)]
pub struct SpectrumOutcome {
    pub runs: Vec<SpectrumRun>,
    /// Target rank whose tail is summed.
    pub rank: usize,
}

impl SpectrumOutcome {
    /// Mean over runs of `Σ_{i>rank} σ_i²` for a row label.
    pub fn mean_tail_mass(&self, method: &str) -> Option<f64> {
        let masses: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.rows.iter().find(|row| row.method == method))
            .map(|row| row.tail_mass(self.rank))
            .collect();
        (masses.len() == self.runs.len()).then(|| mean_std(&masses).0)
    }
}

/// Mode-0 spectra of the clean and noisy unfoldings and of `QᵀX` for the
/// three range finders at depth `q`, one set per run.
pub fn spectrum_experiment(plan: &Plan) -> Result<SpectrumOutcome, BenchError> {
    let rank = plan
        .tucker_rank
        .as_ref()
        .ok_or_else(|| BenchError::Config("spectrum requires solver.rank or a gaussian-tucker data rank".into()))?;
    let size = plan.sketch.as_ref().expect("validated with rank")[0];
    let mut runs = Vec::with_capacity(plan.runs);
    for run in 0..plan.runs {
        let seeds = RunSeeds::new(plan.base_seed, run);
        let (clean, noisy) = generate(plan, &seeds)?;
        let xn = unfold(&noisy, 0)?;
        let mut rows = vec![
            SpectrumRow {
                method: "clean".into(),
                values: singular_values(&unfold(&clean, 0)?),
            },
            SpectrumRow {
                method: "noisy".into(),
                values: singular_values(&xn),
            },
        ];
        let cfg = SketchConfig::new(size, seeds.method);
        rows.extend(tail_spectrum_report(&xn, plan.q, &cfg)?);
        runs.push(SpectrumRun { seed: seeds.run, rows });
    }
    Ok(SpectrumOutcome { runs, rank: rank.0[0] })
}

pub const SPECTRUM_HEADER: &str = "run_id,seed,method,index,singular_value";

pub fn write_spectrum_csv(outcome: &SpectrumOutcome, mut out: impl Write) -> Result<(), BenchError> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    for (run, r) in outcome.runs.iter().enumerate() {
        for row in &r.rows {
            for (i, s) in row.values.iter().enumerate() {
                writeln!(out, "{run},{},{},{},{:.17e}", r.seed, row.method, i + 1, s)?;
            }
        }
    }
    Ok(())
}

/// Fit of block Krylov Tucker at one sampling rate on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub run_id: usize,
    pub seed: u64,
    pub omega: f64,
    pub fit: f64,
    pub rerr: Option<f64>,
    pub tsvd_fit: f64,
    pub time_s: f64,
}

pub const SWEEP_HEADER: &str = "run_id,omega,fit,rerr,tsvd_fit,time_s,seed";

/// Block Krylov Tucker at every configured sampling rate, with the
/// truncated-HOSVD fit of the same run alongside. The method seed matches
/// [`run_experiment`], so the `ω = 1` row reproduces a plain run.
pub fn sampling_sweep(plan: &Plan) -> Result<Vec<SweepRow>, BenchError> {
    let rank = plan
        .tucker_rank
        .as_ref()
        .ok_or_else(|| BenchError::Config("sweep requires solver.rank or a gaussian-tucker data rank".into()))?;
    let sizes = plan.sketch.as_ref().expect("validated with rank");
    let mut rows = Vec::with_capacity(plan.runs * plan.omegas.len());
    for run in 0..plan.runs {
        let seeds = RunSeeds::new(plan.base_seed, run);
        let (clean, noisy) = generate(plan, &seeds)?;
        let reference = tucker_reconstruct(&truncated_hosvd(&noisy, rank)?);
        let tsvd_fit = fit(&clean, &reference)?;
        for &omega in &plan.omegas {
            let (tf, time_s) = timed(|| rbki_tucker(&noisy, sizes, rank, plan.q, omega, seeds.method))?;
            let approx = tucker_reconstruct(&tf);
            rows.push(SweepRow {
                run_id: run,
                seed: seeds.run,
                omega,
                fit: fit(&clean, &approx)?,
                rerr: rerr(&clean, &approx, &reference).ok(),
                tsvd_fit,
                time_s,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> Result<(), BenchError> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{}",
            r.run_id,
            r.omega,
            r.fit,
            opt_field(r.rerr),
            r.tsvd_fit,
            r.time_s,
            r.seed
        )?;
    }
    Ok(())
}

/// Mean fit per sampling rate, in the order of first appearance.
pub fn sweep_means(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut omegas: Vec<f64> = Vec::new();
    for r in rows {
        if !omegas.contains(&r.omega) {
            omegas.push(r.omega);
        }
    }
    omegas
        .into_iter()
        .map(|w| {
            let fits: Vec<f64> = rows.iter().filter(|r| r.omega == w).map(|r| r.fit).collect();
            (w, mean_std(&fits).0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::plan_from_str;

    const SMALL: &str = r#"
[experiment]
runs = 3
seed = 11
methods = ["T-SVD", "GR-SVD", "GRpi-SVD", "rBKI-TK"]

[data]
family = "gaussian-tucker"
dims = [12, 10, 9]
rank = 3

[noise]
snr_db = 0.0

[metrics]
psnr = true
"#;

    #[test]
    fn seeds_follow_base_plus_run() {
        let a = RunSeeds::new(100, 3);
        assert_eq!(a.run, 103);
        assert_eq!(a, RunSeeds::new(101, 2));
        assert_ne!(a.data, a.noise);
        assert_ne!(a.noise, a.method);
    }

    #[test]
    fn experiment_rows_and_aggregates() {
        let plan = plan_from_str(SMALL).unwrap();
        let out = run_experiment(&plan).unwrap();
        assert_eq!(out.records.len(), 12);
        for r in out.records.iter().filter(|r| r.report.method == "T-SVD") {
            assert_eq!(r.report.rerr, Some(1.0));
        }
        for a in &out.aggregates {
            let fits: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.report.method == a.method.label())
                .map(|r| r.report.fit_percent)
                .collect();
            let (m, s) = mean_std(&fits);
            assert!((a.fit.0 - m).abs() <= 1e-12 && (a.fit.1 - s).abs() <= 1e-12);
            assert!(a.psnr.is_some());
        }
        let mut csv = Vec::new();
        write_experiment_csv(&out, &plan, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 12 + 8);
        assert!(text.lines().all(|l| l.split(',').count() == 14));
    }

    #[test]
    fn sweep_full_rate_matches_plain_run() {
        let text = SMALL.replace("\"T-SVD\", \"GR-SVD\", \"GRpi-SVD\", ", "");
        let plan = plan_from_str(&text).unwrap();
        let rows = sampling_sweep(&plan).unwrap();
        assert_eq!(rows.len(), 30);
        let plain = run_experiment(&plan).unwrap();
        for (run, rec) in plain.records.iter().enumerate() {
            let full = rows.iter().find(|r| r.run_id == run && r.omega == 1.0).unwrap();
            assert_eq!(full.fit, rec.report.fit_percent);
        }
        assert_eq!(sweep_means(&rows).len(), 10);
    }

    #[test]
    fn spectrum_shapes() {
        let text = r#"
[experiment]
runs = 2
seed = 3

[data]
family = "gaussian-tucker"
dims = [10, 10, 10]
rank = 5

[noise]
snr_db = 0.0
"#;
        let plan = plan_from_str(text).unwrap();
        let out = spectrum_experiment(&plan).unwrap();
        for run in &out.runs {
            assert_eq!(run.rows.len(), 5);
            let clean = &run.rows[0].values;
            assert_eq!(clean.iter().filter(|&&s| s > 1e-8 * clean[0]).count(), 5);
        }
        let mut csv = Vec::new();
        write_spectrum_csv(&out, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 2 * 5 * 10);
        assert!(out.mean_tail_mass("rbki").is_some());
    }

    #[test]
    fn ring_methods_run() {
        let text = r#"
[experiment]
runs = 1
seed = 5
methods = ["TR-ALS", "rBKI-TK-TR"]

[data]
family = "planted-ring"
dims = [6, 5, 4]
rank = 2

[noise]
snr_db = 20.0

[solver]
tr_rank = 2
compress = [6, 5, 4]
max_iter = 5
"#;
        let plan = plan_from_str(text).unwrap();
        let out = run_experiment(&plan).unwrap();
        assert_eq!(out.records.len(), 2);
        assert!(out.records.iter().all(|r| r.report.rerr.is_none()));
        // lossless compression: same ALS start, same fit
        let (a, b) = (&out.records[0].report, &out.records[1].report);
        assert!((a.fit_percent - b.fit_percent).abs() <= 1e-6);
    }
}
