use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbki_bench::config::{ExperimentConfig, Method};
use rbki_bench::experiment::{
    run_experiment, sampling_sweep, spectrum_experiment, sweep_means, write_experiment_csv, write_spectrum_csv,
    write_sweep_csv,
};
use rbki_bench::{write_atomically, BenchError, Plan};
use rbki_core::datagen::{add_noise, gaussian_tucker_tensor, planted_ring_tensor, power_functional_tensor_with, NoiseSpec, PowerSum};
use rbki_core::io::{load_factors, read_tensor, save_tr, save_tucker, write_tensor, Manifest};
use rbki_core::metrics::{fit, psnr, rerr, MseKind};
use rbki_core::tring::{default_compress_sizes, rbki_tk_tr_detailed, tr_als_detailed, tr_reconstruct, AlsConfig};
use rbki_core::tucker::{default_sketch_sizes, randomized_hosvd, rbki_tucker, truncated_hosvd, tucker_reconstruct};
use rbki_core::{Error, MultilinearRank, RngSeed, SketchMethod, TRRank};

#[derive(Parser)]
#[command(name = "rbki-bench", version, about = "Sketched Tucker and tensor-ring experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo comparison of the configured methods; writes per-run and aggregate CSV rows.
    Run {
        config: PathBuf,
        /// Overrides experiment.output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Singular value spectra of the clean, noisy and sketched mode-0 unfoldings.
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Block Krylov Tucker fit across sampling rates.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Decomposes a tensor file and saves the factors to a directory.
    Decompose {
        tensor: PathBuf,
        #[arg(long)]
        method: Method,
        /// Multilinear rank for Tucker methods, ring rank for ring methods; one value or one per mode.
        #[arg(long)]
        rank: String,
        /// Sketch sizes (Tucker) or compression sizes (rBKI-TK-TR).
        #[arg(long)]
        sketch: Option<String>,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = AlsConfig::default().max_iter)]
        max_iter: usize,
        #[arg(long, default_value_t = AlsConfig::default().tol)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuilds the full tensor from a factor directory.
    Reconstruct {
        factors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit, optional RErr and PSNR of an approximation against a reference.
    Metrics {
        reference: PathBuf,
        approx: PathBuf,
        /// Optimal approximation for RErr.
        #[arg(long)]
        optimum: Option<PathBuf>,
        /// Use the squared-norm MSE inside PSNR.
        #[arg(long)]
        squared_mse: bool,
    },
    /// Writes a synthetic tensor, optionally with noise.
    Generate {
        /// gaussian-tucker, power-functional or planted-ring.
        #[arg(long)]
        family: String,
        #[arg(long)]
        dims: String,
        #[arg(long)]
        rank: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        p: f64,
        #[arg(long, default_value = "leading-three")]
        p_modes: PowerSum,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the noiseless tensor here.
        #[arg(long)]
        clean_out: Option<PathBuf>,
    },
}

fn parse_list(key: &str, text: &str, order: usize) -> Result<Vec<usize>, BenchError> {
    let values = text
        .split([',', 'x'])
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| BenchError::Config(format!("--{key} '{text}' is not a list of integers")))?;
    match values.len() {
        1 => Ok(vec![values[0]; order]),
        n if n == order => Ok(values),
        n => Err(BenchError::Config(format!(
            "--{key} has {n} entries but the tensor has order {order}"
        ))),
    }
}

/// Bad solver arguments on the command line count as configuration errors.
fn as_argument_error(e: Error) -> BenchError {
    match e {
        Error::RankOutOfRange { .. }
        | Error::RankExceedsSketch { .. }
        | Error::SketchTooLarge { .. }
        | Error::InvalidParameter { .. }
        | Error::InvalidShape { .. } => BenchError::Config(e.to_string()),
        other => BenchError::Numerical(other),
    }
}

fn load_plan(config: &Path, output: Option<PathBuf>) -> Result<Plan, BenchError> {
    let (cfg, text) = ExperimentConfig::from_file(config)?;
    let mut plan = cfg.plan(&text)?;
    if output.is_some() {
        plan.output = output;
    }
    Ok(plan)
}

fn emit(plan: &Plan, render: impl FnOnce(&mut Vec<u8>) -> Result<(), BenchError>) -> Result<(), BenchError> {
    match &plan.output {
        Some(path) => {
            write_atomically(path, render)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let mut buf = Vec::new();
            render(&mut buf)?;
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run { config, output } => {
            let plan = load_plan(&config, output)?;
            let outcome = run_experiment(&plan)?;
            for a in &outcome.aggregates {
                let rerr = a.rerr.map_or_else(|| "-".to_string(), |r| format!("{:.4}", r.0));
                eprintln!(
                    "{:<11} fit {:8.4} ± {:.4}  rerr {rerr:>8}  time {:.3}s",
                    a.method.label(),
                    a.fit.0,
                    a.fit.1,
                    a.time_s.0
                );
            }
            emit(&plan, |buf| write_experiment_csv(&outcome, &plan, buf))
        }
        Command::Spectrum { config, output } => {
            let plan = load_plan(&config, output)?;
            let outcome = spectrum_experiment(&plan)?;
            for label in ["clean", "noisy", "rrf", "power", "rbki"] {
                if let Some(m) = outcome.mean_tail_mass(label) {
                    eprintln!("{label:<6} mean tail mass beyond rank {}: {m:.6e}", outcome.rank);
                }
            }
            emit(&plan, |buf| write_spectrum_csv(&outcome, buf))
        }
        Command::Sweep { config, output } => {
            let plan = load_plan(&config, output)?;
            let rows = sampling_sweep(&plan)?;
            for (w, f) in sweep_means(&rows) {
                eprintln!("omega {w:.2}: mean fit {f:.4}");
            }
            emit(&plan, |buf| write_sweep_csv(&rows, buf))
        }
        Command::Decompose {
            tensor,
            method,
            rank,
            sketch,
            q,
            omega,
            seed,
            max_iter,
            tol,
            out,
        } => {
            let x = read_tensor(&tensor)?;
            let order = x.order();
            let r = parse_list("rank", &rank, order)?;
            let seed = RngSeed(seed);
            let mut extra = Manifest::new();
            extra.insert("method".into(), method.label().into());
            extra.insert("seed".into(), seed.to_string());
            let approx = if method.is_ring() {
                let rank = TRRank(r);
                let als = AlsConfig { max_iter, tol };
                extra.insert("max_iter".into(), max_iter.to_string());
                extra.insert("tol".into(), tol.to_string());
                let factors = if method == Method::TrAls {
                    tr_als_detailed(&x, &rank, als, seed).map_err(as_argument_error)?.factors
                } else {
                    let sizes = match &sketch {
                        Some(s) => parse_list("sketch", s, order)?,
                        None => default_compress_sizes(x.shape(), &rank),
                    };
                    extra.insert("compress".into(), join(&sizes));
                    extra.insert("q".into(), q.to_string());
                    extra.insert("omega".into(), omega.to_string());
                    rbki_tk_tr_detailed(&x, &sizes, &rank, q, omega, als, seed)
                        .map_err(as_argument_error)?
                        .factors
                };
                let approx = tr_reconstruct(&factors);
                extra.insert("fit".into(), fit(&x, &approx)?.to_string());
                save_tr(&out, &factors, &extra)?;
                approx
            } else {
                let rank = MultilinearRank(r);
                rank.validate(x.shape()).map_err(as_argument_error)?;
                let sizes = match &sketch {
                    Some(s) => parse_list("sketch", s, order)?,
                    None => default_sketch_sizes(x.shape(), &rank),
                };
                let tf = match method {
                    Method::Tsvd => truncated_hosvd(&x, &rank),
                    Method::GrSvd => randomized_hosvd(&x, &sizes, &rank, SketchMethod::Rrf, 0, seed),
                    Method::GrpiSvd => randomized_hosvd(&x, &sizes, &rank, SketchMethod::PowerIteration, q, seed),
                    _ => rbki_tucker(&x, &sizes, &rank, q, omega, seed),
                }
                .map_err(as_argument_error)?;
                if method != Method::Tsvd {
                    extra.insert("sketch".into(), join(&sizes));
                    extra.insert("q".into(), q.to_string());
                }
                if method == Method::RbkiTk {
                    extra.insert("omega".into(), omega.to_string());
                }
                let approx = tucker_reconstruct(&tf);
                extra.insert("fit".into(), fit(&x, &approx)?.to_string());
                save_tucker(&out, &tf, &extra)?;
                approx
            };
            eprintln!("fit {:.6} -> {}", fit(&x, &approx)?, out.display());
            Ok(())
        }
        Command::Reconstruct { factors, out } => {
            let x = load_factors(&factors)?.reconstruct();
            write_tensor(&out, &x)?;
            Ok(())
        }
        Command::Metrics {
            reference,
            approx,
            optimum,
            squared_mse,
        } => {
            let x = read_tensor(&reference)?;
            let xhat = read_tensor(&approx)?;
            println!("fit = {}", fit(&x, &xhat)?);
            if let Some(opt) = optimum {
                println!("rerr = {}", rerr(&x, &xhat, &read_tensor(&opt)?)?);
            }
            let kind = if squared_mse { MseKind::Squared } else { MseKind::Unsquared };
            println!("psnr = {}", psnr(&x, &xhat, kind)?);
            Ok(())
        }
        Command::Generate {
            family,
            dims,
            rank,
            p,
            p_modes,
            snr_db,
            seed,
            out,
            clean_out,
        } => {
            let dims: Vec<usize> = dims
                .split([',', 'x'])
                .map(|s| s.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| BenchError::Config(format!("--dims '{dims}' is not a list of integers")))?;
            let order = dims.len();
            let need_rank = || {
                rank.as_deref()
                    .ok_or_else(|| BenchError::Config(format!("--rank is required for family {family}")))
                    .and_then(|r| parse_list("rank", r, order))
            };
            let seed = RngSeed(seed);
            let clean = match family.as_str() {
                "gaussian-tucker" => gaussian_tucker_tensor(&dims, &MultilinearRank(need_rank()?), seed.derive(0)),
                "power-functional" => power_functional_tensor_with(&dims, p, p_modes),
                "planted-ring" => planted_ring_tensor(&dims, &TRRank(need_rank()?), seed.derive(0)),
                other => {
                    return Err(BenchError::Config(format!(
                        "--family '{other}' must be gaussian-tucker, power-functional or planted-ring"
                    )))
                }
            }
            .map_err(as_argument_error)?;
            if let Some(path) = clean_out {
                write_tensor(path, &clean)?;
            }
            let observed = match snr_db {
                Some(snr_db) => add_noise(&clean, NoiseSpec { snr_db, seed: seed.derive(1) }).map_err(as_argument_error)?.0,
                None => clean,
            };
            write_tensor(&out, &observed)?;
            Ok(())
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
