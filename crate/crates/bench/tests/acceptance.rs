//! End-to-end acceptance checks. Runs serially (timing criteria share the
//! machine) and prints one PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rbki_bench::config::{plan_from_str, Method, Plan};
use rbki_bench::experiment::{sampling_sweep, spectrum_experiment, sweep_means};
use rbki_bench::{run_experiment, without_column};
use rbki_core::datagen::{add_noise, gaussian_tucker_tensor, NoiseSpec};
use rbki_core::linalg::{gaussian_matrix, sym_eig};
use rbki_core::tensor::{fold, mode_product, unfold};
use rbki_core::tring::{tr_reconstruct, TRFactors};
use rbki_core::tucker::{
    default_sketch_sizes, rbki_tucker, sketch_error_bounds_check, sketched_tucker, truncated_hosvd, tsvd_factor,
};
use rbki_core::{DenseTensor, MultilinearRank, RngSeed, SketchMethod, TRRank};

// Criterion 1: moderate noise.
const C1_MIN_FIT: f64 = 97.5;
const C1_MAX_RERR: f64 = 1.05;
const C1_MAX_FIT_GAP: f64 = 0.5;
const C1_MAX_SECONDS: f64 = 120.0;
// Criterion 2: heavy noise.
const C2_MIN_RBKI_FIT: f64 = 85.0;
const C2_MAX_GR_FIT: f64 = 5.0;
const C2_MAX_GRPI_FIT: f64 = 60.0;
// Criterion 3: power-functional tensor.
const C3_TARGET_FIT: f64 = 92.79;
const C3_FIT_BAND: f64 = 2.0;
const C3_MAX_RERR: f64 = 1.05;
const C3_MAX_SECONDS: f64 = 10.0;
// Criterion 4: sampling at rate 0.1.
const C4_OMEGA: f64 = 0.1;
const C4_MIN_FIT: f64 = 85.0;
// Criterion 5: tail spectra, compared up to rounding.
const C5_RANK: usize = 5;
const C5_ROUNDING: f64 = 1e-9;
// Criterion 6: tensor ring.
const C6_MAX_FIT_GAP: f64 = 2.0;
const C6_MIN_SPEEDUP: f64 = 3.0;
// Criterion 7: invariants.
const C7_EY_REL: f64 = 1e-6;
const C7_EY_TENSORS: usize = 50;
const C7_BOUND_INSTANCES: usize = 100;
const C7_RING_ABS: f64 = 1e-12;
const C7_RING_MAX_ENTRIES: usize = 200;
const C7_PROJECTOR_ABS: f64 = 1e-8;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn load(name: &str) -> Plan {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    let text = std::fs::read_to_string(&path).expect("bundled config");
    let mut plan = plan_from_str(&text).expect("bundled config validates");
    plan.output = None;
    plan
}

fn fit_of(out: &rbki_bench::ExperimentOutcome, m: Method) -> f64 {
    out.aggregate(m).expect("method ran").fit.0
}

fn rerr_of(out: &rbki_bench::ExperimentOutcome, m: Method) -> f64 {
    out.aggregate(m).expect("method ran").rerr.expect("rerr defined").0
}

fn criterion_1() -> Verdict {
    let out = run_experiment(&load("tucker_5db.toml")).expect("experiment runs");
    let fit = fit_of(&out, Method::RbkiTk);
    let rerr = rerr_of(&out, Method::RbkiTk);
    let gap = (fit - fit_of(&out, Method::Tsvd)).abs();
    verdict(
        fit >= C1_MIN_FIT && rerr <= C1_MAX_RERR && gap <= C1_MAX_FIT_GAP && out.total_time_s <= C1_MAX_SECONDS,
        format!(
            "rBKI-TK fit {fit:.4} (>= {C1_MIN_FIT}), rerr {rerr:.4} (<= {C1_MAX_RERR}), |fit - T-SVD fit| {gap:.4} (<= {C1_MAX_FIT_GAP}), total {:.1}s (<= {C1_MAX_SECONDS}s)",
            out.total_time_s
        ),
    )
}

fn criterion_2() -> Verdict {
    let out = run_experiment(&load("tucker_m10db.toml")).expect("experiment runs");
    let (rb, gr, gp) = (
        fit_of(&out, Method::RbkiTk),
        fit_of(&out, Method::GrSvd),
        fit_of(&out, Method::GrpiSvd),
    );
    verdict(
        rb >= C2_MIN_RBKI_FIT && gr <= C2_MAX_GR_FIT && gp <= C2_MAX_GRPI_FIT,
        format!(
            "rBKI-TK fit {rb:.4} (>= {C2_MIN_RBKI_FIT}), GR-SVD fit {gr:.4} (<= {C2_MAX_GR_FIT}), GRpi-SVD fit {gp:.4} (<= {C2_MAX_GRPI_FIT}), T-SVD fit {:.4}",
            fit_of(&out, Method::Tsvd)
        ),
    )
}

fn criterion_3() -> Verdict {
    let out = run_experiment(&load("power4.toml")).expect("experiment runs");
    let fit = fit_of(&out, Method::RbkiTk);
    let rerr = rerr_of(&out, Method::RbkiTk);
    verdict(
        (fit - C3_TARGET_FIT).abs() <= C3_FIT_BAND && rerr <= C3_MAX_RERR && out.total_time_s <= C3_MAX_SECONDS,
        format!(
            "rBKI-TK fit {fit:.4} ({C3_TARGET_FIT} ± {C3_FIT_BAND}), rerr {rerr:.4} (<= {C3_MAX_RERR}), total {:.2}s (<= {C3_MAX_SECONDS}s)",
            out.total_time_s
        ),
    )
}

fn criterion_4() -> Verdict {
    let mut plan = load("sweep.toml");
    plan.omegas = vec![C4_OMEGA];
    let rows = sampling_sweep(&plan).expect("sweep runs");
    let mean = sweep_means(&rows)[0].1;
    let tsvd: f64 = rows.iter().map(|r| r.tsvd_fit).sum::<f64>() / rows.len() as f64;
    verdict(
        mean >= C4_MIN_FIT,
        format!(
            "omega {C4_OMEGA}: mean rBKI-TK fit {mean:.4} over {} seeds (>= {C4_MIN_FIT}), T-SVD reference {tsvd:.4}",
            rows.len()
        ),
    )
}

fn criterion_5() -> Verdict {
    let out = spectrum_experiment(&load("spectrum.toml")).expect("spectrum runs");
    assert_eq!(out.rank, C5_RANK);
    let rb = out.mean_tail_mass("rbki").unwrap();
    let pw = out.mean_tail_mass("power").unwrap();
    let rf = out.mean_tail_mass("rrf").unwrap();
    let ok = rb <= pw * (1.0 + C5_ROUNDING) && rb <= rf * (1.0 + C5_ROUNDING);
    verdict(
        ok,
        format!(
            "mean tail mass beyond rank {C5_RANK}: rBKI {rb:.6e}, power {pw:.6e}, range finder {rf:.6e}, noisy {:.6e} (rounding slack {C5_ROUNDING})",
            out.mean_tail_mass("noisy").unwrap()
        ),
    )
}

fn criterion_6() -> Verdict {
    let out = run_experiment(&load("ring.toml")).expect("experiment runs");
    let direct = out.aggregate(Method::TrAls).unwrap();
    let comp = out.aggregate(Method::RbkiTkTr).unwrap();
    let gap = (direct.fit.0 - comp.fit.0).abs();
    let speedup = direct.time_s.0 / comp.time_s.0;
    let per_run: Vec<String> = out
        .records
        .chunks(2)
        .map(|c| format!("{:.2}/{:.2}", c[0].report.fit_percent, c[1].report.fit_percent))
        .collect();
    verdict(
        gap <= C6_MAX_FIT_GAP && speedup >= C6_MIN_SPEEDUP,
        format!(
            "TR-ALS fit {:.4} in {:.2}s, rBKI-TK-TR fit {:.4} in {:.2}s: gap {gap:.4} (<= {C6_MAX_FIT_GAP}), speedup {speedup:.1}x (>= {C6_MIN_SPEEDUP}x); per-run direct/compressed fits [{}]",
            direct.fit.0,
            direct.time_s.0,
            comp.fit.0,
            comp.time_s.0,
            per_run.join(", ")
        ),
    )
}

fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let len = shape.iter().product();
    DenseTensor::new(shape.to_vec(), gaussian_matrix(len, 1, RngSeed(seed)).into_data()).unwrap()
}

fn ring_entry(f: &TRFactors, idx: &[usize]) -> f64 {
    let cores = f.cores();
    let n = cores.len();
    let ranks: Vec<usize> = cores.iter().map(|c| c.shape()[0]).collect();
    let mut r = vec![0usize; n];
    let mut total = 0.0;
    loop {
        total += (0..n).map(|k| cores[k].get(&[r[k], idx[k], r[(k + 1) % n]])).product::<f64>();
        let mut k = 0;
        while k < n {
            r[k] += 1;
            if r[k] < ranks[k] {
                break;
            }
            r[k] = 0;
            k += 1;
        }
        if k == n {
            return total;
        }
    }
}

fn criterion_7() -> Verdict {
    let mut failures = Vec::new();

    let mut roundtrips = 0;
    for seed in 0..200u64 {
        let order = 1 + (seed % 5) as usize;
        let shape: Vec<usize> = (0..order).map(|k| 1 + ((seed / 5 + k as u64 * 7) % 4) as usize).collect();
        let x = random_tensor(&shape, seed);
        for n in 0..order {
            roundtrips += 1;
            if fold(&unfold(&x, n).unwrap(), n, &shape).unwrap() != x {
                failures.push(format!("roundtrip shape {shape:?} mode {n}"));
            }
        }
    }

    let mut worst_ey: f64 = 0.0;
    for seed in 0..C7_EY_TENSORS as u64 {
        let x = random_tensor(&[9, 8, 7], 1000 + seed);
        for n in 0..3 {
            let r = 1 + (seed as usize + n) % 5;
            let u = tsvd_factor(&x, n, r).unwrap();
            let lhs = x.distance(&mode_product(&x, &u.matmul_t(&u), n).unwrap()).unwrap().powi(2);
            let eig = sym_eig(&unfold(&x, n).unwrap().gram()).unwrap();
            let rhs: f64 = eig.values[r..].iter().sum();
            worst_ey = worst_ey.max((lhs - rhs).abs() / rhs);
        }
    }
    if worst_ey > C7_EY_REL {
        failures.push(format!("per-mode identity off by {worst_ey:e}"));
    }

    let dims = [20, 20, 20];
    let rank = MultilinearRank::uniform(3, 5);
    let sizes = default_sketch_sizes(&dims, &rank);
    let (mut sandwich, mut pythagorean) = (0, 0);
    for seed in 0..C7_BOUND_INSTANCES as u64 {
        let clean = gaussian_tucker_tensor(&dims, &rank, RngSeed(2000 + seed)).unwrap();
        let snr_db = -5.0 + (seed % 4) as f64 * 5.0;
        let (noisy, _) = add_noise(&clean, NoiseSpec { snr_db, seed: RngSeed(5000 + seed) }).unwrap();
        let sk = sketched_tucker(&noisy, &sizes, &rank, SketchMethod::Rbki, 2, 1.0, RngSeed(seed)).unwrap();
        let rep = sketch_error_bounds_check(&noisy, &sk, &rank).unwrap();
        sandwich += usize::from(rep.sandwich_holds);
        pythagorean += usize::from(rep.pythagorean_holds);
    }
    if sandwich < C7_BOUND_INSTANCES || pythagorean < C7_BOUND_INSTANCES {
        failures.push(format!("bounds: sandwich {sandwich}, pythagorean {pythagorean}"));
    }

    let mut ring_cases = 0;
    let mut worst_ring: f64 = 0.0;
    for seed in 0..60u64 {
        let order = 2 + (seed % 3) as usize;
        let dims: Vec<usize> = (0..order).map(|k| 1 + ((seed + 3 * k as u64) % 5) as usize).collect();
        if dims.iter().product::<usize>() > C7_RING_MAX_ENTRIES {
            continue;
        }
        let ranks: Vec<usize> = (0..order).map(|k| 1 + ((seed + k as u64) % 3) as usize).collect();
        let f = TRFactors::random(&dims, &TRRank(ranks), RngSeed(seed)).unwrap();
        let x = tr_reconstruct(&f);
        let mut idx = vec![0usize; order];
        for _ in 0..x.len() {
            worst_ring = worst_ring.max((x.get(&idx) - ring_entry(&f, &idx)).abs());
            for k in 0..order {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        ring_cases += 1;
    }
    if worst_ring > C7_RING_ABS {
        failures.push(format!("ring reconstruction off by {worst_ring:e}"));
    }

    let mut worst_proj: f64 = 0.0;
    for seed in 0..10u64 {
        let x = random_tensor(&[8, 7, 6], 300 + seed);
        let r = MultilinearRank(vec![3, 2, 4]);
        let t = truncated_hosvd(&x, &r).unwrap();
        let b = rbki_tucker(&x, &[8, 7, 6], &r, 0, 1.0, RngSeed(seed)).unwrap();
        for n in 0..3 {
            let (u, v) = (&t.factors()[n], &b.factors()[n]);
            worst_proj = worst_proj.max(u.matmul_t(u).sub(&v.matmul_t(v)).frobenius_norm());
        }
    }
    if worst_proj > C7_PROJECTOR_ABS {
        failures.push(format!("full-sketch projectors differ by {worst_proj:e}"));
    }

    verdict(
        failures.is_empty(),
        format!(
            "{roundtrips} exact roundtrips; per-mode identity worst {worst_ey:.1e} on {C7_EY_TENSORS} tensors; sandwich {sandwich}/{C7_BOUND_INSTANCES}, pythagorean {pythagorean}/{C7_BOUND_INSTANCES}; ring oracle worst {worst_ring:.1e} on {ring_cases} tensors; full-sketch projector gap {worst_proj:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    )
}

const DET_RUN: &str = r#"
[experiment]
runs = 2
seed = 99
methods = ["T-SVD", "GR-SVD", "GRpi-SVD", "rBKI-TK", "TR-ALS", "rBKI-TK-TR"]

[data]
family = "gaussian-tucker"
dims = [14, 12, 10]
rank = 3

[noise]
snr_db = 0.0

[solver]
omega = 0.5
tr_rank = 2
max_iter = 5

[metrics]
psnr = true
"#;

const DET_SMALL: &str = r#"
[experiment]
runs = 2
seed = 5

[data]
family = "gaussian-tucker"
dims = [10, 10, 10]
rank = 5

[noise]
snr_db = 0.0

[sweep]
omegas = [0.3, 1.0]
"#;

fn cli_csv(dir: &Path, command: &str, config: &str, tag: &str) -> String {
    let cfg = dir.join(format!("{tag}.toml"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{tag}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_rbki-bench"))
        .args([command, cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
        .output()
        .expect("cli runs");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read_to_string(out).unwrap()
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for (command, config) in [("run", DET_RUN), ("spectrum", DET_SMALL), ("sweep", DET_SMALL)] {
        let a = cli_csv(dir.path(), command, config, &format!("{command}_a"));
        let b = cli_csv(dir.path(), command, config, &format!("{command}_b"));
        let same = without_column(&a, "time_s") == without_column(&b, "time_s");
        ok &= same && a.lines().count() > 1;
        notes.push(format!("{command} {} rows {}", a.lines().count() - 1, if same { "identical" } else { "DIFFER" }));
    }
    verdict(ok, format!("{} (time_s excluded)", notes.join(", ")))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 moderate-noise Tucker accuracy and runtime", criterion_1),
        ("2 heavy-noise separation of sketches", criterion_2),
        ("3 power-functional accuracy and runtime", criterion_3),
        ("4 column sampling at rate 0.1", criterion_4),
        ("5 tail spectrum ordering", criterion_5),
        ("6 compressed tensor ring accuracy and speedup", criterion_6),
        ("7 invariant suites", criterion_7),
        ("8 CLI determinism", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
