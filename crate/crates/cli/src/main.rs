//! Benchmark front end: spectrum scans, Monte Carlo SNR sweeps and a
//! self-test suite, all driven by a TOML experiment config. Exit codes:
//! 0 success, 1 self-test failure, 2 config error, 3 estimator failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use doa_lowrank::alrd::alrd_scan;
use doa_lowrank::baselines::{capon_spectrum, music_spectrum};
use doa_lowrank::eval::run_sweep;
use doa_lowrank::linalg::{forward_backward_average, sample_covariance, CovarianceEstimate};
use doa_lowrank::malrd::malrd_scan;
use doa_lowrank::selftest::{run_selftest, SelftestParams};
use doa_lowrank::signal::{generate_snapshots, trial_rng};
use doa_lowrank::spectrum::Spectrum;
use doa_lowrank::MethodSpec;

const EXIT_SELFTEST: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "doa-bench", about = "DOA estimation benchmark harness")]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Estimator tag (alrd-rls, malrd-rls, capon, music, esprit).
    #[arg(long, global = true)]
    method: Option<String>,
    /// Output directory, overrides the config's output block.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks the hardware default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Master RNG seed, overrides the config's scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the grid once and write `angle_deg,power` per grid point.
    Spectrum,
    /// Monte Carlo SNR sweep over all configured estimators.
    Sweep,
    /// Run the built-in oracle checks and print a pass/fail table.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot configure {} threads: {}", cli.threads, e);
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let code = match &cli.command {
        Command::Selftest => cmd_selftest(),
        Command::Spectrum => cmd_spectrum(&cli),
        Command::Sweep => cmd_sweep(&cli),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err((exit, message)) => {
            eprintln!("error: {}", message);
            ExitCode::from(exit)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;

fn load_config(cli: &Cli) -> Result<ExperimentConfig, (u8, String)> {
    let path = cli
        .config
        .as_deref()
        .ok_or((EXIT_CONFIG, "--config <path> is required".to_string()))?;
    let mut config = ExperimentConfig::load(path).map_err(|e| (EXIT_CONFIG, e))?;
    if let Some(seed) = cli.seed {
        config.scenario.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.directory = out.display().to_string();
    }
    Ok(config)
}

fn ensure_out_dir(config: &ExperimentConfig) -> Result<PathBuf, (u8, String)> {
    let dir = PathBuf::from(&config.output.directory);
    std::fs::create_dir_all(&dir)
        .map_err(|e| (EXIT_CONFIG, format!("cannot create {}: {}", dir.display(), e)))?;
    Ok(dir)
}

fn write_atomic(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents)
        .map_err(|e| (EXIT_RUNTIME, format!("cannot write {}: {}", path.display(), e)))
}

fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut csv = String::from("angle_deg,power\n");
    for (angle, power) in spectrum.angles_deg.iter().zip(spectrum.power.iter()) {
        csv.push_str(&format!("{:.4},{:.12e}\n", angle, power));
    }
    csv
}

fn cmd_spectrum(cli: &Cli) -> CmdResult {
    let config = load_config(cli)?;
    let tag = cli
        .method
        .as_deref()
        .ok_or((EXIT_CONFIG, "--method <tag> is required for spectrum".to_string()))?;
    let block = config.find_estimator(tag).map_err(|e| (EXIT_CONFIG, e))?;
    let spec = config.method_spec(block).map_err(|e| (EXIT_CONFIG, e))?;
    if matches!(spec, MethodSpec::Esprit { .. }) {
        return Err((
            EXIT_CONFIG,
            "esprit produces point estimates, not a spectrum".to_string(),
        ));
    }
    let geometry = config.geometry().map_err(|e| (EXIT_CONFIG, e))?;
    let snr = config.snr_grid()[0];
    let scenario = config.scenario_at(snr).map_err(|e| (EXIT_CONFIG, e))?;
    let mut rng = trial_rng(config.scenario.seed, 0, 0);
    let batch = generate_snapshots(&geometry, &scenario, &mut rng)
        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;

    let spectrum = match &spec {
        MethodSpec::Alrd(cfg) => alrd_scan(cfg, &batch, &geometry)
            .map_err(|e| (EXIT_RUNTIME, e.to_string()))?
            .spectrum,
        MethodSpec::Malrd(cfg) => malrd_scan(cfg, &batch, &geometry)
            .map_err(|e| (EXIT_RUNTIME, e.to_string()))?
            .spectrum,
        MethodSpec::Capon(cfg) | MethodSpec::Music(cfg) => {
            let mut cov = sample_covariance(batch.data.view())
                .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
            if cfg.use_fba {
                cov = CovarianceEstimate {
                    matrix: forward_backward_average(&cov.matrix)
                        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?,
                    num_snapshots: cov.num_snapshots,
                };
            }
            let result = if matches!(spec, MethodSpec::Capon(_)) {
                capon_spectrum(&cov, &geometry, cfg)
            } else {
                music_spectrum(&cov, &geometry, cfg)
            };
            result.map_err(|e| (EXIT_RUNTIME, e.to_string()))?
        }
        MethodSpec::Esprit { .. } => unreachable!("rejected above"),
    };

    let dir = ensure_out_dir(&config)?;
    let path = dir.join(format!("spectrum_{}.csv", tag));
    write_atomic(&path, &spectrum_csv(&spectrum))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep_csv(reports: &[doa_lowrank::SweepReport]) -> String {
    let mut csv = String::from(
        "method,snr_db,trials,resolution_prob,rmse_deg,rmse_resolved_only_deg,crb_deg,mean_op_count\n",
    );
    for report in reports {
        for (idx, &snr) in report.snr_grid_db.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                report.method,
                snr,
                report.trials,
                report.resolution_prob[idx],
                report.rmse_deg[idx],
                report.rmse_resolved_only_deg[idx],
                report.crb_deg[idx],
                report.mean_op_count[idx],
            ));
        }
    }
    csv
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot resolution probability and RMSE-vs-CRB curves from sweep.csv."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
rows = defaultdict(list)
with open(path) as fh:
    for row in csv.DictReader(fh):
        rows[row["method"]].append(row)

fig, (ax_res, ax_rmse) = plt.subplots(1, 2, figsize=(11, 4))
for method, data in rows.items():
    snr = [float(r["snr_db"]) for r in data]
    ax_res.plot(snr, [float(r["resolution_prob"]) for r in data], marker="o", label=method)
    ax_rmse.semilogy(snr, [float(r["rmse_deg"]) for r in data], marker="o", label=method)
first = next(iter(rows.values()))
ax_rmse.semilogy(
    [float(r["snr_db"]) for r in first],
    [float(r["crb_deg"]) for r in first],
    "k--",
    label="CRB",
)
ax_res.set_xlabel("SNR (dB)"), ax_res.set_ylabel("resolution probability")
ax_rmse.set_xlabel("SNR (dB)"), ax_rmse.set_ylabel("RMSE (degrees)")
ax_res.legend(), ax_rmse.legend()
fig.tight_layout()
fig.savefig("sweep.png", dpi=150)
print("wrote sweep.png")
"#;

fn cmd_sweep(cli: &Cli) -> CmdResult {
    let config = load_config(cli)?;
    let geometry = config.geometry().map_err(|e| (EXIT_CONFIG, e))?;
    let snr_grid = config.snr_grid();
    let template = config
        .scenario_at(snr_grid[0])
        .map_err(|e| (EXIT_CONFIG, e))?;
    let mut methods = Vec::new();
    for block in &config.estimators {
        if let Some(tag) = cli.method.as_deref() {
            if block.method != tag {
                continue;
            }
        }
        methods.push(config.method_spec(block).map_err(|e| (EXIT_CONFIG, e))?);
    }
    if methods.is_empty() {
        return Err((
            EXIT_CONFIG,
            "no estimator matches the requested method".to_string(),
        ));
    }
    let reports = run_sweep(
        &methods,
        &geometry,
        &template,
        &snr_grid,
        config.harness.trials,
        config.scenario.seed,
    )
    .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;

    let dir = ensure_out_dir(&config)?;
    let path = dir.join("sweep.csv");
    write_atomic(&path, &sweep_csv(&reports))?;
    println!("wrote {}", path.display());
    if config.output.emit_plot_script {
        let script = dir.join("plot_sweep.py");
        write_atomic(&script, PLOT_SCRIPT)?;
        println!("wrote {}", script.display());
    }
    Ok(())
}

fn cmd_selftest() -> CmdResult {
    // Hidden corruption hook used by the test suite to verify that invalid
    // recursion parameters surface as failures rather than silent nonsense.
    let mut params = SelftestParams::default();
    if let Ok(raw) = std::env::var("DOA_BENCH_SELFTEST_FORGET") {
        params.forget = raw
            .parse()
            .map_err(|e| (EXIT_CONFIG, format!("bad DOA_BENCH_SELFTEST_FORGET: {}", e)))?;
    }
    let results = run_selftest(&params);
    let mut failed = Vec::new();
    for check in &results {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{} {:<35} {}", status, check.name, check.detail);
        if !check.passed {
            failed.push(check.name);
        }
    }
    println!("{} checks, {} failed", results.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err((
            EXIT_SELFTEST,
            format!("failed checks: {}", failed.join(", ")),
        ))
    }
}
