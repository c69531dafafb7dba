//! Command-line front-end. All numerical work lives in the library; this
//! binary parses a strict JSON config, dispatches one subcommand, and emits
//! reproducible artifacts (resolved config + manifest + data files).
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 numerical
//! failure, 4 a verified bound exceeded its statistical slack.

mod config_file;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use elastica_mle::estimator::{mle_diagonal, mle_matrix, mle_symmetric};
use elastica_mle::experiments::{
    coverage_check, rate_study, verify_decoupling, verify_ou_concentration, RATE_BOUND_EPS,
};
use elastica_mle::likelihood::sufficient_stats;
use elastica_mle::linalg::SymMatrix;
use elastica_mle::simulate::simulate_interacting;
use elastica_mle::theory::{
    chi2_log_mgf, chi2_log_mgf_bound, decoupling_constants, ou_moments, rate_bound,
    theorem_preconditions,
};
use elastica_mle::{Error as MleError, SystemConfig, TrajectoryBundle};

use config_file::{EstimatorModel, LoadedConfig};
use output::{
    noise_csv, now_iso, parse_trajectory_csv, rate_plot_script, rate_table_csv, sha256_hex,
    trajectory_csv, RunManifest,
};

#[derive(Parser)]
#[command(
    name = "elastica-mle",
    version,
    about = "Interacting-particle simulation, drift estimation, and error-bound verification"
)]
struct Cli {
    /// JSON configuration file (required by every subcommand except `theory`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config file's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-thread cap for Monte Carlo campaigns (0 = automatic).
    /// Results are independent of this setting.
    #[arg(long, global = true, env = "ELASTICA_MLE_THREADS")]
    threads: Option<usize>,
    /// Refuse to run if the configured system violates the error-bound
    /// hypotheses (N ≥ 400, t ≥ 1/θ_d, ε in its window).
    #[arg(long, global = true)]
    enforce_theorem: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the interacting system and export the trajectory CSV.
    Simulate,
    /// Estimate the interaction matrix (from a trajectory CSV or by
    /// simulating the configured system first).
    Estimate {
        /// Trajectory CSV produced by `simulate` with the same resolved
        /// config; omitted = simulate in memory.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Error-vs-(N·t) study across the configured grid, with a log-log fit.
    RateStudy,
    /// Monte Carlo verification of a concentration bound (exit 4 on excess
    /// violation frequency).
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
    /// Evaluate a closed-form bound or constant (no config file needed).
    Theory {
        #[command(subcommand)]
        what: TheoryWhat,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum VerifyCheck {
    /// Coupled-pair decoupling bounds: integral and martingale thresholds.
    Decoupling,
    /// Mean-reverting process concentration: fluctuation and Itô-integral
    /// thresholds.
    OuConcentration,
    /// Coverage of the spectral-error bound.
    Coverage,
}

#[derive(Subcommand, Clone, Copy)]
enum TheoryWhat {
    /// Spectral-error bound 24σ√θ₁·√(2d·log(d/ε)/(Nt)).
    RateBound {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Mean and variance of the scalar mean-reverting process at time t.
    OuMoments {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        tau2: f64,
        #[arg(long)]
        t: f64,
    },
    /// Decoupling constants C₁, C₂, C at (ε, N).
    Constants {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        n: usize,
    },
    /// Log-MGF of the centered squared Gaussian and its algebraic envelope.
    Mgf {
        #[arg(long)]
        u: f64,
    },
}

/// An error carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn verification(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<MleError> for Failure {
    fn from(e: MleError) -> Self {
        let code = match e {
            MleError::InvalidConfig(_)
            | MleError::DimensionMismatch(_)
            | MleError::Domain(_)
            | MleError::Precondition(_)
            | MleError::DegenerateGrid(_)
            | MleError::SizeCap { .. } => 2,
            MleError::Stability { .. }
            | MleError::MissingNoise
            | MleError::SingularGram { .. }
            | MleError::ZeroDenominator { .. }
            | MleError::EigenNoConvergence(_) => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        // 0 = rayon's automatic sizing. Campaign results are scheduling-
        // independent, so this only caps resource use.
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot configure {k} worker threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate => simulate_cmd(&cli),
        Command::Estimate { ref trajectory } => estimate_cmd(&cli, trajectory.as_deref()),
        Command::RateStudy => rate_study_cmd(&cli),
        Command::Verify { check } => verify_cmd(&cli, check),
        Command::Theory { what } => theory_cmd(&cli, what),
    }
}

fn load_config(cli: &Cli) -> Result<LoadedConfig, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::config("this subcommand needs --config <path>"))?;
    config_file::load(path, cli.seed).map_err(Failure::config)
}

/// Collects every artifact of one run and writes the manifest last, so a
/// complete output set always carries its own provenance.
struct Artifacts {
    dir: PathBuf,
    digest: String,
    master_seed: u64,
    subcommand: &'static str,
    started_at: String,
}

impl Artifacts {
    fn create(
        out: Option<&std::path::Path>,
        subcommand: &'static str,
        resolved_config: &str,
        master_seed: u64,
    ) -> Result<Self, Failure> {
        let dir = out
            .ok_or_else(|| Failure::config("this subcommand needs --out <dir>"))?
            .to_path_buf();
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
        let artifacts = Artifacts {
            dir,
            digest: sha256_hex(resolved_config.as_bytes()),
            master_seed,
            subcommand,
            started_at: now_iso(),
        };
        artifacts.write("resolved_config.json", resolved_config)?;
        Ok(artifacts)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(self) -> Result<(), Failure> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: self.digest.clone(),
            master_seed: self.master_seed,
            started_at: self.started_at.clone(),
            finished_at: now_iso(),
            subcommand: self.subcommand.to_string(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        self.write("manifest.json", &text)
    }
}

/// With `--enforce-theorem`, refuse configurations outside the guarantee.
fn enforce_theorem(cli: &Cli, system: &SystemConfig, eps: f64) -> Result<(), Failure> {
    if !cli.enforce_theorem {
        return Ok(());
    }
    let violations = theorem_preconditions(system, eps);
    if violations.is_empty() {
        return Ok(());
    }
    let mut message = String::from("error-bound hypotheses violated:\n");
    for v in &violations {
        message.push_str(&format!("  - {v}\n"));
    }
    message.push_str(
        &serde_json::to_string_pretty(&violations).expect("violations serialize"),
    );
    Err(Failure::config(message))
}

fn simulate_cmd(cli: &Cli) -> Result<(), Failure> {
    let loaded = load_config(cli)?;
    enforce_theorem(cli, &loaded.system, RATE_BOUND_EPS)?;
    let resolved = config_file::resolved_json(&loaded.resolved);
    let artifacts =
        Artifacts::create(cli.out.as_deref(), "simulate", &resolved, loaded.system.seed())?;
    let bundle = simulate_interacting(&loaded.system, loaded.simulate.store_noise)?;
    artifacts.write("trajectory.csv", &trajectory_csv(&bundle))?;
    if let Some(noise) = noise_csv(&bundle) {
        artifacts.write("noise.csv", &noise)?;
    }
    artifacts.finish()
}

fn estimate_cmd(cli: &Cli, trajectory: Option<&std::path::Path>) -> Result<(), Failure> {
    let loaded = load_config(cli)?;
    enforce_theorem(cli, &loaded.system, RATE_BOUND_EPS)?;
    let resolved = config_file::resolved_json(&loaded.resolved);
    let artifacts =
        Artifacts::create(cli.out.as_deref(), "estimate", &resolved, loaded.system.seed())?;

    let bundle = match trajectory {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            let (times, states) =
                parse_trajectory_csv(&text, &loaded.system).map_err(Failure::config)?;
            TrajectoryBundle::from_parts(loaded.system.clone(), times, states, None)?
        }
        None => simulate_interacting(&loaded.system, false)?,
    };
    let stats = sufficient_stats(&bundle);
    let report = match loaded.estimate.model {
        EstimatorModel::Matrix => {
            let est = mle_matrix(&stats)?;
            json!({
                "model": "matrix",
                "theta_hat": est.theta_hat.to_rows(),
                "raw": est.raw.to_rows(),
                "gram_condition": est.gram_condition,
            })
        }
        EstimatorModel::Symmetric => {
            let m = mle_symmetric(&stats)?;
            json!({ "model": "symmetric", "theta_hat": m.to_rows() })
        }
        EstimatorModel::Diagonal => {
            let diag = mle_diagonal(&stats)?;
            json!({
                "model": "diagonal",
                "theta_hat": SymMatrix::from_diagonal(&diag).to_rows(),
                "diagonal": diag,
            })
        }
    };
    artifacts.write_json("estimate.json", &report)?;
    artifacts.finish()
}

fn rate_study_cmd(cli: &Cli) -> Result<(), Failure> {
    let loaded = load_config(cli)?;
    enforce_theorem(cli, &loaded.system, RATE_BOUND_EPS)?;
    let resolved = config_file::resolved_json(&loaded.resolved);
    let artifacts =
        Artifacts::create(cli.out.as_deref(), "rate-study", &resolved, loaded.system.seed())?;
    let table =
        rate_study(&loaded.system, &loaded.rate_study.grid, loaded.rate_study.replicates)?;
    artifacts.write("rate_table.csv", &rate_table_csv(&table))?;
    artifacts.write_json(
        "rate_table.json",
        &serde_json::to_value(&table).expect("rate table serializes"),
    )?;
    artifacts.write(
        "plot.gp",
        &rate_plot_script("rate_table.csv", table.fitted_slope, table.fitted_intercept),
    )?;
    artifacts.finish()
}

/// Allowance for the binomial noise of an empirical frequency around its
/// guaranteed level: three standard deviations at R replicates.
fn binomial_slack(p: f64, replicates: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / replicates as f64).sqrt()
}

fn verify_cmd(cli: &Cli, check: VerifyCheck) -> Result<(), Failure> {
    let loaded = load_config(cli)?;
    let eps = loaded.verify.epsilon;
    let replicates = loaded.verify.replicates;
    enforce_theorem(cli, &loaded.system, eps)?;
    let resolved = config_file::resolved_json(&loaded.resolved);
    let artifacts =
        Artifacts::create(cli.out.as_deref(), "verify", &resolved, loaded.system.seed())?;

    let (name, passed, summary, report_value) = match check {
        VerifyCheck::Decoupling => {
            let report = verify_decoupling(&loaded.system, replicates, eps)?;
            let int_allowed = report.integral_limit + binomial_slack(report.integral_limit, replicates);
            let mart_allowed =
                report.martingale_limit + binomial_slack(report.martingale_limit, replicates);
            let passed = report.coupling_ok_fraction == 1.0
                && report.integral_violation_freq <= int_allowed
                && report.martingale_violation_freq <= mart_allowed;
            let summary = format!(
                "coupling ok fraction {}, integral violations {:.4} (allowed {:.4}), martingale violations {:.4} (allowed {:.4})",
                report.coupling_ok_fraction,
                report.integral_violation_freq,
                int_allowed,
                report.martingale_violation_freq,
                mart_allowed
            );
            ("decoupling", passed, summary, serde_json::to_value(&report).unwrap())
        }
        VerifyCheck::OuConcentration => {
            let report = verify_ou_concentration(&loaded.system, replicates, eps)?;
            let fluct_allowed =
                report.fluctuation_limit + binomial_slack(report.fluctuation_limit, replicates);
            let mart_allowed =
                report.martingale_limit + binomial_slack(report.martingale_limit, replicates);
            let passed = report.fluctuation_violation_freq <= fluct_allowed
                && report.martingale_violation_freq <= mart_allowed;
            let summary = format!(
                "fluctuation violations {:.4} (allowed {:.4}), martingale violations {:.4} (allowed {:.4})",
                report.fluctuation_violation_freq,
                fluct_allowed,
                report.martingale_violation_freq,
                mart_allowed
            );
            ("ou-concentration", passed, summary, serde_json::to_value(&report).unwrap())
        }
        VerifyCheck::Coverage => {
            let report = coverage_check(&loaded.system, replicates, eps)?;
            let required = report.required;
            let passed = required <= 0.0
                || report.coverage >= required - binomial_slack(required, replicates);
            let summary = format!(
                "coverage {:.4}, required {:.4} minus slack {:.4}",
                report.coverage,
                required,
                binomial_slack(required.max(0.0), replicates)
            );
            ("coverage", passed, summary, serde_json::to_value(&report).unwrap())
        }
    };

    artifacts.write_json(
        "verify_report.json",
        &json!({ "check": name, "passed": passed, "summary": summary, "report": report_value }),
    )?;
    artifacts.finish()?;
    if passed {
        println!("verify {name}: pass — {summary}");
        Ok(())
    } else {
        Err(Failure::verification(format!("verify {name}: FAIL — {summary}")))
    }
}

fn theory_cmd(cli: &Cli, what: TheoryWhat) -> Result<(), Failure> {
    let (name, inputs, outputs) = match what {
        TheoryWhat::RateBound { sigma, theta1, dim, n, t, epsilon } => {
            let value = rate_bound(sigma, theta1, dim, n, t, epsilon)?;
            (
                "rate-bound",
                json!({
                    "sigma": sigma, "theta1": theta1, "dim": dim,
                    "n": n, "t": t, "epsilon": epsilon,
                }),
                json!({ "value": value }),
            )
        }
        TheoryWhat::OuMoments { theta, sigma, tau2, t } => {
            let m = ou_moments(theta, sigma, tau2, t)?;
            (
                "ou-moments",
                json!({ "theta": theta, "sigma": sigma, "tau2": tau2, "t": t }),
                json!({ "mean": m.mean, "variance": m.variance }),
            )
        }
        TheoryWhat::Constants { epsilon, n } => {
            let c = decoupling_constants(epsilon, n)?;
            (
                "constants",
                json!({ "epsilon": epsilon, "n": n }),
                json!({ "c1": c.c1, "c2": c.c2, "c": c.c }),
            )
        }
        TheoryWhat::Mgf { u } => {
            let value = chi2_log_mgf(u)?;
            let bound = chi2_log_mgf_bound(u).ok();
            ("mgf", json!({ "u": u }), json!({ "value": value, "bound": bound }))
        }
    };

    let mut combined = json!({ "quantity": name });
    merge_object(&mut combined, &inputs);
    merge_object(&mut combined, &outputs);
    println!("{}", serde_json::to_string_pretty(&combined).expect("theory output serializes"));

    if cli.out.is_some() {
        let mut resolved =
            serde_json::to_string_pretty(&json!({ "theory": { "quantity": name, "inputs": inputs } }))
                .expect("theory inputs serialize");
        resolved.push('\n');
        let artifacts =
            Artifacts::create(cli.out.as_deref(), "theory", &resolved, cli.seed.unwrap_or(0))?;
        artifacts.write_json("theory.json", &combined)?;
        artifacts.finish()?;
    }
    Ok(())
}

fn merge_object(target: &mut serde_json::Value, extra: &serde_json::Value) {
    if let (Some(t), Some(e)) = (target.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            t.insert(k.clone(), v.clone());
        }
    }
}
