//! Strict JSON configuration: one `system` section describing the stochastic
//! model plus optional per-subcommand parameter sections. Unknown keys are
//! errors, every omitted field has a documented default, and the fully
//! resolved form is echoed next to the outputs so any run can be reproduced
//! from its own artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use elastica_mle::linalg::{sym_eigen, SymMatrix};
use elastica_mle::SystemConfig;

/// Step-size rule when `n_steps` is omitted: pick the smallest uniform grid
/// with `h·θ₁ ≤ 0.01`, an order of magnitude inside the stability limit.
const DEFAULT_H_THETA: f64 = 0.01;

fn default_sigma() -> f64 {
    1.0
}

fn default_grid() -> Vec<(usize, f64)> {
    vec![(50, 5.0), (100, 10.0), (200, 20.0), (400, 40.0)]
}

fn default_rate_replicates() -> usize {
    50
}

fn default_verify_replicates() -> usize {
    200
}

fn default_epsilon() -> f64 {
    0.05
}

/// Which estimator the `estimate` subcommand runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorModel {
    /// Unrestricted matrix estimate (normal equations row by row).
    #[default]
    Matrix,
    /// Symmetric-restricted maximizer.
    Symmetric,
    /// Per-coordinate scalar estimates (diagonal interaction model).
    Diagonal,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    /// Also export the driving noise increments as a sibling CSV.
    #[serde(default)]
    pub store_noise: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateParams {
    #[serde(default)]
    pub model: EstimatorModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudyParams {
    /// `(N, t)` pairs; each row reuses the base step size.
    #[serde(default = "default_grid")]
    pub grid: Vec<(usize, f64)>,
    #[serde(default = "default_rate_replicates")]
    pub replicates: usize,
}

impl Default for RateStudyParams {
    fn default() -> Self {
        RateStudyParams { grid: default_grid(), replicates: default_rate_replicates() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default = "default_verify_replicates")]
    pub replicates: usize,
    /// Confidence parameter ε the verified bounds are evaluated at.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams { replicates: default_verify_replicates(), epsilon: default_epsilon() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n_particles: usize,
    dim: usize,
    theta: Vec<Vec<f64>>,
    #[serde(default = "default_sigma")]
    sigma: f64,
    /// Defaults to a deterministic start at the origin.
    init_variances: Option<Vec<f64>>,
    t_final: f64,
    /// Defaults to the `h·θ₁ ≤ 0.01` rule.
    n_steps: Option<usize>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    system: RawSystem,
    #[serde(default)]
    simulate: SimulateParams,
    #[serde(default)]
    estimate: EstimateParams,
    #[serde(default)]
    rate_study: RateStudyParams,
    #[serde(default)]
    verify: VerifyParams,
}

/// Fully-resolved system section: every default made explicit, so the file
/// parses back to the identical configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedSystem {
    pub n_particles: usize,
    pub dim: usize,
    pub theta: Vec<Vec<f64>>,
    pub sigma: f64,
    pub init_variances: Vec<f64>,
    pub t_final: f64,
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedFile {
    pub system: ResolvedSystem,
    pub simulate: SimulateParams,
    pub estimate: EstimateParams,
    pub rate_study: RateStudyParams,
    pub verify: VerifyParams,
}

#[derive(Debug)]
pub struct LoadedConfig {
    pub system: SystemConfig,
    pub simulate: SimulateParams,
    pub estimate: EstimateParams,
    pub rate_study: RateStudyParams,
    pub verify: VerifyParams,
    pub resolved: ResolvedFile,
}

/// Parse, validate and resolve a configuration file. `seed_override`
/// replaces the file's seed before resolution, so the echoed config names
/// the seed that actually ran.
pub fn load(path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse(&text, seed_override)
}

pub fn parse(text: &str, seed_override: Option<u64>) -> Result<LoadedConfig, String> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawFile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| format!("config error at {}: {}", e.path(), e.inner()))?;
    resolve(raw, seed_override)
}

fn resolve(raw: RawFile, seed_override: Option<u64>) -> Result<LoadedConfig, String> {
    let sys = raw.system;
    let theta = SymMatrix::new(sys.theta).map_err(|e| format!("config error at system.theta: {e}"))?;
    let init_variances = sys.init_variances.unwrap_or_else(|| vec![0.0; sys.dim]);
    let n_steps = match sys.n_steps {
        Some(k) => k,
        None => {
            let eig = sym_eigen(&theta).map_err(|e| format!("config error at system.theta: {e}"))?;
            let theta1 = eig.values[0];
            (sys.t_final * theta1 / DEFAULT_H_THETA).ceil().max(1.0) as usize
        }
    };
    let seed = seed_override.unwrap_or(sys.seed);
    let system = SystemConfig::new(
        sys.n_particles,
        sys.dim,
        theta,
        sys.sigma,
        init_variances,
        sys.t_final,
        n_steps,
        seed,
    )
    .map_err(|e| format!("config error at system: {e}"))?;

    let resolved = ResolvedFile {
        system: ResolvedSystem {
            n_particles: system.n_particles(),
            dim: system.dim(),
            theta: system.theta().to_rows(),
            sigma: system.sigma(),
            init_variances: system.init_variances().to_vec(),
            t_final: system.t_final(),
            n_steps: system.n_steps(),
            seed: system.seed(),
        },
        simulate: raw.simulate.clone(),
        estimate: raw.estimate.clone(),
        rate_study: raw.rate_study.clone(),
        verify: raw.verify.clone(),
    };
    Ok(LoadedConfig {
        system,
        simulate: raw.simulate,
        estimate: raw.estimate,
        rate_study: raw.rate_study,
        verify: raw.verify,
        resolved,
    })
}

/// Canonical serialized form of the resolved config; the manifest digest is
/// computed over exactly these bytes.
pub fn resolved_json(resolved: &ResolvedFile) -> String {
    let mut s = serde_json::to_string_pretty(resolved).expect("resolved config serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"system": {"n_particles": 4, "dim": 1, "theta": [[2.0]], "t_final": 1.0}}"#
    }

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let loaded = parse(minimal(), None).unwrap();
        assert_eq!(loaded.system.sigma(), 1.0);
        assert_eq!(loaded.system.init_variances(), &[0.0]);
        assert_eq!(loaded.system.seed(), 0);
        // h rule: ceil(1.0·2.0/0.01) = 200 steps.
        assert_eq!(loaded.system.n_steps(), 200);
        assert_eq!(loaded.rate_study.replicates, 50);
        assert_eq!(loaded.verify.epsilon, 0.05);
        assert!(!loaded.simulate.store_noise);
        assert_eq!(loaded.estimate.model, EstimatorModel::Matrix);
    }

    #[test]
    fn resolved_form_reparses_to_the_same_resolution() {
        let loaded = parse(minimal(), Some(99)).unwrap();
        let echoed = resolved_json(&loaded.resolved);
        let again = parse(&echoed, None).unwrap();
        assert_eq!(resolved_json(&again.resolved), echoed);
        assert_eq!(again.system.seed(), 99);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let bad = r#"{"system": {"n_particles": 4, "dim": 1, "theta": [[2.0]], "t_final": 1.0, "n_particle": 3}}"#;
        let err = parse(bad, None).unwrap_err();
        assert!(err.contains("n_particle"), "{err}");
        assert!(err.contains("system"), "{err}");

        let bad_top = r#"{"system": {"n_particles": 4, "dim": 1, "theta": [[2.0]], "t_final": 1.0}, "extra": 1}"#;
        let err = parse(bad_top, None).unwrap_err();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn asymmetric_theta_is_rejected_naming_the_entry() {
        let bad = r#"{"system": {"n_particles": 4, "dim": 2, "theta": [[1.0, 0.3], [0.2, 1.0]], "t_final": 1.0, "init_variances": [0.0, 0.0]}}"#;
        let err = parse(bad, None).unwrap_err();
        assert!(err.contains("not symmetric"), "{err}");
        assert!(err.contains("(0,1)"), "{err}");
    }

    #[test]
    fn seed_override_wins_and_is_echoed() {
        let loaded = parse(minimal(), Some(1234)).unwrap();
        assert_eq!(loaded.system.seed(), 1234);
        assert_eq!(loaded.resolved.system.seed, 1234);
    }
}
