//! System configuration: one value fully determines one stochastic system
//! and its discretization, including the master seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, SymMatrix};

/// Complete description of an interacting-particle simulation.
///
/// Construction validates everything once — `n_particles ≥ 2`, `Θ`
/// symmetric positive definite (checked through the eigensolver), `σ ≥ 0`,
/// non-negative initial variances of matching length, a positive horizon —
/// so downstream code can assume a well-formed system. The spectrum of `Θ`
/// is cached at construction; `theta_max()`/`theta_min()` are the extreme
/// rates that control stiffness and mixing time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSystemConfig")]
pub struct SystemConfig {
    n_particles: usize,
    dim: usize,
    theta: SymMatrix,
    sigma: f64,
    init_variances: Vec<f64>,
    t_final: f64,
    n_steps: usize,
    seed: u64,
    #[serde(skip_serializing)]
    theta_eigenvalues: Vec<f64>,
}

/// Serde-facing mirror without the cached spectrum; deserialization funnels
/// through `SystemConfig::new` so no unvalidated value can exist.
#[derive(Deserialize)]
struct RawSystemConfig {
    n_particles: usize,
    dim: usize,
    theta: SymMatrix,
    sigma: f64,
    init_variances: Vec<f64>,
    t_final: f64,
    n_steps: usize,
    seed: u64,
}

impl TryFrom<RawSystemConfig> for SystemConfig {
    type Error = Error;

    fn try_from(raw: RawSystemConfig) -> Result<Self> {
        SystemConfig::new(
            raw.n_particles,
            raw.dim,
            raw.theta,
            raw.sigma,
            raw.init_variances,
            raw.t_final,
            raw.n_steps,
            raw.seed,
        )
    }
}

impl SystemConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_particles: usize,
        dim: usize,
        theta: SymMatrix,
        sigma: f64,
        init_variances: Vec<f64>,
        t_final: f64,
        n_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_particles must be at least 2 (got {n_particles}); a single particle has no interaction signal"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("dim must be at least 1".into()));
        }
        if theta.dim() != dim {
            return Err(Error::InvalidConfig(format!(
                "theta is {}×{0} but dim = {dim}",
                theta.dim()
            )));
        }
        if theta.as_mat().entries().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("theta has non-finite entries".into()));
        }
        let eig = sym_eigen(&theta)?;
        let smallest = *eig.values.last().expect("dim ≥ 1");
        if !(smallest > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "theta must be strictly positive definite; smallest eigenvalue is {smallest}"
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidConfig(format!("sigma must be a finite non-negative real (got {sigma})")));
        }
        if init_variances.len() != dim {
            return Err(Error::InvalidConfig(format!(
                "init_variances has length {} but dim = {dim}",
                init_variances.len()
            )));
        }
        if init_variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("init_variances entries must be finite and non-negative".into()));
        }
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidConfig(format!("t_final must be positive (got {t_final})")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be at least 1".into()));
        }
        Ok(SystemConfig {
            n_particles,
            dim,
            theta,
            sigma,
            init_variances,
            t_final,
            n_steps,
            seed,
            theta_eigenvalues: eig.values,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> &SymMatrix {
        &self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn init_variances(&self) -> &[f64] {
        &self.init_variances
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_size(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// Eigenvalues of `Θ`, descending.
    pub fn theta_eigenvalues(&self) -> &[f64] {
        &self.theta_eigenvalues
    }

    /// Largest rate θ₁ (controls the Euler stability limit).
    pub fn theta_max(&self) -> f64 {
        self.theta_eigenvalues[0]
    }

    /// Smallest rate θ_d (controls the mixing time 1/θ_d).
    pub fn theta_min(&self) -> f64 {
        *self.theta_eigenvalues.last().expect("dim ≥ 1")
    }

    /// Copy of this configuration with a different seed (no revalidation —
    /// the seed participates in no invariant).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut copy = self.clone();
        copy.seed = seed;
        copy
    }

    /// Copy with a different particle count, revalidated.
    pub fn with_particles(&self, n_particles: usize) -> Result<Self> {
        SystemConfig::new(
            n_particles,
            self.dim,
            self.theta.clone(),
            self.sigma,
            self.init_variances.clone(),
            self.t_final,
            self.n_steps,
            self.seed,
        )
    }

    /// Copy with a different horizon and step count, revalidated.
    pub fn with_horizon(&self, t_final: f64, n_steps: usize) -> Result<Self> {
        SystemConfig::new(
            self.n_particles,
            self.dim,
            self.theta.clone(),
            self.sigma,
            self.init_variances.clone(),
            t_final,
            n_steps,
            self.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta2() -> SymMatrix {
        SymMatrix::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()
    }

    fn valid() -> SystemConfig {
        SystemConfig::new(10, 2, theta2(), 1.0, vec![0.5, 0.25], 1.0, 100, 42).unwrap()
    }

    #[test]
    fn accepts_a_valid_config_and_caches_the_spectrum() {
        let c = valid();
        assert_eq!(c.step_size(), 0.01);
        // Eigenvalues of [[2, .5], [.5, 1]] are (3 ± √2)/2.
        let root2 = 2.0f64.sqrt();
        assert!((c.theta_max() - (3.0 + root2) / 2.0).abs() < 1e-14);
        assert!((c.theta_min() - (3.0 - root2) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_single_particle() {
        let err = SystemConfig::new(1, 2, theta2(), 1.0, vec![0.5, 0.25], 1.0, 100, 42);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_indefinite_theta() {
        let t = SymMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(); // eigenvalues 3, −1
        let err = SystemConfig::new(10, 2, t, 1.0, vec![0.5, 0.25], 1.0, 100, 42);
        assert!(matches!(err, Err(Error::InvalidConfig(msg)) if msg.contains("positive definite")));
    }

    #[test]
    fn rejects_singular_theta() {
        let t = SymMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(SystemConfig::new(10, 2, t, 1.0, vec![0.5, 0.25], 1.0, 100, 42).is_err());
    }

    #[test]
    fn rejects_bad_scalars() {
        assert!(SystemConfig::new(10, 2, theta2(), -1.0, vec![0.5, 0.25], 1.0, 100, 42).is_err());
        assert!(SystemConfig::new(10, 2, theta2(), 1.0, vec![0.5], 1.0, 100, 42).is_err());
        assert!(SystemConfig::new(10, 2, theta2(), 1.0, vec![0.5, -0.1], 1.0, 100, 42).is_err());
        assert!(SystemConfig::new(10, 2, theta2(), 1.0, vec![0.5, 0.25], 0.0, 100, 42).is_err());
        assert!(SystemConfig::new(10, 2, theta2(), 1.0, vec![0.5, 0.25], 1.0, 0, 42).is_err());
    }

    #[test]
    fn zero_sigma_is_allowed() {
        assert!(SystemConfig::new(10, 2, theta2(), 0.0, vec![0.5, 0.25], 1.0, 100, 42).is_ok());
    }

    #[test]
    fn serde_roundtrip_revalidates() {
        let c = valid();
        let json = serde_json::to_string(&c).unwrap();
        let back: SystemConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n_particles(), 10);
        assert_eq!(back.theta_eigenvalues().len(), 2);
        assert_eq!(back.theta(), c.theta());

        // A config that fails validation must fail to deserialize too.
        let bad = json.replace("\"n_particles\":10", "\"n_particles\":1");
        assert!(serde_json::from_str::<SystemConfig>(&bad).is_err());
    }

    #[test]
    fn builder_helpers_revalidate() {
        let c = valid();
        assert_eq!(c.clone().with_seed(7).seed(), 7);
        assert_eq!(c.clone().with_particles(50).unwrap().n_particles(), 50);
        let h = c.clone().with_horizon(2.0, 400).unwrap();
        assert_eq!(h.step_size(), 0.005);
        assert!(c.with_particles(0).is_err());
    }
}
