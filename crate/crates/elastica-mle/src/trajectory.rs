//! Trajectory containers: discretized paths of all particles on a uniform
//! grid, optionally with the driving noise increments.

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Paths of all `N` particles at `n_steps + 1` grid times.
///
/// Storage is a flat row-major array indexed `[step][particle][coordinate]`;
/// `state(k, i)` returns the `d`-vector of particle `i` at time `times[k]`.
/// When present, `noise_increments[k][i]` holds the stochastic input that
/// moved particle `i` from step `k` to `k + 1` — `σ·ΔWⁱ_k` for the Euler
/// scheme, the exact transition innovation for the exact sampler.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    config: SystemConfig,
    times: Vec<f64>,
    states: Vec<f64>,
    noise: Option<Vec<f64>>,
}

impl TrajectoryBundle {
    /// Assemble and validate a bundle. Public so that externally produced
    /// data (e.g. a parsed trajectory file) can re-enter the typed world;
    /// the shape and grid-uniformity invariants are enforced here.
    pub fn from_parts(
        config: SystemConfig,
        times: Vec<f64>,
        states: Vec<f64>,
        noise: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = config.n_particles();
        let d = config.dim();
        let steps = config.n_steps();
        if times.len() != steps + 1 {
            return Err(Error::DimensionMismatch(format!(
                "times has {} entries, expected n_steps + 1 = {}",
                times.len(),
                steps + 1
            )));
        }
        if states.len() != (steps + 1) * n * d {
            return Err(Error::DimensionMismatch(format!(
                "states has {} entries, expected {}",
                states.len(),
                (steps + 1) * n * d
            )));
        }
        if let Some(noise) = &noise {
            if noise.len() != steps * n * d {
                return Err(Error::DimensionMismatch(format!(
                    "noise_increments has {} entries, expected {}",
                    noise.len(),
                    steps * n * d
                )));
            }
        }
        let h = config.step_size();
        let tol = 1e-12 * config.t_final().max(1.0);
        for k in 0..steps {
            let gap = times[k + 1] - times[k];
            if gap <= 0.0 || (gap - h).abs() > tol {
                return Err(Error::InvalidConfig(format!(
                    "time grid is not uniform: spacing {gap} at step {k}, expected {h}"
                )));
            }
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidConfig(format!("time grid must start at 0 (got {})", times[0])));
        }
        Ok(TrajectoryBundle { config, times, states, noise })
    }

    pub(crate) fn uniform_times(config: &SystemConfig) -> Vec<f64> {
        let h = config.step_size();
        (0..=config.n_steps()).map(|k| k as f64 * h).collect()
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps(&self) -> usize {
        self.config.n_steps()
    }

    pub fn has_noise(&self) -> bool {
        self.noise.is_some()
    }

    /// All particle states at one grid time, as a flat `N·d` slice.
    pub fn states_at(&self, step: usize) -> &[f64] {
        let nd = self.config.n_particles() * self.config.dim();
        &self.states[step * nd..(step + 1) * nd]
    }

    /// The `d`-vector of one particle at one grid time.
    pub fn state(&self, step: usize, particle: usize) -> &[f64] {
        let d = self.config.dim();
        let nd = self.config.n_particles() * d;
        let base = step * nd + particle * d;
        &self.states[base..base + d]
    }

    /// All noise increments for one step (flat `N·d`), if stored.
    pub fn noise_at(&self, step: usize) -> Option<&[f64]> {
        self.noise.as_ref().map(|noise| {
            let nd = self.config.n_particles() * self.config.dim();
            &noise[step * nd..(step + 1) * nd]
        })
    }

}

/// The interacting system and its Ornstein–Uhlenbeck shadow, driven by the
/// same noise from the same initial draw. The whole point of the pairing is
/// that `X̄ − Xⁱ + Yⁱ` collapses to a single process independent of `i`.
#[derive(Debug, Clone)]
pub struct CoupledBundle {
    pub interacting: TrajectoryBundle,
    pub decoupled: TrajectoryBundle,
}

impl CoupledBundle {
    pub(crate) fn new(interacting: TrajectoryBundle, decoupled: TrajectoryBundle) -> Result<Self> {
        if interacting.times != decoupled.times {
            return Err(Error::InvalidConfig("coupled bundles must share one time grid".into()));
        }
        match (&interacting.noise, &decoupled.noise) {
            (Some(a), Some(b)) if a == b => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "coupled bundles must both store the shared noise increments".into(),
                ))
            }
        }
        Ok(CoupledBundle { interacting, decoupled })
    }
}

/// Ensemble mean over particles of one flat `N·d` state slice, written into
/// `out` (length `d`). Single summation order — ascending particle index,
/// then one division — shared by the simulator, the statistics accumulator
/// and the diagnostics, so all of them see the identical `X̄` bit pattern.
pub(crate) fn mean_into(states: &[f64], n_particles: usize, dim: usize, out: &mut [f64]) {
    debug_assert_eq!(states.len(), n_particles * dim);
    debug_assert_eq!(out.len(), dim);
    out.fill(0.0);
    for i in 0..n_particles {
        let base = i * dim;
        for j in 0..dim {
            out[j] += states[base + j];
        }
    }
    let inv = n_particles as f64;
    for v in out.iter_mut() {
        *v /= inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn config(n: usize, steps: usize) -> SystemConfig {
        SystemConfig::new(
            n,
            1,
            SymMatrix::new(vec![vec![1.0]]).unwrap(),
            1.0,
            vec![1.0],
            1.0,
            steps,
            0,
        )
        .unwrap()
    }

    #[test]
    fn from_parts_checks_shapes() {
        let c = config(2, 2);
        let times = vec![0.0, 0.5, 1.0];
        let states = vec![0.0; 3 * 2];
        assert!(TrajectoryBundle::from_parts(c.clone(), times.clone(), states.clone(), None).is_ok());
        assert!(TrajectoryBundle::from_parts(c.clone(), vec![0.0, 0.5], states.clone(), None).is_err());
        assert!(TrajectoryBundle::from_parts(c.clone(), times.clone(), vec![0.0; 5], None).is_err());
        assert!(
            TrajectoryBundle::from_parts(c.clone(), times.clone(), states.clone(), Some(vec![0.0; 3])).is_err()
        );
        assert!(TrajectoryBundle::from_parts(c, vec![0.0, 0.6, 1.0], states, None).is_err());
    }

    #[test]
    fn accessors_slice_correctly() {
        let c = config(2, 1);
        let b = TrajectoryBundle::from_parts(
            c,
            vec![0.0, 1.0],
            vec![1.0, 2.0, 3.0, 4.0], // step 0: particles (1, 2); step 1: (3, 4)
            Some(vec![0.5, -0.5]),
        )
        .unwrap();
        assert_eq!(b.state(0, 1), &[2.0]);
        assert_eq!(b.states_at(1), &[3.0, 4.0]);
        assert_eq!(b.noise_at(0).unwrap(), &[0.5, -0.5]);
    }

    #[test]
    fn mean_reassociation_agrees_with_independent_order() {
        // Pin the helper against a reverse-order summation; agreement is to
        // rounding, not bitwise, which is exactly why one shared helper
        // exists in the first place.
        let states: Vec<f64> = (0..12).map(|i| ((i * 7919 % 23) as f64).sin()).collect();
        let (n, d) = (4, 3);
        let mut fwd = vec![0.0; d];
        mean_into(&states, n, d, &mut fwd);
        for j in 0..d {
            let mut acc = 0.0;
            for i in (0..n).rev() {
                acc += states[i * d + j];
            }
            let rev = acc / n as f64;
            assert!((fwd[j] - rev).abs() <= 1e-12 * fwd[j].abs().max(1.0));
        }
    }
}
