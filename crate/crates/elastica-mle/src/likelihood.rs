//! Girsanov log-likelihood of a candidate drift matrix and the sufficient
//! statistics that make its maximizers closed-form.
//!
//! For a candidate `A`, writing `Dⁱ_k = X̄_k − Xⁱ_k` and using left-endpoint
//! sums on the observation grid,
//!
//! ```text
//! ℓ(A) = [ Σ_k Σᵢ (A Dⁱ_k)·ΔXⁱ_k  −  ½ Σ_k h Σᵢ ‖A Dⁱ_k‖² ] / σ²
//! ```
//!
//! Both terms are linear in the pair of `d×d` sums
//!
//! ```text
//! gram  = Σ_k h Σᵢ Dⁱ_k (Dⁱ_k)ᵀ        cross = Σ_k Σᵢ ΔXⁱ_k (Dⁱ_k)ᵀ
//! ```
//!
//! so `ℓ(A) = [Σ A∘cross − ½ tr(A·gram·Aᵀ)] / σ²`, exactly quadratic in `A`.
//! `σ²` only rescales ℓ; every maximizer is σ-free, and for σ = 0 the scale
//! is taken to be 1 so the noiseless recovery identity stays finite.
//!
//! Summation order is pinned: per step, particle sums are accumulated into
//! step-local temporaries, then folded into the running totals (`gram`
//! gaining the factor `h` at the fold). The diagonal-model statistics are
//! *defined* as `num_j = cross_jj/N`, `den_j = gram_jj/N`, so the scalar and
//! matrix estimators cannot drift apart numerically.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{Mat, SymMatrix};
use crate::trajectory::{mean_into, TrajectoryBundle};

/// `σ²` with the noiseless convention: likelihoods are left unscaled when
/// `σ = 0` instead of dividing by zero.
pub(crate) fn sigma_scale(sigma: f64) -> f64 {
    if sigma == 0.0 {
        1.0
    } else {
        sigma * sigma
    }
}

/// The two matrix sums that determine the likelihood, plus the experiment
/// geometry needed to interpret them.
#[derive(Debug, Clone, Serialize)]
pub struct SufficientStats {
    gram: SymMatrix,
    cross: Mat,
    n_particles: usize,
    dim: usize,
    sigma: f64,
    t_final: f64,
    n_steps: usize,
}

impl SufficientStats {
    /// Time-integrated centered second-moment matrix `Σ_k h Σᵢ D Dᵀ`.
    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    /// Increment cross-moment `Σ_k Σᵢ ΔX Dᵀ` (rows indexed by the increment
    /// coordinate, columns by the deviation coordinate).
    pub fn cross(&self) -> &Mat {
        &self.cross
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Per-coordinate numerators of the diagonal-model estimator,
    /// `num_j = cross_jj / N` — exact by definition, not re-accumulated.
    pub fn diagonal_numerators(&self) -> Vec<f64> {
        let n = self.n_particles as f64;
        (0..self.dim).map(|j| self.cross.get(j, j) / n).collect()
    }

    /// Per-coordinate denominators, `den_j = gram_jj / N`.
    pub fn diagonal_denominators(&self) -> Vec<f64> {
        let n = self.n_particles as f64;
        (0..self.dim).map(|j| self.gram.get(j, j) / n).collect()
    }
}

/// Streaming builder for [`SufficientStats`]; feed it every transition of a
/// trajectory in order. Shared by the materialized and streaming paths so
/// their outputs are bit-identical.
pub(crate) struct StatsAccumulator {
    gram: Vec<f64>,  // upper triangle packed row-major, j ≤ l
    cross: Vec<f64>, // full d×d row-major
    step_gram: Vec<f64>,
    step_cross: Vec<f64>,
    xbar: Vec<f64>,
    n_particles: usize,
    dim: usize,
    h: f64,
    sigma: f64,
    t_final: f64,
    n_steps: usize,
}

impl StatsAccumulator {
    pub(crate) fn new(config: &SystemConfig) -> Self {
        let d = config.dim();
        StatsAccumulator {
            gram: vec![0.0; d * (d + 1) / 2],
            cross: vec![0.0; d * d],
            step_gram: vec![0.0; d * (d + 1) / 2],
            step_cross: vec![0.0; d * d],
            xbar: vec![0.0; d],
            n_particles: config.n_particles(),
            dim: d,
            h: config.step_size(),
            sigma: config.sigma(),
            t_final: config.t_final(),
            n_steps: config.n_steps(),
        }
    }

    /// Fold one transition `x_k → x_{k+1}` (flat `[particle][coordinate]`).
    pub(crate) fn accumulate(&mut self, x_k: &[f64], x_next: &[f64]) {
        let d = self.dim;
        self.step_gram.fill(0.0);
        self.step_cross.fill(0.0);
        mean_into(x_k, self.n_particles, d, &mut self.xbar);
        for i in 0..self.n_particles {
            let base = i * d;
            for j in 0..d {
                let dev_j = self.xbar[j] - x_k[base + j];
                let inc_j = x_next[base + j] - x_k[base + j];
                let tri0 = j * d - j * (j.wrapping_sub(1)) / 2;
                for l in j..d {
                    let dev_l = self.xbar[l] - x_k[base + l];
                    self.step_gram[tri0 + (l - j)] += dev_j * dev_l;
                    self.step_cross[j * d + l] += inc_j * dev_l;
                }
                for l in 0..j {
                    let dev_l = self.xbar[l] - x_k[base + l];
                    self.step_cross[j * d + l] += inc_j * dev_l;
                }
            }
        }
        for (total, step) in self.gram.iter_mut().zip(&self.step_gram) {
            *total += self.h * step;
        }
        for (total, step) in self.cross.iter_mut().zip(&self.step_cross) {
            *total += step;
        }
    }

    pub(crate) fn finish(self) -> SufficientStats {
        let d = self.dim;
        let gram_packed = self.gram;
        let gram = SymMatrix::from_upper(d, |j, l| {
            // packed upper-triangle index for j ≤ l
            gram_packed[j * d - j * (j.wrapping_sub(1)) / 2 + (l - j)]
        });
        SufficientStats {
            gram,
            cross: Mat::from_flat(d, self.cross),
            n_particles: self.n_particles,
            dim: d,
            sigma: self.sigma,
            t_final: self.t_final,
            n_steps: self.n_steps,
        }
    }
}

/// Compute the sufficient statistics of a materialized trajectory.
pub fn sufficient_stats(bundle: &TrajectoryBundle) -> SufficientStats {
    let mut acc = StatsAccumulator::new(bundle.config());
    for k in 0..bundle.n_steps() {
        acc.accumulate(bundle.states_at(k), bundle.states_at(k + 1));
    }
    acc.finish()
}

/// Direct evaluation of `ℓ(A)` by summing over every transition. Accepts an
/// arbitrary (not necessarily symmetric) candidate.
pub fn log_likelihood(bundle: &TrajectoryBundle, candidate: &Mat) -> Result<f64> {
    let config = bundle.config();
    let d = config.dim();
    if candidate.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "candidate is {}×{} but the system dimension is {d}",
            candidate.dim(),
            candidate.dim()
        )));
    }
    let n = config.n_particles();
    let h = config.step_size();
    let mut xbar = vec![0.0; d];
    let mut dev = vec![0.0; d];
    let mut adev = vec![0.0; d];
    let mut ito = 0.0;
    let mut quad = 0.0;
    for k in 0..bundle.n_steps() {
        let x_k = bundle.states_at(k);
        let x_next = bundle.states_at(k + 1);
        mean_into(x_k, n, d, &mut xbar);
        let mut step_ito = 0.0;
        let mut step_quad = 0.0;
        for i in 0..n {
            let base = i * d;
            for j in 0..d {
                dev[j] = xbar[j] - x_k[base + j];
            }
            candidate.matvec(&dev, &mut adev);
            for j in 0..d {
                step_ito += adev[j] * (x_next[base + j] - x_k[base + j]);
                step_quad += adev[j] * adev[j];
            }
        }
        ito += step_ito;
        quad += h * step_quad;
    }
    Ok((ito - 0.5 * quad) / sigma_scale(config.sigma()))
}

/// Evaluate `ℓ(A)` from sufficient statistics:
/// `[Σ A∘cross − ½ tr(A·gram·Aᵀ)] / σ²`.
pub fn log_likelihood_from_stats(stats: &SufficientStats, candidate: &Mat) -> Result<f64> {
    let d = stats.dim();
    if candidate.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "candidate is {}×{} but the statistics are {d}-dimensional",
            candidate.dim(),
            candidate.dim()
        )));
    }
    let mut ito = 0.0;
    for j in 0..d {
        for l in 0..d {
            ito += candidate.get(j, l) * stats.cross().get(j, l);
        }
    }
    let ag = candidate.matmul(stats.gram().as_mat())?;
    let mut quad = 0.0;
    for j in 0..d {
        for l in 0..d {
            quad += ag.get(j, l) * candidate.get(j, l);
        }
    }
    Ok((ito - 0.5 * quad) / sigma_scale(stats.sigma()))
}

/// Evaluate `ℓ(A)` for a symmetric candidate through the trace identity
///
/// ```text
/// ℓ(A) = Σ_k { h · tr[S_k (AΘ − ½A²)] + Σᵢ (A Dⁱ_k)·ξⁱ_k } / σ²
/// ```
///
/// where `S_k = Σᵢ D Dᵀ`, `Θ` is the generating drift from the bundle's
/// configuration, and `ξⁱ_k` are the stored noise increments. On data
/// produced by the Euler–Maruyama scheme this agrees with
/// [`log_likelihood`] as an algebraic identity (up to rounding), because
/// `ΔXⁱ = hΘDⁱ + ξⁱ` holds exactly per transition.
pub fn log_likelihood_trace_form(bundle: &TrajectoryBundle, candidate: &SymMatrix) -> Result<f64> {
    let config = bundle.config();
    let d = config.dim();
    if candidate.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "candidate is {}×{} but the system dimension is {d}",
            candidate.dim(),
            candidate.dim()
        )));
    }
    if !bundle.has_noise() {
        return Err(Error::MissingNoise);
    }
    let n = config.n_particles();
    let h = config.step_size();
    let a = candidate.as_mat();
    // B = AΘ − ½A², constant across steps.
    let a_theta = a.matmul(config.theta().as_mat())?;
    let a_sq = a.matmul(a)?;
    let mut b = vec![0.0; d * d];
    for j in 0..d {
        for l in 0..d {
            b[j * d + l] = a_theta.get(j, l) - 0.5 * a_sq.get(j, l);
        }
    }

    let mut xbar = vec![0.0; d];
    let mut dev = vec![0.0; d];
    let mut adev = vec![0.0; d];
    let mut s_k = vec![0.0; d * d];
    let mut total = 0.0;
    for k in 0..bundle.n_steps() {
        let x_k = bundle.states_at(k);
        let noise = bundle.noise_at(k).expect("noise presence checked above");
        mean_into(x_k, n, d, &mut xbar);
        s_k.fill(0.0);
        let mut step_ito = 0.0;
        for i in 0..n {
            let base = i * d;
            for j in 0..d {
                dev[j] = xbar[j] - x_k[base + j];
            }
            for j in 0..d {
                for l in 0..d {
                    s_k[j * d + l] += dev[j] * dev[l];
                }
            }
            candidate.matvec(&dev, &mut adev);
            for j in 0..d {
                step_ito += adev[j] * noise[base + j];
            }
        }
        // tr(S_k B) = Σ_{j,l} S_k[j,l] B[l,j]
        let mut trace = 0.0;
        for j in 0..d {
            for l in 0..d {
                trace += s_k[j * d + l] * b[l * d + j];
            }
        }
        total += h * trace + step_ito;
    }
    Ok(total / sigma_scale(config.sigma()))
}

/// Empirical centered second-moment matrix `M_k = (1/N) Σᵢ D D ᵀ` at one
/// grid step.
pub fn mean_field_covariance(bundle: &TrajectoryBundle, step: usize) -> Result<SymMatrix> {
    let config = bundle.config();
    if step > bundle.n_steps() {
        return Err(Error::DimensionMismatch(format!(
            "step {step} out of range (trajectory has {} steps)",
            bundle.n_steps()
        )));
    }
    let n = config.n_particles();
    let d = config.dim();
    let states = bundle.states_at(step);
    let mut xbar = vec![0.0; d];
    mean_into(states, n, d, &mut xbar);
    let mut m = vec![0.0; d * d];
    for i in 0..n {
        let base = i * d;
        for j in 0..d {
            let dev_j = xbar[j] - states[base + j];
            for l in j..d {
                m[j * d + l] += dev_j * (xbar[l] - states[base + l]);
            }
        }
    }
    let scale = 1.0 / n as f64;
    Ok(SymMatrix::from_upper(d, |j, l| m[j * d + l] * scale))
}
