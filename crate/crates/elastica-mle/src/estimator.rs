//! Closed-form maximizers of the Girsanov log-likelihood.
//!
//! The likelihood is exactly quadratic in the candidate matrix (see the
//! [`likelihood`](crate::likelihood) module), so its maximizers are linear
//! algebra:
//!
//! - over all `d×d` matrices: `raw = cross · gram⁻¹`;
//! - over symmetric matrices: the solution of the Lyapunov equation
//!   `gram·A + A·gram = cross + crossᵀ`;
//! - over diagonal matrices: per-coordinate ratios `num_j / den_j`.
//!
//! The model's drift matrix is symmetric positive-definite, so the headline
//! estimator symmetrizes the unrestricted maximizer — cheap, and within
//! rounding of the truth whenever the unrestricted maximizer is. The
//! Lyapunov solution is the exact restricted stationary point; it is kept
//! separate so stationarity can be verified against first-order
//! perturbations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood_from_stats, sigma_scale, SufficientStats};
use crate::linalg::{spectral_norm, sym_eigen, Mat, SymMatrix};

/// Largest acceptable `λ_max/λ_min` of the gram matrix before the linear
/// system is treated as numerically singular.
const MAX_GRAM_CONDITION: f64 = 1e12;

/// Output of the matrix estimators.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    /// Symmetrized (headline) estimate.
    pub theta_hat: SymMatrix,
    /// Unrestricted maximizer `cross·gram⁻¹` before symmetrization.
    pub raw: Mat,
    /// Condition number `λ_max/λ_min` of the gram matrix.
    pub gram_condition: f64,
    /// Spectral-norm distance to a reference matrix, when one was supplied.
    pub spectral_error: Option<f64>,
}

impl EstimateResult {
    /// Attach the spectral-norm error against a known generating drift.
    pub fn with_truth(mut self, truth: &SymMatrix) -> Result<Self> {
        self.spectral_error = Some(spectral_error(&self.theta_hat, truth)?);
        Ok(self)
    }
}

fn gram_eigen_checked(stats: &SufficientStats) -> Result<crate::linalg::SymEigen> {
    let eig = sym_eigen(stats.gram())?;
    let d = stats.dim();
    let max = eig.values[0];
    let min = eig.values[d - 1];
    if !(min > 0.0) {
        return Err(Error::SingularGram { condition: f64::INFINITY });
    }
    let condition = max / min;
    if condition > MAX_GRAM_CONDITION {
        return Err(Error::SingularGram { condition });
    }
    Ok(eig)
}

/// Maximize the likelihood over all `d×d` matrices and symmetrize.
pub fn mle_matrix(stats: &SufficientStats) -> Result<EstimateResult> {
    let d = stats.dim();
    let eig = gram_eigen_checked(stats)?;
    let gram_condition = eig.values[0] / eig.values[d - 1];

    // raw · gram = cross  ⇒  row_l(raw) = gram⁻¹ · row_l(cross),
    // solved in the gram eigenbasis.
    let v = &eig.vectors;
    let vt = v.transpose();
    let mut raw = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut coeffs = vec![0.0; d];
    let mut solved = vec![0.0; d];
    for l in 0..d {
        rhs.copy_from_slice(stats.cross().row(l));
        vt.matvec(&rhs, &mut coeffs);
        for (c, lambda) in coeffs.iter_mut().zip(&eig.values) {
            *c /= lambda;
        }
        v.matvec(&coeffs, &mut solved);
        raw[l * d..(l + 1) * d].copy_from_slice(&solved);
    }
    let raw = Mat::from_flat(d, raw);
    let theta_hat = SymMatrix::symmetrize(&raw);
    Ok(EstimateResult { theta_hat, raw, gram_condition, spectral_error: None })
}

/// Maximize the likelihood over *symmetric* matrices: solve
/// `gram·A + A·gram = cross + crossᵀ` in the gram eigenbasis, where the
/// equation decouples entrywise to `Ã_jl = S̃_jl / (λ_j + λ_l)`.
pub fn mle_symmetric(stats: &SufficientStats) -> Result<SymMatrix> {
    let d = stats.dim();
    let eig = gram_eigen_checked(stats)?;
    let v = &eig.vectors;
    let vt = v.transpose();

    let mut sym_cross = Mat::zeros(d);
    for j in 0..d {
        for l in 0..d {
            sym_cross.set(j, l, stats.cross().get(j, l) + stats.cross().get(l, j));
        }
    }
    let s_tilde = vt.matmul(&sym_cross)?.matmul(v)?;
    let mut a_tilde = Mat::zeros(d);
    for j in 0..d {
        for l in 0..d {
            a_tilde.set(j, l, s_tilde.get(j, l) / (eig.values[j] + eig.values[l]));
        }
    }
    let a = v.matmul(&a_tilde)?.matmul(&vt)?;
    Ok(SymMatrix::symmetrize(&a))
}

/// Maximize the likelihood over diagonal matrices: `θ̂_j = num_j / den_j`.
pub fn mle_diagonal(stats: &SufficientStats) -> Result<Vec<f64>> {
    let num = stats.diagonal_numerators();
    let den = stats.diagonal_denominators();
    den.iter()
        .zip(&num)
        .enumerate()
        .map(|(index, (&den_j, &num_j))| {
            if den_j == 0.0 {
                Err(Error::ZeroDenominator { index })
            } else {
                Ok(num_j / den_j)
            }
        })
        .collect()
}

/// Spectral-norm distance `‖a − b‖₂` between symmetric matrices.
pub fn spectral_error(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare a {}×{0} matrix with a {}×{1} matrix",
            a.dim(),
            b.dim()
        )));
    }
    let d = a.dim();
    let diff = SymMatrix::from_upper(d, |j, l| a.get(j, l) - b.get(j, l));
    spectral_norm(&diff)
}

/// First-order stationarity diagnostic: the largest likelihood gain from a
/// small symmetric perturbation of `candidate`, normalized by the curvature
/// scale `δ²·‖gram‖₂/σ²`.
///
/// At an exact maximizer over symmetric matrices every perturbation loses
/// likelihood and the gap is ~0; away from one the linear term dominates
/// and the gap blows up like `|∇ℓ|/δ`. The perturbation size is
/// `δ = 10⁻⁵ (1 + ‖candidate‖₂)`.
pub fn optimality_gap(stats: &SufficientStats, candidate: &SymMatrix) -> Result<f64> {
    let d = stats.dim();
    if candidate.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "candidate is {}×{0} but the statistics are {}-dimensional",
            candidate.dim(),
            d
        )));
    }
    let curvature = spectral_norm(stats.gram())? / sigma_scale(stats.sigma());
    if curvature == 0.0 {
        return Err(Error::Domain(
            "gram matrix is zero; the likelihood has no curvature to compare against".into(),
        ));
    }
    let delta = 1e-5 * (1.0 + spectral_norm(candidate)?);
    let base = log_likelihood_from_stats(stats, candidate.as_mat())?;
    let mut worst_gain = 0.0f64;
    for j in 0..d {
        for l in j..d {
            for sign in [1.0, -1.0] {
                let perturbed = SymMatrix::from_upper(d, |r, c| {
                    let bump = if (r, c) == (j, l) || (r, c) == (l, j) { sign * delta } else { 0.0 };
                    candidate.get(r, c) + bump
                });
                let ll = log_likelihood_from_stats(stats, perturbed.as_mat())?;
                worst_gain = worst_gain.max(ll - base);
            }
        }
    }
    Ok(worst_gain / (delta * delta * curvature))
}
