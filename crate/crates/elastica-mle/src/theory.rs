//! Closed-form theoretical quantities: Ornstein–Uhlenbeck moments, the
//! non-asymptotic estimator error bound, concentration thresholds, the
//! decoupling constants, and the χ² moment-generating-function pieces the
//! concentration proofs rest on.
//!
//! Evaluators are deliberately permissive: each formula is a plain function
//! of its inputs, and the hypotheses under which the probability guarantee
//! actually holds are checked separately ([`theorem_preconditions`]) so
//! experiments can probe regimes where the theory is silent. The one
//! exception is [`rate_bound`], which refuses the structurally meaningless
//! cases (`N < 400`, `ε ∉ (0,1)`, nonpositive scales); use
//! [`rate_bound_value`] for the raw formula.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Fewest particles for which the error-bound guarantee is stated.
pub const MIN_PARTICLES_FOR_BOUND: usize = 400;

/// Zero-mean Ornstein–Uhlenbeck marginals at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuMoments {
    /// Always zero: the process starts centered and the drift is linear.
    pub mean: f64,
    /// `Var Y_t = (1/2θ)[σ² − (σ² − 2θτ²)e^{−2θt}]`.
    pub variance: f64,
}

/// Marginal mean and variance of `dY = −θY dt + σ dW`, `Y₀ ∼ N(0, τ²)`.
pub fn ou_moments(theta: f64, sigma: f64, tau2: f64, t: f64) -> Result<OuMoments> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("mean-reversion rate must be positive, got {theta}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("volatility must be non-negative, got {sigma}")));
    }
    if !(tau2 >= 0.0) || !tau2.is_finite() {
        return Err(Error::Domain(format!("initial variance must be non-negative, got {tau2}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    // Stable rearrangement: σ²/(2θ)·(1 − e^{−2θt}) + τ²e^{−2θt}, with the
    // first factor through exp_m1 so t → 0 degrades gracefully.
    let decay = (-2.0 * theta * t).exp();
    let variance = sigma * sigma * (-(-2.0 * theta * t).exp_m1()) / (2.0 * theta) + tau2 * decay;
    Ok(OuMoments { mean: 0.0, variance })
}

/// Raw value of the estimator error bound
/// `24 σ θ₁^{1/2} (2d·log(d/ε) / (Nt))^{1/2}` with no hypothesis checks.
pub fn rate_bound_value(sigma: f64, theta1: f64, d: usize, n: usize, t: f64, eps: f64) -> f64 {
    let inner = 2.0 * d as f64 * (d as f64 / eps).ln() / (n as f64 * t);
    24.0 * sigma * theta1.sqrt() * inner.sqrt()
}

/// Checked evaluation of the error bound. The horizon hypothesis `t ≥ 1/θ_d`
/// depends on the full spectrum and stays the caller's responsibility (see
/// [`theorem_preconditions`]); this function rejects only what makes the
/// formula itself meaningless or the guarantee unobtainable at any horizon.
pub fn rate_bound(sigma: f64, theta1: f64, d: usize, n: usize, t: f64, eps: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(theta1 > 0.0 && theta1.is_finite()) || d == 0 {
        return Err(Error::Domain(
            "error bound needs σ > 0, θ₁ > 0 and dimension ≥ 1".into(),
        ));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {t}")));
    }
    if n < MIN_PARTICLES_FOR_BOUND {
        return Err(Error::Precondition(format!(
            "the error-bound guarantee requires N ≥ 400 particles, got {n}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!(
            "confidence parameter must satisfy 0 < ε < 1, got {eps}"
        )));
    }
    Ok(rate_bound_value(sigma, theta1, d, n, t, eps))
}

/// One violated hypothesis of the error-bound guarantee.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum TheoremViolation {
    /// `t ≥ 1/θ_d` fails (θ_d = smallest drift eigenvalue).
    HorizonTooShort { t_final: f64, required: f64 },
    /// `N ≥ 400` fails.
    TooFewParticles { n: usize, required: usize },
    /// `ε ∈ [e^{−N/400}, 1)` fails.
    EpsilonOutsideWindow { eps: f64, floor: f64 },
}

impl std::fmt::Display for TheoremViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TheoremViolation::HorizonTooShort { t_final, required } => {
                write!(f, "horizon hypothesis t ≥ 1/θ_d violated: t = {t_final} < {required}")
            }
            TheoremViolation::TooFewParticles { n, required } => {
                write!(f, "particle-count hypothesis N ≥ {required} violated: N = {n}")
            }
            TheoremViolation::EpsilonOutsideWindow { eps, floor } => {
                write!(f, "confidence hypothesis ε ∈ [e^(−N/400), 1) violated: ε = {eps}, window floor = {floor}")
            }
        }
    }
}

/// Check every hypothesis of the error-bound guarantee and return the
/// violated ones (empty means the guarantee applies as stated).
pub fn theorem_preconditions(config: &SystemConfig, eps: f64) -> Vec<TheoremViolation> {
    let mut violations = Vec::new();
    let required_t = 1.0 / config.theta_min();
    if config.t_final() < required_t {
        violations.push(TheoremViolation::HorizonTooShort {
            t_final: config.t_final(),
            required: required_t,
        });
    }
    let n = config.n_particles();
    if n < MIN_PARTICLES_FOR_BOUND {
        violations
            .push(TheoremViolation::TooFewParticles { n, required: MIN_PARTICLES_FOR_BOUND });
    }
    let floor = (-(n as f64) / 400.0).exp();
    if !(eps >= floor && eps < 1.0) {
        violations.push(TheoremViolation::EpsilonOutsideWindow { eps, floor });
    }
    violations
}

/// The constants governing the decoupling error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecouplingConstants {
    /// `C₁ = 1/(2N) + L/N + (1/N)√(L/2)` with `L = log(1/ε)`.
    pub c1: f64,
    /// `C₂ = 1/2 + L/N + √(L/(2N))`.
    pub c2: f64,
    /// `C = √(C₁(2C₁ + 8C₂))`.
    pub c: f64,
    pub eps: f64,
    pub n: usize,
}

/// Evaluate the decoupling constants at a confidence level and system size.
pub fn decoupling_constants(eps: f64, n: usize) -> Result<DecouplingConstants> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("confidence parameter must be in (0,1), got {eps}")));
    }
    if n == 0 {
        return Err(Error::Domain("particle count must be at least 1".into()));
    }
    let nf = n as f64;
    let l = (1.0 / eps).ln();
    let c1 = 0.5 / nf + l / nf + (l / 2.0).sqrt() / nf;
    let c2 = 0.5 + l / nf + (l / (2.0 * nf)).sqrt();
    let c = (c1 * (2.0 * c1 + 8.0 * c2)).sqrt();
    Ok(DecouplingConstants { c1, c2, c, eps, n })
}

/// Deviation threshold for the time-averaged squared-process fluctuation:
/// `(tσ²/θ)(L/N + √(L/(2N)))`, exceeded with probability at most `2ε`.
pub fn fluctuation_threshold(t: f64, theta: f64, sigma: f64, n: usize, eps: f64) -> Result<f64> {
    check_threshold_args(t, theta, sigma, n, eps)?;
    let nf = n as f64;
    let l = (1.0 / eps).ln();
    Ok(t * sigma * sigma / theta * (l / nf + (l / (2.0 * nf)).sqrt()))
}

/// Deviation threshold for the averaged Itô integral of the process against
/// its own driving noise: `σ√(2tL/(Nθ))`, exceeded with probability at most
/// `4ε` for `ε ≥ e^{−N/16}`.
pub fn martingale_threshold(t: f64, theta: f64, sigma: f64, n: usize, eps: f64) -> Result<f64> {
    check_threshold_args(t, theta, sigma, n, eps)?;
    let l = (1.0 / eps).ln();
    Ok(sigma * (2.0 * t * l / (n as f64 * theta)).sqrt())
}

fn check_threshold_args(t: f64, theta: f64, sigma: f64, n: usize, eps: f64) -> Result<()> {
    if !(t > 0.0) || !(theta > 0.0) || !(sigma >= 0.0) || n == 0 {
        return Err(Error::Domain(
            "thresholds need t > 0, θ > 0, σ ≥ 0 and at least one particle".into(),
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("confidence parameter must be in (0,1), got {eps}")));
    }
    Ok(())
}

/// Log moment generating function of a centered χ²(1) variable:
/// `φ(u) = log E e^{u(Z²−1)} = −u − ½log(1−2u)` for `u < 1/2`.
pub fn chi2_log_mgf(u: f64) -> Result<f64> {
    if !(u < 0.5) {
        return Err(Error::Domain(format!(
            "the χ² moment generating function diverges for u ≥ 1/2, got {u}"
        )));
    }
    Ok(-u - 0.5 * (-2.0 * u).ln_1p())
}

/// The sub-gamma upper bound on [`chi2_log_mgf`]: `u²/(1−2u)` on `(0, ½)`
/// and `u²` on `(−½, 0]`.
pub fn chi2_log_mgf_bound(u: f64) -> Result<f64> {
    if !(u > -0.5 && u < 0.5) {
        return Err(Error::Domain(format!(
            "the moment bound is only stated for −1/2 < u < 1/2, got {u}"
        )));
    }
    if u > 0.0 {
        Ok(u * u / (1.0 - 2.0 * u))
    } else {
        Ok(u * u)
    }
}

/// Sub-gamma tail threshold: a centered variable whose log-MGF is bounded by
/// `vu²/(2(1−cu))` satisfies `P(Z ≥ cx + √(2vx)) ≤ e^{−x}`.
pub fn mgf_tail_threshold(v: f64, c: f64, x: f64) -> Result<f64> {
    if !(v > 0.0) || !(c >= 0.0) || !(x > 0.0) {
        return Err(Error::Domain(
            "tail threshold needs variance factor v > 0, scale c ≥ 0 and level x > 0".into(),
        ));
    }
    Ok(c * x + (2.0 * v * x).sqrt())
}

/// Lower bound used for the denominator of the scalar estimator: for
/// `θt ≥ 1` and stationary-or-smaller initialization the normalized
/// denominator mass exceeds `(1 + e⁻²)/4 − 0.2 ≥ 1/12`.
pub fn denominator_mass_constant() -> f64 {
    (1.0 + (-2.0f64).exp()) / 4.0 - 0.2
}
