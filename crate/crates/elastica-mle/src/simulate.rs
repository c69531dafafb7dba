//! Path generation: Euler–Maruyama for the interacting system, exact
//! transitions for the decoupled Ornstein–Uhlenbeck processes, and the
//! noise-coupled pair used to study the decoupling error.
//!
//! Scheme choices that matter downstream:
//!
//! - The interacting system uses Euler–Maruyama, not exact augmented-OU
//!   sampling. The estimator's integrals are left-endpoint sums over the
//!   same grid, so under EM the noiseless estimator recovers `Θ` exactly
//!   and the two likelihood forms agree as algebraic identities.
//! - The coupled OU shadow also uses EM with the *same* noise, so the
//!   difference process identity holds exactly at the discrete level. The
//!   exact transition sampler exists separately for marginal-law tests.
//! - Per-particle noise comes from streams derived as
//!   `derive_stream_seed(config.seed, 0, particle)`; nothing depends on
//!   execution order.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, SymMatrix};
use crate::rng::{derive_stream_seed, GaussianStream};
use crate::trajectory::{mean_into, CoupledBundle, TrajectoryBundle};

/// Hard stability limit for the explicit Euler drift step.
const EULER_STABILITY_LIMIT: f64 = 0.5;

/// Testing-only size cap for materializing the `(Nd)×(Nd)` block matrix.
const INTERACTION_MATRIX_CAP: usize = 4096;

fn check_stability(config: &SystemConfig) -> Result<()> {
    let h_theta1 = config.step_size() * config.theta_max();
    if h_theta1 > EULER_STABILITY_LIMIT {
        return Err(Error::Stability { h_theta1 });
    }
    Ok(())
}

fn particle_streams(config: &SystemConfig) -> Vec<GaussianStream> {
    (0..config.n_particles())
        .map(|i| GaussianStream::new(derive_stream_seed(config.seed(), 0, i as u64)))
        .collect()
}

/// Draw the i.i.d. Gaussian initial states `ξⁱ ∼ N(0, diag(τ²))`, consuming
/// the first `d` variates of each particle stream.
fn gaussian_init(config: &SystemConfig, streams: &mut [GaussianStream]) -> Vec<f64> {
    let d = config.dim();
    let sds: Vec<f64> = config.init_variances().iter().map(|v| v.sqrt()).collect();
    let mut init = vec![0.0; config.n_particles() * d];
    for (i, stream) in streams.iter_mut().enumerate() {
        for j in 0..d {
            init[i * d + j] = sds[j] * stream.next_gaussian();
        }
    }
    init
}

/// Drive the interacting Euler–Maruyama recursion
/// `Xⁱ_{k+1} = Xⁱ_k + h·Θ(X̄_k − Xⁱ_k) + σ√h·Zⁱ_k`
/// and hand each transition to `observer(k, x_k, x_{k+1}, noise_k)`.
///
/// This is the single implementation of the scheme; materializing and
/// streaming consumers both run through it, so their states are
/// bit-identical by construction.
pub(crate) fn drive_interacting<F>(
    config: &SystemConfig,
    init: Vec<f64>,
    streams: &mut [GaussianStream],
    mut observer: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64], &[f64], &[f64]),
{
    check_stability(config)?;
    let n = config.n_particles();
    let d = config.dim();
    let h = config.step_size();
    let noise_scale = config.sigma() * h.sqrt();

    let mut x = init;
    let mut x_next = vec![0.0; n * d];
    let mut noise = vec![0.0; n * d];
    let mut xbar = vec![0.0; d];
    let mut dev = vec![0.0; d];
    let mut drift = vec![0.0; d];

    for k in 0..config.n_steps() {
        for (i, stream) in streams.iter_mut().enumerate() {
            for j in 0..d {
                noise[i * d + j] = noise_scale * stream.next_gaussian();
            }
        }
        mean_into(&x, n, d, &mut xbar);
        for i in 0..n {
            let base = i * d;
            for j in 0..d {
                dev[j] = xbar[j] - x[base + j];
            }
            config.theta().matvec(&dev, &mut drift);
            for j in 0..d {
                x_next[base + j] = x[base + j] + h * drift[j] + noise[base + j];
            }
        }
        observer(k, &x, &x_next, &noise);
        std::mem::swap(&mut x, &mut x_next);
    }
    Ok(())
}

struct PathRecorder {
    states: Vec<f64>,
    noise: Option<Vec<f64>>,
}

impl PathRecorder {
    fn new(config: &SystemConfig, init: &[f64], store_noise: bool) -> Self {
        let nd = config.n_particles() * config.dim();
        let mut states = Vec::with_capacity((config.n_steps() + 1) * nd);
        states.extend_from_slice(init);
        let noise = store_noise.then(|| Vec::with_capacity(config.n_steps() * nd));
        PathRecorder { states, noise }
    }

    fn record(&mut self, x_next: &[f64], noise: &[f64]) {
        self.states.extend_from_slice(x_next);
        if let Some(stored) = &mut self.noise {
            stored.extend_from_slice(noise);
        }
    }

    fn finish(self, config: SystemConfig) -> Result<TrajectoryBundle> {
        let times = TrajectoryBundle::uniform_times(&config);
        TrajectoryBundle::from_parts(config, times, self.states, self.noise)
    }
}

/// Simulate the interacting `N`-particle system with Gaussian initialization.
pub fn simulate_interacting(config: &SystemConfig, store_noise: bool) -> Result<TrajectoryBundle> {
    let mut streams = particle_streams(config);
    let init = gaussian_init(config, &mut streams);
    simulate_interacting_with(config, init, &mut streams, store_noise)
}

/// Same scheme, caller-supplied initial states. Used by tests that need a
/// deterministic non-Gaussian start (the public entry point is
/// Gaussian-only by design).
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn simulate_interacting_from(
    config: &SystemConfig,
    init: Vec<f64>,
    store_noise: bool,
) -> Result<TrajectoryBundle> {
    let mut streams = particle_streams(config);
    // Keep stream alignment identical to the Gaussian path: the init draw
    // is skipped, so noise consumption starts at the same offset only if we
    // burn the init variates. Deliberately NOT done — a pinned-ξ run is its
    // own experiment, not a replay of a Gaussian one.
    simulate_interacting_with(config, init, &mut streams, store_noise)
}

fn simulate_interacting_with(
    config: &SystemConfig,
    init: Vec<f64>,
    streams: &mut [GaussianStream],
    store_noise: bool,
) -> Result<TrajectoryBundle> {
    let mut rec = PathRecorder::new(config, &init, store_noise);
    drive_interacting(config, init, streams, |_, _, x_next, noise| rec.record(x_next, noise))?;
    rec.finish(config.clone())
}

/// Feed the interacting system through an observer without materializing
/// any trajectory. `observer(k, x_k, x_{k+1}, noise_k)` sees exactly the
/// states `simulate_interacting` would store.
pub(crate) fn stream_interacting<F>(config: &SystemConfig, observer: F) -> Result<()>
where
    F: FnMut(usize, &[f64], &[f64], &[f64]),
{
    let mut streams = particle_streams(config);
    let init = gaussian_init(config, &mut streams);
    drive_interacting(config, init, &mut streams, observer)
}

/// Simulate `N` independent OU processes by the exact Gaussian transition.
///
/// In the eigenbasis `Θ = VΛVᵀ` each coordinate updates independently as
/// `y ← e^{−λh} y + η` with `Var(η) = σ²(1 − e^{−2λh})/(2λ)`, so every
/// grid-time marginal is exact — no discretization bias at any step size.
/// Stored "noise increments" are the transition innovations `Vη` (not
/// `σ·ΔW`; the exact sampler has no Brownian increments to expose).
pub fn simulate_ou_exact(config: &SystemConfig, store_noise: bool) -> Result<TrajectoryBundle> {
    let mut streams = particle_streams(config);
    let init = gaussian_init(config, &mut streams);
    simulate_ou_exact_from(config, init, &mut streams, store_noise)
}

pub(crate) fn simulate_ou_exact_from(
    config: &SystemConfig,
    init: Vec<f64>,
    streams: &mut [GaussianStream],
    store_noise: bool,
) -> Result<TrajectoryBundle> {
    let n = config.n_particles();
    let d = config.dim();
    let h = config.step_size();
    let sigma = config.sigma();
    let eig = sym_eigen(config.theta())?;

    let decay: Vec<f64> = eig.values.iter().map(|l| (-l * h).exp()).collect();
    // σ²(1−e^{−2λh})/(2λ) computed via exp_m1 to stay accurate for λh ≪ 1.
    let innov_sd: Vec<f64> = eig
        .values
        .iter()
        .map(|l| (sigma * sigma * (-(-2.0 * l * h).exp_m1()) / (2.0 * l)).sqrt())
        .collect();

    let mut rec = PathRecorder::new(config, &init, store_noise);
    let mut x = init;
    let mut y = vec![0.0; d];
    let mut eta = vec![0.0; d];
    let mut noise = vec![0.0; n * d];
    let vt = eig.vectors.transpose();

    for _k in 0..config.n_steps() {
        for (i, stream) in streams.iter_mut().enumerate() {
            let base = i * d;
            let xi = &mut x[base..base + d];
            vt.matvec(xi, &mut y);
            for j in 0..d {
                eta[j] = innov_sd[j] * stream.next_gaussian();
                y[j] = decay[j] * y[j] + eta[j];
            }
            eig.vectors.matvec(&y, xi);
            eig.vectors.matvec(&eta, &mut noise[base..base + d]);
        }
        rec.record(&x, &noise);
    }
    rec.finish(config.clone())
}

/// Euler–Maruyama for the same independent OU processes, with stored noise.
/// Exists because Itô sums against the driving noise need actual Brownian
/// increments, which the exact sampler cannot provide.
pub(crate) fn simulate_ou_euler(config: &SystemConfig, store_noise: bool) -> Result<TrajectoryBundle> {
    check_stability(config)?;
    let mut streams = particle_streams(config);
    let init = gaussian_init(config, &mut streams);

    let n = config.n_particles();
    let d = config.dim();
    let h = config.step_size();
    let noise_scale = config.sigma() * h.sqrt();

    let mut rec = PathRecorder::new(config, &init, store_noise);
    let mut x = init;
    let mut noise = vec![0.0; n * d];
    let mut drift = vec![0.0; d];

    for _k in 0..config.n_steps() {
        for (i, stream) in streams.iter_mut().enumerate() {
            let base = i * d;
            for j in 0..d {
                noise[base + j] = noise_scale * stream.next_gaussian();
            }
            config.theta().matvec(&x[base..base + d], &mut drift);
            for j in 0..d {
                x[base + j] += -h * drift[j] + noise[base + j];
            }
        }
        rec.record(&x, &noise);
    }
    rec.finish(config.clone())
}

/// Simulate the interacting system and its OU shadow from the same initial
/// draw and the same per-particle noise. Both bundles store the noise.
///
/// The payoff: `Δⁱ_k = X̄_k − Xⁱ_k + Yⁱ_k` satisfies the same linear
/// recursion for every `i` with identical input, so the `N` difference
/// processes coincide (up to rounding) — the decoupling device.
pub fn simulate_coupled(config: &SystemConfig) -> Result<CoupledBundle> {
    check_stability(config)?;
    let mut streams = particle_streams(config);
    let init = gaussian_init(config, &mut streams);

    let n = config.n_particles();
    let d = config.dim();
    let h = config.step_size();
    let noise_scale = config.sigma() * h.sqrt();

    let mut rec_x = PathRecorder::new(config, &init, true);
    let mut rec_y = PathRecorder::new(config, &init, true);
    let mut x = init.clone();
    let mut y = init;
    let mut x_next = vec![0.0; n * d];
    let mut noise = vec![0.0; n * d];
    let mut xbar = vec![0.0; d];
    let mut dev = vec![0.0; d];
    let mut drift = vec![0.0; d];

    for _k in 0..config.n_steps() {
        for (i, stream) in streams.iter_mut().enumerate() {
            for j in 0..d {
                noise[i * d + j] = noise_scale * stream.next_gaussian();
            }
        }
        mean_into(&x, n, d, &mut xbar);
        for i in 0..n {
            let base = i * d;
            for j in 0..d {
                dev[j] = xbar[j] - x[base + j];
            }
            config.theta().matvec(&dev, &mut drift);
            for j in 0..d {
                x_next[base + j] = x[base + j] + h * drift[j] + noise[base + j];
            }
            // OU shadow: same noise, drift −Θ·Yⁱ.
            config.theta().matvec(&y[base..base + d], &mut drift);
            for j in 0..d {
                y[base + j] += -h * drift[j] + noise[base + j];
            }
        }
        rec_x.record(&x_next, &noise);
        rec_y.record(&y, &noise);
        std::mem::swap(&mut x, &mut x_next);
    }

    let interacting = rec_x.finish(config.clone())?;
    let decoupled = rec_y.finish(config.clone())?;
    CoupledBundle::new(interacting, decoupled)
}

/// Ensemble mean path, flat `[step][coordinate]`.
pub fn mean_process(bundle: &TrajectoryBundle) -> Vec<f64> {
    let n = bundle.config().n_particles();
    let d = bundle.config().dim();
    let steps = bundle.n_steps();
    let mut out = vec![0.0; (steps + 1) * d];
    for k in 0..=steps {
        mean_into(bundle.states_at(k), n, d, &mut out[k * d..(k + 1) * d]);
    }
    out
}

/// Per-coordinate sum of squared increments of a flat `[step][coordinate]`
/// path — the discrete quadratic variation.
pub fn empirical_quadratic_variation(path: &[f64], dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !path.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch(format!(
            "path of length {} is not a whole number of {dim}-vectors",
            path.len()
        )));
    }
    let rows = path.len() / dim;
    if rows < 2 {
        return Err(Error::Precondition("quadratic variation needs at least two time points".into()));
    }
    let mut qv = vec![0.0; dim];
    for k in 0..rows - 1 {
        for j in 0..dim {
            let inc = path[(k + 1) * dim + j] - path[k * dim + j];
            qv[j] += inc * inc;
        }
    }
    Ok(qv)
}

/// Materialize the `(Nd)×(Nd)` centering matrix with `(1−1/N)·I_d` diagonal
/// blocks and `−(1/N)·I_d` off-diagonal blocks. It is the orthogonal
/// projection onto mean-zero particle configurations (`H² = H`), which is
/// what makes the augmented drift of the full system rank-deficient by
/// exactly `d`.
pub fn interaction_matrix(n: usize, d: usize) -> Result<SymMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("interaction matrix needs n ≥ 1 and d ≥ 1".into()));
    }
    let size = n * d;
    if size > INTERACTION_MATRIX_CAP {
        return Err(Error::SizeCap { requested: size, cap: INTERACTION_MATRIX_CAP });
    }
    let inv = 1.0 / n as f64;
    let diag = 1.0 - inv;
    Ok(SymMatrix::from_upper(size, |r, c| {
        let (i, a) = (r / d, r % d);
        let (ip, b) = (c / d, c % d);
        if a != b {
            0.0
        } else if i == ip {
            diag
        } else {
            -inv
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;

    fn scalar_config(n: usize, theta: f64, sigma: f64, tau2: f64, t: f64, steps: usize) -> SystemConfig {
        SystemConfig::new(
            n,
            1,
            SymMatrix::new(vec![vec![theta]]).unwrap(),
            sigma,
            vec![tau2],
            t,
            steps,
            0xC0FFEE,
        )
        .unwrap()
    }

    #[test]
    fn unstable_step_is_rejected() {
        let c = scalar_config(2, 1.0, 1.0, 1.0, 1.0, 1); // h·θ₁ = 1
        match simulate_interacting(&c, false) {
            Err(Error::Stability { h_theta1 }) => assert_eq!(h_theta1, 1.0),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_consensus_is_a_fixed_point() {
        let c = scalar_config(3, 1.0, 0.0, 0.0, 1.0, 50);
        let b = simulate_interacting_from(&c, vec![1.73, 1.73, 1.73], false).unwrap();
        for k in 0..=50 {
            for i in 0..3 {
                assert_eq!(b.state(k, i)[0], 1.73, "consensus must be exact at step {k}");
            }
        }
    }

    #[test]
    fn noiseless_two_particle_gap_decays_exponentially() {
        let c = scalar_config(2, 1.0, 0.0, 0.0, 1.0, 10_000);
        let b = simulate_interacting_from(&c, vec![1.0, -1.0], false).unwrap();
        let gap = b.state(10_000, 0)[0] - b.state(10_000, 1)[0];
        let want = 2.0 * (-1.0f64).exp();
        assert!((gap - want).abs() <= 1e-3, "gap {gap} vs 2e⁻¹ = {want}");
    }

    #[test]
    fn mean_increments_equal_average_noise() {
        let c = SystemConfig::new(
            7,
            2,
            SymMatrix::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            1.0,
            vec![0.5, 0.25],
            1.0,
            200,
            99,
        )
        .unwrap();
        let b = simulate_interacting(&c, true).unwrap();
        let means = mean_process(&b);
        let d = 2;
        let mut avg_noise = vec![0.0; d];
        for k in 0..200 {
            mean_into(b.noise_at(k).unwrap(), 7, d, &mut avg_noise);
            for j in 0..d {
                let mean_inc = means[(k + 1) * d + j] - means[k * d + j];
                // The interaction drift sums to zero analytically; in floating
                // point the cancellation leaves ~1e−16-level residue, so this
                // is a tight tolerance test rather than a bitwise one.
                assert!(
                    (mean_inc - avg_noise[j]).abs() <= 1e-13,
                    "drift failed to cancel at step {k}: {mean_inc} vs {avg_noise:?}"
                );
            }
        }
    }

    #[test]
    fn identical_config_gives_bitwise_identical_paths() {
        let c = scalar_config(4, 1.0, 1.0, 0.5, 1.0, 64);
        let a = simulate_interacting(&c, true).unwrap();
        let b = simulate_interacting(&c, true).unwrap();
        for k in 0..=64 {
            assert_eq!(a.states_at(k), b.states_at(k));
        }
        assert_eq!(a.noise_at(0).unwrap(), b.noise_at(0).unwrap());
    }

    #[test]
    fn exact_ou_with_zero_noise_is_pure_decay() {
        let c = scalar_config(2, 1.0, 0.0, 0.0, 1.0, 10);
        let mut streams = vec![GaussianStream::new(1), GaussianStream::new(2)];
        let b = simulate_ou_exact_from(&c, vec![1.0, 1.0], &mut streams, false).unwrap();
        for k in 0..=10 {
            let want = (-(k as f64) * 0.1).exp();
            for i in 0..2 {
                assert!(
                    (b.state(k, i)[0] - want).abs() <= 1e-13,
                    "decay mismatch at step {k}: {} vs {want}",
                    b.state(k, i)[0]
                );
            }
        }
    }

    #[test]
    fn exact_ou_stationary_variance_is_preserved() {
        // θ=1, σ=1, τ² = 1/2 is the stationary law; the sample variance over
        // many particles must stay near 1/2 at every grid time.
        let c = scalar_config(20_000, 1.0, 1.0, 0.5, 1.0, 5);
        let b = simulate_ou_exact(&c, false).unwrap();
        let n = 20_000;
        for k in 0..=5 {
            let states = b.states_at(k);
            let var: f64 = states.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let se = 0.5 * (2.0 / n as f64).sqrt();
            assert!(
                (var - 0.5).abs() <= 4.0 * se,
                "variance {var} at step {k} departs from 1/2 (4σ = {})",
                4.0 * se
            );
        }
    }

    #[test]
    fn coupled_difference_process_is_particle_independent() {
        let c = SystemConfig::new(
            5,
            2,
            SymMatrix::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            1.0,
            vec![1.0, 1.0],
            1.0,
            100,
            7,
        )
        .unwrap();
        let cb = simulate_coupled(&c).unwrap();
        let (n, d) = (5, 2);
        let mut xbar = vec![0.0; d];
        let mut max_gap = 0.0f64;
        for k in 0..=100 {
            mean_into(cb.interacting.states_at(k), n, d, &mut xbar);
            let mut delta0 = vec![0.0; d];
            for i in 0..n {
                for j in 0..d {
                    let delta =
                        (xbar[j] - cb.interacting.state(k, i)[j]) + cb.decoupled.state(k, i)[j];
                    if i == 0 {
                        delta0[j] = delta;
                    } else {
                        max_gap = max_gap.max((delta - delta0[j]).abs());
                    }
                }
            }
        }
        assert!(max_gap <= 1e-10, "coupling identity violated: {max_gap}");
    }

    #[test]
    fn coupled_difference_process_starts_at_the_mean_initial_state() {
        let c = scalar_config(6, 1.0, 0.0, 0.7, 1.0, 2);
        let cb = simulate_coupled(&c).unwrap();
        let mut xbar = vec![0.0];
        mean_into(cb.interacting.states_at(0), 6, 1, &mut xbar);
        for i in 0..6 {
            let delta = (xbar[0] - cb.interacting.state(0, i)[0]) + cb.decoupled.state(0, i)[0];
            assert!((delta - xbar[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_process_of_coincident_particles_is_the_common_path() {
        let c = scalar_config(2, 1.0, 0.0, 0.0, 1.0, 3);
        let states = vec![
            1.0, 1.0, //
            0.5, 0.5, //
            -0.25, -0.25, //
            0.125, 0.125,
        ];
        let b = TrajectoryBundle::from_parts(c, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], states, None)
            .unwrap();
        let m = mean_process(&b);
        assert_eq!(m, vec![1.0, 0.5, -0.25, 0.125]);
    }

    #[test]
    fn mean_process_of_antisymmetric_paths_vanishes() {
        let c = scalar_config(2, 1.0, 0.0, 0.0, 1.0, 2);
        let states = vec![1.0, -1.0, 0.6, -0.6, 0.36, -0.36];
        let b = TrajectoryBundle::from_parts(c, vec![0.0, 0.5, 1.0], states, None).unwrap();
        assert_eq!(mean_process(&b), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_variation_basics() {
        assert_eq!(empirical_quadratic_variation(&[2.0, 2.0, 2.0, 2.0], 1).unwrap(), vec![0.0]);
        // 4 increments of √h with h = t/4 sum to exactly t.
        let t: f64 = 2.0;
        let h = t / 4.0;
        let path: Vec<f64> = (0..=4).map(|k| k as f64 * h.sqrt()).collect();
        let qv = empirical_quadratic_variation(&path, 1).unwrap();
        assert!((qv[0] - t).abs() <= 1e-12);
        assert!(empirical_quadratic_variation(&[1.0], 1).is_err());
    }

    #[test]
    fn interaction_matrix_two_particles() {
        let h = interaction_matrix(2, 1).unwrap();
        assert_eq!(h.to_rows(), vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
    }

    #[test]
    fn interaction_matrix_is_a_projection() {
        for (n, d) in [(2usize, 1usize), (3, 2), (7, 3)] {
            let h = interaction_matrix(n, d).unwrap();
            let h2 = h.as_mat().matmul(h.as_mat()).unwrap();
            let dev = h2.sub(h.as_mat()).unwrap().max_abs();
            assert!(dev <= 1e-12, "H²−H = {dev} at N={n}, d={d}");
        }
    }

    #[test]
    fn interaction_matrix_spectrum_is_zero_and_one() {
        let h = interaction_matrix(3, 1).unwrap();
        let eig = sym_eigen(&h).unwrap();
        assert!((eig.values[0] - 1.0).abs() <= 1e-12);
        assert!((eig.values[1] - 1.0).abs() <= 1e-12);
        assert!(eig.values[2].abs() <= 1e-12);
    }

    #[test]
    fn interaction_matrix_respects_the_size_cap() {
        match interaction_matrix(4097, 1) {
            Err(Error::SizeCap { requested, cap }) => {
                assert_eq!(requested, 4097);
                assert_eq!(cap, 4096);
            }
            other => panic!("expected SizeCap, got {other:?}"),
        }
    }

    #[test]
    fn streaming_observer_sees_the_materialized_states() {
        let c = scalar_config(3, 1.0, 1.0, 0.5, 1.0, 20);
        let b = simulate_interacting(&c, true).unwrap();
        let mut step = 0usize;
        stream_interacting(&c, |k, x_k, x_next, noise| {
            assert_eq!(k, step);
            assert_eq!(x_k, b.states_at(k), "pre-state differs at step {k}");
            assert_eq!(x_next, b.states_at(k + 1), "post-state differs at step {k}");
            assert_eq!(noise, b.noise_at(k).unwrap(), "noise differs at step {k}");
            step += 1;
        })
        .unwrap();
        assert_eq!(step, 20);
    }

    #[test]
    fn ou_euler_drifts_toward_zero_without_noise() {
        let c = scalar_config(2, 1.0, 0.0, 0.0, 1.0, 100);
        let b = simulate_ou_euler(&c, true).unwrap();
        // τ² = 0 → starts at zero and stays there; noiseless sanity only.
        assert_eq!(b.state(100, 0)[0], 0.0);
        assert!(b.has_noise());
    }

    #[test]
    fn exact_ou_bundle_reports_innovations_as_noise() {
        let c = scalar_config(2, 1.0, 1.0, 0.5, 1.0, 4);
        let b = simulate_ou_exact(&c, true).unwrap();
        // x_{k+1} = e^{−θh}·x_k + innovation must hold exactly per particle.
        let decay = (-0.25f64).exp();
        for k in 0..4 {
            for i in 0..2 {
                let rebuilt = decay * b.state(k, i)[0] + b.noise_at(k).unwrap()[i];
                assert!((rebuilt - b.state(k + 1, i)[0]).abs() <= 1e-15);
            }
        }
    }
}
