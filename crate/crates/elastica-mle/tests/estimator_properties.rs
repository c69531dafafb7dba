//! Structural properties of the likelihood and the closed-form estimators
//! that hold for *any* dataset: equivariance under rotations, invariance
//! under unit changes, exact quadraticity of the log-likelihood, and
//! maximality of the fitted matrices.

use elastica_mle::estimator::{mle_matrix, mle_symmetric};
use elastica_mle::likelihood::{log_likelihood, log_likelihood_from_stats, sufficient_stats};
use elastica_mle::linalg::{Mat, SymMatrix};
use elastica_mle::rng::GaussianStream;
use elastica_mle::simulate::simulate_interacting;
use elastica_mle::{SystemConfig, TrajectoryBundle};

fn theta_general() -> SymMatrix {
    SymMatrix::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()
}

fn sample_bundle(seed: u64) -> TrajectoryBundle {
    let config =
        SystemConfig::new(12, 2, theta_general(), 1.0, vec![0.5, 0.25], 1.0, 400, seed).unwrap();
    simulate_interacting(&config, false).unwrap()
}

fn random_matrix(dim: usize, scale: f64, stream: &mut GaussianStream) -> Mat {
    let mut m = Mat::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            m.set(i, j, scale * stream.next_gaussian());
        }
    }
    m
}

fn random_symmetric(dim: usize, scale: f64, stream: &mut GaussianStream) -> SymMatrix {
    SymMatrix::symmetrize(&random_matrix(dim, scale, stream))
}

/// Rotating every observation by an orthogonal Q must rotate the estimate:
/// the estimator commutes with changes of orthonormal basis.
#[test]
fn estimate_is_equivariant_under_rotations() {
    let bundle = sample_bundle(901);
    let config = bundle.config();
    let d = config.dim();
    let n = config.n_particles();
    let steps = config.n_steps();

    let angle = std::f64::consts::FRAC_PI_6;
    let (s, c) = angle.sin_cos();
    let q = Mat::from_rows(vec![vec![c, -s], vec![s, c]]).unwrap();

    // Rotate all states and the generating drift.
    let mut rotated = Vec::with_capacity((steps + 1) * n * d);
    let mut buf = vec![0.0; d];
    for k in 0..=steps {
        for i in 0..n {
            q.matvec(bundle.state(k, i), &mut buf);
            rotated.extend_from_slice(&buf);
        }
    }
    let theta_rot = SymMatrix::symmetrize(
        &q.matmul(config.theta().as_mat()).unwrap().matmul(&q.transpose()).unwrap(),
    );
    let config_rot = SystemConfig::new(
        n,
        d,
        theta_rot,
        config.sigma(),
        config.init_variances().to_vec(),
        config.t_final(),
        steps,
        config.seed(),
    )
    .unwrap();
    let bundle_rot =
        TrajectoryBundle::from_parts(config_rot, bundle.times().to_vec(), rotated, None).unwrap();

    let hat = mle_matrix(&sufficient_stats(&bundle)).unwrap().theta_hat;
    let hat_rot = mle_matrix(&sufficient_stats(&bundle_rot)).unwrap().theta_hat;
    let conjugated = q.matmul(hat.as_mat()).unwrap().matmul(&q.transpose()).unwrap();
    let gap = hat_rot.as_mat().sub(&conjugated).unwrap().max_abs();
    assert!(gap <= 1e-8, "rotation equivariance violated: max entry gap {gap}");
}

/// Rescaling the data by a power of two (a pure unit change, exact in
/// floating point) must leave the estimate bit-identical: every intermediate
/// of the normal equations scales by an exact power of two that cancels.
#[test]
fn estimate_is_invariant_under_unit_changes() {
    let bundle = sample_bundle(902);
    let config = bundle.config();
    let scale = 4.0;

    let mut scaled = Vec::with_capacity((config.n_steps() + 1) * config.n_particles() * config.dim());
    for k in 0..=config.n_steps() {
        scaled.extend(bundle.states_at(k).iter().map(|v| v * scale));
    }
    let config_scaled = SystemConfig::new(
        config.n_particles(),
        config.dim(),
        config.theta().clone(),
        config.sigma() * scale,
        config.init_variances().iter().map(|v| v * scale * scale).collect(),
        config.t_final(),
        config.n_steps(),
        config.seed(),
    )
    .unwrap();
    let bundle_scaled =
        TrajectoryBundle::from_parts(config_scaled, bundle.times().to_vec(), scaled, None).unwrap();

    let hat = mle_matrix(&sufficient_stats(&bundle)).unwrap();
    let hat_scaled = mle_matrix(&sufficient_stats(&bundle_scaled)).unwrap();
    assert_eq!(
        hat.theta_hat.to_rows(),
        hat_scaled.theta_hat.to_rows(),
        "unit change must cancel exactly"
    );
    assert_eq!(hat.gram_condition, hat_scaled.gram_condition);
}

/// The path-functional log-likelihood is an exact quadratic in the candidate
/// matrix, so its third differences along any matrix line vanish.
#[test]
fn direct_likelihood_is_quadratic_along_matrix_lines() {
    let bundle = sample_bundle(903);
    let mut stream = GaussianStream::new(77);
    for _ in 0..5 {
        let base = random_matrix(2, 1.0, &mut stream);
        let dir = random_matrix(2, 1.0, &mut stream);
        let values: Vec<f64> = (0..5)
            .map(|k| {
                let mut cand = base.clone();
                for i in 0..2 {
                    for j in 0..2 {
                        cand.set(i, j, base.get(i, j) + k as f64 * dir.get(i, j));
                    }
                }
                log_likelihood(&bundle, &cand).unwrap()
            })
            .collect();
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for w in values.windows(4) {
            let third = w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0];
            assert!(
                third.abs() <= 1e-9 * scale,
                "third difference {third} is not negligible against scale {scale}"
            );
        }
    }
}

/// Random perturbations of the fitted matrices never increase the
/// likelihood: the closed forms really are the maximizers.
#[test]
fn fitted_matrices_maximize_their_likelihoods() {
    let bundle = sample_bundle(904);
    let stats = sufficient_stats(&bundle);
    let unrestricted = mle_matrix(&stats).unwrap().raw;
    let symmetric = mle_symmetric(&stats).unwrap();

    let top = log_likelihood_from_stats(&stats, &unrestricted).unwrap();
    let top_sym = log_likelihood_from_stats(&stats, symmetric.as_mat()).unwrap();
    let slack = 1e-12 * (1.0 + top.abs().max(top_sym.abs()));

    let mut stream = GaussianStream::new(55);
    for trial in 0..30 {
        let scale = [1e-3, 3e-2, 1.0][trial % 3];
        let bump = random_matrix(2, scale, &mut stream);
        let mut cand = unrestricted.clone();
        for i in 0..2 {
            for j in 0..2 {
                cand.set(i, j, unrestricted.get(i, j) + bump.get(i, j));
            }
        }
        let val = log_likelihood_from_stats(&stats, &cand).unwrap();
        assert!(val <= top + slack, "perturbation raised the likelihood: {val} > {top}");

        let sym_bump = random_symmetric(2, scale, &mut stream);
        let mut sym_cand = symmetric.as_mat().clone();
        for i in 0..2 {
            for j in 0..2 {
                sym_cand.set(i, j, symmetric.get(i, j) + sym_bump.get(i, j));
            }
        }
        let sym_val = log_likelihood_from_stats(&stats, &sym_cand).unwrap();
        assert!(
            sym_val <= top_sym + slack,
            "symmetric perturbation raised the likelihood: {sym_val} > {top_sym}"
        );
    }

    // The symmetric optimum can never beat the unrestricted one.
    assert!(top_sym <= top + slack);
}
