//! The full flow checked against the reduced eigenvalue system, exact
//! invariants and closed-form limits.

mod common;

use approx::assert_relative_eq;
use deepfact_core::flow::{
    conserved_quantity, eigen_state_of_alpha_m, eigen_state_of_factor, lambda3_closed_form, reduced_loss,
};
use deepfact_core::theory::{predict_limit, pretrain_closed_form};
use deepfact_core::{
    build_init, build_observation_block, integrate_gradient_flow, integrate_reduced_eigen, loss, run_gradient_descent,
    BlockSpec, DMatrix, GdConfig, InitScheme, IntegratorConfig, ObservationSet, Sharpness,
};

fn flow_cfg(t_max: f64, stop_loss: f64) -> IntegratorConfig {
    IntegratorConfig { t_max, stop_loss, record_every: 50, keep_states: true, ..Default::default() }
}

#[test]
fn reduced_system_tracks_full_flow() {
    for &(s, n, depth, m) in &[(2usize, 2usize, 3usize, 3.0), (1, 3, 2, 2.0), (2, 2, 4, 5.0), (1, 4, 3, 10.0)] {
        let spec = BlockSpec::new(s, n, 1.0).unwrap();
        let obs = build_observation_block(&spec).unwrap();
        let alpha = 0.4;
        let chain = build_init(&InitScheme::AlphaM { alpha, m: Sharpness::Finite(m) }, depth, spec.dim()).unwrap();
        let cfg = IntegratorConfig { t_max: 5.0, stop_loss: 0.0, ..flow_cfg(5.0, 0.0) };
        let full = integrate_gradient_flow(&chain, &obs, &cfg).unwrap();
        let reduced =
            integrate_reduced_eigen(&spec, depth, eigen_state_of_alpha_m(alpha, Sharpness::Finite(m), &spec), &cfg)
                .unwrap();
        let a = eigen_state_of_factor(&full.final_chain.factors()[0], &spec).unwrap();
        let b = reduced.final_state();
        assert_relative_eq!(reduced.samples.last().unwrap().t, 5.0, max_relative = 1e-12);
        // With single-entry blocks the in-block direction does not exist.
        let pairs =
            if s > 1 { vec![(a.l1, b.l1), (a.l2, b.l2), (a.l3, b.l3)] } else { vec![(a.l1, b.l1), (a.l2, b.l2)] };
        for (x, y) in pairs {
            assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()), "{s} {n} {depth}: {x} vs {y}");
        }
        // All layers stay identical.
        for w in full.final_chain.factors() {
            assert!((w - &full.final_chain.factors()[0]).amax() < 1e-12);
        }
        let direct = loss(&full.final_chain, &obs).unwrap();
        assert!((direct - reduced_loss(&b, depth, &spec)).abs() < 1e-6 * (1.0 + direct));
    }
}

#[test]
fn reduced_conservation_and_lambda3_closed_form() {
    let spec = BlockSpec::new(2, 3, 1.0).unwrap();
    for depth in 2..6 {
        let init = eigen_state_of_alpha_m(0.3, Sharpness::Finite(4.0), &spec);
        let traj = integrate_reduced_eigen(&spec, depth, init, &flow_cfg(50.0, 0.0)).unwrap();
        let q0 = conserved_quantity(&init, depth);
        for smp in &traj.samples {
            assert!(smp.conserved_drift <= 1e-6, "depth {depth}: drift {}", smp.conserved_drift);
            let q = conserved_quantity(&smp.state, depth);
            assert!((q - q0).abs() <= 1e-6 * q0.abs());
            let l3 = lambda3_closed_form(init.l3, depth, smp.t);
            assert!((smp.state.l3 - l3).abs() <= 1e-7 * l3, "depth {depth} t {}", smp.t);
        }
    }
}

#[test]
fn losses_never_increase_and_balance_is_preserved() {
    let obs = common::random_observations(7, 4, 0.5);
    let chain = build_init(&InitScheme::Gaussian { std: 0.4, seed: 3 }, 3, 4).unwrap();
    let traj = integrate_gradient_flow(&chain, &obs, &flow_cfg(30.0, 1e-14)).unwrap();
    for w in traj.losses().windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    let scale = chain.factors()[0].norm_squared();
    for smp in &traj.samples {
        assert!(smp.balance_drift <= 1e-6 * scale, "drift {}", smp.balance_drift);
    }
    let times = traj.times();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn depth_two_flow_reaches_closed_form_limit() {
    let spec = BlockSpec::new(1, 3, 1.0).unwrap();
    let obs = build_observation_block(&spec).unwrap();
    for &m in &[2.0, 5.0] {
        let chain = build_init(&InitScheme::AlphaM { alpha: 1e-2, m: Sharpness::Finite(m) }, 2, 3).unwrap();
        let traj = integrate_gradient_flow(&chain, &obs, &flow_cfg(1e4, 1e-26)).unwrap();
        assert!(traj.converged());
        let lim = predict_limit(&spec, 1e-2, Sharpness::Finite(m), 2).unwrap();
        let sv = &traj.final_sample().singular_values;
        assert_relative_eq!(sv[0], lim.sigma1, max_relative = 1e-6);
        assert_relative_eq!(sv[1], lim.sigma_secondary, max_relative = 1e-6);
        assert_relative_eq!(sv[2], lim.sigma_secondary, max_relative = 1e-6);
    }
}

#[test]
fn gradient_descent_approaches_flow_for_small_steps() {
    let obs = common::random_observations(5, 3, 0.6);
    let chain = build_init(&InitScheme::Gaussian { std: 0.5, seed: 9 }, 2, 3).unwrap();
    let horizon = 2.0;
    let flow = integrate_gradient_flow(&chain, &obs, &flow_cfg(horizon, 0.0)).unwrap();
    let target = flow.final_chain.product();
    let mut prev_err = f64::INFINITY;
    for &eta in &[1e-2, 1e-3] {
        let iters = (horizon / eta).round() as usize;
        let gd = GdConfig { step_size: eta, max_iters: iters, stop_loss: 0.0, record_every: 0, keep_states: false };
        let traj = run_gradient_descent(&chain, &obs, &gd).unwrap();
        assert_relative_eq!(traj.final_sample().t, horizon, max_relative = 1e-9);
        let err = (traj.final_chain.product() - &target).amax();
        assert!(err < prev_err / 5.0, "error {err} did not shrink from {prev_err}");
        prev_err = err;
    }
}

#[test]
fn permutation_pretraining_closed_form_matches_flow() {
    let truth = DMatrix::from_row_slice(3, 3, &[0.0, 1.3, 0.0, 0.0, 0.0, -0.7, 2.0, 0.0, 0.0]);
    let obs = ObservationSet::from_positions(&truth, &[(0, 1), (1, 2), (2, 0)]).unwrap();
    let chain = build_init(&InitScheme::Gaussian { std: 0.4, seed: 17 }, 2, 3).unwrap();
    // The chain is W_2 W_1, so A = W_2 and B = W_1.
    let (a, b) = pretrain_closed_form(&chain.factors()[1], &chain.factors()[0], &obs).unwrap();
    let traj = integrate_gradient_flow(&chain, &obs, &flow_cfg(1e4, 1e-24)).unwrap();
    assert!(traj.converged());
    assert!((&traj.final_chain.factors()[1] - &a).amax() < 1e-6);
    assert!((&traj.final_chain.factors()[0] - &b).amax() < 1e-6);
    let fitted = &a * &b;
    for e in obs.iter() {
        assert!((fitted[(e.row, e.col)] - e.target).abs() < 1e-10);
    }
}

#[test]
fn flow_reports_non_convergence_without_error() {
    let obs = common::random_observations(2, 3, 0.5);
    let chain = build_init(&InitScheme::Gaussian { std: 0.1, seed: 1 }, 3, 3).unwrap();
    let traj = integrate_gradient_flow(&chain, &obs, &flow_cfg(1e-2, 1e-30)).unwrap();
    assert!(!traj.converged());
    assert_relative_eq!(traj.final_sample().t, 1e-2, max_relative = 1e-12);
}

#[test]
fn invalid_problems_are_rejected() {
    let chain = build_init(&InitScheme::Identity { alpha: 1.0 }, 2, 3).unwrap();
    let empty = ObservationSet::new(3, vec![]).unwrap();
    assert!(integrate_gradient_flow(&chain, &empty, &IntegratorConfig::default()).is_err());
    let wrong = ObservationSet::new(2, vec![]).unwrap();
    assert!(run_gradient_descent(&chain, &wrong, &GdConfig::default()).is_err());
    let obs = common::random_observations(1, 3, 0.5);
    let bad = IntegratorConfig { t_max: -1.0, ..Default::default() };
    assert!(integrate_gradient_flow(&chain, &obs, &bad).is_err());
}
