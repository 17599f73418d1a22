//! Agreement between the stochastic ensemble and the deterministic
//! noise-averaged pipelines where both apply.

use nrlz::analytic;
use nrlz::dynamics::{
    ensemble_average, ensemble_realizations, evolve_single, population_weighted_probability, WindowPolicy,
};
use nrlz::hierarchy::{evolve_hierarchy, evolve_subspace, subspace_grid, DEFAULT_N_MAX};
use nrlz::model::{NoiseParams, SystemParams};

#[test]
fn ensemble_population_ratio_matches_hierarchy() {
    let policy = WindowPolicy::default();
    for (alpha, delta) in [(1.0, 0.5), (-1.0, 0.5), (2.0, 0.0)] {
        let p = SystemParams::new(alpha, delta).unwrap();
        let np = NoiseParams::new(1.0, 2.0).unwrap();
        let grid = policy.grid(&p, &np).unwrap();
        let rs = ensemble_realizations(&p, &np, &grid, 1200, 3).unwrap();
        let sse = population_weighted_probability(&rs);
        let h = evolve_hierarchy(&p, &np, &grid, DEFAULT_N_MAX).unwrap();
        assert!(
            (sse - h.probability).abs() < 0.02,
            "alpha {alpha} delta {delta}: ensemble {sse} vs hierarchy {}",
            h.probability
        );
    }
}

#[test]
fn backward_unity_at_delta_one_in_every_pipeline() {
    let p = SystemParams::new(-0.8, 1.0).unwrap();
    let np = NoiseParams::from_ratios(&p, 1.0, 5.0).unwrap();
    let policy = WindowPolicy::default();
    let grid = policy.grid(&p, &np).unwrap();
    for r in ensemble_realizations(&p, &np, &grid, 32, 8).unwrap() {
        assert!((r.probability - 1.0).abs() < 1e-10);
    }
    let h = evolve_hierarchy(&p, &np, &grid, DEFAULT_N_MAX).unwrap();
    assert!((h.probability - 1.0).abs() < 1e-10, "{h:?}");
    let s = evolve_subspace(&p, np.decoherence_rate(), &subspace_grid(&policy, &p, &np).unwrap()).unwrap();
    assert!((s - 1.0).abs() < 1e-10, "{s}");
}

#[test]
fn noise_enhances_hermitian_tunneling() {
    let policy = WindowPolicy::default();
    for alpha in [1.0, -2.0] {
        let p = SystemParams::new(alpha, 0.0).unwrap();
        let np = NoiseParams::from_ratios(&p, 0.5, 1.0).unwrap();
        let noisy = ensemble_average(&p, &np, &policy.grid(&p, &np).unwrap(), 400, 2).unwrap();
        let quiet = evolve_single(&p, None, &policy.grid(&p, &NoiseParams::silent()).unwrap()).unwrap();
        assert!(
            noisy.mean_probability > quiet.probability + 2.0 * noisy.standard_error,
            "{noisy:?} vs {}",
            quiet.probability
        );
        let closed = analytic::white_noise_prob(&p, 5.0, analytic::WhiteNoiseOrder::Order2).unwrap();
        assert!(closed > quiet.probability);
    }
}

#[test]
fn large_delta_adiabatic_limit_is_noise_free() {
    // Short window: the sink between exceptional points is reached quickly.
    let policy = WindowPolicy { c: 10.0, h: 0.05 };
    for alpha in [0.05, -0.05] {
        let p = SystemParams::new(alpha, 2.0).unwrap();
        let np = NoiseParams::from_ratios(&p, 1.0, 5.0).unwrap();
        let noisy = ensemble_average(&p, &np, &policy.grid(&p, &np).unwrap(), 64, 4).unwrap();
        let quiet = analytic::noiseless(&p).unwrap();
        assert!((noisy.mean_probability - 0.5).abs() < 0.03, "{noisy:?}");
        assert!((quiet - 0.5).abs() < 0.03, "{quiet}");
    }
}
