//! Discretization, window and scaling properties of the integrators.

use nrlz::dynamics::{convergence_check, ensemble_average, evolve_single, WindowPolicy};
use nrlz::hierarchy::{evolve_hierarchy, evolve_subspace, subspace_grid, DEFAULT_N_MAX};
use nrlz::model::{NoiseParams, SystemParams};
use proptest::prelude::*;

fn noiseless_sse(p: &SystemParams, policy: WindowPolicy) -> f64 {
    let grid = policy.grid(p, &NoiseParams::silent()).unwrap();
    evolve_single(p, None, &grid).unwrap().probability
}

#[test]
fn coupling_rescaling_leaves_probabilities_unchanged() {
    let policy = WindowPolicy::default();
    for (alpha, delta) in [(1.0, 0.5), (-0.7, 0.5), (0.4, 1.5), (-2.0, 0.0)] {
        let base = SystemParams::new(alpha, delta).unwrap();
        let np = NoiseParams::new(0.8, 3.0).unwrap();
        for lambda in [0.5, 3.0] {
            let scaled = SystemParams::with_coupling(lambda * lambda * alpha, lambda, delta).unwrap();
            let snp = NoiseParams::new(lambda * np.amplitude, lambda * np.gamma).unwrap();
            let a = noiseless_sse(&base, policy);
            let b = noiseless_sse(&scaled, policy);
            assert!((a - b).abs() < 1e-9, "sse {a} vs {b}");
            let a = evolve_subspace(&base, np.decoherence_rate(), &subspace_grid(&policy, &base, &np).unwrap()).unwrap();
            let b = evolve_subspace(&scaled, snp.decoherence_rate(), &subspace_grid(&policy, &scaled, &snp).unwrap())
                .unwrap();
            assert!((a - b).abs() < 1e-9, "subspace {a} vs {b}");
            let a = evolve_hierarchy(&base, &np, &policy.grid(&base, &np).unwrap(), DEFAULT_N_MAX).unwrap();
            let b = evolve_hierarchy(&scaled, &snp, &policy.grid(&scaled, &snp).unwrap(), DEFAULT_N_MAX).unwrap();
            assert!((a.probability - b.probability).abs() < 1e-9, "hierarchy {a:?} vs {b:?}");
        }
    }
}

#[test]
fn step_halving_converges_at_fourth_order() {
    let p = SystemParams::new(1.0, 0.5).unwrap();
    let at = |h: f64| noiseless_sse(&p, WindowPolicy { c: 40.0, h });
    let (p1, p2, p3) = (at(0.4), at(0.2), at(0.1));
    let ratio = (p1 - p2) / (p2 - p3);
    assert!((10.0..24.0).contains(&ratio), "error ratio {ratio}");
    let fine = at(0.025);
    assert!((at(0.05) - fine).abs() < 1e-4);
}

#[test]
fn window_doubling_is_stable_for_deterministic_pipelines() {
    let policy = WindowPolicy::default();
    for (alpha, delta) in [(1.0, 0.5), (-1.0, 0.5), (0.2, 0.0), (-5.0, 1.5), (0.5, 2.0)] {
        let p = SystemParams::new(alpha, delta).unwrap();
        let a = noiseless_sse(&p, policy);
        let b = noiseless_sse(&p, policy.doubled());
        assert!((a - b).abs() < 1e-3, "sse alpha {alpha} delta {delta}: {a} vs {b}");
        let np = NoiseParams::new(1.0, 4.0).unwrap();
        let h = |w: WindowPolicy| evolve_hierarchy(&p, &np, &w.grid(&p, &np).unwrap(), DEFAULT_N_MAX).unwrap();
        let (a, b) = (h(policy), h(policy.doubled()));
        assert!((a.probability - b.probability).abs() < 1e-3, "hierarchy {a:?} vs {b:?}");
        let s = |w: WindowPolicy| evolve_subspace(&p, np.decoherence_rate(), &subspace_grid(&w, &p, &np).unwrap()).unwrap();
        assert!((s(policy) - s(policy.doubled())).abs() < 1e-3);
    }
}

#[test]
fn noisy_ensemble_window_doubling_within_statistical_error() {
    let p = SystemParams::new(1.0, 0.5).unwrap();
    let np = NoiseParams::from_ratios(&p, 0.5, 1.0).unwrap();
    let policy = WindowPolicy::default();
    let a = ensemble_average(&p, &np, &policy.grid(&p, &np).unwrap(), 400, 11).unwrap();
    let b = ensemble_average(&p, &np, &policy.doubled().grid(&p, &np).unwrap(), 400, 11).unwrap();
    assert!(convergence_check(&a, &b).converged, "{a:?} vs {b:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_probability_depends_on_v_squared_over_alpha(
        alpha in 0.3..3.0f64,
        delta in 0.0..0.9f64,
        lambda in 0.5..2.0f64,
        backward in any::<bool>(),
    ) {
        let alpha = if backward { -alpha } else { alpha };
        let policy = WindowPolicy { c: 20.0, h: 0.05 };
        let a = noiseless_sse(&SystemParams::new(alpha, delta).unwrap(), policy);
        let scaled = SystemParams::with_coupling(lambda * lambda * alpha, lambda, delta).unwrap();
        let b = noiseless_sse(&scaled, policy);
        prop_assert!((a - b).abs() < 1e-9);
    }
}
