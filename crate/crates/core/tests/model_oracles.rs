mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use welander::model::{exchange, find_equilibria, jacobian, rhs};
use welander::zone::{curvature_root_function, switching_zone_with, ZoneConvention};
use welander::{ModelParams, State};

fn rel_jacobian_error(p: &ModelParams, s: State) -> f64 {
    let j = jacobian(p, s).unwrap();
    let fd = common::fd_jacobian(p, s, 1e-6);
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            diff = diff.max((j[r][c] - fd[r][c]).abs());
            scale = scale.max(j[r][c].abs());
        }
    }
    diff / scale
}

#[test]
fn jacobian_matches_central_differences_at_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for eps in [0.009, 0.02, 0.041, 0.085] {
        let p = ModelParams::new(0.2, -0.17, eps);
        for _ in 0..100 {
            let x = rng.gen_range(0.3..1.0);
            let rho = p.eta + eps * rng.gen_range(-6.0..6.0);
            let err = rel_jacobian_error(&p, State::new(x, x + rho));
            assert!(err < 1e-6, "eps {eps}: relative error {err:e}");
        }
    }
}

#[test]
fn jacobian_rejects_the_nonsmooth_limit() {
    assert!(jacobian(&ModelParams::new(0.2, -0.17, 0.0), State::new(0.5, 0.3)).is_err());
}

#[test]
fn equilibria_match_newton_multistart() {
    for (mu, eta, eps) in [(0.2, -0.17, 0.009), (0.14, -0.3, 0.009), (0.05, -0.5, 0.009), (0.1, -0.45, 0.02), (0.3, 0.1, 0.041)] {
        let p = ModelParams::new(mu, eta, eps);
        let lib = find_equilibria(&p).unwrap();
        let oracle = common::newton_equilibria(&p);
        assert_eq!(lib.len(), oracle.len(), "count at {p:?}");
        for (e, o) in lib.iter().zip(&oracle) {
            assert!(e.state.dist(o) < 1e-8, "{:?} vs {o:?}", e.state);
            let f = rhs(&p, e.state);
            assert!(f[0].hypot(f[1]) < 1e-10);
        }
    }
}

#[test]
fn three_equilibria_inside_the_fold_cusp() {
    let p = ModelParams::new(0.05, -0.5, 0.009);
    assert_eq!(common::newton_equilibria(&p).len(), 3);
    assert_eq!(find_equilibria(&p).unwrap().len(), 3);
}

const EPSILONS: [f64; 7] = [1e-4, 0.009, 0.02, 0.041, 0.085, 0.11, 0.147];

#[test]
fn zone_boundaries_match_curvature_maximisation() {
    for convention in [ZoneConvention::SwitchProfile, ZoneConvention::ExchangeGraph] {
        for eps in EPSILONS {
            let p = ModelParams::new(0.2, -0.17, eps);
            let z = switching_zone_with(&p, convention).unwrap();
            let (lo, hi) = common::curvature_boundaries(&p, convention.amplitude(&p));
            assert!((z.rho_minus - lo).abs() < 1e-8, "{convention:?} eps {eps}: {} vs {lo}", z.rho_minus);
            assert!((z.rho_plus - hi).abs() < 1e-8, "{convention:?} eps {eps}: {} vs {hi}", z.rho_plus);
            assert!((exchange(&p, lo) - z.l_minus).abs() < 1e-8);
            assert!((exchange(&p, hi) - z.l_plus).abs() < 1e-8);
        }
    }
}

#[test]
fn zone_invariants_across_epsilon() {
    let mut last_width = 0.0;
    for eps in EPSILONS {
        let p = ModelParams::new(0.2, -0.17, eps);
        let z = switching_zone_with(&p, ZoneConvention::default()).unwrap();
        assert!(((z.rho_plus - p.eta) - (p.eta - z.rho_minus)).abs() < 1e-12);
        assert!(z.rho_minus < p.eta && p.eta < z.rho_plus);
        assert!(p.kappa1 < z.l_minus && z.l_minus < 0.55 && 0.55 < z.l_plus && z.l_plus < p.kappa2);
        assert!(z.half_width() > last_width);
        last_width = z.half_width();
    }
    let tiny = switching_zone_with(&ModelParams::new(0.2, -0.17, 1e-6), ZoneConvention::default()).unwrap();
    assert!(tiny.half_width() < 1e-5);
    let zero = switching_zone_with(&ModelParams::new(0.2, -0.17, 0.0), ZoneConvention::default()).unwrap();
    assert_eq!((zero.rho_minus, zero.rho_plus, zero.l_minus, zero.l_plus), (-0.17, -0.17, 0.1, 1.0));
}

// Reference boundaries at eta = -0.17 under the default convention, from
// the curvature-maximisation oracle.
#[test]
fn frozen_reference_boundaries() {
    for (eps, minus, plus) in [(0.009, -0.19899176574534064, -0.1410082342546594), (0.02, -0.22643180115561973, -0.1135681988443803)] {
        let p = ModelParams::new(0.2, -0.17, eps);
        let z = switching_zone_with(&p, ZoneConvention::default()).unwrap();
        assert!((z.rho_minus - minus).abs() < 1e-10, "{}", z.rho_minus);
        assert!((z.rho_plus - plus).abs() < 1e-10, "{}", z.rho_plus);
    }
}

proptest! {
    #[test]
    fn jacobian_matches_differences(
        mu in 0.0..0.6f64,
        eta in -0.9..0.2f64,
        eps in 0.005..0.15f64,
        x in 0.2..1.1f64,
        v in -8.0..8.0f64,
    ) {
        let p = ModelParams::new(mu, eta, eps);
        let s = State::new(x, x + eta + v * eps);
        prop_assert!(rel_jacobian_error(&p, s) < 1e-6);
    }

    #[test]
    fn equilibria_agree_with_newton(mu in 0.0..0.4f64, eta in -0.9..0.1f64, eps in 0.005..0.15f64) {
        let p = ModelParams::new(mu, eta, eps);
        let lib = find_equilibria(&p).unwrap();
        let oracle = common::newton_equilibria(&p);
        prop_assert_eq!(lib.len(), oracle.len());
        for (e, o) in lib.iter().zip(&oracle) {
            prop_assert!(e.state.dist(o) < 1e-8);
        }
    }

    #[test]
    fn curvature_root_sign_is_the_curvature_slope(eps in 0.005..0.15f64, u in 0.01..12.0f64, eta in -0.9..0.2f64) {
        let p = ModelParams::new(0.2, eta, eps);
        for convention in [ZoneConvention::SwitchProfile, ZoneConvention::ExchangeGraph] {
            let a = convention.amplitude(&p);
            let g = curvature_root_function(&p, convention, eta + u * eps).unwrap();
            let slope = common::curvature_slope_sign(a, eps, u);
            // Skip the immediate neighbourhood of the root.
            let g0 = curvature_root_function(&p, convention, eta).unwrap();
            if g.abs() > 1e-9 * g0.abs() {
                prop_assert_eq!(g > 0.0, slope > 0.0);
            }
        }
    }

    #[test]
    fn curvature_root_function_is_even(eps in 0.005..0.15f64, d in 0.0..1.0f64) {
        let p = ModelParams::new(0.2, -0.17, eps);
        let c = ZoneConvention::default();
        let a = curvature_root_function(&p, c, p.eta + d).unwrap();
        let b = curvature_root_function(&p, c, p.eta - d).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
