mod common;

use welander::atlas::{classify, region_scan, OscTag, ScanSettings};
use welander::continuation::Window;
use welander::dynamics::AttractorOptions;
use welander::ModelParams;

#[test]
fn scan_agrees_with_the_bounding_curves() {
    let p = ModelParams::new(0.2, -0.17, 0.009);
    let atlas = common::Atlas::new(&p, Window::default());
    let settings = ScanSettings {
        mu: (0.0, 0.4),
        eta: (-0.9, 0.0),
        n_mu: 41,
        n_eta: 46,
        ..ScanSettings::default()
    };
    let scan = region_scan(&p, &settings).unwrap();
    let cell = (scan.mu[1] - scan.mu[0], scan.eta[1] - scan.eta[0]);
    let (mut checked, mut wrong, mut seen_tags) = (0, Vec::new(), std::collections::BTreeSet::new());
    for n in &scan.nodes {
        if atlas.cell_distance((n.mu, n.eta), cell) < 1.0 {
            continue;
        }
        checked += 1;
        seen_tags.insert(n.tag);
        let predicted = atlas.predict((n.mu, n.eta), (0.25, -0.17));
        let seen = (n.tag.is_periodic(), n.tag.coupling(), n.tag.decoupling());
        if n.tag == OscTag::Unknown || predicted != seen {
            wrong.push((n.mu, n.eta, n.tag, predicted));
        }
    }
    assert!(checked > 1000, "{checked}");
    assert_eq!(seen_tags.len(), 5, "{seen_tags:?}");
    assert!(wrong.is_empty(), "{} of {checked}: {wrong:?}", wrong.len());
}

fn hopf_box_scan(eps: f64) -> Vec<OscTag> {
    let p = ModelParams::new(0.2, -0.17, eps);
    let (mu, eta) = common::hopf_box(&p, 0.1);
    let settings = ScanSettings {
        mu,
        eta,
        n_mu: 40,
        n_eta: 40,
        ..ScanSettings::default()
    };
    region_scan(&p, &settings).unwrap().nodes.iter().map(|n| n.tag).collect()
}

#[test]
fn welander_oscillations_vanish_before_the_fold_does() {
    let moderate = hopf_box_scan(0.085);
    assert!(moderate.iter().any(|t| t.is_periodic()));
    assert!(!moderate.iter().any(|t| t.coupling()), "coupling orbit at epsilon 0.085");

    let wide = hopf_box_scan(0.11);
    assert!(wide.contains(&OscTag::PS));
    assert!(!wide.iter().any(|&t| t.is_periodic() && t != OscTag::PS));
}

#[test]
fn reference_points_have_their_classes() {
    for (mu, eta, tag) in [(0.14, -0.3, OscTag::W), (0.32, -0.05, OscTag::PS), (0.11, -0.17, OscTag::P1), (0.32, -0.17, OscTag::P2)] {
        let c = classify(&ModelParams::new(mu, eta, 0.009), &AttractorOptions::default()).unwrap();
        assert_eq!(c.tag, tag, "({mu}, {eta})");
    }
}

#[test]
fn longer_settling_does_not_change_the_class() {
    let base = AttractorOptions::default();
    let longer = AttractorOptions {
        settle_time: 2.0 * base.settle_time,
        ..base
    };
    for (mu, eta) in [(0.14, -0.3), (0.32, -0.05), (0.11, -0.17), (0.32, -0.17), (0.05, -0.5), (0.9, -0.17)] {
        let p = ModelParams::new(mu, eta, 0.009);
        let a = classify(&p, &base).unwrap();
        let b = classify(&p, &longer).unwrap();
        assert_eq!(a.tag, b.tag, "({mu}, {eta})");
        assert!((a.rho_min - b.rho_min).abs() < 1e-5 && (a.rho_max - b.rho_max).abs() < 1e-5);
    }
}
