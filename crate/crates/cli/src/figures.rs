//! Fixed plot data sets at their reference parameter values. Each figure
//! writes `figN*.csv` files into the output directory.

use welander::atlas::{classify, OscTag, RegionScan};
use welander::continuation::{continue_equilibria, hopf_curve, ContinuationSettings, CurveSettings, Window};
use welander::filippov::{filippov_orbit, filippov_simulate};
use welander::model::exchange;
use welander::output;
use welander::periodic::periodic_orbit;
use welander::zone::{classify_rho, switching_zone_with};
use welander::ModelParams;

use crate::commands::{
    bifurcation_curves, drift_run, filippov_rows, orbit_header, run_scan, tangency_label, tangency_pair, trajectory, write_curves,
    write_drift, write_scan, Context, ORBIT_COLUMNS,
};
use crate::CliError;

const EPSILON: f64 = 0.009;

fn with_params(ctx: &Context, p: ModelParams) -> Context {
    let mut cfg = ctx.cfg.clone();
    cfg.model.mu = p.mu;
    cfg.model.eta = p.eta;
    cfg.model.epsilon = p.epsilon;
    cfg.model.kappa1 = p.kappa1;
    cfg.model.kappa2 = p.kappa2;
    Context { cfg, out: ctx.out.clone() }
}

pub fn figure(ctx: &Context, n: u8) -> Result<(), CliError> {
    match n {
        2 => figure2(ctx),
        3 => figure3(ctx),
        4 => figure4(ctx),
        5 => figure5(ctx),
        6 => figure6(ctx),
        7 => figure7(ctx),
        8 => figure8(ctx),
        9 => figure9(ctx),
        _ => unreachable!("figure number validated by the parser"),
    }
}

/// Orbit in the orbit schema plus three periods of time series.
fn orbit_and_series(ctx: &Context, prefix: &str, p: ModelParams) -> Result<(), CliError> {
    let ctx = with_params(ctx, p);
    let orbit = periodic_orbit(&p, &ctx.cfg.attractor_options(), &ctx.bvp())?;
    let zone = switching_zone_with(&p, ctx.cfg.numerics.convention)?;
    let h = orbit_header(&ctx, &orbit);
    ctx.write(&format!("{prefix}_orbit.csv"), |w| output::write_orbit(w, &h, &orbit, &zone, 4))?;
    let traj = trajectory(&p, orbit.points[0], 3.0 * orbit.period, &ctx.cfg)?;
    let h = ctx.header("trajectory");
    ctx.write(&format!("{prefix}_timeseries.csv"), |w| output::write_trajectory(w, &h, &p, &zone, &traj))?;
    Ok(())
}

fn figure2(ctx: &Context) -> Result<(), CliError> {
    let p = ModelParams::new(0.219, -0.17, 0.0);
    let ctx = with_params(ctx, p);
    let orbit = filippov_orbit(&p)?;
    let h = ctx.header("orbit").with(format!("orbit.period = {}", orbit.period()));
    let rows = filippov_rows(&p, &orbit, 500);
    ctx.write("fig2_orbit.csv", |w| output::write_table(w, &h, &ORBIT_COLUMNS, &rows))?;

    let start = welander::State::on_density(orbit.s_down, p.eta);
    let run = filippov_simulate(&p, start, 4.0 * orbit.period())?;
    let zone = switching_zone_with(&p, ctx.cfg.numerics.convention)?;
    let h = ctx.header("trajectory");
    ctx.write("fig2_timeseries.csv", |w| output::write_trajectory(w, &h, &p, &zone, &run.trajectory))?;

    // Extent of the orbit along eta = -0.17.
    let mut rows = Vec::new();
    for i in 0..=600 {
        let mu = i as f64 * 0.001;
        let q = p.with_mu(mu);
        let Ok(o) = filippov_orbit(&q) else { continue };
        if !o.is_stable() {
            continue;
        }
        let (_, states) = o.sample(&q, 200);
        let fold = |f: fn(&welander::State) -> f64, max: bool| {
            states
                .iter()
                .map(f)
                .fold(if max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, v| if max { a.max(v) } else { a.min(v) })
        };
        rows.push(vec![
            mu.to_string(),
            fold(|s| s.x, false).to_string(),
            fold(|s| s.x, true).to_string(),
            fold(|s| s.y, false).to_string(),
            fold(|s| s.y, true).to_string(),
            o.period().to_string(),
            o.multiplier.to_string(),
        ]);
    }
    let h = ctx.header("filippov-sweep");
    ctx.write("fig2_sweep.csv", |w| {
        output::write_table(w, &h, &["mu", "x_min", "x_max", "y_min", "y_max", "period", "multiplier"], &rows)
    })?;
    Ok(())
}

fn figure3(ctx: &Context) -> Result<(), CliError> {
    let p = ModelParams::new(0.2, -0.17, 0.02);
    let ctx = with_params(ctx, p);
    let conv = ctx.cfg.numerics.convention;
    let zone = switching_zone_with(&p, conv)?;
    let rows: Vec<Vec<String>> = (0..=2000)
        .map(|i| {
            let rho = p.eta - 0.2 + 0.4 * i as f64 / 2000.0;
            vec![rho.to_string(), exchange(&p, rho).to_string(), classify_rho(&zone, rho).as_str().to_string()]
        })
        .collect();
    let h = ctx
        .header("exchange")
        .with(format!("rho_minus = {}", zone.rho_minus))
        .with(format!("rho_plus = {}", zone.rho_plus));
    ctx.write("fig3_exchange.csv", |w| output::write_table(w, &h, &["rho", "kappa", "zone"], &rows))?;

    let mut rows = Vec::new();
    for i in 0..=300 {
        let eps = i as f64 * 0.001;
        let z = switching_zone_with(&p.with_epsilon(eps), conv)?;
        rows.push(vec![
            eps.to_string(),
            z.rho_minus.to_string(),
            z.rho_plus.to_string(),
            z.l_minus.to_string(),
            z.l_plus.to_string(),
        ]);
    }
    let h = ctx.header("zones-vs-epsilon");
    ctx.write("fig3_zones.csv", |w| {
        output::write_table(w, &h, &["epsilon", "rho_minus", "rho_plus", "l_minus", "l_plus"], &rows)
    })?;
    Ok(())
}

fn figure4(ctx: &Context) -> Result<(), CliError> {
    orbit_and_series(ctx, "fig4", ModelParams::new(0.14, -0.3, EPSILON))
}

fn figure5(ctx: &Context) -> Result<(), CliError> {
    let seed = ModelParams::new(0.2, -0.17, EPSILON);
    for (anchor, found) in tangency_pair(ctx, [Some(seed); 2]) {
        let tp = found?;
        let label = tangency_label(anchor);
        println!("{label} at mu = {}, extremum error {:e}", tp.mu, tp.extremum_error());
        let orbit = &tp.orbit.orbit;
        let ctx = with_params(ctx, orbit.params);
        let zone = switching_zone_with(&orbit.params, ctx.cfg.numerics.convention)?;
        let h = orbit_header(&ctx, orbit)
            .with(format!("tangency = {label}"))
            .with(format!("boundary = {}", tp.boundary));
        let name = if label == "T+" { "fig5_tplus_orbit.csv" } else { "fig5_tminus_orbit.csv" };
        ctx.write(name, |w| output::write_orbit(w, &h, orbit, &zone, 4))?;
    }
    Ok(())
}

fn slice(ctx: &Context, panel: char, eta: f64) -> Result<(), CliError> {
    let p = ModelParams::new(0.2, eta, EPSILON);
    let ctx = with_params(ctx, p);
    let branch = continue_equilibria(&p, (-0.05, 0.6), &ContinuationSettings::default())?;
    let h = ctx.header("equilibrium-branch");
    ctx.write(&format!("fig6{panel}_branch.csv"), |w| output::write_branch(w, &h, &branch))?;
    let h = ctx.header("branch-markers");
    ctx.write(&format!("fig6{panel}_branch_markers.csv"), |w| output::write_branch_markers(w, &h, &branch))?;
    let att = ctx.cfg.attractor_options();
    let mut rows = Vec::new();
    for i in 0..=300 {
        let mu = i as f64 * 0.002;
        let row = match classify(&p.with_mu(mu), &att) {
            Ok(c) => vec![
                mu.to_string(),
                c.tag.to_string(),
                c.rho_min.to_string(),
                c.rho_max.to_string(),
                c.period.to_string(),
            ],
            Err(_) => vec![mu.to_string(), OscTag::Unknown.to_string(), String::new(), String::new(), String::new()],
        };
        rows.push(row);
    }
    let h = ctx.header("attractor-sweep");
    ctx.write(&format!("fig6{panel}_sweep.csv"), |w| {
        output::write_table(w, &h, &["mu", "tag", "rho_min", "rho_max", "period"], &rows)
    })?;
    Ok(())
}

fn figure6(ctx: &Context) -> Result<(), CliError> {
    let p = ModelParams::new(0.2, -0.17, EPSILON);
    let fctx = with_params(ctx, p);
    let curves = bifurcation_curves(&fctx, &p, Window::default(), [Some(p); 2])?;
    write_curves(&fctx, "fig6a_", &curves)?;
    let scan = run_scan(&fctx, &p, (0.0, 0.4), (-0.9, 0.0), (81, 91))?;
    write_scan(&fctx, "fig6a_", &scan)?;
    for (panel, eta) in [('b', -0.05), ('c', -0.17), ('d', -0.3)] {
        slice(ctx, panel, eta)?;
    }
    Ok(())
}

fn figure7(ctx: &Context) -> Result<(), CliError> {
    orbit_and_series(ctx, "fig7a", ModelParams::new(0.32, -0.05, EPSILON))?;
    orbit_and_series(ctx, "fig7b", ModelParams::new(0.11, -0.17, EPSILON))?;
    orbit_and_series(ctx, "fig7c", ModelParams::new(0.32, -0.17, EPSILON))
}

fn figure8(ctx: &Context) -> Result<(), CliError> {
    let mut fctx = with_params(ctx, ModelParams::new(0.32, -0.17, EPSILON));
    fctx.cfg.drift = crate::config::DriftSection::default();
    let run = drift_run(&fctx)?;
    write_drift(&fctx, "fig8_", &run)
}

fn figure9(ctx: &Context) -> Result<(), CliError> {
    for (panel, eps) in [('a', 0.02), ('b', 0.041), ('c', 0.085), ('d', 0.11)] {
        let p = ModelParams::new(0.2, -0.17, eps);
        let fctx = with_params(ctx, p);
        let h = hopf_curve(
            &p,
            &CurveSettings {
                window: Window {
                    mu: (-0.5, 2.0),
                    eta: (-3.0, 2.0),
                },
                ..CurveSettings::default()
            },
        )?;
        let bound = |f: fn(&welander::continuation::CurvePoint) -> f64| {
            let (a, b) = h
                .points
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let pad = 0.1 * (b - a);
            (a - pad, b + pad)
        };
        let (mu, eta) = (bound(|q| q.mu), bound(|q| q.eta));
        let scan = run_scan(&fctx, &p, mu, eta, (61, 61))?;
        let prefix = format!("fig9{panel}_");
        write_scan(&fctx, &prefix, &scan)?;
        // T+ bounds the nodes with a deep-coupling phase, T- those with a
        // deep-decoupling phase.
        let seeds = [OscTag::coupling, OscTag::decoupling].map(|has| phase_seed(&scan, has).map(|(m, e)| p.with_mu(m).with_eta(e)));
        let window = Window { mu, eta };
        let curves = bifurcation_curves(&fctx, &p, window, seeds)?;
        write_curves(&fctx, &prefix, &curves)?;
    }
    Ok(())
}

/// The periodic node with the phase `has` closest to a periodic node
/// without it.
fn phase_seed(scan: &RegionScan, has: fn(&OscTag) -> bool) -> Option<(f64, f64)> {
    let periodic = || scan.nodes.iter().filter(|n| n.tag.is_periodic());
    let others: Vec<_> = periodic().filter(|n| !has(&n.tag)).collect();
    let dist = |mu: f64, eta: f64| others.iter().map(|o| (o.mu - mu).hypot(o.eta - eta)).fold(f64::INFINITY, f64::min);
    periodic()
        .filter(|n| has(&n.tag))
        .min_by(|a, b| dist(a.mu, a.eta).total_cmp(&dist(b.mu, b.eta)))
        .filter(|_| !others.is_empty())
        .map(|n| (n.mu, n.eta))
}
