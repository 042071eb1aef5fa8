//! One function per subcommand.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use welander::atlas::{region_scan, run_drift, tag_from_extrema, DriftRun, RegionScan, ScanSettings};
use welander::continuation::{
    classify_fold_curve, continue_equilibria, fold_curve, hopf_curve, noncentral_points, ContinuationSettings, CurveSettings,
    ParamCurve, SnicSettings, Window,
};
use welander::dynamics::{default_initial, find_attractor, simulate as simulate_smooth, Attractor, Trajectory};
use welander::filippov::{filippov_orbit, filippov_simulate};
use welander::output::{self, Header};
use welander::periodic::{
    anchor_phase, find_tangency, periodic_orbit, tangency_curve, Anchor, BvpOptions, Direction, PeriodicOrbit, TangencyCurveOptions,
    TangencyOptions, TangencyPoint,
};
use welander::zone::switching_zone_with;
use welander::{ModelParams, State};

use crate::config::{ConfigError, ExperimentConfig};
use crate::CliError;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn header(&self, kind: &str) -> Header {
        Header::new(kind)
            .with(format!("generator = welander-cli {}", env!("CARGO_PKG_VERSION")))
            .with_block(&self.cfg.to_toml())
    }

    /// Create `name` in the output directory and hand a writer to `body`.
    pub fn write<F>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    pub fn bvp(&self) -> BvpOptions {
        BvpOptions {
            convention: self.cfg.numerics.convention,
            ..BvpOptions::default()
        }
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.params();
    let initial = match (cfg.simulate.x0, cfg.simulate.y0) {
        (Some(x), Some(y)) => State::new(x, y),
        _ => default_initial(&p),
    };
    let traj = trajectory(&p, initial, cfg.simulate.t_end, cfg)?;
    let zone = switching_zone_with(&p, cfg.numerics.convention)?;
    let h = ctx.header("trajectory");
    ctx.write("trajectory.csv", |w| output::write_trajectory(w, &h, &p, &zone, &traj))?;
    let h = ctx.header("events");
    ctx.write("events.csv", |w| output::write_events(w, &h, &traj))?;
    Ok(())
}

/// Smooth integration, or the event-driven flow at `epsilon = 0`.
pub fn trajectory(p: &ModelParams, initial: State, t_end: f64, cfg: &ExperimentConfig) -> Result<Trajectory, CliError> {
    Ok(if p.is_smooth() {
        simulate_smooth(p, initial, t_end, &cfg.sim_options())?
    } else {
        filippov_simulate(p, initial, t_end)?.trajectory
    })
}

pub fn zones(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.params();
    let z = switching_zone_with(&p, ctx.cfg.numerics.convention)?;
    println!("rho_minus = {:?}", z.rho_minus);
    println!("rho_plus = {:?}", z.rho_plus);
    println!("l_minus = {:?}", z.l_minus);
    println!("l_plus = {:?}", z.l_plus);
    let h = ctx.header("zones");
    let row = vec![
        p.epsilon.to_string(),
        p.eta.to_string(),
        z.rho_minus.to_string(),
        z.rho_plus.to_string(),
        z.l_minus.to_string(),
        z.l_plus.to_string(),
    ];
    ctx.write("zones.csv", |w| {
        output::write_table(w, &h, &["epsilon", "eta", "rho_minus", "rho_plus", "l_minus", "l_plus"], &[row])
    })?;
    Ok(())
}

pub fn equilibria(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.params();
    let branch = continue_equilibria(&p, (cfg.equilibria.mu_min, cfg.equilibria.mu_max), &ContinuationSettings::default())?;
    for f in &branch.folds {
        println!("fold mu = {}", f.mu);
    }
    for f in &branch.hopfs {
        println!("hopf mu = {}", f.mu);
    }
    let h = ctx.header("equilibrium-branch");
    ctx.write("branch.csv", |w| output::write_branch(w, &h, &branch))?;
    let h = ctx.header("branch-markers");
    ctx.write("branch_markers.csv", |w| output::write_branch_markers(w, &h, &branch))?;
    Ok(())
}

fn parse_anchor(s: &str) -> Option<Anchor> {
    match s {
        "L+" => Some(Anchor::Plus),
        "L-" => Some(Anchor::Minus),
        _ => None,
    }
}

pub fn orbit(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.params();
    let zone = switching_zone_with(&p, cfg.numerics.convention)?;
    let anchor = parse_anchor(&cfg.orbit.anchor);
    if !p.is_smooth() {
        if anchor.is_some() {
            return Err(ConfigError::Invalid("anchoring needs epsilon > 0".into()).into());
        }
        let orbit = filippov_orbit(&p)?;
        println!("period = {}", orbit.period());
        println!("multiplier = {}", orbit.multiplier);
        let h = ctx.header("orbit").with(format!("period = {}", orbit.period()));
        let rows = filippov_rows(&p, &orbit, 50 * cfg.orbit.samples_per_interval);
        ctx.write("orbit.csv", |w| output::write_table(w, &h, &ORBIT_COLUMNS, &rows))?;
        return Ok(());
    }
    let mut orbit = periodic_orbit(&p, &cfg.attractor_options(), &ctx.bvp())?;
    if let Some(a) = anchor {
        orbit = anchor_phase(&orbit, a, &ctx.bvp())?.orbit;
    }
    let (tag, _) = tag_from_extrema(&zone, orbit.rho_min, orbit.rho_max);
    println!("class = {tag}");
    println!("period = {}", orbit.period);
    println!("rho_min = {}", orbit.rho_min);
    println!("rho_max = {}", orbit.rho_max);
    println!("intervals = {}", orbit.intervals());
    let h = orbit_header(ctx, &orbit);
    ctx.write("orbit.csv", |w| output::write_orbit(w, &h, &orbit, &zone, cfg.orbit.samples_per_interval))?;
    Ok(())
}

pub const ORBIT_COLUMNS: [&str; 7] = ["tau", "t", "x", "y", "rho", "kappa", "zone"];

/// Rows in the orbit schema for the `epsilon = 0` orbit.
pub fn filippov_rows(p: &ModelParams, orbit: &welander::filippov::FilippovOrbit, n_per_zone: usize) -> Vec<Vec<String>> {
    let (times, states) = orbit.sample(p, n_per_zone);
    let period = orbit.period();
    times
        .iter()
        .zip(&states)
        .map(|(t, s)| {
            let rho = s.rho();
            // The R1 leg occupies [0, t_r1), the R2 leg the rest.
            let zone = if *t < orbit.t_r1 { "R1" } else { "R2" };
            vec![
                (t / period).to_string(),
                t.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                rho.to_string(),
                welander::model::exchange(p, rho).to_string(),
                zone.to_string(),
            ]
        })
        .collect()
}

pub fn orbit_header(ctx: &Context, orbit: &PeriodicOrbit) -> Header {
    ctx.header("orbit")
        .with(format!("orbit.mu = {}", orbit.params.mu))
        .with(format!("orbit.eta = {}", orbit.params.eta))
        .with(format!("orbit.epsilon = {}", orbit.params.epsilon))
        .with(format!("orbit.period = {}", orbit.period))
}

/// Tangency points T+ (approached with decreasing mu) and T- (increasing
/// mu) seeded from the orbits at `seeds`; a missing seed skips that
/// tangency.
pub fn tangency_pair(ctx: &Context, seeds: [Option<ModelParams>; 2]) -> Vec<(Anchor, welander::Result<TangencyPoint>)> {
    let opts = TangencyOptions {
        bvp: ctx.bvp(),
        ..TangencyOptions::default()
    };
    let att = ctx.cfg.attractor_options();
    [(Anchor::Plus, Direction::Decreasing), (Anchor::Minus, Direction::Increasing)]
        .into_iter()
        .zip(seeds)
        .filter_map(|((a, d), seed)| seed.map(|s| (a, find_tangency(&s, a, d, &att, &opts))))
        .collect()
}

pub fn tangency_label(a: Anchor) -> &'static str {
    match a {
        Anchor::Plus => "T+",
        Anchor::Minus => "T-",
    }
}

/// H and S (with N points and SNIC flags) and optionally T+/T- from their
/// seeds.
pub fn bifurcation_curves(
    ctx: &Context,
    p: &ModelParams,
    window: Window,
    tangency_seeds: [Option<ModelParams>; 2],
) -> Result<Vec<ParamCurve>, CliError> {
    let cfg = &ctx.cfg;
    let settings = CurveSettings {
        window,
        ..CurveSettings::default()
    };
    let h = hopf_curve(p, &settings)?;
    let mut s = fold_curve(p, &settings)?;
    let n = noncentral_points(p, &h, &s);
    s.special_points.extend(n);
    if cfg.curves.snic_stride > 0 {
        let snic = SnicSettings {
            attractor: welander::dynamics::AttractorOptions {
                tol: cfg.tolerances(),
                convention: cfg.numerics.convention,
                ..SnicSettings::default().attractor
            },
            ..SnicSettings::default()
        };
        classify_fold_curve(p, &mut s, &window, cfg.curves.snic_stride, &snic);
    }
    let mut curves = vec![h, s];
    if tangency_seeds.iter().any(Option::is_some) {
        let opts = TangencyCurveOptions {
            window,
            bvp: ctx.bvp(),
            ..TangencyCurveOptions::default()
        };
        for (anchor, found) in tangency_pair(ctx, tangency_seeds) {
            let label = tangency_label(anchor);
            match found.and_then(|tp| tangency_curve(&tp, &opts)) {
                Ok(c) => curves.push(c),
                Err(e) => eprintln!("welander: warning: no {label} curve at epsilon = {}: {e}", p.epsilon),
            }
        }
    }
    for c in &curves {
        println!("{}: {} points, termini {:?}", c.kind.as_str(), c.points.len(), c.termini);
        for sp in &c.special_points {
            println!("  {} at mu = {}, eta = {}", sp.kind.as_str(), sp.mu, sp.eta);
        }
    }
    Ok(curves)
}

pub fn write_curves(ctx: &Context, prefix: &str, curves: &[ParamCurve]) -> Result<(), CliError> {
    let h = ctx.header("curves");
    ctx.write(&format!("{prefix}curves.csv"), |w| output::write_curves(w, &h, curves))?;
    let h = ctx.header("special-points");
    ctx.write(&format!("{prefix}special_points.csv"), |w| output::write_special_points(w, &h, curves))?;
    Ok(())
}

pub fn curves(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.cfg.curves;
    let p = ctx.cfg.params();
    let window = Window {
        mu: (c.mu_min, c.mu_max),
        eta: (c.eta_min, c.eta_max),
    };
    let seed = p.with_mu(c.tangency_mu).with_eta(c.tangency_eta);
    let seed = c.tangency.then_some(seed);
    let curves = bifurcation_curves(ctx, &p, window, [seed; 2])?;
    write_curves(ctx, "", &curves)
}

pub fn run_scan(ctx: &Context, p: &ModelParams, mu: (f64, f64), eta: (f64, f64), n: (usize, usize)) -> Result<RegionScan, CliError> {
    let settings = ScanSettings {
        mu,
        eta,
        n_mu: n.0,
        n_eta: n.1,
        attractor: ctx.cfg.attractor_options(),
        workers: ctx.cfg.workers(),
    };
    let scan = region_scan(p, &settings)?;
    let counts: Vec<String> = scan.counts().iter().map(|(t, n)| format!("{t} {n}")).collect();
    println!("epsilon = {}: {}", p.epsilon, counts.join(", "));
    Ok(scan)
}

pub fn write_scan(ctx: &Context, prefix: &str, scan: &RegionScan) -> Result<(), CliError> {
    let h = ctx.header("scan");
    ctx.write(&format!("{prefix}scan.csv"), |w| output::write_scan(w, &h, scan))?;
    let h = ctx.header("scan-boundaries");
    ctx.write(&format!("{prefix}boundaries.csv"), |w| output::write_boundaries(w, &h, scan))?;
    Ok(())
}

pub fn scan(ctx: &Context) -> Result<(), CliError> {
    let s = &ctx.cfg.scan;
    let p = ctx.cfg.params();
    let scan = run_scan(ctx, &p, (s.mu_min, s.mu_max), (s.eta_min, s.eta_max), (s.n_mu, s.n_eta))?;
    write_scan(ctx, "", &scan)
}

/// The drift run of the `[drift]` section started on the attractor at
/// `mu_start`.
pub fn drift_run(ctx: &Context) -> Result<DriftRun, CliError> {
    let cfg = &ctx.cfg;
    let d = &cfg.drift;
    let p = cfg.params().with_mu(d.mu_start);
    let initial = match find_attractor(&p, default_initial(&p), &cfg.attractor_options())? {
        Attractor::Periodic(s) => s.states[0],
        Attractor::Equilibrium(s) => s,
    };
    let mut thresholds = Vec::new();
    if d.thresholds {
        let seed = p.with_mu(0.5 * (d.mu_start + d.mu_end));
        for (anchor, found) in tangency_pair(ctx, [Some(seed); 2]) {
            match found {
                Ok(tp) => thresholds.push((tangency_label(anchor).to_string(), tp.mu)),
                Err(e) => eprintln!("welander: warning: no {} threshold: {e}", tangency_label(anchor)),
            }
        }
    }
    Ok(run_drift(&p, d.mu_start, d.mu_end, d.rate, initial, &thresholds, &cfg.sim_options())?)
}

pub fn write_drift(ctx: &Context, prefix: &str, run: &DriftRun) -> Result<(), CliError> {
    for tr in &run.transitions {
        println!("{} at t = {} (mu = {})", tr.label, tr.t, tr.mu);
    }
    let h = ctx.header("drift");
    ctx.write(&format!("{prefix}drift.csv"), |w| output::write_drift(w, &h, run))?;
    let h = ctx.header("drift-transitions");
    ctx.write(&format!("{prefix}transitions.csv"), |w| output::write_transitions(w, &h, run))?;
    let mut rows = Vec::new();
    for &[t0, t1] in &ctx.cfg.drift.windows {
        match run.window_signature(t0, t1) {
            Ok(s) => {
                println!("window [{t0}, {t1}]: {} ({} cycles)", s.tag, s.cycles);
                rows.push(vec![
                    t0.to_string(),
                    t1.to_string(),
                    s.tag.to_string(),
                    s.grazing.to_string(),
                    s.cycles.to_string(),
                    s.rho_min.to_string(),
                    s.rho_max.to_string(),
                    s.durations.r1.to_string(),
                    s.durations.s.to_string(),
                    s.durations.r2.to_string(),
                ]);
            }
            Err(e) => eprintln!("welander: warning: window [{t0}, {t1}]: {e}"),
        }
    }
    let h = ctx.header("drift-windows");
    ctx.write(&format!("{prefix}windows.csv"), |w| {
        output::write_table(
            w,
            &h,
            &["t0", "t1", "tag", "grazing", "cycles", "rho_min", "rho_max", "r1", "s", "r2"],
            &rows,
        )
    })?;
    Ok(())
}

pub fn drift(ctx: &Context) -> Result<(), CliError> {
    let run = drift_run(ctx)?;
    write_drift(ctx, "", &run)
}
