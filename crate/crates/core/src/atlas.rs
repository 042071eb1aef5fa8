//! Oscillation classes, brute-force region scans of the parameter plane and
//! the drifting-salinity experiment.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{hopf_curve, CurvePoint, CurveSettings, Window};
use crate::dynamics::{
    default_initial, find_attractor, integrate_with_events, Attractor, AttractorOptions, SimOptions, Trajectory,
    ZoneDurations,
};
use crate::error::{Error, Result};
use crate::integrate::Tolerances;
use crate::model::{rhs_with_mu, ModelParams, State};
use crate::zone::{classify_rho, switching_zone_with, SwitchingZone, ZoneConvention, ZoneTag};

/// Distance in `rho` from a zone boundary within which an orbit is flagged
/// as grazing.
pub const GRAZING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OscTag {
    #[serde(rename = "P_S")]
    PS,
    #[serde(rename = "P_1")]
    P1,
    #[serde(rename = "P_2")]
    P2,
    W,
    #[serde(rename = "EQUILIBRIUM")]
    Equilibrium,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl OscTag {
    pub const ALL: [OscTag; 6] = [OscTag::PS, OscTag::P1, OscTag::P2, OscTag::W, OscTag::Equilibrium, OscTag::Unknown];

    pub fn as_str(&self) -> &'static str {
        match self {
            OscTag::PS => "P_S",
            OscTag::P1 => "P_1",
            OscTag::P2 => "P_2",
            OscTag::W => "W",
            OscTag::Equilibrium => "EQUILIBRIUM",
            OscTag::Unknown => "UNKNOWN",
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, OscTag::PS | OscTag::P1 | OscTag::P2 | OscTag::W)
    }

    /// Has a deep-decoupling phase (enters R1).
    pub fn decoupling(&self) -> bool {
        matches!(self, OscTag::P1 | OscTag::W)
    }

    /// Has a deep-coupling phase (enters R2).
    pub fn coupling(&self) -> bool {
        matches!(self, OscTag::P2 | OscTag::W)
    }
}

impl std::fmt::Display for OscTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OscTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OscTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Other(format!("unknown oscillation tag {s:?}")))
    }
}

/// Tag from the density range of a periodic attractor, plus the grazing flag.
pub fn tag_from_extrema(zone: &SwitchingZone, rho_min: f64, rho_max: f64) -> (OscTag, bool) {
    let low = rho_min < zone.rho_minus;
    let high = rho_max > zone.rho_plus;
    let tag = match (low, high) {
        (false, false) => OscTag::PS,
        (true, false) => OscTag::P1,
        (false, true) => OscTag::P2,
        (true, true) => OscTag::W,
    };
    let grazing = (rho_min - zone.rho_minus).abs() < GRAZING_TOL || (rho_max - zone.rho_plus).abs() < GRAZING_TOL;
    (tag, grazing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationClass {
    pub tag: OscTag,
    pub grazing: bool,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Zero for equilibria.
    pub period: f64,
    pub durations: ZoneDurations,
}

impl OscillationClass {
    /// Fraction of the period spent in the switching zone.
    pub fn switching_fraction(&self) -> f64 {
        if self.period > 0.0 {
            self.durations.s / self.period
        } else {
            0.0
        }
    }
}

/// Classify the attractor reached from the default initial state.
pub fn classify(params: &ModelParams, opts: &AttractorOptions) -> Result<OscillationClass> {
    let zone = switching_zone_with(params, opts.convention)?;
    match find_attractor(params, default_initial(params), opts)? {
        Attractor::Equilibrium(s) => Ok(OscillationClass {
            tag: OscTag::Equilibrium,
            grazing: false,
            rho_min: s.rho(),
            rho_max: s.rho(),
            period: 0.0,
            durations: ZoneDurations::default(),
        }),
        Attractor::Periodic(p) => {
            let (tag, grazing) = tag_from_extrema(&zone, p.rho_min, p.rho_max);
            Ok(OscillationClass {
                tag,
                grazing,
                rho_min: p.rho_min,
                rho_max: p.rho_max,
                period: p.period,
                durations: p.durations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub mu: (f64, f64),
    pub eta: (f64, f64),
    pub n_mu: usize,
    pub n_eta: usize,
    pub attractor: AttractorOptions,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            mu: (0.0, 0.4),
            eta: (-0.6, 0.1),
            n_mu: 41,
            n_eta: 36,
            attractor: AttractorOptions::default(),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanNode {
    pub mu: f64,
    pub eta: f64,
    pub tag: OscTag,
    /// Absent for failed nodes.
    pub class: Option<OscillationClass>,
    pub error: Option<String>,
}

/// A class boundary traced through the grid: the polyline separates nodes
/// tagged `tag` from the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub tag: OscTag,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScan {
    pub epsilon: f64,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    /// Row-major with `eta` as the slow index.
    pub nodes: Vec<ScanNode>,
    pub boundaries: Vec<Boundary>,
}

impl RegionScan {
    pub fn node(&self, i_mu: usize, i_eta: usize) -> &ScanNode {
        &self.nodes[i_eta * self.mu.len() + i_mu]
    }

    pub fn count(&self, tag: OscTag) -> usize {
        self.nodes.iter().filter(|n| n.tag == tag).count()
    }

    pub fn counts(&self) -> BTreeMap<OscTag, usize> {
        let mut m = BTreeMap::new();
        for n in &self.nodes {
            *m.entry(n.tag).or_insert(0) += 1;
        }
        m
    }
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Classify every node of a `(mu, eta)` grid in parallel.
pub fn region_scan(base: &ModelParams, settings: &ScanSettings) -> Result<RegionScan> {
    if settings.n_mu < 2 || settings.n_eta < 2 {
        return Err(Error::InvalidParams("scan grid needs at least 2 nodes per axis".into()));
    }
    base.validate()?;
    let mu = linspace(settings.mu, settings.n_mu);
    let eta = linspace(settings.eta, settings.n_eta);
    let coords: Vec<(f64, f64)> = eta.iter().flat_map(|&e| mu.iter().map(move |&m| (m, e))).collect();
    let work = |&(m, e): &(f64, f64)| {
        let p = base.with_mu(m).with_eta(e);
        match classify(&p, &settings.attractor) {
            Ok(c) => ScanNode {
                mu: m,
                eta: e,
                tag: c.tag,
                class: Some(c),
                error: None,
            },
            Err(err) => ScanNode {
                mu: m,
                eta: e,
                tag: OscTag::Unknown,
                class: None,
                error: Some(err.to_string()),
            },
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Other(e.to_string()))?;
    let nodes: Vec<ScanNode> = pool.install(|| coords.par_iter().map(work).collect());
    let tags: Vec<OscTag> = nodes.iter().map(|n| n.tag).collect();
    let mut boundaries = Vec::new();
    for tag in OscTag::ALL {
        if tags.contains(&tag) {
            for points in marching_squares(&mu, &eta, &tags, tag) {
                boundaries.push(Boundary { tag, points });
            }
        }
    }
    Ok(RegionScan {
        epsilon: base.epsilon,
        mu,
        eta,
        nodes,
        boundaries,
    })
}

/// Contours of the indicator of `tag` at level 1/2, chained into
/// polylines.
pub fn marching_squares(mu: &[f64], eta: &[f64], tags: &[OscTag], tag: OscTag) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (mu.len(), eta.len());
    let inside = |i: usize, j: usize| tags[j * nx + i] == tag;
    // Edge midpoints are keyed by a grid-aligned integer id so segments can
    // be chained exactly.
    type Key = (usize, usize, u8);
    let mid = |k: Key| -> (f64, f64) {
        let (i, j, d) = k;
        if d == 0 {
            (0.5 * (mu[i] + mu[i + 1]), eta[j])
        } else {
            (mu[i], 0.5 * (eta[j] + eta[j + 1]))
        }
    };
    let mut segs: Vec<(Key, Key)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let bottom = (i, j, 0u8);
            let right = (i + 1, j, 1u8);
            let top = (i, j + 1, 0u8);
            let left = (i, j, 1u8);
            let idx = c.iter().enumerate().fold(0u8, |a, (k, &b)| a | ((b as u8) << k));
            let centre = c.iter().filter(|b| **b).count() * 2 > 4;
            match idx {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 | 10 => {
                    // Saddle cells: separate the corners that share the
                    // centre's value.
                    let centre_in = centre;
                    if (idx == 5) == centre_in {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    } else {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(segs).into_iter().map(|p| p.into_iter().map(mid).collect()).collect()
}

fn chain<K: Copy + Ord>(segs: Vec<(K, K)>) -> Vec<Vec<K>> {
    let mut adj: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (n, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(n);
        adj.entry(*b).or_default().push(n);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start: K, used: &mut Vec<bool>, line: &mut Vec<K>| {
        let mut at = start;
        loop {
            let next = adj[&at].iter().copied().find(|&n| !used[n]);
            let Some(n) = next else { break };
            used[n] = true;
            let (a, b) = segs[n];
            at = if a == at { b } else { a };
            line.push(at);
        }
    };
    // Open polylines first, starting from endpoints of odd degree.
    let ends: Vec<K> = adj.iter().filter(|(_, v)| v.len() % 2 == 1).map(|(k, _)| *k).collect();
    for start in ends {
        if adj[&start].iter().all(|&n| used[n]) {
            continue;
        }
        let mut line = vec![start];
        walk(start, &mut used, &mut line);
        out.push(line);
    }
    for n in 0..segs.len() {
        if !used[n] {
            let start = segs[n].0;
            let mut line = vec![start];
            walk(start, &mut used, &mut line);
            out.push(line);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSettings {
    /// Initial bracket; oscillations must exist at the lower end only.
    pub epsilon: (f64, f64),
    /// Grid nodes per axis.
    pub n: usize,
    /// Bracket width at which bisection stops.
    pub tol: f64,
    /// Relative padding of the scan window around the Hopf curve.
    pub padding: f64,
    pub attractor: AttractorOptions,
    pub workers: Option<usize>,
}

impl Default for CutoffSettings {
    fn default() -> Self {
        Self {
            epsilon: (0.13, 0.16),
            n: 40,
            tol: 1e-3,
            padding: 0.1,
            attractor: AttractorOptions::default(),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffResult {
    pub bracket: (f64, f64),
    pub mu: (f64, f64),
    pub eta: (f64, f64),
    /// `(epsilon, periodic node count)` for every scan performed.
    pub evaluations: Vec<(f64, usize)>,
}

/// Bisection in `epsilon` on whether a grid scan finds any periodic
/// attractor. The scan window is the padded bounding box of the Hopf curve
/// at the current lower bracket end; the oscillation region shrinks with
/// `epsilon`, so this box contains it for every larger value.
pub fn oscillation_cutoff(base: &ModelParams, settings: &CutoffSettings) -> Result<CutoffResult> {
    let (mut lo, mut hi) = settings.epsilon;
    let mut window = hopf_window(base, lo, settings.padding)?;
    let mut evaluations = Vec::new();
    let mut periodic = |eps: f64, window: ((f64, f64), (f64, f64))| -> Result<usize> {
        let scan = ScanSettings {
            mu: window.0,
            eta: window.1,
            n_mu: settings.n,
            n_eta: settings.n,
            attractor: settings.attractor,
            workers: settings.workers,
        };
        let r = region_scan(&base.with_epsilon(eps), &scan)?;
        let n = r.nodes.iter().filter(|n| n.tag.is_periodic()).count();
        evaluations.push((eps, n));
        Ok(n)
    };
    if periodic(lo, window)? == 0 {
        return Err(Error::Other(format!("no oscillations at the lower bracket end epsilon = {lo}")));
    }
    if periodic(hi, window)? > 0 {
        return Err(Error::Other(format!("oscillations persist at the upper bracket end epsilon = {hi}")));
    }
    while hi - lo > settings.tol {
        let mid = 0.5 * (lo + hi);
        if periodic(mid, window)? > 0 {
            lo = mid;
            window = hopf_window(base, lo, settings.padding)?;
        } else {
            hi = mid;
        }
    }
    Ok(CutoffResult {
        bracket: (lo, hi),
        mu: window.0,
        eta: window.1,
        evaluations,
    })
}

fn hopf_window(base: &ModelParams, epsilon: f64, padding: f64) -> Result<((f64, f64), (f64, f64))> {
    let wide = CurveSettings {
        window: Window {
            mu: (-0.5, 2.0),
            eta: (-3.0, 2.0),
        },
        ..CurveSettings::default()
    };
    let h = hopf_curve(&base.with_epsilon(epsilon), &wide)?;
    let bound = |f: fn(&CurvePoint) -> f64| {
        let (a, b) = h
            .points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let d = padding * (b - a);
        (a - d, b + d)
    };
    Ok((bound(|p| p.mu), bound(|p| p.eta)))
}

/// Salinity flux of the linear ramp at time `t`.
pub fn ramp_mu(mu_start: f64, mu_end: f64, rate: f64, t: f64) -> f64 {
    (1.0 - rate * t) * mu_start + rate * t * mu_end
}

/// Time at which the ramp passes `mu`, if within `[0, 1/rate]`.
pub fn ramp_crossing_time(mu_start: f64, mu_end: f64, rate: f64, mu: f64) -> Option<f64> {
    let t = (mu - mu_start) / (rate * (mu_end - mu_start));
    (t >= 0.0 && t <= 1.0 / rate).then_some(t)
}

/// Frozen-parameter threshold passed by the ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub label: String,
    pub mu: f64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct DriftRun {
    pub params: ModelParams,
    pub mu_start: f64,
    pub mu_end: f64,
    pub rate: f64,
    pub zone: SwitchingZone,
    pub trajectory: Trajectory,
    pub transitions: Vec<Transition>,
}

impl DriftRun {
    pub fn mu_at(&self, t: f64) -> f64 {
        ramp_mu(self.mu_start, self.mu_end, self.rate, t)
    }

    pub fn t_end(&self) -> f64 {
        1.0 / self.rate
    }

    /// Per-cycle statistics on `[t0, t1]`.
    pub fn cycles(&self, t0: f64, t1: f64) -> Vec<CycleStats> {
        let (a, b, r) = (self.mu_start, self.mu_end, self.rate);
        cycle_stats(&self.trajectory, &self.params, &self.zone, t0, t1, &|t| ramp_mu(a, b, r, t))
    }

    pub fn window_signature(&self, t0: f64, t1: f64) -> Result<WindowSignature> {
        let (a, b, r) = (self.mu_start, self.mu_end, self.rate);
        window_signature(&self.trajectory, &self.params, &self.zone, t0, t1, &|t| ramp_mu(a, b, r, t))
    }
}

/// Integrate the model with `mu` following the linear ramp over
/// `[0, 1/rate]`, annotating the times at which the ramp passes the given
/// frozen-parameter thresholds.
pub fn run_drift(
    params: &ModelParams,
    mu_start: f64,
    mu_end: f64,
    rate: f64,
    initial: State,
    thresholds: &[(String, f64)],
    opts: &SimOptions,
) -> Result<DriftRun> {
    params.require_smooth()?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParams(format!("drift rate must be positive, got {rate}")));
    }
    if mu_start == mu_end {
        return Err(Error::InvalidParams("drift needs mu_start != mu_end".into()));
    }
    let tol = Tolerances::new(opts.tol.rel, opts.tol.abs)?;
    let zone = switching_zone_with(params, opts.convention)?;
    let p = *params;
    let field = move |t: f64, y: [f64; 2]| rhs_with_mu(&p, ramp_mu(mu_start, mu_end, rate, t), State::from_array(y));
    let trajectory = integrate_with_events(field, &zone, initial, 1.0 / rate, tol)?;
    let mut transitions: Vec<Transition> = thresholds
        .iter()
        .filter_map(|(label, mu)| {
            ramp_crossing_time(mu_start, mu_end, rate, *mu).map(|t| Transition {
                label: label.clone(),
                mu: *mu,
                t,
            })
        })
        .collect();
    transitions.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(DriftRun {
        params: params.with_mu(mu_start),
        mu_start,
        mu_end,
        rate,
        zone,
        trajectory,
        transitions,
    })
}

/// Density range and zone durations of one cycle, delimited by successive
/// upward passages through `rho = eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub t_start: f64,
    pub t_end: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub durations: ZoneDurations,
}

/// Split `[t0, t1]` of a smooth trajectory into cycles.
pub fn cycle_stats(
    traj: &Trajectory,
    params: &ModelParams,
    zone: &SwitchingZone,
    t0: f64,
    t1: f64,
    mu_of_t: &dyn Fn(f64) -> f64,
) -> Vec<CycleStats> {
    let level = params.eta;
    let mut starts = Vec::new();
    for st in &traj.dense {
        if st.t1 < t0 || st.t0 > t1 {
            continue;
        }
        for (t, slope) in crate::integrate::step_roots(st, |_t, y| y[1] - y[0] - level, crate::dynamics::EVENT_TIME_TOL) {
            if slope > 0.0 && t >= t0 && t <= t1 {
                starts.push(t);
            }
        }
    }
    let extrema = traj.rho_extrema(params, t0, t1, mu_of_t);
    let mut out = Vec::new();
    for w in starts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ends = [traj.at(a).map(|s| s.rho()), traj.at(b).map(|s| s.rho())];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in ends.into_iter().flatten() {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        for &(t, r, _) in &extrema {
            if t > a && t < b {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        let mut cuts = vec![a, b];
        for e in &traj.events {
            if e.t > a && e.t < b {
                cuts.push(e.t);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut d = ZoneDurations::default();
        for c in cuts.windows(2) {
            let Some(s) = traj.at(0.5 * (c[0] + c[1])) else { continue };
            let len = c[1] - c[0];
            match classify_rho(zone, s.rho()) {
                ZoneTag::R1 => d.r1 += len,
                ZoneTag::R2 => d.r2 += len,
                _ => d.s += len,
            }
        }
        out.push(CycleStats {
            t_start: a,
            t_end: b,
            rho_min: lo,
            rho_max: hi,
            durations: d,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSignature {
    pub tag: OscTag,
    pub grazing: bool,
    pub cycles: usize,
    /// Medians over the cycles in the window.
    pub rho_min: f64,
    pub rho_max: f64,
    pub durations: ZoneDurations,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Local oscillation class on `[t0, t1]` from the median per-cycle density
/// extrema.
pub fn window_signature(
    traj: &Trajectory,
    params: &ModelParams,
    zone: &SwitchingZone,
    t0: f64,
    t1: f64,
    mu_of_t: &dyn Fn(f64) -> f64,
) -> Result<WindowSignature> {
    let cycles = cycle_stats(traj, params, zone, t0, t1, mu_of_t);
    if cycles.len() < 2 {
        return Err(Error::TooFewCycles {
            t0,
            t1,
            cycles: cycles.len(),
        });
    }
    let rho_min = median(cycles.iter().map(|c| c.rho_min).collect());
    let rho_max = median(cycles.iter().map(|c| c.rho_max).collect());
    let (tag, grazing) = tag_from_extrema(zone, rho_min, rho_max);
    Ok(WindowSignature {
        tag,
        grazing,
        cycles: cycles.len(),
        rho_min,
        rho_max,
        durations: ZoneDurations {
            r1: median(cycles.iter().map(|c| c.durations.r1).collect()),
            s: median(cycles.iter().map(|c| c.durations.s).collect()),
            r2: median(cycles.iter().map(|c| c.durations.r2).collect()),
        },
    })
}

/// Window signature of an autonomous trajectory.
pub fn frozen_window_signature(traj: &Trajectory, params: &ModelParams, convention: ZoneConvention, t0: f64, t1: f64) -> Result<WindowSignature> {
    let zone = switching_zone_with(params, convention)?;
    let mu = params.mu;
    window_signature(traj, params, &zone, t0, t1, &|_| mu)
}
