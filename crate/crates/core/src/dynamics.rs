//! Time integration of the smooth model with zone-crossing events, and
//! brute-force attractor detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{step_roots, DenseStep, Dopri5, Tolerances, Vec2};
use crate::model::{exchange, find_equilibria, rhs, ModelParams, Stability, State};
use crate::zone::{classify_rho, switching_zone_with, SwitchingZone, ZoneConvention, ZoneTag};

/// Time accuracy of located events.
pub const EVENT_TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    RhoMinusUp,
    RhoMinusDown,
    RhoPlusUp,
    RhoPlusDown,
    SigmaUp,
    SigmaDown,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::RhoMinusUp => "rho_minus_up",
            EventKind::RhoMinusDown => "rho_minus_down",
            EventKind::RhoPlusUp => "rho_plus_up",
            EventKind::RhoPlusDown => "rho_plus_down",
            EventKind::SigmaUp => "sigma_up",
            EventKind::SigmaDown => "sigma_down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub state: State,
}

/// Time-stamped path with zone-crossing events. Smooth runs also keep the
/// dense-output pieces so the path can be evaluated between steps.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub events: Vec<Event>,
    pub(crate) dense: Vec<DenseStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn last(&self) -> Option<State> {
        self.states.last().copied()
    }

    /// State at time `t`, from the dense output when available, otherwise by
    /// linear interpolation between stored points.
    pub fn at(&self, t: f64) -> Option<State> {
        if self.times.is_empty() || t < self.times[0] || t > self.t_end() {
            return None;
        }
        if !self.dense.is_empty() {
            let i = self.dense.partition_point(|s| s.t1 < t).min(self.dense.len() - 1);
            return Some(State::from_array(self.dense[i].eval(t)));
        }
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return Some(self.states[0]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let (a, b) = (self.states[i - 1], self.states[i]);
        Some(State::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)))
    }

    /// Local extrema of the density on `[t0, t1]` located on the dense
    /// output: `(t, rho, is_max)`.
    pub fn rho_extrema(&self, params: &ModelParams, t0: f64, t1: f64, mu_of_t: &dyn Fn(f64) -> f64) -> Vec<(f64, f64, bool)> {
        let mut out = Vec::new();
        for st in &self.dense {
            if st.t1 < t0 || st.t0 > t1 {
                continue;
            }
            let g = |t: f64, y: Vec2| {
                let k = exchange(params, y[1] - y[0]);
                (mu_of_t(t) - k * y[1]) - (1.0 - y[0] - k * y[0])
            };
            for (t, slope) in step_roots(st, g, EVENT_TIME_TOL) {
                if t >= t0 && t <= t1 {
                    let y = st.eval(t);
                    out.push((t, y[1] - y[0], slope < 0.0));
                }
            }
        }
        out
    }
}

/// Options for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub tol: Tolerances,
    pub convention: ZoneConvention,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            convention: ZoneConvention::default(),
        }
    }
}

/// Integrate a (possibly time-dependent) planar field while recording
/// crossings of `rho_minus` and `rho_plus`.
pub(crate) fn integrate_with_events<F: Fn(f64, Vec2) -> Vec2>(
    field: F,
    zone: &SwitchingZone,
    initial: State,
    t_end: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    traj.times.push(0.0);
    traj.states.push(initial);
    let mut stepper = Dopri5::new(field, 0.0, initial.to_array(), tol);
    while stepper.t() < t_end {
        let st = stepper.step(t_end)?;
        let mut evs: Vec<Event> = Vec::new();
        for (level, up, down) in [
            (zone.rho_minus, EventKind::RhoMinusUp, EventKind::RhoMinusDown),
            (zone.rho_plus, EventKind::RhoPlusUp, EventKind::RhoPlusDown),
        ] {
            for (t, slope) in step_roots(&st, |_t, y| y[1] - y[0] - level, EVENT_TIME_TOL) {
                let s = State::from_array(st.eval(t));
                evs.push(Event {
                    t,
                    kind: if slope > 0.0 { up } else { down },
                    state: s,
                });
            }
        }
        evs.sort_by(|a, b| a.t.total_cmp(&b.t));
        traj.events.extend(evs);
        traj.times.push(st.t1);
        traj.states.push(State::from_array(st.y1()));
        traj.dense.push(st);
    }
    Ok(traj)
}

/// Integrate the autonomous smooth model from `initial` to `t_end`.
pub fn simulate(params: &ModelParams, initial: State, t_end: f64, opts: &SimOptions) -> Result<Trajectory> {
    params.require_smooth()?;
    let tol = Tolerances::new(opts.tol.rel, opts.tol.abs)?;
    let zone = switching_zone_with(params, opts.convention)?;
    let p = *params;
    integrate_with_events(
        move |_t, y| rhs(&p, State::from_array(y)),
        &zone,
        initial,
        t_end,
        tol,
    )
}

/// Result of [`find_attractor`].
#[derive(Debug, Clone, PartialEq)]
pub enum Attractor {
    Equilibrium(State),
    Periodic(PeriodicSample),
}

/// A converged periodic attractor sampled over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSample {
    pub period: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Times in `[0, period]`, starting on the Poincaré section.
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Time spent per zone over the sampled period.
    pub durations: ZoneDurations,
    /// Density level of the section `{rho = level, rho increasing}`.
    pub section: f64,
}

/// Time per zone over one period; `s` is the time in the switching zone.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ZoneDurations {
    pub r1: f64,
    pub s: f64,
    pub r2: f64,
}

impl ZoneDurations {
    pub fn total(&self) -> f64 {
        self.r1 + self.s + self.r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorOptions {
    pub settle_time: f64,
    pub max_time: f64,
    pub tol: Tolerances,
    /// Samples of the returned loop.
    pub loop_samples: usize,
    pub convention: ZoneConvention,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        Self {
            settle_time: 500.0,
            max_time: 5000.0,
            tol: Tolerances::default(),
            loop_samples: 2000,
            convention: ZoneConvention::default(),
        }
    }
}

/// Velocity norm below which a state counts as an equilibrium.
pub const EQUILIBRIUM_SPEED: f64 = 1e-9;
/// Distance to a stable equilibrium that counts as having reached it. Inside
/// the switching layer the integrator's noise floor keeps the velocity
/// above [`EQUILIBRIUM_SPEED`].
pub const EQUILIBRIUM_DIST: f64 = 1e-7;
/// Relative spread of successive return times accepted as periodic.
pub const PERIOD_SPREAD: f64 = 1e-6;

/// Density level of the Poincaré section: the density of the non-saddle
/// equilibrium inside the switching zone that is closest to `eta` (every
/// oscillation winds around it), falling back to `eta`.
pub fn section_level(params: &ModelParams, zone: &SwitchingZone) -> f64 {
    let eqs = find_equilibria(params).unwrap_or_default();
    eqs.iter()
        .filter(|e| e.stability != Stability::Saddle)
        .map(|e| e.state.rho())
        .filter(|&r| r > zone.rho_minus && r < zone.rho_plus)
        .min_by(|a, b| (a - params.eta).abs().total_cmp(&(b - params.eta).abs()))
        .unwrap_or(params.eta)
}

/// Default starting point: displaced from the section equilibrium so an
/// unstable focus is left immediately.
pub fn default_initial(params: &ModelParams) -> State {
    let eqs = find_equilibria(params).unwrap_or_default();
    let base = eqs
        .iter()
        .filter(|e| e.stability != Stability::Saddle)
        .min_by(|a, b| {
            (a.state.rho() - params.eta)
                .abs()
                .total_cmp(&(b.state.rho() - params.eta).abs())
        })
        .map(|e| e.state);
    match base {
        Some(s) => State::new(s.x, s.y + 0.01),
        None => {
            let x = 1.0 / (1.0 + 0.5 * (params.kappa1 + params.kappa2));
            State::new(x, x + params.eta + 0.01)
        }
    }
}

/// Integrate past a transient and report the attractor reached. For
/// `epsilon = 0` the return map on the switching line takes over after the
/// transient.
pub fn find_attractor(params: &ModelParams, initial: State, opts: &AttractorOptions) -> Result<Attractor> {
    params.validate()?;
    if !params.is_smooth() {
        return crate::filippov::filippov_attractor(params, initial, opts);
    }
    let tol = Tolerances::new(opts.tol.rel, opts.tol.abs)?;
    let zone = switching_zone_with(params, opts.convention)?;
    let level = section_level(params, &zone);
    let p = *params;
    let field = move |_t: f64, y: Vec2| rhs(&p, State::from_array(y));
    let mut stepper = Dopri5::new(field, 0.0, initial.to_array(), tol);
    stepper.advance_to(opts.settle_time)?;

    let speed = |y: Vec2| {
        let f = rhs(params, State::from_array(y));
        f[0].hypot(f[1])
    };
    let stable: Vec<State> = find_equilibria(params)
        .unwrap_or_default()
        .into_iter()
        .filter(|e| e.stability == Stability::Stable)
        .map(|e| e.state)
        .collect();
    let mut hits: Vec<(f64, State)> = Vec::new();
    loop {
        if speed(stepper.y()) < EQUILIBRIUM_SPEED {
            return Ok(Attractor::Equilibrium(State::from_array(stepper.y())));
        }
        let here = State::from_array(stepper.y());
        if let Some(eq) = stable.iter().find(|e| e.dist(&here) < EQUILIBRIUM_DIST) {
            return Ok(Attractor::Equilibrium(*eq));
        }
        if let Some(eq) = contracting_to(&hits, &stable) {
            return Ok(Attractor::Equilibrium(eq));
        }
        if stepper.t() >= opts.max_time {
            return Err(Error::NoConvergence { t: stepper.t() });
        }
        let st = stepper.step(opts.max_time)?;
        for (t, slope) in step_roots(&st, |_t, y| y[1] - y[0] - level, EVENT_TIME_TOL) {
            if slope > 0.0 {
                hits.push((t, State::from_array(st.eval(t))));
            }
        }
        if hits.len() >= 3 {
            let n = hits.len();
            let p1 = hits[n - 1].0 - hits[n - 2].0;
            let p2 = hits[n - 2].0 - hits[n - 3].0;
            let spread = (p1 - p2).abs() / p1.max(p2);
            let drift = hits[n - 1].1.dist(&hits[n - 2].1).max(hits[n - 2].1.dist(&hits[n - 3].1));
            if spread < PERIOD_SPREAD && drift < 1e-7 {
                let start = hits[n - 1];
                return sample_loop(params, &zone, start.1, p1, level, opts).map(Attractor::Periodic);
            }
        }
    }
}

/// Section hits closing in on a stable equilibrium at a steady geometric
/// rate: a weakly damped focus, typical next to a Hopf point, that would
/// take too long to meet the velocity criterion.
fn contracting_to(hits: &[(f64, State)], stable: &[State]) -> Option<State> {
    if hits.len() < 4 {
        return None;
    }
    let last = hits[hits.len() - 4..].iter().map(|h| h.1).collect::<Vec<_>>();
    stable.iter().copied().find(|eq| {
        let logs: Vec<f64> = last.iter().map(|s| s.dist(eq).ln()).collect();
        let steps: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
        let curvature = (steps[2] - steps[1]).abs().max((steps[1] - steps[0]).abs());
        logs.iter().all(|l| l.is_finite()) && steps.iter().all(|d| *d < -CONTRACTION_MIN) && curvature < 1e-3 * steps[2].abs()
    })
}

/// Smallest per-revolution decay in log-distance accepted as contraction.
const CONTRACTION_MIN: f64 = 1e-4;

/// Integrate one more revolution from a section point and sample it.
fn sample_loop(
    params: &ModelParams,
    zone: &SwitchingZone,
    start: State,
    period_guess: f64,
    level: f64,
    opts: &AttractorOptions,
) -> Result<PeriodicSample> {
    let p = *params;
    let field = move |_t: f64, y: Vec2| rhs(&p, State::from_array(y));
    let mut stepper = Dopri5::new(field, 0.0, start.to_array(), opts.tol);
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut period = None;
    let t_cap = 1.5 * period_guess;
    while period.is_none() && stepper.t() < t_cap {
        let st = stepper.step(t_cap)?;
        for (t, slope) in step_roots(&st, |_t, y| y[1] - y[0] - level, EVENT_TIME_TOL) {
            if slope > 0.0 && t > 0.5 * period_guess && period.is_none() {
                period = Some(t);
            }
        }
        steps.push(st);
    }
    let period = period.ok_or(Error::NoConvergence { t: t_cap })?;

    let eval = |t: f64| {
        let i = steps.partition_point(|s| s.t1 < t).min(steps.len() - 1);
        State::from_array(steps[i].eval(t))
    };
    let n = opts.loop_samples.max(16);
    let times: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    let states: Vec<State> = times.iter().map(|&t| eval(t)).collect();

    let mut rho_min = f64::INFINITY;
    let mut rho_max = f64::NEG_INFINITY;
    let mut crossings: Vec<f64> = vec![0.0, period];
    for st in &steps {
        if st.t0 >= period {
            break;
        }
        let g = |_t: f64, y: Vec2| {
            let f = rhs(params, State::from_array(y));
            f[1] - f[0]
        };
        for (t, _) in step_roots(st, g, EVENT_TIME_TOL) {
            if t <= period {
                let r = eval(t).rho();
                rho_min = rho_min.min(r);
                rho_max = rho_max.max(r);
            }
        }
        for level in [zone.rho_minus, zone.rho_plus] {
            for (t, _) in step_roots(st, |_t, y| y[1] - y[0] - level, EVENT_TIME_TOL) {
                if t < period {
                    crossings.push(t);
                }
            }
        }
    }
    for s in &states {
        rho_min = rho_min.min(s.rho());
        rho_max = rho_max.max(s.rho());
    }
    crossings.sort_by(|a, b| a.total_cmp(b));
    let mut durations = ZoneDurations::default();
    for w in crossings.windows(2) {
        let mid = eval(0.5 * (w[0] + w[1])).rho();
        let dt = w[1] - w[0];
        match classify_rho(zone, mid) {
            ZoneTag::R1 => durations.r1 += dt,
            ZoneTag::R2 => durations.r2 += dt,
            _ => durations.s += dt,
        }
    }
    Ok(PeriodicSample {
        period,
        rho_min,
        rho_max,
        times,
        states,
        durations,
        section: level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_rejects_step_limit() {
        let r = simulate(&ModelParams::new(0.2, -0.17, 0.0), State::new(0.5, 0.3), 1.0, &SimOptions::default());
        assert!(matches!(r, Err(Error::NonSmoothLimit { .. })));
    }

    #[test]
    fn simulate_rejects_bad_tolerance() {
        let opts = SimOptions {
            tol: Tolerances { rel: 0.5, abs: 1e-9 },
            ..Default::default()
        };
        let r = simulate(&ModelParams::new(0.2, -0.17, 0.009), State::new(0.5, 0.3), 1.0, &opts);
        assert!(matches!(r, Err(Error::ToleranceDomain { .. })));
    }

    #[test]
    fn events_lie_on_thresholds() {
        let params = ModelParams::new(0.14, -0.3, 0.009);
        let zone = switching_zone_with(&params, ZoneConvention::default()).unwrap();
        let traj = simulate(&params, default_initial(&params), 60.0, &SimOptions::default()).unwrap();
        assert!(traj.events.len() > 4);
        for e in &traj.events {
            let level = match e.kind {
                EventKind::RhoMinusUp | EventKind::RhoMinusDown => zone.rho_minus,
                _ => zone.rho_plus,
            };
            assert!((e.state.rho() - level).abs() < 1e-9, "{e:?}");
        }
        assert!(traj.times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn equilibrium_far_outside_oscillation_window() {
        let params = ModelParams::new(0.9, -0.17, 0.009);
        let a = find_attractor(&params, default_initial(&params), &AttractorOptions::default()).unwrap();
        assert!(matches!(a, Attractor::Equilibrium(_)));
    }

    #[test]
    fn trajectory_lookup() {
        let params = ModelParams::new(0.14, -0.3, 0.009);
        let traj = simulate(&params, State::new(0.5, 0.3), 5.0, &SimOptions::default()).unwrap();
        let s = traj.at(traj.times[3]).unwrap();
        assert!(s.dist(&traj.states[3]) < 1e-12);
        assert!(traj.at(6.0).is_none());
    }
}
