//! The piecewise-linear limit `epsilon = 0`: exact zone flows, event-driven
//! simulation across the switching line and the return map on it.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Attractor, AttractorOptions, Event, EventKind, PeriodicSample, Trajectory, ZoneDurations, EQUILIBRIUM_SPEED, PERIOD_SPREAD};
use crate::error::{Error, Result};
use crate::integrate::{step_roots, Dopri5, Tolerances};
use crate::model::{rhs, ModelParams, State};

/// Side of the switching line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `rho < eta`, mixing `kappa1`.
    R1,
    /// `rho > eta`, mixing `kappa2`.
    R2,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::R1 => Side::R2,
            Side::R2 => Side::R1,
        }
    }

    fn kappa(self, params: &ModelParams) -> f64 {
        match self {
            Side::R1 => params.kappa1,
            Side::R2 => params.kappa2,
        }
    }
}

/// Exact flow of the frozen-coefficient linear field of one zone.
#[derive(Debug, Clone, Copy)]
pub struct ZoneFlow {
    kappa: f64,
    xe: f64,
    ye: f64,
    x0: f64,
    y0: f64,
}

impl ZoneFlow {
    pub fn new(params: &ModelParams, side: Side, start: State) -> Self {
        let kappa = side.kappa(params);
        Self {
            kappa,
            xe: 1.0 / (1.0 + kappa),
            ye: params.mu / kappa,
            x0: start.x,
            y0: start.y,
        }
    }

    /// Time of the stationary point of `rho` along the flow, if any.
    pub fn rho_turn(&self) -> Option<f64> {
        let a = self.kappa * (self.y0 - self.ye);
        let b = (1.0 + self.kappa) * (self.x0 - self.xe);
        let ratio = b / a;
        (ratio > 0.0 && ratio.is_finite()).then(|| ratio.ln())
    }

    pub fn at(&self, t: f64) -> State {
        State::new(
            self.xe + (self.x0 - self.xe) * (-(1.0 + self.kappa) * t).exp(),
            self.ye + (self.y0 - self.ye) * (-self.kappa * t).exp(),
        )
    }

    pub fn velocity(&self, t: f64) -> [f64; 2] {
        let s = self.at(t);
        [1.0 - s.x - self.kappa * s.x, self.ye * self.kappa - self.kappa * s.y]
    }

    /// `rho - eta` along the flow as a function of `s = exp(-kappa t)`:
    /// `c + a s - b s^p` with `p = (1 + kappa)/kappa`.
    fn sigma_distance_in_s(&self, eta: f64, s: f64) -> f64 {
        let p = (1.0 + self.kappa) / self.kappa;
        (self.ye - self.xe - eta) + (self.y0 - self.ye) * s - (self.x0 - self.xe) * s.powf(p)
    }

    /// First time `t > 0` at which the flow reaches the switching line.
    ///
    /// In `s = exp(-kappa t)` the distance is convex or concave, so it has at
    /// most two zeros on `(0, 1]`; the first in time is the largest one.
    pub fn next_crossing(&self, eta: f64, t_bound: f64) -> Result<Option<f64>> {
        let p = (1.0 + self.kappa) / self.kappa;
        let a = self.y0 - self.ye;
        let b = self.x0 - self.xe;
        let g = |s: f64| self.sigma_distance_in_s(eta, s);
        let s_min = (-self.kappa * t_bound).exp();
        let g1 = g(1.0);
        let on_line = g1.abs() < 1e-13;
        // Stationary point of g in s.
        let s_stat = if b != 0.0 && a / (p * b) > 0.0 {
            Some((a / (p * b)).powf(1.0 / (p - 1.0)))
        } else {
            None
        };
        let dg1 = a - p * b;
        // Leaving from the line: first sign after departure.
        let start_sign = if on_line {
            if dg1.abs() < 1e-14 {
                return Err(Error::TangentialContact { t: 0.0 });
            }
            -dg1.signum()
        } else {
            g1.signum()
        };
        let bisect_s = |mut lo: f64, mut hi: f64| {
            let glo = g(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (g(mid) < 0.0) == (glo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        // Upper end of the search: just below s = 1 when leaving the line.
        let hi = if on_line {
            let mut d = 1e-3;
            while d > 1e-15 && g(1.0 - d).signum() != start_sign {
                d *= 0.5;
            }
            1.0 - d
        } else {
            1.0
        };
        let mut candidates = vec![s_min];
        if let Some(st) = s_stat {
            if st > s_min && st < hi {
                candidates.push(st);
            }
        }
        candidates.push(hi);
        candidates.sort_by(|x, y| y.total_cmp(x));
        // Walk from s = hi downwards (forward in time).
        for w in candidates.windows(2) {
            let (upper, lower) = (w[0], w[1]);
            if (g(lower) < 0.0) != (start_sign < 0.0) || g(lower) == 0.0 {
                let root = bisect_s(lower, upper);
                if let Some(st) = s_stat {
                    if (root - st).abs() < 1e-12 && g(st).abs() < 1e-13 {
                        return Err(Error::TangentialContact { t: -st.ln() / self.kappa });
                    }
                }
                return Ok(Some(-root.ln() / self.kappa));
            }
        }
        Ok(None)
    }
}

/// Rate of change of `rho` on the switching line under each zone's field.
fn sigma_rates(params: &ModelParams, x: f64) -> (f64, f64) {
    let y = x + params.eta;
    let rate = |k: f64| (params.mu - k * y) - (1.0 - x - k * x);
    (rate(params.kappa1), rate(params.kappa2))
}

fn side_of(params: &ModelParams, s: State) -> Option<Side> {
    let d = s.rho() - params.eta;
    if d < 0.0 {
        Some(Side::R1)
    } else if d > 0.0 {
        Some(Side::R2)
    } else {
        None
    }
}

/// Output of [`filippov_simulate`].
#[derive(Debug, Clone, Default)]
pub struct FilippovRun {
    pub trajectory: Trajectory,
    /// Set when an attracting sliding segment was followed.
    pub sliding: bool,
}

const SAMPLE_DT: f64 = 0.01;
const RETURN_BOUND: f64 = 1000.0;

/// Event-driven simulation of the `epsilon = 0` system.
pub fn filippov_simulate(params: &ModelParams, initial: State, t_end: f64) -> Result<FilippovRun> {
    params.require_nonsmooth()?;
    let mut run = FilippovRun::default();
    let traj = &mut run.trajectory;
    traj.times.push(0.0);
    traj.states.push(initial);
    let mut t = 0.0;
    let mut state = initial;
    // Set while the state sits on the line, where rounding makes `rho - eta`
    // unreliable.
    let mut on_line = side_of(params, state).is_none();

    while t < t_end {
        let side = if on_line {
            let (r1, r2) = sigma_rates(params, state.x);
            if r1 < 0.0 && r2 < 0.0 {
                Side::R1
            } else if r1 > 0.0 && r2 > 0.0 {
                Side::R2
            } else if r1 > 0.0 && r2 < 0.0 {
                run.sliding = true;
                let (t_new, s_new, exit) = slide(params, state, t, t_end, traj)?;
                t = t_new;
                state = s_new;
                let Some(exit) = exit else { break };
                // Departure is tangential; take a short exact step off the line.
                let flow = ZoneFlow::new(params, exit, state);
                state = flow.at(SLIDE_EXIT_DT);
                t += SLIDE_EXIT_DT;
                traj.times.push(t);
                traj.states.push(state);
                on_line = false;
                continue;
            } else {
                return Err(Error::TangentialContact { t });
            }
        } else {
            side_of(params, state).expect("state off the line")
        };
        let flow = ZoneFlow::new(params, side, state);
        let horizon = t_end - t;
        let crossing = flow.next_crossing(params.eta, horizon.max(0.0))?;
        let dt_seg = match crossing {
            Some(dt) if dt <= horizon => dt,
            _ => horizon,
        };
        let n = ((dt_seg / SAMPLE_DT).ceil() as usize).max(1);
        for i in 1..=n {
            let tau = dt_seg * i as f64 / n as f64;
            traj.times.push(t + tau);
            traj.states.push(flow.at(tau));
        }
        t += dt_seg;
        match crossing {
            Some(dt) if dt <= horizon => {
                let s = State::on_density(flow.at(dt).x, params.eta);
                *traj.states.last_mut().unwrap() = s;
                traj.events.push(Event {
                    t,
                    kind: if side == Side::R1 { EventKind::SigmaUp } else { EventKind::SigmaDown },
                    state: s,
                });
                state = s;
                on_line = true;
            }
            _ => break,
        }
    }
    Ok(run)
}

const SLIDE_EXIT_DT: f64 = 1e-6;

/// Follow the Filippov sliding field on the line until one of the one-sided
/// fields stops pointing towards it. Returns the zone entered on exit.
fn slide(
    params: &ModelParams,
    start: State,
    t0: f64,
    t_end: f64,
    traj: &mut Trajectory,
) -> Result<(f64, State, Option<Side>)> {
    let p = *params;
    let field = move |_t: f64, y: [f64; 2]| {
        let x = y[0];
        let (r1, r2) = sigma_rates(&p, x);
        let alpha = r1 / (r1 - r2);
        let f1 = 1.0 - x - p.kappa1 * x;
        let f2 = 1.0 - x - p.kappa2 * x;
        [(1.0 - alpha) * f1 + alpha * f2, 0.0]
    };
    let mut stepper = Dopri5::new(field, t0, [start.x, 0.0], Tolerances::new(1e-12, 1e-14)?);
    while stepper.t() < t_end {
        let st = stepper.step(t_end)?;
        let exit = step_roots(&st, |_t, y| {
            let (r1, r2) = sigma_rates(&p, y[0]);
            r1.min(-r2)
        }, 1e-12);
        let (t1, x1) = match exit.first() {
            Some(&(te, _)) => (te, st.eval(te)[0]),
            None => (st.t1, st.y1()[0]),
        };
        let s = State::on_density(x1, params.eta);
        traj.times.push(t1);
        traj.states.push(s);
        if !exit.is_empty() {
            let (r1, r2) = sigma_rates(params, x1);
            let side = if r1.abs() <= r2.abs() { Side::R1 } else { Side::R2 };
            return Ok((t1, s, Some(side)));
        }
    }
    let x = stepper.y()[0];
    Ok((t_end, State::on_density(x, params.eta), None))
}

/// A point of the switching line together with the zone the flow enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnMapPoint {
    /// Temperature coordinate; the point is `(s, s + eta)`.
    pub s: f64,
    pub entering: Side,
}

impl ReturnMapPoint {
    pub fn state(&self, params: &ModelParams) -> State {
        State::on_density(self.s, params.eta)
    }
}

/// One passage through the entered zone back to the line, with its
/// transit time.
pub fn return_map_timed(params: &ModelParams, point: ReturnMapPoint) -> Result<(ReturnMapPoint, f64)> {
    params.require_nonsmooth()?;
    let (r1, r2) = sigma_rates(params, point.s);
    let leaves = match point.entering {
        Side::R1 => r1 < 0.0,
        Side::R2 => r2 > 0.0,
    };
    if !leaves {
        return Err(Error::TangentialContact { t: 0.0 });
    }
    let flow = ZoneFlow::new(params, point.entering, point.state(params));
    let dt = flow
        .next_crossing(params.eta, RETURN_BOUND)?
        .ok_or(Error::Escape { bound: RETURN_BOUND })?;
    let s = flow.at(dt);
    Ok((
        ReturnMapPoint {
            s: s.x,
            entering: point.entering.other(),
        },
        dt,
    ))
}

/// Σ-to-Σ map through one zone.
pub fn return_map(params: &ModelParams, point: ReturnMapPoint) -> Result<ReturnMapPoint> {
    return_map_timed(params, point).map(|r| r.0)
}

/// The periodic orbit of the piecewise-smooth system, as a fixed point of
/// the second return map starting into R1.
#[derive(Debug, Clone, PartialEq)]
pub struct FilippovOrbit {
    /// Crossing into R1 (downwards through the line).
    pub s_down: f64,
    /// Crossing into R2.
    pub s_up: f64,
    /// Transit time through R1 (deep-decoupling phase).
    pub t_r1: f64,
    /// Transit time through R2 (deep-coupling phase).
    pub t_r2: f64,
    /// Derivative of the second return map at the fixed point.
    pub multiplier: f64,
    pub residual: f64,
}

impl FilippovOrbit {
    pub fn period(&self) -> f64 {
        self.t_r1 + self.t_r2
    }

    pub fn is_stable(&self) -> bool {
        self.multiplier.abs() < 1.0
    }

    /// Sampled orbit over one period, starting at the downward crossing.
    pub fn sample(&self, params: &ModelParams, n_per_zone: usize) -> (Vec<f64>, Vec<State>) {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let f1 = ZoneFlow::new(params, Side::R1, State::on_density(self.s_down, params.eta));
        for i in 0..n_per_zone {
            let t = self.t_r1 * i as f64 / n_per_zone as f64;
            times.push(t);
            states.push(f1.at(t));
        }
        let f2 = ZoneFlow::new(params, Side::R2, State::on_density(self.s_up, params.eta));
        for i in 0..=n_per_zone {
            let t = self.t_r2 * i as f64 / n_per_zone as f64;
            times.push(self.t_r1 + t);
            states.push(f2.at(t));
        }
        (times, states)
    }
}

fn second_return(params: &ModelParams, s: f64) -> Result<(f64, f64, f64, f64)> {
    let (mid, t1) = return_map_timed(params, ReturnMapPoint { s, entering: Side::R1 })?;
    let (end, t2) = return_map_timed(params, mid)?;
    Ok((end.s, mid.s, t1, t2))
}

/// Locate the fixed point of the second return map by bisection over the
/// admissible downward-crossing segment.
pub fn filippov_orbit(params: &ModelParams) -> Result<FilippovOrbit> {
    params.require_nonsmooth()?;
    // Downward crossings need both one-sided rates negative.
    let x_hi = 1.0 - params.mu + (params.kappa1 * params.eta).min(params.kappa2 * params.eta);
    let x_lo = x_hi - 2.0;
    let n = 400;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for i in 0..n {
        let s = x_hi - 1e-9 - (x_hi - x_lo) * i as f64 / n as f64;
        let Ok((p2, ..)) = second_return(params, s) else {
            prev = None;
            continue;
        };
        let d = p2 - s;
        if let Some((sp, dp)) = prev {
            if (d < 0.0) != (dp < 0.0) {
                bracket = Some((s, sp, d));
                break;
            }
        }
        prev = Some((s, d));
    }
    let (mut lo, mut hi, mut dlo) = bracket.ok_or(Error::Escape { bound: RETURN_BOUND })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = second_return(params, mid)?.0 - mid;
        if (d < 0.0) == (dlo < 0.0) {
            lo = mid;
            dlo = d;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let (p2, s_up, t_r1, t_r2) = second_return(params, s)?;
    let h = 1e-6;
    let dp = (second_return(params, s + h)?.0 - second_return(params, s - h)?.0) / (2.0 * h);
    Ok(FilippovOrbit {
        s_down: s,
        s_up,
        t_r1,
        t_r2,
        multiplier: dp,
        residual: (p2 - s).abs(),
    })
}

/// Attractor of the `epsilon = 0` system: settle by simulation, then
/// iterate the second return map until it stops moving.
pub(crate) fn filippov_attractor(params: &ModelParams, initial: State, opts: &AttractorOptions) -> Result<Attractor> {
    let run = filippov_simulate(params, initial, opts.settle_time)?;
    let last = run.trajectory.last().unwrap_or(initial);
    let f = rhs(params, last);
    if f[0].hypot(f[1]) < EQUILIBRIUM_SPEED && side_of(params, last).is_some() {
        return Ok(Attractor::Equilibrium(last));
    }
    let down = run
        .trajectory
        .events
        .iter()
        .rev()
        .find(|e| e.kind == EventKind::SigmaDown)
        .ok_or(Error::NoConvergence { t: opts.settle_time })?;
    let mut s = down.state.x;
    let mut t = opts.settle_time;
    let mut last_period = f64::NAN;
    loop {
        let (next, s_up, t1, t2) = second_return(params, s)?;
        let period = t1 + t2;
        t += period;
        let spread = (period - last_period).abs() / period;
        if (next - s).abs() < 1e-12 && spread < PERIOD_SPREAD {
            return Ok(Attractor::Periodic(filippov_sample(params, s_up, next, t1, t2, opts.loop_samples)));
        }
        if t > opts.max_time {
            return Err(Error::NoConvergence { t });
        }
        s = next;
        last_period = period;
    }
}

/// One period starting at the upward crossing `s_up`, followed by R2 then
/// R1 (entered at `s_down`).
fn filippov_sample(params: &ModelParams, s_up: f64, s_down: f64, t_r1: f64, t_r2: f64, samples: usize) -> PeriodicSample {
    let f2 = ZoneFlow::new(params, Side::R2, State::on_density(s_up, params.eta));
    let f1 = ZoneFlow::new(params, Side::R1, State::on_density(s_down, params.eta));
    let period = t_r1 + t_r2;
    let n = samples.max(16);
    let eval = |t: f64| if t <= t_r2 { f2.at(t) } else { f1.at(t - t_r2) };
    let times: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    let states: Vec<State> = times.iter().map(|&t| eval(t)).collect();
    let mut rho_min = params.eta;
    let mut rho_max = params.eta;
    if let Some(t) = f2.rho_turn().filter(|t| *t < t_r2) {
        rho_max = rho_max.max(f2.at(t).rho());
    }
    if let Some(t) = f1.rho_turn().filter(|t| *t < t_r1) {
        rho_min = rho_min.min(f1.at(t).rho());
    }
    PeriodicSample {
        period,
        rho_min,
        rho_max,
        times,
        states,
        durations: ZoneDurations {
            r1: t_r1,
            s: 0.0,
            r2: t_r2,
        },
        section: params.eta,
    }
}
