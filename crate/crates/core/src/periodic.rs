//! Periodic orbits as collocation boundary-value problems, anchored phase
//! conditions on the zone boundaries, and tangencies with them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::continuation::{
    continue_branch, continue_equilibria, locate, tangent, ContinuationProblem, ContinuationSettings, Control, CurveKind,
    CurvePoint, ParamCurve, StopReason, Window,
};
use crate::dynamics::{default_initial, find_attractor, Attractor, AttractorOptions, PeriodicSample, ZoneDurations};
use crate::error::{Error, Result};
use crate::linalg::BorderedBanded;
use crate::model::{jacobian_unchecked, rhs, second_derivatives, ModelParams, State};
use crate::zone::{classify_rho, switching_zone_with, zone_scale, ZoneConvention, ZoneTag};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 0 { 1.0 } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Lagrange basis on `m + 1` equispaced nodes of `[0, 1]`.
fn lagrange(m: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let mut l = vec![0.0; m + 1];
    let mut dl = vec![0.0; m + 1];
    for i in 0..=m {
        let mut prod = 1.0;
        let mut denom = 1.0;
        for j in 0..=m {
            if j != i {
                prod *= s - nodes[j];
                denom *= nodes[i] - nodes[j];
            }
        }
        l[i] = prod / denom;
        let mut d = 0.0;
        for k in 0..=m {
            if k == i {
                continue;
            }
            let mut p = 1.0;
            for j in 0..=m {
                if j != i && j != k {
                    p *= s - nodes[j];
                }
            }
            d += p;
        }
        dl[i] = d / denom;
    }
    (l, dl)
}

/// Basis values at the collocation points of one interval.
#[derive(Debug, Clone)]
struct Scheme {
    m: usize,
    weights: Vec<f64>,
    l: Vec<Vec<f64>>,
    dl: Vec<Vec<f64>>,
}

impl Scheme {
    fn new(m: usize) -> Self {
        let (nodes, weights) = gauss_legendre(m);
        let (l, dl) = nodes.iter().map(|&c| lagrange(m, c)).unzip();
        Self { m, weights, l, dl }
    }
}

/// Which zone boundary an anchored orbit starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Anchor {
    /// `L-`, i.e. `rho = rho_minus`.
    Minus,
    /// `L+`, i.e. `rho = rho_plus`.
    Plus,
}

impl Anchor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Anchor::Minus => "L-",
            Anchor::Plus => "L+",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            Anchor::Minus => -1.0,
            Anchor::Plus => 1.0,
        }
    }
}

/// A periodic orbit represented by piecewise polynomials over normalised
/// time `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub params: ModelParams,
    pub convention: ZoneConvention,
    /// Break points `0 = t_0 < ... < t_N = 1`.
    pub mesh: Vec<f64>,
    pub degree: usize,
    /// Values at the `N * degree + 1` equispaced nodes.
    pub points: Vec<State>,
    pub period: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub durations: ZoneDurations,
}

impl PeriodicOrbit {
    pub fn intervals(&self) -> usize {
        self.mesh.len() - 1
    }

    fn locate_interval(&self, tau: f64) -> (usize, f64) {
        let n = self.intervals();
        let tau = tau.rem_euclid(1.0);
        let j = match self.mesh.binary_search_by(|t| t.total_cmp(&tau)) {
            Ok(j) => j.min(n - 1),
            Err(j) => j.saturating_sub(1).min(n - 1),
        };
        let h = self.mesh[j + 1] - self.mesh[j];
        (j, ((tau - self.mesh[j]) / h).clamp(0.0, 1.0))
    }

    /// State at normalised time `tau` (taken modulo 1).
    pub fn eval(&self, tau: f64) -> State {
        let (j, s) = self.locate_interval(tau);
        let (l, _) = lagrange(self.degree, s);
        let base = j * self.degree;
        let mut x = 0.0;
        let mut y = 0.0;
        for (i, li) in l.iter().enumerate() {
            let p = self.points[base + i];
            x += li * p.x;
            y += li * p.y;
        }
        State::new(x, y)
    }

    /// Derivative with respect to normalised time.
    pub fn eval_derivative(&self, tau: f64) -> [f64; 2] {
        let (j, s) = self.locate_interval(tau);
        let (_, dl) = lagrange(self.degree, s);
        let h = self.mesh[j + 1] - self.mesh[j];
        let base = j * self.degree;
        let mut d = [0.0; 2];
        for (i, di) in dl.iter().enumerate() {
            let p = self.points[base + i];
            d[0] += di * p.x / h;
            d[1] += di * p.y / h;
        }
        d
    }

    /// `k` equispaced samples per interval, plus the closing point.
    pub fn sample(&self, k: usize) -> Vec<(f64, State)> {
        let mut out = Vec::with_capacity(self.intervals() * k + 1);
        for j in 0..self.intervals() {
            let h = self.mesh[j + 1] - self.mesh[j];
            for i in 0..k {
                let tau = self.mesh[j] + h * i as f64 / k as f64;
                out.push((tau, self.eval(tau)));
            }
        }
        out.push((1.0, self.points[0]));
        out
    }

    /// `|u(0) - u(1)|` in the max norm.
    pub fn closure_error(&self) -> f64 {
        let a = self.points[0];
        let b = *self.points.last().unwrap();
        (a.x - b.x).abs().max((a.y - b.y).abs())
    }

    /// Max norm of `u'(c) - T f(u(c))` over all collocation points.
    pub fn collocation_residual(&self) -> f64 {
        let scheme = Scheme::new(self.degree);
        let m = self.degree;
        let mut worst = 0.0f64;
        for j in 0..self.intervals() {
            let h = self.mesh[j + 1] - self.mesh[j];
            for k in 0..m {
                let mut u = [0.0; 2];
                let mut du = [0.0; 2];
                for i in 0..=m {
                    let p = self.points[j * m + i];
                    u[0] += scheme.l[k][i] * p.x;
                    u[1] += scheme.l[k][i] * p.y;
                    du[0] += scheme.dl[k][i] * p.x / h;
                    du[1] += scheme.dl[k][i] * p.y / h;
                }
                let f = rhs(&self.params, State::new(u[0], u[1]));
                worst = worst.max((du[0] - self.period * f[0]).abs()).max((du[1] - self.period * f[1]).abs());
            }
        }
        worst
    }

    /// Extremum of `rho` near the sample maximum (`max = true`) or minimum,
    /// with its normalised time.
    pub fn rho_extremum(&self, max: bool) -> (f64, f64) {
        let sgn = if max { 1.0 } else { -1.0 };
        let samples = self.sample(16);
        let (mut best_tau, mut best) = (0.0, f64::NEG_INFINITY);
        for (tau, s) in &samples {
            let v = sgn * s.rho();
            if v > best {
                best = v;
                best_tau = *tau;
            }
        }
        // Golden-section refinement on a bracket of two sample spacings.
        let (j, _) = self.locate_interval(best_tau);
        let d = (self.mesh[j + 1] - self.mesh[j]) / 8.0;
        let f = |t: f64| sgn * self.eval(t).rho();
        let (mut a, mut b) = (best_tau - d, best_tau + d);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut e = a + g * (b - a);
        let (mut fc, mut fe) = (f(c), f(e));
        for _ in 0..200 {
            if (b - a).abs() < 1e-15 {
                break;
            }
            if fc > fe {
                b = e;
                e = c;
                fe = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + g * (b - a);
                fe = f(e);
            }
        }
        let t = 0.5 * (a + b);
        let v = f(t).max(best);
        ((t).rem_euclid(1.0), sgn * v)
    }

    /// Normalised times at which `rho` crosses `level`, with the sign of the
    /// crossing direction.
    pub fn crossings(&self, level: f64) -> Vec<(f64, bool)> {
        let samples = self.sample(16);
        let mut out = Vec::new();
        for w in samples.windows(2) {
            let (t0, s0) = w[0];
            let (t1, s1) = w[1];
            let (g0, g1) = (s0.rho() - level, s1.rho() - level);
            if (g0 < 0.0) != (g1 < 0.0) {
                let (mut a, mut b) = (t0, t1);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if (self.eval(mid).rho() - level < 0.0) == (g0 < 0.0) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                out.push((0.5 * (a + b), g1 > g0));
            }
        }
        out
    }

    fn refresh_derived(&mut self) -> Result<()> {
        self.rho_max = self.rho_extremum(true).1;
        self.rho_min = self.rho_extremum(false).1;
        let zone = switching_zone_with(&self.params, self.convention)?;
        let mut cuts: Vec<f64> = self
            .crossings(zone.rho_minus)
            .into_iter()
            .chain(self.crossings(zone.rho_plus))
            .map(|c| c.0)
            .collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        let mut d = ZoneDurations::default();
        for w in cuts.windows(2) {
            let len = (w[1] - w[0]) * self.period;
            if len <= 0.0 {
                continue;
            }
            match classify_rho(&zone, self.eval(0.5 * (w[0] + w[1])).rho()) {
                ZoneTag::R1 => d.r1 += len,
                ZoneTag::R2 => d.r2 += len,
                _ => d.s += len,
            }
        }
        self.durations = d;
        Ok(())
    }

    fn from_parts(params: ModelParams, convention: ZoneConvention, mesh: Vec<f64>, degree: usize, points: Vec<State>, period: f64) -> Result<Self> {
        let mut orbit = Self {
            params,
            convention,
            mesh,
            degree,
            points,
            period,
            rho_min: 0.0,
            rho_max: 0.0,
            durations: ZoneDurations::default(),
        };
        orbit.refresh_derived()?;
        Ok(orbit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvpOptions {
    pub intervals: usize,
    pub degree: usize,
    /// Newton residual tolerance.
    pub tol: f64,
    /// Target of the local error indicator.
    pub mesh_tol: f64,
    pub max_intervals: usize,
    pub max_newton: usize,
    pub convention: ZoneConvention,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            intervals: 200,
            degree: 4,
            tol: 1e-10,
            mesh_tol: 1e-8,
            max_intervals: 4000,
            max_newton: 40,
            convention: ZoneConvention::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Free {
    Mu,
    Eta,
}

#[derive(Debug, Clone)]
enum Phase {
    /// Integral condition against reference values and derivatives at the
    /// collocation points.
    Integral { v: Vec<[f64; 2]>, dv: Vec<[f64; 2]> },
    /// `rho(u(0)) = eta + offset`.
    Anchor { offset: f64 },
}

/// Discretised boundary-value problem on a fixed mesh.
struct Bvp {
    base: ModelParams,
    mesh: Vec<f64>,
    scheme: Scheme,
    phase: Phase,
    free: Vec<Free>,
    tangency: bool,
}

struct Unpacked<'a> {
    interior: &'a [f64],
    u0: [f64; 2],
    period: f64,
    params: ModelParams,
}

impl Bvp {
    fn n_int(&self) -> usize {
        self.mesh.len() - 1
    }

    fn n_band(&self) -> usize {
        2 * self.n_int() * self.scheme.m
    }

    fn n_border(&self) -> usize {
        3 + self.free.len()
    }

    fn unknowns(&self) -> usize {
        self.n_band() + self.n_border()
    }

    fn unpack<'a>(&self, u: &'a DVector<f64>) -> Unpacked<'a> {
        let nb = self.n_band();
        let mut params = self.base;
        for (i, f) in self.free.iter().enumerate() {
            match f {
                Free::Mu => params.mu = u[nb + 3 + i],
                Free::Eta => params.eta = u[nb + 3 + i],
            }
        }
        Unpacked {
            interior: &u.as_slice()[..nb],
            u0: [u[nb], u[nb + 1]],
            period: u[nb + 2],
            params,
        }
    }

    fn point(&self, up: &Unpacked, p: usize) -> [f64; 2] {
        if p == 0 {
            up.u0
        } else {
            [up.interior[2 * (p - 1)], up.interior[2 * (p - 1) + 1]]
        }
    }

    fn free_index(&self, which: Free) -> Option<usize> {
        self.free.iter().position(|f| *f == which).map(|i| 3 + i)
    }

    /// Residual of the collocation, periodicity, phase and tangency rows.
    fn eval_residual(&self, u: &DVector<f64>) -> Vec<f64> {
        let up = self.unpack(u);
        let m = self.scheme.m;
        let n = self.n_int();
        let mut r = Vec::with_capacity(self.n_band() + 4);
        for j in 0..n {
            let h = self.mesh[j + 1] - self.mesh[j];
            for k in 0..m {
                let mut uc = [0.0; 2];
                let mut du = [0.0; 2];
                for i in 0..=m {
                    let p = self.point(&up, j * m + i);
                    for c in 0..2 {
                        uc[c] += self.scheme.l[k][i] * p[c];
                        du[c] += self.scheme.dl[k][i] * p[c] / h;
                    }
                }
                let f = rhs(&up.params, State::new(uc[0], uc[1]));
                r.push(du[0] - up.period * f[0]);
                r.push(du[1] - up.period * f[1]);
            }
        }
        let last = self.point(&up, n * m);
        r.push(last[0] - up.u0[0]);
        r.push(last[1] - up.u0[1]);
        match &self.phase {
            Phase::Integral { v, dv } => {
                let mut s = 0.0;
                for j in 0..n {
                    let h = self.mesh[j + 1] - self.mesh[j];
                    for k in 0..m {
                        let idx = j * m + k;
                        let mut uc = [0.0; 2];
                        for i in 0..=m {
                            let p = self.point(&up, j * m + i);
                            uc[0] += self.scheme.l[k][i] * p[0];
                            uc[1] += self.scheme.l[k][i] * p[1];
                        }
                        s += h * self.scheme.weights[k]
                            * ((uc[0] - v[idx][0]) * dv[idx][0] + (uc[1] - v[idx][1]) * dv[idx][1]);
                    }
                }
                r.push(s);
            }
            Phase::Anchor { offset } => r.push(up.u0[1] - up.u0[0] - up.params.eta - offset),
        }
        if self.tangency {
            let f = rhs(&up.params, State::new(up.u0[0], up.u0[1]));
            r.push(f[1] - f[0]);
        }
        r
    }

    /// Jacobian in bordered-banded form; `extra` is an optional additional
    /// dense row.
    fn assemble(&self, u: &DVector<f64>, extra: Option<&DVector<f64>>) -> Result<BorderedBanded> {
        let up = self.unpack(u);
        let m = self.scheme.m;
        let n = self.n_int();
        let nb = self.n_band();
        let k_border = self.n_border();
        let mut sys = BorderedBanded::new(nb, k_border, 2 * m + 1, 2 * m - 1);
        let mu_col = self.free_index(Free::Mu);
        let eta_col = self.free_index(Free::Eta);
        for j in 0..n {
            let h = self.mesh[j + 1] - self.mesh[j];
            for k in 0..m {
                let mut uc = [0.0; 2];
                for i in 0..=m {
                    let p = self.point(&up, j * m + i);
                    uc[0] += self.scheme.l[k][i] * p[0];
                    uc[1] += self.scheme.l[k][i] * p[1];
                }
                let st = State::new(uc[0], uc[1]);
                let f = rhs(&up.params, st);
                let jm = jacobian_unchecked(&up.params, st);
                for c in 0..2 {
                    let row = 2 * (j * m + k) + c;
                    for i in 0..=m {
                        let p = j * m + i;
                        for d in 0..2 {
                            let mut v = -up.period * jm[c][d] * self.scheme.l[k][i];
                            if c == d {
                                v += self.scheme.dl[k][i] / h;
                            }
                            if p == 0 {
                                sys.b[(row, d)] += v;
                            } else {
                                sys.a.add(row, 2 * (p - 1) + d, v);
                            }
                        }
                    }
                    sys.b[(row, 2)] = -f[c];
                    if let Some(col) = mu_col {
                        sys.b[(row, col)] = if c == 1 { -up.period } else { 0.0 };
                    }
                    if let Some(col) = eta_col {
                        let sd = second_derivatives(&up.params, st);
                        sys.b[(row, col)] = -up.period * sd.df_deta[c];
                    }
                }
            }
        }
        // Periodicity.
        for c in 0..2 {
            sys.c[(c, 2 * (n * m - 1) + c)] = 1.0;
            sys.d[(c, c)] = -1.0;
        }
        // Phase.
        match &self.phase {
            Phase::Integral { dv, .. } => {
                for j in 0..n {
                    let h = self.mesh[j + 1] - self.mesh[j];
                    for k in 0..m {
                        let idx = j * m + k;
                        for i in 0..=m {
                            let p = j * m + i;
                            for d in 0..2 {
                                let v = h * self.scheme.weights[k] * self.scheme.l[k][i] * dv[idx][d];
                                if p == 0 {
                                    sys.d[(2, d)] += v;
                                } else {
                                    sys.c[(2, 2 * (p - 1) + d)] += v;
                                }
                            }
                        }
                    }
                }
            }
            Phase::Anchor { .. } => {
                sys.d[(2, 0)] = -1.0;
                sys.d[(2, 1)] = 1.0;
                if let Some(col) = eta_col {
                    sys.d[(2, col)] = -1.0;
                }
            }
        }
        let mut row = 3;
        if self.tangency {
            let st = State::new(up.u0[0], up.u0[1]);
            let jm = jacobian_unchecked(&up.params, st);
            sys.d[(row, 0)] = jm[1][0] - jm[0][0];
            sys.d[(row, 1)] = jm[1][1] - jm[0][1];
            if let Some(col) = mu_col {
                sys.d[(row, col)] = 1.0;
            }
            if let Some(col) = eta_col {
                let sd = second_derivatives(&up.params, st);
                sys.d[(row, col)] = sd.df_deta[1] - sd.df_deta[0];
            }
            row += 1;
        }
        if let Some(w) = extra {
            for c in 0..nb {
                sys.c[(row, c)] = w[c];
            }
            for c in 0..k_border {
                sys.d[(row, c)] = w[nb + c];
            }
            row += 1;
        }
        if row != k_border {
            return Err(Error::Other(format!("border has {row} rows, expected {k_border}")));
        }
        Ok(sys)
    }

    /// Newton on the square system (no free continuation direction).
    fn newton(&self, mut u: DVector<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        let nb = self.n_band();
        let mut last = f64::INFINITY;
        for it in 0..=max_iter {
            let r = self.eval_residual(&u);
            let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !norm.is_finite() {
                return Err(Error::NewtonDivergence("non-finite BVP residual".into()));
            }
            if norm < tol {
                return Ok(u);
            }
            if it == max_iter || (it > 4 && norm > 10.0 * last) {
                return Err(Error::NewtonDivergence(format!("BVP residual {norm:e} after {it} iterations")));
            }
            last = norm;
            let lu = self.assemble(&u, None)?.factor()?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let (d1, d2) = lu.solve(&neg[..nb], &neg[nb..])?;
            // Damp large steps in the period.
            let mut lambda = 1.0;
            let period = u[nb + 2];
            if (d2[2] * lambda).abs() > 0.5 * period {
                lambda = 0.5 * period / d2[2].abs();
            }
            for i in 0..nb {
                u[i] += lambda * d1[i];
            }
            for i in 0..d2.len() {
                u[nb + i] += lambda * d2[i];
            }
        }
        unreachable!()
    }

    fn pack(&self, orbit_points: &[State], period: f64, params: &ModelParams) -> DVector<f64> {
        let mut u = Vec::with_capacity(self.unknowns());
        for p in &orbit_points[1..] {
            u.push(p.x);
            u.push(p.y);
        }
        u.push(orbit_points[0].x);
        u.push(orbit_points[0].y);
        u.push(period);
        for f in &self.free {
            u.push(match f {
                Free::Mu => params.mu,
                Free::Eta => params.eta,
            });
        }
        DVector::from_vec(u)
    }

    fn to_orbit(&self, u: &DVector<f64>, convention: ZoneConvention) -> Result<PeriodicOrbit> {
        let up = self.unpack(u);
        let n = self.n_int() * self.scheme.m;
        let points: Vec<State> = (0..=n).map(|p| {
            let v = self.point(&up, p);
            State::new(v[0], v[1])
        })
        .collect();
        PeriodicOrbit::from_parts(up.params, convention, self.mesh.clone(), self.scheme.m, points, up.period)
    }
}

impl ContinuationProblem for Bvp {
    fn dim(&self) -> usize {
        self.unknowns()
    }

    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.eval_residual(u)))
    }

    fn solve_bordered(&self, u: &DVector<f64>, w: &DVector<f64>, r: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        let nb = self.n_band();
        let lu = self.assemble(u, Some(w))?.factor()?;
        let mut r2: Vec<f64> = r.as_slice()[nb..].to_vec();
        r2.push(s);
        let (d1, d2) = lu.solve(&r.as_slice()[..nb], &r2)?;
        let mut out = d1;
        out.extend(d2);
        Ok(DVector::from_vec(out))
    }

    fn weights(&self) -> DVector<f64> {
        let nb = self.n_band();
        let npts = (nb / 2 + 1) as f64;
        let mut w = vec![1.0 / npts; nb + 2];
        w.push(1e-4);
        w.extend(std::iter::repeat(1.0).take(self.free.len()));
        DVector::from_vec(w)
    }
}

/// Reference data of the integral phase condition: values and
/// `T f(v)` at the collocation points of `mesh`.
fn integral_reference(orbit: &PeriodicOrbit, mesh: &[f64], scheme: &Scheme) -> Phase {
    let (nodes, _) = gauss_legendre(scheme.m);
    let mut v = Vec::new();
    let mut dv = Vec::new();
    for j in 0..mesh.len() - 1 {
        let h = mesh[j + 1] - mesh[j];
        for c in &nodes {
            let s = orbit.eval(mesh[j] + c * h);
            let f = rhs(&orbit.params, s);
            v.push([s.x, s.y]);
            dv.push([orbit.period * f[0], orbit.period * f[1]]);
        }
    }
    Phase::Integral { v, dv }
}

fn node_values(orbit: &PeriodicOrbit, mesh: &[f64], m: usize) -> Vec<State> {
    let mut pts = Vec::with_capacity((mesh.len() - 1) * m + 1);
    for j in 0..mesh.len() - 1 {
        let h = mesh[j + 1] - mesh[j];
        for i in 0..m {
            pts.push(orbit.eval(mesh[j] + h * i as f64 / m as f64));
        }
    }
    pts.push(orbit.eval(0.0));
    pts
}

/// `m`-th derivative per interval, constant for a degree-`m` piece.
fn top_derivatives(orbit: &PeriodicOrbit) -> Vec<[f64; 2]> {
    let m = orbit.degree;
    let binom = |n: usize, k: usize| (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64);
    (0..orbit.intervals())
        .map(|j| {
            let h = orbit.mesh[j + 1] - orbit.mesh[j];
            let delta = h / m as f64;
            let mut d = [0.0; 2];
            for i in 0..=m {
                let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
                let c = sign * binom(m, i);
                let p = orbit.points[j * m + i];
                d[0] += c * p.x;
                d[1] += c * p.y;
            }
            [d[0] / delta.powi(m as i32), d[1] / delta.powi(m as i32)]
        })
        .collect()
}

/// Per-interval error indicators `h^(m+1) |u^(m+1)|` and the monitor
/// density `|u^(m+1)|^(1/(m+1))`.
fn error_indicators(orbit: &PeriodicOrbit) -> (Vec<f64>, Vec<f64>) {
    let n = orbit.intervals();
    let m = orbit.degree;
    let d = top_derivatives(orbit);
    let h: Vec<f64> = (0..n).map(|j| orbit.mesh[j + 1] - orbit.mesh[j]).collect();
    let mut err = Vec::with_capacity(n);
    let mut dens = Vec::with_capacity(n);
    for j in 0..n {
        let (jp, jn) = ((j + n - 1) % n, (j + 1) % n);
        let diff = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
        let left = diff(&d[j], &d[jp]) / (0.5 * (h[j] + h[jp]));
        let right = diff(&d[jn], &d[j]) / (0.5 * (h[j] + h[jn]));
        let dd = left.max(right);
        err.push(h[j].powi(m as i32 + 1) * dd);
        dens.push(dd.powf(1.0 / (m as f64 + 1.0)));
    }
    (err, dens)
}

/// Equidistribute a piecewise-constant density over `n` intervals.
fn equidistribute(mesh: &[f64], density: &[f64], n: usize) -> Vec<f64> {
    let total_plain: f64 = density.iter().zip(mesh.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
    // Floor keeps some resolution where the indicator vanishes.
    let floor = 0.05 * total_plain.max(f64::MIN_POSITIVE);
    let dens: Vec<f64> = density.iter().map(|d| d + floor).collect();
    let mut cum = vec![0.0];
    for (j, w) in mesh.windows(2).enumerate() {
        cum.push(cum[j] + dens[j] * (w[1] - w[0]));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut j = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while cum[j + 1] < target {
            j += 1;
        }
        let frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
        out.push(mesh[j] + frac * (mesh[j + 1] - mesh[j]));
    }
    out.push(1.0);
    out
}

/// Arclength-equidistributed mesh for a sampled closed loop.
fn mesh_from_samples(taus: &[f64], states: &[State], n: usize) -> Vec<f64> {
    let scale = {
        let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.rho()), b.max(s.rho())));
        (hi - lo).max(1e-3)
    };
    let mut cum = vec![0.0];
    for i in 1..taus.len() {
        let dt = taus[i] - taus[i - 1];
        let du = states[i].dist(&states[i - 1]) / scale;
        cum.push(cum[i - 1] + (dt * dt + du * du).sqrt());
    }
    let total = *cum.last().unwrap();
    let mut out = vec![0.0];
    let mut k = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while cum[k + 1] < target {
            k += 1;
        }
        let frac = (target - cum[k]) / (cum[k + 1] - cum[k]);
        out.push(taus[k] + frac * (taus[k + 1] - taus[k]));
    }
    out.push(1.0);
    out
}

fn interp_samples(taus: &[f64], states: &[State], tau: f64) -> State {
    let i = match taus.binary_search_by(|t| t.total_cmp(&tau)) {
        Ok(i) => return states[i],
        Err(i) => i.clamp(1, taus.len() - 1),
    };
    let f = (tau - taus[i - 1]) / (taus[i] - taus[i - 1]);
    let (a, b) = (states[i - 1], states[i]);
    State::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
}

/// Newton solve on `mesh` followed by error-driven remeshing.
fn solve_adaptive(
    params: &ModelParams,
    start: &PeriodicOrbit,
    anchor: Option<f64>,
    opts: &BvpOptions,
) -> Result<PeriodicOrbit> {
    let m = opts.degree;
    let scheme = Scheme::new(m);
    let mut current = start.clone();
    let mut mesh = start.mesh.clone();
    for _round in 0..6 {
        let phase = match anchor {
            Some(offset) => Phase::Anchor { offset },
            None => integral_reference(&current, &mesh, &scheme),
        };
        let bvp = Bvp {
            base: *params,
            mesh: mesh.clone(),
            scheme: scheme.clone(),
            phase,
            free: Vec::new(),
            tangency: false,
        };
        let pts = node_values(&current, &mesh, m);
        let u = bvp.pack(&pts, current.period, params);
        let u = bvp.newton(u, opts.tol, opts.max_newton)?;
        let orbit = bvp.to_orbit(&u, opts.convention)?;
        let (err, dens) = error_indicators(&orbit);
        let emax = err.iter().fold(0.0f64, |a, &b| a.max(b));
        let n = orbit.intervals();
        let spread = {
            let w: Vec<f64> = dens.iter().zip(orbit.mesh.windows(2)).map(|(d, w)| d * (w[1] - w[0])).collect();
            let mean = w.iter().sum::<f64>() / n as f64;
            w.iter().fold(0.0f64, |a, &b| a.max(b)) / mean.max(f64::MIN_POSITIVE)
        };
        current = orbit;
        if emax <= opts.mesh_tol && spread < 4.0 {
            return Ok(current);
        }
        let integral: f64 = dens.iter().zip(current.mesh.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        let needed = (1.2 * integral / opts.mesh_tol.powf(1.0 / (m as f64 + 1.0))).ceil() as usize;
        let n_new = needed.max(opts.intervals).max(if emax > opts.mesh_tol { n } else { 0 });
        if n_new > opts.max_intervals {
            return Err(Error::MeshLimit {
                limit: opts.max_intervals,
                mu: params.mu,
                eta: params.eta,
            });
        }
        mesh = equidistribute(&current.mesh, &dens, n_new);
    }
    Ok(current)
}

/// Solve the periodic BVP with an integral phase condition, starting from a
/// loop sampled by [`find_attractor`].
pub fn solve_periodic_bvp(params: &ModelParams, guess: &PeriodicSample, opts: &BvpOptions) -> Result<PeriodicOrbit> {
    params.require_smooth()?;
    if guess.states.len() < 4 || guess.period <= 0.0 {
        return Err(Error::Other("guess loop has too few samples".into()));
    }
    let m = opts.degree;
    let taus: Vec<f64> = guess.times.iter().map(|t| (t - guess.times[0]) / guess.period).collect();
    let mesh = mesh_from_samples(&taus, &guess.states, opts.intervals);
    let mut pts = Vec::with_capacity(opts.intervals * m + 1);
    for j in 0..opts.intervals {
        let h = mesh[j + 1] - mesh[j];
        for i in 0..m {
            pts.push(interp_samples(&taus, &guess.states, mesh[j] + h * i as f64 / m as f64));
        }
    }
    pts.push(pts[0]);
    let start = PeriodicOrbit::from_parts(*params, opts.convention, mesh, m, pts, guess.period)?;
    solve_adaptive(params, &start, None, opts)
}

/// Simulate to the attractor from the default initial state and solve the
/// BVP from the resulting loop.
pub fn periodic_orbit(params: &ModelParams, attractor: &AttractorOptions, opts: &BvpOptions) -> Result<PeriodicOrbit> {
    match find_attractor(params, default_initial(params), attractor)? {
        Attractor::Periodic(sample) => solve_periodic_bvp(params, &sample, opts),
        Attractor::Equilibrium(_) => Err(Error::Other(format!(
            "no periodic attractor at mu = {}, eta = {}",
            params.mu, params.eta
        ))),
    }
}

/// A periodic orbit whose normalised time 0 lies on a zone boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredOrbit {
    pub orbit: PeriodicOrbit,
    pub anchor: Anchor,
    /// `rho(u(0)) - eta`.
    pub offset: f64,
}

fn anchor_offset(params: &ModelParams, convention: ZoneConvention, anchor: Anchor) -> Result<f64> {
    Ok(anchor.sign() * zone_scale(params, convention)? * params.epsilon)
}

/// Rotate the orbit so that `u(0)` lies on the chosen boundary with `rho`
/// increasing, and re-converge under the anchored phase condition.
pub fn anchor_phase(orbit: &PeriodicOrbit, which: Anchor, opts: &BvpOptions) -> Result<AnchoredOrbit> {
    let params = orbit.params;
    let offset = anchor_offset(&params, orbit.convention, which)?;
    let level = params.eta + offset;
    let tau0 = orbit
        .crossings(level)
        .into_iter()
        .find(|c| c.1)
        .map(|c| c.0)
        .ok_or(Error::NoCrossing {
            target: level,
            rho_min: orbit.rho_min,
            rho_max: orbit.rho_max,
        })?;
    // Shift break points cyclically and split at tau0.
    let mut mesh: Vec<f64> = orbit.mesh[..orbit.mesh.len() - 1]
        .iter()
        .map(|t| (t - tau0).rem_euclid(1.0))
        .filter(|t| *t > 1e-9 && *t < 1.0 - 1e-9)
        .collect();
    mesh.push(0.0);
    mesh.push(1.0);
    mesh.sort_by(f64::total_cmp);
    let shifted = PeriodicOrbit {
        mesh: mesh.clone(),
        points: {
            let m = orbit.degree;
            let mut pts = Vec::new();
            for j in 0..mesh.len() - 1 {
                let h = mesh[j + 1] - mesh[j];
                for i in 0..m {
                    pts.push(orbit.eval(mesh[j] + h * i as f64 / m as f64 + tau0));
                }
            }
            pts.push(pts[0]);
            pts
        },
        ..orbit.clone()
    };
    let solved = solve_adaptive(&params, &shifted, Some(offset), &BvpOptions {
        intervals: orbit.intervals(),
        ..*opts
    })?;
    Ok(AnchoredOrbit {
        orbit: solved,
        anchor: which,
        offset,
    })
}

/// Direction of a one-parameter continuation in `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Decreasing,
    Increasing,
}

impl Direction {
    fn sign(&self) -> f64 {
        match self {
            Direction::Decreasing => -1.0,
            Direction::Increasing => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyOptions {
    pub continuation: ContinuationSettings,
    pub mu_range: (f64, f64),
    pub bvp: BvpOptions,
}

impl Default for TangencyOptions {
    fn default() -> Self {
        Self {
            continuation: ContinuationSettings {
                h_init: 1e-3,
                h_min: 1e-8,
                h_max: 2e-2,
                max_steps: 2000,
                tol: 1e-10,
                max_newton: 12,
            },
            mu_range: (-0.05, 0.6),
            bvp: BvpOptions::default(),
        }
    }
}

/// Largest accepted gap between the orbit extremum and the boundary at a
/// detected tangency.
pub const TANGENCY_TOL: f64 = 1e-6;

/// Tangency of the orbit family with a zone boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyPoint {
    pub mu: f64,
    pub eta: f64,
    pub orbit: AnchoredOrbit,
    /// Extremum of `rho` over the orbit (max for `L+`, min for `L-`).
    pub extremum: f64,
    /// Boundary density `eta + offset`.
    pub boundary: f64,
}

impl TangencyPoint {
    pub fn extremum_error(&self) -> f64 {
        (self.extremum - self.boundary).abs()
    }
}

fn anchored_bvp(orbit: &AnchoredOrbit, free: Vec<Free>, tangency: bool) -> Bvp {
    Bvp {
        base: orbit.orbit.params,
        mesh: orbit.orbit.mesh.clone(),
        scheme: Scheme::new(orbit.orbit.degree),
        phase: Phase::Anchor { offset: orbit.offset },
        free,
        tangency,
    }
}

fn pack_anchored(bvp: &Bvp, orbit: &AnchoredOrbit) -> DVector<f64> {
    bvp.pack(&orbit.orbit.points, orbit.orbit.period, &orbit.orbit.params)
}

fn unit(dim: usize, i: usize, v: f64) -> DVector<f64> {
    let mut d = DVector::zeros(dim);
    d[i] = v;
    d
}

/// Polish a near-tangency anchored orbit on the square system
/// `{BVP, anchor, d rho/dt (u(0)) = 0}` with `mu` free.
fn polish_tangency(orbit: &AnchoredOrbit, opts: &TangencyOptions) -> Result<AnchoredOrbit> {
    let bvp = anchored_bvp(orbit, vec![Free::Mu], true);
    let u = bvp.newton(pack_anchored(&bvp, orbit), opts.bvp.tol, opts.bvp.max_newton)?;
    Ok(AnchoredOrbit {
        orbit: bvp.to_orbit(&u, orbit.orbit.convention)?,
        anchor: orbit.anchor,
        offset: orbit.offset,
    })
}

fn tangency_point(orbit: AnchoredOrbit) -> TangencyPoint {
    let max = orbit.anchor == Anchor::Plus;
    let extremum = orbit.orbit.rho_extremum(max).1;
    TangencyPoint {
        mu: orbit.orbit.params.mu,
        eta: orbit.orbit.params.eta,
        boundary: orbit.orbit.params.eta + orbit.offset,
        extremum,
        orbit,
    }
}

/// Continue the anchored family in `mu` until its fold, the tangency of
/// the orbit with the anchor boundary.
pub fn detect_tangency(anchored: &AnchoredOrbit, direction: Direction, opts: &TangencyOptions) -> Result<TangencyPoint> {
    let bvp = anchored_bvp(anchored, vec![Free::Mu], false);
    let dim = bvp.dim();
    let mu_idx = dim - 1;
    let u0 = pack_anchored(&bvp, anchored);
    let sign = direction.sign();
    let (lo, hi) = opts.mu_range;
    let branch = continue_branch(&bvp, u0, &unit(dim, mu_idx, sign), &opts.continuation, |u, secant| {
        if secant[mu_idx] * sign < 0.0 {
            Control::Stop("fold".into())
        } else if u[mu_idx] < lo || u[mu_idx] > hi {
            Control::Stop("range".into())
        } else {
            Control::Continue
        }
    });
    if branch.stop != StopReason::Stopped("fold".into()) {
        return Err(Error::NoFold);
    }
    let k = branch.points.len() - 1;
    let (a, b) = (&branch.points[k.saturating_sub(2)], &branch.points[k]);
    let chord = b - a;
    let located = locate(&bvp, a, b, &opts.continuation, 1e-9, |u| {
        Ok(tangent(&bvp, u, &chord)?[mu_idx] * sign)
    })?;
    let rough = AnchoredOrbit {
        orbit: bvp.to_orbit(&located, anchored.orbit.convention)?,
        anchor: anchored.anchor,
        offset: anchored.offset,
    };
    let polished = polish_tangency(&rough, opts).unwrap_or(rough);
    let tp = tangency_point(polished);
    // Near H the family also folds in a canard explosion without touching
    // the boundary.
    if tp.extremum_error() > TANGENCY_TOL {
        return Err(Error::NotTangent {
            mu: tp.mu,
            eta: tp.eta,
            gap: tp.extremum_error(),
        });
    }
    Ok(tp)
}

/// Everything needed to locate a tangency from scratch at fixed `eta`.
pub fn find_tangency(
    params: &ModelParams,
    which: Anchor,
    direction: Direction,
    attractor: &AttractorOptions,
    opts: &TangencyOptions,
) -> Result<TangencyPoint> {
    let orbit = periodic_orbit(params, attractor, &opts.bvp)?;
    let anchored = anchor_phase(&orbit, which, &opts.bvp)?;
    detect_tangency(&anchored, direction, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyCurveOptions {
    pub window: Window,
    pub continuation: ContinuationSettings,
    /// Stop when `rho_max - rho_min` falls below this (the curve meets H).
    pub min_amplitude: f64,
    /// Remesh after this many accepted steps.
    pub remesh_every: usize,
    pub max_points: usize,
    pub bvp: BvpOptions,
}

impl Default for TangencyCurveOptions {
    fn default() -> Self {
        Self {
            window: Window::default(),
            continuation: ContinuationSettings {
                h_init: 1e-3,
                h_min: 1e-8,
                h_max: 1e-2,
                max_steps: 40,
                tol: 1e-10,
                max_newton: 12,
            },
            min_amplitude: 1e-4,
            remesh_every: 40,
            max_points: 1500,
            bvp: BvpOptions::default(),
        }
    }
}

fn curve_point_of(orbit: &PeriodicOrbit) -> CurvePoint {
    CurvePoint {
        mu: orbit.params.mu,
        eta: orbit.params.eta,
        state: orbit.points[0],
        aux1: orbit.rho_min,
        aux2: orbit.rho_max,
        snic: false,
    }
}

/// Continue a tangency point in `(mu, eta)`.
pub fn tangency_curve(start: &TangencyPoint, opts: &TangencyCurveOptions) -> Result<ParamCurve> {
    let kind = match start.orbit.anchor {
        Anchor::Plus => CurveKind::TangencyPlus,
        Anchor::Minus => CurveKind::TangencyMinus,
    };
    let mut halves = Vec::new();
    let mut termini = Vec::new();
    for sign in [1.0, -1.0] {
        let mut pts: Vec<CurvePoint> = Vec::new();
        let mut current = start.orbit.clone();
        let mut dir_params = (0.0, sign);
        let reason = loop {
            let bvp = anchored_bvp(&current, vec![Free::Mu, Free::Eta], true);
            let dim = bvp.dim();
            let mut dir0 = DVector::zeros(dim);
            dir0[dim - 2] = dir_params.0;
            dir0[dim - 1] = dir_params.1;
            let u0 = pack_anchored(&bvp, &current);
            let mut stop: Option<String> = None;
            let mut last_orbit: Option<PeriodicOrbit> = None;
            let branch = continue_branch(&bvp, u0, &dir0, &opts.continuation, |u, _| {
                let Ok(orbit) = bvp.to_orbit(u, current.orbit.convention) else {
                    stop = Some("orbit evaluation failed".into());
                    return Control::Stop("eval".into());
                };
                let (mu, eta) = (orbit.params.mu, orbit.params.eta);
                pts.push(curve_point_of(&orbit));
                let amp = orbit.rho_max - orbit.rho_min;
                last_orbit = Some(orbit);
                if !opts.window.contains(mu, eta) {
                    stop = Some("window".into());
                    Control::Stop("window".into())
                } else if amp < opts.min_amplitude {
                    stop = Some("H".into());
                    Control::Stop("H".into())
                } else {
                    Control::Continue
                }
            });
            if let Some(r) = stop {
                break r;
            }
            if let StopReason::Failure(r) = &branch.stop {
                break format!("failure: {r}");
            }
            if pts.len() >= opts.max_points {
                break "max-points".into();
            }
            let n = branch.points.len();
            if n < 2 {
                break "stalled".into();
            }
            let d = &branch.points[n - 1] - &branch.points[n - 2];
            dir_params = (d[dim - 2], d[dim - 1]);
            // Remesh at the last point with eta frozen.
            let Some(orbit) = last_orbit else { break "stalled".into() };
            let anchored = AnchoredOrbit {
                orbit,
                anchor: current.anchor,
                offset: current.offset,
            };
            current = match remesh_tangency(&anchored, opts) {
                Ok(o) => o,
                Err(_) => anchored,
            };
        };
        let reason = match pts.last() {
            Some(q) if reason.starts_with("failure") && near_hopf(&start.orbit.orbit.params, q.mu, q.eta) => "H".into(),
            _ => reason,
        };
        termini.push(reason);
        halves.push(pts);
    }
    let mut points: Vec<CurvePoint> = halves[1].iter().rev().cloned().collect();
    points.push(curve_point_of(&start.orbit.orbit));
    points.extend(halves[0].iter().cloned());
    Ok(ParamCurve {
        kind,
        epsilon: start.orbit.orbit.params.epsilon,
        points,
        special_points: Vec::new(),
        termini,
    })
}

/// Distance in `mu` below which a stalled tangency curve is taken to have
/// run into the canard explosion next to H.
pub const CANARD_MU_GAP: f64 = 5e-3;

fn near_hopf(base: &ModelParams, mu: f64, eta: f64) -> bool {
    let p = base.with_eta(eta);
    match continue_equilibria(&p, (-0.05, 0.6), &ContinuationSettings::default()) {
        Ok(b) => b.hopfs.iter().any(|h| (h.mu - mu).abs() < CANARD_MU_GAP),
        Err(_) => false,
    }
}

fn remesh_tangency(orbit: &AnchoredOrbit, opts: &TangencyCurveOptions) -> Result<AnchoredOrbit> {
    let (_, dens) = error_indicators(&orbit.orbit);
    let n = orbit.orbit.intervals().max(opts.bvp.intervals);
    let mesh = equidistribute(&orbit.orbit.mesh, &dens, n);
    let pts = node_values(&orbit.orbit, &mesh, orbit.orbit.degree);
    let moved = AnchoredOrbit {
        orbit: PeriodicOrbit {
            mesh,
            points: pts,
            ..orbit.orbit.clone()
        },
        ..orbit.clone()
    };
    polish_tangency(
        &moved,
        &TangencyOptions {
            bvp: opts.bvp,
            ..TangencyOptions::default()
        },
    )
}

/// Symmetric distance between two closed curves, each point of one
/// measured against the continuous other.
pub fn orbit_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    fn one_way(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
        let bs = b.sample(8);
        let mut worst = 0.0f64;
        for (_, p) in a.sample(4) {
            worst = worst.max(distance_to_orbit(b, &bs, p));
        }
        worst
    }
    one_way(a, b).max(one_way(b, a))
}

/// Distance from a point to a periodic orbit, using `samples` of the orbit
/// to bracket the closest point.
pub fn distance_to_orbit(orbit: &PeriodicOrbit, samples: &[(f64, State)], p: State) -> f64 {
    let (mut k, mut best) = (0, f64::INFINITY);
    for (i, (_, s)) in samples.iter().enumerate() {
        let d = s.dist(&p);
        if d < best {
            best = d;
            k = i;
        }
    }
    let lo = samples[k.saturating_sub(1)].0;
    let hi = samples[(k + 1).min(samples.len() - 1)].0;
    let f = |t: f64| orbit.eval(t).dist(&p);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..100 {
        if b - a < 1e-14 {
            break;
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    best.min(fc).min(fe)
}
