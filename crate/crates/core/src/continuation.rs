//! Pseudo-arclength continuation: the generic engine, equilibrium branches
//! in `mu`, and the two-parameter Hopf and fold curves.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{find_attractor, Attractor, AttractorOptions};
use crate::error::{Error, Result};
use crate::linalg::dense_solve;
use crate::model::{
    det, find_equilibria, jacobian_unchecked, rhs, second_derivatives, trace, Mat2, ModelParams, Stability, State,
};

/// A nonlinear system `F(u) = 0` with one more unknown than equations.
pub trait ContinuationProblem {
    /// Number of unknowns.
    fn dim(&self) -> usize;

    /// Residual, of length `dim() - 1`.
    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Solve `[F_u(u); w^T] d = [r; s]`.
    fn solve_bordered(&self, u: &DVector<f64>, w: &DVector<f64>, r: &DVector<f64>, s: f64) -> Result<DVector<f64>>;

    /// Diagonal weights of the arclength inner product.
    fn weights(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 1.0)
    }
}

/// Helper for small problems with an explicit Jacobian.
pub fn dense_bordered_solve(jac: &DMatrix<f64>, w: &DVector<f64>, r: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
    let n = jac.ncols();
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n - 1, n)).copy_from(jac);
    for j in 0..n {
        a[(n - 1, j)] = w[j];
    }
    let mut b = DVector::zeros(n);
    b.rows_mut(0, n - 1).copy_from(r);
    b[n - 1] = s;
    dense_solve(a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Residual tolerance of the corrector (max norm).
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            h_init: 1e-3,
            h_min: 1e-5,
            h_max: 1e-2,
            max_steps: 20_000,
            tol: 1e-11,
            max_newton: 10,
        }
    }
}

/// Why a branch ended.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxSteps,
    /// The acceptance callback asked to stop.
    Stopped(String),
    /// The corrector failed at the minimum step.
    Failure(String),
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<DVector<f64>>,
    pub stop: StopReason,
}

pub enum Control {
    Continue,
    Stop(String),
}

fn wdot(w: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).zip(w.iter()).map(|((x, y), z)| x * y * z).sum()
}

fn wnorm(w: &DVector<f64>, a: &DVector<f64>) -> f64 {
    wdot(w, a, a).sqrt()
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton on `F(u) = 0`, `<dir, u - pred>_W = 0`.
pub fn correct<P: ContinuationProblem + ?Sized>(
    problem: &P,
    pred: &DVector<f64>,
    dir: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let w = problem.weights();
    let row = dir.component_mul(&w);
    let mut u = pred.clone();
    let mut last = f64::INFINITY;
    for it in 0..=max_iter {
        let f = problem.residual(&u)?;
        let fnorm = max_abs(&f);
        if !fnorm.is_finite() {
            return Err(Error::NewtonDivergence("non-finite residual".into()));
        }
        if fnorm < tol {
            return Ok(u);
        }
        if it == max_iter || (it > 2 && fnorm > 2.0 * last) {
            break;
        }
        last = fnorm;
        let s = -wdot(&w, dir, &(&u - pred));
        let du = problem.solve_bordered(&u, &row, &(-f), s)?;
        u += du;
    }
    Err(Error::NewtonDivergence(format!("corrector did not reach {tol:e}")))
}

/// Unit tangent at `u`, oriented along `prev`.
pub fn tangent<P: ContinuationProblem + ?Sized>(problem: &P, u: &DVector<f64>, prev: &DVector<f64>) -> Result<DVector<f64>> {
    let w = problem.weights();
    let r = DVector::zeros(problem.dim() - 1);
    let t = problem.solve_bordered(u, &prev.component_mul(&w), &r, 1.0)?;
    let n = wnorm(&w, &t);
    Ok(t / n)
}

/// Follow a branch from the solution `u0` in the direction `dir0`.
///
/// The callback sees every accepted point with its secant and may stop
/// the run. The starting point is included in the output.
pub fn continue_branch<P, C>(
    problem: &P,
    u0: DVector<f64>,
    dir0: &DVector<f64>,
    settings: &ContinuationSettings,
    mut accept: C,
) -> Branch
where
    P: ContinuationProblem + ?Sized,
    C: FnMut(&DVector<f64>, &DVector<f64>) -> Control,
{
    let w = problem.weights();
    let mut points = vec![u0.clone()];
    let mut dir = match tangent(problem, &u0, dir0) {
        Ok(t) => t,
        Err(e) => {
            return Branch {
                points,
                stop: StopReason::Failure(e.to_string()),
            }
        }
    };
    let mut h = settings.h_init;
    let mut u = u0;
    for _ in 0..settings.max_steps {
        let mut refreshed = false;
        let new = loop {
            let pred = &u + &dir * h;
            match correct(problem, &pred, &dir, settings.tol, settings.max_newton) {
                Ok(v) => {
                    let step = &v - &u;
                    let len = wnorm(&w, &step);
                    let cos = wdot(&w, &step, &dir) / len.max(f64::MIN_POSITIVE);
                    if len < 2.0 * h && cos > 0.9 {
                        break Some((v, step / len));
                    }
                }
                Err(_) => {}
            }
            // A secant from a long step around a bend is a poor predictor.
            if !refreshed {
                refreshed = true;
                if let Ok(t) = tangent(problem, &u, &dir) {
                    dir = t;
                    continue;
                }
            }
            h *= 0.5;
            if h < settings.h_min {
                break None;
            }
        };
        let Some((v, secant)) = new else {
            return Branch {
                points,
                stop: StopReason::Failure(format!("corrector failed at step floor {:e}", settings.h_min)),
            };
        };
        u = v;
        dir = secant;
        points.push(u.clone());
        if let Control::Stop(reason) = accept(&u, &dir) {
            return Branch {
                points,
                stop: StopReason::Stopped(reason),
            };
        }
        h = (h * 1.5).min(settings.h_max);
    }
    Branch {
        points,
        stop: StopReason::MaxSteps,
    }
}

/// Bisection in arclength between `a` and `b` for a sign change of `test`.
/// Returns the located point.
pub fn locate<P, T>(problem: &P, a: &DVector<f64>, b: &DVector<f64>, settings: &ContinuationSettings, arc_tol: f64, test: T) -> Result<DVector<f64>>
where
    P: ContinuationProblem + ?Sized,
    T: Fn(&DVector<f64>) -> Result<f64>,
{
    let w = problem.weights();
    let chord = b - a;
    let len = wnorm(&w, &chord);
    let dir = chord / len;
    let ta = test(a)?;
    let (mut lo, mut hi) = (0.0, len);
    let mut best = if ta.abs() < test(b)?.abs() { a.clone() } else { b.clone() };
    let mut guess = a.clone();
    while hi - lo > arc_tol {
        let mid = 0.5 * (lo + hi);
        let pred = a + &dir * mid;
        let start = &guess + &dir * (mid - wdot(&w, &(&guess - a), &dir));
        let u = correct(problem, &start, &dir, settings.tol, settings.max_newton)
            .or_else(|_| correct(problem, &pred, &dir, settings.tol, settings.max_newton))?;
        let t = test(&u)?;
        if (t < 0.0) == (ta < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        guess = u.clone();
        best = u;
        if t == 0.0 {
            break;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Equilibria in mu.

struct EquilibriumProblem {
    params: ModelParams,
}

impl EquilibriumProblem {
    fn at(&self, u: &DVector<f64>) -> (ModelParams, State) {
        (self.params.with_mu(u[2]), State::new(u[0], u[1]))
    }
}

impl ContinuationProblem for EquilibriumProblem {
    fn dim(&self) -> usize {
        3
    }

    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (p, s) = self.at(u);
        let f = rhs(&p, s);
        Ok(DVector::from_vec(f.to_vec()))
    }

    fn solve_bordered(&self, u: &DVector<f64>, w: &DVector<f64>, r: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        let (p, st) = self.at(u);
        let j = jacobian_unchecked(&p, st);
        let jac = DMatrix::from_row_slice(2, 3, &[j[0][0], j[0][1], 0.0, j[1][0], j[1][1], 1.0]);
        dense_bordered_solve(&jac, w, r, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub mu: f64,
    pub state: State,
    pub stability: Stability,
    pub det: f64,
    pub trace: f64,
}

impl EquilibriumPoint {
    fn new(params: &ModelParams, u: &DVector<f64>) -> Self {
        let p = params.with_mu(u[2]);
        let state = State::new(u[0], u[1]);
        let j = jacobian_unchecked(&p, state);
        Self {
            mu: u[2],
            state,
            stability: Stability::from_jacobian(&j),
            det: det(&j),
            trace: trace(&j),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EquilibriumBranch {
    pub points: Vec<EquilibriumPoint>,
    pub folds: Vec<EquilibriumPoint>,
    pub hopfs: Vec<EquilibriumPoint>,
}

const ARC_TOL: f64 = 1e-10;

/// Continue equilibria in `mu` over `mu_range` starting from the
/// lowest-density equilibrium at the lower end of the range.
pub fn continue_equilibria(params: &ModelParams, mu_range: (f64, f64), settings: &ContinuationSettings) -> Result<EquilibriumBranch> {
    params.require_smooth()?;
    let p0 = params.with_mu(mu_range.0);
    let eqs = find_equilibria(&p0)?;
    let start = eqs.first().ok_or_else(|| Error::Other("no equilibrium at the start of the range".into()))?;
    continue_equilibria_from(params, mu_range, start.state, settings)
}

pub fn continue_equilibria_from(
    params: &ModelParams,
    mu_range: (f64, f64),
    start: State,
    settings: &ContinuationSettings,
) -> Result<EquilibriumBranch> {
    params.require_smooth()?;
    let (lo, hi) = (mu_range.0.min(mu_range.1), mu_range.0.max(mu_range.1));
    let problem = EquilibriumProblem { params: *params };
    let u0 = DVector::from_vec(vec![start.x, start.y, mu_range.0]);
    let u0 = correct(&problem, &u0, &DVector::from_vec(vec![0.0, 0.0, 1.0]), settings.tol, 50)?;
    let dir0 = DVector::from_vec(vec![0.0, 0.0, if mu_range.1 >= mu_range.0 { 1.0 } else { -1.0 }]);
    let branch = continue_branch(&problem, u0, &dir0, settings, |u, _| {
        if u[2] < lo || u[2] > hi {
            Control::Stop("left mu range".into())
        } else if u[0].abs() > 1e3 || u[1].abs() > 1e3 {
            Control::Stop("unbounded".into())
        } else {
            Control::Continue
        }
    });
    if let StopReason::Failure(reason) = &branch.stop {
        if branch.points.len() < 2 {
            return Err(Error::ContinuationFailure {
                points: branch.points.len(),
                reason: reason.clone(),
            });
        }
    }
    let mut out = EquilibriumBranch::default();
    let pts: Vec<EquilibriumPoint> = branch.points.iter().map(|u| EquilibriumPoint::new(params, u)).collect();
    for k in 1..pts.len() {
        let (a, b) = (&pts[k - 1], &pts[k]);
        if (a.det < 0.0) != (b.det < 0.0) {
            let u = locate(&problem, &branch.points[k - 1], &branch.points[k], settings, ARC_TOL, |u| {
                Ok(EquilibriumPoint::new(params, u).det)
            })?;
            out.folds.push(EquilibriumPoint::new(params, &u));
        }
        if (a.trace < 0.0) != (b.trace < 0.0) && a.det > 0.0 && b.det > 0.0 {
            let u = locate(&problem, &branch.points[k - 1], &branch.points[k], settings, ARC_TOL, |u| {
                Ok(EquilibriumPoint::new(params, u).trace)
            })?;
            out.hopfs.push(EquilibriumPoint::new(params, &u));
        }
    }
    out.points = pts;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Two-parameter curves.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveKind {
    Hopf,
    Fold,
    TangencyPlus,
    TangencyMinus,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::Hopf => "H",
            CurveKind::Fold => "S",
            CurveKind::TangencyPlus => "T+",
            CurveKind::TangencyMinus => "T-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpecialKind {
    BogdanovTakens,
    NonCentral,
}

impl SpecialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpecialKind::BogdanovTakens => "BT",
            SpecialKind::NonCentral => "N",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub eta: f64,
    /// Equilibrium (or anchor point of the orbit for tangency curves).
    pub state: State,
    /// Trace of the Jacobian, or `rho_min` for tangency curves.
    pub aux1: f64,
    /// Determinant of the Jacobian, or `rho_max` for tangency curves.
    pub aux2: f64,
    /// Set on fold points classified as SNIC.
    pub snic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub kind: SpecialKind,
    pub mu: f64,
    pub eta: f64,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCurve {
    pub kind: CurveKind,
    pub epsilon: f64,
    pub points: Vec<CurvePoint>,
    pub special_points: Vec<SpecialPoint>,
    /// How each end of the curve terminated.
    pub termini: Vec<String>,
}

impl ParamCurve {
    pub fn polyline(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.mu, p.eta)).collect()
    }
}

/// Parameter window for two-parameter curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub mu: (f64, f64),
    pub eta: (f64, f64),
}

impl Default for Window {
    fn default() -> Self {
        Self {
            mu: (-0.05, 0.6),
            eta: (-1.2, 0.3),
        }
    }
}

impl Window {
    pub fn contains(&self, mu: f64, eta: f64) -> bool {
        mu >= self.mu.0 && mu <= self.mu.1 && eta >= self.eta.0 && eta <= self.eta.1
    }
}

fn unpack4(base: &ModelParams, u: &DVector<f64>) -> (ModelParams, State) {
    (ModelParams { mu: u[2], eta: u[3], ..*base }, State::new(u[0], u[1]))
}

/// `d J / d z_k` for `z = (x, y)`.
fn dj(hess: &[[[f64; 2]; 2]; 2], k: usize) -> Mat2 {
    [[hess[0][0][k], hess[0][1][k]], [hess[1][0][k], hess[1][1][k]]]
}

fn ddet(j: &Mat2, d: &Mat2) -> f64 {
    d[0][0] * j[1][1] + j[0][0] * d[1][1] - d[0][1] * j[1][0] - j[0][1] * d[1][0]
}

/// Rows of `d rhs / d (x, y, mu, eta)`.
fn field_rows(p: &ModelParams, s: State) -> ([[f64; 4]; 2], Mat2, crate::model::SecondDerivatives) {
    let j = jacobian_unchecked(p, s);
    let sd = second_derivatives(p, s);
    (
        [
            [j[0][0], j[0][1], 0.0, sd.df_deta[0]],
            [j[1][0], j[1][1], 1.0, sd.df_deta[1]],
        ],
        j,
        sd,
    )
}

struct HopfProblem {
    base: ModelParams,
}

impl ContinuationProblem for HopfProblem {
    fn dim(&self) -> usize {
        4
    }

    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (p, s) = unpack4(&self.base, u);
        let f = rhs(&p, s);
        let j = jacobian_unchecked(&p, s);
        Ok(DVector::from_vec(vec![f[0], f[1], trace(&j)]))
    }

    fn solve_bordered(&self, u: &DVector<f64>, w: &DVector<f64>, r: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        let (p, st) = unpack4(&self.base, u);
        let (rows, _, sd) = field_rows(&p, st);
        let dtr = |k: usize| sd.hess[0][0][k] + sd.hess[1][1][k];
        let jac = DMatrix::from_row_slice(
            3,
            4,
            &[
                rows[0][0],
                rows[0][1],
                rows[0][2],
                rows[0][3],
                rows[1][0],
                rows[1][1],
                rows[1][2],
                rows[1][3],
                dtr(0),
                dtr(1),
                0.0,
                sd.dj_deta[0][0] + sd.dj_deta[1][1],
            ],
        );
        dense_bordered_solve(&jac, w, r, s)
    }
}

/// Minimally augmented fold system: the bordering vectors are refreshed
/// between steps.
struct FoldProblem {
    base: ModelParams,
    b: Cell<[f64; 2]>,
    c: Cell<[f64; 2]>,
}

impl FoldProblem {
    /// Test function `g` with right/left null vectors `v`, `w`.
    fn bordered(&self, j: &Mat2) -> Result<(f64, [f64; 2], [f64; 2])> {
        let b = self.b.get();
        let c = self.c.get();
        let m = DMatrix::from_row_slice(3, 3, &[j[0][0], j[0][1], b[0], j[1][0], j[1][1], b[1], c[0], c[1], 0.0]);
        let e = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let v = dense_solve(m.clone(), &e)?;
        let wv = dense_solve(m.transpose(), &e)?;
        Ok((v[2], [v[0], v[1]], [wv[0], wv[1]]))
    }

    fn refresh(&self, u: &DVector<f64>) {
        let (p, s) = unpack4(&self.base, u);
        let j = jacobian_unchecked(&p, s);
        if let Ok((_, v, w)) = self.bordered(&j) {
            let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
            let nw = (w[0] * w[0] + w[1] * w[1]).sqrt();
            if nv > 0.0 && nw > 0.0 {
                self.c.set([v[0] / nv, v[1] / nv]);
                self.b.set([w[0] / nw, w[1] / nw]);
            }
        }
    }
}

impl ContinuationProblem for FoldProblem {
    fn dim(&self) -> usize {
        4
    }

    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (p, s) = unpack4(&self.base, u);
        let f = rhs(&p, s);
        let j = jacobian_unchecked(&p, s);
        let (g, _, _) = self.bordered(&j)?;
        Ok(DVector::from_vec(vec![f[0], f[1], g]))
    }

    fn solve_bordered(&self, u: &DVector<f64>, w: &DVector<f64>, r: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        let (p, st) = unpack4(&self.base, u);
        let (rows, j, sd) = field_rows(&p, st);
        let (_, v, wl) = self.bordered(&j)?;
        let dg = |d: &Mat2| {
            -(wl[0] * (d[0][0] * v[0] + d[0][1] * v[1]) + wl[1] * (d[1][0] * v[0] + d[1][1] * v[1]))
        };
        let jac = DMatrix::from_row_slice(
            3,
            4,
            &[
                rows[0][0],
                rows[0][1],
                rows[0][2],
                rows[0][3],
                rows[1][0],
                rows[1][1],
                rows[1][2],
                rows[1][3],
                dg(&dj(&sd.hess, 0)),
                dg(&dj(&sd.hess, 1)),
                0.0,
                dg(&sd.dj_deta),
            ],
        );
        dense_bordered_solve(&jac, w, r, s)
    }
}

fn curve_point(base: &ModelParams, u: &DVector<f64>) -> CurvePoint {
    let (p, s) = unpack4(base, u);
    let j = jacobian_unchecked(&p, s);
    CurvePoint {
        mu: p.mu,
        eta: p.eta,
        state: s,
        aux1: trace(&j),
        aux2: det(&j),
        snic: false,
    }
}

/// Newton on the Bogdanov-Takens system `{f = 0, tr J = 0, det J = 0}`.
fn polish_bt(base: &ModelParams, u: &DVector<f64>) -> Result<DVector<f64>> {
    let mut u = u.clone();
    for _ in 0..30 {
        let (p, s) = unpack4(base, &u);
        let (rows, j, sd) = field_rows(&p, s);
        let f = rhs(&p, s);
        let res = DVector::from_vec(vec![f[0], f[1], trace(&j), det(&j)]);
        if max_abs(&res) < 1e-13 {
            return Ok(u);
        }
        let dtr = |d: &Mat2| d[0][0] + d[1][1];
        let (dx, dy) = (dj(&sd.hess, 0), dj(&sd.hess, 1));
        let jac = DMatrix::from_row_slice(
            4,
            4,
            &[
                rows[0][0],
                rows[0][1],
                rows[0][2],
                rows[0][3],
                rows[1][0],
                rows[1][1],
                rows[1][2],
                rows[1][3],
                dtr(&dx),
                dtr(&dy),
                0.0,
                dtr(&sd.dj_deta),
                ddet(&j, &dx),
                ddet(&j, &dy),
                0.0,
                ddet(&j, &sd.dj_deta),
            ],
        );
        u -= dense_solve(jac, &res)?;
    }
    let (p, s) = unpack4(base, &u);
    let j = jacobian_unchecked(&p, s);
    if trace(&j).abs() < 1e-8 && det(&j).abs() < 1e-8 && max_abs(&DVector::from_vec(rhs(&p, s).to_vec())) < 1e-10 {
        Ok(u)
    } else {
        Err(Error::NewtonDivergence("Bogdanov-Takens polish".into()))
    }
}

/// Curve-level settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSettings {
    pub window: Window,
    pub continuation: ContinuationSettings,
    /// Spacing of the `eta` slices searched for a seed point.
    pub seed_eta_step: f64,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            window: Window::default(),
            continuation: ContinuationSettings::default(),
            seed_eta_step: 0.01,
        }
    }
}

/// Search horizontal slices of the window for a seed bifurcation point.
fn seed_point(base: &ModelParams, settings: &CurveSettings, hopf: bool) -> Result<(f64, EquilibriumPoint)> {
    let w = settings.window;
    let n = ((w.eta.1 - w.eta.0) / settings.seed_eta_step).ceil() as usize;
    // Start from the middle of the window and work outwards.
    let mid = 0.5 * (w.eta.0 + w.eta.1);
    let mut order: Vec<f64> = (0..=n).map(|i| w.eta.0 + (w.eta.1 - w.eta.0) * i as f64 / n as f64).collect();
    order.sort_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()));
    for eta in order {
        let p = base.with_eta(eta);
        let Ok(branch) = continue_equilibria(&p, w.mu, &settings.continuation) else {
            continue;
        };
        let found = if hopf { branch.hopfs.first() } else { branch.folds.first() };
        if let Some(pt) = found {
            return Ok((eta, *pt));
        }
    }
    Err(Error::ContinuationFailure {
        points: 0,
        reason: format!("no {} seed in window", if hopf { "Hopf" } else { "fold" }),
    })
}

fn run_both_ways<P: ContinuationProblem>(
    problem: &P,
    u0: &DVector<f64>,
    settings: &CurveSettings,
    mut stop: impl FnMut(&DVector<f64>) -> Option<String>,
    mut on_accept: impl FnMut(&DVector<f64>),
) -> (Vec<DVector<f64>>, Vec<String>) {
    let w = settings.window;
    let mut halves = Vec::new();
    let mut termini = Vec::new();
    for sign in [1.0, -1.0] {
        let dir0 = DVector::from_vec(vec![0.0, 0.0, sign, 0.0]);
        let branch = continue_branch(problem, u0.clone(), &dir0, &settings.continuation, |u, _| {
            on_accept(u);
            if !w.contains(u[2], u[3]) {
                return Control::Stop("window".into());
            }
            match stop(u) {
                Some(r) => Control::Stop(r),
                None => Control::Continue,
            }
        });
        termini.push(match branch.stop {
            StopReason::MaxSteps => "max-steps".to_string(),
            StopReason::Stopped(r) => r,
            StopReason::Failure(r) => format!("failure: {r}"),
        });
        halves.push(branch.points);
    }
    let mut pts: Vec<DVector<f64>> = halves[1].iter().rev().cloned().collect();
    pts.extend(halves[0].iter().skip(1).cloned());
    (pts, termini)
}

/// Curve of Hopf bifurcations (`tr J = 0`, `det J > 0`) at fixed `epsilon`.
pub fn hopf_curve(base: &ModelParams, settings: &CurveSettings) -> Result<ParamCurve> {
    base.require_smooth()?;
    let (eta, seed) = seed_point(base, settings, true)?;
    hopf_curve_from(base, seed.mu, eta, seed.state, settings)
}

pub fn hopf_curve_from(base: &ModelParams, mu: f64, eta: f64, state: State, settings: &CurveSettings) -> Result<ParamCurve> {
    let problem = HopfProblem { base: *base };
    let u0 = DVector::from_vec(vec![state.x, state.y, mu, eta]);
    let u0 = correct(&problem, &u0, &DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]), settings.continuation.tol, 50)?;
    let (pts, termini) = run_both_ways(
        &problem,
        &u0,
        settings,
        |u| {
            let (p, s) = unpack4(base, u);
            if det(&jacobian_unchecked(&p, s)) <= 0.0 {
                Some("BT".into())
            } else {
                None
            }
        },
        |_| {},
    );
    let mut special = Vec::new();
    let mut points = Vec::new();
    for (k, u) in pts.iter().enumerate() {
        let cp = curve_point(base, u);
        if cp.aux2 <= 0.0 {
            // Terminal point past a BT: locate the BT and stop there.
            let nb = if k == 0 { &pts[1] } else { &pts[k - 1] };
            if let Ok(bt) = locate(&problem, nb, u, &settings.continuation, ARC_TOL, |v| Ok(curve_point(base, v).aux2)) {
                if let Ok(bt) = polish_bt(base, &bt) {
                    let (p, s) = unpack4(base, &bt);
                    special.push(SpecialPoint {
                        kind: SpecialKind::BogdanovTakens,
                        mu: p.mu,
                        eta: p.eta,
                        state: s,
                    });
                }
            }
            continue;
        }
        points.push(cp);
    }
    Ok(ParamCurve {
        kind: CurveKind::Hopf,
        epsilon: base.epsilon,
        points,
        special_points: special,
        termini,
    })
}

/// Curve of saddle-node bifurcations at fixed `epsilon`, with its
/// Bogdanov-Takens points. SNIC flags and N points are added by
/// [`classify_fold_curve`] and [`noncentral_points`].
pub fn fold_curve(base: &ModelParams, settings: &CurveSettings) -> Result<ParamCurve> {
    base.require_smooth()?;
    let (eta, seed) = seed_point(base, settings, false)?;
    fold_curve_from(base, seed.mu, eta, seed.state, settings)
}

pub fn fold_curve_from(base: &ModelParams, mu: f64, eta: f64, state: State, settings: &CurveSettings) -> Result<ParamCurve> {
    let problem = FoldProblem {
        base: *base,
        b: Cell::new([std::f64::consts::FRAC_1_SQRT_2; 2]),
        c: Cell::new([std::f64::consts::FRAC_1_SQRT_2; 2]),
    };
    let u0 = DVector::from_vec(vec![state.x, state.y, mu, eta]);
    problem.refresh(&u0);
    let u0 = correct(&problem, &u0, &DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]), settings.continuation.tol, 50)?;
    problem.refresh(&u0);
    let (pts, termini) = run_both_ways(&problem, &u0, settings, |_| None, |u| problem.refresh(u));
    let mut special = Vec::new();
    let points: Vec<CurvePoint> = pts.iter().map(|u| curve_point(base, u)).collect();
    for k in 1..pts.len() {
        if (points[k - 1].aux1 < 0.0) != (points[k].aux1 < 0.0) {
            problem.refresh(&pts[k - 1]);
            let bt = locate(&problem, &pts[k - 1], &pts[k], &settings.continuation, ARC_TOL, |v| {
                Ok(curve_point(base, v).aux1)
            })
            .and_then(|bt| polish_bt(base, &bt));
            if let Ok(bt) = bt {
                let (p, s) = unpack4(base, &bt);
                special.push(SpecialPoint {
                    kind: SpecialKind::BogdanovTakens,
                    mu: p.mu,
                    eta: p.eta,
                    state: s,
                });
            }
        }
    }
    Ok(ParamCurve {
        kind: CurveKind::Fold,
        epsilon: base.epsilon,
        points,
        special_points: special,
        termini,
    })
}

/// Intersections of two polylines by segment-pair root finding.
pub fn polyline_intersections(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64, usize, usize)> {
    let mut out = Vec::new();
    for i in 1..a.len() {
        let (p0, p1) = (a[i - 1], a[i]);
        let (amin, amax) = ((p0.0.min(p1.0), p0.1.min(p1.1)), (p0.0.max(p1.0), p0.1.max(p1.1)));
        for j in 1..b.len() {
            let (q0, q1) = (b[j - 1], b[j]);
            if q0.0.max(q1.0) < amin.0 || q0.0.min(q1.0) > amax.0 || q0.1.max(q1.1) < amin.1 || q0.1.min(q1.1) > amax.1 {
                continue;
            }
            let d1 = (p1.0 - p0.0, p1.1 - p0.1);
            let d2 = (q1.0 - q0.0, q1.1 - q0.1);
            let den = d1.0 * d2.1 - d1.1 * d2.0;
            if den == 0.0 {
                continue;
            }
            let e = (q0.0 - p0.0, q0.1 - p0.1);
            let t = (e.0 * d2.1 - e.1 * d2.0) / den;
            let s = (e.0 * d1.1 - e.1 * d1.0) / den;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) {
                out.push((p0.0 + t * d1.0, p0.1 + t * d1.1, i, j));
            }
        }
    }
    out
}

/// Junctions of the Hopf and fold curves away from their Bogdanov-Takens
/// points, polished on the joint system {Hopf at one equilibrium, fold at
/// another, same parameters}.
pub fn noncentral_points(base: &ModelParams, hopf: &ParamCurve, fold: &ParamCurve) -> Vec<SpecialPoint> {
    let bts: Vec<(f64, f64)> = hopf
        .special_points
        .iter()
        .chain(fold.special_points.iter())
        .filter(|s| s.kind == SpecialKind::BogdanovTakens)
        .map(|s| (s.mu, s.eta))
        .collect();
    let mut out: Vec<SpecialPoint> = Vec::new();
    for (mu, eta, i, j) in polyline_intersections(&hopf.polyline(), &fold.polyline()) {
        if bts.iter().any(|b| ((b.0 - mu).powi(2) + (b.1 - eta).powi(2)).sqrt() < 5e-3) {
            continue;
        }
        let hs = hopf.points[i].state;
        let fs = fold.points[j].state;
        // Two equilibria at one parameter point: Hopf at the first, fold at the second.
        let mut z = DVector::from_vec(vec![hs.x, hs.y, fs.x, fs.y, mu, eta]);
        let resid = |z: &DVector<f64>| {
            let p = ModelParams { mu: z[4], eta: z[5], ..*base };
            let s1 = State::new(z[0], z[1]);
            let s2 = State::new(z[2], z[3]);
            let f1 = rhs(&p, s1);
            let f2 = rhs(&p, s2);
            DVector::from_vec(vec![
                f1[0],
                f1[1],
                trace(&jacobian_unchecked(&p, s1)),
                f2[0],
                f2[1],
                det(&jacobian_unchecked(&p, s2)),
            ])
        };
        let mut ok = false;
        for _ in 0..40 {
            let r = resid(&z);
            if max_abs(&r) < 1e-12 {
                ok = true;
                break;
            }
            let mut jac = DMatrix::zeros(6, 6);
            for k in 0..6 {
                let h = 1e-7 * (1.0 + z[k].abs());
                let mut zp = z.clone();
                zp[k] += h;
                let mut zm = z.clone();
                zm[k] -= h;
                jac.set_column(k, &((resid(&zp) - resid(&zm)) / (2.0 * h)));
            }
            match dense_solve(jac, &r) {
                Ok(d) => z -= d,
                Err(_) => break,
            }
        }
        let (mu, eta, state) = if ok && (z[4] - mu).abs() < 1e-2 && (z[5] - eta).abs() < 1e-2 {
            (z[4], z[5], State::new(z[2], z[3]))
        } else {
            (mu, eta, fs)
        };
        if out.iter().any(|s| (s.mu - mu).abs() < 1e-6 && (s.eta - eta).abs() < 1e-6) {
            continue;
        }
        out.push(SpecialPoint {
            kind: SpecialKind::NonCentral,
            mu,
            eta,
            state,
        });
    }
    out
}

// ---------------------------------------------------------------------------
// SNIC probe.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FoldType {
    Snic,
    PlainFold,
    Inconclusive,
}

impl FoldType {
    pub fn as_str(&self) -> &'static str {
        match self {
            FoldType::Snic => "SNIC",
            FoldType::PlainFold => "fold",
            FoldType::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnicSettings {
    /// Parameter offset past the fold, normal to the curve.
    pub offset: f64,
    /// Maximal distance of the orbit from the vanished saddle-node.
    pub distance: f64,
    /// Required period as a multiple of `reference_period`.
    pub period_factor: f64,
    /// Period of a typical mid-region orbit (the Welander orbit at
    /// `(0.14, -0.3)`, `epsilon = 0.009`).
    pub reference_period: f64,
    pub attractor: AttractorOptions,
}

impl Default for SnicSettings {
    fn default() -> Self {
        Self {
            offset: 1e-4,
            distance: 1e-2,
            period_factor: 10.0,
            reference_period: 5.6083,
            attractor: AttractorOptions {
                settle_time: 2000.0,
                max_time: 40_000.0,
                ..AttractorOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnicProbe {
    pub kind: FoldType,
    /// Parameters the probe simulated at.
    pub mu: f64,
    pub eta: f64,
    pub period: Option<f64>,
    pub min_distance: Option<f64>,
}

/// Empirical SNIC test at a fold point with unit curve tangent
/// `(t_mu, t_eta)` in the parameter plane.
pub fn snic_probe(base: &ModelParams, fold: &CurvePoint, tangent: (f64, f64), settings: &SnicSettings) -> Result<SnicProbe> {
    base.require_smooth()?;
    let norm = (tangent.0 * tangent.0 + tangent.1 * tangent.1).sqrt();
    let n = (-tangent.1 / norm, tangent.0 / norm);
    let side = |s: f64| ModelParams {
        mu: fold.mu + s * settings.offset * n.0,
        eta: fold.eta + s * settings.offset * n.1,
        ..*base
    };
    let count = |p: &ModelParams| find_equilibria(p).map(|e| e.len()).unwrap_or(usize::MAX);
    let (pa, pb) = (side(1.0), side(-1.0));
    let p = if count(&pa) <= count(&pb) { pa } else { pb };
    let probe = |kind, period, min_distance| SnicProbe {
        kind,
        mu: p.mu,
        eta: p.eta,
        period,
        min_distance,
    };
    match find_attractor(&p, fold.state, &settings.attractor) {
        Ok(Attractor::Periodic(orbit)) => {
            let d = orbit
                .states
                .iter()
                .map(|s| s.dist(&fold.state))
                .fold(f64::INFINITY, f64::min);
            let kind = if d < settings.distance && orbit.period > settings.period_factor * settings.reference_period {
                FoldType::Snic
            } else {
                FoldType::PlainFold
            };
            Ok(probe(kind, Some(orbit.period), Some(d)))
        }
        Ok(Attractor::Equilibrium(_)) => Ok(probe(FoldType::PlainFold, None, None)),
        Err(Error::NoConvergence { .. }) => Ok(probe(FoldType::Inconclusive, None, None)),
        Err(e) => Err(e),
    }
}

/// Run [`snic_probe`] on every `stride`-th point of a fold curve inside the
/// window and flag points by the nearest probe.
pub fn classify_fold_curve(base: &ModelParams, curve: &mut ParamCurve, window: &Window, stride: usize, settings: &SnicSettings) {
    let n = curve.points.len();
    if n < 2 {
        return;
    }
    let stride = stride.max(1);
    let mut probes: Vec<(usize, bool)> = Vec::new();
    let mut k = 0;
    while k < n {
        let pt = curve.points[k];
        if window.contains(pt.mu, pt.eta) {
            let (a, b) = (curve.points[k.saturating_sub(1)], curve.points[(k + 1).min(n - 1)]);
            let t = (b.mu - a.mu, b.eta - a.eta);
            if let Ok(pr) = snic_probe(base, &pt, t, settings) {
                probes.push((k, pr.kind == FoldType::Snic));
            }
        }
        k += stride;
    }
    for (i, pt) in curve.points.iter_mut().enumerate() {
        if let Some(&(_, s)) = probes.iter().min_by_key(|(j, _)| (*j as isize - i as isize).unsigned_abs()) {
            pt.snic = s && window.contains(pt.mu, pt.eta);
        }
    }
}
