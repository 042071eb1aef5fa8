//! The nondimensional two-box model: parameters, state, the convective
//! exchange function, the vector field with its derivatives, and equilibria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_KAPPA1: f64 = 0.1;
pub const DEFAULT_KAPPA2: f64 = 1.0;

/// Nondimensional parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Virtual salinity flux.
    pub mu: f64,
    /// Density threshold of the mixing switch.
    pub eta: f64,
    /// Switching timescale; zero gives the piecewise-smooth limit.
    pub epsilon: f64,
    /// Diffusive mixing coefficient.
    pub kappa1: f64,
    /// Convective mixing coefficient.
    pub kappa2: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 0.2,
            eta: -0.17,
            epsilon: 0.009,
            kappa1: DEFAULT_KAPPA1,
            kappa2: DEFAULT_KAPPA2,
        }
    }
}

impl ModelParams {
    /// Parameters with the default mixing coefficients.
    pub fn new(mu: f64, eta: f64, epsilon: f64) -> Self {
        Self {
            mu,
            eta,
            epsilon,
            kappa1: DEFAULT_KAPPA1,
            kappa2: DEFAULT_KAPPA2,
        }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.eta, self.epsilon, self.kappa1, self.kappa2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams(format!("non-finite value in {self:?}")));
        }
        if !(self.kappa1 > 0.0 && self.kappa1 < self.kappa2) {
            return Err(Error::InvalidParams(format!(
                "need 0 < kappa1 < kappa2, got kappa1 = {}, kappa2 = {}",
                self.kappa1, self.kappa2
            )));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn is_smooth(&self) -> bool {
        self.epsilon > 0.0
    }

    pub(crate) fn require_smooth(&self) -> Result<()> {
        self.validate()?;
        if self.epsilon > 0.0 {
            Ok(())
        } else {
            Err(Error::NonSmoothLimit { epsilon: self.epsilon })
        }
    }

    pub(crate) fn require_nonsmooth(&self) -> Result<()> {
        self.validate()?;
        if self.epsilon == 0.0 {
            Ok(())
        } else {
            Err(Error::SmoothField { epsilon: self.epsilon })
        }
    }

    /// Half the jump of the exchange function, `(kappa2 - kappa1) / 2`.
    pub fn half_jump(&self) -> f64 {
        0.5 * (self.kappa2 - self.kappa1)
    }
}

/// Surface temperature `x` and salinity `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Density relative to the deep box.
    #[inline]
    pub fn rho(&self) -> f64 {
        self.y - self.x
    }

    /// State on the line `y - x = rho` with the given temperature.
    pub fn on_density(x: f64, rho: f64) -> Self {
        Self { x, y: x + rho }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self { x: a[0], y: a[1] }
    }

    pub fn dist(&self, other: &State) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `sech^2(u)` without overflow for large `|u|`.
#[inline]
pub(crate) fn sech2(u: f64) -> f64 {
    let e = (-2.0 * u.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// The exchange function and its first three derivatives in `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub k: f64,
    pub dk: f64,
    pub d2k: f64,
    pub d3k: f64,
}

/// Convective exchange coefficient at density `rho`.
///
/// For `epsilon = 0` this is the step function with the midpoint value on
/// the switching line.
pub fn exchange(params: &ModelParams, rho: f64) -> f64 {
    let b = params.half_jump();
    if params.epsilon > 0.0 {
        params.kappa1 + b * (1.0 + ((rho - params.eta) / params.epsilon).tanh())
    } else if rho < params.eta {
        params.kappa1
    } else if rho > params.eta {
        params.kappa2
    } else {
        0.5 * (params.kappa1 + params.kappa2)
    }
}

/// Exchange value with derivatives; derivatives are zero in the step limit
/// (away from the switching line).
pub fn exchange_derivs(params: &ModelParams, rho: f64) -> Exchange {
    if params.epsilon <= 0.0 {
        return Exchange {
            k: exchange(params, rho),
            dk: 0.0,
            d2k: 0.0,
            d3k: 0.0,
        };
    }
    let eps = params.epsilon;
    let b = params.half_jump();
    let u = (rho - params.eta) / eps;
    let t = u.tanh();
    let s = sech2(u);
    Exchange {
        k: params.kappa1 + b * (1.0 + t),
        dk: b / eps * s,
        d2k: -2.0 * b / (eps * eps) * s * t,
        d3k: 2.0 * b / (eps * eps * eps) * s * (2.0 * t * t - s),
    }
}

/// Vector field `(dx/dt, dy/dt)`.
#[inline]
pub fn rhs(params: &ModelParams, state: State) -> [f64; 2] {
    let k = exchange(params, state.rho());
    [1.0 - state.x - k * state.x, params.mu - k * state.y]
}

/// Vector field with the salinity flux overridden (used by drifting runs).
#[inline]
pub(crate) fn rhs_with_mu(params: &ModelParams, mu: f64, state: State) -> [f64; 2] {
    let k = exchange(params, state.rho());
    [1.0 - state.x - k * state.x, mu - k * state.y]
}

pub type Mat2 = [[f64; 2]; 2];

fn jacobian_from(x: f64, y: f64, e: &Exchange) -> Mat2 {
    [
        [-1.0 - e.k + x * e.dk, -x * e.dk],
        [y * e.dk, -e.k - y * e.dk],
    ]
}

/// Analytic Jacobian of the smooth field.
pub fn jacobian(params: &ModelParams, state: State) -> Result<Mat2> {
    params.require_smooth()?;
    let e = exchange_derivs(params, state.rho());
    Ok(jacobian_from(state.x, state.y, &e))
}

/// Jacobian without the smoothness check, for inner loops that have
/// already validated the parameters.
#[inline]
pub(crate) fn jacobian_unchecked(params: &ModelParams, state: State) -> Mat2 {
    let e = exchange_derivs(params, state.rho());
    jacobian_from(state.x, state.y, &e)
}

/// Second-order derivative data of the field.
#[derive(Debug, Clone, Copy)]
pub struct SecondDerivatives {
    /// `hess[i][j][k] = d^2 f_i / dz_j dz_k` with `z = (x, y)`.
    pub hess: [[[f64; 2]; 2]; 2],
    /// `d f / d eta`.
    pub df_deta: [f64; 2],
    /// `d J / d eta`.
    pub dj_deta: Mat2,
}

pub(crate) fn second_derivatives(params: &ModelParams, state: State) -> SecondDerivatives {
    let e = exchange_derivs(params, state.rho());
    let (x, y) = (state.x, state.y);
    let (k1, k2) = (e.dk, e.d2k);
    let h1 = [[2.0 * k1 - x * k2, -k1 + x * k2], [-k1 + x * k2, -x * k2]];
    let h2 = [[-y * k2, k1 + y * k2], [k1 + y * k2, -2.0 * k1 - y * k2]];
    SecondDerivatives {
        hess: [h1, h2],
        df_deta: [x * k1, y * k1],
        dj_deta: [[k1 - x * k2, x * k2], [-y * k2, k1 + y * k2]],
    }
}

pub fn trace(j: &Mat2) -> f64 {
    j[0][0] + j[1][1]
}

pub fn det(j: &Mat2) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Real parts of the eigenvalues of a 2x2 matrix, largest first.
pub fn eigen_real_parts(j: &Mat2) -> [f64; 2] {
    let tr = trace(j);
    let dt = det(j);
    let disc = tr * tr - 4.0 * dt;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [0.5 * (tr + r), 0.5 * (tr - r)]
    } else {
        [0.5 * tr, 0.5 * tr]
    }
}

/// Linear stability of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Degenerate,
}

impl Stability {
    pub const MARGIN: f64 = 1e-9;

    pub fn from_jacobian(j: &Mat2) -> Self {
        let [hi, lo] = eigen_real_parts(j);
        if hi.abs() < Self::MARGIN || lo.abs() < Self::MARGIN {
            Stability::Degenerate
        } else if hi < 0.0 {
            Stability::Stable
        } else if lo > 0.0 {
            Stability::Unstable
        } else {
            Stability::Saddle
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub state: State,
    pub stability: Stability,
}

/// Scalar equilibrium condition in the density: zero exactly where
/// `x = 1/(1+K)`, `y = mu/K` has `y - x = rho`.
pub(crate) fn equilibrium_residual(params: &ModelParams, rho: f64) -> f64 {
    let k = exchange(params, rho);
    rho - params.mu / k + 1.0 / (1.0 + k)
}

fn lift(params: &ModelParams, rho: f64) -> State {
    let k = exchange(params, rho);
    State::new(1.0 / (1.0 + k), params.mu / k)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// All equilibria, sorted by density.
///
/// For `epsilon > 0` the roots of the scalar density condition are
/// bracketed on a sampled window and refined by bisection. For
/// `epsilon = 0` the two frozen-coefficient candidates are kept when they
/// lie in their own zone.
pub fn find_equilibria(params: &ModelParams) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    if params.epsilon == 0.0 {
        let mut out = Vec::new();
        for (kappa, below) in [(params.kappa1, true), (params.kappa2, false)] {
            let s = State::new(1.0 / (1.0 + kappa), params.mu / kappa);
            let virtual_point = if below {
                s.rho() >= params.eta
            } else {
                s.rho() <= params.eta
            };
            if !virtual_point {
                out.push(Equilibrium {
                    state: s,
                    stability: Stability::Stable,
                });
            }
        }
        return Ok(out);
    }

    let eps = params.epsilon;
    let lo = params.eta - 20.0 * eps - 5.0;
    let hi = params.eta + 20.0 * eps + 5.0;
    let f = |r: f64| equilibrium_residual(params, r);

    // Uniform samples across the window plus a dense band across the
    // switching layer, where close root pairs live.
    let mut grid: Vec<f64> = (0..=2000)
        .map(|i| lo + (hi - lo) * i as f64 / 2000.0)
        .collect();
    let band = 20.0 * eps;
    grid.extend((0..=2000).map(|i| params.eta - band + 2.0 * band * i as f64 / 2000.0));
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    if values[0] >= 0.0 {
        return Err(Error::ScanWindow { rho: lo });
    }
    if *values.last().unwrap() <= 0.0 {
        return Err(Error::ScanWindow { rho: hi });
    }

    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(a);
        } else if (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
            roots.push(bisect(f, a, b, fa));
        }
    }

    let mut out: Vec<Equilibrium> = roots
        .into_iter()
        .map(|r| {
            let state = lift(params, r);
            let j = jacobian_unchecked(params, state);
            Equilibrium {
                state,
                stability: Stability::from_jacobian(&j),
            }
        })
        .collect();
    out.sort_by(|a, b| a.state.rho().total_cmp(&b.state.rho()));
    Ok(out)
}
