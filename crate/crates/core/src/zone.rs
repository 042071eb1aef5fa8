//! Switching-zone geometry: the maximal-curvature points of the switch
//! profile split the phase plane into a diffusive zone R1, a switching
//! zone S and a convective zone R2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{exchange, ModelParams, State};

/// Which graph's curvature maxima define the zone boundaries.
///
/// Both graphs are `tanh` switches of width `epsilon` centred on `eta` and
/// differ only in amplitude, so their curvature maxima sit at
/// `|rho - eta| = u* epsilon` with different `u*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoneConvention {
    /// Unit-amplitude profile `tanh((rho - eta)/epsilon)`. This is the
    /// convention under which the reference tangency values at
    /// `(mu, eta) = (0.1616, -0.17)` and `(0.3092, -0.17)` are reproduced.
    #[default]
    SwitchProfile,
    /// The exchange function itself, amplitude `(kappa2 - kappa1)/2`.
    ExchangeGraph,
}

impl ZoneConvention {
    /// Half-amplitude of the `tanh` graph whose curvature is maximised.
    pub fn amplitude(&self, params: &ModelParams) -> f64 {
        match self {
            ZoneConvention::SwitchProfile => 1.0,
            ZoneConvention::ExchangeGraph => params.half_jump(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ZoneConvention::SwitchProfile => "switch-profile",
            ZoneConvention::ExchangeGraph => "exchange-graph",
        }
    }
}

impl std::str::FromStr for ZoneConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "switch-profile" => Ok(ZoneConvention::SwitchProfile),
            "exchange-graph" => Ok(ZoneConvention::ExchangeGraph),
            other => Err(Error::Other(format!("unknown zone convention '{other}'"))),
        }
    }
}

/// Zero set of the derivative of the curvature of `A tanh((rho-eta)/eps)`:
///
/// `G = 8 eps^2 - 16 A^2 + (9 eps^2 + 32 A^2) cosh(2u) - eps^2 cosh(6u)`,
/// `u = (rho - eta)/eps`. With `A = (kappa2 - kappa1)/2` the constant and
/// `cosh(2u)` coefficients read `-4 (kappa1 - kappa2)^2` and
/// `9 eps^2 + 8 (kappa1 - kappa2)^2`.
///
/// Saturates to `-f64::MAX` where `cosh(6u)` would overflow.
pub fn curvature_root_function(params: &ModelParams, convention: ZoneConvention, rho: f64) -> Result<f64> {
    params.require_smooth()?;
    let eps = params.epsilon;
    let a = convention.amplitude(params);
    let u = (rho - params.eta) / eps;
    if 6.0 * u.abs() > 709.0 {
        return Ok(-f64::MAX);
    }
    let eps2 = eps * eps;
    let g = 8.0 * eps2 - 16.0 * a * a + (9.0 * eps2 + 32.0 * a * a) * (2.0 * u).cosh()
        - eps2 * (6.0 * u).cosh();
    Ok(if g.is_finite() { g } else { -f64::MAX })
}

/// `G / (eps^2 cosh(6u))`: same roots as [`curvature_root_function`], bounded
/// in `(-1, ...]`, slope about `6/eps` at the roots. Used as the phase
/// condition of anchored orbits.
pub(crate) fn curvature_root_normalized(params: &ModelParams, amplitude: f64, rho: f64) -> f64 {
    let eps = params.epsilon;
    let eps2 = eps * eps;
    let a2 = amplitude * amplitude;
    let w = ((rho - params.eta) / eps).abs();
    let e4 = (-4.0 * w).exp();
    let e6 = (-6.0 * w).exp();
    let e12 = e6 * e6;
    ((8.0 * eps2 - 16.0 * a2) * 2.0 * e6 + (9.0 * eps2 + 32.0 * a2) * e4 * (1.0 + e4))
        / (eps2 * (1.0 + e12))
        - 1.0
}

/// Boundaries of the switching zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingZone {
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub l_minus: f64,
    pub l_plus: f64,
}

impl SwitchingZone {
    /// Half-width `rho_plus - eta`.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.rho_plus - self.rho_minus)
    }
}

/// Zone boundaries under the default convention.
pub fn switching_zone(params: &ModelParams) -> Result<SwitchingZone> {
    switching_zone_with(params, ZoneConvention::default())
}

/// Dimensionless half-width `u* = (rho_plus - eta)/eps` of the zone.
pub fn zone_scale(params: &ModelParams, convention: ZoneConvention) -> Result<f64> {
    params.require_smooth()?;
    let eps = params.epsilon;
    let amp = convention.amplitude(params);
    let g = |d: f64| curvature_root_normalized(params, amp, params.eta + d);
    let limit = 10.0 * eps * (1.0 + eps.ln().abs());
    let mut lo = 0.0;
    let mut hi = eps;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > limit {
            if g(limit) > 0.0 {
                return Err(Error::BracketFailure { limit });
            }
            hi = limit;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / eps)
}

pub fn switching_zone_with(params: &ModelParams, convention: ZoneConvention) -> Result<SwitchingZone> {
    params.validate()?;
    if params.epsilon == 0.0 {
        return Ok(SwitchingZone {
            rho_minus: params.eta,
            rho_plus: params.eta,
            l_minus: params.kappa1,
            l_plus: params.kappa2,
        });
    }
    let d = zone_scale(params, convention)? * params.epsilon;
    let rho_minus = params.eta - d;
    let rho_plus = params.eta + d;
    Ok(SwitchingZone {
        rho_minus,
        rho_plus,
        l_minus: exchange(params, rho_minus),
        l_plus: exchange(params, rho_plus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZoneTag {
    R1,
    S,
    R2,
    Boundary,
}

impl ZoneTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZoneTag::R1 => "R1",
            ZoneTag::S => "S",
            ZoneTag::R2 => "R2",
            ZoneTag::Boundary => "boundary",
        }
    }
}

pub const BOUNDARY_TOL: f64 = 1e-10;

/// Zone of a density value.
pub fn classify_rho(zone: &SwitchingZone, rho: f64) -> ZoneTag {
    if (rho - zone.rho_minus).abs() < BOUNDARY_TOL || (rho - zone.rho_plus).abs() < BOUNDARY_TOL {
        ZoneTag::Boundary
    } else if rho < zone.rho_minus {
        ZoneTag::R1
    } else if rho > zone.rho_plus {
        ZoneTag::R2
    } else {
        ZoneTag::S
    }
}

/// Zone of a state, by density thresholds.
pub fn classify_state(zone: &SwitchingZone, _params: &ModelParams, state: State) -> ZoneTag {
    classify_rho(zone, state.rho())
}

/// Zone of a state by comparing the exchange value against `L-`/`L+`.
/// Agrees with [`classify_state`] away from the boundary band because the
/// exchange function is monotone.
pub fn classify_by_exchange(zone: &SwitchingZone, params: &ModelParams, state: State) -> ZoneTag {
    let rho = state.rho();
    if (rho - zone.rho_minus).abs() < BOUNDARY_TOL || (rho - zone.rho_plus).abs() < BOUNDARY_TOL {
        return ZoneTag::Boundary;
    }
    let k = exchange(params, rho);
    if params.epsilon == 0.0 {
        return if rho < params.eta { ZoneTag::R1 } else { ZoneTag::R2 };
    }
    if k < zone.l_minus {
        ZoneTag::R1
    } else if k > zone.l_plus {
        ZoneTag::R2
    } else {
        ZoneTag::S
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn g_at_threshold() {
        let params = ModelParams::new(0.2, -0.17, 0.009);
        let eps2 = 0.009f64.powi(2);
        let d2 = 0.81;
        let g = curvature_root_function(&params, ZoneConvention::ExchangeGraph, -0.17).unwrap();
        assert_abs_diff_eq!(g, 16.0 * eps2 - 4.0 * d2 + 8.0 * d2, epsilon = 1e-12);
        let g = curvature_root_function(&params, ZoneConvention::SwitchProfile, -0.17).unwrap();
        assert_abs_diff_eq!(g, 16.0 * eps2 + 16.0, epsilon = 1e-12);
    }

    #[test]
    fn g_saturates() {
        let params = ModelParams::new(0.2, -0.17, 0.009);
        let g = curvature_root_function(&params, ZoneConvention::SwitchProfile, 10.0).unwrap();
        assert_eq!(g, -f64::MAX);
    }

    #[test]
    fn degenerate_zone() {
        let z = switching_zone(&ModelParams::new(0.2, -0.17, 0.0)).unwrap();
        assert_eq!(z.rho_minus, -0.17);
        assert_eq!(z.rho_plus, -0.17);
        assert_eq!(z.l_minus, 0.1);
        assert_eq!(z.l_plus, 1.0);
    }

    #[test]
    fn tags() {
        let params = ModelParams::new(0.2, -0.17, 0.009);
        let z = switching_zone(&params).unwrap();
        assert_eq!(classify_rho(&z, -0.17), ZoneTag::S);
        assert_eq!(classify_rho(&z, z.rho_minus - 0.1), ZoneTag::R1);
        assert_eq!(classify_rho(&z, z.rho_plus + 0.1), ZoneTag::R2);
        assert_eq!(classify_rho(&z, z.rho_plus), ZoneTag::Boundary);
    }

    #[test]
    fn normalized_matches_raw_sign() {
        let params = ModelParams::new(0.2, -0.17, 0.02);
        for i in 0..200 {
            let rho = -0.17 + (i as f64 - 100.0) * 0.002;
            for conv in [ZoneConvention::SwitchProfile, ZoneConvention::ExchangeGraph] {
                let raw = curvature_root_function(&params, conv, rho).unwrap();
                let nor = curvature_root_normalized(&params, conv.amplitude(&params), rho);
                assert_eq!(raw > 0.0, nor > 0.0, "rho = {rho}");
            }
        }
    }
}
