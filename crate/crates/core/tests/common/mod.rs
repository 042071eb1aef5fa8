//! Reference computations that share no code with the library: finite
//! differences, brute-force Newton, direct curvature maximisation, fixed-step
//! Runge-Kutta and plane geometry.

#![allow(dead_code)]

use welander::continuation::{hopf_curve, CurveSettings, ParamCurve, Window};
use welander::{ModelParams, State};

/// The model written out independently of the library.
pub fn field(p: &ModelParams, s: [f64; 2]) -> [f64; 2] {
    let k = if p.epsilon > 0.0 {
        p.kappa1 + 0.5 * (p.kappa2 - p.kappa1) * (1.0 + ((s[1] - s[0] - p.eta) / p.epsilon).tanh())
    } else if s[1] - s[0] < p.eta {
        p.kappa1
    } else {
        p.kappa2
    };
    [1.0 - s[0] - k * s[0], p.mu - k * s[1]]
}

pub fn frozen_field(p: &ModelParams, kappa: f64, s: [f64; 2]) -> [f64; 2] {
    [1.0 - s[0] - kappa * s[0], p.mu - kappa * s[1]]
}

/// Central differences of [`field`].
pub fn fd_jacobian(p: &ModelParams, s: State, h: f64) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let mut a = s.to_array();
        let mut b = s.to_array();
        a[c] += h;
        b[c] -= h;
        let (fa, fb) = (field(p, a), field(p, b));
        for r in 0..2 {
            j[r][c] = (fa[r] - fb[r]) / (2.0 * h);
        }
    }
    j
}

/// Damped Newton from every node of a 50 x 50 seed grid on
/// `[0, 1.2] x [0, 4]`; distinct converged roots sorted by density.
pub fn newton_equilibria(p: &ModelParams) -> Vec<State> {
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let mut roots: Vec<State> = Vec::new();
    for i in 0..50 {
        for k in 0..50 {
            let mut u = [1.2 * i as f64 / 49.0, 4.0 * k as f64 / 49.0];
            let mut converged = false;
            for _ in 0..100 {
                let f = field(p, u);
                let r = norm(f);
                if r < 1e-14 {
                    converged = true;
                    break;
                }
                let j = fd_jacobian(p, State::from_array(u), 1e-8);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det == 0.0 || !det.is_finite() {
                    break;
                }
                let d = [
                    (j[1][1] * f[0] - j[0][1] * f[1]) / det,
                    (j[0][0] * f[1] - j[1][0] * f[0]) / det,
                ];
                let mut lambda = 1.0;
                loop {
                    let v = [u[0] - lambda * d[0], u[1] - lambda * d[1]];
                    if norm(field(p, v)) < r || lambda < 1e-10 {
                        u = v;
                        break;
                    }
                    lambda *= 0.5;
                }
                if lambda < 1e-10 {
                    break;
                }
            }
            if converged || norm(field(p, u)) < 1e-12 {
                let s = State::from_array(u);
                if !roots.iter().any(|r| r.dist(&s) < 1e-7) {
                    roots.push(s);
                }
            }
        }
    }
    roots.sort_by(|a, b| a.rho().total_cmp(&b.rho()));
    roots
}

/// Derivatives of `A tanh((rho - eta)/eps)` up to third order.
fn tanh_derivs(a: f64, eps: f64, u: f64) -> (f64, f64, f64) {
    let t = u.tanh();
    let s = 1.0 - t * t;
    let f1 = a / eps * s;
    let f2 = -2.0 * a / (eps * eps) * s * t;
    let f3 = 2.0 * a / (eps * eps * eps) * s * (3.0 * t * t - 1.0);
    (f1, f2, f3)
}

/// Curvature of the graph of `A tanh((rho - eta)/eps)` at `u = (rho - eta)/eps`.
pub fn graph_curvature(a: f64, eps: f64, u: f64) -> f64 {
    let (f1, f2, _) = tanh_derivs(a, eps, u);
    f2.abs() / (1.0 + f1 * f1).powf(1.5)
}

/// Sign of the derivative of the curvature, from `f'''(1 + f'^2) - 3 f' f''^2`.
pub fn curvature_slope_sign(a: f64, eps: f64, u: f64) -> f64 {
    let (f1, f2, f3) = tanh_derivs(a, eps, u);
    f2.signum() * (f3 * (1.0 + f1 * f1) - 3.0 * f1 * f2 * f2)
}

/// Curvature maxima of the amplitude-`a` switch graph on either side of
/// `eta`: a grid search for the peak, golden-section refinement, then
/// bisection on the sign of the curvature slope.
pub fn curvature_boundaries(p: &ModelParams, a: f64) -> (f64, f64) {
    let eps = p.epsilon;
    let side = |sign: f64| {
        let n = 20000;
        let umax = 40.0;
        let at = |i: usize| sign * umax * i as f64 / n as f64;
        let best = (1..n)
            .max_by(|&i, &j| graph_curvature(a, eps, at(i)).total_cmp(&graph_curvature(a, eps, at(j))))
            .unwrap();
        let (mut lo, mut hi) = (at(best - 1), at(best + 1));
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if graph_curvature(a, eps, c) > graph_curvature(a, eps, d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        let (mut lo, mut hi) = (lo - 1e-3, hi + 1e-3);
        let slo = curvature_slope_sign(a, eps, lo);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if (curvature_slope_sign(a, eps, m) > 0.0) == (slo > 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        p.eta + eps * 0.5 * (lo + hi)
    };
    (side(-1.0), side(1.0))
}

/// Classical fourth-order Runge-Kutta with a fixed step; returns the state
/// at every multiple of `every`.
pub fn rk4<F: Fn([f64; 2]) -> [f64; 2]>(f: F, y0: [f64; 2], h: f64, t_end: f64, every: f64) -> Vec<(f64, [f64; 2])> {
    let steps = (t_end / h).round() as usize;
    let stride = (every / h).round() as usize;
    let mut y = y0;
    let mut out = vec![(0.0, y)];
    let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    for n in 1..=steps {
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * h));
        let k3 = f(add(y, k2, 0.5 * h));
        let k4 = f(add(y, k3, h));
        y = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if n % stride == 0 {
            out.push((n as f64 * h, y));
        }
    }
    out
}

pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

pub fn polyline_distance(p: (f64, f64), line: &[(f64, f64)]) -> f64 {
    if line.len() == 1 {
        return (p.0 - line[0].0).hypot(p.1 - line[0].1);
    }
    line.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two closed sampled curves, each
/// vertex measured against the other's polygon. The polygons' chord error
/// adds to the result, so both should be finely sampled.
pub fn hausdorff(a: &[State], b: &[State]) -> f64 {
    let close = |v: &[State]| {
        let mut l: Vec<(f64, f64)> = v.iter().map(|s| (s.x, s.y)).collect();
        l.push(l[0]);
        l
    };
    let (la, lb) = (close(a), close(b));
    let one = |from: &[(f64, f64)], to: &[(f64, f64)]| {
        from.iter().map(|&p| polyline_distance(p, to)).fold(0.0, f64::max)
    };
    one(&la, &lb).max(one(&lb, &la))
}

/// Even-odd point-in-polygon test.
pub fn inside(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = poly.len();
    let mut c = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1) {
            c = !c;
        }
    }
    c
}

pub fn nearest_index(line: &[(f64, f64)], p: (f64, f64)) -> usize {
    let d = |q: &(f64, f64)| (q.0 - p.0).hypot(q.1 - p.1);
    (0..line.len()).min_by(|&i, &j| d(&line[i]).total_cmp(&d(&line[j]))).unwrap()
}

/// Close an open curve whose ends both sit on `host` with the stretch of
/// `host` between them.
pub fn close_along(curve: &[(f64, f64)], host: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let i = nearest_index(host, *curve.last().unwrap());
    let j = nearest_index(host, curve[0]);
    let mut poly = curve.to_vec();
    if i <= j {
        poly.extend_from_slice(&host[i..=j]);
    } else {
        poly.extend(host[j..=i].iter().rev());
    }
    poly
}

/// Bounding box of the Hopf curve, widened by `padding` of its extent.
pub fn hopf_box(p: &ModelParams, padding: f64) -> ((f64, f64), (f64, f64)) {
    let wide = CurveSettings {
        window: Window {
            mu: (-0.5, 2.0),
            eta: (-3.0, 2.0),
        },
        ..CurveSettings::default()
    };
    let h: ParamCurve = hopf_curve(p, &wide).expect("Hopf curve");
    let pad = |v: Vec<f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d = padding * (hi - lo);
        (lo - d, hi + d)
    };
    (
        pad(h.points.iter().map(|q| q.mu).collect()),
        pad(h.points.iter().map(|q| q.eta).collect()),
    )
}

/// The curves that organise the oscillation atlas at one `epsilon`.
pub struct Atlas {
    pub hopf: Vec<(f64, f64)>,
    pub fold: Vec<(f64, f64)>,
    pub plus: Vec<(f64, f64)>,
    pub minus: Vec<(f64, f64)>,
    /// Polygon enclosing the oscillation region.
    pub periodic: Vec<(f64, f64)>,
    /// `plus` and `minus` closed along the Hopf curve.
    pub plus_side: Vec<(f64, f64)>,
    pub minus_side: Vec<(f64, f64)>,
}

impl Atlas {
    /// Continue H, S and both tangency curves from `(0.2, eta)`. The
    /// oscillation region is bounded by H from the lowest junction N with S
    /// up to the Bogdanov-Takens end of H, and by S from there back to N.
    pub fn new(p: &ModelParams, window: Window) -> Self {
        use welander::continuation::{fold_curve, noncentral_points};
        use welander::dynamics::AttractorOptions;
        use welander::periodic::{find_tangency, tangency_curve, Anchor, Direction, TangencyCurveOptions, TangencyOptions};
        let settings = CurveSettings {
            window,
            ..CurveSettings::default()
        };
        let h = hopf_curve(p, &settings).expect("Hopf curve");
        let s = fold_curve(p, &settings).expect("fold curve");
        let n = noncentral_points(p, &h, &s)
            .into_iter()
            .min_by(|a, b| a.eta.total_cmp(&b.eta))
            .expect("junction of H and S");
        let (hopf, fold) = (h.polyline(), s.polyline());
        let top = *hopf.last().unwrap();
        let i = nearest_index(&hopf, (n.mu, n.eta));
        let mut periodic = hopf[i..].to_vec();
        let (a, b) = (nearest_index(&fold, top), nearest_index(&fold, (n.mu, n.eta)));
        if a <= b {
            periodic.extend_from_slice(&fold[a..=b]);
        } else {
            periodic.extend(fold[b..=a].iter().rev());
        }
        let tangency = |anchor, direction| {
            let tp = find_tangency(p, anchor, direction, &AttractorOptions::default(), &TangencyOptions::default()).expect("tangency");
            tangency_curve(&tp, &TangencyCurveOptions { window, ..TangencyCurveOptions::default() })
                .expect("tangency curve")
                .polyline()
        };
        let plus = tangency(Anchor::Plus, Direction::Decreasing);
        let minus = tangency(Anchor::Minus, Direction::Increasing);
        Self {
            plus_side: close_along(&plus, &hopf),
            minus_side: close_along(&minus, &hopf),
            hopf,
            fold,
            plus,
            minus,
            periodic,
        }
    }

    /// Distance from `(mu, eta)` to the nearest curve in units of the grid
    /// cell `(dmu, deta)`.
    pub fn cell_distance(&self, at: (f64, f64), cell: (f64, f64)) -> f64 {
        let scale = |l: &[(f64, f64)]| -> Vec<(f64, f64)> { l.iter().map(|q| (q.0 / cell.0, q.1 / cell.1)).collect() };
        let q = (at.0 / cell.0, at.1 / cell.1);
        [&self.hopf, &self.fold, &self.plus, &self.minus]
            .iter()
            .map(|l| polyline_distance(q, &scale(l)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Predicted class as `(periodic, coupling, decoupling)`. The side of
    /// each tangency curve is calibrated on `w`, a point known to carry a
    /// Welander oscillation.
    pub fn predict(&self, at: (f64, f64), w: (f64, f64)) -> (bool, bool, bool) {
        let periodic = inside(&self.periodic, at);
        let plus = inside(&self.plus_side, at) == inside(&self.plus_side, w);
        let minus = inside(&self.minus_side, at) == inside(&self.minus_side, w);
        (periodic, periodic && plus, periodic && minus)
    }
}
