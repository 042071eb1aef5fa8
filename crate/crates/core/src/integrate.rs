//! Dormand–Prince 5(4) integrator with its fourth-order continuous
//! extension, plus root location on the dense output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

pub type Vec2 = [f64; 2];

#[inline]
fn axpy(y: Vec2, terms: &[(f64, &Vec2)], h: f64) -> Vec2 {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integration tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-11 }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v <= 1e-2;
        if ok(rel) && ok(abs) {
            Ok(Self { rel, abs })
        } else {
            Err(Error::ToleranceDomain { rel_tol: rel, abs_tol: abs })
        }
    }
}

/// One accepted step with its interpolant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    rcont: [Vec2; 5],
}

impl DenseStep {
    pub fn y0(&self) -> Vec2 {
        self.rcont[0]
    }

    pub fn y1(&self) -> Vec2 {
        [self.rcont[0][0] + self.rcont[1][0], self.rcont[0][1] + self.rcont[1][1]]
    }

    /// Interpolated state at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> Vec2 {
        let h = self.t1 - self.t0;
        let th = if h > 0.0 { (t - self.t0) / h } else { 0.0 };
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

/// Adaptive stepper for a planar, possibly time-dependent field.
pub struct Dopri5<F> {
    f: F,
    tol: Tolerances,
    t: f64,
    y: Vec2,
    k1: Vec2,
    h: f64,
    pub steps: usize,
    pub rejections: usize,
}

impl<F: Fn(f64, Vec2) -> Vec2> Dopri5<F> {
    pub fn new(f: F, t0: f64, y0: Vec2, tol: Tolerances) -> Self {
        let k1 = f(t0, y0);
        let mut s = Self {
            f,
            tol,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            steps: 0,
            rejections: 0,
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> Vec2 {
        self.y
    }

    /// Current derivative (first stage of the next step).
    pub fn dy(&self) -> Vec2 {
        self.k1
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.abs + self.tol.rel * a.abs().max(b.abs())
    }

    fn initial_step(&self) -> f64 {
        let sk = [self.scale(self.y[0], 0.0), self.scale(self.y[1], 0.0)];
        let norm = |v: &Vec2| (((v[0] / sk[0]).powi(2) + (v[1] / sk[1]).powi(2)) / 2.0).sqrt();
        let d0 = norm(&self.y);
        let d1 = norm(&self.k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = axpy(self.y, &[(1.0, &self.k1)], h0);
        let f1 = (self.f)(self.t + h0, y1);
        let diff = [f1[0] - self.k1[0], f1[1] - self.k1[1]];
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (1e-6f64).max(h0 * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// Take one accepted step, never passing `t_max`.
    pub fn step(&mut self, t_max: f64) -> Result<DenseStep> {
        let f = &self.f;
        let (t, y, k1) = (self.t, self.y, self.k1);
        let h_prop = self.h;
        let mut h = h_prop.min(t_max - t);
        let clamped = h < h_prop;
        let mut rejected = false;
        loop {
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t });
            }
            let k2 = f(t + C2 * h, axpy(y, &[(A21, &k1)], h));
            let k3 = f(t + C3 * h, axpy(y, &[(A31, &k1), (A32, &k2)], h));
            let k4 = f(t + C4 * h, axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
            let k5 = f(
                t + C5 * h,
                axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
            );
            let y6 = axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h);
            let k6 = f(t + h, y6);
            let y1 = axpy(y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
            let k7 = f(t + h, y1);

            let mut err = 0.0;
            for i in 0..2 {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.tol.abs + self.tol.rel * y[i].abs().max(y1[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / 2.0).sqrt();

            if err <= 1.0 && err.is_finite() {
                let mut fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
                fac = fac.clamp(0.2, 10.0);
                if rejected {
                    fac = fac.min(1.0);
                }
                let mut rcont = [[0.0; 2]; 5];
                for i in 0..2 {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let t1 = if (t_max - (t + h)).abs() <= 1e-14 * t_max.abs().max(1.0) {
                    t_max
                } else {
                    t + h
                };
                self.t = t1;
                self.y = y1;
                self.k1 = k7;
                // A step cut short by `t_max` must not shrink the next one.
                self.h = if clamped && !rejected { h_prop.max(h * fac) } else { h * fac };
                self.steps += 1;
                return Ok(DenseStep { t0: t, t1, rcont });
            }
            rejected = true;
            self.rejections += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            self.h = h;
        }
    }

    /// Integrate to `t_end` discarding intermediate output.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}

/// Root of `g` on `[a, b]` given opposite signs at the ends, by a guarded
/// Illinois iteration (regula falsi with bisection fallback).
pub fn find_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64, tol: f64) -> f64 {
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        let width = b - a;
        if !(c > a + 0.01 * width && c < b - 0.01 * width) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Sign changes of a scalar function of the interpolated state within one
/// step. The step is subdivided so a pair of crossings inside a single step
/// is not missed.
pub fn step_roots<G: Fn(f64, Vec2) -> f64>(step: &DenseStep, g: G, tol: f64) -> Vec<(f64, f64)> {
    const SUB: usize = 4;
    let mut out = Vec::new();
    let h = step.t1 - step.t0;
    if h <= 0.0 {
        return out;
    }
    let at = |t: f64| g(t, step.eval(t));
    let mut ta = step.t0;
    let mut ga = g(step.t0, step.y0());
    for i in 1..=SUB {
        let tb = if i == SUB { step.t1 } else { step.t0 + h * i as f64 / SUB as f64 };
        let gb = if i == SUB { g(step.t1, step.y1()) } else { at(tb) };
        if ga != 0.0 && (gb == 0.0 || (ga < 0.0) != (gb < 0.0)) {
            let t = find_root(at, ta, tb, ga, gb, tol);
            out.push((t, gb - ga));
        }
        ta = tb;
        ga = gb;
    }
    out
}
