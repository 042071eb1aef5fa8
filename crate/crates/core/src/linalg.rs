//! Banded LU with partial pivoting and bordered solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square banded matrix with `kl` sub- and `ku` super-diagonals. Storage
/// leaves room for the fill-in created by row interchanges.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: Vec::new(),
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl, "({r}, {c}) outside band");
        r * self.width + (c + self.kl - r)
    }

    /// Add to entry `(r, c)`, which must lie inside the declared band.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(c + self.kl >= r && c <= r + self.ku, "({r}, {c}) outside band");
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    /// In-place LU factorisation.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        self.pivots = vec![0; n];
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0 && best.is_finite()) {
                return Err(Error::Singular(format!("banded pivot {k} vanishes")));
            }
            self.pivots[k] = p;
            let cend = (k + self.ku + self.kl).min(n - 1);
            if p != k {
                for c in k..=cend {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / piv;
                self.data[ik] = l;
                if l != 0.0 {
                    for c in k + 1..=cend {
                        let kc = self.data[self.idx(k, c)];
                        let ic = self.idx(i, c);
                        self.data[ic] -= l * kc;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `A x = b` in place after [`Banded::factor`].
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "matrix not factored");
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + self.ku + self.kl).min(n - 1) {
                s -= self.data[self.idx(k, c)] * b[c];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }
}

/// Block system `[[A, B], [C, D]]` with banded `A` (`n x n`) and a dense
/// border of width `k`.
#[derive(Debug, Clone)]
pub struct BorderedBanded {
    pub a: Banded,
    /// `n x k`
    pub b: DMatrix<f64>,
    /// `k x n`
    pub c: DMatrix<f64>,
    /// `k x k`
    pub d: DMatrix<f64>,
}

/// Factored form of a [`BorderedBanded`] system, reusable for several
/// right-hand sides.
pub struct BorderedLu {
    a: Banded,
    ainv_b: DMatrix<f64>,
    c: DMatrix<f64>,
    schur: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BorderedBanded {
    pub fn new(n: usize, k: usize, kl: usize, ku: usize) -> Self {
        Self {
            a: Banded::zeros(n, kl, ku),
            b: DMatrix::zeros(n, k),
            c: DMatrix::zeros(k, n),
            d: DMatrix::zeros(k, k),
        }
    }

    pub fn factor(self) -> Result<BorderedLu> {
        let BorderedBanded { mut a, b, c, d } = self;
        a.factor()?;
        let mut ainv_b = b;
        for j in 0..ainv_b.ncols() {
            let mut col: Vec<f64> = ainv_b.column(j).iter().copied().collect();
            a.solve_in_place(&mut col);
            ainv_b.set_column(j, &DVector::from_vec(col));
        }
        let s = d - &c * &ainv_b;
        let schur = s.lu();
        if !schur.is_invertible() {
            return Err(Error::Singular("bordered Schur complement".into()));
        }
        Ok(BorderedLu { a, ainv_b, c, schur })
    }
}

impl BorderedLu {
    /// Solve for `(x1, x2)` given `(r1, r2)` with `r1` of length `n`.
    pub fn solve(&self, r1: &[f64], r2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut y = r1.to_vec();
        self.a.solve_in_place(&mut y);
        let yv = DVector::from_column_slice(&y);
        let rhs = DVector::from_column_slice(r2) - &self.c * &yv;
        let x2 = self
            .schur
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("bordered Schur complement".into()))?;
        let x1 = yv - &self.ainv_b * &x2;
        Ok((x1.as_slice().to_vec(), x2.as_slice().to_vec()))
    }
}

/// Dense solve with a singularity check.
pub fn dense_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.lu();
    let x = lu.solve(b).ok_or_else(|| Error::Singular("dense system".into()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("dense system".into()))
    }
}
