//! Affine scalar and matrix expressions over program variables.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Index of a declared variable inside a [`ConicProgram`](super::ConicProgram).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// `coef · var[row, col]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub var: VarId,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

/// `constant + Σ terms`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffExpr {
    pub constant: f64,
    pub terms: Vec<Term>,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(var: VarId, row: usize, col: usize) -> Self {
        Self {
            constant: 0.0,
            terms: vec![Term {
                var,
                row,
                col,
                coef: 1.0,
            }],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }

    pub fn scale_mut(&mut self, a: f64) {
        self.constant *= a;
        for t in &mut self.terms {
            t.coef *= a;
        }
    }

    /// `self += a · other`.
    pub fn add_scaled(&mut self, other: &AffExpr, a: f64) {
        if a == 0.0 {
            return;
        }
        self.constant += a * other.constant;
        self.terms.extend(other.terms.iter().map(|t| Term {
            coef: t.coef * a,
            ..*t
        }));
    }

    /// Merges duplicate `(var, row, col)` terms and drops zeros.
    pub fn compact(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|t| t.coef != 0.0);
            return;
        }
        self.terms
            .sort_by(|a, b| (a.var, a.row, a.col).cmp(&(b.var, b.row, b.col)));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if (last.var, last.row, last.col) == (t.var, t.row, t.col) => {
                    last.coef += t.coef
                }
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coef != 0.0);
        self.terms = out;
    }

    /// Evaluates with `lookup(var, row, col)` supplying variable entries.
    pub fn eval(&self, lookup: impl Fn(VarId, usize, usize) -> f64) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.coef * lookup(t.var, t.row, t.col))
                .sum::<f64>()
    }
}

impl From<f64> for AffExpr {
    fn from(c: f64) -> Self {
        AffExpr::constant(c)
    }
}

impl AddAssign<&AffExpr> for AffExpr {
    fn add_assign(&mut self, rhs: &AffExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Add for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: AffExpr) -> AffExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: AffExpr) -> AffExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Neg for AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for AffExpr {
    type Output = AffExpr;
    fn mul(self, a: f64) -> AffExpr {
        self.scaled(a)
    }
}

/// Dense matrix of affine expressions, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    entries: Vec<AffExpr>,
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![AffExpr::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> AffExpr) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| AffExpr::constant(m[(r, c)]))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(&DMatrix::identity(n, n))
    }

    /// Every entry of a declared `rows × cols` variable.
    pub fn variable(var: VarId, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| AffExpr::var(var, r, c))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> &AffExpr {
        &self.entries[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut AffExpr {
        &mut self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, e: AffExpr) {
        self.entries[r * self.cols + c] = e;
    }

    pub fn entries(&self) -> &[AffExpr] {
        &self.entries
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(AffExpr::is_constant)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.scaled(a)).collect(),
        }
    }

    /// Entrywise `self · s` where `s` is a scalar expression and `self` is constant,
    /// or `s` is constant. Panics if both carry variables.
    pub fn times_scalar(&self, s: &AffExpr) -> Self {
        if s.is_constant() {
            return self.scaled(s.constant);
        }
        assert!(self.is_constant(), "product of two non-constant expressions");
        Self::from_fn(self.rows, self.cols, |r, c| {
            let mut e = s.scaled(self.get(r, c).constant);
            e.compact();
            e
        })
    }

    pub fn add(&self, other: &MatExpr) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &MatExpr) -> Self {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &MatExpr, a: f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "matrix expression shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(x, y)| {
                    let mut e = x.clone();
                    e.add_scaled(y, a);
                    e.compact();
                    e
                })
                .collect(),
        }
    }

    /// `m · self` for a constant matrix `m`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), self.rows, "left_mul shape mismatch");
        Self::from_fn(m.nrows(), self.cols, |r, c| {
            let mut e = AffExpr::zero();
            for k in 0..self.rows {
                e.add_scaled(self.get(k, c), m[(r, k)]);
            }
            e.compact();
            e
        })
    }

    /// `self · m` for a constant matrix `m`.
    pub fn right_mul(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), self.cols, "right_mul shape mismatch");
        Self::from_fn(self.rows, m.ncols(), |r, c| {
            let mut e = AffExpr::zero();
            for k in 0..self.cols {
                e.add_scaled(self.get(r, k), m[(k, c)]);
            }
            e.compact();
            e
        })
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &MatExpr) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            for c in 0..block.cols {
                self.set(r0 + r, c0 + c, block.get(r, c).clone());
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c).clone())
    }

    /// Assembles a block matrix; `None` blocks are zero. Every row of blocks
    /// must agree in height and every column in width.
    pub fn from_blocks(blocks: &[Vec<Option<&MatExpr>>]) -> Self {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (i, row) in blocks.iter().enumerate() {
            assert_eq!(row.len(), nbc, "ragged block layout");
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    for (slot, v) in [(&mut heights[i], b.rows), (&mut widths[j], b.cols)] {
                        match slot {
                            Some(prev) => assert_eq!(*prev, v, "inconsistent block sizes"),
                            None => *slot = Some(v),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights.into_iter().map(|h| h.expect("empty block row")).collect();
        let widths: Vec<usize> = widths.into_iter().map(|w| w.expect("empty block column")).collect();
        let mut out = MatExpr::zeros(heights.iter().sum(), widths.iter().sum());
        let mut r0 = 0;
        for (i, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    out.set_block(r0, c0, b);
                }
                c0 += widths[j];
            }
            r0 += heights[i];
        }
        out
    }

    pub fn eval(&self, lookup: impl Fn(VarId, usize, usize) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).eval(&lookup))
    }

    /// Constant part only.
    pub fn constant_part(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).constant)
    }
}
