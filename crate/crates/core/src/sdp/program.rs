use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{AffExpr, MatExpr, VarId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Symmetric variables own only their upper triangle; `(r, c)` and `(c, r)`
    /// refer to the same scalar.
    pub symmetric: bool,
}

impl VarDecl {
    /// Number of independent scalars.
    pub fn scalar_count(&self) -> usize {
        if self.symmetric {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSquare {
    pub weight: f64,
    pub expr: AffExpr,
}

/// `Σ wₖ (eₖ)² + linear`, convex whenever every weight is nonnegative.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub squares: Vec<WeightedSquare>,
    pub linear: AffExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdConstraint {
    pub label: String,
    pub expr: MatExpr,
}

/// A minimization problem with affine equalities (`expr = 0`) and affine
/// PSD constraints (`expr ⪰ 0`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub variables: Vec<VarDecl>,
    pub objective: Objective,
    pub equalities: Vec<AffExpr>,
    pub psd_constraints: Vec<PsdConstraint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    UndeclaredVariable { var: usize, context: String },
    IndexOutOfRange { var: String, row: usize, col: usize, context: String },
    NonSquarePsd { label: String, rows: usize, cols: usize },
    AsymmetricPsd { label: String, row: usize, col: usize },
    NonSquareSymmetricVariable { name: String },
    DuplicateName { name: String },
    NegativeWeight { index: usize, weight: f64 },
    NonFinite { context: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UndeclaredVariable { var, context } => {
                write!(f, "{context}: reference to undeclared variable #{var}")
            }
            Diagnostic::IndexOutOfRange { var, row, col, context } => {
                write!(f, "{context}: index ({row}, {col}) out of range for variable `{var}`")
            }
            Diagnostic::NonSquarePsd { label, rows, cols } => {
                write!(f, "psd constraint `{label}` is {rows}x{cols}, not square")
            }
            Diagnostic::AsymmetricPsd { label, row, col } => {
                write!(f, "psd constraint `{label}` is not symmetric at ({row}, {col})")
            }
            Diagnostic::NonSquareSymmetricVariable { name } => {
                write!(f, "symmetric variable `{name}` is not square")
            }
            Diagnostic::DuplicateName { name } => write!(f, "duplicate variable name `{name}`"),
            Diagnostic::NegativeWeight { index, weight } => {
                write!(f, "objective square #{index} has negative weight {weight}")
            }
            Diagnostic::NonFinite { context } => write!(f, "{context}: non-finite coefficient"),
        }
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, rows: usize, cols: usize, symmetric: bool) -> VarId {
        self.variables.push(VarDecl {
            name: name.into(),
            rows,
            cols,
            symmetric,
        });
        VarId(self.variables.len() - 1)
    }

    /// Declares a matrix variable and returns it as an expression.
    pub fn matrix_variable(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> (VarId, MatExpr) {
        let id = self.add_variable(name, rows, cols, false);
        (id, MatExpr::variable(id, rows, cols))
    }

    pub fn symmetric_variable(&mut self, name: impl Into<String>, n: usize) -> (VarId, MatExpr) {
        let id = self.add_variable(name, n, n, true);
        (id, MatExpr::variable(id, n, n))
    }

    pub fn scalar_variable(&mut self, name: impl Into<String>) -> (VarId, AffExpr) {
        let id = self.add_variable(name, 1, 1, false);
        (id, AffExpr::var(id, 0, 0))
    }

    pub fn add_equality(&mut self, e: AffExpr) {
        self.equalities.push(e);
    }

    /// Adds `m[r, c] = 0` for every entry.
    pub fn add_matrix_equality(&mut self, m: &MatExpr) {
        self.equalities.extend(m.entries().iter().cloned());
    }

    pub fn add_psd(&mut self, label: impl Into<String>, expr: MatExpr) {
        self.psd_constraints.push(PsdConstraint {
            label: label.into(),
            expr,
        });
    }

    pub fn add_square(&mut self, weight: f64, expr: AffExpr) {
        self.objective.squares.push(WeightedSquare { weight, expr });
    }

    pub fn add_linear_objective(&mut self, e: &AffExpr) {
        self.objective.linear += e;
    }

    pub fn variable_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn scalar_count(&self) -> usize {
        self.variables.iter().map(VarDecl::scalar_count).sum()
    }

    /// Objective value at the given variable values (indexed by [`VarId`]).
    pub fn objective_at(&self, values: &[DMatrix<f64>]) -> f64 {
        let look = |v: VarId, r: usize, c: usize| values[v.0][(r, c)];
        let sq: f64 = self
            .objective
            .squares
            .iter()
            .map(|s| {
                let e = s.expr.eval(look);
                s.weight * e * e
            })
            .sum();
        sq + self.objective.linear.eval(look)
    }

    /// Reports structural problems; empty iff the program is well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                out.push(Diagnostic::DuplicateName { name: v.name.clone() });
            }
            if v.symmetric && v.rows != v.cols {
                out.push(Diagnostic::NonSquareSymmetricVariable { name: v.name.clone() });
            }
        }

        for (i, s) in self.objective.squares.iter().enumerate() {
            if !(s.weight >= 0.0) {
                out.push(Diagnostic::NegativeWeight {
                    index: i,
                    weight: s.weight,
                });
            }
            self.check_expr(&s.expr, &format!("objective square #{i}"), &mut out);
        }
        self.check_expr(&self.objective.linear, "objective linear part", &mut out);
        for (i, e) in self.equalities.iter().enumerate() {
            self.check_expr(e, &format!("equality #{i}"), &mut out);
        }
        for c in &self.psd_constraints {
            let (rows, cols) = c.expr.shape();
            let ctx = format!("psd constraint `{}`", c.label);
            for e in c.expr.entries() {
                self.check_expr(e, &ctx, &mut out);
            }
            if rows != cols {
                out.push(Diagnostic::NonSquarePsd {
                    label: c.label.clone(),
                    rows,
                    cols,
                });
                continue;
            }
            if let Some((r, col)) = self.first_asymmetry(&c.expr) {
                out.push(Diagnostic::AsymmetricPsd {
                    label: c.label.clone(),
                    row: r,
                    col,
                });
            }
        }
        out
    }

    fn check_expr(&self, e: &AffExpr, ctx: &str, out: &mut Vec<Diagnostic>) {
        if !e.constant.is_finite() || e.terms.iter().any(|t| !t.coef.is_finite()) {
            out.push(Diagnostic::NonFinite { context: ctx.to_string() });
        }
        for t in &e.terms {
            match self.variables.get(t.var.0) {
                None => out.push(Diagnostic::UndeclaredVariable {
                    var: t.var.0,
                    context: ctx.to_string(),
                }),
                Some(d) if t.row >= d.rows || t.col >= d.cols => out.push(Diagnostic::IndexOutOfRange {
                    var: d.name.clone(),
                    row: t.row,
                    col: t.col,
                    context: ctx.to_string(),
                }),
                _ => {}
            }
        }
    }

    /// Compares `(r, c)` and `(c, r)` after canonicalizing symmetric variable indices.
    fn first_asymmetry(&self, m: &MatExpr) -> Option<(usize, usize)> {
        let n = m.nrows();
        for r in 0..n {
            for c in (r + 1)..n {
                let a = self.canonical(m.get(r, c));
                let b = self.canonical(m.get(c, r));
                let scale = 1.0 + a.constant.abs().max(b.constant.abs());
                if (a.constant - b.constant).abs() > 1e-9 * scale {
                    return Some((r, c));
                }
                let mut diff = a.clone();
                diff.add_scaled(&b, -1.0);
                diff.compact();
                if diff.terms.iter().any(|t| t.coef.abs() > 1e-9 * scale) {
                    return Some((r, c));
                }
            }
        }
        None
    }

    pub(crate) fn canonical(&self, e: &AffExpr) -> AffExpr {
        let mut out = e.clone();
        for t in &mut out.terms {
            if let Some(d) = self.variables.get(t.var.0) {
                if d.symmetric && t.row > t.col {
                    std::mem::swap(&mut t.row, &mut t.col);
                }
            }
        }
        out.compact();
        out
    }

    /// Human-readable listing of variables and constraints for reproduction
    /// reports.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# conic program");
        let _ = writeln!(s, "[variables] count={} scalars={}", self.variables.len(), self.scalar_count());
        for (i, v) in self.variables.iter().enumerate() {
            let _ = writeln!(
                s,
                "  #{i} {} {}x{}{}",
                v.name,
                v.rows,
                v.cols,
                if v.symmetric { " symmetric" } else { "" }
            );
        }
        let _ = writeln!(s, "[objective] squares={}", self.objective.squares.len());
        for (i, sq) in self.objective.squares.iter().enumerate() {
            let _ = writeln!(s, "  sq#{i} w={:e} {}", sq.weight, self.fmt_expr(&sq.expr));
        }
        let _ = writeln!(s, "  linear {}", self.fmt_expr(&self.objective.linear));
        let _ = writeln!(s, "[equalities] count={}", self.equalities.len());
        for (i, e) in self.equalities.iter().enumerate() {
            let _ = writeln!(s, "  eq#{i} {} = 0", self.fmt_expr(e));
        }
        let _ = writeln!(s, "[psd] count={}", self.psd_constraints.len());
        for c in &self.psd_constraints {
            let n = c.expr.nrows();
            let _ = writeln!(s, "  psd `{}` {}x{}", c.label, n, c.expr.ncols());
            for r in 0..n {
                for col in r..c.expr.ncols() {
                    let e = c.expr.get(r, col);
                    if e.constant != 0.0 || !e.terms.is_empty() {
                        let _ = writeln!(s, "    ({r},{col}) {}", self.fmt_expr(e));
                    }
                }
            }
        }
        s
    }

    fn fmt_expr(&self, e: &AffExpr) -> String {
        let mut s = format!("{:e}", e.constant);
        for t in &e.terms {
            let name = self
                .variables
                .get(t.var.0)
                .map_or_else(|| format!("#{}", t.var.0), |d| d.name.clone());
            let _ = write!(s, " {:+e}*{}[{},{}]", t.coef, name, t.row, t.col);
        }
        s
    }
}
