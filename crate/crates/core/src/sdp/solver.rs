//! Infeasible-start primal-dual interior-point method for
//!
//! ```text
//! minimize   ½ yᵀH y + cᵀy
//! subject to A y = b,   C_j + Σᵢ yᵢ F_{ij} ⪰ 0   (j = 1..blocks)
//! ```
//!
//! Newton directions use the HKM scaling with a Mehrotra predictor-corrector.
//! The quadratic objective enters the Newton system directly, which is
//! equivalent to an epigraph lowering but keeps the cone dimension small.
//! Each PSD block is held as a list of sparse coefficient matrices so the
//! Schur complement `Mᵢⱼ = tr(Fᵢ S⁻¹ Fⱼ Z)` costs little beyond its size.
//!
//! Infeasibility is reported when the iterates approach a Farkas certificate
//! `Z ⪰ 0, F*(Z) + Aᵀν = 0, bᵀν − ⟨C, Z⟩ > 0`; runs that stall are classified
//! with a phase-I problem (`max t s.t. C + F(y) ⪰ tI`).

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::expr::VarId;
use super::program::ConicProgram;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, symmetrize, SpdFactor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative primal/dual residual tolerance.
    pub feas_tol: f64,
    /// Relative duality gap tolerance.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Threshold on the normalized Farkas residual.
    pub infeas_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            max_iter: 500,
            infeas_tol: 1e-8,
            step_fraction: 0.98,
        }
    }
}

impl SolverSettings {
    pub fn tight() -> Self {
        Self {
            feas_tol: 1e-9,
            gap_tol: 1e-10,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Inaccurate,
    Unbounded,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Inaccurate => "inaccurate",
            Status::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// Residuals measured on the original program at the returned point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max |equality|`.
    pub equality: f64,
    /// Smallest eigenvalue over all PSD constraint expressions
    /// (`+∞` when there are none).
    pub min_psd_eigenvalue: f64,
    /// Relative dual residual and duality gap of the final iterate.
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    /// Variable names and values in declaration order.
    pub values: Vec<(String, DMatrix<f64>)>,
    pub objective_value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Phase-I optimum when a stalled solve had to be classified.
    pub phase_one: Option<f64>,
}

impl Solution {
    pub fn value(&self, id: VarId) -> &DMatrix<f64> {
        &self.values[id.0].1
    }

    pub fn scalar(&self, id: VarId) -> f64 {
        self.values[id.0].1[(0, 0)]
    }

    pub fn by_name(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Seam for alternative conic backends.
pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram, settings: &SolverSettings) -> Result<Solution>;
}

/// The built-in dense interior-point backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl ConicSolver for InteriorPoint {
    fn solve(&self, program: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
        let diags = program.validate();
        if !diags.is_empty() {
            return Err(Error::Validation(diags));
        }
        let (status, y, iterations, phase_one, dual, gap) = match lower(program, settings) {
            Lowering::Infeasible(why) => {
                log::debug!("presolve: {why}");
                let y = DVector::zeros(program.scalar_count());
                (Status::Infeasible, y, 0, None, f64::NAN, f64::NAN)
            }
            Lowering::Ready(l) => {
                let run = ipm(&l, settings);
                let mut status = run.status;
                let mut phase_one = None;
                if status == Status::Inaccurate && !l.blocks.is_empty() {
                    let p1 = phase_one_problem(&l);
                    let r1 = ipm(&p1, settings);
                    if r1.status == Status::Optimal {
                        let t = r1.y[l.m];
                        phase_one = Some(t);
                        if t < -10.0 * settings.feas_tol {
                            status = Status::Infeasible;
                        }
                    }
                }
                (status, run.y, run.iterations, phase_one, run.dual, run.gap)
            }
        };

        let ordered = unpack(program, &y);
        let residuals = measure(program, &ordered, dual, gap);
        let mut status = status;
        if status == Status::Optimal
            && !(residuals.equality <= 1e-6 && residuals.min_psd_eigenvalue >= -1e-6)
        {
            status = Status::Inaccurate;
        }
        let objective_value = program.objective_at(&ordered);
        let values = program
            .variables
            .iter()
            .zip(ordered)
            .map(|(d, v)| (d.name.clone(), v))
            .collect();
        Ok(Solution {
            status,
            values,
            objective_value,
            residuals,
            iterations,
            phase_one,
        })
    }
}

/// Solves with the default backend.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
    InteriorPoint.solve(program, settings)
}

// ---------------------------------------------------------------------------
// lowering

struct Block {
    n: usize,
    c: DMatrix<f64>,
    /// `(scalar index, entries)`; entries list both `(r, c)` and `(c, r)`.
    vars: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

struct Lowered {
    m: usize,
    h: DMatrix<f64>,
    c: DVector<f64>,
    /// Orthonormal rows.
    a: DMatrix<f64>,
    b: DVector<f64>,
    y0: DVector<f64>,
    blocks: Vec<Block>,
}

enum Lowering {
    Ready(Lowered),
    Infeasible(String),
}

fn offsets(program: &ConicProgram) -> Vec<usize> {
    let mut off = Vec::with_capacity(program.variables.len());
    let mut acc = 0;
    for v in &program.variables {
        off.push(acc);
        acc += v.scalar_count();
    }
    off
}

fn scalar_index(program: &ConicProgram, off: &[usize], var: VarId, row: usize, col: usize) -> usize {
    let d = &program.variables[var.0];
    if d.symmetric {
        // packed upper triangle, row-wise
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        off[var.0] + r * d.rows - r * r.saturating_sub(1) / 2 + (c - r)
    } else {
        off[var.0] + row * d.cols + col
    }
}

fn lower_expr(program: &ConicProgram, off: &[usize], e: &super::expr::AffExpr) -> (f64, Vec<(usize, f64)>) {
    let mut terms: Vec<(usize, f64)> = e
        .terms
        .iter()
        .map(|t| (scalar_index(program, off, t.var, t.row, t.col), t.coef))
        .collect();
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (i, v) in terms {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    (e.constant, out)
}

fn lower(program: &ConicProgram, settings: &SolverSettings) -> Lowering {
    let off = offsets(program);
    let m = program.scalar_count();

    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut c = DVector::zeros(m);
    for sq in &program.objective.squares {
        let (beta, terms) = lower_expr(program, &off, &sq.expr);
        let w = sq.weight;
        for &(i, ai) in &terms {
            c[i] += 2.0 * w * beta * ai;
            for &(j, aj) in &terms {
                h[(i, j)] += 2.0 * w * ai * aj;
            }
        }
    }
    let (_, lin) = lower_expr(program, &off, &program.objective.linear);
    for (i, v) in lin {
        c[i] += v;
    }
    let obj_scale = h.amax().max(c.amax());
    if obj_scale > 0.0 {
        h /= obj_scale;
        c /= obj_scale;
    }

    // equalities
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for e in &program.equalities {
        let (beta, terms) = lower_expr(program, &off, e);
        if terms.is_empty() {
            if beta.abs() > settings.feas_tol * 10.0 {
                return Lowering::Infeasible(format!("constant equality {beta} = 0"));
            }
            continue;
        }
        rows.push((terms, -beta));
    }
    let (a, b, y0) = match reduce_equalities(&rows, m, settings.feas_tol) {
        Some(v) => v,
        None => return Lowering::Infeasible("inconsistent equalities".into()),
    };

    // PSD blocks
    let mut blocks = Vec::new();
    for con in &program.psd_constraints {
        let n = con.expr.nrows();
        let mut cm = DMatrix::zeros(n, n);
        let mut map: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for r in 0..n {
            for col in r..n {
                let mut e = con.expr.get(r, col).clone();
                if r != col {
                    e.add_scaled(con.expr.get(col, r), 1.0);
                    e.scale_mut(0.5);
                }
                let (k, terms) = lower_expr(program, &off, &e);
                cm[(r, col)] = k;
                cm[(col, r)] = k;
                for (i, v) in terms {
                    let ent = map.entry(i).or_default();
                    ent.push((r, col, v));
                    if r != col {
                        ent.push((col, r, v));
                    }
                }
            }
        }
        if map.is_empty() {
            let scale = 1.0 + cm.amax();
            if min_eigenvalue(&cm) < -settings.feas_tol * scale {
                return Lowering::Infeasible(format!("constant psd constraint `{}` is not PSD", con.label));
            }
            continue;
        }
        blocks.push(Block {
            n,
            c: cm,
            vars: map.into_iter().collect(),
        });
    }

    Lowering::Ready(Lowered {
        m,
        h,
        c,
        a,
        b,
        y0,
        blocks,
    })
}

/// Replaces `{a_k ᵀ y = b_k}` by an equivalent system with orthonormal rows and
/// returns a least-squares particular solution; `None` if inconsistent.
fn reduce_equalities(
    rows: &[(Vec<(usize, f64)>, f64)],
    m: usize,
    tol: f64,
) -> Option<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    if rows.is_empty() {
        return Some((DMatrix::zeros(0, m), DVector::zeros(0), DVector::zeros(m)));
    }
    let p = rows.len();
    let mut a = DMatrix::zeros(p, m);
    let mut b = DVector::zeros(p);
    for (k, (terms, rhs)) in rows.iter().enumerate() {
        for &(i, v) in terms {
            a[(k, i)] += v;
        }
        b[k] = *rhs;
    }
    // Thin SVD of Aᵀ (m × p, m ≥ p typically).
    let svd = a.transpose().svd(true, true);
    let u = svd.u.as_ref().expect("svd u"); // m × k
    let vt = svd.v_t.as_ref().expect("svd vt"); // k × p
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = 1e-10 * smax.max(1e-300) * (p.max(m) as f64);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    let r = keep.len();
    // Aᵀ = U Σ Vᵀ  ⇒  A = V Σ Uᵀ; rows of Uᵀ span the row space.
    let mut a_red = DMatrix::zeros(r, m);
    let mut b_red = DVector::zeros(r);
    let mut y0 = DVector::zeros(m);
    for (k, &i) in keep.iter().enumerate() {
        let s = svd.singular_values[i];
        let vi = vt.row(i); // length p
        let coeff = vi.dot(&b.transpose()) / s;
        b_red[k] = coeff;
        for j in 0..m {
            a_red[(k, j)] = u[(j, i)];
        }
        y0 += u.column(i) * coeff;
    }
    let resid = (&a * &y0 - &b).norm();
    if resid > 10.0 * tol * (1.0 + b.norm()) {
        return None;
    }
    Some((a_red, b_red, y0))
}

fn phase_one_problem(l: &Lowered) -> Lowered {
    let m = l.m;
    let t = m;
    let mut a = DMatrix::zeros(l.a.nrows(), m + 1);
    a.view_mut((0, 0), (l.a.nrows(), m)).copy_from(&l.a);
    let mut c = DVector::zeros(m + 1);
    c[t] = -1.0;
    let mut y0 = DVector::zeros(m + 1);
    y0.rows_mut(0, m).copy_from(&l.y0);
    let mut blocks: Vec<Block> = l
        .blocks
        .iter()
        .map(|b| {
            let mut vars = b.vars.clone();
            vars.push((t, (0..b.n).map(|r| (r, r, -1.0)).collect()));
            Block {
                n: b.n,
                c: b.c.clone(),
                vars,
            }
        })
        .collect();
    blocks.push(Block {
        n: 1,
        c: DMatrix::from_element(1, 1, 1.0),
        vars: vec![(t, vec![(0, 0, -1.0)])],
    });
    Lowered {
        m: m + 1,
        h: DMatrix::zeros(m + 1, m + 1),
        c,
        a,
        b: l.b.clone(),
        y0,
        blocks,
    }
}

fn unpack(program: &ConicProgram, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let off = offsets(program);
    program
        .variables
        .iter()
        .enumerate()
        .map(|(k, d)| {
            DMatrix::from_fn(d.rows, d.cols, |r, c| y[scalar_index(program, &off, VarId(k), r, c)])
        })
        .collect()
}

fn measure(program: &ConicProgram, values: &[DMatrix<f64>], dual: f64, gap: f64) -> Residuals {
    let look = |v: VarId, r: usize, c: usize| values[v.0][(r, c)];
    let equality = program
        .equalities
        .iter()
        .map(|e| e.eval(look).abs())
        .fold(0.0, f64::max);
    let min_psd_eigenvalue = program
        .psd_constraints
        .iter()
        .map(|c| min_eigenvalue(&symmetrize(&c.expr.eval(look))))
        .fold(f64::INFINITY, f64::min);
    Residuals {
        equality,
        min_psd_eigenvalue,
        dual,
        gap,
    }
}

// ---------------------------------------------------------------------------
// interior-point iterations

struct Run {
    status: Status,
    y: DVector<f64>,
    iterations: usize,
    dual: f64,
    gap: f64,
}

fn apply_op(l: &Lowered, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
    l.blocks
        .iter()
        .map(|b| {
            let mut out = DMatrix::zeros(b.n, b.n);
            for (i, ents) in &b.vars {
                let yi = y[*i];
                if yi != 0.0 {
                    for &(r, c, v) in ents {
                        out[(r, c)] += v * yi;
                    }
                }
            }
            out
        })
        .collect()
}

fn adjoint(l: &Lowered, x: &[DMatrix<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(l.m);
    for (b, xb) in l.blocks.iter().zip(x) {
        for (i, ents) in &b.vars {
            let mut s = 0.0;
            for &(r, c, v) in ents {
                s += v * xb[(r, c)];
            }
            out[*i] += s;
        }
    }
    out
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Largest `α` with `X + α D ⪰ 0` for `X ≻ 0`.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let linv = match l.clone().try_inverse() {
        Some(v) => v,
        None => return 0.0,
    };
    let t = symmetrize(&(&linv * d * linv.transpose()));
    let lmin = SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn spd_inverse(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(x.clone()).map(|c| symmetrize(&c.inverse()))
}

/// Accumulates the HKM Schur complement `tr(Fᵢ W Fⱼ Z)` into `k`.
fn add_schur(l: &Lowered, w: &[DMatrix<f64>], z: &[DMatrix<f64>], k: &mut [f64], m: usize) {
    for ((b, wb), zb) in l.blocks.iter().zip(w).zip(z) {
        let n = b.n;
        let mut t = DMatrix::<f64>::zeros(n, n);
        for (pi, (i, ents_i)) in b.vars.iter().enumerate() {
            t.fill(0.0);
            // T = W Fᵢ Z
            for &(r, c, v) in ents_i {
                let wc = wb.column(r);
                let zr = zb.row(c);
                for q in 0..n {
                    let s = v * zr[q];
                    if s != 0.0 {
                        let mut col = t.column_mut(q);
                        col.axpy(s, &wc, 1.0);
                    }
                }
            }
            for (j, ents_j) in &b.vars[pi..] {
                let mut s = 0.0;
                for &(r, c, v) in ents_j {
                    s += v * t[(c, r)];
                }
                k[i * m + j] += s;
                if i != j {
                    k[j * m + i] += s;
                }
            }
        }
    }
}

struct Newton {
    factor: SpdFactor,
    kinv_at: DMatrix<f64>,
    seq: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl Newton {
    fn build(l: &Lowered, w: &[DMatrix<f64>], z: &[DMatrix<f64>]) -> Option<Self> {
        let m = l.m;
        let mut k: Vec<f64> = l.h.as_slice().to_vec();
        add_schur(l, w, z, &mut k, m);
        let diag_max = (0..m).map(|i| k[i * m + i].abs()).fold(1e-300, f64::max);
        let mut reg = 1e-13 * diag_max.max(1.0);
        let mut factor = None;
        for _ in 0..8 {
            let mut kr = k.clone();
            for i in 0..m {
                kr[i * m + i] += reg;
            }
            if let Some(f) = SpdFactor::new(&kr, m) {
                factor = Some(f);
                break;
            }
            reg *= 100.0;
        }
        let factor = factor?;
        let r = l.a.nrows();
        let mut kinv_at = l.a.transpose();
        if r > 0 {
            factor.solve_in_place(kinv_at.as_mut_slice());
        }
        let seq = if r > 0 {
            let mut s = &l.a * &kinv_at;
            s = symmetrize(&s);
            let smax = s.amax().max(1e-300);
            for i in 0..r {
                s[(i, i)] += 1e-14 * smax;
            }
            Some(Cholesky::new(s)?)
        } else {
            None
        };
        Some(Self {
            factor,
            kinv_at,
            seq,
        })
    }

    /// Solves `(H+M)Δy − AᵀΔν = r1`, `AΔy = r2`.
    fn solve(&self, l: &Lowered, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut t = r1.clone();
        self.factor.solve_in_place(t.as_mut_slice());
        match &self.seq {
            None => (t, DVector::zeros(0)),
            Some(seq) => {
                let rhs = r2 - &l.a * &t;
                let dnu = seq.solve(&rhs);
                let dy = t + &self.kinv_at * &dnu;
                (dy, dnu)
            }
        }
    }
}

fn ipm(l: &Lowered, settings: &SolverSettings) -> Run {
    let m = l.m;
    let mut y = l.y0.clone();
    let mut nu = DVector::zeros(l.a.nrows());

    if l.blocks.is_empty() {
        return solve_equality_qp(l, settings);
    }

    let n_total: usize = l.blocks.iter().map(|b| b.n).sum();
    let norm_b = 1.0 + l.b.norm();
    let norm_c_mat = 1.0 + l.blocks.iter().map(|b| b.c.norm()).sum::<f64>();
    let norm_c = 1.0 + l.c.norm();

    // starting point
    let mut s: Vec<DMatrix<f64>> = Vec::new();
    let mut z: Vec<DMatrix<f64>> = Vec::new();
    let grad0 = &l.h * &y + &l.c;
    for b in &l.blocks {
        let n = b.n as f64;
        let fmax = b
            .vars
            .iter()
            .map(|(_, e)| e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let zeta = b
            .vars
            .iter()
            .map(|(i, e)| {
                let fn_ = e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
                (1.0 + grad0[*i].abs()) / (1.0 + fn_)
            })
            .fold(0.0, f64::max);
        let xi_s = 10f64.max(n.sqrt()).max(b.c.norm()).max(fmax);
        let xi_z = 10f64.max(n.sqrt()).max(n * zeta);
        s.push(DMatrix::identity(b.n, b.n) * xi_s);
        z.push(DMatrix::identity(b.n, b.n) * xi_z);
    }

    let mut status = Status::Inaccurate;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut last_dual = f64::NAN;
    let mut last_gap = f64::NAN;

    for it in 0..settings.max_iter {
        iterations = it;
        // residuals
        let fy = apply_op(l, &y);
        let rs: Vec<DMatrix<f64>> = l
            .blocks
            .iter()
            .zip(&fy)
            .zip(&s)
            .map(|((b, f), sb)| &b.c + f - sb)
            .collect();
        let rp = &l.a * &y - &l.b;
        let fz = adjoint(l, &z);
        let hy = &l.h * &y;
        let rd = &hy + &l.c - l.a.transpose() * &nu - &fz;
        let gap: f64 = s.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
        let mu = gap / n_total as f64;
        let pobj = 0.5 * y.dot(&hy) + l.c.dot(&y);

        let rs_norm = rs.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt();
        let pinf = (rp.norm() / norm_b).max(rs_norm / norm_c_mat);
        let dinf = rd.norm() / norm_c;
        let relgap = gap / (1.0 + pobj.abs());
        last_dual = dinf;
        last_gap = relgap;

        if !(pinf.is_finite() && dinf.is_finite() && gap.is_finite()) {
            break;
        }
        if pinf <= settings.feas_tol && dinf <= settings.feas_tol && relgap <= settings.gap_tol {
            status = Status::Optimal;
            break;
        }

        // Farkas certificate for an empty feasible set
        let c_z: f64 = l.blocks.iter().zip(&z).map(|(b, zb)| inner(&b.c, zb)).sum();
        let eta = l.b.dot(&nu) - c_z;
        if eta > 0.0 {
            let cert = &fz + l.a.transpose() * &nu;
            if cert.norm() / eta < settings.infeas_tol && pinf > settings.feas_tol {
                status = Status::Infeasible;
                break;
            }
        }
        // unbounded objective: y diverging along a recession direction
        if y.amax() > 1e10 * (1.0 + l.y0.amax()) {
            status = if pobj < 0.0 { Status::Unbounded } else { Status::Inaccurate };
            break;
        }

        let w: Option<Vec<DMatrix<f64>>> = s.iter().map(spd_inverse).collect();
        let Some(w) = w else { break };
        let Some(newton) = Newton::build(l, &w, &z) else {
            break;
        };

        let wrz: Vec<DMatrix<f64>> = w
            .iter()
            .zip(&rs)
            .zip(&z)
            .map(|((wb, r), zb)| wb * r * zb)
            .collect();
        let adj_wrz = adjoint(l, &wrz);
        let rhs2 = -&rp;

        let direction = |rc: &[DMatrix<f64>]| {
            let rhs1 = -&rd + adjoint(l, rc) - &adj_wrz;
            let (dy, dnu) = newton.solve(l, &rhs1, &rhs2);
            let fdy = apply_op(l, &dy);
            let ds: Vec<DMatrix<f64>> = fdy.iter().zip(&rs).map(|(f, r)| f + r).collect();
            let dz: Vec<DMatrix<f64>> = rc
                .iter()
                .zip(&w)
                .zip(&ds)
                .zip(&z)
                .map(|(((rcb, wb), dsb), zb)| rcb - symmetrize(&(wb * dsb * zb)))
                .collect();
            (dy, dnu, ds, dz)
        };
        let step_len = |ds: &[DMatrix<f64>], dz: &[DMatrix<f64>]| {
            let mut a = f64::INFINITY;
            for (sb, d) in s.iter().zip(ds) {
                a = a.min(max_step(sb, d));
            }
            for (zb, d) in z.iter().zip(dz) {
                a = a.min(max_step(zb, d));
            }
            a
        };

        // predictor
        let rc_aff: Vec<DMatrix<f64>> = z.iter().map(|zb| -zb).collect();
        let (_, _, ds_a, dz_a) = direction(&rc_aff);
        let a_aff = step_len(&ds_a, &dz_a).min(1.0);
        let gap_aff: f64 = s
            .iter()
            .zip(&z)
            .zip(ds_a.iter().zip(&dz_a))
            .map(|((sb, zb), (dsb, dzb))| inner(&(sb + dsb * a_aff), &(zb + dzb * a_aff)))
            .sum();
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Vec<DMatrix<f64>> = w
            .iter()
            .zip(&z)
            .zip(ds_a.iter().zip(&dz_a))
            .map(|((wb, zb), (dsb, dzb))| symmetrize(&(wb * (sigma * mu) - zb - wb * dsb * dzb)))
            .collect();
        let (dy, dnu, ds, dz) = direction(&rc);
        let amax = step_len(&ds, &dz);
        let alpha = (settings.step_fraction * amax).min(1.0);
        if !alpha.is_finite() || alpha < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
            continue;
        }
        stalls = 0;

        y += dy * alpha;
        nu += dnu * alpha;
        for (sb, d) in s.iter_mut().zip(&ds) {
            *sb = symmetrize(&(&*sb + d * alpha));
        }
        for (zb, d) in z.iter_mut().zip(&dz) {
            *zb = symmetrize(&(&*zb + d * alpha));
        }
    }

    let _ = m;
    Run {
        status,
        y,
        iterations: iterations + 1,
        dual: last_dual,
        gap: last_gap,
    }
}

/// Equality-constrained QP: one KKT solve.
fn solve_equality_qp(l: &Lowered, settings: &SolverSettings) -> Run {
    let m = l.m;
    let empty: Vec<DMatrix<f64>> = Vec::new();
    let Some(newton) = Newton::build(l, &empty, &empty) else {
        return Run {
            status: Status::Inaccurate,
            y: l.y0.clone(),
            iterations: 1,
            dual: f64::NAN,
            gap: f64::NAN,
        };
    };
    // Newton step from y0 is exact for a quadratic.
    let y0 = &l.y0;
    let r1 = -(&l.h * y0 + &l.c);
    let r2 = -(&l.a * y0 - &l.b);
    let (dy, dnu) = newton.solve(l, &r1, &r2);
    let y = y0 + dy;
    let rd = &l.h * &y + &l.c - l.a.transpose() * &dnu;
    let dinf = rd.norm() / (1.0 + l.c.norm());
    let status = if dinf <= settings.feas_tol.max(1e-9) {
        Status::Optimal
    } else {
        Status::Unbounded
    };
    let _ = m;
    Run {
        status,
        y,
        iterations: 1,
        dual: dinf,
        gap: 0.0,
    }
}
