//! FIR system responses and the constraint blocks built from them: the
//! achievability subspace, the H2 objective, H∞ certificates, the robust
//! stability LMI and the propagated/linearized uncertainty matrices.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::lin_sys::CostWeights;
use crate::linalg::{psd_sqrt, symmetrize};
use crate::sdp::{self, AffExpr, ConicProgram, MatExpr, Solution, SolverSettings, Status};

/// Taps `Φx(k)`, `Φu(k)` for `k = 1..F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirPair {
    pub phi_x: Vec<DMatrix<f64>>,
    pub phi_u: Vec<DMatrix<f64>>,
}

impl FirPair {
    pub fn new(phi_x: Vec<DMatrix<f64>>, phi_u: Vec<DMatrix<f64>>) -> Result<Self> {
        if phi_x.is_empty() {
            return Err(Error::Contract("FIR length must be at least 1".into()));
        }
        ensure_dims(phi_x.len() == phi_u.len(), || {
            format!("{} state taps but {} input taps", phi_x.len(), phi_u.len())
        })?;
        let n_x = phi_x[0].nrows();
        let n_u = phi_u[0].nrows();
        for (k, (x, u)) in phi_x.iter().zip(&phi_u).enumerate() {
            ensure_dims(x.shape() == (n_x, n_x), || format!("Phi_x({}) is {:?}", k + 1, x.shape()))?;
            ensure_dims(u.shape() == (n_u, n_x), || format!("Phi_u({}) is {:?}", k + 1, u.shape()))?;
        }
        Ok(Self { phi_x, phi_u })
    }

    pub fn horizon(&self) -> usize {
        self.phi_x.len()
    }

    pub fn n_x(&self) -> usize {
        self.phi_x[0].nrows()
    }

    pub fn n_u(&self) -> usize {
        self.phi_u[0].nrows()
    }

    pub fn stack(&self) -> PhiStack {
        PhiStack::from_fir(self)
    }
}

/// `Φ̄` with row block `k` equal to `[Φx(k)ᵀ, Φu(k)ᵀ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiStack {
    matrix: DMatrix<f64>,
    n_x: usize,
    n_u: usize,
}

impl PhiStack {
    pub fn from_fir(phi: &FirPair) -> Self {
        let (n_x, n_u, f) = (phi.n_x(), phi.n_u(), phi.horizon());
        let mut m = DMatrix::zeros(n_x * f, n_x + n_u);
        for k in 0..f {
            m.view_mut((k * n_x, 0), (n_x, n_x)).copy_from(&phi.phi_x[k].transpose());
            m.view_mut((k * n_x, n_x), (n_x, n_u)).copy_from(&phi.phi_u[k].transpose());
        }
        Self { matrix: m, n_x, n_u }
    }

    pub fn from_matrix(matrix: DMatrix<f64>, n_x: usize, n_u: usize) -> Result<Self> {
        ensure_dims(
            n_x > 0 && matrix.ncols() == n_x + n_u && matrix.nrows() % n_x == 0 && matrix.nrows() > 0,
            || format!("stack of shape {:?} for n_x = {n_x}, n_u = {n_u}", matrix.shape()),
        )?;
        Ok(Self { matrix, n_x, n_u })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn horizon(&self) -> usize {
        self.matrix.nrows() / self.n_x
    }

    pub fn to_fir(&self) -> FirPair {
        let (n_x, n_u) = (self.n_x, self.n_u);
        let mut phi_x = Vec::new();
        let mut phi_u = Vec::new();
        for k in 0..self.horizon() {
            phi_x.push(self.matrix.view((k * n_x, 0), (n_x, n_x)).transpose());
            phi_u.push(self.matrix.view((k * n_x, n_x), (n_x, n_u)).transpose());
        }
        FirPair { phi_x, phi_u }
    }
}

/// FIR taps as affine expressions over program variables.
#[derive(Clone, Debug)]
pub struct FirExpr {
    pub phi_x: Vec<MatExpr>,
    pub phi_u: Vec<MatExpr>,
}

impl FirExpr {
    /// Independent matrix variables for every tap.
    pub fn variables(prog: &mut ConicProgram, name: &str, n_x: usize, n_u: usize, f: usize) -> Self {
        let mut phi_x = Vec::with_capacity(f);
        let mut phi_u = Vec::with_capacity(f);
        for k in 1..=f {
            phi_x.push(prog.matrix_variable(format!("{name}_x{k}"), n_x, n_x).1);
            phi_u.push(prog.matrix_variable(format!("{name}_u{k}"), n_u, n_x).1);
        }
        Self { phi_x, phi_u }
    }

    pub fn horizon(&self) -> usize {
        self.phi_x.len()
    }

    pub fn stack(&self) -> MatExpr {
        let n_x = self.phi_x[0].nrows();
        let n_u = self.phi_u[0].nrows();
        let f = self.horizon();
        let mut m = MatExpr::zeros(n_x * f, n_x + n_u);
        for k in 0..f {
            m.set_block(k * n_x, 0, &self.phi_x[k].transpose());
            m.set_block(k * n_x, n_x, &self.phi_u[k].transpose());
        }
        m
    }

    pub fn eval(&self, sol: &Solution) -> FirPair {
        let look = |v: sdp::VarId, r: usize, c: usize| sol.value(v)[(r, c)];
        FirPair {
            phi_x: self.phi_x.iter().map(|e| e.eval(look)).collect(),
            phi_u: self.phi_u.iter().map(|e| e.eval(look)).collect(),
        }
    }
}

/// Coefficient-matched achievability constraints for the model `(Â, B̂)`:
/// `Φx(1) = I`, `Φx(k+1) = ÂΦx(k) + B̂Φu(k)`, `ÂΦx(F) + B̂Φu(F) = 0`.
#[derive(Clone, Debug)]
pub struct AffineConstraints {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub horizon: usize,
}

pub fn affine_constraints(a_hat: &DMatrix<f64>, b_hat: &DMatrix<f64>, f: usize) -> Result<AffineConstraints> {
    if f < 1 {
        return Err(Error::Contract("FIR length must be at least 1".into()));
    }
    ensure_dims(a_hat.is_square() && b_hat.nrows() == a_hat.nrows(), || {
        format!("A_hat {:?}, B_hat {:?}", a_hat.shape(), b_hat.shape())
    })?;
    Ok(AffineConstraints {
        a_hat: a_hat.clone(),
        b_hat: b_hat.clone(),
        horizon: f,
    })
}

impl AffineConstraints {
    pub fn n_x(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_hat.ncols()
    }

    pub fn equation_count(&self) -> usize {
        self.n_x() * self.n_x() * (self.horizon + 1)
    }

    /// Residual blocks in the order listed on the type.
    pub fn residuals(&self, phi: &FirPair) -> Vec<DMatrix<f64>> {
        let f = self.horizon;
        let mut out = Vec::with_capacity(f + 1);
        out.push(&phi.phi_x[0] - DMatrix::identity(self.n_x(), self.n_x()));
        for k in 0..f - 1 {
            out.push(&phi.phi_x[k + 1] - &self.a_hat * &phi.phi_x[k] - &self.b_hat * &phi.phi_u[k]);
        }
        out.push(&self.a_hat * &phi.phi_x[f - 1] + &self.b_hat * &phi.phi_u[f - 1]);
        out
    }

    pub fn max_residual(&self, phi: &FirPair) -> f64 {
        self.residuals(phi).iter().map(|r| r.amax()).fold(0.0, f64::max)
    }

    /// Adds every scalar equation for the given taps.
    pub fn emit(&self, prog: &mut ConicProgram, phi: &FirExpr) {
        let f = self.horizon;
        let n = self.n_x();
        prog.add_matrix_equality(&phi.phi_x[0].sub(&MatExpr::identity(n)));
        for k in 0..f - 1 {
            let next = self.propagate(&phi.phi_x[k], &phi.phi_u[k]);
            prog.add_matrix_equality(&phi.phi_x[k + 1].sub(&next));
        }
        prog.add_matrix_equality(&self.propagate(&phi.phi_x[f - 1], &phi.phi_u[f - 1]));
    }

    /// Declares only the input taps as variables and generates the state taps
    /// by the recursion; the terminal condition is added as equalities.
    pub fn parametrize(&self, prog: &mut ConicProgram, name: &str) -> FirExpr {
        let (n_x, n_u, f) = (self.n_x(), self.n_u(), self.horizon);
        let mut phi_x = vec![MatExpr::identity(n_x)];
        let mut phi_u = Vec::with_capacity(f);
        for k in 1..=f {
            let u = prog.matrix_variable(format!("{name}_u{k}"), n_u, n_x).1;
            if k < f {
                phi_x.push(self.propagate(&phi_x[k - 1], &u));
            }
            phi_u.push(u);
        }
        prog.add_matrix_equality(&self.propagate(&phi_x[f - 1], &phi_u[f - 1]));
        FirExpr { phi_x, phi_u }
    }

    fn propagate(&self, x: &MatExpr, u: &MatExpr) -> MatExpr {
        x.left_mul(&self.a_hat).add(&u.left_mul(&self.b_hat))
    }
}

/// `J = σ_w² Σ_k ‖Q^{1/2}Φx(k)‖²_F + ‖R^{1/2}Φu(k)‖²_F`, the stationary
/// per-step cost of the closed loop.
#[derive(Clone, Debug)]
pub struct H2Objective {
    q_sqrt: DMatrix<f64>,
    r_sqrt: DMatrix<f64>,
    sigma_w2: f64,
}

pub fn h2_objective(weights: &CostWeights, sigma_w: f64) -> H2Objective {
    H2Objective {
        q_sqrt: psd_sqrt(&weights.q),
        r_sqrt: psd_sqrt(&weights.r),
        sigma_w2: sigma_w * sigma_w,
    }
}

impl H2Objective {
    pub fn evaluate(&self, phi: &FirPair) -> f64 {
        let mut j = 0.0;
        for (x, u) in phi.phi_x.iter().zip(&phi.phi_u) {
            j += (&self.q_sqrt * x).norm_squared() + (&self.r_sqrt * u).norm_squared();
        }
        self.sigma_w2 * j
    }

    /// Adds `scale · J(phi)` to the program objective.
    pub fn add_to(&self, prog: &mut ConicProgram, phi: &FirExpr, scale: f64) {
        let w = scale * self.sigma_w2;
        for (x, u) in phi.phi_x.iter().zip(&phi.phi_u) {
            for (m, e) in [(&self.q_sqrt, x), (&self.r_sqrt, u)] {
                if e.is_constant() {
                    let v = (m * e.constant_part()).norm_squared();
                    prog.add_linear_objective(&AffExpr::constant(w * v));
                    continue;
                }
                for entry in e.left_mul(m).entries() {
                    let mut entry = entry.clone();
                    entry.compact();
                    if !entry.terms.is_empty() || entry.constant != 0.0 {
                        prog.add_square(w, entry);
                    }
                }
            }
        }
    }
}

/// Block structure of an H∞ certificate `P` for an F-tap response with
/// `block × block` blocks: `Σ_i P_ii = γI` and `Σ_i P_{i,i+k} = 0`.
#[derive(Clone, Debug)]
pub struct HinfStructure {
    pub horizon: usize,
    pub block: usize,
    pub gamma: Option<f64>,
}

pub fn hinf_structure(f: usize, block: usize, gamma: f64) -> Result<HinfStructure> {
    if !(gamma > 0.0) {
        return Err(Error::Contract(format!("gamma must be positive, got {gamma}")));
    }
    if f < 1 || block < 1 {
        return Err(Error::Contract("empty certificate structure".into()));
    }
    Ok(HinfStructure {
        horizon: f,
        block,
        gamma: Some(gamma),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HinfCertificate {
    pub p: DMatrix<f64>,
    pub gamma: f64,
}

impl HinfCertificate {
    /// Largest deviation from the block conditions.
    pub fn structure_violation(&self, block: usize) -> f64 {
        let f = self.p.nrows() / block;
        let s = HinfStructure {
            horizon: f,
            block,
            gamma: Some(self.gamma),
        };
        s.violation(&self.p, self.gamma)
    }
}

impl HinfStructure {
    pub fn dim(&self) -> usize {
        self.horizon * self.block
    }

    fn band_sum<T>(&self, k: usize, get: impl Fn(usize, usize) -> T, add: impl Fn(T, T) -> T, zero: T) -> T {
        let mut acc = zero;
        for i in 0..self.horizon - k {
            acc = add(acc, get(i, i + k));
        }
        acc
    }

    /// Scalar equalities on a symbolic `P` with symbolic `γ`.
    pub fn equalities(&self, p: &MatExpr, gamma: &AffExpr) -> Vec<AffExpr> {
        let b = self.block;
        let mut out = Vec::new();
        for k in 0..self.horizon {
            let sum = self.band_sum(
                k,
                |i, j| p.block(i * b, j * b, b, b),
                |x, y| x.add(&y),
                MatExpr::zeros(b, b),
            );
            for r in 0..b {
                let c0 = if k == 0 { r } else { 0 };
                for c in c0..b {
                    let mut e = sum.get(r, c).clone();
                    if k == 0 && r == c {
                        e.add_scaled(gamma, -1.0);
                    }
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn violation(&self, p: &DMatrix<f64>, gamma: f64) -> f64 {
        let b = self.block;
        let mut worst: f64 = 0.0;
        for k in 0..self.horizon {
            let sum = self.band_sum(
                k,
                |i, j| p.view((i * b, j * b), (b, b)).into_owned(),
                |x, y| x + y,
                DMatrix::zeros(b, b),
            );
            let target = if k == 0 {
                DMatrix::identity(b, b) * gamma
            } else {
                DMatrix::zeros(b, b)
            };
            worst = worst.max((sum - target).amax());
        }
        worst
    }

    /// Parametrizes every `P` with this structure as
    /// `diag(γI, 0, …) + [[X, 0], [0, 0]] − [[0, 0], [0, X]]`
    /// with a free symmetric `X` of size `block·(F−1)`.
    pub fn parametrize(&self, prog: &mut ConicProgram, name: &str, gamma: &AffExpr) -> MatExpr {
        let b = self.block;
        let n = self.dim();
        let mut p = MatExpr::zeros(n, n);
        for i in 0..b {
            p.set(i, i, gamma.clone());
        }
        if self.horizon > 1 {
            let m = b * (self.horizon - 1);
            let x = prog.symmetric_variable(name, m).1;
            for r in 0..m {
                for c in 0..m {
                    let e = x.get(r, c);
                    p.get_mut(r, c).add_scaled(e, 1.0);
                    p.get_mut(r + b, c + b).add_scaled(e, -1.0);
                }
            }
        }
        p
    }
}

/// Stacks FIR taps `G_1..G_F` (`p × q` each) row-wise.
fn stack_taps(taps: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (p, q) = taps[0].shape();
    let mut h = DMatrix::zeros(p * taps.len(), q);
    for (k, g) in taps.iter().enumerate() {
        h.view_mut((k * p, 0), (p, q)).copy_from(g);
    }
    h
}

/// `[[P, H̄], [H̄ᵀ, I]]`.
fn hinf_coupling(p: &MatExpr, h: &MatExpr) -> MatExpr {
    let q = h.ncols();
    let id = MatExpr::identity(q);
    let ht = h.transpose();
    MatExpr::from_blocks(&[vec![Some(p), Some(h)], vec![Some(&ht), Some(&id)]])
}

/// Certified H∞ norm of the FIR transfer matrix `Σ_k G_k z^{-k}`:
/// minimizes `γ` over certificates, which bounds the squared norm, and
/// returns `(√γ*, certificate)`.
pub fn hinf_norm_bound(taps: &[DMatrix<f64>], settings: &SolverSettings) -> Result<(f64, HinfCertificate)> {
    if taps.is_empty() {
        return Err(Error::Contract("no taps".into()));
    }
    let (p, q) = taps[0].shape();
    for g in taps {
        ensure_dims(g.shape() == (p, q), || "taps differ in shape".into())?;
    }
    let structure = HinfStructure {
        horizon: taps.len(),
        block: p,
        gamma: None,
    };
    let mut prog = ConicProgram::new();
    let (gid, gamma) = prog.scalar_variable("gamma");
    let pm = structure.parametrize(&mut prog, "X", &gamma);
    let h = MatExpr::from_matrix(&stack_taps(taps));
    prog.add_psd("hinf", hinf_coupling(&pm, &h));
    prog.add_linear_objective(&gamma);
    let sol = sdp::solve(&prog, settings)?;
    if sol.status != Status::Optimal {
        return Err(Error::Solver {
            stage: "hinf bound".into(),
            status: sol.status,
            detail: format!("residuals {:?}", sol.residuals),
        });
    }
    let g = sol.scalar(gid);
    let look = |v: sdp::VarId, r: usize, c: usize| sol.value(v)[(r, c)];
    let cert = HinfCertificate {
        p: symmetrize(&pm.eval(look)),
        gamma: g,
    };
    Ok((g.max(0.0).sqrt(), cert))
}

/// `max_ω σ_max(Σ_k G_k e^{-jωk})` over `samples` equally spaced frequencies.
pub fn sampled_hinf_norm(taps: &[DMatrix<f64>], samples: usize) -> f64 {
    let (p, q) = taps[0].shape();
    let mut best: f64 = 0.0;
    for s in 0..samples {
        let w = std::f64::consts::TAU * s as f64 / samples as f64;
        let mut h = DMatrix::<Complex<f64>>::zeros(p, q);
        for (k, g) in taps.iter().enumerate() {
            let z = Complex::from_polar(1.0, -w * (k + 1) as f64);
            h += g.map(|v| Complex::new(v, 0.0)) * z;
        }
        let sv = h.singular_values();
        best = best.max(sv.iter().copied().fold(0.0, f64::max));
    }
    best
}

/// Multiplier in the robust stability LMI.
#[derive(Clone, Debug)]
pub enum Multiplier {
    Fixed(f64),
    Variable(AffExpr),
}

/// Uncertainty matrix in the robust stability LMI.
#[derive(Clone, Debug)]
pub enum Uncertainty {
    Constant(DMatrix<f64>),
    /// Depends affinely on decision variables.
    Affine(MatExpr),
}

/// Adds `[[P, 0, Φ̄], [0, (1−λ)I, 0], [Φ̄ᵀ, 0, λD]] ⪰ 0`, which with a unit
/// H∞ certificate `P` guarantees stability for every plant in the region
/// described by `D`.
pub fn robust_stability_lmi(
    prog: &mut ConicProgram,
    label: &str,
    n_x: usize,
    stack: &MatExpr,
    p: &MatExpr,
    lambda: &Multiplier,
    d: &Uncertainty,
) -> Result<()> {
    let rows = stack.nrows();
    let cols = stack.ncols();
    ensure_dims(p.shape() == (rows, rows), || {
        format!("certificate {:?} for a stack of {} rows", p.shape(), rows)
    })?;
    ensure_dims(n_x > 0 && rows % n_x == 0, || format!("stack of {rows} rows for n_x = {n_x}"))?;
    let d_block = match (lambda, d) {
        (Multiplier::Variable(_), Uncertainty::Affine(e)) if !e.is_constant() => return Err(Error::Bilinear),
        (Multiplier::Variable(l), Uncertainty::Affine(e)) => MatExpr::from_matrix(&e.constant_part()).times_scalar(l),
        (Multiplier::Variable(l), Uncertainty::Constant(m)) => MatExpr::from_matrix(m).times_scalar(l),
        (Multiplier::Fixed(l), Uncertainty::Constant(m)) => MatExpr::from_matrix(&(m * *l)),
        (Multiplier::Fixed(l), Uncertainty::Affine(e)) => e.scaled(*l),
    };
    ensure_dims(d_block.shape() == (cols, cols), || {
        format!("uncertainty matrix {:?} for a stack with {} columns", d_block.shape(), cols)
    })?;
    let lam = match lambda {
        Multiplier::Fixed(l) => AffExpr::constant(*l),
        Multiplier::Variable(l) => l.clone(),
    };
    let one_minus = AffExpr::constant(1.0) - lam;
    let mid = MatExpr::identity(n_x).times_scalar(&one_minus);
    let st = stack.transpose();
    let m = MatExpr::from_blocks(&[
        vec![Some(p), None, Some(stack)],
        vec![None, Some(&mid), None],
        vec![Some(&st), None, Some(&d_block)],
    ]);
    prog.add_psd(label, m);
    Ok(())
}

/// Smallest eigenvalue of the robust stability block at fixed values; at
/// least zero (up to solver accuracy) when the certificate holds.
pub fn robust_lmi_min_eigenvalue(stack: &PhiStack, p: &DMatrix<f64>, lambda: f64, d: &DMatrix<f64>) -> Result<f64> {
    let s = stack.matrix();
    let (rows, cols) = s.shape();
    let n_x = rows / stack.horizon().max(1);
    ensure_dims(p.shape() == (rows, rows) && d.shape() == (cols, cols), || {
        format!("certificate {:?} and D {:?} for a {rows}x{cols} stack", p.shape(), d.shape())
    })?;
    let dim = rows + n_x + cols;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (rows, rows)).copy_from(p);
    m.view_mut((rows, rows), (n_x, n_x)).fill_with_identity();
    m.view_mut((rows, rows), (n_x, n_x)).scale_mut(1.0 - lambda);
    m.view_mut((0, rows + n_x), (rows, cols)).copy_from(s);
    m.view_mut((rows + n_x, 0), (cols, rows)).copy_from(&s.transpose());
    m.view_mut((rows + n_x, rows + n_x), (cols, cols)).copy_from(&(d * lambda));
    Ok(crate::linalg::min_eigenvalue(&m))
}

/// `D_1 + (T_e/c_δ)·Φ̄ᵀΦ̄`.
pub fn propagated_uncertainty(d1: &DMatrix<f64>, stack: &PhiStack, t_e: usize, c_delta: f64) -> Result<DMatrix<f64>> {
    let m = stack.matrix();
    ensure_dims(d1.shape() == (m.ncols(), m.ncols()), || {
        format!("D_1 {:?} for a stack with {} columns", d1.shape(), m.ncols())
    })?;
    Ok(symmetrize(&(d1 + m.transpose() * m * (t_e as f64 / c_delta))))
}

/// First-order expansion of [`propagated_uncertainty`] around `Φ̄_nom`:
/// `D_1 + κ(Φ̄ᵀΦ̄_nom + Φ̄_nomᵀΦ̄ − Φ̄_nomᵀΦ̄_nom)`, `κ = T_e/c_δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyExpr {
    pub d1: DMatrix<f64>,
    pub stack_nom: DMatrix<f64>,
    pub kappa: f64,
}

pub fn linearized_uncertainty(
    d1: &DMatrix<f64>,
    stack_nom: &PhiStack,
    t_e: usize,
    c_delta: f64,
) -> Result<UncertaintyExpr> {
    let m = stack_nom.matrix();
    ensure_dims(d1.shape() == (m.ncols(), m.ncols()), || {
        format!("D_1 {:?} for a stack with {} columns", d1.shape(), m.ncols())
    })?;
    Ok(UncertaintyExpr {
        d1: symmetrize(d1),
        stack_nom: m.clone(),
        kappa: t_e as f64 / c_delta,
    })
}

impl UncertaintyExpr {
    /// Value at `Φ̄ = 0`.
    pub fn constant(&self) -> DMatrix<f64> {
        let n = &self.stack_nom;
        symmetrize(&(&self.d1 - n.transpose() * n * self.kappa))
    }

    pub fn eval(&self, stack: &DMatrix<f64>) -> DMatrix<f64> {
        let n = &self.stack_nom;
        let cross = stack.transpose() * n;
        symmetrize(&(self.constant() + (&cross + cross.transpose()) * self.kappa))
    }

    /// Affine expression in a symbolic stack.
    pub fn expr(&self, stack: &MatExpr) -> MatExpr {
        let cross = stack.transpose().right_mul(&self.stack_nom);
        let lin = cross.add(&cross.transpose()).scaled(self.kappa);
        MatExpr::from_matrix(&self.constant()).add(&lin)
    }
}

#[cfg(test)]
mod tests;
