//! Nominal H2, robust, and two-phase dual synthesis over FIR responses.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::Model;
use crate::lin_sys::CostWeights;
use crate::sdp::{self, AffExpr, ConicProgram, MatExpr, Residuals, Solution, SolverSettings, Status, VarId};
use crate::sls::{
    affine_constraints, h2_objective, hinf_structure, linearized_uncertainty, robust_stability_lmi,
    FirExpr, FirPair, HinfCertificate, Multiplier, Uncertainty, UncertaintyExpr,
};

/// Solver statistics kept alongside a synthesized response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: Status,
    pub objective_value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl From<&Solution> for SolverReport {
    fn from(s: &Solution) -> Self {
        Self {
            status: s.status,
            objective_value: s.objective_value,
            residuals: s.residuals.clone(),
            iterations: s.iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub phi: FirPair,
    /// Per-step stationary H2 cost of `phi` on the model it was designed for.
    pub cost: f64,
    pub lambda: Option<f64>,
    pub certificate: Option<HinfCertificate>,
    pub solver: SolverReport,
    /// Set when the result came from an enlarged `D` after an infeasible solve.
    pub heuristic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub solver: SolverSettings,
    /// On an infeasible robust solve, retry once with `D` multiplied by this
    /// factor and mark the result heuristic.
    pub robust_fallback: Option<f64>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            robust_fallback: None,
        }
    }
}

fn check_model(model: &Model, weights: &CostWeights, f: usize) -> Result<()> {
    if f < 1 {
        return Err(Error::Contract("FIR length must be at least 1".into()));
    }
    let (n_x, n_u) = (model.n_x(), model.n_u());
    if weights.q.nrows() != n_x || weights.r.nrows() != n_u {
        return Err(Error::Dimension(format!(
            "weights are {}x{} / {}x{} for n_x = {n_x}, n_u = {n_u}",
            weights.q.nrows(),
            weights.q.ncols(),
            weights.r.nrows(),
            weights.r.ncols()
        )));
    }
    if model.d.shape() != (n_x + n_u, n_x + n_u) {
        return Err(Error::Dimension(format!("D is {:?}", model.d.shape())));
    }
    Ok(())
}

fn require_optimal(stage: &str, sol: &Solution) -> Result<()> {
    match sol.status {
        Status::Optimal => Ok(()),
        Status::Infeasible => Err(Error::Infeasible {
            stage: stage.into(),
            detail: match sol.phase_one {
                Some(t) => format!("phase-one margin {t:.3e}, min psd eigenvalue {:.3e}", sol.residuals.min_psd_eigenvalue),
                None => format!("min psd eigenvalue {:.3e}", sol.residuals.min_psd_eigenvalue),
            },
        }),
        status => Err(Error::Solver {
            stage: stage.into(),
            status,
            detail: format!(
                "equality residual {:.3e}, min psd eigenvalue {:.3e}, {} iterations",
                sol.residuals.equality, sol.residuals.min_psd_eigenvalue, sol.iterations
            ),
        }),
    }
}

pub fn nominal_synthesis(model: &Model, weights: &CostWeights, f: usize) -> Result<SynthesisResult> {
    nominal_synthesis_with(model, weights, f, &SynthesisOptions::default())
}

/// Minimizes the H2 cost over the achievable FIR responses of `(Â, B̂)`.
pub fn nominal_synthesis_with(
    model: &Model,
    weights: &CostWeights,
    f: usize,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    check_model(model, weights, f)?;
    let cons = affine_constraints(&model.a_hat, &model.b_hat, f)?;
    let h2 = h2_objective(weights, model.sigma_w);
    let mut prog = ConicProgram::new();
    let fir = cons.parametrize(&mut prog, "phi");
    h2.add_to(&mut prog, &fir, 1.0);
    let sol = sdp::solve(&prog, &opts.solver)?;
    require_optimal("nominal synthesis", &sol)?;
    let phi = fir.eval(&sol);
    Ok(SynthesisResult {
        cost: h2.evaluate(&phi),
        phi,
        lambda: None,
        certificate: None,
        solver: SolverReport::from(&sol),
        heuristic: false,
    })
}

pub fn robust_synthesis(model: &Model, weights: &CostWeights, f: usize) -> Result<SynthesisResult> {
    robust_synthesis_with(model, weights, f, &SynthesisOptions::default())
}

/// Minimizes the H2 cost subject to the robust stability LMI for every plant
/// in the model's credibility region.
pub fn robust_synthesis_with(
    model: &Model,
    weights: &CostWeights,
    f: usize,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    check_model(model, weights, f)?;
    match robust_once(model, &model.d, weights, f, &opts.solver) {
        Err(Error::Infeasible { stage, detail }) => match opts.robust_fallback {
            Some(factor) if factor > 1.0 => {
                log::warn!("{stage} infeasible ({detail}); retrying with D scaled by {factor}");
                let mut r = robust_once(model, &(&model.d * factor), weights, f, &opts.solver)?;
                r.heuristic = true;
                Ok(r)
            }
            _ => Err(Error::Infeasible { stage, detail }),
        },
        other => other,
    }
}

fn clamp_unit(l: f64) -> f64 {
    l.clamp(0.0, 1.0)
}

fn robust_once(
    model: &Model,
    d: &DMatrix<f64>,
    weights: &CostWeights,
    f: usize,
    settings: &SolverSettings,
) -> Result<SynthesisResult> {
    let n_x = model.n_x();
    let cons = affine_constraints(&model.a_hat, &model.b_hat, f)?;
    let h2 = h2_objective(weights, model.sigma_w);
    let mut prog = ConicProgram::new();
    let fir = cons.parametrize(&mut prog, "phi");
    let (lid, lambda) = prog.scalar_variable("lambda");
    let structure = hinf_structure(f, n_x, 1.0)?;
    let p = structure.parametrize(&mut prog, "X", &AffExpr::constant(1.0));
    robust_stability_lmi(
        &mut prog,
        "robust",
        n_x,
        &fir.stack(),
        &p,
        &Multiplier::Variable(lambda),
        &Uncertainty::Constant(d.clone()),
    )?;
    h2.add_to(&mut prog, &fir, 1.0);
    let sol = sdp::solve(&prog, settings)?;
    require_optimal("robust synthesis", &sol)?;
    let phi = fir.eval(&sol);
    Ok(SynthesisResult {
        cost: h2.evaluate(&phi),
        phi,
        lambda: Some(clamp_unit(sol.scalar(lid))),
        certificate: Some(certificate(&p, &sol)),
        solver: SolverReport::from(&sol),
        heuristic: false,
    })
}

fn certificate(p: &MatExpr, sol: &Solution) -> HinfCertificate {
    let look = |v: VarId, r: usize, c: usize| sol.value(v)[(r, c)];
    HinfCertificate {
        p: crate::linalg::symmetrize(&p.eval(look)),
        gamma: 1.0,
    }
}

/// `count` geometrically spaced values in `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Which `λ²` values the dual program is solved for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda2Grid {
    /// `points` geometric values from `lo` to `hi`, plus the multiplier of
    /// the robust solve on the initial model.
    Geometric { lo: f64, hi: f64, points: usize },
    Explicit(Vec<f64>),
}

impl Default for Lambda2Grid {
    fn default() -> Self {
        Lambda2Grid::Geometric {
            lo: 1e-3,
            hi: 1.0,
            points: 24,
        }
    }
}

impl Lambda2Grid {
    /// Concrete grid, sorted and deduplicated.
    pub fn values(&self, lambda_nom: Option<f64>) -> Result<Vec<f64>> {
        let mut v = match self {
            Lambda2Grid::Geometric { lo, hi, points } => {
                if !(*lo > 0.0 && lo <= hi && *hi <= 1.0) {
                    return Err(Error::Contract(format!("lambda2 grid range [{lo}, {hi}] must lie in (0, 1]")));
                }
                let mut v = geometric_grid(*lo, *hi, *points);
                if let Some(l) = lambda_nom.filter(|l| *l > 0.0 && *l <= 1.0) {
                    v.push(l);
                }
                v
            }
            Lambda2Grid::Explicit(v) => v.clone(),
        };
        if v.is_empty() {
            return Err(Error::Contract("lambda2 grid is empty".into()));
        }
        if let Some(bad) = v.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return Err(Error::Contract(format!("lambda2 grid value {bad} outside (0, 1]")));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda2: f64,
    /// Recomputed weighted cost of the returned responses; `None` unless solved.
    pub objective: Option<f64>,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPlan {
    pub phi1: FirPair,
    pub phi2_planned: FirPair,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `T_e·J(φ¹) + (T − T_e)·J(φ²)`.
    pub objective: f64,
    pub cost1: f64,
    pub cost2: f64,
    pub table: Vec<GridPoint>,
    pub solver: SolverReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSetup {
    pub horizon: usize,
    pub explore: usize,
    pub grid: Lambda2Grid,
}

/// Solves the two-phase program, first running the robust synthesis that
/// supplies the linearization point.
pub fn dual_synthesis(
    model: &Model,
    weights: &CostWeights,
    f: usize,
    setup: &DualSetup,
    opts: &SynthesisOptions,
) -> Result<DualPlan> {
    let robust = robust_synthesis_with(model, weights, f, opts)?;
    dual_synthesis_from(model, weights, f, setup, &robust, opts)
}

/// As [`dual_synthesis`] with a precomputed robust solution on `model`.
pub fn dual_synthesis_from(
    model: &Model,
    weights: &CostWeights,
    f: usize,
    setup: &DualSetup,
    robust: &SynthesisResult,
    opts: &SynthesisOptions,
) -> Result<DualPlan> {
    check_model(model, weights, f)?;
    if !(setup.explore >= 1 && setup.explore < setup.horizon) {
        return Err(Error::Contract(format!(
            "exploration length {} must satisfy 1 <= T_e < T = {}",
            setup.explore, setup.horizon
        )));
    }
    if robust.phi.horizon() != f {
        return Err(Error::Contract("linearization point has a different FIR length".into()));
    }
    let grid = setup.grid.values(robust.lambda)?;
    let d_lin = linearized_uncertainty(&model.d, &robust.phi.stack(), setup.explore, model.c_delta)?;

    let solves: Vec<Result<(GridPoint, Option<DualPlan>)>> = grid
        .par_iter()
        .map(|&l2| dual_point(model, weights, f, setup, &d_lin, l2, &opts.solver))
        .collect();

    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<DualPlan> = None;
    for r in solves {
        let (point, plan) = r?;
        table.push(point);
        if let Some(plan) = plan {
            let better = match &best {
                None => true,
                Some(b) => (plan.objective, plan.lambda2) < (b.objective, b.lambda2),
            };
            if better {
                best = Some(plan);
            }
        }
    }
    match best {
        Some(mut plan) => {
            plan.table = table;
            Ok(plan)
        }
        None => Err(Error::Infeasible {
            stage: "dual synthesis".into(),
            detail: format!(
                "no feasible lambda2 among {} grid points ({})",
                table.len(),
                table
                    .iter()
                    .map(|p| format!("{:.3e}: {}", p.lambda2, p.status))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }),
    }
}

fn dual_point(
    model: &Model,
    weights: &CostWeights,
    f: usize,
    setup: &DualSetup,
    d_lin: &UncertaintyExpr,
    lambda2: f64,
    settings: &SolverSettings,
) -> Result<(GridPoint, Option<DualPlan>)> {
    let n_x = model.n_x();
    let t_e = setup.explore as f64;
    let t_rest = (setup.horizon - setup.explore) as f64;
    let cons = affine_constraints(&model.a_hat, &model.b_hat, f)?;
    let h2 = h2_objective(weights, model.sigma_w);
    let structure = hinf_structure(f, n_x, 1.0)?;

    let mut prog = ConicProgram::new();
    let fir1: FirExpr = cons.parametrize(&mut prog, "phi1");
    let fir2: FirExpr = cons.parametrize(&mut prog, "phi2");
    let (lid, lambda1) = prog.scalar_variable("lambda1");
    let p1 = structure.parametrize(&mut prog, "X1", &AffExpr::constant(1.0));
    let p2 = structure.parametrize(&mut prog, "X2", &AffExpr::constant(1.0));
    let stack1 = fir1.stack();
    robust_stability_lmi(
        &mut prog,
        "explore",
        n_x,
        &stack1,
        &p1,
        &Multiplier::Variable(lambda1),
        &Uncertainty::Constant(model.d.clone()),
    )?;
    robust_stability_lmi(
        &mut prog,
        "exploit",
        n_x,
        &fir2.stack(),
        &p2,
        &Multiplier::Fixed(lambda2),
        &Uncertainty::Affine(d_lin.expr(&stack1)),
    )?;
    h2.add_to(&mut prog, &fir1, t_e);
    h2.add_to(&mut prog, &fir2, t_rest);

    let sol = sdp::solve(&prog, settings)?;
    if sol.status != Status::Optimal {
        log::debug!("dual grid point {lambda2:.4e}: {}", sol.status);
        return Ok((
            GridPoint {
                lambda2,
                objective: None,
                status: sol.status,
            },
            None,
        ));
    }
    let phi1 = fir1.eval(&sol);
    let phi2 = fir2.eval(&sol);
    let cost1 = h2.evaluate(&phi1);
    let cost2 = h2.evaluate(&phi2);
    let objective = t_e * cost1 + t_rest * cost2;
    Ok((
        GridPoint {
            lambda2,
            objective: Some(objective),
            status: sol.status,
        },
        Some(DualPlan {
            phi1,
            phi2_planned: phi2,
            lambda1: clamp_unit(sol.scalar(lid)),
            lambda2,
            objective,
            cost1,
            cost2,
            table: Vec::new(),
            solver: SolverReport::from(&sol),
        }),
    ))
}

#[cfg(test)]
mod tests;
