//! Monte Carlo comparison of nominal, dual and greedy exploration on a known
//! plant.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::{Data, Distribution, OrderStatistics};

use crate::error::{Error, Result};
use crate::identify::{build_model_with, merge, ChiSquareConvention, Dataset, Model};
use crate::lin_sys::{
    evaluate_cost, realize_controller, rng_stream, simulate_from, simulate_with, stationary_cost_sls,
    stationary_cost_with_excitation, CostWeights, Excited, LtiSystem, ZeroController,
};
use crate::sdp::{SolverSettings, Status};
use crate::sls::FirPair;
use crate::synthesis::{
    dual_synthesis_from, robust_synthesis_with, DualSetup, Lambda2Grid, SynthesisOptions, SynthesisResult,
};

const STREAM_INIT_NOISE: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_EXPLOIT: u64 = 3;
const STREAM_EXCITATION: u64 = 4;
const STREAM_INIT_INPUT: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub true_system: LtiSystem,
    pub weights: CostWeights,
    pub delta: f64,
    /// `T`
    pub horizon: usize,
    /// `T_e`
    pub explore: usize,
    /// `F`
    pub fir_len: usize,
    pub n_init_rollouts: usize,
    pub init_rollout_len: usize,
    pub lambda2_grid: Lambda2Grid,
    pub mc_runs: usize,
    pub master_seed: u64,
    /// Runs whose dual exploration cost sets the greedy excitation target.
    pub pilot_runs: usize,
    pub solver: SolverSettings,
    pub robust_fallback: Option<f64>,
    pub chi2_convention: ChiSquareConvention,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.1, 0.0, 0.8]);
        Self {
            true_system: LtiSystem {
                a,
                b: DMatrix::identity(2, 2),
                sigma_w: 1.0,
            },
            weights: CostWeights {
                q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.001])),
                r: DMatrix::identity(2, 2) * 1000.0,
            },
            delta: 0.1,
            horizon: 100,
            explore: 20,
            fir_len: 12,
            n_init_rollouts: 10,
            init_rollout_len: 6,
            lambda2_grid: Lambda2Grid::default(),
            mc_runs: 200,
            master_seed: 0,
            pilot_runs: 50,
            solver: SolverSettings::default(),
            robust_fallback: None,
            chi2_convention: ChiSquareConvention::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let sys = &self.true_system;
        LtiSystem::new(sys.a.clone(), sys.b.clone(), sys.sigma_w)?;
        if !(sys.sigma_w > 0.0) {
            return Err(Error::Contract(format!("sigma_w must be positive, got {}", sys.sigma_w)));
        }
        CostWeights::new(self.weights.q.clone(), self.weights.r.clone())?;
        if self.weights.q.nrows() != sys.n_x() || self.weights.r.nrows() != sys.n_u() {
            return Err(Error::Dimension("Q and R must match the plant dimensions".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Contract(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.explore >= 1 && self.explore < self.horizon) {
            return Err(Error::Contract(format!(
                "T_e = {} must satisfy 1 <= T_e < T = {}",
                self.explore, self.horizon
            )));
        }
        if self.fir_len < 1 {
            return Err(Error::Contract("F must be at least 1".into()));
        }
        if self.mc_runs < 1 {
            return Err(Error::Contract("mc_runs must be at least 1".into()));
        }
        if self.init_rollout_len < 2 || self.n_init_rollouts < 1 {
            return Err(Error::Contract(
                "initial data needs at least one rollout of length >= 2".into(),
            ));
        }
        self.lambda2_grid.values(None)?;
        Ok(())
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            solver: self.solver.clone(),
            robust_fallback: self.robust_fallback,
        }
    }

    /// Seed of run `run`, independent of thread scheduling.
    pub fn run_seed(&self, run: usize) -> u64 {
        rng_stream(self.master_seed, run as u64).next_u64()
    }
}

/// `n_rollouts` open-loop rollouts with `u_t ~ N(0, I)`, each holding
/// `rollout_len` states.
pub fn generate_initial_data(sys: &LtiSystem, n_rollouts: usize, rollout_len: usize, seed: u64) -> Result<Dataset> {
    generate_initial_data_with(sys, n_rollouts, rollout_len, 1.0, seed)
}

pub fn generate_initial_data_with(
    sys: &LtiSystem,
    n_rollouts: usize,
    rollout_len: usize,
    input_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if rollout_len < 2 {
        return Err(Error::Contract(format!("rollout length must be at least 2, got {rollout_len}")));
    }
    let mut noise = rng_stream(seed, STREAM_INIT_NOISE);
    let zero = ZeroController {
        n_x: sys.n_x(),
        n_u: sys.n_u(),
    };
    let mut ctrl = Excited::new(zero, input_std, rng_stream(seed, STREAM_INIT_INPUT));
    let mut data = Dataset::new(sys.n_x(), sys.n_u());
    for _ in 0..n_rollouts {
        data.push(simulate_with(sys, &mut ctrl, rollout_len - 1, &mut noise)?)?;
    }
    Ok(data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Nominal,
    Dual,
    Greedy,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Nominal, Strategy::Dual, Strategy::Greedy];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Nominal => "nominal",
            Strategy::Dual => "dual",
            Strategy::Greedy => "greedy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Explore,
    Exploit,
    Total,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Explore, Phase::Exploit, Phase::Total];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
            Phase::Total => "total",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub strategy: Strategy,
    pub seed: u64,
    /// Cost over `t ∈ [1, T_e]`; NaN when the episode failed.
    pub explore_cost: f64,
    /// Cost over `t ∈ [T_e + 1, T]`.
    pub exploit_cost: f64,
    pub total_cost: f64,
    pub phase2_status: Option<Status>,
    /// Stage at which the episode failed.
    pub failure: Option<String>,
    /// Excitation level of the greedy strategy.
    pub sigma_e: Option<f64>,
}

impl EpisodeResult {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn cost(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Explore => self.explore_cost,
            Phase::Exploit => self.exploit_cost,
            Phase::Total => self.total_cost,
        }
    }

    fn failed(strategy: Strategy, seed: u64, stage: &str, err: &Error) -> Self {
        log::warn!("{strategy} episode with seed {seed} failed at {stage}: {err}");
        Self {
            strategy,
            seed,
            explore_cost: f64::NAN,
            exploit_cost: f64::NAN,
            total_cost: f64::NAN,
            phase2_status: match err {
                Error::Infeasible { .. } if stage == "exploit" => Some(Status::Infeasible),
                Error::Solver { status, .. } if stage == "exploit" => Some(*status),
                _ => None,
            },
            failure: Some(format!("{stage}: {err}")),
            sigma_e: None,
        }
    }
}

/// Initial model and the robust controller every strategy starts from.
struct EpisodeStart {
    data: Dataset,
    model: Model,
    robust: SynthesisResult,
}

fn start_episode(cfg: &ExperimentConfig, seed: u64) -> std::result::Result<EpisodeStart, (&'static str, Error)> {
    let data = generate_initial_data(&cfg.true_system, cfg.n_init_rollouts, cfg.init_rollout_len, seed)
        .map_err(|e| ("initial data", e))?;
    let model = build_model_with(&data, cfg.true_system.sigma_w, cfg.delta, cfg.chi2_convention).map_err(|e| ("identify", e))?;
    let robust = robust_synthesis_with(&model, &cfg.weights, cfg.fir_len, &cfg.synthesis_options())
        .map_err(|e| ("robust synthesis", e))?;
    Ok(EpisodeStart { data, model, robust })
}

/// Runs one episode of `strategy` on the true plant. Greedy episodes need the
/// exploration cost target their excitation is tuned to.
pub fn run_episode(
    strategy: Strategy,
    cfg: &ExperimentConfig,
    seed: u64,
    greedy_target: Option<f64>,
) -> Result<EpisodeResult> {
    if strategy == Strategy::Greedy && greedy_target.is_none() {
        return Err(Error::Contract("greedy episodes need an exploration cost target".into()));
    }
    let start = match start_episode(cfg, seed) {
        Ok(s) => s,
        Err((stage, e)) => return Ok(EpisodeResult::failed(strategy, seed, stage, &e)),
    };
    match play(strategy, cfg, seed, greedy_target, &start) {
        Ok(r) => Ok(r),
        Err((stage, e)) => Ok(EpisodeResult::failed(strategy, seed, stage, &e)),
    }
}

fn play(
    strategy: Strategy,
    cfg: &ExperimentConfig,
    seed: u64,
    greedy_target: Option<f64>,
    start: &EpisodeStart,
) -> std::result::Result<EpisodeResult, (&'static str, Error)> {
    let sys = &cfg.true_system;
    let opts = cfg.synthesis_options();
    let mut noise = rng_stream(seed, STREAM_EXPLORE);
    let mut sigma_e = None;

    let explore_traj = match strategy {
        Strategy::Nominal => {
            let mut c = realize_controller(&start.robust.phi).map_err(|e| ("explore", e))?;
            simulate_with(sys, &mut c, cfg.explore, &mut noise)
        }
        Strategy::Dual => {
            let setup = DualSetup {
                horizon: cfg.horizon,
                explore: cfg.explore,
                grid: cfg.lambda2_grid.clone(),
            };
            let plan = dual_synthesis_from(&start.model, &cfg.weights, cfg.fir_len, &setup, &start.robust, &opts)
                .map_err(|e| ("dual synthesis", e))?;
            let mut c = realize_controller(&plan.phi1).map_err(|e| ("explore", e))?;
            simulate_with(sys, &mut c, cfg.explore, &mut noise)
        }
        Strategy::Greedy => {
            let target = greedy_target.unwrap_or_default();
            let sigma =
                tune_greedy_sigma_sls(cfg, &start.robust.phi, target).map_err(|e| ("greedy tuning", e))?;
            sigma_e = Some(sigma);
            let inner = realize_controller(&start.robust.phi).map_err(|e| ("explore", e))?;
            let mut c = Excited::new(inner, sigma, rng_stream(seed, STREAM_EXCITATION));
            simulate_with(sys, &mut c, cfg.explore, &mut noise)
        }
    }
    .map_err(|e| ("explore", e))?;
    let explore_cost = evaluate_cost(&explore_traj, &cfg.weights, 1, cfg.explore).map_err(|e| ("explore", e))?;

    let x_next = explore_traj.terminal.clone();
    let mut new_data = Dataset::new(sys.n_x(), sys.n_u());
    new_data.push(explore_traj).map_err(|e| ("identify", e))?;
    let data = merge(&start.data, &new_data).map_err(|e| ("identify", e))?;
    let model = build_model_with(&data, sys.sigma_w, cfg.delta, cfg.chi2_convention).map_err(|e| ("identify", e))?;
    let phase2 = robust_synthesis_with(&model, &cfg.weights, cfg.fir_len, &opts).map_err(|e| ("exploit", e))?;

    let exploit_len = cfg.horizon - cfg.explore;
    let mut c = realize_controller(&phase2.phi).map_err(|e| ("exploit", e))?;
    let mut noise = rng_stream(seed, STREAM_EXPLOIT);
    let traj = simulate_from(sys, &mut c, x_next, exploit_len, &mut noise).map_err(|e| ("exploit", e))?;
    let exploit_cost = evaluate_cost(&traj, &cfg.weights, 1, exploit_len).map_err(|e| ("exploit", e))?;

    Ok(EpisodeResult {
        strategy,
        seed,
        explore_cost,
        exploit_cost,
        total_cost: explore_cost + exploit_cost,
        phase2_status: Some(phase2.solver.status),
        failure: None,
        sigma_e,
    })
}

/// Solves `T_e · cost(σ) = target` for σ ≥ 0 by bisection, where `cost` is
/// nondecreasing. Returns 0 when the target is below `cost(0)`.
fn bisect_sigma(explore: usize, target: f64, cost: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Contract(format!("exploration target must be finite and nonnegative, got {target}")));
    }
    let scaled = |s: f64| cost(s).map(|c| c * explore as f64);
    let base = scaled(0.0)?;
    if target <= base {
        if target < base {
            log::warn!("exploration target {target:.6e} is below the unexcited cost {base:.6e}; using sigma = 0");
        }
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while scaled(hi)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Contract(format!("no excitation level reaches the target {target:.6e}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = scaled(mid)?;
        if (c - target).abs() <= 1e-10 * target || hi - lo <= 1e-15 * hi {
            return Ok(mid);
        }
        if c < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Excitation level for `u = Kx + e` whose expected exploration cost on the
/// true plant equals `target`.
pub fn tune_greedy_sigma(cfg: &ExperimentConfig, k_nominal: &DMatrix<f64>, target: f64) -> Result<f64> {
    let sys = &cfg.true_system;
    let rho = crate::linalg::spectral_radius(&(&sys.a + &sys.b * k_nominal))?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    bisect_sigma(cfg.explore, target, |s| {
        stationary_cost_with_excitation(sys, k_nominal, s, &cfg.weights)
    })
}

/// As [`tune_greedy_sigma`] for the realized FIR controller `phi`.
pub fn tune_greedy_sigma_sls(cfg: &ExperimentConfig, phi: &FirPair, target: f64) -> Result<f64> {
    let sys = &cfg.true_system;
    bisect_sigma(cfg.explore, target, |s| stationary_cost_sls(sys, phi, s, &cfg.weights))
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: usize,
    pub strategy: Strategy,
    pub explore_cost: Option<f64>,
    pub exploit_cost: Option<f64>,
    pub total_cost: Option<f64>,
    pub norm_explore: Option<f64>,
    pub norm_exploit: Option<f64>,
    pub norm_total: Option<f64>,
    pub status: String,
    pub seed: u64,
}

impl ResultRow {
    pub fn normalized(&self, phase: Phase) -> Option<f64> {
        match phase {
            Phase::Explore => self.norm_explore,
            Phase::Exploit => self.norm_exploit,
            Phase::Total => self.norm_total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub phase: Phase,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub n: usize,
    pub failures: usize,
}

/// One-sided paired comparison `H1: mean(a − b) < 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

pub fn paired_one_sided(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract(format!(
            "paired test needs two equal samples of size >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = Data::new(a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let n = a.len();
    let mean = d.mean().unwrap_or(f64::NAN);
    let sd = d.std_dev().unwrap_or(f64::NAN);
    let (t, p) = if sd > 0.0 {
        let t = mean / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Contract(e.to_string()))?;
        (t, dist.cdf(t))
    } else if mean < 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (f64::INFINITY, 1.0)
    };
    Ok(PairedTest {
        n,
        mean_diff: mean,
        t_statistic: t,
        p_value: p,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub greedy_target: Option<f64>,
    /// Ordered by run, then strategy.
    pub episodes: Vec<(usize, EpisodeResult)>,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Normalized total cost of dual against nominal.
    pub dual_vs_nominal: Option<PairedTest>,
    pub dual_vs_greedy: Option<PairedTest>,
}

impl MonteCarloReport {
    pub fn aggregate(&self, strategy: Strategy, phase: Phase) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|r| r.strategy == strategy && r.phase == phase)
    }

    pub fn write_results_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.aggregates {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Long-format normalized costs: `strategy, phase, run_id, value`.
    pub fn write_plot_data<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["strategy", "phase", "run_id", "value"])?;
        for phase in Phase::ALL {
            for r in &self.rows {
                if let Some(v) = r.normalized(phase) {
                    wr.serialize((r.strategy, phase, r.run_id, v))?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs every strategy `cfg.mc_runs` times with paired seeds on the current
/// rayon pool.
pub fn monte_carlo(cfg: &ExperimentConfig) -> Result<MonteCarloReport> {
    monte_carlo_with(cfg, &Strategy::ALL)
}

pub fn monte_carlo_with(cfg: &ExperimentConfig, strategies: &[Strategy]) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let mut strategies = strategies.to_vec();
    strategies.sort();
    strategies.dedup();
    if !strategies.contains(&Strategy::Nominal) {
        return Err(Error::Contract("the nominal strategy is required for normalization".into()));
    }
    let greedy = strategies.contains(&Strategy::Greedy);
    let first: Vec<Strategy> = strategies.iter().copied().filter(|s| *s != Strategy::Greedy).collect();
    if greedy && !first.contains(&Strategy::Dual) {
        return Err(Error::Contract("greedy tuning needs the dual strategy".into()));
    }

    let pass1: Vec<Vec<EpisodeResult>> = (0..cfg.mc_runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.run_seed(run);
            first.iter().map(|&s| run_episode(s, cfg, seed, None)).collect()
        })
        .collect::<Result<_>>()?;

    let greedy_target = if greedy {
        let pilot: Vec<f64> = pass1
            .iter()
            .take(cfg.pilot_runs.max(1))
            .flat_map(|eps| eps.iter().filter(|e| e.strategy == Strategy::Dual && e.succeeded()))
            .map(|e| e.explore_cost)
            .collect();
        if pilot.is_empty() {
            return Err(Error::Infeasible {
                stage: "greedy tuning".into(),
                detail: "every dual pilot episode failed".into(),
            });
        }
        Some(pilot.iter().sum::<f64>() / pilot.len() as f64)
    } else {
        None
    };

    let pass2: Vec<Option<EpisodeResult>> = (0..cfg.mc_runs)
        .into_par_iter()
        .map(|run| match greedy_target {
            Some(t) => run_episode(Strategy::Greedy, cfg, cfg.run_seed(run), Some(t)).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;

    let mut episodes = Vec::with_capacity(cfg.mc_runs * strategies.len());
    for (run, (eps, g)) in pass1.into_iter().zip(pass2).enumerate() {
        for e in eps.into_iter().chain(g) {
            episodes.push((run, e));
        }
    }
    summarize(cfg.mc_runs, &strategies, greedy_target, episodes)
}

fn summarize(
    runs: usize,
    strategies: &[Strategy],
    greedy_target: Option<f64>,
    episodes: Vec<(usize, EpisodeResult)>,
) -> Result<MonteCarloReport> {
    let nominal: Vec<Option<&EpisodeResult>> = (0..runs)
        .map(|run| {
            episodes
                .iter()
                .find(|(r, e)| *r == run && e.strategy == Strategy::Nominal && e.succeeded())
                .map(|(_, e)| e)
        })
        .collect();

    let rows: Vec<ResultRow> = episodes
        .iter()
        .map(|(run, e)| {
            let ok = e.succeeded();
            let norm = |p: Phase| match nominal[*run] {
                Some(n) if ok => Some(e.cost(p) / n.cost(p)),
                _ => None,
            };
            let raw = |v: f64| if ok { Some(v) } else { None };
            let status = match (&e.failure, nominal[*run]) {
                (Some(f), _) => format!("failed ({f})"),
                (None, None) => "unnormalized (nominal failed)".into(),
                (None, Some(_)) => "ok".into(),
            };
            ResultRow {
                run_id: *run,
                strategy: e.strategy,
                explore_cost: raw(e.explore_cost),
                exploit_cost: raw(e.exploit_cost),
                total_cost: raw(e.total_cost),
                norm_explore: norm(Phase::Explore),
                norm_exploit: norm(Phase::Exploit),
                norm_total: norm(Phase::Total),
                status,
                seed: e.seed,
            }
        })
        .collect();

    let mut aggregates = Vec::new();
    for &s in strategies {
        for phase in Phase::ALL {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.strategy == s)
                .filter_map(|r| r.normalized(phase))
                .collect();
            let n = values.len();
            let mut data = Data::new(values);
            let stat = |v: f64| if n > 0 { Some(v) } else { None };
            aggregates.push(AggregateRow {
                strategy: s,
                phase,
                mean: data.mean().filter(|_| n > 0),
                median: stat(data.median()),
                q25: stat(data.lower_quartile()),
                q75: stat(data.upper_quartile()),
                n,
                failures: runs - n,
            });
        }
    }
    if aggregates.iter().all(|a| a.n == 0) {
        return Err(Error::Infeasible {
            stage: "monte carlo".into(),
            detail: format!("all {runs} runs failed"),
        });
    }

    let paired = |other: Strategy| -> Result<Option<PairedTest>> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for run in 0..runs {
            let get = |s: Strategy| {
                rows.iter()
                    .find(|r| r.run_id == run && r.strategy == s)
                    .and_then(|r| r.norm_total)
            };
            if let (Some(x), Some(y)) = (get(Strategy::Dual), get(other)) {
                a.push(x);
                b.push(y);
            }
        }
        if a.len() < 2 {
            return Ok(None);
        }
        paired_one_sided(&a, &b).map(Some)
    };
    let dual_vs_nominal = if strategies.contains(&Strategy::Dual) { paired(Strategy::Nominal)? } else { None };
    let dual_vs_greedy = if strategies.contains(&Strategy::Dual) && strategies.contains(&Strategy::Greedy) {
        paired(Strategy::Greedy)?
    } else {
        None
    };

    Ok(MonteCarloReport {
        greedy_target,
        episodes,
        rows,
        aggregates,
        dual_vs_nominal,
        dual_vs_greedy,
    })
}
