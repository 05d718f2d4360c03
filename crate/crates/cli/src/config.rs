//! TOML run configuration and model files.
//!
//! Matrices are written row-major as nested arrays, e.g.
//! `a_true = [[0.5, 1.1], [0.0, 0.8]]`. Every key is optional at parse time;
//! each command asks for the keys it needs and reports missing ones by name.

use std::fs;
use std::path::{Path, PathBuf};

use dualsls_core::identify::ChiSquareConvention;
use dualsls_core::lin_sys::{CostWeights, LtiSystem};
use dualsls_core::linalg::min_eigenvalue;
use dualsls_core::sdp::SolverSettings;
use dualsls_core::{ExperimentConfig, Lambda2Grid, Model};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub a_true: Option<Vec<Vec<f64>>>,
    pub b_true: Option<Vec<Vec<f64>>>,
    pub sigma_w: Option<f64>,
    pub q: Option<Vec<Vec<f64>>>,
    pub r: Option<Vec<Vec<f64>>>,
    pub delta: Option<f64>,
    pub horizon: Option<usize>,
    pub explore_len: Option<usize>,
    pub fir_len: Option<usize>,
    pub n_init_rollouts: Option<usize>,
    pub init_rollout_len: Option<usize>,
    /// Explicit grid; the default geometric grid is used when absent.
    pub lambda2_grid: Option<Vec<f64>>,
    pub mc_runs: Option<usize>,
    pub seed: Option<u64>,
    pub pilot_runs: Option<usize>,
    pub robust_fallback: Option<f64>,
    /// `upper_tail` (default) or `lower_tail`.
    pub chi2_convention: Option<ChiSquareConvention>,
    /// Path of a model file, relative to the configuration file.
    pub model: Option<PathBuf>,
    pub solver: Option<RawSolver>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub feas_tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub infeas_tol: Option<f64>,
    pub step_fraction: Option<f64>,
}

fn config_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn required<T: Clone>(v: &Option<T>, field: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| config_err(field, format!("missing required key `{field}`")))
}

pub fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(config_err(field, "matrix must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != m) {
        return Err(config_err(field, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(config_err(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn psd_weight(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, CliError> {
    let m = matrix(rows, field)?;
    if !m.is_square() {
        return Err(config_err(field, format!("must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if (&m - m.transpose()).amax() > 1e-10 * (1.0 + m.amax()) {
        return Err(config_err(field, "must be symmetric"));
    }
    if min_eigenvalue(&m) < -1e-10 * (1.0 + m.amax()) {
        return Err(config_err(field, "must be positive semidefinite"));
    }
    Ok(m)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_string();
            config_err(&field, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(m), Some(dir)) = (&cfg.model, path.parent()) {
            if m.is_relative() {
                cfg.model = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn delta(&self) -> Result<f64, CliError> {
        let d = required(&self.delta, "delta")?;
        if !(d > 0.0 && d < 1.0) {
            return Err(config_err("delta", format!("must lie in (0, 1), got {d}")));
        }
        Ok(d)
    }

    pub fn sigma_w(&self) -> Result<f64, CliError> {
        let s = required(&self.sigma_w, "sigma_w")?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(config_err("sigma_w", format!("must be positive, got {s}")));
        }
        Ok(s)
    }

    pub fn weights(&self) -> Result<CostWeights, CliError> {
        let q = psd_weight(&required(&self.q, "q")?, "q")?;
        let r = psd_weight(&required(&self.r, "r")?, "r")?;
        Ok(CostWeights::new(q, r)?)
    }

    pub fn fir_len(&self) -> Result<usize, CliError> {
        let f = required(&self.fir_len, "fir_len")?;
        if f < 1 {
            return Err(config_err("fir_len", "must be at least 1"));
        }
        Ok(f)
    }

    /// `(T, T_e)`.
    pub fn horizons(&self) -> Result<(usize, usize), CliError> {
        let t = required(&self.horizon, "horizon")?;
        let te = required(&self.explore_len, "explore_len")?;
        if te < 1 || te >= t {
            return Err(config_err(
                "explore_len",
                format!("must satisfy 1 <= explore_len < horizon, got {te} with horizon {t}"),
            ));
        }
        Ok((t, te))
    }

    pub fn lambda2_grid(&self) -> Result<Lambda2Grid, CliError> {
        let grid = match &self.lambda2_grid {
            None => Lambda2Grid::default(),
            Some(v) => Lambda2Grid::Explicit(v.clone()),
        };
        grid.values(None)
            .map_err(|e| config_err("lambda2_grid", e.to_string()))?;
        Ok(grid)
    }

    pub fn solver(&self) -> Result<SolverSettings, CliError> {
        let mut s = SolverSettings::default();
        if let Some(raw) = &self.solver {
            let positive = |v: Option<f64>, field: &str, slot: &mut f64| -> Result<(), CliError> {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(config_err(field, format!("must be positive, got {v}")));
                    }
                    *slot = v;
                }
                Ok(())
            };
            positive(raw.feas_tol, "solver.feas_tol", &mut s.feas_tol)?;
            positive(raw.gap_tol, "solver.gap_tol", &mut s.gap_tol)?;
            positive(raw.infeas_tol, "solver.infeas_tol", &mut s.infeas_tol)?;
            positive(raw.step_fraction, "solver.step_fraction", &mut s.step_fraction)?;
            if s.step_fraction >= 1.0 {
                return Err(config_err("solver.step_fraction", "must be below 1"));
            }
            if let Some(m) = raw.max_iter {
                s.max_iter = m;
            }
        }
        Ok(s)
    }

    pub fn robust_fallback(&self) -> Result<Option<f64>, CliError> {
        match self.robust_fallback {
            Some(f) if !(f > 1.0 && f.is_finite()) => {
                Err(config_err("robust_fallback", format!("must exceed 1, got {f}")))
            }
            f => Ok(f),
        }
    }

    pub fn true_system(&self) -> Result<LtiSystem, CliError> {
        let a = matrix(&required(&self.a_true, "a_true")?, "a_true")?;
        let b = matrix(&required(&self.b_true, "b_true")?, "b_true")?;
        if !a.is_square() {
            return Err(config_err("a_true", "must be square"));
        }
        if b.nrows() != a.nrows() {
            return Err(config_err("b_true", format!("must have {} rows", a.nrows())));
        }
        Ok(LtiSystem::new(a, b, self.sigma_w()?)?)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let true_system = self.true_system()?;
        let weights = self.weights()?;
        if weights.q.nrows() != true_system.n_x() {
            return Err(config_err("q", format!("must be {0}x{0}", true_system.n_x())));
        }
        if weights.r.nrows() != true_system.n_u() {
            return Err(config_err("r", format!("must be {0}x{0}", true_system.n_u())));
        }
        let (horizon, explore) = self.horizons()?;
        let defaults = ExperimentConfig::default();
        let n_init_rollouts = self.n_init_rollouts.unwrap_or(defaults.n_init_rollouts);
        if n_init_rollouts < 1 {
            return Err(config_err("n_init_rollouts", "must be at least 1"));
        }
        let init_rollout_len = self.init_rollout_len.unwrap_or(defaults.init_rollout_len);
        if init_rollout_len < 2 {
            return Err(config_err("init_rollout_len", "must be at least 2"));
        }
        let mc_runs = self.mc_runs.unwrap_or(defaults.mc_runs);
        if mc_runs < 1 {
            return Err(config_err("mc_runs", "must be at least 1"));
        }
        let cfg = ExperimentConfig {
            true_system,
            weights,
            delta: self.delta()?,
            horizon,
            explore,
            fir_len: self.fir_len()?,
            n_init_rollouts,
            init_rollout_len,
            lambda2_grid: self.lambda2_grid()?,
            mc_runs,
            master_seed: self.seed.unwrap_or(defaults.master_seed),
            pilot_runs: self.pilot_runs.unwrap_or(defaults.pilot_runs),
            solver: self.solver()?,
            robust_fallback: self.robust_fallback()?,
            chi2_convention: self.chi2_convention.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The model named by `model`.
    pub fn load_model(&self) -> Result<Model, CliError> {
        let path = required(&self.model, "model")?;
        load_model(&path)
    }
}

/// Structured-text form of [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub a_hat: Vec<Vec<f64>>,
    pub b_hat: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub delta: f64,
    pub sigma_w: f64,
    pub c_delta: f64,
}

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        Self {
            a_hat: rows(&m.a_hat),
            b_hat: rows(&m.b_hat),
            d: rows(&m.d),
            delta: m.delta,
            sigma_w: m.sigma_w,
            c_delta: m.c_delta,
        }
    }
}

impl ModelFile {
    pub fn to_model(&self) -> Result<Model, CliError> {
        let a_hat = matrix(&self.a_hat, "a_hat")?;
        let b_hat = matrix(&self.b_hat, "b_hat")?;
        let d = psd_weight(&self.d, "d")?;
        let (n, m) = (a_hat.nrows(), b_hat.ncols());
        if !a_hat.is_square() {
            return Err(config_err("a_hat", "must be square"));
        }
        if b_hat.nrows() != n {
            return Err(config_err("b_hat", format!("must have {n} rows")));
        }
        if d.nrows() != n + m {
            return Err(config_err("d", format!("must be {0}x{0}", n + m)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta", "must lie in (0, 1)"));
        }
        if !(self.sigma_w > 0.0) {
            return Err(config_err("sigma_w", "must be positive"));
        }
        if !(self.c_delta > 0.0) {
            return Err(config_err("c_delta", "must be positive"));
        }
        Ok(Model {
            a_hat,
            b_hat,
            d,
            delta: self.delta,
            sigma_w: self.sigma_w,
            c_delta: self.c_delta,
        })
    }
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = toml::from_str(&text).map_err(|e| config_err("model", e.message().to_string()))?;
    file.to_model()
}

pub fn model_to_string(model: &Model) -> String {
    toml::to_string(&ModelFile::from(model)).expect("model serializes")
}

/// Parses `--lambda2-grid 0.01,0.1,1`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let v = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| config_err("lambda2_grid", format!("`{t}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err(config_err("lambda2_grid", "grid is empty"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
a_true = [[0.5, 1.1], [0.0, 0.8]]
b_true = [[1.0, 0.0], [0.0, 1.0]]
sigma_w = 1.0
q = [[1.0, 0.0], [0.0, 0.001]]
r = [[1000.0, 0.0], [0.0, 1000.0]]
delta = 0.1
horizon = 100
explore_len = 20
fir_len = 12
"#;

    #[test]
    fn example_matches_default_experiment() {
        let cfg = RawConfig::parse(EXAMPLE).unwrap().experiment().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn field_named_rejections() {
        let cases = [
            ("explore_len = 20", "explore_len = 100", "explore_len"),
            ("delta = 0.1", "delta = 1.5", "delta"),
            ("delta = 0.1", "", "delta"),
            ("fir_len = 12", "fir_len = 0", "fir_len"),
            ("q = [[1.0, 0.0], [0.0, 0.001]]", "q = [[1.0, 0.0], [0.0, -1.0]]", "q"),
            ("r = [[1000.0, 0.0], [0.0, 1000.0]]", "r = [[1.0, 2.0], [2.0, 1.0]]", "r"),
            ("sigma_w = 1.0", "sigma_w = 1.0\nbogus = 3", "bogus"),
        ];
        for (from, to, field) in cases {
            let text = EXAMPLE.replace(from, to);
            let err = RawConfig::parse(&text).and_then(|c| c.experiment()).unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert!(err.to_string().contains(field), "{err} should name {field}");
        }
    }

    #[test]
    fn chi2_convention_key() {
        let text = format!("{EXAMPLE}chi2_convention = \"lower_tail\"\n");
        let cfg = RawConfig::parse(&text).unwrap().experiment().unwrap();
        assert_eq!(cfg.chi2_convention, ChiSquareConvention::LowerTail);
        let text = format!("{EXAMPLE}chi2_convention = \"median\"\n");
        assert!(RawConfig::parse(&text).is_err());
    }

    #[test]
    fn grid_flag_parsing() {
        assert_eq!(parse_grid("0.1, 0.5,1").unwrap(), vec![0.1, 0.5, 1.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("0.1,x").is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = Model {
            a_hat: DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-7, 0.8]),
            b_hat: DMatrix::from_row_slice(2, 1, &[1.0, 0.25]),
            d: DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 3.0, 0.2, 0.0, 0.2, 1.0 / 7.0]),
            delta: 0.1,
            sigma_w: 1.0,
            c_delta: 10.64,
        };
        let text = model_to_string(&m);
        let back: ModelFile = toml::from_str(&text).unwrap();
        assert_eq!(back.to_model().unwrap(), m);
    }
}
