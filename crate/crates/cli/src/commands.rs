use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dualsls_core::experiments::monte_carlo;
use dualsls_core::identify::build_model_with;
use dualsls_core::lin_sys::{closed_loop_matrix, spectral_radius};
use dualsls_core::sls::robust_lmi_min_eigenvalue;
use dualsls_core::synthesis::{
    dual_synthesis, nominal_synthesis_with, robust_synthesis_with, GridPoint, SolverReport,
};
use dualsls_core::{Dataset, DualSetup, FirPair, Lambda2Grid, Model, SynthesisOptions};
use serde::{Deserialize, Serialize};

use crate::config::{matrix, model_to_string, rows, RawConfig};
use crate::manifest::{RunManifest, RunStats};
use crate::CliError;

pub const RESULTS_CSV: &str = "results.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const PLOT_DATA_CSV: &str = "plot_data.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Fits a model to the rollouts in `data` and writes it to `out`.
pub fn identify(config: &Path, data: &Path, out: &Path) -> Result<Model, CliError> {
    let cfg = RawConfig::load(config)?;
    let delta = cfg.delta()?;
    let sigma_w = cfg.sigma_w()?;
    let file = File::open(data).map_err(|e| CliError::io(data, e))?;
    let dataset = Dataset::read_csv(file)?;
    let model = build_model_with(&dataset, sigma_w, delta, cfg.chi2_convention.unwrap_or_default())?;
    write_text(out, &model_to_string(&model))?;
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    Nominal,
    Robust,
    Dual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirReport {
    pub phi_x: Vec<Vec<Vec<f64>>>,
    pub phi_u: Vec<Vec<Vec<f64>>>,
}

impl From<&FirPair> for FirReport {
    fn from(p: &FirPair) -> Self {
        Self {
            phi_x: p.phi_x.iter().map(rows).collect(),
            phi_u: p.phi_u.iter().map(rows).collect(),
        }
    }
}

impl FirReport {
    pub fn to_fir(&self) -> Result<FirPair, CliError> {
        let phi_x = self.phi_x.iter().map(|m| matrix(m, "phi_x")).collect::<Result<_, _>>()?;
        let phi_u = self.phi_u.iter().map(|m| matrix(m, "phi_u")).collect::<Result<_, _>>()?;
        Ok(FirPair::new(phi_x, phi_u)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub gamma: f64,
    pub structure_violation: f64,
    /// Smallest eigenvalue of the robust stability block at the solution.
    pub lmi_min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub horizon: usize,
    pub explore_len: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub objective: f64,
    pub cost_explore: f64,
    pub cost_exploit: f64,
    pub phi2_planned: FirReport,
    pub grid: Vec<GridPoint>,
}

/// Output of `synth`. For dual mode `phi` is the exploration response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub mode: SynthMode,
    pub fir_len: usize,
    pub cost: f64,
    pub lambda: Option<f64>,
    pub heuristic: bool,
    pub nominal_spectral_radius: f64,
    pub phi: FirReport,
    pub certificate: Option<CertificateReport>,
    pub solver: SolverReport,
    pub dual: Option<DualReport>,
}

pub fn synth(
    config: &Path,
    mode: SynthMode,
    out: &Path,
    grid_override: Option<Vec<f64>>,
) -> Result<SynthReport, CliError> {
    let mut cfg = RawConfig::load(config)?;
    if grid_override.is_some() {
        cfg.lambda2_grid = grid_override;
    }
    let weights = cfg.weights()?;
    let f = cfg.fir_len()?;
    let opts = SynthesisOptions {
        solver: cfg.solver()?,
        robust_fallback: cfg.robust_fallback()?,
    };
    let (setup, grid) = match mode {
        SynthMode::Dual => {
            let (horizon, explore) = cfg.horizons()?;
            let grid = cfg.lambda2_grid()?;
            (Some((horizon, explore)), Some(grid))
        }
        _ => (None, None),
    };
    let model = cfg.load_model()?;
    if weights.q.nrows() != model.n_x() || weights.r.nrows() != model.n_u() {
        return Err(CliError::Config {
            field: "q".into(),
            message: "weights do not match the model dimensions".into(),
        });
    }

    let report = match mode {
        SynthMode::Nominal | SynthMode::Robust => {
            let res = if mode == SynthMode::Nominal {
                nominal_synthesis_with(&model, &weights, f, &opts)?
            } else {
                robust_synthesis_with(&model, &weights, f, &opts)?
            };
            let certificate = match (&res.certificate, res.lambda) {
                (Some(c), Some(l)) => Some(CertificateReport {
                    gamma: c.gamma,
                    structure_violation: c.structure_violation(model.n_x()),
                    lmi_min_eigenvalue: robust_lmi_min_eigenvalue(&res.phi.stack(), &c.p, l, &model.d)?,
                }),
                _ => None,
            };
            SynthReport {
                mode,
                fir_len: f,
                cost: res.cost,
                lambda: res.lambda,
                heuristic: res.heuristic,
                nominal_spectral_radius: nominal_radius(&model, &res.phi)?,
                phi: FirReport::from(&res.phi),
                certificate,
                solver: res.solver,
                dual: None,
            }
        }
        SynthMode::Dual => {
            let (horizon, explore) = setup.expect("dual horizons");
            let setup = DualSetup {
                horizon,
                explore,
                grid: grid.unwrap_or_else(Lambda2Grid::default),
            };
            let plan = dual_synthesis(&model, &weights, f, &setup, &opts)?;
            SynthReport {
                mode,
                fir_len: f,
                cost: plan.cost1,
                lambda: Some(plan.lambda1),
                heuristic: false,
                nominal_spectral_radius: nominal_radius(&model, &plan.phi1)?,
                phi: FirReport::from(&plan.phi1),
                certificate: None,
                solver: plan.solver.clone(),
                dual: Some(DualReport {
                    horizon,
                    explore_len: explore,
                    lambda1: plan.lambda1,
                    lambda2: plan.lambda2,
                    objective: plan.objective,
                    cost_explore: plan.cost1,
                    cost_exploit: plan.cost2,
                    phi2_planned: FirReport::from(&plan.phi2_planned),
                    grid: plan.table,
                }),
            }
        }
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_text(out, &text)?;
    Ok(report)
}

fn nominal_radius(model: &Model, phi: &FirPair) -> Result<f64, CliError> {
    Ok(spectral_radius(&closed_loop_matrix(&model.a_hat, &model.b_hat, phi)?)?)
}

/// Overrides applied on top of a configuration or manifest.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOverrides {
    pub seed: Option<u64>,
    pub mc_runs: Option<usize>,
    pub lambda2_grid: Option<Vec<f64>>,
    pub jobs: Option<usize>,
}

pub enum ExperimentSource<'a> {
    Config(&'a Path),
    Manifest(&'a Path),
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs the Monte Carlo comparison and writes its CSVs and manifest into
/// `out_dir`.
pub fn experiment(
    source: ExperimentSource<'_>,
    out_dir: &Path,
    overrides: &ExperimentOverrides,
) -> Result<RunManifest, CliError> {
    let started_at = unix_now();
    let mut raw = match source {
        ExperimentSource::Config(p) => RawConfig::load(p)?,
        ExperimentSource::Manifest(p) => RunManifest::load(p)?.config,
    };
    if let Some(s) = overrides.seed {
        raw.seed = Some(s);
    }
    if let Some(n) = overrides.mc_runs {
        raw.mc_runs = Some(n);
    }
    if let Some(g) = &overrides.lambda2_grid {
        raw.lambda2_grid = Some(g.clone());
    }
    let cfg = raw.experiment()?;
    // snapshot with every default filled in
    raw.seed = Some(cfg.master_seed);
    raw.mc_runs = Some(cfg.mc_runs);
    raw.n_init_rollouts = Some(cfg.n_init_rollouts);
    raw.init_rollout_len = Some(cfg.init_rollout_len);
    raw.pilot_runs = Some(cfg.pilot_runs);
    raw.model = None;

    let report = match overrides.jobs {
        Some(0) => {
            return Err(CliError::Config {
                field: "jobs".into(),
                message: "must be at least 1".into(),
            })
        }
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Config {
                field: "jobs".into(),
                message: e.to_string(),
            })?
            .install(|| monte_carlo(&cfg))?,
        None => monte_carlo(&cfg)?,
    };

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let create = |name: &str| -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = out_dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok((path, BufWriter::new(f)))
    };
    let (_, w) = create(RESULTS_CSV)?;
    report.write_results_csv(w)?;
    let (_, w) = create(AGGREGATE_CSV)?;
    report.write_aggregate_csv(w)?;
    let (_, w) = create(PLOT_DATA_CSV)?;
    report.write_plot_data(w)?;

    let outputs: BTreeMap<String, String> = [
        ("results", RESULTS_CSV),
        ("aggregate", AGGREGATE_CSV),
        ("plot_data", PLOT_DATA_CSV),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let manifest = RunManifest {
        tool: "dualsls".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "experiment".into(),
        started_at,
        finished_at: unix_now(),
        master_seed: cfg.master_seed,
        config: raw,
        outputs,
        stats: RunStats::from_report(&report),
    };
    manifest.write(&out_dir.join(MANIFEST_JSON))?;
    Ok(manifest)
}
