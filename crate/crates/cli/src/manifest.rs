use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dualsls_core::experiments::{MonteCarloReport, PairedTest, Strategy};
use serde::{Deserialize, Serialize};

use crate::config::RawConfig;
use crate::CliError;

/// Record of one experiment run. `config` is the effective configuration
/// after command-line overrides, so it alone reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Unix seconds.
    pub started_at: u64,
    pub finished_at: u64,
    pub master_seed: u64,
    pub config: RawConfig,
    /// File names relative to the manifest's directory.
    pub outputs: BTreeMap<String, String>,
    pub stats: RunStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub episodes: usize,
    pub failures: BTreeMap<String, usize>,
    /// Solver status of the exploitation re-synthesis, counted per strategy.
    pub phase2_status: BTreeMap<String, BTreeMap<String, usize>>,
    pub greedy_target: Option<f64>,
    pub dual_vs_nominal: Option<PairedTest>,
    pub dual_vs_greedy: Option<PairedTest>,
}

impl RunStats {
    pub fn from_report(report: &MonteCarloReport) -> Self {
        let mut stats = RunStats {
            episodes: report.episodes.len(),
            greedy_target: report.greedy_target,
            dual_vs_nominal: report.dual_vs_nominal.clone(),
            dual_vs_greedy: report.dual_vs_greedy.clone(),
            ..Self::default()
        };
        for s in Strategy::ALL {
            if report.episodes.iter().any(|(_, e)| e.strategy == s) {
                stats.failures.insert(s.to_string(), 0);
            }
        }
        for (_, e) in &report.episodes {
            if !e.succeeded() {
                *stats.failures.entry(e.strategy.to_string()).or_default() += 1;
            }
            let status = e.phase2_status.map_or("not reached".to_string(), |s| s.to_string());
            *stats
                .phase2_status
                .entry(e.strategy.to_string())
                .or_default()
                .entry(status)
                .or_default() += 1;
        }
        stats
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            field: "manifest".into(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}
