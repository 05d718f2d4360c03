//! Shared fixtures for the benchmarks.

use dualsls_core::experiments::generate_initial_data;
use dualsls_core::identify::build_model;
use dualsls_core::{ExperimentConfig, Model};
use nalgebra::DMatrix;

/// Model identified from the default experiment's initial data.
pub fn example_model(seed: u64) -> Model {
    let cfg = ExperimentConfig::default();
    let data = generate_initial_data(&cfg.true_system, cfg.n_init_rollouts, cfg.init_rollout_len, seed)
        .expect("initial data");
    build_model(&data, cfg.true_system.sigma_w, cfg.delta).expect("model")
}

/// Deterministic FIR taps with decaying magnitude.
pub fn decaying_taps(rows: usize, cols: usize, f: usize) -> Vec<DMatrix<f64>> {
    (0..f)
        .map(|k| {
            DMatrix::from_fn(rows, cols, |i, j| {
                let phase = (1 + i + 2 * j + 3 * k) as f64;
                phase.sin() * 0.8f64.powi(k as i32)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_usable() {
        let m = example_model(1);
        assert_eq!(m.d.shape(), (4, 4));
        let taps = decaying_taps(2, 3, 5);
        assert_eq!(taps.len(), 5);
        assert!(taps[4].amax() < taps[0].amax() + 1.0);
    }
}
