//! Robust and dual-control LQR synthesis on FIR system responses.
//!
//! [`identify`] turns rollouts into a nominal model with an ellipsoidal
//! credibility region, [`synthesis`] designs nominal, robust and two-phase
//! dual controllers through [`sdp`], and [`experiments`] compares
//! strategies on a known plant.

pub mod error;
pub mod experiments;
pub mod identify;
pub mod lin_sys;
pub mod linalg;
pub mod sdp;
pub mod sls;
pub mod synthesis;

pub use error::{Error, Result};
pub use experiments::{EpisodeResult, ExperimentConfig, MonteCarloReport, Phase, Strategy};
pub use identify::{Dataset, Model};
pub use lin_sys::{CostWeights, LtiSystem, Trajectory};
pub use sdp::{SolverSettings, Status};
pub use sls::FirPair;
pub use synthesis::{DualPlan, DualSetup, Lambda2Grid, SynthesisOptions, SynthesisResult};
