//! Synthetic raters driving the real service core, for checking that the
//! arena recovers a known ranking.

pub mod experiment;
pub mod metrics;
pub mod model;

use thiserror::Error;

use crate::arena::ArenaError;
use crate::leaderboard::LeaderboardError;

pub use experiment::{
    report_table, run_experiment, run_experiment_detailed, run_seeds, summarize,
    ExperimentConfig, ExperimentReport, ExperimentRun, ExperimentSummary, ToolReport,
};
pub use metrics::{kendall_tau, spearman_rho};
pub use model::{make_ground_truth, simulate_vote, GroundTruth, RaterKind, RaterModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Arena(#[from] ArenaError),
}

impl From<LeaderboardError> for SimError {
    fn from(e: LeaderboardError) -> Self {
        SimError::Arena(e.into())
    }
}
