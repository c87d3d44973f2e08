//! Core of a blinded pairwise-comparison arena for ranking generated sites.
//!
//! * [`rating`]: two-player, no-draw TrueSkill math.
//! * [`leaderboard`]: per-prompt rating tables and the aggregated tool board.
//! * [`matchmaker`]: two-phase prompt selection and scored pair selection.
//! * [`arena`]: the event-sourced service core (onboarding, sessions,
//!   blinded matches, votes, replay).
//! * [`sim`]: synthetic raters and rank-recovery experiments.

pub mod arena;
pub mod gaussian;
pub mod ids;
pub mod leaderboard;
pub mod matchmaker;
pub mod rating;
pub mod rng;
pub mod sim;

pub use ids::{ExpertId, MatchId, PromptId, ToolId, ToolPair};
pub use leaderboard::{LeaderboardRow, RatingTable, SigmaPolicy};
pub use rating::{Rating, TrueSkillParams};
