//! Event-sourced arena core.
//!
//! The vote log is the single source of truth: [`ArenaState`] is a pure fold
//! of the log over the configuration, and everything a rater or admin sees is
//! derived from it. [`ArenaService`] adds the transient pieces (profiles,
//! open sessions, outstanding matches) and funnels every mutation through one
//! writer.

pub mod blinding;
pub mod config;
pub mod event;
pub mod service;
pub mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::ExpertId;
use crate::leaderboard::LeaderboardError;
use crate::matchmaker::MatchError;

pub use config::{ArenaConfig, ArtifactEntry, Constraints, PromptKind, PromptRecord, ToolEntry};
pub use event::{Choice, FileStore, LogError, MemoryStore, Store, VoteEvent};
pub use service::{
    AdminLeaderboard, ArenaService, CallAudit, Clock, MatchView, OnboardReceipt, ProfileFields,
    PublicRow, SessionView, StepClock, SystemClock, VoteReceipt, INSTRUCTION,
};
pub use state::{ArenaState, ExpertState, MAX_SESSIONS, MAX_VOTES, SESSION_TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Designer,
    #[serde(alias = "Web Developer")]
    WebDeveloper,
    Researcher,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertProfile {
    pub expert_id: ExpertId,
    pub access_code_hash: String,
    pub first_name: String,
    pub last_name: String,
    /// Multi-select, never empty.
    pub roles: Vec<Role>,
    pub used_ai_tools_before: bool,
    pub created_at: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown access code")]
    BadAccessCode,
    #[error("unknown or expired token")]
    BadToken,
    #[error("profile incomplete; missing: {}", .0.join(", "))]
    IncompleteProfile(Vec<String>),
    #[error("expert has not completed onboarding")]
    NotOnboarded,
    #[error("no open session; start a session first")]
    SessionClosed,
    #[error("vote quota reached")]
    QuotaExceeded,
    #[error("match `{0}` is not the outstanding match for this expert")]
    StaleMatch(String),
    #[error("vote rejected: both projects must be viewed in full first")]
    NotViewed,
    #[error("event id {found} out of sequence (expected {expected})")]
    OutOfSequence { expected: u64, found: u64 },
    #[error("corrupt event log at offset {offset} (event_id {event_id}): {reason}")]
    CorruptLog {
        offset: usize,
        event_id: u64,
        reason: String,
    },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("admin token required")]
    Forbidden,
    #[error("configuration can only be replaced before the first vote")]
    LogNotEmpty,
    #[error("unknown artifact slot")]
    UnknownSlot,
    #[error("storage failure: {0}")]
    Storage(String),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Leaderboard(#[from] LeaderboardError),
}

impl ArenaError {
    /// Stable machine-readable code for problem documents.
    pub fn code(&self) -> &'static str {
        match self {
            ArenaError::Config(_) => "invalid-config",
            ArenaError::BadAccessCode => "bad-access-code",
            ArenaError::BadToken => "bad-token",
            ArenaError::IncompleteProfile(_) => "incomplete-profile",
            ArenaError::NotOnboarded => "not-onboarded",
            ArenaError::SessionClosed => "session-closed",
            ArenaError::QuotaExceeded => "quota-exceeded",
            ArenaError::StaleMatch(_) => "stale-match",
            ArenaError::NotViewed => "rejected-unviewed",
            ArenaError::OutOfSequence { .. } | ArenaError::CorruptLog { .. } => "corrupt-log",
            ArenaError::InvalidEvent(_) => "invalid-event",
            ArenaError::Forbidden => "forbidden",
            ArenaError::LogNotEmpty => "log-not-empty",
            ArenaError::UnknownSlot => "unknown-slot",
            ArenaError::Storage(_) => "storage",
            ArenaError::Match(MatchError::EmptyCatalog) => "empty-catalog",
            ArenaError::Match(MatchError::InsufficientTools(_)) => "insufficient-tools",
            ArenaError::Match(MatchError::PairsExhausted) => "pairs-exhausted",
            ArenaError::Leaderboard(_) => "leaderboard",
        }
    }

    /// HTTP status conventionally paired with [`ArenaError::code`].
    pub fn status(&self) -> u16 {
        match self {
            ArenaError::Config(_) | ArenaError::IncompleteProfile(_) | ArenaError::InvalidEvent(_) => 400,
            ArenaError::BadAccessCode | ArenaError::BadToken => 401,
            ArenaError::Forbidden | ArenaError::NotOnboarded => 403,
            ArenaError::UnknownSlot => 404,
            ArenaError::SessionClosed
            | ArenaError::StaleMatch(_)
            | ArenaError::LogNotEmpty
            | ArenaError::OutOfSequence { .. } => 409,
            ArenaError::NotViewed => 422,
            ArenaError::QuotaExceeded => 429,
            ArenaError::Match(_) | ArenaError::Leaderboard(_) => 422,
            ArenaError::CorruptLog { .. } | ArenaError::Storage(_) => 500,
        }
    }
}
