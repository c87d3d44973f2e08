//! Arena state derived purely from the configuration and the vote log.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ArenaConfig, ArenaError, VoteEvent};
use crate::ids::{ExpertId, PromptId, ToolId, ToolPair};
use crate::leaderboard::RatingTable;
use crate::rng::{self, Purpose};

/// Votes per session.
pub const SESSION_TARGET: u32 = 30;
/// Sessions an expert may run (two regular plus one bonus).
pub const MAX_SESSIONS: u32 = 3;
/// Lifetime vote quota per expert.
pub const MAX_VOTES: u32 = SESSION_TARGET * MAX_SESSIONS;

/// Per-rater progress. Created lazily on the expert's first vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertState {
    pub expert_id: ExpertId,
    /// Votes cast so far.
    pub round: u32,
    /// Multiset of prompts served.
    pub prompts_seen: BTreeMap<PromptId, u32>,
    /// prompt -> pair key -> times this expert judged that pair on that prompt.
    pub pairs_seen: BTreeMap<PromptId, BTreeMap<String, u32>>,
    /// Seeded permutation of the playable prompts, used for the first rounds.
    pub base_order: Vec<PromptId>,
    /// 1-based index of the session the latest vote belongs to (0 before any vote).
    pub session_index: u32,
    pub votes_in_session: u32,
}

impl ExpertState {
    pub fn new(expert_id: ExpertId, playable: &[PromptId], seed: u64) -> Self {
        let mut base_order = playable.to_vec();
        base_order.shuffle(&mut rng::stream(
            seed,
            Purpose::BaseOrder,
            expert_id.as_str(),
            0,
        ));
        Self {
            expert_id,
            round: 0,
            prompts_seen: BTreeMap::new(),
            pairs_seen: BTreeMap::new(),
            base_order,
            session_index: 0,
            votes_in_session: 0,
        }
    }

    pub fn pair_count(&self, prompt: &PromptId, pair: &ToolPair) -> u32 {
        self.pairs_seen
            .get(prompt)
            .and_then(|m| m.get(&pair.key()))
            .copied()
            .unwrap_or(0)
    }

    /// True once the session of the latest vote has reached its target.
    pub fn session_full(&self) -> bool {
        self.votes_in_session >= SESSION_TARGET
    }

    pub fn sessions_completed(&self) -> u32 {
        self.round / SESSION_TARGET
    }

    fn record(&mut self, prompt: &PromptId, pair: &ToolPair) {
        if self.session_index == 0 || self.session_full() {
            self.session_index += 1;
            self.votes_in_session = 0;
        }
        self.votes_in_session += 1;
        self.round += 1;
        *self.prompts_seen.entry(prompt.clone()).or_default() += 1;
        *self
            .pairs_seen
            .entry(prompt.clone())
            .or_default()
            .entry(pair.key())
            .or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentMatch {
    pub prompt_id: PromptId,
    pub pair: ToolPair,
}

/// Tools and prompts plus which tools have a usable artifact per prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub tools: Vec<ToolId>,
    pub prompts: Vec<PromptId>,
    pub available: BTreeMap<PromptId, Vec<ToolId>>,
}

impl Catalog {
    pub fn from_config(config: &ArenaConfig) -> Self {
        Self {
            tools: config.tool_ids(),
            prompts: config.prompt_ids(),
            available: config.availability(),
        }
    }

    pub fn available(&self, prompt: &PromptId) -> &[ToolId] {
        self.available.get(prompt).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Prompts with at least two usable artifacts, in catalog order.
    pub fn playable(&self) -> Vec<PromptId> {
        self.prompts
            .iter()
            .filter(|p| self.available(p).len() >= 2)
            .cloned()
            .collect()
    }
}

/// Everything the matchmaker and leaderboard need, folded from the log.
///
/// Serialized with ordered maps only, so [`ArenaState::canonical_json`] is
/// byte-stable and two states are equal iff their serializations are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaState {
    pub seed: u64,
    pub catalog: Catalog,
    pub table: RatingTable,
    /// Total matches per tool across all prompts.
    pub exposures: BTreeMap<ToolId, u64>,
    /// Lifetime meetings per unordered pair, across all prompts.
    pub pair_counts: BTreeMap<String, u64>,
    /// prompt -> pair key -> meetings on that prompt.
    pub prompt_pair_counts: BTreeMap<PromptId, BTreeMap<String, u64>>,
    /// Index (in global match order) of the last match on each prompt.
    pub prompt_last_played: BTreeMap<PromptId, u64>,
    /// Most recent matches, oldest first, capped at `recent_cap`.
    pub recent: VecDeque<RecentMatch>,
    pub recent_cap: usize,
    pub experts: BTreeMap<ExpertId, ExpertState>,
    pub matches_played: u64,
}

impl ArenaState {
    pub fn new(config: &ArenaConfig) -> Self {
        let catalog = Catalog::from_config(config);
        let table = RatingTable::new(&catalog.tools, &catalog.prompts, config.trueskill);
        let mm = &config.matchmaker;
        Self {
            seed: config.seed,
            exposures: catalog.tools.iter().map(|t| (t.clone(), 0)).collect(),
            catalog,
            table,
            pair_counts: BTreeMap::new(),
            prompt_pair_counts: BTreeMap::new(),
            prompt_last_played: BTreeMap::new(),
            recent: VecDeque::new(),
            recent_cap: mm.cooldown_window.max(mm.hot_tool_window),
            experts: BTreeMap::new(),
            matches_played: 0,
        }
    }

    /// Fold a whole log into a fresh state.
    pub fn replay<'a>(
        config: &ArenaConfig,
        events: impl IntoIterator<Item = &'a VoteEvent>,
    ) -> Result<Self, ArenaError> {
        let mut state = Self::new(config);
        for (offset, event) in events.into_iter().enumerate() {
            state.apply_vote(event).map_err(|e| ArenaError::CorruptLog {
                offset,
                event_id: event.event_id,
                reason: e.to_string(),
            })?;
        }
        Ok(state)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("arena state is always serializable")
    }

    pub fn next_event_id(&self) -> u64 {
        self.matches_played + 1
    }

    /// The expert's state, or a fresh one if they have not voted yet.
    pub fn expert_or_fresh(&self, expert: &ExpertId) -> ExpertState {
        self.experts.get(expert).cloned().unwrap_or_else(|| {
            ExpertState::new(expert.clone(), &self.catalog.playable(), self.seed)
        })
    }

    pub fn exposure(&self, tool: &ToolId) -> u64 {
        self.exposures.get(tool).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, pair: &ToolPair) -> u64 {
        self.pair_counts.get(&pair.key()).copied().unwrap_or(0)
    }

    pub fn prompt_pair_count(&self, prompt: &PromptId, pair: &ToolPair) -> u64 {
        self.prompt_pair_counts
            .get(prompt)
            .and_then(|m| m.get(&pair.key()))
            .copied()
            .unwrap_or(0)
    }

    /// Check that `event` can extend this state, without mutating anything.
    pub fn check_vote(&self, event: &VoteEvent) -> Result<(), ArenaError> {
        if event.event_id != self.next_event_id() {
            return Err(ArenaError::OutOfSequence {
                expected: self.next_event_id(),
                found: event.event_id,
            });
        }
        if !event.full_view_acknowledged {
            return Err(ArenaError::NotViewed);
        }
        if event.tool_left == event.tool_right {
            return Err(ArenaError::InvalidEvent("both slots hold the same tool".into()));
        }
        let available = self.catalog.available(&event.prompt_id);
        if !self.catalog.prompts.contains(&event.prompt_id) {
            return Err(ArenaError::InvalidEvent(format!(
                "unknown prompt `{}`",
                event.prompt_id
            )));
        }
        for tool in [&event.tool_left, &event.tool_right] {
            if !available.contains(tool) {
                return Err(ArenaError::InvalidEvent(format!(
                    "tool `{tool}` has no artifact for prompt `{}`",
                    event.prompt_id
                )));
            }
        }
        if let Some(expert) = self.experts.get(&event.expert_id) {
            if expert.round >= MAX_VOTES {
                return Err(ArenaError::QuotaExceeded);
            }
        }
        Ok(())
    }

    /// Apply one vote. The state is unchanged on error.
    pub fn apply_vote(&mut self, event: &VoteEvent) -> Result<(), ArenaError> {
        self.check_vote(event)?;
        let (winner, loser) = event.winner_loser();
        self.table.apply_outcome(&event.prompt_id, winner, loser)?;

        let pair = ToolPair::new(event.tool_left.clone(), event.tool_right.clone());
        for tool in [&event.tool_left, &event.tool_right] {
            *self.exposures.entry(tool.clone()).or_default() += 1;
        }
        *self.pair_counts.entry(pair.key()).or_default() += 1;
        *self
            .prompt_pair_counts
            .entry(event.prompt_id.clone())
            .or_default()
            .entry(pair.key())
            .or_default() += 1;
        self.prompt_last_played
            .insert(event.prompt_id.clone(), self.matches_played);
        self.recent.push_back(RecentMatch {
            prompt_id: event.prompt_id.clone(),
            pair: pair.clone(),
        });
        while self.recent.len() > self.recent_cap {
            self.recent.pop_front();
        }

        let playable = self.catalog.playable();
        let seed = self.seed;
        self.experts
            .entry(event.expert_id.clone())
            .or_insert_with(|| ExpertState::new(event.expert_id.clone(), &playable, seed))
            .record(&event.prompt_id, &pair);

        self.matches_played += 1;
        Ok(())
    }
}
