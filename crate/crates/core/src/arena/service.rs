//! The arena service core: onboarding, sessions, blinded match delivery,
//! vote capture, leaderboards and restore-from-log.
//!
//! Transport-agnostic; the HTTP layer and the simulator both drive it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ReleasedPrompt;
use super::state::{ArenaState, MAX_SESSIONS, MAX_VOTES, SESSION_TARGET};
use super::{ArenaConfig, ArenaError, Choice, ExpertProfile, Role, Store, VoteEvent};
use crate::ids::{ExpertId, MatchId, PromptId, ToolId};
use crate::leaderboard::LeaderboardRow;
use crate::matchmaker::{self, MatchRng, Selection, Slot};
use crate::rating::Rating;

/// The single forced-choice question shown with every comparison.
pub const INSTRUCTION: &str = "Which project would you be more likely to deliver to a client?";

/// Shown between sessions. Advisory only; nothing enforces it.
pub const BREAK_GUIDANCE: &str =
    "Session complete. Take a break before starting the next one; a gap of about a day is recommended.";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: starts at a fixed instant and advances by
/// `step_ms` on every reading.
#[derive(Debug)]
pub struct StepClock {
    start: DateTime<Utc>,
    step_ms: u64,
    ticks: AtomicU64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step_ms: u64) -> Self {
        Self {
            start,
            step_ms,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Default for StepClock {
    fn default() -> Self {
        Self::new(Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(), 1_000)
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::Relaxed);
        self.start + chrono::Duration::milliseconds((n * self.step_ms) as i64)
    }
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Onboarding form. Every field is required for a new expert.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileFields {
    pub first_name: Option<String>,
    pub last_name: Option<String>,
    pub roles: Option<Vec<Role>>,
    pub used_ai_tools_before: Option<bool>,
}

impl ProfileFields {
    fn missing(&self) -> Vec<String> {
        let blank = |s: &Option<String>| s.as_deref().is_none_or(|s| s.trim().is_empty());
        let mut missing = Vec::new();
        if blank(&self.first_name) {
            missing.push("first_name".to_owned());
        }
        if blank(&self.last_name) {
            missing.push("last_name".to_owned());
        }
        if self.roles.as_ref().is_none_or(Vec::is_empty) {
            missing.push("roles".to_owned());
        }
        if self.used_ai_tools_before.is_none() {
            missing.push("used_ai_tools_before".to_owned());
        }
        missing
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnboardReceipt {
    pub token: String,
    pub expert_id: ExpertId,
    pub resumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    NotStarted,
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub index: u32,
    pub votes_cast: u32,
    pub target: u32,
    pub state: SessionState,
    pub lifetime_votes: u32,
    pub max_votes: u32,
    pub max_sessions: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guidance: Option<String>,
}

/// Everything a rater sees for one comparison. No tool identity, no source URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchView {
    pub match_id: MatchId,
    pub prompt_id: PromptId,
    pub prompt: ReleasedPrompt,
    pub instruction: String,
    pub left: Slot,
    pub right: Slot,
    pub session: SessionView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteReceipt {
    pub match_id: MatchId,
    pub event_id: u64,
    pub lifetime_votes: u32,
    pub session_index: u32,
    pub votes_in_session: u32,
    pub session_complete: bool,
    pub quota_reached: bool,
}

/// Leaderboard row shown publicly, with the tool replaced by a neutral label.
pub type PublicRow = LeaderboardRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminRow {
    #[serde(flatten)]
    pub row: LeaderboardRow,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminLeaderboard {
    pub votes: u64,
    pub rows: Vec<AdminRow>,
    pub per_prompt: BTreeMap<PromptId, BTreeMap<ToolId, Rating>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminExport {
    pub config: ArenaConfig,
    pub profiles: Vec<ExpertProfile>,
    pub events: Vec<VoteEvent>,
}

/// Counts of service-core calls, used to prove that drivers (HTTP or
/// simulator) go through the same entry points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallAudit {
    pub onboard: u64,
    pub start_session: u64,
    pub get_match: u64,
    pub submit_vote: u64,
}

pub struct ArenaService {
    config: ArenaConfig,
    state: ArenaState,
    log: Vec<VoteEvent>,
    profiles: BTreeMap<ExpertId, ExpertProfile>,
    /// code hash -> expert
    codes: HashMap<String, ExpertId>,
    /// bearer token -> expert
    tokens: HashMap<String, ExpertId>,
    /// Experts who explicitly opened a session that has no votes yet.
    opened: BTreeSet<ExpertId>,
    outstanding: BTreeMap<ExpertId, Selection>,
    /// slot token -> (tool, prompt), for the artifact proxy
    slots: HashMap<String, (ToolId, PromptId)>,
    receipts: HashMap<MatchId, (ExpertId, VoteReceipt)>,
    store: Box<dyn Store>,
    clock: Box<dyn Clock>,
    audit: CallAudit,
}

impl std::fmt::Debug for ArenaService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArenaService")
            .field("votes", &self.log.len())
            .field("experts", &self.profiles.len())
            .field("audit", &self.audit)
            .finish_non_exhaustive()
    }
}

impl ArenaService {
    pub fn new(
        config: ArenaConfig,
        store: Box<dyn Store>,
        clock: Box<dyn Clock>,
    ) -> Result<Self, ArenaError> {
        Self::restore(config, Vec::new(), Vec::new(), store, clock)
    }

    /// Rebuild a service from a previously written log and profile list.
    pub fn restore(
        mut config: ArenaConfig,
        events: Vec<VoteEvent>,
        profiles: Vec<ExpertProfile>,
        store: Box<dyn Store>,
        clock: Box<dyn Clock>,
    ) -> Result<Self, ArenaError> {
        config.normalize();
        config.validate()?;
        let state = ArenaState::replay(&config, &events)?;
        let mut service = Self {
            state,
            log: Vec::new(),
            profiles: profiles
                .into_iter()
                .map(|p| (p.expert_id.clone(), p))
                .collect(),
            codes: HashMap::new(),
            tokens: HashMap::new(),
            opened: BTreeSet::new(),
            outstanding: BTreeMap::new(),
            slots: HashMap::new(),
            receipts: HashMap::new(),
            store,
            clock,
            audit: CallAudit::default(),
            config,
        };
        service.index_codes();
        service.rebuild_receipts(events);
        Ok(service)
    }

    fn index_codes(&mut self) {
        self.codes.clear();
        self.tokens.clear();
        let seed = self.config.seed.to_le_bytes();
        for code in &self.config.access_codes {
            let hash = sha256_hex(&[b"access-code", code.as_bytes()]);
            let expert = ExpertId::new(format!("x-{}", &hash[..12]));
            let token = sha256_hex(&[b"token", &seed, code.as_bytes()])[..32].to_owned();
            self.codes.insert(hash, expert.clone());
            self.tokens.insert(token, expert);
        }
    }

    fn rebuild_receipts(&mut self, events: Vec<VoteEvent>) {
        let mut progress: HashMap<ExpertId, (u32, u32, u32)> = HashMap::new();
        for event in &events {
            let (round, index, in_session) = progress.entry(event.expert_id.clone()).or_default();
            if *index == 0 || *in_session >= SESSION_TARGET {
                *index += 1;
                *in_session = 0;
            }
            *in_session += 1;
            *round += 1;
            let receipt = VoteReceipt {
                match_id: event.match_id.clone(),
                event_id: event.event_id,
                lifetime_votes: *round,
                session_index: *index,
                votes_in_session: *in_session,
                session_complete: *in_session >= SESSION_TARGET,
                quota_reached: *round >= MAX_VOTES,
            };
            self.receipts
                .insert(event.match_id.clone(), (event.expert_id.clone(), receipt));
        }
        self.log = events;
    }

    pub fn config(&self) -> &ArenaConfig {
        &self.config
    }

    pub fn state(&self) -> &ArenaState {
        &self.state
    }

    pub fn log(&self) -> &[VoteEvent] {
        &self.log
    }

    pub fn audit(&self) -> CallAudit {
        self.audit
    }

    pub fn profiles(&self) -> impl Iterator<Item = &ExpertProfile> {
        self.profiles.values()
    }

    fn expert_for_token(&self, token: &str) -> Result<ExpertId, ArenaError> {
        self.tokens.get(token).cloned().ok_or(ArenaError::BadToken)
    }

    pub fn onboard(
        &mut self,
        access_code: &str,
        fields: ProfileFields,
    ) -> Result<OnboardReceipt, ArenaError> {
        self.audit.onboard += 1;
        let hash = sha256_hex(&[b"access-code", access_code.as_bytes()]);
        let expert = self.codes.get(&hash).cloned().ok_or(ArenaError::BadAccessCode)?;
        let token = self
            .tokens
            .iter()
            .find(|(_, e)| **e == expert)
            .map(|(t, _)| t.clone())
            .expect("every provisioned code has a token");

        if self.profiles.contains_key(&expert) {
            return Ok(OnboardReceipt {
                token,
                expert_id: expert,
                resumed: true,
            });
        }
        let missing = fields.missing();
        if !missing.is_empty() {
            return Err(ArenaError::IncompleteProfile(missing));
        }
        let mut roles = fields.roles.unwrap_or_default();
        roles.sort();
        roles.dedup();
        let profile = ExpertProfile {
            expert_id: expert.clone(),
            access_code_hash: hash,
            first_name: fields.first_name.unwrap_or_default().trim().to_owned(),
            last_name: fields.last_name.unwrap_or_default().trim().to_owned(),
            roles,
            used_ai_tools_before: fields.used_ai_tools_before.unwrap_or_default(),
            created_at: timestamp(self.clock.now()),
        };
        self.store
            .save_profile(&profile)
            .map_err(|e| ArenaError::Storage(e.to_string()))?;
        self.profiles.insert(expert.clone(), profile);
        Ok(OnboardReceipt {
            token,
            expert_id: expert,
            resumed: false,
        })
    }

    fn require_onboarded(&self, expert: &ExpertId) -> Result<(), ArenaError> {
        if self.profiles.contains_key(expert) || self.state.experts.contains_key(expert) {
            Ok(())
        } else {
            Err(ArenaError::NotOnboarded)
        }
    }

    fn session_of(&self, expert: &ExpertId) -> SessionView {
        let es = self.state.experts.get(expert);
        let round = es.map_or(0, |e| e.round);
        let index = es.map_or(0, |e| e.session_index);
        let in_session = es.map_or(0, |e| e.votes_in_session);
        let opened = self.opened.contains(expert);

        let (index, votes, state) = if index == 0 {
            if opened {
                (1, 0, SessionState::Open)
            } else {
                (1, 0, SessionState::NotStarted)
            }
        } else if in_session >= SESSION_TARGET {
            if opened {
                (index + 1, 0, SessionState::Open)
            } else {
                (index, in_session, SessionState::Complete)
            }
        } else {
            (index, in_session, SessionState::Open)
        };
        let guidance = (state == SessionState::Complete && round < MAX_VOTES)
            .then(|| BREAK_GUIDANCE.to_owned());
        SessionView {
            session_id: format!("{expert}-s{index}"),
            index,
            votes_cast: votes,
            target: SESSION_TARGET,
            state,
            lifetime_votes: round,
            max_votes: MAX_VOTES,
            max_sessions: MAX_SESSIONS,
            guidance,
        }
    }

    pub fn session(&self, token: &str) -> Result<SessionView, ArenaError> {
        let expert = self.expert_for_token(token)?;
        self.require_onboarded(&expert)?;
        Ok(self.session_of(&expert))
    }

    /// Open the expert's next session, or return the one already open.
    pub fn start_session(&mut self, token: &str) -> Result<SessionView, ArenaError> {
        self.audit.start_session += 1;
        let expert = self.expert_for_token(token)?;
        self.require_onboarded(&expert)?;
        let view = self.session_of(&expert);
        if view.state == SessionState::Open {
            return Ok(view);
        }
        if view.lifetime_votes >= MAX_VOTES {
            return Err(ArenaError::QuotaExceeded);
        }
        self.opened.insert(expert.clone());
        Ok(self.session_of(&expert))
    }

    fn view_for(&self, selection: &Selection, expert: &ExpertId) -> MatchView {
        let card = &selection.card;
        let prompt = self
            .config
            .prompt(&card.prompt_id)
            .expect("matchmaker only serves catalog prompts");
        MatchView {
            match_id: card.match_id.clone(),
            prompt_id: card.prompt_id.clone(),
            prompt: ReleasedPrompt::from(prompt),
            instruction: INSTRUCTION.to_owned(),
            left: card.left.clone(),
            right: card.right.clone(),
            session: self.session_of(expert),
        }
    }

    /// Serve the expert's outstanding match, creating one if needed.
    pub fn get_match(&mut self, token: &str) -> Result<MatchView, ArenaError> {
        self.audit.get_match += 1;
        let expert = self.expert_for_token(token)?;
        self.require_onboarded(&expert)?;
        let session = self.session_of(&expert);
        if session.lifetime_votes >= MAX_VOTES {
            return Err(ArenaError::QuotaExceeded);
        }
        if session.state != SessionState::Open {
            return Err(ArenaError::SessionClosed);
        }
        if let Some(sel) = self.outstanding.get(&expert) {
            return Ok(self.view_for(sel, &expert));
        }

        let es = self.state.expert_or_fresh(&expert);
        let mm = &self.config.matchmaker;
        let mut streams = MatchRng::for_round(self.config.seed, &expert, es.round);
        let prompt = matchmaker::next_prompt(&es, &self.state, mm, &mut streams.prompt_draw)?;
        let selection = matchmaker::select_pair(
            &prompt,
            &es,
            &self.state,
            mm,
            &mut streams,
            self.clock.now(),
        )?;
        let card = &selection.card;
        self.slots.insert(
            card.left.slot_token.clone(),
            (selection.tool_left.clone(), prompt.clone()),
        );
        self.slots.insert(
            card.right.slot_token.clone(),
            (selection.tool_right.clone(), prompt.clone()),
        );
        let view = self.view_for(&selection, &expert);
        self.outstanding.insert(expert, selection);
        Ok(view)
    }

    pub fn submit_vote(
        &mut self,
        token: &str,
        match_id: &MatchId,
        choice: Choice,
        full_view_acknowledged: bool,
    ) -> Result<VoteReceipt, ArenaError> {
        self.audit.submit_vote += 1;
        let expert = self.expert_for_token(token)?;
        if let Some((owner, receipt)) = self.receipts.get(match_id) {
            if *owner == expert {
                return Ok(receipt.clone());
            }
            return Err(ArenaError::StaleMatch(match_id.to_string()));
        }
        let selection = match self.outstanding.get(&expert) {
            Some(sel) if &sel.card.match_id == match_id => sel,
            _ => return Err(ArenaError::StaleMatch(match_id.to_string())),
        };
        if !full_view_acknowledged {
            return Err(ArenaError::NotViewed);
        }

        let now = self.clock.now();
        let latency_ms = DateTime::parse_from_rfc3339(&selection.card.created_at)
            .map(|created| (now - created.with_timezone(&Utc)).num_milliseconds().max(0) as u64)
            .unwrap_or(0);
        let event = VoteEvent {
            event_id: self.state.next_event_id(),
            match_id: match_id.clone(),
            expert_id: expert.clone(),
            prompt_id: selection.card.prompt_id.clone(),
            tool_left: selection.tool_left.clone(),
            tool_right: selection.tool_right.clone(),
            choice,
            full_view_acknowledged,
            latency_ms,
            recorded_at: timestamp(now),
        };
        self.state.check_vote(&event)?;
        self.store
            .append_vote(&event)
            .map_err(|e| ArenaError::Storage(e.to_string()))?;
        self.state.apply_vote(&event)?;

        let selection = self.outstanding.remove(&expert).expect("checked above");
        self.slots.remove(&selection.card.left.slot_token);
        self.slots.remove(&selection.card.right.slot_token);
        self.opened.remove(&expert);

        let es = &self.state.experts[&expert];
        let receipt = VoteReceipt {
            match_id: match_id.clone(),
            event_id: event.event_id,
            lifetime_votes: es.round,
            session_index: es.session_index,
            votes_in_session: es.votes_in_session,
            session_complete: es.session_full(),
            quota_reached: es.round >= MAX_VOTES,
        };
        self.receipts
            .insert(match_id.clone(), (expert, receipt.clone()));
        self.log.push(event);
        Ok(receipt)
    }

    /// Resolve a proxy slot token to the artifact's real location.
    pub fn resolve_slot(&self, slot_token: &str) -> Result<&str, ArenaError> {
        let (tool, prompt) = self.slots.get(slot_token).ok_or(ArenaError::UnknownSlot)?;
        self.config
            .artifact(tool, prompt)
            .ok_or(ArenaError::UnknownSlot)
    }

    /// What a slot actually shows. Server-side only: synthetic raters use it
    /// in place of looking at the rendered artifact.
    pub fn slot_identity(&self, slot_token: &str) -> Option<(&ToolId, &PromptId)> {
        self.slots.get(slot_token).map(|(t, p)| (t, p))
    }

    pub fn leaderboard_rows(&self) -> Result<Vec<LeaderboardRow>, ArenaError> {
        Ok(self
            .state
            .table
            .leaderboard(self.config.ci_level, self.config.sigma_policy)?)
    }

    /// Neutral public label for a tool, by catalog position.
    pub fn public_label(&self, tool: &ToolId) -> String {
        let idx = self
            .config
            .tools
            .iter()
            .position(|t| &t.tool_id == tool)
            .unwrap_or(usize::MAX);
        format!("Tool {:02}", idx.wrapping_add(1))
    }

    pub fn public_leaderboard(&self) -> Result<Vec<PublicRow>, ArenaError> {
        Ok(self
            .leaderboard_rows()?
            .into_iter()
            .map(|mut r| {
                r.tool = ToolId::new(self.public_label(&r.tool));
                r
            })
            .collect())
    }

    pub fn check_admin(&self, token: Option<&str>) -> Result<(), ArenaError> {
        match (&self.config.admin_token, token) {
            (Some(expected), Some(given)) if expected == given => Ok(()),
            _ => Err(ArenaError::Forbidden),
        }
    }

    pub fn admin_leaderboard(&self, token: Option<&str>) -> Result<AdminLeaderboard, ArenaError> {
        self.check_admin(token)?;
        let rows = self
            .leaderboard_rows()?
            .into_iter()
            .map(|row| AdminRow {
                display_name: self
                    .config
                    .display_name(&row.tool)
                    .unwrap_or_default()
                    .to_owned(),
                row,
            })
            .collect();
        Ok(AdminLeaderboard {
            votes: self.state.matches_played,
            rows,
            per_prompt: self.state.table.per_prompt().clone(),
        })
    }

    pub fn export(&self, token: Option<&str>) -> Result<AdminExport, ArenaError> {
        self.check_admin(token)?;
        Ok(AdminExport {
            config: self.config.clone(),
            profiles: self.profiles.values().cloned().collect(),
            events: self.log.clone(),
        })
    }

    /// Swap the configuration. Only allowed while the log is empty.
    pub fn replace_config(
        &mut self,
        token: Option<&str>,
        mut config: ArenaConfig,
    ) -> Result<(), ArenaError> {
        self.check_admin(token)?;
        if !self.log.is_empty() {
            return Err(ArenaError::LogNotEmpty);
        }
        config.normalize();
        config.validate()?;
        self.state = ArenaState::new(&config);
        self.config = config;
        self.outstanding.clear();
        self.slots.clear();
        self.opened.clear();
        self.index_codes();
        Ok(())
    }
}
