//! Prompt and pair selection.
//!
//! Prompt selection runs in two phases. During an expert's first `P` rounds
//! (`P` = number of playable prompts) prompts come from a seeded per-expert
//! permutation, so every prompt is seen exactly once. Afterwards each prompt
//! is scored from staleness, residual uncertainty and closeness of its tool
//! scores, and one of the `top_k` best is drawn uniformly.
//!
//! Pair selection scores every unordered pair of tools with an artifact for
//! the prompt, subtracts penalties, and takes the argmax. Ties go to the pair
//! that has met less often, then to the pair whose busier tool has played
//! less, then to the lexicographically smaller pair key.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, SecondsFormat, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::state::{ArenaState, ExpertState};
use crate::arena::ArenaError;
use crate::ids::{ExpertId, MatchId, PromptId, ToolId, ToolPair};
use crate::rating;
use crate::rng::{self, Purpose};

/// Two scores closer than this are treated as tied.
pub const SCORE_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("no prompts are available")]
    EmptyCatalog,
    #[error("prompt `{0}` has fewer than two tools with artifacts")]
    InsufficientTools(PromptId),
    #[error("expert has exhausted every eligible pair")]
    PairsExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairWeights {
    pub exposure_balance: f64,
    pub opponent_novelty: f64,
    pub uncertainty: f64,
    pub match_quality: f64,
}

impl Default for PairWeights {
    fn default() -> Self {
        Self {
            exposure_balance: 1.0,
            opponent_novelty: 1.0,
            uncertainty: 1.0,
            match_quality: 1.0,
        }
    }
}

/// Flat subtractions from a pair's score. `repeat_cap_exceeded = None` means
/// pairs at the cap are removed from the candidate set outright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Penalties {
    pub pair_seen_by_expert: f64,
    pub recent_cooldown: f64,
    pub repeat_cap_exceeded: Option<f64>,
    pub hot_tool_overexposure: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            pair_seen_by_expert: 0.5,
            recent_cooldown: 0.25,
            repeat_cap_exceeded: None,
            hot_tool_overexposure: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptWeights {
    pub recency: f64,
    pub uncertainty: f64,
    pub score_gap: f64,
}

impl Default for PromptWeights {
    fn default() -> Self {
        Self {
            recency: 1.0,
            uncertainty: 1.0,
            score_gap: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchmakerConfig {
    pub weights: PairWeights,
    pub penalties: Penalties,
    /// Global matches a pair stays "recent" for the cooldown penalty.
    pub cooldown_window: usize,
    /// Times one expert may judge the same pair on the same prompt.
    pub repeat_cap: u32,
    pub hot_tool_window: usize,
    /// Share of the hot window above which a tool counts as over-exposed.
    pub hot_tool_share: f64,
    pub prompt_weights: PromptWeights,
    pub top_k: usize,
}

impl Default for MatchmakerConfig {
    fn default() -> Self {
        Self {
            weights: PairWeights::default(),
            penalties: Penalties::default(),
            cooldown_window: 40,
            repeat_cap: 2,
            hot_tool_window: 40,
            hot_tool_share: 0.15,
            prompt_weights: PromptWeights::default(),
            top_k: 5,
        }
    }
}

impl MatchmakerConfig {
    pub fn validate(&self) -> Result<(), ArenaError> {
        let w = &self.weights;
        let pw = &self.prompt_weights;
        let p = &self.penalties;
        let non_negative = [
            w.exposure_balance,
            w.opponent_novelty,
            w.uncertainty,
            w.match_quality,
            pw.recency,
            pw.uncertainty,
            pw.score_gap,
            p.pair_seen_by_expert,
            p.recent_cooldown,
            p.hot_tool_overexposure,
            p.repeat_cap_exceeded.unwrap_or(0.0),
        ];
        if non_negative.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(ArenaError::Config(
                "matchmaker weights and penalties must be finite and >= 0".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(ArenaError::Config("top_k must be >= 1".into()));
        }
        if self.repeat_cap == 0 {
            return Err(ArenaError::Config("repeat_cap must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.hot_tool_share) {
            return Err(ArenaError::Config("hot_tool_share must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn excludes_at_cap(&self) -> bool {
        self.penalties.repeat_cap_exceeded.is_none()
    }
}

/// The random streams consumed while building one match. All three are
/// derived from `(seed, expert, round)`, so a match can be rebuilt exactly.
pub struct MatchRng {
    pub prompt_draw: ChaCha8Rng,
    pub side_flip: ChaCha8Rng,
    pub token: ChaCha8Rng,
}

impl MatchRng {
    pub fn for_round(seed: u64, expert: &ExpertId, round: u32) -> Self {
        let owner = expert.as_str();
        let round = u64::from(round);
        Self {
            prompt_draw: rng::stream(seed, Purpose::PromptDraw, owner, round),
            side_flip: rng::stream(seed, Purpose::SideFlip, owner, round),
            token: rng::stream(seed, Purpose::SlotToken, owner, round),
        }
    }
}

fn candidate_pairs(tools: &[ToolId]) -> Vec<ToolPair> {
    let mut pairs = Vec::with_capacity(tools.len() * tools.len().saturating_sub(1) / 2);
    for (i, a) in tools.iter().enumerate() {
        for b in &tools[i + 1..] {
            pairs.push(ToolPair::new(a.clone(), b.clone()));
        }
    }
    pairs.sort();
    pairs
}

fn eligible_pairs(
    prompt: &PromptId,
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> Vec<ToolPair> {
    let mut pairs = candidate_pairs(state.catalog.available(prompt));
    if config.excludes_at_cap() {
        pairs.retain(|p| expert.pair_count(prompt, p) < config.repeat_cap);
    }
    pairs
}

/// Whether the expert still has at least one pair left on `prompt`.
fn has_eligible_pair(
    prompt: &PromptId,
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> bool {
    let n = state.catalog.available(prompt).len();
    let total = n * n.saturating_sub(1) / 2;
    if total == 0 {
        return false;
    }
    if !config.excludes_at_cap() {
        return true;
    }
    let capped = expert
        .pairs_seen
        .get(prompt)
        .map_or(0, |m| m.values().filter(|&&c| c >= config.repeat_cap).count());
    capped < total
}

/// Adaptive-phase desirability of a prompt, in `[0, w_r + w_u + w_g]`.
pub fn prompt_score(prompt: &PromptId, state: &ArenaState, config: &MatchmakerConfig) -> f64 {
    prompt_scores(std::slice::from_ref(prompt), state, config)[0]
}

fn staleness(prompt: &PromptId, state: &ArenaState) -> f64 {
    match state.prompt_last_played.get(prompt) {
        Some(&last) => (state.matches_played - last) as f64,
        None => state.matches_played as f64 + 1.0,
    }
}

fn mu_spread(prompt: &PromptId, state: &ArenaState) -> f64 {
    let Ok(ratings) = state.table.prompt_ratings(prompt) else {
        return 0.0;
    };
    let mus = state
        .catalog
        .available(prompt)
        .iter()
        .filter_map(|t| ratings.get(t).map(|r| r.mu));
    let (lo, hi) = mus.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
        (lo.min(m), hi.max(m))
    });
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn mean_sigma(prompt: &PromptId, state: &ArenaState) -> f64 {
    let Ok(ratings) = state.table.prompt_ratings(prompt) else {
        return 0.0;
    };
    let sigmas: Vec<f64> = state
        .catalog
        .available(prompt)
        .iter()
        .filter_map(|t| ratings.get(t).map(|r| r.sigma))
        .collect();
    if sigmas.is_empty() {
        0.0
    } else {
        sigmas.iter().sum::<f64>() / sigmas.len() as f64
    }
}

/// Scores for `prompts`; staleness and spread are normalized by their
/// maximum over the same set.
pub fn prompt_scores(
    prompts: &[PromptId],
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> Vec<f64> {
    let sigma0 = state.table.params().sigma0;
    let stale: Vec<f64> = prompts.iter().map(|p| staleness(p, state)).collect();
    let spread: Vec<f64> = prompts.iter().map(|p| mu_spread(p, state)).collect();
    let max_stale = stale.iter().cloned().fold(0.0, f64::max);
    let max_spread = spread.iter().cloned().fold(0.0, f64::max);
    let w = &config.prompt_weights;
    prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let recency = if max_stale > 0.0 { stale[i] / max_stale } else { 0.0 };
            let uncertainty = (mean_sigma(p, state) / sigma0).clamp(0.0, 1.0);
            let gap = if max_spread > 0.0 {
                1.0 - spread[i] / max_spread
            } else {
                1.0
            };
            w.recency * recency + w.uncertainty * uncertainty + w.score_gap * gap
        })
        .collect()
}

/// The `top_k` adaptive candidates, best first (ties by prompt id).
pub fn adaptive_candidates(
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> Vec<PromptId> {
    let prompts: Vec<PromptId> = state
        .catalog
        .playable()
        .into_iter()
        .filter(|p| has_eligible_pair(p, expert, state, config))
        .collect();
    let scores = prompt_scores(&prompts, state, config);
    let mut ranked: Vec<(f64, PromptId)> = scores.into_iter().zip(prompts).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    ranked
        .into_iter()
        .take(config.top_k)
        .map(|(_, p)| p)
        .collect()
}

pub fn next_prompt(
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
    rng: &mut impl Rng,
) -> Result<PromptId, MatchError> {
    if state.catalog.playable().is_empty() {
        return Err(MatchError::EmptyCatalog);
    }
    if let Some(p) = expert.base_order.get(expert.round as usize) {
        return Ok(p.clone());
    }
    let top = adaptive_candidates(expert, state, config);
    if top.is_empty() {
        return Err(MatchError::PairsExhausted);
    }
    Ok(top[rng.random_range(0..top.len())].clone())
}

/// Recent-history facts shared by every pair scored in one selection.
struct RecentContext {
    cooling: HashSet<String>,
    hot: HashSet<ToolId>,
}

impl RecentContext {
    fn new(state: &ArenaState, config: &MatchmakerConfig) -> Self {
        let cooling = state
            .recent
            .iter()
            .rev()
            .take(config.cooldown_window)
            .map(|m| m.pair.key())
            .collect();
        let window = config.hot_tool_window.min(state.recent.len());
        let mut hits: HashMap<&ToolId, usize> = HashMap::new();
        for m in state.recent.iter().rev().take(window) {
            *hits.entry(&m.pair.first).or_default() += 1;
            *hits.entry(&m.pair.second).or_default() += 1;
        }
        let hot = hits
            .into_iter()
            .filter(|&(_, n)| n as f64 / window as f64 > config.hot_tool_share)
            .map(|(t, _)| t.clone())
            .collect();
        Self { cooling, hot }
    }
}

/// Blended desirability of `pair` on `prompt` for this expert, penalties
/// included. Pairs at the repeat cap score `-inf` when the cap excludes.
pub fn score_pair(
    pair: &ToolPair,
    prompt: &PromptId,
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> f64 {
    score_pair_in(&RecentContext::new(state, config), pair, prompt, expert, state, config)
}

fn score_pair_in(
    recent: &RecentContext,
    pair: &ToolPair,
    prompt: &PromptId,
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> f64 {
    let params = state.table.params();
    let (a, b) = (&pair.first, &pair.second);
    let na = state.exposure(a) as f64;
    let nb = state.exposure(b) as f64;
    let exposure_balance = 1.0 - (na - nb).abs() / (na + nb + 1.0);
    let key = pair.key();
    let met = state
        .prompt_pair_counts
        .get(prompt)
        .and_then(|m| m.get(&key))
        .copied()
        .unwrap_or(0);
    let novelty = 1.0 / (1.0 + met as f64);

    let (uncertainty, quality) = match (
        state.table.rating(a, prompt),
        state.table.rating(b, prompt),
    ) {
        (Ok(ra), Ok(rb)) => (
            (ra.sigma + rb.sigma) / (2.0 * params.sigma0),
            rating::match_quality(&ra, &rb, params).unwrap_or(0.0),
        ),
        _ => (0.0, 0.0),
    };

    let w = &config.weights;
    let mut score = w.exposure_balance * exposure_balance
        + w.opponent_novelty * novelty
        + w.uncertainty * uncertainty
        + w.match_quality * quality;

    let p = &config.penalties;
    let seen = expert
        .pairs_seen
        .get(prompt)
        .and_then(|m| m.get(&key))
        .copied()
        .unwrap_or(0);
    if seen > 0 {
        score -= p.pair_seen_by_expert;
    }
    if recent.cooling.contains(&key) {
        score -= p.recent_cooldown;
    }
    if seen >= config.repeat_cap {
        score -= p.repeat_cap_exceeded.unwrap_or(f64::INFINITY);
    }
    if recent.hot.contains(a) || recent.hot.contains(b) {
        score -= p.hot_tool_overexposure;
    }
    score
}

/// The pair that would be chosen, before side assignment.
pub fn best_pair(
    prompt: &PromptId,
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
) -> Result<ToolPair, MatchError> {
    if state.catalog.available(prompt).len() < 2 {
        return Err(MatchError::InsufficientTools(prompt.clone()));
    }
    let pairs = eligible_pairs(prompt, expert, state, config);
    let recent = RecentContext::new(state, config);
    let mut best: Option<(f64, u64, u64, ToolPair)> = None;
    for pair in pairs {
        let score = score_pair_in(&recent, &pair, prompt, expert, state, config);
        let count = state.pair_count(&pair);
        let max_exposure = state.exposure(&pair.first).max(state.exposure(&pair.second));
        let better = match &best {
            None => true,
            Some((s, c, m, k)) => {
                if score > s + SCORE_TIE_EPS {
                    true
                } else if score < s - SCORE_TIE_EPS {
                    false
                } else {
                    (count, max_exposure) < (*c, *m)
                        || ((count, max_exposure) == (*c, *m) && pair.key() < k.key())
                }
            }
        };
        if better {
            best = Some((score, count, max_exposure, pair));
        }
    }
    best.map(|(.., pair)| pair).ok_or(MatchError::PairsExhausted)
}

/// One side of a blinded comparison. Carries no tool identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub slot_token: String,
    /// Same-origin proxy path; the real location stays server-side. The
    /// trailing slash lets relative links inside a bundle resolve under it.
    pub artifact_ref: String,
}

impl Slot {
    fn new(token: String) -> Self {
        Self {
            artifact_ref: format!("/artifact/{token}/"),
            slot_token: token,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCard {
    pub match_id: MatchId,
    pub prompt_id: PromptId,
    pub left: Slot,
    pub right: Slot,
    pub created_at: String,
    pub expert_id: ExpertId,
}

/// A card plus the server-side side assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub card: MatchCard,
    pub tool_left: ToolId,
    pub tool_right: ToolId,
}

pub fn select_pair(
    prompt: &PromptId,
    expert: &ExpertState,
    state: &ArenaState,
    config: &MatchmakerConfig,
    streams: &mut MatchRng,
    now: DateTime<Utc>,
) -> Result<Selection, MatchError> {
    let pair = best_pair(prompt, expert, state, config)?;
    let (tool_left, tool_right) = if streams.side_flip.random_bool(0.5) {
        (pair.first, pair.second)
    } else {
        (pair.second, pair.first)
    };
    let match_id = MatchId::new(format!("m-{}", rng::hex_token(&mut streams.token, 12)));
    let card = MatchCard {
        match_id,
        prompt_id: prompt.clone(),
        left: Slot::new(rng::hex_token(&mut streams.token, 16)),
        right: Slot::new(rng::hex_token(&mut streams.token, 16)),
        created_at: now.to_rfc3339_opts(SecondsFormat::Millis, true),
        expert_id: expert.expert_id.clone(),
    };
    Ok(Selection {
        card,
        tool_left,
        tool_right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{ArenaConfig, Choice, ToolEntry, VoteEvent};
    use crate::rating::Rating;
    use crate::sim::ExperimentConfig;

    fn config(tools: &[&str], n_prompts: usize, mm: MatchmakerConfig) -> ArenaConfig {
        let sim = ExperimentConfig {
            n_prompts,
            n_experts: 1,
            matchmaker: mm,
            ..ExperimentConfig::default()
        };
        let mut cfg = sim.arena_config(7);
        cfg.tools = tools
            .iter()
            .map(|t| ToolEntry {
                tool_id: ToolId::from(*t),
                display_name: t.to_uppercase(),
            })
            .collect();
        cfg.artifacts.clear();
        cfg
    }

    fn zero_weights() -> MatchmakerConfig {
        MatchmakerConfig {
            weights: PairWeights {
                exposure_balance: 0.0,
                opponent_novelty: 0.0,
                uncertainty: 0.0,
                match_quality: 0.0,
            },
            penalties: Penalties {
                pair_seen_by_expert: 0.0,
                recent_cooldown: 0.0,
                repeat_cap_exceeded: None,
                hot_tool_overexposure: 0.0,
            },
            ..MatchmakerConfig::default()
        }
    }

    fn vote(state: &mut ArenaState, expert: &str, prompt: &str, left: &str, right: &str) {
        let event = VoteEvent {
            event_id: state.next_event_id(),
            match_id: MatchId::new(format!("m-{}", state.next_event_id())),
            expert_id: ExpertId::from(expert),
            prompt_id: PromptId::from(prompt),
            tool_left: ToolId::from(left),
            tool_right: ToolId::from(right),
            choice: Choice::Left,
            full_view_acknowledged: true,
            latency_ms: 0,
            recorded_at: "2025-01-01T00:00:00.000Z".into(),
        };
        state.apply_vote(&event).unwrap();
    }

    fn pair(a: &str, b: &str) -> ToolPair {
        ToolPair::new(ToolId::from(a), ToolId::from(b))
    }

    #[test]
    fn fresh_pairs_share_the_closed_form_score() {
        let cfg = config(&["a", "b", "c", "d"], 3, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let p = PromptId::from("p01");
        // balance 1, novelty 1, sigma ratio 1, quality sqrt(2b^2 / (2b^2 + 2s^2)) with b = s/2
        let expected = 3.0 + (0.5f64 / 2.5).sqrt();
        for pr in candidate_pairs(state.catalog.available(&p)) {
            let s = score_pair(&pr, &p, &expert, &state, &cfg.matchmaker);
            assert!((s - expected).abs() < 1e-12, "{pr:?}: {s}");
        }
    }

    #[test]
    fn seen_pair_costs_exactly_the_seen_penalty() {
        let cfg = config(&["a", "b", "c", "d"], 3, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let mut expert = state.expert_or_fresh(&ExpertId::from("x"));
        let p = PromptId::from("p01");
        expert
            .pairs_seen
            .entry(p.clone())
            .or_default()
            .insert(pair("a", "b").key(), 1);
        let mm = &cfg.matchmaker;
        let seen = score_pair(&pair("a", "b"), &p, &expert, &state, mm);
        let unseen = score_pair(&pair("c", "d"), &p, &expert, &state, mm);
        assert!((unseen - seen - mm.penalties.pair_seen_by_expert).abs() < 1e-12);
    }

    #[test]
    fn uncertainty_weight_alone_picks_the_two_widest() {
        let mut mm = zero_weights();
        mm.weights.uncertainty = 1.0;
        let tools = ["a", "b", "c", "d"];
        let cfg = config(&tools, 1, mm);
        let p = PromptId::from("p01");
        for (case, sigmas) in [[1.0, 4.0, 2.0, 3.0], [8.0, 0.5, 7.5, 1.0], [2.0, 2.5, 6.0, 6.1]]
            .iter()
            .enumerate()
        {
            let mut state = ArenaState::new(&cfg);
            for (t, s) in tools.iter().zip(sigmas) {
                state
                    .table
                    .set_rating(&ToolId::from(*t), &p, Rating::new(25.0, *s).unwrap())
                    .unwrap();
            }
            let mut brute = None;
            let mut best = f64::NEG_INFINITY;
            for i in 0..4 {
                for j in i + 1..4 {
                    if sigmas[i] + sigmas[j] > best {
                        best = sigmas[i] + sigmas[j];
                        brute = Some(pair(tools[i], tools[j]));
                    }
                }
            }
            let expert = state.expert_or_fresh(&ExpertId::from("x"));
            assert_eq!(best_pair(&p, &expert, &state, &mm).unwrap(), brute.unwrap(), "case {case}");
        }
    }

    #[test]
    fn ties_go_to_the_pair_that_met_less() {
        let cfg = config(&["a", "b", "c"], 2, zero_weights());
        let mut state = ArenaState::new(&cfg);
        vote(&mut state, "y", "p02", "a", "b");
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let got = best_pair(&PromptId::from("p01"), &expert, &state, &cfg.matchmaker).unwrap();
        assert_eq!(got, pair("a", "c"));
    }

    #[test]
    fn then_to_the_lower_max_exposure() {
        let cfg = config(&["a", "b", "c", "d"], 2, zero_weights());
        let mut state = ArenaState::new(&cfg);
        vote(&mut state, "y", "p02", "a", "b");
        vote(&mut state, "y", "p02", "a", "c");
        // unmet pairs: a|d (max 2), b|c (1), b|d (1), c|d (1); b|c wins on key
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let got = best_pair(&PromptId::from("p01"), &expert, &state, &cfg.matchmaker).unwrap();
        assert_eq!(got, pair("b", "c"));
    }

    #[test]
    fn final_tie_break_is_the_key_string() {
        let cfg = config(&["t", "t2", "u"], 1, zero_weights());
        let state = ArenaState::new(&cfg);
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let got = best_pair(&PromptId::from("p01"), &expert, &state, &cfg.matchmaker).unwrap();
        // "t2|u" < "t|t2" < "t|u" bytewise
        assert_eq!(got, pair("t2", "u"));
    }

    #[test]
    fn sides_are_fair_with_two_tools() {
        let cfg = config(&["a", "b"], 1, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let p = PromptId::from("p01");
        let mut first_left = 0u32;
        let n = 1000u32;
        for seed in 0..n {
            let expert = state.expert_or_fresh(&ExpertId::from("x"));
            let mut streams = MatchRng::for_round(u64::from(seed), &expert.expert_id, 0);
            let sel = select_pair(&p, &expert, &state, &cfg.matchmaker, &mut streams, Utc::now())
                .unwrap();
            assert_eq!(ToolPair::new(sel.tool_left.clone(), sel.tool_right.clone()), pair("a", "b"));
            if sel.tool_left.as_str() == "a" {
                first_left += 1;
            }
        }
        let half = f64::from(n) / 2.0;
        let chi2 = 2.0 * (f64::from(first_left) - half).powi(2) / half;
        // chi-square, 1 dof, p = 0.01
        assert!(chi2 < 6.635, "left count {first_left}, chi2 {chi2}");
    }

    #[test]
    fn same_inputs_give_identical_cards() {
        let cfg = config(&["a", "b", "c", "d", "e"], 4, MatchmakerConfig::default());
        let mut state = ArenaState::new(&cfg);
        vote(&mut state, "y", "p02", "a", "e");
        vote(&mut state, "x", "p03", "c", "d");
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let now = Utc::now();
        let run = || {
            let mut streams = MatchRng::for_round(5, &expert.expert_id, expert.round);
            let p = next_prompt(&expert, &state, &cfg.matchmaker, &mut streams.prompt_draw).unwrap();
            select_pair(&p, &expert, &state, &cfg.matchmaker, &mut streams, now).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn base_phase_covers_the_catalog_once() {
        let cfg = config(&["a", "b", "c"], 30, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let mut expert = state.expert_or_fresh(&ExpertId::from("x"));
        let mut served = Vec::new();
        for round in 0..30 {
            expert.round = round;
            let mut rng = MatchRng::for_round(1, &expert.expert_id, round).prompt_draw;
            served.push(next_prompt(&expert, &state, &cfg.matchmaker, &mut rng).unwrap());
        }
        served.sort();
        assert_eq!(served, state.catalog.prompts);
    }

    #[test]
    fn single_prompt_in_both_phases() {
        let cfg = config(&["a", "b", "c"], 1, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let mut expert = state.expert_or_fresh(&ExpertId::from("x"));
        for round in [0, 1, 4] {
            expert.round = round;
            let mut rng = MatchRng::for_round(1, &expert.expert_id, round).prompt_draw;
            let p = next_prompt(&expert, &state, &cfg.matchmaker, &mut rng).unwrap();
            assert_eq!(p.as_str(), "p01");
        }
    }

    #[test]
    fn unconverged_prompt_is_always_a_candidate() {
        let mut mm = MatchmakerConfig::default();
        mm.prompt_weights = PromptWeights {
            recency: 0.0,
            uncertainty: 1.0,
            score_gap: 0.0,
        };
        let tools = ["a", "b", "c"];
        let cfg = config(&tools, 12, mm);
        let mut state = ArenaState::new(&cfg);
        let open = PromptId::from("p09");
        for p in state.catalog.prompts.clone() {
            if p != open {
                for t in tools {
                    state
                        .table
                        .set_rating(&ToolId::from(t), &p, Rating::new(25.0, 0.5).unwrap())
                        .unwrap();
                }
            }
        }
        let mut expert = state.expert_or_fresh(&ExpertId::from("x"));
        expert.round = 12;
        let scores = prompt_scores(&state.catalog.prompts, &state, &mm);
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(scores[8], top);
        assert!(adaptive_candidates(&expert, &state, &mm).contains(&open));
        for round in 0..50 {
            let mut rng = MatchRng::for_round(3, &expert.expert_id, round).prompt_draw;
            let p = next_prompt(&expert, &state, &mm, &mut rng).unwrap();
            assert!(adaptive_candidates(&expert, &state, &mm).contains(&p));
        }
    }

    #[test]
    fn repeat_cap_removes_pairs() {
        let cfg = config(&["a", "b", "c"], 1, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let p = PromptId::from("p01");
        let mut expert = state.expert_or_fresh(&ExpertId::from("x"));
        let seen = expert.pairs_seen.entry(p.clone()).or_default();
        seen.insert(pair("a", "b").key(), 2);
        seen.insert(pair("a", "c").key(), 2);
        assert_eq!(best_pair(&p, &expert, &state, &cfg.matchmaker).unwrap(), pair("b", "c"));
        assert!(score_pair(&pair("a", "b"), &p, &expert, &state, &cfg.matchmaker).is_infinite());

        expert.pairs_seen.get_mut(&p).unwrap().insert(pair("b", "c").key(), 2);
        assert_eq!(
            best_pair(&p, &expert, &state, &cfg.matchmaker),
            Err(MatchError::PairsExhausted)
        );
        expert.round = 6;
        let mut rng = MatchRng::for_round(1, &expert.expert_id, 6).prompt_draw;
        assert_eq!(
            next_prompt(&expert, &state, &cfg.matchmaker, &mut rng),
            Err(MatchError::PairsExhausted)
        );
    }

    #[test]
    fn prompts_need_two_tools() {
        let mut cfg = config(&["a", "b"], 1, MatchmakerConfig::default());
        cfg.artifacts = vec![crate::arena::ArtifactEntry {
            tool_id: ToolId::from("a"),
            prompt_id: PromptId::from("p01"),
            location: "bundles/a/p01".into(),
        }];
        let state = ArenaState::new(&cfg);
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let p = PromptId::from("p01");
        assert_eq!(
            best_pair(&p, &expert, &state, &cfg.matchmaker),
            Err(MatchError::InsufficientTools(p.clone()))
        );
        let mut rng = MatchRng::for_round(1, &expert.expert_id, 0).prompt_draw;
        assert_eq!(
            next_prompt(&expert, &state, &cfg.matchmaker, &mut rng),
            Err(MatchError::EmptyCatalog)
        );
    }

    #[test]
    fn cards_carry_no_tool_identity() {
        let cfg = config(&["alpha", "beta"], 1, MatchmakerConfig::default());
        let state = ArenaState::new(&cfg);
        let expert = state.expert_or_fresh(&ExpertId::from("x"));
        let mut streams = MatchRng::for_round(9, &expert.expert_id, 0);
        let sel = select_pair(
            &PromptId::from("p01"),
            &expert,
            &state,
            &cfg.matchmaker,
            &mut streams,
            Utc::now(),
        )
        .unwrap();
        let json = serde_json::to_string(&sel.card).unwrap().to_lowercase();
        assert!(!json.contains("alpha") && !json.contains("beta"));
        assert_eq!(sel.card.left.artifact_ref, format!("/artifact/{}/", sel.card.left.slot_token));
        assert_ne!(sel.card.left.slot_token, sel.card.right.slot_token);
    }

    #[test]
    fn config_validation() {
        assert!(MatchmakerConfig::default().validate().is_ok());
        let mut bad = MatchmakerConfig::default();
        bad.top_k = 0;
        assert!(bad.validate().is_err());
        let mut bad = MatchmakerConfig::default();
        bad.weights.uncertainty = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = MatchmakerConfig::default();
        bad.hot_tool_share = 1.5;
        assert!(bad.validate().is_err());
    }
}
