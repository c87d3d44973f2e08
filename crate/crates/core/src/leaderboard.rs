//! Per-prompt rating tables and the aggregated tool leaderboard.
//!
//! Each tool is rated independently on every prompt. A tool's headline score
//! is the arithmetic mean of its per-prompt `mu` over every registered prompt,
//! voted or not; unvoted prompts contribute their prior.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian;
use crate::ids::{PromptId, ToolId};
use crate::rating::{self, Rating, RatingError, TrueSkillParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeaderboardError {
    #[error("unknown tool `{0}`")]
    UnknownTool(ToolId),
    #[error("unknown prompt `{0}`")]
    UnknownPrompt(PromptId),
    #[error("a tool cannot play itself (`{0}`)")]
    SelfMatch(ToolId),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("no tools registered")]
    Empty,
    #[error(transparent)]
    Rating(#[from] RatingError),
}

/// How per-prompt `sigma` values are folded into a single tool uncertainty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaPolicy {
    /// `sqrt(mean(sigma^2))`
    #[default]
    Rms,
    /// `mean(sigma)`
    Mean,
    /// `sqrt(sum(sigma^2)) / P`, the standard error of the mean of `mu`.
    Sem,
}

impl std::str::FromStr for SigmaPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rms" => Ok(Self::Rms),
            "mean" => Ok(Self::Mean),
            "sem" => Ok(Self::Sem),
            other => Err(format!("unknown sigma policy `{other}` (rms|mean|sem)")),
        }
    }
}

/// Ratings for every registered `(tool, prompt)` plus win/loss counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    params: TrueSkillParams,
    /// prompt -> tool -> rating
    ratings: BTreeMap<PromptId, BTreeMap<ToolId, Rating>>,
    /// prompt -> tool -> matches played on that prompt
    match_counts: BTreeMap<PromptId, BTreeMap<ToolId, u64>>,
    win_counts: BTreeMap<ToolId, u64>,
    loss_counts: BTreeMap<ToolId, u64>,
}

/// Win rate together with a flag for tools that have never played.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub value: f64,
    pub no_data: bool,
}

impl RatingTable {
    pub fn new<'a>(
        tools: impl IntoIterator<Item = &'a ToolId>,
        prompts: impl IntoIterator<Item = &'a PromptId>,
        params: TrueSkillParams,
    ) -> Self {
        let tools: BTreeSet<ToolId> = tools.into_iter().cloned().collect();
        let prior = rating::new_rating(&params);
        let mut ratings = BTreeMap::new();
        let mut match_counts = BTreeMap::new();
        for prompt in prompts {
            ratings.insert(
                prompt.clone(),
                tools.iter().map(|t| (t.clone(), prior)).collect(),
            );
            match_counts.insert(
                prompt.clone(),
                tools.iter().map(|t| (t.clone(), 0)).collect(),
            );
        }
        let zeros: BTreeMap<ToolId, u64> = tools.iter().map(|t| (t.clone(), 0)).collect();
        Self {
            params,
            ratings,
            match_counts,
            win_counts: zeros.clone(),
            loss_counts: zeros,
        }
    }

    pub fn params(&self) -> &TrueSkillParams {
        &self.params
    }

    pub fn tools(&self) -> impl Iterator<Item = &ToolId> {
        self.win_counts.keys()
    }

    pub fn prompts(&self) -> impl Iterator<Item = &PromptId> {
        self.ratings.keys()
    }

    pub fn prompt_count(&self) -> usize {
        self.ratings.len()
    }

    pub fn has_tool(&self, tool: &ToolId) -> bool {
        self.win_counts.contains_key(tool)
    }

    pub fn rating(&self, tool: &ToolId, prompt: &PromptId) -> Result<Rating, LeaderboardError> {
        self.ratings
            .get(prompt)
            .ok_or_else(|| LeaderboardError::UnknownPrompt(prompt.clone()))?
            .get(tool)
            .copied()
            .ok_or_else(|| LeaderboardError::UnknownTool(tool.clone()))
    }

    /// Overwrite one entry, e.g. to seed a hand-built state. Counters are
    /// left alone.
    pub fn set_rating(
        &mut self,
        tool: &ToolId,
        prompt: &PromptId,
        value: Rating,
    ) -> Result<(), LeaderboardError> {
        self.rating(tool, prompt)?;
        value.validate()?;
        self.ratings
            .get_mut(prompt)
            .expect("checked above")
            .insert(tool.clone(), value);
        Ok(())
    }

    /// All ratings on one prompt, keyed by tool.
    pub fn prompt_ratings(
        &self,
        prompt: &PromptId,
    ) -> Result<&BTreeMap<ToolId, Rating>, LeaderboardError> {
        self.ratings
            .get(prompt)
            .ok_or_else(|| LeaderboardError::UnknownPrompt(prompt.clone()))
    }

    /// Full `prompt -> tool -> rating` dump.
    pub fn per_prompt(&self) -> &BTreeMap<PromptId, BTreeMap<ToolId, Rating>> {
        &self.ratings
    }

    pub fn match_count(&self, tool: &ToolId, prompt: &PromptId) -> u64 {
        self.match_counts
            .get(prompt)
            .and_then(|m| m.get(tool))
            .copied()
            .unwrap_or(0)
    }

    pub fn wins(&self, tool: &ToolId) -> u64 {
        self.win_counts.get(tool).copied().unwrap_or(0)
    }

    pub fn losses(&self, tool: &ToolId) -> u64 {
        self.loss_counts.get(tool).copied().unwrap_or(0)
    }

    pub fn total_votes(&self) -> u64 {
        self.win_counts.values().sum()
    }

    /// Apply one binary outcome on `prompt`. Touches exactly the two
    /// `(tool, prompt)` entries involved; the table is unchanged on error.
    pub fn apply_outcome(
        &mut self,
        prompt: &PromptId,
        winner: &ToolId,
        loser: &ToolId,
    ) -> Result<(), LeaderboardError> {
        if winner == loser {
            return Err(LeaderboardError::SelfMatch(winner.clone()));
        }
        let before_w = self.rating(winner, prompt)?;
        let before_l = self.rating(loser, prompt)?;
        let (after_w, after_l) = rating::update_win(&before_w, &before_l, &self.params)?;

        let row = self.ratings.get_mut(prompt).expect("checked above");
        row.insert(winner.clone(), after_w);
        row.insert(loser.clone(), after_l);
        let counts = self.match_counts.get_mut(prompt).expect("checked above");
        *counts.get_mut(winner).expect("checked above") += 1;
        *counts.get_mut(loser).expect("checked above") += 1;
        *self.win_counts.get_mut(winner).expect("checked above") += 1;
        *self.loss_counts.get_mut(loser).expect("checked above") += 1;
        Ok(())
    }

    fn tool_column(&self, tool: &ToolId) -> Result<Vec<Rating>, LeaderboardError> {
        if !self.has_tool(tool) {
            return Err(LeaderboardError::UnknownTool(tool.clone()));
        }
        Ok(self.ratings.values().map(|row| row[tool]).collect())
    }

    /// Mean of the tool's per-prompt `mu` over every registered prompt.
    pub fn global_score(&self, tool: &ToolId) -> Result<f64, LeaderboardError> {
        let column = self.tool_column(tool)?;
        if column.is_empty() {
            return Ok(self.params.mu0);
        }
        Ok(column.iter().map(|r| r.mu).sum::<f64>() / column.len() as f64)
    }

    pub fn aggregate_sigma(
        &self,
        tool: &ToolId,
        policy: SigmaPolicy,
    ) -> Result<f64, LeaderboardError> {
        let column = self.tool_column(tool)?;
        if column.is_empty() {
            return Ok(self.params.sigma0);
        }
        let n = column.len() as f64;
        let sum_sq: f64 = column.iter().map(|r| r.variance()).sum();
        Ok(match policy {
            SigmaPolicy::Rms => (sum_sq / n).sqrt(),
            SigmaPolicy::Mean => column.iter().map(|r| r.sigma).sum::<f64>() / n,
            SigmaPolicy::Sem => sum_sq.sqrt() / n,
        })
    }

    /// Symmetric normal interval `score ± z * sigma_agg`.
    pub fn confidence_interval(
        &self,
        tool: &ToolId,
        level: f64,
        policy: SigmaPolicy,
    ) -> Result<(f64, f64), LeaderboardError> {
        let z = z_for_level(level)?;
        let centre = self.global_score(tool)?;
        let sigma = self.aggregate_sigma(tool, policy)?;
        Ok((centre - z * sigma, centre + z * sigma))
    }

    pub fn win_rate(&self, tool: &ToolId) -> Result<WinRate, LeaderboardError> {
        if !self.has_tool(tool) {
            return Err(LeaderboardError::UnknownTool(tool.clone()));
        }
        let wins = self.wins(tool);
        let played = wins + self.losses(tool);
        Ok(if played == 0 {
            WinRate {
                value: 0.5,
                no_data: true,
            }
        } else {
            WinRate {
                value: wins as f64 / played as f64,
                no_data: false,
            }
        })
    }

    /// Rows for every tool, best first. Ties on score fall back to lower
    /// aggregated sigma, then tool id.
    pub fn leaderboard(
        &self,
        level: f64,
        policy: SigmaPolicy,
    ) -> Result<Vec<LeaderboardRow>, LeaderboardError> {
        if self.win_counts.is_empty() {
            return Err(LeaderboardError::Empty);
        }
        let z = z_for_level(level)?;
        let mut rows = self
            .tools()
            .map(|tool| {
                let mu = self.global_score(tool)?;
                let sigma = self.aggregate_sigma(tool, policy)?;
                let win_rate = self.win_rate(tool)?;
                Ok(LeaderboardRow {
                    rank: 0,
                    tool: tool.clone(),
                    mu,
                    sigma,
                    ci_low: mu - z * sigma,
                    ci_high: mu + z * sigma,
                    win_rate: win_rate.value,
                    no_data: win_rate.no_data,
                    matches: self.wins(tool) + self.losses(tool),
                })
            })
            .collect::<Result<Vec<_>, LeaderboardError>>()?;
        rows.sort_by(|a, b| {
            b.mu.total_cmp(&a.mu)
                .then(a.sigma.total_cmp(&b.sigma))
                .then_with(|| a.tool.cmp(&b.tool))
        });
        for (i, row) in rows.iter_mut().enumerate() {
            row.rank = i + 1;
        }
        Ok(rows)
    }
}

/// Two-sided normal quantile for a central interval of mass `level`.
pub fn z_for_level(level: f64) -> Result<f64, LeaderboardError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(LeaderboardError::InvalidLevel(level));
    }
    Ok(gaussian::quantile((1.0 + level) / 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub tool: ToolId,
    pub mu: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub win_rate: f64,
    /// True when the tool has not played yet and `win_rate` is the 0.5 placeholder.
    #[serde(default)]
    pub no_data: bool,
    pub matches: u64,
}

pub const EXPORT_COLUMNS: [&str; 8] = [
    "rank", "tool", "mu", "sigma", "ci_low", "ci_high", "win_rate", "matches",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Comma-separated export, header included.
pub fn to_csv(rows: &[LeaderboardRow]) -> String {
    let mut out = EXPORT_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            r.rank,
            csv_field(r.tool.as_str()),
            r.mu,
            r.sigma,
            r.ci_low,
            r.ci_high,
            r.win_rate,
            r.matches
        );
    }
    out
}

/// Aligned plain-text export with the same columns as [`to_csv`].
pub fn to_table(rows: &[LeaderboardRow]) -> String {
    let cells: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.rank.to_string(),
                r.tool.to_string(),
                format!("{:.2}", r.mu),
                format!("{:.2}", r.sigma),
                format!("{:.2}", r.ci_low),
                format!("{:.2}", r.ci_high),
                if r.no_data {
                    "-".to_owned()
                } else {
                    format!("{:.1}%", r.win_rate * 100.0)
                },
                r.matches.to_string(),
            ]
        })
        .collect();
    let mut widths = EXPORT_COLUMNS.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, fields: &[&str]| {
        let mut parts = Vec::with_capacity(fields.len());
        for (i, (f, w)) in fields.iter().zip(widths).enumerate() {
            // tool column is left-aligned, numbers right-aligned
            if i == 1 {
                parts.push(format!("{f:<w$}"));
            } else {
                parts.push(format!("{f:>w$}"));
            }
        }
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut out, &EXPORT_COLUMNS);
    for row in &cells {
        let fields: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &fields);
    }
    out
}
