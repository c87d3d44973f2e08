use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ArenaError;
use crate::ids::{PromptId, ToolId};
use crate::leaderboard::SigmaPolicy;
use crate::matchmaker::MatchmakerConfig;
use crate::rating::TrueSkillParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolEntry {
    pub tool_id: ToolId,
    /// Admin-only. Never appears in rater-facing payloads.
    pub display_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    #[serde(alias = "Website")]
    Website,
    #[serde(alias = "WebApp", alias = "Webapp", alias = "web app", alias = "Web App")]
    Webapp,
}

/// Free-text or itemised constraints, as both appear in prompt datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constraints {
    Text(String),
    List(Vec<String>),
}

/// One prompt of the catalog. The seven content fields mirror the released
/// prompt dataset; `prompt_id` is assigned on import when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    #[serde(default)]
    pub prompt_id: Option<PromptId>,
    pub title: String,
    #[serde(rename = "type")]
    pub kind: PromptKind,
    pub sector: String,
    pub goal: String,
    pub scenario: String,
    pub vibe: String,
    pub constraints: Constraints,
}

/// The seven released fields only, used by `export-prompts`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleasedPrompt {
    pub title: String,
    #[serde(rename = "type")]
    pub kind: PromptKind,
    pub sector: String,
    pub goal: String,
    pub scenario: String,
    pub vibe: String,
    pub constraints: Constraints,
}

impl From<&PromptRecord> for ReleasedPrompt {
    fn from(p: &PromptRecord) -> Self {
        Self {
            title: p.title.clone(),
            kind: p.kind,
            sector: p.sector.clone(),
            goal: p.goal.clone(),
            scenario: p.scenario.clone(),
            vibe: p.vibe.clone(),
            constraints: p.constraints.clone(),
        }
    }
}

/// Where one generated site lives: a URL or a local bundle directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub tool_id: ToolId,
    pub prompt_id: PromptId,
    pub location: String,
}

fn default_seed() -> u64 {
    1
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaConfig {
    pub tools: Vec<ToolEntry>,
    pub prompts: Vec<PromptRecord>,
    #[serde(default)]
    pub artifacts: Vec<ArtifactEntry>,
    #[serde(default)]
    pub trueskill: TrueSkillParams,
    #[serde(default)]
    pub matchmaker: MatchmakerConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Provisioned login codes, one per vetted expert.
    #[serde(default)]
    pub access_codes: Vec<String>,
    #[serde(default)]
    pub admin_token: Option<String>,
    #[serde(default)]
    pub sigma_policy: SigmaPolicy,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

impl ArenaConfig {
    /// Parse, assign missing prompt ids and validate.
    pub fn from_json(text: &str) -> Result<Self, ArenaError> {
        let mut config: ArenaConfig =
            serde_json::from_str(text).map_err(|e| ArenaError::Config(e.to_string()))?;
        config.normalize();
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Give every prompt without an id a positional one (`p01`, `p02`, ...).
    pub fn normalize(&mut self) {
        for (i, prompt) in self.prompts.iter_mut().enumerate() {
            if prompt.prompt_id.is_none() {
                prompt.prompt_id = Some(PromptId::new(format!("p{:02}", i + 1)));
            }
        }
    }

    pub fn validate(&self) -> Result<(), ArenaError> {
        let bad = |msg: String| Err(ArenaError::Config(msg));
        if self.tools.is_empty() {
            return bad("at least one tool is required".into());
        }
        if self.prompts.is_empty() {
            return bad("at least one prompt is required".into());
        }
        let mut tools = BTreeSet::new();
        for t in &self.tools {
            if t.tool_id.as_str().trim().is_empty() {
                return bad("empty tool_id".into());
            }
            if !tools.insert(&t.tool_id) {
                return bad(format!("duplicate tool_id `{}`", t.tool_id));
            }
        }
        let mut prompts = BTreeSet::new();
        for p in &self.prompts {
            let Some(id) = &p.prompt_id else {
                return bad("prompt without prompt_id".into());
            };
            if !prompts.insert(id) {
                return bad(format!("duplicate prompt_id `{id}`"));
            }
        }
        let mut seen = BTreeSet::new();
        for a in &self.artifacts {
            if !tools.contains(&a.tool_id) {
                return bad(format!("artifact for unknown tool `{}`", a.tool_id));
            }
            if !prompts.contains(&a.prompt_id) {
                return bad(format!("artifact for unknown prompt `{}`", a.prompt_id));
            }
            if !seen.insert((&a.tool_id, &a.prompt_id)) {
                return bad(format!(
                    "duplicate artifact for ({}, {})",
                    a.tool_id, a.prompt_id
                ));
            }
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad(format!("ci_level must lie in (0, 1), got {}", self.ci_level));
        }
        self.trueskill
            .validate()
            .map_err(|e| ArenaError::Config(e.to_string()))?;
        self.matchmaker.validate()?;
        Ok(())
    }

    pub fn tool_ids(&self) -> Vec<ToolId> {
        self.tools.iter().map(|t| t.tool_id.clone()).collect()
    }

    pub fn prompt_ids(&self) -> Vec<PromptId> {
        self.prompts
            .iter()
            .filter_map(|p| p.prompt_id.clone())
            .collect()
    }

    pub fn prompt(&self, id: &PromptId) -> Option<&PromptRecord> {
        self.prompts.iter().find(|p| p.prompt_id.as_ref() == Some(id))
    }

    pub fn display_name(&self, tool: &ToolId) -> Option<&str> {
        self.tools
            .iter()
            .find(|t| &t.tool_id == tool)
            .map(|t| t.display_name.as_str())
    }

    pub fn artifact(&self, tool: &ToolId, prompt: &PromptId) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|a| &a.tool_id == tool && &a.prompt_id == prompt)
            .map(|a| a.location.as_str())
    }

    /// Tools with a usable artifact, per prompt. With no artifacts listed at
    /// all, every tool is assumed available everywhere.
    pub fn availability(&self) -> BTreeMap<PromptId, Vec<ToolId>> {
        let all_available = self.artifacts.is_empty();
        self.prompt_ids()
            .into_iter()
            .map(|p| {
                let tools = self
                    .tools
                    .iter()
                    .filter(|t| all_available || self.artifact(&t.tool_id, &p).is_some())
                    .map(|t| t.tool_id.clone())
                    .collect();
                (p, tools)
            })
            .collect()
    }

    pub fn released_prompts(&self) -> Vec<ReleasedPrompt> {
        self.prompts.iter().map(ReleasedPrompt::from).collect()
    }

    /// A small, valid skeleton for `arena init`.
    pub fn skeleton() -> Self {
        let tools = ["tool-a", "tool-b", "tool-c"]
            .iter()
            .enumerate()
            .map(|(i, id)| ToolEntry {
                tool_id: ToolId::from(*id),
                display_name: format!("Example Tool {}", i + 1),
            })
            .collect();
        let prompts = vec![PromptRecord {
            prompt_id: Some(PromptId::from("p01")),
            title: "Neighbourhood bakery".into(),
            kind: PromptKind::Website,
            sector: "Food & Beverage".into(),
            goal: "Drive pre-orders for weekend pastries".into(),
            scenario: "A family bakery wants a landing page showing its menu, \
                       opening hours and a pre-order form."
                .into(),
            vibe: "Warm, hand-crafted, inviting".into(),
            constraints: Constraints::Text("Single page; mobile friendly; no login".into()),
        }];
        let artifacts = ["tool-a", "tool-b", "tool-c"]
            .iter()
            .map(|t| ArtifactEntry {
                tool_id: ToolId::from(*t),
                prompt_id: PromptId::from("p01"),
                location: format!("https://example.invalid/{t}/p01/"),
            })
            .collect();
        Self {
            tools,
            prompts,
            artifacts,
            trueskill: TrueSkillParams::default(),
            matchmaker: MatchmakerConfig::default(),
            seed: 1,
            access_codes: vec!["change-me-expert-001".into()],
            admin_token: Some("change-me-admin".into()),
            sigma_policy: SigmaPolicy::Rms,
            ci_level: 0.95,
        }
    }
}
