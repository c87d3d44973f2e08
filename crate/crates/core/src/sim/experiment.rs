//! End-to-end rank-recovery experiments through the real service core.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{self, GroundTruth, RaterModel};
use super::{metrics, SimError};
use crate::arena::{
    ArenaConfig, ArenaService, ArtifactEntry, CallAudit, Choice, Constraints, MemoryStore,
    ProfileFields, PromptKind, PromptRecord, StepClock, ToolEntry, MAX_VOTES,
};
use crate::arena::service::SessionState;
use crate::arena::Role;
use crate::ids::{PromptId, ToolId};
use crate::leaderboard::SigmaPolicy;
use crate::matchmaker::MatchmakerConfig;
use crate::rating::TrueSkillParams;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_tools: usize,
    pub n_prompts: usize,
    pub spacing: f64,
    pub prompt_jitter: f64,
    pub rater: RaterModel,
    pub n_experts: usize,
    /// Used when `total_votes` is absent.
    pub votes_per_expert: usize,
    /// Spread as evenly as possible across experts when present.
    pub total_votes: Option<usize>,
    pub trueskill: TrueSkillParams,
    pub matchmaker: MatchmakerConfig,
    pub sigma_policy: SigmaPolicy,
    pub ci_level: f64,
}

impl Default for ExperimentConfig {
    /// Deployed scale: 10 tools, 30 prompts, ~4,075 votes from 194 experts.
    fn default() -> Self {
        Self {
            n_tools: 10,
            n_prompts: 30,
            spacing: 1.0,
            prompt_jitter: 0.5,
            rater: RaterModel::default(),
            n_experts: 194,
            votes_per_expert: 21,
            total_votes: Some(4075),
            trueskill: TrueSkillParams::default(),
            matchmaker: MatchmakerConfig::default(),
            sigma_policy: SigmaPolicy::Rms,
            ci_level: 0.95,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.rater.validate()?;
        if self.n_experts == 0 {
            return Err(SimError::Domain("need at least one expert".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(SimError::Domain("ci_level must lie in (0, 1)".into()));
        }
        if self.vote_plan().iter().any(|&v| v > MAX_VOTES as usize) {
            return Err(SimError::Domain(format!(
                "an expert would need more than {MAX_VOTES} votes"
            )));
        }
        Ok(())
    }

    /// Votes assigned to each expert.
    pub fn vote_plan(&self) -> Vec<usize> {
        match self.total_votes {
            Some(total) => {
                let base = total / self.n_experts;
                let extra = total % self.n_experts;
                (0..self.n_experts)
                    .map(|i| base + usize::from(i < extra))
                    .collect()
            }
            None => vec![self.votes_per_expert; self.n_experts],
        }
    }

    pub fn access_code(i: usize) -> String {
        format!("sim-code-{i:04}")
    }

    /// A synthetic arena: opaque tool ids, distinct display names and
    /// artifact URLs (so blinding scans have something to look for).
    pub fn arena_config(&self, seed: u64) -> ArenaConfig {
        let tools: Vec<ToolEntry> = (0..self.n_tools)
            .map(|i| ToolEntry {
                tool_id: model::tool_id(i),
                display_name: format!("Synthetic Generator {}", (b'A' + (i % 26) as u8) as char),
            })
            .collect();
        let prompts = (0..self.n_prompts)
            .map(|i| PromptRecord {
                prompt_id: Some(model::prompt_id(i)),
                title: format!("Synthetic brief {}", i + 1),
                kind: if i % 3 == 2 {
                    PromptKind::Webapp
                } else {
                    PromptKind::Website
                },
                sector: "Simulation".into(),
                goal: "Exercise the arena end to end".into(),
                scenario: format!("Scenario number {} for a simulated client", i + 1),
                vibe: "Neutral".into(),
                constraints: Constraints::Text("None".into()),
            })
            .collect();
        let artifacts = tools
            .iter()
            .flat_map(|t| {
                (0..self.n_prompts).map(move |p| ArtifactEntry {
                    tool_id: t.tool_id.clone(),
                    prompt_id: model::prompt_id(p),
                    location: format!("https://sites.example.invalid/{}/{}/", t.tool_id, model::prompt_id(p)),
                })
            })
            .collect();
        ArenaConfig {
            tools,
            prompts,
            artifacts,
            trueskill: self.trueskill,
            matchmaker: self.matchmaker,
            seed,
            access_codes: (0..self.n_experts).map(Self::access_code).collect(),
            admin_token: Some("sim-admin".into()),
            sigma_policy: self.sigma_policy,
            ci_level: self.ci_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolReport {
    pub rank: usize,
    pub tool: ToolId,
    pub true_mean: f64,
    pub calibrated_truth: f64,
    pub mu: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub covered: bool,
    pub win_rate: f64,
    pub matches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub votes: u64,
    pub experts: usize,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    pub top1_correct: bool,
    /// Share of tools whose interval holds their affine-calibrated true mean.
    pub calibrated_ci_coverage: f64,
    /// Fitted `mu ~ slope * truth + intercept`.
    pub calibration_slope: f64,
    pub calibration_intercept: f64,
    /// Experts whose first `P` prompts were not a permutation of the catalog.
    pub base_coverage_violations: usize,
    pub audit: CallAudit,
    pub truth_order: Vec<ToolId>,
    pub per_tool: Vec<ToolReport>,
}

/// Everything a finished run leaves behind, for callers that need more than
/// the report (replay checks, exports).
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub truth: GroundTruth,
    pub service: ArenaService,
}

/// Least-squares `y ~ a x + b`. With no spread in `x`, returns `(0, mean y)`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON {
        return (0.0, my);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn profile(i: usize) -> ProfileFields {
    let roles = match i % 4 {
        0 => vec![Role::Designer],
        1 => vec![Role::WebDeveloper],
        2 => vec![Role::Designer, Role::Researcher],
        _ => vec![Role::Other],
    };
    ProfileFields {
        first_name: Some(format!("Sim{i:04}")),
        last_name: Some("Rater".into()),
        roles: Some(roles),
        used_ai_tools_before: Some(i % 2 == 0),
    }
}

/// Drive a fresh arena with synthetic experts and score the recovered order.
pub fn run_experiment_detailed(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentRun, SimError> {
    config.validate()?;
    let truth = model::make_ground_truth(
        config.n_tools,
        config.n_prompts,
        config.spacing,
        config.prompt_jitter,
        config.trueskill.mu0,
        seed,
    )?;
    let arena_config = config.arena_config(seed);
    let mut service = ArenaService::new(
        arena_config,
        Box::new(MemoryStore),
        Box::new(StepClock::default()),
    )?;

    let plan = config.vote_plan();
    let mut tokens = Vec::with_capacity(plan.len());
    let mut scales = Vec::with_capacity(plan.len());
    for i in 0..plan.len() {
        let receipt = service.onboard(&ExperimentConfig::access_code(i), profile(i))?;
        let mut scale_rng = rng::stream(seed, Purpose::Rater, receipt.expert_id.as_str(), u64::MAX);
        scales.push(config.rater.expert_scale(&mut scale_rng));
        tokens.push(receipt);
    }

    // Experts arrive in a seeded interleaving, one vote at a time.
    let mut remaining = plan.clone();
    let mut active: Vec<usize> = (0..plan.len()).filter(|&i| plan[i] > 0).collect();
    let mut schedule = rng::stream(seed, Purpose::Schedule, "", 0);
    while !active.is_empty() {
        let slot = schedule.random_range(0..active.len());
        let i = active[slot];
        let who = &tokens[i];

        let session = service.session(&who.token)?;
        if session.state != SessionState::Open {
            service.start_session(&who.token)?;
        }
        let view = service.get_match(&who.token)?;
        let (left, prompt) = service
            .slot_identity(&view.left.slot_token)
            .map(|(t, p)| (t.clone(), p.clone()))
            .ok_or_else(|| SimError::Domain("left slot did not resolve".into()))?;
        let (right, _) = service
            .slot_identity(&view.right.slot_token)
            .map(|(t, p)| (t.clone(), p.clone()))
            .ok_or_else(|| SimError::Domain("right slot did not resolve".into()))?;

        let round = (plan[i] - remaining[i]) as u64;
        let mut rater_rng = rng::stream(seed, Purpose::Rater, who.expert_id.as_str(), round);
        let winner = model::simulate_vote_scaled(
            &config.rater,
            scales[i],
            &truth,
            &prompt,
            &left,
            &right,
            &mut rater_rng,
        )?;
        let choice = if winner == left { Choice::Left } else { Choice::Right };
        service.submit_vote(&who.token, &view.match_id, choice, true)?;

        remaining[i] -= 1;
        if remaining[i] == 0 {
            active.swap_remove(slot);
        }
    }

    let report = score(config, seed, &truth, &service)?;
    Ok(ExperimentRun {
        report,
        truth,
        service,
    })
}

pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport, SimError> {
    run_experiment_detailed(config, seed).map(|run| run.report)
}

/// Count experts whose first `P` served prompts were not exactly the catalog.
pub fn base_coverage_violations(service: &ArenaService) -> usize {
    let playable = service.state().catalog.playable();
    let mut served: BTreeMap<&str, Vec<&PromptId>> = BTreeMap::new();
    for e in service.log() {
        served.entry(e.expert_id.as_str()).or_default().push(&e.prompt_id);
    }
    let mut expected: Vec<&PromptId> = playable.iter().collect();
    expected.sort();
    served
        .values()
        .filter(|prompts| {
            let n = prompts.len().min(playable.len());
            let mut head: Vec<&PromptId> = prompts[..n].to_vec();
            head.sort();
            let distinct = head.windows(2).all(|w| w[0] != w[1]);
            !distinct || (n == playable.len() && head != expected)
        })
        .count()
}

fn score(
    config: &ExperimentConfig,
    seed: u64,
    truth: &GroundTruth,
    service: &ArenaService,
) -> Result<ExperimentReport, SimError> {
    let rows = service.leaderboard_rows()?;
    let recovered: Vec<ToolId> = rows.iter().map(|r| r.tool.clone()).collect();
    let truth_order = truth.order();
    let kendall_tau = metrics::kendall_tau(&truth_order, &recovered)?;
    let spearman_rho = metrics::spearman_rho(&truth_order, &recovered)?;

    let xs: Vec<f64> = rows.iter().map(|r| truth.tool_means[&r.tool]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mu).collect();
    let (slope, intercept) = affine_fit(&xs, &ys);
    let per_tool: Vec<ToolReport> = rows
        .iter()
        .zip(&xs)
        .map(|(r, &x)| {
            let calibrated = slope * x + intercept;
            ToolReport {
                rank: r.rank,
                tool: r.tool.clone(),
                true_mean: x,
                calibrated_truth: calibrated,
                mu: r.mu,
                sigma: r.sigma,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                covered: r.ci_low <= calibrated && calibrated <= r.ci_high,
                win_rate: r.win_rate,
                matches: r.matches,
            }
        })
        .collect();
    let covered = per_tool.iter().filter(|t| t.covered).count();

    Ok(ExperimentReport {
        seed,
        votes: service.state().matches_played,
        experts: config.n_experts,
        kendall_tau,
        spearman_rho,
        top1_correct: recovered.first() == truth_order.first(),
        calibrated_ci_coverage: covered as f64 / per_tool.len() as f64,
        calibration_slope: slope,
        calibration_intercept: intercept,
        base_coverage_violations: base_coverage_violations(service),
        audit: service.audit(),
        truth_order,
        per_tool,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seeds: Vec<u64>,
    pub mean_kendall_tau: f64,
    pub mean_abs_kendall_tau: f64,
    pub min_kendall_tau: f64,
    pub mean_spearman_rho: f64,
    pub top1_correct: usize,
    pub mean_calibrated_ci_coverage: f64,
}

pub fn summarize(reports: &[ExperimentReport]) -> ExperimentSummary {
    let n = reports.len().max(1) as f64;
    let taus = reports.iter().map(|r| r.kendall_tau);
    ExperimentSummary {
        seeds: reports.iter().map(|r| r.seed).collect(),
        mean_kendall_tau: taus.clone().sum::<f64>() / n,
        mean_abs_kendall_tau: taus.clone().map(f64::abs).sum::<f64>() / n,
        min_kendall_tau: taus.fold(f64::INFINITY, f64::min),
        mean_spearman_rho: reports.iter().map(|r| r.spearman_rho).sum::<f64>() / n,
        top1_correct: reports.iter().filter(|r| r.top1_correct).count(),
        mean_calibrated_ci_coverage: reports.iter().map(|r| r.calibrated_ci_coverage).sum::<f64>()
            / n,
    }
}

/// Run `seeds` in parallel (one isolated arena per seed); results keep seed order.
#[cfg(not(target_arch = "wasm32"))]
pub fn run_seeds(
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentReport>, SimError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers.max(1)).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&s| run_experiment(config, s))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(seeds.len());
        for h in handles {
            out.extend(h.join().expect("experiment worker panicked")?);
        }
        Ok(out)
    })
}

#[cfg(target_arch = "wasm32")]
pub fn run_seeds(
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentReport>, SimError> {
    seeds.iter().map(|&s| run_experiment(config, s)).collect()
}

/// Aligned-text rendering of a report.
pub fn report_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "seed {}  votes {}  experts {}  kendall_tau {:.4}  spearman_rho {:.4}  top1 {}  calibrated_ci_coverage {:.3}",
        report.seed,
        report.votes,
        report.experts,
        report.kendall_tau,
        report.spearman_rho,
        if report.top1_correct { "yes" } else { "no" },
        report.calibrated_ci_coverage
    );
    let _ = writeln!(
        out,
        "{:>4}  {:<8}  {:>9}  {:>7}  {:>6}  {:>7}  {:>7}  {:>8}  {:>7}",
        "rank", "tool", "true_mean", "mu", "sigma", "ci_low", "ci_high", "win_rate", "matches"
    );
    for t in &report.per_tool {
        let _ = writeln!(
            out,
            "{:>4}  {:<8}  {:>9.2}  {:>7.2}  {:>6.2}  {:>7.2}  {:>7.2}  {:>7.1}%  {:>7}",
            t.rank,
            t.tool,
            t.true_mean,
            t.mu,
            t.sigma,
            t.ci_low,
            t.ci_high,
            t.win_rate * 100.0,
            t.matches
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_plan_spreads_the_total() {
        let cfg = ExperimentConfig::default();
        let plan = cfg.vote_plan();
        assert_eq!(plan.len(), 194);
        assert_eq!(plan.iter().sum::<usize>(), 4075);
        assert!(plan.iter().all(|&v| v == 21 || v == 22));

        let cfg = ExperimentConfig {
            total_votes: None,
            votes_per_expert: 30,
            n_experts: 3,
            ..Default::default()
        };
        assert_eq!(cfg.vote_plan(), vec![30, 30, 30]);
    }

    #[test]
    fn affine_fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let (a, b) = affine_fit(&x, &y);
        assert!((a - 3.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
        assert_eq!(affine_fit(&[5.0, 5.0], &[1.0, 3.0]), (0.0, 2.0));
    }

    #[test]
    fn over_quota_plans_are_rejected() {
        let cfg = ExperimentConfig {
            n_experts: 1,
            total_votes: Some(91),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
