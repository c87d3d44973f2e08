//! Synthetic ground truth and choice models for simulated raters.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::gaussian;
use crate::ids::{PromptId, ToolId};
use crate::rng::{self, Purpose};

pub fn tool_id(i: usize) -> ToolId {
    ToolId::new(format!("tool-{i:02}"))
}

pub fn prompt_id(i: usize) -> PromptId {
    PromptId::new(format!("p{:02}", i + 1))
}

/// Latent quality of every `(tool, prompt)` on the rating-point scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// tool -> prompt -> quality
    pub quality: BTreeMap<ToolId, BTreeMap<PromptId, f64>>,
    /// Mean quality of each tool over all prompts.
    pub tool_means: BTreeMap<ToolId, f64>,
}

impl GroundTruth {
    pub fn quality(&self, tool: &ToolId, prompt: &PromptId) -> Option<f64> {
        self.quality.get(tool)?.get(prompt).copied()
    }

    /// Tools from best to worst true mean (ties by id).
    pub fn order(&self) -> Vec<ToolId> {
        let mut tools: Vec<(&ToolId, f64)> = self.tool_means.iter().map(|(t, m)| (t, *m)).collect();
        tools.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        tools.into_iter().map(|(t, _)| t.clone()).collect()
    }
}

/// Evenly spaced tool means around `center`, assigned to tools by a seeded
/// permutation, plus per-prompt Gaussian jitter. The jitter is centred per
/// tool so each tool's mean over prompts is exactly its nominal mean.
pub fn make_ground_truth(
    n_tools: usize,
    n_prompts: usize,
    spacing: f64,
    prompt_jitter: f64,
    center: f64,
    seed: u64,
) -> Result<GroundTruth, SimError> {
    if n_tools < 2 {
        return Err(SimError::Domain("need at least two tools".into()));
    }
    if n_prompts < 1 {
        return Err(SimError::Domain("need at least one prompt".into()));
    }
    if !(spacing.is_finite() && spacing >= 0.0) {
        return Err(SimError::Domain("spacing must be finite and >= 0".into()));
    }
    if !(prompt_jitter.is_finite() && prompt_jitter >= 0.0) {
        return Err(SimError::Domain("prompt_jitter must be finite and >= 0".into()));
    }
    let mut rng = rng::stream(seed, Purpose::GroundTruth, "", 0);
    let mut ranks: Vec<usize> = (0..n_tools).collect();
    ranks.shuffle(&mut rng);
    let noise = Normal::new(0.0, prompt_jitter).expect("jitter validated above");
    let half = (n_tools as f64 - 1.0) / 2.0;

    let mut quality = BTreeMap::new();
    let mut tool_means = BTreeMap::new();
    for (i, &rank) in ranks.iter().enumerate() {
        let mean = center + spacing * (rank as f64 - half);
        let mut draws: Vec<f64> = (0..n_prompts).map(|_| noise.sample(&mut rng)).collect();
        let offset = draws.iter().sum::<f64>() / n_prompts as f64;
        for d in &mut draws {
            *d -= offset;
        }
        let row = draws
            .into_iter()
            .enumerate()
            .map(|(p, d)| (prompt_id(p), mean + d))
            .collect();
        quality.insert(tool_id(i), row);
        tool_means.insert(tool_id(i), mean);
    }
    Ok(GroundTruth {
        quality,
        tool_means,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterKind {
    BradleyTerry,
    Thurstone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaterModel {
    pub kind: RaterKind,
    /// Discrimination scale, > 0. Smaller is sharper.
    pub scale: f64,
    /// Log-normal spread of per-expert scale multipliers; 0 disables it.
    pub scale_jitter: f64,
}

impl Default for RaterModel {
    fn default() -> Self {
        Self {
            kind: RaterKind::BradleyTerry,
            scale: 2.0,
            scale_jitter: 0.0,
        }
    }
}

impl RaterModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(SimError::Domain("rater scale must be > 0".into()));
        }
        if !(self.scale_jitter.is_finite() && self.scale_jitter >= 0.0) {
            return Err(SimError::Domain("scale_jitter must be >= 0".into()));
        }
        Ok(())
    }

    /// Probability that the item with quality `qa` beats the one with `qb`.
    pub fn p_first_wins(&self, qa: f64, qb: f64) -> f64 {
        self.p_first_wins_scaled(qa, qb, self.scale)
    }

    fn p_first_wins_scaled(&self, qa: f64, qb: f64, scale: f64) -> f64 {
        let gap = qa - qb;
        if gap == 0.0 {
            return 0.5;
        }
        match self.kind {
            RaterKind::BradleyTerry => 1.0 / (1.0 + (-gap / scale).exp()),
            RaterKind::Thurstone => gaussian::cdf(gap / (scale * std::f64::consts::SQRT_2)),
        }
    }

    /// This expert's personal scale.
    pub fn expert_scale(&self, rng: &mut impl Rng) -> f64 {
        if self.scale_jitter == 0.0 {
            return self.scale;
        }
        let z: f64 = Normal::new(0.0, self.scale_jitter)
            .expect("validated")
            .sample(rng);
        self.scale * z.exp()
    }
}

/// Draw the winner between `a` and `b` on `prompt`.
pub fn simulate_vote(
    model: &RaterModel,
    gt: &GroundTruth,
    prompt: &PromptId,
    a: &ToolId,
    b: &ToolId,
    rng: &mut impl Rng,
) -> Result<ToolId, SimError> {
    simulate_vote_scaled(model, model.scale, gt, prompt, a, b, rng)
}

pub(crate) fn simulate_vote_scaled(
    model: &RaterModel,
    scale: f64,
    gt: &GroundTruth,
    prompt: &PromptId,
    a: &ToolId,
    b: &ToolId,
    rng: &mut impl Rng,
) -> Result<ToolId, SimError> {
    let missing = |t: &ToolId| SimError::Domain(format!("no ground truth for ({t}, {prompt})"));
    let qa = gt.quality(a, prompt).ok_or_else(|| missing(a))?;
    let qb = gt.quality(b, prompt).ok_or_else(|| missing(b))?;
    let p = model.p_first_wins_scaled(qa, qb, scale);
    Ok(if rng.random::<f64>() < p { a.clone() } else { b.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spacing_and_jitter_is_flat() {
        let gt = make_ground_truth(4, 5, 0.0, 0.0, 25.0, 3).unwrap();
        for row in gt.quality.values() {
            assert!(row.values().all(|&q| q == 25.0));
        }
    }

    #[test]
    fn ten_tools_span_nine_points_around_center() {
        let gt = make_ground_truth(10, 30, 1.0, 0.5, 25.0, 11).unwrap();
        let means: Vec<f64> = gt.tool_means.values().copied().collect();
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 20.5).abs() < 1e-12 && (hi - 29.5).abs() < 1e-12);
        for (tool, row) in &gt.quality {
            let m = row.values().sum::<f64>() / row.len() as f64;
            assert!((m - gt.tool_means[tool]).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_truth_is_seed_deterministic() {
        let a = make_ground_truth(6, 7, 1.0, 0.5, 25.0, 99).unwrap();
        assert_eq!(a, make_ground_truth(6, 7, 1.0, 0.5, 25.0, 99).unwrap());
        assert_ne!(a, make_ground_truth(6, 7, 1.0, 0.5, 25.0, 100).unwrap());
        assert!(make_ground_truth(1, 7, 1.0, 0.5, 25.0, 1).is_err());
        assert!(make_ground_truth(3, 7, -1.0, 0.5, 25.0, 1).is_err());
    }

    #[test]
    fn choice_probabilities() {
        let bt = RaterModel::default();
        assert_eq!(bt.p_first_wins(3.0, 3.0), 0.5);
        let p = bt.p_first_wins(2.0, 0.0);
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.7311).abs() < 1e-4);
        let th = RaterModel {
            kind: RaterKind::Thurstone,
            ..bt
        };
        assert!((th.p_first_wins(2.0 * 2f64.sqrt(), 0.0) - gaussian::cdf(1.0)).abs() < 1e-15);
        let sharp = RaterModel { scale: 1e-9, ..bt };
        assert_eq!(sharp.p_first_wins(25.1, 25.0), 1.0);
        assert_eq!(sharp.p_first_wins(25.0, 25.1), 0.0);
    }
}
