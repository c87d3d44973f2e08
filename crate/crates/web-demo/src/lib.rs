//! Browser demo: the rating math and the simulator, compiled to wasm.
//!
//! Everything here is plain Rust that also runs natively; the
//! `#[wasm_bindgen]` attributes only add the JS glue.

use arena_core::rating::{self, Rating, TrueSkillParams};
use arena_core::sim::{run_experiment, ExperimentConfig};
use wasm_bindgen::prelude::*;

fn params(beta: f64) -> TrueSkillParams {
    // beta is the only free constant the page exposes
    TrueSkillParams {
        beta,
        ..TrueSkillParams::default()
    }
}

fn rating(mu: f64, sigma: f64) -> Result<Rating, String> {
    Rating::new(mu, sigma).map_err(|e| e.to_string())
}

/// One "winner beats loser" update.
///
/// Returns `[mu_w, sigma_w, mu_l, sigma_l, p_win_before, quality_before]`.
#[wasm_bindgen]
pub fn update(mu_w: f64, sigma_w: f64, mu_l: f64, sigma_l: f64, beta: f64) -> Result<Vec<f64>, String> {
    let p = params(beta);
    let (w, l) = (rating(mu_w, sigma_w)?, rating(mu_l, sigma_l)?);
    let (w2, l2) = rating::update_win(&w, &l, &p).map_err(|e| e.to_string())?;
    let p_win = rating::win_probability(&w, &l, &p).map_err(|e| e.to_string())?;
    let quality = rating::match_quality(&w, &l, &p).map_err(|e| e.to_string())?;
    Ok(vec![w2.mu, w2.sigma, l2.mu, l2.sigma, p_win, quality])
}

/// Win probability and match quality as the mean gap sweeps `[-span, span]`.
///
/// Flat triples `[gap, p_win, quality, ...]`, `points` of them.
#[wasm_bindgen]
pub fn curves(sigma_a: f64, sigma_b: f64, beta: f64, span: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || !(span.is_finite() && span > 0.0) {
        return Err("need at least two points and a positive span".into());
    }
    let p = params(beta);
    let b = rating(0.0, sigma_b)?;
    let mut out = Vec::with_capacity(points * 3);
    for i in 0..points {
        let gap = -span + 2.0 * span * i as f64 / (points - 1) as f64;
        let a = rating(gap, sigma_a)?;
        out.push(gap);
        out.push(rating::win_probability(&a, &b, &p).map_err(|e| e.to_string())?);
        out.push(rating::match_quality(&a, &b, &p).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Run one synthetic experiment. `config` is an experiment JSON object
/// (missing keys take the deployed-scale defaults); returns the report JSON.
#[wasm_bindgen]
pub fn simulate(config: &str, seed: u64) -> Result<String, String> {
    let config: ExperimentConfig = if config.trim().is_empty() {
        ExperimentConfig::default()
    } else {
        serde_json::from_str(config).map_err(|e| e.to_string())?
    };
    let report = run_experiment(&config, seed).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}
