//! Two-player, no-draw TrueSkill.
//!
//! Every competitor carries a Gaussian skill belief `N(mu, sigma^2)`. A match
//! compares noisy performances `skill + N(0, beta^2)`; the winner is the one
//! with the higher performance. Updates are the closed-form moment matching
//! of the resulting truncated Gaussian. There is no skill drift between
//! matches and no draw margin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatingError {
    #[error("rating has non-finite or non-positive component: mu={mu}, sigma={sigma}")]
    InvalidRating { mu: f64, sigma: f64 },
    #[error("invalid TrueSkill parameters: {0}")]
    InvalidParams(&'static str),
}

/// Gaussian skill belief in rating points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub mu: f64,
    pub sigma: f64,
}

impl Rating {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, RatingError> {
        let rating = Self { mu, sigma };
        rating.validate()?;
        Ok(rating)
    }

    pub fn validate(&self) -> Result<(), RatingError> {
        if self.mu.is_finite() && self.sigma.is_finite() && self.sigma > 0.0 {
            Ok(())
        } else {
            Err(RatingError::InvalidRating {
                mu: self.mu,
                sigma: self.sigma,
            })
        }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Environment constants. `tau` and `draw_probability` are pinned to zero:
/// the arena has no skill drift and no tie outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrueSkillParams {
    pub mu0: f64,
    pub sigma0: f64,
    pub beta: f64,
    pub tau: f64,
    pub draw_probability: f64,
}

impl Default for TrueSkillParams {
    fn default() -> Self {
        Self::with_prior(25.0, 25.0 / 3.0)
    }
}

impl TrueSkillParams {
    /// Prior `(mu0, sigma0)` with the conventional `beta = sigma0 / 2`.
    pub fn with_prior(mu0: f64, sigma0: f64) -> Self {
        Self {
            mu0,
            sigma0,
            beta: sigma0 / 2.0,
            tau: 0.0,
            draw_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), RatingError> {
        if !self.mu0.is_finite() {
            return Err(RatingError::InvalidParams("mu0 must be finite"));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(RatingError::InvalidParams("sigma0 must be positive"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(RatingError::InvalidParams("beta must be positive"));
        }
        if self.tau != 0.0 {
            return Err(RatingError::InvalidParams("tau is fixed at 0 (no drift)"));
        }
        if self.draw_probability != 0.0 {
            return Err(RatingError::InvalidParams(
                "draw_probability is fixed at 0 (no draws)",
            ));
        }
        Ok(())
    }

    /// Scale every length-like constant by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mu0: self.mu0 * k,
            sigma0: self.sigma0 * k,
            beta: self.beta * k,
            ..*self
        }
    }

    fn pair_variance(&self, a: &Rating, b: &Rating) -> f64 {
        // grouped so the result does not depend on argument order
        2.0 * self.beta * self.beta + (a.variance() + b.variance())
    }
}

pub fn new_rating(params: &TrueSkillParams) -> Rating {
    Rating {
        mu: params.mu0,
        sigma: params.sigma0,
    }
}

fn check(a: &Rating, b: &Rating, params: &TrueSkillParams) -> Result<(), RatingError> {
    params.validate()?;
    a.validate()?;
    b.validate()
}

/// Posterior beliefs after `winner` beats `loser`. Returns `(winner', loser')`.
pub fn update_win(
    winner: &Rating,
    loser: &Rating,
    params: &TrueSkillParams,
) -> Result<(Rating, Rating), RatingError> {
    check(winner, loser, params)?;

    let c2 = params.pair_variance(winner, loser);
    let c = c2.sqrt();
    let t = (winner.mu - loser.mu) / c;
    let v = gaussian::v_win(t);
    let w = gaussian::w_win(t);

    let shift = |r: &Rating| r.variance() / c * v;
    let shrink = |r: &Rating| (r.variance() * (1.0 - r.variance() / c2 * w)).sqrt();

    let new_winner = Rating {
        mu: winner.mu + shift(winner),
        sigma: shrink(winner),
    };
    let new_loser = Rating {
        mu: loser.mu - shift(loser),
        sigma: shrink(loser),
    };
    Ok((new_winner, new_loser))
}

/// Two-player draw-likelihood match quality, in (0, 1].
pub fn match_quality(a: &Rating, b: &Rating, params: &TrueSkillParams) -> Result<f64, RatingError> {
    check(a, b, params)?;
    let c2 = params.pair_variance(a, b);
    let gap = a.mu - b.mu;
    Ok((2.0 * params.beta * params.beta / c2).sqrt() * (-gap * gap / (2.0 * c2)).exp())
}

/// Probability that `a` out-performs `b` in a single match.
pub fn win_probability(
    a: &Rating,
    b: &Rating,
    params: &TrueSkillParams,
) -> Result<f64, RatingError> {
    check(a, b, params)?;
    Ok(gaussian::cdf((a.mu - b.mu) / params.pair_variance(a, b).sqrt()))
}
