//! Rank-agreement measures between two orderings of the same items.

use std::collections::HashMap;
use std::hash::Hash;

use super::SimError;

fn positions<T: Eq + Hash>(order: &[T]) -> Result<HashMap<&T, usize>, SimError> {
    let mut map = HashMap::with_capacity(order.len());
    for (i, item) in order.iter().enumerate() {
        if map.insert(item, i).is_some() {
            return Err(SimError::Domain("ordering contains duplicates".into()));
        }
    }
    Ok(map)
}

fn paired_ranks<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<Vec<(usize, usize)>, SimError> {
    if a.len() != b.len() {
        return Err(SimError::Domain(format!(
            "orderings differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(SimError::Domain("need at least two items to rank".into()));
    }
    let pos_b = positions(b)?;
    positions(a)?;
    a.iter()
        .enumerate()
        .map(|(i, item)| {
            pos_b
                .get(item)
                .map(|&j| (i, j))
                .ok_or_else(|| SimError::Domain("orderings hold different items".into()))
        })
        .collect()
}

/// Kendall's tau-a, `(concordant - discordant) / C(n, 2)`, by enumerating
/// every pair.
pub fn kendall_tau<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, SimError> {
    let ranks = paired_ranks(a, b)?;
    let n = ranks.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let da = ranks[i].0 as i64 - ranks[j].0 as i64;
            let db = ranks[i].1 as i64 - ranks[j].1 as i64;
            score += da.signum() * db.signum();
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

/// Spearman's rho for tie-free orderings, `1 - 6 sum(d^2) / (n (n^2 - 1))`.
pub fn spearman_rho<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, SimError> {
    let ranks = paired_ranks(a, b)?;
    let n = ranks.len() as f64;
    let d2: f64 = ranks
        .iter()
        .map(|&(i, j)| {
            let d = i as f64 - j as f64;
            d * d
        })
        .sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}
