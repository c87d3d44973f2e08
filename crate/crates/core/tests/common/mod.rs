#![allow(dead_code)]

use std::path::Path;

use arena_core::arena::service::{ProfileFields, SessionState, StepClock};
use arena_core::arena::{ArenaConfig, ArenaService, Choice, FileStore, Role};
use arena_core::sim::model::simulate_vote;
use arena_core::sim::{ExperimentConfig, GroundTruth, RaterModel};
use arena_core::Rating;

/// Posterior after "winner beat loser", by conditioning both skills on the
/// performance difference `d ~ N(mu_w - mu_l, c^2)` and integrating over the
/// truncated region `d > 0` with composite Simpson. Uses nothing from the
/// crate under test.
pub fn oracle_update(w: (f64, f64), l: (f64, f64), beta: f64) -> ((f64, f64), (f64, f64)) {
    let (mw, sw) = w;
    let (ml, sl) = l;
    let c2 = 2.0 * beta * beta + sw * sw + sl * sl;
    let c = c2.sqrt();
    // standardized x = (d - delta) / c, truncated below at a
    let a = -(mw - ml) / c;
    // integrate g(y) = exp(-a y - y^2 / 2) = phi(a + y) / phi(a) over y >= 0
    let upper = (-a).max(0.0) + 15.0;
    let n = 40_000usize;
    let h = upper / n as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let y = i as f64 * h;
        let g = (-a * y - 0.5 * y * y).exp();
        let k = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        z += k * g;
        m1 += k * y * g;
        m2 += k * y * y * g;
    }
    let mean_y = m1 / z;
    let var_x = m2 / z - mean_y * mean_y;
    let mean_x = a + mean_y;
    // E[d] - delta and Var[d] under truncation
    let shift = c * mean_x;
    let var_d = c2 * var_x;

    let post = |mu: f64, s: f64, sign: f64| {
        let k = s * s / c2;
        let mean = mu + sign * k * shift;
        let var = s * s - s * s * k + k * k * var_d;
        (mean, var.sqrt())
    };
    (post(mw, sw, 1.0), post(ml, sl, -1.0))
}

pub fn rating(mu: f64, sigma: f64) -> Rating {
    Rating::new(mu, sigma).unwrap()
}

pub fn profile(i: usize) -> ProfileFields {
    ProfileFields {
        first_name: Some(format!("Test{i}")),
        last_name: Some("Expert".into()),
        roles: Some(vec![if i % 2 == 0 { Role::Designer } else { Role::WebDeveloper }]),
        used_ai_tools_before: Some(i % 3 == 0),
    }
}

/// File-backed service rebuilt from whatever is on disk, as after a crash.
pub fn open_service(config: &ArenaConfig, log: &Path) -> ArenaService {
    let events = arena_core::arena::event::read_log_file(log).unwrap();
    let profiles = FileStore::read_profiles(log).unwrap();
    ArenaService::restore(
        config.clone(),
        events,
        profiles,
        Box::new(FileStore::open(log).unwrap()),
        Box::new(StepClock::default()),
    )
    .unwrap()
}

/// One simulated vote by expert `i`: open a session if needed, take the
/// served match, answer from the ground truth.
pub fn cast_vote(
    service: &mut ArenaService,
    truth: &GroundTruth,
    i: usize,
    rng: &mut impl rand::Rng,
) -> arena_core::arena::service::VoteReceipt {
    let code = ExperimentConfig::access_code(i);
    let token = service.onboard(&code, profile(i)).unwrap().token;
    if service.session(&token).unwrap().state != SessionState::Open {
        service.start_session(&token).unwrap();
    }
    let view = service.get_match(&token).unwrap();
    let (left, prompt) = service.slot_identity(&view.left.slot_token).unwrap();
    let (left, prompt) = (left.clone(), prompt.clone());
    let (right, _) = service.slot_identity(&view.right.slot_token).unwrap();
    let right = right.clone();
    let winner = simulate_vote(&RaterModel::default(), truth, &prompt, &left, &right, rng).unwrap();
    let choice = if winner == left { Choice::Left } else { Choice::Right };
    service.submit_vote(&token, &view.match_id, choice, true).unwrap()
}
