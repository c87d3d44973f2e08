use arena_core::sim::{
    make_ground_truth, run_experiment, run_experiment_detailed, run_seeds, simulate_vote,
    summarize, ExperimentConfig, RaterKind, RaterModel,
};
use arena_core::{PromptId, ToolId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn share_first(model: &RaterModel, gap: f64, draws: usize) -> f64 {
    let mut gt = make_ground_truth(2, 1, 0.0, 0.0, 25.0, 1).unwrap();
    let (a, b) = (ToolId::from("tool-00"), ToolId::from("tool-01"));
    let p = PromptId::from("p01");
    *gt.quality.get_mut(&a).unwrap().get_mut(&p).unwrap() += gap;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let wins = (0..draws)
        .filter(|_| simulate_vote(model, &gt, &p, &a, &b, &mut rng).unwrap() == a)
        .count();
    wins as f64 / draws as f64
}

#[test]
fn empirical_win_shares_follow_the_choice_model() {
    let bt = RaterModel::default();
    assert!((share_first(&bt, 0.0, 10_000) - 0.5).abs() <= 0.015);
    // gap equal to the scale: 1 / (1 + e^-1)
    let expected = 1.0 / (1.0 + (-1.0f64).exp());
    assert!((share_first(&bt, bt.scale, 10_000) - expected).abs() <= 0.015);

    let th = RaterModel {
        kind: RaterKind::Thurstone,
        ..bt
    };
    assert!((share_first(&th, 0.0, 10_000) - 0.5).abs() <= 0.015);
    let sharp = RaterModel { scale: 1e-9, ..bt };
    assert_eq!(share_first(&sharp, 0.01, 1_000), 1.0);
}

#[test]
fn reports_are_deterministic_and_go_through_the_service() {
    let cfg = ExperimentConfig {
        n_experts: 30,
        total_votes: Some(600),
        ..ExperimentConfig::default()
    };
    let a = serde_json::to_string(&run_experiment(&cfg, 7).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&cfg, 7).unwrap()).unwrap();
    assert_eq!(a, b);

    let run = run_experiment_detailed(&cfg, 7).unwrap();
    let audit = run.report.audit;
    assert_eq!(audit.submit_vote, 600);
    assert_eq!(audit.get_match, 600);
    assert_eq!(audit.onboard, 30);
    assert_eq!(run.service.log().len(), 600);
    assert_eq!(run.report.kendall_tau == 1.0, run.report.truth_order
        == run.report.per_tool.iter().map(|t| t.tool.clone()).collect::<Vec<_>>());
}

fn mean_tau(cfg: &ExperimentConfig) -> f64 {
    let seeds: Vec<u64> = (1..=20).collect();
    summarize(&run_seeds(cfg, &seeds).unwrap()).mean_kendall_tau
}

#[test]
fn more_signal_never_hurts() {
    let taus: Vec<f64> = [0.05, 0.2, 1.0]
        .iter()
        .map(|&spacing| {
            mean_tau(&ExperimentConfig {
                spacing,
                total_votes: Some(2000),
                ..ExperimentConfig::default()
            })
        })
        .collect();
    assert!(taus.windows(2).all(|w| w[0] <= w[1]), "{taus:?}");
}

#[test]
fn more_votes_never_hurt() {
    let base = ExperimentConfig::default();
    let few = mean_tau(&ExperimentConfig {
        total_votes: Some(400),
        ..base.clone()
    });
    let many = mean_tau(&ExperimentConfig {
        total_votes: Some(4000),
        ..base
    });
    assert!(many >= few, "400 votes: {few}, 4000 votes: {many}");
}
