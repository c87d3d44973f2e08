use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use arena_core::arena::config::ReleasedPrompt;
use arena_core::arena::event::write_log;
use arena_core::arena::ArenaConfig;
use arena_core::leaderboard;
use arena_core::sim::{run_experiment_detailed, ExperimentConfig};
use serde_json::{json, Value};

fn arena() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arena"));
    for var in ["ARENA_CONFIG", "ARENA_LOG_PATH", "ARENA_SEED", "ARENA_BIND_ADDR"] {
        cmd.env_remove(var);
    }
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    arena().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Config plus a 1,000-vote log from a simulated deployment.
struct Fixture {
    _dir: tempfile::TempDir,
    config: PathBuf,
    log: PathBuf,
    live_csv: String,
    live_state: String,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        n_experts: 50,
        total_votes: Some(1000),
        ..ExperimentConfig::default()
    };
    let run = run_experiment_detailed(&cfg, 23).unwrap();
    let config = dir.path().join("arena.json");
    let log = dir.path().join("votes.jsonl");
    fs::write(&config, run.service.config().to_json_pretty()).unwrap();
    write_log(run.service.log(), fs::File::create(&log).unwrap()).unwrap();
    Fixture {
        live_csv: leaderboard::to_csv(&run.service.leaderboard_rows().unwrap()),
        live_state: run.service.state().canonical_json(),
        _dir: dir,
        config,
        log,
    }
}

#[test]
fn init_writes_a_loadable_skeleton() {
    let o = run(&["init"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("\"_comment\""));
    ArenaConfig::from_json(&text).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("arena.json");
    assert_eq!(run(&["init", "--out", p(&out)]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
    let again = run(&["init", "--out", p(&out)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
    assert_eq!(run(&["init", "--out", p(&out), "--force"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one_on_stderr() {
    let o = run(&["replay", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(run(&["bogus-command"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("simulate"));
}

#[test]
fn replay_of_an_empty_log_gives_the_priors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("arena.json");
    let log = dir.path().join("votes.jsonl");
    fs::write(&config, ArenaConfig::skeleton().to_json_pretty()).unwrap();
    fs::write(&log, "").unwrap();
    let o = run(&["replay", "--config", p(&config), "--log", p(&log), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,tool,mu,sigma,ci_low,ci_high,win_rate,matches"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[2].parse::<f64>().unwrap(), 25.0, "{row}");
        assert_eq!(cells[7], "0");
    }
}

#[test]
fn io_and_validation_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("arena.json");
    let log = dir.path().join("votes.jsonl");
    let missing = dir.path().join("missing.jsonl");
    fs::write(&config, ArenaConfig::skeleton().to_json_pretty()).unwrap();
    fs::write(&log, "").unwrap();

    let o = run(&["leaderboard", "--config", p(&config), "--log", p(&missing)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.jsonl"));
    let o = run(&["leaderboard", "--config", p(&dir.path().join("nope.json")), "--log", p(&log)]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"tools": [], "prompts": []}"#).unwrap();
    assert_eq!(run(&["leaderboard", "--config", p(&bad), "--log", p(&log)]).status.code(), Some(1));

    fs::write(&log, "{\"event_id\":1").unwrap();
    let o = run(&["replay", "--config", p(&config), "--log", p(&log)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("corrupt"), "{}", stderr(&o));
}

#[test]
fn table_and_replay_agree_with_the_live_run() {
    let fx = fixture();
    let (config, log) = (p(&fx.config), p(&fx.log));

    let table = run(&["leaderboard", "--config", config, "--log", log, "--format", "table"]);
    assert!(table.status.success(), "{}", stderr(&table));
    let text = stdout(&table);
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["rank", "tool", "mu", "sigma", "ci_low", "ci_high", "win_rate", "matches"]);
    assert_eq!(text.lines().count(), 11);

    let csv = stdout(&run(&["leaderboard", "--config", config, "--log", log]));
    assert_eq!(csv, fx.live_csv);

    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let replayed = run(&["replay", "--config", config, "--log", log, "--format", "csv", "--state", p(&state)]);
    assert!(replayed.status.success());
    assert_eq!(stdout(&replayed), csv);
    assert_eq!(fs::read_to_string(&state).unwrap(), fx.live_state);

    let json = run(&["leaderboard", "--config", config, "--log", log, "--format", "json"]);
    let rows: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 10);
    assert_eq!(rows.as_array().unwrap().iter().map(|r| r["matches"].as_u64().unwrap()).sum::<u64>(), 2000);

    // env vars stand in for the flags
    let via_env = arena()
        .args(["leaderboard"])
        .env("ARENA_CONFIG", config)
        .env("ARENA_LOG_PATH", log)
        .output()
        .unwrap();
    assert_eq!(stdout(&via_env), csv);
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("exp.json");
    fs::write(&exp, json!({"n_experts": 12, "total_votes": 300}).to_string()).unwrap();
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    let mut printed = Vec::new();
    for out in &outs {
        let o = run(&["simulate", "--experiment", p(&exp), "--seeds", "3", "--seed", "7", "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        printed.push(stdout(&o));
    }
    assert_eq!(printed[0], printed[1]);
    assert!(printed[0].starts_with("seeds 3 "));
    let mut names: Vec<String> = fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["seed-7.json", "seed-8.json", "seed-9.json", "summary.json"]);
    for name in &names {
        assert_eq!(fs::read(outs[0].join(name)).unwrap(), fs::read(outs[1].join(name)).unwrap(), "{name}");
    }
    let report: Value = serde_json::from_slice(&fs::read(outs[0].join("seed-7.json")).unwrap()).unwrap();
    assert_eq!(report["votes"], 300);

    fs::write(&exp, json!({"n_tools": 1}).to_string()).unwrap();
    let o = run(&["simulate", "--experiment", p(&exp), "--seeds", "1", "--out", p(&outs[0])]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn export_prompts_uses_the_released_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("arena.json");
    fs::write(&config, ArenaConfig::skeleton().to_json_pretty()).unwrap();
    let o = run(&["export-prompts", "--config", p(&config)]);
    assert!(o.status.success());
    let prompts: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    let mut keys: Vec<&String> = prompts[0].as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(keys, ["constraints", "goal", "scenario", "sector", "title", "type", "vibe"]);
    let typed: Vec<ReleasedPrompt> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(typed.len(), 1);
}

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(config: &Path, log: &Path) -> Server {
    let mut child = arena()
        .args(["serve", "--config", p(config), "--log", p(log), "--bind", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let base = loop {
        let line = lines.next().expect("server exited before listening").unwrap();
        if let Some(rest) = line.strip_prefix("listening on ") {
            break rest.split_whitespace().next().unwrap().to_owned();
        }
    };
    // keep draining so the server never blocks on a full pipe
    std::thread::spawn(move || for _ in lines {});
    Server { child, base }
}

#[tokio::test(flavor = "multi_thread")]
async fn served_votes_survive_a_kill() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("arena.json");
    let log = dir.path().join("votes.jsonl");
    let arena_config = ExperimentConfig {
        n_experts: 2,
        ..ExperimentConfig::default()
    }
    .arena_config(5);
    fs::write(&config, arena_config.to_json_pretty()).unwrap();
    let http = arena_cli::http::artifact_client();

    let server = start_server(&config, &log);
    let url = |path: &str| format!("{}{path}", server.base);
    let onboard = json!({
        "access_code": ExperimentConfig::access_code(0),
        "first_name": "Grace", "last_name": "Hopper",
        "roles": ["WebDeveloper"], "used_ai_tools_before": true
    });
    let receipt: Value = http.post(url("/onboard")).json(&onboard).send().await.unwrap().json().await.unwrap();
    let token = receipt["token"].as_str().unwrap().to_owned();
    http.post(url("/session/start")).bearer_auth(&token).send().await.unwrap();
    for _ in 0..5 {
        let m: Value = http.get(url("/match")).bearer_auth(&token).send().await.unwrap().json().await.unwrap();
        let vote = json!({"match_id": m["match_id"], "choice": "left", "full_view_acknowledged": true});
        let res = http.post(url("/vote")).bearer_auth(&token).json(&vote).send().await.unwrap();
        assert!(res.status().is_success());
    }
    let pending: Value = http.get(url("/match")).bearer_auth(&token).send().await.unwrap().json().await.unwrap();
    let before = http.get(url("/leaderboard")).send().await.unwrap().text().await.unwrap();
    drop(server);

    let server = start_server(&config, &log);
    let url = |path: &str| format!("{}{path}", server.base);
    let after = http.get(url("/leaderboard")).send().await.unwrap().text().await.unwrap();
    assert_eq!(after, before);
    // the token is still valid and the outstanding match is re-served
    let again: Value = http.get(url("/match")).bearer_auth(&token).send().await.unwrap().json().await.unwrap();
    assert_eq!(again["match_id"], pending["match_id"]);
    assert_eq!(again["session"]["votes_cast"], 5);

    let replay = run(&["leaderboard", "--config", p(&config), "--log", p(&log)]);
    assert_eq!(stdout(&replay).lines().count(), 11);
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 5);
}
