use std::fs;
use std::path::Path;

use arena_core::arena::ArenaConfig;
use serde_json::{json, Map, Value};

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<ArenaConfig, CliError> {
    let text = read_text(path)?;
    ArenaConfig::from_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Write via a sibling temp file so a crash never leaves half a document.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::io(path, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn annotate(value: &mut Value, key: &str, comment: &str) {
    if let Some(obj) = value.get_mut(key).and_then(Value::as_object_mut) {
        let mut with = Map::new();
        with.insert("_comment".into(), json!(comment));
        with.extend(std::mem::take(obj));
        *obj = with;
    }
}

/// A valid config documented with `_comment` keys, which the loader ignores.
pub fn skeleton() -> String {
    let mut value = serde_json::to_value(ArenaConfig::skeleton()).expect("sample config serializes");
    annotate(
        &mut value,
        "trueskill",
        "Prior mean/deviation and performance noise. Keep beta = sigma0 / 2 unless you know why not.",
    );
    annotate(
        &mut value,
        "matchmaker",
        "Pair scoring weights and penalties; the defaults balance exposure across tools.",
    );
    let Value::Object(fields) = value else { unreachable!("config is an object") };
    let mut out = Map::new();
    out.insert(
        "_comment".into(),
        json!([
            "Arena configuration. Keys starting with _comment are ignored.",
            "tools: display_name is shown to admins only; raters see neutral labels.",
            "prompts: the released field schema (title, type, sector, goal, scenario, vibe, constraints); prompt_id is assigned positionally when omitted.",
            "artifacts: one entry per (tool, prompt); location is an http(s) URL or a bundle directory relative to --artifact-root.",
            "access_codes: one per vetted expert. admin_token guards the /admin endpoints.",
            "sigma_policy: rms | mean | sem. ci_level: two-sided interval level."
        ]),
    );
    out.extend(fields);
    let mut text = serde_json::to_string_pretty(&Value::Object(out)).expect("json value serializes");
    text.push('\n');
    text
}
