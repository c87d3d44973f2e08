//! Substring scan for tool-identifying data in rater-facing payloads.

use super::ArenaConfig;

/// Strings that must never reach a rater: tool ids, display names and raw
/// artifact locations.
pub fn forbidden_strings(config: &ArenaConfig) -> Vec<String> {
    let mut out: Vec<String> = config
        .tools
        .iter()
        .flat_map(|t| [t.tool_id.to_string(), t.display_name.clone()])
        .chain(config.artifacts.iter().map(|a| a.location.clone()))
        .filter(|s| !s.trim().is_empty())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Case-insensitive hits of any needle in `payload`.
pub fn scan<'a>(payload: &str, needles: &'a [String]) -> Vec<&'a str> {
    let haystack = payload.to_lowercase();
    needles
        .iter()
        .filter(|n| haystack.contains(&n.to_lowercase()))
        .map(String::as_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_names_urls_and_ids_case_insensitively() {
        let cfg = ArenaConfig::skeleton();
        let needles = forbidden_strings(&cfg);
        assert!(needles.contains(&"Example Tool 1".to_owned()));
        assert!(needles.contains(&"tool-a".to_owned()));
        assert!(needles.iter().any(|n| n.starts_with("https://")));
        assert_eq!(scan("{\"x\": \"EXAMPLE TOOL 2\"}", &needles), ["Example Tool 2"]);
        assert!(scan("{\"left\": \"/artifact/0badc0de\"}", &needles).is_empty());
    }
}
