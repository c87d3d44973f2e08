use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a generation tool (the competitor being rated).
    ToolId
);
string_id!(PromptId);
string_id!(ExpertId);
string_id!(MatchId);

/// Unordered pair of distinct tools, stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ToolPair {
    pub first: ToolId,
    pub second: ToolId,
}

impl ToolPair {
    pub fn new(a: ToolId, b: ToolId) -> Self {
        if a <= b {
            Self { first: a, second: b }
        } else {
            Self { first: b, second: a }
        }
    }

    pub fn contains(&self, tool: &ToolId) -> bool {
        &self.first == tool || &self.second == tool
    }

    /// Stable textual key, used for map keys in canonical serialization.
    pub fn key(&self) -> String {
        format!("{}|{}", self.first, self.second)
    }
}

impl fmt::Display for ToolPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.first, self.second)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_is_unordered() {
        let ab = ToolPair::new("b".into(), "a".into());
        assert_eq!(ab, ToolPair::new("a".into(), "b".into()));
        assert_eq!(ab.key(), "a|b");
        assert!(ab.contains(&"a".into()));
        assert!(!ab.contains(&"c".into()));
    }
}
