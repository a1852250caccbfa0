use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnonymizeError;

/// A leaf code or a generalized code covering two or more leaves.
///
/// Serialized as the bare label (`a`) or the sorted leaf group in
/// parentheses (`(a|b)`). Ordering compares the sorted leaf lists, so
/// `a < (a|b) < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Code {
    Leaf(String),
    Generalized(BTreeSet<String>),
}

pub type Itemset = BTreeSet<Code>;

pub(super) fn check_label(label: &str) -> Result<(), AnonymizeError> {
    if label.is_empty() || label.contains(['(', ')', '|']) || label.trim() != label {
        return Err(AnonymizeError::InvalidLabel(label.to_string()));
    }
    Ok(())
}

impl Code {
    pub fn leaf(label: impl Into<String>) -> Self {
        Code::Leaf(label.into())
    }

    /// Collapses to a leaf when the set has a single member.
    pub fn from_leaves(leaves: BTreeSet<String>) -> Self {
        assert!(!leaves.is_empty(), "a code covers at least one leaf");
        if leaves.len() == 1 {
            Code::Leaf(leaves.into_iter().next().unwrap())
        } else {
            Code::Generalized(leaves)
        }
    }

    /// Generalization covering the leaves of both codes.
    pub fn merge(&self, other: &Code) -> Code {
        Code::from_leaves(self.leaves().chain(other.leaves()).map(str::to_string).collect())
    }

    pub fn leaves(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        match self {
            Code::Leaf(l) => Box::new(std::iter::once(l.as_str())),
            Code::Generalized(set) => Box::new(set.iter().map(String::as_str)),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Code::Leaf(_) => 1,
            Code::Generalized(set) => set.len(),
        }
    }

    pub fn is_generalized(&self) -> bool {
        matches!(self, Code::Generalized(_))
    }
}

impl Ord for Code {
    fn cmp(&self, other: &Self) -> Ordering {
        self.leaves().cmp(other.leaves())
    }
}

impl PartialOrd for Code {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Code::Leaf(l) => f.write_str(l),
            Code::Generalized(set) => {
                f.write_str("(")?;
                for (i, l) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    f.write_str(l)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Code {
    type Err = AnonymizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let mut leaves = BTreeSet::new();
            for part in inner.split('|') {
                check_label(part).map_err(|_| AnonymizeError::InvalidLabel(s.to_string()))?;
                if !leaves.insert(part.to_string()) {
                    return Err(AnonymizeError::InvalidLabel(s.to_string()));
                }
            }
            if leaves.len() < 2 {
                return Err(AnonymizeError::InvalidLabel(s.to_string()));
            }
            Ok(Code::Generalized(leaves))
        } else {
            check_label(s)?;
            Ok(Code::Leaf(s.to_string()))
        }
    }
}

impl TryFrom<String> for Code {
    type Error = AnonymizeError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Code> for String {
    fn from(code: Code) -> Self {
        code.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn labels_render_sorted() {
        let c = Code::leaf("b").merge(&Code::leaf("a"));
        assert_eq!(c.to_string(), "(a|b)");
        assert_eq!("(b|a)".parse::<Code>().unwrap(), c);
        assert_eq!(c.merge(&Code::leaf("a")), c);
    }

    #[test]
    fn rejects_malformed_labels() {
        for bad in ["", "(a)", "(a|a)", "a|b", "(a|)", " a", "(a|b"] {
            assert!(bad.parse::<Code>().is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn ordering_follows_leaf_lists() {
        let a = Code::leaf("a");
        let ab: Code = "(a|b)".parse().unwrap();
        let b = Code::leaf("b");
        assert!(a < ab && ab < b);
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(leaves in proptest::collection::btree_set("[a-z0-9=_]{1,5}", 1..5)) {
            let code = Code::from_leaves(leaves);
            let text = code.to_string();
            prop_assert_eq!(text.parse::<Code>().unwrap(), code);
        }
    }
}
