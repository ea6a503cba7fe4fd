//! Keyword-lexicon scoring system.
//!
//! For each label, every lexicon phrase is matched against the document by
//! a contiguous n-gram scan. With `freq` the total number of matches,
//! `distinct` the number of phrases matched at least once and `len` the
//! document's token count, the label score is
//!
//! ```text
//! score = (freq / len) * (1 + log2(1 + distinct))
//! ```
//!
//! and 0 when nothing matched. The first factor is length-normalized keyword
//! density; the second rewards breadth of matched vocabulary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{CfaError, Result};
use crate::labels::LabelSet;

pub const MAX_PHRASE_TOKENS: usize = 4;

/// label -> keyword phrases, each already tokenized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>")]
pub struct KeywordLexicon {
    phrases: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    tokenized: BTreeMap<String, Vec<Vec<String>>>,
}

impl KeywordLexicon {
    pub fn new(phrases: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut tokenized = BTreeMap::new();
        for (label, list) in &phrases {
            if list.is_empty() {
                return Err(CfaError::validation(format!(
                    "lexicon label '{label}' has no phrases"
                )));
            }
            let mut toks = Vec::with_capacity(list.len());
            for phrase in list {
                if phrase.to_lowercase() != *phrase {
                    return Err(CfaError::validation(format!(
                        "lexicon phrase '{phrase}' for '{label}' is not lowercase"
                    )));
                }
                let t = tokenize(phrase);
                if t.is_empty() || t.len() > MAX_PHRASE_TOKENS {
                    return Err(CfaError::validation(format!(
                        "lexicon phrase '{phrase}' for '{label}' must have 1-{MAX_PHRASE_TOKENS} tokens"
                    )));
                }
                toks.push(t);
            }
            tokenized.insert(label.clone(), toks);
        }
        Ok(KeywordLexicon { phrases, tokenized })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CfaError::io(path, e))?;
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(&text).map_err(|e| {
            CfaError::validation(format!("{}: malformed lexicon: {e}", path.display()))
        })?;
        KeywordLexicon::new(map)
    }

    pub fn phrases(&self, label: &str) -> Option<&[String]> {
        self.phrases.get(label).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.phrases.keys().map(String::as_str)
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for KeywordLexicon {
    type Error = CfaError;

    fn try_from(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        KeywordLexicon::new(map)
    }
}

fn count_occurrences(tokens: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || tokens.len() < phrase.len() {
        return 0;
    }
    tokens
        .windows(phrase.len())
        .filter(|w| *w == phrase)
        .count()
}

/// Raw keyword score per label, in `labels` order.
pub fn keyword_scores(
    tokens: &[String],
    lexicon: &KeywordLexicon,
    labels: &LabelSet,
) -> Result<Vec<f64>> {
    if let Some(missing) = labels.iter().find(|l| !lexicon.tokenized.contains_key(*l)) {
        return Err(CfaError::validation(format!(
            "lexicon has no phrases for label '{missing}'"
        )));
    }
    if tokens.is_empty() {
        return Ok(vec![0.0; labels.len()]);
    }
    let len = tokens.len() as f64;
    Ok(labels
        .iter()
        .map(|label| {
            let mut freq = 0usize;
            let mut distinct = 0usize;
            for phrase in &lexicon.tokenized[label] {
                let c = count_occurrences(tokens, phrase);
                freq += c;
                if c > 0 {
                    distinct += 1;
                }
            }
            if freq == 0 {
                0.0
            } else {
                (freq as f64 / len) * (1.0 + (1.0 + distinct as f64).log2())
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon(entries: &[(&str, &[&str])]) -> KeywordLexicon {
        KeywordLexicon::new(
            entries
                .iter()
                .map(|(l, ps)| (l.to_string(), ps.iter().map(|p| p.to_string()).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn water_example() {
        let lex = lexicon(&[
            ("SDG6", &["water", "sanitation"]),
            ("SDG7", &["energy"]),
            ("SDG1", &["poverty"]),
        ]);
        let labels = LabelSet::new(["SDG1", "SDG6", "SDG7"]).unwrap();
        let s = keyword_scores(&tokenize("water water sanitation access"), &lex, &labels).unwrap();
        let expected = 0.75 * (1.0 + 3f64.log2());
        assert!((s[1] - expected).abs() < 1e-12);
        assert!((s[1] - 1.938_72).abs() < 1e-5);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn no_match_and_empty() {
        let lex = lexicon(&[("A", &["alpha"]), ("B", &["beta gamma"])]);
        let labels = LabelSet::new(["A", "B"]).unwrap();
        assert_eq!(
            keyword_scores(&tokenize("nothing here"), &lex, &labels).unwrap(),
            [0.0, 0.0]
        );
        assert_eq!(keyword_scores(&[], &lex, &labels).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn multi_token_and_overlap() {
        let lex = lexicon(&[("A", &["a a", "a"]), ("B", &["b c"])]);
        let labels = LabelSet::new(["A", "B"]).unwrap();
        let s = keyword_scores(&tokenize("a a a b c"), &lex, &labels).unwrap();
        // "a a" twice (overlapping) + "a" three times
        assert!((s[0] - (5.0 / 5.0) * (1.0 + 3f64.log2())).abs() < 1e-12);
        assert!((s[1] - (1.0 / 5.0) * 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplication_invariant() {
        let lex = lexicon(&[("A", &["water"]), ("B", &["energy"])]);
        let labels = LabelSet::new(["A", "B"]).unwrap();
        let text = "clean water and energy for all water users";
        let once = keyword_scores(&tokenize(text), &lex, &labels).unwrap();
        let twice = keyword_scores(&tokenize(&format!("{text} {text}")), &lex, &labels).unwrap();
        for (x, y) in once.iter().zip(&twice) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        let bad = |m: BTreeMap<String, Vec<String>>| KeywordLexicon::new(m).is_err();
        assert!(bad([("A".into(), vec![])].into()));
        assert!(bad([("A".into(), vec!["Upper".into()])].into()));
        assert!(bad([("A".into(), vec!["a b c d e".into()])].into()));
        let lex = lexicon(&[("A", &["x"])]);
        let labels = LabelSet::new(["A", "B"]).unwrap();
        assert!(keyword_scores(&tokenize("x"), &lex, &labels).is_err());
        let parsed: KeywordLexicon = serde_json::from_str(r#"{"A":["x y"]}"#).unwrap();
        assert_eq!(parsed.phrases("A").unwrap(), ["x y"]);
    }
}
