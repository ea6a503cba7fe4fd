//! Prompt matrix for synthetic training-text generation: every
//! (publication type, source) pair crossed with every label.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CfaError, Result};
use crate::labels::LabelSet;

pub const SOURCE_PLACEHOLDER: &str = "{source}";
pub const LABEL_PLACEHOLDER: &str = "{label}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub publication_type: String,
    /// Contains `{source}` and `{label}` exactly once each.
    pub template: String,
    pub sources: Vec<String>,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<()> {
        for placeholder in [SOURCE_PLACEHOLDER, LABEL_PLACEHOLDER] {
            let count = self.template.matches(placeholder).count();
            if count != 1 {
                return Err(CfaError::validation(format!(
                    "template for '{}' must contain {placeholder} exactly once (found {count})",
                    self.publication_type
                )));
            }
        }
        Ok(())
    }

    /// Fills both placeholders in a single pass, so a source or label that
    /// itself contains braces is inserted verbatim.
    pub fn render(&self, source: &str, label: &str) -> String {
        let mut out = String::with_capacity(self.template.len() + source.len() + label.len());
        let mut rest = self.template.as_str();
        while !rest.is_empty() {
            if let Some(tail) = rest.strip_prefix(SOURCE_PLACEHOLDER) {
                out.push_str(source);
                rest = tail;
            } else if let Some(tail) = rest.strip_prefix(LABEL_PLACEHOLDER) {
                out.push_str(label);
                rest = tail;
            } else {
                let ch = rest.chars().next().unwrap_or_default();
                out.push(ch);
                rest = &rest[ch.len_utf8()..];
            }
        }
        out
    }
}

pub fn load_prompt_specs(path: &Path) -> Result<Vec<PromptSpec>> {
    let text = fs::read_to_string(path).map_err(|e| CfaError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CfaError::validation(format!("{}: malformed prompt specs: {e}", path.display()))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub prompt_id: String,
    pub label: String,
    pub publication_type: String,
    pub source: String,
    pub prompt: String,
}

/// Crosses every (spec, source) pair with every label, in spec, source,
/// label order. Ids encode the 1-based positions, so they are stable for
/// identical inputs.
pub fn generate_prompt_matrix(specs: &[PromptSpec], labels: &LabelSet) -> Result<Vec<Prompt>> {
    for (i, spec) in specs.iter().enumerate() {
        spec.validate()
            .map_err(|e| CfaError::validation(format!("prompt spec #{}: {e}", i + 1)))?;
    }
    let total: usize = specs.iter().map(|s| s.sources.len()).sum::<usize>() * labels.len();
    let mut prompts = Vec::with_capacity(total);
    for (si, spec) in specs.iter().enumerate() {
        for (ri, source) in spec.sources.iter().enumerate() {
            for (li, label) in labels.iter().enumerate() {
                prompts.push(Prompt {
                    prompt_id: format!("s{:03}-r{:04}-l{:02}", si + 1, ri + 1, li + 1),
                    label: label.to_string(),
                    publication_type: spec.publication_type.clone(),
                    source: source.clone(),
                    prompt: spec.render(source, label),
                });
            }
        }
    }
    Ok(prompts)
}
