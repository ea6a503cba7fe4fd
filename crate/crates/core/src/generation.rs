//! Driving a remote text generator over a prompt matrix.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::prompts::Prompt;

/// Anything that turns a prompt into text. Failures are reported per prompt
/// and never abort a run.
pub trait TextGenerator: Sync {
    fn generate(&self, prompt: &str) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationError {
    pub prompt_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationOutcome {
    /// Newly generated documents, doc_id = prompt_id, sorted by prompt_id.
    pub documents: Vec<Document>,
    /// Failed prompts, sorted by prompt_id.
    pub errors: Vec<GenerationError>,
    /// Prompts skipped because their id was already fetched.
    pub skipped: usize,
}

/// Runs `generator` over every prompt whose id is not in `already_fetched`,
/// using up to `concurrency` worker threads.
pub fn generate_corpus(
    prompts: &[Prompt],
    generator: &dyn TextGenerator,
    already_fetched: &BTreeSet<String>,
    concurrency: usize,
) -> GenerationOutcome {
    let pending: Vec<&Prompt> = prompts
        .iter()
        .filter(|p| !already_fetched.contains(&p.prompt_id))
        .collect();
    let skipped = prompts.len() - pending.len();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<String, String>)>> =
        Mutex::new(Vec::with_capacity(pending.len()));
    let workers = concurrency.max(1).min(pending.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(prompt) = pending.get(i) else { break };
                let res = generator.generate(&prompt.prompt);
                results
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .push((i, res));
            });
        }
    });
    let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    results.sort_by(|a, b| pending[a.0].prompt_id.cmp(&pending[b.0].prompt_id));

    let mut outcome = GenerationOutcome {
        skipped,
        ..Default::default()
    };
    for (i, res) in results {
        let prompt = pending[i];
        match res {
            Ok(text) => outcome.documents.push(Document::new(
                &prompt.prompt_id,
                Some(prompt.label.clone()),
                text,
            )),
            Err(message) => outcome.errors.push(GenerationError {
                prompt_id: prompt.prompt_id.clone(),
                message,
            }),
        }
    }
    outcome
}
