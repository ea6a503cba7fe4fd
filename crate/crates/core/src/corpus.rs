//! Documents, tokenization and corpus-quality metrics.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CfaError, Result};
use crate::labels::natural_cmp;

/// Group name used for documents without a label.
pub const UNLABELED: &str = "unlabeled";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub label: Option<String>,
    pub text: String,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, label: Option<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Document {
            doc_id: doc_id.into(),
            label,
            tokens: tokenize(&text),
            text,
        }
    }
}

/// Lowercases, splits on Unicode whitespace and trims non-alphanumeric
/// characters from both ends of each token. Interior punctuation survives
/// (`sdg-6`).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Unique tokens over total tokens; `None` for an empty document.
pub fn type_token_ratio(tokens: &[String]) -> Option<f64> {
    if tokens.is_empty() {
        return None;
    }
    let unique: HashSet<&str> = tokens.iter().map(String::as_str).collect();
    Some(unique.len() as f64 / tokens.len() as f64)
}

/// Unique contiguous n-grams over total n-grams; `None` when the document
/// has fewer than `n` tokens or `n == 0`.
pub fn distinct_n(tokens: &[String], n: usize) -> Option<f64> {
    if n == 0 || tokens.len() < n {
        return None;
    }
    let grams: Vec<&[String]> = tokens.windows(n).collect();
    let unique: HashSet<&[String]> = grams.iter().copied().collect();
    Some(unique.len() as f64 / grams.len() as f64)
}

/// Per-document quality metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentStats {
    pub tokens: usize,
    pub ttr: Option<f64>,
    pub distinct_2: Option<f64>,
    pub distinct_3: Option<f64>,
}

impl DocumentStats {
    pub fn of(doc: &Document) -> Self {
        DocumentStats {
            tokens: doc.tokens.len(),
            ttr: type_token_ratio(&doc.tokens),
            distinct_2: distinct_n(&doc.tokens, 2),
            distinct_3: distinct_n(&doc.tokens, 3),
        }
    }
}

/// Means over a group of documents. Metrics undefined for a document are
/// left out of that metric's mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityRow {
    pub group: String,
    pub documents: usize,
    pub mean_tokens: f64,
    pub ttr: Option<f64>,
    pub distinct_2: Option<f64>,
    pub distinct_3: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn summarize(group: &str, stats: &[&DocumentStats]) -> QualityRow {
    QualityRow {
        group: group.to_string(),
        documents: stats.len(),
        mean_tokens: stats.iter().map(|s| s.tokens as f64).sum::<f64>() / stats.len().max(1) as f64,
        ttr: mean(stats.iter().map(|s| s.ttr)),
        distinct_2: mean(stats.iter().map(|s| s.distinct_2)),
        distinct_3: mean(stats.iter().map(|s| s.distinct_3)),
    }
}

/// One row per label (natural label order, `unlabeled` last) followed by
/// an `overall` row.
pub fn corpus_quality_report(corpus: &[Document]) -> Result<Vec<QualityRow>> {
    if corpus.is_empty() {
        return Err(CfaError::validation("corpus is empty"));
    }
    let stats: Vec<DocumentStats> = corpus.iter().map(DocumentStats::of).collect();
    let mut groups: BTreeMap<&str, Vec<&DocumentStats>> = BTreeMap::new();
    for (doc, s) in corpus.iter().zip(&stats) {
        groups
            .entry(doc.label.as_deref().unwrap_or(UNLABELED))
            .or_default()
            .push(s);
    }
    let mut keys: Vec<&str> = groups.keys().copied().collect();
    keys.sort_by(|a, b| match (*a == UNLABELED, *b == UNLABELED) {
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => natural_cmp(a, b),
    });
    let mut rows: Vec<QualityRow> = keys.iter().map(|k| summarize(k, &groups[k])).collect();
    rows.push(summarize("overall", &stats.iter().collect::<Vec<_>>()));
    Ok(rows)
}

#[derive(Deserialize)]
struct JsonlDocument {
    doc_id: String,
    #[serde(default)]
    label: Option<String>,
    text: String,
}

/// Loads a corpus from either a JSON-lines file of `{doc_id, label, text}`
/// or a directory with one sub-directory per label holding `*.txt` files.
///
/// Directory documents get `doc_id = "<label>/<file stem>"`. Output is
/// sorted by doc_id.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let meta = fs::metadata(path).map_err(|e| CfaError::io(path, e))?;
    let mut docs = if meta.is_dir() {
        load_label_dirs(path)?
    } else {
        load_jsonl(path)?
    };
    docs.sort_by(|a, b| natural_cmp(&a.doc_id, &b.doc_id));
    if let Some(w) = docs.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(CfaError::validation(format!(
            "{}: duplicate doc_id '{}'",
            path.display(),
            w[0].doc_id
        )));
    }
    Ok(docs)
}

fn load_jsonl(path: &Path) -> Result<Vec<Document>> {
    let content = fs::read_to_string(path).map_err(|e| CfaError::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlDocument = serde_json::from_str(line).map_err(|e| {
            CfaError::validation(format!(
                "{}:{}: malformed corpus record: {e}",
                path.display(),
                i + 1
            ))
        })?;
        let label = rec.label.filter(|l| !l.trim().is_empty());
        docs.push(Document::new(rec.doc_id, label, rec.text));
    }
    Ok(docs)
}

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| CfaError::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| CfaError::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn load_label_dirs(root: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for label_dir in sorted_entries(root)? {
        let label_path = label_dir.path();
        if !label_path.is_dir() {
            continue;
        }
        let label = label_dir.file_name().to_string_lossy().into_owned();
        for file in sorted_entries(&label_path)? {
            let p = file.path();
            if p.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let bytes = fs::read(&p).map_err(|e| CfaError::io(&p, e))?;
            let text = String::from_utf8(bytes).map_err(|e| {
                CfaError::validation(format!("{}: not valid UTF-8: {e}", p.display()))
            })?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            docs.push(Document::new(
                format!("{label}/{stem}"),
                Some(label.clone()),
                text,
            ));
        }
    }
    Ok(docs)
}
