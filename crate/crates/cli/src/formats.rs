//! Delimited file formats and atomic output.
//!
//! Score files are long-format `doc_id,label,score`. Scores are written with
//! Rust's shortest round-trip float formatting, so a written file parses
//! back to the identical matrix. Report tables use six decimals.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cfa_core::labels::natural_cmp;
use cfa_core::{CfaError, ExpertLabels, FusedRanking, LabelSet, Prediction, Predictions, Result};
use serde::{Deserialize, Serialize};

pub const SCORE_HEADER: [&str; 3] = ["doc_id", "label", "score"];
pub const EXPERT_HEADER: [&str; 2] = ["doc_id", "label"];
pub const FUSED_HEADER: [&str; 7] = [
    "combo_id",
    "doc_id",
    "top1",
    "tie_at_top",
    "tied_top",
    "fallback",
    "ranking",
];

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CfaError::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CfaError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CfaError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CfaError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| CfaError::io(path, e))
}

/// Builds a CSV document in memory.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn write(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.into_bytes())
    }
}

/// Six-decimal rendering used in every report table.
pub fn fixed6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fixed6_opt(v: Option<f64>) -> String {
    v.map(fixed6).unwrap_or_else(|| "n/a".to_string())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(path: &Path, e: csv::Error) -> CfaError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CfaError::io(path, io),
        other => CfaError::validation(format!(
            "{}:{line}: malformed row: {other:?}",
            path.display()
        )),
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| CfaError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(CfaError::validation(format!(
            "{}:1: expected header '{}', found '{}'",
            path.display(),
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(reader)
}

/// One scoring system's scores: documents (natural doc_id order) by labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub labels: LabelSet,
    pub docs: Vec<String>,
    /// `scores[d][l]` for `docs[d]`, `labels[l]`.
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.docs.iter().position(|d| d == doc_id)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut t = Table::new(SCORE_HEADER);
        for (doc, row) in self.docs.iter().zip(&self.scores) {
            for (label, score) in self.labels.iter().zip(row) {
                t.row([doc.as_str(), label, &score.to_string()]);
            }
        }
        t.write(path)
    }

    /// Parses a score file. With `labels` given, every row's label must
    /// belong to it; otherwise the label set is taken from the file in
    /// first-appearance order.
    pub fn read(path: &Path, labels: Option<&LabelSet>) -> Result<Self> {
        let mut reader = open_csv(path, &SCORE_HEADER)?;
        let mut label_order: Vec<String> = Vec::new();
        let mut rows: Vec<(String, String, f64, u64)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = line_of(&rec);
            let (doc, label, score) = (&rec[0], &rec[1], &rec[2]);
            if doc.is_empty() || label.is_empty() {
                return Err(CfaError::validation(format!(
                    "{}:{line}: empty doc_id or label",
                    path.display()
                )));
            }
            let score: f64 = score.parse().map_err(|_| {
                CfaError::validation(format!(
                    "{}:{line}: score '{score}' is not a number",
                    path.display()
                ))
            })?;
            if !score.is_finite() {
                return Err(CfaError::validation(format!(
                    "{}:{line}: score is not finite",
                    path.display()
                )));
            }
            match labels {
                Some(set) if !set.contains(label) => {
                    return Err(CfaError::validation(format!(
                        "{}:{line}: label '{label}' is not in the configured label set",
                        path.display()
                    )))
                }
                None if !label_order.iter().any(|l| l == label) => {
                    label_order.push(label.to_string())
                }
                _ => {}
            }
            rows.push((doc.to_string(), label.to_string(), score, line));
        }
        let labels = match labels {
            Some(set) => set.clone(),
            None => LabelSet::new(label_order)
                .map_err(|e| CfaError::validation(format!("{}: {e}", path.display())))?,
        };
        crate::config::check_label_chars(&labels)?;

        let mut by_doc: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        let label_index: HashMap<&str, usize> =
            labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
        for (doc, label, score, line) in rows {
            let slot = &mut by_doc
                .entry(doc.clone())
                .or_insert_with(|| vec![None; labels.len()])[label_index[label.as_str()]];
            if slot.is_some() {
                return Err(CfaError::validation(format!(
                    "{}:{line}: duplicate score for document '{doc}', label '{label}'",
                    path.display()
                )));
            }
            *slot = Some(score);
        }
        if by_doc.is_empty() {
            return Err(CfaError::validation(format!(
                "{}: no score rows",
                path.display()
            )));
        }
        let mut docs: Vec<String> = by_doc.keys().cloned().collect();
        docs.sort_by(|a, b| natural_cmp(a, b));
        let mut scores = Vec::with_capacity(docs.len());
        for doc in &docs {
            let row = &by_doc[doc];
            if let Some(i) = row.iter().position(Option::is_none) {
                return Err(CfaError::validation(format!(
                    "{}: document '{doc}' has no score for label '{}'",
                    path.display(),
                    labels.get(i).unwrap_or_default()
                )));
            }
            scores.push(row.iter().map(|v| v.unwrap_or_default()).collect());
        }
        Ok(ScoreMatrix {
            labels,
            docs,
            scores,
        })
    }
}

pub fn read_experts(path: &Path, labels: &LabelSet) -> Result<ExpertLabels> {
    let mut reader = open_csv(path, &EXPERT_HEADER)?;
    let mut map = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        let (doc, label) = (rec[0].to_string(), rec[1].to_string());
        if !labels.contains(&label) {
            return Err(CfaError::validation(format!(
                "{}:{line}: expert label '{label}' is not in the label set",
                path.display()
            )));
        }
        if map.insert(doc.clone(), label).is_some() {
            return Err(CfaError::validation(format!(
                "{}:{line}: document '{doc}' labelled twice",
                path.display()
            )));
        }
    }
    ExpertLabels::new(map, labels)
}

pub fn write_experts(path: &Path, experts: &ExpertLabels) -> Result<()> {
    let mut t = Table::new(EXPERT_HEADER);
    let mut rows: Vec<(&str, &str)> = experts.iter().collect();
    rows.sort_by(|a, b| natural_cmp(a.0, b.0));
    for (doc, label) in rows {
        t.row([doc, label]);
    }
    t.write(path)
}

/// One row of the fused-predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedRow {
    pub combo_id: String,
    pub doc_id: String,
    pub top1: String,
    pub tie_at_top: bool,
    pub tied_top: Vec<String>,
    pub fallback: bool,
    pub ranking: Vec<String>,
}

impl FusedRow {
    pub fn from_ranking(combo_id: &str, f: &FusedRanking) -> Self {
        FusedRow {
            combo_id: combo_id.to_string(),
            doc_id: f.doc_id.clone(),
            top1: f.top1.clone(),
            tie_at_top: f.tie_at_top,
            tied_top: f.tied_top.clone(),
            fallback: f.fallback,
            ranking: f.ranking.clone(),
        }
    }
}

pub fn fused_table(rows: &[FusedRow]) -> Table {
    let mut t = Table::new(FUSED_HEADER);
    for r in rows {
        t.row([
            r.combo_id.as_str(),
            &r.doc_id,
            &r.top1,
            if r.tie_at_top { "true" } else { "false" },
            &r.tied_top.join(";"),
            if r.fallback { "true" } else { "false" },
            &r.ranking.join(";"),
        ]);
    }
    t
}

fn parse_bool(path: &Path, line: u64, s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CfaError::validation(format!(
            "{}:{line}: expected true/false, got '{s}'",
            path.display()
        ))),
    }
}

/// Reads a fused-predictions file into combo_id -> (doc_id -> prediction).
pub fn read_fused(path: &Path, labels: &LabelSet) -> Result<BTreeMap<String, Predictions>> {
    let mut reader = open_csv(path, &FUSED_HEADER)?;
    let mut out: BTreeMap<String, Predictions> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        let tied: Vec<String> = rec[4]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let top1 = rec[2].to_string();
        let tie = parse_bool(path, line, &rec[3])?;
        parse_bool(path, line, &rec[5])?;
        if !labels.contains(&top1) || tied.iter().any(|l| !labels.contains(l)) {
            return Err(CfaError::validation(format!(
                "{}:{line}: predicted label outside the label set",
                path.display()
            )));
        }
        if tied.first() != Some(&top1) || tie != (tied.len() > 1) {
            return Err(CfaError::validation(format!(
                "{}:{line}: top1/tie_at_top/tied_top are inconsistent",
                path.display()
            )));
        }
        let preds = out.entry(rec[0].to_string()).or_default();
        if preds
            .insert(
                rec[1].to_string(),
                Prediction {
                    top1,
                    tied_top: tied,
                },
            )
            .is_some()
        {
            return Err(CfaError::validation(format!(
                "{}:{line}: duplicate row for combo '{}', document '{}'",
                path.display(),
                &rec[0],
                &rec[1]
            )));
        }
    }
    Ok(out)
}

pub fn read_prompts(path: &Path) -> Result<Vec<cfa_core::Prompt>> {
    let file = fs::File::open(path).map_err(|e| CfaError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn prompts_table(prompts: &[cfa_core::Prompt]) -> Table {
    let mut t = Table::new(["prompt_id", "label", "publication_type", "source", "prompt"]);
    for p in prompts {
        t.row([
            &p.prompt_id,
            &p.label,
            &p.publication_type,
            &p.source,
            &p.prompt,
        ]);
    }
    t
}

/// File-name-safe form of a document id.
pub fn file_stem_for(doc_id: &str) -> String {
    doc_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> LabelSet {
        LabelSet::new(["SDG1", "SDG2", "SDG3"]).unwrap()
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let m = ScoreMatrix {
            labels: labels(),
            docs: vec!["d2".into(), "d10".into()],
            scores: vec![vec![0.1, 1.0 / 3.0, 2e-9], vec![-4.5, 0.0, 123456.789]],
        };
        m.write(&path).unwrap();
        let back = ScoreMatrix::read(&path, Some(&labels())).unwrap();
        assert_eq!(back, m);
        let inferred = ScoreMatrix::read(&path, None).unwrap();
        assert_eq!(inferred.labels, labels());
    }

    #[test]
    fn score_file_errors_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        fs::write(&path, "doc_id,label,score\nd1,SDG1,0.5\nd1,SDG2,abc\n").unwrap();
        let msg = ScoreMatrix::read(&path, Some(&labels()))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("s.csv:3"), "{msg}");

        fs::write(&path, "doc_id,label,score\nd1,SDG1,0.5\nd1,SDG1,0.6\n").unwrap();
        assert!(ScoreMatrix::read(&path, Some(&labels()))
            .unwrap_err()
            .to_string()
            .contains("duplicate"));

        fs::write(&path, "doc_id,label,score\nd1,SDG1,0.5\nd1,SDG2,0.6\n").unwrap();
        let msg = ScoreMatrix::read(&path, Some(&labels()))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("'SDG3'"), "{msg}");

        fs::write(&path, "doc,label,score\n").unwrap();
        assert!(ScoreMatrix::read(&path, None)
            .unwrap_err()
            .to_string()
            .contains("header"));

        fs::write(&path, "doc_id,label,score\nd1,SDG9,0.5\n").unwrap();
        assert!(ScoreMatrix::read(&path, Some(&labels())).is_err());

        fs::write(&path, "doc_id,label,score\nd1,SDG1,NaN\n").unwrap();
        assert!(ScoreMatrix::read(&path, None).is_err());
    }

    #[test]
    fn fused_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let rows = vec![FusedRow {
            combo_id: "A+B:asc".into(),
            doc_id: "d1".into(),
            top1: "SDG2".into(),
            tie_at_top: true,
            tied_top: vec!["SDG2".into(), "SDG3".into()],
            fallback: false,
            ranking: vec!["SDG2".into(), "SDG3".into(), "SDG1".into()],
        }];
        fused_table(&rows).write(&path).unwrap();
        let back = read_fused(&path, &labels()).unwrap();
        assert_eq!(back["A+B:asc"]["d1"].tied_top, ["SDG2", "SDG3"]);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.txt");
        write_atomic(&path, b"hello").unwrap();
        write_atomic(&path, b"again").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "again");
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }

    #[test]
    fn stems() {
        assert_eq!(
            file_stem_for("SDG1/Indicator 1-5-2"),
            "SDG1_Indicator_1-5-2"
        );
    }
}
