//! The pipeline behind each subcommand. Every command reads its inputs,
//! computes, and writes its outputs atomically under the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cfa_core::combiner::{grid_models, run_grid, Performance};
use cfa_core::corpus::{corpus_quality_report, load_corpus, Document};
use cfa_core::evaluator::{evaluate_grid, precision_at_1};
use cfa_core::generation::{generate_corpus, GenerationOutcome, TextGenerator};
use cfa_core::labels::natural_cmp;
use cfa_core::lexicon::keyword_scores;
use cfa_core::prompts::{generate_prompt_matrix, load_prompt_specs};
use cfa_core::{
    build_instance, CfaError, EvaluationReport, FusedRanking, FusionInstance, KeywordLexicon,
    LabelSet, Predictions, Result, TfidfCentroidScorer, WeightSource,
};

use crate::config::{check_label_chars, RunConfig, Weights};
use crate::formats::{
    file_stem_for, fixed6, fixed6_opt, fused_table, prompts_table, read_experts, read_fused,
    read_prompts, write_atomic, FusedRow, ScoreMatrix, Table,
};

pub const FUSED_FILE: &str = "fused.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Keyword,
    Tfidf,
}

impl ScorerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Keyword => "keyword",
            ScorerKind::Tfidf => "tfidf",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScorerKind {
    type Err = CfaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keyword" => Ok(ScorerKind::Keyword),
            "tfidf" => Ok(ScorerKind::Tfidf),
            other => Err(CfaError::validation(format!(
                "unknown scorer '{other}' (expected keyword|tfidf)"
            ))),
        }
    }
}

fn labels_from_docs(docs: &[Document]) -> Result<LabelSet> {
    let mut labels: Vec<&str> = docs
        .iter()
        .filter_map(|d| d.label.as_deref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    labels.sort_by(|a, b| natural_cmp(a, b));
    LabelSet::new(labels)
}

/// Runs a built-in scorer over `corpus` and writes `<out>/<scorer>.csv`.
pub fn score(
    scorer: ScorerKind,
    labels: Option<LabelSet>,
    corpus: &Path,
    lexicon: Option<&Path>,
    train: Option<&Path>,
    out: &Path,
) -> Result<PathBuf> {
    let docs = load_corpus(corpus)?;
    if docs.is_empty() {
        return Err(CfaError::validation(format!(
            "{}: corpus has no documents",
            corpus.display()
        )));
    }
    let (labels, scores): (LabelSet, Vec<Vec<f64>>) = match scorer {
        ScorerKind::Keyword => {
            let path =
                lexicon.ok_or_else(|| CfaError::validation("keyword scorer needs --lexicon"))?;
            let lex = KeywordLexicon::load(path)?;
            let labels = match labels {
                Some(l) => l,
                None => {
                    let mut l: Vec<&str> = lex.labels().collect();
                    l.sort_by(|a, b| natural_cmp(a, b));
                    LabelSet::new(l)?
                }
            };
            let scores = docs
                .iter()
                .map(|d| keyword_scores(&d.tokens, &lex, &labels))
                .collect::<Result<_>>()?;
            (labels, scores)
        }
        ScorerKind::Tfidf => {
            let path = train.ok_or_else(|| CfaError::validation("tfidf scorer needs --train"))?;
            let training = load_corpus(path)?;
            let labels = match labels {
                Some(l) => l,
                None => labels_from_docs(&training)?,
            };
            let model = TfidfCentroidScorer::train(&training, &labels)?;
            let scores = docs.iter().map(|d| model.score(&d.tokens)).collect();
            (labels, scores)
        }
    };
    check_label_chars(&labels)?;
    let matrix = ScoreMatrix {
        labels,
        docs: docs.iter().map(|d| d.doc_id.clone()).collect(),
        scores,
    };
    let path = out.join(format!("{}.csv", scorer.name()));
    matrix.write(&path)?;
    Ok(path)
}

/// Score files of every configured system, checked for a shared label set
/// and document set.
pub struct LoadedSystems {
    pub labels: LabelSet,
    pub systems: Vec<(String, ScoreMatrix)>,
}

impl LoadedSystems {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        cfg.validate_fusion()?;
        let mut labels = cfg.label_set()?;
        let mut systems = Vec::with_capacity(cfg.systems.len());
        for entry in &cfg.systems {
            let m = ScoreMatrix::read(&entry.path, labels.as_ref()).map_err(|e| match e {
                CfaError::Validation(msg) => {
                    CfaError::validation(format!("system '{}': {msg}", entry.id))
                }
                other => other,
            })?;
            if labels.is_none() {
                labels = Some(m.labels.clone());
            }
            systems.push((entry.id.clone(), m));
        }
        let labels = labels.unwrap_or_else(LabelSet::sdg);
        let (first_id, first) = &systems[0];
        for (id, m) in &systems[1..] {
            if m.labels != first.labels {
                let missing: Vec<&str> = first
                    .labels
                    .iter()
                    .filter(|l| !m.labels.contains(l))
                    .collect();
                return Err(CfaError::validation(format!(
                    "system '{id}' label set differs from '{first_id}' (missing: {})",
                    missing.join(", ")
                )));
            }
            if m.docs != first.docs {
                let a: BTreeSet<&String> = first.docs.iter().collect();
                let b: BTreeSet<&String> = m.docs.iter().collect();
                let only_first: Vec<&str> = a.difference(&b).map(|s| s.as_str()).take(5).collect();
                let only_other: Vec<&str> = b.difference(&a).map(|s| s.as_str()).take(5).collect();
                return Err(CfaError::validation(format!(
                    "system '{id}' scores different documents than '{first_id}' (only in '{first_id}': [{}]; only in '{id}': [{}])",
                    only_first.join(", "),
                    only_other.join(", ")
                )));
            }
        }
        Ok(LoadedSystems { labels, systems })
    }

    pub fn docs(&self) -> &[String] {
        &self.systems[0].1.docs
    }

    pub fn system_ids(&self) -> Vec<String> {
        self.systems.iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn instances(&self, cfg: &RunConfig) -> Result<Vec<FusionInstance>> {
        self.docs()
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                let raw = self
                    .systems
                    .iter()
                    .map(|(id, m)| (id.clone(), m.scores[d].clone()))
                    .collect();
                build_instance(doc.clone(), &self.labels, raw, cfg.tie_policy)
            })
            .collect()
    }

    /// Top-1 of each system taken alone (highest raw score, label order on ties).
    pub fn individual_predictions(&self) -> Result<BTreeMap<String, Predictions>> {
        self.systems
            .iter()
            .map(|(id, m)| {
                let preds = m
                    .docs
                    .iter()
                    .zip(&m.scores)
                    .map(|(doc, row)| {
                        let f = FusedRanking::from_values(
                            doc.clone(),
                            &self.labels,
                            row.clone(),
                            false,
                        )?;
                        Ok((doc.clone(), (&f).into()))
                    })
                    .collect::<Result<Predictions>>()?;
                Ok((id.clone(), preds))
            })
            .collect()
    }
}

fn require_docs_present(known: &[String], requested: &[String]) -> Result<()> {
    let missing: Vec<&str> = requested
        .iter()
        .filter(|d| !known.contains(d))
        .map(String::as_str)
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    Err(CfaError::validation(format!(
        "unknown document id(s): {}; known ids: {}",
        missing.join(", "),
        known.join(", ")
    )))
}

/// Writes per-document CD pairs and diversity strengths, corpus means, and
/// an RSC plot table for every document in `rsc_docs`.
pub fn diversity(cfg: &RunConfig, rsc_docs: &[String]) -> Result<Vec<PathBuf>> {
    let loaded = LoadedSystems::load(cfg)?;
    require_docs_present(loaded.docs(), rsc_docs)?;
    if loaded.labels.len() < 3 {
        return Err(CfaError::domain(format!(
            "cognitive diversity needs at least 3 labels, got {}",
            loaded.labels.len()
        )));
    }
    if loaded.systems.len() < 2 {
        return Err(CfaError::domain(
            "diversity needs at least 2 scoring systems",
        ));
    }
    let instances = loaded.instances(cfg)?;
    let ids = loaded.system_ids();
    let t = ids.len();

    let mut cd = Table::new(["doc_id", "system_a", "system_b", "cd"]);
    let mut ds = Table::new(["doc_id", "system", "ds", "degenerate"]);
    let mut cd_sum = vec![vec![0.0; t]; t];
    let mut ds_sum = vec![0.0; t];
    for inst in &instances {
        let profile = inst.diversity.as_ref().expect("two or more systems");
        for j in 0..t {
            for k in (j + 1)..t {
                cd.row([
                    inst.doc_id.as_str(),
                    &ids[j],
                    &ids[k],
                    &fixed6(profile.cd[j][k]),
                ]);
                cd_sum[j][k] += profile.cd[j][k];
            }
            let degenerate = if inst.systems[j].degenerate {
                "true"
            } else {
                "false"
            };
            ds.row([
                inst.doc_id.as_str(),
                &ids[j],
                &fixed6(profile.ds[j]),
                degenerate,
            ]);
            ds_sum[j] += profile.ds[j];
        }
    }
    let n_docs = instances.len() as f64;
    let mut cd_mean = Table::new(["system_a", "system_b", "mean_cd"]);
    for j in 0..t {
        for k in (j + 1)..t {
            cd_mean.row([ids[j].as_str(), &ids[k], &fixed6(cd_sum[j][k] / n_docs)]);
        }
    }
    let mut ds_mean = Table::new(["system", "mean_ds"]);
    for j in 0..t {
        ds_mean.row([ids[j].as_str(), &fixed6(ds_sum[j] / n_docs)]);
    }

    let out = &cfg.out;
    let mut written = Vec::new();
    for (name, table) in [
        ("diversity_cd.csv", cd),
        ("diversity_ds.csv", ds),
        ("diversity_mean_cd.csv", cd_mean),
        ("diversity_mean_ds.csv", ds_mean),
    ] {
        let p = out.join(name);
        table.write(&p)?;
        written.push(p);
    }
    for doc in rsc_docs {
        let inst = instances
            .iter()
            .find(|i| &i.doc_id == doc)
            .expect("checked above");
        let mut rsc = Table::new(["rank", "score", "system"]);
        for s in &inst.systems {
            for (i, v) in s.rsc.values().iter().enumerate() {
                rsc.row([(i + 1).to_string(), fixed6(*v), s.system_id.clone()]);
            }
        }
        let p = out.join(format!("rsc_{}.csv", file_stem_for(doc)));
        rsc.write(&p)?;
        written.push(p);
    }
    Ok(written)
}

fn performance(cfg: &RunConfig, loaded: &LoadedSystems) -> Result<Performance> {
    let path = cfg
        .experts
        .as_ref()
        .ok_or_else(|| CfaError::validation("performance weights need an expert-labels file"))?;
    let experts = read_experts(path, &loaded.labels)?;
    loaded
        .individual_predictions()?
        .into_iter()
        .map(|(id, preds)| Ok((id, precision_at_1(&preds, &experts, cfg.tie_mode)?.value())))
        .collect()
}

/// Runs every (subset, strategy) model on every document and writes
/// `<out>/fused.csv`, ordered by combo_id then document.
pub fn fuse(cfg: &RunConfig) -> Result<PathBuf> {
    let loaded = LoadedSystems::load(cfg)?;
    if loaded.systems.len() < 2 {
        return Err(CfaError::domain("fusion needs at least 2 scoring systems"));
    }
    let instances = loaded.instances(cfg)?;
    let models = grid_models(
        &loaded.system_ids(),
        cfg.min_subset,
        &cfg.strategies,
        cfg.weights.source(),
    )?;
    let perf = match cfg.weights {
        Weights::Perf
            if models
                .iter()
                .any(|m| m.weight_source == WeightSource::Performance) =>
        {
            Some(performance(cfg, &loaded)?)
        }
        _ => None,
    };
    let grid = run_grid(&instances, &models, perf.as_ref())?;
    let rows: Vec<FusedRow> = grid
        .rankings
        .iter()
        .flat_map(|(combo, fused)| fused.iter().map(move |f| FusedRow::from_ranking(combo, f)))
        .collect();
    let path = cfg.out.join(FUSED_FILE);
    fused_table(&rows).write(&path)?;
    Ok(path)
}

fn split_combo(combo_id: &str) -> (&str, &str) {
    combo_id.split_once(':').unwrap_or((combo_id, ""))
}

/// Scores individual systems and every fused model against the expert
/// labels; writes the JSON report plus delimited tables.
pub fn evaluate(cfg: &RunConfig, fused_path: &Path) -> Result<(EvaluationReport, Vec<PathBuf>)> {
    let loaded = LoadedSystems::load(cfg)?;
    let experts_path = cfg
        .experts
        .as_ref()
        .ok_or_else(|| CfaError::validation("no expert-labels file configured"))?;
    let experts = read_experts(experts_path, &loaded.labels)?;
    if experts.is_empty() {
        return Err(CfaError::validation(format!(
            "{}: no expert labels",
            experts_path.display()
        )));
    }
    let individuals = loaded.individual_predictions()?;
    let combined = read_fused(fused_path, &loaded.labels)?;
    let report = evaluate_grid(
        &individuals,
        &combined,
        &experts,
        &loaded.labels,
        cfg.tie_mode,
    )?;

    let mut by_model = Table::new([
        "model_id",
        "kind",
        "strategy",
        "subset_size",
        "correct",
        "total",
        "precision",
        "ties",
    ]);
    let mut by_label = Table::new(["model_id", "label", "correct", "total", "precision"]);
    let mut plot = Table::new(["strategy", "subset", "subset_size", "precision"]);
    for (kind, models) in [
        ("individual", &report.individuals),
        ("combined", &report.combined),
    ] {
        for m in models {
            let (subset, strategy) = if kind == "individual" {
                (m.model_id.as_str(), "individual")
            } else {
                split_combo(&m.model_id)
            };
            let size = subset.split('+').count().to_string();
            by_model.row([
                m.model_id.as_str(),
                kind,
                strategy,
                &size,
                &m.overall.numerator.to_string(),
                &m.overall.denominator.to_string(),
                &fixed6_opt(m.overall.value()),
                &m.ties.to_string(),
            ]);
            plot.row([strategy, subset, &size, &fixed6_opt(m.overall.value())]);
            for l in &m.per_label {
                by_label.row([
                    m.model_id.as_str(),
                    &l.label,
                    &l.precision.numerator.to_string(),
                    &l.precision.denominator.to_string(),
                    &fixed6_opt(l.precision.value()),
                ]);
            }
        }
    }
    let mut grid = Table::new(["statistic", "numerator", "denominator", "percent"]);
    for (name, f) in [
        (
            "per_label_vs_best_individual",
            report.grid.per_label_vs_best,
        ),
        (
            "per_label_vs_mean_individual",
            report.grid.per_label_vs_mean,
        ),
        ("overall_vs_best_individual", report.grid.overall_vs_best),
    ] {
        grid.row([
            name,
            &f.numerator.to_string(),
            &f.denominator.to_string(),
            &f.percent(),
        ]);
    }
    let mut dis = Table::new([
        "category",
        "doc_id",
        "expert",
        "best_individual",
        "best_combined",
    ]);
    for (cat, rows) in [
        ("A", &report.disagreements.combined_agrees),
        ("B", &report.disagreements.combined_disagrees_with_both),
        ("C", &report.disagreements.both_disagree_with_expert),
    ] {
        for r in rows {
            dis.row([cat, &r.doc_id, &r.expert, &r.individual, &r.combined]);
        }
    }
    let mut json = serde_json::to_vec_pretty(&report)
        .map_err(|e| CfaError::validation(format!("serializing report: {e}")))?;
    json.push(b'\n');

    let out = &cfg.out;
    let mut written = Vec::new();
    let p = out.join(REPORT_FILE);
    write_atomic(&p, &json)?;
    written.push(p);
    for (name, table) in [
        ("precision_by_model.csv", by_model),
        ("precision_by_label.csv", by_label),
        ("grid_stats.csv", grid),
        ("disagreements.csv", dis),
        ("plot_precision.csv", plot),
    ] {
        let p = out.join(name);
        table.write(&p)?;
        written.push(p);
    }
    Ok((report, written))
}

/// Writes the per-label corpus quality table.
pub fn corpus_stats(corpus: &Path, out: &Path) -> Result<PathBuf> {
    let docs = load_corpus(corpus)?;
    if docs.is_empty() {
        return Err(CfaError::validation(format!(
            "{}: corpus has no documents",
            corpus.display()
        )));
    }
    let rows = corpus_quality_report(&docs)?;
    let mut t = Table::new([
        "group",
        "documents",
        "mean_tokens",
        "ttr",
        "distinct_2",
        "distinct_3",
    ]);
    for r in rows {
        t.row([
            r.group,
            r.documents.to_string(),
            fixed6(r.mean_tokens),
            fixed6_opt(r.ttr),
            fixed6_opt(r.distinct_2),
            fixed6_opt(r.distinct_3),
        ]);
    }
    let p = out.join("corpus_stats.csv");
    t.write(&p)?;
    Ok(p)
}

/// Writes `<out>/prompts.csv`; returns the path and prompt count.
pub fn gen_prompts(specs: &Path, labels: &LabelSet, out: &Path) -> Result<(PathBuf, usize)> {
    let specs = load_prompt_specs(specs)?;
    let prompts = generate_prompt_matrix(&specs, labels)?;
    let p = out.join("prompts.csv");
    prompts_table(&prompts).write(&p)?;
    Ok((p, prompts.len()))
}

fn read_existing_corpus(path: &Path) -> Result<Vec<Document>> {
    if path.exists() {
        load_corpus(path)
    } else {
        Ok(Vec::new())
    }
}

/// Fetches text for every prompt not already present in `<out>/corpus.jsonl`,
/// merges the new documents in, and records failures in
/// `<out>/generation_errors.csv`.
pub fn generate(
    prompts_path: &Path,
    generator: &dyn TextGenerator,
    out: &Path,
    concurrency: usize,
) -> Result<GenerationOutcome> {
    let prompts = read_prompts(prompts_path)?;
    let corpus_path = out.join(CORPUS_FILE);
    let mut docs = read_existing_corpus(&corpus_path)?;
    let fetched: BTreeSet<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let outcome = generate_corpus(&prompts, generator, &fetched, concurrency);

    docs.extend(outcome.documents.iter().cloned());
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let mut buf = Vec::new();
    for d in &docs {
        serde_json::to_writer(&mut buf, d)
            .map_err(|e| CfaError::validation(format!("serializing corpus: {e}")))?;
        buf.push(b'\n');
    }
    write_atomic(&corpus_path, &buf)?;

    let mut errors = Table::new(["prompt_id", "message"]);
    for e in &outcome.errors {
        errors.row([&e.prompt_id, &e.message]);
    }
    errors.write(&out.join("generation_errors.csv"))?;
    Ok(outcome)
}
