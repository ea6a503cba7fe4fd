//! Precision@1 against expert labels, grid comparison statistics and the
//! agreement/disagreement tables.
//!
//! Every rate is carried as an integer [`Fraction`]; "same or higher"
//! comparisons are exact cross-multiplications, never float thresholds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::combiner::FusedRanking;
use crate::error::{CfaError, Result};
use crate::labels::LabelSet;

/// How a tied top-1 is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieMode {
    /// Correct only if the label-order tie-break picked the expert label.
    #[default]
    Strict,
    /// Correct if the expert label is anywhere among the tied tops.
    Lenient,
}

impl fmt::Display for TieMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieMode::Strict => "strict",
            TieMode::Lenient => "lenient",
        })
    }
}

impl FromStr for TieMode {
    type Err = CfaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(TieMode::Strict),
            "lenient" => Ok(TieMode::Lenient),
            other => Err(CfaError::validation(format!(
                "unknown tie mode '{other}' (expected strict|lenient)"
            ))),
        }
    }
}

/// Non-negative rational with an explicit count; `0/0` means "undefined".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize)]
pub struct Fraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl Fraction {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Fraction {
            numerator,
            denominator,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.denominator > 0
    }

    pub fn value(&self) -> Option<f64> {
        self.is_defined()
            .then(|| self.numerator as f64 / self.denominator as f64)
    }

    /// Exact comparison of two defined fractions.
    pub fn cmp_value(&self, other: &Fraction) -> Option<Ordering> {
        if !self.is_defined() || !other.is_defined() {
            return None;
        }
        let lhs = self.numerator as u128 * other.denominator as u128;
        let rhs = other.numerator as u128 * self.denominator as u128;
        Some(lhs.cmp(&rhs))
    }

    /// Percentage string with two decimals, or `n/a`.
    pub fn percent(&self) -> String {
        match self.value() {
            Some(v) => format!("{:.2}%", v * 100.0),
            None => "n/a".to_string(),
        }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Fraction", 3)?;
        s.serialize_field("numerator", &self.numerator)?;
        s.serialize_field("denominator", &self.denominator)?;
        s.serialize_field("value", &self.value())?;
        s.end()
    }
}

/// Human-curated primary label per document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpertLabels {
    labels: BTreeMap<String, String>,
}

impl ExpertLabels {
    pub fn new(labels: BTreeMap<String, String>, label_set: &LabelSet) -> Result<Self> {
        if let Some((doc, label)) = labels.iter().find(|(_, l)| !label_set.contains(l)) {
            return Err(CfaError::validation(format!(
                "expert label '{label}' for document '{doc}' is not in the label set"
            )));
        }
        Ok(ExpertLabels { labels })
    }

    pub fn get(&self, doc_id: &str) -> Option<&str> {
        self.labels.get(doc_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels.iter().map(|(d, l)| (d.as_str(), l.as_str()))
    }

    /// Number of documents per label, in label-set order.
    pub fn group_sizes(&self, label_set: &LabelSet) -> Vec<(String, u64)> {
        label_set
            .iter()
            .map(|l| {
                let count = self.labels.values().filter(|v| *v == l).count() as u64;
                (l.to_string(), count)
            })
            .collect()
    }
}

/// A model's top-1 output for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub top1: String,
    /// All labels tied for first (length 1 when there is no tie).
    pub tied_top: Vec<String>,
}

impl Prediction {
    pub fn single(label: impl Into<String>) -> Self {
        let label = label.into();
        Prediction {
            tied_top: vec![label.clone()],
            top1: label,
        }
    }

    pub fn is_tie(&self) -> bool {
        self.tied_top.len() > 1
    }

    pub fn is_correct(&self, expert: &str, mode: TieMode) -> bool {
        match mode {
            TieMode::Strict => self.top1 == expert,
            TieMode::Lenient => self.top1 == expert || self.tied_top.iter().any(|l| l == expert),
        }
    }
}

impl From<&FusedRanking> for Prediction {
    fn from(f: &FusedRanking) -> Self {
        Prediction {
            top1: f.top1.clone(),
            tied_top: f.tied_top.clone(),
        }
    }
}

/// doc_id -> prediction.
pub type Predictions = BTreeMap<String, Prediction>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PrecisionAt1 {
    pub fraction: Fraction,
    /// Evaluated documents whose top-1 was tied.
    pub ties: u64,
}

impl PrecisionAt1 {
    pub fn value(&self) -> f64 {
        self.fraction.value().unwrap_or(0.0)
    }
}

fn check_coverage(predictions: &Predictions, experts: &ExpertLabels) -> Result<()> {
    let missing: Vec<&str> = experts
        .iter()
        .map(|(doc, _)| doc)
        .filter(|doc| !predictions.contains_key(*doc))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CfaError::validation(format!(
            "no prediction for document(s): {}",
            missing.join(", ")
        )))
    }
}

/// Share of expert-labelled documents whose top-1 matches the expert label.
pub fn precision_at_1(
    predictions: &Predictions,
    experts: &ExpertLabels,
    mode: TieMode,
) -> Result<PrecisionAt1> {
    check_coverage(predictions, experts)?;
    let mut correct = 0;
    let mut ties = 0;
    for (doc, expert) in experts.iter() {
        let pred = &predictions[doc];
        if pred.is_correct(expert, mode) {
            correct += 1;
        }
        if pred.is_tie() {
            ties += 1;
        }
    }
    Ok(PrecisionAt1 {
        fraction: Fraction::new(correct, experts.len() as u64),
        ties,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelPrecision {
    pub label: String,
    /// `0/0` for a label with no expert documents.
    pub precision: Fraction,
}

/// Precision@1 restricted to each label's expert group, in label-set order.
pub fn per_label_precision(
    predictions: &Predictions,
    experts: &ExpertLabels,
    label_set: &LabelSet,
    mode: TieMode,
) -> Result<Vec<LabelPrecision>> {
    check_coverage(predictions, experts)?;
    let mut counts = vec![(0u64, 0u64); label_set.len()];
    for (doc, expert) in experts.iter() {
        let idx = label_set.index_of(expert).ok_or_else(|| {
            CfaError::validation(format!("expert label '{expert}' is not in the label set"))
        })?;
        counts[idx].1 += 1;
        if predictions[doc].is_correct(expert, mode) {
            counts[idx].0 += 1;
        }
    }
    Ok(label_set
        .iter()
        .zip(counts)
        .map(|(label, (c, d))| LabelPrecision {
            label: label.to_string(),
            precision: Fraction::new(c, d),
        })
        .collect())
}

/// Overall and per-label precision of one (individual or combined) model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelEvaluation {
    pub model_id: String,
    pub overall: Fraction,
    pub ties: u64,
    pub per_label: Vec<LabelPrecision>,
}

pub fn evaluate_model(
    model_id: impl Into<String>,
    predictions: &Predictions,
    experts: &ExpertLabels,
    label_set: &LabelSet,
    mode: TieMode,
) -> Result<ModelEvaluation> {
    let overall = precision_at_1(predictions, experts, mode)?;
    Ok(ModelEvaluation {
        model_id: model_id.into(),
        overall: overall.fraction,
        ties: overall.ties,
        per_label: per_label_precision(predictions, experts, label_set, mode)?,
    })
}

/// How often combined models match or beat the individual systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridStats {
    /// (combined model, label) cells at or above the best individual
    /// system's precision for that label.
    pub per_label_vs_best: Fraction,
    /// (combined model, label) cells at or above the mean individual
    /// precision for that label.
    pub per_label_vs_mean: Fraction,
    /// Combined models whose overall precision is at or above the best
    /// individual system's overall precision.
    pub overall_vs_best: Fraction,
}

/// Compares every combined model with the individual systems.
///
/// Labels with no expert documents are undefined for every model; such
/// cells count as "same" so the denominators stay `models x labels`.
pub fn grid_statistics(
    combined: &[ModelEvaluation],
    individuals: &[ModelEvaluation],
) -> Result<GridStats> {
    let reference = individuals
        .first()
        .ok_or_else(|| CfaError::validation("no individual systems to compare against"))?;
    let n_labels = reference.per_label.len();
    let shape_ok = |m: &ModelEvaluation| {
        m.overall.denominator == reference.overall.denominator
            && m.per_label.len() == n_labels
            && m.per_label.iter().zip(&reference.per_label).all(|(a, b)| {
                a.label == b.label && a.precision.denominator == b.precision.denominator
            })
    };
    if let Some(bad) = combined.iter().chain(individuals).find(|m| !shape_ok(m)) {
        return Err(CfaError::validation(format!(
            "model {} was not evaluated on the same documents as {}",
            bad.model_id, reference.model_id
        )));
    }

    let t = individuals.len() as u64;
    let best_overall = individuals
        .iter()
        .map(|m| m.overall)
        .max_by(|a, b| a.cmp_value(b).unwrap_or(Ordering::Equal))
        .unwrap_or_default();
    let mut best_cells = 0;
    let mut mean_cells = 0;
    let mut overall_wins = 0;
    for model in combined {
        for (l, cell) in model.per_label.iter().enumerate() {
            let den = cell.precision.denominator;
            if den == 0 {
                best_cells += 1;
                mean_cells += 1;
                continue;
            }
            let best = individuals
                .iter()
                .map(|m| m.per_label[l].precision.numerator)
                .max()
                .unwrap_or(0);
            let sum: u64 = individuals
                .iter()
                .map(|m| m.per_label[l].precision.numerator)
                .sum();
            // equal denominators: compare numerators directly
            if cell.precision.numerator >= best {
                best_cells += 1;
            }
            if cell.precision.numerator as u128 * t as u128 >= sum as u128 {
                mean_cells += 1;
            }
        }
        let wins = match model.overall.cmp_value(&best_overall) {
            Some(ord) => ord != Ordering::Less,
            None => true,
        };
        if wins {
            overall_wins += 1;
        }
    }
    let m = combined.len() as u64;
    Ok(GridStats {
        per_label_vs_best: Fraction::new(best_cells, m * n_labels as u64),
        per_label_vs_mean: Fraction::new(mean_cells, m * n_labels as u64),
        overall_vs_best: Fraction::new(overall_wins, m),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisagreementRow {
    pub doc_id: String,
    pub expert: String,
    pub individual: String,
    pub combined: String,
}

/// Documents where the best individual and best combined models part ways
/// with each other or with the expert.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DisagreementTables {
    /// combined = expert != individual
    pub combined_agrees: Vec<DisagreementRow>,
    /// individual = expert != combined
    pub combined_disagrees_with_both: Vec<DisagreementRow>,
    /// combined = individual != expert
    pub both_disagree_with_expert: Vec<DisagreementRow>,
}

impl DisagreementTables {
    pub fn is_empty(&self) -> bool {
        self.combined_agrees.is_empty()
            && self.combined_disagrees_with_both.is_empty()
            && self.both_disagree_with_expert.is_empty()
    }
}

pub fn disagreement_tables(
    best_individual: &Predictions,
    best_combined: &Predictions,
    experts: &ExpertLabels,
) -> Result<DisagreementTables> {
    check_coverage(best_individual, experts)?;
    check_coverage(best_combined, experts)?;
    let mut tables = DisagreementTables::default();
    for (doc, expert) in experts.iter() {
        let ind = best_individual[doc].top1.as_str();
        let comb = best_combined[doc].top1.as_str();
        let row = || DisagreementRow {
            doc_id: doc.to_string(),
            expert: expert.to_string(),
            individual: ind.to_string(),
            combined: comb.to_string(),
        };
        if comb == expert && ind != expert {
            tables.combined_agrees.push(row());
        } else if ind == expert && comb != expert {
            tables.combined_disagrees_with_both.push(row());
        } else if comb == ind && comb != expert {
            tables.both_disagree_with_expert.push(row());
        }
    }
    Ok(tables)
}

/// Highest-precision model(s).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Best {
    /// First of `tied` in canonical (sorted id) order.
    pub representative: String,
    pub precision: Fraction,
    /// Every model sharing the maximum, sorted by id.
    pub tied: Vec<String>,
}

pub fn select_best(results: &[(String, Fraction)]) -> Result<Best> {
    let mut defined: Vec<&(String, Fraction)> =
        results.iter().filter(|(_, f)| f.is_defined()).collect();
    if defined.is_empty() {
        return Err(CfaError::validation("no model results to select from"));
    }
    defined.sort_by(|a, b| a.0.cmp(&b.0));
    let best = defined
        .iter()
        .map(|(_, f)| *f)
        .reduce(|acc, f| {
            if f.cmp_value(&acc) == Some(Ordering::Greater) {
                f
            } else {
                acc
            }
        })
        .unwrap_or_default();
    let tied: Vec<String> = defined
        .iter()
        .filter(|(_, f)| f.cmp_value(&best) == Some(Ordering::Equal))
        .map(|(id, _)| id.clone())
        .collect();
    Ok(Best {
        representative: tied[0].clone(),
        precision: best,
        tied,
    })
}

/// Everything computed by [`evaluate_grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub tie_mode: TieMode,
    pub documents: u64,
    /// Expert documents per label.
    pub label_counts: Vec<(String, u64)>,
    pub individuals: Vec<ModelEvaluation>,
    pub combined: Vec<ModelEvaluation>,
    pub grid: GridStats,
    pub best_individual: Best,
    pub best_combined: Option<Best>,
    pub disagreements: DisagreementTables,
    /// Total tied top-1 occurrences over all evaluated (model, document) pairs.
    pub total_ties: u64,
}

/// Evaluates every individual system and combined model and assembles the
/// comparison report. Maps are keyed by model id.
pub fn evaluate_grid(
    individuals: &BTreeMap<String, Predictions>,
    combined: &BTreeMap<String, Predictions>,
    experts: &ExpertLabels,
    label_set: &LabelSet,
    mode: TieMode,
) -> Result<EvaluationReport> {
    let eval_all = |models: &BTreeMap<String, Predictions>| {
        models
            .iter()
            .map(|(id, preds)| evaluate_model(id, preds, experts, label_set, mode))
            .collect::<Result<Vec<_>>>()
    };
    let ind_evals = eval_all(individuals)?;
    let comb_evals = eval_all(combined)?;
    let best_individual = select_best(
        &ind_evals
            .iter()
            .map(|m| (m.model_id.clone(), m.overall))
            .collect::<Vec<_>>(),
    )?;
    let best_combined = if comb_evals.is_empty() {
        None
    } else {
        Some(select_best(
            &comb_evals
                .iter()
                .map(|m| (m.model_id.clone(), m.overall))
                .collect::<Vec<_>>(),
        )?)
    };
    let grid = grid_statistics(&comb_evals, &ind_evals)?;
    let disagreements = match &best_combined {
        Some(best) => disagreement_tables(
            &individuals[&best_individual.representative],
            &combined[&best.representative],
            experts,
        )?,
        None => DisagreementTables::default(),
    };
    let total_ties = ind_evals.iter().chain(&comb_evals).map(|m| m.ties).sum();
    Ok(EvaluationReport {
        tie_mode: mode,
        documents: experts.len() as u64,
        label_counts: experts.group_sizes(label_set),
        individuals: ind_evals,
        combined: comb_evals,
        grid,
        best_individual,
        best_combined,
        disagreements,
        total_ties,
    })
}
