//! Subset enumeration and the four combination strategies.
//!
//! Score combinations (ASC, WSC) average normalized scores, so higher is
//! better. Rank combinations (ARC, WRC) average ranks, so lower is better.
//! Weighted variants take per-system weights, by default the diversity
//! strengths recomputed inside the subset being combined.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CfaError, Result};
use crate::fusion::FusionInstance;
use crate::labels::LabelSet;

/// Total weight (WSC) or individual weight (WRC) at or below this value
/// triggers the unweighted fallback.
pub const WEIGHT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Asc,
    Arc,
    Wsc,
    Wrc,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Asc, Strategy::Arc, Strategy::Wsc, Strategy::Wrc];

    pub fn is_weighted(self) -> bool {
        matches!(self, Strategy::Wsc | Strategy::Wrc)
    }

    pub fn is_rank_based(self) -> bool {
        matches!(self, Strategy::Arc | Strategy::Wrc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Asc => "asc",
            Strategy::Arc => "arc",
            Strategy::Wsc => "wsc",
            Strategy::Wrc => "wrc",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = CfaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asc" => Ok(Strategy::Asc),
            "arc" => Ok(Strategy::Arc),
            "wsc" => Ok(Strategy::Wsc),
            "wrc" => Ok(Strategy::Wrc),
            other => Err(CfaError::validation(format!(
                "unknown strategy '{other}' (expected asc|arc|wsc|wrc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    DiversityStrength,
    Performance,
    None,
}

impl WeightSource {
    fn tag(self) -> &'static str {
        match self {
            WeightSource::DiversityStrength => "ds",
            WeightSource::Performance => "perf",
            WeightSource::None => "",
        }
    }
}

/// A subset of systems together with the rule used to combine them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedModel {
    pub systems: Vec<String>,
    pub strategy: Strategy,
    pub weight_source: WeightSource,
    pub combo_id: String,
}

impl CombinedModel {
    pub fn new(
        systems: Vec<String>,
        strategy: Strategy,
        weight_source: WeightSource,
    ) -> Result<Self> {
        if systems.len() < 2 {
            return Err(CfaError::validation(format!(
                "a combined model needs at least 2 systems, got {}",
                systems.len()
            )));
        }
        let unique: HashSet<&str> = systems.iter().map(String::as_str).collect();
        if unique.len() != systems.len() {
            return Err(CfaError::validation("combined model lists a system twice"));
        }
        if strategy.is_weighted() == (weight_source == WeightSource::None) {
            return Err(CfaError::validation(format!(
                "strategy {strategy} is incompatible with weight source {weight_source:?}"
            )));
        }
        let mut sorted: Vec<&str> = systems.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        let mut combo_id = format!("{}:{}", sorted.join("+"), strategy);
        if strategy.is_weighted() {
            combo_id.push('-');
            combo_id.push_str(weight_source.tag());
        }
        Ok(CombinedModel {
            systems,
            strategy,
            weight_source,
            combo_id,
        })
    }
}

/// Fused label ordering for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRanking {
    pub doc_id: String,
    /// Combined score (higher better) or combined rank (lower better),
    /// one per label in label-set order.
    pub combined_values: Vec<f64>,
    /// Labels best-first; exact ties keep label-set order.
    pub ranking: Vec<String>,
    pub top1: String,
    pub tie_at_top: bool,
    /// Every label sharing the best combined value, in label-set order.
    pub tied_top: Vec<String>,
    /// A weighted strategy fell back to its unweighted form.
    pub fallback: bool,
}

impl FusedRanking {
    pub fn from_values(
        doc_id: impl Into<String>,
        labels: &LabelSet,
        values: Vec<f64>,
        lower_is_better: bool,
    ) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(CfaError::validation(format!(
                "{} combined values for {} labels",
                values.len(),
                labels.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CfaError::validation(format!(
                "combined value for label '{}' is not finite",
                labels.get(i).unwrap_or_default()
            )));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        if lower_is_better {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        } else {
            order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        }
        let best = values[order[0]];
        let tied_top: Vec<String> = order
            .iter()
            .take_while(|&&i| values[i] == best)
            .map(|&i| labels.labels()[i].clone())
            .collect();
        let ranking: Vec<String> = order.iter().map(|&i| labels.labels()[i].clone()).collect();
        Ok(FusedRanking {
            doc_id: doc_id.into(),
            top1: ranking[0].clone(),
            tie_at_top: tied_top.len() > 1,
            tied_top,
            ranking,
            combined_values: values,
            fallback: false,
        })
    }
}

/// All index subsets of `0..t` with sizes `min_size..=t`, ordered by size and
/// then lexicographically.
pub fn enumerate_combinations(t: usize, min_size: usize) -> Result<Vec<Vec<usize>>> {
    if t < 2 {
        return Err(CfaError::domain(format!(
            "combination needs at least 2 systems, got {t}"
        )));
    }
    if min_size < 2 || min_size > t {
        return Err(CfaError::validation(format!(
            "minimum subset size must be in 2..={t}, got {min_size}"
        )));
    }
    let mut out = Vec::new();
    for size in min_size..=t {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.clone());
            // advance to the next k-combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == t - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

fn check_rows(rows: &[&[f64]]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| CfaError::validation("no systems to combine"))?;
    let n = first.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CfaError::validation(
            "systems score different numbers of labels",
        ));
    }
    Ok(n)
}

fn mean_rows(rows: &[&[f64]]) -> Result<Vec<f64>> {
    let n = check_rows(rows)?;
    let t = rows.len() as f64;
    Ok((0..n)
        .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / t)
        .collect())
}

/// Per-label arithmetic mean of normalized scores.
pub fn average_scores(scores: &[&[f64]]) -> Result<Vec<f64>> {
    mean_rows(scores)
}

/// Per-label arithmetic mean of ranks.
pub fn average_ranks(ranks: &[&[f64]]) -> Result<Vec<f64>> {
    mean_rows(ranks)
}

fn check_weights(weights: &[f64], t: usize) -> Result<()> {
    if weights.len() != t {
        return Err(CfaError::validation(format!(
            "{} weights for {t} systems",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(CfaError::validation(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }
    Ok(())
}

/// `sum_j w_j s_j(l) / sum_j w_j`, or `None` when the total weight is
/// not above [`WEIGHT_EPSILON`].
pub fn weighted_scores(scores: &[&[f64]], weights: &[f64]) -> Result<Option<Vec<f64>>> {
    let n = check_rows(scores)?;
    check_weights(weights, scores.len())?;
    let total: f64 = weights.iter().sum();
    if total <= WEIGHT_EPSILON {
        return Ok(None);
    }
    Ok(Some(
        (0..n)
            .map(|i| {
                scores
                    .iter()
                    .zip(weights)
                    .map(|(s, w)| w * s[i])
                    .sum::<f64>()
                    / total
            })
            .collect(),
    ))
}

/// `sum_j (1/w_j) r_j(l) / sum_j (1/w_j)`, or `None` when any weight is not
/// above [`WEIGHT_EPSILON`].
pub fn weighted_ranks(ranks: &[&[f64]], weights: &[f64]) -> Result<Option<Vec<f64>>> {
    let n = check_rows(ranks)?;
    check_weights(weights, ranks.len())?;
    if weights.iter().any(|&w| w <= WEIGHT_EPSILON) {
        return Ok(None);
    }
    let inverse: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    let total: f64 = inverse.iter().sum();
    Ok(Some(
        (0..n)
            .map(|i| {
                ranks
                    .iter()
                    .zip(&inverse)
                    .map(|(r, iw)| iw * r[i])
                    .sum::<f64>()
                    / total
            })
            .collect(),
    ))
}

fn subset_indices(instance: &FusionInstance, subset: &[&str]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(CfaError::validation("empty system subset"));
    }
    subset
        .iter()
        .map(|id| {
            instance.system_index(id).ok_or_else(|| {
                CfaError::validation(format!(
                    "document '{}': unknown system id '{id}'",
                    instance.doc_id
                ))
            })
        })
        .collect()
}

fn score_rows<'a>(instance: &'a FusionInstance, idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter()
        .map(|&i| instance.systems[i].normalized.as_slice())
        .collect()
}

fn rank_rows<'a>(instance: &'a FusionInstance, idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter()
        .map(|&i| instance.systems[i].ranks.as_slice())
        .collect()
}

/// Diversity strengths of `idx` recomputed within that subset.
fn subset_strengths(instance: &FusionInstance, idx: &[usize]) -> Result<Vec<f64>> {
    let profile = instance.diversity.as_ref().ok_or_else(|| {
        CfaError::domain(format!(
            "document '{}': no diversity profile (fewer than 2 systems)",
            instance.doc_id
        ))
    })?;
    Ok(profile.restrict(idx)?.ds)
}

pub fn average_score_combination(
    instance: &FusionInstance,
    subset: &[&str],
) -> Result<FusedRanking> {
    let idx = subset_indices(instance, subset)?;
    let values = average_scores(&score_rows(instance, &idx))?;
    FusedRanking::from_values(&instance.doc_id, &instance.label_set, values, false)
}

pub fn average_rank_combination(
    instance: &FusionInstance,
    subset: &[&str],
) -> Result<FusedRanking> {
    let idx = subset_indices(instance, subset)?;
    let values = average_ranks(&rank_rows(instance, &idx))?;
    FusedRanking::from_values(&instance.doc_id, &instance.label_set, values, true)
}

/// Weighted score combination. `weights` defaults to subset-local
/// diversity strengths. Falls back to ASC (flagged) when the weights sum
/// to zero.
pub fn weighted_score_combination(
    instance: &FusionInstance,
    subset: &[&str],
    weights: Option<&[f64]>,
) -> Result<FusedRanking> {
    let idx = subset_indices(instance, subset)?;
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => subset_strengths(instance, &idx)?,
    };
    let rows = score_rows(instance, &idx);
    match weighted_scores(&rows, &weights)? {
        Some(values) => {
            FusedRanking::from_values(&instance.doc_id, &instance.label_set, values, false)
        }
        None => {
            let mut fused = FusedRanking::from_values(
                &instance.doc_id,
                &instance.label_set,
                average_scores(&rows)?,
                false,
            )?;
            fused.fallback = true;
            Ok(fused)
        }
    }
}

/// Weighted rank combination with inverse weights `1/w_j`. `weights`
/// defaults to subset-local diversity strengths. Falls back to ARC
/// (flagged) when any weight is zero.
pub fn weighted_rank_combination(
    instance: &FusionInstance,
    subset: &[&str],
    weights: Option<&[f64]>,
) -> Result<FusedRanking> {
    let idx = subset_indices(instance, subset)?;
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => subset_strengths(instance, &idx)?,
    };
    let rows = rank_rows(instance, &idx);
    match weighted_ranks(&rows, &weights)? {
        Some(values) => {
            FusedRanking::from_values(&instance.doc_id, &instance.label_set, values, true)
        }
        None => {
            let mut fused = FusedRanking::from_values(
                &instance.doc_id,
                &instance.label_set,
                average_ranks(&rows)?,
                true,
            )?;
            fused.fallback = true;
            Ok(fused)
        }
    }
}

/// Per-system performance, used when a model's weight source is
/// [`WeightSource::Performance`].
pub type Performance = BTreeMap<String, f64>;

/// Applies `model` to one document.
pub fn combine(
    instance: &FusionInstance,
    model: &CombinedModel,
    performance: Option<&Performance>,
) -> Result<FusedRanking> {
    let subset: Vec<&str> = model.systems.iter().map(String::as_str).collect();
    let perf_weights = || -> Result<Vec<f64>> {
        let perf = performance.ok_or_else(|| {
            CfaError::validation(format!(
                "model {} is performance-weighted but no performance values were given",
                model.combo_id
            ))
        })?;
        subset
            .iter()
            .map(|id| {
                perf.get(*id).copied().ok_or_else(|| {
                    CfaError::validation(format!("no performance value for system '{id}'"))
                })
            })
            .collect()
    };
    match (model.strategy, model.weight_source) {
        (Strategy::Asc, _) => average_score_combination(instance, &subset),
        (Strategy::Arc, _) => average_rank_combination(instance, &subset),
        (Strategy::Wsc, WeightSource::Performance) => {
            weighted_score_combination(instance, &subset, Some(&perf_weights()?))
        }
        (Strategy::Wrc, WeightSource::Performance) => {
            weighted_rank_combination(instance, &subset, Some(&perf_weights()?))
        }
        (Strategy::Wsc, _) => weighted_score_combination(instance, &subset, None),
        (Strategy::Wrc, _) => weighted_rank_combination(instance, &subset, None),
    }
}

/// Every (subset, strategy) model over `system_ids`. Weighted strategies use
/// `weights`; unweighted ones ignore it.
pub fn grid_models(
    system_ids: &[String],
    min_size: usize,
    strategies: &[Strategy],
    weights: WeightSource,
) -> Result<Vec<CombinedModel>> {
    if strategies.is_empty() {
        return Err(CfaError::validation("no combination strategies selected"));
    }
    if weights == WeightSource::None && strategies.iter().any(|s| s.is_weighted()) {
        return Err(CfaError::validation(
            "weighted strategies need a weight source",
        ));
    }
    let mut models = Vec::new();
    for subset in enumerate_combinations(system_ids.len(), min_size)? {
        let ids: Vec<String> = subset.iter().map(|&i| system_ids[i].clone()).collect();
        for &strategy in strategies {
            let source = if strategy.is_weighted() {
                weights
            } else {
                WeightSource::None
            };
            models.push(CombinedModel::new(ids.clone(), strategy, source)?);
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = models.iter().find(|m| !seen.insert(m.combo_id.as_str())) {
        return Err(CfaError::validation(format!(
            "duplicate combined model {}",
            dup.combo_id
        )));
    }
    Ok(models)
}

/// Results of evaluating every combined model on every document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    /// Models in combo_id order.
    pub models: Vec<CombinedModel>,
    /// combo_id -> one ranking per document, in instance order.
    pub rankings: BTreeMap<String, Vec<FusedRanking>>,
}

impl GridResults {
    pub fn ranking_count(&self) -> usize {
        self.rankings.values().map(Vec::len).sum()
    }
}

/// Evaluates `models` on every instance.
pub fn run_grid(
    instances: &[FusionInstance],
    models: &[CombinedModel],
    performance: Option<&Performance>,
) -> Result<GridResults> {
    if let Some(first) = instances.first() {
        let ids: Vec<&str> = first.system_ids().collect();
        for inst in &instances[1..] {
            if inst.label_set != first.label_set {
                return Err(CfaError::validation(format!(
                    "document '{}' uses a different label set than '{}'",
                    inst.doc_id, first.doc_id
                )));
            }
            let other: Vec<&str> = inst.system_ids().collect();
            if other != ids {
                return Err(CfaError::validation(format!(
                    "document '{}' has systems {:?}, expected {:?}",
                    inst.doc_id, other, ids
                )));
            }
        }
    }
    let mut sorted: Vec<CombinedModel> = models.to_vec();
    sorted.sort_by(|a, b| a.combo_id.cmp(&b.combo_id));
    let mut rankings = BTreeMap::new();
    for model in &sorted {
        let fused = instances
            .iter()
            .map(|inst| combine(inst, model, performance))
            .collect::<Result<Vec<_>>>()?;
        if rankings.insert(model.combo_id.clone(), fused).is_some() {
            return Err(CfaError::validation(format!(
                "duplicate combined model {}",
                model.combo_id
            )));
        }
    }
    Ok(GridResults {
        models: sorted,
        rankings,
    })
}
