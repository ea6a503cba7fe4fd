//! Per-document score mathematics: normalization, ranking, rank-score
//! characteristic (RSC) curves, cognitive diversity and diversity strength.
//!
//! Every quantity here is computed over the labels of a single document.
//! A scoring system's raw label scores are min-max normalized within the
//! document, ranked (rank 1 = highest score), and turned into an RSC curve
//! `f(i)` = normalized score at rank position `i`. Two systems' curves are
//! compared with the cognitive diversity distance, and a system's diversity
//! strength is its mean distance to the other systems in a combination.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CfaError, Result};
use crate::labels::LabelSet;

/// How tied scores are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Tied scores share the mean of the rank positions they span.
    #[default]
    Fractional,
    /// Ties break by label index; the lower index receives the better rank.
    Ordinal,
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Fractional => "fractional",
            TiePolicy::Ordinal => "ordinal",
        })
    }
}

impl FromStr for TiePolicy {
    type Err = CfaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fractional" => Ok(TiePolicy::Fractional),
            "ordinal" => Ok(TiePolicy::Ordinal),
            other => Err(CfaError::validation(format!(
                "unknown tie policy '{other}' (expected fractional|ordinal)"
            ))),
        }
    }
}

/// Output of [`normalize_scores`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Set when the input was constant and every value was mapped to 0.5.
    pub degenerate: bool,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(CfaError::validation("score vector is empty"));
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CfaError::validation(format!(
            "non-finite score {} at index {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Min-max normalizes `raw` into `[0, 1]`.
///
/// A constant vector has no spread to rescale; it maps to all 0.5 and the
/// result is flagged `degenerate`.
pub fn normalize_scores(raw: &[f64]) -> Result<Normalized> {
    check_finite(raw)?;
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(Normalized {
            values: vec![0.5; raw.len()],
            degenerate: true,
        });
    }
    let span = max - min;
    let values = raw
        .iter()
        .map(|&x| {
            if x == max {
                1.0
            } else {
                ((x - min) / span).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(Normalized {
        values,
        degenerate: false,
    })
}

/// Indices of `scores` ordered best-first (descending score, then label index).
fn order_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Assigns ranks with rank 1 going to the highest score.
pub fn rank_from_scores(scores: &[f64], policy: TiePolicy) -> Result<Vec<f64>> {
    check_finite(scores)?;
    let order = order_descending(scores);
    let mut ranks = vec![0.0; scores.len()];
    match policy {
        TiePolicy::Ordinal => {
            for (pos, &idx) in order.iter().enumerate() {
                ranks[idx] = (pos + 1) as f64;
            }
        }
        TiePolicy::Fractional => {
            let mut start = 0;
            while start < order.len() {
                let mut end = start + 1;
                while end < order.len() && scores[order[end]] == scores[order[start]] {
                    end += 1;
                }
                // positions start+1 ..= end share their mean
                let shared = (start + 1 + end) as f64 / 2.0;
                for &idx in &order[start..end] {
                    ranks[idx] = shared;
                }
                start = end;
            }
        }
    }
    Ok(ranks)
}

/// Rank-score characteristic curve: `values[i]` is the normalized score held
/// at rank position `i + 1`. Always non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscCurve {
    values: Vec<f64>,
}

impl RscCurve {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds the RSC curve by reading normalized scores off in rank order.
///
/// Labels sharing a fractional rank are read in label order; they carry the
/// same score, so the curve equals the normalized scores sorted descending.
pub fn rsc_curve(normalized: &[f64], ranks: &[f64]) -> Result<RscCurve> {
    if normalized.len() != ranks.len() {
        return Err(CfaError::validation(format!(
            "rsc curve: {} scores but {} ranks",
            normalized.len(),
            ranks.len()
        )));
    }
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order.into_iter().map(|i| normalized[i]).collect();
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err(CfaError::validation(
            "rsc curve: ranks are inconsistent with scores (curve would increase)",
        ));
    }
    Ok(RscCurve { values })
}

/// Cognitive diversity between two systems:
/// `sqrt( sum_i (fA(i) - fB(i))^2 / (n - 2) )`.
///
/// Needs `n >= 3`; smaller label sets make the divisor non-positive.
pub fn cognitive_diversity(a: &RscCurve, b: &RscCurve) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CfaError::validation(format!(
            "cognitive diversity: curve lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 3 {
        return Err(CfaError::domain(format!(
            "cognitive diversity needs at least 3 labels, got {n}"
        )));
    }
    let sum_sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum_sq / (n - 2) as f64).sqrt())
}

/// Mean cognitive diversity of system `j` to every other system in `cd`.
pub fn diversity_strength(cd: &[Vec<f64>], j: usize) -> Result<f64> {
    let t = cd.len();
    if t < 2 {
        return Err(CfaError::domain(format!(
            "diversity strength needs at least 2 systems, got {t}"
        )));
    }
    let row = cd
        .get(j)
        .ok_or_else(|| CfaError::validation(format!("system index {j} out of range ({t})")))?;
    if row.len() != t {
        return Err(CfaError::validation(
            "cognitive diversity matrix is not square",
        ));
    }
    let sum: f64 = row
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, v)| v)
        .sum();
    Ok(sum / (t - 1) as f64)
}

/// Pairwise cognitive diversities and per-system diversity strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityProfile {
    pub cd: Vec<Vec<f64>>,
    pub ds: Vec<f64>,
}

impl DiversityProfile {
    pub fn from_curves(curves: &[&RscCurve]) -> Result<Self> {
        let t = curves.len();
        let mut cd = vec![vec![0.0; t]; t];
        for j in 0..t {
            for k in (j + 1)..t {
                let d = cognitive_diversity(curves[j], curves[k])?;
                cd[j][k] = d;
                cd[k][j] = d;
            }
        }
        let ds = (0..t)
            .map(|j| diversity_strength(&cd, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiversityProfile { cd, ds })
    }

    /// Restricts the profile to `members` (indices into this profile) and
    /// recomputes diversity strength within that subset.
    pub fn restrict(&self, members: &[usize]) -> Result<Self> {
        let t = self.cd.len();
        if let Some(&bad) = members.iter().find(|&&m| m >= t) {
            return Err(CfaError::validation(format!(
                "system index {bad} out of range ({t})"
            )));
        }
        let cd: Vec<Vec<f64>> = members
            .iter()
            .map(|&j| members.iter().map(|&k| self.cd[j][k]).collect())
            .collect();
        let ds = (0..members.len())
            .map(|j| diversity_strength(&cd, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiversityProfile { cd, ds })
    }

    pub fn system_count(&self) -> usize {
        self.cd.len()
    }
}

/// One scoring system's view of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScores {
    pub system_id: String,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub ranks: Vec<f64>,
    pub rsc: RscCurve,
    /// Raw scores were constant; normalized scores are all 0.5.
    pub degenerate: bool,
}

impl SystemScores {
    pub fn from_raw(
        system_id: impl Into<String>,
        raw: Vec<f64>,
        policy: TiePolicy,
    ) -> Result<Self> {
        let system_id = system_id.into();
        let norm = normalize_scores(&raw)
            .map_err(|e| CfaError::validation(format!("system '{system_id}': {e}")))?;
        let ranks = rank_from_scores(&raw, policy)?;
        let rsc = rsc_curve(&norm.values, &ranks)?;
        Ok(SystemScores {
            system_id,
            raw,
            normalized: norm.values,
            ranks,
            rsc,
            degenerate: norm.degenerate,
        })
    }
}

/// Complete fusion input for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionInstance {
    pub doc_id: String,
    pub label_set: LabelSet,
    pub systems: Vec<SystemScores>,
    /// Present when at least two systems are supplied.
    pub diversity: Option<DiversityProfile>,
    pub tie_policy: TiePolicy,
}

impl FusionInstance {
    pub fn system_index(&self, system_id: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.system_id == system_id)
    }

    pub fn system_ids(&self) -> impl Iterator<Item = &str> {
        self.systems.iter().map(|s| s.system_id.as_str())
    }

    /// Ids of systems whose raw scores were constant on this document.
    pub fn degenerate_systems(&self) -> Vec<&str> {
        self.systems
            .iter()
            .filter(|s| s.degenerate)
            .map(|s| s.system_id.as_str())
            .collect()
    }
}

/// Assembles normalized scores, ranks, RSC curves and (for two or more
/// systems) the diversity profile for one document.
pub fn build_instance(
    doc_id: impl Into<String>,
    label_set: &LabelSet,
    systems: Vec<(String, Vec<f64>)>,
    policy: TiePolicy,
) -> Result<FusionInstance> {
    let doc_id = doc_id.into();
    if systems.is_empty() {
        return Err(CfaError::validation(format!(
            "document '{doc_id}': no scoring systems supplied"
        )));
    }
    let n = label_set.len();
    let mut seen = HashSet::new();
    let mut scored = Vec::with_capacity(systems.len());
    for (system_id, raw) in systems {
        if !seen.insert(system_id.clone()) {
            return Err(CfaError::validation(format!(
                "document '{doc_id}': duplicate system id '{system_id}'"
            )));
        }
        if raw.len() < n {
            let missing = label_set.get(raw.len()).unwrap_or_default();
            return Err(CfaError::validation(format!(
                "document '{doc_id}': system '{system_id}' has no score for label '{missing}'"
            )));
        }
        if raw.len() > n {
            return Err(CfaError::validation(format!(
                "document '{doc_id}': system '{system_id}' supplies {} scores for {n} labels",
                raw.len()
            )));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(CfaError::validation(format!(
                "document '{doc_id}': system '{system_id}' has non-finite score for label '{}'",
                label_set.get(i).unwrap_or_default()
            )));
        }
        scored.push(SystemScores::from_raw(system_id, raw, policy)?);
    }
    let diversity = if scored.len() >= 2 {
        let curves: Vec<&RscCurve> = scored.iter().map(|s| &s.rsc).collect();
        Some(DiversityProfile::from_curves(&curves).map_err(|e| match e {
            CfaError::Domain(msg) => CfaError::domain(format!("document '{doc_id}': {msg}")),
            other => other,
        })?)
    } else {
        None
    };
    Ok(FusionInstance {
        doc_id,
        label_set: label_set.clone(),
        systems: scored,
        diversity,
        tie_policy: policy,
    })
}
