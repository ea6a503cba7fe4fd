//! Nearest-centroid tf-idf scorer.
//!
//! `tf` is the raw term count in a document, `idf = ln(1 + N / df)` over the
//! training documents, each label's centroid is the mean tf-idf vector of its
//! training documents, and a document's label score is its cosine similarity
//! to that centroid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{CfaError, Result};
use crate::labels::LabelSet;

type SparseVec = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfCentroidScorer {
    labels: LabelSet,
    idf: BTreeMap<String, f64>,
    centroids: Vec<SparseVec>,
}

fn term_counts(tokens: &[String]) -> BTreeMap<&str, f64> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    counts
}

fn norm(v: &SparseVec) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

impl TfidfCentroidScorer {
    /// Fits idf and one centroid per label. Unlabelled documents are ignored;
    /// every label in `labels` needs at least one training document.
    pub fn train(corpus: &[Document], labels: &LabelSet) -> Result<Self> {
        let training: Vec<(usize, &Document)> = corpus
            .iter()
            .filter_map(|d| d.label.as_deref().map(|l| (l, d)))
            .map(|(l, d)| {
                labels.index_of(l).map(|i| (i, d)).ok_or_else(|| {
                    CfaError::validation(format!(
                        "training document '{}' has label '{l}' outside the label set",
                        d.doc_id
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let mut per_label = vec![0usize; labels.len()];
        for (i, _) in &training {
            per_label[*i] += 1;
        }
        if let Some(i) = per_label.iter().position(|&c| c == 0) {
            return Err(CfaError::validation(format!(
                "no training documents for label '{}'",
                labels.get(i).unwrap_or_default()
            )));
        }

        let n = training.len() as f64;
        let mut df: BTreeMap<&str, f64> = BTreeMap::new();
        let counts: Vec<BTreeMap<&str, f64>> = training
            .iter()
            .map(|(_, d)| term_counts(&d.tokens))
            .collect();
        for c in &counts {
            for term in c.keys() {
                *df.entry(term).or_insert(0.0) += 1.0;
            }
        }
        let idf: BTreeMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t.to_string(), (1.0 + n / d).ln()))
            .collect();

        let mut centroids = vec![SparseVec::new(); labels.len()];
        for ((label, _), c) in training.iter().zip(&counts) {
            for (term, tf) in c {
                *centroids[*label].entry(term.to_string()).or_insert(0.0) += tf * idf[*term];
            }
        }
        for (centroid, &count) in centroids.iter_mut().zip(&per_label) {
            for v in centroid.values_mut() {
                *v /= count as f64;
            }
        }
        Ok(TfidfCentroidScorer {
            labels: labels.clone(),
            idf,
            centroids,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// tf-idf vector of `tokens`; terms unseen in training are dropped.
    pub fn vectorize(&self, tokens: &[String]) -> SparseVec {
        term_counts(tokens)
            .into_iter()
            .filter_map(|(t, tf)| self.idf.get(t).map(|idf| (t.to_string(), tf * idf)))
            .collect()
    }

    /// Cosine similarity to each label centroid, in label order.
    pub fn score(&self, tokens: &[String]) -> Vec<f64> {
        let v = self.vectorize(tokens);
        let vn = norm(&v);
        self.centroids
            .iter()
            .map(|c| {
                let cn = norm(c);
                if vn == 0.0 || cn == 0.0 {
                    return 0.0;
                }
                let dot: f64 = v.iter().filter_map(|(t, x)| c.get(t).map(|y| x * y)).sum();
                dot / (vn * cn)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn doc(id: &str, label: &str, text: &str) -> Document {
        Document::new(id, Some(label.into()), text)
    }

    #[test]
    fn self_match_wins() {
        let labels = LabelSet::new(["A", "B", "C"]).unwrap();
        let corpus = vec![
            doc("1", "A", "river water sanitation"),
            doc("2", "B", "solar energy grid"),
            doc("3", "C", "forest soil"),
        ];
        let m = TfidfCentroidScorer::train(&corpus, &labels).unwrap();
        let s = m.score(&corpus[1].tokens);
        assert!((s[1] - 1.0).abs() < 1e-12);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[2], 0.0);
        assert_eq!(m.score(&tokenize("unrelated words")), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_computed_oracle() {
        let labels = LabelSet::new(["A", "B"]).unwrap();
        let corpus = vec![
            doc("1", "A", "x x y"),
            doc("2", "A", "y z"),
            doc("3", "B", "z w"),
        ];
        let m = TfidfCentroidScorer::train(&corpus, &labels).unwrap();
        // N = 3; df: x=1 y=2 z=2 w=1
        let (ix, iy, iz, iw) = (4f64.ln(), 2.5f64.ln(), 2.5f64.ln(), 4f64.ln());
        // centroid A = mean of (2ix, iy, 0, 0) and (0, iy, iz, 0)
        let ca = [ix, iy, iz / 2.0, 0.0];
        let cb = [0.0, 0.0, iz, iw];
        // query "x z z"
        let q = [ix, 0.0, 2.0 * iz, 0.0];
        let cos = |a: &[f64; 4], b: &[f64; 4]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        let s = m.score(&tokenize("x z z unseen"));
        assert!((s[0] - cos(&q, &ca)).abs() < 1e-12);
        assert!((s[1] - cos(&q, &cb)).abs() < 1e-12);
    }

    #[test]
    fn missing_label_rejected() {
        let labels = LabelSet::new(["A", "B"]).unwrap();
        let err = TfidfCentroidScorer::train(&[doc("1", "A", "x")], &labels).unwrap_err();
        assert!(err.to_string().contains("'B'"));
        assert!(TfidfCentroidScorer::train(&[doc("1", "Q", "x")], &labels).is_err());
    }
}
