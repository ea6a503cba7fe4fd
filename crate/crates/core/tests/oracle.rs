//! The library against the naive oracle on random 5-system, 17-label
//! instances, every subset and every strategy.

mod naive;

use cfa_core::combiner::{
    average_rank_combination, average_score_combination, weighted_rank_combination,
    weighted_score_combination,
};
use cfa_core::{build_instance, FusedRanking, LabelSet, TiePolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL)
}

fn check_ranking(fused: &FusedRanking, labels: &LabelSet, values: &[f64], lower: bool) {
    let expected: Vec<&str> = naive::order(values, lower)
        .into_iter()
        .map(|i| labels.get(i).unwrap())
        .collect();
    assert_eq!(fused.ranking, expected, "doc {}", fused.doc_id);
    assert_eq!(fused.top1, expected[0]);
}

#[test]
fn matches_naive_formulas() {
    let labels = LabelSet::sdg();
    let ids = ["A", "B", "C", "D", "E"];
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    for doc in 0..100 {
        let raw: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..17).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let inst = build_instance(
            format!("d{doc}"),
            &labels,
            ids.iter().map(|s| s.to_string()).zip(raw.clone()).collect(),
            TiePolicy::Fractional,
        )
        .unwrap();

        let norm: Vec<Vec<f64>> = raw.iter().map(|r| naive::normalize(r)).collect();
        let ranks: Vec<Vec<f64>> = raw.iter().map(|r| naive::fractional_ranks(r)).collect();
        let curves: Vec<Vec<f64>> = norm.iter().map(|n| naive::rsc(n)).collect();

        let profile = inst.diversity.as_ref().unwrap();
        for j in 0..5 {
            for k in 0..5 {
                let want = if j == k {
                    0.0
                } else {
                    naive::cd(&curves[j], &curves[k])
                };
                assert!((profile.cd[j][k] - want).abs() <= TOL);
            }
        }
        assert!(close(&profile.ds, &naive::ds(&curves)));

        for subset in naive::subsets(5) {
            let names: Vec<&str> = subset.iter().map(|&i| ids[i]).collect();
            let s: Vec<Vec<f64>> = subset.iter().map(|&i| norm[i].clone()).collect();
            let r: Vec<Vec<f64>> = subset.iter().map(|&i| ranks[i].clone()).collect();
            let c: Vec<Vec<f64>> = subset.iter().map(|&i| curves[i].clone()).collect();
            let w = naive::ds(&c);

            let want = naive::asc(&s);
            let got = average_score_combination(&inst, &names).unwrap();
            assert!(close(&got.combined_values, &want));
            check_ranking(&got, &labels, &want, false);

            let want = naive::arc(&r);
            let got = average_rank_combination(&inst, &names).unwrap();
            assert!(close(&got.combined_values, &want));
            check_ranking(&got, &labels, &want, true);

            let want = naive::wsc(&s, &w);
            let got = weighted_score_combination(&inst, &names, None).unwrap();
            assert!(!got.fallback);
            assert!(close(&got.combined_values, &want));
            check_ranking(&got, &labels, &want, false);

            let want = naive::wrc(&r, &w);
            let got = weighted_rank_combination(&inst, &names, None).unwrap();
            assert!(close(&got.combined_values, &want));
            check_ranking(&got, &labels, &want, true);
        }
    }
}
