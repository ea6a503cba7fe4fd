//! Synthetic inputs shared by the benchmarks.

use cfa_core::{build_instance, FusionInstance, LabelSet, TiePolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `docs` instances of `systems` systems scoring the 17 SDG labels with
/// uniform scores in [0, 1).
pub fn random_instances(docs: usize, systems: usize, seed: u64) -> Vec<FusionInstance> {
    let labels = LabelSet::sdg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..docs)
        .map(|d| {
            let scores = (0..systems)
                .map(|s| {
                    let id = ((b'A' + s as u8) as char).to_string();
                    (id, (0..labels.len()).map(|_| rng.gen::<f64>()).collect())
                })
                .collect();
            build_instance(format!("doc{d:04}"), &labels, scores, TiePolicy::Fractional)
                .expect("valid synthetic instance")
        })
        .collect()
}
