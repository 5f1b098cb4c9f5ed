//! Synthetic workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simpeval_core::corpus::{Dataset, EvalItem, ReferenceSet, SourceItem, Split};

const WORDS: [&str; 24] = [
    "the", "a", "city", "council", "voted", "to", "build", "new", "bridge", "over", "river", "in", "spring",
    "after", "long", "debate", "residents", "said", "project", "would", "cost", "more", "than", "expected",
];

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> String {
    let mut s = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ");
    s.push('.');
    s
}

/// `n` items with 8 references each and outputs for systems "a" and "b".
pub fn corpus(n: usize, seed: u64) -> Vec<EvalItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = format!("bench-{i:05}");
            let len = rng.random_range(12..30);
            let source = sentence(&mut rng, len);
            let references = (0..8).map(|_| sentence(&mut rng, len * 2 / 3)).collect();
            let outputs = ["a", "b"].iter().map(|s| (s.to_string(), sentence(&mut rng, len * 2 / 3))).collect();
            EvalItem {
                source: SourceItem { id: id.clone(), dataset: Dataset::Custom, split: Split::Test, text: source },
                refs: ReferenceSet { item_id: id, references },
                outputs,
            }
        })
        .collect()
}
