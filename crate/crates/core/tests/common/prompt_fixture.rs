//! Synthetic validation sets on which each prompt spec's corpus SARI is
//! known in advance: every source equals all of its references, and a
//! scripted client either echoes the source (SARI 100) or returns words
//! disjoint from it (SARI 0).
#![allow(dead_code)]

use simpeval_core::corpus::{Dataset, EvalItem, ReferenceSet, SourceItem, Split};
use simpeval_core::promptlab::{
    build_grid, ExampleManifest, ManifestEntry, MockClient, MockOutput, MockRule, MockScript, PromptSpec, PromptStyle,
};

pub fn item(id: &str, source: &str, refs: usize) -> EvalItem {
    EvalItem {
        source: SourceItem { id: id.into(), dataset: Dataset::Custom, split: Split::Validation, text: source.into() },
        refs: ReferenceSet { item_id: id.into(), references: vec![source.to_string(); refs] },
        outputs: Default::default(),
    }
}

/// `n` validation items whose sources are four distinct words.
pub fn validation_set(prefix: &str, n: usize) -> Vec<EvalItem> {
    (0..n).map(|i| item(&format!("{prefix}-valid-{i:04}"), &format!("w{i}a w{i}b w{i}c w{i}d"), 3)).collect()
}

/// Three example items per style, kept outside the validation set.
pub fn example_pool() -> (Vec<EvalItem>, ExampleManifest) {
    let mut pool = Vec::new();
    let mut entries = Vec::new();
    for style in PromptStyle::ALL {
        for j in 0..3 {
            let id = format!("{style}-pool-{j}");
            let mut it = item(&id, &format!("The {style} example sentence number {j} is rather long."), 3);
            it.refs.references = (0..3).map(|r| format!("Example {j}, version {r}.")).collect();
            pool.push(it);
            entries.push(ManifestEntry { style, id, refs: None });
        }
    }
    (pool, ExampleManifest { entries })
}

/// Number of items each spec gets right: `best` gets `top`, the first spec
/// other than `best` in grid order gets `top - gap`, every other spec falls
/// strictly in between.
pub fn correct_counts(best: PromptSpec, top: usize, gap: usize) -> Vec<(PromptSpec, usize)> {
    let mut out = Vec::new();
    let mut others = 0;
    for spec in build_grid() {
        let c = if spec == best {
            top
        } else {
            others += 1;
            if others == 1 {
                top - gap
            } else {
                top - gap + others.min(gap - 1)
            }
        };
        out.push((spec, c));
    }
    out
}

pub fn scripted_client(items: &[EvalItem], counts: &[(PromptSpec, usize)]) -> MockClient {
    let mut rules = Vec::new();
    for &(spec, c) in counts {
        for it in &items[..c] {
            rules.push(MockRule { spec: Some(spec), item: Some(it.id().to_string()), output: MockOutput::Echo });
        }
    }
    MockClient::new("mock:table", MockScript { default: MockOutput::Garble, rules })
}
