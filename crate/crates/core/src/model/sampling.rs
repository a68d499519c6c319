use std::collections::HashSet;

use rand::Rng;

use crate::corpus::enumerate_spans_n;
use crate::schema::{MergedAnnotation, Span};

/// Draws `k` items uniformly without replacement by a partial Fisher–Yates
/// shuffle; returns the whole pool (shuffled) when it is smaller.
pub fn sample_without_replacement<T: Clone, R: Rng>(pool: &[T], k: usize, rng: &mut R) -> Vec<T> {
    let mut items = pool.to_vec();
    let k = k.min(items.len());
    for i in 0..k {
        let j = rng.gen_range(i..items.len());
        items.swap(i, j);
    }
    items.truncate(k);
    items
}

/// Negative spans and negative (trigger, argument) pairs for one sentence.
///
/// Span negatives are enumerated spans of width ≤ `max_width` that carry
/// no gold entity. Pair negatives are index pairs into `gold.entities`
/// with a trigger head and a non-trigger tail that are not linked by a gold
/// relation.
pub fn sample_negatives<R: Rng>(
    n_tokens: usize,
    gold: &MergedAnnotation,
    n_ent: usize,
    n_rel: usize,
    max_width: usize,
    rng: &mut R,
) -> (Vec<Span>, Vec<(usize, usize)>) {
    let gold_spans: HashSet<Span> = gold.entities.iter().map(|e| e.span).collect();
    let span_pool: Vec<Span> = enumerate_spans_n(n_tokens, max_width)
        .into_iter()
        .filter(|s| !gold_spans.contains(s))
        .collect();
    let linked: HashSet<(&str, &str)> = gold
        .relations
        .iter()
        .map(|r| (r.head.as_str(), r.tail.as_str()))
        .collect();
    let mut pair_pool = Vec::new();
    for (i, h) in gold.entities.iter().enumerate() {
        if !h.label.is_trigger() {
            continue;
        }
        for (j, t) in gold.entities.iter().enumerate() {
            if !t.label.is_trigger() && !linked.contains(&(h.id.as_str(), t.id.as_str())) {
                pair_pool.push((i, j));
            }
        }
    }
    let spans = sample_without_replacement(&span_pool, n_ent, rng);
    let pairs = sample_without_replacement(&pair_pool, n_rel, rng);
    (spans, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Label, MergedEntity, Relation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ent(id: &str, label: Label, s: usize, e: usize) -> MergedEntity {
        MergedEntity {
            id: id.into(),
            label,
            span: Span::new(s, e),
        }
    }

    #[test]
    fn all_gold_sentence_has_no_span_negatives() {
        let gold = MergedAnnotation {
            entities: vec![ent("T1", Label::Trigger(None), 0, 1)],
            relations: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (s, p) = sample_negatives(1, &gold, 100, 100, 10, &mut rng);
        assert!(s.is_empty() && p.is_empty());
    }

    #[test]
    fn small_pool_returned_whole() {
        let gold = MergedAnnotation {
            entities: vec![
                ent("T1", Label::Trigger(None), 0, 1),
                ent("T2", Label::Anatomy, 2, 3),
                ent("T3", Label::Duration, 3, 4),
            ],
            relations: vec![Relation {
                head: "T1".into(),
                tail: "T2".into(),
            }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (s, p) = sample_negatives(4, &gold, 100, 100, 10, &mut rng);
        assert_eq!(s.len(), 10 - 3);
        assert_eq!(p, vec![(0, 2)]);
    }

    /// Textbook full Fisher–Yates, truncated afterwards.
    fn fisher_yates_oracle(pool: &[usize], k: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = pool.to_vec();
        let n = v.len();
        for i in 0..n.saturating_sub(1) {
            let j = rng.gen_range(i..n);
            v.swap(i, j);
        }
        v.truncate(k.min(n));
        v
    }

    #[test]
    fn matches_seeded_fisher_yates() {
        let pool: Vec<usize> = (0..57).collect();
        for seed in 0..20 {
            for k in [0, 1, 10, 56, 57, 80] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                assert_eq!(sample_without_replacement(&pool, k, &mut rng), fisher_yates_oracle(&pool, k, seed));
            }
        }
    }
}
