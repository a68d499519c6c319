//! Span and pair representations and the two classifiers on top of them.

use super::params::ModelParams;
use super::tape::{sigmoid, softmax, Tape, Var};
use crate::schema::Span;

/// Token rows strictly between two spans, as a half-open row range of the
/// encoder output (offset by the leading sequence token). Empty when the
/// spans touch or overlap.
pub fn between(a: Span, b: Span) -> (usize, usize) {
    let (lo, hi) = if a.end <= b.start {
        (a.end, b.start)
    } else if b.end <= a.start {
        (b.end, a.start)
    } else {
        (0, 0)
    };
    if lo < hi {
        (lo + 1, hi + 1)
    } else {
        (0, 0)
    }
}

/// Row of the size-embedding table for a span; wider spans share the last
/// row.
pub fn size_index(span: Span, max_span_width: usize) -> usize {
    span.width().clamp(1, max_span_width) - 1
}

/// `S × span_dim` matrix: `[maxpool(span tokens); context; size]` per span.
/// `hidden` holds the leading sequence token in row 0.
pub fn span_reprs<'p>(
    tape: &mut Tape<'p>,
    params: &ModelParams,
    vars: &[Var],
    hidden: Var,
    spans: &[Span],
) -> Var {
    let ranges: Vec<(usize, usize)> = spans.iter().map(|s| (s.start + 1, s.end + 1)).collect();
    let pooled = tape.max_pool_rows(hidden, &ranges);
    let ctx = tape.gather_rows(hidden, vec![0; spans.len()]);
    let w = params.config.max_span_width;
    let size = tape.gather_rows(
        vars[params.layout.size_emb],
        spans.iter().map(|s| size_index(*s, w)).collect(),
    );
    tape.concat_cols(&[pooled, ctx, size])
}

/// `P × pair_dim` matrix: `[head span; tail span; maxpool(gap)]`, where
/// pairs index rows of `reprs` and `spans`.
pub fn pair_reprs<'p>(
    tape: &mut Tape<'p>,
    hidden: Var,
    reprs: Var,
    spans: &[Span],
    pairs: &[(usize, usize)],
) -> Var {
    let heads = tape.gather_rows(reprs, pairs.iter().map(|p| p.0).collect());
    let tails = tape.gather_rows(reprs, pairs.iter().map(|p| p.1).collect());
    let gaps: Vec<(usize, usize)> = pairs.iter().map(|&(h, t)| between(spans[h], spans[t])).collect();
    let gap = tape.max_pool_rows(hidden, &gaps);
    tape.concat_cols(&[heads, tails, gap])
}

pub fn entity_logits<'p>(tape: &mut Tape<'p>, params: &ModelParams, vars: &[Var], reprs: Var) -> Var {
    tape.affine(reprs, vars[params.layout.ent_w], vars[params.layout.ent_b])
}

pub fn relation_logits<'p>(tape: &mut Tape<'p>, params: &ModelParams, vars: &[Var], pairs: Var) -> Var {
    tape.affine(pairs, vars[params.layout.rel_w], vars[params.layout.rel_b])
}

/// Softmax distribution over the entity label space for one span vector.
pub fn classify_entity(params: &ModelParams, span_repr: &[f64]) -> Vec<f64> {
    let w = &params.tensors[params.layout.ent_w];
    let b = &params.tensors[params.layout.ent_b];
    assert_eq!(span_repr.len(), w.rows);
    let mut z = b.data.clone();
    for (i, &x) in span_repr.iter().enumerate() {
        for (zj, wj) in z.iter_mut().zip(w.row(i)) {
            *zj += x * wj;
        }
    }
    softmax(&z)
}

/// Sigmoid link probability for one pair vector.
pub fn classify_relation(params: &ModelParams, pair_repr: &[f64]) -> f64 {
    let w = &params.tensors[params.layout.rel_w];
    let b = params.tensors[params.layout.rel_b].data[0];
    assert_eq!(pair_repr.len(), w.rows);
    sigmoid(b + super::tensor::dot(pair_repr, &w.data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::EncoderConfig;
    use crate::schema::LABEL_SPACE_SIZE;

    fn params() -> ModelParams {
        let mut c = EncoderConfig::desk(30);
        c.max_len = 16;
        ModelParams::init(&c, 2).unwrap()
    }

    #[test]
    fn between_is_strict_gap() {
        assert_eq!(between(Span::new(0, 2), Span::new(4, 5)), (3, 5));
        assert_eq!(between(Span::new(4, 5), Span::new(0, 2)), (3, 5));
        assert_eq!(between(Span::new(0, 2), Span::new(2, 3)), (0, 0));
        assert_eq!(between(Span::new(0, 3), Span::new(2, 4)), (0, 0));
    }

    #[test]
    fn zero_logits_are_uniform() {
        let mut p = params();
        let (w, b) = (p.layout.ent_w, p.layout.ent_b);
        p.tensors[w].data.iter_mut().for_each(|x| *x = 0.0);
        p.tensors[b].data.iter_mut().for_each(|x| *x = 0.0);
        let probs = classify_entity(&p, &vec![0.3; p.config.span_dim()]);
        for q in probs {
            assert!((q - 1.0 / LABEL_SPACE_SIZE as f64).abs() < 1e-15);
        }
        let (rw, rb) = (p.layout.rel_w, p.layout.rel_b);
        p.tensors[rw].data.iter_mut().for_each(|x| *x = 0.0);
        p.tensors[rb].data[0] = 0.0;
        assert_eq!(classify_relation(&p, &vec![1.0; p.config.pair_dim()]), 0.5);
    }

    #[test]
    fn tape_reprs_match_plain_oracle() {
        let p = params();
        let ids = [3u32, 5, 6, 7, 8, 9];
        let spans = [Span::new(0, 2), Span::new(3, 5), Span::new(2, 3)];
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let h = crate::model::encoder::encode(&mut tape, &p, &vars, &ids, None).unwrap();
        let r = span_reprs(&mut tape, &p, &vars, h, &spans);
        let pr = pair_reprs(&mut tape, h, r, &spans, &[(0, 1), (2, 1)]);
        let el = entity_logits(&mut tape, &p, &vars, r);
        let rl = relation_logits(&mut tape, &p, &vars, pr);
        let hv = tape.value(h).clone();
        let d = p.config.hidden;

        // brute-force span 1 = tokens 3..5 -> rows 4..6
        let rv = tape.value(r);
        for c in 0..d {
            let m = hv.at(4, c).max(hv.at(5, c));
            assert_eq!(rv.at(1, c), m);
            assert_eq!(rv.at(1, d + c), hv.at(0, c));
        }
        let se = &p.tensors[p.layout.size_emb];
        assert_eq!(&rv.row(1)[2 * d..], se.row(1));

        // pair (0, 1): gap is token 2 -> row 3
        let pv = tape.value(pr);
        let sd = p.config.span_dim();
        assert_eq!(&pv.row(0)[..sd], rv.row(0));
        assert_eq!(&pv.row(0)[sd..2 * sd], rv.row(1));
        assert_eq!(&pv.row(0)[2 * sd..], hv.row(3));
        // pair (2, 1) touches: zero gap
        assert!(pv.row(1)[2 * sd..].iter().all(|&x| x == 0.0));

        for s in 0..spans.len() {
            let probs = classify_entity(&p, rv.row(s));
            let oracle = softmax(tape.value(el).row(s));
            let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            assert_eq!(argmax(&probs), argmax(&oracle));
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for k in 0..2 {
            let w = &p.tensors[p.layout.rel_w].data;
            let z: f64 = pv.row(k).iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
                + p.tensors[p.layout.rel_b].data[0];
            assert!((classify_relation(&p, pv.row(k)) - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
            assert!((tape.value(rl).data[k] - z).abs() < 1e-12);
        }
    }
}
