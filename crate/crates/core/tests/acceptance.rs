//! End-to-end acceptance suite. Runs every criterion, prints one line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanmask::analysis::{fn_change, positive_class_ratio, scatter_data, trigger_coverage, ScatterSummary};
use spanmask::corpus::{build_vocab, AnnotatedCorpus, Document, Gold, Sentence, Vocab};
use spanmask::decode::{predict_corpus, DecodeConfig};
use spanmask::eval::{
    binned_eval, default_bins, micro_f1, score_all, score_triggers, welch_t_test, write_reports_csv, Counts,
    ScoreCounts, ScoreReport,
};
use spanmask::masking::{apply_dynamic_mask, build_frequency_list, mlm_mask, MlmMaskConfig};
use spanmask::model::gradcheck::{check_joint, check_mlm};
use spanmask::model::pretrain::{chunk_documents, masked_chunk};
use spanmask::model::train::{epoch_example, merged_gold};
use spanmask::model::{
    checkpoint::write_checkpoint, pretrain, train, EncoderConfig, MaskingSetup, MlmExample, ModelParams,
    PretrainConfig, TrainConfig,
};
use spanmask::schema::{
    AssertionValue, ChangeValue, Entity, EntityType, Relation, SeverityValue, Span, Subtype,
};
use spanmask::synthgen::{generate_domain, make_shift_pair, presets, ShiftPair};

type Outcome = Result<String, String>;

fn check(cond: bool, pass: String, fail: String) -> Outcome {
    if cond {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn indexed(corpora: &mut [&mut AnnotatedCorpus], extra: &[Document], max: usize) -> Vocab {
    let docs: Vec<&Document> = corpora
        .iter()
        .flat_map(|c| c.documents.iter())
        .chain(extra)
        .collect();
    let vocab = build_vocab(docs, max).unwrap();
    for c in corpora.iter_mut() {
        vocab.index(c);
    }
    vocab
}

/// Learning rate used for every fine-tuning run in this suite.
const FINE_TUNE_LR: f64 = 3e-3;

fn fine_tune_config(seed: u64) -> TrainConfig {
    let mut tc = TrainConfig::default();
    tc.adam.lr = FINE_TUNE_LR;
    tc.seed = seed;
    tc
}

// ---------------------------------------------------------------------------
// 1. scorer oracle
// ---------------------------------------------------------------------------

/// Maximum one-to-one matching by exhaustive search over assignments.
fn brute_force_matching<K: PartialEq>(gold: &[K], pred: &[K]) -> u64 {
    fn go<K: PartialEq>(gold: &[K], pred: &[K], used: &mut Vec<bool>) -> u64 {
        let Some((g, rest)) = gold.split_first() else {
            return 0;
        };
        let mut best = go(rest, pred, used);
        for j in 0..pred.len() {
            if !used[j] && pred[j] == *g {
                used[j] = true;
                best = best.max(1 + go(rest, pred, used));
                used[j] = false;
            }
        }
        best
    }
    go(gold, pred, &mut vec![false; pred.len()])
}

fn counts_of<K: PartialEq>(gold: &[K], pred: &[K]) -> Counts {
    let tp = brute_force_matching(gold, pred);
    Counts {
        tp,
        fp: pred.len() as u64 - tp,
        fn_: gold.len() as u64 - tp,
    }
}

/// (type, subtype, argument span, trigger span) for each linked argument,
/// read straight from the relation list.
fn oracle_arg_keys(ents: &[Entity], rels: &[Relation]) -> Vec<(EntityType, Option<Subtype>, Span, Span)> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for r in rels {
        let head = ents.iter().find(|e| e.id == r.head);
        let tail = ents.iter().find(|e| e.id == r.tail);
        if let (Some(h), Some(t)) = (head, tail) {
            if h.kind.is_trigger() && !t.kind.is_trigger() && !seen.contains(&(&r.head, &r.tail)) {
                seen.push((&r.head, &r.tail));
                out.push((t.kind, t.subtype, t.span, h.span));
            }
        }
    }
    out
}

fn oracle_score(gold: (&[Entity], &[Relation]), pred: (&[Entity], &[Relation])) -> ScoreCounts {
    let mut out = ScoreCounts::default();
    let trig = |e: &[Entity]| e.iter().filter(|x| x.kind.is_trigger()).map(|x| x.span).collect::<Vec<_>>();
    *out.entry(EntityType::Trigger) = counts_of(&trig(gold.0), &trig(pred.0));
    let ga = oracle_arg_keys(gold.0, gold.1);
    let pa = oracle_arg_keys(pred.0, pred.1);
    for kind in EntityType::ALL {
        if kind.is_labeled_argument() {
            let sel = |v: &[(EntityType, Option<Subtype>, Span, Span)]| {
                v.iter().filter(|k| k.0 == kind).copied().collect::<Vec<_>>()
            };
            *out.entry(kind) = counts_of(&sel(&ga), &sel(&pa));
        } else if kind.is_span_only_argument() {
            // one key per covered token, matched exhaustively
            let tokens = |v: &[(EntityType, Option<Subtype>, Span, Span)]| {
                v.iter()
                    .filter(|k| k.0 == kind)
                    .flat_map(|k| (k.2.start..k.2.end).map(move |p| (p, k.3)))
                    .collect::<Vec<_>>()
            };
            *out.entry(kind) = counts_of(&tokens(&ga), &tokens(&pa));
        }
    }
    out
}

fn random_subtype(kind: EntityType, rng: &mut ChaCha8Rng) -> Option<Subtype> {
    match kind {
        EntityType::Assertion => Some(Subtype::Assertion(AssertionValue::ALL[rng.gen_range(0..2)])),
        EntityType::Change => Some(Subtype::Change(ChangeValue::ALL[rng.gen_range(0..2)])),
        EntityType::Severity => Some(Subtype::Severity(SeverityValue::ALL[rng.gen_range(0..2)])),
        _ => None,
    }
}

/// Small random annotation over `n` tokens; spans and labels are drawn from
/// tiny pools so that gold and prediction collide often.
fn random_annotation(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Entity>, Vec<Relation>) {
    let mut ents = Vec::new();
    let n_ent = rng.gen_range(0..7);
    for i in 0..n_ent {
        let kind = if i < 2 || rng.gen_bool(0.3) {
            EntityType::Trigger
        } else {
            EntityType::ALL[rng.gen_range(1..8)]
        };
        let start = rng.gen_range(0..n);
        let end = (start + rng.gen_range(1..4)).min(n);
        ents.push(Entity::new(format!("T{i}"), kind, random_subtype(kind, rng), Span::new(start, end)));
    }
    let mut rels = Vec::new();
    for h in ents.iter().filter(|e| e.kind.is_trigger()) {
        for t in ents.iter().filter(|e| !e.kind.is_trigger()) {
            if rng.gen_bool(0.6) {
                rels.push(Relation {
                    head: h.id.clone(),
                    tail: t.id.clone(),
                });
            }
        }
    }
    (ents, rels)
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut compared = 0;
    for c in 0..200 {
        let n_sent = rng.gen_range(1..=5);
        let mut gold_doc = Document::from_text(format!("c{c}"), "x", "");
        let mut pred_doc = gold_doc.clone();
        for _ in 0..n_sent {
            let n = rng.gen_range(1..9);
            let text: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let base = Document::from_text("s", "x", text.join(" ")).sentences.remove(0);
            let (ge, gr) = random_annotation(n, &mut rng);
            let (pe, pr) = random_annotation(n, &mut rng);
            gold_doc.sentences.push(Sentence {
                gold: Some(Gold {
                    entities: ge,
                    relations: gr,
                }),
                ..base.clone()
            });
            pred_doc.sentences.push(Sentence {
                gold: Some(Gold {
                    entities: pe,
                    relations: pr,
                }),
                ..base
            });
        }
        let gold = AnnotatedCorpus::new(vec![gold_doc]);
        let pred = AnnotatedCorpus::new(vec![pred_doc]);
        let got = score_all(&gold, &pred).map_err(|e| e.to_string())?;
        let mut want = ScoreCounts::default();
        for ((_, g), (_, p)) in gold.sentences().zip(pred.sentences()) {
            want.add(&oracle_score(
                (g.gold_entities(), g.gold_relations()),
                (p.gold_entities(), p.gold_relations()),
            ));
        }
        for kind in EntityType::ALL {
            if got.get(kind) != want.get(kind) {
                return Err(format!("corpus {c}, {kind:?}: scorer {:?} vs oracle {:?}", got.get(kind), want.get(kind)));
            }
            compared += 1;
        }
    }
    let dt = t0.elapsed();
    check(
        dt < Duration::from_secs(10),
        format!("200 corpora, {compared} type counts equal the brute-force matcher in {dt:.2?}"),
        format!("oracle equivalent but took {dt:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. masking statistics
// ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let mut corpus = generate_domain(&presets::separable(), 1500, 0).unwrap().labeled;
    indexed(&mut [&mut corpus], &[], 5000);
    let phrases = build_frequency_list(&corpus, 200).unwrap();
    let matched = corpus
        .sentences()
        .flat_map(|(_, s)| s.tokens.iter())
        .filter(|t| phrases.contains(&t.surface))
        .count();
    if matched < 1000 {
        return Err(format!("only {matched} matched tokens"));
    }
    let rate = 0.8;
    let mean = matched as f64 * rate;
    let sd = (matched as f64 * rate * (1.0 - rate)).sqrt();
    let mut plans = Vec::new();
    for epoch in 0..20 {
        let (masked, plan) = apply_dynamic_mask(&corpus, &phrases, rate, epoch, 7).unwrap();
        let n = plan.len() as f64;
        if (n - mean).abs() > 3.0 * sd {
            return Err(format!("epoch {epoch}: {n} masked, outside {mean:.0} ± {:.1}", 3.0 * sd));
        }
        for ((_, a), (_, b)) in corpus.sentences().zip(masked.sentences()) {
            if a.gold != b.gold {
                return Err(format!("epoch {epoch}: gold labels changed"));
            }
        }
        plans.push(plan.positions);
    }
    for i in 0..plans.len() {
        for j in i + 1..plans.len() {
            if plans[i] == plans[j] {
                return Err(format!("epochs {i} and {j} share a mask plan"));
            }
        }
    }
    Ok(format!(
        "{matched} matched tokens, 20 epochs within {mean:.0} ± {:.1}, all plans distinct, gold untouched",
        3.0 * sd
    ))
}

// ---------------------------------------------------------------------------
// 3. gradient check
// ---------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut corpus = generate_domain(&presets::separable(), 3, 2).unwrap();
    let vocab = indexed(&mut [&mut corpus.labeled], &corpus.unlabeled, 5000);
    let cfg = EncoderConfig::desk(vocab.len());
    let params = ModelParams::init(&cfg, 3).unwrap();
    let tc = TrainConfig {
        neg_entities: 20,
        neg_relations: 10,
        ..TrainConfig::default()
    };
    let examples: Vec<_> = merged_gold(&corpus.labeled)
        .unwrap()
        .iter()
        .take(2)
        .map(|(id, g)| epoch_example(&corpus.labeled, *id, g, &params, &tc, 0))
        .collect();
    let joint = check_joint(&params, &examples, 1e-5, 300, 0).map_err(|e| e.to_string())?;
    let pc = PretrainConfig {
        chunk_len: 16,
        ..PretrainConfig::default()
    };
    let chunks = chunk_documents(&corpus.unlabeled, &vocab, pc.chunk_len).unwrap();
    let mut mlm_examples: Vec<MlmExample> = chunks
        .iter()
        .take(2)
        .enumerate()
        .map(|(i, c)| masked_chunk(c, &pc, &vocab, 0, i))
        .collect();
    if mlm_examples.iter().all(|m| m.positions.is_empty()) {
        let ids = chunks[0].clone();
        let m = mlm_mask(&ids, MlmMaskConfig { rate: 0.5, mixed_replacement: false }, 1, &vocab);
        mlm_examples = vec![m.into()];
    }
    let mlm = check_mlm(&params, &mlm_examples, 1e-5, 300, 0).map_err(|e| e.to_string())?;
    let dt = t0.elapsed();
    let detail = format!(
        "max relative error L_Joint {:.2e} ({} scalars), L_MLM {:.2e} ({} scalars) in {dt:.1?}",
        joint.max_rel_error,
        joint.checked.len(),
        mlm.max_rel_error,
        mlm.checked.len()
    );
    check(
        joint.max_rel_error <= 1e-4 && mlm.max_rel_error <= 1e-4 && dt < Duration::from_secs(60),
        detail.clone(),
        format!("{detail}; worst joint {:?}; worst mlm {:?}", joint.worst(), mlm.worst()),
    )
}

// ---------------------------------------------------------------------------
// 4. in-domain learnability
// ---------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let spec = presets::separable();
    let mut test_spec = spec.clone();
    test_spec.seed += 1000;
    let mut train_c = generate_domain(&spec, 500, 0).unwrap().labeled;
    let mut test_c = generate_domain(&test_spec, 200, 0).unwrap().labeled;
    let vocab = indexed(&mut [&mut train_c], &[], 5000);
    vocab.index(&mut test_c);
    let mut params = ModelParams::init(&EncoderConfig::desk(vocab.len()), 0).unwrap();
    train(&train_c, &mut params, &fine_tune_config(0), None).map_err(|e| e.to_string())?;
    let pred = predict_corpus(&params, &test_c, &DecodeConfig::default()).unwrap();
    let s = score_all(&test_c, &pred).unwrap();
    let trig = micro_f1(s.get(EntityType::Trigger)).f1;
    let asrt = micro_f1(s.get(EntityType::Assertion)).f1;
    let dt = t0.elapsed();
    let detail = format!("trigger F1 {trig:.3}, Assertion F1 {asrt:.3} in {dt:.1?}");
    check(trig >= 0.90 && asrt >= 0.85 && dt < Duration::from_secs(300), detail.clone(), detail)
}

// ---------------------------------------------------------------------------
// 5, 6, 9. shift experiments on the far pair
// ---------------------------------------------------------------------------

const SEEDS: u64 = 5;

struct SeedRun {
    scratch: f64,
    pretrained: f64,
    unmasked_recall: f64,
    masked_recall: f64,
    summary: ScatterSummary,
}

struct ShiftRuns {
    runs: Vec<SeedRun>,
}

fn far_pair() -> ShiftPair {
    make_shift_pair(&presets::far_source(), &presets::target(), 500, 300, 1500).unwrap()
}

fn shift_runs() -> ShiftRuns {
    let pair = far_pair();
    let near = generate_domain(&presets::near_source(), 1, 1500).unwrap();
    let mut pool = pair.source.unlabeled.clone();
    pool.extend(near.unlabeled);
    let mut src = pair.source.labeled.clone();
    let mut tgt = pair.target.labeled.clone();
    let vocab = indexed(&mut [&mut src], &pool, 5000);
    vocab.index(&mut tgt);
    let phrases = build_frequency_list(&src, 200).unwrap();
    let cfg = EncoderConfig::desk(vocab.len());

    let mut pretrained = ModelParams::init(&cfg, 0).unwrap();
    let pc = PretrainConfig {
        epochs: 20,
        batch_size: 8,
        chunk_len: 16,
        ..PretrainConfig::default()
    };
    pretrain(&pool, &vocab, &mut pretrained, &pc).unwrap();

    let fit = |init: &ModelParams, seed: u64, masking: Option<MaskingSetup>| -> AnnotatedCorpus {
        let mut p = init.clone();
        train(&src, &mut p, &fine_tune_config(seed), masking).unwrap();
        predict_corpus(&p, &tgt, &DecodeConfig::default()).unwrap()
    };
    let trig = |pred: &AnnotatedCorpus| micro_f1(score_triggers(&tgt, pred).unwrap().get(EntityType::Trigger));
    let runs = (0..SEEDS)
        .map(|seed| {
            let scratch = fit(&ModelParams::init(&cfg, seed).unwrap(), seed, None);
            let unmasked = fit(&pretrained, seed, None);
            let masked = fit(
                &pretrained,
                seed,
                Some(MaskingSetup {
                    phrases: &phrases,
                    rate: spanmask::masking::DEFAULT_MASK_RATE,
                }),
            );
            let changes = fn_change(&tgt, &unmasked, &masked, 100).unwrap();
            let rows = scatter_data(&src, &tgt, &changes);
            SeedRun {
                scratch: trig(&scratch).f1,
                pretrained: trig(&unmasked).f1,
                unmasked_recall: trig(&unmasked).recall,
                masked_recall: trig(&masked).recall,
                summary: ScatterSummary::of(&rows),
            }
        })
        .collect();
    ShiftRuns { runs }
}

fn fmt_list(v: impl Iterator<Item = f64>) -> String {
    v.map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn criterion_5(s: &ShiftRuns) -> Outcome {
    let gains: Vec<f64> = s.runs.iter().map(|r| r.masked_recall - r.unmasked_recall).collect();
    let wins = gains.iter().filter(|g| **g >= 0.0).count();
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    let detail = format!(
        "masked recall >= unmasked in {wins}/5 seeds, mean gain {mean:+.4} (unmasked {}; masked {})",
        fmt_list(s.runs.iter().map(|r| r.unmasked_recall)),
        fmt_list(s.runs.iter().map(|r| r.masked_recall)),
    );
    check(wins >= 4 && mean > 0.0, detail.clone(), detail)
}

fn criterion_6(s: &ShiftRuns) -> Outcome {
    let n = s.runs.len() as f64;
    let scratch = s.runs.iter().map(|r| r.scratch).sum::<f64>() / n;
    let pre = s.runs.iter().map(|r| r.pretrained).sum::<f64>() / n;
    let detail = format!(
        "mean target trigger F1 {pre:.3} with pretraining vs {scratch:.3} without (with {}; without {})",
        fmt_list(s.runs.iter().map(|r| r.pretrained)),
        fmt_list(s.runs.iter().map(|r| r.scratch)),
    );
    check(pre >= scratch, detail.clone(), detail)
}

fn planted_corpus() -> (AnnotatedCorpus, BTreeMap<&'static str, (usize, usize)>) {
    let planted = BTreeMap::from([("fever", (30, 100)), ("cough", (7, 20)), ("chest pain", (5, 8))]);
    let mut sentences = Vec::new();
    for (phrase, (pos, total)) in &planted {
        let width = phrase.split(' ').count();
        for i in 0..*total {
            let base = Document::from_text("s", "x", format!("reports {phrase} today")).sentences.remove(0);
            let entities = if i < *pos {
                vec![Entity::new("T1", EntityType::Trigger, None, Span::new(1, 1 + width))]
            } else {
                Vec::new()
            };
            sentences.push(Sentence {
                gold: Some(Gold {
                    entities,
                    relations: Vec::new(),
                }),
                ..base
            });
        }
    }
    let mut doc = Document::from_text("planted", "x", "");
    doc.sentences = sentences;
    (AnnotatedCorpus::new(vec![doc]), planted)
}

fn criterion_9(s: &ShiftRuns) -> Outcome {
    let (corpus, planted) = planted_corpus();
    for (phrase, (pos, total)) in &planted {
        let got = positive_class_ratio(&corpus, phrase).map_err(|e| e.to_string())?;
        if got != *pos as f64 / *total as f64 {
            return Err(format!("{phrase}: ratio {got} vs planted {pos}/{total}"));
        }
    }
    let pair = far_pair();
    let cov = trigger_coverage(&pair.source.labeled, &pair.target.labeled, 100).unwrap();
    let monotone = cov.windows(2).all(|w| w[1].source >= w[0].source && w[1].target >= w[0].target);
    if !monotone {
        return Err("coverage curve is not monotone".into());
    }
    let reduced: usize = s.runs.iter().map(|r| r.summary.reduced).sum();
    let above: usize = s.runs.iter().map(|r| r.summary.reduced_above).sum();
    let per_seed: Vec<String> = s
        .runs
        .iter()
        .map(|r| format!("{}/{}", r.summary.reduced_above, r.summary.reduced))
        .collect();
    let detail = format!(
        "planted ratios exact, coverage monotone over {} ranks, reduced-FN phrases above the diagonal {above}/{reduced} (per seed {})",
        cov.len(),
        per_seed.join(" ")
    );
    check(2 * above > reduced, detail.clone(), detail)
}

// ---------------------------------------------------------------------------
// 7. binned evaluation
// ---------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let pair = make_shift_pair(&presets::far_source(), &presets::target(), 400, 300, 0).unwrap();
    let src = pair.source.labeled;
    let gold = pair.target.labeled;
    let phrases = build_frequency_list(&src, 200).unwrap();
    // a deterministic corrupted copy of the gold triggers stands in for a
    // model prediction
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pred = gold.with_annotations(|_, s| {
        let mut entities: Vec<Entity> = s
            .gold_entities()
            .iter()
            .filter(|e| e.kind.is_trigger() && rng.gen_bool(0.7))
            .cloned()
            .collect();
        if !s.is_empty() && rng.gen_bool(0.3) {
            let i = rng.gen_range(0..s.len());
            entities.push(Entity::new("P", EntityType::Trigger, None, Span::new(i, i + 1)));
        }
        Gold {
            entities,
            relations: Vec::new(),
        }
    });
    let bins = default_bins();
    let reports = binned_eval(&gold, &pred, &phrases, &bins).map_err(|e| e.to_string())?;
    let in_top = |s: &Sentence, e: &Entity, lo: usize, hi: usize| {
        e.kind.is_trigger() && phrases.rank(&s.span_text(e.span)).is_some_and(|r| (lo..hi).contains(&r))
    };
    let truncated: u64 = gold
        .sentences()
        .map(|(_, s)| s.gold_entities().iter().filter(|e| in_top(s, e, 0, 100)).count() as u64)
        .sum();
    let binned_gold: u64 = reports.iter().map(|r| r.counts.tp + r.counts.fn_).sum();
    if binned_gold != truncated {
        return Err(format!("bins hold {binned_gold} gold triggers, truncated total is {truncated}"));
    }
    for (bin, rep) in bins.iter().zip(&reports) {
        let keep = |s: &Sentence| Gold {
            entities: s
                .gold_entities()
                .iter()
                .filter(|e| in_top(s, e, bin.lo, bin.hi))
                .cloned()
                .collect(),
            relations: Vec::new(),
        };
        let g = gold.with_annotations(|_, s| keep(s));
        let p = pred.with_annotations(|id, s| {
            // predicted spans are named by the gold sentence's surfaces
            let text = gold.sentence(id);
            Gold {
                entities: s
                    .gold_entities()
                    .iter()
                    .filter(|e| in_top(text, e, bin.lo, bin.hi))
                    .cloned()
                    .collect(),
                relations: Vec::new(),
            }
        });
        let oracle = score_triggers(&g, &p).unwrap().get(EntityType::Trigger);
        if oracle != rep.counts || micro_f1(oracle) != rep.scores {
            return Err(format!("bin {}: {:?} vs oracle {:?}", bin.label(), rep.counts, oracle));
        }
    }
    Ok(format!(
        "{truncated} gold triggers in the top 100 split over {} bins, every bin equals filter-then-score",
        bins.len()
    ))
}

// ---------------------------------------------------------------------------
// 8. Welch test
// ---------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let text = include_str!("fixtures/welch_reference.txt");
    let parse = |s: &str| -> Vec<f64> { s.split(',').map(|x| x.trim().parse().unwrap()).collect() };
    let mut n = 0;
    let mut worst: f64 = 0.0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(';').collect();
        let (a, b) = (parse(f[0]), parse(f[1]));
        let (t_ref, p_ref): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let got = welch_t_test(&a, &b).map_err(|e| e.to_string())?;
        let err = (got.p - p_ref).abs().max((got.t - t_ref).abs() / t_ref.abs().max(1.0));
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("fixture {n}: t {} p {} vs reference t {t_ref} p {p_ref}", got.t, got.p));
        }
        n += 1;
    }
    let same = [77.2, 77.9, 76.8, 77.5, 77.0];
    let eq = welch_t_test(&same, &same).unwrap();
    check(
        n == 50 && eq.p == 1.0,
        format!("{n} fixtures within {worst:.1e} of the reference, equal samples give p = {}", eq.p),
        format!("{n} fixtures checked, equal samples give p = {}", eq.p),
    )
}

// ---------------------------------------------------------------------------
// 10. determinism
// ---------------------------------------------------------------------------

/// Serialized artifacts of a small end-to-end pipeline.
fn pipeline_artifacts(threads: usize) -> Vec<(&'static str, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let pair = make_shift_pair(&presets::far_source(), &presets::target(), 60, 30, 40).unwrap();
        let mut src = pair.source.labeled.clone();
        let mut tgt = pair.target.labeled.clone();
        let vocab = indexed(&mut [&mut src], &pair.source.unlabeled, 5000);
        vocab.index(&mut tgt);
        let phrases = build_frequency_list(&src, 200).unwrap();
        let mut out = Vec::new();
        let mut buf = Vec::new();
        spanmask::corpus::write_corpus(&src, &mut buf).unwrap();
        out.push(("corpus", std::mem::take(&mut buf)));
        let dir = tempfile::tempdir().unwrap();
        vocab.save(&dir.path().join("v")).unwrap();
        out.push(("vocab", std::fs::read(dir.path().join("v")).unwrap()));
        phrases.write_tsv(&mut buf).unwrap();
        out.push(("phrase list", std::mem::take(&mut buf)));
        let mut params = ModelParams::init(&EncoderConfig::desk(vocab.len()), 5).unwrap();
        let pc = PretrainConfig {
            epochs: 1,
            batch_size: 4,
            chunk_len: 16,
            ..PretrainConfig::default()
        };
        pretrain(&pair.source.unlabeled, &vocab, &mut params, &pc).unwrap();
        write_checkpoint(&params, &mut buf).unwrap();
        out.push(("pretrained checkpoint", std::mem::take(&mut buf)));
        let mut tc = fine_tune_config(5);
        tc.epochs = 2;
        let masking = MaskingSetup {
            phrases: &phrases,
            rate: 0.8,
        };
        train(&src, &mut params, &tc, Some(masking)).unwrap();
        write_checkpoint(&params, &mut buf).unwrap();
        out.push(("checkpoint", std::mem::take(&mut buf)));
        let pred = predict_corpus(&params, &tgt, &DecodeConfig::default()).unwrap();
        spanmask::corpus::write_corpus(&pred, &mut buf).unwrap();
        out.push(("predictions", std::mem::take(&mut buf)));
        let report = ScoreReport::from_counts(&score_all(&tgt, &pred).unwrap(), Some(5));
        write_reports_csv(&[report], &mut buf).unwrap();
        out.push(("report", std::mem::take(&mut buf)));
        out
    })
}

fn criterion_10() -> Outcome {
    let a = pipeline_artifacts(1);
    let b = pipeline_artifacts(1);
    let c = pipeline_artifacts(4);
    for ((name, x), ((_, y), (_, z))) in a.iter().zip(b.iter().zip(&c)) {
        if x != y {
            return Err(format!("{name} differs between identical reruns"));
        }
        if x != z {
            return Err(format!("{name} differs between 1 and 4 threads"));
        }
    }
    let names: Vec<&str> = a.iter().map(|x| x.0).collect();
    Ok(format!("byte-identical across reruns and thread counts: {}", names.join(", ")))
}

fn run(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let (tag, detail) = match &res {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n:>2} {tag} ({:.1?}): {detail}", t0.elapsed());
    res.is_ok()
}

fn main() {
    // the test harness passes filter arguments; this target always runs
    // the whole suite
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut ok = vec![
        run(1, criterion_1),
        run(2, criterion_2),
        run(3, criterion_3),
        run(4, criterion_4),
    ];
    let shift = catch_unwind(shift_runs).ok();
    let missing = || Err("shift experiment panicked".to_string());
    ok.push(run(5, || shift.as_ref().map_or_else(missing, criterion_5)));
    ok.push(run(6, || shift.as_ref().map_or_else(missing, criterion_6)));
    ok.push(run(7, criterion_7));
    ok.push(run(8, criterion_8));
    ok.push(run(9, || shift.as_ref().map_or_else(missing, criterion_9)));
    ok.push(run(10, criterion_10));
    let passed = ok.iter().filter(|x| **x).count();
    println!("{passed}/{} criteria passed", ok.len());
    if passed != ok.len() {
        std::process::exit(1);
    }
}
