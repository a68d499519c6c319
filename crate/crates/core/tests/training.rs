use spanmask::corpus::{build_vocab, AnnotatedCorpus, Document, Vocab};
use spanmask::masking::build_frequency_list;
use spanmask::model::pretrain::{chunk_documents, masked_chunk, mlm_predict};
use spanmask::model::{pretrain, train, EncoderConfig, MaskingSetup, ModelParams, PretrainConfig, TrainConfig};
use spanmask::synthgen::{generate_domain, presets};

fn separable(n: usize) -> (AnnotatedCorpus, Vocab) {
    let mut c = generate_domain(&presets::separable(), n, 0).unwrap().labeled;
    let vocab = build_vocab(c.documents.iter(), 5000).unwrap();
    vocab.index(&mut c);
    (c, vocab)
}

fn short_run(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn training_reduces_loss() {
    let (c, vocab) = separable(50);
    let mut params = ModelParams::init(&EncoderConfig::desk(vocab.len()), 0).unwrap();
    let m = train(&c, &mut params, &short_run(10), None).unwrap();
    let first = m.first().unwrap().loss.joint();
    let last = m.last().unwrap().loss.joint();
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn zero_rate_masking_equals_no_masking() {
    let (c, vocab) = separable(30);
    let phrases = build_frequency_list(&c, 200).unwrap();
    let init = ModelParams::init(&EncoderConfig::desk(vocab.len()), 1).unwrap();
    let (mut a, mut b) = (init.clone(), init);
    let masking = MaskingSetup {
        phrases: &phrases,
        rate: 0.0,
    };
    train(&c, &mut a, &short_run(2), Some(masking)).unwrap();
    train(&c, &mut b, &short_run(2), None).unwrap();
    assert_eq!(a.hash_hex(), b.hash_hex());
}

#[test]
fn same_seed_gives_identical_parameters() {
    let (c, vocab) = separable(30);
    let run = || {
        let mut p = ModelParams::init(&EncoderConfig::desk(vocab.len()), 2).unwrap();
        train(&c, &mut p, &short_run(2), None).unwrap();
        p.hash_hex()
    };
    assert_eq!(run(), run());
}

fn memorizable() -> (Vec<Document>, Vocab) {
    let docs = vec![Document::from_text(
        "m",
        "clinic",
        "Patient reports fever and cough. She denies chest pain today. \
         Headache improved after rest. No nausea was noted. Mild rash on the arm.",
    )];
    let vocab = build_vocab(docs.iter(), 100).unwrap();
    (docs, vocab)
}

#[test]
fn pretraining_loss_decreases() {
    let (docs, vocab) = memorizable();
    let mut params = ModelParams::init(&EncoderConfig::desk(vocab.len()), 3).unwrap();
    let cfg = PretrainConfig {
        epochs: 2,
        chunk_len: 32,
        mlm_rate: 0.5,
        ..PretrainConfig::default()
    };
    let m = pretrain(&docs, &vocab, &mut params, &cfg).unwrap();
    let per_token: Vec<f64> = m.iter().map(|e| e.loss / e.masked_tokens as f64).collect();
    assert!(per_token[1] < per_token[0], "{per_token:?}");
}

#[test]
fn pretraining_memorizes_a_small_corpus() {
    let (docs, vocab) = memorizable();
    let mut params = ModelParams::init(&EncoderConfig::desk(vocab.len()), 4).unwrap();
    // one batch per epoch, so 200 optimizer steps
    let cfg = PretrainConfig {
        epochs: 200,
        chunk_len: 32,
        mlm_rate: 0.3,
        ..PretrainConfig::default()
    };
    pretrain(&docs, &vocab, &mut params, &cfg).unwrap();
    // fresh masks at the default rate
    let chunks = chunk_documents(&docs, &vocab, cfg.chunk_len).unwrap();
    let cfg = PretrainConfig {
        mlm_rate: PretrainConfig::default().mlm_rate,
        ..cfg
    };
    let (mut hit, mut total) = (0, 0);
    for epoch in 1000..1020 {
        for (i, chunk) in chunks.iter().enumerate() {
            let ex = masked_chunk(chunk, &cfg, &vocab, epoch, i);
            let guess = mlm_predict(&params, &ex).unwrap();
            hit += guess.iter().zip(&ex.originals).filter(|(g, t)| g == t).count();
            total += guess.len();
        }
    }
    let acc = hit as f64 / total as f64;
    assert!(acc >= 0.9, "recovery accuracy {acc:.3} over {total} masked tokens");
}
