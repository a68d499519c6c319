use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use spanmask::analysis::{
    coverage_svg, fn_change, save_text, scatter_data, scatter_svg, trigger_coverage, write_coverage_csv,
    write_scatter_csv, ScatterSummary,
};
use spanmask::corpus::{build_vocab, load_corpus, load_unlabeled, save_corpus, save_unlabeled, AnnotatedCorpus, Document, Vocab};
use spanmask::decode::{predict_corpus, DecodeConfig};
use spanmask::eval::{
    binned_eval, compare_reports, default_bins, format_comparison_table, read_reports_csv, score_all,
    write_reports_csv, ScoreReport, TTestKind,
};
use spanmask::masking::{build_frequency_list_with, PhraseList, SourcePooling, DEFAULT_MASK_RATE};
use spanmask::model::pretrain::save_mlm_metrics;
use spanmask::model::train::save_train_metrics;
use spanmask::model::{
    load_checkpoint, pretrain, save_checkpoint, train, EncoderConfig, MaskingSetup, ModelParams, PretrainConfig,
    TrainConfig,
};
use spanmask::synthgen::{generate_domain, make_shift_pair, presets, DomainSpec};

use crate::settings::Settings;
use crate::{Command, Common, PairKind, TestKind};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::BuildVocab(a) => build_vocab_cmd(a),
        Command::BuildFreqList(a) => build_freq_list(a),
        Command::Pretrain(a) => pretrain_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::BinEval(a) => bin_eval(a),
        Command::CompareSeeds(a) => compare_seeds(a),
        Command::AnalyzeCoverage(a) => analyze_coverage(a),
        Command::AnalyzeScatter(a) => analyze_scatter(a),
    }
}

fn out_dir(common: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(&common.out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load(path: &Path) -> Result<AnnotatedCorpus> {
    load_corpus(path).with_context(|| format!("loading {}", path.display()))
}

fn load_all(paths: &[PathBuf]) -> Result<AnnotatedCorpus> {
    let mut docs = Vec::new();
    for p in paths {
        docs.extend(load(p)?.documents);
    }
    Ok(AnnotatedCorpus::new(docs))
}

fn load_text(paths: &[PathBuf]) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for p in paths {
        docs.extend(load_unlabeled(p).with_context(|| format!("loading {}", p.display()))?);
    }
    Ok(docs)
}

fn load_vocab(path: &Path) -> Result<Vocab> {
    Vocab::load(path).with_context(|| format!("loading {}", path.display()))
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    ensure!((0.0..=1.0).contains(&rate), "{name} {rate} outside [0, 1]");
    Ok(())
}

fn domain_spec(name: &str) -> Result<DomainSpec> {
    if let Some(spec) = presets::by_name(name) {
        return Ok(spec);
    }
    let path = Path::new(name);
    if path.exists() {
        return DomainSpec::load(path).with_context(|| format!("loading {name}"));
    }
    bail!("{name:?} is neither a preset ({}) nor a spec file", presets::NAMES.join(", "))
}

fn reseed(spec: &mut DomainSpec, seed: Option<u64>) {
    if let Some(s) = seed {
        spec.seed = spec.seed.wrapping_add(s);
    }
}

fn gen_data(a: crate::GenData) -> Result<()> {
    let out = out_dir(&a.common)?;
    if let Some(pair) = a.pair {
        let mut source = match pair {
            PairKind::Far => presets::far_source(),
            PairKind::Near => presets::near_source(),
        };
        let mut target = presets::target();
        reseed(&mut source, a.common.seed);
        reseed(&mut target, a.common.seed);
        let p = make_shift_pair(&source, &target, a.sentences, a.target_sentences, a.unlabeled)?;
        save_corpus(&p.source.labeled, &out.join("source.jsonl"))?;
        save_corpus(&p.target.labeled, &out.join("target.jsonl"))?;
        save_unlabeled(&p.source.unlabeled, &out.join("source.unlabeled.txt"))?;
        save_unlabeled(&p.target.unlabeled, &out.join("target.unlabeled.txt"))?;
        let summary = serde_json::to_string_pretty(&p.summary)?;
        std::fs::write(out.join("shift_summary.json"), summary + "\n")?;
        println!(
            "{} source / {} target sentences; lexicon overlap {:.3}, top-100 coverage {:.3}, mean ratio gap {:+.3}",
            p.source.labeled.n_sentences(),
            p.target.labeled.n_sentences(),
            p.summary.lexicon_overlap,
            p.summary.top100_coverage,
            p.summary.mean_ratio_gap
        );
        return Ok(());
    }
    for name in &a.domain {
        let mut spec = domain_spec(name)?;
        reseed(&mut spec, a.common.seed);
        let g = generate_domain(&spec, a.sentences, a.unlabeled)?;
        save_corpus(&g.labeled, &out.join(format!("{}.jsonl", spec.name)))?;
        save_unlabeled(&g.unlabeled, &out.join(format!("{}.unlabeled.txt", spec.name)))?;
        std::fs::write(out.join(format!("{}.spec.toml", spec.name)), spec.to_toml())?;
        println!(
            "{}: {} labeled sentences, {} unlabeled",
            spec.name,
            g.labeled.n_sentences(),
            g.unlabeled.iter().map(|d| d.sentences.len()).sum::<usize>()
        );
    }
    Ok(())
}

fn build_vocab_cmd(a: crate::BuildVocab) -> Result<()> {
    ensure!(
        !a.corpus.is_empty() || !a.unlabeled.is_empty(),
        "give at least one --corpus or --unlabeled file"
    );
    let out = out_dir(&a.common)?;
    let labeled = load_all(&a.corpus)?;
    let text = load_text(&a.unlabeled)?;
    let vocab = build_vocab(labeled.documents.iter().chain(&text), a.max_size)?;
    vocab.save(&out.join("vocab.txt"))?;
    println!(
        "{} entries ({} reserved, domains: {})",
        vocab.len(),
        vocab.n_reserved(),
        vocab.domains().join(", ")
    );
    Ok(())
}

fn build_freq_list(a: crate::BuildFreqList) -> Result<()> {
    let out = out_dir(&a.common)?;
    let corpus = load_all(&a.corpus)?;
    let pooling = if a.per_domain {
        SourcePooling::PerDomainUnion
    } else {
        SourcePooling::Pooled
    };
    let list = build_frequency_list_with(&corpus, a.top_k, pooling)?;
    list.save_tsv(&out.join("freq_list.tsv"))?;
    println!("{} phrases", list.len());
    for (i, p) in list.surfaces().take(10).enumerate() {
        println!("{:>4}  {p}", i + 1);
    }
    Ok(())
}

/// Initial parameters: a checkpoint whose vocabulary size matches, or a
/// fresh model shaped by the `[encoder]` section.
fn initial_params(init: Option<&Path>, vocab: &Vocab, settings: &Settings, seed: u64) -> Result<ModelParams> {
    match init {
        Some(p) => {
            let params = load_checkpoint(p).with_context(|| format!("loading {}", p.display()))?;
            ensure!(
                params.config.vocab_size == vocab.len(),
                "checkpoint expects {} vocabulary entries, vocabulary has {}",
                params.config.vocab_size,
                vocab.len()
            );
            Ok(params)
        }
        None => {
            let cfg = settings.overlay("encoder", EncoderConfig::desk(vocab.len()))?;
            ensure!(cfg.vocab_size == vocab.len(), "[encoder] vocab_size is taken from the vocabulary");
            Ok(ModelParams::init(&cfg, seed)?)
        }
    }
}

fn pretrain_cmd(a: crate::Pretrain) -> Result<()> {
    let settings = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&a.common)?;
    let vocab = load_vocab(&a.vocab)?;
    let docs = load_text(&a.unlabeled)?;
    let mut cfg = settings.overlay("pretrain", PretrainConfig::default())?;
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.chunk_len {
        cfg.chunk_len = v;
    }
    if let Some(v) = a.mlm_rate {
        cfg.mlm_rate = v;
    }
    if let Some(v) = a.lr {
        cfg.adam.lr = v;
    }
    if let Some(v) = a.common.seed {
        cfg.seed = v;
    }
    check_rate("MLM rate", cfg.mlm_rate)?;
    let mut params = initial_params(a.init.as_deref(), &vocab, &settings, cfg.seed)?;
    let metrics = pretrain(&docs, &vocab, &mut params, &cfg)?;
    for m in &metrics {
        println!(
            "epoch {:>3}  L_MLM {:.4}  per masked token {:.4}",
            m.epoch,
            m.loss,
            m.loss / m.masked_tokens.max(1) as f64
        );
    }
    save_checkpoint(&params, &out.join("pretrained.ckpt"))?;
    save_mlm_metrics(&metrics, &out.join("mlm_metrics.csv"))?;
    Ok(())
}

fn train_cmd(a: crate::Train) -> Result<()> {
    let settings = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&a.common)?;
    let vocab = load_vocab(&a.vocab)?;
    let mut corpus = load_all(&a.corpus)?;
    vocab.index(&mut corpus);
    let mut cfg = settings.overlay("train", TrainConfig::default())?;
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.adam.lr = v;
    }
    if let Some(v) = a.common.seed {
        cfg.seed = v;
    }
    let phrases = a
        .freq_list
        .as_deref()
        .map(|p| PhraseList::load_tsv(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let rate = a.mask_rate.unwrap_or(DEFAULT_MASK_RATE);
    check_rate("mask rate", rate)?;
    let masking = phrases.as_ref().map(|phrases| MaskingSetup { phrases, rate });
    let mut params = initial_params(a.init.as_deref(), &vocab, &settings, cfg.seed)?;
    let metrics = train(&corpus, &mut params, &cfg, masking)?;
    for m in &metrics {
        println!(
            "epoch {:>3}  L_Joint {:.4}  (entity {:.4}, relation {:.4})  masked {}",
            m.epoch,
            m.loss.joint(),
            m.loss.entity,
            m.loss.relation,
            m.masked_tokens
        );
    }
    save_checkpoint(&params, &out.join("model.ckpt"))?;
    save_train_metrics(&metrics, &out.join("train_metrics.csv"))?;
    Ok(())
}

fn predict(a: crate::Predict) -> Result<()> {
    let settings = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&a.common)?;
    let vocab = load_vocab(&a.vocab)?;
    let params = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    ensure!(
        params.config.vocab_size == vocab.len(),
        "model expects {} vocabulary entries, vocabulary has {}",
        params.config.vocab_size,
        vocab.len()
    );
    let mut corpus = load(&a.input)?;
    vocab.index(&mut corpus);
    let mut cfg = settings.overlay("decode", DecodeConfig::default())?;
    if let Some(t) = a.relation_threshold {
        cfg.relation_threshold = t;
    }
    check_rate("relation threshold", cfg.relation_threshold)?;
    let pred = predict_corpus(&params, &corpus, &cfg)?;
    save_corpus(&pred, &out.join("predictions.jsonl"))?;
    let (ents, rels) = pred.sentences().fold((0, 0), |(e, r), (_, s)| {
        (e + s.gold_entities().len(), r + s.gold_relations().len())
    });
    println!("{} sentences, {ents} entities, {rels} relations", pred.n_sentences());
    Ok(())
}

fn print_report(report: &ScoreReport) {
    println!("{:<16}{:>6}{:>8}{:>8}{:>8}", "type", "NT", "P", "R", "F1");
    for r in &report.rows {
        let label = match &r.bin {
            Some(b) => format!("{} {b}", r.kind),
            None => r.kind.clone(),
        };
        println!(
            "{label:<16}{:>6}{:>8.1}{:>8.1}{:>8.1}",
            r.nt,
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1
        );
    }
}

fn evaluate(a: crate::Evaluate) -> Result<()> {
    let out = out_dir(&a.common)?;
    let gold = load(&a.gold)?;
    let pred = load(&a.pred)?;
    let report = ScoreReport::from_counts(&score_all(&gold, &pred)?, a.common.seed);
    write_reports_csv(std::slice::from_ref(&report), create(&out.join("report.csv"))?)?;
    print_report(&report);
    Ok(())
}

fn bin_eval(a: crate::BinEval) -> Result<()> {
    let out = out_dir(&a.common)?;
    let gold = load(&a.gold)?;
    let pred = load(&a.pred)?;
    let phrases = PhraseList::load_tsv(&a.freq_list).with_context(|| format!("loading {}", a.freq_list.display()))?;
    let bins = binned_eval(&gold, &pred, &phrases, &default_bins())?;
    let report = ScoreReport::from_bins(&bins, a.common.seed);
    write_reports_csv(std::slice::from_ref(&report), create(&out.join("bins.csv"))?)?;
    print_report(&report);
    Ok(())
}

/// Every `report.csv` below `dir`, in path order.
fn collect_reports(dir: &Path) -> Result<Vec<ScoreReport>> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, found)?;
            } else if p.file_name().is_some_and(|n| n == "report.csv") {
                found.push(p);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    ensure!(!files.is_empty(), "no report.csv under {}", dir.display());
    let mut reports = Vec::new();
    for f in files {
        reports.extend(read_reports_csv(File::open(&f)?).with_context(|| format!("reading {}", f.display()))?);
    }
    Ok(reports)
}

fn compare_seeds(a: crate::CompareSeeds) -> Result<()> {
    let out = out_dir(&a.common)?;
    let ra = collect_reports(&a.a)?;
    let rb = collect_reports(&a.b)?;
    let kind = match a.test {
        TestKind::Welch => TTestKind::Welch,
        TestKind::Pooled => TTestKind::Pooled,
    };
    let cmp = compare_reports(&ra, &rb, &a.metric, kind)?;
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (na, nb) = (name(&a.a), name(&a.b));
    print!("{}", format_comparison_table((&na, &ra), &[(&nb, &rb)], kind)?);
    println!(
        "{}: {na} {:.4} (n={}) vs {nb} {:.4} (n={}); t = {:.4}, df = {:.2}, p = {:.4}{}",
        cmp.metric,
        cmp.mean_a,
        ra.len(),
        cmp.mean_b,
        rb.len(),
        cmp.test.t,
        cmp.test.df,
        cmp.test.p,
        if cmp.marker.is_empty() { String::new() } else { format!(" {}", cmp.marker) }
    );
    let json = serde_json::to_string_pretty(&cmp)?;
    std::fs::write(out.join("comparison.json"), json + "\n")?;
    Ok(())
}

fn analyze_coverage(a: crate::AnalyzeCoverage) -> Result<()> {
    let out = out_dir(&a.common)?;
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    let points = trigger_coverage(&source, &target, a.top_n)?;
    write_coverage_csv(&points, create(&out.join("coverage.csv"))?)?;
    save_text(&coverage_svg(&points), &out.join("coverage.svg"))?;
    if let Some(last) = points.last() {
        println!(
            "top {} source phrases cover {:.1}% of source and {:.1}% of target triggers",
            last.rank,
            100.0 * last.source,
            100.0 * last.target
        );
    }
    Ok(())
}

fn analyze_scatter(a: crate::AnalyzeScatter) -> Result<()> {
    let out = out_dir(&a.common)?;
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    let baseline = load(&a.baseline)?;
    let masked = load(&a.masked)?;
    let changes = fn_change(&target, &baseline, &masked, a.top_n)?;
    let rows = scatter_data(&source, &target, &changes);
    write_scatter_csv(&rows, create(&out.join("scatter.csv"))?)?;
    save_text(&scatter_svg(&rows), &out.join("scatter.svg"))?;
    let s = ScatterSummary::of(&rows);
    match s.fraction_above() {
        Some(f) => println!(
            "{} phrases with fewer false negatives, {} above the diagonal ({:.0}%)",
            s.reduced,
            s.reduced_above,
            100.0 * f
        ),
        None => println!("no phrase seen in the source has fewer false negatives"),
    }
    Ok(())
}
