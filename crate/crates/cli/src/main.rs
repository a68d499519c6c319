//! `spanmask` command-line interface.
//!
//! Exit codes: 0 on success, 1 for bad arguments or unreadable input, 2 when
//! input data violates an annotation invariant.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "spanmask", version, about = "Cross-domain symptom event extraction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Directory for machine-readable outputs; created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// TOML file with [encoder], [train], [pretrain] and [decode] overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw of the command.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic annotated and unlabeled corpora.
    GenData(GenData),
    /// Build a word vocabulary from corpora and unlabeled text.
    BuildVocab(BuildVocab),
    /// Rank the most frequent single-token source triggers.
    BuildFreqList(BuildFreqList),
    /// Adaptive masked-language-model pretraining on unlabeled text.
    Pretrain(Pretrain),
    /// Train the extractor, optionally with dynamic trigger masking.
    Train(Train),
    /// Predict entities and relations for a corpus.
    Predict(Predict),
    /// Score predictions against gold annotations.
    Evaluate(Evaluate),
    /// Trigger scores binned by source frequency rank.
    BinEval(BinEval),
    /// Welch t-test between two sets of per-seed reports.
    CompareSeeds(CompareSeeds),
    /// Cumulative trigger coverage of the source's frequent phrases.
    AnalyzeCoverage(AnalyzeCoverage),
    /// Positive-class ratios against false-negative change per phrase.
    AnalyzeScatter(AnalyzeScatter),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Far,
    Near,
}

#[derive(Args, Debug)]
pub struct GenData {
    /// Domain preset name or spec TOML file; repeatable.
    #[arg(long, conflicts_with = "pair", required_unless_present = "pair")]
    pub domain: Vec<String>,
    /// Generate a source/target shift pair instead of single domains.
    #[arg(long, value_enum)]
    pub pair: Option<PairKind>,
    /// Labeled sentences per domain (source side of a pair).
    #[arg(long, default_value_t = 500)]
    pub sentences: usize,
    /// Labeled target sentences of a pair.
    #[arg(long, default_value_t = 300)]
    pub target_sentences: usize,
    /// Unlabeled sentences per domain.
    #[arg(long, default_value_t = 1000)]
    pub unlabeled: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BuildVocab {
    /// Annotated JSON-lines corpus; repeatable.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Unlabeled text file; repeatable.
    #[arg(long)]
    pub unlabeled: Vec<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub max_size: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BuildFreqList {
    /// Source training corpus; repeatable.
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, default_value_t = spanmask::masking::DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Union of per-domain lists instead of one pooled list.
    #[arg(long)]
    pub per_domain: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Pretrain {
    /// Unlabeled text file; repeatable.
    #[arg(long, required = true)]
    pub unlabeled: Vec<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Checkpoint to continue from instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub chunk_len: Option<usize>,
    #[arg(long)]
    pub mlm_rate: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Train {
    /// Annotated training corpus; repeatable.
    #[arg(long = "train", required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Pretrained checkpoint to fine-tune.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Frequent trigger list; enables dynamic masking.
    #[arg(long)]
    pub freq_list: Option<PathBuf>,
    /// Masking probability for listed words.
    #[arg(long, requires = "freq_list")]
    pub mask_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Predict {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Corpus to annotate; existing annotations are ignored.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub relation_threshold: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Evaluate {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BinEval {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub freq_list: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Welch,
    Pooled,
}

#[derive(Args, Debug)]
pub struct CompareSeeds {
    /// Directory holding `report.csv` files of the first run set.
    pub a: PathBuf,
    /// Directory holding `report.csv` files of the second run set.
    pub b: PathBuf,
    /// Metric such as `trigger_f1`, `assertion_r` or `overall_p`.
    #[arg(long, default_value = "trigger_f1")]
    pub metric: String,
    #[arg(long, value_enum, default_value_t = TestKind::Welch)]
    pub test: TestKind,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct AnalyzeCoverage {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub top_n: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct AnalyzeScatter {
    #[arg(long)]
    pub source: PathBuf,
    /// Gold target corpus.
    #[arg(long)]
    pub target: PathBuf,
    /// Target predictions of the unmasked model.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Target predictions of the masked model.
    #[arg(long)]
    pub masked: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub top_n: usize,
    #[command(flatten)]
    pub common: Common,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let invariant = err
        .chain()
        .filter_map(|e| e.downcast_ref::<spanmask::Error>())
        .any(spanmask::Error::is_invariant_violation);
    if invariant {
        2
    } else {
        1
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("SPANMASK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow::anyhow!("SPANMASK_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match configure_threads().and_then(|_| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
