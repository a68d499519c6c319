//! Scoring rules, frequency-binned evaluation and seed-set significance.
//!
//! Triggers match on exact span. Labeled arguments (`Assertion`, `Change`,
//! `Severity`) match on span, subtype and the span of the trigger they are
//! linked to. Span-only arguments earn token-level credit against gold
//! spans of the same type linked to the same trigger span.

mod binned;
mod report;
mod scoring;
mod stats;

pub use binned::{binned_eval, default_bins, Bin, BinReport};
pub use report::{
    compare_reports, format_comparison_table, read_reports_csv, write_reports_csv, Comparison, ReportRow,
    ScoreReport,
};
pub use scoring::{
    score_all, score_labeled_args, score_sentence, score_span_only_args, score_triggers, ScoreCounts,
};
pub use stats::{significance_marker, t_test, welch_t_test, TTest, TTestKind};

use serde::{Deserialize, Serialize};

/// True positives, false positives and false negatives. Span-only types
/// count tokens; everything else counts entities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    /// Gold total.
    pub fn nt(&self) -> u64 {
        self.tp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Precision, recall and F1 from pooled counts; each is 0 when its
/// denominator is 0.
pub fn micro_f1(c: Counts) -> Prf {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}
