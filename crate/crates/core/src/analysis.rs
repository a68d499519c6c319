//! Source/target discrepancy diagnostics: trigger coverage curves, positive
//! class ratios of trigger phrases, and per-phrase false-negative changes.
//!
//! CSV columns:
//!
//! - coverage: `rank,phrase,source_coverage,target_coverage`
//! - scatter: `phrase,source_ratio,target_ratio,delta_fn,above_diagonal,class`
//!
//! A phrase that never occurs in the source has an empty `source_ratio` and
//! is never above the diagonal.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedCorpus, Sentence};
use crate::error::{Error, Result};
use crate::masking::trigger_counts;
use crate::schema::Span;

fn ranked(counts: HashMap<String, usize>) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    /// Number of top source phrases included, starting at 1.
    pub rank: usize,
    pub phrase: String,
    pub source: f64,
    pub target: f64,
}

/// Cumulative share of each corpus's trigger instances covered by the `k`
/// most frequent source trigger phrases, for `k` up to `top_n`.
pub fn trigger_coverage(source: &AnnotatedCorpus, target: &AnnotatedCorpus, top_n: usize) -> Result<Vec<CoveragePoint>> {
    let src = trigger_counts(source);
    let tgt = trigger_counts(target);
    let src_total: usize = src.values().sum();
    let tgt_total: usize = tgt.values().sum();
    if src_total == 0 || tgt_total == 0 {
        return Err(Error::EmptyCorpus("coverage needs gold triggers in both corpora".into()));
    }
    let (mut s, mut t) = (0usize, 0usize);
    Ok(ranked(src)
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, (phrase, n))| {
            s += n;
            t += tgt.get(&phrase).copied().unwrap_or(0);
            CoveragePoint {
                rank: i + 1,
                phrase,
                source: s as f64 / src_total as f64,
                target: t as f64 / tgt_total as f64,
            }
        })
        .collect())
}

/// Occurrences of a phrase and how many of them are gold triggers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseOccurrences {
    pub total: usize,
    pub positive: usize,
}

impl PhraseOccurrences {
    pub fn ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.positive as f64 / self.total as f64)
    }
}

fn phrase_matches(sentence: &Sentence, words: &[&str]) -> Vec<Span> {
    let n = words.len();
    if n == 0 || sentence.len() < n {
        return Vec::new();
    }
    (0..=sentence.len() - n)
        .filter(|&i| (0..n).all(|j| sentence.tokens[i + j].surface == words[j]))
        .map(|i| Span::new(i, i + n))
        .collect()
}

/// Surface occurrences of each phrase and the subset whose exact span is a
/// gold trigger.
pub fn phrase_occurrences(corpus: &AnnotatedCorpus, phrases: &[&str]) -> HashMap<String, PhraseOccurrences> {
    let mut out: HashMap<String, PhraseOccurrences> = HashMap::new();
    for phrase in phrases {
        let words: Vec<&str> = phrase.split_whitespace().collect();
        let occ = out.entry(phrase.to_string()).or_default();
        for (_, s) in corpus.sentences() {
            for span in phrase_matches(s, &words) {
                occ.total += 1;
                if s.gold_entities().iter().any(|e| e.kind.is_trigger() && e.span == span) {
                    occ.positive += 1;
                }
            }
        }
    }
    out
}

/// Fraction of the phrase's occurrences annotated as a trigger.
pub fn positive_class_ratio(corpus: &AnnotatedCorpus, phrase: &str) -> Result<f64> {
    phrase_occurrences(corpus, &[phrase])[phrase]
        .ratio()
        .ok_or_else(|| Error::Config(format!("phrase {phrase:?} does not occur in the corpus")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnChange {
    pub phrase: String,
    pub gold: usize,
    pub fn_baseline: usize,
    pub fn_masked: usize,
}

impl FnChange {
    pub fn delta(&self) -> i64 {
        self.fn_masked as i64 - self.fn_baseline as i64
    }
}

fn trigger_spans(s: &Sentence) -> Vec<Span> {
    s.gold_entities().iter().filter(|e| e.kind.is_trigger()).map(|e| e.span).collect()
}

/// Per-phrase trigger false negatives of `pred` against `gold`.
fn phrase_false_negatives(gold: &AnnotatedCorpus, pred: &AnnotatedCorpus) -> HashMap<String, usize> {
    let mut out = HashMap::new();
    for ((_, g), (_, p)) in gold.sentences().zip(pred.sentences()) {
        let mut avail = trigger_spans(p);
        for span in trigger_spans(g) {
            match avail.iter().position(|x| *x == span) {
                Some(i) => {
                    avail.swap_remove(i);
                }
                None => *out.entry(g.span_text(span)).or_insert(0) += 1,
            }
        }
    }
    out
}

/// False-negative change after masking for the `top_n` most frequent gold
/// trigger phrases of the test set, most frequent first.
pub fn fn_change(
    gold: &AnnotatedCorpus,
    baseline: &AnnotatedCorpus,
    masked: &AnnotatedCorpus,
    top_n: usize,
) -> Result<Vec<FnChange>> {
    gold.check_aligned(baseline)?;
    gold.check_aligned(masked)?;
    let fb = phrase_false_negatives(gold, baseline);
    let fm = phrase_false_negatives(gold, masked);
    Ok(ranked(trigger_counts(gold))
        .into_iter()
        .take(top_n)
        .map(|(phrase, n)| FnChange {
            fn_baseline: fb.get(&phrase).copied().unwrap_or(0),
            fn_masked: fm.get(&phrase).copied().unwrap_or(0),
            gold: n,
            phrase,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeClass {
    Reduced,
    NoChange,
    Increased,
}

impl ChangeClass {
    pub fn of(delta: i64) -> Self {
        match delta.signum() {
            -1 => ChangeClass::Reduced,
            0 => ChangeClass::NoChange,
            _ => ChangeClass::Increased,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChangeClass::Reduced => "reduced",
            ChangeClass::NoChange => "no_change",
            ChangeClass::Increased => "increased",
        }
    }

    fn color(self) -> &'static str {
        match self {
            ChangeClass::Reduced => "#1b7837",
            ChangeClass::NoChange => "#888888",
            ChangeClass::Increased => "#b2182b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub phrase: String,
    pub source_ratio: Option<f64>,
    pub target_ratio: f64,
    pub delta_fn: i64,
    pub above_diagonal: bool,
}

impl ScatterRow {
    pub fn class(&self) -> ChangeClass {
        ChangeClass::of(self.delta_fn)
    }
}

/// Joins each phrase's positive class ratios in both corpora with its
/// false-negative change. Phrases absent from the target are dropped.
pub fn scatter_data(source: &AnnotatedCorpus, target: &AnnotatedCorpus, changes: &[FnChange]) -> Vec<ScatterRow> {
    let phrases: Vec<&str> = changes.iter().map(|c| c.phrase.as_str()).collect();
    let src = phrase_occurrences(source, &phrases);
    let tgt = phrase_occurrences(target, &phrases);
    changes
        .iter()
        .filter_map(|c| {
            let target_ratio = tgt[&c.phrase].ratio()?;
            let source_ratio = src[&c.phrase].ratio();
            Some(ScatterRow {
                phrase: c.phrase.clone(),
                source_ratio,
                target_ratio,
                delta_fn: c.delta(),
                above_diagonal: source_ratio.is_some_and(|s| target_ratio > s),
            })
        })
        .collect()
}

/// How many phrases with fewer false negatives lie above the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterSummary {
    pub reduced: usize,
    pub reduced_above: usize,
}

impl ScatterSummary {
    pub fn of(rows: &[ScatterRow]) -> Self {
        let reduced: Vec<&ScatterRow> = rows
            .iter()
            .filter(|r| r.class() == ChangeClass::Reduced && r.source_ratio.is_some())
            .collect();
        ScatterSummary {
            reduced: reduced.len(),
            reduced_above: reduced.iter().filter(|r| r.above_diagonal).count(),
        }
    }

    pub fn fraction_above(&self) -> Option<f64> {
        (self.reduced > 0).then(|| self.reduced_above as f64 / self.reduced as f64)
    }
}

pub fn write_coverage_csv<W: Write>(points: &[CoveragePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "phrase", "source_coverage", "target_coverage"])?;
    for p in points {
        out.write_record([
            p.rank.to_string(),
            p.phrase.clone(),
            format!("{:.6}", p.source),
            format!("{:.6}", p.target),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_scatter_csv<W: Write>(rows: &[ScatterRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["phrase", "source_ratio", "target_ratio", "delta_fn", "above_diagonal", "class"])?;
    for r in rows {
        out.write_record([
            r.phrase.clone(),
            r.source_ratio.map(|x| format!("{x:.6}")).unwrap_or_default(),
            format!("{:.6}", r.target_ratio),
            r.delta_fn.to_string(),
            r.above_diagonal.to_string(),
            r.class().name().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn plot_x(v: f64) -> f64 {
    MARGIN + v * SIZE
}

fn plot_y(v: f64) -> f64 {
    MARGIN + (1.0 - v) * SIZE
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_frame(out: &mut String, x_label: &str, y_label: &str) {
    let full = SIZE + 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(out, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{v:.2}</text>"#, plot_x(v), MARGIN + SIZE + 15.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.2}</text>"#, MARGIN - 5.0, plot_y(v) + 3.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{x_label}</text>"#, MARGIN + SIZE / 2.0, full - 10.0);
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.1})">{y_label}</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
}

/// Scatter of target against source positive class ratio. Point area is
/// proportional to the absolute false-negative change; color encodes its
/// sign. Phrases without a source ratio are omitted.
pub fn scatter_svg(rows: &[ScatterRow]) -> String {
    let mut out = String::new();
    svg_frame(&mut out, "source positive class ratio", "target positive class ratio");
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"/>"#,
        plot_x(0.0),
        plot_y(0.0),
        plot_x(1.0),
        plot_y(1.0)
    );
    for r in rows {
        let Some(s) = r.source_ratio else { continue };
        let radius = 2.0 + 2.0 * (r.delta_fn.unsigned_abs() as f64).sqrt();
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{radius:.2}" fill="{}" fill-opacity="0.6"><title>{} ({})</title></circle>"#,
            plot_x(s),
            plot_y(r.target_ratio),
            r.class().color(),
            xml_escape(&r.phrase),
            r.delta_fn
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Both coverage curves against rank.
pub fn coverage_svg(points: &[CoveragePoint]) -> String {
    let mut out = String::new();
    svg_frame(&mut out, "top-k source phrases (fraction of k max)", "cumulative coverage");
    let n = points.len().max(1) as f64;
    for (target, color) in [(false, "#2166ac"), (true, "#b2182b")] {
        let pts: Vec<String> = points
            .iter()
            .map(|p| {
                let v = if target { p.target } else { p.source };
                format!("{:.2},{:.2}", plot_x(p.rank as f64 / n), plot_y(v))
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, pts.join(" "));
    }
    out.push_str("</svg>\n");
    out
}

pub fn save_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
