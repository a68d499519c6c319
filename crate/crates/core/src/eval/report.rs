use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::binned::BinReport;
use super::scoring::ScoreCounts;
use super::stats::{significance_marker, t_test, TTest, TTestKind};
use super::{micro_f1, Counts};
use crate::error::{Error, Result};
use crate::schema::EntityType;

/// One CSV row: `type,NT,P,R,F1,bin,seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "NT")]
    pub nt: u64,
    #[serde(rename = "P")]
    pub precision: f64,
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub bin: Option<String>,
    pub seed: Option<u64>,
}

impl ReportRow {
    fn new(kind: &str, c: Counts, bin: Option<String>, seed: Option<u64>) -> Self {
        let m = micro_f1(c);
        ReportRow {
            kind: kind.to_string(),
            nt: c.nt(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            bin,
            seed,
        }
    }
}

/// Precision, recall and F1 per entity type plus an `Overall` row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ReportRow>,
}

/// Metric prefix of a row type: `trigger` for `SSx`, lowercase otherwise.
fn metric_key(kind: &str) -> String {
    if kind == EntityType::Trigger.name() {
        "trigger".into()
    } else {
        kind.to_lowercase()
    }
}

impl ScoreReport {
    pub fn from_counts(counts: &ScoreCounts, seed: Option<u64>) -> Self {
        let mut rows: Vec<ReportRow> = EntityType::ALL
            .iter()
            .map(|k| ReportRow::new(k.name(), counts.get(*k), None, seed))
            .collect();
        rows.push(ReportRow::new("Overall", counts.overall(), None, seed));
        ScoreReport { rows }
    }

    pub fn from_bins(bins: &[BinReport], seed: Option<u64>) -> Self {
        ScoreReport {
            rows: bins
                .iter()
                .map(|b| ReportRow::new(EntityType::Trigger.name(), b.counts, Some(b.bin.label()), seed))
                .collect(),
        }
    }

    /// Looks up `<type>_<p|r|f1|nt>`, e.g. `trigger_f1` or `assertion_r`,
    /// among rows without a bin.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let (kind, stat) = name.rsplit_once('_')?;
        let row = self.rows.iter().find(|r| r.bin.is_none() && metric_key(&r.kind) == kind)?;
        match stat {
            "p" => Some(row.precision),
            "r" => Some(row.recall),
            "f1" => Some(row.f1),
            "nt" => Some(row.nt as f64),
            _ => None,
        }
    }

    pub fn row(&self, kind: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.kind == kind && r.bin.is_none())
    }
}

pub fn write_reports_csv<W: Write>(reports: &[ScoreReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["type", "NT", "P", "R", "F1", "bin", "seed"])?;
    for r in reports.iter().flat_map(|r| &r.rows) {
        out.write_record([
            r.kind.clone(),
            r.nt.to_string(),
            format!("{:.6}", r.precision),
            format!("{:.6}", r.recall),
            format!("{:.6}", r.f1),
            r.bin.clone().unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads rows written by [`write_reports_csv`]; rows are grouped into one
/// report per seed in order of first appearance.
pub fn read_reports_csv<R: Read>(r: R) -> Result<Vec<ScoreReport>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out: Vec<(Option<u64>, ScoreReport)> = Vec::new();
    for row in reader.deserialize() {
        let row: ReportRow = row?;
        match out.iter_mut().find(|(s, _)| *s == row.seed) {
            Some((_, rep)) => rep.rows.push(row),
            None => out.push((row.seed, ScoreReport { rows: vec![row] })),
        }
    }
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: TTest,
    pub marker: &'static str,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn metric_values(reports: &[ScoreReport], metric: &str) -> Result<Vec<f64>> {
    reports
        .iter()
        .map(|r| r.metric(metric).ok_or_else(|| Error::Config(format!("unknown metric {metric:?}"))))
        .collect()
}

/// Significance of the difference in `metric` between two seed sets.
pub fn compare_reports(a: &[ScoreReport], b: &[ScoreReport], metric: &str, kind: TTestKind) -> Result<Comparison> {
    let va = metric_values(a, metric)?;
    let vb = metric_values(b, metric)?;
    let test = t_test(&va, &vb, kind)?;
    Ok(Comparison {
        metric: metric.to_string(),
        mean_a: mean(&va),
        mean_b: mean(&vb),
        test,
        marker: significance_marker(test.p),
    })
}

/// Entity types as rows; the baseline and each method as columns of mean
/// `F1 (R)` in percent, with stars marking significant differences from
/// the baseline.
pub fn format_comparison_table(
    baseline: (&str, &[ScoreReport]),
    methods: &[(&str, &[ScoreReport])],
    kind: TTestKind,
) -> Result<String> {
    let mut kinds: Vec<String> = EntityType::ALL.iter().map(|k| k.name().to_string()).collect();
    kinds.push("Overall".into());
    let width = 16;
    let mut s = String::new();
    write!(s, "{:<16}{:>6}  {:>w$}", "Type", "NT", baseline.0, w = width).unwrap();
    for (name, _) in methods {
        write!(s, "{:>w$}", name, w = width).unwrap();
    }
    s.push('\n');
    for k in kinds {
        let key = metric_key(&k);
        let nt = baseline.1.first().and_then(|r| r.metric(&format!("{key}_nt"))).unwrap_or(0.0);
        let cell = |reps: &[ScoreReport]| -> Result<(f64, f64)> {
            Ok((
                100.0 * mean(&metric_values(reps, &format!("{key}_f1"))?),
                100.0 * mean(&metric_values(reps, &format!("{key}_r"))?),
            ))
        };
        let (bf, br) = cell(baseline.1)?;
        write!(s, "{:<16}{:>6}  {:>w$}", k, nt as u64, format!("{bf:.1} ({br:.1})"), w = width).unwrap();
        for (_, reps) in methods {
            let (f, r) = cell(reps)?;
            let marker = if baseline.1.len() >= 2 && reps.len() >= 2 {
                compare_reports(reps, baseline.1, &format!("{key}_f1"), kind)?.marker
            } else {
                ""
            };
            write!(s, "{:>w$}", format!("{f:.1}{marker} ({r:.1})"), w = width).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}
