use serde::{Deserialize, Serialize};

use super::{micro_f1, Counts, Prf};
use crate::corpus::AnnotatedCorpus;
use crate::error::{Error, Result};
use crate::masking::PhraseList;
use crate::schema::Entity;

/// Half-open interval of phrase-list ranks, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: usize,
    pub hi: usize,
}

impl Bin {
    pub fn label(&self) -> String {
        format!("{}-{}", self.lo, self.hi)
    }

    pub fn contains(&self, rank: usize) -> bool {
        (self.lo..self.hi).contains(&rank)
    }
}

/// Ranks 0-20, 20-40, 40-60, 60-80 and 80-100.
pub fn default_bins() -> Vec<Bin> {
    (0..5).map(|i| Bin { lo: 20 * i, hi: 20 * (i + 1) }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub bin: Bin,
    pub counts: Counts,
    pub scores: Prf,
}

/// Trigger scores restricted, bin by bin, to gold and predicted triggers
/// whose surface has a phrase-list rank inside the bin.
pub fn binned_eval(
    gold: &AnnotatedCorpus,
    pred: &AnnotatedCorpus,
    phrases: &PhraseList,
    bins: &[Bin],
) -> Result<Vec<BinReport>> {
    if phrases.is_empty() {
        return Err(Error::Config("binned evaluation needs a non-empty phrase list".into()));
    }
    gold.check_aligned(pred)?;
    let mut counts = vec![Counts::default(); bins.len()];
    for ((_, gs), (_, ps)) in gold.sentences().zip(pred.sentences()) {
        let ranked = |ents: &[Entity]| -> Vec<(usize, crate::schema::Span)> {
            ents.iter()
                .filter(|e| e.kind.is_trigger())
                .filter_map(|e| phrases.rank(&gs.span_text(e.span)).map(|r| (r, e.span)))
                .collect()
        };
        let g = ranked(gs.gold_entities());
        let p = ranked(ps.gold_entities());
        for (b, bin) in bins.iter().enumerate() {
            let gb: Vec<_> = g.iter().filter(|x| bin.contains(x.0)).map(|x| x.1).collect();
            let mut pb: Vec<_> = p.iter().filter(|x| bin.contains(x.0)).map(|x| x.1).collect();
            let mut tp = 0;
            for s in &gb {
                if let Some(i) = pb.iter().position(|q| q == s) {
                    pb.swap_remove(i);
                    tp += 1;
                }
            }
            counts[b].add(Counts {
                tp,
                fp: pb.len() as u64,
                fn_: gb.len() as u64 - tp,
            });
        }
    }
    Ok(bins
        .iter()
        .zip(counts)
        .map(|(bin, c)| BinReport {
            bin: *bin,
            counts: c,
            scores: micro_f1(c),
        })
        .collect())
}
