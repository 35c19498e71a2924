//! Accuracy and Mean Rank with a rank cutoff, plus the per-label breakdown.
//!
//! A gold label found at 1-based position `p <= cutoff` scores rank `p`;
//! anything deeper (or absent) scores `cutoff + 1`.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranker::RankedList;
use crate::taxonomy::LabelTaxonomy;

pub const DEFAULT_CUTOFF: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub root: String,
    pub label: String,
    pub mean_rank: f64,
    pub accuracy: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub mean_rank: f64,
    pub n: usize,
    pub cutoff: usize,
    pub per_label: Vec<LabelRow>,
}

/// Cut-off rank of `gold` within `labels`.
pub fn cutoff_rank(labels: &[String], gold: &str, cutoff: usize) -> usize {
    labels
        .iter()
        .take(cutoff)
        .position(|l| l == gold)
        .map_or(cutoff + 1, |p| p + 1)
}

/// `(gold label, cut-off rank)` per ranked term, validated.
fn term_ranks<'a>(
    ranked: &'a [RankedList],
    gold: &'a BTreeMap<String, String>,
    cutoff: usize,
) -> Result<Vec<(&'a str, usize)>> {
    if cutoff == 0 {
        return Err(Error::invalid("cutoff must be at least 1"));
    }
    let mut seen = HashSet::new();
    ranked
        .iter()
        .map(|r| {
            if !seen.insert(r.origin_id.as_str()) {
                return Err(Error::invalid(format!("duplicate ranked term `{}`", r.origin_id)));
            }
            let g = gold
                .get(&r.origin_id)
                .ok_or_else(|| Error::invalid(format!("no gold label for `{}`", r.origin_id)))?;
            Ok((g.as_str(), cutoff_rank(&r.labels, g, cutoff)))
        })
        .collect()
}

fn summarize(ranks: impl Iterator<Item = usize>) -> (f64, f64, usize) {
    let (mut hits, mut sum, mut n) = (0usize, 0usize, 0usize);
    for r in ranks {
        hits += usize::from(r == 1);
        sum += r;
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    (hits as f64 / n as f64, sum as f64 / n as f64, n)
}

/// Overall accuracy and mean rank. `per_label` is left empty.
pub fn evaluate(ranked: &[RankedList], gold: &BTreeMap<String, String>, cutoff: usize) -> Result<EvalReport> {
    let ranks = term_ranks(ranked, gold, cutoff)?;
    let (accuracy, mean_rank, n) = summarize(ranks.iter().map(|(_, r)| *r));
    Ok(EvalReport {
        accuracy,
        mean_rank,
        n,
        cutoff,
        per_label: Vec::new(),
    })
}

/// Metrics grouped by gold label, sorted by root then label. Labels
/// without terms are omitted.
pub fn per_label_report(
    ranked: &[RankedList],
    gold: &BTreeMap<String, String>,
    tax: &LabelTaxonomy,
    cutoff: usize,
) -> Result<Vec<LabelRow>> {
    let ranks = term_ranks(ranked, gold, cutoff)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (g, r) in ranks {
        groups.entry(g).or_default().push(r);
    }
    let mut rows = groups
        .into_iter()
        .map(|(label, rs)| {
            let (accuracy, mean_rank, support) = summarize(rs.into_iter());
            Ok(LabelRow {
                root: tax.root_of(label)?.to_string(),
                label: label.to_string(),
                mean_rank,
                accuracy,
                support,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.root.cmp(&b.root).then_with(|| a.label.cmp(&b.label)));
    Ok(rows)
}

pub fn full_report(
    ranked: &[RankedList],
    gold: &BTreeMap<String, String>,
    tax: &LabelTaxonomy,
    cutoff: usize,
) -> Result<EvalReport> {
    let mut report = evaluate(ranked, gold, cutoff)?;
    report.per_label = per_label_report(ranked, gold, tax, cutoff)?;
    Ok(report)
}

/// CSV with the columns `root,label,mean_rank,accuracy`.
pub fn write_per_label_csv<W: Write>(mut w: W, rows: &[LabelRow]) -> std::io::Result<()> {
    writeln!(w, "root,label,mean_rank,accuracy")?;
    for r in rows {
        let label = if r.label.contains([',', '"']) {
            format!("\"{}\"", r.label.replace('"', "\"\""))
        } else {
            r.label.clone()
        };
        writeln!(w, "{},{},{:.3},{:.3}", r.root, label, r.mean_rank, r.accuracy)?;
    }
    Ok(())
}
