//! Graded training pairs from the label hierarchy.
//!
//! Each labeled record yields its positive pair `(text, gold definition,
//! 1.0)` plus `n_neg` pairs against other leaves drawn uniformly without
//! replacement. A sampled leaf scores `2k` when it shares the gold leaf's
//! first child node, `k` when it shares only the root, and `0` otherwise.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::TermRecord;
use crate::error::{Error, Result};
use crate::taxonomy::LabelTaxonomy;

pub const DEFAULT_K: f64 = 0.4;
pub const DEFAULT_NEG_PER_TERM: usize = 10;
pub const DEFAULT_ZERO_KEEP: usize = 550;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub text_a: String,
    pub text_b: String,
    pub score: f64,
    pub origin_id: String,
}

/// Hierarchy proximity between a gold leaf and a sampled leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Proximity {
    Disjoint,
    SameRoot,
    SameFirstChild,
}

impl Proximity {
    pub fn between(tax: &LabelTaxonomy, gold: &str, other: &str) -> Result<Self> {
        Ok(if tax.first_child_of(other)? == tax.first_child_of(gold)? {
            Proximity::SameFirstChild
        } else if tax.root_of(other)? == tax.root_of(gold)? {
            Proximity::SameRoot
        } else {
            Proximity::Disjoint
        })
    }

    pub fn score(self, k: f64) -> f64 {
        match self {
            Proximity::SameFirstChild => 2.0 * k,
            Proximity::SameRoot => k,
            Proximity::Disjoint => 0.0,
        }
    }
}

/// Generates `(n_neg + 1) * records.len()` pairs. Record `i` draws from its
/// own ChaCha stream, so output is independent of thread scheduling and of
/// `k`.
pub fn generate_pairs(
    records: &[TermRecord],
    tax: &LabelTaxonomy,
    k: f64,
    n_neg: usize,
    seed: u64,
) -> Result<Vec<ScoredPair>> {
    if n_neg + 1 > tax.len() {
        return Err(Error::invalid(format!(
            "{n_neg} negatives requested but only {} other labels exist",
            tax.len().saturating_sub(1)
        )));
    }
    if !k.is_finite() || !(0.0..=0.5).contains(&k) {
        return Err(Error::invalid(format!("k = {k} must lie in [0, 0.5]")));
    }
    let labels: Vec<&str> = tax.labels().collect();
    let per_record: Vec<Vec<ScoredPair>> = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let gold = rec
                .label
                .as_deref()
                .ok_or_else(|| Error::invalid(format!("record `{}` has no label", rec.origin_id)))?;
            let gold_def = tax.definition(gold)?;
            let others: Vec<&str> = labels.iter().copied().filter(|l| *l != gold).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut out = Vec::with_capacity(n_neg + 1);
            out.push(ScoredPair {
                text_a: rec.text.clone(),
                text_b: gold_def.to_string(),
                score: 1.0,
                origin_id: rec.origin_id.clone(),
            });
            for idx in sample(&mut rng, others.len(), n_neg) {
                let other = others[idx];
                out.push(ScoredPair {
                    text_a: rec.text.clone(),
                    text_b: tax.definition(other)?.to_string(),
                    score: Proximity::between(tax, gold, other)?.score(k),
                    origin_id: rec.origin_id.clone(),
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

/// How many zero-score pairs survive subsampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroKeep {
    Count(usize),
    /// Fraction of the zero-score pairs, rounded to the nearest count.
    Ratio(f64),
}

/// Keeps every nonzero pair and a seeded uniform sample of the zero-score
/// pairs, preserving input order.
pub fn subsample_zeros(pairs: Vec<ScoredPair>, keep: ZeroKeep, seed: u64) -> Vec<ScoredPair> {
    let zeros: Vec<usize> = pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.score == 0.0)
        .map(|(i, _)| i)
        .collect();
    let keep = match keep {
        ZeroKeep::Count(n) => n,
        ZeroKeep::Ratio(r) => (r.clamp(0.0, 1.0) * zeros.len() as f64).round() as usize,
    };
    if keep >= zeros.len() {
        return pairs;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained = vec![false; pairs.len()];
    for j in sample(&mut rng, zeros.len(), keep) {
        retained[zeros[j]] = true;
    }
    pairs
        .into_iter()
        .enumerate()
        .filter(|(i, p)| p.score != 0.0 || retained[*i])
        .map(|(_, p)| p)
        .collect()
}

fn check_field(field: &str, what: &str) -> Result<()> {
    if field.contains(['\t', '\n']) {
        return Err(Error::invalid(format!("{what} contains a tab or newline: `{field}`")));
    }
    Ok(())
}

/// TSV `text_a<TAB>text_b<TAB>score<TAB>origin_id`, scores with 6 decimals.
pub fn write_pairs_tsv<W: Write>(mut w: W, pairs: &[ScoredPair]) -> Result<()> {
    for p in pairs {
        check_field(&p.text_a, "text_a")?;
        check_field(&p.text_b, "text_b")?;
        check_field(&p.origin_id, "origin_id")?;
        writeln!(w, "{}\t{}\t{:.6}\t{}", p.text_a, p.text_b, p.score, p.origin_id)
            .map_err(|e| Error::io("<pairs>", e))?;
    }
    Ok(())
}

pub fn save_pairs(path: impl AsRef<Path>, pairs: &[ScoredPair]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_pairs_tsv(&mut w, pairs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs_tsv<R: BufRead>(reader: R, context: &str) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(context, line_no, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [a, b, score, origin] = fields.as_slice() else {
            return Err(Error::parse(
                context,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let score: f64 = score
            .parse()
            .map_err(|_| Error::parse(context, line_no, format!("bad score `{score}`")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(context, line_no, format!("score {score} outside [0, 1]")));
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::parse(context, line_no, "empty text"));
        }
        out.push(ScoredPair {
            text_a: a.to_string(),
            text_b: b.to_string(),
            score,
            origin_id: origin.to_string(),
        });
    }
    Ok(out)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<ScoredPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_tsv(BufReader::new(file), &path.display().to_string())
}
