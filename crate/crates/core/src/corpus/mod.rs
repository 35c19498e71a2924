//! Labeled term ingestion, definition augmentation and dev/val splitting.

mod acronym;
mod dbpedia;
mod glossary;
mod preprocess;
mod record;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use acronym::{detect_acronyms, drop_rule, expand_acronyms, filter_acronyms, AcronymEntry, DropRule};
pub use dbpedia::{
    label_matches, load_cached_docs, match_dbpedia, overlap_ratios, parse_lookup_response, DbpediaClient, DbpediaDoc,
    LookupOutcome, MAX_LENGTH_RATIO,
};
pub use glossary::{merge_external, merge_glossaries};
pub use preprocess::{preprocess, singularize};
pub use record::{
    distinct_origins, gold_labels, read_pairs_csv, read_records_jsonl, read_terms, read_terms_csv, read_word_list,
    write_records_jsonl, Source, TermRecord,
};

use crate::error::{Error, Result};

/// Record count per source. Every source is present, zero or not.
pub fn augmentation_report(records: &[TermRecord]) -> BTreeMap<Source, usize> {
    let mut counts: BTreeMap<Source, usize> = Source::ALL.into_iter().map(|s| (s, 0)).collect();
    for r in records {
        *counts.entry(r.source).or_default() += 1;
    }
    counts
}

/// Splits by origin id so every augmented variant of a term lands on the
/// same side. Returns `(dev, val)` with input order preserved.
pub fn split_dataset(
    records: &[TermRecord],
    dev_fraction: f64,
    seed: u64,
) -> Result<(Vec<TermRecord>, Vec<TermRecord>)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::invalid(format!("dev fraction {dev_fraction} not in (0, 1)")));
    }
    let mut ids: Vec<&str> = distinct_origins(records).iter().map(|r| r.origin_id.as_str()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = (dev_fraction * ids.len() as f64).round() as usize;
    let dev_ids: HashSet<&str> = ids[..n_dev].iter().copied().collect();
    let (dev, val) = records
        .iter()
        .cloned()
        .partition(|r| dev_ids.contains(r.origin_id.as_str()));
    Ok((dev, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(n: usize) -> Vec<TermRecord> {
        (0..n)
            .map(|i| TermRecord::original(format!("t{i:05}"), format!("term {i}"), Some("Bonds".into())))
            .collect()
    }

    #[test]
    fn report_counts() {
        let empty = augmentation_report(&[]);
        assert_eq!(empty.len(), Source::ALL.len());
        assert!(empty.values().all(|&c| c == 0));
        let three = augmentation_report(&terms(3));
        assert_eq!(three[&Source::Original], 3);
        assert_eq!(three.values().sum::<usize>(), 3);
    }

    #[test]
    fn split_sizes() {
        let recs = terms(1040);
        let (dev, val) = split_dataset(&recs, 0.8, 42).unwrap();
        assert_eq!((dev.len(), val.len()), (832, 208));
        let (dev2, _) = split_dataset(&recs, 0.8, 42).unwrap();
        assert_eq!(dev, dev2);
    }

    #[test]
    fn split_keeps_variants_together() {
        let mut recs = terms(10);
        let extra: Vec<_> = recs.iter().map(|r| r.variant("a definition", Source::Fibo)).collect();
        recs.extend(extra);
        let (dev, val) = split_dataset(&recs, 0.8, 7).unwrap();
        let dev_ids: HashSet<_> = dev.iter().map(|r| r.origin_id.clone()).collect();
        let val_ids: HashSet<_> = val.iter().map(|r| r.origin_id.clone()).collect();
        assert_eq!((dev_ids.len(), val_ids.len()), (8, 2));
        assert!(dev_ids.is_disjoint(&val_ids));
        assert_eq!(dev.len() + val.len(), recs.len());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split_dataset(&terms(3), 0.0, 1).is_err());
        assert!(split_dataset(&terms(3), 1.0, 1).is_err());
    }
}
