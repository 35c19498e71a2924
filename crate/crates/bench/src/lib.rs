//! Fixture builders shared by the benches.

use hyperank::taxonomy::load_taxonomy;
use hyperank::{LabelTaxonomy, RankedList, TermRecord};

pub const HIERARCHY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/finsim3/hierarchy.json");

pub fn finsim_taxonomy() -> LabelTaxonomy {
    load_taxonomy(HIERARCHY).expect("shipped hierarchy loads")
}

/// `n` labeled terms cycling through the taxonomy leaves.
pub fn records(n: usize, tax: &LabelTaxonomy) -> Vec<TermRecord> {
    let labels: Vec<&str> = tax.labels().collect();
    (0..n)
        .map(|i| {
            let label = labels[i % labels.len()];
            let term = format!("{} instrument series {i}", label.to_lowercase());
            TermRecord::original(format!("t{i:05}"), term, Some(label.to_string()))
        })
        .collect()
}

/// Ranked lists with the gold label rotated through every position.
pub fn ranked(records: &[TermRecord], tax: &LabelTaxonomy) -> Vec<RankedList> {
    let labels: Vec<String> = tax.labels().map(str::to_string).collect();
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut l = labels.clone();
            l.rotate_left(i % labels.len());
            RankedList {
                origin_id: r.origin_id.clone(),
                term: r.term.clone(),
                labels: l,
            }
        })
        .collect()
}
