use std::collections::HashMap;

use super::preprocess::preprocess;
use super::record::{distinct_origins, Source, TermRecord};

/// Appends a record for every glossary entry whose preprocessed term equals
/// a labeled term's preprocessed form.
pub fn merge_glossaries(records: Vec<TermRecord>, glossary: &[(String, String)], source: Source) -> Vec<TermRecord> {
    let mut index: HashMap<String, Vec<&str>> = HashMap::new();
    for (term, definition) in glossary {
        let key = preprocess(term);
        if key.is_empty() || definition.trim().is_empty() {
            continue;
        }
        index.entry(key).or_default().push(definition.trim());
    }
    let added: Vec<TermRecord> = distinct_origins(&records)
        .into_iter()
        .filter(|r| r.label.is_some())
        .flat_map(|rec| {
            index
                .get(&preprocess(&rec.term))
                .into_iter()
                .flatten()
                .map(|def| rec.variant(*def, source))
        })
        .collect();
    let mut records = records;
    records.extend(added);
    records
}

/// Ingests external `(term, label)` rows as new original-like terms tagged
/// `external`. Origin ids continue as `x00000`, `x00001`, ...
pub fn merge_external(records: Vec<TermRecord>, rows: &[(String, String)]) -> Vec<TermRecord> {
    let mut records = records;
    records.extend(
        rows.iter()
            .enumerate()
            .filter(|(_, (t, _))| !t.trim().is_empty())
            .map(|(i, (term, label))| {
                let mut r = TermRecord::original(format!("x{i:05}"), term.trim(), Some(label.trim().to_string()));
                r.source = Source::External;
                r
            }),
    );
    records
}
