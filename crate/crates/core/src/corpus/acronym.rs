//! Acronym mining from prospectus text and term expansion.
//!
//! Detection pairs every parenthesized all-caps token with the shortest
//! window of preceding words whose initials contain the acronym letters in
//! order, starting with the first letter.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;

use super::record::{distinct_origins, Source, TermRecord};

/// Longest word window considered for an expansion.
pub const MAX_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AcronymEntry {
    pub acronym: String,
    pub expansion: String,
}

impl AcronymEntry {
    pub fn new(acronym: impl Into<String>, expansion: impl Into<String>) -> Self {
        AcronymEntry {
            acronym: acronym.into(),
            expansion: expansion.into(),
        }
    }
}

fn paren_acronym() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*([A-Z]{2,10})\s*\)").unwrap())
}

fn trim_word(w: &str) -> &str {
    w.trim_matches(|c: char| !c.is_alphanumeric())
}

fn initials_cover(window: &[&str], acronym: &[char]) -> bool {
    let initials: Vec<char> = window
        .iter()
        .filter_map(|w| w.chars().next())
        .flat_map(char::to_uppercase)
        .collect();
    if initials.first() != acronym.first() {
        return false;
    }
    let mut letters = acronym.iter().peekable();
    for c in initials {
        if letters.peek() == Some(&&c) {
            letters.next();
        }
    }
    letters.peek().is_none()
}

/// Scans a document for `expansion (ACR)` patterns. Each distinct
/// (acronym, expansion) pair is reported once, in order of first appearance.
pub fn detect_acronyms(document: &str) -> Vec<AcronymEntry> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for caps in paren_acronym().captures_iter(document) {
        let whole = caps.get(0).unwrap();
        let acronym = &caps[1];
        let letters: Vec<char> = acronym.chars().collect();
        let before: Vec<&str> = document[..whole.start()]
            .split_whitespace()
            .rev()
            .take(MAX_WINDOW)
            .map(trim_word)
            .take_while(|w| !w.is_empty())
            .collect();
        // `before` is nearest-first; windows grow leftwards.
        for len in 1..=before.len() {
            let window: Vec<&str> = before[..len].iter().rev().copied().collect();
            if initials_cover(&window, &letters) {
                let entry = AcronymEntry::new(acronym, window.join(" "));
                if seen.insert(entry.clone()) {
                    out.push(entry);
                }
                break;
            }
        }
    }
    out
}

/// Why an acronym entry was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropRule {
    ShorterThanAcronym,
    HasParenthesis,
    TooShort,
    EnglishWord,
}

/// Maximum expansion length (in characters) that is still rejected.
pub const MIN_EXPANSION_CHARS: usize = 5;

pub fn drop_rule(entry: &AcronymEntry, english_words: &HashSet<String>) -> Option<DropRule> {
    let exp_len = entry.expansion.chars().count();
    if exp_len < entry.acronym.chars().count() {
        Some(DropRule::ShorterThanAcronym)
    } else if entry.expansion.contains(['(', ')']) {
        Some(DropRule::HasParenthesis)
    } else if exp_len <= MIN_EXPANSION_CHARS {
        Some(DropRule::TooShort)
    } else if english_words.contains(&entry.acronym.to_lowercase()) {
        Some(DropRule::EnglishWord)
    } else {
        None
    }
}

/// Keeps entries that pass every drop rule. `english_words` is expected to
/// be case-folded and to include proper nouns.
pub fn filter_acronyms(entries: Vec<AcronymEntry>, english_words: &HashSet<String>) -> Vec<AcronymEntry> {
    entries
        .into_iter()
        .filter(|e| drop_rule(e, english_words).is_none())
        .collect()
}

/// Appends, for each distinct term containing a known acronym as a whole
/// token, one record with every such acronym replaced by its expansion.
/// When an acronym has several expansions the first one wins.
pub fn expand_acronyms(records: Vec<TermRecord>, entries: &[AcronymEntry]) -> Vec<TermRecord> {
    let mut table: HashMap<&str, &str> = HashMap::new();
    for e in entries {
        table.entry(e.acronym.as_str()).or_insert(e.expansion.as_str());
    }
    let added: Vec<TermRecord> = distinct_origins(&records)
        .into_iter()
        .filter_map(|rec| {
            let mut changed = false;
            let words: Vec<String> = rec
                .term
                .split_whitespace()
                .map(|w| {
                    let core = trim_word(w);
                    match table.get(core) {
                        Some(exp) if !core.is_empty() => {
                            changed = true;
                            w.replacen(core, exp, 1)
                        }
                        _ => w.to_string(),
                    }
                })
                .collect();
            changed.then(|| rec.variant(words.join(" "), Source::Acronym))
        })
        .collect();
    let mut records = records;
    records.extend(added);
    records
}
