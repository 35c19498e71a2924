use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the embedded text of a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Acronym,
    Dbpedia,
    Investopedia,
    Fibo,
    External,
}

impl Source {
    pub const ALL: [Source; 6] = [
        Source::Original,
        Source::Acronym,
        Source::Dbpedia,
        Source::Investopedia,
        Source::Fibo,
        Source::External,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Original => "original",
            Source::Acronym => "acronym",
            Source::Dbpedia => "dbpedia",
            Source::Investopedia => "investopedia",
            Source::Fibo => "fibo",
            Source::External => "external",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown source `{s}`")))
    }
}

/// One embeddable text for a financial term. Augmentation appends further
/// records that share the original's `origin_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRecord {
    pub origin_id: String,
    pub term: String,
    pub text: String,
    pub label: Option<String>,
    pub source: Source,
}

impl TermRecord {
    pub fn original(origin_id: impl Into<String>, term: impl Into<String>, label: Option<String>) -> Self {
        let term = term.into();
        TermRecord {
            origin_id: origin_id.into(),
            text: term.clone(),
            term,
            label,
            source: Source::Original,
        }
    }

    /// A variant of `self` carrying a different embedded text.
    pub fn variant(&self, text: impl Into<String>, source: Source) -> Self {
        TermRecord {
            origin_id: self.origin_id.clone(),
            term: self.term.clone(),
            text: text.into(),
            label: self.label.clone(),
            source,
        }
    }
}

/// First record seen for each origin id, in input order.
pub fn distinct_origins(records: &[TermRecord]) -> Vec<&TermRecord> {
    let mut seen = HashSet::new();
    records.iter().filter(|r| seen.insert(r.origin_id.as_str())).collect()
}

/// Gold label per origin id. Unlabeled origins are skipped.
pub fn gold_labels(records: &[TermRecord]) -> BTreeMap<String, String> {
    records
        .iter()
        .filter_map(|r| r.label.as_ref().map(|l| (r.origin_id.clone(), l.clone())))
        .collect()
}

#[derive(Deserialize)]
struct TermRow {
    term: String,
    #[serde(default)]
    label: Option<String>,
}

/// Reads a `term,label` CSV. Identical rows collapse into one; a term with
/// two different labels keeps one origin id per label.
pub fn read_terms_csv(path: impl AsRef<Path>) -> Result<Vec<TermRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_terms(file, &path.display().to_string())
}

pub fn read_terms<R: std::io::Read>(reader: R, context: &str) -> Result<Vec<TermRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TermRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(context, line, e.to_string()))?;
        if row.term.is_empty() {
            return Err(Error::parse(context, line, "empty term"));
        }
        let label = row.label.filter(|l| !l.is_empty());
        if !seen.insert((row.term.clone(), label.clone())) {
            continue;
        }
        let id = format!("t{:05}", out.len());
        out.push(TermRecord::original(id, row.term, label));
    }
    Ok(out)
}

pub fn write_records_jsonl(path: impl AsRef<Path>, records: &[TermRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_jsonl(path: impl AsRef<Path>) -> Result<Vec<TermRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TermRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(&context, line_no, e.to_string()))?;
        if rec.text.trim().is_empty() {
            return Err(Error::parse(&context, line_no, "empty text"));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads a two-column CSV with a header (`term,definition` glossaries or
/// `term,label` external lists).
pub fn read_pairs_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let context = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(&context, 1, e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<(String, String)>().enumerate() {
        let row = row.map_err(|e| Error::parse(&context, i + 2, e.to_string()))?;
        out.push(row);
    }
    Ok(out)
}

/// One word per line, case-folded. Blank lines are ignored.
pub fn read_word_list(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_csv_dedups_identical_rows_only() {
        let csv = "term,label\nCDS index,Credit Index\nCDS index,Credit Index\nswap rate,Swap\nswap rate,Debt pricing and yields\nunlabeled,\n";
        let recs = read_terms(csv.as_bytes(), "terms.csv").unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[0].origin_id, "t00000");
        assert_eq!(recs[2].origin_id, "t00002");
        assert_ne!(recs[1].origin_id, recs[2].origin_id);
        assert_eq!(recs[3].label, None);
        assert!(recs.iter().all(|r| r.text == r.term && r.source == Source::Original));
    }

    #[test]
    fn empty_term_reports_line() {
        let err = read_terms("term,label\nok,Swap\n,Swap\n".as_bytes(), "terms.csv").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn source_names() {
        for s in Source::ALL {
            assert_eq!(s.as_str().parse::<Source>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
    }
}
