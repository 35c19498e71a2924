//! Cosine scoring of terms against every label definition, roll-up of
//! augmented variants, ranking and ensembling.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TermRecord;
use crate::embeddings::{cosine, Embedder};
use crate::error::{Error, Result};
use crate::taxonomy::LabelTaxonomy;
use crate::trainer::ProjectionModel;

/// Similarities of one record against every label.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordScores {
    pub origin_id: String,
    pub term: String,
    pub scores: BTreeMap<String, f64>,
}

/// `cos(encode(text), encode(label definition))` for every record and leaf.
pub fn score(
    model: &ProjectionModel,
    embedder: &dyn Embedder,
    records: &[TermRecord],
    tax: &LabelTaxonomy,
) -> Result<Vec<RecordScores>> {
    let labels: Vec<(&str, Vec<f64>)> = tax
        .labels()
        .map(|l| Ok((l, model.encode(&embedder.embed(tax.definition(l)?)?)?)))
        .collect::<Result<_>>()?;
    records
        .par_iter()
        .map(|rec| {
            let v = model.encode(&embedder.embed(&rec.text)?)?;
            let scores = labels
                .iter()
                .map(|(l, lv)| Ok((l.to_string(), cosine(&v, lv)?)))
                .collect::<Result<_>>()?;
            Ok(RecordScores {
                origin_id: rec.origin_id.clone(),
                term: rec.term.clone(),
                scores,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub term: String,
    pub scores: BTreeMap<String, f64>,
}

/// One row per term: mean similarity to every label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityMatrix {
    pub rows: BTreeMap<String, MatrixRow>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks that all rows share one label set and every score is a cosine.
    pub fn validate(&self) -> Result<()> {
        let mut first: Option<Vec<&String>> = None;
        for (id, row) in &self.rows {
            let keys: Vec<&String> = row.scores.keys().collect();
            if keys.is_empty() {
                return Err(Error::invalid(format!("row `{id}` has no scores")));
            }
            match &first {
                Some(f) if *f != keys => return Err(Error::invalid(format!("row `{id}` has a different label set"))),
                None => first = Some(keys),
                _ => {}
            }
            if let Some((l, s)) = row.scores.iter().find(|(_, s)| !(-1.0..=1.0).contains(*s)) {
                return Err(Error::invalid(format!(
                    "row `{id}` label `{l}` similarity {s} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let m: SimilarityMatrix = serde_json::from_str(json)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

/// Mean over every record sharing an origin id.
pub fn rollup_mean(raw: &[RecordScores]) -> SimilarityMatrix {
    let mut acc: BTreeMap<&str, (&str, BTreeMap<&str, f64>, usize)> = BTreeMap::new();
    for r in raw {
        let slot = acc.entry(&r.origin_id).or_insert_with(|| (&r.term, BTreeMap::new(), 0));
        for (l, s) in &r.scores {
            *slot.1.entry(l).or_default() += s;
        }
        slot.2 += 1;
    }
    SimilarityMatrix {
        rows: acc
            .into_iter()
            .map(|(id, (term, sums, n))| {
                let scores = sums.into_iter().map(|(l, s)| (l.to_string(), s / n as f64)).collect();
                (
                    id.to_string(),
                    MatrixRow {
                        term: term.to_string(),
                        scores,
                    },
                )
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub origin_id: String,
    pub term: String,
    pub labels: Vec<String>,
}

/// Labels ordered by descending score; exact ties go to the smaller name.
pub fn order_labels<'a>(scores: impl IntoIterator<Item = (&'a String, &'a f64)>) -> Vec<String> {
    let mut items: Vec<(&String, f64)> = scores.into_iter().map(|(l, s)| (l, *s)).collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    items.into_iter().map(|(l, _)| l.clone()).collect()
}

pub fn rank(matrix: &SimilarityMatrix) -> Vec<RankedList> {
    matrix
        .rows
        .iter()
        .map(|(id, row)| RankedList {
            origin_id: id.clone(),
            term: row.term.clone(),
            labels: order_labels(&row.scores),
        })
        .collect()
}

/// Cell-wise mean of matrices covering the same terms and labels.
pub fn ensemble_mean(matrices: &[SimilarityMatrix]) -> Result<SimilarityMatrix> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| Error::invalid("nothing to ensemble"))?;
    let mut out = first.clone();
    for m in rest {
        if m.rows.len() != out.rows.len() {
            return Err(Error::invalid("matrices cover different terms"));
        }
        for (id, row) in out.rows.iter_mut() {
            let other = m
                .rows
                .get(id)
                .ok_or_else(|| Error::invalid(format!("term `{id}` missing from a matrix")))?;
            if other.scores.len() != row.scores.len() {
                return Err(Error::invalid(format!("term `{id}` has mismatched labels")));
            }
            for (l, s) in row.scores.iter_mut() {
                let o = other
                    .scores
                    .get(l)
                    .ok_or_else(|| Error::invalid(format!("label `{l}` missing for term `{id}`")))?;
                *s += o;
            }
        }
    }
    let n = matrices.len() as f64;
    for row in out.rows.values_mut() {
        row.scores.values_mut().for_each(|s| *s /= n);
    }
    Ok(out)
}

/// CSV `origin_id,term,rank1,...,rankN`.
pub fn write_ranked_csv<W: Write>(w: W, ranked: &[RankedList]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let width = ranked.first().map_or(0, |r| r.labels.len());
    let mut header = vec!["origin_id".to_string(), "term".to_string()];
    header.extend((1..=width).map(|i| format!("rank{i}")));
    wtr.write_record(&header)?;
    for r in ranked {
        if r.labels.len() != width {
            return Err(Error::invalid(format!(
                "ranked list `{}` has a different length",
                r.origin_id
            )));
        }
        let mut row = vec![r.origin_id.as_str(), r.term.as_str()];
        row.extend(r.labels.iter().map(String::as_str));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<ranked>", e))
}

pub fn read_ranked_csv<R: Read>(reader: R, context: &str) -> Result<Vec<RankedList>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 3 {
        return Err(Error::parse(context, 1, "expected origin_id,term,rank1,..."));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(context, i + 2, e.to_string()))?;
        out.push(RankedList {
            origin_id: rec[0].to_string(),
            term: rec[1].to_string(),
            labels: rec.iter().skip(2).map(str::to_string).collect(),
        });
    }
    Ok(out)
}

pub fn save_ranked(path: impl AsRef<Path>, ranked: &[RankedList]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_ranked_csv(file, ranked)
}

pub fn load_ranked(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ranked_csv(file, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingTable;
    use crate::taxonomy::LabelEntry;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn row(term: &str, scores: &[(&str, f64)]) -> MatrixRow {
        MatrixRow {
            term: term.into(),
            scores: scores.iter().map(|(l, s)| (l.to_string(), *s)).collect(),
        }
    }

    fn matrix(rows: &[(&str, &[(&str, f64)])]) -> SimilarityMatrix {
        SimilarityMatrix {
            rows: rows.iter().map(|(id, s)| (id.to_string(), row(id, s))).collect(),
        }
    }

    fn raw(id: &str, scores: &[(&str, f64)]) -> RecordScores {
        RecordScores {
            origin_id: id.into(),
            term: id.into(),
            scores: scores.iter().map(|(l, s)| (l.to_string(), *s)).collect(),
        }
    }

    #[test]
    fn rollup_examples() {
        let m = rollup_mean(&[raw("a", &[("Bonds", 0.8)]), raw("a", &[("Bonds", 0.6)])]);
        assert_abs_diff_eq!(m.rows["a"].scores["Bonds"], 0.7, epsilon = 1e-15);
        let single = rollup_mean(&[raw("b", &[("Bonds", 0.3)])]);
        assert_eq!(single.rows["b"].scores["Bonds"], 0.3);
        let three = rollup_mean(&[
            raw("c", &[("Bonds", 0.9)]),
            raw("c", &[("Bonds", 0.5)]),
            raw("c", &[("Bonds", 0.1)]),
        ]);
        assert_abs_diff_eq!(three.rows["c"].scores["Bonds"], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rank_examples() {
        let m = matrix(&[("x", &[("B", 0.1), ("A", 0.9)]), ("y", &[("B", 0.5), ("A", 0.5)])]);
        let r = rank(&m);
        assert_eq!(r[0].labels, ["A", "B"]);
        assert_eq!(r[1].labels, ["A", "B"]);
    }

    #[test]
    fn ensemble_examples() {
        let a = matrix(&[("x", &[("A", 0.8), ("B", 0.2)])]);
        let b = matrix(&[("x", &[("A", 0.6), ("B", 0.4)])]);
        let e = ensemble_mean(&[a.clone(), b]).unwrap();
        assert_abs_diff_eq!(e.rows["x"].scores["A"], 0.7, epsilon = 1e-15);
        assert_eq!(ensemble_mean(std::slice::from_ref(&a)).unwrap(), a);
        let c = matrix(&[("z", &[("A", 0.6), ("B", 0.4)])]);
        assert!(ensemble_mean(&[a.clone(), c]).is_err());
        let d = matrix(&[("x", &[("A", 0.6), ("C", 0.4)])]);
        assert!(ensemble_mean(&[a, d]).is_err());
        assert!(ensemble_mean(&[]).is_err());
    }

    fn hand_fixture() -> (LabelTaxonomy, EmbeddingTable) {
        let tax = LabelTaxonomy::from_entries([
            (
                "A".to_string(),
                LabelEntry {
                    path: vec!["R".into(), "A".into()],
                    definition: Some("def a".into()),
                },
            ),
            (
                "B".to_string(),
                LabelEntry {
                    path: vec!["R".into(), "B".into()],
                    definition: Some("def b".into()),
                },
            ),
        ])
        .unwrap();
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("def a", vec![1.0, 0.0]).unwrap();
        t.insert("def b", vec![0.0, 2.0]).unwrap();
        t.insert("t one", vec![3.0, 4.0]).unwrap();
        t.insert("t two", vec![1.0, -1.0]).unwrap();
        (tax, t)
    }

    #[test]
    fn score_hand_vectors() {
        let (tax, table) = hand_fixture();
        let recs = vec![
            TermRecord::original("t1", "t one", None),
            TermRecord::original("t2", "t two", None),
        ];
        let id = ProjectionModel::identity_padded(2, 2).unwrap();
        let s = score(&id, &table, &recs, &tax).unwrap();
        assert_eq!(s.len() * s[0].scores.len(), 4);
        assert_abs_diff_eq!(s[0].scores["A"], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s[0].scores["B"], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1].scores["A"], 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[1].scores["B"], -1.0 / 2f64.sqrt(), epsilon = 1e-12);
        let same = vec![TermRecord::original("t3", "def b", None)];
        assert_abs_diff_eq!(
            score(&id, &table, &same, &tax).unwrap()[0].scores["B"],
            1.0,
            epsilon = 1e-15
        );
        let missing = vec![TermRecord::original("t4", "unknown", None)];
        assert!(matches!(
            score(&id, &table, &missing, &tax),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn ranked_csv_roundtrip() {
        let ranked = vec![RankedList {
            origin_id: "t1".into(),
            term: "swap, rate".into(),
            labels: vec!["Swap".into(), "Bonds".into()],
        }];
        let mut buf = Vec::new();
        write_ranked_csv(&mut buf, &ranked).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("origin_id,term,rank1,rank2\n"));
        assert_eq!(read_ranked_csv(buf.as_slice(), "mem").unwrap(), ranked);
    }

    #[test]
    fn matrix_json_shape() {
        let m = matrix(&[("t1", &[("A", 0.5)])]);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["t1"]["scores"]["A"], 0.5);
        assert_eq!(v["t1"]["term"], "t1");
        assert!(SimilarityMatrix::from_json(r#"{"t1": {"term": "x", "scores": {"A": 1.5}}}"#).is_err());
    }

    proptest! {
        #[test]
        fn rank_invariant_to_row_shift(scores in proptest::collection::vec(-0.4f64..0.4, 5), shift in -0.5f64..0.5) {
            let labels = ["a", "b", "c", "d", "e"];
            let base: Vec<(&str, f64)> = labels.iter().copied().zip(scores.iter().copied()).collect();
            let shifted: Vec<(&str, f64)> = base.iter().map(|(l, s)| (*l, s + shift)).collect();
            let m1 = matrix(&[("x", &base)]);
            let m2 = matrix(&[("x", &shifted)]);
            // Shifting can only merge values that were already within rounding of each other.
            let distinct = scores.iter().enumerate().all(|(i, a)| scores.iter().skip(i + 1).all(|b| (a - b).abs() > 1e-9));
            prop_assume!(distinct);
            prop_assert_eq!(rank(&m1), rank(&m2));
            prop_assert_eq!(rank(&ensemble_mean(std::slice::from_ref(&m1)).unwrap()), rank(&m1));
        }

        #[test]
        fn rollup_commutes_with_ensemble(a in proptest::collection::vec(-1.0f64..1.0, 6), b in proptest::collection::vec(-1.0f64..1.0, 6)) {
            // Two models, one term with three variants, two labels.
            let raws = |v: &[f64]| -> Vec<RecordScores> {
                v.chunks(2).map(|c| raw("t", &[("A", c[0]), ("B", c[1])])).collect()
            };
            let left = ensemble_mean(&[rollup_mean(&raws(&a)), rollup_mean(&raws(&b))]).unwrap();
            let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
            let right = rollup_mean(&raws(&mixed));
            for l in ["A", "B"] {
                prop_assert!((left.rows["t"].scores[l] - right.rows["t"].scores[l]).abs() < 1e-12);
            }
        }
    }
}
