//! Base embeddings: the text wire format, a deterministic feature-hashing
//! embedder and cosine similarity.
//!
//! Embedding file layout:
//!
//! ```text
//! <count> <dim>
//! <id>\t<v1> <v2> ... <vdim>
//! ```
//!
//! Components are written with 17 significant digits so every `f64`
//! survives a save/load cycle bit for bit.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use xxhash_rust::xxh64::xxh64;

use crate::corpus::preprocess;
use crate::error::{Error, Result};

/// Source of base vectors for arbitrary texts.
pub trait Embedder: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Cow<'_, [f64]>>;
}

/// Ids are exact texts with tabs and newlines folded to single spaces.
pub fn normalize_id(text: &str) -> Cow<'_, str> {
    if text.contains(['\t', '\n', '\r']) {
        Cow::Owned(text.replace("\r\n", " ").replace(['\t', '\n', '\r'], " "))
    } else {
        Cow::Borrowed(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    /// Adds a vector; rejects wrong length, non-finite components and
    /// duplicate ids.
    pub fn insert(&mut self, id: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite component for `{id}`")));
        }
        let id = normalize_id(id).into_owned();
        if self.vectors.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate id `{id}`")));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(normalize_id(id).as_ref()).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vectors.len(), self.dim)?;
        for (id, v) in &self.vectors {
            w.write_all(id.as_bytes())?;
            w.write_all(b"\t")?;
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{x:.16e}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, context: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::parse(context, 1, e.to_string()))?,
            None => return Err(Error::parse(context, 1, "missing header")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
                (Ok(c), Ok(d)) if d > 0 => (c, d),
                _ => return Err(Error::parse(context, 1, format!("bad header `{header}`"))),
            },
            _ => return Err(Error::parse(context, 1, format!("bad header `{header}`"))),
        };
        let mut table = EmbeddingTable::new(dim)?;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::parse(context, line_no, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(context, line_no, "missing tab after id"))?;
            let vector = values
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(context, line_no, e.to_string()))?;
            if vector.len() != dim {
                return Err(Error::parse(
                    context,
                    line_no,
                    format!("expected {dim} values, found {}", vector.len()),
                ));
            }
            table
                .insert(id, vector)
                .map_err(|e| Error::parse(context, line_no, e.to_string()))?;
        }
        if table.len() != count {
            return Err(Error::parse(
                context,
                1,
                format!("header declares {count} rows, found {}", table.len()),
            ));
        }
        Ok(table)
    }
}

impl Embedder for EmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Cow<'_, [f64]>> {
        self.get(text)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::MissingEmbedding(text.to_string()))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read(BufReader::new(file), &path.display().to_string())
}

pub fn save_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    table.write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Smallest dimension accepted by [`hash_embed`].
pub const MIN_HASH_DIM: usize = 8;

/// Signed feature hashing of the character trigrams of the preprocessed
/// text (padded with one space on each side), L2-normalized. Text without
/// any trigram maps to the first basis vector.
///
/// Panics if `dim < MIN_HASH_DIM`.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(
        dim >= MIN_HASH_DIM,
        "hash embedding dimension must be at least {MIN_HASH_DIM}"
    );
    let mut v = vec![0.0; dim];
    let clean = preprocess(text);
    if !clean.is_empty() {
        let chars: Vec<char> = format!(" {clean} ").chars().collect();
        let mut buf = [0u8; 12];
        for gram in chars.windows(3) {
            let mut n = 0;
            for c in gram {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            let h = xxh64(&buf[..n], seed);
            let bucket = (h % dim as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// [`hash_embed`] as an [`Embedder`].
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < MIN_HASH_DIM {
            return Err(Error::invalid(format!(
                "hash embedding dimension must be at least {MIN_HASH_DIM}"
            )));
        }
        Ok(HashEmbedder { dim, seed })
    }

    /// Embeds every text into a table keyed by the text itself.
    pub fn table<'a, I>(&self, texts: I) -> Result<EmbeddingTable>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut table = EmbeddingTable::new(self.dim)?;
        for t in texts {
            if !table.contains(t) {
                table.insert(t, hash_embed(t, self.dim, self.seed))?;
            }
        }
        Ok(table)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Cow<'_, [f64]>> {
        Ok(Cow::Owned(hash_embed(text, self.dim, self.seed)))
    }
}

/// Table lookup that falls back to hashing for unknown texts.
pub struct WithFallback<'a> {
    pub table: &'a EmbeddingTable,
    pub fallback: HashEmbedder,
}

impl Embedder for WithFallback<'_> {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn embed(&self, text: &str) -> Result<Cow<'_, [f64]>> {
        match self.table.get(text) {
            Some(v) => Ok(Cow::Borrowed(v)),
            None => self.fallback.embed(text),
        }
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroVector)));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hash_embed_is_deterministic_and_unit() {
        let a = hash_embed("bond", 64, 7);
        assert_eq!(a, hash_embed("bond", 64, 7));
        assert_abs_diff_eq!(norm(&a), 1.0, epsilon = 1e-9);
        assert_ne!(a, hash_embed("bond", 64, 8));
        let empty = hash_embed("", 16, 7);
        assert_eq!(empty[0], 1.0);
        assert_eq!(norm(&empty), 1.0);
        assert_eq!(hash_embed("!!!", 16, 7), empty);
    }

    #[test]
    fn shared_trigrams_raise_similarity() {
        let bond = hash_embed("bond", 256, 7);
        let bonds = hash_embed("bonds", 256, 7);
        let equity = hash_embed("equity", 256, 7);
        assert!(cosine(&bond, &bonds).unwrap() > cosine(&bond, &equity).unwrap());
        let callable = hash_embed("callable bond", 256, 7);
        let puttable = hash_embed("puttable bond", 256, 7);
        let index = hash_embed("equity index", 256, 7);
        assert!(cosine(&callable, &puttable).unwrap() > cosine(&callable, &index).unwrap());
    }

    #[test]
    fn table_rejects_bad_rows() {
        let bad_arity = "1 3\nbond\t1 2\n";
        assert!(EmbeddingTable::read(bad_arity.as_bytes(), "t").is_err());
        let dup = "2 2\nbond\t1 2\nbond\t3 4\n";
        let err = EmbeddingTable::read(dup.as_bytes(), "t").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(EmbeddingTable::read("x y\n".as_bytes(), "t").is_err());
        assert!(EmbeddingTable::read("".as_bytes(), "t").is_err());
        assert!(EmbeddingTable::read("2 2\nbond\t1 2\n".as_bytes(), "t").is_err());
        assert!(EmbeddingTable::read("1 2\nbond\t1 NaN\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn ids_fold_tabs() {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a\tb", vec![1.0, 2.0]).unwrap();
        assert!(t.contains("a b"));
        assert!(t.contains("a\nb"));
    }

    #[test]
    fn save_load_two_vectors() {
        let mut t = EmbeddingTable::new(3).unwrap();
        t.insert("callable bond", vec![0.1, -2.5e-12, 3.0]).unwrap();
        t.insert("swap", vec![1.0 / 3.0, f64::MAX, f64::MIN_POSITIVE]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.emb");
        save_embeddings(&t, &path).unwrap();
        assert_eq!(load_embeddings(&path).unwrap(), t);
    }

    proptest! {
        #[test]
        fn wire_format_is_bit_exact(values in proptest::collection::vec(-1e300f64..1e300, 1..6)) {
            let mut t = EmbeddingTable::new(values.len()).unwrap();
            t.insert("x", values.clone()).unwrap();
            let mut buf = Vec::new();
            t.write(&mut buf).unwrap();
            let back = EmbeddingTable::read(buf.as_slice(), "mem").unwrap();
            let got = back.get("x").unwrap();
            for (a, b) in got.iter().zip(&values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in proptest::collection::vec(-10.0f64..10.0, 4),
            v in proptest::collection::vec(-10.0f64..10.0, 4),
            alpha in 0.01f64..100.0,
        ) {
            prop_assume!(norm(&u) > 1e-6 && norm(&v) > 1e-6);
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn hash_embed_unit_norm(text in "\\PC{0,40}") {
            let v = hash_embed(&text, 32, 3);
            prop_assert!((norm(&v) - 1.0).abs() < 1e-9);
        }
    }
}
