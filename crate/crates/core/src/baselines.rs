//! Reference systems: raw embedding-distance ranking and a multinomial
//! logistic-regression classifier over term vectors.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine, dot, Embedder};
use crate::error::{Error, Result};
use crate::ranker::{order_labels, RankedList};

/// Vector for a text. With `token_level`, the mean of the vectors of its
/// whitespace tokens (exact form first, then lowercased); tokens without a
/// vector are skipped.
pub fn text_vector(embedder: &dyn Embedder, text: &str, token_level: bool) -> Result<Vec<f64>> {
    if !token_level {
        return Ok(embedder.embed(text)?.into_owned());
    }
    let mut sum = vec![0.0; embedder.dim()];
    let mut n = 0usize;
    for tok in text.split_whitespace() {
        let v = embedder.embed(tok).or_else(|_| embedder.embed(&tok.to_lowercase()));
        if let Ok(v) = v {
            sum.iter_mut().zip(v.iter()).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::MissingEmbedding(text.to_string()));
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    Ok(sum)
}

/// A term to rank, with its vector.
pub struct TermVector<'a> {
    pub origin_id: &'a str,
    pub term: &'a str,
    pub vector: Vec<f64>,
}

/// Ranks labels by increasing cosine distance `1 - cos`; equal distances
/// go to the smaller label name. The sort key is the cosine itself, since
/// `1 - cos` can round two distinct cosines onto one distance.
pub fn distance_rank(terms: &[TermVector], labels: &[(String, Vec<f64>)]) -> Result<Vec<RankedList>> {
    terms
        .iter()
        .map(|t| {
            let mut dists: Vec<(&str, f64)> = labels
                .iter()
                .map(|(l, v)| Ok((l.as_str(), cosine(&t.vector, v)?)))
                .collect::<Result<_>>()?;
            dists.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| a.0.cmp(b.0))
            });
            Ok(RankedList {
                origin_id: t.origin_id.to_string(),
                term: t.term.to_string(),
                labels: dists.into_iter().map(|(l, _)| l.to_string()).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub label_order: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

impl LogRegModel {
    pub fn zeros(label_order: Vec<String>, dim: usize) -> Result<Self> {
        if label_order.is_empty() || dim == 0 {
            return Err(Error::invalid(
                "logistic regression needs labels and a positive dimension",
            ));
        }
        let k = label_order.len();
        Ok(LogRegModel {
            label_order,
            weights: vec![vec![0.0; dim]; k],
            bias: vec![0.0; k],
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LogRegModel = serde_json::from_str(&text)?;
        let dim = m.dim();
        if m.weights.len() != m.label_order.len()
            || m.bias.len() != m.label_order.len()
            || m.weights.iter().any(|w| w.len() != dim)
        {
            return Err(Error::invalid(format!(
                "{}: inconsistent logistic regression shapes",
                path.display()
            )));
        }
        Ok(m)
    }
}

/// Mean softmax cross-entropy plus `l2/2 * ||W||²` (bias unpenalized) and
/// its gradient `(dW, db)`.
pub fn logreg_loss(
    model: &LogRegModel,
    x: &[Vec<f64>],
    y: &[usize],
    l2: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
    let n = x.len() as f64;
    let mut gw: Vec<Vec<f64>> = model
        .weights
        .iter()
        .map(|w| w.iter().map(|v| l2 * v).collect())
        .collect();
    let mut gb = vec![0.0; model.bias.len()];
    let mut loss = 0.5 * l2 * model.weights.iter().map(|w| dot(w, w)).sum::<f64>();
    for (xi, &yi) in x.iter().zip(y) {
        let p = model.probabilities(xi)?;
        loss -= p[yi].ln() / n;
        for (c, pc) in p.iter().enumerate() {
            let r = (pc - if c == yi { 1.0 } else { 0.0 }) / n;
            gw[c].iter_mut().zip(xi).for_each(|(g, v)| *g += r * v);
            gb[c] += r;
        }
    }
    Ok((loss, gw, gb))
}

/// Full-batch gradient descent from zero initialization. `labels` fixes the
/// class order; classes without examples keep bias-only behavior.
pub fn train_logreg(
    x: &[Vec<f64>],
    y: &[String],
    labels: &[String],
    cfg: &LogRegConfig,
) -> Result<(LogRegModel, Vec<f64>)> {
    if x.is_empty() {
        return Err(Error::invalid("empty training data"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} vectors but {} labels", x.len(), y.len())));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let y_idx: Vec<usize> = y
        .iter()
        .map(|l| {
            index
                .get(l.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownLabel(l.clone()))
        })
        .collect::<Result<_>>()?;
    let mut model = LogRegModel::zeros(labels.to_vec(), dim)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, gw, gb) = logreg_loss(&model, x, &y_idx, cfg.l2)?;
        history.push(loss);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            w.iter_mut().zip(g).for_each(|(a, b)| *a -= cfg.learning_rate * b);
        }
        model
            .bias
            .iter_mut()
            .zip(&gb)
            .for_each(|(a, b)| *a -= cfg.learning_rate * b);
    }
    Ok((model, history))
}

/// Labels by descending predicted probability.
pub fn logreg_rank(model: &LogRegModel, origin_id: &str, term: &str, x: &[f64]) -> Result<RankedList> {
    let p = model.probabilities(x)?;
    Ok(RankedList {
        origin_id: origin_id.to_string(),
        term: term.to_string(),
        labels: order_labels(model.label_order.iter().zip(&p)),
    })
}
