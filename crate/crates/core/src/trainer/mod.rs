//! Fine-tuning of a linear projection head over frozen base embeddings.
//!
//! Positive pairs (score 1.0) feed the multiple-negatives ranking loss;
//! all pairs, binarized at `positive_threshold`, feed the online
//! contrastive loss. Both objectives share one parameter set and are
//! optimized with plain gradient descent.

mod loss;
mod model;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use loss::{contrastive_loss, mnr_loss, regression_loss, Gradient};
pub use model::ProjectionModel;

use crate::embeddings::Embedder;
use crate::error::{Error, Result};
use crate::negsampler::ScoredPair;

/// How the two objectives share optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// One step per batch, alternating ranking and contrastive batches.
    Alternate,
    /// One step per batch index on the summed gradients of both objectives.
    Sum,
}

/// Second objective applied to the graded pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairObjective {
    Contrastive,
    /// Squared error between cosine and the graded score.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub mnr_scale: f64,
    pub positive_threshold: f64,
    pub seed: u64,
    /// Output dimension; `None` keeps the base dimension.
    pub dim_out: Option<usize>,
    pub schedule: Schedule,
    pub pair_objective: PairObjective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 20,
            learning_rate: 1e-3,
            margin: 0.5,
            mnr_scale: 20.0,
            positive_threshold: 0.5,
            seed: 0,
            dim_out: None,
            schedule: Schedule::Alternate,
            pair_objective: PairObjective::Contrastive,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return Err(Error::invalid(format!("margin {} not in (0, 1]", self.margin)));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.mnr_scale > 0.0 && self.mnr_scale.is_finite()) {
            return Err(Error::invalid("ranking scale must be positive"));
        }
        if self.dim_out == Some(0) {
            return Err(Error::invalid("output dimension must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Objective {
    Ranking,
    Contrastive,
    Regression,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Ranking => "mnr",
            Objective::Contrastive => "contrastive",
            Objective::Regression => "regression",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnr" => Ok(Objective::Ranking),
            "contrastive" => Ok(Objective::Contrastive),
            "regression" => Ok(Objective::Regression),
            _ => Err(Error::invalid(format!("unknown objective `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub objective: Objective,
    pub mean_loss: f64,
}

/// Mean batch loss per epoch and objective, measured before each update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossReport {
    pub rows: Vec<EpochLoss>,
}

impl LossReport {
    /// Mean over objectives of each epoch's loss, in epoch order.
    pub fn epoch_means(&self) -> Vec<f64> {
        let mut by_epoch: Vec<(f64, usize)> = Vec::new();
        for row in &self.rows {
            if by_epoch.len() < row.epoch {
                by_epoch.resize(row.epoch, (0.0, 0));
            }
            let slot = &mut by_epoch[row.epoch - 1];
            slot.0 += row.mean_loss;
            slot.1 += 1;
        }
        by_epoch.into_iter().map(|(s, n)| s / n.max(1) as f64).collect()
    }

    /// CSV `epoch,objective,mean_loss`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,objective,mean_loss")?;
        for row in &self.rows {
            writeln!(w, "{},{},{:.17e}", row.epoch, row.objective, row.mean_loss)?;
        }
        Ok(())
    }
}

struct EncodedPair {
    a: usize,
    b: usize,
    score: f64,
}

enum Step<'p> {
    Ranking(&'p [usize]),
    Pairs(&'p [usize]),
}

/// Trains a projection model. Identical inputs give a bitwise-identical
/// model: shuffling uses ChaCha seeded from `cfg.seed` and gradients are
/// accumulated in a fixed order.
pub fn train(
    pairs: &[ScoredPair],
    embedder: &dyn Embedder,
    cfg: &TrainConfig,
) -> Result<(ProjectionModel, LossReport)> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let dim_in = embedder.dim();
    let dim_out = cfg.dim_out.unwrap_or(dim_in);

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut encoded = Vec::with_capacity(pairs.len());
    for p in pairs {
        let a = intern(&p.text_a, &mut index, &mut vectors, embedder)?;
        let b = intern(&p.text_b, &mut index, &mut vectors, embedder)?;
        encoded.push(EncodedPair { a, b, score: p.score });
    }

    let mut model = ProjectionModel::identity_padded(dim_in, dim_out)?;
    model.metadata = serde_json::to_value(cfg)?;
    let mut report = LossReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let positives: Vec<usize> = (0..encoded.len()).filter(|&i| encoded[i].score >= 1.0).collect();
    let second = match cfg.pair_objective {
        PairObjective::Contrastive => Objective::Contrastive,
        PairObjective::Regression => Objective::Regression,
    };

    for epoch in 1..=cfg.epochs {
        let mut pos_order = positives.clone();
        pos_order.shuffle(&mut rng);
        let mut all_order: Vec<usize> = (0..encoded.len()).collect();
        all_order.shuffle(&mut rng);
        let ranking: Vec<&[usize]> = pos_order.chunks(cfg.batch_size).collect();
        let graded: Vec<&[usize]> = all_order.chunks(cfg.batch_size).collect();

        let mut sums: HashMap<Objective, (f64, usize)> = HashMap::new();
        let steps = ranking.len().max(graded.len());
        for s in 0..steps {
            let mut batch_steps = Vec::new();
            if let Some(b) = ranking.get(s) {
                batch_steps.push(Step::Ranking(b));
            }
            if let Some(b) = graded.get(s) {
                batch_steps.push(Step::Pairs(b));
            }
            let mut combined: Option<Gradient> = None;
            for step in batch_steps {
                let (objective, loss, grad) = match step {
                    Step::Ranking(idx) => {
                        let batch: Vec<(&[f64], &[f64])> = idx
                            .iter()
                            .map(|&i| (vectors[encoded[i].a].as_slice(), vectors[encoded[i].b].as_slice()))
                            .collect();
                        let (l, g) = mnr_loss(&model, &batch, cfg.mnr_scale)?;
                        (Objective::Ranking, l, g)
                    }
                    Step::Pairs(idx) => match cfg.pair_objective {
                        PairObjective::Contrastive => {
                            let batch: Vec<(&[f64], &[f64], bool)> = idx
                                .iter()
                                .map(|&i| {
                                    let p = &encoded[i];
                                    (
                                        vectors[p.a].as_slice(),
                                        vectors[p.b].as_slice(),
                                        p.score >= cfg.positive_threshold,
                                    )
                                })
                                .collect();
                            let (l, g) = contrastive_loss(&model, &batch, cfg.margin)?;
                            (second, l, g)
                        }
                        PairObjective::Regression => {
                            let batch: Vec<(&[f64], &[f64], f64)> = idx
                                .iter()
                                .map(|&i| {
                                    let p = &encoded[i];
                                    (vectors[p.a].as_slice(), vectors[p.b].as_slice(), p.score)
                                })
                                .collect();
                            let (l, g) = regression_loss(&model, &batch)?;
                            (second, l, g)
                        }
                    },
                };
                let slot = sums.entry(objective).or_default();
                slot.0 += loss;
                slot.1 += 1;
                match cfg.schedule {
                    Schedule::Alternate => apply(&mut model, &grad, cfg.learning_rate)?,
                    Schedule::Sum => match combined.as_mut() {
                        Some(c) => c.add_assign(&grad),
                        None => combined = Some(grad),
                    },
                }
            }
            if let Some(g) = combined {
                apply(&mut model, &g, cfg.learning_rate)?;
            }
        }
        for objective in [Objective::Ranking, second] {
            if let Some((sum, n)) = sums.get(&objective) {
                report.rows.push(EpochLoss {
                    epoch,
                    objective,
                    mean_loss: sum / *n as f64,
                });
            }
        }
    }
    Ok((model, report))
}

fn intern<'p>(
    text: &'p str,
    index: &mut HashMap<&'p str, usize>,
    vectors: &mut Vec<Vec<f64>>,
    embedder: &dyn Embedder,
) -> Result<usize> {
    if let Some(&i) = index.get(text) {
        return Ok(i);
    }
    let v = embedder.embed(text)?.into_owned();
    if v.len() != embedder.dim() {
        return Err(Error::DimensionMismatch {
            expected: embedder.dim(),
            actual: v.len(),
        });
    }
    vectors.push(v);
    index.insert(text, vectors.len() - 1);
    Ok(vectors.len() - 1)
}

fn apply(model: &mut ProjectionModel, grad: &Gradient, lr: f64) -> Result<()> {
    let (w, b) = model.params_mut();
    w.iter_mut().zip(&grad.weights).for_each(|(p, g)| *p -= lr * g);
    b.iter_mut().zip(&grad.bias).for_each(|(p, g)| *p -= lr * g);
    if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::invalid("training diverged: non-finite parameters"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::HashEmbedder;

    fn pair(a: &str, b: &str, score: f64) -> ScoredPair {
        ScoredPair {
            text_a: a.into(),
            text_b: b.into(),
            score,
            origin_id: a.into(),
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let emb = HashEmbedder::new(16, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (model, report) = train(&[pair("bond", "debt", 1.0)], &emb, &cfg).unwrap();
        let init = ProjectionModel::identity_padded(16, 16).unwrap();
        assert_eq!(model.weights(), init.weights());
        assert_eq!(model.bias(), init.bias());
        assert!(report.rows.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let emb = HashEmbedder::new(16, 1).unwrap();
        assert!(train(&[], &emb, &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            margin: 1.5,
            ..TrainConfig::default()
        };
        assert!(train(&[pair("a", "b", 1.0)], &emb, &bad).is_err());
        let table = emb.table(["bond"]).unwrap();
        let err = train(&[pair("bond", "missing", 1.0)], &table, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding(_)));
    }

    #[test]
    fn deterministic() {
        let emb = HashEmbedder::new(16, 1).unwrap();
        let pairs = vec![
            pair("callable bond", "a bond", 1.0),
            pair("callable bond", "an option", 0.0),
            pair("swaption", "an option", 1.0),
            pair("swaption", "a bond", 0.4),
        ];
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 2,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (m1, r1) = train(&pairs, &emb, &cfg).unwrap();
        let (m2, r2) = train(&pairs, &emb, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        let sum = TrainConfig {
            schedule: Schedule::Sum,
            pair_objective: PairObjective::Regression,
            ..cfg
        };
        let (_, r3) = train(&pairs, &emb, &sum).unwrap();
        assert!(r3.rows.iter().any(|r| r.objective == Objective::Regression));
    }

    #[test]
    fn loss_csv() {
        let report = LossReport {
            rows: vec![EpochLoss {
                epoch: 1,
                objective: Objective::Ranking,
                mean_loss: 0.5,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,objective,mean_loss\n1,mnr,5.0"));
    }
}
