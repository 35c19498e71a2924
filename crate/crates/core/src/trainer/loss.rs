//! Batch losses over projected embeddings with exact gradients with
//! respect to the projection parameters.

use super::model::ProjectionModel;
use crate::embeddings::{dot, norm};
use crate::error::{Error, Result};

/// Gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    pub fn zeros(model: &ProjectionModel) -> Self {
        Gradient {
            weights: vec![0.0; model.dim_in() * model.dim_out()],
            bias: vec![0.0; model.dim_out()],
        }
    }

    /// Adds `g ⊗ base` to the weight gradient and `g` to the bias gradient.
    fn accumulate(&mut self, g: &[f64], base: &[f64]) {
        let dim_in = base.len();
        for (row, gi) in self.weights.chunks_exact_mut(dim_in).zip(g) {
            if *gi != 0.0 {
                row.iter_mut().zip(base).for_each(|(w, x)| *w += gi * x);
            }
        }
        self.bias.iter_mut().zip(g).for_each(|(b, gi)| *b += gi);
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        self.weights.iter_mut().zip(&other.weights).for_each(|(a, b)| *a += b);
        self.bias.iter_mut().zip(&other.bias).for_each(|(a, b)| *a += b);
    }

    pub fn norm(&self) -> f64 {
        (dot(&self.weights, &self.weights) + dot(&self.bias, &self.bias)).sqrt()
    }
}

/// A projected vector with its norm, kept next to the base it came from.
struct Projected<'a> {
    base: &'a [f64],
    proj: Vec<f64>,
    norm: f64,
}

impl<'a> Projected<'a> {
    fn new(model: &ProjectionModel, base: &'a [f64]) -> Result<Self> {
        let proj = model.encode(base)?;
        let n = norm(&proj);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Projected { base, proj, norm: n })
    }
}

fn cos(u: &Projected, v: &Projected) -> f64 {
    dot(&u.proj, &v.proj) / (u.norm * v.norm)
}

/// d cos(u, v) / du, scaled by `coef` and added into `out`.
fn add_cos_grad(out: &mut [f64], u: &Projected, v: &Projected, c: f64, coef: f64) {
    let a = coef / (u.norm * v.norm);
    let b = coef * c / (u.norm * u.norm);
    for ((o, vi), ui) in out.iter_mut().zip(&v.proj).zip(&u.proj) {
        *o += a * vi - b * ui;
    }
}

fn project_pairs<'a>(
    model: &ProjectionModel,
    pairs: impl Iterator<Item = (&'a [f64], &'a [f64])>,
) -> Result<(Vec<Projected<'a>>, Vec<Projected<'a>>)> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (a, b) in pairs {
        left.push(Projected::new(model, a)?);
        right.push(Projected::new(model, b)?);
    }
    Ok((left, right))
}

fn finish(
    model: &ProjectionModel,
    left: &[Projected],
    right: &[Projected],
    gl: &[Vec<f64>],
    gr: &[Vec<f64>],
) -> Gradient {
    let mut grad = Gradient::zeros(model);
    for (p, g) in left.iter().zip(gl).chain(right.iter().zip(gr)) {
        grad.accumulate(g, p.base);
    }
    grad
}

/// Multiple-negatives ranking loss: every `b_j` with `j != i` is a negative
/// for anchor `a_i`, logits are `scale * cos(a_i, b_j)`.
pub fn mnr_loss(model: &ProjectionModel, pairs: &[(&[f64], &[f64])], scale: f64) -> Result<(f64, Gradient)> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (left, right) = project_pairs(model, pairs.iter().copied())?;
    let n = pairs.len();
    let dim = model.dim_out();
    let mut gl = vec![vec![0.0; dim]; n];
    let mut gr = vec![vec![0.0; dim]; n];
    let mut loss = 0.0;
    for i in 0..n {
        let cosines: Vec<f64> = right.iter().map(|r| cos(&left[i], r)).collect();
        let logits: Vec<f64> = cosines.iter().map(|c| scale * c).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        loss += max + z.ln() - logits[i];
        for j in 0..n {
            let p = exps[j] / z;
            let coef = scale * (p - if i == j { 1.0 } else { 0.0 }) / n as f64;
            if coef == 0.0 {
                continue;
            }
            add_cos_grad(&mut gl[i], &left[i], &right[j], cosines[j], coef);
            add_cos_grad(&mut gr[j], &right[j], &left[i], cosines[j], coef);
        }
    }
    Ok((loss / n as f64, finish(model, &left, &right, &gl, &gr)))
}

/// Online contrastive loss on cosine distance `d = 1 - cos`.
///
/// Positives farther than the closest negative and negatives closer than
/// the farthest positive are kept; when one side is absent the other side
/// is kept whole. The loss is the mean over kept pairs of `d²` (positives)
/// and `max(0, margin - d)²` (negatives).
pub fn contrastive_loss(
    model: &ProjectionModel,
    pairs: &[(&[f64], &[f64], bool)],
    margin: f64,
) -> Result<(f64, Gradient)> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (left, right) = project_pairs(model, pairs.iter().map(|(a, b, _)| (*a, *b)))?;
    let cosines: Vec<f64> = left.iter().zip(&right).map(|(a, b)| cos(a, b)).collect();
    let dist: Vec<f64> = cosines.iter().map(|c| 1.0 - c).collect();
    let is_pos: Vec<bool> = pairs.iter().map(|p| p.2).collect();
    // With one side absent its bound admits every pair of the other side.
    let min_neg = dist
        .iter()
        .zip(&is_pos)
        .filter(|(_, p)| !**p)
        .map(|(d, _)| *d)
        .reduce(f64::min)
        .unwrap_or(f64::NEG_INFINITY);
    let max_pos = dist
        .iter()
        .zip(&is_pos)
        .filter(|(_, p)| **p)
        .map(|(d, _)| *d)
        .reduce(f64::max)
        .unwrap_or(f64::INFINITY);
    let selected: Vec<usize> = (0..pairs.len())
        .filter(|&i| {
            if is_pos[i] {
                dist[i] > min_neg
            } else {
                dist[i] < max_pos
            }
        })
        .collect();

    let dim = model.dim_out();
    let mut gl = vec![vec![0.0; dim]; pairs.len()];
    let mut gr = vec![vec![0.0; dim]; pairs.len()];
    if selected.is_empty() {
        return Ok((0.0, finish(model, &left, &right, &gl, &gr)));
    }
    let n = selected.len() as f64;
    let mut loss = 0.0;
    for &i in &selected {
        let d = dist[i];
        // dL/dd, then dL/dcos = -dL/dd.
        let dl_dd = if is_pos[i] {
            loss += d * d;
            2.0 * d / n
        } else {
            let h = (margin - d).max(0.0);
            loss += h * h;
            -2.0 * h / n
        };
        let coef = -dl_dd;
        if coef != 0.0 {
            add_cos_grad(&mut gl[i], &left[i], &right[i], cosines[i], coef);
            add_cos_grad(&mut gr[i], &right[i], &left[i], cosines[i], coef);
        }
    }
    Ok((loss / n, finish(model, &left, &right, &gl, &gr)))
}

/// Mean squared error between `cos(a', b')` and the target score.
pub fn regression_loss(model: &ProjectionModel, pairs: &[(&[f64], &[f64], f64)]) -> Result<(f64, Gradient)> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (left, right) = project_pairs(model, pairs.iter().map(|(a, b, _)| (*a, *b)))?;
    let n = pairs.len() as f64;
    let dim = model.dim_out();
    let mut gl = vec![vec![0.0; dim]; pairs.len()];
    let mut gr = vec![vec![0.0; dim]; pairs.len()];
    let mut loss = 0.0;
    for (i, (_, _, target)) in pairs.iter().enumerate() {
        let c = cos(&left[i], &right[i]);
        let r = c - target;
        loss += r * r;
        let coef = 2.0 * r / n;
        add_cos_grad(&mut gl[i], &left[i], &right[i], c, coef);
        add_cos_grad(&mut gr[i], &right[i], &left[i], c, coef);
    }
    Ok((loss / n, finish(model, &left, &right, &gl, &gr)))
}
