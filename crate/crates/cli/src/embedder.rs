use std::borrow::Cow;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use hyperank::embeddings::load_embeddings;
use hyperank::{Embedder, EmbeddingTable, HashEmbedder};

/// Base embedding source. With both options, texts missing from the file
/// are hashed.
#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("base_embedder").required(true).multiple(true).args(["embeddings", "hash_dim"]))]
pub struct EmbedderArgs {
    /// Embedding file (`<count> <dim>` header, `id<TAB>values` rows).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Character-trigram hashing embedder of this dimension.
    #[arg(long)]
    pub hash_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub hash_seed: u64,
}

pub enum BaseEmbedder {
    Table(EmbeddingTable),
    Hash(HashEmbedder),
    Fallback(EmbeddingTable, HashEmbedder),
}

impl EmbedderArgs {
    pub fn build(&self) -> anyhow::Result<BaseEmbedder> {
        let table = match &self.embeddings {
            Some(p) => Some(load_embeddings(p).with_context(|| format!("loading {}", p.display()))?),
            None => None,
        };
        let hash = self
            .hash_dim
            .map(|d| HashEmbedder::new(d, self.hash_seed))
            .transpose()?;
        Ok(match (table, hash) {
            (Some(t), None) => BaseEmbedder::Table(t),
            (None, Some(h)) => BaseEmbedder::Hash(h),
            (Some(t), Some(h)) => {
                anyhow::ensure!(
                    t.dim() == h.dim(),
                    "embedding file has dimension {} but --hash-dim is {}",
                    t.dim(),
                    h.dim()
                );
                BaseEmbedder::Fallback(t, h)
            }
            (None, None) => anyhow::bail!("no base embedder configured"),
        })
    }
}

impl Embedder for BaseEmbedder {
    fn dim(&self) -> usize {
        match self {
            BaseEmbedder::Table(t) | BaseEmbedder::Fallback(t, _) => t.dim(),
            BaseEmbedder::Hash(h) => h.dim(),
        }
    }

    fn embed(&self, text: &str) -> hyperank::Result<Cow<'_, [f64]>> {
        match self {
            BaseEmbedder::Table(t) => t.embed(text),
            BaseEmbedder::Hash(h) => h.embed(text),
            BaseEmbedder::Fallback(t, h) => match t.get(text) {
                Some(v) => Ok(Cow::Borrowed(v)),
                None => h.embed(text),
            },
        }
    }
}
