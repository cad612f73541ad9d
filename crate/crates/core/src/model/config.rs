use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and regularization settings of a [`TripleSetModel`](super::TripleSetModel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Hidden size.
    pub d: usize,
    /// Maximum encoded length, boundary markers included.
    pub l_max: usize,
    /// Relation types including the trailing no-triple class.
    pub relation_types: usize,
    /// Number of triple queries, i.e. the size of every predicted set.
    pub queries: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    /// Inner width of the position-wise feed-forward blocks.
    pub ffn_dim: usize,
    pub dropout: f64,
    pub vocab_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 64,
            l_max: 64,
            relation_types: 2,
            queries: 10,
            encoder_layers: 2,
            decoder_layers: 3,
            heads: 4,
            ffn_dim: 256,
            dropout: 0.1,
            vocab_size: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return fail(format!("hidden size {} must be a positive multiple of heads {}", self.d, self.heads));
        }
        if self.queries == 0 {
            return fail("at least one triple query is required".into());
        }
        if self.relation_types < 2 {
            return fail(format!(
                "relation_types must count at least one relation plus the no-triple class, got {}",
                self.relation_types
            ));
        }
        if self.l_max < 3 {
            return fail(format!("l_max {} leaves no room for a token between the markers", self.l_max));
        }
        if self.ffn_dim == 0 {
            return fail("ffn_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if self.vocab_size < crate::data::vocab::RESERVED {
            return fail(format!("vocab_size {} smaller than the reserved ids", self.vocab_size));
        }
        Ok(())
    }

    /// Copy sized for `corpus`: its vocabulary and relation inventory.
    pub fn sized_for(&self, corpus: &crate::data::Corpus) -> Self {
        ModelConfig {
            vocab_size: corpus.vocab.len(),
            relation_types: corpus.relations.relation_types(),
            ..self.clone()
        }
    }

    /// Index of the no-triple relation class.
    pub fn null_relation(&self) -> usize {
        self.relation_types - 1
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }
}
