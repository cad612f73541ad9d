//! Sentence encoder and the non-autoregressive triple-set decoder.
//!
//! The encoder maps `[CLS] tokens [SEP]` to `H_e` (`[l, d]`). The decoder
//! starts from `m` learned triple queries shared by every sentence, runs
//! `N` blocks of unmasked self-attention, inter-attention to `H_e` and a
//! feed-forward layer, and reads each of the `m` output states with five
//! heads: a relation classifier and four start/end pointers over the `l`
//! sentence positions.

mod config;
mod layers;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::ModelConfig;
use layers::{DecoderLayer, EncoderLayer, LayerNorm, Linear, ParamBuilder, PointerHead};

use crate::data::vocab::{CLS, PAD, SEP, UNK};
use crate::error::{Error, Result};
use crate::numerics::{Bound, ParamGroup, ParamId, ParamSet, Tape, Var};

/// One of the four span pointers of a predicted triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pointer {
    SubjectStart,
    SubjectEnd,
    ObjectStart,
    ObjectEnd,
}

impl Pointer {
    pub const ALL: [Pointer; 4] = [
        Pointer::SubjectStart,
        Pointer::SubjectEnd,
        Pointer::ObjectStart,
        Pointer::ObjectEnd,
    ];

    fn name(self) -> &'static str {
        match self {
            Pointer::SubjectStart => "subject_start",
            Pointer::SubjectEnd => "subject_end",
            Pointer::ObjectStart => "object_start",
            Pointer::ObjectEnd => "object_end",
        }
    }
}

/// The five categorical distributions of one predicted triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriplePrediction {
    /// Over the `t` relation types, no-triple last.
    pub relation: Vec<f64>,
    /// Over the `l` sentence positions.
    pub subject_start: Vec<f64>,
    pub subject_end: Vec<f64>,
    pub object_start: Vec<f64>,
    pub object_end: Vec<f64>,
}

impl TriplePrediction {
    pub fn pointer(&self, p: Pointer) -> &[f64] {
        match p {
            Pointer::SubjectStart => &self.subject_start,
            Pointer::SubjectEnd => &self.subject_end,
            Pointer::ObjectStart => &self.object_start,
            Pointer::ObjectEnd => &self.object_end,
        }
    }

    pub fn pointer_mut(&mut self, p: Pointer) -> &mut Vec<f64> {
        match p {
            Pointer::SubjectStart => &mut self.subject_start,
            Pointer::SubjectEnd => &mut self.subject_end,
            Pointer::ObjectStart => &mut self.object_start,
            Pointer::ObjectEnd => &mut self.object_end,
        }
    }

    /// Number of sentence positions the pointers range over.
    pub fn positions(&self) -> usize {
        self.subject_start.len()
    }
}

/// Exactly `m` predictions, index-aligned with the triple queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub predictions: Vec<TriplePrediction>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    /// Checks that all distributions have consistent lengths and sum to one.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        let Some(first) = self.predictions.first() else {
            return Err(Error::invalid("empty prediction set"));
        };
        let (t, l) = (first.relation.len(), first.positions());
        for (i, p) in self.predictions.iter().enumerate() {
            if p.relation.len() != t {
                return Err(Error::invalid(format!("prediction {i}: relation width {} != {t}", p.relation.len())));
            }
            let dists = std::iter::once(("relation", p.relation.as_slice()))
                .chain(Pointer::ALL.iter().map(|&k| (k.name(), p.pointer(k))));
            for (name, dist) in dists {
                if name != "relation" && dist.len() != l {
                    return Err(Error::invalid(format!("prediction {i}: {name} has {} positions, expected {l}", dist.len())));
                }
                if dist.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::invalid(format!("prediction {i}: {name} has entries outside [0, 1]")));
                }
                let total: f64 = dist.iter().sum();
                if (total - 1.0).abs() > tolerance {
                    return Err(Error::invalid(format!("prediction {i}: {name} sums to {total}")));
                }
            }
        }
        Ok(())
    }
}

/// Encoder output for one sentence.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    /// `H_e`, shape `[positions, d]`.
    pub states: Var,
    /// Token ids with boundary markers (and any padding).
    pub token_ids: Vec<usize>,
    /// Real length `l` including both markers.
    pub length: usize,
    /// `false` at padding positions; `None` when unpadded.
    pub mask: Option<Vec<bool>>,
}

/// Decoder output as tape variables.
#[derive(Debug, Clone)]
pub struct SetOutput {
    /// `[m, t]` relation probabilities.
    pub relation: Var,
    /// `[m, positions]` per pointer, in [`Pointer::ALL`] order.
    pub pointers: [Var; 4],
    /// Self-attention probabilities for each decoder layer and head (`[m, m]`).
    pub self_attention: Vec<Vec<Var>>,
}

impl SetOutput {
    pub fn pointer(&self, p: Pointer) -> Var {
        self.pointers[p as usize]
    }

    /// Wraps fixed distributions as tape leaves, e.g. for scoring
    /// hand-written predictions with the set loss.
    pub fn from_predictions(tape: &Tape, preds: &PredictionSet) -> Result<Self> {
        preds.validate(1e-9)?;
        let m = preds.len();
        let t = preds.predictions[0].relation.len();
        let l = preds.predictions[0].positions();
        let relation = tape.constant(
            vec![m, t],
            preds.predictions.iter().flat_map(|p| p.relation.iter().copied()).collect(),
        )?;
        let mut pointers = [relation; 4];
        for k in Pointer::ALL {
            pointers[k as usize] = tape.constant(
                vec![m, l],
                preds.predictions.iter().flat_map(|p| p.pointer(k).iter().copied()).collect(),
            )?;
        }
        Ok(SetOutput {
            relation,
            pointers,
            self_attention: Vec::new(),
        })
    }

    /// Copies the distributions off the tape.
    pub fn detach(&self, tape: &Tape) -> PredictionSet {
        let rel = tape.value(self.relation);
        let (m, t) = (rel.shape()[0], rel.shape()[1]);
        let ptrs: Vec<_> = self.pointers.iter().map(|&v| tape.value(v)).collect();
        let l = ptrs[0].shape()[1];
        let predictions = (0..m)
            .map(|i| TriplePrediction {
                relation: rel.values()[i * t..(i + 1) * t].to_vec(),
                subject_start: ptrs[0].values()[i * l..(i + 1) * l].to_vec(),
                subject_end: ptrs[1].values()[i * l..(i + 1) * l].to_vec(),
                object_start: ptrs[2].values()[i * l..(i + 1) * l].to_vec(),
                object_end: ptrs[3].values()[i * l..(i + 1) * l].to_vec(),
            })
            .collect();
        PredictionSet { predictions }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    token_embedding: ParamId,
    position_embedding: ParamId,
    embedding_norm: LayerNorm,
    encoder: Vec<EncoderLayer>,
    queries: ParamId,
    decoder: Vec<DecoderLayer>,
    relation: Linear,
    pointers: Vec<PointerHead>,
}

impl Layout {
    fn build(config: &ModelConfig, seed: u64) -> (Layout, ParamSet) {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d;
        let std = 1.0 / (d as f64).sqrt();
        let mut pb = ParamBuilder {
            params: &mut params,
            rng: &mut rng,
            group: ParamGroup::Encoder,
        };
        let token_embedding = pb.normal("encoder.token_embedding", &[config.vocab_size, d], std);
        let position_embedding = pb.normal("encoder.position_embedding", &[config.l_max, d], std);
        let embedding_norm = pb.norm("encoder.embedding_norm", d);
        let encoder = (0..config.encoder_layers)
            .map(|i| EncoderLayer::build(&mut pb, &format!("encoder.layers.{i}"), d, config.heads, config.ffn_dim))
            .collect();

        pb.group = ParamGroup::Decoder;
        let queries = pb.normal("decoder.triple_queries", &[config.queries, d], std);
        let decoder = (0..config.decoder_layers)
            .map(|i| DecoderLayer::build(&mut pb, &format!("decoder.layers.{i}"), d, config.heads, config.ffn_dim))
            .collect();
        let relation = pb.linear("heads.relation", d, config.relation_types, false);
        let pointers = Pointer::ALL
            .iter()
            .map(|p| PointerHead::build(&mut pb, &format!("heads.{}", p.name()), d))
            .collect();
        let layout = Layout {
            token_embedding,
            position_embedding,
            embedding_norm,
            encoder,
            queries,
            decoder,
            relation,
            pointers,
        };
        (layout, params)
    }
}

/// Encoder, decoder and prediction heads together with their parameters.
#[derive(Debug, Clone)]
pub struct TripleSetModel {
    config: ModelConfig,
    params: ParamSet,
    layout: Layout,
}

impl TripleSetModel {
    /// Fresh parameters drawn deterministically from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, params) = Layout::build(&config, seed);
        Ok(TripleSetModel { config, params, layout })
    }

    /// Rebuilds a model from stored parameters, which must match `config`.
    pub fn from_params(config: ModelConfig, stored: &ParamSet) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        model.params.copy_values_from(stored)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn bind(&self, tape: &Tape) -> Bound {
        self.params.bind(tape)
    }

    fn marked_ids(&self, tokens: &[usize]) -> Result<Vec<usize>> {
        let len = tokens.len() + 2;
        if len > self.config.l_max {
            return Err(Error::TooLong {
                len,
                max: self.config.l_max,
            });
        }
        let mut ids = Vec::with_capacity(len);
        ids.push(CLS);
        ids.extend(tokens.iter().map(|&t| if t < self.config.vocab_size { t } else { UNK }));
        ids.push(SEP);
        Ok(ids)
    }

    /// Encodes token ids (without boundary markers); ids outside the
    /// vocabulary become UNK. Dropout is active only on a training tape.
    pub fn encode(&self, tape: &Tape, b: &Bound, tokens: &[usize]) -> Result<EncodedSentence> {
        let ids = self.marked_ids(tokens)?;
        let length = ids.len();
        let states = self.encode_ids(tape, b, &ids, None)?;
        Ok(EncodedSentence {
            states,
            token_ids: ids,
            length,
            mask: None,
        })
    }

    /// Like [`encode`](Self::encode) but right-pads to `pad_to` positions
    /// with `fill` tokens that are masked out of every attention.
    pub fn encode_padded(
        &self,
        tape: &Tape,
        b: &Bound,
        tokens: &[usize],
        pad_to: usize,
        fill: Option<&[usize]>,
    ) -> Result<EncodedSentence> {
        let mut ids = self.marked_ids(tokens)?;
        let length = ids.len();
        if pad_to < length || pad_to > self.config.l_max {
            return Err(Error::invalid(format!(
                "pad length {pad_to} must lie in {length}..={}",
                self.config.l_max
            )));
        }
        let filler = fill.unwrap_or(&[]);
        for k in 0..pad_to - length {
            let t = filler.get(k).copied().unwrap_or(PAD);
            ids.push(if t < self.config.vocab_size { t } else { UNK });
        }
        let mask: Vec<bool> = (0..pad_to).map(|i| i < length).collect();
        let states = self.encode_ids(tape, b, &ids, Some(&mask))?;
        Ok(EncodedSentence {
            states,
            token_ids: ids,
            length,
            mask: Some(mask),
        })
    }

    fn encode_ids(&self, tape: &Tape, b: &Bound, ids: &[usize], mask: Option<&[bool]>) -> Result<Var> {
        let p = self.config.dropout;
        let tok = tape.embedding(b.var(self.layout.token_embedding), ids)?;
        let positions: Vec<usize> = (0..ids.len()).collect();
        let pos = tape.embedding(b.var(self.layout.position_embedding), &positions)?;
        let mut x = self.layout.embedding_norm.forward(tape, b, tape.add(tok, pos)?)?;
        x = tape.dropout(x, p)?;
        for layer in &self.layout.encoder {
            x = layer.forward(tape, b, x, mask, p)?;
        }
        Ok(x)
    }

    /// Decodes the full set of `m` triples in one pass.
    pub fn decode_set(&self, tape: &Tape, b: &Bound, sentence: &EncodedSentence) -> Result<SetOutput> {
        let p = self.config.dropout;
        let mask = sentence.mask.as_deref();
        let mut x = b.var(self.layout.queries);
        let mut self_attention = Vec::with_capacity(self.layout.decoder.len());
        for layer in &self.layout.decoder {
            let step = layer.forward(tape, b, x, sentence.states, mask, p)?;
            x = step.states;
            self_attention.push(step.self_attention);
        }
        let relation = tape.softmax(self.layout.relation.forward(tape, b, x)?, 1)?;
        let mut pointers = [relation; 4];
        for (k, head) in self.layout.pointers.iter().enumerate() {
            pointers[k] = head.forward(tape, b, x, sentence.states, mask)?;
        }
        Ok(SetOutput {
            relation,
            pointers,
            self_attention,
        })
    }

    /// Encode then decode.
    pub fn forward(&self, tape: &Tape, b: &Bound, tokens: &[usize]) -> Result<(EncodedSentence, SetOutput)> {
        let enc = self.encode(tape, b, tokens)?;
        let out = self.decode_set(tape, b, &enc)?;
        Ok((enc, out))
    }

    /// Evaluation-mode prediction for one sentence.
    pub fn predict(&self, tokens: &[usize]) -> Result<PredictionSet> {
        let tape = Tape::new();
        let b = self.bind(&tape);
        let (_, out) = self.forward(&tape, &b, tokens)?;
        Ok(out.detach(&tape))
    }
}
