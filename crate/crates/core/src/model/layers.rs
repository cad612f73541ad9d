use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::numerics::{Bound, ParamGroup, ParamId, ParamSet, Tape, Tensor, Var};

const LN_EPS: f64 = 1e-5;

/// Registers freshly initialized parameters in construction order.
pub(crate) struct ParamBuilder<'a> {
    pub params: &'a mut ParamSet,
    pub rng: &'a mut ChaCha8Rng,
    pub group: ParamGroup,
}

impl ParamBuilder<'_> {
    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).expect("positive std");
        let values = (0..n).map(|_| dist.sample(&mut *self.rng)).collect();
        let t = Tensor::new(shape.to_vec(), values).expect("shape matches");
        self.params.insert(name, self.group, t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let t = Tensor::new(shape.to_vec(), vec![value; n]).expect("shape matches");
        self.params.insert(name, self.group, t)
    }

    pub fn linear(&mut self, name: &str, d_in: usize, d_out: usize, bias: bool) -> Linear {
        let weight = self.normal(&format!("{name}.weight"), &[d_out, d_in], 1.0 / (d_in as f64).sqrt());
        let bias = bias.then(|| self.constant(&format!("{name}.bias"), &[d_out], 0.0));
        Linear { weight, bias }
    }

    pub fn norm(&mut self, name: &str, d: usize) -> LayerNorm {
        LayerNorm {
            gamma: self.constant(&format!("{name}.gamma"), &[d], 1.0),
            beta: self.constant(&format!("{name}.beta"), &[d], 0.0),
        }
    }
}

/// `y = x Wᵀ + b` with `W` stored as `[out, in]`.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn forward(&self, tape: &Tape, b: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul_t(x, b.var(self.weight))?;
        match self.bias {
            Some(bias) => tape.add_row(y, b.var(bias)),
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn forward(&self, tape: &Tape, b: &Bound, x: Var) -> Result<Var> {
        tape.layer_norm(x, b.var(self.gamma), b.var(self.beta), LN_EPS)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn build(pb: &mut ParamBuilder, name: &str, d: usize, heads: usize) -> Self {
        MultiHeadAttention {
            query: pb.linear(&format!("{name}.query"), d, d, true),
            key: pb.linear(&format!("{name}.key"), d, d, true),
            value: pb.linear(&format!("{name}.value"), d, d, true),
            output: pb.linear(&format!("{name}.output"), d, d, true),
            heads,
        }
    }

    /// Unmasked scaled dot-product attention from `queries` to `memory`;
    /// `key_mask[j] == false` hides memory row `j`. Returns the output and
    /// the per-head attention probabilities (`[lq, lk]` each).
    pub fn forward(
        &self,
        tape: &Tape,
        b: &Bound,
        queries: Var,
        memory: Var,
        key_mask: Option<&[bool]>,
    ) -> Result<(Var, Vec<Var>)> {
        let q = self.query.forward(tape, b, queries)?;
        let k = self.key.forward(tape, b, memory)?;
        let v = self.value.forward(tape, b, memory)?;
        let d = *tape.shape(q).last().unwrap();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut contexts = Vec::with_capacity(self.heads);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.narrow_last(q, h * dh, dh)?;
            let kh = tape.narrow_last(k, h * dh, dh)?;
            let vh = tape.narrow_last(v, h * dh, dh)?;
            let scores = tape.scale(tape.matmul_t(qh, kh)?, scale);
            let p = match key_mask {
                Some(mask) => tape.softmax_masked(scores, mask)?,
                None => tape.softmax(scores, 1)?,
            };
            contexts.push(tape.matmul(p, vh)?);
            probs.push(p);
        }
        let joined = tape.concat_last(&contexts)?;
        Ok((self.output.forward(tape, b, joined)?, probs))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn build(pb: &mut ParamBuilder, name: &str, d: usize, hidden: usize) -> Self {
        FeedForward {
            inner: pb.linear(&format!("{name}.inner"), d, hidden, true),
            outer: pb.linear(&format!("{name}.outer"), hidden, d, true),
        }
    }

    pub fn forward(&self, tape: &Tape, b: &Bound, x: Var) -> Result<Var> {
        let h = tape.relu(self.inner.forward(tape, b, x)?);
        self.outer.forward(tape, b, h)
    }
}

/// Post-norm transformer encoder block.
#[derive(Debug, Clone)]
pub(crate) struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub attention_norm: LayerNorm,
    pub ffn: FeedForward,
    pub ffn_norm: LayerNorm,
}

impl EncoderLayer {
    pub fn build(pb: &mut ParamBuilder, name: &str, d: usize, heads: usize, ffn: usize) -> Self {
        EncoderLayer {
            attention: MultiHeadAttention::build(pb, &format!("{name}.attention"), d, heads),
            attention_norm: pb.norm(&format!("{name}.attention_norm"), d),
            ffn: FeedForward::build(pb, &format!("{name}.ffn"), d, ffn),
            ffn_norm: pb.norm(&format!("{name}.ffn_norm"), d),
        }
    }

    pub fn forward(&self, tape: &Tape, b: &Bound, x: Var, mask: Option<&[bool]>, p: f64) -> Result<Var> {
        let (att, _) = self.attention.forward(tape, b, x, x, mask)?;
        let x = self.attention_norm.forward(tape, b, tape.add(x, tape.dropout(att, p)?)?)?;
        let ff = self.ffn.forward(tape, b, x)?;
        self.ffn_norm.forward(tape, b, tape.add(x, tape.dropout(ff, p)?)?)
    }
}

/// Non-autoregressive decoder block: unmasked self-attention among the
/// query states, inter-attention to the sentence, feed-forward.
#[derive(Debug, Clone)]
pub(crate) struct DecoderLayer {
    pub self_attention: MultiHeadAttention,
    pub self_norm: LayerNorm,
    pub cross_attention: MultiHeadAttention,
    pub cross_norm: LayerNorm,
    pub ffn: FeedForward,
    pub ffn_norm: LayerNorm,
}

pub(crate) struct DecoderStep {
    pub states: Var,
    pub self_attention: Vec<Var>,
}

impl DecoderLayer {
    pub fn build(pb: &mut ParamBuilder, name: &str, d: usize, heads: usize, ffn: usize) -> Self {
        DecoderLayer {
            self_attention: MultiHeadAttention::build(pb, &format!("{name}.self_attention"), d, heads),
            self_norm: pb.norm(&format!("{name}.self_norm"), d),
            cross_attention: MultiHeadAttention::build(pb, &format!("{name}.cross_attention"), d, heads),
            cross_norm: pb.norm(&format!("{name}.cross_norm"), d),
            ffn: FeedForward::build(pb, &format!("{name}.ffn"), d, ffn),
            ffn_norm: pb.norm(&format!("{name}.ffn_norm"), d),
        }
    }

    pub fn forward(
        &self,
        tape: &Tape,
        b: &Bound,
        x: Var,
        sentence: Var,
        sentence_mask: Option<&[bool]>,
        p: f64,
    ) -> Result<DecoderStep> {
        let (att, self_probs) = self.self_attention.forward(tape, b, x, x, None)?;
        let x = self.self_norm.forward(tape, b, tape.add(x, tape.dropout(att, p)?)?)?;
        let (cross, _) = self.cross_attention.forward(tape, b, x, sentence, sentence_mask)?;
        let x = self.cross_norm.forward(tape, b, tape.add(x, tape.dropout(cross, p)?)?)?;
        let ff = self.ffn.forward(tape, b, x)?;
        let states = self.ffn_norm.forward(tape, b, tape.add(x, tape.dropout(ff, p)?)?)?;
        Ok(DecoderStep {
            states,
            self_attention: self_probs,
        })
    }
}

/// Start or end pointer over sentence positions:
/// `softmax(scoreᵀ tanh(W_query h_d + W_token H_e))`.
#[derive(Debug, Clone)]
pub(crate) struct PointerHead {
    pub query: ParamId,
    pub token: ParamId,
    pub score: ParamId,
}

impl PointerHead {
    pub fn build(pb: &mut ParamBuilder, name: &str, d: usize) -> Self {
        let std = 1.0 / (d as f64).sqrt();
        PointerHead {
            query: pb.normal(&format!("{name}.query"), &[d, d], std),
            token: pb.normal(&format!("{name}.token"), &[d, d], std),
            score: pb.normal(&format!("{name}.score"), &[d], std),
        }
    }

    /// `decoded` is `[m, d]`, `sentence` is `[l, d]`; returns `[m, l]` probabilities.
    pub fn forward(
        &self,
        tape: &Tape,
        b: &Bound,
        decoded: Var,
        sentence: Var,
        mask: Option<&[bool]>,
    ) -> Result<Var> {
        let q = tape.matmul_t(decoded, b.var(self.query))?;
        let k = tape.matmul_t(sentence, b.var(self.token))?;
        let (m, l) = (tape.shape(q)[0], tape.shape(k)[0]);
        let d = tape.shape(q)[1];
        let hidden = tape.tanh(tape.pairwise_add(q, k)?);
        let v = tape.reshape(b.var(self.score), &[1, d])?;
        let logits = tape.reshape(tape.matmul_t(hidden, v)?, &[m, l])?;
        match mask {
            Some(mask) => tape.softmax_masked(logits, mask),
            None => tape.softmax(logits, 1),
        }
    }
}
