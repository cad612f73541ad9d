//! Define-by-run reverse-mode differentiation.
//!
//! Every operation appends a node to the [`Tape`]; because a node can only
//! reference nodes that already exist, the node list is topologically sorted
//! and [`Tape::backward`] is a single reverse sweep.

use std::cell::RefCell;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{as_matrix, dot, gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Softmax { x: Var, outer: usize, len: usize, inner: usize },
    Tanh(Var),
    Relu(Var),
    Log(Var),
    ClampMin(Var, f64),
    Embedding { table: Var, ids: Vec<usize> },
    LayerNorm { x: Var, gamma: Var, beta: Var, normed: Vec<f64>, rstd: Vec<f64> },
    Dropout { x: Var, mask: Vec<f64> },
    Sum(Var),
    Gather { x: Var, indices: Vec<usize> },
    Reshape(Var),
    NarrowLast { x: Var, start: usize },
    ConcatLast(Vec<Var>),
    PairwiseAdd(Var, Var),
}

struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward pass.
///
/// A tape is confined to one thread. A tape built with [`Tape::training`]
/// carries the random stream used by dropout; an evaluation tape makes
/// dropout the identity.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    rng: RefCell<Option<ChaCha8Rng>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            rng: RefCell::new(None),
        }
    }

    pub fn training(rng: ChaCha8Rng) -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            rng: RefCell::new(Some(rng)),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.borrow().is_some()
    }

    /// Returns the dropout stream, leaving the tape in evaluation mode.
    pub fn into_rng(self) -> Option<ChaCha8Rng> {
        self.rng.into_inner()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].shape.clone()
    }

    pub fn values(&self, v: Var) -> Vec<f64> {
        self.nodes.borrow()[v.0].values.clone()
    }

    pub fn value(&self, v: Var) -> Tensor {
        let nodes = self.nodes.borrow();
        let n = &nodes[v.0];
        Tensor::new(n.shape.clone(), n.values.clone()).expect("node shape is consistent")
    }

    /// Scalar value of a single-element node.
    pub fn item(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].values[0]
    }

    pub fn leaf(&self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Leaf, t.requires_grad())
    }

    pub fn constant(&self, shape: Vec<usize>, values: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, values)?;
        Ok(self.leaf(&t))
    }

    fn push(&self, shape: Vec<usize>, values: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            shape,
            values,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>> {
        let nodes = self.nodes.borrow();
        let (sa, sb) = (&nodes[a.0].shape, &nodes[b.0].shape);
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        Ok(sa.clone())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        nodes[a.0]
            .values
            .iter()
            .zip(&nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.borrow()[a.0].values.iter().map(|&x| f(x)).collect()
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("add", a, b)?;
        let values = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(shape, values, Op::Add(a, b), self.rg(&[a, b])))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("sub", a, b)?;
        let values = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(shape, values, Op::Sub(a, b), self.rg(&[a, b])))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("mul", a, b)?;
        let values = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(shape, values, Op::Mul(a, b), self.rg(&[a, b])))
    }

    /// Adds a vector of length `n` to every row of `a` (`a.shape = [.., n]`).
    pub fn add_row(&self, a: Var, row: Var) -> Result<Var> {
        let (shape, values) = {
            let nodes = self.nodes.borrow();
            let (sa, sr) = (&nodes[a.0].shape, &nodes[row.0].shape);
            let (_, cols) = as_matrix(sa);
            if sr.len() != 1 || sr[0] != cols {
                return Err(Error::ShapeMismatch {
                    op: "add_row",
                    lhs: sa.clone(),
                    rhs: sr.clone(),
                });
            }
            let r = &nodes[row.0].values;
            let values = nodes[a.0]
                .values
                .chunks(cols)
                .flat_map(|chunk| chunk.iter().zip(r).map(|(x, y)| x + y))
                .collect();
            (sa.clone(), values)
        };
        Ok(self.push(shape, values, Op::AddRow(a, row), self.rg(&[a, row])))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let shape = self.shape(a);
        let values = self.map(a, |x| x * c);
        self.push(shape, values, Op::Scale(a, c), self.rg(&[a]))
    }

    /// Matrix product. `a` is `[.., p, q]`; `b` is either `[q, r]` (leading
    /// axes of `a` are flattened into rows) or `[B, q, r]` with `a = [B, p, q]`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let (sa, sb) = (nodes[a.0].shape.clone(), nodes[b.0].shape.clone());
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if sa.len() < 2 {
            return Err(mismatch());
        }
        match sb.len() {
            2 => {
                let (rows, q) = as_matrix(&sa);
                if q != sb[0] {
                    return Err(mismatch());
                }
                let r = sb[1];
                let mut out = vec![0.0; rows * r];
                gemm_nn(&nodes[a.0].values, &nodes[b.0].values, &mut out, rows, q, r);
                let mut shape = sa[..sa.len() - 1].to_vec();
                shape.push(r);
                drop(nodes);
                Ok(self.push(shape, out, Op::MatMul(a, b), self.rg(&[a, b])))
            }
            3 => {
                if sa.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
                    return Err(mismatch());
                }
                let (batch, p, q, r) = (sa[0], sa[1], sa[2], sb[2]);
                let mut out = vec![0.0; batch * p * r];
                for bi in 0..batch {
                    gemm_nn(
                        &nodes[a.0].values[bi * p * q..(bi + 1) * p * q],
                        &nodes[b.0].values[bi * q * r..(bi + 1) * q * r],
                        &mut out[bi * p * r..(bi + 1) * p * r],
                        p,
                        q,
                        r,
                    );
                }
                drop(nodes);
                Ok(self.push(vec![batch, p, r], out, Op::BatchMatMul(a, b), self.rg(&[a, b])))
            }
            _ => Err(mismatch()),
        }
    }

    /// `a · bᵀ` with `a = [.., q]` and `b = [r, q]`.
    pub fn matmul_t(&self, a: Var, b: Var) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let (sa, sb) = (nodes[a.0].shape.clone(), nodes[b.0].shape.clone());
        let (rows, q) = as_matrix(&sa);
        if sa.is_empty() || sb.len() != 2 || sb[1] != q {
            return Err(Error::ShapeMismatch {
                op: "matmul_t",
                lhs: sa,
                rhs: sb,
            });
        }
        let r = sb[0];
        let mut out = vec![0.0; rows * r];
        gemm_nt(&nodes[a.0].values, &nodes[b.0].values, &mut out, rows, q, r);
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(r);
        drop(nodes);
        Ok(self.push(shape, out, Op::MatMulT(a, b), self.rg(&[a, b])))
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let sa = nodes[a.0].shape.clone();
        if sa.len() != 2 {
            return Err(Error::invalid(format!("transpose needs rank 2, got {sa:?}")));
        }
        let (p, q) = (sa[0], sa[1]);
        let src = &nodes[a.0].values;
        let mut out = vec![0.0; p * q];
        for i in 0..p {
            for j in 0..q {
                out[j * p + i] = src[i * q + j];
            }
        }
        drop(nodes);
        Ok(self.push(vec![q, p], out, Op::Transpose(a), self.rg(&[a])))
    }

    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&self, x: Var, axis: usize) -> Result<Var> {
        self.softmax_impl(x, axis, None)
    }

    /// Softmax along the last axis where positions with `mask[j] == false`
    /// receive probability exactly zero.
    pub fn softmax_masked(&self, x: Var, mask: &[bool]) -> Result<Var> {
        let rank = self.shape(x).len();
        if rank == 0 {
            return Err(Error::invalid("softmax of a scalar"));
        }
        self.softmax_impl(x, rank - 1, Some(mask))
    }

    fn softmax_impl(&self, x: Var, axis: usize, mask: Option<&[bool]>) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let shape = nodes[x.0].shape.clone();
        if axis >= shape.len() {
            return Err(Error::invalid(format!("softmax axis {axis} for shape {shape:?}")));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        if let Some(m) = mask {
            if m.len() != len {
                return Err(Error::ShapeMismatch {
                    op: "softmax_masked",
                    lhs: shape,
                    rhs: vec![m.len()],
                });
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::invalid("softmax mask excludes every position"));
            }
        }
        let keep = |j: usize| mask.is_none_or(|m| m[j]);
        let src = &nodes[x.0].values;
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let max = (0..len)
                    .filter(|&j| keep(j))
                    .map(|j| src[at(j)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    if keep(j) {
                        let e = (src[at(j)] - max).exp();
                        out[at(j)] = e;
                        total += e;
                    }
                }
                for j in 0..len {
                    out[at(j)] /= total;
                }
            }
        }
        drop(nodes);
        Ok(self.push(
            shape,
            out,
            Op::Softmax { x, outer, len, inner },
            self.rg(&[x]),
        ))
    }

    pub fn tanh(&self, x: Var) -> Var {
        let values = self.map(x, f64::tanh);
        self.push(self.shape(x), values, Op::Tanh(x), self.rg(&[x]))
    }

    pub fn relu(&self, x: Var) -> Var {
        let values = self.map(x, |v| v.max(0.0));
        self.push(self.shape(x), values, Op::Relu(x), self.rg(&[x]))
    }

    /// Natural logarithm; every input must be strictly positive.
    pub fn log(&self, x: Var) -> Result<Var> {
        if let Some(&bad) = self.nodes.borrow()[x.0].values.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::NonPositiveLog(bad));
        }
        let values = self.map(x, f64::ln);
        Ok(self.push(self.shape(x), values, Op::Log(x), self.rg(&[x])))
    }

    /// `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&self, x: Var, floor: f64) -> Var {
        let values = self.map(x, |v| v.max(floor));
        self.push(self.shape(x), values, Op::ClampMin(x, floor), self.rg(&[x]))
    }

    /// Gathers rows of `table` (`[vocab, d]`); backward scatter-adds.
    pub fn embedding(&self, table: Var, ids: &[usize]) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let shape = &nodes[table.0].shape;
        if shape.len() != 2 {
            return Err(Error::invalid(format!("embedding table must be rank 2, got {shape:?}")));
        }
        let (vocab, d) = (shape[0], shape[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::invalid(format!("embedding id {bad} >= table size {vocab}")));
        }
        let src = &nodes[table.0].values;
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        drop(nodes);
        Ok(self.push(
            vec![ids.len(), d],
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            self.rg(&[table]),
        ))
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(&self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let shape = nodes[x.0].shape.clone();
        let (rows, d) = as_matrix(&shape);
        if nodes[gamma.0].shape != [d] || nodes[beta.0].shape != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: shape,
                rhs: nodes[gamma.0].shape.clone(),
            });
        }
        let src = &nodes[x.0].values;
        let (g, b) = (&nodes[gamma.0].values, &nodes[beta.0].values);
        let mut normed = vec![0.0; rows * d];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            let row = &src[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + eps).sqrt();
            rstd[r] = s;
            for j in 0..d {
                let n = (row[j] - mean) * s;
                normed[r * d + j] = n;
                out[r * d + j] = n * g[j] + b[j];
            }
        }
        drop(nodes);
        Ok(self.push(
            shape,
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normed,
                rstd,
            },
            self.rg(&[x, gamma, beta]),
        ))
    }

    /// Inverted dropout: identity on an evaluation tape or when `p == 0`.
    pub fn dropout(&self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout probability {p} not in [0, 1)")));
        }
        let mut rng = self.rng.borrow_mut();
        let Some(rng) = rng.as_mut() else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let n = self.nodes.borrow()[x.0].values.len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let values = {
            let nodes = self.nodes.borrow();
            nodes[x.0].values.iter().zip(&mask).map(|(v, m)| v * m).collect()
        };
        Ok(self.push(self.shape(x), values, Op::Dropout { x, mask }, self.rg(&[x])))
    }

    /// Sum of all elements, as a scalar of shape `[]`.
    pub fn sum(&self, x: Var) -> Var {
        let total = self.nodes.borrow()[x.0].values.iter().sum();
        self.push(vec![], vec![total], Op::Sum(x), self.rg(&[x]))
    }

    /// Picks elements by flat index into a rank-1 result.
    pub fn gather(&self, x: Var, indices: &[usize]) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let src = &nodes[x.0].values;
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.len()) {
            return Err(Error::invalid(format!(
                "gather index {bad} out of range for {} elements",
                src.len()
            )));
        }
        let values = indices.iter().map(|&i| src[i]).collect();
        drop(nodes);
        Ok(self.push(
            vec![indices.len()],
            values,
            Op::Gather {
                x,
                indices: indices.to_vec(),
            },
            self.rg(&[x]),
        ))
    }

    pub fn reshape(&self, x: Var, shape: &[usize]) -> Result<Var> {
        let n = self.nodes.borrow()[x.0].values.len();
        if shape.iter().product::<usize>() != n {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(x),
                rhs: shape.to_vec(),
            });
        }
        let values = self.values(x);
        Ok(self.push(shape.to_vec(), values, Op::Reshape(x), self.rg(&[x])))
    }

    /// Columns `start..start + len` of the last axis.
    pub fn narrow_last(&self, x: Var, start: usize, len: usize) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let shape = nodes[x.0].shape.clone();
        let (rows, cols) = as_matrix(&shape);
        if start + len > cols {
            return Err(Error::invalid(format!(
                "narrow {start}..{} out of range for {shape:?}",
                start + len
            )));
        }
        let src = &nodes[x.0].values;
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        let mut new_shape = shape;
        *new_shape.last_mut().unwrap() = len;
        drop(nodes);
        Ok(self.push(new_shape, out, Op::NarrowLast { x, start }, self.rg(&[x])))
    }

    /// Concatenation along the last axis; all leading axes must agree.
    pub fn concat_last(&self, parts: &[Var]) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let lead = nodes[first.0].shape[..nodes[first.0].shape.len() - 1].to_vec();
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = &nodes[p.0].shape;
            if s[..s.len() - 1] != lead[..] {
                return Err(Error::ShapeMismatch {
                    op: "concat_last",
                    lhs: nodes[first.0].shape.clone(),
                    rhs: s.clone(),
                });
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&nodes[p.0].values[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        drop(nodes);
        Ok(self.push(shape, out, Op::ConcatLast(parts.to_vec()), self.rg(parts)))
    }

    /// `out[i, j, :] = a[i, :] + b[j, :]` for `a = [m, d]`, `b = [l, d]`.
    pub fn pairwise_add(&self, a: Var, b: Var) -> Result<Var> {
        let nodes = self.nodes.borrow();
        let (sa, sb) = (nodes[a.0].shape.clone(), nodes[b.0].shape.clone());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::ShapeMismatch {
                op: "pairwise_add",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, l, d) = (sa[0], sb[0], sa[1]);
        let (va, vb) = (&nodes[a.0].values, &nodes[b.0].values);
        let mut out = Vec::with_capacity(m * l * d);
        for i in 0..m {
            let ra = &va[i * d..(i + 1) * d];
            for j in 0..l {
                let rb = &vb[j * d..(j + 1) * d];
                out.extend(ra.iter().zip(rb).map(|(x, y)| x + y));
            }
        }
        drop(nodes);
        Ok(self.push(vec![m, l, d], out, Op::PairwiseAdd(a, b), self.rg(&[a, b])))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.0];
        if root.values.len() != 1 || root.shape.len() > 1 {
            return Err(Error::NonScalarLoss(root.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let needs = |v: &Var| nodes[v.0].requires_grad;
            let len_of = |v: &Var| nodes[v.0].values.len();
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        if needs(v) {
                            for (o, gi) in acc(&mut grads, *v, g.len()).iter_mut().zip(&g) {
                                *o += gi;
                            }
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if needs(a) {
                        for (o, gi) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                            *o += gi;
                        }
                    }
                    if needs(b) {
                        for (o, gi) in acc(&mut grads, *b, g.len()).iter_mut().zip(&g) {
                            *o -= gi;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    if needs(a) {
                        let other = &nodes[b.0].values;
                        let ga = acc(&mut grads, *a, g.len());
                        for i in 0..g.len() {
                            ga[i] += g[i] * other[i];
                        }
                    }
                    if needs(b) {
                        let other = &nodes[a.0].values;
                        let gb = acc(&mut grads, *b, g.len());
                        for i in 0..g.len() {
                            gb[i] += g[i] * other[i];
                        }
                    }
                }
                Op::AddRow(a, row) => {
                    if needs(a) {
                        for (o, gi) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                            *o += gi;
                        }
                    }
                    if needs(row) {
                        let n = len_of(row);
                        let gr = acc(&mut grads, *row, n);
                        for chunk in g.chunks(n) {
                            for (o, gi) in gr.iter_mut().zip(chunk) {
                                *o += gi;
                            }
                        }
                    }
                }
                Op::Scale(a, c) => {
                    for (o, gi) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *o += gi * c;
                    }
                }
                Op::MatMul(a, b) => {
                    let (rows, q) = as_matrix(&nodes[a.0].shape);
                    let r = nodes[b.0].shape[1];
                    if needs(a) {
                        let n = len_of(a);
                        gemm_nt(&g, &nodes[b.0].values, acc(&mut grads, *a, n), rows, r, q);
                    }
                    if needs(b) {
                        let n = len_of(b);
                        gemm_tn(&nodes[a.0].values, &g, acc(&mut grads, *b, n), rows, q, r);
                    }
                }
                Op::BatchMatMul(a, b) => {
                    let sa = &nodes[a.0].shape;
                    let (batch, p, q) = (sa[0], sa[1], sa[2]);
                    let r = nodes[b.0].shape[2];
                    if needs(a) {
                        let n = len_of(a);
                        let ga = acc(&mut grads, *a, n);
                        for bi in 0..batch {
                            gemm_nt(
                                &g[bi * p * r..(bi + 1) * p * r],
                                &nodes[b.0].values[bi * q * r..(bi + 1) * q * r],
                                &mut ga[bi * p * q..(bi + 1) * p * q],
                                p,
                                r,
                                q,
                            );
                        }
                    }
                    if needs(b) {
                        let n = len_of(b);
                        let gb = acc(&mut grads, *b, n);
                        for bi in 0..batch {
                            gemm_tn(
                                &nodes[a.0].values[bi * p * q..(bi + 1) * p * q],
                                &g[bi * p * r..(bi + 1) * p * r],
                                &mut gb[bi * q * r..(bi + 1) * q * r],
                                p,
                                q,
                                r,
                            );
                        }
                    }
                }
                Op::MatMulT(a, b) => {
                    // c = a bᵀ: da = g b, db = gᵀ a
                    let (rows, q) = as_matrix(&nodes[a.0].shape);
                    let r = nodes[b.0].shape[0];
                    if needs(a) {
                        let n = len_of(a);
                        gemm_nn(&g, &nodes[b.0].values, acc(&mut grads, *a, n), rows, r, q);
                    }
                    if needs(b) {
                        let n = len_of(b);
                        gemm_tn(&g, &nodes[a.0].values, acc(&mut grads, *b, n), rows, r, q);
                    }
                }
                Op::Transpose(a) => {
                    let (p, q) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                    let ga = acc(&mut grads, *a, p * q);
                    for i in 0..p {
                        for j in 0..q {
                            ga[i * q + j] += g[j * p + i];
                        }
                    }
                }
                Op::Softmax { x, outer, len, inner } => {
                    let y = &node.values;
                    let gx = acc(&mut grads, *x, y.len());
                    for o in 0..*outer {
                        for i in 0..*inner {
                            let at = |j: usize| o * len * inner + j * inner + i;
                            let s: f64 = (0..*len).map(|j| g[at(j)] * y[at(j)]).sum();
                            for j in 0..*len {
                                gx[at(j)] += y[at(j)] * (g[at(j)] - s);
                            }
                        }
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.values;
                    let gx = acc(&mut grads, *x, y.len());
                    for i in 0..y.len() {
                        gx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Relu(x) => {
                    let src = &nodes[x.0].values;
                    let gx = acc(&mut grads, *x, src.len());
                    for i in 0..src.len() {
                        if src[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                }
                Op::Log(x) => {
                    let src = &nodes[x.0].values;
                    let gx = acc(&mut grads, *x, src.len());
                    for i in 0..src.len() {
                        gx[i] += g[i] / src[i];
                    }
                }
                Op::ClampMin(x, floor) => {
                    let src = &nodes[x.0].values;
                    let gx = acc(&mut grads, *x, src.len());
                    for i in 0..src.len() {
                        if src[i] > *floor {
                            gx[i] += g[i];
                        }
                    }
                }
                Op::Embedding { table, ids } => {
                    let d = nodes[table.0].shape[1];
                    let n = len_of(table);
                    let gt = acc(&mut grads, *table, n);
                    for (row, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            gt[id * d + j] += g[row * d + j];
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normed,
                    rstd,
                } => {
                    let d = nodes[gamma.0].values.len();
                    let rows = rstd.len();
                    let gam = &nodes[gamma.0].values;
                    if needs(gamma) {
                        let gg = acc(&mut grads, *gamma, d);
                        for r in 0..rows {
                            for j in 0..d {
                                gg[j] += g[r * d + j] * normed[r * d + j];
                            }
                        }
                    }
                    if needs(beta) {
                        let gb = acc(&mut grads, *beta, d);
                        for r in 0..rows {
                            for j in 0..d {
                                gb[j] += g[r * d + j];
                            }
                        }
                    }
                    if needs(x) {
                        let gx = acc(&mut grads, *x, rows * d);
                        for r in 0..rows {
                            let gn: Vec<f64> = (0..d).map(|j| g[r * d + j] * gam[j]).collect();
                            let nrow = &normed[r * d..(r + 1) * d];
                            let mean_gn = gn.iter().sum::<f64>() / d as f64;
                            let mean_gn_n = dot(&gn, nrow) / d as f64;
                            for j in 0..d {
                                gx[r * d + j] += rstd[r] * (gn[j] - mean_gn - nrow[j] * mean_gn_n);
                            }
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    let gx = acc(&mut grads, *x, mask.len());
                    for i in 0..mask.len() {
                        gx[i] += g[i] * mask[i];
                    }
                }
                Op::Sum(x) => {
                    let n = len_of(x);
                    for o in acc(&mut grads, *x, n).iter_mut() {
                        *o += g[0];
                    }
                }
                Op::Gather { x, indices } => {
                    let n = len_of(x);
                    let gx = acc(&mut grads, *x, n);
                    for (k, &i) in indices.iter().enumerate() {
                        gx[i] += g[k];
                    }
                }
                Op::Reshape(x) => {
                    for (o, gi) in acc(&mut grads, *x, g.len()).iter_mut().zip(&g) {
                        *o += gi;
                    }
                }
                Op::NarrowLast { x, start } => {
                    let cols = *nodes[x.0].shape.last().unwrap();
                    let len = *node.shape.last().unwrap();
                    let n = len_of(x);
                    let gx = acc(&mut grads, *x, n);
                    for (r, chunk) in g.chunks(len).enumerate() {
                        for (j, gi) in chunk.iter().enumerate() {
                            gx[r * cols + start + j] += gi;
                        }
                    }
                }
                Op::ConcatLast(parts) => {
                    let total = *node.shape.last().unwrap();
                    let rows = g.len() / total.max(1);
                    let mut offset = 0;
                    for p in parts {
                        let w = *nodes[p.0].shape.last().unwrap();
                        if needs(p) {
                            let gp = acc(&mut grads, *p, rows * w);
                            for r in 0..rows {
                                for j in 0..w {
                                    gp[r * w + j] += g[r * total + offset + j];
                                }
                            }
                        }
                        offset += w;
                    }
                }
                Op::PairwiseAdd(a, b) => {
                    let (m, d) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                    let l = nodes[b.0].shape[0];
                    if needs(a) {
                        let ga = acc(&mut grads, *a, m * d);
                        for i in 0..m {
                            for j in 0..l {
                                let base = (i * l + j) * d;
                                for k in 0..d {
                                    ga[i * d + k] += g[base + k];
                                }
                            }
                        }
                    }
                    if needs(b) {
                        let gb = acc(&mut grads, *b, l * d);
                        for i in 0..m {
                            for j in 0..l {
                                let base = (i * l + j) * d;
                                for k in 0..d {
                                    gb[j * d + k] += g[base + k];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}
