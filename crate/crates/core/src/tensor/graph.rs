use super::gemm::gemm;
use super::{Result, Tensor, TensorError};

/// Handle to a node of a [`Graph`].
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
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        n: usize,
        k: usize,
        m: usize,
        b_batched: bool,
    },
    Transpose {
        a: Var,
        batch: usize,
        rows: usize,
        cols: usize,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    AddBias {
        a: Var,
        bias: Var,
    },
    Scale {
        a: Var,
        factor: f64,
    },
    MulConst {
        a: Var,
        factor: Vec<f64>,
    },
    Relu {
        a: Var,
    },
    RowSoftmax {
        a: Var,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Concat {
        parts: Vec<(Var, usize)>,
    },
    Slice {
        a: Var,
        start: usize,
        width: usize,
    },
    Reshape {
        a: Var,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        probs: Vec<f64>,
    },
    Sum {
        a: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of operations. Nodes are appended in evaluation order, so reverse
/// insertion order is a valid topological order for the backward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Insert a tensor as a leaf. Gradients are only tracked for leaves
    /// created with `requires_grad = true` and for nodes depending on them.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` call with respect to `v`, if any
    /// flowed into it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Matrix product. Supports `[n,k] x [k,m]`, `[.., n, k] x [k, m]`
    /// (the left operand is flattened to rows) and batched
    /// `[b, n, k] x [b, k, m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let err = || shape_err("matmul", &sa, &sb);
        let (batch, n, k, m, b_batched, out_shape) = match (sa.len(), sb.len()) {
            (ra, 2) if ra >= 2 => {
                let k = sa[ra - 1];
                if k != sb[0] {
                    return Err(err());
                }
                let n: usize = sa[..ra - 1].iter().product();
                let mut out = sa[..ra - 1].to_vec();
                out.push(sb[1]);
                (1, n, k, sb[1], false, out)
            }
            (3, 3) => {
                if sa[0] != sb[0] || sa[2] != sb[1] {
                    return Err(err());
                }
                (sa[0], sa[1], sa[2], sb[2], true, vec![sa[0], sa[1], sb[2]])
            }
            _ => return Err(err()),
        };
        let mut out = vec![0.0; batch * n * m];
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            for bi in 0..batch {
                let bs = if b_batched { &bv[bi * k * m..(bi + 1) * k * m] } else { bv };
                gemm(
                    n,
                    k,
                    m,
                    &av[bi * n * k..(bi + 1) * n * k],
                    false,
                    bs,
                    false,
                    0.0,
                    &mut out[bi * n * m..(bi + 1) * n * m],
                );
            }
        }
        let rg = self.needs(&[a, b]);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::MatMul {
                a,
                b,
                batch,
                n,
                k,
                m,
                b_batched,
            },
            rg,
        ))
    }

    /// Swap the last two dimensions (rank 2 or 3).
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let (batch, rows, cols, out_shape) = match s.len() {
            2 => (1, s[0], s[1], vec![s[1], s[0]]),
            3 => (s[0], s[1], s[2], vec![s[0], s[2], s[1]]),
            _ => return Err(shape_err("transpose", &s, &[])),
        };
        let x = self.value(a).data();
        let mut out = vec![0.0; x.len()];
        transpose_into(x, &mut out, batch, rows, cols);
        let rg = self.needs(&[a]);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Transpose { a, batch, rows, cols },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", self.shape(a), self.shape(b)));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add { a, b }, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("mul", self.shape(a), self.shape(b)));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul { a, b }, rg))
    }

    /// Add a `[last_dim]` bias to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let d = self.value(a).last_dim();
        if self.shape(bias) != [d] {
            return Err(shape_err("add_bias", self.shape(a), self.shape(bias)));
        }
        let bv = self.value(bias).data();
        let data = self
            .value(a)
            .data()
            .chunks(d)
            .flat_map(|row| row.iter().zip(bv).map(|(x, b)| x + b))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a, bias]);
        Ok(self.push(Tensor::new(shape, data)?, Op::AddBias { a, bias }, rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let data = self.value(a).data().iter().map(|x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Scale { a, factor }, rg))
    }

    /// Elementwise product with a constant buffer (dropout, head masks).
    pub fn mul_const(&mut self, a: Var, factor: Vec<f64>) -> Result<Var> {
        if factor.len() != self.value(a).numel() {
            return Err(shape_err("mul_const", self.shape(a), &[factor.len()]));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(&factor)
            .map(|(x, f)| x * f)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::MulConst { a, factor }, rg))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let data = self.value(a).data().iter().map(|&x| x.max(0.0)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Relu { a }, rg))
    }

    /// Softmax over the last dimension. Entries of `-inf` receive zero
    /// weight; every row needs at least one finite entry.
    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let d = self.value(a).last_dim();
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(d) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(TensorError::Numerical(format!(
                    "row_softmax: row without a finite entry (max = {max})"
                )));
            }
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let shape = self.shape(a).to_vec();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::RowSoftmax { a }, rg))
    }

    /// Layer normalisation over the last dimension followed by the affine
    /// map `gamma * xhat + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err("layer_norm", self.shape(x), self.shape(gamma)));
        }
        let xv = self.value(x).data();
        let gv = self.value(gamma).data();
        let bv = self.value(beta).data();
        let rows = xv.len() / d;
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + eps).sqrt();
            rstd[r] = rs;
            for c in 0..d {
                let h = (row[c] - mean) * rs;
                xhat[r * d + c] = h;
                out[r * d + c] = h * gv[c] + bv[c];
            }
        }
        let shape = self.shape(x).to_vec();
        let rg = self.needs(&[x, gamma, beta]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    /// Gather rows of a `[vocab, d]` table; output is `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 {
            return Err(shape_err("embedding", &s, &[ids.len()]));
        }
        let (vocab, d) = (s[0], s[1]);
        let tv = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(TensorError::Index {
                    op: "embedding",
                    index: id,
                    size: vocab,
                });
            }
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let rg = self.needs(&[table]);
        Ok(self.push(
            Tensor::new(vec![ids.len(), d], out)?,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Concatenate along the last dimension; leading dimensions must agree.
    pub fn concat_last_dim(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("concat_last_dim", &[], &[]))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || s[..lead.len()] != lead[..] {
                return Err(shape_err("concat_last_dim", self.shape(*first), s));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = vec![0.0; rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for r in 0..rows {
                out[r * total + offset..r * total + offset + w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let mut shape = lead;
        shape.push(total);
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                parts: parts.iter().copied().zip(widths).collect(),
            },
            rg,
        ))
    }

    /// Columns `[start, start + width)` of the last dimension.
    pub fn slice_last_dim(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let d = *s.last().unwrap_or(&0);
        if start + width > d {
            return Err(shape_err("slice_last_dim", &s, &[start, width]));
        }
        let src = self.value(a).data();
        let rows = src.len() / d.max(1);
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            out.extend_from_slice(&src[r * d + start..r * d + start + width]);
        }
        let mut shape = s;
        *shape.last_mut().unwrap() = width;
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Slice { a, start, width }, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Reshape { a }, rg))
    }

    /// Masked mean token cross entropy of `[rows, vocab]` logits. Rows with
    /// zero mask weight are ignored; the result is a `[1]` tensor.
    pub fn cross_entropy_with_mask(&mut self, logits: Var, targets: &[usize], mask: &[f64]) -> Result<Var> {
        let vocab = self.value(logits).last_dim();
        let rows = self.value(logits).rows();
        if targets.len() != rows || mask.len() != rows {
            return Err(shape_err(
                "cross_entropy_with_mask",
                self.shape(logits),
                &[targets.len(), mask.len()],
            ));
        }
        let denom: f64 = mask.iter().sum();
        let lv = self.value(logits).data();
        let mut probs = vec![0.0; lv.len()];
        let mut loss = 0.0;
        for r in 0..rows {
            let row = &lv[r * vocab..(r + 1) * vocab];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + total.ln();
            for c in 0..vocab {
                probs[r * vocab + c] = (row[c] - lse).exp();
            }
            if mask[r] != 0.0 {
                let t = targets[r];
                if t >= vocab {
                    return Err(TensorError::Index {
                        op: "cross_entropy_with_mask",
                        index: t,
                        size: vocab,
                    });
                }
                loss += mask[r] * (lse - row[t]);
            }
        }
        let weights: Vec<f64> = if denom > 0.0 {
            mask.iter().map(|m| m / denom).collect()
        } else {
            vec![0.0; rows]
        };
        let loss = if denom > 0.0 { loss / denom } else { 0.0 };
        let rg = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                weights,
                probs,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::scalar(total), Op::Sum { a }, rg))
    }

    /// Reverse pass from a scalar node. Gradients of earlier calls are
    /// discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(shape_err("backward", self.shape(loss), &[1]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.backprop_node(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, idx: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        let numel = |v: Var| self.nodes[v.0].value.numel();
        let val = |v: Var| self.nodes[v.0].value.data();
        let out = self.nodes[idx].value.data();
        match &self.nodes[idx].op {
            Op::Leaf => {}
            &Op::MatMul {
                a,
                b,
                batch,
                n,
                k,
                m,
                b_batched,
            } => {
                if rg(a) {
                    let bv = val(b);
                    let ga = accumulate(&mut grads[a.0], batch * n * k);
                    for bi in 0..batch {
                        let bs = if b_batched { &bv[bi * k * m..(bi + 1) * k * m] } else { bv };
                        gemm(
                            n,
                            m,
                            k,
                            &dy[bi * n * m..(bi + 1) * n * m],
                            false,
                            bs,
                            true,
                            1.0,
                            &mut ga[bi * n * k..(bi + 1) * n * k],
                        );
                    }
                }
                if rg(b) {
                    let av = val(a);
                    let len = numel(b);
                    let gb = accumulate(&mut grads[b.0], len);
                    for bi in 0..batch {
                        let target = if b_batched {
                            &mut gb[bi * k * m..(bi + 1) * k * m]
                        } else {
                            &mut gb[..]
                        };
                        gemm(
                            k,
                            n,
                            m,
                            &av[bi * n * k..(bi + 1) * n * k],
                            true,
                            &dy[bi * n * m..(bi + 1) * n * m],
                            false,
                            1.0,
                            target,
                        );
                    }
                }
            }
            &Op::Transpose { a, batch, rows, cols } => {
                let mut back = vec![0.0; dy.len()];
                transpose_into(dy, &mut back, batch, cols, rows);
                add_into(accumulate(&mut grads[a.0], dy.len()), &back);
            }
            &Op::Add { a, b } => {
                for v in [a, b] {
                    if rg(v) {
                        add_into(accumulate(&mut grads[v.0], dy.len()), dy);
                    }
                }
            }
            &Op::Mul { a, b } => {
                for (v, other) in [(a, b), (b, a)] {
                    if rg(v) {
                        let o = val(other);
                        let g = accumulate(&mut grads[v.0], dy.len());
                        for ((gi, d), x) in g.iter_mut().zip(dy).zip(o) {
                            *gi += d * x;
                        }
                    }
                }
            }
            &Op::AddBias { a, bias } => {
                if rg(a) {
                    add_into(accumulate(&mut grads[a.0], dy.len()), dy);
                }
                if rg(bias) {
                    let d = numel(bias);
                    let g = accumulate(&mut grads[bias.0], d);
                    for row in dy.chunks(d) {
                        add_into(g, row);
                    }
                }
            }
            &Op::Scale { a, factor } => {
                let g = accumulate(&mut grads[a.0], dy.len());
                for (gi, d) in g.iter_mut().zip(dy) {
                    *gi += factor * d;
                }
            }
            Op::MulConst { a, factor } => {
                let g = accumulate(&mut grads[a.0], dy.len());
                for ((gi, d), f) in g.iter_mut().zip(dy).zip(factor) {
                    *gi += d * f;
                }
            }
            &Op::Relu { a } => {
                let g = accumulate(&mut grads[a.0], dy.len());
                for ((gi, d), y) in g.iter_mut().zip(dy).zip(out) {
                    if *y > 0.0 {
                        *gi += d;
                    }
                }
            }
            &Op::RowSoftmax { a } => {
                let d = self.nodes[idx].value.last_dim();
                let g = accumulate(&mut grads[a.0], dy.len());
                for ((grow, dyrow), yrow) in g.chunks_mut(d).zip(dy.chunks(d)).zip(out.chunks(d)) {
                    let dot: f64 = dyrow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for c in 0..d {
                        grow[c] += yrow[c] * (dyrow[c] - dot);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let d = numel(*gamma);
                let gv = val(*gamma);
                if rg(*gamma) {
                    let g = accumulate(&mut grads[gamma.0], d);
                    for (dyrow, hrow) in dy.chunks(d).zip(xhat.chunks(d)) {
                        for c in 0..d {
                            g[c] += dyrow[c] * hrow[c];
                        }
                    }
                }
                if rg(*beta) {
                    let g = accumulate(&mut grads[beta.0], d);
                    for dyrow in dy.chunks(d) {
                        add_into(g, dyrow);
                    }
                }
                if rg(*x) {
                    let g = accumulate(&mut grads[x.0], dy.len());
                    let mut dh = vec![0.0; d];
                    for (r, ((grow, dyrow), hrow)) in
                        g.chunks_mut(d).zip(dy.chunks(d)).zip(xhat.chunks(d)).enumerate()
                    {
                        for c in 0..d {
                            dh[c] = dyrow[c] * gv[c];
                        }
                        let mean_dh = dh.iter().sum::<f64>() / d as f64;
                        let mean_dh_h = dh.iter().zip(hrow).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for c in 0..d {
                            grow[c] += rstd[r] * (dh[c] - mean_dh - hrow[c] * mean_dh_h);
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let d = self.nodes[table.0].value.last_dim();
                let g = accumulate(&mut grads[table.0], numel(*table));
                for (row, &id) in dy.chunks(d).zip(ids) {
                    add_into(&mut g[id * d..(id + 1) * d], row);
                }
            }
            Op::Concat { parts } => {
                let total: usize = parts.iter().map(|p| p.1).sum();
                let rows = dy.len() / total.max(1);
                let mut offset = 0;
                for &(p, w) in parts {
                    if rg(p) {
                        let g = accumulate(&mut grads[p.0], rows * w);
                        for r in 0..rows {
                            add_into(
                                &mut g[r * w..(r + 1) * w],
                                &dy[r * total + offset..r * total + offset + w],
                            );
                        }
                    }
                    offset += w;
                }
            }
            &Op::Slice { a, start, width } => {
                let d = self.nodes[a.0].value.last_dim();
                let g = accumulate(&mut grads[a.0], numel(a));
                for (r, row) in dy.chunks(width.max(1)).enumerate() {
                    add_into(&mut g[r * d + start..r * d + start + width], row);
                }
            }
            &Op::Reshape { a } => {
                add_into(accumulate(&mut grads[a.0], dy.len()), dy);
            }
            Op::CrossEntropy {
                logits,
                targets,
                weights,
                probs,
            } => {
                let vocab = self.nodes[logits.0].value.last_dim();
                let g = accumulate(&mut grads[logits.0], probs.len());
                let scale = dy[0];
                for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let grow = &mut g[r * vocab..(r + 1) * vocab];
                    for c in 0..vocab {
                        grow[c] += scale * w * probs[r * vocab + c];
                    }
                    grow[t] -= scale * w;
                }
            }
            &Op::Sum { a } => {
                let g = accumulate(&mut grads[a.0], numel(a));
                g.iter_mut().for_each(|v| *v += dy[0]);
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn transpose_into(src: &[f64], dst: &mut [f64], batch: usize, rows: usize, cols: usize) {
    for b in 0..batch {
        let s = &src[b * rows * cols..(b + 1) * rows * cols];
        let d = &mut dst[b * rows * cols..(b + 1) * rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                d[c * rows + r] = s[r * cols + c];
            }
        }
    }
}
