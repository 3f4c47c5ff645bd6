//! Reverse-mode automatic differentiation over `f64` vectors.
//!
//! Every node holds a vector value. Matrices live only in a [`ParamSet`] and
//! enter the graph through parameter ops (`row`, `matvec`, `bias`,
//! `rows_dot`), whose gradients are accumulated into [`Grads`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Param {
    pub fn zeros(name: &str, rows: usize, cols: usize) -> Param {
        Param {
            name: name.to_string(),
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub params: Vec<Param>,
}

impl ParamSet {
    pub fn add(&mut self, p: Param) -> ParamId {
        self.params.push(p);
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            g: self
                .params
                .iter()
                .map(|p| vec![0.0; p.data.len()])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.data.iter().all(|x| x.is_finite()))
    }
}

/// Gradient buffers shaped like a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub g: Vec<Vec<f64>>,
}

impl Grads {
    pub fn scale(&mut self, k: f64) {
        for x in self.g.iter_mut().flatten() {
            *x *= k;
        }
    }

    pub fn norm(&self) -> f64 {
        self.g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn zero(&mut self) {
        for x in self.g.iter_mut().flatten() {
            *x = 0.0;
        }
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Bias(NodeId, ParamId),
    RowsDot(ParamId, NodeId, ParamId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Dots(Vec<NodeId>, NodeId),
    Softmax(NodeId),
    WeightedSum(Vec<NodeId>, NodeId),
    GatherSum(NodeId, Vec<usize>),
    NegLog(NodeId),
    Sum(Vec<NodeId>),
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    vals: Vec<Vec<f64>>,
    ops: Vec<Op>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(k: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_in_place(v: &mut [f64], mask: Option<&[bool]>) {
    let allowed = |i: usize| mask.is_none_or(|m| m[i]);
    let max = v
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (i, x) in v.iter_mut().enumerate() {
        *x = if allowed(i) { (*x - max).exp() } else { 0.0 };
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Tape<'p> {
        Tape {
            params,
            vals: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn value(&self, n: NodeId) -> &[f64] {
        &self.vals[n]
    }

    pub fn scalar(&self, n: NodeId) -> f64 {
        self.vals[n][0]
    }

    fn push(&mut self, v: Vec<f64>, op: Op) -> NodeId {
        self.vals.push(v);
        self.ops.push(op);
        self.vals.len() - 1
    }

    pub fn constant(&mut self, v: Vec<f64>) -> NodeId {
        self.push(v, Op::Leaf)
    }

    pub fn zeros(&mut self, n: usize) -> NodeId {
        self.constant(vec![0.0; n])
    }

    pub fn row(&mut self, p: ParamId, r: usize) -> NodeId {
        let v = self.params.get(p).row(r).to_vec();
        self.push(v, Op::Row(p, r))
    }

    /// `W x` for a parameter matrix `W`.
    pub fn matvec(&mut self, w: ParamId, x: NodeId) -> NodeId {
        let m = self.params.get(w);
        let xv = &self.vals[x];
        assert_eq!(m.cols, xv.len(), "matvec shape for {}", m.name);
        let v = (0..m.rows).map(|r| dot(m.row(r), xv)).collect();
        self.push(v, Op::MatVec(w, x))
    }

    pub fn bias(&mut self, x: NodeId, b: ParamId) -> NodeId {
        let bv = &self.params.get(b).data;
        let v = self.vals[x].iter().zip(bv).map(|(a, c)| a + c).collect();
        self.push(v, Op::Bias(x, b))
    }

    /// `out[j] = E[j] . u + b[j]` over every row of `E`.
    pub fn rows_dot(&mut self, e: ParamId, u: NodeId, b: ParamId) -> NodeId {
        let m = self.params.get(e);
        let bv = &self.params.get(b).data;
        let uv = &self.vals[u];
        let v = (0..m.rows).map(|r| dot(m.row(r), uv) + bv[r]).collect();
        self.push(v, Op::RowsDot(e, u, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.vals[a]
            .iter()
            .zip(&self.vals[b])
            .map(|(x, y)| x + y)
            .collect();
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.vals[a]
            .iter()
            .zip(&self.vals[b])
            .map(|(x, y)| x * y)
            .collect();
        self.push(v, Op::Mul(a, b))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.vals[x].iter().map(|&a| sigmoid(a)).collect();
        self.push(v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.vals[x].iter().map(|a| a.tanh()).collect();
        self.push(v, Op::Tanh(x))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v = parts
            .iter()
            .flat_map(|&p| self.vals[p].iter().copied())
            .collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.vals[x][start..start + len].to_vec();
        self.push(v, Op::Slice(x, start))
    }

    /// `out[i] = rows[i] . u`.
    pub fn dots(&mut self, rows: &[NodeId], u: NodeId) -> NodeId {
        let v = rows
            .iter()
            .map(|&r| dot(&self.vals[r], &self.vals[u]))
            .collect();
        self.push(v, Op::Dots(rows.to_vec(), u))
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let mut v = self.vals[x].clone();
        softmax_in_place(&mut v, None);
        self.push(v, Op::Softmax(x))
    }

    /// Softmax over the entries where `mask` is set; the rest are zero.
    pub fn masked_softmax(&mut self, x: NodeId, mask: &[bool]) -> NodeId {
        let mut v = self.vals[x].clone();
        softmax_in_place(&mut v, Some(mask));
        self.push(v, Op::Softmax(x))
    }

    /// `sum_i w[i] * rows[i]`.
    pub fn weighted_sum(&mut self, rows: &[NodeId], w: NodeId) -> NodeId {
        let mut v = vec![0.0; self.vals[rows[0]].len()];
        for (i, &r) in rows.iter().enumerate() {
            axpy(self.vals[w][i], &self.vals[r], &mut v);
        }
        self.push(v, Op::WeightedSum(rows.to_vec(), w))
    }

    /// Scalar sum of the entries at `idx`.
    pub fn gather_sum(&mut self, x: NodeId, idx: &[usize]) -> NodeId {
        let s = idx.iter().map(|&i| self.vals[x][i]).sum();
        self.push(vec![s], Op::GatherSum(x, idx.to_vec()))
    }

    pub fn neg_log(&mut self, x: NodeId) -> NodeId {
        let v = self.vals[x].iter().map(|a| -a.ln()).collect();
        self.push(v, Op::NegLog(x))
    }

    /// Elementwise sum of equally sized nodes.
    pub fn sum(&mut self, xs: &[NodeId]) -> NodeId {
        let mut v = vec![0.0; self.vals[xs[0]].len()];
        for &x in xs {
            axpy(1.0, &self.vals[x], &mut v);
        }
        self.push(v, Op::Sum(xs.to_vec()))
    }

    /// Backpropagates from the scalar `root`, adding parameter gradients to
    /// `grads`.
    pub fn backward(&self, root: NodeId, grads: &mut Grads) {
        let mut d: Vec<Vec<f64>> = self.vals[..=root]
            .iter()
            .map(|v| vec![0.0; v.len()])
            .collect();
        d[root][0] = 1.0;
        for n in (0..=root).rev() {
            if d[n].iter().all(|&x| x == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut d[n]);
            match &self.ops[n] {
                Op::Leaf => {}
                Op::Row(p, r) => {
                    let cols = self.params.get(*p).cols;
                    axpy(1.0, &g, &mut grads.g[p.0][r * cols..(r + 1) * cols]);
                }
                Op::MatVec(w, x) => {
                    let m = self.params.get(*w);
                    let xv = &self.vals[*x];
                    let gw = &mut grads.g[w.0];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(gr, xv, &mut gw[r * m.cols..(r + 1) * m.cols]);
                            axpy(gr, m.row(r), &mut d[*x]);
                        }
                    }
                }
                Op::Bias(x, b) => {
                    axpy(1.0, &g, &mut d[*x]);
                    axpy(1.0, &g, &mut grads.g[b.0]);
                }
                Op::RowsDot(e, u, b) => {
                    let m = self.params.get(*e);
                    let uv = &self.vals[*u];
                    axpy(1.0, &g, &mut grads.g[b.0]);
                    let ge = &mut grads.g[e.0];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(gr, uv, &mut ge[r * m.cols..(r + 1) * m.cols]);
                            axpy(gr, m.row(r), &mut d[*u]);
                        }
                    }
                }
                Op::Add(a, b) => {
                    axpy(1.0, &g, &mut d[*a]);
                    axpy(1.0, &g, &mut d[*b]);
                }
                Op::Mul(a, b) => {
                    for i in 0..g.len() {
                        let (va, vb) = (self.vals[*a][i], self.vals[*b][i]);
                        d[*a][i] += g[i] * vb;
                        d[*b][i] += g[i] * va;
                    }
                }
                Op::Sigmoid(x) => {
                    for (i, &y) in self.vals[n].iter().enumerate() {
                        d[*x][i] += g[i] * y * (1.0 - y);
                    }
                }
                Op::Tanh(x) => {
                    for (i, &y) in self.vals[n].iter().enumerate() {
                        d[*x][i] += g[i] * (1.0 - y * y);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.vals[p].len();
                        axpy(1.0, &g[off..off + len], &mut d[p]);
                        off += len;
                    }
                }
                Op::Slice(x, start) => {
                    axpy(1.0, &g, &mut d[*x][*start..*start + g.len()]);
                }
                Op::Dots(rows, u) => {
                    for (i, &r) in rows.iter().enumerate() {
                        let gi = g[i];
                        if gi != 0.0 {
                            let (rv, uv) = (&self.vals[r], &self.vals[*u]);
                            for k in 0..rv.len() {
                                d[r][k] += gi * uv[k];
                                d[*u][k] += gi * rv[k];
                            }
                        }
                    }
                }
                Op::Softmax(x) => {
                    let p = &self.vals[n];
                    let gp = dot(&g, p);
                    for i in 0..p.len() {
                        d[*x][i] += p[i] * (g[i] - gp);
                    }
                }
                Op::WeightedSum(rows, w) => {
                    for (i, &r) in rows.iter().enumerate() {
                        d[*w][i] += dot(&self.vals[r], &g);
                        let wi = self.vals[*w][i];
                        axpy(wi, &g, &mut d[r]);
                    }
                }
                Op::GatherSum(x, idx) => {
                    for &i in idx {
                        d[*x][i] += g[0];
                    }
                }
                Op::NegLog(x) => {
                    for (i, &a) in self.vals[*x].iter().enumerate() {
                        d[*x][i] -= g[i] / a;
                    }
                }
                Op::Sum(xs) => {
                    for &x in xs {
                        axpy(1.0, &g, &mut d[x]);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of `f` against the tape gradient for every entry
    /// of every parameter.
    fn check(params: &mut ParamSet, f: impl Fn(&mut Tape) -> NodeId) {
        let mut grads = params.zero_grads();
        {
            let mut t = Tape::new(params);
            let root = f(&mut t);
            t.backward(root, &mut grads);
        }
        let eval = |ps: &ParamSet| {
            let mut t = Tape::new(ps);
            let root = f(&mut t);
            t.scalar(root)
        };
        let eps = 1e-6;
        for p in 0..params.params.len() {
            for i in 0..params.params[p].data.len() {
                let orig = params.params[p].data[i];
                params.params[p].data[i] = orig + eps;
                let up = eval(params);
                params.params[p].data[i] = orig - eps;
                let down = eval(params);
                params.params[p].data[i] = orig;
                let num = (up - down) / (2.0 * eps);
                let ana = grads.g[p][i];
                assert!(
                    (num - ana).abs() <= 1e-6 * (1.0 + num.abs()),
                    "param {p}[{i}]: numeric {num} analytic {ana}"
                );
            }
        }
    }

    fn filled(name: &str, rows: usize, cols: usize, seed: f64) -> Param {
        let mut p = Param::zeros(name, rows, cols);
        for (i, x) in p.data.iter_mut().enumerate() {
            *x = ((i as f64 + seed) * 0.7).sin() * 0.5;
        }
        p
    }

    #[test]
    fn every_op_differentiates() {
        let mut ps = ParamSet::default();
        let w = ps.add(filled("w", 3, 4, 0.1));
        let b = ps.add(filled("b", 3, 1, 0.2));
        let e = ps.add(filled("e", 5, 3, 0.3));
        let eb = ps.add(filled("eb", 5, 1, 0.4));
        check(&mut ps, |t| {
            let x = t.row(e, 2);
            let x2 = t.row(e, 4);
            let xin = t.concat(&[x, x2]);
            let x4 = t.slice(xin, 1, 4);
            let h = t.matvec(w, x4);
            let h = t.bias(h, b);
            let s = t.sigmoid(h);
            let th = t.tanh(h);
            let m = t.mul(s, th);
            let a = t.add(m, x2);
            let rows = [a, s, th];
            let sc = t.dots(&rows, x);
            let att = t.softmax(sc);
            let ctx = t.weighted_sum(&rows, att);
            let logits = t.rows_dot(e, ctx, eb);
            let p = t.masked_softmax(logits, &[true, false, true, true, true]);
            let pick = t.gather_sum(p, &[0, 3]);
            let gate = t.gather_sum(att, &[1]);
            let mixed = t.mul(pick, gate);
            let l1 = t.neg_log(mixed);
            let l2 = t.neg_log(pick);
            t.sum(&[l1, l2])
        });
    }
}
