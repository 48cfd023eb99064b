//! Transformer building blocks with explicit backward passes.
//!
//! Every layer exposes `forward` returning the output plus a cache of the
//! activations its `backward` needs. Backward methods accumulate parameter
//! gradients into a zeroed twin of the layer (the parameter containers
//! double as gradient containers) and return the gradient w.r.t. the input.

use rand::Rng;

use super::mat::Mat;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// x * sigmoid(x).
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Fully connected layer with weight of shape out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Mat,
    pub b: Mat,
}

pub struct LinearCache {
    input: Mat,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Linear { w: Mat::xavier(out_dim, in_dim, rng), b: Mat::zeros(1, out_dim) }
    }

    pub fn zeros_like(&self) -> Linear {
        Linear { w: Mat::zeros(self.w.rows(), self.w.cols()), b: Mat::zeros(1, self.b.cols()) }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, x: &Mat) -> (Mat, LinearCache) {
        let mut y = x.matmul_tb(&self.w);
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                *y.at_mut(r, c) += self.b.at(0, c);
            }
        }
        (y, LinearCache { input: x.clone() })
    }

    pub fn backward(&self, cache: &LinearCache, dy: &Mat, grad: &mut Linear) -> Mat {
        grad.w.add_assign(&dy.matmul_ta(&cache.input));
        for r in 0..dy.rows() {
            for c in 0..dy.cols() {
                *grad.b.at_mut(0, c) += dy.at(r, c);
            }
        }
        dy.matmul(&self.w)
    }

    pub fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        f(format!("{prefix}.weight"), &self.w);
        f(format!("{prefix}.bias"), &self.b);
    }

    pub fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        f(format!("{prefix}.weight"), &mut self.w);
        f(format!("{prefix}.bias"), &mut self.b);
    }
}

/// Layer normalization over the feature (column) dimension of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Mat,
    pub beta: Mat,
    pub eps: f64,
}

pub struct LayerNormCache {
    normalized: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm { gamma: Mat::from_fn(1, dim, |_, _| 1.0), beta: Mat::zeros(1, dim), eps: 1e-5 }
    }

    pub fn zeros_like(&self) -> LayerNorm {
        LayerNorm { gamma: Mat::zeros(1, self.gamma.cols()), beta: Mat::zeros(1, self.beta.cols()), eps: self.eps }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, LayerNormCache) {
        let n = x.cols() as f64;
        let mut y = Mat::zeros(x.rows(), x.cols());
        let mut normalized = Mat::zeros(x.rows(), x.cols());
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + self.eps).sqrt();
            inv_std.push(inv);
            for c in 0..x.cols() {
                let xn = (row[c] - mean) * inv;
                *normalized.at_mut(r, c) = xn;
                *y.at_mut(r, c) = self.gamma.at(0, c) * xn + self.beta.at(0, c);
            }
        }
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Mat, grad: &mut LayerNorm) -> Mat {
        let n = dy.cols() as f64;
        let mut dx = Mat::zeros(dy.rows(), dy.cols());
        for r in 0..dy.rows() {
            let xn = cache.normalized.row(r);
            let dyr = dy.row(r);
            let mut sum_dxn = 0.0;
            let mut sum_dxn_xn = 0.0;
            for c in 0..dy.cols() {
                *grad.gamma.at_mut(0, c) += dyr[c] * xn[c];
                *grad.beta.at_mut(0, c) += dyr[c];
                let dxn = dyr[c] * self.gamma.at(0, c);
                sum_dxn += dxn;
                sum_dxn_xn += dxn * xn[c];
            }
            let inv = cache.inv_std[r];
            for c in 0..dy.cols() {
                let dxn = dyr[c] * self.gamma.at(0, c);
                *dx.at_mut(r, c) = inv * (dxn - sum_dxn / n - xn[c] * sum_dxn_xn / n);
            }
        }
        dx
    }

    pub fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        f(format!("{prefix}.gamma"), &self.gamma);
        f(format!("{prefix}.beta"), &self.beta);
    }

    pub fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        f(format!("{prefix}.gamma"), &mut self.gamma);
        f(format!("{prefix}.beta"), &mut self.beta);
    }
}

/// Elementwise SiLU.
pub struct SiluCache {
    input: Mat,
}

pub fn silu_forward(x: &Mat) -> (Mat, SiluCache) {
    (x.map(silu), SiluCache { input: x.clone() })
}

pub fn silu_backward(cache: &SiluCache, dy: &Mat) -> Mat {
    let mut dx = dy.clone();
    for r in 0..dx.rows() {
        for c in 0..dx.cols() {
            *dx.at_mut(r, c) *= silu_derivative(cache.input.at(r, c));
        }
    }
    dx
}

/// Row-wise softmax with max-subtraction.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = Mat::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..x.cols() {
            let e = (row[c] - max).exp();
            *y.at_mut(r, c) = e;
            sum += e;
        }
        for c in 0..x.cols() {
            *y.at_mut(r, c) /= sum;
        }
    }
    y
}

/// Backward of row-wise softmax given its output `p` and upstream `dp`.
pub fn softmax_backward(p: &Mat, dp: &Mat) -> Mat {
    let mut ds = Mat::zeros(p.rows(), p.cols());
    for r in 0..p.rows() {
        let pr = p.row(r);
        let dpr = dp.row(r);
        let dot: f64 = pr.iter().zip(dpr).map(|(a, b)| a * b).sum();
        for c in 0..p.cols() {
            *ds.at_mut(r, c) = pr[c] * (dpr[c] - dot);
        }
    }
    ds
}

/// Multi-head attention. Queries come from `q_in`, keys and values from
/// `kv_in`; self-attention passes the same matrix for both.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub n_heads: usize,
}

pub struct MhaCache {
    q_cache: LinearCache,
    k_cache: LinearCache,
    v_cache: LinearCache,
    o_cache: LinearCache,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Vec<Mat>,
}

impl MultiHeadAttention {
    pub fn new(d_model: usize, n_heads: usize, rng: &mut impl Rng) -> Self {
        assert!(d_model % n_heads == 0, "d_model must divide into heads");
        MultiHeadAttention {
            wq: Linear::new(d_model, d_model, rng),
            wk: Linear::new(d_model, d_model, rng),
            wv: Linear::new(d_model, d_model, rng),
            wo: Linear::new(d_model, d_model, rng),
            n_heads,
        }
    }

    pub fn zeros_like(&self) -> MultiHeadAttention {
        MultiHeadAttention {
            wq: self.wq.zeros_like(),
            wk: self.wk.zeros_like(),
            wv: self.wv.zeros_like(),
            wo: self.wo.zeros_like(),
            n_heads: self.n_heads,
        }
    }

    pub fn forward(&self, q_in: &Mat, kv_in: &Mat) -> (Mat, MhaCache) {
        let d = self.wq.out_dim();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (q, q_cache) = self.wq.forward(q_in);
        let (k, k_cache) = self.wk.forward(kv_in);
        let (v, v_cache) = self.wv.forward(kv_in);
        let mut concat = Mat::zeros(q.rows(), d);
        let mut attn = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let qh = q.col_block(h * dh, dh);
            let kh = k.col_block(h * dh, dh);
            let vh = v.col_block(h * dh, dh);
            let mut scores = qh.matmul_tb(&kh);
            scores.scale(scale);
            let p = softmax_rows(&scores);
            let oh = p.matmul(&vh);
            concat.add_col_block(h * dh, &oh);
            attn.push(p);
        }
        let (out, o_cache) = self.wo.forward(&concat);
        (out, MhaCache { q_cache, k_cache, v_cache, o_cache, q, k, v, attn })
    }

    /// Returns (d_q_in, d_kv_in). For self-attention add them.
    pub fn backward(&self, cache: &MhaCache, dy: &Mat, grad: &mut MultiHeadAttention) -> (Mat, Mat) {
        let d = self.wq.out_dim();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let dconcat = self.wo.backward(&cache.o_cache, dy, &mut grad.wo);
        let mut dq = Mat::zeros(cache.q.rows(), d);
        let mut dk = Mat::zeros(cache.k.rows(), d);
        let mut dv = Mat::zeros(cache.v.rows(), d);
        for h in 0..self.n_heads {
            let p = &cache.attn[h];
            let kh = cache.k.col_block(h * dh, dh);
            let vh = cache.v.col_block(h * dh, dh);
            let qh = cache.q.col_block(h * dh, dh);
            let doh = dconcat.col_block(h * dh, dh);
            let dp = doh.matmul_tb(&vh);
            let dvh = p.matmul_ta(&doh);
            let mut ds = softmax_backward(p, &dp);
            ds.scale(scale);
            let dqh = ds.matmul(&kh);
            let dkh = ds.matmul_ta(&qh);
            dq.add_col_block(h * dh, &dqh);
            dk.add_col_block(h * dh, &dkh);
            dv.add_col_block(h * dh, &dvh);
        }
        let dq_in = self.wq.backward(&cache.q_cache, &dq, &mut grad.wq);
        let mut dkv_in = self.wk.backward(&cache.k_cache, &dk, &mut grad.wk);
        dkv_in.add_assign(&self.wv.backward(&cache.v_cache, &dv, &mut grad.wv));
        (dq_in, dkv_in)
    }

    /// Row-normalization check hook: attention rows of each head sum to one.
    pub fn attention_row_sums(cache: &MhaCache) -> Vec<f64> {
        let mut sums = Vec::new();
        for p in &cache.attn {
            for r in 0..p.rows() {
                sums.push(p.row(r).iter().sum());
            }
        }
        sums
    }

    pub fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        self.wq.for_each(&format!("{prefix}.wq"), f);
        self.wk.for_each(&format!("{prefix}.wk"), f);
        self.wv.for_each(&format!("{prefix}.wv"), f);
        self.wo.for_each(&format!("{prefix}.wo"), f);
    }

    pub fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.wq.for_each_mut(&format!("{prefix}.wq"), f);
        self.wk.for_each_mut(&format!("{prefix}.wk"), f);
        self.wv.for_each_mut(&format!("{prefix}.wv"), f);
        self.wo.for_each_mut(&format!("{prefix}.wo"), f);
    }
}

/// Position-wise feed-forward: fc1 -> SiLU -> fc2.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct FeedForwardCache {
    fc1_cache: LinearCache,
    silu_cache: SiluCache,
    fc2_cache: LinearCache,
}

impl FeedForward {
    pub fn new(d_model: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        FeedForward { fc1: Linear::new(d_model, d_ff, rng), fc2: Linear::new(d_ff, d_model, rng) }
    }

    pub fn zeros_like(&self) -> FeedForward {
        FeedForward { fc1: self.fc1.zeros_like(), fc2: self.fc2.zeros_like() }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, FeedForwardCache) {
        let (h, fc1_cache) = self.fc1.forward(x);
        let (a, silu_cache) = silu_forward(&h);
        let (y, fc2_cache) = self.fc2.forward(&a);
        (y, FeedForwardCache { fc1_cache, silu_cache, fc2_cache })
    }

    pub fn backward(&self, cache: &FeedForwardCache, dy: &Mat, grad: &mut FeedForward) -> Mat {
        let da = self.fc2.backward(&cache.fc2_cache, dy, &mut grad.fc2);
        let dh = silu_backward(&cache.silu_cache, &da);
        self.fc1.backward(&cache.fc1_cache, &dh, &mut grad.fc1)
    }

    pub fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        self.fc1.for_each(&format!("{prefix}.fc1"), f);
        self.fc2.for_each(&format!("{prefix}.fc2"), f);
    }

    pub fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.fc1.for_each_mut(&format!("{prefix}.fc1"), f);
        self.fc2.for_each_mut(&format!("{prefix}.fc2"), f);
    }
}
