//! Convolutional bidirectional LSTM classifier with an optional auxiliary
//! feature branch, trained by backpropagation and Adam.
//!
//! Forward pass for one example:
//!
//! 1. valid 1D convolution over the `max_len x embed_dim` input, ReLU;
//! 2. non-overlapping max-pooling of width `pool_width`;
//! 3. LSTMs over the pooled sequence in both directions; the two final
//!    hidden states are concatenated;
//! 4. dropout (training only, inverted scaling);
//! 5. if `aux_dim > 0`, the auxiliary vector goes through its own dense ReLU
//!    layer and is concatenated with the sequence representation;
//! 6. dense ReLU layers, each followed by dropout;
//! 7. a single sigmoid output unit.
//!
//! LSTM gate rows are ordered input, forget, cell, output.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub max_len: usize,
    pub embed_dim: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool_width: usize,
    pub lstm_hidden: usize,
    pub dense_widths: Vec<usize>,
    pub dropout_rate: f64,
    /// Width of the auxiliary feature vector; 0 disables the merge branch.
    pub aux_dim: usize,
    /// Width of the dense layer applied to the auxiliary features.
    pub aux_hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            max_len: 80,
            embed_dim: 300,
            conv_filters: 32,
            conv_kernel: 3,
            pool_width: 2,
            lstm_hidden: 64,
            dense_widths: vec![64, 16],
            dropout_rate: 0.3,
            aux_dim: 0,
            aux_hidden: 16,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    /// Defaults with the shorter input window used for tweets.
    pub fn twitter() -> Self {
        NetworkConfig {
            max_len: 40,
            embed_dim: 400,
            ..Self::default()
        }
    }

    pub fn conv_len(&self) -> usize {
        self.max_len + 1 - self.conv_kernel
    }

    pub fn pooled_len(&self) -> usize {
        self.conv_len() / self.pool_width
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let positive = [
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("conv_filters", self.conv_filters),
            ("conv_kernel", self.conv_kernel),
            ("pool_width", self.pool_width),
            ("lstm_hidden", self.lstm_hidden),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.dense_widths.iter().any(|&w| w == 0) {
            return bad("dense widths must be positive".into());
        }
        if self.aux_dim > 0 && self.aux_hidden == 0 {
            return bad("aux_hidden must be positive".into());
        }
        if self.conv_kernel > self.max_len {
            return bad(format!(
                "conv_kernel {} exceeds max_len {}",
                self.conv_kernel, self.max_len
            ));
        }
        if self.conv_len() < self.pool_width {
            return bad("pool_width exceeds the convolution output length".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be a non-negative number".into());
        }
        Ok(())
    }

    fn merged_width(&self) -> usize {
        2 * self.lstm_hidden + if self.aux_dim > 0 { self.aux_hidden } else { 0 }
    }
}

/// Row-major matrix; vectors are `n x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        Tensor {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect(),
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self * x`
    fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o += dot(self.row(r), x);
        }
    }

    /// `out += self^T * v`
    fn matvec_t_add(&self, v: &[f64], out: &mut [f64]) {
        for (r, &vr) in v.iter().enumerate().take(self.rows) {
            if vr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += vr * w;
            }
        }
    }

    /// `self += a * b^T`
    fn outer_add(&mut self, a: &[f64], b: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (x, bv) in row.iter_mut().zip(b) {
                *x += ar * bv;
            }
        }
    }

    fn add_scaled(&mut self, other: &Tensor, k: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    fn init(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            w: Tensor::glorot(out, inp, rng),
            b: Tensor::zeros(out, 1),
        }
    }

    fn zeros_like(&self) -> Self {
        Dense {
            w: Tensor::zeros(self.w.rows, self.w.cols),
            b: Tensor::zeros(self.b.rows, 1),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b.data.clone();
        self.w.matvec_add(x, &mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H x input`
    pub w_x: Tensor,
    /// `4H x H`
    pub w_h: Tensor,
    /// `4H`
    pub b: Tensor,
}

impl LstmParams {
    fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut b = Tensor::zeros(4 * hidden, 1);
        b.data[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        LstmParams {
            w_x: Tensor::glorot(4 * hidden, input, rng),
            w_h: Tensor::glorot(4 * hidden, hidden, rng),
            b,
        }
    }

    fn zeros_like(&self) -> Self {
        LstmParams {
            w_x: Tensor::zeros(self.w_x.rows, self.w_x.cols),
            w_h: Tensor::zeros(self.w_h.rows, self.w_h.cols),
            b: Tensor::zeros(self.b.rows, 1),
        }
    }

    fn hidden(&self) -> usize {
        self.w_h.cols
    }

    pub fn forget_bias(&self) -> &[f64] {
        let h = self.hidden();
        &self.b.data[h..2 * h]
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    /// `filters x (kernel * embed_dim)`
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    pub lstm_fwd: LstmParams,
    pub lstm_bwd: LstmParams,
    pub aux: Option<Dense>,
    pub dense: Vec<Dense>,
    pub out: Dense,
}

pub fn init_params(config: &NetworkConfig) -> Result<NetworkParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config;
    let conv_w = Tensor::glorot(c.conv_filters, c.conv_kernel * c.embed_dim, &mut rng);
    let conv_b = Tensor::zeros(c.conv_filters, 1);
    let lstm_fwd = LstmParams::init(c.conv_filters, c.lstm_hidden, &mut rng);
    let lstm_bwd = LstmParams::init(c.conv_filters, c.lstm_hidden, &mut rng);
    let aux = (c.aux_dim > 0).then(|| Dense::init(c.aux_hidden, c.aux_dim, &mut rng));
    let mut width = c.merged_width();
    let mut dense = Vec::new();
    for &w in &c.dense_widths {
        dense.push(Dense::init(w, width, &mut rng));
        width = w;
    }
    let out = Dense::init(1, width, &mut rng);
    Ok(NetworkParams {
        config: config.clone(),
        conv_w,
        conv_b,
        lstm_fwd,
        lstm_bwd,
        aux,
        dense,
        out,
    })
}

impl NetworkParams {
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            config: self.config.clone(),
            conv_w: Tensor::zeros(self.conv_w.rows, self.conv_w.cols),
            conv_b: Tensor::zeros(self.conv_b.rows, 1),
            lstm_fwd: self.lstm_fwd.zeros_like(),
            lstm_bwd: self.lstm_bwd.zeros_like(),
            aux: self.aux.as_ref().map(Dense::zeros_like),
            dense: self.dense.iter().map(Dense::zeros_like).collect(),
            out: self.out.zeros_like(),
        }
    }

    /// Every tensor with a stable name, in serialization order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = vec![
            ("conv.w".to_owned(), &self.conv_w),
            ("conv.b".to_owned(), &self.conv_b),
        ];
        for (dir, p) in [("fwd", &self.lstm_fwd), ("bwd", &self.lstm_bwd)] {
            v.push((format!("lstm.{dir}.w_x"), &p.w_x));
            v.push((format!("lstm.{dir}.w_h"), &p.w_h));
            v.push((format!("lstm.{dir}.b"), &p.b));
        }
        if let Some(a) = &self.aux {
            v.push(("aux.w".to_owned(), &a.w));
            v.push(("aux.b".to_owned(), &a.b));
        }
        for (i, d) in self.dense.iter().enumerate() {
            v.push((format!("dense{i}.w"), &d.w));
            v.push((format!("dense{i}.b"), &d.b));
        }
        v.push(("out.w".to_owned(), &self.out.w));
        v.push(("out.b".to_owned(), &self.out.b));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.conv_w, &mut self.conv_b];
        for p in [&mut self.lstm_fwd, &mut self.lstm_bwd] {
            v.push(&mut p.w_x);
            v.push(&mut p.w_h);
            v.push(&mut p.b);
        }
        if let Some(a) = &mut self.aux {
            v.push(&mut a.w);
            v.push(&mut a.b);
        }
        for d in &mut self.dense {
            v.push(&mut d.w);
            v.push(&mut d.b);
        }
        v.push(&mut self.out.w);
        v.push(&mut self.out.b);
        v
    }

    pub fn add_scaled(&mut self, other: &NetworkParams, k: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(b.1, k);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rq-lstm v1")?;
        writeln!(
            out,
            "config {}",
            serde_json::to_string(&self.config).expect("config serializes")
        )?;
        for (name, t) in self.tensors() {
            writeln!(out, "tensor {name} {} {}", t.rows, t.cols)?;
            let values: Vec<String> = t.data.iter().map(|x| format!("{x:?}")).collect();
            writeln!(out, "{}", values.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l.map_err(|e| Error::parse(i + 1, e.to_string()))?)),
                None => Err(Error::Format("unexpected end of network file".into())),
            }
        };
        let (_, header) = next()?;
        if header.trim() != "rq-lstm v1" {
            return Err(Error::parse(1, "expected `rq-lstm v1` header"));
        }
        let (n, config_line) = next()?;
        let json = config_line
            .strip_prefix("config ")
            .ok_or_else(|| Error::parse(n, "expected config line"))?;
        let config: NetworkConfig =
            serde_json::from_str(json).map_err(|e| Error::parse(n, e.to_string()))?;
        let mut params = init_params(&config)?;
        let names: Vec<(String, usize, usize)> = params
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.rows, t.cols))
            .collect();
        for ((name, rows, cols), slot) in names.into_iter().zip(params.tensors_mut()) {
            let (n, head) = next()?;
            let expected = format!("tensor {name} {rows} {cols}");
            if head.trim() != expected {
                return Err(Error::parse(n, format!("expected `{expected}`")));
            }
            let (n, body) = next()?;
            let values = body
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(n, e.to_string()))?;
            if values.len() != rows * cols {
                return Err(Error::parse(
                    n,
                    format!("tensor `{name}` needs {} values", rows * cols),
                ));
            }
            slot.data = values;
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Clone)]
struct LstmStep {
    pos: usize,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Vec<f64>,
    z: Vec<f64>,
    mask: Vec<f64>,
}

/// Activations kept from a forward pass for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    conv_z: Vec<f64>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    fwd_steps: Vec<LstmStep>,
    bwd_steps: Vec<LstmStep>,
    seq_mask: Vec<f64>,
    aux_input: Vec<f64>,
    aux_z: Vec<f64>,
    dense: Vec<DenseCache>,
    head_input: Vec<f64>,
    pub probability: f64,
}

fn lstm_run(
    p: &LstmParams,
    seq: &[f64],
    input_dim: usize,
    order: impl Iterator<Item = usize>,
) -> (Vec<f64>, Vec<LstmStep>) {
    let h_dim = p.hidden();
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut steps = Vec::new();
    for pos in order {
        let x = &seq[pos * input_dim..(pos + 1) * input_dim];
        let mut a = p.b.data.clone();
        p.w_x.matvec_add(x, &mut a);
        p.w_h.matvec_add(&h, &mut a);
        let mut gates = a;
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if (2 * h_dim..3 * h_dim).contains(&k) {
                g.tanh()
            } else {
                sigmoid(*g)
            };
        }
        let mut c_new = vec![0.0; h_dim];
        let mut tanh_c = vec![0.0; h_dim];
        let mut h_new = vec![0.0; h_dim];
        for j in 0..h_dim {
            let (i, f, g, o) = (
                gates[j],
                gates[h_dim + j],
                gates[2 * h_dim + j],
                gates[3 * h_dim + j],
            );
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = o * tanh_c[j];
        }
        steps.push(LstmStep {
            pos,
            h_prev: std::mem::replace(&mut h, h_new),
            c_prev: std::mem::replace(&mut c, c_new),
            gates,
            tanh_c,
        });
    }
    (h, steps)
}

/// Backpropagates `dh_last` through one direction, accumulating parameter
/// gradients into `grad` and input gradients into `d_seq`.
fn lstm_backward(
    p: &LstmParams,
    steps: &[LstmStep],
    seq: &[f64],
    input_dim: usize,
    dh_last: &[f64],
    grad: &mut LstmParams,
    d_seq: &mut [f64],
) {
    let h_dim = p.hidden();
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; h_dim];
    let mut da = vec![0.0; 4 * h_dim];
    for step in steps.iter().rev() {
        let g = &step.gates;
        for j in 0..h_dim {
            let (i, f, gg, o) = (g[j], g[h_dim + j], g[2 * h_dim + j], g[3 * h_dim + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            da[j] = dcj * gg * i * (1.0 - i);
            da[h_dim + j] = dcj * step.c_prev[j] * f * (1.0 - f);
            da[2 * h_dim + j] = dcj * i * (1.0 - gg * gg);
            da[3 * h_dim + j] = d_o * o * (1.0 - o);
            dc[j] = dcj * f;
        }
        let x = &seq[step.pos * input_dim..(step.pos + 1) * input_dim];
        grad.w_x.outer_add(&da, x);
        grad.w_h.outer_add(&da, &step.h_prev);
        for (b, d) in grad.b.data.iter_mut().zip(&da) {
            *b += d;
        }
        p.w_x.matvec_t_add(
            &da,
            &mut d_seq[step.pos * input_dim..(step.pos + 1) * input_dim],
        );
        dh.iter_mut().for_each(|v| *v = 0.0);
        p.w_h.matvec_t_add(&da, &mut dh);
    }
}

/// Final hidden states `[forward, backward]` of a bidirectional LSTM over a
/// row-major `steps x input_dim` sequence.
pub fn bilstm_final_states(
    fwd: &LstmParams,
    bwd: &LstmParams,
    seq: &[f64],
    input_dim: usize,
) -> Vec<f64> {
    let steps = seq.len() / input_dim;
    let (mut hf, _) = lstm_run(fwd, seq, input_dim, 0..steps);
    let (hb, _) = lstm_run(bwd, seq, input_dim, (0..steps).rev());
    hf.extend(hb);
    hf
}

fn dropout_mask(len: usize, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            (0..len)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect()
        }
        _ => vec![1.0; len],
    }
}

/// Convolution plus ReLU and max-pooling. Returns `(conv_z, pooled, argmax)`.
pub fn conv_pool(params: &NetworkParams, matrix: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let c = &params.config;
    let (e, k, f) = (c.embed_dim, c.conv_kernel, c.conv_filters);
    let lc = c.conv_len();
    let mut conv_z = vec![0.0; lc * f];
    for t in 0..lc {
        let window = &matrix[t * e..(t + k) * e];
        for j in 0..f {
            conv_z[t * f + j] = params.conv_b.data[j] + dot(params.conv_w.row(j), window);
        }
    }
    let pl = c.pooled_len();
    let mut pooled = vec![0.0; pl * f];
    let mut argmax = vec![0; pl * f];
    for s in 0..pl {
        for j in 0..f {
            let mut best_t = s * c.pool_width;
            let mut best = conv_z[best_t * f + j].max(0.0);
            for t in best_t + 1..(s + 1) * c.pool_width {
                let v = conv_z[t * f + j].max(0.0);
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            pooled[s * f + j] = best;
            argmax[s * f + j] = best_t;
        }
    }
    (conv_z, pooled, argmax)
}

/// Runs the network on one example. With `train_mode` off no dropout is
/// applied and `dropout_seed` is ignored.
pub fn forward(
    params: &NetworkParams,
    matrix: &[f64],
    aux: &[f64],
    train_mode: bool,
    dropout_seed: u64,
) -> Result<ForwardCache> {
    let c = &params.config;
    if matrix.len() != c.max_len * c.embed_dim {
        return Err(Error::Shape(format!(
            "input has {} values, expected {} x {}",
            matrix.len(),
            c.max_len,
            c.embed_dim
        )));
    }
    if aux.len() != c.aux_dim {
        return Err(Error::Shape(format!(
            "aux has {} values, expected {}",
            aux.len(),
            c.aux_dim
        )));
    }
    let mut rng = train_mode.then(|| ChaCha8Rng::seed_from_u64(dropout_seed));

    let (conv_z, pooled, argmax) = conv_pool(params, matrix);
    let f = c.conv_filters;
    let pl = c.pooled_len();
    let (hf, fwd_steps) = lstm_run(&params.lstm_fwd, &pooled, f, 0..pl);
    let (hb, bwd_steps) = lstm_run(&params.lstm_bwd, &pooled, f, (0..pl).rev());
    let seq_mask = dropout_mask(2 * c.lstm_hidden, c.dropout_rate, rng.as_mut());
    let mut merged: Vec<f64> = hf
        .iter()
        .chain(&hb)
        .zip(&seq_mask)
        .map(|(h, m)| h * m)
        .collect();

    let mut aux_z = Vec::new();
    if let Some(layer) = &params.aux {
        aux_z = layer.apply(aux);
        merged.extend(aux_z.iter().map(|z| z.max(0.0)));
    }

    let mut dense = Vec::with_capacity(params.dense.len());
    let mut h = merged;
    for layer in &params.dense {
        let z = layer.apply(&h);
        let mask = dropout_mask(z.len(), c.dropout_rate, rng.as_mut());
        let next: Vec<f64> = z.iter().zip(&mask).map(|(z, m)| z.max(0.0) * m).collect();
        dense.push(DenseCache {
            input: std::mem::replace(&mut h, next),
            z,
            mask,
        });
    }
    let logit = params.out.apply(&h)[0];
    Ok(ForwardCache {
        input: matrix.to_vec(),
        conv_z,
        pooled,
        argmax,
        fwd_steps,
        bwd_steps,
        seq_mask,
        aux_input: aux.to_vec(),
        aux_z,
        dense,
        head_input: h,
        probability: sigmoid(logit),
    })
}

/// Inference-mode probability of the positive class.
pub fn predict(params: &NetworkParams, matrix: &[f64], aux: &[f64]) -> Result<f64> {
    Ok(forward(params, matrix, aux, false, 0)?.probability)
}

const P_CLAMP: f64 = 1e-7;

/// Binary cross-entropy with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Gradient of [`loss`] for the example cached in `cache`, with label `y`.
pub fn backward(params: &NetworkParams, cache: &ForwardCache, y: u8) -> NetworkParams {
    let c = &params.config;
    let mut grad = params.zeros_like();

    let d_logit = cache.probability - f64::from(y);
    grad.out.w.outer_add(&[d_logit], &cache.head_input);
    grad.out.b.data[0] += d_logit;
    let mut dh = vec![0.0; cache.head_input.len()];
    params.out.w.matvec_t_add(&[d_logit], &mut dh);

    for (i, (layer, dc)) in params.dense.iter().zip(&cache.dense).enumerate().rev() {
        let dz: Vec<f64> = dh
            .iter()
            .zip(&dc.mask)
            .zip(&dc.z)
            .map(|((d, m), z)| if *z > 0.0 { d * m } else { 0.0 })
            .collect();
        grad.dense[i].w.outer_add(&dz, &dc.input);
        for (b, d) in grad.dense[i].b.data.iter_mut().zip(&dz) {
            *b += d;
        }
        dh = vec![0.0; dc.input.len()];
        layer.w.matvec_t_add(&dz, &mut dh);
    }

    let seq_width = 2 * c.lstm_hidden;
    if let Some(g) = grad.aux.as_mut() {
        let dz: Vec<f64> = dh[seq_width..]
            .iter()
            .zip(&cache.aux_z)
            .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
            .collect();
        g.w.outer_add(&dz, &cache.aux_input);
        for (b, d) in g.b.data.iter_mut().zip(&dz) {
            *b += d;
        }
    }

    let d_seq: Vec<f64> = dh[..seq_width]
        .iter()
        .zip(&cache.seq_mask)
        .map(|(d, m)| d * m)
        .collect();
    let f = c.conv_filters;
    let mut d_pooled = vec![0.0; cache.pooled.len()];
    lstm_backward(
        &params.lstm_fwd,
        &cache.fwd_steps,
        &cache.pooled,
        f,
        &d_seq[..c.lstm_hidden],
        &mut grad.lstm_fwd,
        &mut d_pooled,
    );
    lstm_backward(
        &params.lstm_bwd,
        &cache.bwd_steps,
        &cache.pooled,
        f,
        &d_seq[c.lstm_hidden..],
        &mut grad.lstm_bwd,
        &mut d_pooled,
    );

    let mut d_conv = vec![0.0; cache.conv_z.len()];
    for (idx, &t) in cache.argmax.iter().enumerate() {
        let j = idx % f;
        if cache.conv_z[t * f + j] > 0.0 {
            d_conv[t * f + j] += d_pooled[idx];
        }
    }
    let (e, k) = (c.embed_dim, c.conv_kernel);
    for t in 0..c.conv_len() {
        let window = &cache.input[t * e..(t + k) * e];
        let dz = &d_conv[t * f..(t + 1) * f];
        grad.conv_w.outer_add(dz, window);
        for (b, d) in grad.conv_b.data.iter_mut().zip(dz) {
            *b += d;
        }
    }
    grad
}

/// One training or evaluation example for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    /// Row-major `max_len x embed_dim`.
    pub matrix: Vec<f64>,
    pub aux: Vec<f64>,
    /// 1 for the positive class, 0 otherwise.
    pub label: u8,
}

/// Summed gradients and summed loss over `batch`, with one dropout seed per
/// example.
pub fn batch_gradient(
    params: &NetworkParams,
    batch: &[(&LabeledSequence, u64)],
) -> Result<(NetworkParams, f64)> {
    let mut total = params.zeros_like();
    let mut loss_sum = 0.0;
    for (ex, seed) in batch {
        let cache = forward(params, &ex.matrix, &ex.aux, true, *seed)?;
        loss_sum += loss(cache.probability, ex.label);
        total.add_scaled(&backward(params, &cache, ex.label), 1.0);
    }
    Ok((total, loss_sum))
}

struct Adam {
    m: NetworkParams,
    v: NetworkParams,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &NetworkParams) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut NetworkParams, grad: &NetworkParams, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t);
        let bc2 = 1.0 - BETA2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grad.tensors());
        for (((p, m), v), (_, g)) in tensors {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = BETA1 * m.data[i] + (1.0 - BETA1) * gi;
                v.data[i] = BETA2 * v.data[i] + (1.0 - BETA2) * gi * gi;
                let m_hat = m.data[i] / bc1;
                let v_hat = v.data[i] / bc2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean inference-mode loss over the training examples.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub params: NetworkParams,
    pub best_epoch: usize,
    /// Entry 0 describes the initial parameters.
    pub history: Vec<EpochStats>,
}

fn evaluate(params: &NetworkParams, data: &[LabeledSequence]) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut pred = Vec::with_capacity(data.len());
    for ex in data {
        let p = predict(params, &ex.matrix, &ex.aux)?;
        loss_sum += loss(p, ex.label);
        pred.push(u8::from(p >= 0.5));
    }
    let gold: Vec<u8> = data.iter().map(|e| e.label).collect();
    let f1 =
        (crate::eval::prf1(&pred, &gold, &1)?.f1 + crate::eval::prf1(&pred, &gold, &0)?.f1) / 2.0;
    Ok((loss_sum / data.len() as f64, f1))
}

/// Mini-batch Adam training for a fixed number of epochs. Returns the
/// parameters from the epoch with the best validation macro-F1 (ties go to
/// the lower validation loss, then the earlier epoch). An empty `val` set
/// selects on the training data.
pub fn train_network(
    config: &NetworkConfig,
    examples: &[LabeledSequence],
    val: &[LabeledSequence],
) -> Result<TrainedNetwork> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    let mut params = init_params(config)?;
    let val = if val.is_empty() { examples } else { val };

    let stats = |epoch: usize, p: &NetworkParams| -> Result<EpochStats> {
        let (train_loss, _) = evaluate(p, examples)?;
        let (val_loss, val_macro_f1) = evaluate(p, val)?;
        Ok(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_macro_f1,
        })
    };

    let mut history = vec![stats(0, &params)?];
    let mut best = (params.clone(), history[0]);
    let mut adam = Adam::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&LabeledSequence, u64)> =
                chunk.iter().map(|&i| (&examples[i], rng.gen())).collect();
            let (mut grad, _) = batch_gradient(&params, &batch)?;
            grad.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grad, config.learning_rate);
        }
        let s = stats(epoch, &params)?;
        history.push(s);
        let better = s.val_macro_f1 > best.1.val_macro_f1
            || (s.val_macro_f1 == best.1.val_macro_f1 && s.val_loss < best.1.val_loss);
        if better {
            best = (params.clone(), s);
        }
    }
    Ok(TrainedNetwork {
        params: best.0,
        best_epoch: best.1.epoch,
        history,
    })
}

/// Stratified holdout: roughly `fraction` of each label goes to the second
/// set. Labels with a single example stay in the first set.
pub fn holdout(
    data: &[LabeledSequence],
    fraction: f64,
    seed: u64,
) -> (Vec<LabeledSequence>, Vec<LabeledSequence>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x401d));
    let mut held = vec![false; data.len()];
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..data.len())
            .filter(|&i| data[i].label == label)
            .collect();
        if idx.len() < 2 || fraction <= 0.0 {
            continue;
        }
        idx.shuffle(&mut rng);
        let n = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        for &i in &idx[..n] {
            held[i] = true;
        }
    }
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for (ex, h) in data.iter().zip(held) {
        if h {
            val.push(ex.clone());
        } else {
            fit.push(ex.clone());
        }
    }
    (fit, val)
}
