//! EdgeConv frontier-value network with hand-written reverse mode.
//!
//! All frontier and obstacle points go through four EdgeConv layers, the
//! concatenated layer outputs are projected and max-pooled into a global
//! descriptor, and the descriptor is appended back onto every frontier row
//! before a small perceptron head scores it. Obstacle rows only ever reach
//! the output through the pooled descriptor.
//!
//! A second, scalar head maps the pooled descriptor to a weight in `[0, 1]`
//! for the weighted-cost strategy.

mod checkpoint;
mod knn;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frontier::PointCloud4D;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use knn::{knn_graph, Graph};

/// Input width of a cloud point `(x, y, b, d)`.
pub const POINT_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub k_neighbors: usize,
    pub edgeconv_dims: Vec<usize>,
    pub global_dim: usize,
    pub head_dims: Vec<usize>,
    pub dynamic_graph: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            k_neighbors: 8,
            edgeconv_dims: vec![64, 64, 128, 256],
            global_dim: 512,
            head_dims: vec![256, 64, 1],
            dynamic_graph: true,
        }
    }
}

impl NetConfig {
    /// Small preset for desk-scale training.
    pub fn tiny() -> Self {
        NetConfig {
            k_neighbors: 8,
            edgeconv_dims: vec![16, 16, 32, 32],
            global_dim: 64,
            head_dims: vec![32, 16, 1],
            dynamic_graph: true,
        }
    }

    /// Looks up a named preset (`default` or `tiny`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" | "full" => Some(Self::default()),
            "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = self.edgeconv_dims.iter().chain(&self.head_dims).chain([&self.global_dim]);
        if self.k_neighbors == 0 || widths.into_iter().any(|&w| w == 0) {
            return Err(Error::Config("network widths and k must be at least 1".into()));
        }
        if self.edgeconv_dims.is_empty() {
            return Err(Error::Config("at least one EdgeConv layer is required".into()));
        }
        if self.head_dims.last() != Some(&1) {
            return Err(Error::Config("the value head must end in width 1".into()));
        }
        Ok(())
    }

    fn stacked_dim(&self) -> usize {
        self.edgeconv_dims.iter().sum()
    }

    fn weight_hidden(&self) -> usize {
        self.head_dims[0]
    }

    /// `(name, inputs, outputs)` for every layer, in parameter order.
    fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut layers = Vec::new();
        let mut width = POINT_DIM;
        for (i, &d) in self.edgeconv_dims.iter().enumerate() {
            layers.push((format!("edgeconv{i}"), 2 * width, d));
            width = d;
        }
        let stacked = self.stacked_dim();
        layers.push(("global".into(), stacked, self.global_dim));
        let mut width = stacked + self.global_dim;
        for (i, &d) in self.head_dims.iter().enumerate() {
            layers.push((format!("head{i}"), width, d));
            width = d;
        }
        layers.push(("weight0".into(), self.global_dim, self.weight_hidden()));
        layers.push(("weight1".into(), self.weight_hidden(), 1));
        layers
    }
}

/// A fully connected layer, `y = W x + b` with `W` stored row-major
/// as `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    fn zeros(name: &str, inputs: usize, outputs: usize) -> Self {
        Linear {
            name: name.to_string(),
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.inputs..(o + 1) * self.inputs]
    }

    /// Applies the layer to `rows` row-major input vectors.
    fn apply(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(rows * self.outputs);
        for r in 0..rows {
            let xr = &x[r * self.inputs..(r + 1) * self.inputs];
            for o in 0..self.outputs {
                y.push(self.bias[o] + dot(self.row(o), xr));
            }
        }
        y
    }

    /// Accumulates gradients for `y = W x + b` given `dy`, returning `dx`.
    fn backprop(&self, grad: &mut Linear, x: &[f64], dy: &[f64], rows: usize) -> Vec<f64> {
        let mut dx = vec![0.0; rows * self.inputs];
        for r in 0..rows {
            let xr = &x[r * self.inputs..(r + 1) * self.inputs];
            let dxr = &mut dx[r * self.inputs..(r + 1) * self.inputs];
            for o in 0..self.outputs {
                let g = dy[r * self.outputs + o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let gw = &mut grad.weight[o * self.inputs..(o + 1) * self.inputs];
                let w = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                for k in 0..self.inputs {
                    gw[k] += g * xr[k];
                    dxr[k] += g * w[k];
                }
            }
        }
        dx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

static STAMP: AtomicU64 = AtomicU64::new(1);

fn next_stamp() -> u64 {
    STAMP.fetch_add(1, Ordering::Relaxed)
}

/// All weights of the value network.
#[derive(Clone, Debug)]
pub struct NetworkParams {
    config: NetConfig,
    layers: Vec<Linear>,
    // changes on every mutation so caches can detect staleness
    stamp: u64,
}

impl PartialEq for NetworkParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.layers == other.layers
    }
}

/// `∂loss/∂θ`, laid out exactly like [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    layers: Vec<Linear>,
}

impl NetworkParams {
    /// He-uniform initialization with zero biases.
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layout()
            .into_iter()
            .map(|(name, inputs, outputs)| {
                let mut layer = Linear::zeros(&name, inputs, outputs);
                let bound = (6.0 / inputs as f64).sqrt();
                for w in &mut layer.weight {
                    *w = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(NetworkParams {
            config: config.clone(),
            layers,
            stamp: next_stamp(),
        })
    }

    /// All-zero parameters.
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        Ok(NetworkParams {
            config: config.clone(),
            layers: config.layout().iter().map(|(n, i, o)| Linear::zeros(n, *i, *o)).collect(),
            stamp: next_stamp(),
        })
    }

    pub(crate) fn from_layers(config: NetConfig, layers: Vec<Linear>) -> Result<Self> {
        config.validate()?;
        let expected = config.layout();
        let congruent = layers.len() == expected.len()
            && layers.iter().zip(&expected).all(|(l, (n, i, o))| {
                &l.name == n && l.inputs == *i && l.outputs == *o && l.weight.len() == i * o && l.bias.len() == *o
            });
        if !congruent {
            return Err(Error::Checkpoint("tensor layout does not match the network config".into()));
        }
        Ok(NetworkParams {
            config,
            layers,
            stamp: next_stamp(),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Linear> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads parameter `i` in flat order (per layer: weights, then biases).
    pub fn get(&self, i: usize) -> f64 {
        *flat_ref(&self.layers, i)
    }

    pub fn set(&mut self, i: usize, value: f64) {
        *flat_mut(&mut self.layers, i) = value;
        self.stamp = next_stamp();
    }

    /// Gradient descent step `θ ← θ − lr·g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.congruent(&self.layers) {
            return Err(Error::contract("gradient shape does not match parameters"));
        }
        for (p, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in p.weight.iter_mut().zip(&g.weight) {
                *w -= lr * gw;
            }
            for (b, gb) in p.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
        self.stamp = next_stamp();
        Ok(())
    }

    /// Overwrites these parameters with a copy of `source`.
    pub fn copy_from(&mut self, source: &NetworkParams) -> Result<()> {
        if self.config != source.config {
            return Err(Error::contract("cannot copy parameters across network configs"));
        }
        self.layers.clone_from(&source.layers);
        self.stamp = source.stamp;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn edgeconv(&self) -> &[Linear] {
        &self.layers[..self.config.edgeconv_dims.len()]
    }

    fn index_of(&self, name: &str) -> usize {
        self.layers.iter().position(|l| l.name == name).expect("layer exists")
    }
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Linear::zeros(&l.name, l.inputs, l.outputs))
                .collect(),
        }
    }

    /// Gradients from a flat vector in parameter order.
    pub fn from_flat(params: &NetworkParams, values: &[f64]) -> Self {
        let mut g = Self::zeros_like(params);
        assert_eq!(values.len(), g.len(), "flat gradient has the wrong length");
        for (i, &v) in values.iter().enumerate() {
            *flat_mut(&mut g.layers, i) = v;
        }
        g
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Linear> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        *flat_ref(&self.layers, i)
    }

    /// Zeroes every layer whose name fails `keep`.
    pub fn retain_layers(&mut self, keep: impl Fn(&str) -> bool) {
        for l in self.layers.iter_mut().filter(|l| !keep(&l.name)) {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|&v| v == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn congruent(&self, layers: &[Linear]) -> bool {
        self.layers.len() == layers.len()
            && self
                .layers
                .iter()
                .zip(layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }
}

fn flat_ref(layers: &[Linear], mut i: usize) -> &f64 {
    for l in layers {
        if i < l.weight.len() {
            return &l.weight[i];
        }
        i -= l.weight.len();
        if i < l.bias.len() {
            return &l.bias[i];
        }
        i -= l.bias.len();
    }
    panic!("parameter index out of range");
}

fn flat_mut(layers: &mut [Linear], mut i: usize) -> &mut f64 {
    for l in layers {
        if i < l.weight.len() {
            return &mut l.weight[i];
        }
        i -= l.weight.len();
        if i < l.bias.len() {
            return &mut l.bias[i];
        }
        i -= l.bias.len();
    }
    panic!("parameter index out of range");
}

/// Forward pass of one EdgeConv layer.
///
/// The edge perceptron on `[x_i ‖ x_j − x_i]` splits into a center term
/// and a neighbor term, so both are computed once per point rather than
/// once per edge. Returns the outputs and, per output entry, the neighbor
/// that won the max.
pub fn edgeconv_forward(layer: &Linear, features: &[f64], graph: &Graph) -> Result<(Vec<f64>, Vec<u32>)> {
    let din = layer.inputs / 2;
    let n = graph.len();
    if layer.inputs != 2 * din || features.len() != n * din {
        return Err(Error::contract(format!(
            "EdgeConv shape mismatch: {} features for {} points of width {}",
            features.len(),
            n,
            din
        )));
    }
    let (center, neighbor) = split_edge_layer(layer);
    let p = center.apply(features, n);
    let q = neighbor.apply(features, n);
    let dout = layer.outputs;
    let mut out = vec![0.0; n * dout];
    let mut arg = vec![0u32; n * dout];
    let mut self_edge = [0usize];
    for i in 0..n {
        let edges: &[usize] = if graph[i].is_empty() {
            self_edge[0] = i;
            &self_edge
        } else {
            &graph[i]
        };
        for c in 0..dout {
            let mut best = f64::NEG_INFINITY;
            let mut best_j = usize::MAX;
            for &j in edges {
                let v = relu(p[i * dout + c] + q[j * dout + c]);
                if v > best || (v == best && j < best_j) {
                    best = v;
                    best_j = j;
                }
            }
            out[i * dout + c] = best;
            arg[i * dout + c] = best_j as u32;
        }
    }
    Ok((out, arg))
}

/// Splits `W = [W1 | W2]` into the center map `W1 − W2` (with the bias)
/// and the neighbor map `W2`.
fn split_edge_layer(layer: &Linear) -> (Linear, Linear) {
    let din = layer.inputs / 2;
    let mut center = Linear::zeros("center", din, layer.outputs);
    let mut neighbor = Linear::zeros("neighbor", din, layer.outputs);
    for o in 0..layer.outputs {
        let row = layer.row(o);
        for k in 0..din {
            center.weight[o * din + k] = row[k] - row[din + k];
            neighbor.weight[o * din + k] = row[din + k];
        }
    }
    center.bias.clone_from(&layer.bias);
    (center, neighbor)
}

/// Network outputs for one cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    /// One value per frontier point, in frontier order.
    pub values: Vec<f64>,
    /// Scalar-head weight in `[0, 1]`.
    pub weight: f64,
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    stamp: u64,
    points: usize,
    frontier: usize,
    // per EdgeConv layer
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    args: Vec<Vec<u32>>,
    stacked: Vec<f64>,
    global_pre: Vec<f64>,
    pool_arg: Vec<usize>,
    pooled: Vec<f64>,
    // per head layer: input and pre-activation
    head_in: Vec<Vec<f64>>,
    head_pre: Vec<Vec<f64>>,
    weight_pre: Vec<f64>,
    weight: f64,
}

impl ForwardCache {
    /// The pooled global descriptor.
    pub fn global(&self) -> &[f64] {
        &self.pooled
    }
}

/// Stacks frontier then obstacle points into a row-major `N × 4` matrix.
pub fn cloud_features(cloud: &PointCloud4D) -> Vec<f64> {
    cloud.points().flat_map(|p| p.features()).collect()
}

/// Runs the network on a cloud, returning per-frontier values, the scalar
/// weight and the cache needed by [`backward`].
pub fn forward(params: &NetworkParams, cloud: &PointCloud4D) -> Result<(Output, ForwardCache)> {
    let nf = cloud.frontier.len();
    if nf == 0 {
        return Err(Error::contract("forward needs at least one frontier point"));
    }
    let cfg = &params.config;
    let n = cloud.len();
    let mut x = cloud_features(cloud);

    let static_graph = (!cfg.dynamic_graph).then(|| {
        let xy: Vec<f64> = x.chunks(POINT_DIM).flat_map(|p| [p[0], p[1]]).collect();
        knn_graph(&xy, 2, cfg.k_neighbors)
    });

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut args = Vec::new();
    let mut width = POINT_DIM;
    for layer in params.edgeconv() {
        let graph = match &static_graph {
            Some(g) => g.clone(),
            None => knn_graph(&x, width, cfg.k_neighbors),
        };
        let (out, arg) = edgeconv_forward(layer, &x, &graph)?;
        inputs.push(std::mem::replace(&mut x, out.clone()));
        outputs.push(out);
        args.push(arg);
        width = layer.outputs;
    }

    let s = cfg.stacked_dim();
    let mut stacked = Vec::with_capacity(n * s);
    for i in 0..n {
        for (out, &d) in outputs.iter().zip(&cfg.edgeconv_dims) {
            stacked.extend_from_slice(&out[i * d..(i + 1) * d]);
        }
    }

    let global = &params.layers[params.index_of("global")];
    let global_pre = global.apply(&stacked, n);
    let g = cfg.global_dim;
    let mut pooled = vec![f64::NEG_INFINITY; g];
    let mut pool_arg = vec![0usize; g];
    for i in 0..n {
        for c in 0..g {
            let v = relu(global_pre[i * g + c]);
            if v > pooled[c] {
                pooled[c] = v;
                pool_arg[c] = i;
            }
        }
    }

    // head over frontier rows only
    let mut h = Vec::with_capacity(nf * (s + g));
    for i in 0..nf {
        h.extend_from_slice(&stacked[i * s..(i + 1) * s]);
        h.extend_from_slice(&pooled);
    }
    let head_start = params.index_of("head0");
    let head_count = cfg.head_dims.len();
    let mut head_in = Vec::new();
    let mut head_pre = Vec::new();
    for (l, layer) in params.layers[head_start..head_start + head_count].iter().enumerate() {
        let pre = layer.apply(&h, nf);
        let next = if l + 1 < head_count {
            pre.iter().map(|&v| relu(v)).collect()
        } else {
            pre.clone()
        };
        head_in.push(std::mem::replace(&mut h, next));
        head_pre.push(pre);
    }
    let values = h;

    let w0 = &params.layers[params.index_of("weight0")];
    let w1 = &params.layers[params.index_of("weight1")];
    let weight_pre = w0.apply(&pooled, 1);
    let hidden: Vec<f64> = weight_pre.iter().map(|&v| relu(v)).collect();
    let weight = sigmoid(w1.apply(&hidden, 1)[0]);

    let cache = ForwardCache {
        stamp: params.stamp,
        points: n,
        frontier: nf,
        inputs,
        outputs,
        args,
        stacked,
        global_pre,
        pool_arg,
        pooled,
        head_in,
        head_pre,
        weight_pre,
        weight,
    };
    Ok((
        Output {
            values: values.clone(),
            weight,
        },
        cache,
    ))
}

/// Per-frontier values only.
pub fn values(params: &NetworkParams, cloud: &PointCloud4D) -> Result<Vec<f64>> {
    forward(params, cloud).map(|(o, _)| o.values)
}

/// Gradients of `Σ upstream_i · value_i`.
pub fn backward(params: &NetworkParams, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients> {
    if upstream.len() != cache.frontier {
        return Err(Error::contract(format!(
            "upstream has {} entries for {} frontier values",
            upstream.len(),
            cache.frontier
        )));
    }
    backward_impl(params, cache, Some(upstream), 0.0)
}

/// Gradients of `upstream · weight` for the scalar head.
pub fn backward_weight(params: &NetworkParams, cache: &ForwardCache, upstream: f64) -> Result<Gradients> {
    backward_impl(params, cache, None, upstream)
}

fn backward_impl(
    params: &NetworkParams,
    cache: &ForwardCache,
    dvalues: Option<&[f64]>,
    dweight: f64,
) -> Result<Gradients> {
    if cache.stamp != params.stamp {
        return Err(Error::contract("forward cache is stale for these parameters"));
    }
    let cfg = &params.config;
    let mut grads = Gradients::zeros_like(params);
    let (n, nf) = (cache.points, cache.frontier);
    let s = cfg.stacked_dim();
    let g = cfg.global_dim;
    let mut dstacked = vec![0.0; n * s];
    let mut dpooled = vec![0.0; g];

    if let Some(dv) = dvalues {
        let head_start = params.index_of("head0");
        let head_count = cfg.head_dims.len();
        let mut d = dv.to_vec();
        for l in (0..head_count).rev() {
            let idx = head_start + l;
            if l + 1 < head_count {
                for (dd, &pre) in d.iter_mut().zip(&cache.head_pre[l]) {
                    if pre <= 0.0 {
                        *dd = 0.0;
                    }
                }
            }
            d = params.layers[idx].backprop(&mut grads.layers[idx], &cache.head_in[l], &d, nf);
        }
        for i in 0..nf {
            let row = &d[i * (s + g)..(i + 1) * (s + g)];
            dstacked[i * s..(i + 1) * s].copy_from_slice(&row[..s]);
            for (dp, &v) in dpooled.iter_mut().zip(&row[s..]) {
                *dp += v;
            }
        }
    }

    if dweight != 0.0 {
        let (i0, i1) = (params.index_of("weight0"), params.index_of("weight1"));
        let hidden: Vec<f64> = cache.weight_pre.iter().map(|&v| relu(v)).collect();
        let dz = [dweight * cache.weight * (1.0 - cache.weight)];
        let mut dh = params.layers[i1].backprop(&mut grads.layers[i1], &hidden, &dz, 1);
        for (dd, &pre) in dh.iter_mut().zip(&cache.weight_pre) {
            if pre <= 0.0 {
                *dd = 0.0;
            }
        }
        let dg = params.layers[i0].backprop(&mut grads.layers[i0], &cache.pooled, &dh, 1);
        for (dp, v) in dpooled.iter_mut().zip(dg) {
            *dp += v;
        }
    }

    // max-pool routes to the winning row, then through the global ReLU
    let gi = params.index_of("global");
    let global = &params.layers[gi];
    for c in 0..g {
        let r = cache.pool_arg[c];
        let dg = dpooled[c];
        if dg == 0.0 || cache.global_pre[r * g + c] <= 0.0 {
            continue;
        }
        let grad = &mut grads.layers[gi];
        grad.bias[c] += dg;
        let xr = &cache.stacked[r * s..(r + 1) * s];
        let w = global.row(c);
        for k in 0..s {
            grad.weight[c * s + k] += dg * xr[k];
            dstacked[r * s + k] += dg * w[k];
        }
    }

    // EdgeConv layers, last to first
    let mut offsets = Vec::with_capacity(cfg.edgeconv_dims.len());
    let mut acc = 0;
    for &d in &cfg.edgeconv_dims {
        offsets.push(acc);
        acc += d;
    }
    let mut carry: Option<Vec<f64>> = None;
    for l in (0..cfg.edgeconv_dims.len()).rev() {
        let dout = cfg.edgeconv_dims[l];
        let mut dy = vec![0.0; n * dout];
        for i in 0..n {
            dy[i * dout..(i + 1) * dout].copy_from_slice(&dstacked[i * s + offsets[l]..i * s + offsets[l] + dout]);
        }
        if let Some(c) = carry.take() {
            for (a, b) in dy.iter_mut().zip(c) {
                *a += b;
            }
        }
        carry = Some(edgeconv_backward(
            &params.layers[l],
            &mut grads.layers[l],
            &cache.inputs[l],
            &cache.outputs[l],
            &cache.args[l],
            &dy,
            n,
        ));
    }
    Ok(grads)
}

fn edgeconv_backward(
    layer: &Linear,
    grad: &mut Linear,
    x: &[f64],
    out: &[f64],
    arg: &[u32],
    dy: &[f64],
    n: usize,
) -> Vec<f64> {
    let din = layer.inputs / 2;
    let dout = layer.outputs;
    let mut dp = vec![0.0; n * dout];
    let mut dq = vec![0.0; n * dout];
    for i in 0..n {
        for c in 0..dout {
            let g = dy[i * dout + c];
            // a zero output means the winning edge sat on the ReLU floor
            if g == 0.0 || out[i * dout + c] <= 0.0 {
                continue;
            }
            dp[i * dout + c] += g;
            dq[arg[i * dout + c] as usize * dout + c] += g;
        }
    }
    let (center, neighbor) = split_edge_layer(layer);
    let mut gc = Linear::zeros("center", din, dout);
    let mut gn = Linear::zeros("neighbor", din, dout);
    let dx_c = center.backprop(&mut gc, x, &dp, n);
    let dx_n = neighbor.backprop(&mut gn, x, &dq, n);
    // W1 = C + N, W2 = N
    for o in 0..dout {
        grad.bias[o] += gc.bias[o];
        for k in 0..din {
            let (c, nb) = (gc.weight[o * din + k], gn.weight[o * din + k]);
            grad.weight[o * layer.inputs + k] += c;
            grad.weight[o * layer.inputs + din + k] += nb - c;
        }
    }
    dx_c.into_iter().zip(dx_n).map(|(a, b)| a + b).collect()
}
