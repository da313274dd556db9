//! Small dense networks with hand-written backpropagation and Adam.
//!
//! Batches are row-major: one sample per row.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
        }
    }

    /// Multiplies `grad` by the derivative, given the activation output.
    fn backprop(self, out: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.zip_mut_with(out, |g, &o| {
                if o <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(out, |g, &o| *g *= 1.0 - o * o),
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `in x out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    hidden: Activation,
    output: Activation,
}

/// Activations recorded by [`Mlp::forward_cached`], needed for backprop.
#[derive(Debug, Clone)]
pub struct Cache {
    /// `outs[0]` is the input; `outs[i + 1]` is the activated output of layer `i`.
    outs: Vec<Array2<f64>>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.outs.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients with the same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Layer>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w += &b.w;
            a.b += &b.b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.w *= k;
            l.b *= k;
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

impl Mlp {
    /// Uniform fan-in initialization (`±1/sqrt(fan_in)`), the usual default for
    /// small actor-critic networks.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    w: Array2::from_shape_fn((w[0], w[1]), |_| dist.sample(rng)),
                    b: Array1::from_shape_fn(w[1], |_| dist.sample(rng)),
                }
            })
            .collect();
        Mlp {
            sizes: sizes.to_vec(),
            layers,
            hidden,
            output,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            self.activation(i).apply(&mut h);
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Cache {
        let mut outs = Vec::with_capacity(self.layers.len() + 1);
        outs.push(x.to_owned());
        for (i, l) in self.layers.iter().enumerate() {
            let mut h = outs[i].dot(&l.w) + &l.b;
            self.activation(i).apply(&mut h);
            outs.push(h);
        }
        Cache { outs }
    }

    /// Gradients of a scalar loss given `dL/d(output)`; also returns
    /// `dL/d(input)`.
    pub fn backward(&self, cache: &Cache, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let mut grad = grad_out.clone();
        let mut layers = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            self.activation(i).backprop(&cache.outs[i + 1], &mut grad);
            let input = &cache.outs[i];
            let gw = input.t().dot(&grad);
            let gb = grad.sum_axis(Axis(0));
            let next = grad.dot(&self.layers[i].w.t());
            layers.push(Layer { w: gw, b: gb });
            grad = next;
        }
        layers.reverse();
        (Grads { layers }, grad)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| *v = it.next().unwrap());
            l.b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// `self <- (1 - tau) * self + tau * source`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            t.w.zip_mut_with(&s.w, |a, &b| *a = (1.0 - tau) * *a + tau * b);
            t.b.zip_mut_with(&s.b, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

const MAGIC: &[u8; 8] = b"SILPMLP\0";
const FORMAT_VERSION: u32 = 1;
const MAX_LAYERS: usize = 64;
const MAX_WIDTH: usize = 1 << 16;
const MAX_PARAMS: usize = 1 << 26;

impl Mlp {
    /// Versioned little-endian flat encoding:
    /// magic, version, hidden/output activation codes, layer count, sizes,
    /// then all parameters layer by layer (weights row-major, then biases).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.sizes.len() + 8 * self.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.hidden.code());
        out.push(self.output.code());
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for v in self.params() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut magic = [0u8; 8];
        take(&mut cur, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a network weight file".into()));
        }
        let version = read_u32(&mut cur)?;
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported weight format version {version}")));
        }
        let mut acts = [0u8; 2];
        take(&mut cur, &mut acts)?;
        let hidden = Activation::from_code(acts[0])
            .ok_or_else(|| Error::Parse(format!("unknown activation code {}", acts[0])))?;
        let output = Activation::from_code(acts[1])
            .ok_or_else(|| Error::Parse(format!("unknown activation code {}", acts[1])))?;
        let n = read_u32(&mut cur)? as usize;
        if !(2..=MAX_LAYERS).contains(&n) {
            return Err(Error::Parse(format!("bad layer count {n}")));
        }
        let mut sizes = Vec::with_capacity(n);
        for _ in 0..n {
            let s = read_u32(&mut cur)? as usize;
            if s == 0 || s > MAX_WIDTH {
                return Err(Error::Parse(format!("bad layer width {s}")));
            }
            sizes.push(s);
        }
        let count: usize = sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
        if count > MAX_PARAMS {
            return Err(Error::Parse(format!("{count} parameters exceeds limit")));
        }
        if cur.len() != count * 8 {
            return Err(Error::Parse(format!(
                "expected {} parameter bytes, found {}",
                count * 8,
                cur.len()
            )));
        }
        let params: Vec<f64> = cur
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut net = Mlp {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    w: Array2::zeros((w[0], w[1])),
                    b: Array1::zeros(w[1]),
                })
                .collect(),
            sizes,
            hidden,
            output,
        };
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| Error::io("<weights>", e))?;
        Self::from_bytes(&buf)
    }
}

fn take(cur: &mut &[u8], out: &mut [u8]) -> Result<()> {
    if cur.len() < out.len() {
        return Err(Error::Parse("truncated weight file".into()));
    }
    out.copy_from_slice(&cur[..out.len()]);
    *cur = &cur[out.len()..];
    Ok(())
}

fn read_u32(cur: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    take(cur, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    /// Descends along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        let eps = self.eps;
        for ((layer, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()))
        {
            update(&mut layer.w, &g.w, &mut m.w, &mut v.w, b1, b2, step, eps);
            update(&mut layer.b, &g.b, &mut m.b, &mut v.b, b1, b2, step, eps);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    b1: f64,
    b2: f64,
    step: f64,
    eps: f64,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() + eps);
        });
}

/// Stacks equally sized feature rows into a batch matrix.
pub fn stack_rows(rows: &[Vec<f64>], width: usize) -> Array2<f64> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for r in rows {
        debug_assert_eq!(r.len(), width);
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), width), flat).expect("rows have equal width")
}
