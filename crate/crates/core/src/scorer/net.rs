use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::Float;
use rayon::prelude::*;

use super::ScorerError;
use crate::datacube::CubeView;
use crate::numeric::RngStream;

/// Output widths of the four convolution blocks.
pub const CONV_WIDTHS: [usize; 4] = [16, 32, 64, 64];

/// Tensor names in storage order.
pub const PARAM_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "conv4.weight",
    "conv4.bias",
    "fc.weight",
    "fc.bias",
];

const FC: usize = 8;
const PROB_CLAMP: f64 = 1e-7;

/// Floating point type the network can run in.
pub trait Real: Float + Sum + AddAssign + Send + Sync + Debug + 'static {}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
fn lit<T: Real>(x: f64) -> T {
    T::from(x).expect("representable constant")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    fn zeros(name: &'static str, dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { name, dims, data: vec![T::zero(); n] }
    }
}

pub(crate) fn param_dims(n_channels: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(PARAM_NAMES.len());
    let mut c_in = n_channels;
    for &c_out in &CONV_WIDTHS {
        out.push(vec![c_out, c_in, 3, 3]);
        out.push(vec![c_out]);
        c_in = c_out;
    }
    out.push(vec![1, c_in]);
    out.push(vec![1]);
    out
}

fn zero_tensors<T: Real>(n_channels: usize) -> Vec<Tensor<T>> {
    PARAM_NAMES.iter().zip(param_dims(n_channels)).map(|(name, dims)| Tensor::zeros(name, dims)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerNet<T> {
    n_channels: usize,
    tensors: Vec<Tensor<T>>,
}

/// Loss gradients, laid out like [`ScorerNet::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros(n_channels: usize) -> Self {
        Self { tensors: zero_tensors(n_channels) }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flat_map(|t| &t.data).fold(0.0, |m, v| m.max(v.abs().to_f64().unwrap_or(f64::NAN)))
    }

    fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }
}

impl<T: Real> ScorerNet<T> {
    /// All-zero network.
    pub fn zeros(n_channels: usize) -> Result<Self, ScorerError> {
        if n_channels == 0 {
            return Err(ScorerError::ZeroChannels);
        }
        Ok(Self { n_channels, tensors: zero_tensors(n_channels) })
    }

    /// Builds a network from tensors in [`PARAM_NAMES`] order.
    pub fn from_tensors(n_channels: usize, tensors: Vec<Tensor<T>>) -> Result<Self, ScorerError> {
        if n_channels == 0 {
            return Err(ScorerError::ZeroChannels);
        }
        let dims = param_dims(n_channels);
        if tensors.len() != dims.len() {
            return Err(ScorerError::ShapeMismatch(format!("{} tensors, expected {}", tensors.len(), dims.len())));
        }
        for ((t, name), d) in tensors.iter().zip(PARAM_NAMES).zip(&dims) {
            if t.name != name || &t.dims != d || t.data.len() != d.iter().product::<usize>() {
                return Err(ScorerError::ShapeMismatch(format!("{} has shape {:?}, expected {name} {:?}", t.name, t.dims, d)));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(ScorerError::NonFinite);
            }
        }
        Ok(Self { n_channels, tensors })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ScorerNet<U> {
        ScorerNet {
            n_channels: self.n_channels,
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name,
                    dims: t.dims.clone(),
                    data: t.data.iter().map(|v| U::from(*v).expect("finite parameter")).collect(),
                })
                .collect(),
        }
    }

    fn check(&self, image: &CubeView<'_, T>) -> Result<(), ScorerError> {
        if image.channels != self.n_channels {
            return Err(ScorerError::ChannelMismatch { expected: self.n_channels, got: image.channels });
        }
        if image.height == 0 || image.width == 0 {
            return Err(ScorerError::ZeroExtent);
        }
        if image.data.iter().any(|v| !v.is_finite()) {
            return Err(ScorerError::NonFinite);
        }
        Ok(())
    }

    /// Pre-sigmoid output for one image.
    pub fn logit(&self, image: CubeView<'_, T>) -> Result<T, ScorerError> {
        self.check(&image)?;
        Ok(self.run(&image).logit)
    }

    /// Anomaly probability for one image.
    pub fn predict(&self, image: CubeView<'_, T>) -> Result<f64, ScorerError> {
        Ok(sigmoid(self.logit(image)?.to_f64().unwrap_or(f64::NAN)))
    }

    /// Probabilities for a batch; each image is scored independently.
    pub fn forward(&self, batch: &[CubeView<'_, T>]) -> Result<Vec<f64>, ScorerError> {
        if batch.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        batch.iter().map(|img| self.predict(*img)).collect()
    }

    /// Gradients of the mean cross-entropy over `batch`. Per-image terms
    /// are computed in parallel and summed in batch order.
    pub fn backward(&self, batch: &[CubeView<'_, T>], labels: &[u8]) -> Result<Gradients<T>, ScorerError> {
        Ok(self.loss_and_gradients(batch, labels)?.1)
    }

    pub(crate) fn loss_and_gradients(&self, batch: &[CubeView<'_, T>], labels: &[u8]) -> Result<(f64, Gradients<T>), ScorerError> {
        if batch.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        if labels.len() != batch.len() {
            return Err(ScorerError::LabelCount { labels: labels.len(), items: batch.len() });
        }
        for img in batch {
            self.check(img)?;
        }
        let scale = 1.0 / batch.len() as f64;
        let parts: Vec<(f64, Gradients<T>)> = batch
            .par_iter()
            .zip(labels.par_iter())
            .map(|(img, &y)| {
                let trace = self.run(img);
                let q = sigmoid(trace.logit.to_f64().unwrap_or(f64::NAN));
                let y = f64::from(y.min(1));
                let loss = sample_loss(y, q);
                (loss, self.single_backward(img, &trace, lit((q - y) * scale)))
            })
            .collect();
        let mut total = Gradients::zeros(self.n_channels);
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            total.add(g);
        }
        Ok((loss * scale, total))
    }

    fn run(&self, image: &CubeView<'_, T>) -> Trace<T> {
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(4);
        let mut shapes = Vec::with_capacity(5);
        shapes.push((image.channels, image.height, image.width));
        for layer in 0..4 {
            let (c_in, h, w) = shapes[layer];
            let input: &[T] = if layer == 0 { image.data } else { &acts[layer - 1] };
            let c_out = CONV_WIDTHS[layer];
            let mut out = conv_forward(input, c_in, h, w, &self.tensors[2 * layer].data, &self.tensors[2 * layer + 1].data, c_out);
            for v in &mut out {
                if !(*v > T::zero()) {
                    *v = T::zero();
                }
            }
            acts.push(out);
            shapes.push((c_out, out_dim(h), out_dim(w)));
        }
        let (c, h, w) = shapes[4];
        let pixels = h * w;
        let inv = lit::<T>(1.0 / pixels as f64);
        let pooled: Vec<T> = acts[3].chunks_exact(pixels).map(|p| p.iter().copied().sum::<T>() * inv).collect();
        debug_assert_eq!(pooled.len(), c);
        let fc_w = &self.tensors[FC].data;
        let mut logit = self.tensors[FC + 1].data[0];
        for (f, &wv) in pooled.iter().zip(fc_w) {
            logit += *f * wv;
        }
        Trace { acts, shapes, pooled, logit }
    }

    fn single_backward(&self, image: &CubeView<'_, T>, trace: &Trace<T>, dz: T) -> Gradients<T> {
        let mut g = Gradients::zeros(self.n_channels);
        let fc_w = &self.tensors[FC].data;
        for (gw, &f) in g.tensors[FC].data.iter_mut().zip(&trace.pooled) {
            *gw = dz * f;
        }
        g.tensors[FC + 1].data[0] = dz;

        let (c4, h4, w4) = trace.shapes[4];
        let p4 = h4 * w4;
        let inv = lit::<T>(1.0 / p4 as f64);
        let mut delta = vec![T::zero(); c4 * p4];
        for c in 0..c4 {
            let d = dz * fc_w[c] * inv;
            for (dv, &a) in delta[c * p4..(c + 1) * p4].iter_mut().zip(&trace.acts[3][c * p4..(c + 1) * p4]) {
                *dv = if a > T::zero() { d } else { T::zero() };
            }
        }

        for layer in (0..4).rev() {
            let (c_in, h, w) = trace.shapes[layer];
            let input: &[T] = if layer == 0 { image.data } else { &trace.acts[layer - 1] };
            let weight = &self.tensors[2 * layer].data;
            let (gw_slot, rest) = g.tensors[2 * layer..].split_at_mut(1);
            let mut din = if layer > 0 { Some(vec![T::zero(); c_in * h * w]) } else { None };
            conv_backward(
                input,
                c_in,
                h,
                w,
                weight,
                CONV_WIDTHS[layer],
                &delta,
                &mut gw_slot[0].data,
                &mut rest[0].data,
                din.as_deref_mut(),
            );
            if let Some(mut d) = din {
                for (dv, &a) in d.iter_mut().zip(&trace.acts[layer - 1]) {
                    if !(a > T::zero()) {
                        *dv = T::zero();
                    }
                }
                delta = d;
            }
        }
        g
    }
}

struct Trace<T> {
    acts: Vec<Vec<T>>,
    shapes: Vec<(usize, usize, usize)>,
    pooled: Vec<T>,
    logit: T,
}

/// He-uniform weights (`±sqrt(6 / fan_in)`), zero biases. Tensor `k` draws
/// from substream `k` of `seed`.
pub fn init_model<T: Real>(n_channels: usize, seed: u64) -> Result<ScorerNet<T>, ScorerError> {
    let mut net = ScorerNet::<T>::zeros(n_channels)?;
    let root = RngStream::new(seed);
    for (k, t) in net.tensors.iter_mut().enumerate() {
        if t.dims.len() == 1 {
            continue;
        }
        let fan_in: usize = t.dims[1..].iter().product();
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut rng = root.substream(k as u64);
        for v in &mut t.data {
            *v = lit(rng.uniform(-bound, bound));
        }
    }
    Ok(net)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sample_loss(y: f64, q: f64) -> f64 {
    let q = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
}

/// Mean binary cross-entropy with `q` clamped to `[1e-7, 1 - 1e-7]`.
pub fn cross_entropy(y: &[u8], q: &[f64]) -> Result<f64, ScorerError> {
    if q.is_empty() {
        return Err(ScorerError::EmptyBatch);
    }
    if y.len() != q.len() {
        return Err(ScorerError::LabelCount { labels: y.len(), items: q.len() });
    }
    let total: f64 = y.iter().zip(q).map(|(&y, &q)| sample_loss(f64::from(y.min(1)), q)).sum();
    Ok(total / q.len() as f64)
}

/// Output extent of a 3x3, stride 2, pad 1 convolution.
fn out_dim(n: usize) -> usize {
    (n - 1) / 2 + 1
}

/// Fills `buf` with the zero-padded 3x3 patches feeding output row `oy`,
/// one `c_in * 9` block per output column, in weight layout order.
fn patch_row<T: Real>(input: &[T], c_in: usize, h: usize, w: usize, oy: usize, ow: usize, buf: &mut [T]) {
    let k = c_in * 9;
    for (ox, patch) in buf.chunks_exact_mut(k).enumerate().take(ow) {
        for ic in 0..c_in {
            let plane = &input[ic * h * w..(ic + 1) * h * w];
            for ky in 0..3 {
                let iy = (2 * oy + ky).wrapping_sub(1);
                for kx in 0..3 {
                    let ix = (2 * ox + kx).wrapping_sub(1);
                    patch[ic * 9 + ky * 3 + kx] = if iy < h && ix < w { plane[iy * w + ix] } else { T::zero() };
                }
            }
        }
    }
}

/// Adds the patch gradients of output row `oy` back onto the input grid.
fn scatter_row<T: Real>(grad: &mut [T], c_in: usize, h: usize, w: usize, oy: usize, ow: usize, buf: &[T]) {
    let k = c_in * 9;
    for (ox, patch) in buf.chunks_exact(k).enumerate().take(ow) {
        for ic in 0..c_in {
            for ky in 0..3 {
                let iy = (2 * oy + ky).wrapping_sub(1);
                if iy >= h {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (2 * ox + kx).wrapping_sub(1);
                    if ix < w {
                        grad[(ic * h + iy) * w + ix] += patch[ic * 9 + ky * 3 + kx];
                    }
                }
            }
        }
    }
}

/// Dot product with eight interleaved accumulators combined in a fixed order.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn conv_forward<T: Real>(input: &[T], c_in: usize, h: usize, w: usize, weight: &[T], bias: &[T], c_out: usize) -> Vec<T> {
    let (oh, ow) = (out_dim(h), out_dim(w));
    let op = oh * ow;
    let k = c_in * 9;
    let mut out = vec![T::zero(); c_out * op];
    let mut buf = vec![T::zero(); ow * k];
    for oy in 0..oh {
        patch_row(input, c_in, h, w, oy, ow, &mut buf);
        for oc in 0..c_out {
            let wk = &weight[oc * k..(oc + 1) * k];
            let row = &mut out[oc * op + oy * ow..oc * op + (oy + 1) * ow];
            for (o, patch) in row.iter_mut().zip(buf.chunks_exact(k)) {
                *o = bias[oc] + dot(wk, patch);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Real>(
    input: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[T],
    c_out: usize,
    delta: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    mut grad_in: Option<&mut [T]>,
) {
    let (oh, ow) = (out_dim(h), out_dim(w));
    let op = oh * ow;
    let k = c_in * 9;
    for oc in 0..c_out {
        grad_b[oc] += delta[oc * op..(oc + 1) * op].iter().copied().sum::<T>();
    }
    let mut buf = vec![T::zero(); ow * k];
    let mut dbuf = vec![T::zero(); if grad_in.is_some() { ow * k } else { 0 }];
    for oy in 0..oh {
        patch_row(input, c_in, h, w, oy, ow, &mut buf);
        dbuf.fill(T::zero());
        for ox in 0..ow {
            let o = oy * ow + ox;
            let patch = &buf[ox * k..(ox + 1) * k];
            for oc in 0..c_out {
                let d = delta[oc * op + o];
                if d == T::zero() {
                    continue;
                }
                axpy(&mut grad_w[oc * k..(oc + 1) * k], d, patch);
                if !dbuf.is_empty() {
                    axpy(&mut dbuf[ox * k..(ox + 1) * k], d, &weight[oc * k..(oc + 1) * k]);
                }
            }
        }
        if let Some(g) = grad_in.as_deref_mut() {
            scatter_row(g, c_in, h, w, oy, ow, &dbuf);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_input<T: Real>(seed: u64, c: usize, h: usize, w: usize) -> Vec<T> {
        let mut rng = RngStream::new(seed);
        (0..c * h * w).map(|_| lit(rng.next_f64())).collect()
    }

    /// Straightforward per-output-element convolution with explicit padding checks.
    fn naive_logit(net: &ScorerNet<f64>, x: &[f64], c: usize, h: usize, w: usize) -> f64 {
        let mut cur = x.to_vec();
        let (mut c_in, mut h_in, mut w_in) = (c, h, w);
        for layer in 0..4 {
            let wt = &net.tensors()[2 * layer].data;
            let b = &net.tensors()[2 * layer + 1].data;
            let c_out = CONV_WIDTHS[layer];
            let (oh, ow) = ((h_in + 2 - 3) / 2 + 1, (w_in + 2 - 3) / 2 + 1);
            let mut next = vec![0.0; c_out * oh * ow];
            for oc in 0..c_out {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut s = b[oc];
                        for ic in 0..c_in {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (2 * oy + ky) as isize - 1;
                                    let ix = (2 * ox + kx) as isize - 1;
                                    if iy < 0 || ix < 0 || iy >= h_in as isize || ix >= w_in as isize {
                                        continue;
                                    }
                                    let v = cur[(ic * h_in + iy as usize) * w_in + ix as usize];
                                    s += wt[((oc * c_in + ic) * 3 + ky) * 3 + kx] * v;
                                }
                            }
                        }
                        next[(oc * oh + oy) * ow + ox] = s.max(0.0);
                    }
                }
            }
            cur = next;
            c_in = c_out;
            h_in = oh;
            w_in = ow;
        }
        let p = (h_in * w_in) as f64;
        let fc = &net.get("fc.weight").unwrap().data;
        let mut z = net.get("fc.bias").unwrap().data[0];
        for ch in 0..c_in {
            let mean: f64 = cur[ch * h_in * w_in..(ch + 1) * h_in * w_in].iter().sum::<f64>() / p;
            z += fc[ch] * mean;
        }
        z
    }

    #[test]
    fn zero_net_gives_half() {
        let net = ScorerNet::<f32>::zeros(4).unwrap();
        let x = seeded_input::<f32>(1, 4, 9, 7);
        let q = net.predict(CubeView::new(4, 9, 7, &x).unwrap()).unwrap();
        assert_eq!(q, 0.5);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = init_model::<f32>(6, 11).unwrap();
        let b = init_model::<f32>(6, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_model::<f32>(6, 12).unwrap());
    }

    #[test]
    fn first_layer_scales_with_channels() {
        let a = init_model::<f32>(6, 0).unwrap();
        let b = init_model::<f32>(300, 0).unwrap();
        let la = a.get("conv1.weight").unwrap().data.len();
        let lb = b.get("conv1.weight").unwrap().data.len();
        assert_eq!(la * 300, lb * 6);
        assert_eq!(a.parameter_count() - la, b.parameter_count() - lb);
    }

    #[test]
    fn init_checksum_fixture() {
        let net = init_model::<f32>(6, 0).unwrap();
        let sum: f64 = net.tensors().iter().flat_map(|t| &t.data).map(|&v| f64::from(v)).sum();
        let sq: f64 = net.tensors().iter().flat_map(|t| &t.data).map(|&v| f64::from(v).powi(2)).sum();
        assert_eq!(net.parameter_count(), 16 * 6 * 9 + 16 + 32 * 16 * 9 + 32 + 64 * 32 * 9 + 64 + 64 * 64 * 9 + 64 + 64 + 1);
        assert!((sum - INIT_SUM_SEED0).abs() < 1e-9, "sum {sum:.12}");
        assert!((sq - INIT_SQ_SEED0).abs() < 1e-9, "sq {sq:.12}");
        for t in net.tensors() {
            if t.dims.len() == 1 {
                assert!(t.data.iter().all(|v| *v == 0.0));
            } else {
                let bound = (6.0 / t.dims[1..].iter().product::<usize>() as f64).sqrt() as f32;
                assert!(t.data.iter().all(|v| v.abs() <= bound));
            }
        }
    }

    const INIT_SUM_SEED0: f64 = 37.838742567905228;
    const INIT_SQ_SEED0: f64 = 352.579793058852090;

    #[test]
    fn matches_naive_reference() {
        let net = init_model::<f64>(6, 3).unwrap();
        let x = seeded_input::<f64>(4, 6, 64, 64);
        let fast = net.logit(CubeView::new(6, 64, 64, &x).unwrap()).unwrap();
        let slow = naive_logit(&net, &x, 6, 64, 64);
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn odd_sizes_match_reference() {
        for (h, w) in [(1, 1), (2, 3), (5, 7), (9, 4)] {
            let net = init_model::<f64>(2, 8).unwrap();
            let x = seeded_input::<f64>(9, 2, h, w);
            let fast = net.logit(CubeView::new(2, h, w, &x).unwrap()).unwrap();
            assert!((fast - naive_logit(&net, &x, 2, h, w)).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_pure_and_in_range() {
        let net = init_model::<f32>(3, 5).unwrap();
        let x = seeded_input::<f32>(6, 3, 16, 16);
        let v = CubeView::new(3, 16, 16, &x).unwrap();
        let a = net.forward(&[v, v]).unwrap();
        assert_eq!(a[0].to_bits(), a[1].to_bits());
        assert_eq!(a[0].to_bits(), net.predict(v).unwrap().to_bits());
        assert!(a[0] > 0.0 && a[0] < 1.0);
    }

    #[test]
    fn logit_monotone_in_bias() {
        let mut net = init_model::<f64>(3, 5).unwrap();
        let x = seeded_input::<f64>(6, 3, 8, 8);
        let v = CubeView::new(3, 8, 8, &x).unwrap();
        let mut last = 0.0;
        for b in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            net.get_mut("fc.bias").unwrap().data[0] = b;
            let q = net.predict(v).unwrap();
            assert!(q > last);
            last = q;
        }
    }

    #[test]
    fn input_errors() {
        let net = init_model::<f32>(3, 0).unwrap();
        let x = vec![0.0f32; 2 * 4 * 4];
        assert!(matches!(net.predict(CubeView::new(2, 4, 4, &x).unwrap()), Err(ScorerError::ChannelMismatch { expected: 3, got: 2 })));
        let mut y = vec![0.0f32; 3 * 4 * 4];
        y[5] = f32::NAN;
        assert!(matches!(net.predict(CubeView::new(3, 4, 4, &y).unwrap()), Err(ScorerError::NonFinite)));
        assert!(matches!(net.forward(&[]), Err(ScorerError::EmptyBatch)));
        assert!(matches!(init_model::<f32>(0, 0), Err(ScorerError::ZeroChannels)));
    }

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy(&[1], &[0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let l = cross_entropy(&[1, 0], &[0.9, 0.2]).unwrap();
        assert!((l - 0.164252033486018).abs() < 1e-12, "{l}");
        assert!(cross_entropy(&[1], &[1.0 - 1e-7]).unwrap() < 1.1e-7);
        assert!(cross_entropy(&[1], &[1.0]).unwrap().is_finite());
        assert!(matches!(cross_entropy(&[], &[]), Err(ScorerError::EmptyBatch)));
        assert!(matches!(cross_entropy(&[1], &[0.5, 0.5]), Err(ScorerError::LabelCount { .. })));
    }

    #[test]
    fn logit_gradient_identity() {
        // With every upstream tensor zero the bias gradient is exactly dL/dz.
        let net = ScorerNet::<f64>::zeros(2).unwrap();
        let x = seeded_input::<f64>(1, 2, 4, 4);
        let v = CubeView::new(2, 4, 4, &x).unwrap();
        let g = net.backward(&[v, v, v], &[1, 0, 1]).unwrap();
        let expect = ((0.5 - 1.0) + (0.5 - 0.0) + (0.5 - 1.0)) / 3.0;
        assert!((g.get("fc.bias").unwrap().data[0] - expect).abs() < 1e-15);
    }
}
