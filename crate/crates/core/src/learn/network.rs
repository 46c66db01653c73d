//! LeNet-style network: conv → pool → conv → pool → fc + ReLU → fc → softmax.
//!
//! Convolutions are valid (no padding), stride 1, computed by im2col and
//! GEMM. There is no nonlinearity after the convolutions. All parameters
//! live in one flat vector so the solver and serializer stay trivial.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::real::{gemm, Mat, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub input_size: usize,
    pub channels: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::lenet(15)
    }
}

/// Derived layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub conv1_out: usize,
    pub pool1_out: usize,
    pub conv2_out: usize,
    pub pool2_out: usize,
    pub flat: usize,
    pub col1_rows: usize,
    pub col2_rows: usize,
}

/// Offsets of each parameter block in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub w3: usize,
    pub b3: usize,
    pub w4: usize,
    pub b4: usize,
    pub total: usize,
}

impl Architecture {
    /// 20 and 50 5×5 kernels, 500 hidden units, two classes, 60×60 input.
    pub fn lenet(channels: usize) -> Self {
        Architecture {
            input_size: 60,
            channels,
            conv1_filters: 20,
            conv1_kernel: 5,
            conv2_filters: 50,
            conv2_kernel: 5,
            hidden: 500,
            classes: 2,
        }
    }

    pub fn dims(&self) -> Dims {
        let conv1_out = self.input_size + 1 - self.conv1_kernel;
        let pool1_out = conv1_out / 2;
        let conv2_out = pool1_out + 1 - self.conv2_kernel;
        let pool2_out = conv2_out / 2;
        Dims {
            conv1_out,
            pool1_out,
            conv2_out,
            pool2_out,
            flat: self.conv2_filters * pool2_out * pool2_out,
            col1_rows: self.channels * self.conv1_kernel * self.conv1_kernel,
            col2_rows: self.conv1_filters * self.conv2_kernel * self.conv2_kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.input_size,
            self.channels,
            self.conv1_filters,
            self.conv1_kernel,
            self.conv2_filters,
            self.conv2_kernel,
            self.hidden,
        ];
        if positive.contains(&0) || self.classes != 2 {
            return Err(Error::InvalidArgument(format!("invalid architecture {self:?}")));
        }
        if self.conv1_kernel > self.input_size
            || (self.input_size + 1 - self.conv1_kernel) / 2 < self.conv2_kernel
            || self.dims().pool2_out == 0
        {
            return Err(Error::InvalidArgument(format!("layer sizes do not chain: {self:?}")));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.input_size * self.input_size
    }

    pub fn layout(&self) -> Layout {
        let d = self.dims();
        let w1 = 0;
        let b1 = w1 + self.conv1_filters * d.col1_rows;
        let w2 = b1 + self.conv1_filters;
        let b2 = w2 + self.conv2_filters * d.col2_rows;
        let w3 = b2 + self.conv2_filters;
        let b3 = w3 + self.hidden * d.flat;
        let w4 = b3 + self.hidden;
        let b4 = w4 + self.classes * self.hidden;
        Layout {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            w4,
            b4,
            total: b4 + self.classes,
        }
    }
}

/// Network with scalar type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    arch: Architecture,
    params: Vec<T>,
}

pub type CnnModel = Network<f32>;

/// Per-example state kept between forward and backward.
struct ConvCache<T> {
    argmax1: Vec<u32>,
    argmax2: Vec<u32>,
    col2: Vec<T>,
}

/// Forward activations for a batch.
pub struct BatchForward<T> {
    caches: Vec<ConvCache<T>>,
    flat: Vec<T>,
    hidden: Vec<T>,
    /// Row-major `N × classes` probabilities.
    pub probs: Vec<T>,
}

impl<T: Real> Network<T> {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Network {
            arch,
            params: vec![T::zero(); arch.layout().total],
        })
    }

    /// Uniform fan-in initialization `U(±√(3/fan_in))`, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let l = arch.layout();
        let d = arch.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = [
            (l.w1, l.b1, d.col1_rows),
            (l.w2, l.b2, d.col2_rows),
            (l.w3, l.b3, d.flat),
            (l.w4, l.b4, arch.hidden),
        ];
        for (start, end, fan_in) in blocks {
            let bound = (3.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for w in &mut net.params[start..end] {
                *w = T::from_f64(dist.sample(&mut rng));
            }
        }
        Ok(net)
    }

    pub fn from_params(arch: Architecture, params: Vec<T>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.layout().total {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                arch.layout().total,
                params.len()
            )));
        }
        Ok(Network { arch, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            arch: self.arch,
            params: self.params.iter().map(|v| U::from_f64(Real::to_f64(*v))).collect(),
        }
    }

    fn check_batch(&self, batch: &[T]) -> Result<usize> {
        let per = self.arch.input_len();
        if batch.is_empty() || batch.len() % per != 0 {
            return Err(Error::ShapeMismatch(format!(
                "batch of {} values is not a multiple of the {}-value input",
                batch.len(),
                per
            )));
        }
        Ok(batch.len() / per)
    }

    /// Row-major `N × 2` class probabilities.
    pub fn forward(&self, batch: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(batch)?.probs)
    }

    /// Positive-class probability per example.
    pub fn positive_scores(&self, batch: &[T]) -> Result<Vec<T>> {
        let p = self.forward(batch)?;
        Ok(p.chunks_exact(self.arch.classes).map(|r| r[1]).collect())
    }

    pub fn forward_cached(&self, batch: &[T]) -> Result<BatchForward<T>> {
        let n = self.check_batch(batch)?;
        let a = &self.arch;
        let d = a.dims();
        let l = a.layout();
        let per = a.input_len();
        let convs: Vec<(Vec<T>, ConvCache<T>)> = batch.par_chunks_exact(per).map(|x| self.conv_forward(x)).collect();
        let mut flat = Vec::with_capacity(n * d.flat);
        let mut caches = Vec::with_capacity(n);
        for (f, c) in convs {
            flat.extend_from_slice(&f);
            caches.push(c);
        }
        let p = &self.params;
        let mut hidden = bias_rows(&p[l.b3..l.w4], n);
        gemm(
            n,
            d.flat,
            a.hidden,
            Mat::rows(&flat, d.flat),
            Mat::t(&p[l.w3..l.b3], d.flat),
            T::one(),
            &mut hidden,
        );
        for h in &mut hidden {
            *h = h.max(T::zero());
        }
        let mut logits = bias_rows(&p[l.b4..], n);
        gemm(
            n,
            a.hidden,
            a.classes,
            Mat::rows(&hidden, a.hidden),
            Mat::t(&p[l.w4..l.b4], a.hidden),
            T::one(),
            &mut logits,
        );
        for row in logits.chunks_exact_mut(a.classes) {
            let m = row.iter().fold(T::neg_infinity(), |x, &y| x.max(y));
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                sum = sum + *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        Ok(BatchForward {
            caches,
            flat,
            hidden,
            probs: logits,
        })
    }

    fn conv_forward(&self, x: &[T]) -> (Vec<T>, ConvCache<T>) {
        let a = &self.arch;
        let d = a.dims();
        let l = a.layout();
        let p = &self.params;
        let col1 = im2col(x, a.channels, a.input_size, a.conv1_kernel);
        let n1 = d.conv1_out * d.conv1_out;
        let mut a1 = bias_cols(&p[l.b1..l.w2], n1);
        gemm(
            a.conv1_filters,
            d.col1_rows,
            n1,
            Mat::rows(&p[l.w1..l.b1], d.col1_rows),
            Mat::rows(&col1, n1),
            T::one(),
            &mut a1,
        );
        let (p1, argmax1) = max_pool(&a1, a.conv1_filters, d.conv1_out);
        let col2 = im2col(&p1, a.conv1_filters, d.pool1_out, a.conv2_kernel);
        let n2 = d.conv2_out * d.conv2_out;
        let mut a2 = bias_cols(&p[l.b2..l.w3], n2);
        gemm(
            a.conv2_filters,
            d.col2_rows,
            n2,
            Mat::rows(&p[l.w2..l.b2], d.col2_rows),
            Mat::rows(&col2, n2),
            T::one(),
            &mut a2,
        );
        let (p2, argmax2) = max_pool(&a2, a.conv2_filters, d.conv2_out);
        (p2, ConvCache { argmax1, argmax2, col2 })
    }

    /// Mean cross-entropy of the batch.
    pub fn loss(&self, batch: &[T], labels: &[u8]) -> Result<f64> {
        let fwd = self.forward_cached(batch)?;
        cross_entropy(&fwd.probs, labels, self.arch.classes)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[T], labels: &[u8]) -> Result<(f64, Vec<T>)> {
        let fwd = self.forward_cached(batch)?;
        let loss = cross_entropy(&fwd.probs, labels, self.arch.classes)?;
        Ok((loss, self.backward(batch, labels, &fwd)))
    }

    fn backward(&self, batch: &[T], labels: &[u8], fwd: &BatchForward<T>) -> Vec<T> {
        let a = &self.arch;
        let d = a.dims();
        let l = a.layout();
        let p = &self.params;
        let n = labels.len();
        let k = a.classes;
        let mut grad = vec![T::zero(); l.total];

        // softmax + cross-entropy: (p − onehot) / N
        let inv_n = T::from_f64(1.0 / n as f64);
        let mut dz = fwd.probs.clone();
        for (row, &y) in dz.chunks_exact_mut(k).zip(labels) {
            row[y as usize] = row[y as usize] - T::one();
            for v in row.iter_mut() {
                *v = *v * inv_n;
            }
        }
        gemm(
            k,
            n,
            a.hidden,
            Mat::t(&dz, k),
            Mat::rows(&fwd.hidden, a.hidden),
            T::zero(),
            &mut grad[l.w4..l.b4],
        );
        column_sums(&dz, k, &mut grad[l.b4..]);
        let mut dh = vec![T::zero(); n * a.hidden];
        gemm(
            n,
            k,
            a.hidden,
            Mat::rows(&dz, k),
            Mat::rows(&p[l.w4..l.b4], a.hidden),
            T::zero(),
            &mut dh,
        );
        for (g, h) in dh.iter_mut().zip(&fwd.hidden) {
            if *h <= T::zero() {
                *g = T::zero();
            }
        }
        gemm(
            a.hidden,
            n,
            d.flat,
            Mat::t(&dh, a.hidden),
            Mat::rows(&fwd.flat, d.flat),
            T::zero(),
            &mut grad[l.w3..l.b3],
        );
        column_sums(&dh, a.hidden, &mut grad[l.b3..l.w4]);
        let mut dflat = vec![T::zero(); n * d.flat];
        gemm(
            n,
            a.hidden,
            d.flat,
            Mat::rows(&dh, a.hidden),
            Mat::rows(&p[l.w3..l.b3], d.flat),
            T::zero(),
            &mut dflat,
        );

        let per = a.input_len();
        let conv_grads: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                self.conv_backward(
                    &batch[i * per..(i + 1) * per],
                    &fwd.caches[i],
                    &dflat[i * d.flat..(i + 1) * d.flat],
                )
            })
            .collect();
        // fixed-order reduction keeps results independent of scheduling
        let conv = &mut grad[..l.w3];
        for g in &conv_grads {
            for (acc, v) in conv.iter_mut().zip(g) {
                *acc = *acc + *v;
            }
        }
        grad
    }

    /// Gradient of the conv parameters (`[w1, b1, w2, b2]`) for one example.
    fn conv_backward(&self, x: &[T], cache: &ConvCache<T>, dpool2: &[T]) -> Vec<T> {
        let a = &self.arch;
        let d = a.dims();
        let l = a.layout();
        let p = &self.params;
        let mut g = vec![T::zero(); l.w3];
        let n2 = d.conv2_out * d.conv2_out;
        let da2 = unpool(dpool2, &cache.argmax2, a.conv2_filters * n2);
        gemm(
            a.conv2_filters,
            n2,
            d.col2_rows,
            Mat::rows(&da2, n2),
            Mat::t(&cache.col2, n2),
            T::zero(),
            &mut g[l.w2..l.b2],
        );
        row_sums(&da2, n2, &mut g[l.b2..l.w3]);
        let mut dcol2 = vec![T::zero(); d.col2_rows * n2];
        gemm(
            d.col2_rows,
            a.conv2_filters,
            n2,
            Mat::t(&p[l.w2..l.b2], d.col2_rows),
            Mat::rows(&da2, n2),
            T::zero(),
            &mut dcol2,
        );
        let dp1 = col2im(&dcol2, a.conv1_filters, d.pool1_out, a.conv2_kernel);
        let n1 = d.conv1_out * d.conv1_out;
        let da1 = unpool(&dp1, &cache.argmax1, a.conv1_filters * n1);
        let col1 = im2col(x, a.channels, a.input_size, a.conv1_kernel);
        gemm(
            a.conv1_filters,
            n1,
            d.col1_rows,
            Mat::rows(&da1, n1),
            Mat::t(&col1, n1),
            T::zero(),
            &mut g[l.w1..l.b1],
        );
        row_sums(&da1, n1, &mut g[l.b1..l.w2]);
        g
    }
}

/// Mean negative log-likelihood, accumulated in `f64`.
pub fn cross_entropy<T: Real>(probs: &[T], labels: &[u8], classes: usize) -> Result<f64> {
    if probs.len() != labels.len() * classes {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probs.len() / classes
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::InvalidArgument(format!("label {y} out of range")));
    }
    let sum: f64 = probs
        .chunks_exact(classes)
        .zip(labels)
        .map(|(row, &y)| -(Real::to_f64(row[y as usize]).max(f64::MIN_POSITIVE)).ln())
        .sum();
    Ok(sum / labels.len() as f64)
}

fn bias_rows<T: Real>(bias: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * bias.len());
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    out
}

fn bias_cols<T: Real>(bias: &[T], cols: usize) -> Vec<T> {
    bias.iter().flat_map(|&b| std::iter::repeat(b).take(cols)).collect()
}

fn column_sums<T: Real>(m: &[T], cols: usize, out: &mut [T]) {
    for v in out.iter_mut() {
        *v = T::zero();
    }
    for row in m.chunks_exact(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o = *o + *v;
        }
    }
}

fn row_sums<T: Real>(m: &[T], cols: usize, out: &mut [T]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = row.iter().copied().sum();
    }
}

/// `(C·k·k) × (o·o)` patch matrix of a `C × s × s` image, `o = s − k + 1`.
pub fn im2col<T: Real>(x: &[T], channels: usize, size: usize, k: usize) -> Vec<T> {
    let o = size + 1 - k;
    let mut out = vec![T::zero(); channels * k * k * o * o];
    let mut row = 0;
    for c in 0..channels {
        let plane = &x[c * size * size..(c + 1) * size * size];
        for ki in 0..k {
            for kj in 0..k {
                let dst = &mut out[row * o * o..(row + 1) * o * o];
                for oi in 0..o {
                    let src = &plane[(oi + ki) * size + kj..(oi + ki) * size + kj + o];
                    dst[oi * o..(oi + 1) * o].copy_from_slice(src);
                }
                row += 1;
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
pub fn col2im<T: Real>(col: &[T], channels: usize, size: usize, k: usize) -> Vec<T> {
    let o = size + 1 - k;
    let mut out = vec![T::zero(); channels * size * size];
    let mut row = 0;
    for c in 0..channels {
        for ki in 0..k {
            for kj in 0..k {
                let src = &col[row * o * o..(row + 1) * o * o];
                for oi in 0..o {
                    let base = c * size * size + (oi + ki) * size + kj;
                    for (dst, v) in out[base..base + o].iter_mut().zip(&src[oi * o..(oi + 1) * o]) {
                        *dst = *dst + *v;
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// 2×2 stride-2 max pooling (trailing odd row/column dropped). Returns the
/// pooled maps and, per output, the flat input index of the first maximum.
pub fn max_pool<T: Real>(x: &[T], channels: usize, size: usize) -> (Vec<T>, Vec<u32>) {
    let o = size / 2;
    let mut out = Vec::with_capacity(channels * o * o);
    let mut arg = Vec::with_capacity(channels * o * o);
    for c in 0..channels {
        let base = c * size * size;
        for i in 0..o {
            for j in 0..o {
                let mut best = base + 2 * i * size + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * size + 2 * j + dj;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

/// Routes pooled gradients to the recorded argmax cells.
pub fn unpool<T: Real>(grad: &[T], argmax: &[u32], input_len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); input_len];
    for (g, &i) in grad.iter().zip(argmax) {
        out[i as usize] = out[i as usize] + *g;
    }
    out
}
