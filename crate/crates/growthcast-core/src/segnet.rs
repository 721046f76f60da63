//! Unsupervised segmentation by differentiable feature clustering.
//!
//! A small CNN is trained against its own argmax labels: M conv
//! components (3x3 conv, ReLU, batch norm) build a p-channel feature
//! map, a 1x1 linear classifier maps it to q response channels, the
//! responses are standardized per channel, and the per-pixel argmax
//! becomes both the label map and the training target. A spatial
//! continuity penalty (L1 of adjacent response differences) merges
//! regions until the label count stops shrinking or iterations run out.

use crate::exec;
use crate::maskops::BinaryMask;
use crate::pipeline::Raster;
use crate::tensor::{
    activate, activate_backward, batch_norm, batch_norm_backward, conv2d, conv2d_backward,
    sgd_momentum_step, xavier_init, Activation, BatchNormCache, Element, Parameter, RngStream,
    Tensor, TensorError,
};
use std::fs;
use std::io::BufWriter;
use std::path::Path;
use thiserror::Error;

/// Batch-norm epsilon used inside components and for the response
/// standardization.
const BN_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum SegError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid segmentation config: {0}")]
    BadConfig(&'static str),
    #[error("block {width}x{height} smaller than the 3x3 kernel")]
    BlockTooSmall { width: usize, height: usize },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("label {label} out of range (q = {q})")]
    LabelOutOfRange { label: u32, q: usize },
    #[error("reference mask is empty")]
    EmptyReference,
    #[error("label map is {lw}x{lh} but reference is {rw}x{rh}")]
    ReferenceDimMismatch {
        lw: usize,
        lh: usize,
        rw: usize,
        rh: usize,
    },
    #[error("{q} labels exceed the 256-entry palette of indexed PNG")]
    TooManyLabelsForPng { q: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("png encoding failed: {0}")]
    Png(String),
}

/// Segmentation hyperparameters. Defaults follow the reference settings
/// of the cited clustering method; tests use smaller values.
#[derive(Debug, Clone)]
pub struct SegConfig {
    /// Number of conv components M.
    pub components: usize,
    /// Feature channels p per component.
    pub filters: usize,
    /// Initial label count q (q <= p).
    pub labels: usize,
    /// Continuity weight mu.
    pub continuity_weight: f64,
    pub lr: f64,
    pub momentum: f64,
    pub max_iters: usize,
    /// Stop once the distinct-label count drops to this value.
    pub min_labels: usize,
}

impl Default for SegConfig {
    fn default() -> Self {
        SegConfig {
            components: 3,
            filters: 100,
            labels: 100,
            continuity_weight: 5.0,
            lr: 0.1,
            momentum: 0.9,
            max_iters: 500,
            min_labels: 3,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<(), SegError> {
        if self.components == 0 || self.filters == 0 || self.labels == 0 {
            return Err(SegError::BadConfig("M, p, q must be positive"));
        }
        if self.labels > self.filters {
            return Err(SegError::BadConfig("q must not exceed p"));
        }
        if self.min_labels == 0 {
            return Err(SegError::BadConfig("min_labels must be at least 1"));
        }
        if self.lr <= 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return Err(SegError::BadConfig("lr > 0 and momentum in [0,1) required"));
        }
        if self.max_iters == 0 || self.continuity_weight < 0.0 {
            return Err(SegError::BadConfig("max_iters > 0 and mu >= 0 required"));
        }
        Ok(())
    }
}

/// One conv component: 3x3 conv, ReLU, batch norm.
#[derive(Debug, Clone)]
struct SegComponent<E: Element> {
    kernels: Parameter<E>,
    bias: Parameter<E>,
    gamma: Parameter<E>,
    beta: Parameter<E>,
}

/// The trainable segmentation network.
#[derive(Debug, Clone)]
pub struct SegNetModel<E: Element = f32> {
    components: Vec<SegComponent<E>>,
    classifier_kernels: Parameter<E>,
    classifier_bias: Parameter<E>,
    /// Affine of the response normalization; starts at (1, 0) so fresh
    /// responses are exactly standardized, then learns to sharpen.
    response_gamma: Parameter<E>,
    response_beta: Parameter<E>,
    in_channels: usize,
    labels: usize,
}

impl<E: Element> SegNetModel<E> {
    /// Xavier-initialized model; conv biases start at zero, batch-norm
    /// affine at (1, 0). Draw order is fixed, so a seed pins the model.
    pub fn init(in_channels: usize, cfg: &SegConfig, rng: &mut RngStream) -> Result<Self, SegError> {
        cfg.validate()?;
        let mut components = Vec::with_capacity(cfg.components);
        let mut cin = in_channels;
        for _ in 0..cfg.components {
            let kernels = xavier_init(
                &[cfg.filters, cin, 3, 3],
                cin * 9,
                cfg.filters * 9,
                rng,
            )?;
            components.push(SegComponent {
                kernels: Parameter::new(kernels),
                bias: Parameter::new(Tensor::zeros(&[cfg.filters])),
                gamma: Parameter::new(Tensor::full(&[cfg.filters], E::one())),
                beta: Parameter::new(Tensor::zeros(&[cfg.filters])),
            });
            cin = cfg.filters;
        }
        let classifier = xavier_init(
            &[cfg.labels, cfg.filters, 1, 1],
            cfg.filters,
            cfg.labels,
            rng,
        )?;
        Ok(SegNetModel {
            components,
            classifier_kernels: Parameter::new(classifier),
            classifier_bias: Parameter::new(Tensor::zeros(&[cfg.labels])),
            response_gamma: Parameter::new(Tensor::full(&[cfg.labels], E::one())),
            response_beta: Parameter::new(Tensor::zeros(&[cfg.labels])),
            in_channels,
            labels: cfg.labels,
        })
    }

    /// Initial label count q.
    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<E>> {
        let mut ps = Vec::new();
        for c in &mut self.components {
            ps.push(&mut c.kernels);
            ps.push(&mut c.bias);
            ps.push(&mut c.gamma);
            ps.push(&mut c.beta);
        }
        ps.push(&mut self.classifier_kernels);
        ps.push(&mut self.classifier_bias);
        ps.push(&mut self.response_gamma);
        ps.push(&mut self.response_beta);
        ps
    }

    pub fn zero_grads(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    /// One heavy-ball step on every parameter from its stored gradient.
    pub fn sgd_step(&mut self, lr: f64, momentum: f64) {
        let (lr, momentum) = (E::from_f64(lr), E::from_f64(momentum));
        for p in self.parameters_mut() {
            sgd_momentum_step(p, lr, momentum);
        }
    }
}

struct ComponentCache<E: Element> {
    input: Tensor<E>,
    pre_activation: Tensor<E>,
    bn: BatchNormCache<E>,
}

/// Everything the backward pass needs from one forward pass.
pub struct SegForwardCache<E: Element> {
    components: Vec<ComponentCache<E>>,
    features: Tensor<E>,
    response_std: BatchNormCache<E>,
}

/// Forward pass on a [Cin,H,W] tensor: standardized responses [q,H,W].
pub fn forward<E: Element>(
    model: &SegNetModel<E>,
    block: &Tensor<E>,
) -> Result<(Tensor<E>, SegForwardCache<E>), SegError> {
    let shape = block.shape();
    if shape.len() != 3 {
        return Err(SegError::Tensor(TensorError::Rank {
            expected: 3,
            got: shape.len(),
        }));
    }
    if shape[1] < 3 || shape[2] < 3 {
        return Err(SegError::BlockTooSmall {
            width: shape[2],
            height: shape[1],
        });
    }
    let eps = E::from_f64(BN_EPS);
    let mut x = block.clone();
    let mut caches = Vec::with_capacity(model.components.len());
    for comp in &model.components {
        let z = conv2d(&x, &comp.kernels.value, &comp.bias.value)?;
        let a = activate(&z, Activation::Relu);
        let (y, bn) = batch_norm(&a, &comp.gamma.value, &comp.beta.value, eps)?;
        caches.push(ComponentCache {
            input: x,
            pre_activation: z,
            bn,
        });
        x = y;
    }
    let raw = conv2d(&x, &model.classifier_kernels.value, &model.classifier_bias.value)?;
    let (responses, response_std) = batch_norm(
        &raw,
        &model.response_gamma.value,
        &model.response_beta.value,
        eps,
    )?;
    Ok((
        responses,
        SegForwardCache {
            components: caches,
            features: x,
            response_std,
        },
    ))
}

/// Response map for a raster block: r'_n, standardized per channel to
/// zero mean and unit variance over the block's pixels.
pub fn response_map<E: Element>(
    model: &SegNetModel<E>,
    block: &Raster,
) -> Result<Tensor<E>, SegError> {
    let t = block.to_tensor().cast::<E>();
    Ok(forward(model, &t)?.0)
}

/// Backpropagate `grad_responses` through the cached forward pass,
/// accumulating into every parameter's gradient slot.
pub fn backward<E: Element>(
    model: &mut SegNetModel<E>,
    cache: &SegForwardCache<E>,
    grad_responses: &Tensor<E>,
) -> Result<(), SegError> {
    let (g_raw, d_gamma, d_beta) =
        batch_norm_backward(grad_responses, &cache.response_std, &model.response_gamma.value)?;
    model.response_gamma.accumulate(&d_gamma)?;
    model.response_beta.accumulate(&d_beta)?;
    let cg = conv2d_backward(&g_raw, &cache.features, &model.classifier_kernels.value)?;
    model.classifier_kernels.accumulate(&cg.kernels)?;
    model.classifier_bias.accumulate(&cg.bias)?;
    let mut g = cg.input;
    for (comp, cc) in model.components.iter_mut().zip(cache.components.iter()).rev() {
        let (g_a, dgamma, dbeta) = batch_norm_backward(&g, &cc.bn, &comp.gamma.value)?;
        comp.gamma.accumulate(&dgamma)?;
        comp.beta.accumulate(&dbeta)?;
        let g_z = activate_backward(&g_a, &cc.pre_activation, Activation::Relu);
        let grads = conv2d_backward(&g_z, &cc.input, &comp.kernels.value)?;
        comp.kernels.accumulate(&grads.kernels)?;
        comp.bias.accumulate(&grads.bias)?;
        g = grads.input;
    }
    Ok(())
}

/// Per-pixel cluster labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    /// Initial label count q; every stored label is < q.
    num_classes: usize,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per label id (length q).
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.num_classes];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Number of labels that actually occur.
    pub fn distinct_count(&self) -> usize {
        self.histogram().iter().filter(|&&c| c > 0).count()
    }
}

/// Per-pixel argmax over response channels; ties break to the lowest
/// channel index.
pub fn assign_labels<E: Element>(responses: &Tensor<E>) -> LabelMap {
    let (q, h, w) = (
        responses.shape()[0],
        responses.shape()[1],
        responses.shape()[2],
    );
    let data = responses.data();
    let labels = exec::map_range(h * w, |px| {
        let mut best = 0u32;
        let mut best_v = data[px];
        for c in 1..q {
            let v = data[c * h * w + px];
            if v > best_v {
                best_v = v;
                best = c as u32;
            }
        }
        best
    });
    LabelMap {
        width: w,
        height: h,
        labels,
        num_classes: q,
    }
}

/// Loss = self-supervised softmax cross-entropy against the argmax
/// labels + mu * mean L1 difference of adjacent response vectors.
/// Labels are treated as constants (no gradient through the argmax).
pub fn seg_loss<E: Element>(
    responses: &Tensor<E>,
    labels: &LabelMap,
    mu: f64,
) -> Result<E, SegError> {
    let (loss, _) = seg_loss_terms(responses, labels, mu, false)?;
    Ok(loss)
}

/// Gradient of [`seg_loss`] with respect to the responses.
pub fn seg_loss_backward<E: Element>(
    responses: &Tensor<E>,
    labels: &LabelMap,
    mu: f64,
) -> Result<Tensor<E>, SegError> {
    let (_, grad) = seg_loss_terms(responses, labels, mu, true)?;
    Ok(grad.expect("gradient requested"))
}

fn seg_loss_terms<E: Element>(
    responses: &Tensor<E>,
    labels: &LabelMap,
    mu: f64,
    want_grad: bool,
) -> Result<(E, Option<Tensor<E>>), SegError> {
    let (q, h, w) = (
        responses.shape()[0],
        responses.shape()[1],
        responses.shape()[2],
    );
    if labels.width != w || labels.height != h {
        return Err(SegError::ReferenceDimMismatch {
            lw: labels.width,
            lh: labels.height,
            rw: w,
            rh: h,
        });
    }
    let data = responses.data();
    let plane = h * w;
    let n_px = E::from_f64(plane as f64);

    // Similarity: softmax cross-entropy per pixel vs its own argmax.
    let mut grad = want_grad.then(|| Tensor::zeros(responses.shape()));
    let mut l_sim = E::zero();
    for px in 0..plane {
        let mut max_v = data[px];
        for c in 1..q {
            max_v = max_v.max(data[c * plane + px]);
        }
        let mut denom = E::zero();
        for c in 0..q {
            denom += (data[c * plane + px] - max_v).exp();
        }
        let target = labels.labels[px] as usize;
        let logit = data[target * plane + px] - max_v;
        l_sim += denom.ln() - logit;
        if let Some(g) = grad.as_mut() {
            for c in 0..q {
                let soft = (data[c * plane + px] - max_v).exp() / denom;
                let ind = if c == target { E::one() } else { E::zero() };
                g.data_mut()[c * plane + px] = (soft - ind) / n_px;
            }
        }
    }
    l_sim = l_sim / n_px;

    // Continuity: mean |vertical difference| + mean |horizontal difference|
    // of adjacent response vectors, over all channels.
    let mu_e = E::from_f64(mu);
    let mut l_con = E::zero();
    let v_count = q * w * h.saturating_sub(1);
    let h_count = q * h * w.saturating_sub(1);
    if v_count > 0 {
        let inv = E::one() / E::from_f64(v_count as f64);
        let mut sum = E::zero();
        for c in 0..q {
            for y in 0..h - 1 {
                for x in 0..w {
                    let lo = c * plane + y * w + x;
                    let hi = lo + w;
                    let d = data[hi] - data[lo];
                    sum += d.abs();
                    if let Some(g) = grad.as_mut() {
                        let s = if d > E::zero() {
                            E::one()
                        } else if d < E::zero() {
                            -E::one()
                        } else {
                            E::zero()
                        } * inv
                            * mu_e;
                        g.data_mut()[hi] += s;
                        g.data_mut()[lo] -= s;
                    }
                }
            }
        }
        l_con += sum * inv;
    }
    if h_count > 0 {
        let inv = E::one() / E::from_f64(h_count as f64);
        let mut sum = E::zero();
        for c in 0..q {
            for y in 0..h {
                for x in 0..w - 1 {
                    let lo = c * plane + y * w + x;
                    let hi = lo + 1;
                    let d = data[hi] - data[lo];
                    sum += d.abs();
                    if let Some(g) = grad.as_mut() {
                        let s = if d > E::zero() {
                            E::one()
                        } else if d < E::zero() {
                            -E::one()
                        } else {
                            E::zero()
                        } * inv
                            * mu_e;
                        g.data_mut()[hi] += s;
                        g.data_mut()[lo] -= s;
                    }
                }
            }
        }
        l_con += sum * inv;
    }

    Ok((l_sim + mu_e * l_con, grad))
}

/// Train one block: forward, argmax, loss, backward, SGD-momentum,
/// until `max_iters` or the distinct-label count reaches `min_labels`.
/// Returns the final model and the labels of the final forward pass.
pub fn train_segmentation<E: Element>(
    block: &Raster,
    cfg: &SegConfig,
    rng: &mut RngStream,
) -> Result<(SegNetModel<E>, LabelMap), SegError> {
    cfg.validate()?;
    let mut model = SegNetModel::init(block.bands(), cfg, rng)?;
    let input = block.to_tensor().cast::<E>();
    for iteration in 0..cfg.max_iters {
        let (responses, cache) = forward(&model, &input)?;
        let labels = assign_labels(&responses);
        if labels.distinct_count() <= cfg.min_labels {
            return Ok((model, labels));
        }
        let (loss, grad) = seg_loss_terms(&responses, &labels, cfg.continuity_weight, true)?;
        if !loss.is_finite() {
            return Err(SegError::NonFiniteLoss { iteration });
        }
        model.zero_grads();
        backward(&mut model, &cache, &grad.expect("gradient requested"))?;
        model.sgd_step(cfg.lr, cfg.momentum);
        log::debug!("seg iter {iteration}: loss {}", loss.to_f64());
    }
    let (responses, _) = forward(&model, &input)?;
    let labels = assign_labels(&responses);
    Ok((model, labels))
}

/// Binary mask of all pixels carrying `target`.
pub fn extract_class_mask(labels: &LabelMap, target: u32) -> Result<BinaryMask, SegError> {
    if target as usize >= labels.num_classes {
        return Err(SegError::LabelOutOfRange {
            label: target,
            q: labels.num_classes,
        });
    }
    Ok(BinaryMask::from_bits(
        labels.width,
        labels.height,
        labels.labels.iter().map(|&l| u8::from(l == target)).collect(),
    ))
}

/// The label with the best intersection-over-union against a reference
/// mask; ties break to the lowest id.
pub fn select_urban_label(labels: &LabelMap, reference: &BinaryMask) -> Result<u32, SegError> {
    if reference.width() != labels.width || reference.height() != labels.height {
        return Err(SegError::ReferenceDimMismatch {
            lw: labels.width,
            lh: labels.height,
            rw: reference.width(),
            rh: reference.height(),
        });
    }
    let ref_count = reference.count_ones();
    if ref_count == 0 {
        return Err(SegError::EmptyReference);
    }
    let q = labels.num_classes;
    let mut inter = vec![0usize; q];
    let mut label_count = vec![0usize; q];
    for (i, &l) in labels.labels.iter().enumerate() {
        label_count[l as usize] += 1;
        if reference.bits()[i] == 1 {
            inter[l as usize] += 1;
        }
    }
    let mut best = 0u32;
    let mut best_iou = -1.0f64;
    for id in 0..q {
        let union = label_count[id] + ref_count - inter[id];
        let iou = if union == 0 {
            0.0
        } else {
            inter[id] as f64 / union as f64
        };
        if iou > best_iou {
            best_iou = iou;
            best = id as u32;
        }
    }
    Ok(best)
}

/// Deterministic palette: golden-angle hue walk, label 0 first.
fn palette_color(id: usize) -> [u8; 3] {
    let hue = (id as f64 * 137.507_764) % 360.0;
    let (h, s, v) = (hue / 60.0, 0.65, 0.92);
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

/// Export a label map as an 8-bit indexed PNG plus a sidecar text
/// palette (`<path>.palette.txt`, lines `label r g b`).
pub fn write_label_map_png(labels: &LabelMap, path: &Path) -> Result<(), SegError> {
    let q = labels.num_classes;
    if q > 256 {
        return Err(SegError::TooManyLabelsForPng { q });
    }
    let io_err = |source: std::io::Error| SegError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut palette = Vec::with_capacity(q * 3);
    let mut sidecar = String::new();
    for id in 0..q {
        let [r, g, b] = palette_color(id);
        palette.extend_from_slice(&[r, g, b]);
        sidecar.push_str(&format!("{id} {r} {g} {b}\n"));
    }
    let mut enc = png::Encoder::new(
        BufWriter::new(file),
        labels.width as u32,
        labels.height as u32,
    );
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(palette);
    let mut writer = enc
        .write_header()
        .map_err(|e| SegError::Png(e.to_string()))?;
    let bytes: Vec<u8> = labels.labels.iter().map(|&l| l as u8).collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| SegError::Png(e.to_string()))?;
    drop(writer);
    let sidecar_path = path.with_extension("palette.txt");
    fs::write(sidecar_path, sidecar).map_err(io_err)?;
    Ok(())
}


#[cfg(test)]
mod trainer_tests {
    use super::*;
    use crate::pipeline::{Raster, SourceDepth};

    /// Three horizontal stripes of distinct gray levels plus noise.
    pub(crate) fn three_stripe_block(size: usize, sigma: f64, seed: u64) -> (Raster, Vec<usize>) {
        let mut rng = RngStream::new(seed);
        let levels = [0.2f64, 0.5, 0.8];
        let mut data = vec![0.0f32; size * size];
        let mut stripe_of = vec![0usize; size * size];
        for y in 0..size {
            let stripe = (y * 3) / size;
            for x in 0..size {
                let v = rng.normal(levels[stripe], sigma).clamp(0.0, 1.0);
                data[y * size + x] = v as f32;
                stripe_of[y * size + x] = stripe;
            }
        }
        (
            Raster::new(size, size, 1, data, SourceDepth::Float).unwrap(),
            stripe_of,
        )
    }

    /// Dominant-label fraction within each stripe.
    pub(crate) fn stripe_purities(labels: &LabelMap, stripe_of: &[usize]) -> Vec<f64> {
        let q = labels.num_classes();
        let mut counts = vec![vec![0usize; q]; 3];
        let mut totals = [0usize; 3];
        for (i, &l) in labels.labels().iter().enumerate() {
            counts[stripe_of[i]][l as usize] += 1;
            totals[stripe_of[i]] += 1;
        }
        (0..3)
            .map(|s| *counts[s].iter().max().unwrap() as f64 / totals[s] as f64)
            .collect()
    }

    #[test]
    fn three_stripes_separate_with_high_purity() {
        let (block, stripe_of) = three_stripe_block(64, 0.05, 2024);
        // min_labels 2 keeps refining while exactly 3 labels survive,
        // instead of stopping the moment the count reaches 3.
        let cfg = SegConfig {
            components: 2,
            filters: 16,
            labels: 16,
            continuity_weight: 5.0,
            lr: 0.1,
            momentum: 0.9,
            max_iters: 120,
            min_labels: 2,
        };
        let (_, labels) =
            train_segmentation::<f32>(&block, &cfg, &mut RngStream::new(7)).unwrap();
        let distinct = labels.distinct_count();
        assert!(distinct >= 3, "got {distinct} labels");
        let purities = stripe_purities(&labels, &stripe_of);
        for (s, p) in purities.iter().enumerate() {
            assert!(*p >= 0.95, "stripe {s} purity {p}");
        }
    }

    #[test]
    fn constant_block_collapses_to_one_label() {
        let block = Raster::new(16, 16, 1, vec![0.4; 256], SourceDepth::Float).unwrap();
        let cfg = SegConfig {
            components: 2,
            filters: 16,
            labels: 16,
            continuity_weight: 5.0,
            lr: 0.1,
            momentum: 0.9,
            max_iters: 200,
            min_labels: 1,
        };
        let (_, labels) =
            train_segmentation::<f32>(&block, &cfg, &mut RngStream::new(3)).unwrap();
        assert_eq!(labels.distinct_count(), 1);
    }
}
