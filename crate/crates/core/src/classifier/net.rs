use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::degrade::DegradationLabel;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::imaging::Image;
use crate::nn::conv::{relu_backward_inplace, relu_inplace, ConvCache};
use crate::nn::{
    conv2d, conv2d_backward, decode_checkpoint, encode_checkpoint, store_from_entries, ConvGeom, Grads, Param,
    ParamStore, Tensor,
};

pub const CLASSIFIER_CHANNELS: [usize; LAYERS] = [32, 48, 64, 64];
const LAYERS: usize = 4;
const STRIDES: [usize; LAYERS] = [1, 2, 2, 2];
/// Gains on the filtered input planes, which are otherwise a few 8-bit levels.
const HIGHPASS_GAIN: f32 = 8.0;
const BANDPASS_GAIN: f32 = 16.0;
const INPUT_PLANES: usize = 3;
/// Mean, log-mean and max pooling of each final channel.
const POOLED_PER_CHANNEL: usize = 3;
/// Keeps the log-mean pooling finite for dead channels.
const LOG_POOL_FLOOR: f32 = 1e-2;
pub const PATCH_SIZE: usize = 48;
pub const THRESHOLD: f64 = 0.5;

/// Label bit is set iff its probability is strictly above 0.5.
pub fn label_from_probabilities(p: [f64; 3]) -> DegradationLabel {
    DegradationLabel::new(p[0] > THRESHOLD, p[1] > THRESHOLD, p[2] > THRESHOLD)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Descriptor {
    kind: String,
    channels: [usize; LAYERS],
    strides: [usize; LAYERS],
    pooling: String,
    patch: usize,
}

impl Descriptor {
    fn current() -> Self {
        Descriptor {
            kind: "classifier".into(),
            channels: CLASSIFIER_CHANNELS,
            strides: STRIDES,
            pooling: "mean+logmean+max".into(),
            patch: PATCH_SIZE,
        }
    }
}

/// Anything that can label a test image's degradation types.
pub trait DegradationPredictor {
    fn predict_label(&self, x: &Image) -> Result<DegradationLabel>;
}

/// Always answers the same label; useful for oracle-label experiments.
#[derive(Debug, Clone, Copy)]
pub struct FixedLabel(pub DegradationLabel);

impl DegradationPredictor for FixedLabel {
    fn predict_label(&self, _x: &Image) -> Result<DegradationLabel> {
        Ok(self.0)
    }
}

pub(crate) struct ClsTrace {
    convs: Vec<ConvCache<f32>>,
    acts: Vec<Tensor<f32>>,
    /// Mean, log-mean and max pooled features, in that order.
    pooled: Vec<f32>,
    argmax: Vec<usize>,
    pub(crate) logits: [f64; 3],
}

/// Input is the centered image stacked with high-pass and band-pass
/// residuals, followed by four 3x3 convolutions with ReLU (the first at stride 1, the
/// rest at stride 2), global mean, log-mean and max pooling and a linear layer to three
/// logits (blur, noise, JPEG).
#[derive(Debug, Clone)]
pub struct Classifier {
    params: ParamStore<f32>,
}

fn geoms() -> [ConvGeom; LAYERS] {
    let c = CLASSIFIER_CHANNELS;
    std::array::from_fn(|i| {
        let input = if i == 0 { 3 * INPUT_PLANES } else { c[i - 1] };
        ConvGeom::same(input, c[i], 3).with_stride(STRIDES[i])
    })
}

fn box3(p: &[f32], h: usize, w: usize) -> Vec<f32> {
    let at = |y: isize, x: isize| p[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    acc += at(y as isize + dy, x as isize + dx);
                }
            }
            out[y * w + x] = acc / 9.0;
        }
    }
    out
}

/// Centered image, fine high-pass `x - box(x)` and band-pass
/// `box(x) - box(box(x))`, each per color channel.
fn input_planes(x: &Image) -> Tensor<f32> {
    let (c, h, w) = x.dims();
    let plane = h * w;
    let mut t = Tensor::zeros(INPUT_PLANES * c, h, w);
    for ch in 0..c {
        let p = x.plane(ch);
        let s1 = box3(p, h, w);
        let s2 = box3(&s1, h, w);
        for i in 0..plane {
            t.data[ch * plane + i] = p[i] - 0.5;
            t.data[(c + ch) * plane + i] = (p[i] - s1[i]) * HIGHPASS_GAIN;
            t.data[(2 * c + ch) * plane + i] = (s1[i] - s2[i]) * BANDPASS_GAIN;
        }
    }
    t
}

impl Classifier {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut add = |name: String, dims: Vec<usize>, bound: f64, rng: &mut ChaCha8Rng| {
            let n = dims.iter().product();
            let v = (0..n).map(|_| rng.random_range(-bound..=bound) as f32).collect();
            params.insert(name, Param::new(dims, v).expect("valid shape")).expect("unique");
        };
        for (i, g) in geoms().iter().enumerate() {
            let fan_in = (g.in_ch * 9) as f64;
            add(format!("conv{i}.weight"), vec![g.out_ch, g.in_ch, 3, 3], (6.0 / fan_in).sqrt(), &mut rng);
            add(format!("conv{i}.bias"), vec![g.out_ch], 0.0, &mut rng);
        }
        let c = POOLED_PER_CHANNEL * CLASSIFIER_CHANNELS[LAYERS - 1];
        add("fc.weight".into(), vec![3, c], (1.0 / c as f64).sqrt(), &mut rng);
        add("fc.bias".into(), vec![3], 0.0, &mut rng);
        Classifier { params }
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.params
    }

    fn value(&self, name: &str) -> &[f32] {
        &self.params.get(name).expect("known parameter").value
    }

    pub(crate) fn forward(&self, x: &Image) -> Result<ClsTrace> {
        if x.channels() != 3 {
            return Err(Error::Shape(format!("classifier expects RGB input, got {} channels", x.channels())));
        }
        let mut h = input_planes(x);
        let mut convs = Vec::with_capacity(LAYERS);
        let mut acts = Vec::with_capacity(LAYERS);
        for (i, g) in geoms().iter().enumerate() {
            let (mut out, cache) = conv2d(g, &h, self.value(&format!("conv{i}.weight")), self.value(&format!("conv{i}.bias")))?;
            relu_inplace(&mut out);
            convs.push(cache);
            acts.push(out.clone());
            h = out;
        }
        let plane = h.plane_len();
        let mut pooled = Vec::with_capacity(POOLED_PER_CHANNEL * h.channels);
        let mut argmax = Vec::with_capacity(h.channels);
        for c in 0..h.channels {
            let p = &h.data[c * plane..(c + 1) * plane];
            pooled.push(p.iter().sum::<f32>() / plane as f32);
        }
        for c in 0..h.channels {
            pooled.push((LOG_POOL_FLOOR + pooled[c]).ln());
        }
        for c in 0..h.channels {
            let p = &h.data[c * plane..(c + 1) * plane];
            // First maximum wins so the routing is deterministic.
            let (i, &m) = p.iter().enumerate().fold((0, &p[0]), |a, b| if b.1 > a.1 { b } else { a });
            pooled.push(m);
            argmax.push(i);
        }
        let (w, b) = (self.value("fc.weight"), self.value("fc.bias"));
        let c = pooled.len();
        let logits = std::array::from_fn(|k| {
            f64::from(b[k]) + (0..c).map(|j| f64::from(w[k * c + j]) * f64::from(pooled[j])).sum::<f64>()
        });
        Ok(ClsTrace {
            convs,
            acts,
            pooled,
            argmax,
            logits,
        })
    }

    pub(crate) fn backward(&self, trace: &ClsTrace, d_logits: [f64; 3]) -> Result<Grads<f32>> {
        let mut grads = Grads::zeros_like(&self.params);
        let c = trace.pooled.len();
        let w = self.value("fc.weight");
        {
            let gw = grads.get_mut("fc.weight").expect("slot");
            for k in 0..3 {
                for j in 0..c {
                    gw[k * c + j] += (d_logits[k] * f64::from(trace.pooled[j])) as f32;
                }
            }
            let gb = grads.get_mut("fc.bias").expect("slot");
            for k in 0..3 {
                gb[k] += d_logits[k] as f32;
            }
        }
        let last = trace.acts.last().expect("four layers");
        let plane = last.plane_len();
        let mut g = Tensor::zeros(last.channels, last.height, last.width);
        let d_pool = |j: usize| -> f64 { (0..3).map(|k| d_logits[k] * f64::from(w[k * c + j])).sum() };
        let n = last.channels;
        for ch in 0..n {
            let d_log = d_pool(n + ch) / (LOG_POOL_FLOOR as f64 + f64::from(trace.pooled[ch]));
            g.data[ch * plane..(ch + 1) * plane].fill(((d_pool(ch) + d_log) / plane as f64) as f32);
            g.data[ch * plane + trace.argmax[ch]] += d_pool(2 * n + ch) as f32;
        }
        let gs = geoms();
        for i in (0..LAYERS).rev() {
            relu_backward_inplace(&mut g, &trace.acts[i]);
            let cg = conv2d_backward(&gs[i], &trace.convs[i], self.value(&format!("conv{i}.weight")), &g, i > 0)?;
            for (name, part) in [(format!("conv{i}.weight"), &cg.weight), (format!("conv{i}.bias"), &cg.bias)] {
                let slot = grads.get_mut(&name).expect("slot");
                slot.iter_mut().zip(part.iter()).for_each(|(a, &b)| *a += b);
            }
            if let Some(gi) = cg.input {
                g = gi;
            }
        }
        Ok(grads)
    }

    /// Sigmoid probabilities for (blur, noise, JPEG).
    pub fn probabilities(&self, x: &Image) -> Result<[f64; 3]> {
        if x.height() < PATCH_SIZE || x.width() < PATCH_SIZE {
            return Err(Error::TooSmall(format!(
                "classifier needs at least {PATCH_SIZE}x{PATCH_SIZE}, got {}x{}",
                x.height(),
                x.width()
            )));
        }
        Ok(self.forward(x)?.logits.map(sigmoid))
    }

    /// Whole-image prediction thresholded at 0.5.
    pub fn predict(&self, x: &Image) -> Result<DegradationLabel> {
        Ok(label_from_probabilities(self.probabilities(x)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_checkpoint(&serde_json::to_value(Descriptor::current())?, &self.params)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (descriptor, entries) = decode_checkpoint(bytes)?;
        let d: Descriptor = serde_json::from_value(descriptor)
            .map_err(|e| Error::Checkpoint(format!("not a classifier descriptor: {e}")))?;
        if d != Descriptor::current() {
            return Err(Error::Checkpoint(format!(
                "classifier descriptor {d:?} does not match this build's {:?}",
                Descriptor::current()
            )));
        }
        let params = store_from_entries(entries, Classifier::new(0).params())?;
        Ok(Classifier { params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl DegradationPredictor for Classifier {
    fn predict_label(&self, x: &Image) -> Result<DegradationLabel> {
        self.predict(x)
    }
}
