//! Micro EDSR-baseline super-resolution network.
//!
//! Topology: head conv, `blocks` residual blocks (conv, ReLU, conv, identity
//! skip), tail conv with a global skip back to the head output, one
//! conv + x2 pixel-shuffle stage per factor of two, and a final output conv
//! to RGB. The bicubic upsampling of the input is added to the output so the
//! network learns a residual.
//!
//! The feature tap is the output of the last upsampler stage, i.e. the
//! convolution immediately preceding the output convolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv2d, conv2d_backward, relu_backward_inplace, relu_inplace, ConvCache, ConvGeom};
use super::tensor::{pixel_shuffle, pixel_unshuffle};
use super::{Grads, Param, ParamStore, Real, Tensor};
use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, Image, Scale};

/// Architecture descriptor stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrArch {
    pub blocks: usize,
    pub channels: usize,
    pub scale: usize,
    pub tap_index: usize,
}

impl SrArch {
    pub fn new(blocks: usize, channels: usize, scale: usize) -> Result<Self> {
        if scale != 2 && scale != 4 {
            return Err(Error::InvalidArgument(format!("upscale factor {scale} is not 2 or 4")));
        }
        if channels == 0 {
            return Err(Error::InvalidArgument("zero feature channels".into()));
        }
        let stages = scale.trailing_zeros() as usize;
        Ok(Self {
            blocks,
            channels,
            scale,
            // head, 2 per block, tail, one per stage, then the output conv.
            tap_index: 2 * blocks + 1 + stages,
        })
    }

    pub fn upsample_stages(&self) -> usize {
        self.scale.trailing_zeros() as usize
    }

    pub fn conv_count(&self) -> usize {
        self.tap_index + 2
    }

    pub fn validate(&self) -> Result<()> {
        let want = Self::new(self.blocks, self.channels, self.scale)?;
        if want != *self {
            return Err(Error::Checkpoint(format!(
                "tap_index {} inconsistent with architecture (expected {})",
                self.tap_index, want.tap_index
            )));
        }
        Ok(())
    }

    /// `(name, geometry)` of every convolution in forward order.
    fn convs(&self) -> Vec<(String, ConvGeom)> {
        let c = self.channels;
        let mut v = vec![("head".to_string(), ConvGeom::same(3, c, 3))];
        for b in 0..self.blocks {
            v.push((format!("body.{b}.conv1"), ConvGeom::same(c, c, 3)));
            v.push((format!("body.{b}.conv2"), ConvGeom::same(c, c, 3)));
        }
        v.push(("tail".to_string(), ConvGeom::same(c, c, 3)));
        for s in 0..self.upsample_stages() {
            v.push((format!("up.{s}"), ConvGeom::same(c, 4 * c, 3)));
        }
        v.push(("out".to_string(), ConvGeom::same(c, 3, 3)));
        v
    }
}

impl Default for SrArch {
    fn default() -> Self {
        Self::new(4, 32, 2).expect("default architecture")
    }
}

/// How far a forward pass runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Stop at the feature tap; the output convolution is skipped.
    Tap,
    /// Run to the full-resolution output.
    Output,
}

struct BlockCache<T> {
    conv1: ConvCache<T>,
    act: Tensor<T>,
    conv2: ConvCache<T>,
}

/// Intermediates of one forward pass, consumed by [`SrModel::backward`].
pub struct Trace<T> {
    stamp: (u64, u64),
    head: ConvCache<T>,
    blocks: Vec<BlockCache<T>>,
    tail: ConvCache<T>,
    ups: Vec<ConvCache<T>>,
    out: Option<ConvCache<T>>,
    /// Feature tap `f^l(x)`.
    pub tap: Tensor<T>,
    /// Unclamped network output including the bicubic skip.
    pub output: Option<Tensor<T>>,
}

/// The adaptable super-resolution model.
#[derive(Debug)]
pub struct SrModel<T> {
    arch: SrArch,
    params: ParamStore<T>,
}

fn weight_name(conv: &str) -> String {
    format!("{conv}.weight")
}

fn bias_name(conv: &str) -> String {
    format!("{conv}.bias")
}

impl<T: Real> Clone for SrModel<T> {
    fn clone(&self) -> Self {
        Self {
            arch: self.arch,
            params: self.params.clone(),
        }
    }
}

impl<T: Real> SrModel<T> {
    /// Randomly initialized model (He-uniform weights, zero biases).
    ///
    /// The second conv of each residual branch and the output conv start at
    /// a tenth of that scale so the untrained model is close to bicubic.
    pub fn new(arch: SrArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, g) in arch.convs() {
            let fan_in = (g.in_ch * g.kernel * g.kernel) as f64;
            let mut bound = (6.0 / fan_in).sqrt();
            if name.ends_with("conv2") || name == "out" {
                bound *= 0.1;
            }
            let w: Vec<T> = (0..g.weight_len())
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect();
            params.insert(
                weight_name(&name),
                Param::new(vec![g.out_ch, g.in_ch, g.kernel, g.kernel], w)?,
            )?;
            params.insert(bias_name(&name), Param::new(vec![g.out_ch], vec![T::ZERO; g.out_ch])?)?;
        }
        Ok(Self { arch, params })
    }

    /// Wraps an existing parameter store after checking names and shapes.
    pub fn from_params(arch: SrArch, params: ParamStore<T>) -> Result<Self> {
        arch.validate()?;
        let reference = Self::new(arch, 0)?;
        reference.params.check_aligned(&params).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> SrArch {
        self.arch
    }

    pub fn scale(&self) -> usize {
        self.arch.scale
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Only residual-block parameters may change at test time.
    pub fn is_adaptable(name: &str) -> bool {
        name.starts_with("body.")
    }

    pub fn adaptable_names(&self) -> Vec<String> {
        self.params.names().filter(|n| Self::is_adaptable(n)).map(str::to_string).collect()
    }

    pub fn adaptable_scalar_count(&self) -> usize {
        self.params
            .iter()
            .filter(|(n, _)| Self::is_adaptable(n))
            .map(|(_, p)| p.len())
            .sum()
    }

    /// Marks every non-adaptable scalar frozen, leaving residual-block masks as they are.
    pub fn freeze_non_adaptable(&mut self) {
        let names: Vec<String> = self.params.names().filter(|n| !Self::is_adaptable(n)).map(str::to_string).collect();
        for n in names {
            let len = self.params.get(&n).map(Param::len).unwrap_or(0);
            self.params.set_frozen(&n, vec![true; len]).expect("known parameter");
        }
    }

    fn conv(&self, name: &str, g: &ConvGeom, x: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
        conv2d(g, x, self.params.value(&weight_name(name)), self.params.value(&bias_name(name)))
    }

    /// Forward pass on an image, recording everything needed for backward.
    pub fn forward(&self, x: &Image, stop: Stop) -> Result<Trace<T>> {
        if x.channels() != 3 {
            return Err(Error::Shape(format!("SR model expects RGB input, got {} channels", x.channels())));
        }
        let convs = self.arch.convs();
        let mut it = convs.iter();
        let input = Tensor::from_image(x);

        let (name, g) = it.next().expect("head");
        let (h0, head) = self.conv(name, g, &input)?;
        let mut feat = h0.clone();
        let mut blocks = Vec::with_capacity(self.arch.blocks);
        for _ in 0..self.arch.blocks {
            let (n1, g1) = it.next().expect("conv1");
            let (n2, g2) = it.next().expect("conv2");
            let (mut act, conv1) = self.conv(n1, g1, &feat)?;
            relu_inplace(&mut act);
            let (res, conv2) = self.conv(n2, g2, &act)?;
            feat.add_assign(&res);
            blocks.push(BlockCache { conv1, act, conv2 });
        }
        let (name, g) = it.next().expect("tail");
        let (mut t, tail) = self.conv(name, g, &feat)?;
        t.add_assign(&h0);
        drop(feat);

        let mut ups = Vec::new();
        for _ in 0..self.arch.upsample_stages() {
            let (name, g) = it.next().expect("up");
            let (u, cache) = self.conv(name, g, &t)?;
            t = pixel_shuffle(&u, 2)?;
            ups.push(cache);
        }
        let tap = t;

        let (out, output) = match stop {
            Stop::Tap => (None, None),
            Stop::Output => {
                let (name, g) = it.next().expect("out");
                let (mut y, cache) = self.conv(name, g, &tap)?;
                let skip = bicubic_resize(x, Scale::up(self.arch.scale as u32))?;
                for (v, &s) in y.data.iter_mut().zip(skip.data()) {
                    *v += T::from_f32(s);
                }
                (Some(cache), Some(y))
            }
        };
        Ok(Trace {
            stamp: self.params.stamp(),
            head,
            blocks,
            tail,
            ups,
            out,
            tap,
            output,
        })
    }

    /// Backpropagates upstream gradients on the tap and/or the output.
    ///
    /// Gradients are produced for every parameter, frozen or not; the
    /// optimizer is responsible for skipping frozen scalars.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_tap: Option<&Tensor<T>>,
        grad_out: Option<&Tensor<T>>,
    ) -> Result<Grads<T>> {
        if trace.stamp != self.params.stamp() {
            return Err(Error::StaleTrace(
                "parameters changed (or belong to another model) since the forward pass".into(),
            ));
        }
        let convs = self.arch.convs();
        let geom = |i: usize| &convs[i].1;
        let mut grads = Grads::zeros_like(&self.params);
        let record = |grads: &mut Grads<T>, name: &str, w: &[T], b: &[T]| {
            grads.accumulate(&weight_name(name), w);
            grads.accumulate(&bias_name(name), b);
        };

        let mut g_tap = match grad_tap {
            Some(g) => {
                if g.shape() != trace.tap.shape() {
                    return Err(Error::Shape(format!(
                        "tap gradient {:?} vs tap {:?}",
                        g.shape(),
                        trace.tap.shape()
                    )));
                }
                g.clone()
            }
            None => Tensor::zeros(trace.tap.channels, trace.tap.height, trace.tap.width),
        };
        let last = convs.len() - 1;
        if let Some(g_out) = grad_out {
            let cache = trace
                .out
                .as_ref()
                .ok_or_else(|| Error::StaleTrace("output gradient for a tap-only forward".into()))?;
            let name = &convs[last].0;
            let cg = conv2d_backward(geom(last), cache, self.params.value(&weight_name(name)), g_out, true)?;
            record(&mut grads, name, &cg.weight, &cg.bias);
            g_tap.add_assign(&cg.input.expect("input gradient"));
        }

        let mut g = g_tap;
        let first_up = last - self.arch.upsample_stages();
        for (s, cache) in trace.ups.iter().enumerate().rev() {
            let idx = first_up + s;
            let name = &convs[idx].0;
            let gu = pixel_unshuffle(&g, 2)?;
            let cg = conv2d_backward(geom(idx), cache, self.params.value(&weight_name(name)), &gu, true)?;
            record(&mut grads, name, &cg.weight, &cg.bias);
            g = cg.input.expect("input gradient");
        }

        // t = tail(body(h0)) + h0
        let tail_idx = first_up - 1;
        let name = &convs[tail_idx].0;
        let cg = conv2d_backward(geom(tail_idx), &trace.tail, self.params.value(&weight_name(name)), &g, true)?;
        record(&mut grads, name, &cg.weight, &cg.bias);
        let g_h0_skip = g;
        let mut g = cg.input.expect("input gradient");

        for (b, cache) in trace.blocks.iter().enumerate().rev() {
            let (i1, i2) = (1 + 2 * b, 2 + 2 * b);
            let (n1, n2) = (&convs[i1].0, &convs[i2].0);
            let c2 = conv2d_backward(geom(i2), &cache.conv2, self.params.value(&weight_name(n2)), &g, true)?;
            record(&mut grads, n2, &c2.weight, &c2.bias);
            let mut g_act = c2.input.expect("input gradient");
            relu_backward_inplace(&mut g_act, &cache.act);
            let c1 = conv2d_backward(geom(i1), &cache.conv1, self.params.value(&weight_name(n1)), &g_act, true)?;
            record(&mut grads, n1, &c1.weight, &c1.bias);
            g.add_assign(&c1.input.expect("input gradient"));
        }
        g.add_assign(&g_h0_skip);

        let name = &convs[0].0;
        let cg = conv2d_backward(geom(0), &trace.head, self.params.value(&weight_name(name)), &g, false)?;
        record(&mut grads, name, &cg.weight, &cg.bias);
        Ok(grads)
    }

    /// Feature tap only.
    pub fn tap(&self, x: &Image) -> Result<Tensor<T>> {
        Ok(self.forward(x, Stop::Tap)?.tap)
    }

    /// Unclamped output.
    pub fn predict_raw(&self, x: &Image) -> Result<Tensor<T>> {
        Ok(self.forward(x, Stop::Output)?.output.expect("full forward"))
    }

    /// Clamped prediction together with the (unclamped) feature tap.
    pub fn predict(&self, x: &Image) -> Result<(Image, Tensor<T>)> {
        let trace = self.forward(x, Stop::Output)?;
        let pred = trace.output.as_ref().expect("full forward").to_image()?;
        Ok((pred, trace.tap))
    }

    /// Same architecture and values in another scalar type.
    pub fn cast<U: Real>(&self) -> SrModel<U> {
        let mut params = ParamStore::new();
        for (name, p) in self.params.iter() {
            let mut q = Param::new(p.dims.clone(), p.value.iter().map(|v| U::from_f64(v.to_f64())).collect())
                .expect("same shape");
            q.frozen = p.frozen.clone();
            params.insert(name, q).expect("unique names");
        }
        SrModel { arch: self.arch, params }
    }
}
