//! 2-D cross-correlation via im2col + GEMM, with the matching backward pass.

use super::real::gemm;
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Border handling for a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Pad by `k / 2` with replicated edge samples.
    Same,
    /// No padding; output shrinks by `k - 1`.
    Valid,
}

/// Static description of a convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvGeom {
    pub fn same(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel,
            stride: 1,
            padding: Padding::Same,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    fn pad(&self) -> usize {
        match self.padding {
            Padding::Same => self.kernel / 2,
            Padding::Valid => 0,
        }
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let pad = self.pad();
        if h + 2 * pad < self.kernel || w + 2 * pad < self.kernel {
            return Err(Error::Shape(format!(
                "{h}x{w} input is smaller than the {k}x{k} kernel",
                k = self.kernel
            )));
        }
        Ok((
            (h + 2 * pad - self.kernel) / self.stride + 1,
            (w + 2 * pad - self.kernel) / self.stride + 1,
        ))
    }

    fn validate(&self, input: (usize, usize, usize), weight: usize, bias: usize) -> Result<()> {
        if self.padding == Padding::Same && self.kernel % 2 == 0 {
            return Err(Error::Shape(format!(
                "same padding needs an odd kernel, got {}",
                self.kernel
            )));
        }
        if self.stride == 0 {
            return Err(Error::Shape("stride must be positive".into()));
        }
        if input.0 != self.in_ch {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_ch, input.0
            )));
        }
        if weight != self.weight_len() || bias != self.out_ch {
            return Err(Error::Shape(format!(
                "conv weight/bias lengths {weight}/{bias}, expected {}/{}",
                self.weight_len(),
                self.out_ch
            )));
        }
        Ok(())
    }
}

/// Intermediates kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input_shape: (usize, usize, usize),
    out_hw: (usize, usize),
    cols: Vec<T>,
}

/// Source index for output position `o` and kernel offset `k` along an axis,
/// with edge replication.
#[inline]
fn src_index(o: usize, k: usize, stride: usize, pad: usize, len: usize) -> usize {
    let i = (o * stride + k) as isize - pad as isize;
    i.clamp(0, len as isize - 1) as usize
}

fn im2col<T: Real>(geom: &ConvGeom, input: &Tensor<T>, oh: usize, ow: usize) -> Vec<T> {
    let (h, w) = (input.height, input.width);
    let (k, s, pad) = (geom.kernel, geom.stride, geom.pad());
    let p = oh * ow;
    let mut cols = vec![T::ZERO; geom.in_ch * k * k * p];
    let xs: Vec<Vec<usize>> = (0..k)
        .map(|kx| (0..ow).map(|ox| src_index(ox, kx, s, pad, w)).collect())
        .collect();
    for ci in 0..geom.in_ch {
        let plane = &input.data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for (kx, xmap) in xs.iter().enumerate() {
                let row = &mut cols[((ci * k + ky) * k + kx) * p..][..p];
                for oy in 0..oh {
                    let src = &plane[src_index(oy, ky, s, pad, h) * w..][..w];
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    for (d, &ix) in dst.iter_mut().zip(xmap) {
                        *d = src[ix];
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(geom: &ConvGeom, cols: &[T], shape: (usize, usize, usize), oh: usize, ow: usize) -> Tensor<T> {
    let (c, h, w) = shape;
    let (k, s, pad) = (geom.kernel, geom.stride, geom.pad());
    let p = oh * ow;
    let mut out = Tensor::zeros(c, h, w);
    let xs: Vec<Vec<usize>> = (0..k)
        .map(|kx| (0..ow).map(|ox| src_index(ox, kx, s, pad, w)).collect())
        .collect();
    for ci in 0..c {
        let plane = &mut out.data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for (kx, xmap) in xs.iter().enumerate() {
                let row = &cols[((ci * k + ky) * k + kx) * p..][..p];
                for oy in 0..oh {
                    let dst = &mut plane[src_index(oy, ky, s, pad, h) * w..][..w];
                    for (&g, &ix) in row[oy * ow..(oy + 1) * ow].iter().zip(xmap) {
                        dst[ix] += g;
                    }
                }
            }
        }
    }
    out
}

/// Cross-correlation plus bias. `weight` is laid out `(out, in, k, k)`.
pub fn conv2d<T: Real>(
    geom: &ConvGeom,
    input: &Tensor<T>,
    weight: &[T],
    bias: &[T],
) -> Result<(Tensor<T>, ConvCache<T>)> {
    geom.validate(input.shape(), weight.len(), bias.len())?;
    let (oh, ow) = geom.output_size(input.height, input.width)?;
    let cols = im2col(geom, input, oh, ow);
    let p = oh * ow;
    let kk = geom.in_ch * geom.kernel * geom.kernel;
    let mut out = Tensor::zeros(geom.out_ch, oh, ow);
    for (o, &b) in bias.iter().enumerate() {
        out.data[o * p..(o + 1) * p].fill(b);
    }
    gemm(geom.out_ch, kk, p, weight, false, &cols, false, &mut out.data, T::ONE);
    Ok((
        out,
        ConvCache {
            input_shape: input.shape(),
            out_hw: (oh, ow),
            cols,
        },
    ))
}

/// Gradients of a convolution given the upstream gradient of its output.
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Real>(
    geom: &ConvGeom,
    cache: &ConvCache<T>,
    weight: &[T],
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> Result<ConvGrads<T>> {
    let (oh, ow) = cache.out_hw;
    if grad_out.shape() != (geom.out_ch, oh, ow) {
        return Err(Error::Shape(format!(
            "conv upstream gradient {:?}, expected {:?}",
            grad_out.shape(),
            (geom.out_ch, oh, ow)
        )));
    }
    let p = oh * ow;
    let kk = geom.in_ch * geom.kernel * geom.kernel;
    let bias = (0..geom.out_ch)
        .map(|o| grad_out.data[o * p..(o + 1) * p].iter().copied().sum())
        .collect();
    let mut gw = vec![T::ZERO; geom.weight_len()];
    gemm(geom.out_ch, p, kk, &grad_out.data, false, &cache.cols, true, &mut gw, T::ZERO);
    let input = if need_input_grad {
        let mut gcols = vec![T::ZERO; kk * p];
        gemm(kk, geom.out_ch, p, weight, true, &grad_out.data, false, &mut gcols, T::ZERO);
        Some(col2im(geom, &gcols, cache.input_shape, oh, ow))
    } else {
        None
    };
    Ok(ConvGrads {
        input,
        weight: gw,
        bias,
    })
}

pub fn relu_inplace<T: Real>(t: &mut Tensor<T>) {
    for v in &mut t.data {
        if *v < T::ZERO {
            *v = T::ZERO;
        }
    }
}

/// Zeroes `grad` wherever the ReLU output was not positive.
pub fn relu_backward_inplace<T: Real>(grad: &mut Tensor<T>, activated: &Tensor<T>) {
    for (g, &a) in grad.data.iter_mut().zip(&activated.data) {
        if a <= T::ZERO {
            *g = T::ZERO;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution with the same replicate padding.
    fn naive(geom: &ConvGeom, x: &Tensor<f64>, wt: &[f64], b: &[f64]) -> Tensor<f64> {
        let (oh, ow) = geom.output_size(x.height, x.width).unwrap();
        let pad = geom.pad() as isize;
        let k = geom.kernel;
        let mut out = Tensor::zeros(geom.out_ch, oh, ow);
        for o in 0..geom.out_ch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[o];
                    for i in 0..geom.in_ch {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * geom.stride + ky) as isize - pad;
                                let ix = (ox * geom.stride + kx) as isize - pad;
                                let iy = iy.clamp(0, x.height as isize - 1) as usize;
                                let ix = ix.clamp(0, x.width as isize - 1) as usize;
                                acc += wt[((o * geom.in_ch + i) * k + ky) * k + kx]
                                    * x.data[(i * x.height + iy) * x.width + ix];
                            }
                        }
                    }
                    out.data[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    fn pseudo(n: usize, seed: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let geom = ConvGeom::same(1, 1, 1);
        let x = Tensor::from_vec(1, 3, 4, pseudo(12, 0.7)).unwrap();
        let (y, _) = conv2d(&geom, &x, &[1.0], &[0.0]).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn replicate_padding_preserves_constants() {
        let geom = ConvGeom::same(1, 1, 3);
        let x = Tensor::from_vec(1, 5, 5, vec![0.1f64; 25]).unwrap();
        let (y, _) = conv2d(&geom, &x, &[1.0; 9], &[0.0]).unwrap();
        assert!(y.data.iter().all(|&v| (v - 0.9).abs() < 1e-12));
    }

    #[test]
    fn matches_naive_loops() {
        for (stride, padding) in [(1, Padding::Same), (2, Padding::Same), (1, Padding::Valid)] {
            let geom = ConvGeom {
                in_ch: 2,
                out_ch: 3,
                kernel: 3,
                stride,
                padding,
            };
            let x = Tensor::from_vec(2, 5, 5, pseudo(50, 1.3)).unwrap();
            let w = pseudo(54, 0.41);
            let b = pseudo(3, 2.2);
            let (y, _) = conv2d(&geom, &x, &w, &b).unwrap();
            let want = naive(&geom, &x, &w, &b);
            assert_eq!(y.shape(), want.shape());
            for (a, b) in y.data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn single_weight_gradient_by_hand() {
        // f(w) = w x, L = (w x - y)^2 with x = 2, y = 0, w = 1: dL/dw = 8.
        let geom = ConvGeom::same(1, 1, 1);
        let x = Tensor::from_vec(1, 1, 1, vec![2.0f64]).unwrap();
        let (y, cache) = conv2d(&geom, &x, &[1.0], &[0.0]).unwrap();
        let upstream = Tensor::from_vec(1, 1, 1, vec![2.0 * (y.data[0] - 0.0)]).unwrap();
        let g = conv2d_backward(&geom, &cache, &[1.0], &upstream, true).unwrap();
        assert_eq!(g.weight, vec![8.0]);
        assert_eq!(g.input.unwrap().data, vec![4.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let geom = ConvGeom::same(2, 3, 3);
        let x = Tensor::from_vec(2, 4, 4, pseudo(32, 0.3)).unwrap();
        let w = pseudo(54, 0.8);
        let (_, cache) = conv2d(&geom, &x, &w, &[0.0; 3]).unwrap();
        let g = conv2d_backward(&geom, &cache, &w, &Tensor::zeros(3, 4, 4), true).unwrap();
        assert!(g.weight.iter().chain(&g.bias).all(|&v| v == 0.0));
        assert!(g.input.unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for stride in [1, 2] {
            let geom = ConvGeom::same(2, 2, 3).with_stride(stride);
            let x = Tensor::from_vec(2, 5, 4, pseudo(40, 0.9)).unwrap();
            let w = pseudo(36, 0.55);
            let b = pseudo(2, 1.1);
            // L = sum(out * r) for a fixed random r.
            let (y, cache) = conv2d(&geom, &x, &w, &b).unwrap();
            let r = Tensor::from_vec(y.channels, y.height, y.width, pseudo(y.len(), 0.23)).unwrap();
            let loss = |x: &Tensor<f64>, w: &[f64]| -> f64 {
                let (y, _) = conv2d(&geom, x, w, &b).unwrap();
                y.data.iter().zip(&r.data).map(|(a, b)| a * b).sum()
            };
            let g = conv2d_backward(&geom, &cache, &w, &r, true).unwrap();
            let h = 1e-5;
            for i in 0..w.len() {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[i] += h;
                wm[i] -= h;
                let fd = (loss(&x, &wp) - loss(&x, &wm)) / (2.0 * h);
                assert!((fd - g.weight[i]).abs() < 1e-7, "weight {i}: {fd} vs {}", g.weight[i]);
            }
            let gi = g.input.unwrap();
            for i in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp.data[i] += h;
                xm.data[i] -= h;
                let fd = (loss(&xp, &w) - loss(&xm, &w)) / (2.0 * h);
                assert!((fd - gi.data[i]).abs() < 1e-7, "input {i}: {fd} vs {}", gi.data[i]);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let geom = ConvGeom::same(3, 1, 3);
        let x = Tensor::<f32>::zeros(2, 4, 4);
        assert!(conv2d(&geom, &x, &[0.0; 27], &[0.0]).is_err());
    }
}
