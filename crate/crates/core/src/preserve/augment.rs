use serde::{Deserialize, Serialize};

use crate::imaging::Image;
use crate::nn::{Real, Tensor};

/// One element of the dihedral group of the square: optional horizontal
/// flip, then optional vertical flip, then optional 90° counter-clockwise
/// rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AugmentOp {
    pub rotate90: bool,
    pub hflip: bool,
    pub vflip: bool,
}

/// 2x3 pattern with no symmetry; the group acts faithfully on it.
const PROBE: (usize, usize) = (2, 3);

impl AugmentOp {
    pub const IDENTITY: AugmentOp = AugmentOp {
        rotate90: false,
        hflip: false,
        vflip: false,
    };

    pub const fn new(rotate90: bool, hflip: bool, vflip: bool) -> Self {
        AugmentOp { rotate90, hflip, vflip }
    }

    /// All eight ops, identity first.
    pub fn all() -> [AugmentOp; 8] {
        std::array::from_fn(|i| AugmentOp::new(i & 4 != 0, i & 1 != 0, i & 2 != 0))
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        if self.rotate90 {
            (w, h)
        } else {
            (h, w)
        }
    }

    /// For output pixel `(y, x)`, the flat index of the source pixel in an
    /// `h`x`w` plane.
    fn source(&self, h: usize, w: usize, y: usize, x: usize) -> usize {
        // Undo the rotation: out(i, j) = flipped(j, w - 1 - i).
        let (fy, fx) = if self.rotate90 { (x, w - 1 - y) } else { (y, x) };
        let sy = if self.vflip { h - 1 - fy } else { fy };
        let sx = if self.hflip { w - 1 - fx } else { fx };
        sy * w + sx
    }

    /// Transforms every `h`x`w` plane of a plane-major buffer.
    pub fn apply_planes<T: Copy>(&self, data: &[T], h: usize, w: usize) -> Vec<T> {
        let plane = h * w;
        let (oh, ow) = self.output_dims(h, w);
        let map: Vec<usize> = (0..oh).flat_map(|y| (0..ow).map(move |x| (y, x))).map(|(y, x)| self.source(h, w, y, x)).collect();
        let mut out = Vec::with_capacity(data.len());
        for src in data.chunks_exact(plane) {
            out.extend(map.iter().map(|&i| src[i]));
        }
        out
    }

    pub fn apply(&self, img: &Image) -> Image {
        let (c, h, w) = img.dims();
        let (oh, ow) = self.output_dims(h, w);
        Image::new(c, oh, ow, self.apply_planes(img.data(), h, w)).expect("permutation keeps the length")
    }

    pub fn apply_tensor<T: Real>(&self, t: &Tensor<T>) -> Tensor<T> {
        let (oh, ow) = self.output_dims(t.height, t.width);
        Tensor::from_vec(t.channels, oh, ow, self.apply_planes(&t.data, t.height, t.width))
            .expect("permutation keeps the length")
    }

    fn probe(&self) -> Vec<usize> {
        self.apply_planes(&(0..PROBE.0 * PROBE.1).collect::<Vec<_>>(), PROBE.0, PROBE.1)
    }

    /// The op equal to applying `self` and then `next`.
    pub fn then(&self, next: AugmentOp) -> AugmentOp {
        let (h, w) = self.output_dims(PROBE.0, PROBE.1);
        let target = next.apply_planes(&self.probe(), h, w);
        AugmentOp::all()
            .into_iter()
            .find(|op| op.probe() == target)
            .expect("the dihedral group is closed")
    }

    pub fn inverse(&self) -> AugmentOp {
        AugmentOp::all()
            .into_iter()
            .find(|op| self.then(*op) == AugmentOp::IDENTITY)
            .expect("every group element has an inverse")
    }
}

/// One transformed image and the op that maps it back.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub op: AugmentOp,
    pub inverse: AugmentOp,
    pub image: Image,
}

/// The eight dihedral transforms of `x`, identity first.
pub fn augment8(x: &Image) -> Vec<Augmented> {
    AugmentOp::all()
        .into_iter()
        .map(|op| Augmented {
            op,
            inverse: op.inverse(),
            image: op.apply(x),
        })
        .collect()
}
