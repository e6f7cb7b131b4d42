//! Minimal differentiable substrate: tensors, convolutions with analytic
//! gradients, the micro-EDSR model, Adam and checkpoints.

mod checkpoint;
pub mod conv;
mod edsr;
mod loss;
mod params;
mod real;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_sr_model, save_sr_model, sr_model_from_bytes, sr_model_to_bytes,
    CheckpointEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::store_from_entries;
pub use conv::{conv2d, conv2d_backward, ConvGeom, Padding};
pub use edsr::{SrArch, SrModel, Stop, Trace};
pub use loss::{charbonnier, CHARBONNIER_EPS};
pub use params::{AdamConfig, Grads, Param, ParamStore};
pub use real::{gemm, Real};
pub use tensor::{pixel_shuffle, pixel_unshuffle, Tensor};
