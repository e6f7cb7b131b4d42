//! Test-time adaptation: pseudo-pair construction, the second-order
//! reconstruction loss, the per-image loop, stream drivers and the
//! consistency-only baseline.

mod config;
mod image;
mod loss;
mod pairs;
mod report;
mod stream;

pub use config::{AdaptConfig, AdaptMode};
pub use image::{adapt_image, tta_c_baseline, Adapted};
pub use loss::{second_order_loss, LossValue, ReferenceFeatures};
pub use pairs::{construct_pairs, Pair, PairBatch};
pub use report::{CellMean, MetricsReport, MetricsRow, ERROR_PREFIX, METRICS_COLUMNS};
pub use stream::{run_stream, Method, StreamItem, StreamOutput};
