//! Frame ingestion: PGM decoding, resizing, manifests, splits and batching.

mod batches;
mod label;
mod manifest;
mod pgm;
mod resize;
mod split;
pub mod synthetic;

pub use batches::{epoch_order, load_batch, load_input, make_batches, Batch, Batches, INPUT_SHAPE};
pub use label::Label;
pub use manifest::{load_manifest, parse_manifest, DatasetManifest, Sample, Split, Strictness};
pub use pgm::{load_pgm, parse_pgm, save_pgm, write_pgm, Image};
pub use resize::resize_bilinear;
pub use split::{split_dataset, SplitRatios};
