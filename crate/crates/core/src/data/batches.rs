use super::manifest::{DatasetManifest, Split};
use super::pgm::load_pgm;
use super::resize::resize_bilinear;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Network input shape `[channels, height, width]`.
pub const INPUT_SHAPE: [usize; 3] = [1, 90, 90];

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `N × C × H × W`
    pub images: Tensor,
    /// Class indices (Alert → 0, Drowsy → 1).
    pub labels: Vec<usize>,
    /// Manifest positions of the samples.
    pub indices: Vec<usize>,
}

/// Load one image, resize it to `shape`'s spatial size and replicate the
/// grey channel across `shape[0]` channels.
pub fn load_input(manifest: &DatasetManifest, index: usize, shape: [usize; 3]) -> Result<Vec<f64>> {
    let path = manifest.resolve(&manifest.samples[index]);
    let img = load_pgm(&path)?;
    let img = resize_bilinear(&img, shape[1], shape[2]).map_err(|e| Error::ImageLoad {
        path: path.clone(),
        source: Box::new(e),
    })?;
    Ok(img.pixels().repeat(shape[0]))
}

/// Stack the given manifest samples into one batch.
pub fn load_batch(manifest: &DatasetManifest, indices: &[usize], shape: [usize; 3]) -> Result<Batch> {
    let per = shape.iter().product::<usize>();
    let mut data = Vec::with_capacity(indices.len() * per);
    for &i in indices {
        data.extend(load_input(manifest, i, shape)?);
    }
    let mut full_shape = vec![indices.len()];
    full_shape.extend_from_slice(&shape);
    Ok(Batch {
        images: Tensor::new(full_shape, data)?,
        labels: indices.iter().map(|&i| manifest.samples[i].label.index()).collect(),
        indices: indices.to_vec(),
    })
}

/// Sample order of `split` for one epoch; a pure function of `(seed, epoch)`.
pub fn epoch_order(manifest: &DatasetManifest, split: Split, seed: u64, epoch: u64) -> Result<Vec<usize>> {
    let mut order = manifest.indices(split);
    if order.is_empty() {
        return Err(Error::EmptySplit(split.as_str()));
    }
    SplitMix64::keyed(seed, epoch).shuffle(&mut order);
    Ok(order)
}

/// Lazily loaded mini-batches; the last batch may be short.
pub struct Batches<'a> {
    manifest: &'a DatasetManifest,
    order: Vec<usize>,
    batch_size: usize,
    shape: [usize; 3],
    pos: usize,
}

impl Batches<'_> {
    pub fn with_shape(mut self, shape: [usize; 3]) -> Self {
        self.shape = shape;
        self
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for Batches<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = load_batch(self.manifest, &self.order[self.pos..end], self.shape);
        self.pos = end;
        Some(batch)
    }
}

/// Shuffled mini-batches of `split` for `epoch`, reshuffled per `(seed, epoch)`.
pub fn make_batches(
    manifest: &DatasetManifest,
    split: Split,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be ≥ 1"));
    }
    Ok(Batches {
        manifest,
        order: epoch_order(manifest, split, seed, epoch)?,
        batch_size,
        shape: INPUT_SHAPE,
        pos: 0,
    })
}
