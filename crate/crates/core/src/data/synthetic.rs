//! Toy "bright centre vs dark centre" frames for smoke tests and demos.

use std::path::{Path, PathBuf};

use super::label::Label;
use super::manifest::{DatasetManifest, Sample};
use super::pgm::{save_pgm, Image};
use crate::error::Result;
use crate::rng::SplitMix64;

/// Noisy mid-grey frame with a jittered disc that is bright for Alert and
/// dark for Drowsy.
pub fn synthetic_image(label: Label, size: usize, rng: &mut SplitMix64) -> Image {
    let s = size as f64;
    let radius = 0.22 * s;
    let cy = s / 2.0 + rng.uniform(-0.06, 0.06) * s;
    let cx = s / 2.0 + rng.uniform(-0.06, 0.06) * s;
    let centre = match label {
        Label::Alert => 0.85,
        Label::Drowsy => 0.15,
    };
    let pixels = (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f64 + 0.5, (i % size) as f64 + 0.5);
            let inside = (y - cy).powi(2) + (x - cx).powi(2) <= radius * radius;
            let base = if inside { centre } else { 0.5 };
            (base + rng.uniform(-0.12, 0.12)).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(size, size, pixels).expect("valid synthetic image")
}

/// Write `n` PGM frames (labels alternate Alert/Drowsy) and a `manifest.csv`
/// into `dir`, returning the manifest path.
pub fn write_synthetic_dataset(dir: &Path, n: usize, seed: u64, size: usize) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut rng = SplitMix64::new(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = Label::ALL[i % 2];
        let name = format!("{}_{i:04}.pgm", label.name().to_ascii_lowercase());
        save_pgm(&synthetic_image(label, size, &mut rng), &dir.join(&name))?;
        samples.push(Sample {
            image_path: PathBuf::from(name),
            label,
            split: None,
        });
    }
    let manifest_path = dir.join("manifest.csv");
    DatasetManifest::new(samples, dir).save(&manifest_path)?;
    Ok(manifest_path)
}
