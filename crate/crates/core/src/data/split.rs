//! Seeded train/validation/test assignment.

use super::label::Label;
use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.validation, self.test];
        if all.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::invalid(format!("split ratios must be positive, got {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split ratios must sum to 1, got {all:?}")));
        }
        Ok(())
    }

    /// `[floor(train·n), floor(validation·n), remainder]`.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        // the nudge keeps exact products such as 0.7·10 from flooring to 6
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let validation = floor(self.validation).min(n - train);
        [train, validation, n - train - validation]
    }
}

fn assign(manifest: &mut DatasetManifest, indices: &[usize], quota: [usize; 3]) {
    for (pos, &i) in indices.iter().enumerate() {
        let split = if pos < quota[0] {
            Split::Train
        } else if pos < quota[0] + quota[1] {
            Split::Validation
        } else {
            Split::Test
        };
        manifest.samples[i].split = Some(split);
    }
}

/// Share each split's size among the classes in proportion to class size.
/// Every class but the last is rounded by largest remainder (ties to the
/// earlier split); the last class takes what is left of each split, which
/// stays within one sample of its share for two classes.
fn class_quotas(class_sizes: &[usize], split_sizes: [usize; 3]) -> Vec<[usize; 3]> {
    let n: usize = class_sizes.iter().sum();
    let mut left = split_sizes;
    let mut quotas = Vec::with_capacity(class_sizes.len());
    for (c, &nc) in class_sizes.iter().enumerate() {
        if c + 1 == class_sizes.len() {
            quotas.push(left);
            break;
        }
        let mut q = split_sizes.map(|s| s * nc / n);
        let mut order = [0, 1, 2];
        order.sort_by_key(|&s| std::cmp::Reverse(split_sizes[s] * nc % n));
        let short = nc - q.iter().sum::<usize>();
        for &s in order.iter().take(short) {
            q[s] += 1;
        }
        for s in 0..3 {
            left[s] -= q[s];
        }
        quotas.push(q);
    }
    quotas
}

/// Seeded shuffle, then contiguous train/validation/test blocks of
/// `floor(train·n)`, `floor(validation·n)` and the remainder. Stratified mode
/// keeps those sizes and fills each split with every class in proportion
/// (within one sample), drawing each class from its own shuffled list.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
    stratified: bool,
) -> Result<DatasetManifest> {
    ratios.validate()?;
    let n = manifest.len();
    if n < Split::ALL.len() {
        return Err(Error::TooFewSamples {
            samples: n,
            splits: Split::ALL.len(),
        });
    }
    let mut out = manifest.clone();
    let mut rng = SplitMix64::new(seed);
    let sizes = ratios.sizes(n);
    if stratified {
        let groups: Vec<Vec<usize>> = Label::ALL
            .iter()
            .map(|&label| (0..n).filter(|&i| manifest.samples[i].label == label).collect())
            .collect();
        let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
        for (mut idx, quota) in groups.into_iter().zip(class_quotas(&counts, sizes)) {
            rng.shuffle(&mut idx);
            assign(&mut out, &idx, quota);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        assign(&mut out, &idx, sizes);
    }
    out.seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::Sample;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn manifest(alert: usize, drowsy: usize) -> DatasetManifest {
        let samples = (0..alert + drowsy)
            .map(|i| Sample {
                image_path: PathBuf::from(format!("{i}.pgm")),
                label: if i < alert { Label::Alert } else { Label::Drowsy },
                split: None,
            })
            .collect();
        DatasetManifest::new(samples, ".")
    }

    fn sizes(m: &DatasetManifest) -> [usize; 3] {
        Split::ALL.map(|s| m.indices(s).len())
    }

    #[test]
    fn full_scale_sizes() {
        assert_eq!(SplitRatios::default().sizes(32225), [22557, 4833, 4835]);
        let m = split_dataset(&manifest(25492, 6733), SplitRatios::default(), 1, false).unwrap();
        assert_eq!(sizes(&m), [22557, 4833, 4835]);
    }

    #[test]
    fn ten_samples() {
        assert_eq!(SplitRatios::default().sizes(10), [7, 1, 2]);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = manifest(30, 12);
        let a = split_dataset(&m, SplitRatios::default(), 9, true).unwrap();
        let b = split_dataset(&m, SplitRatios::default(), 9, true).unwrap();
        let c = split_dataset(&m, SplitRatios::default(), 10, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
        assert_eq!(a.seed, Some(9));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            split_dataset(&manifest(1, 1), SplitRatios::default(), 0, false),
            Err(Error::TooFewSamples { samples: 2, splits: 3 })
        ));
    }

    #[test]
    fn bad_ratios() {
        let r = SplitRatios { train: 0.8, validation: 0.15, test: 0.15 };
        assert!(split_dataset(&manifest(5, 5), r, 0, false).is_err());
    }

    #[test]
    fn stratified_keeps_class_ratio() {
        let m = split_dataset(&manifest(25492, 6733), SplitRatios::default(), 3, true).unwrap();
        assert_eq!(sizes(&m), [22557, 4833, 4835]);
        for split in Split::ALL {
            let size = m.indices(split).len() as f64;
            for (label, total) in [(Label::Alert, 25492.0), (Label::Drowsy, 6733.0)] {
                let want = size * total / 32225.0;
                let got = m.count(split, label) as f64;
                assert!((got - want).abs() <= 1.0, "{split} {label}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn every_sample_in_exactly_one_split(alert in 0usize..60, drowsy in 0usize..60, seed in any::<u64>(), strat in any::<bool>()) {
            prop_assume!(alert + drowsy >= 3);
            let m = split_dataset(&manifest(alert, drowsy), SplitRatios::default(), seed, strat).unwrap();
            prop_assert!(m.has_splits());
            prop_assert_eq!(sizes(&m).iter().sum::<usize>(), alert + drowsy);
            prop_assert_eq!(sizes(&m), SplitRatios::default().sizes(alert + drowsy));
            if strat {
                let n = (alert + drowsy) as f64;
                for (label, total) in [(Label::Alert, alert), (Label::Drowsy, drowsy)] {
                    for split in Split::ALL {
                        let share = m.indices(split).len() as f64 * total as f64 / n;
                        prop_assert!((m.count(split, label) as f64 - share).abs() < 1.0);
                    }
                }
            }
        }
    }
}
