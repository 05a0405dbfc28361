use super::arch::{build_model, Arch};
use crate::error::Result;
use crate::nn::{gradient_check, Coverage, GradCheckReport, Objective};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Coordinates sampled per tensor by [`check_arch`].
pub const GRADCHECK_SAMPLES_PER_TENSOR: usize = 64;

/// Finite-difference check of a freshly initialised registry network on a
/// seeded 2-sample uniform batch labelled `[Alert, Drowsy]`.
pub fn check_arch(arch: Arch, seed: u64, epsilon: f64, coverage: Coverage) -> Result<GradCheckReport> {
    let (spec, params) = build_model(arch, seed)?;
    let mut rng = SplitMix64::keyed(seed, 0x6C);
    let mut shape = vec![2];
    shape.extend_from_slice(spec.input_shape());
    let input = Tensor::from_fn(shape, |_| rng.next_f64());
    gradient_check(
        spec.net(),
        params.tensors(),
        &input,
        &Objective::CrossEntropy(vec![0, 1]),
        epsilon,
        coverage,
        seed,
    )
}

/// Seeded sampled coverage used for whole networks.
pub fn sampled_coverage(seed: u64) -> Coverage {
    Coverage::Sampled {
        per_tensor: GRADCHECK_SAMPLES_PER_TENSOR,
        seed,
    }
}
