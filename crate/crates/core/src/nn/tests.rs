use super::*;
use crate::error::Error;
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

fn random(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

/// Direct 6-deep loop convolution, independent of im2col.
fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: Padding) -> Tensor {
    let [n, c, h, wd] = x.dims4().unwrap();
    let [o, _, k, _] = w.dims4().unwrap();
    let oh = (h + pad.total() - k) / stride + 1;
    let ow = (wd + pad.total() - k) / stride + 1;
    let mut out = Tensor::zeros(vec![n, o, oh, ow]);
    for s in 0..n {
        for f in 0..o {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = b.data()[f];
                    for ch in 0..c {
                        for i in 0..k {
                            for j in 0..k {
                                let iy = (y * stride + i) as isize - pad.before as isize;
                                let ix = (xx * stride + j) as isize - pad.before as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += w.data()[((f * c + ch) * k + i) * k + j]
                                    * x.data()[((s * c + ch) * h + iy as usize) * wd + ix as usize];
                            }
                        }
                    }
                    out.data_mut()[((s * o + f) * oh + y) * ow + xx] = acc;
                }
            }
        }
    }
    out
}

/// Central differences of `f` around `x`, one coordinate at a time.
fn numeric_grad(x: &Tensor, eps: f64, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + eps;
            let plus = f(&probe);
            probe.data_mut()[i] = orig - eps;
            let minus = f(&probe);
            probe.data_mut()[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn assert_grad_close(analytic: &[f64], numeric: &[f64], tol: f64, what: &str) {
    assert_eq!(analytic.len(), numeric.len());
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let rel = gradcheck::relative_error(*a, *n);
        assert!(rel < tol, "{what}[{i}]: analytic {a} numeric {n} rel {rel}");
    }
}

// ---- conv2d ---------------------------------------------------------------

#[test]
fn conv_identity_kernel() {
    let x = random(vec![1, 1, 3, 3], 1);
    let p = ConvParams::new(Tensor::full(vec![1, 1, 1, 1], 1.0), Tensor::zeros(vec![1]), 1, Padding::default()).unwrap();
    let (y, _) = conv2d_forward(&x, &p).unwrap();
    assert_eq!(y, x);
}

#[test]
fn conv_zero_weights_give_bias() {
    let x = random(vec![2, 3, 5, 5], 2);
    let p = ConvParams::new(Tensor::zeros(vec![2, 3, 3, 3]), Tensor::new(vec![2], vec![0.25, -1.5]).unwrap(), 1, Padding::same(3)).unwrap();
    let (y, _) = conv2d_forward(&x, &p).unwrap();
    for (i, v) in y.data().iter().enumerate() {
        let f = (i / 25) % 2;
        assert_eq!(*v, [0.25, -1.5][f]);
    }
}

#[test]
fn conv_matches_nested_loop_oracle() {
    let x = random(vec![1, 2, 6, 6], 3);
    let w = random(vec![4, 2, 3, 3], 4);
    let b = random(vec![4], 5);
    let pad = Padding::symmetric(1);
    let (y, _) = conv2d_forward(&x, &ConvParams::new(w.clone(), b.clone(), 1, pad).unwrap()).unwrap();
    assert!(y.max_abs_diff(&conv_oracle(&x, &w, &b, 1, pad)) < 1e-10);
}

#[test]
fn conv_equals_matmul_of_im2col_exactly() {
    let x = random(vec![1, 3, 7, 6], 6);
    let w = random(vec![5, 3, 3, 3], 7);
    let b = random(vec![5], 8);
    let pad = Padding::symmetric(1);
    let (y, _) = conv2d_forward(&x, &ConvParams::new(w.clone(), b.clone(), 2, pad).unwrap()).unwrap();
    let cols = im2col(&x.clone().reshape(vec![3, 7, 6]).unwrap(), 3, 2, pad).unwrap();
    let prod = matmul(&w.clone().reshape(vec![5, 27]).unwrap(), &cols).unwrap();
    let positions = cols.shape()[1];
    for (i, v) in y.data().iter().enumerate() {
        assert_eq!(*v, prod.data()[i] + b.data()[i / positions]);
    }
}

#[test]
fn conv_channel_mismatch() {
    let p = ConvParams::new(Tensor::zeros(vec![1, 2, 3, 3]), Tensor::zeros(vec![1]), 1, Padding::same(3)).unwrap();
    assert!(matches!(conv2d_forward(&Tensor::zeros(vec![1, 3, 4, 4]), &p), Err(Error::Dimension(_))));
}

#[test]
fn conv_rejects_non_finite_weights() {
    let mut w = Tensor::zeros(vec![1, 1, 3, 3]);
    w.data_mut()[4] = f64::NAN;
    let p = ConvParams::new(w, Tensor::zeros(vec![1]), 1, Padding::same(3)).unwrap();
    assert!(matches!(conv2d_forward(&Tensor::zeros(vec![1, 1, 4, 4]), &p), Err(Error::NonFinite(_))));
}

#[test]
fn conv_backward_matches_finite_differences() {
    let x = random(vec![2, 2, 5, 4], 10);
    let w = random(vec![3, 2, 4, 4], 11);
    let b = random(vec![3], 12);
    let pad = Padding::same(4);
    let p = ConvParams::new(w.clone(), b.clone(), 1, pad).unwrap();
    let (y, cache) = conv2d_forward(&x, &p).unwrap();
    let up = random(y.shape().to_vec(), 13);
    let g = layer_backward(LayerKind::Conv2d, &cache, &up).unwrap();
    let f_x = |t: &Tensor| dot(&conv2d_forward(t, &p).unwrap().0, &up);
    assert_grad_close(g.input.data(), &numeric_grad(&x, 1e-6, f_x), 1e-5, "dx");
    let f_w = |t: &Tensor| dot(&conv2d_forward(&x, &ConvParams::new(t.clone(), b.clone(), 1, pad).unwrap()).unwrap().0, &up);
    assert_grad_close(g.params[0].data(), &numeric_grad(&w, 1e-6, f_w), 1e-5, "dw");
    let f_b = |t: &Tensor| dot(&conv2d_forward(&x, &ConvParams::new(w.clone(), t.clone(), 1, pad).unwrap()).unwrap().0, &up);
    assert_grad_close(g.params[1].data(), &numeric_grad(&b, 1e-6, f_b), 1e-5, "db");
}

#[test]
fn conv_strided_backward_matches_finite_differences() {
    let x = random(vec![1, 2, 7, 7], 14);
    let w = random(vec![2, 2, 3, 3], 15);
    let p = ConvParams::new(w, Tensor::zeros(vec![2]), 2, Padding::symmetric(1)).unwrap();
    let (y, cache) = conv2d_forward(&x, &p).unwrap();
    let up = random(y.shape().to_vec(), 16);
    let g = layer_backward(LayerKind::Conv2d, &cache, &up).unwrap();
    let f = |t: &Tensor| dot(&conv2d_forward(t, &p).unwrap().0, &up);
    assert_grad_close(g.input.data(), &numeric_grad(&x, 1e-6, f), 1e-5, "dx");
}

// ---- relu -----------------------------------------------------------------

#[test]
fn relu_forward_values() {
    let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
    assert_eq!(relu_forward(&x).0.data(), &[0.0, 0.0, 2.0]);
    let neg = Tensor::full(vec![2, 3], -0.5);
    assert!(relu_forward(&neg).0.data().iter().all(|&v| v == 0.0));
    let pos = random(vec![4], 1).map(|v| v.abs() + 0.1);
    assert_eq!(relu_forward(&pos).0, pos);
}

#[test]
fn relu_backward_masks() {
    let x = Tensor::new(vec![2], vec![-1.0, 2.0]).unwrap();
    let (_, cache) = relu_forward(&x);
    let g = layer_backward(LayerKind::Relu, &cache, &Tensor::new(vec![2], vec![5.0, 5.0]).unwrap()).unwrap();
    assert_eq!(g.input.data(), &[0.0, 5.0]);
}

#[test]
fn relu_backward_matches_finite_differences() {
    // keep inputs away from the kink
    let x = random(vec![2, 3, 4], 21).map(|v| if v.abs() < 0.05 { 0.3 } else { v });
    let (y, cache) = relu_forward(&x);
    let up = random(y.shape().to_vec(), 22);
    let g = layer_backward(LayerKind::Relu, &cache, &up).unwrap();
    let num = numeric_grad(&x, 1e-6, |t| dot(&relu_forward(t).0, &up));
    assert_grad_close(g.input.data(), &num, 1e-8, "relu");
}

// ---- maxpool --------------------------------------------------------------

#[test]
fn maxpool_two_by_two() {
    let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let (y, cache) = maxpool_forward(&x, 2, 2).unwrap();
    assert_eq!(y.data(), &[4.0]);
    let g = layer_backward(LayerKind::MaxPool2d, &cache, &Tensor::full(vec![1, 1, 1, 1], 7.0)).unwrap();
    assert_eq!(g.input.data(), &[0.0, 0.0, 0.0, 7.0]);
}

#[test]
fn maxpool_constant_input() {
    let x = Tensor::full(vec![2, 3, 7, 9], 0.4);
    let (y, _) = maxpool_forward(&x, 3, 2).unwrap();
    assert_eq!(y.shape(), &[2, 3, 3, 4]);
    assert!(y.data().iter().all(|&v| v == 0.4));
}

#[test]
fn maxpool_matches_window_scan() {
    let x = random(vec![1, 1, 5, 5], 31);
    let (y, _) = maxpool_forward(&x, 3, 2).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    for oy in 0..2 {
        for ox in 0..2 {
            let mut best = f64::NEG_INFINITY;
            for i in 0..3 {
                for j in 0..3 {
                    best = best.max(x.data()[(oy * 2 + i) * 5 + ox * 2 + j]);
                }
            }
            assert_eq!(y.data()[oy * 2 + ox], best);
        }
    }
}

#[test]
fn maxpool_ties_pick_smallest_index() {
    let x = Tensor::full(vec![1, 1, 3, 3], 1.0);
    let (_, cache) = maxpool_forward(&x, 2, 1).unwrap();
    let LayerCache::MaxPool2d { argmax, .. } = cache else { panic!() };
    assert_eq!(argmax, vec![0, 1, 3, 4]);
}

#[test]
fn maxpool_window_too_large() {
    assert!(matches!(maxpool_forward(&Tensor::zeros(vec![1, 1, 2, 5]), 3, 2), Err(Error::Dimension(_))));
}

#[test]
fn maxpool_backward_conserves_mass() {
    let x = random(vec![2, 2, 9, 9], 32);
    let (y, cache) = maxpool_forward(&x, 3, 2).unwrap();
    // integer upstream keeps the sums exact
    let mut rng = SplitMix64::new(33);
    let up = Tensor::from_fn(y.shape().to_vec(), |_| rng.below(11) as f64 - 5.0);
    let g = layer_backward(LayerKind::MaxPool2d, &cache, &up).unwrap();
    assert_eq!(g.input.sum(), up.sum());
    let LayerCache::MaxPool2d { argmax, .. } = &cache else { panic!() };
    assert!(argmax.iter().all(|&i| i < x.len()));
}

#[test]
fn maxpool_backward_matches_finite_differences() {
    let x = random(vec![1, 2, 7, 7], 34);
    let (y, cache) = maxpool_forward(&x, 3, 2).unwrap();
    let up = random(y.shape().to_vec(), 35);
    let g = layer_backward(LayerKind::MaxPool2d, &cache, &up).unwrap();
    let num = numeric_grad(&x, 1e-6, |t| dot(&maxpool_forward_frozen(t, &cache).unwrap(), &up));
    assert_grad_close(g.input.data(), &num, 1e-8, "maxpool");
    // random inputs have no near-ties, so the live forward agrees too
    let live = numeric_grad(&x, 1e-7, |t| dot(&maxpool_forward(t, 3, 2).unwrap().0, &up));
    assert_grad_close(g.input.data(), &live, 1e-6, "maxpool live");
}

// ---- dense ----------------------------------------------------------------

#[test]
fn dense_identity_and_bias() {
    let x = random(vec![3, 4], 41);
    let eye = Tensor::from_fn(vec![4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
    assert_eq!(dense_forward(&x, &eye, &Tensor::zeros(vec![4])).unwrap().0, x);
    let b = random(vec![2], 42);
    let (y, _) = dense_forward(&Tensor::zeros(vec![3, 5]), &random(vec![5, 2], 43), &b).unwrap();
    for row in y.data().chunks(2) {
        assert_eq!(row, b.data());
    }
}

#[test]
fn dense_matches_matmul() {
    let x = random(vec![3, 4], 44);
    let w = random(vec![4, 2], 45);
    let b = random(vec![2], 46);
    let (y, _) = dense_forward(&x, &w, &b).unwrap();
    let m = matmul(&x, &w).unwrap();
    let want = Tensor::from_fn(vec![3, 2], |i| m.data()[i] + b.data()[i % 2]);
    assert!(y.max_abs_diff(&want) < 1e-12);
}

#[test]
fn dense_feature_mismatch() {
    let err = dense_forward(&Tensor::zeros(vec![2, 5]), &Tensor::zeros(vec![4, 3]), &Tensor::zeros(vec![3])).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)));
}

#[test]
fn dense_backward_matches_finite_differences() {
    let x = random(vec![3, 5], 47);
    let w = random(vec![5, 4], 48);
    let b = random(vec![4], 49);
    let (y, cache) = dense_forward(&x, &w, &b).unwrap();
    let up = random(y.shape().to_vec(), 50);
    let g = layer_backward(LayerKind::Dense, &cache, &up).unwrap();
    assert_grad_close(g.input.data(), &numeric_grad(&x, 1e-6, |t| dot(&dense_forward(t, &w, &b).unwrap().0, &up)), 1e-7, "dx");
    assert_grad_close(g.params[0].data(), &numeric_grad(&w, 1e-6, |t| dot(&dense_forward(&x, t, &b).unwrap().0, &up)), 1e-7, "dw");
    assert_grad_close(g.params[1].data(), &numeric_grad(&b, 1e-6, |t| dot(&dense_forward(&x, &w, t).unwrap().0, &up)), 1e-7, "db");
}

// ---- batchnorm ------------------------------------------------------------

fn channel_stats(y: &Tensor, c: usize) -> Vec<(f64, f64)> {
    let [n, _, h, w] = y.dims4().unwrap();
    (0..c)
        .map(|ch| {
            let vals: Vec<f64> = (0..n)
                .flat_map(|s| (0..h * w).map(move |p| (s, p)))
                .map(|(s, p)| y.data()[(s * c + ch) * h * w + p])
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            (m, v)
        })
        .collect()
}

#[test]
fn batchnorm_train_normalizes() {
    let x = random(vec![4, 3, 2, 2], 51).map(|v| 3.0 * v + 1.0);
    let (y, _) = batchnorm_forward(&x, &BatchNormState::new(3), Mode::Train).unwrap();
    for (m, _) in channel_stats(&y, 3) {
        assert!(m.abs() < 1e-9);
    }
}

#[test]
fn batchnorm_output_moments_follow_gamma_beta() {
    // spread ≫ epsilon, so var/(var+ε) is 1 to well under 1e-6
    let x = random(vec![6, 2, 3, 3], 52).map(|v| 100.0 * v);
    let mut st = BatchNormState::new(2);
    st.gamma = Tensor::new(vec![2], vec![2.0, 0.5]).unwrap();
    st.beta = Tensor::new(vec![2], vec![-1.0, 3.0]).unwrap();
    let (y, _) = batchnorm_forward(&x, &st, Mode::Train).unwrap();
    for (ch, (m, v)) in channel_stats(&y, 2).into_iter().enumerate() {
        assert!((m - st.beta.data()[ch]).abs() < 1e-6);
        assert!((v - st.gamma.data()[ch].powi(2)).abs() < 1e-6, "var {v}");
    }
}

#[test]
fn batchnorm_infer_with_unit_stats() {
    let x = random(vec![2, 3], 53);
    let (y, _) = batchnorm_forward(&x, &BatchNormState::new(3), Mode::Infer).unwrap();
    let want = x.map(|v| v / (1.0f64 + 1e-5).sqrt());
    assert!(y.max_abs_diff(&want) < 1e-15);
}

#[test]
fn batchnorm_matches_two_pass_oracle_and_updates_running() {
    let x = random(vec![8, 3, 4, 4], 54);
    let mut st = BatchNormState::new(3);
    st.gamma = random(vec![3], 55);
    st.beta = random(vec![3], 56);
    let (y, cache) = batchnorm_forward(&x, &st, Mode::Train).unwrap();
    let stats = channel_stats(&x, 3);
    let [n, c, h, w] = x.dims4().unwrap();
    for s in 0..n {
        for ch in 0..c {
            let (m, v) = stats[ch];
            for p in 0..h * w {
                let i = (s * c + ch) * h * w + p;
                let want = st.gamma.data()[ch] * (x.data()[i] - m) / (v + 1e-5).sqrt() + st.beta.data()[ch];
                assert!((y.data()[i] - want).abs() < 1e-9);
            }
        }
    }
    st.update_running(&cache).unwrap();
    for ch in 0..3 {
        assert!((st.running_mean.data()[ch] - 0.1 * stats[ch].0).abs() < 1e-12);
        assert!((st.running_var.data()[ch] - (0.9 + 0.1 * stats[ch].1)).abs() < 1e-12);
    }
}

#[test]
fn batchnorm_single_element_batch_fails_in_train() {
    assert!(batchnorm_forward(&Tensor::zeros(vec![1, 4]), &BatchNormState::new(4), Mode::Train).is_err());
    assert!(batchnorm_forward(&Tensor::zeros(vec![1, 4]), &BatchNormState::new(4), Mode::Infer).is_ok());
    // a single sample with spatial extent still has enough values per channel
    assert!(batchnorm_forward(&random(vec![1, 2, 2, 2], 1), &BatchNormState::new(2), Mode::Train).is_ok());
}

#[test]
fn batchnorm_constant_channel_stays_finite() {
    let (y, _) = batchnorm_forward(&Tensor::full(vec![4, 2], 3.0), &BatchNormState::new(2), Mode::Train).unwrap();
    assert!(y.is_finite());
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn batchnorm_backward_matches_finite_differences() {
    for (shape, mode) in [(vec![4, 3, 2, 2], Mode::Train), (vec![5, 3], Mode::Train), (vec![3, 3, 2, 2], Mode::Infer)] {
        let x = random(shape.clone(), 57);
        let mut st = BatchNormState::new(3);
        st.gamma = random(vec![3], 58).map(|v| v + 1.5);
        st.beta = random(vec![3], 59);
        st.running_mean = random(vec![3], 60);
        st.running_var = random(vec![3], 61).map(|v| v.abs() + 0.5);
        let (y, cache) = batchnorm_forward(&x, &st, mode).unwrap();
        let up = random(y.shape().to_vec(), 62);
        let g = layer_backward(LayerKind::BatchNorm, &cache, &up).unwrap();
        let f = |t: &Tensor| dot(&batchnorm_forward(t, &st, mode).unwrap().0, &up);
        assert_grad_close(g.input.data(), &numeric_grad(&x, 1e-5, f), 1e-5, "bn dx");
        let fg = |t: &Tensor| {
            let s = BatchNormState { gamma: t.clone(), ..st.clone() };
            dot(&batchnorm_forward(&x, &s, mode).unwrap().0, &up)
        };
        assert_grad_close(g.params[0].data(), &numeric_grad(&st.gamma, 1e-5, fg), 1e-5, "bn dgamma");
        let fb = |t: &Tensor| {
            let s = BatchNormState { beta: t.clone(), ..st.clone() };
            dot(&batchnorm_forward(&x, &s, mode).unwrap().0, &up)
        };
        assert_grad_close(g.params[1].data(), &numeric_grad(&st.beta, 1e-5, fb), 1e-5, "bn dbeta");
    }
}

// ---- dropout --------------------------------------------------------------

#[test]
fn dropout_identity_cases() {
    let x = random(vec![3, 4], 71);
    let mut rng = SplitMix64::new(1);
    assert_eq!(dropout_forward(&x, 0.0, Mode::Train, &mut rng).unwrap().0, x);
    assert_eq!(dropout_forward(&x, 0.0, Mode::Infer, &mut rng).unwrap().0, x);
    assert_eq!(dropout_forward(&x, 0.5, Mode::Infer, &mut rng).unwrap().0, x);
}

#[test]
fn dropout_statistics() {
    let x = Tensor::full(vec![100_000], 1.0);
    let (y, cache) = dropout_forward(&x, 0.5, Mode::Train, &mut SplitMix64::new(2024)).unwrap();
    let mean = y.sum() / y.len() as f64;
    let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / y.len() as f64;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    assert!((zeros - 0.5).abs() < 0.01, "zero fraction {zeros}");
    let LayerCache::Dropout { mask: Some(mask) } = cache else { panic!() };
    assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
}

#[test]
fn dropout_rejects_rate_one() {
    let x = Tensor::zeros(vec![2]);
    assert!(dropout_forward(&x, 1.0, Mode::Train, &mut SplitMix64::new(0)).is_err());
}

#[test]
fn dropout_backward_applies_mask() {
    let x = random(vec![50], 72);
    let (y, cache) = dropout_forward(&x, 0.3, Mode::Train, &mut SplitMix64::new(3)).unwrap();
    let up = random(vec![50], 73);
    let g = layer_backward(LayerKind::Dropout, &cache, &up).unwrap();
    for i in 0..50 {
        let scale = if x.data()[i] != 0.0 { y.data()[i] / x.data()[i] } else { 0.0 };
        assert!((g.input.data()[i] - up.data()[i] * scale).abs() < 1e-12);
    }
}

// ---- softmax cross-entropy -------------------------------------------------

#[test]
fn softmax_symmetric_logits() {
    let logits = Tensor::zeros(vec![1, 2]);
    let (loss, probs, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
    assert_eq!(probs.data(), &[0.5, 0.5]);
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn softmax_large_logits_are_stable() {
    let logits = Tensor::new(vec![1, 2], vec![1000.0, 0.0]).unwrap();
    let (loss, probs, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
    assert!(loss.abs() < 1e-12);
    assert!(probs.is_finite() && grad.is_finite());
    let (loss, _, _) = softmax_cross_entropy(&logits, &[1]).unwrap();
    assert!((loss - 1000.0).abs() < 1e-9);
}

#[test]
fn softmax_rows_sum_to_one() {
    let logits = random(vec![6, 5], 81).map(|v| 30.0 * v);
    let (loss, probs, _) = softmax_cross_entropy(&logits, &[0, 1, 2, 3, 4, 0]).unwrap();
    assert!(loss >= 0.0);
    for row in probs.data().chunks(5) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn softmax_label_out_of_range() {
    let err = softmax_cross_entropy(&Tensor::zeros(vec![1, 2]), &[2]).unwrap_err();
    assert!(matches!(err, Error::LabelOutOfRange { label: 2, classes: 2 }));
}

#[test]
fn softmax_grad_matches_finite_differences() {
    let logits = random(vec![4, 2], 82);
    let labels = [0, 1, 1, 0];
    let (_, _, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
    let num = numeric_grad(&logits, 1e-6, |t| softmax_cross_entropy(t, &labels).unwrap().0);
    assert_grad_close(grad.data(), &num, 1e-6, "xent");
}

// ---- layer_backward dispatch ----------------------------------------------

#[test]
fn cache_kind_mismatch() {
    let (_, cache) = relu_forward(&Tensor::zeros(vec![2]));
    let err = layer_backward(LayerKind::Dense, &cache, &Tensor::zeros(vec![2])).unwrap_err();
    assert!(matches!(err, Error::CacheMismatch { expected: "dense", found: "relu" }));
}

#[test]
fn upstream_shape_must_match_output() {
    let (_, cache) = relu_forward(&Tensor::zeros(vec![2, 2]));
    assert!(layer_backward(LayerKind::Relu, &cache, &Tensor::zeros(vec![4])).is_err());
}

// ---- sequential + gradient_check ------------------------------------------

#[test]
fn gradcheck_dense_softmax() {
    let net = Sequential::new(vec![6], vec![LayerSpec::Dense { inputs: 6, units: 3 }]).unwrap();
    let params = vec![random(vec![6, 3], 91), random(vec![3], 92)];
    let x = random(vec![4, 6], 93);
    let r = gradient_check(&net, &params, &x, &Objective::CrossEntropy(vec![0, 2, 1, 1]), 1e-5, Coverage::All, 0).unwrap();
    assert_eq!(r.checked, 18 + 3 + 24);
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn gradcheck_relu_only_checks_input() {
    let net = Sequential::new(vec![5], vec![LayerSpec::Relu]).unwrap();
    let x = random(vec![3, 5], 94).map(|v| if v.abs() < 0.05 { 0.5 } else { v });
    let obj = Objective::random_projection(vec![3, 5], 95);
    let r = gradient_check(&net, &[], &x, &obj, 1e-5, Coverage::All, 0).unwrap();
    assert_eq!(r.checked, 15);
    assert_eq!(r.worst.unwrap().tensor, "input");
    assert!(r.max_rel_error < 1e-8);
}

#[test]
fn gradcheck_epsilon_bounds() {
    let net = Sequential::new(vec![2], vec![LayerSpec::Relu]).unwrap();
    let x = Tensor::zeros(vec![1, 2]);
    let obj = Objective::random_projection(vec![1, 2], 0);
    assert!(gradient_check(&net, &[], &x, &obj, 1e-2, Coverage::All, 0).is_err());
    assert!(gradient_check(&net, &[], &x, &obj, 1e-8, Coverage::All, 0).is_err());
}

#[test]
fn gradcheck_small_conv_stack_with_every_layer_kind() {
    let layers = vec![
        LayerSpec::conv_same(2, 3, 3),
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { kernel: 3, stride: 2 },
        LayerSpec::conv_same(3, 4, 4),
        LayerSpec::Relu,
        LayerSpec::batchnorm(4),
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 4 * 4 * 4, units: 6 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense { inputs: 6, units: 2 },
    ];
    let net = Sequential::new(vec![2, 9, 9], layers).unwrap();
    let mut rng = SplitMix64::new(96);
    let params: Vec<Tensor> = net
        .param_slots()
        .iter()
        .map(|s| {
            if s.name.ends_with("running_var") || s.name.ends_with("gamma") {
                Tensor::full(s.shape.clone(), 1.0)
            } else {
                Tensor::from_fn(s.shape.clone(), |_| rng.uniform(-0.5, 0.5))
            }
        })
        .collect();
    let x = random(vec![3, 2, 9, 9], 97);
    let r = gradient_check(&net, &params, &x, &Objective::CrossEntropy(vec![0, 1, 1]), 1e-5, Coverage::All, 7).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn resolved_error_discounts_round_off_only() {
    assert_eq!(gradcheck::resolved_relative_error(0.0, 5e-10, 1e-9), 0.0);
    let literal = gradcheck::relative_error(0.0, 5e-10);
    assert!(literal > 1e-2);
    let r = gradcheck::resolved_relative_error(1.0, 1.001, 1e-9);
    assert!((r - gradcheck::relative_error(1.0, 1.001)).abs() < 1e-8);
    let res = gradcheck::fd_resolution(0.7, -0.7, 1e-5);
    assert!((res - 512.0 * f64::EPSILON * 0.7 / 2e-5).abs() < 1e-20);
}

#[test]
fn frozen_forward_keeps_relu_pattern() {
    let net = Sequential::new(vec![3], vec![LayerSpec::Relu]).unwrap();
    let x = Tensor::new(vec![1, 3], vec![-1.0, 0.5, 2.0]).unwrap();
    let mut rng = SplitMix64::new(0);
    let pass = net.forward(&[], &x, Mode::Train, &mut rng).unwrap();
    let shifted = Tensor::new(vec![1, 3], vec![1.0, -0.5, 2.0]).unwrap();
    let y = net.forward_frozen(&[], &shifted, &pass).unwrap();
    assert_eq!(y.data(), &[0.0, -0.5, 2.0]);
}

#[test]
fn resolved_report_fields() {
    let net = Sequential::new(vec![6], vec![LayerSpec::Dense { inputs: 6, units: 3 }]).unwrap();
    let params = vec![random(vec![6, 3], 91), random(vec![3], 92)];
    let x = random(vec![4, 6], 93);
    let r = gradient_check(&net, &params, &x, &Objective::CrossEntropy(vec![0, 2, 1, 1]), 1e-5, Coverage::All, 0).unwrap();
    assert!(r.max_resolved_rel_error <= r.max_rel_error);
    assert!(r.resolution > 0.0 && r.passes(1e-6));
}

#[test]
fn sequential_rejects_broken_chain() {
    let err = Sequential::new(vec![1, 8, 8], vec![LayerSpec::Flatten, LayerSpec::Dense { inputs: 63, units: 2 }]);
    assert!(matches!(err, Err(Error::Dimension(_))));
}

#[test]
fn forward_is_pure() {
    let net = Sequential::new(
        vec![1, 6, 6],
        vec![LayerSpec::conv_same(1, 2, 3), LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::Dropout { rate: 0.5 }],
    )
    .unwrap();
    let params = vec![random(vec![2, 1, 3, 3], 98), random(vec![2], 99)];
    let x = random(vec![2, 1, 6, 6], 100);
    let a = net.forward(&params, &x, Mode::Train, &mut SplitMix64::new(5)).unwrap();
    let b = net.forward(&params, &x, Mode::Train, &mut SplitMix64::new(5)).unwrap();
    assert_eq!(a.output, b.output);
}

#[test]
fn shape_chain_floor_rule() {
    let mut layers = Vec::new();
    let mut c = 1;
    for out in [4, 4, 4, 4, 4] {
        layers.push(LayerSpec::conv_same(c, out, 3));
        layers.push(LayerSpec::MaxPool2d { kernel: 3, stride: 2 });
        c = out;
    }
    let net = Sequential::new(vec![1, 90, 90], layers).unwrap();
    let sizes: Vec<usize> = net.shapes().iter().step_by(2).map(|s| s[1]).collect();
    assert_eq!(sizes, vec![90, 44, 21, 10, 4, 1]);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn im2col_conv_equals_direct(
            c in 1usize..4, h in 1usize..10, w in 1usize..10, o in 1usize..4,
            k in 1usize..6, stride in 1usize..4, pb in 0usize..3, pa in 0usize..3, seed in any::<u64>()
        ) {
            let pad = Padding { before: pb, after: pa };
            prop_assume!(k <= h + pad.total() && k <= w + pad.total());
            let x = random(vec![2, c, h, w], seed);
            let wt = random(vec![o, c, k, k], seed ^ 1);
            let b = random(vec![o], seed ^ 2);
            let (y, _) = conv2d_forward(&x, &ConvParams::new(wt.clone(), b.clone(), stride, pad).unwrap()).unwrap();
            prop_assert!(y.max_abs_diff(&conv_oracle(&x, &wt, &b, stride, pad)) < 1e-10);
        }

        #[test]
        fn softmax_is_stochastic(vals in proptest::collection::vec(-50.0f64..50.0, 2..12)) {
            let k = 2;
            let n = vals.len() / k;
            let logits = Tensor::new(vec![n, k], vals[..n * k].to_vec()).unwrap();
            let (loss, probs, _) = softmax_cross_entropy(&logits, &vec![1; n]).unwrap();
            prop_assert!(loss >= 0.0);
            for row in probs.data().chunks(k) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
