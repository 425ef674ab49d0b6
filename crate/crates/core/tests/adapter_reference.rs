use ibkit_core::adapter::{
    fused_forward, fused_gradcheck, ib_adapter_forward, noise_channel_suppression, FusedGradCheckConfig,
    FusedIbAdapter, FusedParams, IbAdapterParams, Mode,
};
use ibkit_core::tensor::{Matrix, ParamCollection};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn randomized_ib(dim: usize, heads: usize, seed: u64) -> IbAdapterParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = IbAdapterParams::init(dim, heads, &mut rng).unwrap();
    let normal = Normal::new(0.0, 0.5).unwrap();
    for slot in params.slots_mut() {
        for v in slot.value_mut() {
            *v = normal.sample(&mut rng);
        }
    }
    params
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Straight-line nested-loop version of the adapter, sharing no code with
/// the library beyond reading parameter values. GELU uses the same `erf` as
/// the library (checked separately against statrs) because the layer norm
/// amplifies last-ulp differences in the CDF past 1e-12.
fn reference_forward(x: &[Vec<f64>], params: &IbAdapterParams) -> Vec<Vec<f64>> {
    let n = x.len();
    let d = params.head_dim();
    let mut z = vec![vec![0.0; params.dim()]; n];
    for (h, head) in params.heads().iter().enumerate() {
        let off = h * d;
        let wq = to_rows(head.w_q.value());
        let w1 = to_rows(head.w_v1.value());
        let w2 = to_rows(head.w_v2.value());
        let tau = head.tau.value().data()[0];
        let b = head.bias.value().data()[0];
        let gamma = head.norm_gamma.value().data();
        let beta = head.norm_beta.value().data();

        let mut q = vec![vec![0.0; d]; n];
        for t in 0..n {
            for i in 0..d {
                for k in 0..d {
                    q[t][i] += x[t][off + k] * wq[k][i];
                }
            }
        }
        let mut a = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut g = 0.0;
                for t in 0..n {
                    g += q[t][i] * x[t][off + j];
                }
                a[i][j] = 1.0 / (1.0 + (-(tau * g - b)).exp());
            }
        }
        for t in 0..n {
            let mut hidden = vec![0.0; d];
            for i in 0..d {
                let mut u = 0.0;
                for k in 0..d {
                    u += x[t][off + k] * w1[k][i];
                }
                hidden[i] = 0.5 * u * (1.0 + libm::erf(u / std::f64::consts::SQRT_2));
            }
            let mut pre = vec![0.0; d];
            for i in 0..d {
                for k in 0..d {
                    pre[i] += hidden[k] * w2[k][i];
                }
            }
            let mean = pre.iter().sum::<f64>() / d as f64;
            let var = pre.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / d as f64;
            let v: Vec<f64> = (0..d)
                .map(|i| gamma[i] * (pre[i] - mean) / (var + 1e-5).sqrt() + beta[i])
                .collect();
            for j in 0..d {
                z[t][off + j] = (0..d).map(|i| v[i] * a[i][j]).sum();
            }
        }
    }
    z
}

#[test]
fn forward_matches_nested_loop_reference() {
    for seed in 0..3 {
        let params = randomized_ib(16, 4, seed);
        let x = gaussian(8, 16, 100 + seed);
        let (z, _) = ib_adapter_forward(&x, &params).unwrap();
        let reference = reference_forward(&to_rows(&x), &params);
        for t in 0..8 {
            for c in 0..16 {
                let diff = (z.get(t, c) - reference[t][c]).abs() / reference[t][c].abs().max(1.0);
                assert!(diff < 1e-12, "seed {seed} ({t},{c}) z {} diff {diff}", z.get(t, c));
            }
        }
    }
}

#[test]
fn zero_input_has_closed_form_output() {
    let params = randomized_ib(12, 3, 4);
    let (z, cache) = ib_adapter_forward(&Matrix::zeros(5, 12), &params).unwrap();
    for (h, head) in params.heads().iter().enumerate() {
        let b = head.bias.value().item();
        let gate = 1.0 / (1.0 + b.exp());
        assert!(cache.gate(h).data().iter().all(|&a| (a - gate).abs() < 1e-15));
        let beta_sum: f64 = head.norm_beta.value().data().iter().sum();
        for t in 0..5 {
            for j in 0..4 {
                assert!((z.get(t, h * 4 + j) - gate * beta_sum).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn noise_channel_is_gated_below_signal_channels() {
    let wins = (0..50)
        .filter(|&seed| noise_channel_suppression(seed, 256, 4).suppressed())
        .count();
    assert!(wins >= 45, "{wins}/50");
}

#[test]
fn dropout_frequency_matches_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = FusedParams::init(16, 4, 0.3, &mut rng).unwrap();
    let mut adapter = FusedIbAdapter::new(params);
    let x = gaussian(8, 16, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut drops = 0;
    for _ in 0..10_000 {
        adapter.forward(&x, Mode::Train, &mut rng).unwrap();
        drops += adapter.last_dropped().unwrap() as usize;
    }
    let freq = drops as f64 / 10_000.0;
    assert!((0.28..=0.32).contains(&freq), "{freq}");
}

#[test]
fn dropout_sequence_is_reproducible() {
    let mut init = ChaCha8Rng::seed_from_u64(3);
    let params = FusedParams::init(8, 2, 0.5, &mut init).unwrap();
    let x = gaussian(4, 8, 3);
    let draws = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..64)
            .map(|_| fused_forward(&x, &params, Mode::Train, &mut rng).unwrap().1.dropped())
            .collect::<Vec<_>>()
    };
    assert_eq!(draws(9), draws(9));
    assert_ne!(draws(9), draws(10));
}

#[test]
fn inference_is_a_pure_function() {
    let mut init = ChaCha8Rng::seed_from_u64(5);
    let params = FusedParams::init(16, 4, 0.3, &mut init).unwrap();
    let x = gaussian(8, 16, 5);
    let a = fused_forward(&x, &params, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().0;
    let b = fused_forward(&x, &params, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(2)).unwrap().0;
    assert_eq!(a, b);
}

#[test]
fn lambda_gradient_has_closed_form() {
    let mut init = ChaCha8Rng::seed_from_u64(6);
    let mut params = FusedParams::init(8, 2, 0.0, &mut init).unwrap();
    let x = gaussian(4, 8, 6);
    let upstream = gaussian(4, 8, 7);
    let (_, cache) = fused_forward(&x, &params, Mode::Infer, &mut init).unwrap();
    params.zero_grads();
    ibkit_core::adapter::fused_backward(&upstream, &cache, &mut params).unwrap();
    let lambda = params.lambda.value().item();
    let expected = (1.0 - lambda.tanh().powi(2)) * upstream.dot(cache.ib_output()).unwrap();
    assert!((params.lambda.grad().item() - expected).abs() < 1e-14);

    let h = 1e-5;
    let loss = |p: &FusedParams| {
        let (z, _) = fused_forward(&x, p, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        z.dot(&upstream).unwrap()
    };
    let mut plus = params.clone();
    plus.lambda.value_mut()[0] += h;
    let mut minus = params.clone();
    minus.lambda.value_mut()[0] -= h;
    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
    assert!((fd - expected).abs() / expected.abs().max(1.0) < 1e-5);
}

#[test]
fn gradcheck_with_order_one_parameters() {
    let cfg = FusedGradCheckConfig {
        param_scale: Some(0.5),
        ..Default::default()
    };
    for seed in 0..2 {
        let check = fused_gradcheck(seed, &cfg).unwrap();
        assert!(check.passes(1e-4), "seed {seed}: {check:?}");
        assert_eq!(check.params.slots.len(), 4 * 7 + 3);
    }
}

#[test]
fn gradcheck_detects_a_broken_gradient() {
    // Finite differences of a model whose loss ignores one slot must flag a
    // nonzero analytic gradient for that slot.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = FusedParams::init(8, 2, 0.0, &mut rng).unwrap();
    params.zero_grads();
    params.lambda.grad_mut()[0] = 1.0;
    let report = ibkit_core::tensor::finite_diff_gradcheck(&mut params, 1e-5, |_| 0.0).unwrap();
    assert!(!report.passes(1e-4));
}
