use proptest::prelude::*;

use rfsep::autodiff::{grad_check, AdamConfig, AdamState, DilationParam, Graph, NodeId, PaddingPolicy, ParamRef, Tensor};
use rfsep::datagen::{decode_sigpack, encode_sigpack, example_seed, InterferenceKind, MixtureExample, Split};
use rfsep::dsp::{BitString, Complex64, ComplexSignal, SoiKind};
use rfsep::eval::{percent_improvement, sinr_at_target_ber, BerCurve, BerPoint};
use rfsep::rng::Rng;
use rfsep::train::{PlateauState, TrainConfig};
use rfsep::wavenet::receptive_field;

fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gaussian()).collect()).unwrap()
}

/// Integer-dilation convolution written directly from its definition.
fn dilated_conv_oracle(x: &[f64], c_in: usize, len: usize, w: &[f64], c_out: usize, k: usize, d: usize) -> Vec<f64> {
    let half = (k / 2) as isize;
    let mut out = vec![0.0; c_out * len];
    for o in 0..c_out {
        for t in 0..len as isize {
            let mut acc = 0.0;
            for c in 0..c_in {
                for m in 0..k as isize {
                    let src = t + (m - half) * d as isize;
                    if src >= 0 && src < len as isize {
                        acc += w[(o * c_in + c) * k + m as usize] * x[c * len + src as usize];
                    }
                }
            }
            out[o * len + t as usize] = acc;
        }
    }
    out
}

fn conv(x: &Tensor, w: &Tensor, d: f64) -> Tensor {
    let mut g = Graph::new();
    let (xi, wi, di) = (g.leaf(x.clone()), g.leaf(w.clone()), g.leaf(Tensor::scalar(d)));
    let y = g.conv1d_frac(xi, wi, di, PaddingPolicy::Same).unwrap();
    g.tensor(y).clone()
}

#[test]
fn integer_dilation_matches_direct_loop() {
    let mut rng = Rng::new(1);
    let mut cases = 0;
    for d in [1usize, 2, 4, 8] {
        for _ in 0..30 {
            let (c_in, c_out) = (1 + rng.below(4), 1 + rng.below(4));
            let k = [1, 3, 5, 7][rng.below(4)];
            let len = 1 + rng.below(80);
            let x = random_tensor(&mut rng, &[c_in, len]);
            let w = random_tensor(&mut rng, &[c_out, c_in, k]);
            let got = conv(&x, &w, d as f64);
            let want = dilated_conv_oracle(x.data(), c_in, len, w.data(), c_out, k, d);
            for (a, b) in got.data().iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12, "d={d} k={k} len={len}: {a} vs {b}");
            }
            cases += 1;
        }
    }
    assert!(cases >= 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear_in_input(seed in any::<u64>(), d in 1.0f64..6.0, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = Rng::new(seed);
        let (c_in, c_out, len, k) = (1 + rng.below(3), 1 + rng.below(3), 4 + rng.below(40), [1, 3, 5][rng.below(3)]);
        let x = random_tensor(&mut rng, &[c_in, len]);
        let y = random_tensor(&mut rng, &[c_in, len]);
        let w = random_tensor(&mut rng, &[c_out, c_in, k]);
        let mix: Vec<f64> = x.data().iter().zip(y.data()).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = conv(&Tensor::new(&[c_in, len], mix).unwrap(), &w, d);
        let (cx, cy) = (conv(&x, &w, d), conv(&y, &w, d));
        for i in 0..lhs.numel() {
            let rhs = alpha * cx.data()[i] + beta * cy.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    fn backward_is_bitwise_deterministic(seed in any::<u64>(), d in 1.01f64..5.0) {
        let mut rng = Rng::new(seed);
        let (c, len) = (1 + rng.below(3), 8 + rng.below(30));
        let x = random_tensor(&mut rng, &[c, len]).requires_grad(true);
        let w = random_tensor(&mut rng, &[2, c, 3]).requires_grad(true);
        let target = random_tensor(&mut rng, &[2, len]);
        let run = || {
            let mut g = Graph::new();
            let (xi, wi) = (g.leaf(x.clone()), g.leaf(w.clone()));
            let di = g.leaf(Tensor::scalar(d).requires_grad(true));
            let ti = g.leaf(target.clone());
            let y = g.conv1d_frac(xi, wi, di, PaddingPolicy::Same).unwrap();
            let l = g.mse_loss(y, ti).unwrap();
            g.backward(l).unwrap();
            [xi, wi, di].map(|id| g.tensor(id).grad().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn adam_keeps_dilations_in_bounds(seed in any::<u64>(), d0 in 1.0f64..8.0, factor in 1.1f64..3.0, lr in 1e-4f64..2.0) {
        let mut rng = Rng::new(seed);
        let mut p = DilationParam::new(d0, d0 * factor).unwrap();
        let mut adam = AdamState::new(AdamConfig { lr, ..Default::default() });
        for _ in 0..20 {
            p.tensor_mut().grad_mut()[0] = 100.0 * rng.gaussian();
            adam.step(&mut [ParamRef::dilation("d", &mut p)]).unwrap();
            prop_assert!(p.value() >= 1.0 && p.value() <= p.d_max());
        }
    }

    #[test]
    fn sigpack_roundtrip_is_identity(seed in any::<u64>(), n in 0usize..4) {
        let mut rng = Rng::new(seed);
        let examples: Vec<MixtureExample> = (0..n)
            .map(|_| {
                let len = 1 + rng.below(50);
                let mut sig = || {
                    let s = (0..len).map(|_| Complex64::new(rng.gaussian() * 1e3, rng.gaussian() * 1e-3)).collect();
                    ComplexSignal::new(s).unwrap()
                };
                let (mixture, soi) = (sig(), sig());
                let n_bits = rng.below(70);
                MixtureExample {
                    mixture,
                    soi,
                    bits: BitString::new(rng.bits(n_bits)).unwrap(),
                    soi_kind: if rng.bit() == 1 { SoiKind::Qpsk } else { SoiKind::OfdmQpsk },
                    interference_kind: if rng.bit() == 1 { InterferenceKind::EmiSurrogate } else { InterferenceKind::CommSurrogate },
                    sinr_db: rng.uniform_in(-30.0, 30.0),
                    seed: rng.next_u64(),
                    interference_seed: rng.next_u64(),
                    augmented: rng.bit() == 1,
                }
            })
            .collect();
        let (back, spec) = decode_sigpack(&encode_sigpack(&examples, None)).unwrap();
        prop_assert!(spec.is_none());
        prop_assert_eq!(back.len(), examples.len());
        for (a, b) in back.iter().zip(&examples) {
            let bits = |s: &ComplexSignal| s.samples().iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.mixture), bits(&b.mixture));
            prop_assert_eq!(bits(&a.soi), bits(&b.soi));
            prop_assert_eq!(a.sinr_db.to_bits(), b.sinr_db.to_bits());
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn split_seed_domains_are_disjoint(master in any::<u64>(), seg in 0usize..10_000, idx in 0usize..10_000, seg2 in 0usize..10_000, idx2 in 0usize..10_000) {
        let t = example_seed(master, Split::Train, seg, idx);
        let v = example_seed(master, Split::Val, seg2, idx2);
        let e = example_seed(master, Split::Test, seg, idx2);
        prop_assert!(t != v && v != e && t != e);
        prop_assert_eq!(Split::of_seed(t), Some(Split::Train));
        prop_assert_eq!(Split::of_seed(v), Some(Split::Val));
        prop_assert_eq!(Split::of_seed(e), Some(Split::Test));
    }

    #[test]
    fn crossing_sinr_is_monotone_in_target(seed in any::<u64>(), t1 in 1e-6f64..0.5, t2 in 1e-6f64..0.5) {
        let mut rng = Rng::new(seed);
        let n = 2 + rng.below(10);
        let mut ber = 0.5;
        let points = (0..n)
            .map(|i| {
                ber *= rng.uniform_in(0.05, 1.2);
                let n_bits = 10_000;
                let b = if rng.below(8) == 0 { 0.0 } else { ber.min(0.5) };
                BerPoint { sinr_db: -15.0 + 3.0 * i as f64, ber: b, bit_errors: (b * n_bits as f64) as usize, n_bits }
            })
            .collect();
        let curve = BerCurve { label: "p".into(), points };
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let at = |t| sinr_at_target_ber(&curve, t).unwrap().unwrap_or(f64::INFINITY);
        prop_assert!(at(hi) <= at(lo));
    }

    #[test]
    fn improvement_sign_and_zero(a in 0.01f64..40.0, b in -40.0f64..40.0) {
        prop_assert_eq!(percent_improvement(a, a).unwrap(), 0.0);
        let p = percent_improvement(a, b).unwrap();
        prop_assert_eq!(p > 0.0, a > b);
        prop_assert_eq!(p < 0.0, a < b);
    }

    #[test]
    fn plateau_lr_is_monotone_and_floored(seed in any::<u64>(), patience in 1usize..4) {
        let mut rng = Rng::new(seed);
        let config = TrainConfig { plateau_patience: patience, early_stop_patience: 1000, min_lr: 1e-4, ..Default::default() };
        let mut s = PlateauState::new(&config);
        let mut prev = s.lr();
        for _ in 0..60 {
            s.update(rng.uniform_in(0.5, 1.5)).unwrap();
            prop_assert!(s.lr() <= prev && s.lr() >= config.min_lr);
            prev = s.lr();
        }
    }
}

/// Span of output samples reached by a unit impulse through a chain of
/// single-channel all-ones convolutions.
fn impulse_support(k: usize, dilations: &[f64]) -> usize {
    let len = 2001;
    let mut data = vec![0.0; len];
    data[len / 2] = 1.0;
    let mut x = Tensor::new(&[1, len], data).unwrap();
    let ones = Tensor::new(&[1, 1, k], vec![1.0; k]).unwrap();
    for &d in dilations {
        x = conv(&x, &ones, d);
    }
    let nonzero: Vec<usize> = x.data().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
    nonzero[nonzero.len() - 1] - nonzero[0] + 1
}

#[test]
fn receptive_field_matches_impulse_support() {
    assert_eq!(impulse_support(3, &[1.0, 2.0, 4.0]), 15);
    assert_eq!(receptive_field(3, &[1.0, 2.0, 4.0]), 15.0);
    assert_eq!(impulse_support(3, &[1.0]), 3);
    // interpolation rounds each tap's reach outward to ⌈m·d⌉
    assert_eq!(receptive_field(3, &[1.5, 1.5]), 7.0);
    assert_eq!(impulse_support(3, &[1.5, 1.5]), 9);

    let mut rng = Rng::new(20);
    for _ in 0..25 {
        let k = [1, 3, 5, 7][rng.below(4)];
        let layers = 1 + rng.below(5);
        let integer = rng.bit() == 1;
        let dilations: Vec<f64> = (0..layers)
            .map(|_| {
                if integer {
                    (1 + rng.below(8)) as f64
                } else {
                    rng.uniform_in(1.0, 8.0)
                }
            })
            .collect();
        let half = (k / 2) as f64;
        let outward = 1 + 2 * dilations.iter().map(|d| (half * d).ceil() as usize).sum::<usize>();
        let support = impulse_support(k, &dilations);
        assert_eq!(support, outward, "k={k} d={dilations:?}");
        let rf = receptive_field(k, &dilations);
        assert!(support as f64 >= rf - 1e-9);
        if integer {
            assert_eq!(support as f64, rf);
        }
    }
}

fn check(op: impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId, rfsep::autodiff::TensorError>, inputs: &[Tensor]) {
    let report = grad_check(op, inputs, 1e-4);
    assert!(report.passed, "{report:?}");
}

#[test]
fn every_op_passes_gradient_check() {
    let mut rng = Rng::new(3);
    for _ in 0..5 {
        let len = 5 + rng.below(10);
        let x = random_tensor(&mut rng, &[3, len]).requires_grad(true);
        let x2 = random_tensor(&mut rng, &[3, len]).requires_grad(true);
        let target = random_tensor(&mut rng, &[3, len]);
        let w = random_tensor(&mut rng, &[3, 3]).requires_grad(true);
        let b = random_tensor(&mut rng, &[3]).requires_grad(true);

        check(
            |g, ids| {
                let y = g.conv1x1(ids[0], ids[1], Some(ids[2]))?;
                g.mse_loss(y, ids[3])
            },
            &[x.clone(), w.clone(), b.clone(), target.clone()],
        );
        check(
            |g, ids| {
                let y = g.add_bias(ids[0], ids[1])?;
                g.mse_loss(y, ids[2])
            },
            &[x.clone(), b.clone(), target.clone()],
        );
        check(
            |g, ids| {
                let y = g.add(ids[0], ids[1])?;
                g.mse_loss(y, ids[2])
            },
            &[x.clone(), x2.clone(), target.clone()],
        );
        check(
            |g, ids| {
                let y = g.gated_unit(ids[0], ids[1])?;
                g.mse_loss(y, ids[2])
            },
            &[x.clone(), x2.clone(), target.clone()],
        );
        // keep inputs away from the ReLU kink
        let away: Vec<f64> = x.data().iter().map(|v| if v.abs() < 0.05 { v + 0.1 } else { *v }).collect();
        check(
            |g, ids| {
                let y = g.relu(ids[0]);
                g.mse_loss(y, ids[1])
            },
            &[Tensor::new(&[3, len], away).unwrap().requires_grad(true), target.clone()],
        );
        for d in [1.3, 2.7] {
            let kernel = random_tensor(&mut rng, &[3, 3, 3]).requires_grad(true);
            check(
                |g, ids| {
                    let y = g.conv1d_frac(ids[0], ids[1], ids[2], PaddingPolicy::Causal)?;
                    g.mse_loss(y, ids[3])
                },
                &[x.clone(), kernel, Tensor::scalar(d).requires_grad(true), target.clone()],
            );
        }
    }
}
