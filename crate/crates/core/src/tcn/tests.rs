use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsp::{Band, Direction, Hrir, HrirPair};
use crate::metrics;

const BAND: Band = Band {
    lo_hz: 200.0,
    hi_hz: 14000.0,
};

fn tiny_config(dropout: f64) -> TcnConfig {
    TcnConfig {
        channels: 4,
        layers: 2,
        dropout,
        seed: 21,
        ..TcnConfig::default()
    }
}

fn random_seq(rng: &mut impl Rng, channels: usize, n: usize) -> Sequence {
    Sequence::from_vec(channels, n, (0..channels * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
}

/// Mean over ears of the cost between `target` and the network output.
fn pipeline_cost(model: &TcnModel, x: &Sequence, target: &Sequence, masks: &DropoutMasks) -> f64 {
    let (y, _) = model.forward_with_masks(x, masks.clone()).unwrap();
    (0..2)
        .map(|e| {
            let h = Hrir::new(target.row(e).to_vec(), 44100).unwrap();
            let g = Hrir::new(y.row(e).to_vec(), 44100).unwrap();
            metrics::cost(&h, &g, x.len(), BAND).unwrap().total
        })
        .sum::<f64>()
        / 2.0
}

fn analytic_grad(model: &TcnModel, x: &Sequence, target: &Sequence, masks: &DropoutMasks) -> Vec<f64> {
    let (y, tape) = model.forward_with_masks(x, masks.clone()).unwrap();
    let mut grad_out = Sequence::zeros(2, x.len());
    for e in 0..2 {
        let h = Hrir::new(target.row(e).to_vec(), 44100).unwrap();
        let g = Hrir::new(y.row(e).to_vec(), 44100).unwrap();
        let grad = metrics::cost_gradient(&h, &g, x.len(), BAND).unwrap().total();
        for (o, v) in grad_out.row_mut(e).iter_mut().zip(grad) {
            *o = v / 2.0;
        }
    }
    model.backward(&tape, &grad_out).unwrap()
}

/// Largest relative error between analytic and central-difference gradients.
/// Components whose magnitude is below `1e-6` of the largest gradient are
/// compared against that floor instead.
fn max_fd_error(model: &TcnModel, x: &Sequence, target: &Sequence, masks: &DropoutMasks) -> f64 {
    let analytic = analytic_grad(model, x, target, masks);
    let floor = 1e-6 * analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let delta = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..model.num_params() {
        let mut plus = model.clone();
        plus.params_mut()[i] += delta;
        let mut minus = model.clone();
        minus.params_mut()[i] -= delta;
        let fd = (pipeline_cost(&plus, x, target, masks) - pipeline_cost(&minus, x, target, masks))
            / (2.0 * delta);
        let denom = analytic[i].abs().max(fd.abs()).max(floor);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

fn identity_masks(layers: usize) -> DropoutMasks {
    DropoutMasks((0..layers).map(|_| [None, None]).collect())
}

#[test]
fn block_structure_follows_config() {
    let model = TcnModel::new(TcnConfig {
        channels: 10,
        layers: 3,
        ..TcnConfig::default()
    })
    .unwrap();
    let names: Vec<&str> = model.tensors().iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names.iter().filter(|n| n.ends_with("conv1.weight")).count(), 3);
    assert!(names.contains(&"blocks.0.downsample.weight"));
    assert!(!names.contains(&"blocks.1.downsample.weight"));
    assert_eq!(model.tensor("blocks.2.conv2.weight").unwrap().len(), 10 * 10 * 2);
    assert_eq!(model.tensor("head.weight").unwrap().len(), 2 * 10);
    assert!(model.tensor("head.bias").unwrap().iter().all(|&b| b == 0.0));

}

#[test]
fn influence_spans_exactly_the_receptive_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = TcnModel::new(TcnConfig {
        channels: 10,
        layers: 3,
        ..TcnConfig::default()
    })
    .unwrap();
    let rf = model.config().receptive_field();
    assert_eq!(rf, 15);
    let x = random_seq(&mut rng, 2, 64);
    let t0 = 10;
    let mut xp = x.clone();
    xp.row_mut(0)[t0] += 1.0;
    let (a, b) = (model.predict(&x).unwrap(), model.predict(&xp).unwrap());
    let changed = |t: usize| (0..2).any(|c| a.row(c)[t] != b.row(c)[t]);
    assert!(changed(t0));
    assert!(changed(t0 + rf - 1));
    assert!((t0 + rf..64).all(|t| !changed(t)));
}

#[test]
fn initialization_is_bounded_and_f32_exact() {
    let model = TcnModel::new(TcnConfig {
        channels: 16,
        layers: 2,
        ..TcnConfig::default()
    })
    .unwrap();
    for t in model.tensors() {
        let vals = model.tensor(&t.name).unwrap();
        if t.shape.len() == 3 {
            let bound = (1.0 / (t.shape[1] * t.shape[2]) as f64).sqrt();
            assert!(vals.iter().all(|v| v.abs() <= bound));
        } else {
            assert!(vals.iter().all(|&v| v == 0.0));
        }
        assert!(vals.iter().all(|&v| v as f32 as f64 == v));
    }
}

#[test]
fn zero_model_outputs_zero() {
    let model = TcnModel::zeros(tiny_config(0.0)).unwrap();
    let y = model.predict(&Sequence::zeros(2, 32)).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn eval_forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = TcnModel::new(tiny_config(0.2)).unwrap();
    let x = random_seq(&mut rng, 2, 64);
    assert_eq!(model.predict(&x).unwrap(), model.predict(&x).unwrap());
}

#[test]
fn forward_rejects_wrong_channels() {
    let model = TcnModel::new(tiny_config(0.0)).unwrap();
    assert!(model.predict(&Sequence::zeros(3, 16)).is_err());
}

#[test]
fn causality_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..10 {
        let model = TcnModel::new(TcnConfig {
            seed: trial,
            ..tiny_config(0.0)
        })
        .unwrap();
        let x = random_seq(&mut rng, 2, 48);
        let t = rng.gen_range(0..48);
        let mut xp = x.clone();
        xp.row_mut(rng.gen_range(0..2))[t] += 0.75;
        let (a, b) = (model.predict(&x).unwrap(), model.predict(&xp).unwrap());
        for c in 0..2 {
            assert_eq!(a.row(c)[..t], b.row(c)[..t]);
        }
    }
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = TcnModel::new(tiny_config(0.2)).unwrap();
    let x = random_seq(&mut rng, 2, 32);
    let (_, tape) = model.forward(&x, Mode::Train(&mut rng)).unwrap();
    let grads = model.backward(&tape, &Sequence::zeros(2, 32)).unwrap();
    assert!(grads.iter().all(|&g| g == 0.0));
}

#[test]
fn stale_tape_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut model = TcnModel::new(tiny_config(0.0)).unwrap();
    let x = random_seq(&mut rng, 2, 16);
    let (_, tape) = model.forward(&x, Mode::Eval).unwrap();
    model.params_mut()[0] += 0.1;
    assert!(matches!(
        model.backward(&tape, &Sequence::zeros(2, 16)),
        Err(crate::Error::Precondition(_))
    ));
    let (_, tape) = model.forward(&x, Mode::Eval).unwrap();
    assert!(model.backward(&tape, &Sequence::zeros(2, 15)).is_err());
}

#[test]
fn gradient_matches_finite_differences_without_dropout() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = TcnModel::new(tiny_config(0.0)).unwrap();
    let mut model = model;
    // non-zero biases so every parameter path is exercised
    for v in model.params_mut().iter_mut() {
        if *v == 0.0 {
            *v = rng.gen_range(-0.1..0.1);
        }
    }
    let x = random_seq(&mut rng, 2, 64);
    let target = random_seq(&mut rng, 2, 64);
    let err = max_fd_error(&model, &x, &target, &identity_masks(2));
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn gradient_matches_finite_differences_with_frozen_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = TcnModel::new(tiny_config(0.2)).unwrap();
    let x = random_seq(&mut rng, 2, 64);
    let target = random_seq(&mut rng, 2, 64);
    let (_, tape) = model.forward(&x, Mode::Train(&mut rng)).unwrap();
    let masks = tape.masks().clone();
    assert!(masks.0.iter().flatten().all(|m| m.is_some()));
    let err = max_fd_error(&model, &x, &target, &masks);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn dropout_expectation_matches_eval() {
    for kind in [DropoutKind::Channel, DropoutKind::Element] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = TcnModel::new(TcnConfig {
            channels: 4,
            layers: 1,
            dropout: 0.2,
            dropout_kind: kind,
            hidden_activation: Activation::Identity,
            ..TcnConfig::default()
        })
        .unwrap();
        let x = random_seq(&mut rng, 2, 16);
        let eval = model.predict(&x).unwrap();
        let draws = 10_000;
        let mut mean = vec![0.0; eval.data().len()];
        for _ in 0..draws {
            let (y, _) = model.forward(&x, Mode::Train(&mut rng)).unwrap();
            for (m, v) in mean.iter_mut().zip(y.data()) {
                *m += v / draws as f64;
            }
        }
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = mean.iter().zip(eval.data()).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(eval.data());
        assert!(rel < 0.02, "{kind:?}: relative deviation {rel}");
    }
}

#[test]
fn mask_granularity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_seq(&mut rng, 2, 40);
    for kind in [DropoutKind::Channel, DropoutKind::Element] {
        let model = TcnModel::new(TcnConfig {
            channels: 12,
            layers: 2,
            dropout_kind: kind,
            ..TcnConfig::default()
        })
        .unwrap();
        let (_, tape) = model.forward(&x, Mode::Train(&mut rng)).unwrap();
        for m in tape.masks().0.iter().flatten().flatten() {
            assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.25));
            let constant_rows = (0..m.channels()).all(|c| m.row(c).iter().all(|&v| v == m.row(c)[0]));
            assert_eq!(constant_rows, kind == DropoutKind::Channel);
        }
    }
}

#[test]
fn zero_convolutions_reduce_blocks_to_skip_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = TcnModel::new(TcnConfig {
        channels: 5,
        layers: 3,
        hidden_activation: Activation::Identity,
        ..TcnConfig::default()
    })
    .unwrap();
    let conv_names: Vec<String> = model
        .tensors()
        .iter()
        .filter(|t| t.name.contains(".conv"))
        .map(|t| t.name.clone())
        .collect();
    for name in conv_names {
        model.tensor_mut(&name).unwrap().fill(0.0);
    }
    let x = random_seq(&mut rng, 2, 20);
    let (_, tape) = model.forward(&x, Mode::Eval).unwrap();

    let w = model.tensor("blocks.0.downsample.weight").unwrap();
    let projected = dilated_causal_conv(
        &x,
        ConvWeights {
            weight: w,
            bias: &[0.0; 5],
            out_channels: 5,
            in_channels: 2,
            kernel: 1,
        },
        1,
    )
    .unwrap();
    for out in tape.block_outputs() {
        for (a, b) in out.data().iter().zip(projected.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

fn toy_pair(rng: &mut impl Rng, n: usize) -> TrainingPair {
    let mk = |rng: &mut dyn rand::RngCore, az: f64| {
        let mut ear = || {
            let mut v = vec![0.0; n];
            for (i, s) in v.iter_mut().enumerate().skip(4) {
                *s = (-(i as f64) / 12.0).exp() * (i as f64 * 0.9 + rng.gen_range(0.0..6.0)).sin();
            }
            Hrir::new(v, 44100).unwrap()
        };
        let (l, r) = (ear(), ear());
        HrirPair::new(l, r, Direction::azimuth(az)).unwrap()
    };
    TrainingPair {
        input: mk(rng, 0.0),
        target: mk(rng, 60.0),
    }
}

#[test]
fn training_identity_target_decreases_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pair = toy_pair(&mut rng, 64);
    pair.target = HrirPair {
        direction: Direction::azimuth(60.0),
        ..pair.input.clone()
    };
    let config = TcnConfig {
        channels: 10,
        layers: 2,
        epochs: 100,
        ..TcnConfig::default()
    };
    let opts = TrainOptions {
        record_every: 1,
        transform_size: 64,
        require_canonical: false,
        ..TrainOptions::default()
    };
    let (_, record) = train(&config, &[pair], &opts).unwrap();
    assert_eq!(record.entries.len(), 101);
    assert_eq!(record.objective.len(), 100);
    let costs: Vec<f64> = record.entries.iter().map(|e| e.train.cost).collect();
    let violations = costs.windows(2).filter(|w| w[1] >= w[0]).count();
    assert!(violations <= 5, "{violations} non-decreasing steps");
    assert!(costs[100] < costs[0]);
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pairs: Vec<_> = (0..3).map(|_| toy_pair(&mut rng, 48)).collect();
    let config = TcnConfig {
        channels: 10,
        layers: 2,
        epochs: 15,
        seed: 77,
        ..TcnConfig::default()
    };
    let opts = TrainOptions {
        record_every: 5,
        transform_size: 64,
        require_canonical: false,
        ..TrainOptions::default()
    };
    let (a, ra) = train(&config, &pairs, &opts).unwrap();
    let (b, rb) = train(&config, &pairs, &opts).unwrap();
    assert_eq!(ra, rb);
    assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn training_preconditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = TcnConfig {
        epochs: 1,
        ..tiny_config(0.0)
    };
    assert!(train(&config, &[], &TrainOptions::default()).is_err());
    // 64-sample pairs are not canonical
    let pair = toy_pair(&mut rng, 64);
    assert!(matches!(
        train(&config, &[pair], &TrainOptions::default()),
        Err(crate::Error::Precondition(_))
    ));
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pair = toy_pair(&mut rng, 32);
    let config = TcnConfig {
        channels: 10,
        layers: 2,
        epochs: 50,
        learning_rate: 1e300,
        ..TcnConfig::default()
    };
    let opts = TrainOptions {
        record_every: 0,
        transform_size: 32,
        require_canonical: false,
        ..TrainOptions::default()
    };
    match train(&config, &[pair], &opts) {
        Err(crate::Error::Diverged { epoch, .. }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|_| ())),
    }
}
