mod common;

use common::{gradient_check, model_for, random_sentence, random_treebank, tiny_config};
use lhr_core::nn::Graph;
use lhr_core::trainer::build_objective;
use lhr_core::{EncoderMode, HeadLoss, LabelerLoss, RootTarget, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const FLOOR: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn check(mode: EncoderMode, labeler: LabelerLoss, cfg: TrainConfig, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab_source = random_treebank(&mut rng, 20, 6);
    let mut model = model_for(&vocab_source, tiny_config(seed, mode, labeler));
    for _ in 0..3 {
        let n = rand::Rng::gen_range(&mut rng, 1..=5);
        let sentence = random_sentence(&mut rng, n);
        let r = gradient_check(&mut model, &sentence, &cfg, EPS, FLOOR, TOLERANCE);
        assert!(r.checked > 0);
        assert!(
            r.kinks * 20 < r.checked,
            "{} kinks over {} values",
            r.kinks,
            r.checked
        );
        assert!(
            r.worst <= TOLERANCE,
            "relative error {:e} over {} values",
            r.worst,
            r.checked
        );
    }
}

/// The reconstruction targets take part in the derivative, so the tape
/// gradient is the exact gradient of the loss.
fn full() -> TrainConfig {
    TrainConfig {
        target_gradient: true,
        ..TrainConfig::default()
    }
}

#[test]
fn word_pos_margin_mse() {
    check(EncoderMode::WordPos, LabelerLoss::Margin, full(), 11);
}

#[test]
fn word_char_encoder() {
    check(EncoderMode::WordChar, LabelerLoss::Margin, full(), 12);
}

#[test]
fn cross_entropy_labeler() {
    check(EncoderMode::WordPos, LabelerLoss::CrossEntropy, full(), 13);
}

#[test]
fn absolute_error_head_loss() {
    let cfg = TrainConfig {
        head_loss: HeadLoss::Mae,
        ..full()
    };
    check(EncoderMode::WordPos, LabelerLoss::Margin, cfg, 14);
}

#[test]
fn self_root_target_and_punct_skip() {
    let cfg = TrainConfig {
        root_target: RootTarget::SelfToken,
        skip_punctuation_heads: true,
        ..full()
    };
    check(EncoderMode::WordPos, LabelerLoss::Margin, cfg, 16);
}

#[test]
fn labeler_only() {
    let cfg = TrainConfig {
        labeler_weight: 3.0,
        ..full()
    };
    check(EncoderMode::WordChar, LabelerLoss::CrossEntropy, cfg, 17);
}

#[test]
fn hinge_tie_is_matched_one_sided() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let vocab_source = random_treebank(&mut rng, 20, 6);
    let mut model = model_for(
        &vocab_source,
        tiny_config(15, EncoderMode::WordPos, LabelerLoss::Margin),
    );
    let n = rand::Rng::gen_range(&mut rng, 1..=5);
    let sentence = random_sentence(&mut rng, n);
    let r = gradient_check(&mut model, &sentence, &full(), EPS, FLOOR, TOLERANCE);
    assert!(
        r.kinks > 0,
        "this seed places two label scores within the step"
    );
    assert!(r.worst <= TOLERANCE, "relative error {:e}", r.worst);
}

#[test]
fn detached_targets_stop_the_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let tb = random_treebank(&mut rng, 10, 5);
    let model = model_for(
        &tb,
        tiny_config(18, EncoderMode::WordPos, LabelerLoss::Margin),
    );
    let cfg = TrainConfig {
        labeler_weight: 0.0,
        ..TrainConfig::default()
    };
    let sentence = random_sentence(&mut rng, 4);
    let mut g = Graph::new(&model.store);
    let obj = build_objective(&model, &mut g, &sentence, &cfg, None)
        .unwrap()
        .unwrap();
    let grads = g.backward(obj.total).unwrap();
    let root = model.store.id("root_vector").unwrap();
    assert!(grads.get(root, &model.store).is_none());

    let cfg = TrainConfig {
        target_gradient: true,
        ..cfg
    };
    let mut g = Graph::new(&model.store);
    let obj = build_objective(&model, &mut g, &sentence, &cfg, None)
        .unwrap()
        .unwrap();
    let grads = g.backward(obj.total).unwrap();
    assert!(grads.get(root, &model.store).is_some());
}
