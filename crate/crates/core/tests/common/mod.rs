#![allow(dead_code)]

use std::path::PathBuf;

use lhr_core::nn::Graph;
use lhr_core::trainer::build_objective;
use lhr_core::{
    build_vocabularies, read_conll, EncoderConfig, EncoderMode, Format, LabelerLoss, LhrModel,
    ModelConfig, ReadOptions, Sentence, Token, TrainConfig, Treebank,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load(name: &str, format: Format) -> Treebank {
    read_conll(fixture(name), &ReadOptions::with_format(format)).expect("fixture parses")
}

pub fn toy_train() -> Treebank {
    load("toy_train.conllu", Format::ConllU)
}

pub fn toy_dev() -> Treebank {
    load("toy_dev.conllu", Format::ConllU)
}

/// Default hyperparameters scaled down for desk-size runs.
pub fn scaled_config(seed: u64) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            word_dim: 32,
            pos_dim: 8,
            ..EncoderConfig::default()
        },
        context_hidden: 32,
        heads_hidden: 32,
        labeler_hidden: 100,
        labeler_loss: LabelerLoss::Margin,
        seed,
    }
}

/// Tiny model with `|c| = 8`.
pub fn tiny_config(seed: u64, mode: EncoderMode, loss: LabelerLoss) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            mode,
            word_dim: 6,
            pos_dim: 3,
            alpha: 0.25,
            char_dim: 3,
            char_hidden: 2,
        },
        context_hidden: 4,
        heads_hidden: 4,
        labeler_hidden: 5,
        labeler_loss: loss,
        seed,
    }
}

pub const WORDS: &[(&str, &str)] = &[
    ("the", "DT"),
    ("a", "DT"),
    ("dog", "NN"),
    ("cat", "NN"),
    ("park", "NN"),
    ("saw", "VBD"),
    ("ran", "VBD"),
    ("big", "JJ"),
    ("in", "IN"),
    ("quickly", "RB"),
    (".", "."),
];

pub const LABELS: &[&str] = &["det", "nsubj", "obj", "amod", "case", "advmod", "obl"];

/// Random sentence of length `n` whose gold heads form a random tree,
/// projective or not.
pub fn random_sentence<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Sentence {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[rng.gen_range(0..k)];
    }
    let tokens = (1..=n)
        .map(|i| {
            let (form, pos) = WORDS[rng.gen_range(0..WORDS.len())];
            let head = heads[i - 1];
            let label = if head == 0 {
                "root"
            } else if pos == "." {
                "punct"
            } else {
                LABELS[rng.gen_range(0..LABELS.len())]
            };
            Token::new(i, form, pos, head, label)
        })
        .collect();
    Sentence::new(tokens)
}

pub fn random_treebank<R: Rng + ?Sized>(rng: &mut R, sentences: usize, max_len: usize) -> Treebank {
    Treebank::from_sentences(
        (0..sentences)
            .map(|_| {
                let n = rng.gen_range(1..=max_len);
                random_sentence(rng, n)
            })
            .collect(),
    )
}

pub fn model_for(tb: &Treebank, config: ModelConfig) -> LhrModel {
    LhrModel::new(config, build_vocabularies(tb, 1)).expect("model builds")
}

/// Loss of `sentence` under the current parameters, without dropout.
pub fn loss_value(model: &LhrModel, sentence: &Sentence, cfg: &TrainConfig) -> f64 {
    let mut g = Graph::new(&model.store);
    let obj = build_objective(model, &mut g, sentence, cfg, None)
        .expect("objective builds")
        .expect("sentence is supervised");
    g.scalar(obj.total)
}

/// One-sided differences carry an `O(eps)` truncation error.
const KINK_TOLERANCE: f64 = 1e-2;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientCheck {
    pub worst: f64,
    pub checked: usize,
    /// Coordinates where a hinge or absolute-value kink lies within the
    /// step; these are checked against the one-sided slopes instead.
    pub kinks: usize,
}

/// Compares analytic gradients with central finite differences over every
/// parameter value that receives a gradient. The relative error is
/// `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    model: &mut LhrModel,
    sentence: &Sentence,
    cfg: &TrainConfig,
    eps: f64,
    floor: f64,
    tolerance: f64,
) -> GradientCheck {
    let grads = {
        let mut g = Graph::new(&model.store);
        let obj = build_objective(model, &mut g, sentence, cfg, None)
            .unwrap()
            .unwrap();
        g.backward(obj.total).unwrap()
    };
    let base = loss_value(model, sentence, cfg);
    let ids: Vec<_> = model.store.ids().collect();
    let mut out = GradientCheck::default();
    for id in ids {
        let Some(analytic) = grads.get(id, &model.store) else {
            continue;
        };
        for k in 0..analytic.len() {
            let a = analytic.data()[k];
            let original = model.store.get(id).value.data()[k];
            model.store.get_mut(id).value.data_mut()[k] = original + eps;
            let plus = loss_value(model, sentence, cfg);
            model.store.get_mut(id).value.data_mut()[k] = original - eps;
            let minus = loss_value(model, sentence, cfg);
            model.store.get_mut(id).value.data_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            if a == 0.0 && numeric == 0.0 {
                continue;
            }
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(floor);
            let err = rel(a, numeric);
            if err > tolerance {
                // A kink inside the step biases the central difference. The
                // analytic value must then agree with the slope on one side.
                let (right, left) = ((plus - base) / eps, (base - minus) / eps);
                let one_sided = rel(a, right).min(rel(a, left));
                if rel(right, left) > 100.0 * tolerance && one_sided <= KINK_TOLERANCE {
                    out.kinks += 1;
                    continue;
                }
            }
            if err > tolerance && std::env::var_os("GRAD_DIAG").is_some() {
                eprintln!(
                    "  {}[{k}] analytic {a:e} numeric {numeric:e}",
                    model.store.get(id).name()
                );
            }
            out.worst = out.worst.max(err);
            out.checked += 1;
        }
    }
    out
}

/// Prints the one-line verdict of an acceptance criterion.
pub fn verdict(name: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
