//! Synthetic workloads for the parser benchmarks.

use lhr_core::{
    build_vocabularies, EncoderConfig, LhrModel, ModelConfig, ScoreMatrix, Sentence, Token,
    Treebank,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WORDS: &[(&str, &str)] = &[
    ("the", "DT"),
    ("dog", "NN"),
    ("park", "NN"),
    ("saw", "VBD"),
    ("big", "JJ"),
    ("in", "IN"),
    ("quickly", "RB"),
    (".", "."),
];

/// Sentence of `n` tokens over a small vocabulary with a random gold tree.
pub fn sentence<R: Rng>(rng: &mut R, n: usize) -> Sentence {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k] - 1] = order[rng.gen_range(0..k)];
    }
    Sentence::new(
        (1..=n)
            .map(|i| {
                let (form, pos) = WORDS[rng.gen_range(0..WORDS.len())];
                let label = if heads[i - 1] == 0 { "root" } else { "dep" };
                Token::new(i, form, pos, heads[i - 1], label)
            })
            .collect(),
    )
}

pub fn treebank(seed: u64, sentences: usize, len: usize) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Treebank::from_sentences((0..sentences).map(|_| sentence(&mut rng, len)).collect())
}

/// Model with the default layer sizes, or a small one for quick runs.
pub fn model(tb: &Treebank, full_size: bool) -> LhrModel {
    let config = if full_size {
        ModelConfig::default()
    } else {
        ModelConfig {
            encoder: EncoderConfig {
                word_dim: 32,
                pos_dim: 8,
                ..EncoderConfig::default()
            },
            context_hidden: 32,
            heads_hidden: 32,
            ..ModelConfig::default()
        }
    };
    LhrModel::new(config, build_vocabularies(tb, 1)).expect("valid configuration")
}

/// Uniform random scores; greedy decoding of these usually needs repair.
pub fn scores(seed: u64, n: usize) -> ScoreMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sim = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let root = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScoreMatrix::new(sim, root).expect("square matrix")
}
