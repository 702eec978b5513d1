//! The latent heads network.
//!
//! Tokens are embedded, run through the context encoder (a BiLSTM) to give
//! context vectors `c_i`, then through the heads encoder (a second BiLSTM
//! followed by a per-token reduction layer) to give latent heads `h_i` of
//! the same width as `c_i`. A trainable root vector stands in for the
//! virtual root, and a labeler scores arc labels and POS tags from
//! `[c_dependent; c_governor]`.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{DropoutRng, EncoderConfig, TokenEncoder};
use crate::nn::{
    uniform, Activation, BiEncoder, DenseLayer, Graph, ParamId, ParamStore, Tensor, Var,
};
use crate::treebank::Sentence;
use crate::vocab::Vocabularies;
use crate::{Error, Result};

/// Objective the labeler is trained with. Cross-entropy puts a softmax on
/// the labeler outputs; the margin objective uses raw scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelerLoss {
    Margin,
    CrossEntropy,
}

impl FromStr for LabelerLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "margin" => Ok(LabelerLoss::Margin),
            "xent" | "cross-entropy" | "crossentropy" => Ok(LabelerLoss::CrossEntropy),
            other => Err(Error::Config(format!("unknown labeler loss `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Context encoder hidden size per direction; `|c| = 2 × context_hidden`.
    pub context_hidden: usize,
    /// Heads encoder hidden size per direction.
    pub heads_hidden: usize,
    pub labeler_hidden: usize,
    pub labeler_loss: LabelerLoss,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            context_hidden: 200,
            heads_hidden: 200,
            labeler_hidden: 100,
            labeler_loss: LabelerLoss::Margin,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn context_dim(&self) -> usize {
        2 * self.context_hidden
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.context_hidden == 0 || self.heads_hidden == 0 || self.labeler_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Shared tanh hidden layer feeding a label head and a POS head.
#[derive(Clone, Debug)]
pub struct LabelerHead {
    pub shared_hidden: DenseLayer,
    pub label_output: DenseLayer,
    pub pos_output: DenseLayer,
}

impl LabelerHead {
    pub fn forward(&self, g: &mut Graph, dependent: Var, governor: Var) -> Result<(Var, Var)> {
        let x = g.concat(&[dependent, governor]);
        let hidden = self.shared_hidden.forward(g, x)?;
        let labels = self.label_output.forward(g, hidden)?;
        let pos = self.pos_output.forward(g, hidden)?;
        Ok((labels, pos))
    }
}

/// Values computed for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSentence {
    pub embeddings: Vec<Tensor>,
    pub context_vectors: Vec<Tensor>,
    pub latent_heads: Vec<Tensor>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.context_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.context_vectors.is_empty()
    }
}

/// Tape handles for one sentence's forward pass.
#[derive(Clone, Debug)]
pub struct SentenceVars {
    pub embeddings: Vec<Var>,
    pub context: Vec<Var>,
    pub heads: Vec<Var>,
}

/// Governor slot of a labeler query.
#[derive(Clone, Copy, Debug)]
pub enum Governor<'a> {
    Root,
    Token(&'a [f64]),
}

#[derive(Clone, Debug)]
pub struct LhrModel {
    pub config: ModelConfig,
    pub vocab: Vocabularies,
    pub store: ParamStore,
    pub token_encoder: TokenEncoder,
    pub context_encoder: BiEncoder,
    pub heads_encoder: BiEncoder,
    pub head_reducer: DenseLayer,
    pub root_vector: ParamId,
    pub labeler: LabelerHead,
}

impl LhrModel {
    /// Builds a freshly initialized model. Initialization is a pure
    /// function of `config` (including its seed) and `vocab`.
    pub fn new(config: ModelConfig, vocab: Vocabularies) -> Result<Self> {
        config.validate()?;
        if vocab.labels.is_empty() || vocab.pos_tags.is_empty() {
            return Err(Error::Config(
                "the training data has no labels or POS tags".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let token_encoder = TokenEncoder::new(&mut store, &config.encoder, &vocab, &mut rng)?;
        let c_dim = config.context_dim();
        let context_encoder = BiEncoder::new(
            &mut store,
            "context_encoder",
            token_encoder.output_dim(),
            config.context_hidden,
            &mut rng,
        );
        let heads_encoder = BiEncoder::new(
            &mut store,
            "heads_encoder",
            c_dim,
            config.heads_hidden,
            &mut rng,
        );
        let head_reducer = DenseLayer::new(
            &mut store,
            "head_reducer",
            2 * config.heads_hidden,
            c_dim,
            Activation::Tanh,
            &mut rng,
        );
        let root_vector = store.add("root_vector", uniform(&mut rng, &[c_dim], 0.05));
        let out_activation = match config.labeler_loss {
            LabelerLoss::Margin => Activation::Identity,
            LabelerLoss::CrossEntropy => Activation::Softmax,
        };
        let labeler = LabelerHead {
            shared_hidden: DenseLayer::new(
                &mut store,
                "labeler.hidden",
                2 * c_dim,
                config.labeler_hidden,
                Activation::Tanh,
                &mut rng,
            ),
            label_output: DenseLayer::new(
                &mut store,
                "labeler.labels",
                config.labeler_hidden,
                vocab.labels.len(),
                out_activation,
                &mut rng,
            ),
            pos_output: DenseLayer::new(
                &mut store,
                "labeler.pos",
                config.labeler_hidden,
                vocab.pos_tags.len(),
                out_activation,
                &mut rng,
            ),
        };
        let model = LhrModel {
            config,
            vocab,
            store,
            token_encoder,
            context_encoder,
            heads_encoder,
            head_reducer,
            root_vector,
            labeler,
        };
        debug_assert_eq!(
            model.store.get(model.root_vector).value.len(),
            model.context_dim()
        );
        debug_assert_eq!(model.head_reducer.output_size(), model.context_dim());
        Ok(model)
    }

    pub fn context_dim(&self) -> usize {
        self.config.context_dim()
    }

    pub fn root_vector(&self) -> &[f64] {
        self.store.get(self.root_vector).value.data()
    }

    /// Records the forward pass of one sentence on `g`.
    pub fn forward(
        &self,
        g: &mut Graph,
        sentence: &Sentence,
        dropout: DropoutRng<'_>,
    ) -> Result<SentenceVars> {
        if sentence.is_empty() {
            return Err(Error::InvalidInput(
                "cannot encode an empty sentence".into(),
            ));
        }
        let embeddings = self
            .token_encoder
            .encode_tokens(g, &self.vocab, sentence, dropout)?;
        let context = self.context_encoder.encode(g, &embeddings)?;
        let raw = self.heads_encoder.encode(g, &context)?;
        let heads = raw
            .into_iter()
            .map(|r| self.head_reducer.forward(g, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(SentenceVars {
            embeddings,
            context,
            heads,
        })
    }

    /// Inference-mode encoding (no dropout).
    pub fn encode_sentence(&self, sentence: &Sentence) -> Result<EncodedSentence> {
        let mut g = Graph::new(&self.store);
        let vars = self.forward(&mut g, sentence, None)?;
        let collect = |vs: &[Var]| {
            vs.iter()
                .map(|&v| Tensor::vector(g.value(v).to_vec()))
                .collect()
        };
        Ok(EncodedSentence {
            embeddings: collect(&vars.embeddings),
            context_vectors: collect(&vars.context),
            latent_heads: collect(&vars.heads),
        })
    }

    /// Label and POS scores for a dependent/governor pair.
    pub fn score_label_pos(
        &self,
        dependent_c: &[f64],
        governor: Governor<'_>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.context_dim();
        if dependent_c.len() != d {
            return Err(Error::Dimension(format!(
                "dependent vector has length {}, expected {d}",
                dependent_c.len()
            )));
        }
        let mut g = Graph::new(&self.store);
        let dep = g.input(dependent_c.to_vec());
        let gov = match governor {
            Governor::Root => g.param(self.root_vector),
            Governor::Token(c) => {
                if c.len() != d {
                    return Err(Error::Dimension(format!(
                        "governor vector has length {}, expected {d}",
                        c.len()
                    )));
                }
                g.input(c.to_vec())
            }
        };
        let (labels, pos) = self.labeler.forward(&mut g, dep, gov)?;
        Ok((g.value(labels).to_vec(), g.value(pos).to_vec()))
    }
}

/// Per-token concatenation `[c_i; h_i]`.
pub fn latent_structure(enc: &EncodedSentence) -> Vec<Tensor> {
    enc.context_vectors
        .iter()
        .zip(&enc.latent_heads)
        .map(|(c, h)| {
            let mut v = c.data().to_vec();
            v.extend_from_slice(h.data());
            Tensor::vector(v)
        })
        .collect()
}
