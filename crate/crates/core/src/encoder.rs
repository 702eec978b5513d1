//! Dense token representations: word embeddings concatenated with either
//! POS embeddings or a character-level BiLSTM summary.

use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::nn::{uniform, Activation, BiEncoder, DenseLayer, Graph, ParamId, ParamStore, Var};
use crate::treebank::Sentence;
use crate::vocab::{Vocab, Vocabularies};
use crate::{Error, Result};

const EMBEDDING_INIT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderMode {
    WordPos,
    WordChar,
}

impl FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word+pos" | "word-pos" | "wordpos" => Ok(EncoderMode::WordPos),
            "word+char" | "word-char" | "wordchar" => Ok(EncoderMode::WordChar),
            other => Err(Error::Config(format!("unknown encoder mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub mode: EncoderMode,
    pub word_dim: usize,
    /// Width of the POS embedding, or of the projected character
    /// representation in word+char mode.
    pub pos_dim: usize,
    /// Word dropout coefficient.
    pub alpha: f64,
    pub char_dim: usize,
    /// Character BiLSTM hidden size per direction.
    pub char_hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            mode: EncoderMode::WordPos,
            word_dim: 150,
            pos_dim: 50,
            alpha: 0.25,
            char_dim: 50,
            char_hidden: 50,
        }
    }
}

impl EncoderConfig {
    pub fn output_dim(&self) -> usize {
        self.word_dim + self.pos_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_dim == 0 || self.pos_dim == 0 || self.char_dim == 0 || self.char_hidden == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "invalid word dropout alpha {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Probability of replacing a word seen `word_count` times in training by
/// the unknown vector: `alpha / (count + alpha)`.
pub fn drop_probability(word_count: usize, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return if word_count == 0 { 1.0 } else { 0.0 };
    }
    alpha / (word_count as f64 + alpha)
}

/// Lookup table of trainable vectors.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub vectors: ParamId,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        rows: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let vectors = store.add_row_sparse(name, uniform(rng, &[rows, dim], EMBEDDING_INIT));
        EmbeddingTable { vectors, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lookup(&self, g: &mut Graph, row: usize) -> Result<Var> {
        g.row(self.vectors, row)
    }
}

/// Character BiLSTM whose final states are projected to a fixed width.
#[derive(Clone, Debug)]
pub struct CharEncoder {
    pub chars: EmbeddingTable,
    pub birnn: BiEncoder,
    pub projection: DenseLayer,
}

impl CharEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &EncoderConfig,
        num_chars: usize,
        rng: &mut R,
    ) -> Self {
        let chars = EmbeddingTable::new(store, "token_encoder.chars", num_chars, cfg.char_dim, rng);
        let birnn = BiEncoder::new(
            store,
            "token_encoder.char_encoder",
            cfg.char_dim,
            cfg.char_hidden,
            rng,
        );
        let projection = DenseLayer::new(
            store,
            "token_encoder.char_projection",
            2 * cfg.char_hidden,
            cfg.pos_dim,
            Activation::Tanh,
            rng,
        );
        CharEncoder {
            chars,
            birnn,
            projection,
        }
    }

    /// Representation of one word; the zero vector for an empty string.
    pub fn encode_chars(&self, g: &mut Graph, vocab: &Vocab, word: &str) -> Result<Var> {
        if word.is_empty() {
            return Ok(g.input(vec![0.0; self.projection.output_size()]));
        }
        let mut xs = Vec::new();
        for c in word.chars() {
            let row = vocab.lookup(&c.to_string());
            xs.push(self.chars.lookup(g, row)?);
        }
        let (fwd, rev) = self.birnn.directional_states(g, &xs)?;
        let last = g.concat(&[fwd[fwd.len() - 1], rev[0]]);
        self.projection.forward(g, last)
    }
}

/// Word dropout source used while training.
pub type DropoutRng<'r> = Option<&'r mut dyn RngCore>;

#[derive(Clone, Debug)]
pub struct TokenEncoder {
    pub config: EncoderConfig,
    pub words: EmbeddingTable,
    pub pos: Option<EmbeddingTable>,
    pub chars: Option<CharEncoder>,
}

impl TokenEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        config: &EncoderConfig,
        vocab: &Vocabularies,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let words = EmbeddingTable::new(
            store,
            "token_encoder.words",
            vocab.words.len(),
            config.word_dim,
            rng,
        );
        let (pos, chars) = match config.mode {
            EncoderMode::WordPos => (
                Some(EmbeddingTable::new(
                    store,
                    "token_encoder.pos",
                    vocab.input_pos.len(),
                    config.pos_dim,
                    rng,
                )),
                None,
            ),
            EncoderMode::WordChar => (
                None,
                Some(CharEncoder::new(store, config, vocab.chars.len(), rng)),
            ),
        };
        Ok(TokenEncoder {
            config: config.clone(),
            words,
            pos,
            chars,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    /// Encodes every token of `sentence`. When `dropout` is given, each word
    /// is independently replaced by the unknown vector with
    /// [`drop_probability`]; the POS or character part is never dropped.
    pub fn encode_tokens(
        &self,
        g: &mut Graph,
        vocab: &Vocabularies,
        sentence: &Sentence,
        mut dropout: DropoutRng<'_>,
    ) -> Result<Vec<Var>> {
        if vocab.words.len() != g.store().get(self.words.vectors).value.rows() {
            return Err(Error::Usage(
                "vocabulary does not match the embedding table".into(),
            ));
        }
        let mut out = Vec::with_capacity(sentence.len());
        for token in &sentence.tokens {
            let lowered = token.form.to_lowercase();
            let mut row = vocab.words.lookup(&lowered);
            if let Some(rng) = dropout.as_deref_mut() {
                let p = drop_probability(vocab.words.count(&lowered), self.config.alpha);
                if rng.gen::<f64>() < p {
                    row = Vocab::UNKNOWN_INDEX;
                }
            }
            let word = self.words.lookup(g, row)?;
            let second = match (&self.pos, &self.chars) {
                (Some(pos), _) => pos.lookup(g, vocab.input_pos.lookup(token.input_pos()))?,
                (None, Some(chars)) => chars.encode_chars(g, &vocab.chars, &token.form)?,
                (None, None) => unreachable!("encoder has neither POS nor character part"),
            };
            out.push(g.concat(&[word, second]));
        }
        Ok(out)
    }
}
