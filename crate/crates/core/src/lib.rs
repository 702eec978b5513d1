//! Dependency parsing with latent heads.
//!
//! A bidirectional recurrent autoencoder maps each token's context vector
//! to an approximation of its head's context vector. Decoding picks, for
//! each token, the most similar context vector, with the top token chosen
//! first against a trainable root vector. A multi-task labeler assigns arc
//! labels and POS tags jointly.

pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod encoder;
mod error;
pub mod eval;
pub mod lss;
pub mod model;
pub mod nn;
pub mod trainer;
pub mod tree;
pub mod treebank;
pub mod vocab;

pub use decoder::{parse, parse_all, DecodeOptions, ScoreMatrix};
pub use encoder::{drop_probability, EncoderConfig, EncoderMode};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalResult};
pub use model::{latent_structure, EncodedSentence, LabelerLoss, LhrModel, ModelConfig};
pub use trainer::{HeadLoss, RootTarget, TrainConfig, TrainReport, Trainer};
pub use tree::DependencyTree;
pub use treebank::{read_conll, write_conll, Format, ReadOptions, Sentence, Token, Treebank};
pub use vocab::{build_vocabularies, Vocabularies};
