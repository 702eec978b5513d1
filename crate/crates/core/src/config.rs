//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `encoder.mode` | `word+pos` or `word+char` |
//! | `encoder.word_dim`, `encoder.pos_dim` | embedding widths |
//! | `encoder.alpha` | word dropout coefficient |
//! | `encoder.char_dim`, `encoder.char_hidden` | character encoder sizes |
//! | `model.context_hidden`, `model.heads_hidden` | BiLSTM sizes per direction |
//! | `model.labeler_hidden` | labeler hidden width |
//! | `model.labeler_loss` | `margin` or `xent` |
//! | `train.epochs`, `train.learning_rate`, `train.beta1`, `train.beta2`, `train.epsilon` | optimization |
//! | `train.loss` | `mse` or `mae` |
//! | `train.labeler_weight` | weight of the labeler loss |
//! | `train.skip_punct_heads` | `true`/`false` |
//! | `train.root_target` | `root_vector` or `self` |
//! | `train.target_gradient` | `true`/`false` |
//! | `train.strict` | `true`/`false` |
//! | `train.dev_eval_every` | epochs between dev evaluations |
//! | `train.min_count` | minimum word count for the vocabulary |
//! | `seed` | seeds model initialization and training |
//! | `decode.pos_correction` | `on`/`off` |
//! | `io.format` | `conllu` or `conllx` |

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::model::ModelConfig;
use crate::trainer::TrainConfig;
use crate::treebank::Format;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub format: Format,
    pub min_count: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            format: Format::ConllU,
            min_count: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

pub fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value `{value}` for `{key}`"
        ))),
    }
}

impl Settings {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "encoder.mode" => m.encoder.mode = value.parse()?,
            "encoder.word_dim" => m.encoder.word_dim = parse(key, value)?,
            "encoder.pos_dim" => m.encoder.pos_dim = parse(key, value)?,
            "encoder.alpha" => m.encoder.alpha = parse(key, value)?,
            "encoder.char_dim" => m.encoder.char_dim = parse(key, value)?,
            "encoder.char_hidden" => m.encoder.char_hidden = parse(key, value)?,
            "model.context_hidden" => m.context_hidden = parse(key, value)?,
            "model.heads_hidden" => m.heads_hidden = parse(key, value)?,
            "model.labeler_hidden" => m.labeler_hidden = parse(key, value)?,
            "model.labeler_loss" => m.labeler_loss = value.parse()?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.learning_rate" => t.learning_rate = parse(key, value)?,
            "train.beta1" => t.beta1 = parse(key, value)?,
            "train.beta2" => t.beta2 = parse(key, value)?,
            "train.epsilon" => t.epsilon = parse(key, value)?,
            "train.loss" => t.head_loss = value.parse()?,
            "train.labeler_weight" => t.labeler_weight = parse(key, value)?,
            "train.skip_punct_heads" => t.skip_punctuation_heads = parse_switch(key, value)?,
            "train.root_target" => t.root_target = value.parse()?,
            "train.target_gradient" => t.target_gradient = parse_switch(key, value)?,
            "train.strict" => t.strict = parse_switch(key, value)?,
            "train.dev_eval_every" => t.dev_eval_every = parse(key, value)?,
            "train.min_count" => self.min_count = parse(key, value)?,
            "seed" => {
                let seed = parse(key, value)?;
                m.seed = seed;
                t.seed = seed;
            }
            "decode.pos_correction" => t.decode.pos_correction = parse_switch(key, value)?,
            "io.format" => self.format = value.parse()?,
            other => {
                return Err(Error::Config(format!(
                    "unknown configuration key `{other}`"
                )))
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_text(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderMode;
    use crate::trainer::HeadLoss;

    #[test]
    fn default_hyperparameters() {
        let s = Settings::default();
        assert_eq!(s.model.encoder.word_dim, 150);
        assert_eq!(s.model.encoder.pos_dim, 50);
        assert_eq!(s.model.encoder.alpha, 0.25);
        assert_eq!(s.model.labeler_hidden, 100);
        assert_eq!(s.train.learning_rate, 0.001);
        assert_eq!((s.train.beta1, s.train.beta2), (0.9, 0.999));
    }

    #[test]
    fn parses_file_text() {
        let mut s = Settings::default();
        s.apply_text("# comment\nencoder.mode = word+char\ntrain.loss=mae\n\nseed = 9\ndecode.pos_correction = off\n")
            .unwrap();
        assert_eq!(s.model.encoder.mode, EncoderMode::WordChar);
        assert_eq!(s.train.head_loss, HeadLoss::Mae);
        assert_eq!((s.model.seed, s.train.seed), (9, 9));
        assert!(!s.train.decode.pos_correction);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut s = Settings::default();
        assert!(s.apply("nope", "1").is_err());
        assert!(s.apply("train.epochs", "many").is_err());
        assert!(s.apply_text("just words").is_err());
    }
}
