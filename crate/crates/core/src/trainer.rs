//! Online training: one forward pass, one backward pass and one Adam step
//! per sentence.
//!
//! The objective of a sentence is the mean reconstruction loss between each
//! token's latent head and the context vector of its gold head (the root
//! vector for the top token), plus the mean labeler loss on gold arcs.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{parse_all, DecodeOptions};
use crate::encoder::DropoutRng;
use crate::eval::{evaluate, EvalResult};
use crate::model::{LabelerLoss, LhrModel};
use crate::nn::{Adam, Graph, ParamStore, Var};
use crate::treebank::{Sentence, Treebank};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadLoss {
    Mse,
    Mae,
}

impl FromStr for HeadLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(HeadLoss::Mse),
            "mae" => Ok(HeadLoss::Mae),
            other => Err(Error::Config(format!("unknown head loss `{other}`"))),
        }
    }
}

/// Reconstruction target of the token attached to the virtual root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootTarget {
    RootVector,
    /// The token's own context vector.
    SelfToken,
}

impl FromStr for RootTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root_vector" => Ok(RootTarget::RootVector),
            "self" => Ok(RootTarget::SelfToken),
            other => Err(Error::Config(format!("unknown root target `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub head_loss: HeadLoss,
    /// Weight of the labeler loss; 0 disables the labeler objective.
    pub labeler_weight: f64,
    /// Leave the latent heads of punctuation tokens unsupervised.
    pub skip_punctuation_heads: bool,
    pub root_target: RootTarget,
    /// Let the reconstruction loss back-propagate into its targets too.
    pub target_gradient: bool,
    /// Skip (with a warning) sentences whose gold heads are not a full tree.
    pub strict: bool,
    pub seed: u64,
    pub dev_eval_every: usize,
    pub decode: DecodeOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            head_loss: HeadLoss::Mse,
            labeler_weight: 1.0,
            skip_punctuation_heads: false,
            root_target: RootTarget::RootVector,
            target_gradient: false,
            strict: true,
            seed: 1,
            dev_eval_every: 1,
            decode: DecodeOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return Err(Error::Config(
                "learning rate and epsilon must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.labeler_weight.is_nan() || self.labeler_weight < 0.0 {
            return Err(Error::Config("labeler weight must be non-negative".into()));
        }
        if self.dev_eval_every == 0 {
            return Err(Error::Config("dev_eval_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Adam {
        Adam {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// The loss of one sentence, recorded on a tape.
#[derive(Clone, Debug)]
pub struct Objective {
    pub total: Var,
    pub head_loss: f64,
    pub label_loss: f64,
    /// Tokens contributing a reconstruction term.
    pub head_terms: usize,
    pub label_terms: usize,
    /// Reconstruction target of each token, `None` when skipped.
    pub targets: Vec<Option<Var>>,
}

/// Records the forward pass and loss of `sentence`. Returns `None` when no
/// token carries usable supervision.
pub fn build_objective(
    model: &LhrModel,
    g: &mut Graph,
    sentence: &Sentence,
    cfg: &TrainConfig,
    dropout: DropoutRng<'_>,
) -> Result<Option<Objective>> {
    let vars = model.forward(g, sentence, dropout)?;
    let mut head_terms = Vec::new();
    let mut label_terms = Vec::new();
    let mut targets = vec![None; sentence.len()];
    let root = g.param(model.root_vector);

    for (i, token) in sentence.tokens.iter().enumerate() {
        let Some(gold_head) = token.gold_head else {
            continue;
        };

        if !(cfg.skip_punctuation_heads && token.is_punct) {
            let target = match (gold_head, cfg.root_target) {
                (0, RootTarget::RootVector) => root,
                (0, RootTarget::SelfToken) => vars.context[i],
                (h, _) => vars.context[h - 1],
            };
            let target = if cfg.target_gradient {
                target
            } else {
                g.detach(target)
            };
            targets[i] = Some(target);
            let term = match cfg.head_loss {
                HeadLoss::Mse => g.mse(vars.heads[i], target)?,
                HeadLoss::Mae => g.mae(vars.heads[i], target)?,
            };
            head_terms.push(term);
        }

        if cfg.labeler_weight > 0.0 {
            let (Some(label), Some(pos)) = (
                model.vocab.label_index(&token.gold_label),
                model.vocab.pos_index(&token.gold_pos),
            ) else {
                continue;
            };
            let governor = if gold_head == 0 {
                root
            } else {
                vars.context[gold_head - 1]
            };
            let (label_scores, pos_scores) = model.labeler.forward(g, vars.context[i], governor)?;
            let (a, b) = match model.config.labeler_loss {
                LabelerLoss::Margin => (g.margin(label_scores, label)?, g.margin(pos_scores, pos)?),
                LabelerLoss::CrossEntropy => (g.nll(label_scores, label)?, g.nll(pos_scores, pos)?),
            };
            label_terms.push(g.sum(&[a, b])?);
        }
    }

    if head_terms.is_empty() && label_terms.is_empty() {
        return Ok(None);
    }
    let mut parts = Vec::new();
    let mut head_loss = 0.0;
    let mut label_loss = 0.0;
    if !head_terms.is_empty() {
        let h = g.mean(&head_terms)?;
        head_loss = g.scalar(h);
        parts.push(h);
    }
    if !label_terms.is_empty() {
        let l = g.mean(&label_terms)?;
        label_loss = g.scalar(l);
        parts.push(g.scale(l, cfg.labeler_weight));
    }
    let total = g.sum(&parts)?;
    Ok(Some(Objective {
        total,
        head_loss,
        label_loss,
        head_terms: head_terms.len(),
        label_terms: label_terms.len(),
        targets,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SentenceLoss {
    pub head_loss: f64,
    pub label_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_head_loss: f64,
    pub mean_label_loss: f64,
    pub trained_sentences: usize,
    pub skipped_sentences: usize,
    pub dev: Option<EvalResult>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best dev UAS).
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    /// Tab-separated table with a header row and one row per epoch.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "epoch\thead_loss\tlabel_loss\ttrained\tskipped\tdev_uas\tdev_las\tdev_pos\tdev_cycle_free\n",
        );
        for e in &self.epochs {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.epoch,
                e.mean_head_loss,
                e.mean_label_loss,
                e.trained_sentences,
                e.skipped_sentences
            );
            match &e.dev {
                Some(d) => {
                    let _ = writeln!(
                        out,
                        "\t{}\t{}\t{}\t{}",
                        d.uas,
                        d.las,
                        d.pos_accuracy,
                        d.cycle_free_rate.unwrap_or(f64::NAN)
                    );
                }
                None => out.push_str("\t-\t-\t-\t-\n"),
            }
        }
        out
    }
}

pub struct Trainer {
    cfg: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Trainer {
            adam: cfg.optimizer(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// One update on one sentence. `Ok(None)` when the sentence was skipped.
    pub fn train_sentence(
        &mut self,
        model: &mut LhrModel,
        sentence: &Sentence,
    ) -> Result<Option<SentenceLoss>> {
        if sentence.is_empty() {
            return Ok(None);
        }
        if self.cfg.strict && !sentence.has_complete_tree() {
            log::warn!(
                "skipping a sentence of {} tokens without a complete gold tree",
                sentence.len()
            );
            return Ok(None);
        }
        let (grads, loss) = {
            let mut g = Graph::new(&model.store);
            let Some(obj) =
                build_objective(model, &mut g, sentence, &self.cfg, Some(&mut self.rng))?
            else {
                return Ok(None);
            };
            let grads = g.backward(obj.total)?;
            (
                grads,
                SentenceLoss {
                    head_loss: obj.head_loss,
                    label_loss: obj.label_loss,
                },
            )
        };
        model.store.accumulate(&grads);
        self.adam.step(&mut model.store)?;
        Ok(Some(loss))
    }

    /// Trains for the configured number of epochs, shuffling the training
    /// sentences each epoch. When `dev` is non-empty the parameters of the
    /// epoch with the best dev UAS are restored at the end.
    pub fn train(
        &mut self,
        model: &mut LhrModel,
        train: &Treebank,
        dev: &Treebank,
    ) -> Result<TrainReport> {
        if train.is_empty() {
            return Err(Error::InvalidInput("the training set is empty".into()));
        }
        let mut report = TrainReport::default();
        let mut best: Option<(f64, ParamStore)> = None;
        let mut order: Vec<usize> = (0..train.sentences.len()).collect();

        for epoch in 1..=self.cfg.epochs {
            order.shuffle(&mut self.rng);
            let (mut head, mut label, mut trained, mut skipped) = (0.0, 0.0, 0, 0);
            for &k in &order {
                match self.train_sentence(model, &train.sentences[k])? {
                    Some(l) => {
                        head += l.head_loss;
                        label += l.label_loss;
                        trained += 1;
                    }
                    None => skipped += 1,
                }
            }
            let denom = trained.max(1) as f64;
            let evaluate_now = epoch % self.cfg.dev_eval_every == 0 || epoch == self.cfg.epochs;
            let dev_result = if !dev.is_empty() && evaluate_now {
                let trees = parse_all(model, &dev.sentences, self.cfg.decode)?;
                Some(evaluate(dev, &trees)?)
            } else {
                None
            };
            if let Some(r) = &dev_result {
                if best.as_ref().is_none_or(|(uas, _)| r.uas > *uas) {
                    best = Some((r.uas, model.store.clone()));
                    report.best_epoch = Some(epoch);
                }
            }
            log::info!(
                "epoch {epoch}: head loss {:.6}, label loss {:.6}{}",
                head / denom,
                label / denom,
                dev_result
                    .as_ref()
                    .map(|r| format!(", dev UAS {:.2} LAS {:.2}", 100.0 * r.uas, 100.0 * r.las))
                    .unwrap_or_default()
            );
            report.epochs.push(EpochRecord {
                epoch,
                mean_head_loss: head / denom,
                mean_label_loss: label / denom,
                trained_sentences: trained,
                skipped_sentences: skipped,
                dev: dev_result,
            });
        }

        match best {
            Some((_, store)) => model.store.copy_values_from(&store)?,
            None => report.best_epoch = Some(self.cfg.epochs),
        }
        Ok(report)
    }
}
