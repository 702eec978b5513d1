//! Attachment scores with punctuation excluded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tree::DependencyTree;
use crate::treebank::Treebank;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub uas: f64,
    pub las: f64,
    pub pos_accuracy: f64,
    /// Extension: fraction of sentences whose root token matches gold.
    pub root_accuracy: f64,
    pub scored_tokens: usize,
    pub sentences: usize,
    /// Extension: fraction of sentences decoded without cycle repair.
    /// Unknown when predictions were read back from a file.
    pub cycle_free_rate: Option<f64>,
}

/// Raw counts; sums of counts over disjoint sentence sets combine by addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub scored: usize,
    pub head: usize,
    pub labeled: usize,
    pub pos: usize,
    pub root_sentences: usize,
    pub root_correct: usize,
    pub sentences: usize,
    pub cycle_free: usize,
}

impl std::ops::Add for EvalCounts {
    type Output = EvalCounts;

    fn add(self, o: EvalCounts) -> EvalCounts {
        EvalCounts {
            scored: self.scored + o.scored,
            head: self.head + o.head,
            labeled: self.labeled + o.labeled,
            pos: self.pos + o.pos,
            root_sentences: self.root_sentences + o.root_sentences,
            root_correct: self.root_correct + o.root_correct,
            sentences: self.sentences + o.sentences,
            cycle_free: self.cycle_free + o.cycle_free,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn count(gold: &Treebank, predicted: &[DependencyTree]) -> Result<EvalCounts> {
    if gold.sentences.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold sentences but {} predictions",
            gold.sentences.len(),
            predicted.len()
        )));
    }
    let mut c = EvalCounts::default();
    for (k, (sentence, tree)) in gold.sentences.iter().zip(predicted).enumerate() {
        if sentence.len() != tree.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {}: {} gold tokens but {} predicted",
                k + 1,
                sentence.len(),
                tree.len()
            )));
        }
        c.sentences += 1;
        if tree.repairs == 0 {
            c.cycle_free += 1;
        }
        if let Some(gold_root) = sentence.tokens.iter().position(|t| t.gold_head == Some(0)) {
            c.root_sentences += 1;
            if tree.root() == Some(gold_root + 1) {
                c.root_correct += 1;
            }
        }
        for (i, t) in sentence.tokens.iter().enumerate() {
            let Some(gold_head) = t.gold_head else {
                continue;
            };
            if t.is_punct {
                continue;
            }
            c.scored += 1;
            if tree.heads[i] == gold_head {
                c.head += 1;
                if tree.labels[i] == t.gold_label {
                    c.labeled += 1;
                }
            }
            if tree.pos[i] == t.gold_pos {
                c.pos += 1;
            }
        }
    }
    Ok(c)
}

impl EvalResult {
    pub fn from_counts(c: &EvalCounts, know_repairs: bool) -> Self {
        EvalResult {
            uas: ratio(c.head, c.scored),
            las: ratio(c.labeled, c.scored),
            pos_accuracy: ratio(c.pos, c.scored),
            root_accuracy: ratio(c.root_correct, c.root_sentences),
            scored_tokens: c.scored,
            sentences: c.sentences,
            cycle_free_rate: know_repairs.then(|| ratio(c.cycle_free, c.sentences)),
        }
    }

    /// `key=value` lines, one metric per line.
    pub fn to_report(&self) -> String {
        let mut out = format!(
            "uas={}\nlas={}\npos_accuracy={}\nroot_accuracy={}\nscored_tokens={}\nsentences={}\n",
            self.uas,
            self.las,
            self.pos_accuracy,
            self.root_accuracy,
            self.scored_tokens,
            self.sentences
        );
        if let Some(r) = self.cycle_free_rate {
            out.push_str(&format!("cycle_free_rate={r}\n"));
        }
        out
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "UAS: {:.2}", 100.0 * self.uas)?;
        writeln!(f, "LAS: {:.2}", 100.0 * self.las)?;
        writeln!(f, "POS: {:.2}", 100.0 * self.pos_accuracy)?;
        writeln!(
            f,
            "scored tokens (punctuation excluded): {}",
            self.scored_tokens
        )?;
        writeln!(f, "[ext] root accuracy: {:.2}", 100.0 * self.root_accuracy)?;
        if let Some(r) = self.cycle_free_rate {
            writeln!(f, "[ext] cycle-free decodes: {:.2}", 100.0 * r)?;
        }
        Ok(())
    }
}

/// Scores decoder output; `repairs` of each tree feed the cycle-free rate.
pub fn evaluate(gold: &Treebank, predicted: &[DependencyTree]) -> Result<EvalResult> {
    Ok(EvalResult::from_counts(&count(gold, predicted)?, true))
}

/// Scores predictions read back from a file, where repair counts are lost.
pub fn evaluate_files(gold: &Treebank, predicted: &Treebank) -> Result<EvalResult> {
    let trees: Vec<DependencyTree> = predicted
        .sentences
        .iter()
        .map(DependencyTree::from_gold)
        .collect();
    Ok(EvalResult::from_counts(&count(gold, &trees)?, false))
}
