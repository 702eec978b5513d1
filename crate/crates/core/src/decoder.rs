//! From latent heads to a labeled dependency tree.
//!
//! The root token is the one whose latent head is most similar to the root
//! vector. Every other token takes as head the token whose context vector
//! is most similar to its latent head. Cycles are then broken one at a
//! time: the weakest arc of the cycle is dropped and its dependent is
//! reattached to the most similar token that does not close a new cycle.
//! Finally labels and POS tags are chosen jointly among pairs seen in
//! training. All argmaxes prefer the lowest index on ties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{EncodedSentence, Governor, LhrModel};
use crate::nn::cosine_similarity;
use crate::tree::{find_cycle, DependencyTree};
use crate::treebank::Sentence;
use crate::{Error, Result};

/// Similarities of latent heads to context vectors and to the root vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    sim: Vec<f64>,
    root_sim: Vec<f64>,
}

impl ScoreMatrix {
    /// `sim[i][j]` scores token `j` as head of token `i` (0-based); the
    /// diagonal is ignored.
    pub fn new(sim: Vec<Vec<f64>>, root_sim: Vec<f64>) -> Result<Self> {
        let n = root_sim.len();
        if sim.len() != n || sim.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("score matrix must be {n}×{n}")));
        }
        let mut flat: Vec<f64> = sim.into_iter().flatten().collect();
        for i in 0..n {
            flat[i * n + i] = f64::NAN;
        }
        Ok(ScoreMatrix {
            n,
            sim: flat,
            root_sim,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Score of 1-based token `head` as governor of 1-based token `dep`.
    pub fn sim(&self, dep: usize, head: usize) -> f64 {
        self.sim[(dep - 1) * self.n + (head - 1)]
    }

    pub fn root_sim(&self, dep: usize) -> f64 {
        self.root_sim[dep - 1]
    }

    /// Score of an arc, with head 0 meaning the root.
    pub fn arc(&self, dep: usize, head: usize) -> f64 {
        if head == 0 {
            self.root_sim(dep)
        } else {
            self.sim(dep, head)
        }
    }
}

pub fn build_scores(enc: &EncodedSentence, root_vector: &[f64]) -> ScoreMatrix {
    let n = enc.len();
    let mut sim = vec![f64::NAN; n * n];
    for (i, h) in enc.latent_heads.iter().enumerate() {
        for (j, c) in enc.context_vectors.iter().enumerate() {
            if i != j {
                sim[i * n + j] = cosine_similarity(h.data(), c.data());
            }
        }
    }
    let root_sim = enc
        .latent_heads
        .iter()
        .map(|h| cosine_similarity(h.data(), root_vector))
        .collect();
    ScoreMatrix { n, sim, root_sim }
}

/// 1-based token most similar to the root vector.
pub fn select_root(scores: &ScoreMatrix) -> usize {
    let mut best = 1;
    for i in 2..=scores.len() {
        if scores.root_sim(i) > scores.root_sim(best) {
            best = i;
        }
    }
    best
}

/// Greedy head assignment; may contain cycles.
pub fn assign_heads(scores: &ScoreMatrix, root_token: usize) -> DependencyTree {
    let n = scores.len();
    let mut heads = vec![0; n];
    let mut arc_scores = vec![0.0; n];
    for dep in 1..=n {
        if dep == root_token {
            heads[dep - 1] = 0;
            arc_scores[dep - 1] = scores.root_sim(dep);
            continue;
        }
        let mut best: Option<usize> = None;
        for head in (1..=n).filter(|&h| h != dep) {
            if best.is_none_or(|b| scores.sim(dep, head) > scores.sim(dep, b)) {
                best = Some(head);
            }
        }
        let head = best.expect("n >= 2 when a non-root token exists");
        heads[dep - 1] = head;
        arc_scores[dep - 1] = scores.sim(dep, head);
    }
    DependencyTree {
        heads,
        labels: vec![String::new(); n],
        pos: vec![String::new(); n],
        arc_scores,
        repairs: 0,
    }
}

/// Whether `node` is reachable from `ancestor` by following heads down,
/// i.e. `ancestor` lies on the head chain of `node`.
fn has_ancestor(heads: &[usize], node: usize, ancestor: usize) -> bool {
    let mut v = node;
    for _ in 0..=heads.len() {
        if v == ancestor {
            return true;
        }
        if v == 0 {
            return false;
        }
        v = heads[v - 1];
    }
    false
}

/// Breaks every cycle of `tree`. The root attachment is never changed and
/// no token other than the root token is attached to 0.
pub fn repair_cycles(mut tree: DependencyTree, scores: &ScoreMatrix) -> DependencyTree {
    let n = tree.len();
    let root_token = tree.root();
    while let Some(cycle) = find_cycle(&tree.heads) {
        // weakest arc, lowest dependent on ties
        let mut weakest = cycle[0];
        for &d in &cycle {
            let better = tree.arc_scores[d - 1] < tree.arc_scores[weakest - 1]
                || (tree.arc_scores[d - 1] == tree.arc_scores[weakest - 1] && d < weakest);
            if better {
                weakest = d;
            }
        }
        let dep = weakest;
        let mut best: Option<usize> = None;
        for cand in (1..=n).filter(|&c| c != dep) {
            // dep's own subtree would close a cycle
            if has_ancestor(&tree.heads, cand, dep) {
                continue;
            }
            if best.is_none_or(|b| scores.sim(dep, cand) > scores.sim(dep, b)) {
                best = Some(cand);
            }
        }
        let new_head = match (best, root_token) {
            (Some(h), _) => h,
            (None, Some(r)) if r != dep => r,
            // unreachable for well-formed input: the root token is never on a cycle
            _ => break,
        };
        tree.heads[dep - 1] = new_head;
        tree.arc_scores[dep - 1] = scores.sim(dep, new_head);
        tree.repairs += 1;
    }
    tree
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOptions {
    /// Output the labeler's POS tags instead of the input tags.
    pub pos_correction: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            pos_correction: true,
        }
    }
}

/// Chooses among `seen_pairs` the `(label, pos)` pair maximizing
/// `label_scores[l] + pos_scores[p]`.
pub fn best_seen_pair(
    label_scores: &[f64],
    pos_scores: &[f64],
    seen_pairs: &[(usize, usize)],
) -> Result<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for &(l, p) in seen_pairs {
        let s = label_scores[l] + pos_scores[p];
        if best.is_none_or(|(_, b)| s > b) {
            best = Some(((l, p), s));
        }
    }
    best.map(|(pair, _)| pair)
        .ok_or_else(|| Error::Config("no label/POS pairs were seen in training".into()))
}

pub fn assign_labels_pos(
    model: &LhrModel,
    enc: &EncodedSentence,
    sentence: &Sentence,
    mut tree: DependencyTree,
    opts: DecodeOptions,
) -> Result<DependencyTree> {
    let seen = &model.vocab.seen_pairs;
    if seen.is_empty() {
        return Err(Error::Config(
            "no label/POS pairs were seen in training".into(),
        ));
    }
    for i in 0..tree.len() {
        let dep = enc.context_vectors[i].data();
        let governor = match tree.heads[i] {
            0 => Governor::Root,
            h => Governor::Token(enc.context_vectors[h - 1].data()),
        };
        let (label_scores, pos_scores) = model.score_label_pos(dep, governor)?;
        let (l, p) = best_seen_pair(&label_scores, &pos_scores, seen)?;
        tree.labels[i] = model.vocab.labels[l].clone();
        tree.pos[i] = if opts.pos_correction {
            model.vocab.pos_tags[p].clone()
        } else {
            sentence.tokens[i].input_pos().to_owned()
        };
    }
    Ok(tree)
}

/// Decodes the unlabeled tree of an encoded sentence.
pub fn decode_heads(enc: &EncodedSentence, root_vector: &[f64]) -> DependencyTree {
    let scores = build_scores(enc, root_vector);
    let root = select_root(&scores);
    let tree = assign_heads(&scores, root);
    repair_cycles(tree, &scores)
}

pub fn parse(model: &LhrModel, sentence: &Sentence, opts: DecodeOptions) -> Result<DependencyTree> {
    let enc = model.encode_sentence(sentence)?;
    let tree = decode_heads(&enc, model.root_vector());
    assign_labels_pos(model, &enc, sentence, tree, opts)
}

/// Parses sentences in parallel; output order follows input order.
pub fn parse_all(
    model: &LhrModel,
    sentences: &[Sentence],
    opts: DecodeOptions,
) -> Result<Vec<DependencyTree>> {
    sentences
        .par_iter()
        .map(|s| parse(model, s, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{dog_sentence, small_model};
    use crate::nn::Tensor;
    use crate::tree::{is_projective, validate_heads};

    fn scores(sim: &[&[f64]], root: &[f64]) -> ScoreMatrix {
        ScoreMatrix::new(sim.iter().map(|r| r.to_vec()).collect(), root.to_vec()).unwrap()
    }

    #[test]
    fn select_root_examples() {
        let s = scores(&[&[0.0; 3], &[0.0; 3], &[0.0; 3]], &[0.1, 0.9, 0.3]);
        assert_eq!(select_root(&s), 2);
        let s = scores(&[&[0.0]], &[-0.4]);
        assert_eq!(select_root(&s), 1);
        let s = scores(&[&[0.0; 2], &[0.0; 2]], &[0.5, 0.5]);
        assert_eq!(select_root(&s), 1);
    }

    #[test]
    fn two_tokens_forced() {
        let s = scores(&[&[0.0, -0.9], &[-0.9, 0.0]], &[0.8, 0.1]);
        assert_eq!(assign_heads(&s, 1).heads, vec![0, 1]);
    }

    #[test]
    fn prefer_first_token() {
        let s = scores(
            &[&[0.0, 0.1, 0.2], &[0.9, 0.0, 0.3], &[0.8, 0.1, 0.0]],
            &[0.9, 0.0, 0.0],
        );
        let tree = assign_heads(&s, 1);
        assert_eq!(tree.heads, vec![0, 1, 1]);
        assert_eq!(repair_cycles(tree.clone(), &s), tree);
    }

    #[test]
    fn two_cycle_repaired() {
        // 2 -> 3 (0.9) and 3 -> 2 (0.7); token 3's second choice is token 1
        let s = scores(
            &[&[0.0, 0.1, 0.2], &[0.3, 0.0, 0.9], &[0.5, 0.7, 0.0]],
            &[0.9, 0.0, 0.0],
        );
        let tree = assign_heads(&s, 1);
        assert_eq!(tree.heads, vec![0, 3, 2]);
        assert_eq!(find_cycle(&tree.heads), Some(vec![2, 3]));
        let fixed = repair_cycles(tree, &s);
        assert_eq!(fixed.heads, vec![0, 3, 1]);
        assert_eq!(fixed.repairs, 1);
        assert_eq!(fixed.arc_scores[2], 0.5);
        assert!(validate_heads(&fixed.heads).is_ok());
    }

    #[test]
    fn crossing_arcs_decode() {
        // gold-like tree 1->3, 2->4, 3 root, 4->3: arcs (1,3) and (2,4) cross
        let s = scores(
            &[
                &[0.0, 0.1, 0.9, 0.1],
                &[0.1, 0.0, 0.1, 0.9],
                &[0.1, 0.1, 0.0, 0.1],
                &[0.1, 0.1, 0.9, 0.0],
            ],
            &[0.0, 0.0, 1.0, 0.0],
        );
        let root = select_root(&s);
        let tree = repair_cycles(assign_heads(&s, root), &s);
        assert_eq!(tree.heads, vec![3, 4, 0, 3]);
        assert!(!is_projective(&tree.heads));
        assert!(tree.is_well_formed());
    }

    #[test]
    fn scores_are_asymmetric() {
        let enc = EncodedSentence {
            embeddings: vec![],
            context_vectors: vec![
                Tensor::vector(vec![1.0, 0.0]),
                Tensor::vector(vec![0.0, 1.0]),
            ],
            latent_heads: vec![
                Tensor::vector(vec![0.0, 1.0]),
                Tensor::vector(vec![1.0, 1.0]),
            ],
        };
        let s = build_scores(&enc, &[1.0, 0.0]);
        assert_eq!(s.sim(1, 2), 1.0);
        assert!((s.sim(2, 1) - 0.5f64.sqrt()).abs() < 1e-12);
        assert_ne!(s.sim(1, 2), s.sim(2, 1));
        assert_eq!(s.root_sim(1), 0.0);
    }

    #[test]
    fn seen_pair_selection() {
        // labels A=0, B=1; pos X=0, Y=1
        let pair = best_seen_pair(&[0.9, 0.6], &[0.1, 0.5], &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(pair, (1, 1));
        // unconstrained best would be (0, 1), unseen
        let pair = best_seen_pair(&[0.9, 0.6], &[0.1, 0.5], &[(0, 0), (1, 0)]).unwrap();
        assert_eq!(pair, (0, 0));
        assert!(matches!(
            best_seen_pair(&[1.0], &[1.0], &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn singleton_seen_pair_labels_everything() {
        let mut model = small_model(5);
        let root = model.vocab.label_index("root").unwrap();
        let verb = model.vocab.pos_index("VERB").unwrap();
        model.vocab.seen_pairs = vec![(root, verb)];
        let tree = parse(&model, &dog_sentence(), DecodeOptions::default()).unwrap();
        assert!(tree.labels.iter().all(|l| l == "root"));
        assert!(tree.pos.iter().all(|p| p == "VERB"));
        model.vocab.seen_pairs.clear();
        assert!(matches!(
            parse(&model, &dog_sentence(), DecodeOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn parse_contract() {
        let model = small_model(6);
        let tree = parse(&model, &dog_sentence(), DecodeOptions::default()).unwrap();
        assert!(tree.is_well_formed());
        assert_eq!(tree.len(), 5);
        let one = Sentence::new(vec![crate::treebank::Token::new(
            1, "dog", "NOUN", 0, "root",
        )]);
        assert_eq!(
            parse(&model, &one, DecodeOptions::default()).unwrap().heads,
            vec![0]
        );
    }

    #[test]
    fn pos_correction_off_keeps_input_tags() {
        let model = small_model(7);
        let tree = parse(
            &model,
            &dog_sentence(),
            DecodeOptions {
                pos_correction: false,
            },
        )
        .unwrap();
        let input: Vec<_> = dog_sentence()
            .tokens
            .iter()
            .map(|t| t.input_pos().to_owned())
            .collect();
        assert_eq!(tree.pos, input);
    }
}
