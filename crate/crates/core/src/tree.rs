use serde::{Deserialize, Serialize};

use crate::treebank::Sentence;

/// A decoded (or gold) analysis of one sentence.
///
/// `heads[i]` is the head of token `i + 1`; 0 is the virtual root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyTree {
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
    pub pos: Vec<String>,
    /// Similarity of each token's latent head to its chosen governor.
    pub arc_scores: Vec<f64>,
    /// Number of cycles broken while decoding.
    pub repairs: usize,
}

impl DependencyTree {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Tree built from the gold columns of a sentence. Missing heads become
    /// root attachments.
    pub fn from_gold(sentence: &Sentence) -> Self {
        let n = sentence.len();
        DependencyTree {
            heads: sentence
                .tokens
                .iter()
                .map(|t| t.gold_head.unwrap_or(0))
                .collect(),
            labels: sentence
                .tokens
                .iter()
                .map(|t| t.gold_label.clone())
                .collect(),
            pos: sentence.tokens.iter().map(|t| t.gold_pos.clone()).collect(),
            arc_scores: vec![1.0; n],
            repairs: 0,
        }
    }

    /// 1-based index of the first token attached to the root.
    pub fn root(&self) -> Option<usize> {
        self.heads.iter().position(|&h| h == 0).map(|i| i + 1)
    }

    pub fn validate(&self) -> Result<(), String> {
        validate_heads(&self.heads)
    }

    pub fn is_well_formed(&self) -> bool {
        self.validate().is_ok()
    }
}

/// Checks that `heads` describes a single-rooted tree over tokens `1..=n`.
pub fn validate_heads(heads: &[usize]) -> Result<(), String> {
    let n = heads.len();
    if n == 0 {
        return Err("empty tree".into());
    }
    let roots = heads.iter().filter(|&&h| h == 0).count();
    if roots != 1 {
        return Err(format!("expected exactly one root, found {roots}"));
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(format!("token {} has out-of-range head {h}", i + 1));
        }
        if h == i + 1 {
            return Err(format!("token {} is its own head", i + 1));
        }
    }
    if let Some(cycle) = find_cycle(heads) {
        return Err(format!("cycle through tokens {cycle:?}"));
    }
    Ok(())
}

/// The cycle containing the smallest token index that lies on any cycle,
/// as 1-based token indices in head-following order.
pub fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; n + 1];
    let mut best: Option<Vec<usize>> = None;
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while v != 0 && v <= n && state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if v != 0 && v <= n && state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).unwrap();
            let mut cycle = path[pos..].to_vec();
            let min_pos = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, &t)| t)
                .map(|(i, _)| i)
                .unwrap();
            cycle.rotate_left(min_pos);
            if best.as_ref().is_none_or(|b| cycle[0] < b[0]) {
                best = Some(cycle);
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    best
}

/// Whether two arcs drawn above the sentence cross.
pub fn is_projective(heads: &[usize]) -> bool {
    let arcs: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .filter(|(_, &h)| h != 0)
        .map(|(i, &h)| {
            let d = i + 1;
            (d.min(h), d.max(h))
        })
        .collect();
    for (a, &(l1, r1)) in arcs.iter().enumerate() {
        for &(l2, r2) in &arcs[a + 1..] {
            if (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1) {
                return false;
            }
        }
    }
    true
}
