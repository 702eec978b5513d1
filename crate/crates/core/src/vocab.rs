use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::treebank::Treebank;

pub const UNKNOWN: &str = "<unk>";

/// Symbol table with training counts. Index 0 is the unknown symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    symbols: Vec<String>,
    counts: Vec<usize>,
    min_count: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    symbols: Vec<String>,
    counts: Vec<usize>,
    min_count: usize,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let index = r
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocab {
            symbols: r.symbols,
            counts: r.counts,
            min_count: r.min_count,
            index,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            symbols: v.symbols,
            counts: v.counts,
            min_count: v.min_count,
        }
    }
}

impl Vocab {
    pub const UNKNOWN_INDEX: usize = 0;

    /// Builds a table from symbols in first-seen order.
    pub fn from_symbols<'a>(symbols: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut vocab = Vocab {
            symbols: vec![UNKNOWN.to_owned()],
            counts: vec![0],
            min_count,
            index: HashMap::new(),
        };
        vocab.index.insert(UNKNOWN.to_owned(), 0);
        for s in symbols {
            let next = vocab.symbols.len();
            let idx = *vocab.index.entry(s.to_owned()).or_insert(next);
            if idx == next {
                vocab.symbols.push(s.to_owned());
                vocab.counts.push(0);
            }
            vocab.counts[idx] += 1;
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }

    /// Row index of `symbol`, or the unknown index when it is absent or
    /// occurred fewer than `min_count` times in training.
    pub fn lookup(&self, symbol: &str) -> usize {
        match self.index.get(symbol) {
            Some(&i) if self.counts[i] >= self.min_count => i,
            _ => Self::UNKNOWN_INDEX,
        }
    }

    /// Training count of a symbol, 0 if unseen.
    pub fn count(&self, symbol: &str) -> usize {
        self.index.get(symbol).map_or(0, |&i| self.counts[i])
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index.contains_key(symbol)
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }
}

/// All symbol tables a model needs, built from the training split only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    /// Lowercased word forms.
    pub words: Vocab,
    /// Input POS tags (the external tagger's column).
    pub input_pos: Vocab,
    pub chars: Vocab,
    /// Output classes of the labeler.
    pub labels: Vec<String>,
    /// Gold coarse POS classes of the labeler.
    pub pos_tags: Vec<String>,
    /// `(label index, POS index)` pairs observed in training, sorted.
    pub seen_pairs: Vec<(usize, usize)>,
}

impl Vocabularies {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn pos_index(&self, pos: &str) -> Option<usize> {
        self.pos_tags.iter().position(|p| p == pos)
    }
}

pub fn build_vocabularies(tb: &Treebank, min_count: usize) -> Vocabularies {
    let tokens = || tb.sentences.iter().flat_map(|s| &s.tokens);
    let lowered: Vec<String> = tokens().map(|t| t.form.to_lowercase()).collect();
    let words = Vocab::from_symbols(lowered.iter().map(String::as_str), min_count);
    let input_pos = Vocab::from_symbols(tokens().map(|t| t.input_pos()), 1);
    let chars_owned: Vec<String> = tokens()
        .flat_map(|t| t.form.chars())
        .map(|c| c.to_string())
        .collect();
    let chars = Vocab::from_symbols(chars_owned.iter().map(String::as_str), 1);
    let labels = tb.label_set.clone();
    let pos_tags = tb.pos_set.clone();
    let seen: BTreeSet<(usize, usize)> = tb
        .seen_label_pos_pairs
        .iter()
        .map(|(l, p)| {
            (
                labels
                    .iter()
                    .position(|x| x == l)
                    .expect("label in label_set"),
                pos_tags
                    .iter()
                    .position(|x| x == p)
                    .expect("pos in pos_set"),
            )
        })
        .collect();
    Vocabularies {
        words,
        input_pos,
        chars,
        labels,
        pos_tags,
        seen_pairs: seen.into_iter().collect(),
    }
}
