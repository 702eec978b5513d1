//! CoNLL-U / CoNLL-X treebanks.
//!
//! Both formats share the column positions this parser needs: form (1),
//! coarse POS (3), fine or external POS (4), head (6) and relation (7).
//! All ten raw columns are kept so that a sentence can be written back
//! unchanged apart from the predicted head, label and POS.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tree::{validate_heads, DependencyTree};
use crate::{Error, Result};

const COLUMNS: usize = 10;
const COL_ID: usize = 0;
const COL_FORM: usize = 1;
const COL_COARSE_POS: usize = 3;
const COL_FINE_POS: usize = 4;
const COL_HEAD: usize = 6;
const COL_LABEL: usize = 7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    #[default]
    ConllU,
    ConllX,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conllu" | "conll-u" => Ok(Format::ConllU),
            "conllx" | "conll-x" => Ok(Format::ConllX),
            other => Err(Error::Config(format!("unknown treebank format `{other}`"))),
        }
    }
}

/// Default punctuation POS tags (Penn Treebank convention).
pub fn default_punct_tags() -> Vec<String> {
    ["``", "''", ",", ".", ":"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[derive(Clone, Debug)]
pub struct ReadOptions {
    pub format: Format,
    /// Reject sentences whose gold heads do not form a single-rooted tree.
    pub strict: bool,
    /// Tokens with one of these POS tags, or with relation `punct`, are
    /// punctuation.
    pub punct_tags: Vec<String>,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            format: Format::ConllU,
            strict: false,
            punct_tags: default_punct_tags(),
        }
    }
}

impl ReadOptions {
    pub fn with_format(format: Format) -> Self {
        ReadOptions {
            format,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position.
    pub index: usize,
    pub form: String,
    /// Gold coarse POS (UPOS / CPOSTAG).
    pub gold_pos: String,
    /// Externally predicted POS (XPOS / POSTAG), if present.
    pub predicted_pos: Option<String>,
    /// 0 is the virtual root; `None` when unannotated.
    pub gold_head: Option<usize>,
    pub gold_label: String,
    pub is_punct: bool,
    columns: Vec<String>,
}

impl Token {
    /// Builds a token from its ten raw columns.
    pub fn from_columns(
        columns: Vec<String>,
        punct_tags: &[String],
    ) -> std::result::Result<Self, String> {
        if columns.len() != COLUMNS {
            return Err(format!(
                "expected {COLUMNS} columns, found {}",
                columns.len()
            ));
        }
        let index = columns[COL_ID]
            .parse::<usize>()
            .map_err(|_| format!("invalid token id `{}`", columns[COL_ID]))?;
        if index == 0 {
            return Err("token id 0 is reserved for the root".into());
        }
        let gold_head = match columns[COL_HEAD].as_str() {
            "_" => None,
            h => Some(
                h.parse::<usize>()
                    .map_err(|_| format!("invalid head `{h}`"))?,
            ),
        };
        let gold_pos = columns[COL_COARSE_POS].clone();
        let predicted_pos = match columns[COL_FINE_POS].as_str() {
            "_" => None,
            p => Some(p.to_owned()),
        };
        let gold_label = columns[COL_LABEL].clone();
        let is_punct = gold_label == "punct" || punct_tags.contains(&gold_pos);
        Ok(Token {
            index,
            form: columns[COL_FORM].clone(),
            gold_pos,
            predicted_pos,
            gold_head,
            gold_label,
            is_punct,
            columns,
        })
    }

    /// A token with only form, POS tags, head and label set.
    pub fn new(index: usize, form: &str, pos: &str, head: usize, label: &str) -> Self {
        let columns = vec![
            index.to_string(),
            form.to_owned(),
            "_".into(),
            pos.to_owned(),
            pos.to_owned(),
            "_".into(),
            head.to_string(),
            label.to_owned(),
            "_".into(),
            "_".into(),
        ];
        Token::from_columns(columns, &default_punct_tags()).expect("well-formed token")
    }

    /// The POS tag fed to the model as an input feature: the external
    /// tagger's column, or the coarse column when that is absent.
    pub fn input_pos(&self) -> &str {
        self.predicted_pos.as_deref().unwrap_or(&self.gold_pos)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub comments: Vec<String>,
    /// Multiword ranges and empty nodes, kept verbatim with the number of
    /// regular tokens preceding them.
    pub extra_lines: Vec<(usize, String)>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            tokens,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whether every token has a gold head and together they form a tree.
    pub fn has_complete_tree(&self) -> bool {
        self.gold_heads()
            .is_some_and(|h| validate_heads(&h).is_ok())
    }

    pub fn gold_heads(&self) -> Option<Vec<usize>> {
        self.tokens.iter().map(|t| t.gold_head).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Treebank {
    pub sentences: Vec<Sentence>,
    pub label_set: Vec<String>,
    pub pos_set: Vec<String>,
    pub seen_label_pos_pairs: BTreeSet<(String, String)>,
    /// Token counts keyed by lowercased form.
    pub word_frequency: BTreeMap<String, usize>,
}

impl Treebank {
    pub fn from_sentences(sentences: Vec<Sentence>) -> Self {
        let mut labels = BTreeSet::new();
        let mut pos = BTreeSet::new();
        let mut pairs = BTreeSet::new();
        let mut freq = BTreeMap::new();
        for t in sentences.iter().flat_map(|s| &s.tokens) {
            *freq.entry(t.form.to_lowercase()).or_insert(0) += 1;
            let has_label = t.gold_label != "_";
            let has_pos = t.gold_pos != "_";
            if has_label {
                labels.insert(t.gold_label.clone());
            }
            if has_pos {
                pos.insert(t.gold_pos.clone());
            }
            if has_label && has_pos {
                pairs.insert((t.gold_label.clone(), t.gold_pos.clone()));
            }
        }
        Treebank {
            sentences,
            label_set: labels.into_iter().collect(),
            pos_set: pos.into_iter().collect(),
            seen_label_pos_pairs: pairs,
            word_frequency: freq,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Splits off the last `n` sentences.
    pub fn split_tail(&self, n: usize) -> (Treebank, Treebank) {
        let cut = self.sentences.len().saturating_sub(n);
        (
            Treebank::from_sentences(self.sentences[..cut].to_vec()),
            Treebank::from_sentences(self.sentences[cut..].to_vec()),
        )
    }
}

fn is_extra_id(id: &str) -> bool {
    id.contains('-') || id.contains('.')
}

/// Parses treebank text. `origin` is used in error messages.
pub fn parse_conll(text: &str, origin: &Path, opts: &ReadOptions) -> Result<Treebank> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut start_line = 1;

    let mut finish = |current: &mut Sentence, start_line: usize| -> Result<()> {
        if current.tokens.is_empty()
            && current.comments.is_empty()
            && current.extra_lines.is_empty()
        {
            return Ok(());
        }
        let sentence = std::mem::take(current);
        let number = sentences.len() + 1;
        let n = sentence.tokens.len();
        for t in &sentence.tokens {
            if let Some(h) = t.gold_head {
                if h > n {
                    return Err(Error::Tree {
                        sentence: number,
                        message: format!(
                            "token {} has head {h} but the sentence (starting at line {start_line}) has {n} tokens",
                            t.index
                        ),
                    });
                }
                if h == t.index {
                    return Err(Error::Tree {
                        sentence: number,
                        message: format!("token {} is its own head", t.index),
                    });
                }
            }
        }
        if opts.strict {
            let heads = sentence.gold_heads().ok_or_else(|| Error::Tree {
                sentence: number,
                message: "missing gold heads".into(),
            })?;
            validate_heads(&heads).map_err(|message| Error::Tree {
                sentence: number,
                message,
            })?;
        }
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            finish(&mut current, start_line)?;
            start_line = lineno + 1;
            continue;
        }
        if line.starts_with('#') {
            current.comments.push(line.to_owned());
            continue;
        }
        let columns: Vec<String> = line.split('\t').map(str::to_owned).collect();
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message,
        };
        if columns.len() != COLUMNS {
            return Err(parse_err(format!(
                "expected {COLUMNS} tab-separated columns, found {}",
                columns.len()
            )));
        }
        if is_extra_id(&columns[COL_ID]) {
            current
                .extra_lines
                .push((current.tokens.len(), line.to_owned()));
            continue;
        }
        let token = Token::from_columns(columns, &opts.punct_tags).map_err(parse_err)?;
        if token.index != current.tokens.len() + 1 {
            return Err(parse_err(format!(
                "token id {} out of sequence (expected {})",
                token.index,
                current.tokens.len() + 1
            )));
        }
        current.tokens.push(token);
    }
    finish(&mut current, start_line)?;

    if opts.format == Format::ConllX && sentences.iter().any(|s| !s.extra_lines.is_empty()) {
        log::warn!(
            "{}: CoNLL-X input contains multiword or empty-node lines",
            origin.display()
        );
    }
    Ok(Treebank::from_sentences(sentences))
}

pub fn read_conll(path: impl AsRef<Path>, opts: &ReadOptions) -> Result<Treebank> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_conll(&text, path, opts)
}

/// Serializes a treebank with predicted heads, labels and coarse POS taken
/// from `trees`. All other columns, comments and extra lines are copied.
pub fn format_conll(tb: &Treebank, trees: &[DependencyTree]) -> Result<String> {
    if tb.sentences.len() != trees.len() {
        return Err(Error::InvalidInput(format!(
            "{} sentences but {} trees",
            tb.sentences.len(),
            trees.len()
        )));
    }
    let mut out = String::new();
    for (k, (sentence, tree)) in tb.sentences.iter().zip(trees).enumerate() {
        if tree.len() != sentence.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {} has {} tokens but its tree has {}",
                k + 1,
                sentence.len(),
                tree.len()
            )));
        }
        for c in &sentence.comments {
            out.push_str(c);
            out.push('\n');
        }
        let mut extras = sentence.extra_lines.iter().peekable();
        for (i, token) in sentence.tokens.iter().enumerate() {
            while let Some((_, line)) = extras.next_if(|(pos, _)| *pos == i) {
                out.push_str(line);
                out.push('\n');
            }
            let mut cols = token.columns.clone();
            cols[COL_HEAD] = tree.heads[i].to_string();
            cols[COL_LABEL] = tree.labels[i].clone();
            cols[COL_COARSE_POS] = tree.pos[i].clone();
            let _ = writeln!(out, "{}", cols.join("\t"));
        }
        for (_, line) in extras {
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_conll(tb: &Treebank, trees: &[DependencyTree], path: impl AsRef<Path>) -> Result<()> {
    let text = format_conll(tb, trees)?;
    fs::write(path, text)?;
    Ok(())
}

/// Writes the treebank back with its own gold annotation.
pub fn write_gold(tb: &Treebank, path: impl AsRef<Path>) -> Result<()> {
    let trees: Vec<DependencyTree> = tb.sentences.iter().map(DependencyTree::from_gold).collect();
    write_conll(tb, &trees, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn origin(name: &str) -> PathBuf {
        PathBuf::from(name)
    }

    const SAMPLE: &str = "# sent_id = 1\n\
1\tdog\tdog\tNOUN\tNN\t_\t2\tnsubj\t_\t_\n\
2\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\t_\n\
\n\
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tdo\tdo\tAUX\tVBP\t_\t3\taux\t_\t_\n\
2\tn't\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_\n\
3\tgo\tgo\tVERB\tVB\t_\t0\troot\t_\t_\n\
3.1\tgone\tgo\tVERB\tVBN\t_\t_\t_\t_\t_\n\
4\t!\t!\tPUNCT\t.\t_\t3\tpunct\t_\t_\n\
\n";

    fn parse(text: &str) -> Result<Treebank> {
        parse_conll(text, &origin("test"), &ReadOptions::default())
    }

    #[test]
    fn reads_two_token_sentence() {
        let tb = parse(SAMPLE).unwrap();
        assert_eq!(tb.len(), 2);
        let s = &tb.sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.gold_heads().unwrap(), vec![2, 0]);
        assert_eq!(s.tokens[0].predicted_pos.as_deref(), Some("NN"));
        assert_eq!(s.comments, vec!["# sent_id = 1".to_string()]);
        let s2 = &tb.sentences[1];
        assert_eq!(s2.len(), 4);
        assert_eq!(s2.extra_lines.len(), 2);
        assert!(s2.tokens[3].is_punct);
        assert!(!s2.tokens[2].is_punct);
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse("").unwrap().len(), 0);
        assert_eq!(format_conll(&Treebank::default(), &[]).unwrap(), "");
    }

    #[test]
    fn write_gold_is_byte_identical() {
        let tb = parse(SAMPLE).unwrap();
        let trees: Vec<_> = tb.sentences.iter().map(DependencyTree::from_gold).collect();
        assert_eq!(format_conll(&tb, &trees).unwrap(), SAMPLE);
    }

    #[test]
    fn malformed_line_reports_position() {
        let text = "1\tdog\tdog\tNOUN\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        let text = "1\tdog\t_\tNOUN\tNN\t_\tx\tnsubj\t_\t_\n";
        assert!(matches!(parse(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn head_out_of_range_names_sentence() {
        let text = format!("{SAMPLE}1\ta\t_\tDET\tDT\t_\t5\tdet\t_\t_\n\n");
        match parse(&text) {
            Err(Error::Tree { sentence, .. }) => assert_eq!(sentence, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_mode_rejects_forests() {
        let text = "1\ta\t_\tX\tX\t_\t0\troot\t_\t_\n2\tb\t_\tX\tX\t_\t0\troot\t_\t_\n\n";
        assert!(parse(text).is_ok());
        let strict = ReadOptions {
            strict: true,
            ..ReadOptions::default()
        };
        assert!(matches!(
            parse_conll(text, &origin("t"), &strict),
            Err(Error::Tree { sentence: 1, .. })
        ));
    }

    #[test]
    fn alignment_mismatch() {
        let tb = parse(SAMPLE).unwrap();
        assert!(matches!(
            format_conll(&tb, &[]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn single_root_tree_round_trips() {
        let tb = parse(SAMPLE).unwrap();
        let mut trees: Vec<_> = tb.sentences.iter().map(DependencyTree::from_gold).collect();
        trees[1].heads = vec![3, 3, 0, 3];
        let text = format_conll(&tb, &trees).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(back.sentences[1].gold_heads().unwrap(), vec![3, 3, 0, 3]);
    }

    #[test]
    fn derived_tables() {
        let tb = parse(SAMPLE).unwrap();
        assert_eq!(tb.word_frequency.values().sum::<usize>(), tb.num_tokens());
        assert!(tb
            .seen_label_pos_pairs
            .contains(&("nsubj".to_string(), "NOUN".to_string())));
        assert!(tb.label_set.contains(&"punct".to_string()));
        assert_eq!(tb.pos_set, vec!["AUX", "NOUN", "PART", "PUNCT", "VERB"]);
    }
}
