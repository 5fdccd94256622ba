//! Dependency trees for command sentences.
//!
//! Trees come from two places: CoNLL-U documents written by any external
//! dependency parser, or [`parse_command`], a deterministic rule-based parser
//! for the closed command sublanguage (verbs, directions, quantities and
//! object names drawn from the [`Lexicon`]).

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{normalize, Category, Lexicon};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DepTreeError {
    #[error("malformed CoNLL-U line {0}")]
    MalformedLine(usize),
    #[error("cyclic head relation in sentence {0}")]
    CyclicHeads(usize),
    #[error("more than one root in sentence {0}")]
    MultipleRoots(usize),
    #[error("token indices are not contiguous in sentence {0}")]
    NonContiguous(usize),
    #[error("token index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("no verb-like root in `{0}`")]
    UnparsableCommand(String),
}

/// Penn-style part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pos {
    VB,
    NN,
    NNS,
    CD,
    RB,
    IN,
    JJ,
    DT,
    Other(String),
}

impl Pos {
    pub fn as_str(&self) -> &str {
        match self {
            Pos::VB => "VB",
            Pos::NN => "NN",
            Pos::NNS => "NNS",
            Pos::CD => "CD",
            Pos::RB => "RB",
            Pos::IN => "IN",
            Pos::JJ => "JJ",
            Pos::DT => "DT",
            Pos::Other(s) => s,
        }
    }

    pub fn is_noun(&self) -> bool {
        matches!(self, Pos::NN | Pos::NNS)
    }

    fn upos(&self) -> &str {
        match self {
            Pos::VB => "VERB",
            Pos::NN | Pos::NNS => "NOUN",
            Pos::CD => "NUM",
            Pos::RB => "ADV",
            Pos::IN => "ADP",
            Pos::JJ => "ADJ",
            Pos::DT => "DET",
            Pos::Other(s) if s == "CC" => "CCONJ",
            Pos::Other(_) => "X",
        }
    }

    fn from_upos(upos: &str) -> Pos {
        match upos {
            "VERB" | "AUX" => Pos::VB,
            "NOUN" | "PROPN" => Pos::NN,
            "NUM" => Pos::CD,
            "ADV" => Pos::RB,
            "ADP" => Pos::IN,
            "ADJ" => Pos::JJ,
            "DET" => Pos::DT,
            other => Pos::Other(other.to_string()),
        }
    }
}

impl FromStr for Pos {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "VB" => Pos::VB,
            "NN" => Pos::NN,
            "NNS" => Pos::NNS,
            "CD" => Pos::CD,
            "RB" => Pos::RB,
            "IN" => Pos::IN,
            "JJ" => Pos::JJ,
            "DT" => Pos::DT,
            other => Pos::Other(other.to_string()),
        })
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dependency relation label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DepRel {
    Root,
    Advmod,
    Prep,
    Pobj,
    Dobj,
    Nummod,
    Det,
    Amod,
    Conj,
    Other(String),
}

impl DepRel {
    pub fn as_str(&self) -> &str {
        match self {
            DepRel::Root => "root",
            DepRel::Advmod => "advmod",
            DepRel::Prep => "prep",
            DepRel::Pobj => "pobj",
            DepRel::Dobj => "dobj",
            DepRel::Nummod => "nummod",
            DepRel::Det => "det",
            DepRel::Amod => "amod",
            DepRel::Conj => "conj",
            DepRel::Other(s) => s,
        }
    }

    fn other(s: &str) -> DepRel {
        DepRel::Other(s.to_string())
    }
}

impl FromStr for DepRel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "root" => DepRel::Root,
            "advmod" => DepRel::Advmod,
            "prep" => DepRel::Prep,
            "pobj" => DepRel::Pobj,
            "dobj" => DepRel::Dobj,
            "nummod" => DepRel::Nummod,
            "det" => DepRel::Det,
            "amod" => DepRel::Amod,
            "conj" => DepRel::Conj,
            _ => DepRel::Other(lower),
        })
    }
}

impl fmt::Display for DepRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! serde_as_str {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Ok(s.parse().unwrap())
            }
        }
    };
}
serde_as_str!(Pos);
serde_as_str!(DepRel);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub text: String,
    pub lemma: String,
    pub pos: Pos,
    /// Index of the governing token, 0 for the root.
    pub head: usize,
    pub dep: DepRel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    pub sentence: String,
    pub tokens: Vec<Token>,
}

impl DependencyTree {
    /// Builds a tree, checking that indices are `1..=n`, that exactly one
    /// token has head 0 and that every head chain reaches it.
    pub fn new(sentence: impl Into<String>, tokens: Vec<Token>) -> Result<Self, DepTreeError> {
        let tree = Self {
            sentence: sentence.into(),
            tokens,
        };
        tree.check(1)?;
        Ok(tree)
    }

    fn check(&self, sentence_no: usize) -> Result<(), DepTreeError> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(DepTreeError::EmptyInput);
        }
        if self.tokens.iter().enumerate().any(|(i, t)| t.index != i + 1) {
            return Err(DepTreeError::NonContiguous(sentence_no));
        }
        if let Some(t) = self.tokens.iter().find(|t| t.head > n) {
            return Err(DepTreeError::IndexOutOfRange(t.head));
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots > 1 {
            return Err(DepTreeError::MultipleRoots(sentence_no));
        }
        if roots == 0 {
            return Err(DepTreeError::CyclicHeads(sentence_no));
        }
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(DepTreeError::CyclicHeads(sentence_no));
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn root(&self) -> &Token {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .expect("validated tree has a root")
    }

    pub fn token(&self, index: usize) -> Result<&Token, DepTreeError> {
        index
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .ok_or(DepTreeError::IndexOutOfRange(index))
    }

    /// Direct dependents of `index`, in surface order.
    pub fn children(&self, index: usize) -> Result<Vec<&Token>, DepTreeError> {
        self.token(index)?;
        Ok(self.tokens.iter().filter(|t| t.head == index).collect())
    }

    /// True if `ancestor` lies on the head chain of `index` (or equals it).
    pub fn dominates(&self, ancestor: usize, index: usize) -> bool {
        let mut cur = index;
        while cur != 0 {
            if cur == ancestor {
                return true;
            }
            cur = self.tokens[cur - 1].head;
        }
        false
    }

    /// Head→dependent arcs, one per non-root token.
    pub fn arcs(&self) -> Vec<(usize, usize, &DepRel)> {
        self.tokens
            .iter()
            .filter(|t| t.head != 0)
            .map(|t| (t.head, t.index, &t.dep))
            .collect()
    }

    /// Serializes as a single CoNLL-U sentence block (without the trailing
    /// blank line).
    pub fn to_conllu(&self) -> String {
        let mut out = format!("# text = {}\n", self.sentence);
        for t in &self.tokens {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t_\t_\n",
                t.index,
                t.text,
                t.lemma,
                t.pos.upos(),
                t.pos,
                t.head,
                t.dep
            ));
        }
        out
    }
}

impl fmt::Display for DependencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_conllu())
    }
}

/// Writes several trees as one CoNLL-U document.
pub fn to_conllu(trees: &[DependencyTree]) -> String {
    trees.iter().map(|t| t.to_conllu() + "\n").collect::<String>()
}

/// Parses a CoNLL-U document into one tree per sentence block.
///
/// Only ID, FORM, LEMMA, UPOS/XPOS, HEAD and DEPREL are read. XPOS wins when
/// present; otherwise UPOS is mapped onto the Penn subset. Multiword-token
/// ranges (`1-2`) and empty nodes (`1.1`) are skipped.
pub fn parse_conllu(text: &str) -> Result<Vec<DependencyTree>, DepTreeError> {
    let mut trees = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentence: Option<String> = None;

    let mut flush = |tokens: &mut Vec<Token>, sentence: &mut Option<String>| {
        if tokens.is_empty() {
            *sentence = None;
            return Ok(());
        }
        let toks = std::mem::take(tokens);
        let text = sentence
            .take()
            .unwrap_or_else(|| toks.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "));
        let tree = DependencyTree {
            sentence: text,
            tokens: toks,
        };
        tree.check(trees.len() + 1)?;
        trees.push(tree);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut sentence)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(t) = comment.trim_start().strip_prefix("text =") {
                sentence = Some(t.trim().to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(DepTreeError::MalformedLine(line_no));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| DepTreeError::MalformedLine(line_no))?;
        let head: usize = cols[6].parse().map_err(|_| DepTreeError::MalformedLine(line_no))?;
        if index != tokens.len() + 1 {
            return Err(DepTreeError::MalformedLine(line_no));
        }
        let pos = if cols[4] != "_" {
            cols[4].parse().unwrap()
        } else {
            Pos::from_upos(cols[3])
        };
        let mut dep: DepRel = cols[7].parse().unwrap();
        if head == 0 {
            dep = DepRel::Root;
        }
        let lemma = if cols[2] == "_" {
            cols[1].to_lowercase()
        } else {
            cols[2].to_lowercase()
        };
        tokens.push(Token {
            index,
            text: cols[1].to_string(),
            lemma,
            pos,
            head,
            dep,
        });
    }
    flush(&mut tokens, &mut sentence)?;
    Ok(trees)
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+\-±]?\d+(\.\d+)?$").unwrap());
static NUMBER_WITH_UNIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([+\-±]?\d+(?:\.\d+)?)([A-Za-z]+)$").unwrap());

const DETERMINERS: &[&str] = &["the", "a", "an", "this", "that", "these", "those"];
const PREPOSITIONS: &[&str] = &[
    "by", "to", "along", "in", "into", "on", "onto", "at", "of", "towards", "toward", "with", "from", "for", "around",
    "about", "through", "over", "under", "above", "below",
];
const CONJUNCTIONS: &[&str] = &["and", "or"];
/// Sign words attached to a quantity.
pub const SIGN_WORDS: &[&str] = &["minus", "negative", "plus", "positive", "±", "+", "-"];
/// Number words the tagger treats as cardinals.
pub const NUMBER_WORDS: &[(&str, f64)] = &[
    ("zero", 0.0),
    ("one", 1.0),
    ("two", 2.0),
    ("three", 3.0),
    ("four", 4.0),
    ("five", 5.0),
    ("six", 6.0),
    ("seven", 7.0),
    ("eight", 8.0),
    ("nine", 9.0),
    ("ten", 10.0),
    ("eleven", 11.0),
    ("twelve", 12.0),
    ("fifteen", 15.0),
    ("twenty", 20.0),
    ("thirty", 30.0),
    ("forty", 40.0),
    ("fifty", 50.0),
    ("ninety", 90.0),
    ("hundred", 100.0),
];

pub fn is_number_word(lemma: &str) -> bool {
    NUMBER_WORDS.iter().any(|(w, _)| *w == lemma)
}

/// One surface token before tree construction.
#[derive(Debug, Clone)]
struct RawToken {
    text: String,
    lemma: String,
}

/// Splits a command into tokens: whitespace split, punctuation stripped,
/// `30cm` separated into `30 cm`, `+/-` folded to `±`.
fn tokenize(sentence: &str) -> Vec<RawToken> {
    let prepared = sentence.replace("+/-", " ± ");
    let mut out = Vec::new();
    for raw in prepared.split_whitespace() {
        let trimmed = raw.trim_end_matches(|c: char| !c.is_alphanumeric());
        let trimmed = trimmed.trim_start_matches(|c: char| !(c.is_alphanumeric() || c == '+' || c == '-' || c == '±'));
        if trimmed.is_empty() {
            // a bare sign survives the trim only through the ± fold
            if raw == "±" {
                out.push(RawToken {
                    text: "±".into(),
                    lemma: "±".into(),
                });
            }
            continue;
        }
        if let Some(caps) = NUMBER_WITH_UNIT.captures(trimmed) {
            for part in [&caps[1], &caps[2]] {
                out.push(RawToken {
                    text: part.to_string(),
                    lemma: part.to_lowercase(),
                });
            }
            continue;
        }
        // strip interior punctuation except a decimal point inside numbers
        let cleaned: String = if NUMBER.is_match(trimmed) {
            trimmed.to_string()
        } else {
            trimmed
                .chars()
                .filter(|c| c.is_alphanumeric() || *c == '_' || *c == '\'')
                .collect()
        };
        if cleaned.is_empty() {
            continue;
        }
        out.push(RawToken {
            lemma: cleaned.to_lowercase(),
            text: cleaned,
        });
    }
    out
}

/// Greedy longest-match merge of multi-word lexicon entries into single
/// underscore-joined tokens.
fn merge_phrases(tokens: Vec<RawToken>, lex: &Lexicon) -> Vec<RawToken> {
    let phrases = lex.phrases();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let best = phrases
            .iter()
            .filter(|p| i + p.len() <= tokens.len() && p.iter().zip(&tokens[i..]).all(|(w, t)| *w == t.lemma))
            .map(Vec::len)
            .max();
        match best {
            Some(len) => {
                let span = &tokens[i..i + len];
                out.push(RawToken {
                    text: span.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("_"),
                    lemma: span.iter().map(|t| t.lemma.as_str()).collect::<Vec<_>>().join("_"),
                });
                i += len;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Base form of an inflected dictionary verb (`moving`, `grabbed`,
/// `rotates`), for words the lexicon does not already know.
fn verb_base(word: &str, lex: &Lexicon) -> Option<String> {
    if lex.lookup(word, None).is_some() {
        return None;
    }
    let is_verb = |w: &str| lex.lookup(w, Some(Category::Verbs)).is_some();
    for suffix in ["ing", "ed", "es", "s"] {
        let Some(stem) = word.strip_suffix(suffix) else {
            continue;
        };
        if stem.len() < 2 {
            continue;
        }
        let mut candidates = vec![stem.to_string(), format!("{stem}e")];
        let b = stem.as_bytes();
        if b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] {
            candidates.push(stem[..stem.len() - 1].to_string());
        }
        if let Some(c) = candidates.into_iter().find(|c| is_verb(c)) {
            return Some(c);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Verb,
    SplitTrigger,
    LearnTrigger,
    Other,
}

fn tag(lemma: &str, lex: &Lexicon) -> (Pos, Role) {
    if let Some(trigger) = lex.lookup(lemma, Some(Category::TriggerWords)) {
        match trigger.name.as_str() {
            "Split" => return (Pos::RB, Role::SplitTrigger),
            "Learn" => return (Pos::VB, Role::LearnTrigger),
            _ => return (Pos::VB, Role::Verb),
        }
    }
    if lex.lookup(lemma, Some(Category::Verbs)).is_some() {
        return (Pos::VB, Role::Verb);
    }
    if lex.lookup(lemma, Some(Category::UnitOfMeasurement)).is_some() {
        return (Pos::NNS, Role::Other);
    }
    if lex.lookup(lemma, Some(Category::PlaceWords)).is_some() {
        let numeric = NUMBER.is_match(lemma) || is_number_word(lemma);
        return (if numeric { Pos::CD } else { Pos::RB }, Role::Other);
    }
    if lex.lookup(lemma, Some(Category::Objects)).is_some()
        || lex.lookup(lemma, Some(Category::Nouns)).is_some()
        || lex.lookup(lemma, Some(Category::Axes)).is_some()
    {
        return (Pos::NN, Role::Other);
    }
    if NUMBER.is_match(lemma) || is_number_word(lemma) {
        return (Pos::CD, Role::Other);
    }
    if SIGN_WORDS.contains(&lemma) {
        return (Pos::JJ, Role::Other);
    }
    if DETERMINERS.contains(&lemma) {
        return (Pos::DT, Role::Other);
    }
    if PREPOSITIONS.contains(&lemma) {
        return (Pos::IN, Role::Other);
    }
    if CONJUNCTIONS.contains(&lemma) {
        return (Pos::Other("CC".into()), Role::Other);
    }
    (Pos::NN, Role::Other)
}

struct Tagged {
    raw: RawToken,
    pos: Pos,
    role: Role,
}

/// Parses one sentence of the command sublanguage into a dependency tree.
///
/// The first verb of each clause (a dictionary verb, or a Stop/Learn
/// trigger) becomes its head; with no such verb the first open-class word
/// is used. Direction adverbs attach as `advmod`, prepositions as `prep`
/// with their noun as `pobj`, cardinals as `nummod` of the measured noun,
/// determiners as `det`, other nouns as `dobj`. Clauses separated by a
/// Split trigger hang off the first clause's root as `conj`, the trigger
/// itself as `advmod` of the clause it introduces.
pub fn parse_command(sentence: &str, lex: &Lexicon) -> Result<DependencyTree, DepTreeError> {
    if sentence.trim().is_empty() {
        return Err(DepTreeError::EmptyInput);
    }
    let raw = merge_phrases(tokenize(sentence), lex);
    if raw.is_empty() {
        return Err(DepTreeError::EmptyInput);
    }

    // Learn clauses teach later clauses new verbs, strictly left to right.
    let mut lex: Cow<'_, Lexicon> = Cow::Borrowed(lex);
    let mut tagged: Vec<Tagged> = Vec::with_capacity(raw.len());
    let mut clause_start = 0;
    for (i, r) in raw.iter().enumerate() {
        let mut r = r.clone();
        if let Some(base) = verb_base(&r.lemma, &lex) {
            r.lemma = base;
        }
        let (pos, role) = tag(&r.lemma, &lex);
        tagged.push(Tagged { raw: r, pos, role });
        let clause_end = role == Role::SplitTrigger || i + 1 == raw.len();
        if clause_end {
            let end = if role == Role::SplitTrigger { i } else { i + 1 };
            if let Some(p) = (clause_start..end).find(|&k| tagged[k].role == Role::LearnTrigger) {
                if p > clause_start && p + 1 < end {
                    let (new, target) = (&tagged[p - 1].raw.lemma, &tagged[p + 1].raw.lemma);
                    let _ = lex.to_mut().learn(new, target);
                }
            }
            clause_start = i + 1;
        }
    }
    // retag with the final vocabulary so words learned in an earlier clause
    // are recognized wherever they appear later
    for t in &mut tagged {
        if t.role == Role::Other && t.pos == Pos::NN {
            let (pos, role) = tag(&t.raw.lemma, &lex);
            t.pos = pos;
            t.role = role;
        }
    }

    // clause spans, split trigger positions excluded
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for (i, t) in tagged.iter().enumerate() {
        if t.role == Role::SplitTrigger {
            if i > start {
                spans.push((start, i));
            }
            start = i + 1;
        }
    }
    if start < tagged.len() {
        spans.push((start, tagged.len()));
    }

    let n = tagged.len();
    let mut heads = vec![0usize; n];
    let mut deps: Vec<DepRel> = vec![DepRel::Root; n];
    let mut clause_roots = Vec::with_capacity(spans.len());
    for &(a, b) in &spans {
        let root = attach_clause(&tagged, a, b, &mut heads, &mut deps)
            .ok_or_else(|| DepTreeError::UnparsableCommand(sentence.trim().to_string()))?;
        clause_roots.push(root);
    }
    let Some(&sentence_root) = clause_roots.first() else {
        return Err(DepTreeError::UnparsableCommand(sentence.trim().to_string()));
    };
    heads[sentence_root] = 0;
    deps[sentence_root] = DepRel::Root;
    for &r in &clause_roots[1..] {
        heads[r] = sentence_root + 1;
        deps[r] = DepRel::Conj;
    }
    for (i, t) in tagged.iter().enumerate() {
        if t.role == Role::SplitTrigger {
            let next = clause_roots
                .iter()
                .zip(&spans)
                .find(|(_, (a, _))| *a > i)
                .map(|(r, _)| *r)
                .unwrap_or(sentence_root);
            heads[i] = next + 1;
            deps[i] = DepRel::Advmod;
        }
    }

    let tokens = tagged
        .into_iter()
        .enumerate()
        .map(|(i, t)| Token {
            index: i + 1,
            text: t.raw.text,
            lemma: t.raw.lemma,
            pos: t.pos,
            head: heads[i],
            dep: deps[i].clone(),
        })
        .collect();
    DependencyTree::new(sentence.trim(), tokens)
}

/// Assigns heads inside `[a, b)`; returns the clause root (0-based) or
/// `None` when the clause has nothing verb-like.
fn attach_clause(t: &[Tagged], a: usize, b: usize, heads: &mut [usize], deps: &mut [DepRel]) -> Option<usize> {
    if let Some(p) = (a..b).find(|&k| t[k].role == Role::LearnTrigger) {
        // `<new> means <known>`
        for k in a..b {
            if k == p {
                continue;
            }
            let (head, dep) = if k + 1 == p {
                (p, DepRel::other("nsubj"))
            } else if k == p + 1 {
                (p, DepRel::Dobj)
            } else if k < p {
                (p - 1, DepRel::other("compound"))
            } else {
                (p + 1, DepRel::other("compound"))
            };
            heads[k] = head + 1;
            deps[k] = dep;
        }
        return Some(p);
    }

    let closed =
        |p: &Pos| matches!(p, Pos::DT | Pos::IN | Pos::CD | Pos::JJ) || matches!(p, Pos::Other(s) if s == "CC");
    let root = (a..b)
        .find(|&k| t[k].role == Role::Verb)
        .or_else(|| (a..b).find(|&k| !closed(&t[k].pos)))?;

    let next_noun = |from: usize| (from + 1..b).find(|&k| t[k].pos.is_noun());
    for k in a..b {
        if k == root {
            continue;
        }
        let (head, dep) = match &t[k].pos {
            Pos::VB => (root, DepRel::Conj),
            Pos::RB => (root, DepRel::Advmod),
            Pos::IN => (root, DepRel::Prep),
            Pos::DT => (next_noun(k).unwrap_or(root), DepRel::Det),
            Pos::JJ => {
                let cd = (k + 1..b)
                    .take_while(|&j| t[j].pos == Pos::JJ || t[j].pos == Pos::CD)
                    .find(|&j| t[j].pos == Pos::CD);
                (cd.unwrap_or(root), DepRel::Amod)
            }
            Pos::CD => {
                if k + 1 < b && t[k + 1].pos.is_noun() && k + 1 != root {
                    (k + 1, DepRel::Nummod)
                } else if k > a && t[k - 1].pos.is_noun() && k - 1 != root {
                    (k - 1, DepRel::Nummod)
                } else {
                    (root, DepRel::Dobj)
                }
            }
            Pos::NN | Pos::NNS => {
                // governed by the nearest preceding preposition with no noun
                // in between
                let prep = (a..k)
                    .rev()
                    .take_while(|&j| !t[j].pos.is_noun())
                    .find(|&j| t[j].pos == Pos::IN);
                match prep {
                    Some(p) => (p, DepRel::Pobj),
                    None => (root, DepRel::Dobj),
                }
            }
            Pos::Other(s) if s == "CC" => (root, DepRel::other("cc")),
            Pos::Other(_) => (root, DepRel::other("dep")),
        };
        heads[k] = head + 1;
        deps[k] = dep;
    }
    Some(root)
}

/// Normalized lemma used for dictionary lookups.
pub fn lookup_key(token: &Token) -> String {
    normalize(&token.lemma)
}
