//! Spatial Description Clauses: the event/object/place/path frame every
//! command reduces to, and the tree-walking rules that fill it.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deptree::{is_number_word, DepRel, DependencyTree, Pos, Token, NUMBER_WORDS};
use crate::lexicon::{normalize, Category, HighLevelWord, Lexicon};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SdcError {
    #[error("no event found in `{0}`")]
    NoEventFound(String),
    #[error("learn trigger needs a word on each side")]
    MalformedLearn,
    #[error("`{0}` is not a number")]
    NonNumericQuantifier(String),
}

/// What the place slot may hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Place {
    /// A direction word or an axis.
    Word(HighLevelWord),
    /// A joint index, 1..=7.
    Joint(u8),
    /// A numbered choice from a presented menu (`grasp number two`).
    Choice(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub magnitude: f64,
    pub unit: HighLevelWord,
}

impl Path {
    pub fn new(magnitude: f64, unit: &str) -> Self {
        Self {
            magnitude,
            unit: HighLevelWord::new(Category::UnitOfMeasurement, unit),
        }
    }

    /// `30_Centimetres`.
    pub fn rendered(&self) -> String {
        format!("{}_{}", fmt_number(self.magnitude), self.unit.name)
    }
}

fn fmt_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sdc {
    pub event: HighLevelWord,
    pub object: Option<HighLevelWord>,
    pub place: Option<Place>,
    pub path: Option<Path>,
}

impl Sdc {
    pub fn new(event: &str) -> Self {
        Self {
            event: HighLevelWord::new(Category::Verbs, event),
            object: None,
            place: None,
            path: None,
        }
    }

    pub fn with_object(mut self, name: &str) -> Self {
        self.object = Some(HighLevelWord::new(Category::Objects, name));
        self
    }

    pub fn with_place(mut self, place: Place) -> Self {
        self.place = Some(place);
        self
    }

    pub fn with_place_word(self, name: &str) -> Self {
        self.with_place(Place::Word(HighLevelWord::new(Category::PlaceWords, name)))
    }

    pub fn with_path(mut self, magnitude: f64, unit: &str) -> Self {
        self.path = Some(Path::new(magnitude, unit));
        self
    }
}

impl fmt::Display for Sdc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SDC{{E:{}", self.event.name)?;
        if let Some(o) = &self.object {
            write!(f, ", O:{}", o.name)?;
        }
        match &self.place {
            Some(Place::Word(w)) => write!(f, ", PL:{}", w.name)?,
            Some(Place::Joint(j)) => write!(f, ", PL:joint {j}")?,
            Some(Place::Choice(c)) => write!(f, ", PL:number {c}")?,
            None => {}
        }
        if let Some(p) = &self.path {
            write!(f, ", PA:{p}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerAction {
    Learn { new_word: String, target: String },
    Split,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extracted {
    Sdc(Sdc),
    Trigger(TriggerAction),
}

impl Extracted {
    pub fn as_sdc(&self) -> Option<&Sdc> {
        match self {
            Extracted::Sdc(s) => Some(s),
            Extracted::Trigger(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// wire form

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlaceWire {
    Word(String),
    Joint { joint: u8 },
    Choice { choice: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathWire {
    pub magnitude: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdcWire {
    pub event: String,
    pub object: Option<String>,
    pub place: Option<PlaceWire>,
    pub path: Option<PathWire>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trigger")]
pub enum TriggerWire {
    Learn { new_word: String, target: String },
    Split,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtractedWire {
    Trigger(TriggerWire),
    Sdc(SdcWire),
}

impl From<&Sdc> for SdcWire {
    fn from(s: &Sdc) -> Self {
        SdcWire {
            event: s.event.name.clone(),
            object: s.object.as_ref().map(|o| o.name.clone()),
            place: s.place.as_ref().map(|p| match p {
                Place::Word(w) => PlaceWire::Word(w.name.clone()),
                Place::Joint(j) => PlaceWire::Joint { joint: *j },
                Place::Choice(c) => PlaceWire::Choice { choice: *c },
            }),
            path: s.path.as_ref().map(|p| PathWire {
                magnitude: p.magnitude,
                unit: p.unit.name.clone(),
            }),
        }
    }
}

impl From<&TriggerAction> for TriggerWire {
    fn from(t: &TriggerAction) -> Self {
        match t {
            TriggerAction::Learn { new_word, target } => TriggerWire::Learn {
                new_word: new_word.clone(),
                target: target.clone(),
            },
            TriggerAction::Split => TriggerWire::Split,
            TriggerAction::Stop => TriggerWire::Stop,
        }
    }
}

impl From<&Extracted> for ExtractedWire {
    fn from(e: &Extracted) -> Self {
        match e {
            Extracted::Sdc(s) => ExtractedWire::Sdc(s.into()),
            Extracted::Trigger(t) => ExtractedWire::Trigger(t.into()),
        }
    }
}

impl Serialize for Sdc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SdcWire::from(self).serialize(s)
    }
}

impl Serialize for TriggerAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TriggerWire::from(self).serialize(s)
    }
}

impl Serialize for Extracted {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExtractedWire::from(self).serialize(s)
    }
}

impl Sdc {
    /// Rebuilds an SDC from its wire form, using the lexicon to tell place
    /// words from axes.
    pub fn from_wire(w: &SdcWire, lex: &Lexicon) -> Sdc {
        let place = w.place.as_ref().map(|p| match p {
            PlaceWire::Word(name) => {
                let cat = if lex.lookup(name, Some(Category::Axes)).is_some()
                    && lex.lookup(name, Some(Category::PlaceWords)).is_none()
                {
                    Category::Axes
                } else {
                    Category::PlaceWords
                };
                Place::Word(HighLevelWord::new(cat, name.clone()))
            }
            PlaceWire::Joint { joint } => Place::Joint(*joint),
            PlaceWire::Choice { choice } => Place::Choice(*choice),
        });
        Sdc {
            event: HighLevelWord::new(Category::Verbs, w.event.clone()),
            object: w
                .object
                .as_ref()
                .map(|o| HighLevelWord::new(Category::Objects, o.clone())),
            place,
            path: w.path.as_ref().map(|p| Path::new(p.magnitude, &p.unit)),
        }
    }
}

// ---------------------------------------------------------------------------
// extraction

/// A contiguous run of tokens extracted on its own (one clause).
#[derive(Clone, Copy)]
struct Clause<'t> {
    tree: &'t DependencyTree,
    /// 1-based inclusive start, exclusive end
    start: usize,
    end: usize,
}

impl<'t> Clause<'t> {
    fn whole(tree: &'t DependencyTree) -> Self {
        Self {
            tree,
            start: 1,
            end: tree.len() + 1,
        }
    }

    fn contains(&self, index: usize) -> bool {
        (self.start..self.end).contains(&index)
    }

    fn tokens(&self) -> impl Iterator<Item = &'t Token> + 't {
        let (a, b) = (self.start, self.end);
        self.tree.tokens[a - 1..b - 1].iter()
    }

    fn text(&self) -> String {
        self.tokens().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    /// The clause's own root: its leftmost token governed from outside it.
    fn root(&self) -> Option<&'t Token> {
        self.tokens().find(|t| t.head == 0 || !self.contains(t.head))
    }

    /// Tokens dominated by `index` inside the clause, excluding `index`,
    /// in surface order.
    fn subtree(&self, index: usize) -> impl Iterator<Item = &'t Token> + 't {
        let me = *self;
        self.tokens().filter(move |t| {
            if t.index == index {
                return false;
            }
            // climb while inside the clause
            let mut cur = t.head;
            while cur != 0 && me.contains(cur) {
                if cur == index {
                    return true;
                }
                cur = me.tree.tokens[cur - 1].head;
            }
            false
        })
    }

    fn has(&self, lex: &Lexicon, category: Category, name: &str) -> bool {
        self.tokens().any(|t| lex.resolves_to(&t.lemma, category, name))
    }
}

fn resolve(lex: &Lexicon, token: &Token, category: Category) -> Option<HighLevelWord> {
    lex.lookup(&token.lemma, Some(category))
        .or_else(|| lex.lookup(&token.text, Some(category)))
}

fn trigger_of(lex: &Lexicon, token: &Token) -> Option<String> {
    resolve(lex, token, Category::TriggerWords).map(|w| w.name)
}

/// Extracts every SDC and trigger in the sentence, left to right.
///
/// A Stop synonym anywhere wins outright. Split synonyms cut the sentence
/// into clauses extracted independently; a clause holding a Learn synonym
/// yields `Learn(left, right)` instead of an SDC, and the learned word is
/// visible to later clauses.
pub fn extract(tree: &DependencyTree, lex: &Lexicon) -> Result<Vec<Extracted>, SdcError> {
    if tree
        .tokens
        .iter()
        .any(|t| trigger_of(lex, t).as_deref() == Some("Stop"))
    {
        return Ok(vec![Extracted::Trigger(TriggerAction::Stop)]);
    }

    let mut clauses = Vec::new();
    let mut start = 1;
    for t in &tree.tokens {
        if trigger_of(lex, t).as_deref() == Some("Split") {
            if t.index > start {
                clauses.push(Clause {
                    tree,
                    start,
                    end: t.index,
                });
            }
            start = t.index + 1;
        }
    }
    if start <= tree.len() {
        clauses.push(Clause {
            tree,
            start,
            end: tree.len() + 1,
        });
    }

    let mut lex: Cow<'_, Lexicon> = Cow::Borrowed(lex);
    let mut out = Vec::with_capacity(clauses.len());
    for clause in clauses {
        let learn = clause
            .tokens()
            .find(|t| trigger_of(&lex, t).as_deref() == Some("Learn"));
        if let Some(trigger) = learn {
            let i = trigger.index;
            if i == clause.start || i + 1 == clause.end {
                return Err(SdcError::MalformedLearn);
            }
            let new_word = normalize(&tree.tokens[i - 2].lemma);
            let target = normalize(&tree.tokens[i].lemma);
            // best effort: a failing learn is reported when it is applied
            let _ = lex.to_mut().learn(&new_word, &target);
            out.push(Extracted::Trigger(TriggerAction::Learn { new_word, target }));
            continue;
        }
        out.push(Extracted::Sdc(extract_clause(clause, &lex)?));
    }
    Ok(out)
}

fn extract_clause(clause: Clause<'_>, lex: &Lexicon) -> Result<Sdc, SdcError> {
    let (event_index, event) = find_event_in(clause, lex)?;
    let (path, consumed) = find_path_in(clause, event_index, lex)?;
    let object = find_object_in(clause, event_index, lex, &consumed);
    let place = find_place_in(clause, event_index, lex, &consumed);
    Ok(Sdc {
        event,
        object,
        place,
        path,
    })
}

/// The event: the root if it is a dictionary verb, otherwise the first verb
/// in surface order. Returns the token index with it.
pub fn find_event(tree: &DependencyTree, lex: &Lexicon) -> Result<(usize, HighLevelWord), SdcError> {
    find_event_in(Clause::whole(tree), lex)
}

fn find_event_in(clause: Clause<'_>, lex: &Lexicon) -> Result<(usize, HighLevelWord), SdcError> {
    if let Some(root) = clause.root() {
        if let Some(w) = resolve(lex, root, Category::Verbs) {
            return Ok((root.index, w));
        }
    }
    clause
        .tokens()
        .find_map(|t| resolve(lex, t, Category::Verbs).map(|w| (t.index, w)))
        .ok_or_else(|| SdcError::NoEventFound(clause.text()))
}

/// The path: a unit noun (NNS) under the event joined with the number that
/// modifies it (`nummod`, CD).
pub fn find_path(tree: &DependencyTree, event_index: usize, lex: &Lexicon) -> Result<Option<Path>, SdcError> {
    find_path_in(Clause::whole(tree), event_index, lex).map(|(p, _)| p)
}

fn find_path_in(clause: Clause<'_>, event_index: usize, lex: &Lexicon) -> Result<(Option<Path>, Vec<usize>), SdcError> {
    let tree = clause.tree;
    for unit_tok in clause.subtree(event_index) {
        if unit_tok.pos != Pos::NNS {
            continue;
        }
        let Some(unit) = resolve(lex, unit_tok, Category::UnitOfMeasurement) else {
            continue;
        };
        let Some(number) = tree
            .tokens
            .iter()
            .find(|t| t.head == unit_tok.index && t.dep == DepRel::Nummod && t.pos == Pos::CD)
        else {
            continue;
        };
        let mut magnitude =
            parse_quantity(&number.lemma).ok_or_else(|| SdcError::NonNumericQuantifier(number.text.clone()))?;
        let mut consumed = vec![unit_tok.index, number.index];
        for sign in tree
            .tokens
            .iter()
            .filter(|t| t.head == number.index || t.head == unit_tok.index)
            .filter(|t| is_sign_word(&t.lemma))
        {
            if matches!(sign.lemma.as_str(), "minus" | "negative" | "-") {
                magnitude = -magnitude;
            }
            consumed.push(sign.index);
        }
        return Ok((Some(Path { magnitude, unit }), consumed));
    }
    Ok((None, Vec::new()))
}

fn is_sign_word(lemma: &str) -> bool {
    crate::deptree::SIGN_WORDS.contains(&lemma)
}

/// Parses `30`, `-2.5`, `+15`, `±15` (read as positive) or a number word.
pub fn parse_quantity(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Some((_, v)) = NUMBER_WORDS.iter().find(|(w, _)| *w == t) {
        return Some(*v);
    }
    let (neg, digits) = match t.chars().next()? {
        '-' => (true, &t[1..]),
        '+' => (false, &t[1..]),
        '±' => (false, &t['±'.len_utf8()..]),
        _ => (false, t),
    };
    let v: f64 = digits.parse().ok().filter(|v: &f64| v.is_finite())?;
    Some(if neg { -v } else { v })
}

/// First object word under the event.
pub fn find_object(tree: &DependencyTree, event_index: usize, lex: &Lexicon) -> Option<HighLevelWord> {
    let clause = Clause::whole(tree);
    let consumed = find_path_in(clause, event_index, lex)
        .map(|(_, c)| c)
        .unwrap_or_default();
    find_object_in(clause, event_index, lex, &consumed)
}

fn find_object_in(clause: Clause<'_>, event_index: usize, lex: &Lexicon, consumed: &[usize]) -> Option<HighLevelWord> {
    clause
        .subtree(event_index)
        .filter(|t| !consumed.contains(&t.index))
        .find_map(|t| resolve(lex, t, Category::Objects))
}

/// First direction word, axis, or (with `joint`/`number` in the clause) a
/// small number under the event.
pub fn find_place(tree: &DependencyTree, event_index: usize, lex: &Lexicon) -> Option<Place> {
    let clause = Clause::whole(tree);
    let consumed = find_path_in(clause, event_index, lex)
        .map(|(_, c)| c)
        .unwrap_or_default();
    find_place_in(clause, event_index, lex, &consumed)
}

fn find_place_in(clause: Clause<'_>, event_index: usize, lex: &Lexicon, consumed: &[usize]) -> Option<Place> {
    let joint_context = clause.has(lex, Category::Nouns, "Joint");
    let choice_context = clause.has(lex, Category::Nouns, "Number");
    for t in clause.subtree(event_index).filter(|t| !consumed.contains(&t.index)) {
        let numeric = t.pos == Pos::CD || is_number_word(&t.lemma) || parse_quantity(&t.lemma).is_some();
        if numeric {
            let Some(n) = parse_quantity(&t.lemma).filter(|v| *v >= 1.0 && v.fract() == 0.0) else {
                continue;
            };
            if joint_context && n <= 7.0 {
                return Some(Place::Joint(n as u8));
            }
            if choice_context {
                return Some(Place::Choice(n as u32));
            }
            continue;
        }
        if let Some(w) = resolve(lex, t, Category::PlaceWords) {
            return Some(Place::Word(w));
        }
        if let Some(w) = resolve(lex, t, Category::Axes) {
            return Some(Place::Word(w));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deptree::{parse_command, parse_conllu};

    fn run(s: &str) -> Result<Vec<Extracted>, SdcError> {
        let lex = Lexicon::shipped();
        extract(&parse_command(s, &lex).unwrap(), &lex)
    }

    fn sdc(s: &str) -> Sdc {
        let out = run(s).unwrap();
        assert_eq!(out.len(), 1, "{s}: {out:?}");
        out[0].as_sdc().unwrap().clone()
    }

    #[test]
    fn canonical_example() {
        let got = sdc("Move forward by 30 centimetres");
        assert_eq!(
            got,
            Sdc::new("Move")
                .with_place_word("Forward")
                .with_path(30.0, "Centimetres")
        );
        assert_eq!(got.path.unwrap().rendered(), "30_Centimetres");
    }

    #[test]
    fn split_into_two_clauses() {
        let out = run("grab the bottle then move up").unwrap();
        assert_eq!(
            out,
            vec![
                Extracted::Sdc(Sdc::new("Grab").with_object("Bottle")),
                Extracted::Sdc(Sdc::new("Move").with_place_word("Up")),
            ]
        );
    }

    #[test]
    fn stop_dominates() {
        assert_eq!(run("halt").unwrap(), vec![Extracted::Trigger(TriggerAction::Stop)]);
        assert_eq!(
            run("move forward then quit").unwrap(),
            vec![Extracted::Trigger(TriggerAction::Stop)]
        );
    }

    #[test]
    fn learn_pattern() {
        assert_eq!(
            run("snatch means grab").unwrap(),
            vec![Extracted::Trigger(TriggerAction::Learn {
                new_word: "snatch".into(),
                target: "grab".into()
            })]
        );
        // visible to the following clause
        let out = run("snatch means grab then snatch the teddy").unwrap();
        assert_eq!(out[1], Extracted::Sdc(Sdc::new("Grab").with_object("TeddyBear")));
    }

    #[test]
    fn malformed_learn() {
        let lex = Lexicon::shipped();
        let trees =
            parse_conllu("1\tmeans\tmeans\tVERB\tVB\t_\t0\troot\t_\t_\n2\tgrab\tgrab\tVERB\tVB\t_\t1\tdobj\t_\t_\n")
                .unwrap();
        assert_eq!(extract(&trees[0], &lex), Err(SdcError::MalformedLearn));
    }

    #[test]
    fn event_fallback_when_root_unknown() {
        let lex = Lexicon::shipped();
        let trees = parse_conllu(
            "1\tplease\tplease\tINTJ\tUH\t_\t0\troot\t_\t_\n\
             2\tgrab\tgrab\tVERB\tVB\t_\t1\tdep\t_\t_\n\
             3\tteddy\tteddy\tNOUN\tNN\t_\t2\tdobj\t_\t_\n",
        )
        .unwrap();
        let (idx, ev) = find_event(&trees[0], &lex).unwrap();
        assert_eq!((idx, ev.name.as_str()), (2, "Grab"));
        assert_eq!(find_object(&trees[0], idx, &lex).unwrap().name, "TeddyBear");
    }

    #[test]
    fn no_event() {
        assert!(matches!(run("the teddy"), Err(SdcError::NoEventFound(_))));
    }

    #[test]
    fn path_rules() {
        assert_eq!(sdc("move forward").path, None);
        assert_eq!(
            sdc("rotate joint two by 15 degrees"),
            Sdc::new("Rotate")
                .with_place(Place::Joint(2))
                .with_path(15.0, "Degrees")
        );
        assert_eq!(
            sdc("move down by minus 10 cm").path,
            Some(Path::new(-10.0, "Centimetres"))
        );
        assert_eq!(
            sdc("move joint 3 by -15 degrees").path,
            Some(Path::new(-15.0, "Degrees"))
        );
        assert_eq!(
            sdc("move joint 3 by +/- 15 degrees").path,
            Some(Path::new(15.0, "Degrees"))
        );
        assert_eq!(sdc("move up 2.5cm").path, Some(Path::new(2.5, "Centimetres")));
    }

    #[test]
    fn non_numeric_quantifier() {
        let lex = Lexicon::shipped();
        let trees = parse_conllu(
            "1\tmove\tmove\tVERB\tVB\t_\t0\troot\t_\t_\n\
             2\tsome\tsome\tNUM\tCD\t_\t3\tnummod\t_\t_\n\
             3\tcm\tcm\tNOUN\tNNS\t_\t1\tdobj\t_\t_\n",
        )
        .unwrap();
        assert_eq!(
            find_path(&trees[0], 1, &lex),
            Err(SdcError::NonNumericQuantifier("some".into()))
        );
    }

    #[test]
    fn places_and_objects() {
        assert_eq!(sdc("grab the teddy").object.unwrap().name, "TeddyBear");
        assert_eq!(sdc("move joint 3").place, Some(Place::Joint(3)));
        let fwd = sdc("move forward");
        assert_eq!(
            fwd.place,
            Some(Place::Word(HighLevelWord::new(Category::PlaceWords, "Forward")))
        );
        assert_eq!(fwd.object, None);
        assert_eq!(sdc("grasp number two").place, Some(Place::Choice(2)));
        // without `joint` or `number` a small number is no place
        assert_eq!(sdc("move 3").place, None);
        assert_eq!(
            sdc("move along the z axis by 5 cm").place,
            Some(Place::Word(HighLevelWord::new(Category::Axes, "Z")))
        );
        // the quantity is not mistaken for a joint
        assert_eq!(sdc("move joint 4 by 5 degrees").place, Some(Place::Joint(4)));
    }

    #[test]
    fn wire_form() {
        let s = Sdc::new("Move")
            .with_place_word("Forward")
            .with_path(30.0, "Centimetres");
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"event":"Move","object":null,"place":"Forward","path":{"magnitude":30.0,"unit":"Centimetres"}})
        );
        let stop = serde_json::to_value(Extracted::Trigger(TriggerAction::Stop)).unwrap();
        assert_eq!(stop, serde_json::json!({"trigger":"Stop"}));
        let j = serde_json::to_value(Sdc::new("Move").with_place(Place::Joint(3))).unwrap();
        assert_eq!(j["place"], serde_json::json!({"joint":3}));
        let wire: SdcWire = serde_json::from_value(v).unwrap();
        assert_eq!(Sdc::from_wire(&wire, &Lexicon::shipped()), s);
    }

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("30"), Some(30.0));
        assert_eq!(parse_quantity("-2.5"), Some(-2.5));
        assert_eq!(parse_quantity("±15"), Some(15.0));
        assert_eq!(parse_quantity("three"), Some(3.0));
        assert_eq!(parse_quantity("x"), None);
        assert_eq!(parse_quantity(""), None);
    }
}
