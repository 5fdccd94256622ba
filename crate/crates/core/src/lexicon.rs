//! The command dictionary: seven categories of high-level words, each mapping
//! to the synonyms that resolve to it.
//!
//! Lookups are case-insensitive and treat `_` as a space, so the multi-word
//! tokens produced by [`crate::deptree::parse_command`] (`teddy_bear`) resolve
//! against the stored spelling (`teddy bear`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown target word `{target}`{}", line_suffix(*.line))]
    UnknownTarget { target: String, line: Option<usize> },
    #[error("`{word}` is already a synonym of {existing}")]
    DuplicateSynonym { word: String, existing: String },
    #[error("`{word}` already maps to {existing} in the same category{}", line_suffix(*.line))]
    SynonymConflict {
        word: String,
        existing: String,
        line: Option<usize>,
    },
    #[error("malformed synonym line {0}")]
    MalformedLine(usize),
    #[error("lexicon schema violation: {0}")]
    SchemaViolation(String),
    #[error("empty word")]
    EmptyWord,
    #[error("i/o error: {0}")]
    Io(String),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

/// The seven dictionary categories, in lookup precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Verbs,
    Objects,
    PlaceWords,
    UnitOfMeasurement,
    Nouns,
    Axes,
    TriggerWords,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Verbs,
        Category::Objects,
        Category::PlaceWords,
        Category::UnitOfMeasurement,
        Category::Nouns,
        Category::Axes,
        Category::TriggerWords,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Verbs => "Verbs",
            Category::Objects => "Objects",
            Category::PlaceWords => "PlaceWords",
            Category::UnitOfMeasurement => "UnitOfMeasurement",
            Category::Nouns => "Nouns",
            Category::Axes => "Axes",
            Category::TriggerWords => "TriggerWords",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| LexiconError::UnknownCategory(s.to_string()))
    }
}

/// A canonical dictionary entry, e.g. `Verbs/Grab`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HighLevelWord {
    pub category: Category,
    pub name: String,
}

impl HighLevelWord {
    pub fn new(category: Category, name: impl Into<String>) -> Self {
        Self {
            category,
            name: name.into(),
        }
    }

    pub fn is(&self, name: &str) -> bool {
        self.name == name
    }
}

impl fmt::Display for HighLevelWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.category, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub extension: bool,
}

/// A single learned synonym, as recorded for persistence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconDelta {
    pub category: Category,
    pub high_level: String,
    pub synonym: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffKind {
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffLine {
    pub kind: DiffKind,
    pub category: Category,
    pub high_level: String,
    pub synonym: String,
}

impl fmt::Display for DiffLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.kind {
            DiffKind::Added => '+',
            DiffKind::Removed => '-',
        };
        write!(f, "{sign} {}/{}: {}", self.category, self.high_level, self.synonym)
    }
}

#[derive(Serialize, Deserialize)]
struct LexiconFile {
    version: u32,
    categories: BTreeMap<String, BTreeMap<String, Entry>>,
}

/// Lowercases, maps `_` to spaces and collapses runs of whitespace.
pub fn normalize(word: &str) -> String {
    word.replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    categories: BTreeMap<Category, BTreeMap<String, Entry>>,
    deltas: Vec<LexiconDelta>,
}

/// Structural equality: the delta log is bookkeeping, not content.
impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.categories == other.categories
    }
}

impl Eq for Lexicon {}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }
}

impl Lexicon {
    /// The shipped dictionary.
    pub fn shipped() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let file: LexiconFile = serde_json::from_str(text).map_err(|e| LexiconError::SchemaViolation(e.to_string()))?;
        if file.version != SCHEMA_VERSION {
            return Err(LexiconError::SchemaViolation(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let mut categories = BTreeMap::new();
        for (name, words) in file.categories {
            let cat: Category = name
                .parse()
                .map_err(|_| LexiconError::SchemaViolation(format!("unknown category `{name}`")))?;
            categories.insert(cat, words);
        }
        for cat in Category::ALL {
            if !categories.contains_key(&cat) {
                return Err(LexiconError::SchemaViolation(format!("missing category `{cat}`")));
            }
        }
        let lex = Self {
            categories,
            deltas: Vec::new(),
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn to_json(&self) -> String {
        let file = LexiconFile {
            version: SCHEMA_VERSION,
            categories: self
                .categories
                .iter()
                .map(|(c, words)| (c.to_string(), words.clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|e| LexiconError::Io(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| LexiconError::Io(e.to_string()))
    }

    fn validate(&self) -> Result<(), LexiconError> {
        for (cat, words) in &self.categories {
            let mut seen: BTreeMap<String, &str> = BTreeMap::new();
            for (name, entry) in words {
                if entry.synonyms.is_empty() {
                    return Err(LexiconError::SchemaViolation(format!("{cat}/{name} has no synonyms")));
                }
                for syn in &entry.synonyms {
                    let key = normalize(syn);
                    if key.is_empty() {
                        return Err(LexiconError::SchemaViolation(format!(
                            "{cat}/{name} has an empty synonym"
                        )));
                    }
                    if let Some(other) = seen.insert(key, name) {
                        if other != name {
                            return Err(LexiconError::SchemaViolation(format!(
                                "`{syn}` listed under both {cat}/{other} and {cat}/{name}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self, category: Category) -> &BTreeMap<String, Entry> {
        &self.categories[&category]
    }

    pub fn entry(&self, word: &HighLevelWord) -> Option<&Entry> {
        self.categories.get(&word.category)?.get(&word.name)
    }

    /// Synonyms learned or imported since this lexicon was loaded.
    pub fn deltas(&self) -> &[LexiconDelta] {
        &self.deltas
    }

    fn lookup_in(&self, key: &str, category: Category) -> Option<HighLevelWord> {
        let words = self.categories.get(&category)?;
        words
            .iter()
            .find(|(name, entry)| normalize(name) == key || entry.synonyms.iter().any(|s| normalize(s) == key))
            .map(|(name, _)| HighLevelWord::new(category, name.clone()))
    }

    /// Resolves a word (or canonical name) to its high-level word, searching
    /// every category in precedence order when none is given.
    pub fn lookup(&self, word: &str, category: Option<Category>) -> Option<HighLevelWord> {
        let key = normalize(word);
        if key.is_empty() {
            return None;
        }
        match category {
            Some(cat) => self.lookup_in(&key, cat),
            None => Category::ALL.into_iter().find_map(|cat| self.lookup_in(&key, cat)),
        }
    }

    /// Like [`Lexicon::lookup`] but the category is given by name.
    pub fn lookup_named(&self, word: &str, category: Option<&str>) -> Result<Option<HighLevelWord>, LexiconError> {
        let cat = category.map(str::parse).transpose()?;
        Ok(self.lookup(word, cat))
    }

    /// True if `word` is exactly one of the synonyms (or the name) of `name`
    /// in `category`.
    pub fn resolves_to(&self, word: &str, category: Category, name: &str) -> bool {
        self.lookup(word, Some(category)).is_some_and(|w| w.name == name)
    }

    /// Every multi-word synonym across all categories, normalized.
    pub fn phrases(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .categories
            .values()
            .flat_map(|words| words.values())
            .flat_map(|e| e.synonyms.iter())
            .map(|s| normalize(s))
            .filter(|s| s.contains(' '))
            .map(|s| s.split(' ').map(str::to_string).collect())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Adds `new_word` as a synonym of whatever `target` resolves to.
    pub fn learn(&mut self, new_word: &str, target: &str) -> Result<LexiconDelta, LexiconError> {
        let target_word = self.lookup(target, None).ok_or_else(|| LexiconError::UnknownTarget {
            target: target.to_string(),
            line: None,
        })?;
        self.add_synonym(&target_word, new_word)
    }

    fn add_synonym(&mut self, target: &HighLevelWord, new_word: &str) -> Result<LexiconDelta, LexiconError> {
        let key = normalize(new_word);
        if key.is_empty() {
            return Err(LexiconError::EmptyWord);
        }
        if let Some(existing) = self.lookup_in(&key, target.category) {
            return Err(if existing == *target {
                LexiconError::DuplicateSynonym {
                    word: key,
                    existing: existing.name,
                }
            } else {
                LexiconError::SynonymConflict {
                    word: key,
                    existing: existing.name,
                    line: None,
                }
            });
        }
        let entry = self
            .categories
            .get_mut(&target.category)
            .and_then(|w| w.get_mut(&target.name))
            .ok_or_else(|| LexiconError::UnknownTarget {
                target: target.name.clone(),
                line: None,
            })?;
        entry.synonyms.push(key.clone());
        let delta = LexiconDelta {
            category: target.category,
            high_level: target.name.clone(),
            synonym: key,
        };
        self.deltas.push(delta.clone());
        Ok(delta)
    }

    /// Imports `category<TAB>high_level<TAB>syn1,syn2,...` lines. Blank lines
    /// and `#` comments are skipped, as are synonyms already present under
    /// the same word. Returns how many synonyms were added.
    pub fn import_synonyms(&mut self, text: &str) -> Result<usize, LexiconError> {
        let mut added = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(LexiconError::MalformedLine(line_no));
            }
            let category: Category = cols[0].parse().map_err(|_| LexiconError::MalformedLine(line_no))?;
            let key = normalize(cols[1]);
            let name = self
                .entries(category)
                .keys()
                .find(|n| normalize(n) == key)
                .cloned()
                .ok_or_else(|| LexiconError::UnknownTarget {
                    target: cols[1].to_string(),
                    line: Some(line_no),
                })?;
            let target = HighLevelWord::new(category, name);
            for syn in cols[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match self.add_synonym(&target, syn) {
                    Ok(_) => added += 1,
                    Err(LexiconError::DuplicateSynonym { .. }) => {}
                    Err(LexiconError::SynonymConflict { word, existing, .. }) => {
                        return Err(LexiconError::SynonymConflict {
                            word,
                            existing,
                            line: Some(line_no),
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(added)
    }

    /// Synonym-level differences from `self` to `other`.
    pub fn diff(&self, other: &Lexicon) -> Vec<DiffLine> {
        let mut out = Vec::new();
        let mut side = |from: &Lexicon, to: &Lexicon, kind: DiffKind| {
            for (cat, words) in &to.categories {
                for (name, entry) in words {
                    let before = from.categories.get(cat).and_then(|w| w.get(name));
                    for syn in &entry.synonyms {
                        let present = before.is_some_and(|e| e.synonyms.iter().any(|s| normalize(s) == normalize(syn)));
                        if !present {
                            out.push(DiffLine {
                                kind,
                                category: *cat,
                                high_level: name.clone(),
                                synonym: syn.clone(),
                            });
                        }
                    }
                }
            }
        };
        side(self, other, DiffKind::Added);
        side(other, self, DiffKind::Removed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verbs(word: &str) -> Option<String> {
        Lexicon::shipped().lookup(word, Some(Category::Verbs)).map(|w| w.name)
    }

    #[test]
    fn table_synonyms_resolve() {
        assert_eq!(verbs("grasp").as_deref(), Some("Grab"));
        assert_eq!(verbs("travel").as_deref(), Some("Move"));
        assert_eq!(verbs("xyzzy"), None);
        assert_eq!(verbs("GRAB").as_deref(), Some("Grab"));
    }

    #[test]
    fn canonical_names_resolve_to_themselves() {
        let lex = Lexicon::shipped();
        assert_eq!(
            lex.lookup("TeddyBear", Some(Category::Objects)).unwrap().name,
            "TeddyBear"
        );
        assert_eq!(lex.lookup("teddy_bear", None).unwrap().name, "TeddyBear");
    }

    #[test]
    fn unknown_category_name() {
        let lex = Lexicon::shipped();
        assert_eq!(
            lex.lookup_named("grab", Some("Adjectives")),
            Err(LexiconError::UnknownCategory("Adjectives".into()))
        );
    }

    #[test]
    fn baseline_entries_are_verbatim() {
        let lex = Lexicon::shipped();
        let expect: &[(Category, &str, &[&str])] = &[
            (Category::Verbs, "Move", &["move", "go", "travel"]),
            (Category::Verbs, "Grab", &["grab", "grasp", "catch"]),
            (Category::Verbs, "Rotate", &["rotate", "revolve"]),
            (Category::Objects, "Hand", &["hand", "fingers", "wrist"]),
            (Category::Objects, "TeddyBear", &["teddy bear", "teddy"]),
            (Category::Objects, "Bottle", &["water bottle", "bottle"]),
            (Category::Objects, "Scissors", &["scissors", "scissor"]),
            (Category::PlaceWords, "Forward", &["forward", "forwards"]),
            (Category::PlaceWords, "Backward", &["backward", "backwards"]),
            (Category::PlaceWords, "Up", &["up", "upward", "upwards"]),
            (Category::TriggerWords, "Learn", &["means", "implies"]),
            (Category::TriggerWords, "Split", &["then", "before"]),
            (Category::TriggerWords, "Stop", &["stop", "halt", "quit"]),
        ];
        for (cat, name, syns) in expect {
            let entry = &lex.entries(*cat)[*name];
            assert_eq!(entry.synonyms, *syns, "{cat}/{name}");
            assert!(!entry.extension, "{cat}/{name} must not be flagged");
        }
        let extended = Category::ALL
            .iter()
            .flat_map(|c| lex.entries(*c).iter().map(move |(n, e)| (*c, n, e)))
            .filter(|(_, _, e)| !e.extension)
            .count();
        assert_eq!(extended, expect.len());
    }

    #[test]
    fn learn_then_lookup() {
        let mut lex = Lexicon::shipped();
        let delta = lex.learn("snatch", "grab").unwrap();
        assert_eq!(delta.high_level, "Grab");
        assert_eq!(verbs_in(&lex, "snatch").as_deref(), Some("Grab"));
        assert_eq!(lex.deltas().len(), 1);
    }

    fn verbs_in(lex: &Lexicon, w: &str) -> Option<String> {
        lex.lookup(w, Some(Category::Verbs)).map(|w| w.name)
    }

    #[test]
    fn learn_errors() {
        let mut lex = Lexicon::shipped();
        assert!(matches!(
            lex.learn("grasp", "grab"),
            Err(LexiconError::DuplicateSynonym { .. })
        ));
        assert!(matches!(
            lex.learn("foo", "bar"),
            Err(LexiconError::UnknownTarget { .. })
        ));
        assert!(matches!(
            lex.learn("move", "grab"),
            Err(LexiconError::SynonymConflict { .. })
        ));
    }

    #[test]
    fn cross_category_duplicates_are_allowed() {
        let mut lex = Lexicon::shipped();
        // "up" is a place word; learning it as a verb is a different category
        lex.learn("up", "move").unwrap();
        assert_eq!(verbs_in(&lex, "up").as_deref(), Some("Move"));
        assert_eq!(lex.lookup("up", Some(Category::PlaceWords)).unwrap().name, "Up");
    }

    #[test]
    fn import_counts_novel_words() {
        let mut lex = Lexicon::shipped();
        let file = "Verbs\tGrab\tsnatch,seize,grasp\nVerbs\tMove\tproceed\n";
        assert_eq!(lex.import_synonyms(file).unwrap(), 3);
        for w in ["snatch", "seize", "proceed"] {
            assert!(lex.lookup(w, Some(Category::Verbs)).is_some());
        }
        assert_eq!(lex.import_synonyms("").unwrap(), 0);
        assert_eq!(
            lex.import_synonyms("Adjectives\tRed\tred\n"),
            Err(LexiconError::MalformedLine(1))
        );
        assert!(matches!(
            lex.import_synonyms("# c\nVerbs\tJump\thop\n"),
            Err(LexiconError::UnknownTarget { line: Some(2), .. })
        ));
        assert_eq!(
            lex.import_synonyms("Verbs Grab hop"),
            Err(LexiconError::MalformedLine(1))
        );
    }

    #[test]
    fn json_round_trip_and_schema() {
        let lex = Lexicon::shipped();
        let back = Lexicon::from_json(&lex.to_json()).unwrap();
        assert_eq!(back, lex);

        let mut v: serde_json::Value = serde_json::from_str(&lex.to_json()).unwrap();
        v["categories"].as_object_mut().unwrap().remove("Axes");
        assert!(matches!(
            Lexicon::from_json(&v.to_string()),
            Err(LexiconError::SchemaViolation(_))
        ));
    }

    #[test]
    fn save_after_learn_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.json");
        let mut lex = Lexicon::shipped();
        lex.learn("snatch", "grab").unwrap();
        lex.save(&path).unwrap();
        let back = Lexicon::load(&path).unwrap();
        assert_eq!(verbs_in(&back, "snatch").as_deref(), Some("Grab"));
    }

    #[test]
    fn diff_reports_added_and_removed() {
        let base = Lexicon::shipped();
        let mut grown = base.clone();
        grown.learn("snatch", "grab").unwrap();
        let d = base.diff(&grown);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiffKind::Added);
        assert_eq!(d[0].to_string(), "+ Verbs/Grab: snatch");
        assert_eq!(grown.diff(&base)[0].kind, DiffKind::Removed);
    }
}
