use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::protocol::{Stage, StageError};
use crate::deptree::parse_command;
use crate::lexicon::Lexicon;
use crate::sdc::{extract, Extracted, ExtractedWire, TriggerAction};

const MARK: &str = "# expected:";

/// What an annotated corpus line should produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Error { error: String },
    Many(Vec<ExtractedWire>),
    One(ExtractedWire),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchLine {
    /// 1-based line number in the file.
    pub line: usize,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extracted: Option<Vec<ExtractedWire>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BatchReport {
    pub lines: Vec<BatchLine>,
    pub annotated: usize,
    pub passed: usize,
    pub failed: usize,
}

impl BatchReport {
    pub fn success(&self) -> bool {
        self.failed == 0
    }
}

impl fmt::Display for BatchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            let mark = if l.pass { "ok  " } else { "FAIL" };
            let got = match (&l.extracted, &l.error) {
                (Some(x), _) => serde_json::to_string(x).unwrap_or_default(),
                (None, Some(e)) => e.to_string(),
                (None, None) => String::new(),
            };
            writeln!(f, "{mark} {:>4}  {}  =>  {got}", l.line, l.text)?;
            if !l.pass {
                if let Some(exp) = &l.expected {
                    writeln!(
                        f,
                        "           expected {}",
                        serde_json::to_string(exp).unwrap_or_default()
                    )?;
                }
            }
        }
        writeln!(
            f,
            "{} commands, {} annotated, {} passed, {} failed",
            self.lines.len(),
            self.annotated,
            self.passed,
            self.failed
        )
    }
}

fn split_line(raw: &str) -> Result<(String, Option<Expected>), String> {
    match raw.find(MARK) {
        Some(i) => {
            let json = raw[i + MARK.len()..].trim();
            let exp = serde_json::from_str(json).map_err(|e| e.to_string())?;
            Ok((raw[..i].trim().to_string(), Some(exp)))
        }
        None => Ok((raw.trim().to_string(), None)),
    }
}

fn matches(expected: &Expected, got: &Result<Vec<ExtractedWire>, StageError>) -> bool {
    match (expected, got) {
        (Expected::Error { error }, Err(e)) => *error == e.kind,
        (Expected::Many(want), Ok(g)) => want == g,
        (Expected::One(want), Ok(g)) => g.len() == 1 && *want == g[0],
        _ => false,
    }
}

/// Extracts SDCs for every command line in `text`, checking annotated
/// lines. Learn triggers update a working copy of the lexicon so later
/// lines see the learned words. Lines starting with `#` are comments.
pub fn run_batch(text: &str, lexicon: &Lexicon) -> BatchReport {
    let mut lex = lexicon.clone();
    let mut report = BatchReport::default();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let (text, expected) = match split_line(raw) {
            Ok(v) => v,
            Err(message) => {
                report.failed += 1;
                report.lines.push(BatchLine {
                    line: n + 1,
                    text: raw.trim().to_string(),
                    extracted: None,
                    error: Some(StageError {
                        stage: Stage::Protocol,
                        kind: "BadAnnotation".into(),
                        message,
                    }),
                    expected: None,
                    pass: false,
                });
                continue;
            }
        };
        let got = parse_command(&text, &lex)
            .map_err(|e| StageError::new(Stage::Parse, &e))
            .and_then(|tree| extract(&tree, &lex).map_err(|e| StageError::new(Stage::Extract, &e)));
        if let Ok(items) = &got {
            for item in items {
                if let Extracted::Trigger(TriggerAction::Learn { new_word, target }) = item {
                    let _ = lex.learn(new_word, target);
                }
            }
        }
        let got = got.map(|items| items.iter().map(ExtractedWire::from).collect::<Vec<_>>());
        let pass = expected.as_ref().is_none_or(|e| matches(e, &got));
        if expected.is_some() {
            report.annotated += 1;
        }
        if pass {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
        let (extracted, error) = match got {
            Ok(x) => (Some(x), None),
            Err(e) => (None, Some(e)),
        };
        report.lines.push(BatchLine {
            line: n + 1,
            text,
            extracted,
            error,
            expected,
            pass,
        });
    }
    report
}

pub fn run_batch_file(path: impl AsRef<Path>, lexicon: &Lexicon) -> std::io::Result<BatchReport> {
    Ok(run_batch(&std::fs::read_to_string(path)?, lexicon))
}
