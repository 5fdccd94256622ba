//! Newline-delimited JSON envelopes exchanged with clients.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::controller::{LevelKind, Pose};
use crate::deptree::DependencyTree;
use crate::grasp::MenuEntry;
use crate::lexicon::Category;
use crate::sdc::ExtractedWire;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Hello,
    Welcome,
    Command,
    SdcResult,
    Plan,
    GraspMenu,
    SelectGrasp,
    Tick,
    Error,
    LexiconUpdate,
    Stop,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default)]
    pub seq: u64,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub payload: Value,
}

impl Envelope {
    pub fn new(kind: Kind, payload: impl Serialize) -> Self {
        Self {
            session: None,
            seq: 0,
            kind,
            payload: serde_json::to_value(payload).expect("payloads serialize"),
        }
    }

    pub fn with_session(mut self, session: &str, seq: u64) -> Self {
        self.session = Some(session.to_string());
        self.seq = seq;
        self
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelopes serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, StageError> {
        serde_json::from_str(line).map_err(|e| StageError {
            stage: Stage::Protocol,
            kind: "MalformedMessage".into(),
            message: e.to_string(),
        })
    }

    pub fn payload_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T, StageError> {
        serde_json::from_value(self.payload.clone()).map_err(|e| StageError {
            stage: Stage::Protocol,
            kind: "BadPayload".into(),
            message: e.to_string(),
        })
    }
}

/// Pipeline step an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Protocol,
    Session,
    Parse,
    Extract,
    Lexicon,
    Classify,
    Plan,
    Grasp,
    Select,
    Execute,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("stage serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

/// An error as clients see it: stage, variant name and message.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("[{stage}] {kind}: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub kind: String,
    pub message: String,
}

impl StageError {
    pub fn new<E: fmt::Debug + fmt::Display>(stage: Stage, err: &E) -> Self {
        let debug = format!("{err:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .next()
            .unwrap_or_default()
            .to_string();
        Self {
            stage,
            kind,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Text,
    /// Reserved for transcribed speech.
    Speech,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandPayload {
    pub text: String,
    #[serde(default)]
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectPayload {
    /// 1-based menu line.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelcomePayload {
    pub session: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdcResult {
    pub text: String,
    pub tree: DependencyTree,
    pub extracted: Vec<ExtractedWire>,
    /// Command level per extracted item; `None` for triggers and
    /// unclassifiable SDCs.
    pub levels: Vec<Option<LevelKind>>,
}

/// Summary of a trajectory about to execute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub level: LevelKind,
    pub detail: String,
    pub samples: usize,
    pub duration: f64,
    pub final_pose: Option<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspMenu {
    /// Object the menu is for, by id.
    pub object: String,
    pub candidates: Vec<MenuEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconUpdate {
    pub new_word: String,
    pub target: String,
    pub category: Category,
    pub saved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopAck {
    /// Whether an execution was running.
    pub interrupted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Interrupted,
    Menu,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Done {
    /// Client seq of the message this finishes.
    pub reply_to: u64,
    pub outcome: Outcome,
}
