//! Question generation, expert sessions and the model-class advisor.

mod advisor;
mod questions;
mod session;

pub use advisor::{advise_framework, ChecklistItem, FrameworkRecommendation, ModelClass, Reply, RuleStep, TrailEntry, CHECKLIST, CHECKLIST_VERSION};
pub use questions::{dag_labels, generate_ceg_questions, generate_questions, join_labels, render_question};
pub use session::{
    AnswerOutcome, Advisory, RevisionOp, Session, SessionModel, SessionReport, TranscriptEvent, TranscriptRecord,
};

use alloc::string::String;
use alloc::vec::Vec;

use crate::ceg::CegError;
use crate::graph::GraphError;
use crate::mdm::MdmError;
use crate::semigraphoid::{DerivationTrace, SemigraphoidError};
use crate::statement::CiStatement;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ElicitError {
    #[error("no label for {0}")]
    MissingLabel(String),
    #[error("not a cut: {0}")]
    NotACut(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("question {0} was asked about an earlier version of the model")]
    StaleQuestion(String),
    #[error("question {id} is {status} and cannot be answered")]
    NotAnswerable { id: String, status: String },
    #[error("a relevant answer to {question} needs an edge orientation")]
    OrientationRequired { question: String, options: Vec<Orientation> },
    #[error("edge {from} -> {to} does not join the variables of question {question}")]
    EdgeMismatch { question: String, from: String, to: String },
    #[error("unknown checklist item {0}")]
    UnknownChecklistItem(String),
    #[error("replay diverged at record {seq}")]
    ReplayMismatch { seq: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ceg(#[from] CegError),
    #[error(transparent)]
    Mdm(#[from] MdmError),
    #[error(transparent)]
    Semigraphoid(#[from] SemigraphoidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Irrelevant,
    Relevant,
    Unsure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "state", rename_all = "snake_case"))]
pub enum QuestionStatus {
    Pending,
    Asked,
    Answered { verdict: Verdict },
    /// Answered unsure; listed in the session report.
    Parked,
    /// Implied by earlier questions and confirmed statements.
    Suppressed { trace: Vec<DerivationTrace> },
}

impl QuestionStatus {
    pub fn is_open(&self) -> bool {
        matches!(self, QuestionStatus::Pending | QuestionStatus::Asked)
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuestionStatus::Pending => "pending",
            QuestionStatus::Asked => "asked",
            QuestionStatus::Answered { .. } => "answered",
            QuestionStatus::Parked => "parked",
            QuestionStatus::Suppressed { .. } => "suppressed",
        }
    }
}

/// One way to add the edge a relevant answer implies. `cycle` is the
/// directed cycle it would close, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Orientation {
    pub from: String,
    pub to: String,
    pub cycle: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Question {
    pub id: String,
    pub ci: CiStatement,
    pub text: String,
    pub status: QuestionStatus,
    /// Both orientations of the edge a relevant answer would add; empty
    /// when the question is not about a single pair of nodes.
    #[cfg_attr(feature = "serde", serde(default))]
    pub orientations: Vec<Orientation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeProposal {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Answer {
    pub question_id: String,
    pub verdict: Verdict,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub rationale: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub edge: Option<EdgeProposal>,
    /// Hash of the model the expert saw; a mismatch makes the answer stale.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub model_hash: Option<String>,
}

impl Answer {
    pub fn new(question_id: impl Into<String>, verdict: Verdict) -> Self {
        Answer { question_id: question_id.into(), verdict, rationale: None, edge: None, model_hash: None }
    }

    pub fn with_edge(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.edge = Some(EdgeProposal { from: from.into(), to: to.into() });
        self
    }
}
