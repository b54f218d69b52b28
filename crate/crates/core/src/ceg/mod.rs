//! Event trees, staged trees and chain event graphs.
//!
//! A staged tree colours the situations of an event tree so that vertices
//! in one stage share outgoing-edge probabilities. Merging vertices whose
//! coloured futures coincide gives the chain event graph, on which fine
//! cuts and cuts decide separation.

mod graph;
mod tree;

pub use graph::{
    Certificate, Ceg, CegEdge, CegPath, CutQuery, CutSet, EdgeCondition, Event, PathWitness, Position,
    SeparationResult, VariableSeparation,
};
pub use tree::{EventTree, PathOutcome, StagedTree, StagingViolation, TreeEdge, Vertex};

use alloc::string::String;
use alloc::vec::Vec;

/// Tolerance for stage probability agreement and per-vertex sums.
pub const STAGING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PositionId(pub usize);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CegError {
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),
    #[error("vertex {0} has more than one parent")]
    MultipleParents(String),
    #[error("tree must have exactly one root, found {0}")]
    RootCount(usize),
    #[error("vertex {0} is not reachable from the root")]
    Disconnected(String),
    #[error("vertex {vertex} has two outgoing edges labelled {label}")]
    DuplicateLabel { vertex: String, label: String },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("either every edge carries a probability or none does")]
    PartialProbabilities,
    #[error("vertex {0} is a leaf or listed in two stages")]
    BadStageMember(String),
    #[error("staging is inconsistent: {0:?}")]
    InvalidStaging(Vec<StagingViolation>),
    #[error("unknown position {0}")]
    UnknownPosition(usize),
    #[error("unknown stage {0}")]
    UnknownStage(usize),
    #[error("malformed query: {0}")]
    MalformedQuery(String),
    #[error("event selects no root-to-sink path")]
    EmptyEvent,
}
