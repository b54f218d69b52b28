//! Structural elicitation engine.
//!
//! Represents, validates and revises four classes of graphical model
//! (Bayesian network DAGs, chain event graphs, multi-regression dynamic
//! models and hierarchical flow graphs), turns their structure into
//! natural-language irrelevance questions, and applies expert answers as
//! auditable revisions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the HTTP service live in the `elicit-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

#[cfg(test)]
#[macro_use]
extern crate std;
extern crate alloc;

pub mod ceg;
pub mod elicitation;
pub mod flow;
pub mod graph;
pub mod hash;
pub mod mdm;
pub mod semigraphoid;
pub mod statement;

pub use graph::{CycleError, Dag, GraphError, Node, NodeId, NodeSet, UndirectedGraph};
pub use statement::{CiStatement, StatementError};
