use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::ElicitError;

/// Bumped whenever a checklist question or key changes.
pub const CHECKLIST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChecklistItem {
    pub key: &'static str,
    pub question: &'static str,
}

pub const CHECKLIST: [ChecklistItem; 5] = [
    ChecklistItem {
        key: "conserved_flow",
        question: "Does a fixed, homogeneous quantity move through a hierarchy of actors, so that what enters each level also leaves it?",
    },
    ChecklistItem {
        key: "unfolding_events",
        question: "Do the experts describe the problem as a sequence of unfolding events, where some outcomes end or change the story for only some units?",
    },
    ChecklistItem {
        key: "temporal",
        question: "Is the quantity of interest observed repeatedly over time, with relationships that may drift between observations?",
    },
    ChecklistItem {
        key: "contemporaneous_effects",
        question: "Do some time series respond to other series within the same time step, rather than only to their own past?",
    },
    ChecklistItem {
        key: "ambiguous_relationships",
        question: "Are some relationships described without a direction, or as mutual influence that cannot be ordered?",
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Reply {
    Yes,
    No,
    Unsure,
}

impl Reply {
    fn and(self, other: Reply) -> Reply {
        match (self, other) {
            (Reply::No, _) | (_, Reply::No) => Reply::No,
            (Reply::Yes, Reply::Yes) => Reply::Yes,
            _ => Reply::Unsure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelClass {
    Bn,
    DynamicBn,
    Ceg,
    Mdm,
    FlowGraph,
    ChainGraph,
    RegulatoryGraph,
}

impl ModelClass {
    pub fn name(self) -> &'static str {
        match self {
            ModelClass::Bn => "Bayesian network",
            ModelClass::DynamicBn => "Dynamic Bayesian network",
            ModelClass::Ceg => "Chain event graph",
            ModelClass::Mdm => "Multi-regression dynamic model",
            ModelClass::FlowGraph => "Flow graph",
            ModelClass::ChainGraph => "Chain graph",
            ModelClass::RegulatoryGraph => "Regulatory graph",
        }
    }

    pub fn when_to_use(self) -> &'static str {
        match self {
            ModelClass::Bn | ModelClass::DynamicBn => {
                "Systems naturally expressed as dependence structure between random variables"
            }
            ModelClass::Ceg => "Asymmetric problems, problem description is told as a series of unfolding events",
            ModelClass::ChainGraph => "Problem description has both directional and ambiguous relationships",
            ModelClass::FlowGraph => "Supply and demand problems, homogeneous flows",
            ModelClass::Mdm => "Contemporaneous effects between time series",
            ModelClass::RegulatoryGraph => "Need to test a regulatory hypothesis",
        }
    }

    /// Whether sessions can be run on this class. The others are named
    /// for the facilitator only.
    pub fn supported(self) -> bool {
        !matches!(self, ModelClass::ChainGraph | ModelClass::RegulatoryGraph)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrailEntry {
    pub key: String,
    pub question: String,
    pub reply: Reply,
    /// No reply was given; treated as no.
    #[cfg_attr(feature = "serde", serde(default))]
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleStep {
    pub class: ModelClass,
    pub outcome: Reply,
    pub when_to_use: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameworkRecommendation {
    /// None when an unsure reply leaves more than one class in play.
    pub recommended: Option<ModelClass>,
    /// Candidates in priority order, ending at the first definite match.
    pub ranked: Vec<ModelClass>,
    pub advisory_only: bool,
    pub trail: Vec<TrailEntry>,
    pub steps: Vec<RuleStep>,
    pub checklist_version: u32,
}

const RULES: [(ModelClass, &[&str]); 5] = [
    (ModelClass::FlowGraph, &["conserved_flow"]),
    (ModelClass::Ceg, &["unfolding_events"]),
    (ModelClass::Mdm, &["temporal", "contemporaneous_effects"]),
    (ModelClass::DynamicBn, &["temporal"]),
    (ModelClass::ChainGraph, &["ambiguous_relationships"]),
];

/// Rules are tried in priority order; the first all-yes rule wins and a
/// plain BN is the fallback. Unsure rules are kept as ranked candidates.
pub fn advise_framework(answers: &BTreeMap<String, Reply>) -> Result<FrameworkRecommendation, ElicitError> {
    if let Some(k) = answers.keys().find(|k| !CHECKLIST.iter().any(|c| c.key == k.as_str())) {
        return Err(ElicitError::UnknownChecklistItem(k.clone()));
    }
    let reply = |k: &str| answers.get(k).copied().unwrap_or(Reply::No);
    let trail = CHECKLIST
        .iter()
        .map(|c| TrailEntry {
            key: c.key.into(),
            question: c.question.into(),
            reply: reply(c.key),
            defaulted: !answers.contains_key(c.key),
        })
        .collect();

    let mut ranked = Vec::new();
    let mut steps = Vec::new();
    let mut definite = None;
    for (class, keys) in RULES {
        let outcome = keys.iter().fold(Reply::Yes, |acc, k| acc.and(reply(k)));
        steps.push(RuleStep { class, outcome, when_to_use: class.when_to_use().into() });
        match outcome {
            Reply::Yes => {
                ranked.push(class);
                definite = Some(class);
                break;
            }
            Reply::Unsure => ranked.push(class),
            Reply::No => {}
        }
    }
    if definite.is_none() {
        ranked.push(ModelClass::Bn);
        steps.push(RuleStep { class: ModelClass::Bn, outcome: Reply::Yes, when_to_use: ModelClass::Bn.when_to_use().into() });
    }
    let recommended = if ranked.len() == 1 { Some(ranked[0]) } else { None };
    Ok(FrameworkRecommendation {
        advisory_only: recommended.map(|c| !c.supported()).unwrap_or(false),
        recommended,
        ranked,
        trail,
        steps,
        checklist_version: CHECKLIST_VERSION,
    })
}
