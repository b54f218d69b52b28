//! Separation queries shared by the CLI and the service.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use elicit_core::ceg::{Ceg, CutQuery, Event, PositionId, SeparationResult, StageId, VariableSeparation};
use elicit_core::Dag;
use serde::{Deserialize, Serialize};

use crate::document::Model;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub y: Vec<String>,
    /// Conditioning nodes for a DAG; event items (`label` or
    /// `variable=label`) for a CEG variable query.
    #[serde(default)]
    pub given: Vec<String>,
    /// CEG position indices to test as a fine cut.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<usize>>,
    /// CEG stage indices to test as a cut.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<usize>>,
}

/// Why `x` and `y` are or are not separated: the moralized ancestral graph
/// of `x ∪ y ∪ given`, and when they are not, a path in it avoiding `given`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoralCertificate {
    pub ancestral_set: Vec<String>,
    pub moral_edges: Vec<(String, String)>,
    pub removed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connecting_path: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "query", rename_all = "snake_case")]
pub enum QueryResult {
    DSeparation { separated: bool, x: Vec<String>, y: Vec<String>, given: Vec<String>, certificate: MoralCertificate },
    Cut {
        #[serde(flatten)]
        result: SeparationResult,
    },
    Variables {
        upstream: String,
        downstream: String,
        event: Vec<String>,
        #[serde(flatten)]
        result: VariableSeparation,
    },
}

impl QueryResult {
    pub fn separated(&self) -> bool {
        match self {
            QueryResult::DSeparation { separated, .. } => *separated,
            QueryResult::Cut { result } => result.separated,
            QueryResult::Variables { result, .. } => result.separated,
        }
    }

    pub fn render(&self) -> String {
        let verdict = if self.separated() { "separated" } else { "not separated" };
        let mut out = String::from(verdict);
        match self {
            QueryResult::DSeparation { certificate: c, .. } => {
                out += &format!("\nancestral set: {}", c.ancestral_set.join(", "));
                let edges: Vec<String> = c.moral_edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                out += &format!("\nmoral edges: {}", edges.join(", "));
                out += &format!("\nremoved: {}", if c.removed.is_empty() { "none".into() } else { c.removed.join(", ") });
                if let Some(p) = &c.connecting_path {
                    out += &format!("\nconnecting path: {}", p.join(" - "));
                }
            }
            QueryResult::Cut { result } => {
                if let Some(c) = &result.certificate {
                    out += &format!("\ncertificate: {}", serde_json::to_string(c).expect("serializable"));
                }
                if let Some(w) = &result.witness {
                    out += &format!("\nwitness path meets the set {} times: {}", w.hits, w.labels.join(" > "));
                }
            }
            QueryResult::Variables { result, .. } => {
                if let Some(p) = result.cut_vertex {
                    out += &format!("\ncut vertex: position {}", p.0);
                }
                if let Some(w) = &result.witness {
                    out += &format!("\nwitness path: {}", w.labels.join(" > "));
                }
            }
        }
        out
    }
}

pub fn run(model: &Model, q: &QueryRequest) -> Result<QueryResult> {
    match model {
        Model::Dag(d) => dag_query(d, q),
        Model::StagedTree(t) => ceg_query(&Ceg::from_staged_tree(t)?, q),
        Model::Ceg { ceg, .. } => ceg_query(ceg, q),
        other => Err(CliError::Usage(format!("query needs a dag, staged_tree or ceg document, not {}", other.kind()))),
    }
}

fn dag_query(d: &Dag, q: &QueryRequest) -> Result<QueryResult> {
    if q.positions.is_some() || q.stages.is_some() {
        return Err(CliError::Usage("--cut and --stages apply to staged trees and CEGs".into()));
    }
    if q.x.is_empty() || q.y.is_empty() {
        return Err(CliError::Usage("a DAG query needs --x and --y".into()));
    }
    let (a, b, s) = (d.resolve_set(&q.x)?, d.resolve_set(&q.y)?, d.resolve_set(&q.given)?);
    let separated = d.d_separated(&a, &b, &s)?;
    let all = a.iter().chain(&b).chain(&s).copied().collect();
    let anc = d.ancestral_graph(&all)?;
    let moral = anc.moralize();
    let sym = |set: &elicit_core::NodeSet| -> Vec<String> { set.iter().map(|v| d.node(*v).symbol.clone()).collect() };
    let removed: BTreeSet<String> = sym(&s).into_iter().collect();
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, v) in moral.edges() {
        let (u, v) = (anc.node(*u).symbol.as_str(), anc.node(*v).symbol.as_str());
        if !removed.contains(u) && !removed.contains(v) {
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
    }
    let targets: BTreeSet<String> = sym(&b).into_iter().collect();
    let mut prev: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    let starts = sym(&a);
    for x in &starts {
        prev.insert(x.as_str(), None);
        queue.push_back(x.as_str());
    }
    let mut connecting_path = None;
    while let Some(u) = queue.pop_front() {
        if targets.contains(u) {
            let mut path = vec![u.to_string()];
            let mut cur = u;
            while let Some(Some(p)) = prev.get(cur) {
                path.push(p.to_string());
                cur = p;
            }
            path.reverse();
            connecting_path = Some(path);
            break;
        }
        for v in adj.get(u).into_iter().flatten() {
            if !prev.contains_key(v) {
                prev.insert(v, Some(u));
                queue.push_back(v);
            }
        }
    }
    Ok(QueryResult::DSeparation {
        separated,
        x: starts,
        y: targets.into_iter().collect(),
        given: removed.iter().cloned().collect(),
        certificate: MoralCertificate {
            ancestral_set: anc.nodes().iter().map(|n| n.symbol.clone()).collect(),
            moral_edges: moral.symbol_edges().into_iter().collect(),
            removed: removed.into_iter().collect(),
            connecting_path,
        },
    })
}

fn ceg_query(ceg: &Ceg, q: &QueryRequest) -> Result<QueryResult> {
    match (&q.positions, &q.stages) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either positions or stages, not both".into())),
        (Some(p), None) => Ok(QueryResult::Cut { result: ceg.separated(&CutQuery::positions(p.iter().map(|i| PositionId(*i))))? }),
        (None, Some(s)) => Ok(QueryResult::Cut { result: ceg.separated(&CutQuery::stages(s.iter().map(|i| StageId(*i))))? }),
        (None, None) => {
            let ([u], [v]) = (q.x.as_slice(), q.y.as_slice()) else {
                return Err(CliError::Usage("a CEG query needs --cut, --stages, or one variable each in --x and --y".into()));
            };
            let graph = if q.given.is_empty() { ceg.clone() } else { ceg.pseudo_ancestral(&Event::from_items(&q.given))? };
            let result = graph.separate_variables(u, v)?;
            Ok(QueryResult::Variables { upstream: u.clone(), downstream: v.clone(), event: q.given.clone(), result })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use elicit_core::Node;

    fn food_health() -> Model {
        let nodes = ["B", "I", "F", "H"].iter().map(|s| Node::new(*s, *s, *s)).collect();
        Model::Dag(Dag::with_edges(nodes, &[("B", "F"), ("I", "F"), ("F", "H")]).unwrap())
    }

    fn q(x: &str, y: &str, given: &[&str]) -> QueryRequest {
        QueryRequest { x: vec![x.into()], y: vec![y.into()], given: given.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    #[test]
    fn certificate_matches_verdict() {
        let r = run(&food_health(), &q("H", "B", &["F"])).unwrap();
        assert!(r.separated());
        let QueryResult::DSeparation { certificate, .. } = &r else { panic!() };
        assert_eq!(certificate.ancestral_set, ["B", "I", "F", "H"]);
        assert!(certificate.moral_edges.contains(&("B".into(), "I".into())));
        assert!(certificate.connecting_path.is_none());

        // Conditioning on the collider connects its parents.
        let r = run(&food_health(), &q("B", "I", &["F"])).unwrap();
        assert!(!r.separated());
        let QueryResult::DSeparation { certificate, .. } = &r else { panic!() };
        assert_eq!(certificate.connecting_path.as_deref(), Some(&["B".to_string(), "I".to_string()][..]));

        let r = run(&food_health(), &q("B", "I", &[])).unwrap();
        let QueryResult::DSeparation { certificate, separated, .. } = &r else { panic!() };
        assert!(separated);
        assert_eq!(certificate.ancestral_set, ["B", "I"]);
        assert!(certificate.moral_edges.is_empty());
    }

    #[test]
    fn bad_queries() {
        assert!(matches!(run(&food_health(), &QueryRequest::default()), Err(CliError::Usage(_))));
        assert!(matches!(run(&food_health(), &q("H", "Z", &[])), Err(CliError::Graph(_))));
        assert!(matches!(run(&food_health(), &q("H", "H", &[])), Err(CliError::Graph(_))));
    }
}
