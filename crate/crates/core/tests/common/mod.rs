//! Raw oracle inputs turned into engine types.
#![allow(dead_code)]

use std::collections::BTreeSet;

use elicit_core::ceg::{EventTree, StagedTree, TreeEdge, Vertex, VertexId};
use elicit_core::graph::{Dag, Node, NodeId, NodeSet};
use elicit_core::mdm::{MdmNodeSpec, MdmSpec};
use elicit_oracles::gaussian::Regression;
use elicit_oracles::random::{RawSeries, RawTree};
use nalgebra::DVector;

pub fn sym(i: usize) -> String {
    format!("v{i}")
}

pub fn dag(n: usize, edges: &[(usize, usize)]) -> Dag {
    let nodes = (0..n).map(|i| Node::new(sym(i), format!("Variable {i}"), sym(i))).collect();
    let named: Vec<(String, String)> = edges.iter().map(|(a, b)| (sym(*a), sym(*b))).collect();
    Dag::with_edges(nodes, &named).expect("acyclic input")
}

pub fn node_set(items: &[usize]) -> NodeSet {
    items.iter().map(|i| NodeId(*i)).collect()
}

/// Every subset of `items`.
pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0..1u32 << items.len())
        .map(|m| items.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, v)| *v).collect())
        .collect()
}

pub fn staged(raw: &RawTree) -> StagedTree {
    let vertices = (0..raw.children.len())
        .map(|v| Vertex {
            name: format!("s{v}"),
            variable: (!raw.children[v].is_empty()).then(|| format!("X{}", raw.depth[v])),
        })
        .collect();
    let mut edges = Vec::new();
    for (v, cs) in raw.children.iter().enumerate() {
        for (i, c) in cs.iter().enumerate() {
            edges.push(TreeEdge {
                from: VertexId(v),
                to: VertexId(*c),
                label: i.to_string(),
                probability: Some(raw.probs[v][i]),
            });
        }
    }
    let tree = EventTree::new(vertices, edges).expect("valid tree");
    let stages = raw.stages.iter().map(|s| s.iter().map(|v| VertexId(*v)).collect()).collect();
    StagedTree::new(tree, stages).expect("valid staging")
}

/// Edge labels along a raw vertex path.
pub fn path_labels(raw: &RawTree, path: &[usize]) -> Vec<String> {
    path.windows(2).map(|w| raw.children[w[0]].iter().position(|c| *c == w[1]).unwrap().to_string()).collect()
}

pub fn series_name(r: usize) -> String {
    format!("Y{r}")
}

pub fn mdm(raw: &[RawSeries]) -> MdmSpec {
    MdmSpec::new(
        raw.iter()
            .enumerate()
            .map(|(r, s)| {
                let parents: Vec<String> = s.parents.iter().map(|p| series_name(*p)).collect();
                let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
                MdmNodeSpec::new(series_name(r), &refs, s.v)
                    .with_g(s.g.clone())
                    .with_w(s.w.clone())
                    .with_prior(s.m0.clone(), s.c0.clone())
            })
            .collect(),
    )
}

/// Series `r` written out as a single regression on the observed parents.
pub fn regression(raw: &[RawSeries], data: &[Vec<f64>], r: usize) -> Regression {
    let s = &raw[r];
    let t = data.len();
    Regression {
        m0: s.m0.clone(),
        c0: s.c0.clone(),
        g: vec![s.g.clone(); t],
        w: vec![s.w.clone(); t],
        v: vec![s.v; t],
        f: data
            .iter()
            .map(|row| DVector::from_iterator(1 + s.parents.len(), std::iter::once(1.0).chain(s.parents.iter().map(|p| row[*p]))))
            .collect(),
    }
}

pub fn wrap(data: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    data.iter().map(|row| row.iter().map(|x| Some(*x)).collect()).collect()
}

pub fn positions(items: impl IntoIterator<Item = usize>) -> BTreeSet<elicit_core::ceg::PositionId> {
    items.into_iter().map(elicit_core::ceg::PositionId).collect()
}
