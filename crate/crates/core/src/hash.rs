//! Content hashes of models. Each model has a canonical text encoding that
//! ignores insertion order; the hash is its SHA-256 in lowercase hex.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use sha2::{Digest, Sha256};

use crate::ceg::StagedTree;
use crate::flow::FlowGraph;
use crate::graph::Dag;
use crate::mdm::MdmSpec;

pub trait CanonicalText {
    fn canonical_text(&self) -> String;
}

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn model_hash<M: CanonicalText + ?Sized>(model: &M) -> String {
    sha256_hex(&model.canonical_text())
}

// Fields are tab-separated; `{:?}` keeps f64 exact and escapes text.
impl CanonicalText for Dag {
    fn canonical_text(&self) -> String {
        let mut s = String::from("dag v1\n");
        let mut nodes: Vec<_> = self.nodes().iter().collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for n in nodes {
            let _ = writeln!(s, "node\t{:?}\t{:?}\t{:?}", n.id, n.label, n.symbol);
        }
        let edges: BTreeSet<(&str, &str)> =
            self.edges().iter().map(|(a, b)| (self.node(*a).id.as_str(), self.node(*b).id.as_str())).collect();
        for (a, b) in edges {
            let _ = writeln!(s, "edge\t{a:?}\t{b:?}");
        }
        s
    }
}

impl CanonicalText for StagedTree {
    fn canonical_text(&self) -> String {
        let t = self.tree();
        let mut s = String::from("staged_tree v1\n");
        for v in t.vertices() {
            let _ = writeln!(s, "vertex\t{:?}\t{:?}", v.name, v.variable);
        }
        for e in t.edges() {
            let _ = writeln!(
                s,
                "edge\t{:?}\t{:?}\t{:?}\t{:?}",
                t.vertices()[e.from.0].name,
                t.vertices()[e.to.0].name,
                e.label,
                e.probability
            );
        }
        for stage in self.stages() {
            let names: Vec<&str> = stage.iter().map(|v| t.vertices()[v.0].name.as_str()).collect();
            let _ = writeln!(s, "stage\t{names:?}");
        }
        for (k, v) in self.phrases() {
            let _ = writeln!(s, "phrase\t{k:?}\t{v:?}");
        }
        for (k, v) in self.cut_descriptions() {
            let _ = writeln!(s, "given\t{k:?}\t{v:?}");
        }
        s
    }
}

impl CanonicalText for MdmSpec {
    fn canonical_text(&self) -> String {
        let mut s = String::from("mdm v1\n");
        let _ = writeln!(s, "independent_priors\t{}", self.independent_priors);
        for n in &self.nodes {
            let _ = writeln!(s, "series\t{:?}\t{:?}\tv={:?}", n.id, n.parents, n.v);
            let _ = writeln!(s, "g\t{:?}", n.g.as_slice());
            let _ = writeln!(s, "w\t{:?}", n.w.as_slice());
            let _ = writeln!(s, "m0\t{:?}", n.m0.as_slice());
            let _ = writeln!(s, "c0\t{:?}", n.c0.as_slice());
            for (t, o) in &n.overrides {
                let _ = writeln!(
                    s,
                    "override\t{t}\t{:?}\t{:?}\t{:?}",
                    o.g.as_ref().map(|m| m.as_slice()),
                    o.w.as_ref().map(|m| m.as_slice()),
                    o.v
                );
            }
        }
        s
    }
}

impl CanonicalText for FlowGraph {
    fn canonical_text(&self) -> String {
        let mut s = String::from("flow_graph v1\n");
        for (l, actors) in self.levels().iter().enumerate() {
            let _ = writeln!(s, "level\t{}\t{actors:?}", l + 1);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(s, "edge\t{a}\t{b}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn edge_order_does_not_matter() {
        let nodes = || vec![Node::new("a", "A", "A"), Node::new("b", "B", "B"), Node::new("c", "C", "C")];
        let g1 = Dag::with_edges(nodes(), &[("a", "b"), ("b", "c")]).unwrap();
        let g2 = Dag::with_edges(nodes(), &[("b", "c"), ("a", "b")]).unwrap();
        assert_eq!(model_hash(&g1), model_hash(&g2));
        let g3 = g1.add_edge("a", "c").unwrap();
        assert_ne!(model_hash(&g1), model_hash(&g3));
    }
}
