//! Labeled DAGs: moralization, ancestral sets, d-separation and the local
//! Markov statements a Bayesian network encodes.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::statement::{CiStatement, VarSet};

/// Index of a node inside one [`Dag`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Node {
    pub id: String,
    pub label: String,
    pub symbol: String,
}

impl Node {
    pub fn new(id: impl Into<String>, label: impl Into<String>, symbol: impl Into<String>) -> Self {
        Node { id: id.into(), label: label.into(), symbol: symbol.into() }
    }
}

/// A directed cycle, listed as node symbols with the first node repeated at
/// the end, e.g. `[I, F, H, I]`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleError {
    pub cycle: Vec<String>,
}

impl fmt::Display for CycleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "edge would create the directed cycle {}", self.cycle.join(" -> "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("{0}")]
    Cycle(CycleError),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("edge {0} -> {1} already present")]
    DuplicateEdge(String, String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("duplicate node identifier or symbol {0}")]
    DuplicateNode(String),
    #[error("node {0} has an empty label or symbol")]
    EmptyLabel(String),
    #[error("query sets overlap or are empty")]
    OverlappingSets,
}

/// Directed acyclic graph over labeled nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<Node>,
    edges: BTreeSet<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

impl Dag {
    pub fn new(nodes: Vec<Node>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if n.label.is_empty() || n.symbol.is_empty() || n.id.is_empty() {
                return Err(GraphError::EmptyLabel(n.id.clone()));
            }
            if !seen.insert(("id", n.id.as_str())) {
                return Err(GraphError::DuplicateNode(n.id.clone()));
            }
            if !seen.insert(("sym", n.symbol.as_str())) {
                return Err(GraphError::DuplicateNode(n.symbol.clone()));
            }
        }
        let n = nodes.len();
        Ok(Dag { nodes, edges: BTreeSet::new(), parents: vec![Vec::new(); n], children: vec![Vec::new(); n] })
    }

    /// Builds a DAG from edges given as node ids or symbols.
    pub fn with_edges<S: AsRef<str>>(nodes: Vec<Node>, edges: &[(S, S)]) -> Result<Self, GraphError> {
        let mut dag = Dag::new(nodes)?;
        for (a, b) in edges {
            let from = dag.require(a.as_ref())?;
            let to = dag.require(b.as_ref())?;
            dag.insert_edge(from, to)?;
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn parents(&self, v: NodeId) -> &[NodeId] {
        &self.parents[v.0]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.0]
    }

    /// Looks a node up by identifier, then by symbol.
    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.id == name)
            .or_else(|| self.nodes.iter().position(|n| n.symbol == name))
            .map(NodeId)
    }

    pub fn require(&self, name: &str) -> Result<NodeId, GraphError> {
        self.find(name).ok_or_else(|| GraphError::UnknownNode(name.into()))
    }

    pub fn resolve_set<S: AsRef<str>>(&self, names: impl IntoIterator<Item = S>) -> Result<NodeSet, GraphError> {
        names.into_iter().map(|n| self.require(n.as_ref())).collect()
    }

    pub fn symbols(&self, set: &NodeSet) -> VarSet {
        set.iter().map(|v| self.node(*v).symbol.clone()).collect()
    }

    fn directed_path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let mut prev: Vec<Option<NodeId>> = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([from]);
        seen[from.0] = true;
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while let Some(p) = prev[cur.0] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for &c in &self.children[v.0] {
                if !seen[c.0] {
                    seen[c.0] = true;
                    prev[c.0] = Some(v);
                    queue.push_back(c);
                }
            }
        }
        None
    }

    fn insert_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), GraphError> {
        if from == to {
            return Err(GraphError::SelfLoop(self.node(from).symbol.clone()));
        }
        if self.has_edge(from, to) {
            return Err(GraphError::DuplicateEdge(self.node(from).symbol.clone(), self.node(to).symbol.clone()));
        }
        if let Some(path) = self.directed_path(to, from) {
            let mut cycle: Vec<String> = path.iter().map(|v| self.node(*v).symbol.clone()).collect();
            cycle.push(self.node(to).symbol.clone());
            return Err(GraphError::Cycle(CycleError { cycle }));
        }
        self.edges.insert((from, to));
        insert_sorted(&mut self.parents[to.0], from);
        insert_sorted(&mut self.children[from.0], to);
        Ok(())
    }

    /// Returns a new DAG with `from -> to` added.
    pub fn add_edge(&self, from: &str, to: &str) -> Result<Dag, GraphError> {
        let from = self.require(from)?;
        let to = self.require(to)?;
        let mut next = self.clone();
        next.insert_edge(from, to)?;
        Ok(next)
    }

    /// Whether `from -> to` could be added without a cycle. Returns the
    /// witness cycle otherwise.
    pub fn edge_feasibility(&self, from: NodeId, to: NodeId) -> Result<(), CycleError> {
        match self.directed_path(to, from) {
            None => Ok(()),
            Some(path) => {
                let mut cycle: Vec<String> = path.iter().map(|v| self.node(*v).symbol.clone()).collect();
                cycle.push(self.node(to).symbol.clone());
                Err(CycleError { cycle })
            }
        }
    }

    /// Topological order; ties broken by symbol, then label.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let key = |v: NodeId| (self.node(v).symbol.clone(), self.node(v).label.clone(), v);
        let mut ready: BTreeSet<(String, String, NodeId)> =
            self.node_ids().filter(|v| indeg[v.0] == 0).map(key).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(first) = ready.iter().next().cloned() {
            ready.remove(&first);
            let v = first.2;
            order.push(v);
            for &c in &self.children[v.0] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    ready.insert(key(c));
                }
            }
        }
        debug_assert_eq!(order.len(), self.len());
        order
    }

    /// Strict ancestors of every node in `s`, as a boolean mask.
    fn ancestor_mask(&self, s: &NodeSet) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<NodeId> = s.iter().copied().collect();
        for v in s {
            mask[v.0] = true;
        }
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v.0] {
                if !mask[p.0] {
                    mask[p.0] = true;
                    stack.push(p);
                }
            }
        }
        mask
    }

    pub fn ancestors(&self, s: &NodeSet) -> NodeSet {
        let mask = self.ancestor_mask(s);
        self.node_ids().filter(|v| mask[v.0] && !s.contains(v)).collect()
    }

    pub fn descendants(&self, v: NodeId) -> NodeSet {
        let mut out = NodeSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for &c in &self.children[u.0] {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Induced subgraph on `keep`, preserving node order.
    pub fn induced(&self, keep: &NodeSet) -> Dag {
        let kept: Vec<NodeId> = keep.iter().copied().collect();
        let nodes = kept.iter().map(|v| self.node(*v).clone()).collect();
        let remap: BTreeMap<NodeId, NodeId> = kept.iter().enumerate().map(|(i, v)| (*v, NodeId(i))).collect();
        let mut dag = Dag::new(nodes).expect("subset of a valid node list");
        for &(a, b) in &self.edges {
            if let (Some(&a2), Some(&b2)) = (remap.get(&a), remap.get(&b)) {
                dag.insert_edge(a2, b2).expect("subgraph of a DAG is acyclic");
            }
        }
        dag
    }

    /// Induced subgraph on `s` and all its ancestors.
    pub fn ancestral_graph(&self, s: &NodeSet) -> Result<Dag, GraphError> {
        self.check_ids(s)?;
        let mask = self.ancestor_mask(s);
        let keep: NodeSet = self.node_ids().filter(|v| mask[v.0]).collect();
        Ok(self.induced(&keep))
    }

    fn check_ids(&self, s: &NodeSet) -> Result<(), GraphError> {
        match s.iter().find(|v| v.0 >= self.len()) {
            Some(v) => Err(GraphError::UnknownNode(alloc::format!("#{}", v.0))),
            None => Ok(()),
        }
    }

    /// Disoriented graph with every pair of co-parents joined.
    pub fn moralize(&self) -> UndirectedGraph {
        let mut g = UndirectedGraph::new(self.nodes.clone());
        for &(a, b) in &self.edges {
            g.add_edge(a, b);
        }
        for v in self.node_ids() {
            let ps = &self.parents[v.0];
            for (i, &p) in ps.iter().enumerate() {
                for &q in &ps[i + 1..] {
                    g.add_edge(p, q);
                }
            }
        }
        g
    }

    fn check_query(&self, a: &NodeSet, b: &NodeSet, s: &NodeSet) -> Result<(), GraphError> {
        self.check_ids(a)?;
        self.check_ids(b)?;
        self.check_ids(s)?;
        if a.is_empty() || b.is_empty() || !a.is_disjoint(b) || !a.is_disjoint(s) || !b.is_disjoint(s) {
            return Err(GraphError::OverlappingSets);
        }
        Ok(())
    }

    /// `s` d-separates `a` from `b`: decided by separation in the moralized
    /// ancestral graph of `a ∪ b ∪ s` with `s` deleted.
    pub fn d_separated(&self, a: &NodeSet, b: &NodeSet, s: &NodeSet) -> Result<bool, GraphError> {
        self.check_query(a, b, s)?;
        let all: NodeSet = a.iter().chain(b).chain(s).copied().collect();
        let in_anc = self.ancestor_mask(&all);
        // Moral adjacency restricted to the ancestral set. Parents of an
        // ancestral node are ancestral, so co-parent links stay inside it.
        let n = self.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(p, c) in &self.edges {
            if in_anc[c.0] {
                adj[p.0].push(c.0);
                adj[c.0].push(p.0);
            }
        }
        for v in 0..n {
            if !in_anc[v] {
                continue;
            }
            let ps = &self.parents[v];
            for (i, p) in ps.iter().enumerate() {
                for q in &ps[i + 1..] {
                    adj[p.0].push(q.0);
                    adj[q.0].push(p.0);
                }
            }
        }
        let mut blocked = vec![false; n];
        for v in s {
            blocked[v.0] = true;
        }
        let mut target = vec![false; n];
        for v in b {
            target[v.0] = true;
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = a.iter().map(|v| v.0).collect();
        for v in a {
            seen[v.0] = true;
        }
        while let Some(v) = stack.pop() {
            if target[v] {
                return Ok(false);
            }
            for &u in &adj[v] {
                if !seen[u] && !blocked[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        Ok(true)
    }

    /// Independent check of [`Dag::d_separated`]: enumerates every simple
    /// trail between `a` and `b` in the skeleton and tests it for activity
    /// (non-colliders outside `s`, colliders in `s` or with a descendant in
    /// `s`).
    pub fn d_separated_by_trails(&self, a: &NodeSet, b: &NodeSet, s: &NodeSet) -> Result<bool, GraphError> {
        self.check_query(a, b, s)?;
        let n = self.len();
        let mut cond = vec![false; n];
        for v in s {
            cond[v.0] = true;
        }
        // A collider is opened by conditioning on it or any descendant.
        let opens: Vec<bool> = (0..n)
            .map(|v| cond[v] || self.descendants(NodeId(v)).iter().any(|d| cond[d.0]))
            .collect();
        let mut target = vec![false; n];
        for v in b {
            target[v.0] = true;
        }
        let neighbours: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                let mut nb: Vec<usize> =
                    self.parents[v].iter().chain(&self.children[v]).map(|u| u.0).collect();
                nb.sort_unstable();
                nb
            })
            .collect();

        struct Search<'a> {
            dag: &'a Dag,
            neighbours: &'a [Vec<usize>],
            cond: &'a [bool],
            opens: &'a [bool],
            target: &'a [bool],
            on_path: Vec<bool>,
        }

        impl Search<'_> {
            // `prev -> cur` is the last step of an active partial trail.
            fn extend(&mut self, prev: usize, cur: usize) -> bool {
                if self.target[cur] {
                    return true;
                }
                for &next in self.neighbours[cur].iter() {
                    if self.on_path[next] {
                        continue;
                    }
                    let into_from_prev = self.dag.has_edge(NodeId(prev), NodeId(cur));
                    let into_from_next = self.dag.has_edge(NodeId(next), NodeId(cur));
                    let active = if into_from_prev && into_from_next {
                        self.opens[cur]
                    } else {
                        !self.cond[cur]
                    };
                    if !active {
                        continue;
                    }
                    self.on_path[next] = true;
                    let found = self.extend(cur, next);
                    self.on_path[next] = false;
                    if found {
                        return true;
                    }
                }
                false
            }
        }

        let mut search = Search {
            dag: self,
            neighbours: &neighbours,
            cond: &cond,
            opens: &opens,
            target: &target,
            on_path: vec![false; n],
        };
        for start in a {
            search.on_path[start.0] = true;
            for &first in &neighbours[start.0] {
                if search.on_path[first] {
                    continue;
                }
                search.on_path[first] = true;
                let found = search.extend(start.0, first);
                search.on_path[first] = false;
                if found {
                    return Ok(false);
                }
            }
            search.on_path[start.0] = false;
        }
        Ok(true)
    }

    /// Checks a statement over node symbols with [`Dag::d_separated`].
    pub fn statement_holds(&self, s: &CiStatement) -> Result<bool, GraphError> {
        let x = self.resolve_set(s.x())?;
        let y = self.resolve_set(s.y())?;
        let z = self.resolve_set(s.z())?;
        self.d_separated(&x, &y, &z)
    }

    /// `{v} ⫫ nondesc(v) \ pa(v) | pa(v)` for every node whose set is
    /// nonempty, in topological order.
    pub fn local_markov_statements(&self) -> Vec<CiStatement> {
        let mut out = Vec::new();
        for v in self.topological_order() {
            let desc = self.descendants(v);
            let pa: NodeSet = self.parents(v).iter().copied().collect();
            let rest: NodeSet =
                self.node_ids().filter(|u| *u != v && !desc.contains(u) && !pa.contains(u)).collect();
            if rest.is_empty() {
                continue;
            }
            let x: VarSet = [self.node(v).symbol.clone()].into_iter().collect();
            out.push(CiStatement::from_sets(x, self.symbols(&rest), self.symbols(&pa)).expect("disjoint by construction"));
        }
        out
    }

    /// `(v, pa(v))` in topological order: the terms of `p(x) = ∏ p(x_v | pa(x_v))`.
    pub fn factorization(&self) -> Vec<(NodeId, Vec<NodeId>)> {
        self.topological_order().into_iter().map(|v| (v, self.parents(v).to_vec())).collect()
    }
}

/// Expands `x ⫫ {y1..yk} | z` into `x ⫫ yi | z` for every `yi`.
pub fn split_pairwise(s: &CiStatement) -> Vec<CiStatement> {
    s.y()
        .iter()
        .map(|y| {
            let y: VarSet = [y.clone()].into_iter().collect();
            CiStatement::from_sets(s.x().clone(), y, s.z().clone()).expect("subset of a valid statement")
        })
        .collect()
}

fn insert_sorted(v: &mut Vec<NodeId>, x: NodeId) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl UndirectedGraph {
    pub fn new(nodes: Vec<Node>) -> Self {
        UndirectedGraph { nodes, edges: BTreeSet::new() }
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        if a == b {
            return false;
        }
        self.edges.insert(if a < b { (a, b) } else { (b, a) })
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&if a < b { (a, b) } else { (b, a) })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    /// Edges as sorted symbol pairs.
    pub fn symbol_edges(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|(a, b)| {
                let (a, b) = (self.nodes[a.0].symbol.clone(), self.nodes[b.0].symbol.clone());
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn food_health() -> Dag {
        let nodes = vec![
            Node::new("B", "Government benefits", "B"),
            Node::new("I", "Disposable Income", "I"),
            Node::new("F", "Food insecurity", "F"),
            Node::new("H", "Long-term health outcomes", "H"),
        ];
        Dag::with_edges(nodes, &[("B", "F"), ("I", "F"), ("F", "H")]).unwrap()
    }

    fn set(d: &Dag, names: &[&str]) -> NodeSet {
        d.resolve_set(names.iter().copied()).unwrap()
    }

    #[test]
    fn cycle_witness_is_reported() {
        let err = food_health().add_edge("H", "I").unwrap_err();
        assert_eq!(err, GraphError::Cycle(CycleError { cycle: vec!["I".into(), "F".into(), "H".into(), "I".into()] }));
    }

    #[test]
    fn add_edge_errors() {
        let d = food_health();
        assert_eq!(d.add_edge("I", "B").unwrap().edge_count(), 4);
        assert!(matches!(d.add_edge("B", "F"), Err(GraphError::DuplicateEdge(..))));
        assert!(matches!(d.add_edge("B", "Q"), Err(GraphError::UnknownNode(..))));
        assert!(matches!(d.add_edge("B", "B"), Err(GraphError::SelfLoop(..))));
        let two = Dag::new(vec![Node::new("A", "a", "A"), Node::new("B", "b", "B")]).unwrap();
        assert_eq!(two.add_edge("A", "B").unwrap().edge_count(), 1);
    }

    #[test]
    fn moralize_marries_coparents() {
        let m = food_health().moralize();
        let expected: BTreeSet<(String, String)> =
            [("B", "F"), ("F", "I"), ("F", "H"), ("B", "I")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(m.symbol_edges(), expected);
    }

    #[test]
    fn root_ancestral_graph_is_single_node() {
        let d = food_health();
        let g = d.ancestral_graph(&set(&d, &["B"])).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.edge_count(), 0);
        let all: NodeSet = d.node_ids().collect();
        assert_eq!(d.ancestral_graph(&all).unwrap(), d);
    }

    #[test]
    fn food_health_separation_queries() {
        let d = food_health();
        for trails in [false, true] {
            let q = |a: &[&str], b: &[&str], s: &[&str]| {
                let (a, b, s) = (set(&d, a), set(&d, b), set(&d, s));
                if trails {
                    d.d_separated_by_trails(&a, &b, &s).unwrap()
                } else {
                    d.d_separated(&a, &b, &s).unwrap()
                }
            };
            assert!(q(&["H"], &["B"], &["F"]));
            assert!(q(&["B"], &["I"], &[]));
            assert!(!q(&["B"], &["I"], &["F"]));
            assert!(!q(&["B"], &["I"], &["H"]));
        }
        assert_eq!(
            d.d_separated(&set(&d, &["B"]), &set(&d, &["B"]), &NodeSet::new()),
            Err(GraphError::OverlappingSets)
        );
    }

    #[test]
    fn chain_blocking() {
        let nodes = vec![Node::new("A", "a", "A"), Node::new("B", "b", "B"), Node::new("C", "c", "C")];
        let d = Dag::with_edges(nodes, &[("A", "B"), ("B", "C")]).unwrap();
        let (a, b, c) = (set(&d, &["A"]), set(&d, &["B"]), set(&d, &["C"]));
        assert!(d.d_separated_by_trails(&a, &c, &b).unwrap());
        assert!(!d.d_separated_by_trails(&a, &c, &NodeSet::new()).unwrap());
    }

    #[test]
    fn local_markov_edge_cases() {
        let single = Dag::new(vec![Node::new("A", "a", "A")]).unwrap();
        assert!(single.local_markov_statements().is_empty());
        let nodes = vec![Node::new("A", "a", "A"), Node::new("B", "b", "B"), Node::new("C", "c", "C")];
        let complete = Dag::with_edges(nodes, &[("A", "B"), ("A", "C"), ("B", "C")]).unwrap();
        assert!(complete.local_markov_statements().is_empty());
    }

    #[test]
    fn edgeless_factorization_has_no_parents() {
        let nodes = vec![Node::new("A", "a", "A"), Node::new("B", "b", "B")];
        let d = Dag::new(nodes).unwrap();
        assert!(d.factorization().iter().all(|(_, pa)| pa.is_empty()));
    }
}
