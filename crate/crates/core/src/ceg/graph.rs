use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::tree::{PathOutcome, StagedTree};
use super::{CegError, PositionId, StageId, VertexId};

/// Probabilities within this distance are treated as equal when merging
/// uncoloured positions.
const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Position {
    /// `None` for the sink and for uncoloured graphs.
    pub stage: Option<StageId>,
    pub variable: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CegEdge {
    pub from: PositionId,
    pub to: PositionId,
    pub label: String,
    pub probability: Option<f64>,
}

/// A root-to-sink walk through positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CegPath {
    pub positions: Vec<PositionId>,
    pub edges: Vec<usize>,
    pub probability: Option<f64>,
}

/// Chain event graph: staged tree with equivalent positions merged and all
/// leaves collapsed into one sink.
#[derive(Debug, Clone, PartialEq)]
pub struct Ceg {
    positions: Vec<Position>,
    edges: Vec<CegEdge>,
    out: Vec<Vec<usize>>,
    root: PositionId,
    sink: PositionId,
    position_map: Vec<PositionId>,
    coloured: bool,
    phrases: BTreeMap<String, String>,
}

/// Either a set of positions (fine-cut candidate) or a set of stages (cut
/// candidate).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CutSet {
    Positions(BTreeSet<PositionId>),
    Stages(BTreeSet<StageId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutQuery {
    pub cut: CutSet,
    /// How the conditioning event reads in a question, e.g. "eligible
    /// applicants apply for benefits".
    pub description: Option<String>,
}

impl CutQuery {
    pub fn positions(w: impl IntoIterator<Item = PositionId>) -> Self {
        CutQuery { cut: CutSet::Positions(w.into_iter().collect()), description: None }
    }

    pub fn stages(w: impl IntoIterator<Item = StageId>) -> Self {
        CutQuery { cut: CutSet::Stages(w.into_iter().collect()), description: None }
    }

    pub fn described(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "flavour", rename_all = "kebab-case"))]
pub enum Certificate {
    /// Upstream history ⫫ downstream future | which member was reached.
    FineCut { members: Vec<PositionId> },
    /// Upstream history ⫫ outcome at the cut | stage reached.
    Cut { stages: Vec<StageId>, members: Vec<PositionId> },
}

/// A path that crosses the candidate cut other than exactly once.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathWitness {
    pub labels: Vec<String>,
    pub positions: Vec<PositionId>,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparationResult {
    pub separated: bool,
    pub certificate: Option<Certificate>,
    pub witness: Option<PathWitness>,
}

/// Verdict for "is upstream variable U independent of downstream variable
/// D" inside one graph: true when a single position, passed by every path,
/// lies after every U-edge and at or before every D-situation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariableSeparation {
    pub separated: bool,
    pub cut_vertex: Option<PositionId>,
    pub witness: Option<PathWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeCondition {
    pub variable: Option<String>,
    pub label: String,
}

/// Conjunction of edge and position requirements on a root-to-sink path.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    #[cfg_attr(feature = "serde", serde(default))]
    pub edges: Vec<EdgeCondition>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub positions: Vec<PositionId>,
}

impl Event {
    pub fn all() -> Self {
        Event::default()
    }

    /// Parses `label` or `variable=label` items.
    pub fn from_items<S: AsRef<str>>(items: &[S]) -> Self {
        let edges = items
            .iter()
            .map(|s| match s.as_ref().split_once('=') {
                Some((var, label)) => EdgeCondition { variable: Some(var.trim().into()), label: label.trim().into() },
                None => EdgeCondition { variable: None, label: s.as_ref().trim().into() },
            })
            .collect();
        Event { edges, positions: Vec::new() }
    }
}

/// A tree-shaped input to position merging.
struct MergeNode {
    variable: Option<String>,
    stage: Option<StageId>,
    depth: usize,
    children: Vec<(String, Option<f64>, usize)>,
}

struct Merged {
    positions: Vec<Position>,
    edges: Vec<CegEdge>,
    map: Vec<PositionId>,
}

fn probs_close(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (Some(x), Some(y)) => libm::fabs(x - y) <= MERGE_TOLERANCE,
        (None, None) => true,
        _ => false,
    })
}

/// Merges tree vertices bottom-up. Two situations share a position when
/// they agree on variable, stage (if coloured) and the position reached
/// along each label; uncoloured situations must also agree on
/// probabilities. Leaves become the sink. Positions are numbered in
/// breadth-first order from the root; the sink is last.
fn merge(nodes: &[MergeNode], root: usize, coloured: bool) -> Merged {
    type Key = (Option<String>, Option<StageId>, Vec<(String, usize)>);
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|a, b| nodes[*b].depth.cmp(&nodes[*a].depth).then(a.cmp(b)));

    const SINK: usize = 0;
    let mut temp = vec![usize::MAX; nodes.len()];
    let mut groups: BTreeMap<Key, Vec<(usize, Vec<Option<f64>>)>> = BTreeMap::new();
    let mut reps: Vec<usize> = vec![usize::MAX];
    for &v in &order {
        let node = &nodes[v];
        if node.children.is_empty() {
            temp[v] = SINK;
            continue;
        }
        let key: Key = (
            node.variable.clone(),
            if coloured { node.stage } else { None },
            node.children.iter().map(|(l, _, c)| (l.clone(), temp[*c])).collect(),
        );
        let probs: Vec<Option<f64>> = node.children.iter().map(|(_, p, _)| *p).collect();
        let bucket = groups.entry(key).or_default();
        let found = if coloured {
            bucket.first().map(|(id, _)| *id)
        } else {
            bucket.iter().find(|(_, ps)| probs_close(ps, &probs)).map(|(id, _)| *id)
        };
        temp[v] = match found {
            Some(id) => id,
            None => {
                let id = reps.len();
                reps.push(v);
                bucket.push((id, probs));
                id
            }
        };
    }

    // Renumber breadth-first from the root.
    let mut final_id = vec![usize::MAX; reps.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    if temp[root] != SINK {
        final_id[temp[root]] = 0;
        next = 1;
        queue.push_back(temp[root]);
    }
    while let Some(t) = queue.pop_front() {
        for (_, _, c) in &nodes[reps[t]].children {
            let ct = temp[*c];
            if ct != SINK && final_id[ct] == usize::MAX {
                final_id[ct] = next;
                next += 1;
                queue.push_back(ct);
            }
        }
    }
    let sink = next;
    final_id[SINK] = sink;

    let mut positions = vec![Position { stage: None, variable: None }; sink + 1];
    let mut edges = Vec::new();
    let mut by_final: Vec<usize> = vec![usize::MAX; sink + 1];
    for (t, &f) in final_id.iter().enumerate() {
        if t != SINK && f != usize::MAX {
            by_final[f] = t;
        }
    }
    for f in 0..sink {
        let rep = &nodes[reps[by_final[f]]];
        positions[f] = Position { stage: if coloured { rep.stage } else { None }, variable: rep.variable.clone() };
        for (label, p, c) in &rep.children {
            edges.push(CegEdge {
                from: PositionId(f),
                to: PositionId(final_id[temp[*c]]),
                label: label.clone(),
                probability: *p,
            });
        }
    }
    let map = temp.iter().map(|t| PositionId(final_id[*t])).collect();
    Merged { positions, edges, map }
}

impl Ceg {
    /// Merges positions of a staged tree. Fails if the staging is
    /// inconsistent.
    pub fn from_staged_tree(st: &StagedTree) -> Result<Ceg, CegError> {
        let violations = st.validate_staging();
        if !violations.is_empty() {
            return Err(CegError::InvalidStaging(violations));
        }
        let t = st.tree();
        let nodes: Vec<MergeNode> = (0..t.len())
            .map(|v| {
                let vid = VertexId(v);
                MergeNode {
                    variable: t.vertices()[v].variable.clone(),
                    stage: st.stage_of(vid),
                    depth: t.depth(vid),
                    children: t.out_edges(vid).map(|e| (e.label.clone(), e.probability, e.to.0)).collect(),
                }
            })
            .collect();
        let merged = merge(&nodes, t.root().0, true);
        Ok(Ceg::assemble(merged, true, st.phrases().clone()))
    }

    fn assemble(m: Merged, coloured: bool, phrases: BTreeMap<String, String>) -> Ceg {
        let n = m.positions.len();
        let mut out = vec![Vec::new(); n];
        for (i, e) in m.edges.iter().enumerate() {
            out[e.from.0].push(i);
        }
        for list in &mut out {
            list.sort_by(|a, b| m.edges[*a].label.cmp(&m.edges[*b].label));
        }
        Ceg {
            positions: m.positions,
            edges: m.edges,
            out,
            root: PositionId(0),
            sink: PositionId(n - 1),
            position_map: m.map,
            coloured,
            phrases,
        }
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn edges(&self) -> &[CegEdge] {
        &self.edges
    }

    pub fn root(&self) -> PositionId {
        self.root
    }

    pub fn sink(&self) -> PositionId {
        self.sink
    }

    pub fn is_coloured(&self) -> bool {
        self.coloured
    }

    pub fn phrases(&self) -> &BTreeMap<String, String> {
        &self.phrases
    }

    /// Tree vertex to position; empty for graphs not built from a tree.
    pub fn position_map(&self) -> &[PositionId] {
        &self.position_map
    }

    pub fn out_edges(&self, p: PositionId) -> impl Iterator<Item = &CegEdge> {
        self.out[p.0].iter().map(move |e| &self.edges[*e])
    }

    pub fn has_probabilities(&self) -> bool {
        self.edges.iter().all(|e| e.probability.is_some()) && !self.edges.is_empty()
    }

    pub fn stage_count(&self) -> usize {
        self.positions.iter().filter_map(|p| p.stage).map(|s| s.0 + 1).max().unwrap_or(0)
    }

    /// Positions in topological order.
    pub fn topological_order(&self) -> Vec<PositionId> {
        let n = self.positions.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.to.0] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|p| indeg[*p] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(p) = queue.pop_front() {
            order.push(PositionId(p));
            for &e in &self.out[p] {
                let c = self.edges[e].to.0;
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    /// Every root-to-sink walk, sorted by label sequence.
    pub fn walk_paths(&self) -> Vec<CegPath> {
        let mut out = Vec::new();
        let mut positions = vec![self.root];
        let mut edges = Vec::new();
        self.walk(self.root, &mut positions, &mut edges, 1.0, &mut out);
        let labels = |p: &CegPath| p.edges.iter().map(|e| self.edges[*e].label.clone()).collect::<Vec<_>>();
        out.sort_by_key(|p| labels(p));
        out
    }

    fn walk(&self, p: PositionId, positions: &mut Vec<PositionId>, edges: &mut Vec<usize>, prob: f64, out: &mut Vec<CegPath>) {
        if p == self.sink {
            out.push(CegPath {
                positions: positions.clone(),
                edges: edges.clone(),
                probability: self.has_probabilities().then_some(prob),
            });
            return;
        }
        for &e in &self.out[p.0] {
            let edge = &self.edges[e];
            positions.push(edge.to);
            edges.push(e);
            self.walk(edge.to, positions, edges, prob * edge.probability.unwrap_or(1.0), out);
            edges.pop();
            positions.pop();
        }
    }

    pub fn labels_of(&self, path: &CegPath) -> Vec<String> {
        path.edges.iter().map(|e| self.edges[*e].label.clone()).collect()
    }

    pub fn enumerate_paths(&self) -> Vec<PathOutcome> {
        self.walk_paths()
            .into_iter()
            .map(|p| PathOutcome { labels: self.labels_of(&p), probability: p.probability })
            .collect()
    }

    fn check_members(&self, w: &BTreeSet<PositionId>) -> Result<(), CegError> {
        if w.is_empty() {
            return Err(CegError::MalformedQuery("empty cut".into()));
        }
        for p in w {
            if p.0 >= self.positions.len() {
                return Err(CegError::UnknownPosition(p.0));
            }
            if *p == self.root || *p == self.sink {
                return Err(CegError::MalformedQuery("cut may not contain the root or the sink".into()));
            }
        }
        Ok(())
    }

    /// Returns a path hitting `w` other than exactly once, if any.
    fn fine_cut_witness(&self, w: &BTreeSet<PositionId>) -> Option<PathWitness> {
        // Minimum and maximum number of members passed on any walk from the
        // root, with back-pointers to rebuild the extreme walks.
        let n = self.positions.len();
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        let mut lo_from: Vec<Option<usize>> = vec![None; n];
        let mut hi_from: Vec<Option<usize>> = vec![None; n];
        let hit = |p: PositionId| usize::from(w.contains(&p));
        lo[self.root.0] = hit(self.root);
        hi[self.root.0] = hit(self.root);
        for p in self.topological_order() {
            if lo[p.0] == usize::MAX {
                continue;
            }
            for &e in &self.out[p.0] {
                let c = self.edges[e].to;
                let (l, h) = (lo[p.0] + hit(c), hi[p.0] + hit(c));
                if l < lo[c.0] {
                    lo[c.0] = l;
                    lo_from[c.0] = Some(e);
                }
                if hi_from[c.0].is_none() || h > hi[c.0] {
                    hi[c.0] = h;
                    hi_from[c.0] = Some(e);
                }
            }
        }
        let rebuild = |from: &[Option<usize>], hits: usize| {
            let mut edges = Vec::new();
            let mut cur = self.sink;
            while let Some(e) = from[cur.0] {
                edges.push(e);
                cur = self.edges[e].from;
            }
            edges.reverse();
            let mut positions = vec![self.root];
            positions.extend(edges.iter().map(|e| self.edges[*e].to));
            PathWitness { labels: edges.iter().map(|e| self.edges[*e].label.clone()).collect(), positions, hits }
        };
        let s = self.sink.0;
        if lo[s] != 1 {
            Some(rebuild(&lo_from, lo[s]))
        } else if hi[s] != 1 {
            Some(rebuild(&hi_from, hi[s]))
        } else {
            None
        }
    }

    /// Every root-to-sink path passes through exactly one member of `w`.
    pub fn is_fine_cut(&self, w: &BTreeSet<PositionId>) -> Result<bool, CegError> {
        self.check_members(w)?;
        Ok(self.fine_cut_witness(w).is_none())
    }

    fn stage_members(&self, stages: &BTreeSet<StageId>) -> Result<BTreeSet<PositionId>, CegError> {
        if !self.coloured {
            return Err(CegError::MalformedQuery("stage cuts need a coloured graph".into()));
        }
        let count = self.stage_count();
        if let Some(s) = stages.iter().find(|s| s.0 >= count) {
            return Err(CegError::UnknownStage(s.0));
        }
        Ok((0..self.positions.len())
            .map(PositionId)
            .filter(|p| self.positions[p.0].stage.map(|s| stages.contains(&s)).unwrap_or(false))
            .collect())
    }

    /// The positions of the given stages form a fine cut.
    pub fn is_cut(&self, stages: &BTreeSet<StageId>) -> Result<bool, CegError> {
        let members = self.stage_members(stages)?;
        if members.is_empty() {
            return Ok(false);
        }
        self.is_fine_cut(&members)
    }

    /// Certifies the separation a fine cut or cut licenses, or returns a
    /// path witnessing that the candidate is not one.
    pub fn separated(&self, query: &CutQuery) -> Result<SeparationResult, CegError> {
        let (members, stages) = match &query.cut {
            CutSet::Positions(w) => (w.clone(), None),
            CutSet::Stages(s) => {
                if s.is_empty() {
                    return Err(CegError::MalformedQuery("empty cut".into()));
                }
                (self.stage_members(s)?, Some(s.clone()))
            }
        };
        self.check_members(&members)?;
        Ok(match self.fine_cut_witness(&members) {
            Some(w) => SeparationResult { separated: false, certificate: None, witness: Some(w) },
            None => {
                let members: Vec<PositionId> = members.into_iter().collect();
                let certificate = match stages {
                    None => Certificate::FineCut { members },
                    Some(s) => Certificate::Cut { stages: s.into_iter().collect(), members },
                };
                SeparationResult { separated: true, certificate: Some(certificate), witness: None }
            }
        })
    }

    /// Positions whose situation decides `variable`.
    pub fn positions_of_variable(&self, variable: &str) -> BTreeSet<PositionId> {
        (0..self.positions.len())
            .map(PositionId)
            .filter(|p| self.positions[p.0].variable.as_deref() == Some(variable))
            .collect()
    }

    fn informative(&self, p: PositionId) -> Option<&str> {
        if self.out[p.0].len() >= 2 {
            self.positions[p.0].variable.as_deref()
        } else {
            None
        }
    }

    /// Variables decided strictly upstream of the fine cut `w`, and at or
    /// downstream of it, in order of first appearance. Only situations with
    /// two or more outcomes count.
    pub fn variables_across(&self, w: &BTreeSet<PositionId>) -> Result<(Vec<String>, Vec<String>), CegError> {
        if !self.is_fine_cut(w)? {
            return Err(CegError::MalformedQuery("not a fine cut".into()));
        }
        let mut up: Vec<String> = Vec::new();
        let mut down: Vec<String> = Vec::new();
        let push = |list: &mut Vec<String>, v: &str| {
            if !list.iter().any(|x| x == v) {
                list.push(v.into());
            }
        };
        let mut paths = self.walk_paths();
        paths.sort_by_key(|p| p.positions.clone());
        for path in &paths {
            let at = path.positions.iter().position(|p| w.contains(p)).expect("fine cut is hit");
            for (i, p) in path.positions.iter().enumerate() {
                if let Some(v) = self.informative(*p) {
                    if i < at {
                        push(&mut up, v);
                    } else {
                        push(&mut down, v);
                    }
                }
            }
        }
        Ok((up, down))
    }

    /// Looks for a single position that every path passes, lying after all
    /// edges out of `upstream` situations and at or before all `downstream`
    /// situations.
    pub fn separate_variables(&self, upstream: &str, downstream: &str) -> Result<VariableSeparation, CegError> {
        if upstream == downstream {
            return Err(CegError::MalformedQuery("upstream and downstream variables coincide".into()));
        }
        let paths = self.walk_paths();
        let var_at = |p: PositionId| self.positions[p.0].variable.as_deref();
        for (name, v) in [("upstream", upstream), ("downstream", downstream)] {
            if !paths.iter().any(|path| path.positions.iter().any(|p| var_at(*p) == Some(v))) {
                return Err(CegError::MalformedQuery(alloc::format!("{name} variable {v} never occurs")));
            }
        }
        let candidates = (0..self.positions.len()).map(PositionId).filter(|p| *p != self.root && *p != self.sink);
        for c in candidates {
            let ok = paths.iter().all(|path| {
                let Some(at) = path.positions.iter().position(|p| *p == c) else { return false };
                // Position i decides the edge that leaves it, i.e. edge i.
                path.positions[..path.positions.len() - 1].iter().enumerate().all(|(i, p)| match var_at(*p) {
                    Some(v) if v == upstream => i < at,
                    Some(v) if v == downstream => i >= at,
                    _ => true,
                })
            });
            if ok {
                return Ok(VariableSeparation { separated: true, cut_vertex: Some(c), witness: None });
            }
        }
        // A path that routes around the best single candidate: the one
        // visited by most paths among those after some upstream edge.
        let witness = paths.first().map(|p| PathWitness { labels: self.labels_of(p), positions: p.positions.clone(), hits: 0 });
        let witness = paths
            .iter()
            .find(|p| {
                p.positions.iter().all(|q| var_at(*q) != Some(downstream))
                    || p.positions.iter().all(|q| var_at(*q) != Some(upstream))
            })
            .map(|p| PathWitness { labels: self.labels_of(p), positions: p.positions.clone(), hits: 0 })
            .or(witness);
        Ok(VariableSeparation { separated: false, cut_vertex: None, witness })
    }

    fn satisfies(&self, path: &CegPath, event: &Event) -> bool {
        event.edges.iter().all(|cond| {
            path.edges.iter().any(|e| {
                let edge = &self.edges[*e];
                edge.label == cond.label
                    && cond
                        .variable
                        .as_ref()
                        .map(|v| self.positions[edge.from.0].variable.as_deref() == Some(v.as_str()))
                        .unwrap_or(true)
            })
        }) && event.positions.iter().all(|p| path.positions.contains(p))
    }

    /// Restricts to the paths consistent with `event`, renormalizes
    /// probabilities over them, drops the stage colouring and re-merges
    /// positions whose futures coincide.
    pub fn pseudo_ancestral(&self, event: &Event) -> Result<Ceg, CegError> {
        if let Some(p) = event.positions.iter().find(|p| p.0 >= self.positions.len()) {
            return Err(CegError::UnknownPosition(p.0));
        }
        let kept: Vec<CegPath> = self.walk_paths().into_iter().filter(|p| self.satisfies(p, event)).collect();
        if kept.is_empty() {
            return Err(CegError::EmptyEvent);
        }
        let with_probs = self.has_probabilities();
        // Trie over the retained paths; mass[v] is the retained probability
        // passing through trie node v.
        let mut nodes = vec![MergeNode { variable: self.positions[self.root.0].variable.clone(), stage: None, depth: 0, children: Vec::new() }];
        let mut mass = vec![0.0f64];
        for path in &kept {
            let p = path.probability.unwrap_or(1.0);
            let mut cur = 0;
            mass[0] += p;
            for (i, &e) in path.edges.iter().enumerate() {
                let edge = &self.edges[e];
                let next = match nodes[cur].children.iter().find(|(l, _, _)| *l == edge.label) {
                    Some((_, _, c)) => *c,
                    None => {
                        let id = nodes.len();
                        let to = path.positions[i + 1];
                        let variable = if to == self.sink { None } else { self.positions[to.0].variable.clone() };
                        nodes.push(MergeNode { variable, stage: None, depth: i + 1, children: Vec::new() });
                        mass.push(0.0);
                        nodes[cur].children.push((edge.label.clone(), None, id));
                        id
                    }
                };
                mass[next] += p;
                cur = next;
            }
        }
        if with_probs {
            for v in 0..nodes.len() {
                let total = mass[v];
                for child in nodes[v].children.iter_mut() {
                    child.1 = Some(mass[child.2] / total);
                }
            }
        }
        for node in nodes.iter_mut() {
            node.children.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let merged = merge(&nodes, 0, false);
        let mut ceg = Ceg::assemble(merged, false, self.phrases.clone());
        ceg.position_map = Vec::new();
        Ok(ceg)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tree::{EventTree, TreeEdge, Vertex};
    use super::*;

    fn symmetric(stages: Vec<Vec<VertexId>>, probs: [(f64, f64); 3]) -> StagedTree {
        let vertices = (0..7).map(|i| Vertex { name: alloc::format!("v{i}"), variable: Some(alloc::format!("d{}", if i == 0 { 0 } else { 1 })) }).collect();
        let mut edges = Vec::new();
        for (parent, (p, q)) in probs.iter().enumerate() {
            edges.push(TreeEdge { from: VertexId(parent), to: VertexId(2 * parent + 1), label: "a".into(), probability: Some(*p) });
            edges.push(TreeEdge { from: VertexId(parent), to: VertexId(2 * parent + 2), label: "b".into(), probability: Some(*q) });
        }
        StagedTree::new(EventTree::new(vertices, edges).unwrap(), stages).unwrap()
    }

    #[test]
    fn trivial_colouring_keeps_tree_shape() {
        let st = symmetric(vec![], [(0.5, 0.5), (0.3, 0.7), (0.3, 0.7)]);
        let ceg = Ceg::from_staged_tree(&st).unwrap();
        assert_eq!(ceg.positions().len(), 4);
        assert_eq!(ceg.enumerate_paths(), st.enumerate_paths());
    }

    #[test]
    fn shared_stage_merges() {
        let st = symmetric(vec![vec![VertexId(1), VertexId(2)]], [(0.5, 0.5), (0.3, 0.7), (0.3, 0.7)]);
        let ceg = Ceg::from_staged_tree(&st).unwrap();
        assert_eq!(ceg.positions().len(), 3);
        assert_eq!(ceg.position_map()[1], ceg.position_map()[2]);
        assert_eq!(ceg.enumerate_paths(), st.enumerate_paths());
    }

    #[test]
    fn depth_one_is_fine_cut() {
        let st = symmetric(vec![], [(0.5, 0.5); 3]);
        let ceg = Ceg::from_staged_tree(&st).unwrap();
        let w: BTreeSet<_> = [PositionId(1), PositionId(2)].into_iter().collect();
        assert!(ceg.is_fine_cut(&w).unwrap());
        let partial: BTreeSet<_> = [PositionId(1)].into_iter().collect();
        let res = ceg.separated(&CutQuery::positions(partial)).unwrap();
        assert!(!res.separated);
        assert_eq!(res.witness.unwrap().hits, 0);
        assert!(matches!(ceg.is_fine_cut(&[PositionId(0)].into_iter().collect()), Err(CegError::MalformedQuery(_))));
        assert!(matches!(ceg.is_fine_cut(&[PositionId(40)].into_iter().collect()), Err(CegError::UnknownPosition(40))));
    }

    #[test]
    fn pseudo_ancestral_of_everything_is_uncoloured_copy() {
        let st = symmetric(vec![vec![VertexId(1), VertexId(2)]], [(0.5, 0.5), (0.3, 0.7), (0.3, 0.7)]);
        let ceg = Ceg::from_staged_tree(&st).unwrap();
        let pa = ceg.pseudo_ancestral(&Event::all()).unwrap();
        assert!(!pa.is_coloured());
        assert_eq!(pa.positions().len(), ceg.positions().len());
        let (a, b) = (pa.enumerate_paths(), ceg.enumerate_paths());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.labels, y.labels);
            assert!(libm::fabs(x.probability.unwrap() - y.probability.unwrap()) < 1e-12);
        }
        let a_first = ceg.pseudo_ancestral(&Event::from_items(&["d0=a"])).unwrap();
        let paths = a_first.enumerate_paths();
        assert_eq!(paths.len(), 2);
        assert!(libm::fabs(paths[0].probability.unwrap() - 0.3) < 1e-12);
        assert!(matches!(ceg.pseudo_ancestral(&Event::from_items(&["zzz"])), Err(CegError::EmptyEvent)));
    }
}
