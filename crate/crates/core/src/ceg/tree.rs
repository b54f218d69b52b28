use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{CegError, StageId, VertexId, STAGING_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vertex {
    pub name: String,
    /// Name of the event variable decided at this situation.
    pub variable: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeEdge {
    pub from: VertexId,
    pub to: VertexId,
    pub label: String,
    pub probability: Option<f64>,
}

/// One root-to-sink (or root-to-leaf) outcome.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathOutcome {
    pub labels: Vec<String>,
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    vertices: Vec<Vertex>,
    edges: Vec<TreeEdge>,
    root: VertexId,
    out: Vec<Vec<usize>>,
    parent_edge: Vec<Option<usize>>,
    depth: Vec<usize>,
    has_probabilities: bool,
}

impl EventTree {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<TreeEdge>) -> Result<Self, CegError> {
        let n = vertices.len();
        let mut names = BTreeSet::new();
        for v in &vertices {
            if !names.insert(v.name.as_str()) {
                return Err(CegError::DuplicateVertex(v.name.clone()));
            }
        }
        let with_p = edges.iter().filter(|e| e.probability.is_some()).count();
        if with_p != 0 && with_p != edges.len() {
            return Err(CegError::PartialProbabilities);
        }
        let mut out = vec![Vec::new(); n];
        let mut parent_edge = vec![None; n];
        for (i, e) in edges.iter().enumerate() {
            if e.from.0 >= n || e.to.0 >= n {
                return Err(CegError::UnknownVertex(alloc::format!("#{}", e.from.0.max(e.to.0))));
            }
            if let Some(p) = e.probability {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(CegError::InvalidProbability(p));
                }
            }
            if parent_edge[e.to.0].is_some() {
                return Err(CegError::MultipleParents(vertices[e.to.0].name.clone()));
            }
            parent_edge[e.to.0] = Some(i);
            out[e.from.0].push(i);
        }
        for (v, list) in out.iter_mut().enumerate() {
            list.sort_by(|a, b| edges[*a].label.cmp(&edges[*b].label));
            for w in list.windows(2) {
                if edges[w[0]].label == edges[w[1]].label {
                    return Err(CegError::DuplicateLabel { vertex: vertices[v].name.clone(), label: edges[w[0]].label.clone() });
                }
            }
        }
        let roots: Vec<usize> = (0..n).filter(|v| parent_edge[*v].is_none()).collect();
        if roots.len() != 1 {
            return Err(CegError::RootCount(roots.len()));
        }
        let root = VertexId(roots[0]);
        let mut depth = vec![usize::MAX; n];
        depth[root.0] = 0;
        let mut queue = VecDeque::from([root.0]);
        while let Some(v) = queue.pop_front() {
            for &e in &out[v] {
                let c = edges[e].to.0;
                if depth[c] == usize::MAX {
                    depth[c] = depth[v] + 1;
                    queue.push_back(c);
                }
            }
        }
        if let Some(v) = (0..n).find(|v| depth[*v] == usize::MAX) {
            return Err(CegError::Disconnected(vertices[v].name.clone()));
        }
        Ok(EventTree { vertices, edges, root, out, parent_edge, depth, has_probabilities: with_p > 0 })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<VertexId> {
        self.vertices.iter().position(|v| v.name == name).map(VertexId)
    }

    /// Outgoing edges of `v`, sorted by label.
    pub fn out_edges(&self, v: VertexId) -> impl Iterator<Item = &TreeEdge> {
        self.out[v.0].iter().map(move |e| &self.edges[*e])
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.out[v.0].len()
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.out[v.0].is_empty()
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent_edge[v.0].map(|e| self.edges[e].from)
    }

    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v.0]
    }

    pub fn has_probabilities(&self) -> bool {
        self.has_probabilities
    }

    /// Every root-to-leaf path as (label sequence, probability), sorted by
    /// label sequence.
    pub fn enumerate_paths(&self) -> Vec<PathOutcome> {
        let mut out = Vec::new();
        let mut labels = Vec::new();
        self.walk(self.root, &mut labels, 1.0, &mut out);
        out.sort_by(|a, b| a.labels.cmp(&b.labels));
        out
    }

    fn walk(&self, v: VertexId, labels: &mut Vec<String>, p: f64, out: &mut Vec<PathOutcome>) {
        if self.is_leaf(v) {
            if v != self.root {
                out.push(PathOutcome { labels: labels.clone(), probability: self.has_probabilities.then_some(p) });
            }
            return;
        }
        for e in self.out[v.0].iter().map(|e| &self.edges[*e]) {
            labels.push(e.label.clone());
            self.walk(e.to, labels, p * e.probability.unwrap_or(1.0), out);
            labels.pop();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StagingViolation {
    OutDegree { stage: StageId, vertex: String, expected: usize, found: usize },
    Labels { stage: StageId, vertex: String },
    Probability { stage: StageId, vertex: String, label: String, expected: f64, found: f64 },
    Sum { vertex: String, total: f64 },
}

/// An event tree with a partition of its situations into stages.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedTree {
    tree: EventTree,
    stages: Vec<Vec<VertexId>>,
    stage_of: Vec<Option<StageId>>,
    phrases: BTreeMap<String, String>,
    cut_descriptions: BTreeMap<String, String>,
}

impl StagedTree {
    /// Situations not listed in any stage get singleton stages, appended in
    /// vertex order.
    pub fn new(tree: EventTree, stages: Vec<Vec<VertexId>>) -> Result<Self, CegError> {
        let mut stage_of = vec![None; tree.len()];
        let mut all = Vec::new();
        for members in stages {
            if members.is_empty() {
                continue;
            }
            let sid = StageId(all.len());
            for v in &members {
                if v.0 >= tree.len() {
                    return Err(CegError::UnknownVertex(alloc::format!("#{}", v.0)));
                }
                if tree.is_leaf(*v) || stage_of[v.0].is_some() {
                    return Err(CegError::BadStageMember(tree.vertices[v.0].name.clone()));
                }
                stage_of[v.0] = Some(sid);
            }
            all.push(members);
        }
        for v in 0..tree.len() {
            if !tree.is_leaf(VertexId(v)) && stage_of[v].is_none() {
                stage_of[v] = Some(StageId(all.len()));
                all.push(vec![VertexId(v)]);
            }
        }
        Ok(StagedTree { tree, stages: all, stage_of, phrases: BTreeMap::new(), cut_descriptions: BTreeMap::new() })
    }

    /// Every situation in its own stage.
    pub fn trivially_coloured(tree: EventTree) -> Self {
        StagedTree::new(tree, Vec::new()).expect("singleton stages are valid")
    }

    /// Natural-language descriptions of event variables, used when
    /// rendering questions.
    pub fn with_phrases(mut self, phrases: BTreeMap<String, String>) -> Self {
        self.phrases = phrases;
        self
    }

    pub fn phrases(&self) -> &BTreeMap<String, String> {
        &self.phrases
    }

    /// How reaching a variable's situations reads as a condition, e.g.
    /// `x_a` -> "eligible applicants apply for benefits".
    pub fn with_cut_descriptions(mut self, descriptions: BTreeMap<String, String>) -> Self {
        self.cut_descriptions = descriptions;
        self
    }

    pub fn cut_descriptions(&self) -> &BTreeMap<String, String> {
        &self.cut_descriptions
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn stages(&self) -> &[Vec<VertexId>] {
        &self.stages
    }

    pub fn stage_of(&self, v: VertexId) -> Option<StageId> {
        self.stage_of[v.0]
    }

    pub fn enumerate_paths(&self) -> Vec<PathOutcome> {
        self.tree.enumerate_paths()
    }

    /// Reports every stage whose members disagree on out-degree, labels or
    /// probabilities, and every situation whose probabilities do not sum to
    /// one.
    pub fn validate_staging(&self) -> Vec<StagingViolation> {
        let t = &self.tree;
        let mut out = Vec::new();
        for (s, members) in self.stages.iter().enumerate() {
            let stage = StageId(s);
            let first = members[0];
            let reference: Vec<&super::TreeEdge> = t.out_edges(first).collect();
            for &v in &members[1..] {
                let edges: Vec<&super::TreeEdge> = t.out_edges(v).collect();
                let name = t.vertices[v.0].name.clone();
                if edges.len() != reference.len() {
                    out.push(StagingViolation::OutDegree { stage, vertex: name, expected: reference.len(), found: edges.len() });
                    continue;
                }
                if edges.iter().zip(&reference).any(|(a, b)| a.label != b.label) {
                    out.push(StagingViolation::Labels { stage, vertex: name });
                    continue;
                }
                for (a, b) in edges.iter().zip(&reference) {
                    if let (Some(pa), Some(pb)) = (a.probability, b.probability) {
                        if libm::fabs(pa - pb) > STAGING_TOLERANCE {
                            out.push(StagingViolation::Probability {
                                stage,
                                vertex: name.clone(),
                                label: a.label.clone(),
                                expected: pb,
                                found: pa,
                            });
                        }
                    }
                }
            }
        }
        if t.has_probabilities {
            for v in 0..t.len() {
                let v = VertexId(v);
                if t.is_leaf(v) {
                    continue;
                }
                let total: f64 = t.out_edges(v).filter_map(|e| e.probability).sum();
                if libm::fabs(total - 1.0) > STAGING_TOLERANCE {
                    out.push(StagingViolation::Sum { vertex: t.vertices[v.0].name.clone(), total });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn binary_tree(probs: [(f64, f64); 3]) -> EventTree {
        let vertices = (0..7).map(|i| Vertex { name: alloc::format!("v{i}"), variable: None }).collect();
        let mut edges = Vec::new();
        for (parent, (p, q)) in probs.iter().enumerate() {
            let (l, r) = (2 * parent + 1, 2 * parent + 2);
            edges.push(TreeEdge { from: VertexId(parent), to: VertexId(l), label: "a".into(), probability: Some(*p) });
            edges.push(TreeEdge { from: VertexId(parent), to: VertexId(r), label: "b".into(), probability: Some(*q) });
        }
        EventTree::new(vertices, edges).unwrap()
    }

    #[test]
    fn matching_stage_is_valid() {
        let st = StagedTree::new(binary_tree([(0.5, 0.5), (0.3, 0.7), (0.3, 0.7)]), vec![vec![VertexId(1), VertexId(2)]]).unwrap();
        assert!(st.validate_staging().is_empty());
        assert_eq!(st.stages().len(), 2);
    }

    #[test]
    fn mismatched_probabilities_flagged() {
        let st = StagedTree::new(binary_tree([(0.5, 0.5), (0.3, 0.7), (0.4, 0.6)]), vec![vec![VertexId(1), VertexId(2)]]).unwrap();
        let v = st.validate_staging();
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v.iter().all(|x| matches!(x, StagingViolation::Probability { .. })));
    }

    #[test]
    fn bad_sums_and_structure() {
        let st = StagedTree::trivially_coloured(binary_tree([(0.5, 0.6), (0.3, 0.7), (0.4, 0.6)]));
        assert!(matches!(st.validate_staging()[..], [StagingViolation::Sum { .. }]));
        let vertices = vec![Vertex { name: "r".into(), variable: None }, Vertex { name: "x".into(), variable: None }];
        let dup = vec![
            TreeEdge { from: VertexId(0), to: VertexId(1), label: "a".into(), probability: None },
            TreeEdge { from: VertexId(1), to: VertexId(0), label: "a".into(), probability: None },
        ];
        assert!(EventTree::new(vertices, dup).is_err());
    }

    #[test]
    fn four_equal_paths() {
        let t = binary_tree([(0.5, 0.5); 3]);
        let paths = t.enumerate_paths();
        assert_eq!(paths.len(), 4);
        assert!(paths.iter().all(|p| p.probability == Some(0.25)));
    }

    #[test]
    fn single_edge_tree() {
        let vertices = vec![Vertex { name: "r".into(), variable: None }, Vertex { name: "x".into(), variable: None }];
        let edges = vec![TreeEdge { from: VertexId(0), to: VertexId(1), label: "only".into(), probability: Some(1.0) }];
        let paths = EventTree::new(vertices, edges).unwrap().enumerate_paths();
        assert_eq!(paths, vec![PathOutcome { labels: vec!["only".into()], probability: Some(1.0) }]);
    }
}
