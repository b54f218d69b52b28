//! Versioned JSON model documents.
//!
//! Every document has `kind`, `version` and `metadata`; the remaining
//! fields depend on the kind. Loading validates the payload with the
//! engine's own constructors, so a document that loads is a valid model.

use std::collections::BTreeMap;
use std::path::Path;

use elicit_core::ceg::{Ceg, CegEdge, EventTree, Position, PositionId, StagedTree, TreeEdge, Vertex, VertexId};
use elicit_core::elicitation::SessionModel;
use elicit_core::flow::{Actor, FlowGraph};
use elicit_core::hash::{sha256_hex, CanonicalText};
use elicit_core::mdm::{MdmNodeSpec, MdmSpec, StepOverride};
use elicit_core::{Dag, Node};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub body: Body,
    pub version: u32,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Dag(DagBody),
    StagedTree(TreeBody),
    Ceg(CegBody),
    Mdm(MdmBody),
    FlowGraph(FlowBody),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    /// Defaults to the id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Defaults to the id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagBody {
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdgeDoc {
    pub from: String,
    pub to: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeBody {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<TreeEdgeDoc>,
    /// Vertex names per stage. Unlisted situations get their own stage.
    #[serde(default)]
    pub stages: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phrases: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub cut_descriptions: BTreeMap<String, String>,
}

/// A chain event graph stored next to the staged tree it was built from.
/// The graph part is recomputed on load and must agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CegBody {
    pub tree: TreeBody,
    pub positions: Vec<Position>,
    pub edges: Vec<CegEdge>,
    pub position_map: Vec<PositionId>,
}

/// A square matrix, or a number standing for that multiple of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDoc {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideDoc {
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub id: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideDoc>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdmBody {
    pub series: Vec<SeriesDoc>,
    #[serde(default = "yes")]
    pub independent_priors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowBody {
    /// Actor labels per level, vendors first.
    pub levels: Vec<Vec<String>>,
    /// `[[l, j], [l + 1, k]]`, one-based as in `z(l,j)`.
    pub edges: Vec<[[usize; 2]; 2]>,
}

/// A loaded, validated model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dag(Dag),
    StagedTree(StagedTree),
    Ceg { tree: StagedTree, ceg: Ceg },
    Mdm(MdmSpec),
    Flow(FlowGraph),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Dag(_) => "dag",
            Model::StagedTree(_) => "staged_tree",
            Model::Ceg { .. } => "ceg",
            Model::Mdm(_) => "mdm",
            Model::Flow(_) => "flow_graph",
        }
    }

    fn canonical_text(&self) -> String {
        match self {
            Model::Dag(m) => m.canonical_text(),
            Model::StagedTree(m) | Model::Ceg { tree: m, .. } => m.canonical_text(),
            Model::Mdm(m) => m.canonical_text(),
            Model::Flow(m) => m.canonical_text(),
        }
    }

    /// Content hash of the model itself, as used in transcripts.
    pub fn hash(&self) -> String {
        sha256_hex(&self.canonical_text())
    }

    /// Store identifier: a prefix of the hash of kind and content.
    pub fn store_id(&self) -> String {
        sha256_hex(&format!("{}\n{}", self.kind(), self.canonical_text()))[..16].to_string()
    }

    pub fn session_model(&self) -> SessionModel {
        match self {
            Model::Dag(d) => SessionModel::Dag(d.clone()),
            Model::StagedTree(t) | Model::Ceg { tree: t, .. } => SessionModel::StagedTree(t.clone()),
            Model::Mdm(m) => SessionModel::Mdm(m.clone()),
            Model::Flow(g) => SessionModel::Flow(g.clone()),
        }
    }

    /// Inverse of [`Model::session_model`]; `like` decides whether a staged
    /// tree comes back as a CEG.
    pub fn from_session(model: &SessionModel, like: &Model) -> Result<Model> {
        Ok(match model {
            SessionModel::Dag(d) => Model::Dag(d.clone()),
            SessionModel::StagedTree(t) => match like {
                Model::Ceg { .. } => Model::Ceg { tree: t.clone(), ceg: Ceg::from_staged_tree(t)? },
                _ => Model::StagedTree(t.clone()),
            },
            SessionModel::Mdm(m) => Model::Mdm(m.clone()),
            SessionModel::Flow(g) => Model::Flow(g.clone()),
        })
    }

    pub fn staged_tree(&self) -> Option<&StagedTree> {
        match self {
            Model::StagedTree(t) | Model::Ceg { tree: t, .. } => Some(t),
            _ => None,
        }
    }
}

impl ModelDocument {
    pub fn new(body: Body, metadata: Metadata) -> Self {
        ModelDocument { body, version: FORMAT_VERSION, metadata }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            Body::Dag(_) => "dag",
            Body::StagedTree(_) => "staged_tree",
            Body::Ceg(_) => "ceg",
            Body::Mdm(_) => "mdm",
            Body::FlowGraph(_) => "flow_graph",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| CliError::Document(e.to_string()))?;
        if doc.version != FORMAT_VERSION {
            return Err(CliError::Document(format!("unsupported version {}, expected {FORMAT_VERSION}", doc.version)));
        }
        Ok(doc)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| CliError::io(&path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Document(m) => CliError::Document(format!("{}: {m}", path.as_ref().display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json() + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn load(&self) -> Result<Model> {
        match &self.body {
            Body::Dag(b) => load_dag(b).map(Model::Dag),
            Body::StagedTree(b) => load_tree(b).map(Model::StagedTree),
            Body::Ceg(b) => {
                let tree = load_tree(&b.tree)?;
                let ceg = Ceg::from_staged_tree(&tree)?;
                if ceg.positions() != b.positions.as_slice()
                    || ceg.edges() != b.edges.as_slice()
                    || ceg.position_map() != b.position_map.as_slice()
                {
                    return Err(CliError::Document("stored CEG does not match the one built from its staged tree".into()));
                }
                Ok(Model::Ceg { tree, ceg })
            }
            Body::Mdm(b) => load_mdm(b).map(Model::Mdm),
            Body::FlowGraph(b) => load_flow(b).map(Model::Flow),
        }
    }

    pub fn from_model(model: &Model, metadata: Metadata) -> Self {
        let body = match model {
            Model::Dag(d) => Body::Dag(save_dag(d)),
            Model::StagedTree(t) => Body::StagedTree(save_tree(t)),
            Model::Ceg { tree, ceg } => Body::Ceg(CegBody {
                tree: save_tree(tree),
                positions: ceg.positions().to_vec(),
                edges: ceg.edges().to_vec(),
                position_map: ceg.position_map().to_vec(),
            }),
            Model::Mdm(m) => Body::Mdm(save_mdm(m)),
            Model::Flow(g) => Body::FlowGraph(save_flow(g)),
        };
        ModelDocument::new(body, metadata)
    }
}

fn load_dag(b: &DagBody) -> Result<Dag> {
    let nodes = b
        .nodes
        .iter()
        .map(|n| {
            Node::new(
                n.id.clone(),
                n.label.clone().unwrap_or_else(|| n.id.clone()),
                n.symbol.clone().unwrap_or_else(|| n.id.clone()),
            )
        })
        .collect();
    Ok(Dag::with_edges(nodes, &b.edges)?)
}

fn save_dag(d: &Dag) -> DagBody {
    DagBody {
        nodes: d
            .nodes()
            .iter()
            .map(|n| NodeDoc { id: n.id.clone(), label: Some(n.label.clone()), symbol: Some(n.symbol.clone()) })
            .collect(),
        edges: d.edges().iter().map(|(a, b)| (d.node(*a).id.clone(), d.node(*b).id.clone())).collect(),
    }
}

fn load_tree(b: &TreeBody) -> Result<StagedTree> {
    let index: BTreeMap<&str, usize> = b.vertices.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let find = |name: &str| {
        index.get(name).map(|i| VertexId(*i)).ok_or_else(|| CliError::Document(format!("unknown vertex {name}")))
    };
    let vertices = b.vertices.iter().map(|v| Vertex { name: v.name.clone(), variable: v.variable.clone() }).collect();
    let edges = b
        .edges
        .iter()
        .map(|e| Ok(TreeEdge { from: find(&e.from)?, to: find(&e.to)?, label: e.label.clone(), probability: e.prob }))
        .collect::<Result<Vec<_>>>()?;
    let tree = EventTree::new(vertices, edges)?;
    let stages = b.stages.iter().map(|s| s.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
    Ok(StagedTree::new(tree, stages)?.with_phrases(b.phrases.clone()).with_cut_descriptions(b.cut_descriptions.clone()))
}

fn save_tree(t: &StagedTree) -> TreeBody {
    let tree = t.tree();
    let name = |v: VertexId| tree.vertices()[v.0].name.clone();
    TreeBody {
        vertices: tree.vertices().iter().map(|v| VertexDoc { name: v.name.clone(), variable: v.variable.clone() }).collect(),
        edges: tree
            .edges()
            .iter()
            .map(|e| TreeEdgeDoc { from: name(e.from), to: name(e.to), label: e.label.clone(), prob: e.probability })
            .collect(),
        stages: t.stages().iter().map(|s| s.iter().map(|v| name(*v)).collect()).collect(),
        phrases: t.phrases().clone(),
        cut_descriptions: t.cut_descriptions().clone(),
    }
}

fn matrix(doc: &MatrixDoc, p: usize, what: &str, series: &str) -> Result<DMatrix<f64>> {
    match doc {
        MatrixDoc::Scalar(x) => Ok(DMatrix::identity(p, p) * *x),
        MatrixDoc::Rows(rows) => {
            let cols = rows.first().map(Vec::len).unwrap_or(0);
            if rows.iter().any(|r| r.len() != cols) {
                return Err(CliError::Document(format!("series {series}: {what} rows differ in length")));
            }
            Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
        }
    }
}

fn rows(m: &DMatrix<f64>) -> MatrixDoc {
    MatrixDoc::Rows((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
}

/// Builds one series, filling unspecified parts with the defaults of
/// [`MdmNodeSpec::new`]. Does not validate.
pub fn series_spec(s: &SeriesDoc) -> Result<MdmNodeSpec> {
    let parents: Vec<&str> = s.parents.iter().map(String::as_str).collect();
    let mut node = MdmNodeSpec::new(s.id.clone(), &parents, s.v);
    let p = node.dim();
    if let Some(g) = &s.g {
        node.g = matrix(g, p, "g", &s.id)?;
    }
    if let Some(w) = &s.w {
        node.w = matrix(w, p, "w", &s.id)?;
    }
    if let Some(m0) = &s.m0 {
        node.m0 = DVector::from_vec(m0.clone());
    }
    if let Some(c0) = &s.c0 {
        node.c0 = matrix(c0, p, "c0", &s.id)?;
    }
    for o in &s.overrides {
        if o.t == 0 {
            return Err(CliError::Document(format!("series {}: override times start at 1", s.id)));
        }
        let step = StepOverride {
            g: o.g.as_ref().map(|g| matrix(g, p, "g", &s.id)).transpose()?,
            w: o.w.as_ref().map(|w| matrix(w, p, "w", &s.id)).transpose()?,
            v: o.v,
        };
        if node.overrides.insert(o.t, step).is_some() {
            return Err(CliError::Document(format!("series {}: two overrides for t={}", s.id, o.t)));
        }
    }
    Ok(node)
}

pub fn series_doc(n: &MdmNodeSpec) -> SeriesDoc {
    SeriesDoc {
        id: n.id.clone(),
        parents: n.parents.clone(),
        v: n.v,
        g: Some(rows(&n.g)),
        w: Some(rows(&n.w)),
        m0: Some(n.m0.iter().copied().collect()),
        c0: Some(rows(&n.c0)),
        overrides: n
            .overrides
            .iter()
            .map(|(t, o)| OverrideDoc { t: *t, g: o.g.as_ref().map(rows), w: o.w.as_ref().map(rows), v: o.v })
            .collect(),
    }
}

fn load_mdm(b: &MdmBody) -> Result<MdmSpec> {
    let nodes = b.series.iter().map(series_spec).collect::<Result<Vec<_>>>()?;
    let spec = MdmSpec { nodes, independent_priors: b.independent_priors };
    spec.ensure_valid()?;
    Ok(spec)
}

fn save_mdm(m: &MdmSpec) -> MdmBody {
    MdmBody { series: m.nodes.iter().map(series_doc).collect(), independent_priors: m.independent_priors }
}

fn load_flow(b: &FlowBody) -> Result<FlowGraph> {
    let actor = |[l, j]: [usize; 2]| {
        if l == 0 || j == 0 {
            Err(CliError::Document(format!("actor z({l},{j}): levels and indices start at 1")))
        } else {
            Ok(Actor { level: l - 1, index: j - 1 })
        }
    };
    let edges = b.edges.iter().map(|[a, c]| Ok((actor(*a)?, actor(*c)?))).collect::<Result<Vec<_>>>()?;
    Ok(FlowGraph::new(b.levels.clone(), edges)?)
}

fn save_flow(g: &FlowGraph) -> FlowBody {
    let z = |a: Actor| [a.level + 1, a.index + 1];
    FlowBody { levels: g.levels().to_vec(), edges: g.edges().iter().map(|(a, b)| [z(*a), z(*b)]).collect() }
}
