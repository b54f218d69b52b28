use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{MdmError, MdmNodeSpec, MdmSpec, StepOverride};

/// Observations used by [`moment_initialize`] when no window is given.
pub const DEFAULT_INIT_WINDOW: usize = 10;

/// Replaces a series' parent list. Coefficients of parents that stay keep
/// their prior, evolution and covariance entries; new coefficients start
/// with mean 0, variance `prior_variance` and no evolution noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewire {
    pub child: String,
    pub parents: Vec<String>,
    pub prior_variance: f64,
}

impl Rewire {
    pub fn new(child: impl Into<String>, parents: &[&str]) -> Self {
        Rewire { child: child.into(), parents: parents.iter().map(|s| String::from(*s)).collect(), prior_variance: 1.0 }
    }
}

/// Embeds the rows/columns listed in `keep` (old index per new index) into
/// a matrix of the new size.
fn remap(a: &DMatrix<f64>, keep: &[Option<usize>], fill_diag: f64) -> DMatrix<f64> {
    let n = keep.len();
    DMatrix::from_fn(n, n, |i, j| match (keep[i], keep[j]) {
        (Some(a_i), Some(a_j)) => a[(a_i, a_j)],
        _ if i == j => fill_diag,
        _ => 0.0,
    })
}

fn rewire_node(node: &MdmNodeSpec, parents: &[String], prior_variance: f64) -> MdmNodeSpec {
    let mut keep = Vec::with_capacity(parents.len() + 1);
    keep.push(Some(0));
    keep.extend(parents.iter().map(|p| node.parents.iter().position(|q| q == p).map(|k| k + 1)));
    let m0 = DVector::from_fn(keep.len(), |i, _| keep[i].map(|k| node.m0[k]).unwrap_or(0.0));
    let overrides = node
        .overrides
        .iter()
        .map(|(t, o)| {
            (*t, StepOverride {
                g: o.g.as_ref().map(|g| remap(g, &keep, 1.0)),
                w: o.w.as_ref().map(|w| remap(w, &keep, 0.0)),
                v: o.v,
            })
        })
        .collect::<BTreeMap<_, _>>();
    MdmNodeSpec {
        id: node.id.clone(),
        parents: parents.to_vec(),
        g: remap(&node.g, &keep, 1.0),
        w: remap(&node.w, &keep, 0.0),
        v: node.v,
        m0,
        c0: remap(&node.c0, &keep, prior_variance),
        overrides,
    }
}

/// Adds a series and rewires children. The new series goes directly before
/// the first series that lists it as a parent, or at the end. Untouched
/// series are copied unchanged.
pub fn add_series(spec: &MdmSpec, new_node: MdmNodeSpec, rewire: &[Rewire]) -> Result<MdmSpec, MdmError> {
    spec.ensure_valid()?;
    if spec.index_of(&new_node.id).is_some() {
        return Err(MdmError::DuplicateSeries(new_node.id));
    }
    let mut nodes = spec.nodes.clone();
    for rw in rewire {
        let i = spec.index_of(&rw.child).ok_or_else(|| MdmError::UnknownSeries(rw.child.clone()))?;
        nodes[i] = rewire_node(&spec.nodes[i], &rw.parents, rw.prior_variance);
    }
    let at = nodes.iter().position(|n| n.parents.contains(&new_node.id)).unwrap_or(nodes.len());
    for p in &new_node.parents {
        match nodes.iter().position(|n| &n.id == p) {
            None => return Err(MdmError::UnknownSeries(p.clone())),
            Some(j) if j >= at => {
                return Err(MdmError::OrderingViolation(format!(
                    "{} must precede {} but {} depends on it",
                    p, new_node.id, nodes[at].id
                )))
            }
            Some(_) => {}
        }
    }
    nodes.insert(at, new_node);
    let out = MdmSpec { nodes, independent_priors: spec.independent_priors };
    for (i, node) in out.nodes.iter().enumerate() {
        for p in &node.parents {
            match out.index_of(p) {
                None => return Err(MdmError::UnknownSeries(p.clone())),
                Some(j) if j >= i => {
                    return Err(MdmError::OrderingViolation(format!("{p} is declared after its child {}", node.id)))
                }
                Some(_) => {}
            }
        }
    }
    out.ensure_valid()?;
    Ok(out)
}

/// Replaces parent lists in place, keeping the series order.
pub fn rewire(spec: &MdmSpec, rewires: &[Rewire]) -> Result<MdmSpec, MdmError> {
    spec.ensure_valid()?;
    let mut out = spec.clone();
    for rw in rewires {
        let i = spec.index_of(&rw.child).ok_or_else(|| MdmError::UnknownSeries(rw.child.clone()))?;
        for p in &rw.parents {
            match spec.index_of(p) {
                None => return Err(MdmError::UnknownSeries(p.clone())),
                Some(j) if j >= i => {
                    return Err(MdmError::OrderingViolation(format!("{p} is declared after its child {}", rw.child)))
                }
                Some(_) => {}
            }
        }
        out.nodes[i] = rewire_node(&spec.nodes[i], &rw.parents, rw.prior_variance);
    }
    out.ensure_valid()?;
    Ok(out)
}

/// Sets each series' observation variance to the residual variance of a
/// least-squares fit on its design vectors over the first `k` complete rows.
/// Series with too few complete rows keep their variance.
pub fn moment_initialize(spec: &MdmSpec, data: &[Vec<Option<f64>>], k: usize) -> Result<MdmSpec, MdmError> {
    let mut out = spec.clone();
    for (r, node) in spec.nodes.iter().enumerate() {
        let p = node.dim();
        let mut xs: Vec<DVector<f64>> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (t, row) in data.iter().take(k).enumerate() {
            let Some(y) = row.get(r).copied().flatten() else { continue };
            match super::design_vector(spec, r, row, t + 1) {
                Ok(f) => {
                    xs.push(f);
                    ys.push(y);
                }
                Err(MdmError::MissingParentObservation { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let n = ys.len();
        if n <= p {
            continue;
        }
        let x = DMatrix::from_fn(n, p, |i, j| xs[i][j]);
        let y = DVector::from_vec(ys);
        let Ok(beta) = x.clone().svd(true, true).solve(&y, 1e-12) else { continue };
        let resid = &y - &x * beta;
        let v = resid.norm_squared() / (n - p) as f64;
        if v > 0.0 && v.is_finite() {
            out.nodes[r].v = v;
        }
    }
    Ok(out)
}
