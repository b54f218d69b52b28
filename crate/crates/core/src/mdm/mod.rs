//! Multi-regression dynamic models.
//!
//! Each series regresses on an intercept plus the contemporaneous values of
//! its parents, with a random-walk (or user-given) state evolution:
//!
//! ```text
//! Y_t(r) = F_t(r)' θ_t(r) + v_t(r),   v_t(r) ~ N(0, V_t(r))
//! θ_t(r) = G_t(r) θ_{t-1}(r) + w_t(r), w_t(r) ~ N(0, W_t(r))
//! ```
//!
//! Priors are independent across series, so the filter runs one
//! conjugate update per series and the joint one-step predictive is the
//! product of the per-series predictives.

mod filter;
mod revise;

pub use filter::{
    design_vector, log_normal_pdf, marginal_forecast, one_step_forecast, run, step_filter, FilterState,
    ResidualRow, SeriesForecast, StepForecast, Trajectory,
};
pub use revise::{add_series, moment_initialize, rewire, Rewire, DEFAULT_INIT_WINDOW};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Symmetry and eigenvalue slack for covariance checks.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Predictive variances are floored here before dividing.
pub const Q_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdmError {
    #[error("invalid specification: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("series {series} needs parent {parent} observed at time {t}")]
    MissingParentObservation { series: String, parent: String, t: usize },
    #[error("observation vector has {got} entries, expected {expected}")]
    ObservationLength { expected: usize, got: usize },
    #[error("data has no column for series {0}")]
    MissingSeries(String),
    #[error("no data rows")]
    EmptyData,
    #[error("predictive variance for series {series} at time {t} is not finite")]
    NumericalBreakdown { series: String, t: usize },
    #[error("ordering violation: {0}")]
    OrderingViolation(String),
    #[error("unknown series {0}")]
    UnknownSeries(String),
    #[error("series {0} already exists")]
    DuplicateSeries(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Matrix {
    G,
    W,
    C0,
    M0,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "violation", rename_all = "snake_case"))]
pub enum Violation {
    DuplicateSeries { series: String },
    UnknownParent { series: String, parent: String },
    DuplicateParent { series: String, parent: String },
    /// Parent declared at or after the child.
    Ordering { series: String, parent: String },
    Dimension { series: String, matrix: Matrix, expected: usize, rows: usize, cols: usize, t: Option<usize> },
    NotSymmetric { series: String, matrix: Matrix, t: Option<usize> },
    NotPsd { series: String, matrix: Matrix, min_eigenvalue: f64, t: Option<usize> },
    NonPositiveVariance { series: String, v: f64, t: Option<usize> },
}

/// Per-time replacement of the evolution or observation variance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOverride {
    pub g: Option<DMatrix<f64>>,
    pub w: Option<DMatrix<f64>>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdmNodeSpec {
    pub id: String,
    pub parents: Vec<String>,
    pub g: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub v: f64,
    pub m0: DVector<f64>,
    pub c0: DMatrix<f64>,
    /// Keyed by time index, starting at 1.
    pub overrides: BTreeMap<usize, StepOverride>,
}

impl MdmNodeSpec {
    /// Random walk with no evolution noise, zero prior mean and identity
    /// prior covariance.
    pub fn new(id: impl Into<String>, parents: &[&str], v: f64) -> Self {
        let p = 1 + parents.len();
        MdmNodeSpec {
            id: id.into(),
            parents: parents.iter().map(|s| String::from(*s)).collect(),
            g: DMatrix::identity(p, p),
            w: DMatrix::zeros(p, p),
            v,
            m0: DVector::zeros(p),
            c0: DMatrix::identity(p, p),
            overrides: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        1 + self.parents.len()
    }

    pub fn with_w(mut self, w: DMatrix<f64>) -> Self {
        self.w = w;
        self
    }

    pub fn with_g(mut self, g: DMatrix<f64>) -> Self {
        self.g = g;
        self
    }

    pub fn with_prior(mut self, m0: DVector<f64>, c0: DMatrix<f64>) -> Self {
        self.m0 = m0;
        self.c0 = c0;
        self
    }

    pub fn g_at(&self, t: usize) -> &DMatrix<f64> {
        self.overrides.get(&t).and_then(|o| o.g.as_ref()).unwrap_or(&self.g)
    }

    pub fn w_at(&self, t: usize) -> &DMatrix<f64> {
        self.overrides.get(&t).and_then(|o| o.w.as_ref()).unwrap_or(&self.w)
    }

    pub fn v_at(&self, t: usize) -> f64 {
        self.overrides.get(&t).and_then(|o| o.v).unwrap_or(self.v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdmSpec {
    pub nodes: Vec<MdmNodeSpec>,
    /// Recorded assertion that the prior parameter blocks are mutually
    /// independent. The block-diagonal representation enforces it.
    pub independent_priors: bool,
}

impl MdmSpec {
    pub fn new(nodes: Vec<MdmNodeSpec>) -> Self {
        MdmSpec { nodes, independent_priors: true }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&MdmNodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn series(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    /// Every violation of ordering, dimension, symmetry, PSD and variance
    /// requirements.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let series = || node.id.clone();
            if self.nodes[..i].iter().any(|n| n.id == node.id) {
                out.push(Violation::DuplicateSeries { series: series() });
            }
            for (k, parent) in node.parents.iter().enumerate() {
                if node.parents[..k].contains(parent) {
                    out.push(Violation::DuplicateParent { series: series(), parent: parent.clone() });
                }
                match self.index_of(parent) {
                    None => out.push(Violation::UnknownParent { series: series(), parent: parent.clone() }),
                    Some(j) if j >= i => out.push(Violation::Ordering { series: series(), parent: parent.clone() }),
                    Some(_) => {}
                }
            }
            let p = node.dim();
            check_square(&mut out, node, Matrix::G, &node.g, p, None, false);
            check_square(&mut out, node, Matrix::W, &node.w, p, None, true);
            check_square(&mut out, node, Matrix::C0, &node.c0, p, None, true);
            if node.m0.len() != p {
                out.push(Violation::Dimension {
                    series: series(),
                    matrix: Matrix::M0,
                    expected: p,
                    rows: node.m0.len(),
                    cols: 1,
                    t: None,
                });
            }
            if !(node.v > 0.0) {
                out.push(Violation::NonPositiveVariance { series: series(), v: node.v, t: None });
            }
            for (&t, o) in &node.overrides {
                if let Some(g) = &o.g {
                    check_square(&mut out, node, Matrix::G, g, p, Some(t), false);
                }
                if let Some(w) = &o.w {
                    check_square(&mut out, node, Matrix::W, w, p, Some(t), true);
                }
                if let Some(v) = o.v {
                    if !(v > 0.0) {
                        out.push(Violation::NonPositiveVariance { series: series(), v, t: Some(t) });
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), MdmError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(MdmError::Invalid(v))
        }
    }
}

fn check_square(
    out: &mut Vec<Violation>,
    node: &MdmNodeSpec,
    matrix: Matrix,
    a: &DMatrix<f64>,
    p: usize,
    t: Option<usize>,
    psd: bool,
) {
    if a.nrows() != p || a.ncols() != p {
        out.push(Violation::Dimension { series: node.id.clone(), matrix, expected: p, rows: a.nrows(), cols: a.ncols(), t });
        return;
    }
    if !psd {
        return;
    }
    if (a - a.transpose()).amax() > PSD_TOLERANCE {
        out.push(Violation::NotSymmetric { series: node.id.clone(), matrix, t });
        return;
    }
    let min = min_eigenvalue(a);
    if min < -PSD_TOLERANCE {
        out.push(Violation::NotPsd { series: node.id.clone(), matrix, min_eigenvalue: min, t });
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn summer_meals() -> MdmSpec {
        MdmSpec::new(alloc::vec![
            MdmNodeSpec::new("A", &[], 1.0),
            MdmNodeSpec::new("T", &["A"], 1.0),
            MdmNodeSpec::new("M", &["T"], 1.0),
        ])
    }

    #[test]
    fn summer_meals_validates() {
        assert!(summer_meals().validate().is_empty());
    }

    #[test]
    fn parent_after_child() {
        let spec = MdmSpec::new(alloc::vec![MdmNodeSpec::new("T", &["A"], 1.0), MdmNodeSpec::new("A", &[], 1.0)]);
        assert_eq!(spec.validate(), alloc::vec![Violation::Ordering { series: "T".into(), parent: "A".into() }]);
    }

    #[test]
    fn negative_eigenvalue_in_w() {
        let mut spec = summer_meals();
        spec.nodes[1].w = DMatrix::from_row_slice(2, 2, &[-1e-3, 0.0, 0.0, 0.5]);
        match spec.validate().as_slice() {
            [Violation::NotPsd { series, matrix: Matrix::W, min_eigenvalue, t: None }] => {
                assert_eq!(series, "T");
                assert!((min_eigenvalue + 1e-3).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_each_violation() {
        let mut spec = summer_meals();
        spec.nodes[0].v = 0.0;
        spec.nodes[2].c0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        spec.nodes[2].m0 = DVector::zeros(3);
        spec.nodes[1].overrides.insert(4, StepOverride { v: Some(-1.0), ..Default::default() });
        assert_eq!(spec.validate().len(), 4);
    }
}
