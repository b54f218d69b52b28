//! Forecast, flow and advisor operations shared by the CLI and the service.

use std::collections::BTreeMap;

use elicit_core::elicitation::{advise_framework, FrameworkRecommendation, Reply, CHECKLIST};
use elicit_core::flow::{
    check_conservation, intervene, node_states, uniform_flows, Action, ConservationReport, FlowDiff, FlowGraph, Mass,
    NodeStateVector, PathFlow,
};
use elicit_core::mdm::{self, add_series, MdmSpec, Rewire};
use serde::{Deserialize, Serialize};

use crate::data::{self, ResidualLine};
use crate::document::{series_spec, SeriesDoc};
use crate::error::{CliError, Result};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewireDoc {
    pub child: String,
    pub parents: Vec<String>,
    #[serde(default = "one")]
    pub prior_variance: f64,
}

/// A new series plus the parent lists it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPatch {
    pub series: SeriesDoc,
    #[serde(default)]
    pub rewire: Vec<RewireDoc>,
}

impl SeriesPatch {
    pub fn apply(&self, spec: &MdmSpec) -> Result<MdmSpec> {
        let node = series_spec(&self.series)?;
        let rewires: Vec<Rewire> = self
            .rewire
            .iter()
            .map(|r| Rewire { child: r.child.clone(), parents: r.parents.clone(), prior_variance: r.prior_variance })
            .collect();
        Ok(add_series(spec, node, &rewires)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub series: Vec<String>,
    pub steps: usize,
    pub total_log_density: f64,
    pub residuals: Vec<ResidualLine>,
}

impl ForecastReport {
    pub fn csv(&self) -> String {
        data::write_residuals(&self.residuals)
    }
}

/// Runs the filter over CSV data, after applying `patch` if given. Returns
/// the spec actually used.
pub fn forecast(spec: &MdmSpec, csv: &str, patch: Option<&SeriesPatch>) -> Result<(MdmSpec, ForecastReport)> {
    let spec = match patch {
        Some(p) => p.apply(spec)?,
        None => spec.clone(),
    };
    let rows = data::read_series(csv, &spec)?;
    let traj = mdm::run(&spec, &rows)?;
    let report = ForecastReport {
        series: spec.series(),
        steps: rows.len(),
        total_log_density: traj.forecasts.iter().map(|s| s.total_log_density).sum(),
        residuals: data::residual_lines(&traj),
    };
    Ok((spec, report))
}

/// `{"actions": [...]}` or a bare action list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FlowScript {
    Wrapped { actions: Vec<Action> },
    Bare(Vec<Action>),
}

impl FlowScript {
    pub fn parse(text: &str) -> Result<Vec<Action>> {
        let script: FlowScript = serde_json::from_str(text).map_err(|e| CliError::Document(format!("action script: {e}")))?;
        Ok(match script {
            FlowScript::Wrapped { actions } | FlowScript::Bare(actions) => actions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathMass {
    pub path: Vec<String>,
    pub mass: Mass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowState {
    pub states: NodeStateVector,
    pub conservation: ConservationReport,
    pub paths: Vec<PathMass>,
}

pub fn flow_state(g: &FlowGraph, flows: &[PathFlow], t: Option<usize>) -> Result<FlowState> {
    let states = node_states(g, flows, t)?;
    let conservation = check_conservation(&states);
    let paths = flows.iter().map(|f| PathMass { path: g.path_labels(&f.actors), mass: f.mass.clone() }).collect();
    Ok(FlowState { states, conservation, paths })
}

/// Masses from CSV text, or one unit per path. Timed CSVs must hold a
/// single time index.
pub fn flows_or_uniform(g: &FlowGraph, masses: Option<&str>) -> Result<Vec<PathFlow>> {
    let Some(text) = masses else {
        return Ok(uniform_flows(g, Mass::from_integer(1)));
    };
    let mut groups = data::read_masses(text, g)?;
    match groups.len() {
        0 => Ok(Vec::new()),
        1 => Ok(groups.pop_first().expect("one group").1),
        n => Err(CliError::Usage(format!("masses cover {n} time points; give one"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterventionReport {
    pub diffs: Vec<FlowDiff>,
    pub before: FlowState,
    pub after: FlowState,
}

/// Applies every action in order. Nothing is returned unless all succeed.
pub fn intervene_all(g: &FlowGraph, flows: &[PathFlow], actions: &[Action]) -> Result<(FlowGraph, Vec<PathFlow>, InterventionReport)> {
    let before = flow_state(g, flows, None)?;
    let (mut g, mut flows) = (g.clone(), flows.to_vec());
    let mut diffs = Vec::with_capacity(actions.len());
    for action in actions {
        let (g2, f2, diff) = intervene(&g, &flows, action)?;
        g = g2;
        flows = f2;
        diffs.push(diff);
    }
    let after = flow_state(&g, &flows, None)?;
    Ok((g, flows, InterventionReport { diffs, before, after }))
}

/// Checklist replies by key; accepts `yes/no/unsure` and `y/n/u`.
pub fn parse_replies(value: &serde_json::Value) -> Result<BTreeMap<String, Reply>> {
    let obj = value.as_object().ok_or_else(|| CliError::Document("advisor answers must be an object".into()))?;
    obj.iter()
        .filter(|(_, v)| !v.is_null())
        .map(|(k, v)| {
            let s = v.as_str().ok_or_else(|| CliError::Document(format!("{k}: reply must be a string")))?;
            Ok((k.clone(), parse_reply(s).ok_or_else(|| CliError::Document(format!("{k}: unknown reply {s:?}")))?))
        })
        .collect()
}

pub fn parse_reply(s: &str) -> Option<Reply> {
    match s.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" => Some(Reply::Yes),
        "n" | "no" => Some(Reply::No),
        "u" | "unsure" | "?" => Some(Reply::Unsure),
        _ => None,
    }
}

pub fn advise(replies: &BTreeMap<String, Reply>) -> Result<FrameworkRecommendation> {
    Ok(advise_framework(replies)?)
}

pub fn render_recommendation(r: &FrameworkRecommendation) -> String {
    let mut out = match r.recommended {
        Some(c) => format!("recommended: {}", c.name()),
        None => "recommended: undecided".to_string(),
    };
    if r.ranked.len() > 1 || r.recommended.is_none() {
        let names: Vec<&str> = r.ranked.iter().map(|c| c.name()).collect();
        out += &format!("\ncandidates: {}", names.join(", "));
    }
    if r.advisory_only {
        out += "\nadvisory only: the engine has no model of this class";
    }
    out += "\ntrail:";
    for t in &r.trail {
        out += &format!("\n  {} = {:?}{}", t.key, t.reply, if t.defaulted { " (default)" } else { "" });
    }
    for s in &r.steps {
        out += &format!("\n{} -> {:?}: {}", s.class.name(), s.outcome, s.when_to_use);
    }
    out
}

pub fn checklist() -> Vec<serde_json::Value> {
    CHECKLIST.iter().map(|c| serde_json::json!({ "key": c.key, "question": c.question })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use elicit_core::mdm::MdmNodeSpec;

    #[test]
    fn scripts_in_both_shapes() {
        let a = FlowScript::parse(r#"{"actions": [{"action": "remove_actor", "actor": "x"}]}"#).unwrap();
        let b = FlowScript::parse(r#"[{"action": "remove_actor", "actor": "x"}]"#).unwrap();
        assert_eq!(a, b);
        assert!(FlowScript::parse(r#"[{"action": "explode"}]"#).is_err());
    }

    #[test]
    fn failed_script_changes_nothing() {
        let g = FlowGraph::from_labels(vec![vec!["v".into()], vec!["s".into()]], &[("v", "s")]).unwrap();
        let flows = flows_or_uniform(&g, None).unwrap();
        let actions = FlowScript::parse(r#"[{"action": "merge_sites", "sites": ["s"], "label": "t"},
                                           {"action": "remove_actor", "actor": "v"}]"#)
        .unwrap();
        assert!(intervene_all(&g, &flows, &actions).is_err());
    }

    #[test]
    fn patched_forecast_adds_a_column() {
        let spec = MdmSpec::new(vec![MdmNodeSpec::new("A", &[], 1.0), MdmNodeSpec::new("M", &["A"], 1.0)]);
        let patch: SeriesPatch = serde_json::from_str(
            r#"{"series": {"id": "H", "parents": [], "v": 1.0}, "rewire": [{"child": "M", "parents": ["H", "A"]}]}"#,
        )
        .unwrap();
        let (used, report) = forecast(&spec, "A,H,M\n1,2,3\n2,3,4\n", Some(&patch)).unwrap();
        assert_eq!(used.series(), ["A", "H", "M"]);
        assert_eq!(report.residuals.len(), 6);
        assert!(forecast(&spec, "A,M\n1,2\n", Some(&patch)).is_err());
    }

    #[test]
    fn replies() {
        let r = parse_replies(&serde_json::json!({"temporal": "y", "contemporaneous_effects": "yes"})).unwrap();
        assert_eq!(advise(&r).unwrap().recommended.unwrap().name(), advise(&r).unwrap().ranked[0].name());
        assert!(parse_replies(&serde_json::json!({"temporal": "maybe"})).is_err());
        assert!(advise(&[("nonsense".to_string(), Reply::Yes)].into()).is_err());
    }
}
