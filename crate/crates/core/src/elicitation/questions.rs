use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{ElicitError, Orientation, Question, QuestionStatus, Verdict};
use crate::ceg::{Ceg, CutQuery, CutSet};
use crate::graph::{split_pairwise, Dag};
use crate::semigraphoid::{is_implied, Implication, StatementSet, DEFAULT_BUDGET};
use crate::statement::{statement_key, CiStatement, VarSet};

/// "A", "A and B", "A, B and C".
pub fn join_labels<S: AsRef<str>>(labels: &[S]) -> String {
    match labels {
        [] => String::new(),
        [one] => one.as_ref().into(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{} and {}", head.join(", "), last.as_ref())
        }
    }
}

fn labels_of(set: &VarSet, labels: &BTreeMap<String, String>) -> Result<String, ElicitError> {
    let names = set
        .iter()
        .map(|v| labels.get(v).cloned().ok_or_else(|| ElicitError::MissingLabel(v.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(join_labels(&names))
}

/// Symbol to label.
pub fn dag_labels(dag: &Dag) -> BTreeMap<String, String> {
    dag.nodes().iter().map(|n| (n.symbol.clone(), n.label.clone())).collect()
}

/// Renders the canonical orientation, so `x ⫫ y | z` and `y ⫫ x | z` read
/// the same.
pub fn render_question(ci: &CiStatement, labels: &BTreeMap<String, String>) -> Result<String, ElicitError> {
    let c = ci.canonical();
    let about = labels_of(c.x(), labels)?;
    let knowing = labels_of(c.y(), labels)?;
    if c.z().is_empty() {
        Ok(format!("Does knowing {knowing} provide further information about {about}?"))
    } else {
        let given = labels_of(c.z(), labels)?;
        Ok(format!("Assuming we know {given}, does knowing {knowing} provide any additional information about {about}?"))
    }
}

fn orientations(dag: &Dag, ci: &CiStatement) -> Vec<Orientation> {
    let (Some(a), Some(b)) = (ci.x().first(), ci.y().first()) else { return Vec::new() };
    if ci.x().len() != 1 || ci.y().len() != 1 {
        return Vec::new();
    }
    let (Some(na), Some(nb)) = (dag.find(a), dag.find(b)) else { return Vec::new() };
    [(na, nb), (nb, na)]
        .into_iter()
        .map(|(f, t)| Orientation {
            from: dag.node(f).symbol.clone(),
            to: dag.node(t).symbol.clone(),
            cycle: dag.edge_feasibility(f, t).err().map(|c| c.cycle),
        })
        .collect()
}

/// Questions for every pairwise-split local Markov statement of `dag`.
/// Nodes with fewer parents come first, then topological order. A
/// statement implied by the questions already emitted together with
/// `confirmed` is kept but marked suppressed, with its derivation.
pub fn generate_questions(dag: &Dag, confirmed: &StatementSet) -> Result<Vec<Question>, ElicitError> {
    generate_with_history(dag, confirmed, &BTreeMap::new())
}

/// As [`generate_questions`], but questions already answered keep their
/// verdict instead of being re-derived.
pub(crate) fn generate_with_history(
    dag: &Dag,
    confirmed: &StatementSet,
    answered: &BTreeMap<String, Verdict>,
) -> Result<Vec<Question>, ElicitError> {
    let topo = dag.topological_order();
    let rank: BTreeMap<String, (usize, usize)> = topo
        .iter()
        .enumerate()
        .map(|(i, v)| (dag.node(*v).symbol.clone(), (dag.parents(*v).len(), i)))
        .collect();
    let mut statements = dag.local_markov_statements();
    statements.sort_by_key(|s| rank[s.x().first().expect("singleton x")]);

    let universe: VarSet = dag.nodes().iter().map(|n| n.symbol.clone()).collect();
    let labels = dag_labels(dag);
    let mut base: StatementSet = confirmed.iter().map(CiStatement::canonical).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in &statements {
        for pair in split_pairwise(s) {
            let ci = pair.canonical();
            let id = statement_key(&ci);
            if !seen.insert(id.clone()) {
                continue;
            }
            let status = if let Some(v) = answered.get(&id) {
                if *v == Verdict::Unsure {
                    QuestionStatus::Parked
                } else {
                    QuestionStatus::Answered { verdict: *v }
                }
            } else {
                match is_implied(&ci, &base, &universe, DEFAULT_BUDGET)? {
                    Implication::Implied(trace) => QuestionStatus::Suppressed { trace },
                    Implication::NotDerivable | Implication::BudgetExhausted => QuestionStatus::Pending,
                }
            };
            if !matches!(status, QuestionStatus::Suppressed { .. }) {
                base.insert(ci.clone());
            }
            out.push(Question {
                id,
                text: render_question(&ci, &labels)?,
                orientations: orientations(dag, &ci),
                ci,
                status,
            });
        }
    }
    Ok(out)
}

/// One question per (upstream, downstream) variable pair across a cut or
/// fine cut, phrased with reaching the cut as the given.
pub fn generate_ceg_questions(ceg: &Ceg, cut: &CutQuery) -> Result<Vec<Question>, ElicitError> {
    let result = ceg.separated(cut)?;
    if !result.separated {
        return Err(ElicitError::NotACut(match result.witness {
            Some(w) => format!("path {} meets it {} times", w.labels.join(" -> "), w.hits),
            None => "no witness".into(),
        }));
    }
    let members = match &cut.cut {
        CutSet::Positions(w) => w.clone(),
        CutSet::Stages(stages) => ceg
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.stage.map(|s| stages.contains(&s)).unwrap_or(false))
            .map(|(i, _)| crate::ceg::PositionId(i))
            .collect(),
    };
    let (up, down) = ceg.variables_across(&members)?;
    let cut_token = format!("W={}", members.iter().map(|p| p.0.to_string()).collect::<Vec<_>>().join(","));
    let phrase = |v: &str| ceg.phrases().get(v).cloned().unwrap_or_else(|| v.into());
    let given = cut.description.clone().unwrap_or_else(|| "the process has reached the cut".into());
    let mut out = Vec::new();
    for u in &up {
        for d in &down {
            let ci = CiStatement::new([d.as_str()], [u.as_str()], [cut_token.as_str()])
                .map_err(|e| ElicitError::NotACut(e.to_string()))?;
            out.push(Question {
                id: statement_key(&ci),
                text: format!(
                    "Given that {given}, does knowing {} provide any additional information about {}?",
                    phrase(u),
                    phrase(d)
                ),
                ci,
                status: QuestionStatus::Pending,
                orientations: Vec::new(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;

    fn food_health() -> Dag {
        let nodes = vec![
            Node::new("B", "Government benefits", "B"),
            Node::new("I", "Disposable Income", "I"),
            Node::new("F", "Food insecurity", "F"),
            Node::new("H", "Long-term health outcomes", "H"),
        ];
        Dag::with_edges(nodes, &[("B", "F"), ("I", "F"), ("F", "H")]).unwrap()
    }

    fn st(x: &str, y: &str, z: &[&str]) -> CiStatement {
        CiStatement::new([x], [y], z.iter().copied()).unwrap()
    }

    #[test]
    fn joins() {
        assert_eq!(join_labels(&["A"]), "A");
        assert_eq!(join_labels(&["A", "B"]), "A and B");
        assert_eq!(join_labels(&["A", "B", "C"]), "A, B and C");
    }

    #[test]
    fn renders_both_templates() {
        let labels = dag_labels(&food_health());
        assert_eq!(
            render_question(&st("H", "I", &["F"]), &labels).unwrap(),
            "Assuming we know Food insecurity, does knowing Disposable Income provide any additional information about Long-term health outcomes?"
        );
        assert_eq!(
            render_question(&st("B", "I", &[]), &labels).unwrap(),
            "Does knowing Disposable Income provide further information about Government benefits?"
        );
        assert_eq!(render_question(&st("I", "B", &[]), &labels), render_question(&st("B", "I", &[]), &labels));
        assert_eq!(render_question(&st("Q", "B", &[]), &labels), Err(ElicitError::MissingLabel("Q".into())));
    }

    #[test]
    fn food_health_questions() {
        let qs = generate_questions(&food_health(), &StatementSet::new()).unwrap();
        let cis: BTreeSet<CiStatement> = qs.iter().map(|q| q.ci.clone()).collect();
        let expected: BTreeSet<CiStatement> =
            [st("H", "I", &["F"]), st("H", "B", &["F"]), st("B", "I", &[])].into_iter().collect();
        assert_eq!(cis, expected);
        assert!(qs.iter().all(|q| q.status == QuestionStatus::Pending));
        // Parent-free nodes come first.
        assert_eq!(qs[0].ci, st("B", "I", &[]));
        assert_eq!(qs[0].orientations.iter().filter(|o| o.cycle.is_none()).count(), 2);
    }

    #[test]
    fn complete_dag_has_no_questions() {
        let nodes = vec![Node::new("a", "A", "A"), Node::new("b", "B", "B"), Node::new("c", "C", "C")];
        let g = Dag::with_edges(nodes, &[("a", "b"), ("a", "c"), ("b", "c")]).unwrap();
        assert!(generate_questions(&g, &StatementSet::new()).unwrap().is_empty());
    }

    #[test]
    fn confirmed_statements_suppress() {
        let confirmed: StatementSet = [CiStatement::new(["H"], ["B", "I"], ["F"]).unwrap()].into_iter().collect();
        let qs = generate_questions(&food_health(), &confirmed).unwrap();
        let suppressed: Vec<&Question> =
            qs.iter().filter(|q| matches!(q.status, QuestionStatus::Suppressed { .. })).collect();
        assert_eq!(suppressed.len(), 2);
        for q in suppressed {
            let QuestionStatus::Suppressed { trace } = &q.status else { unreachable!() };
            assert!(trace.iter().all(|t| t.replays()));
        }
    }

    #[test]
    fn stable_ids_and_text() {
        let a = generate_questions(&food_health(), &StatementSet::new()).unwrap();
        let b = generate_questions(&food_health(), &StatementSet::new()).unwrap();
        assert_eq!(a, b);
    }
}
