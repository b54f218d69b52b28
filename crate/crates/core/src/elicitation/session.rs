use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::questions::generate_with_history;
use super::{generate_ceg_questions, Answer, ElicitError, ModelClass, Question, QuestionStatus, Verdict};
use crate::ceg::{Ceg, CutQuery, StagedTree};
use crate::flow::FlowGraph;
use crate::graph::{Dag, GraphError, Node};
use crate::hash::{model_hash, CanonicalText};
use crate::mdm::{self, MdmError, MdmSpec, Rewire};
use crate::semigraphoid::{is_implied, Implication, StatementSet, DEFAULT_BUDGET};
use crate::statement::{CiStatement, VarSet};

#[derive(Debug, Clone, PartialEq)]
pub enum SessionModel {
    Dag(Dag),
    StagedTree(StagedTree),
    Mdm(MdmSpec),
    Flow(FlowGraph),
}

impl SessionModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionModel::Dag(_) => "dag",
            SessionModel::StagedTree(_) => "staged_tree",
            SessionModel::Mdm(_) => "mdm",
            SessionModel::Flow(_) => "flow_graph",
        }
    }

    pub fn hash(&self) -> String {
        model_hash(self)
    }

    /// Parent structure the question engine runs on. Staged trees have none.
    pub fn skeleton(&self) -> Option<Dag> {
        match self {
            SessionModel::Dag(d) => Some(d.clone()),
            SessionModel::StagedTree(_) => None,
            SessionModel::Mdm(spec) => {
                let nodes = spec.nodes.iter().map(|n| Node::new(n.id.clone(), n.id.clone(), n.id.clone())).collect();
                let edges: Vec<(&str, &str)> =
                    spec.nodes.iter().flat_map(|n| n.parents.iter().map(move |p| (p.as_str(), n.id.as_str()))).collect();
                Dag::with_edges(nodes, &edges).ok()
            }
            SessionModel::Flow(g) => {
                let nodes = g.actors().map(|a| Node::new(a.to_string(), g.label(a), a.to_string())).collect();
                let edges: Vec<(String, String)> = g.edges().iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
                Dag::with_edges(nodes, &edges).ok()
            }
        }
    }
}

impl CanonicalText for SessionModel {
    fn canonical_text(&self) -> String {
        match self {
            SessionModel::Dag(m) => m.canonical_text(),
            SessionModel::StagedTree(m) => m.canonical_text(),
            SessionModel::Mdm(m) => m.canonical_text(),
            SessionModel::Flow(m) => m.canonical_text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "op", rename_all = "snake_case"))]
pub enum RevisionOp {
    AddEdge { from: String, to: String },
    AddParent { series: String, parent: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Advisory {
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub question_id: Option<String>,
    pub message: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub cycle: Option<Vec<String>>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub suggested: Vec<ModelClass>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "kebab-case"))]
pub enum TranscriptEvent {
    QuestionAsked { question_id: String, text: String, model_hash: String },
    Answered { answer: Answer },
    Revision { op: RevisionOp, before_hash: String, after_hash: String },
    Advisory(Advisory),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TranscriptRecord {
    pub seq: u64,
    pub timestamp: String,
    pub event: TranscriptEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnswerOutcome {
    pub revision: Option<RevisionOp>,
    pub advisory: Option<Advisory>,
    pub model_hash: String,
    /// Open questions after the answer.
    pub queue: Vec<Question>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionReport {
    pub kind: String,
    pub model_hash: String,
    pub open: Vec<Question>,
    pub parked: Vec<Question>,
    pub suppressed: Vec<Question>,
    pub confirmed: Vec<CiStatement>,
    pub revisions: usize,
}

/// A single-writer question/answer/revision loop over one model.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    initial: SessionModel,
    model: SessionModel,
    questions: Vec<Question>,
    confirmed: StatementSet,
    answered: BTreeMap<String, Verdict>,
    /// Every id ever offered, so answers to vanished questions read as stale.
    offered: BTreeSet<String>,
    transcript: Vec<TranscriptRecord>,
}

impl Session {
    pub fn new(id: impl Into<String>, model: SessionModel) -> Result<Self, ElicitError> {
        let mut s = Session {
            id: id.into(),
            initial: model.clone(),
            model,
            questions: Vec::new(),
            confirmed: StatementSet::new(),
            answered: BTreeMap::new(),
            offered: BTreeSet::new(),
            transcript: Vec::new(),
        };
        s.regenerate()?;
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn model(&self) -> &SessionModel {
        &self.model
    }

    pub fn initial(&self) -> &SessionModel {
        &self.initial
    }

    pub fn model_hash(&self) -> String {
        self.model.hash()
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn open_questions(&self) -> Vec<Question> {
        self.questions.iter().filter(|q| q.status.is_open()).cloned().collect()
    }

    pub fn confirmed(&self) -> &StatementSet {
        &self.confirmed
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }

    /// Sequence number of the last transcript record, 0 when empty.
    pub fn seq(&self) -> u64 {
        self.transcript.last().map(|r| r.seq).unwrap_or(0)
    }

    fn log(&mut self, timestamp: &str, event: TranscriptEvent) {
        let seq = self.seq() + 1;
        self.transcript.push(TranscriptRecord { seq, timestamp: timestamp.into(), event });
    }

    fn regenerate(&mut self) -> Result<(), ElicitError> {
        let asked: BTreeSet<String> =
            self.questions.iter().filter(|q| q.status == QuestionStatus::Asked).map(|q| q.id.clone()).collect();
        let mut qs = match &self.model {
            SessionModel::StagedTree(st) => ceg_questions(st, &self.answered)?,
            other => {
                let dag = other.skeleton().ok_or_else(|| ElicitError::Graph(GraphError::OverlappingSets))?;
                generate_with_history(&dag, &self.confirmed, &self.answered)?
            }
        };
        for q in qs.iter_mut() {
            if q.status == QuestionStatus::Pending && asked.contains(&q.id) {
                q.status = QuestionStatus::Asked;
            }
            self.offered.insert(q.id.clone());
        }
        self.questions = qs;
        self.suppress_implied()
    }

    /// Marks open questions implied by the confirmed statements alone.
    fn suppress_implied(&mut self) -> Result<(), ElicitError> {
        if self.confirmed.is_empty() || matches!(self.model, SessionModel::StagedTree(_)) {
            return Ok(());
        }
        let universe: VarSet = self.questions.iter().flat_map(|q| q.ci.variables()).chain(self.confirmed.iter().flat_map(|s| s.variables())).collect();
        for q in self.questions.iter_mut().filter(|q| q.status.is_open()) {
            if let Implication::Implied(trace) = is_implied(&q.ci, &self.confirmed, &universe, DEFAULT_BUDGET)? {
                q.status = QuestionStatus::Suppressed { trace };
            }
        }
        Ok(())
    }

    /// Asks the first open question, logging it unless it was already asked.
    pub fn next_question(&mut self, timestamp: &str) -> Option<Question> {
        let id = self.questions.iter().find(|q| q.status.is_open())?.id.clone();
        self.ask(&id, timestamp).ok()
    }

    pub fn ask(&mut self, id: &str, timestamp: &str) -> Result<Question, ElicitError> {
        let hash = self.model_hash();
        let q = self.find_open(id)?;
        if q.status == QuestionStatus::Pending {
            q.status = QuestionStatus::Asked;
            let (question_id, text) = (q.id.clone(), q.text.clone());
            let out = q.clone();
            self.log(timestamp, TranscriptEvent::QuestionAsked { question_id, text, model_hash: hash });
            return Ok(out);
        }
        Ok(q.clone())
    }

    fn find_open(&mut self, id: &str) -> Result<&mut Question, ElicitError> {
        let offered = self.offered.contains(id);
        match self.questions.iter_mut().find(|q| q.id == id) {
            Some(q) if q.status.is_open() => Ok(q),
            Some(q) => Err(ElicitError::NotAnswerable { id: id.into(), status: q.status.name().into() }),
            None if offered => Err(ElicitError::StaleQuestion(id.into())),
            None => Err(ElicitError::UnknownQuestion(id.into())),
        }
    }

    /// Applies one answer. A cycle-closing edge is not an error: the
    /// revision is refused and an advisory is logged instead.
    pub fn apply_answer(&mut self, answer: &Answer, timestamp: &str) -> Result<AnswerOutcome, ElicitError> {
        let before = self.model_hash();
        if let Some(h) = &answer.model_hash {
            if *h != before {
                return Err(ElicitError::StaleQuestion(answer.question_id.clone()));
            }
        }
        let q = self.find_open(&answer.question_id)?.clone();
        let mut revision = None;
        let mut advisory = None;
        match answer.verdict {
            Verdict::Irrelevant => {
                self.log(timestamp, TranscriptEvent::Answered { answer: answer.clone() });
                self.confirmed.insert(q.ci.canonical());
                self.answered.insert(q.id.clone(), Verdict::Irrelevant);
                self.set_status(&q.id, QuestionStatus::Answered { verdict: Verdict::Irrelevant });
                self.suppress_implied()?;
            }
            Verdict::Unsure => {
                self.log(timestamp, TranscriptEvent::Answered { answer: answer.clone() });
                self.answered.insert(q.id.clone(), Verdict::Unsure);
                self.set_status(&q.id, QuestionStatus::Parked);
            }
            Verdict::Relevant => match self.revise(&q, answer)? {
                Revised::Model(model, op) => {
                    self.log(timestamp, TranscriptEvent::Answered { answer: answer.clone() });
                    self.answered.insert(q.id.clone(), Verdict::Relevant);
                    self.model = model;
                    let after = self.model_hash();
                    self.log(timestamp, TranscriptEvent::Revision { op: op.clone(), before_hash: before, after_hash: after });
                    self.regenerate()?;
                    revision = Some(op);
                }
                Revised::Refused(a) => {
                    self.log(timestamp, TranscriptEvent::Answered { answer: answer.clone() });
                    self.log(timestamp, TranscriptEvent::Advisory(a.clone()));
                    advisory = Some(a);
                }
                Revised::Recorded(a) => {
                    self.log(timestamp, TranscriptEvent::Answered { answer: answer.clone() });
                    self.answered.insert(q.id.clone(), Verdict::Relevant);
                    self.set_status(&q.id, QuestionStatus::Answered { verdict: Verdict::Relevant });
                    self.log(timestamp, TranscriptEvent::Advisory(a.clone()));
                    advisory = Some(a);
                }
            },
        }
        Ok(AnswerOutcome { revision, advisory, model_hash: self.model_hash(), queue: self.open_questions() })
    }

    fn set_status(&mut self, id: &str, status: QuestionStatus) {
        if let Some(q) = self.questions.iter_mut().find(|q| q.id == id) {
            q.status = status;
        }
    }

    fn revise(&self, q: &Question, answer: &Answer) -> Result<Revised, ElicitError> {
        let pair = match (&self.model, q.ci.x().len(), q.ci.y().len()) {
            (SessionModel::StagedTree(_) | SessionModel::Flow(_), _, _) => {
                let message = format!(
                    "{} is relevant; restructure the {} by hand, the engine does not revise it from answers",
                    q.id,
                    self.model.kind()
                );
                return Ok(Revised::Recorded(Advisory { question_id: Some(q.id.clone()), message, cycle: None, suggested: vec![] }));
            }
            (_, 1, 1) => (q.ci.x().first().unwrap().clone(), q.ci.y().first().unwrap().clone()),
            _ => return Err(ElicitError::NotAnswerable { id: q.id.clone(), status: "not a pairwise question".into() }),
        };
        let Some(edge) = &answer.edge else {
            return Err(ElicitError::OrientationRequired { question: q.id.clone(), options: q.orientations.clone() });
        };
        let ends: BTreeSet<&String> = [&edge.from, &edge.to].into_iter().collect();
        if ends != [&pair.0, &pair.1].into_iter().collect() {
            return Err(ElicitError::EdgeMismatch { question: q.id.clone(), from: edge.from.clone(), to: edge.to.clone() });
        }
        match &self.model {
            SessionModel::Dag(dag) => match dag.add_edge(&edge.from, &edge.to) {
                Ok(next) => Ok(Revised::Model(
                    SessionModel::Dag(next),
                    RevisionOp::AddEdge { from: edge.from.clone(), to: edge.to.clone() },
                )),
                Err(GraphError::Cycle(c)) => Ok(Revised::Refused(cycle_advisory(&q.id, c.cycle))),
                Err(e) => Err(e.into()),
            },
            SessionModel::Mdm(spec) => {
                let child = spec.node(&edge.to).ok_or_else(|| MdmError::UnknownSeries(edge.to.clone()))?;
                let mut parents: Vec<&str> = child.parents.iter().map(String::as_str).collect();
                parents.push(&edge.from);
                match mdm::rewire(spec, &[Rewire::new(edge.to.clone(), &parents)]) {
                    Ok(next) => Ok(Revised::Model(
                        SessionModel::Mdm(next),
                        RevisionOp::AddParent { series: edge.to.clone(), parent: edge.from.clone() },
                    )),
                    Err(MdmError::OrderingViolation(msg)) => {
                        // A parent declared after its child may still be a valid
                        // DAG edge; report the cycle when there is one.
                        let skeleton = self.model.skeleton().expect("mdm skeleton");
                        let cycle = match (skeleton.find(&edge.from), skeleton.find(&edge.to)) {
                            (Some(f), Some(t)) => skeleton.edge_feasibility(f, t).err().map(|c| c.cycle),
                            _ => None,
                        };
                        Ok(Revised::Refused(match cycle {
                            Some(c) => cycle_advisory(&q.id, c),
                            None => Advisory {
                                question_id: Some(q.id.clone()),
                                message: format!("{msg}; reorder the series before adding this regressor"),
                                cycle: None,
                                suggested: vec![],
                            },
                        }))
                    }
                    Err(e) => Err(e.into()),
                }
            }
            SessionModel::StagedTree(_) | SessionModel::Flow(_) => unreachable!("handled above"),
        }
    }

    pub fn report(&self) -> SessionReport {
        let pick = |f: fn(&QuestionStatus) -> bool| self.questions.iter().filter(|q| f(&q.status)).cloned().collect();
        SessionReport {
            kind: self.model.kind().into(),
            model_hash: self.model_hash(),
            open: pick(QuestionStatus::is_open),
            parked: pick(|s| *s == QuestionStatus::Parked),
            suppressed: pick(|s| matches!(s, QuestionStatus::Suppressed { .. })),
            confirmed: self.confirmed.iter().cloned().collect(),
            revisions: self.transcript.iter().filter(|r| matches!(r.event, TranscriptEvent::Revision { .. })).count(),
        }
    }

    /// Rebuilds a session from its initial model by re-asking and
    /// re-answering in transcript order. Every derived record (revisions,
    /// advisories) and every model hash must come out identical.
    pub fn replay(id: impl Into<String>, initial: SessionModel, records: &[TranscriptRecord]) -> Result<Session, ElicitError> {
        let mut s = Session::new(id, initial)?;
        for r in records {
            match &r.event {
                TranscriptEvent::QuestionAsked { question_id, .. } => {
                    s.ask(question_id, &r.timestamp)?;
                }
                TranscriptEvent::Answered { answer } => {
                    s.apply_answer(answer, &r.timestamp)?;
                }
                TranscriptEvent::Revision { .. } | TranscriptEvent::Advisory(_) => {}
            }
            if let Some(bad) = s.transcript.iter().zip(records).find(|(a, b)| a != b) {
                return Err(ElicitError::ReplayMismatch { seq: bad.1.seq });
            }
        }
        if s.transcript.len() != records.len() {
            return Err(ElicitError::ReplayMismatch { seq: s.seq() });
        }
        Ok(s)
    }
}

enum Revised {
    Model(SessionModel, RevisionOp),
    /// The revision was rejected; the question stays open.
    Refused(Advisory),
    /// Answer stored; the model class has no automatic revision.
    Recorded(Advisory),
}

fn cycle_advisory(question: &str, cycle: Vec<String>) -> Advisory {
    Advisory {
        question_id: Some(question.into()),
        message: format!(
            "adding this edge closes the cycle {}, which a Bayesian network cannot represent; consider a dynamic or hybrid representation",
            cycle.join(" -> ")
        ),
        cycle: Some(cycle),
        suggested: vec![ModelClass::DynamicBn, ModelClass::ChainGraph],
    }
}

/// Questions at every variable whose situations form a fine cut, in order
/// of the variable's first appearance.
fn ceg_questions(st: &StagedTree, answered: &BTreeMap<String, Verdict>) -> Result<Vec<Question>, ElicitError> {
    let ceg = Ceg::from_staged_tree(st)?;
    let mut variables: Vec<String> = Vec::new();
    for p in ceg.topological_order() {
        if let Some(v) = &ceg.positions()[p.0].variable {
            if !variables.contains(v) {
                variables.push(v.clone());
            }
        }
    }
    let mut out: Vec<Question> = Vec::new();
    for v in variables {
        let w = ceg.positions_of_variable(&v);
        if !ceg.is_fine_cut(&w).unwrap_or(false) {
            continue;
        }
        let mut query = CutQuery::positions(w);
        query.description = st.cut_descriptions().get(&v).cloned();
        for mut q in generate_ceg_questions(&ceg, &query)? {
            if out.iter().any(|o| o.id == q.id) {
                continue;
            }
            if let Some(verdict) = answered.get(&q.id) {
                q.status = match verdict {
                    Verdict::Unsure => QuestionStatus::Parked,
                    v => QuestionStatus::Answered { verdict: *v },
                };
            }
            out.push(q);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statement::statement_key;

    fn food_health() -> Dag {
        let nodes = vec![
            Node::new("B", "Government benefits", "B"),
            Node::new("I", "Disposable Income", "I"),
            Node::new("F", "Food insecurity", "F"),
            Node::new("H", "Long-term health outcomes", "H"),
        ];
        Dag::with_edges(nodes, &[("B", "F"), ("I", "F"), ("F", "H")]).unwrap()
    }

    const T: &str = "2024-06-01T10:00:00Z";

    fn id_of(x: &str, y: &str, z: &[&str]) -> String {
        statement_key(&CiStatement::new([x], [y], z.iter().copied()).unwrap().canonical())
    }

    #[test]
    fn food_health_revision_and_cycle_advisory() {
        let mut s = Session::new("s1", SessionModel::Dag(food_health())).unwrap();
        assert_eq!(s.open_questions().len(), 3);
        let bi = id_of("B", "I", &[]);
        let q = s.next_question(T).unwrap();
        assert_eq!(q.id, bi);
        let err = s.apply_answer(&Answer::new(&bi, Verdict::Relevant), T).unwrap_err();
        assert!(matches!(err, ElicitError::OrientationRequired { ref options, .. } if options.len() == 2));
        let out = s.apply_answer(&Answer::new(&bi, Verdict::Relevant).with_edge("I", "B"), T).unwrap();
        assert_eq!(out.revision, Some(RevisionOp::AddEdge { from: "I".into(), to: "B".into() }));
        let SessionModel::Dag(d) = s.model() else { panic!() };
        assert_eq!(d.edge_count(), 4);
        assert_eq!(out.queue.len(), 2);

        let hi = id_of("H", "I", &["F"]);
        let out = s.apply_answer(&Answer::new(&hi, Verdict::Relevant).with_edge("H", "I"), T).unwrap();
        let adv = out.advisory.unwrap();
        assert_eq!(adv.cycle.as_deref(), Some(&["I".to_string(), "F".into(), "H".into(), "I".into()][..]));
        assert!(adv.message.contains("dynamic or hybrid"));
        assert!(out.revision.is_none());
        // Still open: the expert may pick the other orientation.
        assert!(s.open_questions().iter().any(|q| q.id == hi));
    }

    #[test]
    fn stale_and_unknown() {
        let mut s = Session::new("s", SessionModel::Dag(food_health())).unwrap();
        let bi = id_of("B", "I", &[]);
        let mut stale = Answer::new(&bi, Verdict::Irrelevant);
        stale.model_hash = Some("0".repeat(64));
        assert_eq!(s.apply_answer(&stale, T), Err(ElicitError::StaleQuestion(bi.clone())));
        s.apply_answer(&Answer::new(&bi, Verdict::Relevant).with_edge("I", "B"), T).unwrap();
        // B ⫫ I no longer exists in the revised graph.
        assert_eq!(s.apply_answer(&Answer::new(&bi, Verdict::Irrelevant), T), Err(ElicitError::StaleQuestion(bi)));
        assert!(matches!(s.apply_answer(&Answer::new("nope", Verdict::Unsure), T), Err(ElicitError::UnknownQuestion(_))));
    }

    #[test]
    fn unsure_parks() {
        let mut s = Session::new("s", SessionModel::Dag(food_health())).unwrap();
        let bi = id_of("B", "I", &[]);
        s.apply_answer(&Answer::new(&bi, Verdict::Unsure), T).unwrap();
        assert_eq!(s.report().parked.len(), 1);
        assert!(matches!(s.apply_answer(&Answer::new(&bi, Verdict::Irrelevant), T), Err(ElicitError::NotAnswerable { .. })));
    }

    #[test]
    fn replay_reproduces_hash() {
        let mut s = Session::new("s", SessionModel::Dag(food_health())).unwrap();
        s.next_question(T);
        let bi = id_of("B", "I", &[]);
        s.apply_answer(&Answer::new(&bi, Verdict::Relevant).with_edge("I", "B"), T).unwrap();
        while let Some(q) = s.next_question(T) {
            s.apply_answer(&Answer::new(&q.id, Verdict::Irrelevant), T).unwrap();
        }
        let r = Session::replay("s", SessionModel::Dag(food_health()), s.transcript()).unwrap();
        assert_eq!(r.model_hash(), s.model_hash());
        let mut tampered = s.transcript().to_vec();
        if let TranscriptEvent::Revision { after_hash, .. } = &mut tampered[2].event {
            *after_hash = "x".into();
        } else {
            panic!("{:?}", tampered[2]);
        }
        assert_eq!(Session::replay("s", SessionModel::Dag(food_health()), &tampered).unwrap_err(), ElicitError::ReplayMismatch { seq: 3 });
    }

    #[test]
    fn mdm_relevant_adds_parent() {
        use crate::mdm::MdmNodeSpec;
        let spec = MdmSpec::new(vec![
            MdmNodeSpec::new("A", &[], 1.0),
            MdmNodeSpec::new("T", &["A"], 1.0),
            MdmNodeSpec::new("M", &["T"], 1.0),
        ]);
        let mut s = Session::new("m", SessionModel::Mdm(spec)).unwrap();
        let am = id_of("A", "M", &["T"]);
        let out = s.apply_answer(&Answer::new(&am, Verdict::Relevant).with_edge("A", "M"), T).unwrap();
        assert_eq!(out.revision, Some(RevisionOp::AddParent { series: "M".into(), parent: "A".into() }));
        let SessionModel::Mdm(m) = s.model() else { panic!() };
        assert_eq!(m.node("M").unwrap().parents, ["T", "A"]);
    }
}
