//! HTTP API over the file store.
//!
//! Answers carry the transcript sequence number the client last saw; a
//! mismatch means someone else wrote first and the answer is refused with
//! 409 so it can never be applied twice.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use elicit_core::elicitation::{Answer, ElicitError, Session, SessionModel};
use elicit_core::flow::Action;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::document::{Model, ModelDocument};
use crate::error::CliError;
use crate::ops::{self, SeriesPatch};
use crate::query::{self, QueryRequest};
use crate::store::{SessionMeta, Store};

pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

pub struct AppState {
    pub store: Store,
    sessions: Mutex<HashMap<String, Arc<Mutex<(SessionMeta, Session)>>>>,
    clock: Clock,
}

impl AppState {
    pub fn new(store: Store, clock: Clock) -> Arc<Self> {
        Arc::new(AppState { store, sessions: Mutex::new(HashMap::new()), clock })
    }

    fn now(&self) -> String {
        (self.clock)()
    }

    /// Cached session, replayed from the store on first use.
    fn session(&self, id: &str) -> Result<Arc<Mutex<(SessionMeta, Session)>>, ApiError> {
        let mut cache = self.sessions.lock().expect("session cache");
        if let Some(s) = cache.get(id) {
            return Ok(s.clone());
        }
        let loaded = Arc::new(Mutex::new(self.store.load_session(id)?));
        cache.insert(id.to_string(), loaded.clone());
        Ok(loaded)
    }
}

pub struct ApiError(CliError);

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            CliError::NotFound(_) => StatusCode::NOT_FOUND,
            CliError::Conflict { .. } | CliError::Elicit(ElicitError::StaleQuestion(_)) => StatusCode::CONFLICT,
            CliError::Usage(_) | CliError::Document(_) | CliError::Csv(_) => StatusCode::BAD_REQUEST,
            CliError::Io { .. } | CliError::Corrupt(..) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        (status, Json(self.0.to_json())).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn bad(e: impl std::fmt::Display) -> ApiError {
    ApiError(CliError::Document(e.to_string()))
}

/// Parses a JSON body ourselves so malformed input gets the same error
/// shape as everything else.
fn body<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, ApiError> {
    serde_json::from_value(v).map_err(bad)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/query", post(query_model))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_question))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/advisor", post(advisor))
        .route("/advisor/checklist", get(checklist))
        .route("/mdm/{id}/run", post(mdm_run))
        .route("/flow/{id}/paths", get(flow_paths))
        .route("/flow/{id}/states", post(flow_states))
        .route("/flow/{id}/intervene", post(flow_intervene))
        .with_state(state)
}

async fn create_model(State(st): State<Arc<AppState>>, Json(v): Json<Value>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let doc: ModelDocument = body(v)?;
    let (id, doc) = st.store.put_model(&doc)?;
    let model = doc.load()?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "kind": model.kind(), "model_hash": model.hash(), "document": doc }))))
}

async fn get_model(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let doc = st.store.get_model(&id)?;
    let model = doc.load()?;
    Ok(Json(json!({ "id": id, "kind": model.kind(), "model_hash": model.hash(), "document": doc })))
}

async fn query_model(State(st): State<Arc<AppState>>, Path(id): Path<String>, Json(v): Json<Value>) -> ApiResult {
    let req: QueryRequest = body(v)?;
    let r = query::run(&st.store.load_model(&id)?, &req)?;
    Ok(Json(serde_json::to_value(r).expect("json")))
}

#[derive(Deserialize)]
struct NewSession {
    model_id: String,
}

async fn create_session(State(st): State<Arc<AppState>>, Json(v): Json<Value>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: NewSession = body(v)?;
    let (meta, session) = st.store.create_session(&req.model_id, &st.now())?;
    let view = session_view(&meta, &session)?;
    st.sessions.lock().expect("session cache").insert(meta.id.clone(), Arc::new(Mutex::new((meta, session))));
    Ok((StatusCode::CREATED, Json(view)))
}

fn session_view(meta: &SessionMeta, s: &Session) -> Result<Value, ApiError> {
    let current = Model::from_session(s.model(), &plain(s.initial()))?;
    Ok(json!({
        "id": meta.id,
        "model_id": meta.model_id,
        "created": meta.created,
        "seq": s.seq(),
        "model_hash": s.model_hash(),
        "report": s.report(),
        "document": ModelDocument::from_model(&current, Default::default()),
    }))
}

/// Session views report staged trees as staged trees.
fn plain(m: &SessionModel) -> Model {
    match m {
        SessionModel::Dag(d) => Model::Dag(d.clone()),
        SessionModel::StagedTree(t) => Model::StagedTree(t.clone()),
        SessionModel::Mdm(m) => Model::Mdm(m.clone()),
        SessionModel::Flow(g) => Model::Flow(g.clone()),
    }
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let entry = st.session(&id)?;
    let guard = entry.lock().expect("session");
    Ok(Json(session_view(&guard.0, &guard.1)?))
}

async fn next_question(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let entry = st.session(&id)?;
    let mut guard = entry.lock().expect("session");
    let (meta, session) = &mut *guard;
    let mut trial = session.clone();
    let before = trial.transcript().len();
    let q = trial.next_question(&st.now());
    st.store.append_records(&meta.id, &trial.transcript()[before..])?;
    *session = trial;
    Ok(Json(json!({ "question": q, "seq": session.seq(), "model_hash": session.model_hash() })))
}

#[derive(Deserialize)]
struct AnswerRequest {
    seq: u64,
    answer: Answer,
}

async fn answer(State(st): State<Arc<AppState>>, Path(id): Path<String>, Json(v): Json<Value>) -> ApiResult {
    let req: AnswerRequest = body(v)?;
    let entry = st.session(&id)?;
    let mut guard = entry.lock().expect("session");
    let (meta, session) = &mut *guard;
    if req.seq != session.seq() {
        return Err(CliError::Conflict { given: req.seq, current: session.seq() }.into());
    }
    let mut trial = session.clone();
    let before = trial.transcript().len();
    let outcome = trial.apply_answer(&req.answer, &st.now()).map_err(CliError::from)?;
    st.store.append_records(&meta.id, &trial.transcript()[before..])?;
    let records = trial.transcript()[before..].to_vec();
    *session = trial;
    Ok(Json(json!({ "outcome": outcome, "records": records, "seq": session.seq(), "model_hash": session.model_hash() })))
}

async fn transcript(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let entry = st.session(&id)?;
    let guard = entry.lock().expect("session");
    Ok(Json(json!({ "id": id, "seq": guard.1.seq(), "records": guard.1.transcript() })))
}

async fn advisor(Json(v): Json<Value>) -> ApiResult {
    let answers = v.get("answers").cloned().unwrap_or_else(|| json!({}));
    let r = ops::advise(&ops::parse_replies(&answers)?)?;
    Ok(Json(serde_json::to_value(r).expect("json")))
}

async fn checklist() -> Json<Value> {
    Json(json!({ "items": ops::checklist() }))
}

#[derive(Deserialize)]
struct MdmRun {
    csv: String,
    #[serde(default)]
    add_series: Option<SeriesPatch>,
}

async fn mdm_run(State(st): State<Arc<AppState>>, Path(id): Path<String>, Json(v): Json<Value>) -> ApiResult {
    let req: MdmRun = body(v)?;
    let Model::Mdm(spec) = st.store.load_model(&id)? else {
        return Err(CliError::Usage(format!("model {id} is not an mdm")).into());
    };
    let (used, report) = ops::forecast(&spec, &req.csv, req.add_series.as_ref())?;
    let model_id = match req.add_series {
        Some(_) => Some(st.store.put_model(&ModelDocument::from_model(&Model::Mdm(used), Default::default()))?.0),
        None => None,
    };
    Ok(Json(json!({ "report": report, "model_id": model_id })))
}

fn flow_model(st: &AppState, id: &str) -> Result<elicit_core::flow::FlowGraph, ApiError> {
    match st.store.load_model(id)? {
        Model::Flow(g) => Ok(g),
        _ => Err(CliError::Usage(format!("model {id} is not a flow graph")).into()),
    }
}

async fn flow_paths(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let g = flow_model(&st, &id)?;
    let paths: Vec<Vec<String>> = g.enumerate_paths().iter().map(|p| g.path_labels(p)).collect();
    Ok(Json(json!({ "count": paths.len(), "paths": paths })))
}

#[derive(Deserialize, Default)]
struct FlowRequest {
    #[serde(default)]
    actions: Vec<Action>,
    #[serde(default)]
    masses: Option<String>,
}

async fn flow_states(State(st): State<Arc<AppState>>, Path(id): Path<String>, Json(v): Json<Value>) -> ApiResult {
    let req: FlowRequest = body(v)?;
    let g = flow_model(&st, &id)?;
    let flows = ops::flows_or_uniform(&g, req.masses.as_deref())?;
    Ok(Json(serde_json::to_value(ops::flow_state(&g, &flows, None)?).expect("json")))
}

async fn flow_intervene(State(st): State<Arc<AppState>>, Path(id): Path<String>, Json(v): Json<Value>) -> ApiResult {
    let req: FlowRequest = body(v)?;
    let g = flow_model(&st, &id)?;
    let flows = ops::flows_or_uniform(&g, req.masses.as_deref())?;
    let (g2, _, report) = ops::intervene_all(&g, &flows, &req.actions)?;
    let (model_id, doc) = st.store.put_model(&ModelDocument::from_model(&Model::Flow(g2), Default::default()))?;
    Ok(Json(json!({ "model_id": model_id, "report": report, "document": doc })))
}

pub async fn serve(store: PathBuf, addr: SocketAddr, clock: Clock) -> Result<(), CliError> {
    let state = AppState::new(Store::open(store)?, clock);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::io(addr.to_string(), e))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::io(addr.to_string(), e))?);
    axum::serve(listener, router(state)).await.map_err(|e| CliError::io(addr.to_string(), e))
}
