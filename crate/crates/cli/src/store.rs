//! File-backed store.
//!
//! ```text
//! <root>/models/<id>.json                 immutable model documents
//! <root>/sessions/<id>/meta.json          session id, model id, initial hash
//! <root>/sessions/<id>/transcript.jsonl   append-only transcript records
//! ```
//!
//! Loading a session replays its transcript against the stored model; any
//! divergence is reported as a corrupt store.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use elicit_core::elicitation::{Session, TranscriptRecord};
use serde::{Deserialize, Serialize};

use crate::document::{Model, ModelDocument};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub model_id: String,
    pub created: String,
    pub initial_hash: String,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    /// Serializes id allocation and model writes.
    lock: Mutex<()>,
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptRecord>> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| CliError::io(&path, e))?;
    parse_transcript(&text)
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Document(format!("transcript line {}: {e}", i + 1))))
        .collect()
}

pub fn transcript_text(records: &[TranscriptRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
}

fn valid_id(id: &str) -> Result<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(CliError::NotFound(id.into()));
    }
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in ["models", "sessions"] {
            fs::create_dir_all(root.join(dir)).map_err(|e| CliError::io(root.join(dir), e))?;
        }
        Ok(Store { root, lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn model_path(&self, id: &str) -> PathBuf {
        self.root.join("models").join(format!("{id}.json"))
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// Validates and stores a document, returning its id and the normalized
    /// document. Storing the same model twice returns the first copy.
    pub fn put_model(&self, doc: &ModelDocument) -> Result<(String, ModelDocument)> {
        let model = doc.load()?;
        let id = model.store_id();
        let _guard = self.lock.lock().expect("store lock");
        let path = self.model_path(&id);
        if path.exists() {
            return Ok((id, ModelDocument::read(&path)?));
        }
        let normalized = ModelDocument::from_model(&model, doc.metadata.clone());
        let tmp = path.with_extension("json.tmp");
        normalized.write(&tmp)?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok((id, normalized))
    }

    pub fn get_model(&self, id: &str) -> Result<ModelDocument> {
        valid_id(id)?;
        let path = self.model_path(id);
        if !path.exists() {
            return Err(CliError::NotFound(format!("model {id}")));
        }
        ModelDocument::read(path)
    }

    pub fn load_model(&self, id: &str) -> Result<Model> {
        self.get_model(id)?.load()
    }

    pub fn create_session(&self, model_id: &str, created: &str) -> Result<(SessionMeta, Session)> {
        let model = self.load_model(model_id)?;
        let _guard = self.lock.lock().expect("store lock");
        let mut n = fs::read_dir(self.root.join("sessions")).map(|d| d.count()).unwrap_or(0) + 1;
        let id = loop {
            let id = format!("s{n:06}");
            if !self.session_dir(&id).exists() {
                break id;
            }
            n += 1;
        };
        let session = Session::new(id.clone(), model.session_model())?;
        let meta = SessionMeta { id: id.clone(), model_id: model_id.into(), created: created.into(), initial_hash: session.model_hash() };
        let dir = self.session_dir(&id);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let meta_text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(dir.join("meta.json"), meta_text).map_err(|e| CliError::io(dir.join("meta.json"), e))?;
        fs::write(dir.join("transcript.jsonl"), "").map_err(|e| CliError::io(dir.join("transcript.jsonl"), e))?;
        Ok((meta, session))
    }

    pub fn session_meta(&self, id: &str) -> Result<SessionMeta> {
        valid_id(id)?;
        let path = self.session_dir(id).join("meta.json");
        let text = fs::read_to_string(&path).map_err(|_| CliError::NotFound(format!("session {id}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(id.into(), e.to_string()))
    }

    /// Rebuilds a session by replaying its transcript.
    pub fn load_session(&self, id: &str) -> Result<(SessionMeta, Session)> {
        let meta = self.session_meta(id)?;
        let model = self.load_model(&meta.model_id)?;
        let initial = model.session_model();
        if initial.hash() != meta.initial_hash {
            return Err(CliError::Corrupt(id.into(), "stored model hash differs from the session's".into()));
        }
        let records = read_transcript(self.session_dir(id).join("transcript.jsonl"))?;
        let session = Session::replay(id, initial, &records).map_err(|e| CliError::Corrupt(id.into(), e.to_string()))?;
        Ok((meta, session))
    }

    pub fn append_records(&self, id: &str, records: &[TranscriptRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let path = self.session_dir(id).join("transcript.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(transcript_text(records).as_bytes()).map_err(|e| CliError::io(&path, e))?;
        f.sync_data().map_err(|e| CliError::io(&path, e))
    }

    pub fn session_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join("sessions");
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use elicit_core::elicitation::{Answer, Verdict};

    const DOC: &str = r#"{"kind": "dag", "version": 1,
        "nodes": [{"id": "B"}, {"id": "I"}, {"id": "F"}, {"id": "H"}],
        "edges": [["B", "F"], ["I", "F"], ["F", "H"]]}"#;

    #[test]
    fn sessions_survive_reopening() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let (id, _) = store.put_model(&ModelDocument::parse(DOC).unwrap()).unwrap();
        let (again, _) = store.put_model(&ModelDocument::parse(DOC).unwrap()).unwrap();
        assert_eq!(id, again);
        let (meta, mut s) = store.create_session(&id, "2024-06-01T09:00:00Z").unwrap();
        let q = s.next_question("2024-06-01T09:00:00Z").unwrap();
        s.apply_answer(&Answer::new(&q.id, Verdict::Relevant).with_edge("I", "B"), "2024-06-01T09:01:00Z").unwrap();
        store.append_records(&meta.id, s.transcript()).unwrap();

        let reopened = Store::open(dir.path()).unwrap();
        let (_, loaded) = reopened.load_session(&meta.id).unwrap();
        assert_eq!(loaded.model_hash(), s.model_hash());
        assert_eq!(loaded.transcript(), s.transcript());
        assert_eq!(reopened.session_ids().unwrap(), vec![meta.id.clone()]);
    }

    #[test]
    fn tampered_transcript_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let (id, _) = store.put_model(&ModelDocument::parse(DOC).unwrap()).unwrap();
        let (meta, mut s) = store.create_session(&id, "t").unwrap();
        let q = s.next_question("t").unwrap();
        s.apply_answer(&Answer::new(&q.id, Verdict::Relevant).with_edge("I", "B"), "t").unwrap();
        let mut records = s.transcript().to_vec();
        if let elicit_core::elicitation::TranscriptEvent::Revision { after_hash, .. } = &mut records.last_mut().unwrap().event {
            *after_hash = "0".repeat(64);
        }
        store.append_records(&meta.id, &records).unwrap();
        assert!(matches!(store.load_session(&meta.id), Err(CliError::Corrupt(..))));
    }

    #[test]
    fn unknown_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(matches!(store.get_model("nope"), Err(CliError::NotFound(_))));
        assert!(matches!(store.get_model("../x"), Err(CliError::NotFound(_))));
        assert!(matches!(store.load_session("s000001"), Err(CliError::NotFound(_))));
    }
}
