//! On-disk persistence: `<id>.json` holds the current session document and
//! `<id>.events.jsonl` its append-only event log, one JSON object per line.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::session::{ActivityEvent, Session};

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("storage directory {path} is not usable: {reason}")]
    InvalidDir { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    /// Open an existing, writable directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let dir = dir.into();
        let invalid = |reason: String| StorageError::InvalidDir {
            path: dir.clone(),
            reason,
        };
        let meta = fs::metadata(&dir).map_err(|e| invalid(e.to_string()))?;
        if !meta.is_dir() {
            return Err(invalid("not a directory".into()));
        }
        let probe = dir.join(".storybot-probe");
        fs::write(&probe, b"").map_err(|e| invalid(format!("not writable: {e}")))?;
        let _ = fs::remove_file(&probe);
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn doc_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.events.jsonl"))
    }

    /// Append the event to the log, then replace the session document.
    pub fn commit(&self, session: &Session, event: &ActivityEvent) -> Result<(), StorageError> {
        let log = self.log_path(&session.id);
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&log).map_err(io(&log))?;
        f.write_all(line.as_bytes()).map_err(io(&log))?;
        f.sync_data().map_err(io(&log))?;

        let doc = self.doc_path(&session.id);
        let tmp = doc.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(session).expect("session serializes");
        fs::write(&tmp, body).map_err(io(&tmp))?;
        fs::rename(&tmp, &doc).map_err(io(&doc))
    }

    pub fn load_events(&self, id: &str) -> Result<Vec<ActivityEvent>, StorageError> {
        let path = self.log_path(id);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StorageError::Corrupt {
                    path: path.clone(),
                    reason: format!("line {}: {e}", i + 1),
                })
            })
            .collect()
    }

    /// Every stored session document.
    pub fn load_all(&self) -> Result<Vec<Session>, StorageError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io(&self.dir))? {
            let path = entry.map_err(io(&self.dir))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if !name.ends_with(".json") || name.ends_with(".events.jsonl") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let session: Session = serde_json::from_str(&text).map_err(|e| StorageError::Corrupt {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            out.push(session);
        }
        out.sort_by(|a, b| a.created.cmp(&b.created).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{EventBody, Phase};
    use chrono::Utc;

    #[test]
    fn commit_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let (s, created) = Session::create("0f", Utc::now());
        store.commit(&s, &created).unwrap();
        let e = s.event(EventBody::PhaseChanged { phase: Phase::GoalGeneration }, Utc::now());
        let s = s.apply(&e).unwrap();
        store.commit(&s, &e).unwrap();

        assert_eq!(store.load_all().unwrap(), vec![s.clone()]);
        let events = store.load_events("0f").unwrap();
        assert_eq!(Session::replay(&events).unwrap(), s);
    }

    #[test]
    fn rejects_missing_or_file_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Store::open(dir.path().join("nope")).is_err());
        let file = dir.path().join("f");
        fs::write(&file, "x").unwrap();
        assert!(matches!(Store::open(&file), Err(StorageError::InvalidDir { .. })));
    }
}
