//! Embedded file-backed store.
//!
//! Layout under the root directory:
//!
//! ```text
//! store.meta        schema version + embedding dimension
//! courses/          one JSON file per record
//! assignments/
//! materials/
//! sessions/
//! instructors/
//! tokens/           keyed by SHA-256 of the bearer token
//! chunks.vec        vector index (see `retrieval`)
//! events.jsonl      append-only tutoring event log
//! ```
//!
//! Every record write goes through temp-file + rename, so a crash never
//! leaves a half-written record visible.

pub mod atomic;
pub mod events;

use std::fs;
use std::io;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::auth::TokenRecord;
use crate::domain::{Assignment, Course, Instructor, Material, TutorSession};
use crate::error::{Error, Result};
use crate::id::Id;
use crate::retrieval::VectorIndex;

pub use events::EventLog;

pub const SCHEMA_VERSION: u32 = 1;

/// A record type with its own directory of JSON files.
pub trait Record: Serialize + DeserializeOwned + Send + Sync {
    const KIND: &'static str;
    const DIR: &'static str;
    fn id(&self) -> &Id;
    fn created_at(&self) -> DateTime<Utc>;
}

macro_rules! record {
    ($ty:ty, $kind:literal, $dir:literal, $id:ident, $at:ident) => {
        impl Record for $ty {
            const KIND: &'static str = $kind;
            const DIR: &'static str = $dir;
            fn id(&self) -> &Id {
                &self.$id
            }
            fn created_at(&self) -> DateTime<Utc> {
                self.$at
            }
        }
    };
}

record!(Course, "course", "courses", course_id, created_at);
record!(Assignment, "assignment", "assignments", assignment_id, created_at);
record!(Material, "material", "materials", material_id, uploaded_at);
record!(TutorSession, "session", "sessions", session_id, created_at);
record!(Instructor, "instructor", "instructors", instructor_id, created_at);
record!(TokenRecord, "token", "tokens", token_hash, created_at);

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoreMeta {
    schema_version: u32,
    embedding_dimension: usize,
}

/// Directory of JSON records of one type.
pub struct RecordDir<R> {
    dir: PathBuf,
    write: Mutex<()>,
    _marker: PhantomData<fn() -> R>,
}

impl<R: Record> RecordDir<R> {
    fn open(root: &Path) -> Result<Self> {
        let dir = root.join(R::DIR);
        fs::create_dir_all(&dir)?;
        atomic::sweep_temp_files(&dir)?;
        Ok(Self {
            dir,
            write: Mutex::new(()),
            _marker: PhantomData,
        })
    }

    fn path(&self, id: &Id) -> PathBuf {
        self.dir.join(format!("{}.json", id.as_str()))
    }

    fn write(&self, record: &R) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(record)?;
        atomic::write_atomic(&self.path(record.id()), &bytes).map_err(|e| Error::AtomicWriteFailed(e.to_string()))
    }

    /// Inserts a new record; `CONFLICT` if the id is taken.
    pub fn put(&self, record: &R) -> Result<()> {
        let _w = self.write.lock();
        if self.path(record.id()).exists() {
            return Err(Error::Conflict {
                kind: R::KIND,
                id: record.id().to_string(),
            });
        }
        self.write(record)
    }

    /// Replaces an existing record; `NOT_FOUND` if absent.
    pub fn update(&self, record: &R) -> Result<()> {
        let _w = self.write.lock();
        if !self.path(record.id()).exists() {
            return Err(self.not_found(record.id()));
        }
        self.write(record)
    }

    fn not_found(&self, id: &Id) -> Error {
        Error::NotFound {
            kind: R::KIND,
            id: id.to_string(),
        }
    }

    pub fn get(&self, id: &Id) -> Result<R> {
        match fs::read(self.path(id)) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(self.not_found(id)),
            Err(e) => Err(e.into()),
        }
    }

    pub fn contains(&self, id: &Id) -> bool {
        self.path(id).exists()
    }

    pub fn remove(&self, id: &Id) -> Result<()> {
        let _w = self.write.lock();
        match fs::remove_file(self.path(id)) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(self.not_found(id)),
            Err(e) => Err(e.into()),
        }
    }

    /// All records ordered by (created_at, id).
    pub fn list(&self) -> Result<Vec<R>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let bytes = fs::read(&path)?;
                out.push(serde_json::from_slice::<R>(&bytes)?);
            }
        }
        out.sort_by(|a, b| a.created_at().cmp(&b.created_at()).then_with(|| a.id().cmp(b.id())));
        Ok(out)
    }

    pub fn list_where(&self, keep: impl Fn(&R) -> bool) -> Result<Vec<R>> {
        Ok(self.list()?.into_iter().filter(keep).collect())
    }
}

pub struct Store {
    root: PathBuf,
    pub courses: RecordDir<Course>,
    pub assignments: RecordDir<Assignment>,
    pub materials: RecordDir<Material>,
    pub sessions: RecordDir<TutorSession>,
    pub instructors: RecordDir<Instructor>,
    pub tokens: RecordDir<TokenRecord>,
    pub index: Arc<VectorIndex>,
    pub events: EventLog,
}

impl Store {
    /// Opens the store at `root`, creating it if needed.
    pub fn open(root: impl Into<PathBuf>, embedding_dimension: usize) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let meta_path = root.join("store.meta");
        match fs::read(&meta_path) {
            Ok(bytes) => {
                let meta: StoreMeta =
                    serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt(format!("store.meta: {e}")))?;
                if meta.schema_version > SCHEMA_VERSION {
                    return Err(Error::SchemaTooNew {
                        found: meta.schema_version,
                        supported: SCHEMA_VERSION,
                    });
                }
                if meta.embedding_dimension != embedding_dimension {
                    return Err(Error::InvalidConfig(format!(
                        "store was built with {}-dimensional embeddings, embedder produces {}",
                        meta.embedding_dimension, embedding_dimension
                    )));
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let meta = StoreMeta {
                    schema_version: SCHEMA_VERSION,
                    embedding_dimension,
                };
                atomic::write_atomic(&meta_path, &serde_json::to_vec_pretty(&meta)?)?;
            }
            Err(e) => return Err(e.into()),
        }
        atomic::sweep_temp_files(&root)?;
        Ok(Self {
            courses: RecordDir::open(&root)?,
            assignments: RecordDir::open(&root)?,
            materials: RecordDir::open(&root)?,
            sessions: RecordDir::open(&root)?,
            instructors: RecordDir::open(&root)?,
            tokens: RecordDir::open(&root)?,
            index: Arc::new(VectorIndex::open(root.join("chunks.vec"), embedding_dimension)?),
            events: EventLog::open(root.join("events.jsonl"))?,
            root,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::time::Duration;

    fn course(title: &str) -> Course {
        Course {
            course_id: Id::new(),
            title: title.into(),
            instructor_id: Id::new(),
            roster: BTreeSet::new(),
            created_at: Utc::now(),
        }
    }

    #[test]
    fn get_unknown_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), 256).unwrap();
        let err = store.courses.get(&Id::new()).unwrap_err();
        assert_eq!(err.code(), "NOT_FOUND");
    }

    #[test]
    fn put_get_and_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), 256).unwrap();
        let c = course("Data Structures");
        store.courses.put(&c).unwrap();
        assert_eq!(store.courses.get(&c.course_id).unwrap(), c);
        assert_eq!(store.courses.put(&c).unwrap_err().code(), "CONFLICT");
        assert_eq!(store.courses.update(&course("x")).unwrap_err().code(), "NOT_FOUND");
    }

    #[test]
    fn list_is_in_creation_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), 256).unwrap();
        let parent = Id::new();
        let mut ids = Vec::new();
        for i in 0..3 {
            let a = Assignment {
                assignment_id: Id::new(),
                course_id: parent.clone(),
                title: format!("hw{i}"),
                created_at: Utc::now(),
                settings: Default::default(),
            };
            ids.push(a.assignment_id.clone());
            store.assignments.put(&a).unwrap();
            std::thread::sleep(Duration::from_millis(2));
        }
        let listed: Vec<Id> = store
            .assignments
            .list()
            .unwrap()
            .into_iter()
            .map(|a| a.assignment_id)
            .collect();
        assert_eq!(listed, ids);
    }

    #[test]
    fn interrupted_write_is_invisible_and_swept() {
        let dir = tempfile::tempdir().unwrap();
        let c = course("Algorithms");
        {
            let store = Store::open(dir.path(), 256).unwrap();
            let path = store.courses.path(&c.course_id);
            let bytes = serde_json::to_vec(&c).unwrap();
            let crash = atomic::write_atomic_with(&path, &bytes, || Err(io::Error::other("killed")));
            assert!(crash.is_err());
            // A real crash leaves the temp file behind.
            fs::write(dir.path().join("courses").join("x.json.1.tmp"), &bytes[..10]).unwrap();
            assert_eq!(store.courses.get(&c.course_id).unwrap_err().code(), "NOT_FOUND");
            assert!(store.courses.list().unwrap().is_empty());
        }
        Store::open(dir.path(), 256).unwrap();
        assert_eq!(fs::read_dir(dir.path().join("courses")).unwrap().count(), 0);
    }

    #[test]
    fn newer_schema_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("store.meta"),
            r#"{"schema_version": 2, "embedding_dimension": 256}"#,
        )
        .unwrap();
        let err = Store::open(dir.path(), 256).err().unwrap();
        assert_eq!(err.code(), "SCHEMA_TOO_NEW");
    }

    #[test]
    fn layout_matches_documentation() {
        let dir = tempfile::tempdir().unwrap();
        Store::open(dir.path(), 256).unwrap();
        for name in [
            "courses",
            "assignments",
            "materials",
            "sessions",
            "store.meta",
            "events.jsonl",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }
}
