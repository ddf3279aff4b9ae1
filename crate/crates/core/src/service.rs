//! The tutoring workflow behind the HTTP API: course setup, material
//! ingestion, sessions, tutor turns, and code runs, with authorization
//! decided here so every front end enforces the same rules.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::auth::{self, AuthToken, Principal, PrincipalRole};
use crate::config::{Config, ProviderKind};
use crate::domain::{
    validate_filename, validate_material_upload, Assignment, AssignmentSettings, ChatTurn, Course, ExecutionResult,
    Instructor, Material, MaterialKind, Role, TutorEvent, TutorSession,
};
use crate::error::{Error, Result};
use crate::id::Id;
use crate::ingestion::{Embedder, ExternalEmbedder, HashEmbedder, Ingestor};
use crate::locks::KeyedLocks;
use crate::retrieval::{RetrievalQuery, ScoredChunk};
use crate::sandbox::{ExecutionJob, ExecutionLimits, LanguageProfile, Sandbox};
use crate::store::Store;
use crate::tutor::{
    assemble_prompt, ExternalProvider, ExternalProviderConfig, LlmProvider, PromptInputs, ScriptedProvider, TutorEngine,
};

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub max_material_bytes: usize,
    pub token_ttl: chrono::Duration,
    pub retrieval_k: usize,
    pub exec_limits: ExecutionLimits,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            max_material_bytes: crate::domain::DEFAULT_MAX_MATERIAL_BYTES,
            token_ttl: chrono::Duration::hours(auth::DEFAULT_TOKEN_TTL_HOURS),
            retrieval_k: crate::retrieval::DEFAULT_TOP_K,
            exec_limits: ExecutionLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialUpload {
    pub material: Material,
    pub chunks_created: usize,
    /// False when an existing material (same kind and filename) was reused.
    pub created: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunRequest {
    pub entrypoint: Option<String>,
    pub stdin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session: TutorSession,
    pub events: Vec<TutorEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    pub events: Vec<TutorEvent>,
    pub next_cursor: Option<String>,
}

pub const MAX_EVENT_PAGE: usize = 500;

pub struct TutorService {
    store: Arc<Store>,
    ingestor: Ingestor,
    engine: TutorEngine,
    sandbox: Arc<Sandbox>,
    settings: ServiceSettings,
    session_locks: KeyedLocks,
}

fn forbidden(why: impl Into<String>) -> Error {
    Error::Forbidden(why.into())
}

fn non_empty(field: &str, value: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        return Err(Error::Validation(format!("{field} must not be empty")));
    }
    Ok(v.to_owned())
}

impl TutorService {
    pub fn new(
        store: Arc<Store>,
        ingestor: Ingestor,
        engine: TutorEngine,
        sandbox: Arc<Sandbox>,
        settings: ServiceSettings,
    ) -> Self {
        Self {
            store,
            ingestor,
            engine,
            sandbox,
            settings,
            session_locks: KeyedLocks::default(),
        }
    }

    /// Default settings, the hash embedder and built-in sandbox profiles
    /// around a caller-supplied provider.
    pub fn with_provider(store_root: impl Into<std::path::PathBuf>, provider: Arc<dyn LlmProvider>) -> Result<Self> {
        let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::default());
        let store = Arc::new(Store::open(store_root, embedder.dimension())?);
        let ingestor = Ingestor::new(embedder, store.index.clone(), Default::default())?;
        let engine = TutorEngine::new(
            provider,
            Default::default(),
            Default::default(),
            crate::tutor::provider::DEFAULT_PROVIDER_TIMEOUT,
        )?;
        Ok(Self::new(
            store,
            ingestor,
            engine,
            Arc::new(Sandbox::with_builtin_profiles(crate::sandbox::DEFAULT_WORKERS)),
            ServiceSettings::default(),
        ))
    }

    /// Wires up store, embedder, provider and sandbox from configuration.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let embedder: Arc<dyn Embedder> = match cfg.embedder.name.as_str() {
            "hash256" => Arc::new(HashEmbedder::default()),
            "external" => {
                let endpoint = cfg.embedder.endpoint.clone().ok_or_else(|| {
                    Error::InvalidConfig("embedder.endpoint is required for the external embedder".into())
                })?;
                Arc::new(ExternalEmbedder::new(
                    endpoint,
                    cfg.embedder.model.clone().unwrap_or_default(),
                    cfg.llm.api_key.clone(),
                    cfg.embedder.dimension,
                    cfg.llm.timeout(),
                )?)
            }
            other => return Err(Error::InvalidConfig(format!("unknown embedder `{other}`"))),
        };
        let provider: Arc<dyn LlmProvider> = match cfg.llm.resolved_provider() {
            ProviderKind::Scripted => match &cfg.llm.script_path {
                Some(path) => Arc::new(ScriptedProvider::from_file(path)?),
                None => {
                    tracing::warn!("no LLM configured; every tutor turn will fail with SCRIPT_MISS");
                    Arc::new(ScriptedProvider::default())
                }
            },
            ProviderKind::External => Arc::new(ExternalProvider::new(ExternalProviderConfig {
                endpoint: cfg.llm.endpoint.clone().ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "llm.endpoint (or {}) is required",
                        crate::config::ENV_LLM_ENDPOINT
                    ))
                })?,
                model: cfg.llm.model.clone(),
                api_key: cfg.llm.api_key.clone(),
                temperature: cfg.llm.temperature,
                timeout: cfg.llm.timeout(),
            })?),
        };

        let sandbox = Sandbox::new(cfg.sandbox.workers);
        for builtin in [LanguageProfile::java(), LanguageProfile::script()] {
            if !cfg.sandbox.profiles.iter().any(|p| p.name == builtin.name) {
                sandbox.register_profile(builtin)?;
            }
        }
        for p in &cfg.sandbox.profiles {
            sandbox.register_profile(p.clone())?;
        }
        let sandbox = match &cfg.sandbox.work_root {
            Some(root) => sandbox.with_work_root(root),
            None => sandbox,
        };

        let store = Arc::new(Store::open(&cfg.store, embedder.dimension())?);
        let ingestor = Ingestor::new(embedder, store.index.clone(), cfg.chunking())?;
        let engine = TutorEngine::new(provider, cfg.policy.clone(), cfg.budget, cfg.llm.timeout())?;
        Ok(Self::new(
            store,
            ingestor,
            engine,
            Arc::new(sandbox),
            ServiceSettings {
                max_material_bytes: cfg.max_material_bytes,
                token_ttl: chrono::Duration::hours(cfg.token_ttl_hours),
                retrieval_k: cfg.retrieval_k,
                exec_limits: cfg.sandbox.limits,
            },
        ))
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn sandbox(&self) -> &Arc<Sandbox> {
        &self.sandbox
    }

    pub fn engine(&self) -> &TutorEngine {
        &self.engine
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.settings
    }

    // ---- accounts -------------------------------------------------------

    pub fn bootstrap_instructor(&self, name: &str) -> Result<(Instructor, AuthToken)> {
        let instructor = Instructor {
            instructor_id: Id::new(),
            name: non_empty("name", name)?,
            created_at: Utc::now(),
        };
        self.store.instructors.put(&instructor)?;
        let token = auth::issue_token(
            &self.store,
            Principal::instructor(instructor.instructor_id.clone()),
            self.settings.token_ttl,
        )?;
        Ok((instructor, token))
    }

    pub fn issue_student_token(&self, student_id: &Id) -> Result<AuthToken> {
        auth::issue_token(
            &self.store,
            Principal::student(student_id.clone()),
            self.settings.token_ttl,
        )
    }

    pub fn authenticate(&self, token: &str) -> Result<Principal> {
        auth::authenticate(&self.store, token)
    }

    // ---- authorization helpers -----------------------------------------

    fn require_instructor(p: &Principal) -> Result<()> {
        match p.role {
            PrincipalRole::Instructor => Ok(()),
            PrincipalRole::Student => Err(forbidden("instructor role required")),
        }
    }

    fn require_student(p: &Principal) -> Result<()> {
        match p.role {
            PrincipalRole::Student => Ok(()),
            PrincipalRole::Instructor => Err(forbidden("student role required")),
        }
    }

    fn owned_course(&self, p: &Principal, course_id: &Id) -> Result<Course> {
        Self::require_instructor(p)?;
        let course = self.store.courses.get(course_id)?;
        if course.instructor_id != p.id {
            return Err(forbidden("course belongs to another instructor"));
        }
        Ok(course)
    }

    fn owned_assignment(&self, p: &Principal, assignment_id: &Id) -> Result<Assignment> {
        Self::require_instructor(p)?;
        let assignment = self.store.assignments.get(assignment_id)?;
        self.owned_course(p, &assignment.course_id)?;
        Ok(assignment)
    }

    fn can_view_course(&self, p: &Principal, course: &Course) -> bool {
        match p.role {
            PrincipalRole::Instructor => course.instructor_id == p.id,
            PrincipalRole::Student => course.roster.contains(&p.id),
        }
    }

    fn visible_session(&self, p: &Principal, session_id: &Id) -> Result<TutorSession> {
        let session = self.load_session(session_id)?;
        let allowed = match p.role {
            PrincipalRole::Student => session.student_id == p.id,
            PrincipalRole::Instructor => {
                let assignment = self.store.assignments.get(&session.assignment_id)?;
                self.store.courses.get(&assignment.course_id)?.instructor_id == p.id
            }
        };
        if allowed {
            Ok(session)
        } else {
            Err(forbidden("session belongs to someone else"))
        }
    }

    fn owned_session(&self, p: &Principal, session_id: &Id) -> Result<TutorSession> {
        Self::require_student(p)?;
        self.visible_session(p, session_id)
    }

    fn load_session(&self, session_id: &Id) -> Result<TutorSession> {
        self.store.sessions.get(session_id).map_err(|e| match e {
            Error::NotFound { .. } => Error::UnknownSession(session_id.to_string()),
            other => other,
        })
    }

    // ---- courses and assignments ---------------------------------------

    pub fn create_course(&self, p: &Principal, title: &str) -> Result<Course> {
        Self::require_instructor(p)?;
        let course = Course {
            course_id: Id::new(),
            title: non_empty("title", title)?,
            instructor_id: p.id.clone(),
            roster: Default::default(),
            created_at: Utc::now(),
        };
        self.store.courses.put(&course)?;
        Ok(course)
    }

    pub fn list_courses(&self, p: &Principal) -> Result<Vec<Course>> {
        self.store.courses.list_where(|c| self.can_view_course(p, c))
    }

    pub fn add_students(&self, p: &Principal, course_id: &Id, students: &[Id]) -> Result<Course> {
        let mut course = self.owned_course(p, course_id)?;
        if students.is_empty() {
            return Err(Error::Validation("student_ids must not be empty".into()));
        }
        course.roster.extend(students.iter().cloned());
        self.store.courses.update(&course)?;
        Ok(course)
    }

    pub fn create_assignment(
        &self,
        p: &Principal,
        course_id: &Id,
        title: &str,
        settings: AssignmentSettings,
    ) -> Result<Assignment> {
        self.owned_course(p, course_id)?;
        let assignment = Assignment {
            assignment_id: Id::new(),
            course_id: course_id.clone(),
            title: non_empty("title", title)?,
            created_at: Utc::now(),
            settings,
        };
        self.store.assignments.put(&assignment)?;
        Ok(assignment)
    }

    pub fn list_assignments(&self, p: &Principal, course_id: &Id) -> Result<Vec<Assignment>> {
        let course = self.store.courses.get(course_id)?;
        if !self.can_view_course(p, &course) {
            return Err(forbidden("not a member of this course"));
        }
        self.store.assignments.list_where(|a| &a.course_id == course_id)
    }

    pub fn get_assignment(&self, p: &Principal, assignment_id: &Id) -> Result<Assignment> {
        let assignment = self.store.assignments.get(assignment_id)?;
        let course = self.store.courses.get(&assignment.course_id)?;
        if !self.can_view_course(p, &course) {
            return Err(forbidden("not a member of this course"));
        }
        Ok(assignment)
    }

    pub fn update_settings(
        &self,
        p: &Principal,
        assignment_id: &Id,
        settings: AssignmentSettings,
    ) -> Result<Assignment> {
        let mut assignment = self.owned_assignment(p, assignment_id)?;
        assignment.settings = settings;
        self.store.assignments.update(&assignment)?;
        Ok(assignment)
    }

    // ---- materials -------------------------------------------------------

    /// Stores and indexes an upload. A file with the same kind and filename
    /// replaces the earlier version; identical content changes nothing.
    pub async fn upload_material(
        &self,
        p: &Principal,
        assignment_id: &Id,
        kind: &str,
        filename: &str,
        bytes: &[u8],
    ) -> Result<MaterialUpload> {
        self.owned_assignment(p, assignment_id)?;
        let incoming =
            validate_material_upload(assignment_id, kind, filename, bytes, self.settings.max_material_bytes)?;
        let existing = self
            .store
            .materials
            .list_where(|m| {
                &m.assignment_id == assignment_id && m.kind == incoming.kind && m.filename == incoming.filename
            })?
            .into_iter()
            .next();

        match existing {
            Some(prev) if prev.content_hash == incoming.content_hash => {
                let outcome = self.ingestor.ingest_material(&prev).await?;
                Ok(MaterialUpload {
                    material: prev,
                    chunks_created: outcome.chunks_created,
                    created: false,
                })
            }
            Some(prev) => {
                let updated = Material {
                    material_id: prev.material_id.clone(),
                    uploaded_at: prev.uploaded_at,
                    ..incoming
                };
                self.store.materials.update(&updated)?;
                match self.ingestor.ingest_material(&updated).await {
                    Ok(outcome) => Ok(MaterialUpload {
                        material: updated,
                        chunks_created: outcome.chunks_created,
                        created: false,
                    }),
                    Err(e) => {
                        self.store.materials.update(&prev)?;
                        Err(e)
                    }
                }
            }
            None => {
                self.store.materials.put(&incoming)?;
                match self.ingestor.ingest_material(&incoming).await {
                    Ok(outcome) => Ok(MaterialUpload {
                        material: incoming,
                        chunks_created: outcome.chunks_created,
                        created: true,
                    }),
                    Err(e) => {
                        self.store.materials.remove(&incoming.material_id)?;
                        Err(e)
                    }
                }
            }
        }
    }

    pub fn list_materials(&self, p: &Principal, assignment_id: &Id) -> Result<Vec<Material>> {
        self.owned_assignment(p, assignment_id)?;
        self.store.materials.list_where(|m| &m.assignment_id == assignment_id)
    }

    pub fn get_material(&self, p: &Principal, material_id: &Id) -> Result<Material> {
        Self::require_instructor(p)?;
        let material = self.store.materials.get(material_id)?;
        self.owned_assignment(p, &material.assignment_id)?;
        Ok(material)
    }

    /// Deletes a material and its chunks; returns the number of chunks removed.
    pub fn remove_material(&self, p: &Principal, material_id: &Id) -> Result<usize> {
        let material = self.get_material(p, material_id)?;
        let removed = self.store.index.remove_material(&material.material_id)?;
        self.store.materials.remove(&material.material_id)?;
        Ok(removed)
    }

    // ---- retrieval -------------------------------------------------------

    pub async fn retrieve(&self, q: &RetrievalQuery) -> Result<Vec<ScoredChunk>> {
        if !self.store.assignments.contains(&q.assignment_id) {
            return Err(Error::UnknownAssignment(q.assignment_id.to_string()));
        }
        if q.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        let vector = self.ingestor.embedder().embed(&q.query_text).await?;
        Ok(self
            .store
            .index
            .search(&q.assignment_id, &vector, q.k, q.kind_filter.as_ref()))
    }

    // ---- sessions ----------------------------------------------------------

    pub fn start_session(&self, p: &Principal, assignment_id: &Id) -> Result<TutorSession> {
        Self::require_student(p)?;
        let assignment = self.store.assignments.get(assignment_id)?;
        let course = self.store.courses.get(&assignment.course_id)?;
        if !course.roster.contains(&p.id) {
            return Err(forbidden("student is not enrolled in this course"));
        }
        let session = TutorSession::new(assignment_id.clone(), p.id.clone());
        self.store.sessions.put(&session)?;
        Ok(session)
    }

    pub fn put_files(&self, p: &Principal, session_id: &Id, files: BTreeMap<String, String>) -> Result<TutorSession> {
        self.owned_session(p, session_id)?;
        if files.is_empty() {
            return Err(Error::Validation("no files supplied".into()));
        }
        for (name, body) in &files {
            validate_filename(name)?;
            if body.len() > self.settings.max_material_bytes {
                return Err(Error::TooLarge {
                    size: body.len(),
                    limit: self.settings.max_material_bytes,
                });
            }
        }
        let _guard = self
            .session_locks
            .try_lock(session_id)
            .ok_or_else(|| Error::Busy(session_id.to_string()))?;
        let mut session = self.load_session(session_id)?;
        session.files.extend(files);
        self.store.sessions.update(&session)?;
        Ok(session)
    }

    /// One grounded exchange: retrieve, assemble, ask the provider, record.
    ///
    /// The student turn is saved before the provider is called, so a provider
    /// failure still leaves the question in the transcript (without a tutor
    /// turn or event).
    pub async fn tutor_turn(&self, p: &Principal, session_id: &Id, query: &str) -> Result<ChatTurn> {
        self.owned_session(p, session_id)?;
        if query.trim().is_empty() {
            return Err(Error::EmptyQuery);
        }
        let _guard = self
            .session_locks
            .try_lock(session_id)
            .ok_or_else(|| Error::Busy(session_id.to_string()))?;
        let mut session = self.load_session(session_id)?;
        let assignment = self.store.assignments.get(&session.assignment_id)?;

        let mut q = RetrievalQuery::new(session.assignment_id.clone(), query);
        q.k = self.settings.retrieval_k;
        let retrieved = self.retrieve(&q).await?;
        let instructions = self
            .store
            .materials
            .list_where(|m| m.assignment_id == session.assignment_id && m.kind == MaterialKind::Instructions)?;
        let mut policy = self.engine.policy().clone();
        policy.forbid_solution_verbatim &= !assignment.settings.reveal_solutions;
        let bundle = assemble_prompt(&PromptInputs {
            session: &session,
            query,
            instructions: &instructions,
            retrieved: &retrieved,
            policy: &policy,
            budget: self.engine.budget(),
        })?;

        let student_index = session.push_turn(Role::Student, query);
        self.store.sessions.update(&session)?;

        let reply = self.engine.respond(&bundle).await?;

        let tutor_index = session.push_turn(Role::Tutor, reply.clone());
        self.store.sessions.update(&session)?;
        self.store.events.append(&TutorEvent {
            event_id: Id::new(),
            session_id: session.session_id.clone(),
            assignment_id: session.assignment_id.clone(),
            turn_index: student_index,
            query_text: query.to_owned(),
            retrieved_chunk_ids: retrieved.iter().map(|h| h.chunk.chunk_id.clone()).collect(),
            prompt_chars: bundle.total_chars,
            response_chars: reply.chars().count(),
            at: Utc::now(),
        })?;
        Ok(session.turns[tutor_index].clone())
    }

    /// Compiles and runs the session's files with the assignment's settings
    /// and remembers the result for the next tutor turn.
    pub async fn run(&self, p: &Principal, session_id: &Id, req: &RunRequest) -> Result<ExecutionResult> {
        self.owned_session(p, session_id)?;
        let _guard = self
            .session_locks
            .try_lock(session_id)
            .ok_or_else(|| Error::Busy(session_id.to_string()))?;
        let mut session = self.load_session(session_id)?;
        let assignment = self.store.assignments.get(&session.assignment_id)?;
        let settings = &assignment.settings;
        let job = ExecutionJob {
            files: session.files.clone(),
            entrypoint: req.entrypoint.clone().unwrap_or_else(|| settings.entrypoint.clone()),
            profile: settings.language.clone(),
            stdin_text: req.stdin.clone().or_else(|| settings.stdin.clone()),
            expected_output: settings.expected_output.clone(),
            limits: self.settings.exec_limits,
        };
        let result = self.sandbox.execute(&job).await?;
        session.last_execution = Some(result.clone());
        self.store.sessions.update(&session)?;
        Ok(result)
    }

    pub fn transcript(&self, p: &Principal, session_id: &Id) -> Result<Transcript> {
        let session = self.visible_session(p, session_id)?;
        let events = self
            .store
            .events
            .read_all()?
            .into_iter()
            .filter(|e| &e.session_id == session_id)
            .collect();
        Ok(Transcript { session, events })
    }

    /// Events of one assignment in append order, paged by an opaque cursor.
    pub fn assignment_events(
        &self,
        p: &Principal,
        assignment_id: &Id,
        cursor: Option<&str>,
        limit: usize,
    ) -> Result<EventPage> {
        self.owned_assignment(p, assignment_id)?;
        let offset = match cursor {
            None | Some("") => 0,
            Some(c) => c
                .parse::<usize>()
                .map_err(|_| Error::Validation(format!("bad cursor `{c}`")))?,
        };
        let limit = limit.clamp(1, MAX_EVENT_PAGE);
        let all: Vec<TutorEvent> = self
            .store
            .events
            .read_all()?
            .into_iter()
            .filter(|e| &e.assignment_id == assignment_id)
            .collect();
        let events: Vec<TutorEvent> = all.iter().skip(offset).take(limit).cloned().collect();
        let end = offset + events.len();
        Ok(EventPage {
            next_cursor: (end < all.len()).then(|| end.to_string()),
            events,
        })
    }
}
