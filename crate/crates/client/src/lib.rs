//! Typed async client for the LeafTutor HTTP API.

use std::collections::BTreeMap;

use leaftutor_core::api::{
    AddStudents, CreateAssignment, CreateCourse, ErrorBody, EventsQuery, Health, PostMessage, PutFiles, RemoveResponse,
    UploadResponse,
};
use leaftutor_core::service::{EventPage, RunRequest, Transcript};
use leaftutor_core::{Assignment, AssignmentSettings, ChatTurn, Course, ExecutionResult, Id, Material, TutorSession};
use reqwest::multipart::{Form, Part};
use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{status} {code}: {message}")]
    Api { status: u16, code: String, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status().map(|s| s.as_u16()),
        }
    }

    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            ClientError::Transport(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// An upload response together with its status (201 new, 200 unchanged or replaced).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Upload {
    pub status: u16,
    pub material: Material,
    pub chunks_created: usize,
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
    token: Option<String>,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_owned(),
            token: None,
        }
    }

    pub fn with_token(&self, token: impl Into<String>) -> Self {
        Self {
            token: Some(token.into()),
            ..self.clone()
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let req = self.http.request(method, format!("{}{path}", self.base));
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    async fn send_raw(req: RequestBuilder) -> Result<reqwest::Response> {
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => ClientError::Api {
                status: status.as_u16(),
                code: body.error.code,
                message: body.error.message,
            },
            Err(_) => ClientError::Api {
                status: status.as_u16(),
                code: status
                    .canonical_reason()
                    .unwrap_or("HTTP_ERROR")
                    .to_uppercase()
                    .replace(' ', "_"),
                message: text,
            },
        })
    }

    async fn send<T: DeserializeOwned>(req: RequestBuilder) -> Result<T> {
        Ok(Self::send_raw(req).await?.json().await?)
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Self::send(self.request(Method::GET, path)).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::send(self.request(Method::POST, path).json(body)).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/api/health").await
    }

    pub async fn create_course(&self, title: &str) -> Result<Course> {
        self.post("/api/courses", &CreateCourse { title: title.into() }).await
    }

    pub async fn list_courses(&self) -> Result<Vec<Course>> {
        self.get("/api/courses").await
    }

    pub async fn add_students(&self, course: &Id, student_ids: &[Id]) -> Result<Course> {
        let body = AddStudents {
            student_ids: student_ids.to_vec(),
        };
        self.post(&format!("/api/courses/{course}/roster"), &body).await
    }

    pub async fn create_assignment(
        &self,
        course: &Id,
        title: &str,
        settings: AssignmentSettings,
    ) -> Result<Assignment> {
        let body = CreateAssignment {
            title: title.into(),
            settings,
        };
        self.post(&format!("/api/courses/{course}/assignments"), &body).await
    }

    pub async fn list_assignments(&self, course: &Id) -> Result<Vec<Assignment>> {
        self.get(&format!("/api/courses/{course}/assignments")).await
    }

    pub async fn get_assignment(&self, assignment: &Id) -> Result<Assignment> {
        self.get(&format!("/api/assignments/{assignment}")).await
    }

    pub async fn update_settings(&self, assignment: &Id, settings: &AssignmentSettings) -> Result<Assignment> {
        Self::send(
            self.request(Method::PUT, &format!("/api/assignments/{assignment}/settings"))
                .json(settings),
        )
        .await
    }

    pub async fn upload_material(&self, assignment: &Id, kind: &str, filename: &str, bytes: Vec<u8>) -> Result<Upload> {
        let form = Form::new()
            .text("kind", kind.to_owned())
            .part("file", Part::bytes(bytes).file_name(filename.to_owned()));
        let resp = Self::send_raw(
            self.request(Method::POST, &format!("/api/assignments/{assignment}/materials"))
                .multipart(form),
        )
        .await?;
        let status = resp.status();
        let body: UploadResponse = resp.json().await?;
        Ok(Upload {
            status: status.as_u16(),
            material: body.material,
            chunks_created: body.chunks_created,
        })
    }

    pub async fn list_materials(&self, assignment: &Id) -> Result<Vec<Material>> {
        self.get(&format!("/api/assignments/{assignment}/materials")).await
    }

    pub async fn get_material(&self, material: &Id) -> Result<Material> {
        self.get(&format!("/api/materials/{material}")).await
    }

    pub async fn remove_material(&self, material: &Id) -> Result<usize> {
        let r: RemoveResponse = Self::send(self.request(Method::DELETE, &format!("/api/materials/{material}"))).await?;
        Ok(r.chunks_removed)
    }

    pub async fn start_session(&self, assignment: &Id) -> Result<TutorSession> {
        Self::send(self.request(Method::POST, &format!("/api/assignments/{assignment}/sessions"))).await
    }

    pub async fn put_files(&self, session: &Id, files: BTreeMap<String, String>) -> Result<TutorSession> {
        self.post(&format!("/api/sessions/{session}/files"), &PutFiles { files })
            .await
    }

    pub async fn send_message(&self, session: &Id, text: &str) -> Result<ChatTurn> {
        self.post(
            &format!("/api/sessions/{session}/messages"),
            &PostMessage { text: text.into() },
        )
        .await
    }

    pub async fn run(&self, session: &Id, req: &RunRequest) -> Result<ExecutionResult> {
        self.post(&format!("/api/sessions/{session}/run"), req).await
    }

    pub async fn transcript(&self, session: &Id) -> Result<Transcript> {
        self.get(&format!("/api/sessions/{session}/transcript")).await
    }

    pub async fn events(&self, assignment: &Id, cursor: Option<&str>, limit: Option<usize>) -> Result<EventPage> {
        let q = EventsQuery {
            cursor: cursor.map(str::to_owned),
            limit,
        };
        Self::send(
            self.request(Method::GET, &format!("/api/assignments/{assignment}/events"))
                .query(&q),
        )
        .await
    }

    /// Every event of an assignment, following cursors to the end.
    pub async fn all_events(&self, assignment: &Id) -> Result<EventPage> {
        let mut events = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let page = self.events(assignment, cursor.as_deref(), None).await?;
            events.extend(page.events);
            match page.next_cursor {
                Some(c) => cursor = Some(c),
                None => break,
            }
        }
        Ok(EventPage {
            events,
            next_cursor: None,
        })
    }
}

/// True when `err` is an API error with this HTTP status.
pub fn is_status(err: &ClientError, status: StatusCode) -> bool {
    err.status() == Some(status.as_u16())
}
