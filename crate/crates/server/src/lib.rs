//! HTTP front end: JSON over HTTP/1.1, bearer-token auth, one handler per
//! endpoint delegating to [`TutorService`].

mod auth;
mod error;

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use leaftutor_core::api::{
    AddStudents, CreateAssignment, CreateCourse, EventsQuery, Health, PostMessage, PutFiles, RemoveResponse,
    UploadResponse, DEFAULT_EVENT_PAGE,
};
use leaftutor_core::service::{EventPage, RunRequest, Transcript};
use leaftutor_core::{
    Assignment, AssignmentSettings, ChatTurn, Course, Error, ExecutionResult, Id, Material, TutorService, TutorSession,
};
use tokio::net::TcpListener;

pub use auth::Auth;
pub use error::{status_for, ApiError};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<TutorService>,
}

type ApiResult<T> = Result<T, ApiError>;
type Created<T> = (StatusCode, Json<T>);

fn id(raw: &str, kind: &'static str) -> ApiResult<Id> {
    Id::parse(raw).map_err(|_| {
        Error::NotFound {
            kind,
            id: raw.to_owned(),
        }
        .into()
    })
}

fn session_id(raw: &str) -> ApiResult<Id> {
    Id::parse(raw).map_err(|_| Error::UnknownSession(raw.to_owned()).into())
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    Ok(payload?.0)
}

pub fn router(service: Arc<TutorService>) -> Router {
    let limit = 2 * service.settings().max_material_bytes + (1 << 20);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/courses", post(create_course).get(list_courses))
        .route("/api/courses/{id}/roster", post(add_students))
        .route(
            "/api/courses/{id}/assignments",
            post(create_assignment).get(list_assignments),
        )
        .route("/api/assignments/{id}", get(get_assignment))
        .route("/api/assignments/{id}/settings", put(update_settings))
        .route(
            "/api/assignments/{id}/materials",
            post(upload_material).get(list_materials),
        )
        .route("/api/assignments/{id}/sessions", post(start_session))
        .route("/api/assignments/{id}/events", get(assignment_events))
        .route("/api/materials/{id}", get(get_material).delete(remove_material))
        .route("/api/sessions/{id}/files", post(put_files))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/run", post(run))
        .route("/api/sessions/{id}/transcript", get(transcript))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(AppState { service })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Arc<TutorService>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn create_course(
    State(s): State<AppState>,
    Auth(p): Auth,
    payload: Result<Json<CreateCourse>, JsonRejection>,
) -> ApiResult<Created<Course>> {
    let req = body(payload)?;
    Ok((StatusCode::CREATED, Json(s.service.create_course(&p, &req.title)?)))
}

async fn list_courses(State(s): State<AppState>, Auth(p): Auth) -> ApiResult<Json<Vec<Course>>> {
    Ok(Json(s.service.list_courses(&p)?))
}

async fn add_students(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(course): Path<String>,
    payload: Result<Json<AddStudents>, JsonRejection>,
) -> ApiResult<Created<Course>> {
    let course = id(&course, "course")?;
    let req = body(payload)?;
    Ok((
        StatusCode::CREATED,
        Json(s.service.add_students(&p, &course, &req.student_ids)?),
    ))
}

async fn create_assignment(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(course): Path<String>,
    payload: Result<Json<CreateAssignment>, JsonRejection>,
) -> ApiResult<Created<Assignment>> {
    let course = id(&course, "course")?;
    let req = body(payload)?;
    let a = s.service.create_assignment(&p, &course, &req.title, req.settings)?;
    Ok((StatusCode::CREATED, Json(a)))
}

async fn list_assignments(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(course): Path<String>,
) -> ApiResult<Json<Vec<Assignment>>> {
    let course = id(&course, "course")?;
    Ok(Json(s.service.list_assignments(&p, &course)?))
}

async fn get_assignment(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(assignment): Path<String>,
) -> ApiResult<Json<Assignment>> {
    let assignment = id(&assignment, "assignment")?;
    Ok(Json(s.service.get_assignment(&p, &assignment)?))
}

async fn update_settings(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(assignment): Path<String>,
    payload: Result<Json<AssignmentSettings>, JsonRejection>,
) -> ApiResult<Json<Assignment>> {
    let assignment = id(&assignment, "assignment")?;
    let settings = body(payload)?;
    Ok(Json(s.service.update_settings(&p, &assignment, settings)?))
}

/// Multipart fields: `kind` (text) and `file` (the upload, with a filename).
async fn upload_material(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(assignment): Path<String>,
    multipart: Result<Multipart, axum::extract::multipart::MultipartRejection>,
) -> ApiResult<Created<UploadResponse>> {
    let assignment = id(&assignment, "assignment")?;
    let mut multipart =
        multipart.map_err(|r| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "VALIDATION", r.body_text()))?;
    let mut kind = None;
    let mut file = None;
    while let Some(field) = multipart.next_field().await? {
        match field.name() {
            Some("kind") => kind = Some(field.text().await?),
            Some("file") => {
                let name = field.file_name().unwrap_or_default().to_owned();
                file = Some((name, field.bytes().await?));
            }
            _ => {}
        }
    }
    let kind = kind.ok_or_else(|| Error::Validation("multipart field `kind` is missing".into()))?;
    let (filename, bytes) = file.ok_or_else(|| Error::Validation("multipart field `file` is missing".into()))?;
    let up = s
        .service
        .upload_material(&p, &assignment, &kind, &filename, &bytes)
        .await?;
    let status = if up.created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((
        status,
        Json(UploadResponse {
            material: up.material,
            chunks_created: up.chunks_created,
        }),
    ))
}

async fn list_materials(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(assignment): Path<String>,
) -> ApiResult<Json<Vec<Material>>> {
    let assignment = id(&assignment, "assignment")?;
    Ok(Json(s.service.list_materials(&p, &assignment)?))
}

async fn get_material(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(material): Path<String>,
) -> ApiResult<Json<Material>> {
    let material = id(&material, "material")?;
    Ok(Json(s.service.get_material(&p, &material)?))
}

async fn remove_material(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(material): Path<String>,
) -> ApiResult<Json<RemoveResponse>> {
    let material = id(&material, "material")?;
    let chunks_removed = s.service.remove_material(&p, &material)?;
    Ok(Json(RemoveResponse { chunks_removed }))
}

async fn start_session(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(assignment): Path<String>,
) -> ApiResult<Created<TutorSession>> {
    let assignment = id(&assignment, "assignment")?;
    Ok((StatusCode::CREATED, Json(s.service.start_session(&p, &assignment)?)))
}

async fn assignment_events(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(assignment): Path<String>,
    query: Result<Query<EventsQuery>, QueryRejection>,
) -> ApiResult<Json<EventPage>> {
    let assignment = id(&assignment, "assignment")?;
    let Query(q) = query?;
    let page = s.service.assignment_events(
        &p,
        &assignment,
        q.cursor.as_deref(),
        q.limit.unwrap_or(DEFAULT_EVENT_PAGE),
    )?;
    Ok(Json(page))
}

async fn put_files(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(session): Path<String>,
    payload: Result<Json<PutFiles>, JsonRejection>,
) -> ApiResult<Json<TutorSession>> {
    let session = session_id(&session)?;
    let req = body(payload)?;
    Ok(Json(s.service.put_files(&p, &session, req.files)?))
}

async fn post_message(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(session): Path<String>,
    payload: Result<Json<PostMessage>, JsonRejection>,
) -> ApiResult<Json<ChatTurn>> {
    let session = session_id(&session)?;
    let req = body(payload)?;
    Ok(Json(s.service.tutor_turn(&p, &session, &req.text).await?))
}

async fn run(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(session): Path<String>,
    payload: Option<Json<RunRequest>>,
) -> ApiResult<Json<ExecutionResult>> {
    let session = session_id(&session)?;
    let req = payload.map(|Json(r)| r).unwrap_or_default();
    Ok(Json(s.service.run(&p, &session, &req).await?))
}

async fn transcript(
    State(s): State<AppState>,
    Auth(p): Auth,
    Path(session): Path<String>,
) -> ApiResult<Json<Transcript>> {
    let session = session_id(&session)?;
    Ok(Json(s.service.transcript(&p, &session)?))
}

/// A server bound to an ephemeral local port, stopped on [`RunningServer::stop`] or drop.
pub struct RunningServer {
    pub addr: std::net::SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<std::io::Result<()>>>,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.task.take() {
            Some(task) => task.await.map_err(std::io::Error::other)?,
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Starts serving on `127.0.0.1:0` in a background task.
pub async fn spawn_local(service: Arc<TutorService>) -> std::io::Result<RunningServer> {
    let listener = TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel();
    let task = tokio::spawn(serve(listener, service, async {
        let _ = rx.await;
    }));
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        task: Some(task),
    })
}
