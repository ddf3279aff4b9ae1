//! Endpoint × principal authorization table, driven over real HTTP.
//!
//! Shared by the server integration tests and the acceptance suite.

#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use leaftutor_core::tutor::{LlmProvider, PromptBundle};
use leaftutor_core::{Id, TutorService};
use reqwest::multipart::{Form, Part};
use reqwest::Method;
use serde_json::{json, Value};

/// Replies to anything after a fixed delay, so requests overlap.
pub struct SlowProvider(pub Duration);

#[async_trait]
impl LlmProvider for SlowProvider {
    fn name(&self) -> &str {
        "slow"
    }

    async fn complete(&self, _bundle: &PromptBundle) -> leaftutor_core::Result<String> {
        tokio::time::sleep(self.0).await;
        Ok("Which line do you think runs first?".into())
    }
}

pub const COLUMNS: [&str; 5] = [
    "no token",
    "student",
    "outsider student",
    "wrong-course instructor",
    "owning instructor",
];

pub struct Fixture {
    pub base: String,
    /// Bearer tokens in `COLUMNS` order; `None` sends no header.
    pub tokens: [Option<String>; 5],
    pub course: Id,
    pub assignment: Id,
    pub material: Id,
    pub spare_material: Id,
    pub session: Id,
}

pub enum Body {
    None,
    Json(Value),
    Upload {
        kind: &'static str,
        filename: String,
        bytes: Vec<u8>,
    },
}

pub struct Row {
    pub method: Method,
    pub path: String,
    pub body: Body,
    pub expect: [u16; 5],
}

fn http() -> reqwest::Client {
    reqwest::Client::new()
}

async fn send(base: &str, token: Option<&str>, method: Method, path: &str, body: &Body) -> (u16, Value) {
    let mut req = http().request(method, format!("{base}{path}"));
    if let Some(t) = token {
        req = req.bearer_auth(t);
    }
    req = match body {
        Body::None => req,
        Body::Json(v) => req.json(v),
        Body::Upload { kind, filename, bytes } => req.multipart(
            Form::new()
                .text("kind", *kind)
                .part("file", Part::bytes(bytes.clone()).file_name(filename.clone())),
        ),
    };
    let resp = req.send().await.expect("request");
    let status = resp.status().as_u16();
    let text = resp.text().await.unwrap_or_default();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

async fn ok(base: &str, token: &str, method: Method, path: &str, body: Body) -> Value {
    let (status, v) = send(base, Some(token), method, path, &body).await;
    assert!((200..300).contains(&status), "{path}: {status} {v}");
    v
}

fn id_of(v: &Value, field: &str) -> Id {
    Id::parse(v[field].as_str().unwrap_or_else(|| panic!("{field} missing in {v}"))).unwrap()
}

/// Creates two instructors, two students (one enrolled), a course with an
/// assignment, two materials and a session with a runnable file.
pub async fn fixture(base: &str, service: &TutorService) -> Fixture {
    let (_, owner) = service.bootstrap_instructor("owner").unwrap();
    let (_, other) = service.bootstrap_instructor("other").unwrap();
    let student_id = Id::parse("matrix-student").unwrap();
    let student = service.issue_student_token(&student_id).unwrap();
    let outsider = service
        .issue_student_token(&Id::parse("matrix-outsider").unwrap())
        .unwrap();
    let owner_t = owner.token.clone();

    let course = ok(
        base,
        &owner_t,
        Method::POST,
        "/api/courses",
        Body::Json(json!({"title": "Data Structures"})),
    )
    .await;
    let course = id_of(&course, "course_id");
    ok(
        base,
        &owner_t,
        Method::POST,
        &format!("/api/courses/{course}/roster"),
        Body::Json(json!({"student_ids": [student_id]})),
    )
    .await;
    ok(
        base,
        &other.token,
        Method::POST,
        "/api/courses",
        Body::Json(json!({"title": "Elsewhere"})),
    )
    .await;
    let assignment = ok(
        base,
        &owner_t,
        Method::POST,
        &format!("/api/courses/{course}/assignments"),
        Body::Json(json!({"title": "Lists", "settings": {"language": "script", "entrypoint": "main.sh"}})),
    )
    .await;
    let assignment = id_of(&assignment, "assignment_id");
    let upload = |name: &str, text: &str| Body::Upload {
        kind: "LECTURE",
        filename: name.into(),
        bytes: text.as_bytes().to_vec(),
    };
    let m = ok(
        base,
        &owner_t,
        Method::POST,
        &format!("/api/assignments/{assignment}/materials"),
        upload("notes.md", "Linked lists keep a head reference."),
    )
    .await;
    let spare = ok(
        base,
        &owner_t,
        Method::POST,
        &format!("/api/assignments/{assignment}/materials"),
        upload("spare.md", "A material that the matrix deletes."),
    )
    .await;
    let session = ok(
        base,
        &student.token,
        Method::POST,
        &format!("/api/assignments/{assignment}/sessions"),
        Body::None,
    )
    .await;
    let session = id_of(&session, "session_id");
    ok(
        base,
        &student.token,
        Method::POST,
        &format!("/api/sessions/{session}/files"),
        Body::Json(json!({"files": {"main.sh": "echo hi"}})),
    )
    .await;
    Fixture {
        base: base.to_owned(),
        tokens: [
            None,
            Some(student.token),
            Some(outsider.token),
            Some(other.token),
            Some(owner.token),
        ],
        course,
        assignment: assignment.clone(),
        material: id_of(&m["material"], "material_id"),
        spare_material: id_of(&spare["material"], "material_id"),
        session,
    }
}

pub fn rows(f: &Fixture) -> Vec<Row> {
    let (c, a, m, s) = (&f.course, &f.assignment, &f.material, &f.session);
    let unknown = Id::new();
    let row = |method: Method, path: String, body: Body, expect: [u16; 5]| Row {
        method,
        path,
        body,
        expect,
    };
    let j = Body::Json;
    vec![
        row(Method::GET, "/api/health".into(), Body::None, [200, 200, 200, 200, 200]),
        row(
            Method::POST,
            "/api/courses".into(),
            j(json!({"title": "New"})),
            [401, 403, 403, 201, 201],
        ),
        row(
            Method::GET,
            "/api/courses".into(),
            Body::None,
            [401, 200, 200, 200, 200],
        ),
        row(
            Method::POST,
            format!("/api/courses/{c}/roster"),
            j(json!({"student_ids": ["late-joiner"]})),
            [401, 403, 403, 403, 201],
        ),
        row(
            Method::POST,
            format!("/api/courses/{c}/assignments"),
            j(json!({"title": "Trees"})),
            [401, 403, 403, 403, 201],
        ),
        row(
            Method::POST,
            format!("/api/courses/{unknown}/assignments"),
            j(json!({"title": "Trees"})),
            [401, 403, 403, 404, 404],
        ),
        row(
            Method::GET,
            format!("/api/courses/{c}/assignments"),
            Body::None,
            [401, 200, 403, 403, 200],
        ),
        row(
            Method::GET,
            format!("/api/assignments/{a}"),
            Body::None,
            [401, 200, 403, 403, 200],
        ),
        row(
            Method::PUT,
            format!("/api/assignments/{a}/settings"),
            j(json!({"language": "script", "entrypoint": "main.sh"})),
            [401, 403, 403, 403, 200],
        ),
        row(
            Method::POST,
            format!("/api/assignments/{a}/materials"),
            Body::Upload {
                kind: "REMARKS",
                filename: "remarks.md".into(),
                bytes: b"Point students at the head pointer.".to_vec(),
            },
            [401, 403, 403, 403, 201],
        ),
        row(
            Method::POST,
            format!("/api/assignments/{unknown}/materials"),
            Body::Upload {
                kind: "REMARKS",
                filename: "r.md".into(),
                bytes: b"x".to_vec(),
            },
            [401, 403, 403, 404, 404],
        ),
        row(
            Method::GET,
            format!("/api/assignments/{a}/materials"),
            Body::None,
            [401, 403, 403, 403, 200],
        ),
        row(
            Method::GET,
            format!("/api/materials/{m}"),
            Body::None,
            [401, 403, 403, 403, 200],
        ),
        row(
            Method::DELETE,
            format!("/api/materials/{}", f.spare_material),
            Body::None,
            [401, 403, 403, 403, 200],
        ),
        row(
            Method::GET,
            format!("/api/assignments/{a}/events"),
            Body::None,
            [401, 403, 403, 403, 200],
        ),
        row(
            Method::GET,
            format!("/api/assignments/{unknown}/events"),
            Body::None,
            [401, 403, 403, 404, 404],
        ),
        row(
            Method::POST,
            format!("/api/assignments/{a}/sessions"),
            Body::None,
            [401, 201, 403, 403, 403],
        ),
        row(
            Method::POST,
            format!("/api/assignments/{unknown}/sessions"),
            Body::None,
            [401, 404, 404, 403, 403],
        ),
        row(
            Method::POST,
            format!("/api/sessions/{s}/files"),
            j(json!({"files": {"main.sh": "echo hi"}})),
            [401, 200, 403, 403, 403],
        ),
        row(
            Method::POST,
            format!("/api/sessions/{s}/messages"),
            j(json!({"text": "Where do I start?"})),
            [401, 200, 403, 403, 403],
        ),
        row(
            Method::POST,
            format!("/api/sessions/{unknown}/messages"),
            j(json!({"text": "hello"})),
            [401, 404, 404, 403, 403],
        ),
        row(
            Method::POST,
            format!("/api/sessions/{s}/run"),
            j(json!({})),
            [401, 200, 403, 403, 403],
        ),
        row(
            Method::GET,
            format!("/api/sessions/{s}/transcript"),
            Body::None,
            [401, 200, 403, 403, 200],
        ),
    ]
}

/// Runs every row for every principal; returns (checked cells, mismatches).
pub async fn check(f: &Fixture) -> (usize, Vec<String>) {
    let mut cells = 0;
    let mut mismatches = Vec::new();
    for row in rows(f) {
        for (col, token) in f.tokens.iter().enumerate() {
            let (status, body) = send(&f.base, token.as_deref(), row.method.clone(), &row.path, &row.body).await;
            cells += 1;
            if status != row.expect[col] {
                mismatches.push(format!(
                    "{} {} as {}: expected {}, got {} {}",
                    row.method, row.path, COLUMNS[col], row.expect[col], status, body
                ));
            }
        }
    }
    // A syntactically fine but unknown token is no token at all.
    let (status, _) = send(
        &f.base,
        Some("not-a-real-token"),
        Method::GET,
        "/api/courses",
        &Body::None,
    )
    .await;
    cells += 1;
    if status != 401 {
        mismatches.push(format!("bogus token: expected 401, got {status}"));
    }
    (cells, mismatches)
}

/// Fires `n` simultaneous messages at one session; returns the status codes.
pub async fn concurrent_messages(base: &str, token: &str, session: &Id, n: usize) -> Vec<u16> {
    let barrier = Arc::new(tokio::sync::Barrier::new(n));
    let mut tasks = Vec::new();
    for i in 0..n {
        let (base, token, barrier) = (base.to_owned(), token.to_owned(), barrier.clone());
        let path = format!("/api/sessions/{session}/messages");
        tasks.push(tokio::spawn(async move {
            barrier.wait().await;
            let body = Body::Json(json!({"text": format!("duplicate question {i}")}));
            send(&base, Some(&token), Method::POST, &path, &body).await.0
        }));
    }
    let mut codes = Vec::new();
    for t in tasks {
        codes.push(t.await.unwrap());
    }
    codes.sort();
    codes
}
