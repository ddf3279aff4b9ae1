use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Duration;

use leaftutor_client::Client;
use leaftutor_core::tutor::ScriptedProvider;
use leaftutor_core::TutorService;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_leaftutor"));
    c.env_remove("LEAFTUTOR_TOKEN")
        .env_remove("LEAFTUTOR_SERVER")
        .env("RUST_LOG", "error");
    c
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[tokio::test]
async fn bootstrap_prints_distinct_working_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        bin()
            .args(["bootstrap-instructor", "--name", "Ada", "--store"])
            .arg(dir.path())
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", stderr(&a));
    let (ta, tb) = (stdout(&a).trim().to_owned(), stdout(&b).trim().to_owned());
    assert_eq!(ta.len(), 43);
    assert_ne!(ta, tb);

    let svc = Arc::new(TutorService::with_provider(dir.path(), Arc::new(ScriptedProvider::default())).unwrap());
    let server = leaftutor_server::spawn_local(svc).await.unwrap();
    let course = Client::new(server.base_url())
        .with_token(ta)
        .create_course("Intro")
        .await
        .unwrap();
    assert_eq!(course.title, "Intro");
}

#[test]
fn issue_token_validates_the_student_id() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["issue-token", "--student", "s-1", "--store"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert_eq!(stdout(&ok).trim().len(), 43);
    let bad = bin()
        .args(["issue-token", "--student", "../x", "--store"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ingest_rejects_bad_kind_before_any_request() {
    let file = tempfile::NamedTempFile::new().unwrap();
    // Port 9 has no listener; a network attempt would fail with exit 1.
    let out = bin()
        .args([
            "ingest",
            "--server",
            "http://127.0.0.1:9",
            "--token",
            "t",
            "--assignment",
            "a1",
            "--kind",
            "grading",
        ])
        .arg(file.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("grading"));
}

#[tokio::test]
async fn ingest_reports_counts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let svc =
        Arc::new(TutorService::with_provider(dir.path().join("store"), Arc::new(ScriptedProvider::default())).unwrap());
    let (_, token) = svc.bootstrap_instructor("t").unwrap();
    let server = leaftutor_server::spawn_local(svc).await.unwrap();
    let client = Client::new(server.base_url()).with_token(&token.token);
    let c = client.create_course("c").await.unwrap();
    let a = client
        .create_assignment(&c.course_id, "a", Default::default())
        .await
        .unwrap();
    let instructions = fixtures().join("materials/linked_list/instructions.md");
    let lecture = fixtures().join("materials/linked_list/lecture_linked_lists.md");

    let ingest = |paths: Vec<PathBuf>| {
        let mut cmd = bin();
        cmd.args([
            "ingest",
            "--server",
            &server.base_url(),
            "--assignment",
            a.assignment_id.as_str(),
            "--kind",
            "lecture",
        ])
        .env("LEAFTUTOR_TOKEN", &token.token)
        .args(paths);
        async move {
            tokio::task::spawn_blocking(move || cmd.output().unwrap())
                .await
                .unwrap()
        }
    };
    let first = ingest(vec![instructions.clone(), lecture.clone()]).await;
    assert!(first.status.success(), "{}", stderr(&first));
    let lines: Vec<String> = stdout(&first).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 2);
    assert!(
        lines
            .iter()
            .all(|l| l.ends_with(" chunks") && !l.ends_with(": 0 chunks")),
        "{lines:?}"
    );

    let second = ingest(vec![instructions.clone(), lecture]).await;
    assert!(second.status.success());
    assert!(
        stdout(&second).lines().all(|l| l.ends_with(": 0 chunks")),
        "{}",
        stdout(&second)
    );

    let missing = ingest(vec![instructions, dir.path().join("nope.md")]).await;
    assert_eq!(missing.status.code(), Some(1));
    assert!(stdout(&missing).contains("nope.md: error"));
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    std::fs::write(dir.join("script.json"), r#"{"hello": "Hi! What are you working on?"}"#).unwrap();
    let p = dir.join("s.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn empty_steps_are_scenario_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        dir.path(),
        r#"{"name": "x", "script_path": "script.json", "steps": []}"#,
    );
    let out = bin().arg("replay").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("SCENARIO_INVALID"), "{}", stderr(&out));
}

#[test]
fn failed_expectation_exits_one_with_diff() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        dir.path(),
        r#"{"name": "x", "script_path": "script.json",
            "steps": [{"say": "hello there"}, {"expect_reply_contains": "recursion"}]}"#,
    );
    let out = bin().arg("replay").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report = stdout(&out);
    assert!(
        report.contains("expect reply contains \"recursion\" ... FAIL: reply was"),
        "{report}"
    );
}

#[test]
fn replay_reports_are_byte_identical() {
    let scenarios: Vec<PathBuf> = [
        "script/wrong_output.json",
        "script/runtime.json",
        "logical.json",
        "code_detail.json",
    ]
    .iter()
    .map(|s| fixtures().join("scenarios").join(s))
    .collect();
    let run = || bin().arg("replay").args(&scenarios).output().unwrap();
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}{}", stdout(&a), stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("scenario wrong_output: PASS (pass 3, fail 0, skipped 0)"));
}

#[test]
fn serve_answers_health_checks() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut child = bin()
        .args(["serve", "--listen", &format!("127.0.0.1:{port}"), "--store"])
        .arg(dir.path())
        .spawn()
        .unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let client = Client::new(format!("http://127.0.0.1:{port}"));
    let healthy = rt.block_on(async {
        for _ in 0..100 {
            if client.health().await.is_ok() {
                return true;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        false
    });
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(healthy);
    assert!(dir.path().join("store.meta").exists());
}
