use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;
use leaftutor_core::retrieval::RetrievalQuery;
use leaftutor_core::service::RunRequest;
use leaftutor_core::tutor::{LlmProvider, PromptBundle, ScriptedProvider, SectionLabel};
use leaftutor_core::{AssignmentSettings, ExecStatus, Id, MaterialKind, Principal, Result, Role, TutorService};
use parking_lot::Mutex;
use tempfile::TempDir;

/// Scripted replies plus a record of every bundle it was asked about.
struct Recording {
    inner: ScriptedProvider,
    seen: Mutex<Vec<PromptBundle>>,
}

#[async_trait]
impl LlmProvider for Recording {
    fn name(&self) -> &str {
        "recording"
    }

    async fn complete(&self, bundle: &PromptBundle) -> Result<String> {
        self.seen.lock().push(bundle.clone());
        self.inner.complete(bundle).await
    }
}

struct World {
    _dir: TempDir,
    svc: TutorService,
    provider: Arc<Recording>,
    teacher: Principal,
    student: Principal,
    assignment: Id,
}

const INSTRUCTIONS: &str = "Implement removeDuplicates for the linked list.\n\nPrint the list contents in brackets.";
const SOLUTION: &str = "public String toString() { return \"[secret solution body]\"; }";

async fn world() -> World {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(Recording {
        inner: ScriptedProvider::new([
            ("list", "Think about how println prints an object."),
            ("run", "Look at stderr."),
        ]),
        seen: Mutex::new(Vec::new()),
    });
    let svc = TutorService::with_provider(dir.path().join("store"), provider.clone()).unwrap();
    let (instr, _) = svc.bootstrap_instructor("Ada").unwrap();
    let teacher = Principal::instructor(instr.instructor_id);
    let student = Principal::student(Id::parse("s-1").unwrap());
    let course = svc.create_course(&teacher, "CS2").unwrap();
    svc.add_students(&teacher, &course.course_id, std::slice::from_ref(&student.id))
        .unwrap();
    let settings = AssignmentSettings {
        language: "script".into(),
        entrypoint: "main.sh".into(),
        expected_output: Some("hello\n".into()),
        ..Default::default()
    };
    let a = svc
        .create_assignment(&teacher, &course.course_id, "Lists", settings)
        .unwrap();
    svc.upload_material(
        &teacher,
        &a.assignment_id,
        "instructions",
        "a.md",
        INSTRUCTIONS.as_bytes(),
    )
    .await
    .unwrap();
    svc.upload_material(&teacher, &a.assignment_id, "SOLUTION", "Sol.java", SOLUTION.as_bytes())
        .await
        .unwrap();
    World {
        _dir: dir,
        svc,
        provider,
        teacher,
        student,
        assignment: a.assignment_id,
    }
}

#[tokio::test]
async fn reupload_is_idempotent_and_changes_replace() {
    let w = world().await;
    let again = w
        .svc
        .upload_material(
            &w.teacher,
            &w.assignment,
            "INSTRUCTIONS",
            "a.md",
            INSTRUCTIONS.as_bytes(),
        )
        .await
        .unwrap();
    assert!(!again.created);
    assert_eq!(again.chunks_created, 0);
    assert_eq!(w.svc.list_materials(&w.teacher, &w.assignment).unwrap().len(), 2);

    let changed = w
        .svc
        .upload_material(&w.teacher, &w.assignment, "INSTRUCTIONS", "a.md", b"Brand new text.")
        .await
        .unwrap();
    assert!(!changed.created);
    assert_eq!(changed.chunks_created, 1);
    assert_eq!(changed.material.material_id, again.material.material_id);
    let chunks = w.svc.store().index.chunks_for_material(&changed.material.material_id);
    assert_eq!(chunks.len(), 1);
    assert_eq!(chunks[0].text, "Brand new text.");
    assert_eq!(w.svc.list_materials(&w.teacher, &w.assignment).unwrap().len(), 2);
}

#[tokio::test]
async fn upload_validation_order() {
    let w = world().await;
    let err = |r: Result<_>| r.map(|_: leaftutor_core::MaterialUpload| ()).unwrap_err().code();
    let up = |kind: &'static str, bytes: Vec<u8>| {
        let w = &w;
        async move {
            w.svc
                .upload_material(&w.teacher, &w.assignment, kind, "f.txt", &bytes)
                .await
        }
    };
    assert_eq!(err(up("grading", b"x".to_vec()).await), "UNSUPPORTED_KIND");
    assert_eq!(err(up("LECTURE", vec![0xff, 0xfe]).await), "NOT_TEXT");
    assert_eq!(err(up("LECTURE", vec![b'a'; 2 * 1024 * 1024 + 1]).await), "TOO_LARGE");
    assert_eq!(
        w.svc
            .upload_material(&w.student, &w.assignment, "LECTURE", "f.txt", b"x")
            .await
            .map(|_| ())
            .unwrap_err()
            .code(),
        "FORBIDDEN"
    );
}

#[tokio::test]
async fn turn_appends_two_turns_and_one_event() {
    let w = world().await;
    let s = w.svc.start_session(&w.student, &w.assignment).unwrap();
    let reply = w
        .svc
        .tutor_turn(&w.student, &s.session_id, "Why does my list print oddly?")
        .await
        .unwrap();
    assert_eq!(reply.role, Role::Tutor);
    assert_eq!(reply.index, 1);

    let t = w.svc.transcript(&w.student, &s.session_id).unwrap();
    assert_eq!(t.session.turns.len(), 2);
    assert!(t.session.turns_well_formed());
    assert_eq!(t.events.len(), 1);
    let ev = &t.events[0];
    assert_eq!(ev.turn_index, 0);
    assert_eq!(ev.query_text, "Why does my list print oddly?");
    assert_eq!(ev.response_chars, reply.text.chars().count());
    assert!(!ev.retrieved_chunk_ids.is_empty());

    // Instructions reach the prompt; the solution is withheld by default.
    let seen = w.provider.seen.lock();
    let bundle = &seen[0];
    assert!(bundle.section(SectionLabel::Instructions).chars() > 0);
    let all = format!("{}{}{}", bundle.system_text, bundle.render_context(), bundle.user_text);
    assert!(!all.contains("secret solution body"));
    assert_eq!(bundle.total_chars, ev.prompt_chars);
}

#[tokio::test]
async fn provider_failure_keeps_question_without_event() {
    let w = world().await;
    let s = w.svc.start_session(&w.student, &w.assignment).unwrap();
    let err = w
        .svc
        .tutor_turn(&w.student, &s.session_id, "nothing matches this")
        .await
        .unwrap_err();
    assert_eq!(err.code(), "SCRIPT_MISS");
    let t = w.svc.transcript(&w.student, &s.session_id).unwrap();
    assert_eq!(t.session.turns.len(), 1);
    assert_eq!(t.session.turns[0].role, Role::Student);
    assert!(t.events.is_empty());
    assert!(w.svc.store().events.read_all().unwrap().is_empty());

    // The session stays usable.
    w.svc
        .tutor_turn(&w.student, &s.session_id, "my list again")
        .await
        .unwrap();
    let t = w.svc.transcript(&w.student, &s.session_id).unwrap();
    assert_eq!(t.session.turns.len(), 3);
    assert!(t.session.turns_well_formed());
    assert_eq!(t.events.len(), 1);
    assert_eq!(t.events[0].turn_index, 1);
}

#[tokio::test]
async fn rejected_turns_leave_no_trace() {
    let w = world().await;
    let s = w.svc.start_session(&w.student, &w.assignment).unwrap();
    assert_eq!(
        w.svc
            .tutor_turn(&w.student, &s.session_id, "   ")
            .await
            .unwrap_err()
            .code(),
        "EMPTY_QUERY"
    );
    assert_eq!(
        w.svc
            .tutor_turn(&w.student, &Id::new(), "my list")
            .await
            .unwrap_err()
            .code(),
        "UNKNOWN_SESSION"
    );
    let other = Principal::student(Id::parse("s-2").unwrap());
    assert_eq!(
        w.svc
            .tutor_turn(&other, &s.session_id, "my list")
            .await
            .unwrap_err()
            .code(),
        "FORBIDDEN"
    );
    assert!(w.svc.store().events.read_all().unwrap().is_empty());
    assert!(w
        .svc
        .transcript(&w.student, &s.session_id)
        .unwrap()
        .session
        .turns
        .is_empty());
}

#[tokio::test]
async fn roster_gates_sessions() {
    let w = world().await;
    let outsider = Principal::student(Id::parse("s-9").unwrap());
    assert_eq!(
        w.svc.start_session(&outsider, &w.assignment).unwrap_err().code(),
        "FORBIDDEN"
    );
    assert_eq!(
        w.svc.start_session(&w.student, &Id::new()).unwrap_err().code(),
        "NOT_FOUND"
    );
    assert_eq!(
        w.svc.start_session(&w.teacher, &w.assignment).unwrap_err().code(),
        "FORBIDDEN"
    );
}

#[tokio::test]
async fn run_result_reaches_next_prompt() {
    let w = world().await;
    let s = w.svc.start_session(&w.student, &w.assignment).unwrap();
    let files = BTreeMap::from([("main.sh".to_owned(), "echo hi; echo oops >&2".to_owned())]);
    w.svc.put_files(&w.student, &s.session_id, files).unwrap();
    let r = w
        .svc
        .run(&w.student, &s.session_id, &RunRequest::default())
        .await
        .unwrap();
    assert_eq!(r.status, ExecStatus::WrongOutput);
    assert_eq!(r.run_stdout, "hi\n");
    let stored = w.svc.transcript(&w.student, &s.session_id).unwrap().session;
    assert_eq!(stored.last_execution.as_ref(), Some(&r));

    w.svc
        .tutor_turn(&w.student, &s.session_id, "what happened in my run?")
        .await
        .unwrap();
    let seen = w.provider.seen.lock();
    let exec = seen[0].section(SectionLabel::Execution);
    let text: String = exec.parts.iter().map(|p| p.text.as_str()).collect();
    assert!(text.contains("WRONG_OUTPUT"), "{text}");
    assert!(text.contains("oops"), "{text}");
    let code: String = seen[0]
        .section(SectionLabel::Code)
        .parts
        .iter()
        .map(|p| p.text.as_str())
        .collect();
    assert!(code.contains("echo hi"));
}

#[tokio::test]
async fn run_with_missing_entrypoint_is_invalid() {
    let w = world().await;
    let s = w.svc.start_session(&w.student, &w.assignment).unwrap();
    let err = w
        .svc
        .run(&w.student, &s.session_id, &RunRequest::default())
        .await
        .unwrap_err();
    assert_eq!(err.code(), "INVALID_JOB");
}

#[tokio::test]
async fn retrieval_needs_a_known_assignment() {
    let w = world().await;
    let err = w
        .svc
        .retrieve(&RetrievalQuery::new(Id::new(), "list"))
        .await
        .unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_ASSIGNMENT");
    let mut q = RetrievalQuery::new(w.assignment.clone(), "linked list removeDuplicates");
    q.kind_filter = Some([MaterialKind::Instructions].into());
    let hits = w.svc.retrieve(&q).await.unwrap();
    assert!(!hits.is_empty());
    assert!(hits.iter().all(|h| h.source.kind == MaterialKind::Instructions));
}

#[tokio::test]
async fn events_page_in_append_order() {
    let w = world().await;
    let s = w.svc.start_session(&w.student, &w.assignment).unwrap();
    for i in 0..5 {
        w.svc
            .tutor_turn(&w.student, &s.session_id, &format!("list question {i}"))
            .await
            .unwrap();
    }
    let p1 = w.svc.assignment_events(&w.teacher, &w.assignment, None, 2).unwrap();
    let p2 = w
        .svc
        .assignment_events(&w.teacher, &w.assignment, p1.next_cursor.as_deref(), 2)
        .unwrap();
    let p3 = w
        .svc
        .assignment_events(&w.teacher, &w.assignment, p2.next_cursor.as_deref(), 2)
        .unwrap();
    assert_eq!(p3.next_cursor, None);
    let queries: Vec<_> = [p1, p2, p3]
        .into_iter()
        .flat_map(|p| p.events)
        .map(|e| e.query_text)
        .collect();
    assert_eq!(
        queries,
        (0..5).map(|i| format!("list question {i}")).collect::<Vec<_>>()
    );
    assert_eq!(
        w.svc
            .assignment_events(&w.student, &w.assignment, None, 10)
            .unwrap_err()
            .code(),
        "FORBIDDEN"
    );
    assert_eq!(
        w.svc
            .assignment_events(&w.teacher, &w.assignment, Some("zz"), 10)
            .unwrap_err()
            .code(),
        "VALIDATION"
    );
}

#[tokio::test]
async fn state_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("store");
    let provider = Arc::new(ScriptedProvider::new([("q", "a")]));
    let (teacher, assignment, session, token) = {
        let svc = TutorService::with_provider(&root, provider.clone()).unwrap();
        let (instr, token) = svc.bootstrap_instructor("Ada").unwrap();
        let teacher = Principal::instructor(instr.instructor_id);
        let student = Principal::student(Id::parse("s-1").unwrap());
        let c = svc.create_course(&teacher, "c").unwrap();
        svc.add_students(&teacher, &c.course_id, std::slice::from_ref(&student.id))
            .unwrap();
        let a = svc
            .create_assignment(&teacher, &c.course_id, "a", Default::default())
            .unwrap();
        svc.upload_material(
            &teacher,
            &a.assignment_id,
            "LECTURE",
            "l.md",
            "word ".repeat(600).as_bytes(),
        )
        .await
        .unwrap();
        let s = svc.start_session(&student, &a.assignment_id).unwrap();
        svc.tutor_turn(&student, &s.session_id, "q").await.unwrap();
        (teacher, a.assignment_id, s.session_id, token.token)
    };
    let svc = TutorService::with_provider(&root, provider).unwrap();
    assert_eq!(svc.authenticate(&token).unwrap(), teacher);
    assert_eq!(svc.store().index.chunk_count(), 4);
    let t = svc.transcript(&teacher, &session).unwrap();
    assert_eq!(t.session.turns.len(), 2);
    assert_eq!(t.events.len(), 1);
    let again = svc
        .upload_material(&teacher, &assignment, "LECTURE", "l.md", "word ".repeat(600).as_bytes())
        .await
        .unwrap();
    assert_eq!(again.chunks_created, 0);
}
