mod support;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use serde_json::{json, Value};

use coach_core::store::{canonical_json, DocumentStore, EventKind, FileStore};
use support::http::{app, TestApp};

fn code(body: &Value) -> &str {
    body["error"]["code"]
        .as_str()
        .unwrap_or_else(|| panic!("uncoded error body: {body}"))
}

fn gap_names(report: &Value) -> Vec<String> {
    report["gaps"]
        .as_array()
        .expect("gaps")
        .iter()
        .map(|g| g["skill_name"].as_str().unwrap().to_string())
        .collect()
}

async fn jane(app: &TestApp) -> (String, Value) {
    let id = app.create("Jane").await;
    let (status, bundle) = app.upload(&id, "jane_doe.txt").await;
    assert_eq!(status, StatusCode::OK, "{bundle}");
    (id, bundle)
}

#[tokio::test]
async fn create_profile_validates_name() {
    let app = app();
    let (status, body) = app
        .post("/v1/profiles", json!({ "display_name": "Jane" }))
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["display_name"], "Jane");
    assert!(body["created_at"].is_string());

    let (status, second) = app
        .post("/v1/profiles", json!({ "display_name": "Jane" }))
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_ne!(body["profile_id"], second["profile_id"]);

    let (status, body) = app
        .post("/v1/profiles", json!({ "display_name": "   " }))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_body");

    let (status, body) = app.post("/v1/profiles", json!({ "name": "Jane" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_body");
}

#[tokio::test]
async fn malformed_requests_get_coded_errors() {
    let app = app();
    let id = app.create("Jane").await;

    let broken = Request::builder()
        .method(Method::POST)
        .uri("/v1/profiles")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{\"display_name\": "))
        .unwrap();
    let (status, body) = app.raw(broken).await;
    assert!(status.is_client_error());
    assert_eq!(code(&body), "invalid_body");

    let untyped = Request::builder()
        .method(Method::POST)
        .uri(format!("/v1/profiles/{id}/chat"))
        .body(Body::from("{\"text\": \"hi\"}"))
        .unwrap();
    let (status, body) = app.raw(untyped).await;
    assert!(status.is_client_error());
    assert_eq!(code(&body), "invalid_body");

    let not_multipart = Request::builder()
        .method(Method::POST)
        .uri(format!("/v1/profiles/{id}/resume"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{}"))
        .unwrap();
    let (status, body) = app.raw(not_multipart).await;
    assert!(status.is_client_error());
    assert_eq!(code(&body), "invalid_body");

    let (status, body) = app
        .put(
            &format!("/v1/profiles/{id}/courses/c-1/status"),
            json!({ "status": "abandoned" }),
        )
        .await;
    assert!(status.is_client_error());
    assert_eq!(code(&body), "invalid_body");

    let (status, body) = app.get("/v1/nowhere").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(code(&body), "not_found");

    let (status, body) = app.call(Method::DELETE, "/v1/profiles", None).await;
    assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
    assert_eq!(code(&body), "method_not_allowed");

    let (status, body) = app
        .post(
            &format!("/v1/profiles/{id}/qa"),
            json!({ "question_id": "x" }),
        )
        .await;
    assert!(status.is_client_error());
    assert_eq!(code(&body), "invalid_body");
}

#[tokio::test]
async fn unknown_profile_is_404_everywhere() {
    let app = app();
    for path in [
        "",
        "/career-path",
        "/skill-report",
        "/recommendations",
        "/qa",
        "/chat",
        "/takeaways",
    ] {
        let (status, body) = app.get(&format!("/v1/profiles/p-999999{path}")).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{path}");
        assert_eq!(code(&body), "unknown_profile", "{path}");
    }
    let (status, body) = app.upload("p-999999", "jane_doe.txt").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(code(&body), "unknown_profile");

    let (status, body) = app.get("/v1/profiles/bad.id/skill-report").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(code(&body), "unknown_profile");
}

#[tokio::test]
async fn derived_views_need_a_resume() {
    let app = app();
    let id = app.create("Jane").await;
    let (status, body) = app.get(&format!("/v1/profiles/{id}/career-path")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&body), "no_mapping_yet");
    for path in ["skill-report", "recommendations", "takeaways"] {
        let (status, body) = app.get(&format!("/v1/profiles/{id}/{path}")).await;
        assert_eq!(status, StatusCode::CONFLICT, "{path}");
        assert_eq!(code(&body), "no_report_yet", "{path}");
    }
}

#[tokio::test]
async fn empty_and_missing_uploads() {
    let app = app();
    let id = app.create("Jane").await;
    let (status, body) = app.upload_bytes(&id, "empty.txt", b"").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(code(&body), "empty_document");
    let (status, body) = app.upload_bytes(&id, "blank.txt", b"  \n\n\t ").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(code(&body), "empty_document");

    let wrong_field = Request::builder()
        .method(Method::POST)
        .uri(format!("/v1/profiles/{id}/resume"))
        .header(
            header::CONTENT_TYPE,
            "multipart/form-data; boundary=coach-test-boundary",
        )
        .body(Body::from(support::http::multipart(
            "attachment",
            "a.txt",
            b"Jane",
        )))
        .unwrap();
    let (status, body) = app.raw(wrong_field).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_body");

    let profile = app.service.profile(&id).unwrap();
    assert!(profile.resumes.is_empty());
}

#[tokio::test]
async fn oversized_upload_is_rejected() {
    let app = app();
    let id = app.create("Jane").await;
    let big = vec![b'a'; coach_server::routes::MAX_UPLOAD_BYTES + 1];
    let (status, body) = app.upload_bytes(&id, "big.txt", &big).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(code(&body), "payload_too_large");
}

#[tokio::test]
async fn resume_upload_maps_and_recommends() {
    let app = app();
    let (id, bundle) = jane(&app).await;
    assert_eq!(bundle["mapping"]["node_id"], "software-engineer-ii");
    assert_eq!(
        gap_names(&bundle["report"]),
        ["System Design", "Observability", "Kubernetes"]
    );

    let (status, path) = app.get(&format!("/v1/profiles/{id}/career-path")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(path["current_node"]["node_id"], "software-engineer-ii");
    let ids = |v: &Value| -> Vec<String> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|n| n["node_id"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(ids(&path["immediate"]), ["senior-software-engineer"]);
    assert_eq!(
        ids(&path["advanced"]),
        ["staff-software-engineer", "engineering-manager"]
    );

    let (status, recs) = app.get(&format!("/v1/profiles/{id}/recommendations")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(recs["courses"].as_array().unwrap().len(), 5);
    assert_eq!(recs["courses"], bundle["recommendations"]);
    let tracked: Vec<&Value> = recs["tracker"].as_array().unwrap().iter().collect();
    assert_eq!(tracked.len(), 5);
    assert!(tracked.iter().all(|t| t["status"] == "recommended"));

    let (status, report) = app.get(&format!("/v1/profiles/{id}/skill-report")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report, bundle["report"]);
}

#[tokio::test]
async fn unmappable_resume_offers_fallback_question() {
    let app = app();
    let id = app.create("Marco").await;
    let (status, body) = app.upload(&id, "pastry_chef.txt").await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(code(&body), "unmappable_role");
    let detail = &body["error"]["detail"];
    assert!(detail["similarity"].as_f64().unwrap() < detail["threshold"].as_f64().unwrap());
    assert_eq!(detail["fallback"]["question_id"], "generic-current-role");

    let profile = app.service.profile(&id).unwrap();
    assert_eq!(profile.resumes.len(), 1);
    assert!(profile.mapping.is_none());

    let (status, qa) = app.get(&format!("/v1/profiles/{id}/qa")).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = qa["questions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["question_id"].as_str().unwrap())
        .collect();
    assert!(ids.contains(&"generic-current-role"));
    assert!(qa["questions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|q| q["role_node_id"].is_null()));

    let (status, outcome) = app
        .post(
            &format!("/v1/profiles/{id}/qa"),
            json!({ "question_id": "generic-current-role", "answer": support::FALLBACK_ANSWER }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{outcome}");
    assert_eq!(
        outcome["bundle"]["mapping"]["node_id"],
        "software-engineer-ii"
    );
    let (status, _) = app.get(&format!("/v1/profiles/{id}/career-path")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn leaf_role_uses_its_own_requirements() {
    let app = app();
    let id = app.create("Marco").await;
    let (status, _) = app.upload(&id, "pastry_chef.txt").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, outcome) = app
        .post(
            &format!("/v1/profiles/{id}/qa"),
            json!({ "question_id": "generic-current-role", "answer": "Distinguished Engineer" }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{outcome}");
    assert_eq!(
        outcome["bundle"]["mapping"]["node_id"],
        "distinguished-engineer"
    );
    assert_eq!(outcome["bundle"]["mapping"]["similarity"], 1.0);

    let (_, path) = app.get(&format!("/v1/profiles/{id}/career-path")).await;
    assert_eq!(path["immediate"], json!([]));
    assert_eq!(path["advanced"], json!([]));

    let report = &outcome["bundle"]["report"];
    assert!(!report["gaps"].as_array().unwrap().is_empty());
    assert!(report["gaps"]
        .as_array()
        .unwrap()
        .iter()
        .all(|g| g["target_role_node_id"] == "distinguished-engineer"));
}

#[tokio::test]
async fn course_tracker_enforces_transitions() {
    let app = app();
    let (id, bundle) = jane(&app).await;
    let course = bundle["recommendations"][0]["course"]["course_id"]
        .as_str()
        .unwrap()
        .to_string();
    let uri = format!("/v1/profiles/{id}/courses/{course}/status");

    let (status, tracked) = app.put(&uri, json!({ "status": "in_progress" })).await;
    assert_eq!(status, StatusCode::OK, "{tracked}");
    assert_eq!(tracked["status"], "in_progress");
    let (status, tracked) = app.put(&uri, json!({ "status": "completed" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tracked["status"], "completed");

    let (status, body) = app.put(&uri, json!({ "status": "in_progress" })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&body), "illegal_transition");
    assert_eq!(body["error"]["detail"]["from"], "completed");
    assert_eq!(body["error"]["detail"]["to"], "in_progress");

    let (status, body) = app
        .put(
            &format!("/v1/profiles/{id}/courses/c-000000000000/status"),
            json!({ "status": "completed" }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(code(&body), "unknown_course");

    let (_, recs) = app.get(&format!("/v1/profiles/{id}/recommendations")).await;
    let statuses: Vec<&str> = recs["tracker"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|t| t["course_id"] == course.as_str())
        .map(|t| t["status"].as_str().unwrap())
        .collect();
    assert_eq!(statuses, ["completed"]);
}

#[tokio::test]
async fn chat_returns_the_model_reply() {
    let app = app();
    let (id, _) = jane(&app).await;
    let (status, _) = app.get(&format!("/v1/profiles/{id}/qa")).await;
    assert_eq!(status, StatusCode::OK);

    let (status, turn) = app
        .post(
            &format!("/v1/profiles/{id}/chat"),
            json!({ "text": support::CHAT_MESSAGE }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{turn}");
    let expected = support::json_fixture("responses/chat_reply.json");
    assert_eq!(turn["speaker"], "coach");
    assert_eq!(turn["text"], expected["reply"]);

    let (_, history) = app.get(&format!("/v1/profiles/{id}/chat")).await;
    let speakers: Vec<&str> = history
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["speaker"].as_str().unwrap())
        .collect();
    assert_eq!(speakers, ["coach", "candidate", "coach"]);
    assert_eq!(history[1]["text"], support::CHAT_MESSAGE);

    let (status, body) = app
        .post(&format!("/v1/profiles/{id}/chat"), json!({ "text": "  " }))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_input");
}

#[tokio::test]
async fn qa_questions_are_role_specific_and_stable() {
    let app = app();
    let (id, _) = jane(&app).await;
    let (_, first) = app.get(&format!("/v1/profiles/{id}/qa")).await;
    let (_, second) = app.get(&format!("/v1/profiles/{id}/qa")).await;
    assert_eq!(first, second);
    let questions = first["questions"].as_array().unwrap();
    assert!((3..=7).contains(&questions.len()));
    assert!(questions
        .iter()
        .all(|q| q["role_node_id"] == "software-engineer-ii"));

    let (status, body) = app
        .post(
            &format!("/v1/profiles/{id}/qa"),
            json!({ "question_id": "nope", "answer": "x" }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(code(&body), "unknown_question");
    let (status, body) = app
        .post(
            &format!("/v1/profiles/{id}/qa"),
            json!({ "question_id": support::KUBERNETES_QUESTION, "answer": "" }),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_input");
}

#[tokio::test]
async fn answers_are_revised_not_replaced() {
    let app = app();
    let (id, before) = jane(&app).await;
    app.get(&format!("/v1/profiles/{id}/qa")).await;
    let uri = format!("/v1/profiles/{id}/qa");

    let (status, unrelated) = app
        .post(
            &uri,
            json!({ "question_id": "preference-learning", "answer": "Short video courses." }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{unrelated}");
    assert_eq!(
        gap_names(&unrelated["bundle"]["report"]),
        gap_names(&before["report"])
    );

    let (status, first) = app
        .post(
            &uri,
            json!({ "question_id": support::KUBERNETES_QUESTION, "answer": "A little." }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["revision"], 0);

    let (_, second) = app
        .post(
            &uri,
            json!({
                "question_id": support::KUBERNETES_QUESTION,
                "answer": support::KUBERNETES_ANSWER,
                "attests_advanced": true,
            }),
        )
        .await;
    assert_eq!(second["revision"], 1);
    assert_eq!(
        gap_names(&second["bundle"]["report"]),
        ["System Design", "Observability"]
    );

    let (_, qa) = app.get(&uri).await;
    let probe = qa["questions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|q| q["question_id"] == support::KUBERNETES_QUESTION)
        .unwrap();
    assert_eq!(probe["answer"], support::KUBERNETES_ANSWER);
    assert_eq!(probe["revisions"], 2);
}

#[tokio::test]
async fn second_resume_changes_report_and_reupload_does_not() {
    let app = app();
    let (id, first) = jane(&app).await;

    let (status, mut same) = app.upload(&id, "jane_doe.txt").await;
    assert_eq!(status, StatusCode::OK);
    let mut first_stripped = first.clone();
    support::strip_timestamps(&mut same);
    support::strip_timestamps(&mut first_stripped);
    assert_eq!(same, first_stripped);
    assert_eq!(app.service.profile(&id).unwrap().resumes.len(), 2);

    let (status, newer) = app.upload(&id, "jane_doe_2025.txt").await;
    assert_eq!(status, StatusCode::OK, "{newer}");
    assert_ne!(newer["report"], first["report"]);
    let profile = app.service.profile(&id).unwrap();
    assert_eq!(profile.resumes.len(), 3);
    let ids: std::collections::HashSet<_> = profile
        .resumes
        .iter()
        .map(|r| r.document_id.clone())
        .collect();
    assert_eq!(ids.len(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writers_lose_no_updates() {
    let app = std::sync::Arc::new(app());
    let (id, _) = jane(&app).await;
    let (_, qa) = app.get(&format!("/v1/profiles/{id}/qa")).await;
    let questions: Vec<String> = qa["questions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["question_id"].as_str().unwrap().to_string())
        .collect();

    let uri = format!("/v1/profiles/{id}/qa");
    let mut tasks = tokio::task::JoinSet::new();
    for round in 0..3 {
        for q in &questions {
            let (app, uri, q) = (app.clone(), uri.clone(), q.clone());
            tasks.spawn(async move {
                app.post(
                    &uri,
                    json!({ "question_id": q, "answer": format!("answer {round}") }),
                )
                .await
            });
        }
    }
    while let Some(joined) = tasks.join_next().await {
        let (status, body) = joined.unwrap();
        assert_eq!(status, StatusCode::OK, "{body}");
    }

    let profile = app.service.profile(&id).unwrap();
    assert_eq!(profile.qa.entries.len(), questions.len() * 3);
    for q in &questions {
        let mut revisions: Vec<u32> = profile.qa.revisions(q).iter().map(|e| e.revision).collect();
        revisions.sort_unstable();
        assert_eq!(revisions, [0, 1, 2]);
    }
    let answered = app
        .service
        .store
        .events(&id)
        .unwrap()
        .iter()
        .filter(|e| e.kind == EventKind::AnswerRecorded)
        .count();
    assert_eq!(answered, questions.len() * 3);
}

#[tokio::test]
async fn file_store_round_trip_is_byte_identical() {
    let app = app();
    let (id, _) = jane(&app).await;
    app.get(&format!("/v1/profiles/{id}/qa")).await;
    app.post(
        &format!("/v1/profiles/{id}/qa"),
        json!({ "question_id": support::KUBERNETES_QUESTION, "answer": support::KUBERNETES_ANSWER }),
    )
    .await;

    let on_disk =
        std::fs::read_to_string(app.store_dir.path().join(format!("profiles/{id}.json"))).unwrap();
    let store = FileStore::open(app.store_dir.path()).unwrap();
    let loaded = store.load(&id).unwrap().expect("stored profile");
    assert_eq!(canonical_json(&loaded).unwrap(), on_disk);

    let copy = tempfile::tempdir().unwrap();
    let other = FileStore::open(copy.path()).unwrap();
    other.save(&loaded).unwrap();
    let copied = std::fs::read_to_string(copy.path().join(format!("profiles/{id}.json"))).unwrap();
    assert_eq!(copied, on_disk);

    let (_, over_http) = app.get(&format!("/v1/profiles/{id}")).await;
    assert_eq!(over_http, serde_json::to_value(&loaded).unwrap());
}

#[tokio::test]
async fn event_log_has_one_event_per_mutation() {
    let app = app();
    let id = app.create("Jane").await;
    let mut expected = vec![EventKind::ProfileUpserted];

    app.upload(&id, "jane_doe.txt").await;
    expected.extend([EventKind::ResumeUploaded, EventKind::Recalibrated]);
    app.get(&format!("/v1/profiles/{id}/qa")).await;
    expected.push(EventKind::QuestionsGenerated);
    app.get(&format!("/v1/profiles/{id}/qa")).await;
    app.post(
        &format!("/v1/profiles/{id}/qa"),
        json!({ "question_id": support::KUBERNETES_QUESTION, "answer": support::KUBERNETES_ANSWER }),
    )
    .await;
    expected.extend([EventKind::AnswerRecorded, EventKind::Recalibrated]);
    app.post(&format!("/v1/profiles/{id}/chat"), json!({ "text": "  " }))
        .await;
    let (_, recs) = app.get(&format!("/v1/profiles/{id}/recommendations")).await;
    let course = recs["courses"][0]["course"]["course_id"]
        .as_str()
        .unwrap()
        .to_string();
    app.put(
        &format!("/v1/profiles/{id}/courses/{course}/status"),
        json!({ "status": "completed" }),
    )
    .await;
    expected.push(EventKind::CourseStatusChanged);
    app.put(
        &format!("/v1/profiles/{id}/courses/{course}/status"),
        json!({ "status": "in_progress" }),
    )
    .await;

    let events = app.service.store.events(&id).unwrap();
    let kinds: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, expected);
    let ids: Vec<u64> = events.iter().map(|e| e.event_id).collect();
    assert_eq!(ids, (1..=expected.len() as u64).collect::<Vec<_>>());
    assert!(events.windows(2).all(|w| w[0].at <= w[1].at));

    let log =
        std::fs::read_to_string(app.store_dir.path().join(format!("events/{id}.jsonl"))).unwrap();
    assert_eq!(log.lines().count(), expected.len());
}

#[tokio::test]
async fn health_and_tree() {
    let app = app();
    let (status, body) = app.get("/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let (status, tree) = app.get("/v1/career-tree").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree, support::json_fixture("career_tree.json"));
}
