use std::path::PathBuf;
use std::sync::Arc;

use coach_core::courses::{
    course_id_for_url, index_courses, ingest_csv, search_vector_with, ScanMode, VectorCollection,
    DEFAULT_KEYWORDS,
};
use coach_core::embeddings::{Embedder, HashEmbedder};
use coach_core::gateway::{Gateway, StubProvider, StubScript};
use coach_core::ingest::{extract_text, IngestError, MediaKind};
use coach_core::templates::Templates;
use coach_core::time::Timestamp;

fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(path)
}

fn read(path: &str) -> Vec<u8> {
    std::fs::read(fixture(path)).unwrap()
}

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[test]
fn pdf_and_text_resumes_carry_the_same_words() {
    let at = Timestamp::from_millis(0);
    let txt = read("resume/jane_doe.txt");
    let pdf = read("resume/jane_doe.pdf");
    let from_txt = extract_text(
        "jane_doe.txt",
        &txt,
        MediaKind::detect("jane_doe.txt", &txt),
        at,
    )
    .unwrap();
    let from_pdf = extract_text("upload", &pdf, MediaKind::detect("upload", &pdf), at).unwrap();
    assert_eq!(from_pdf.media_kind, MediaKind::Pdf);
    assert_eq!(
        words(&from_pdf.extracted_text),
        words(&from_txt.extracted_text)
    );
    assert_ne!(from_pdf.document_id, from_txt.document_id);

    let again = extract_text(
        "renamed.txt",
        &txt,
        MediaKind::PlainText,
        Timestamp::from_millis(9),
    )
    .unwrap();
    assert_eq!(again.document_id, from_txt.document_id);
}

#[test]
fn unreadable_uploads_are_reported() {
    let at = Timestamp::from_millis(0);
    assert!(matches!(
        extract_text("a.pdf", b"%PDF-1.4 garbage", MediaKind::Pdf, at),
        Err(IngestError::UnreadableDocument(_))
    ));
    assert!(matches!(
        extract_text("a.txt", &[0xff, 0xfe, 0x00], MediaKind::PlainText, at),
        Err(IngestError::UnreadableDocument(_))
    ));
    assert!(matches!(
        extract_text("a.txt", b"", MediaKind::PlainText, at),
        Err(IngestError::EmptyDocument)
    ));
}

fn catalog_gateway() -> Gateway {
    let gateway = Gateway::new();
    let script = StubScript::load(&fixture("stubs/catalog.json")).unwrap();
    gateway
        .register_provider("stub", Arc::new(StubProvider::new(script)))
        .unwrap();
    gateway
}

#[test]
fn catalog_ingest_filters_dedups_and_generates_outcomes() {
    let keywords: Vec<String> = DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect();
    let csv = read("catalog.csv");
    let ingest = ingest_csv(
        csv.as_slice(),
        &keywords,
        &catalog_gateway(),
        &Templates::builtin().course_outcomes,
    )
    .unwrap();
    assert!(ingest.warnings.is_empty(), "{:?}", ingest.warnings);

    let mut reader = csv::Reader::from_reader(csv.as_slice());
    let mut expected_urls = Vec::new();
    for row in reader.records() {
        let row = row.unwrap();
        let skills: Vec<String> = row[3].split(';').map(|s| s.trim().to_lowercase()).collect();
        let wanted = keywords.iter().any(|k| {
            skills
                .iter()
                .any(|s| s.split_whitespace().any(|w| w == k.to_lowercase()))
        });
        if wanted && !expected_urls.contains(&row[2].to_string()) {
            expected_urls.push(row[2].to_string());
        }
    }
    let urls: Vec<&str> = ingest.records.iter().map(|r| r.url.as_str()).collect();
    assert_eq!(urls, expected_urls);
    for record in &ingest.records {
        assert_eq!(record.course_id, course_id_for_url(&record.url));
        assert!((3..=6).contains(&record.outcomes.len()), "{}", record.title);
    }
}

#[test]
fn collection_snapshot_round_trips_and_checks_embedder() {
    let courses: Vec<coach_core::courses::CourseRecord> =
        serde_json::from_slice(&read("courses.json")).unwrap();
    let embedder = HashEmbedder::new(42, 64);
    let collection = index_courses(&courses, "courses", &embedder).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("courses.json");
    collection.save(&path).unwrap();
    let loaded = VectorCollection::load(&path).unwrap();
    assert_eq!(loaded, collection);

    let query = embedder
        .embed_one("Kubernetes operations and container orchestration")
        .unwrap();
    let a = search_vector_with(&collection, &query, 5, ScanMode::Sequential).unwrap();
    let b = search_vector_with(&loaded, &query, 5, ScanMode::Parallel).unwrap();
    let ids = |r: &[(&coach_core::courses::VectorEntry, f64)]| {
        r.iter()
            .map(|(e, s)| (e.course_id.clone(), *s))
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(&a), ids(&b));

    let other = HashEmbedder::new(43, 64);
    let query = coach_core::courses::RecommendationQuery {
        query_text: "anything".into(),
        target_role_title: "x".into(),
        gap_list: vec![],
        k: 3,
    };
    assert!(coach_core::courses::search(&loaded, &query, &other).is_err());
}
