//! Stable error codes for the HTTP API. Every module error maps to exactly
//! one code; bodies are always `{"error": {"code", "message", "detail"?}}`.

use axum::extract::multipart::MultipartError;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use coach_core::career::CareerError;
use coach_core::coach::CoachError;
use coach_core::courses::CourseError;
use coach_core::embeddings::EmbedError;
use coach_core::gateway::GatewayError;
use coach_core::ingest::IngestError;
use coach_core::pipeline::{PipelineError, FALLBACK_ROLE_QUESTION};
use coach_core::skills::SkillsError;
use coach_core::store::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn invalid_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_body", message)
    }

    pub fn payload_too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("uploads are limited to {limit} bytes"),
        )
    }

    pub fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::invalid_body(rejection.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(rejection: PathRejection) -> Self {
        ApiError::invalid_body(rejection.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            return ApiError::payload_too_large(crate::routes::MAX_UPLOAD_BYTES);
        }
        ApiError::invalid_body(e.body_text())
    }
}

impl From<MultipartRejection> for ApiError {
    fn from(e: MultipartRejection) -> Self {
        ApiError::invalid_body(e.body_text())
    }
}

fn gateway(e: &GatewayError) -> ApiError {
    let retriable = e.is_retriable();
    let code = match e {
        GatewayError::SchemaViolation { .. } => "schema_violation",
        GatewayError::ProviderUnavailable { .. } | GatewayError::NoProvider => {
            "provider_unavailable"
        }
        _ => "gateway_misconfigured",
    };
    ApiError::new(StatusCode::BAD_GATEWAY, code, e.to_string())
        .with_detail(json!({ "retriable": retriable }))
}

fn embedding(e: &EmbedError) -> ApiError {
    match e {
        EmbedError::Unavailable(_) => ApiError::new(
            StatusCode::BAD_GATEWAY,
            "embedding_unavailable",
            e.to_string(),
        ),
        _ => ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "embedding_failed",
            e.to_string(),
        ),
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        match e {
            StoreError::UnknownProfile(_) => {
                ApiError::new(S::NOT_FOUND, "unknown_profile", message)
            }
            StoreError::InvalidProfileId(_) => {
                ApiError::new(S::NOT_FOUND, "unknown_profile", message)
            }
            StoreError::UnknownCourse(_) => ApiError::new(S::NOT_FOUND, "unknown_course", message),
            StoreError::IllegalTransition { from, to } => {
                ApiError::new(S::CONFLICT, "illegal_transition", message)
                    .with_detail(json!({ "from": from, "to": to }))
            }
            StoreError::OutOfOrder { .. } => ApiError::new(S::CONFLICT, "out_of_order", message),
            StoreError::StorageUnavailable(_) => {
                ApiError::new(S::SERVICE_UNAVAILABLE, "storage_unavailable", message)
            }
            StoreError::Corrupt { .. } => {
                ApiError::new(S::INTERNAL_SERVER_ERROR, "storage_corrupt", message)
            }
            StoreError::Coach(e) => e.into(),
        }
    }
}

impl From<CoachError> for ApiError {
    fn from(e: CoachError) -> Self {
        match &e {
            CoachError::UnknownQuestion(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_question", e.to_string())
            }
            CoachError::InvalidInput(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", e.to_string())
            }
            CoachError::Gateway(g) => gateway(g),
            CoachError::Template(_) => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "template_error",
                e.to_string(),
            ),
        }
    }
}

/// Tells the client how to place a candidate the resume could not map.
fn fallback_hint() -> Value {
    json!({
        "action": "answer_questions",
        "questions_endpoint": "qa",
        "question_id": FALLBACK_ROLE_QUESTION,
        "message": "Answer this Q&A question with one of the role titles in the career tree (or describe your current role) to be placed on the tree."
    })
}

impl From<CareerError> for ApiError {
    fn from(e: CareerError) -> Self {
        let message = e.to_string();
        match e {
            CareerError::UnmappableRole {
                best_node,
                similarity,
                threshold,
            } => {
                ApiError::new(StatusCode::CONFLICT, "unmappable_role", message).with_detail(json!({
                    "best_node": best_node,
                    "similarity": similarity,
                    "threshold": threshold,
                    "fallback": fallback_hint(),
                }))
            }
            CareerError::NoExperience => {
                ApiError::new(StatusCode::CONFLICT, "unmappable_role", message)
                    .with_detail(json!({ "fallback": fallback_hint() }))
            }
            CareerError::Embedding(e) => embedding(&e),
            CareerError::Parse(_) | CareerError::InvalidTree(_) | CareerError::UnknownNode(_) => {
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "career_tree_error",
                    message,
                )
            }
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let message = e.to_string();
        match e {
            IngestError::EmptyDocument | IngestError::NoChunks => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_document", message)
            }
            IngestError::UnreadableDocument(_) => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "unreadable_document",
                message,
            ),
            IngestError::ConflictingIdentity { .. } => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "conflicting_identity",
                message,
            ),
            IngestError::Extraction { chunk, source } => {
                let mut err = gateway(&source);
                err.message = message;
                err.detail = Some(json!({ "chunk": chunk, "retriable": source.is_retriable() }));
                err
            }
            IngestError::Template(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "template_error", message)
            }
        }
    }
}

impl From<CourseError> for ApiError {
    fn from(e: CourseError) -> Self {
        match &e {
            CourseError::Gateway(g) => gateway(g),
            CourseError::Embedding(em) => embedding(em),
            CourseError::NoGaps => ApiError::new(StatusCode::CONFLICT, "no_gaps", e.to_string()),
            _ => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "course_index_error",
                e.to_string(),
            ),
        }
    }
}

impl From<SkillsError> for ApiError {
    fn from(e: SkillsError) -> Self {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "skills_config_error",
            e.to_string(),
        )
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => e.into(),
            PipelineError::Career(e) => e.into(),
            PipelineError::Skills(e) => e.into(),
            PipelineError::Courses(e) => e.into(),
            PipelineError::Coach(e) => e.into(),
            PipelineError::Store(e) => e.into(),
            PipelineError::NoResumeYet => {
                ApiError::new(StatusCode::CONFLICT, "no_resume_yet", e.to_string())
            }
            PipelineError::NoMappingYet => {
                ApiError::new(StatusCode::CONFLICT, "no_mapping_yet", e.to_string())
            }
            PipelineError::NoReportYet => {
                ApiError::new(StatusCode::CONFLICT, "no_report_yet", e.to_string())
            }
        }
    }
}
