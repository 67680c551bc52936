//! `/v1` HTTP API.

use std::io::{Read, Seek, Write};
use std::sync::Arc;

use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use serde::{Deserialize, Serialize};

use coach_core::coach::ChatTurn;
use coach_core::courses::{RecommendationQuery, ScoredCourse};
use coach_core::pipeline::{CoachService, PipelineError};
use coach_core::store::{CourseStatus, TrackedCourse};
use coach_core::time::Timestamp;

use crate::error::ApiError;

pub const MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;

/// JSON body whose rejections become coded [`ApiError`]s.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

impl<T: Serialize> IntoResponse for ApiJson<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct ApiPath<T>(pub T);

type AppState = Arc<CoachService>;

pub fn router(service: Arc<CoachService>) -> Router {
    let profile = Router::new()
        .route("/", get(get_profile))
        .route(
            "/resume",
            post(upload_resume).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES + 64 * 1024)),
        )
        .route("/career-path", get(career_path))
        .route("/skill-report", get(skill_report))
        .route("/recommendations", get(recommendations))
        .route("/qa", get(get_qa).post(post_qa))
        .route("/chat", get(get_chat).post(post_chat))
        .route("/takeaways", get(takeaways))
        .route("/courses/:course_id/status", put(put_course_status));
    Router::new()
        .route(
            "/v1/health",
            get(|| async { ApiJson(serde_json::json!({ "status": "ok" })) }),
        )
        .route("/v1/career-tree", get(career_tree))
        .route("/v1/profiles", post(create_profile))
        .nest("/v1/profiles/:id", profile)
        .fallback(|| async { ApiError::not_found() })
        .method_not_allowed_fallback(|| async {
            ApiError::new(
                StatusCode::METHOD_NOT_ALLOWED,
                "method_not_allowed",
                "method not allowed",
            )
        })
        .with_state(service)
}

/// Runs a synchronous service call off the async executor.
async fn blocking<T, F>(service: AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&CoachService) -> Result<T, PipelineError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

async fn career_tree(State(service): State<AppState>) -> Response {
    let tree = serde_json::from_str::<serde_json::Value>(&service.pipeline.tree.to_json())
        .unwrap_or(serde_json::Value::Null);
    ApiJson(tree).into_response()
}

#[derive(Deserialize)]
struct CreateProfile {
    display_name: String,
}

#[derive(Serialize)]
struct ProfileCreated {
    profile_id: String,
    display_name: String,
    created_at: Timestamp,
}

async fn create_profile(
    State(service): State<AppState>,
    ApiJson(body): ApiJson<CreateProfile>,
) -> Result<(StatusCode, ApiJson<ProfileCreated>), ApiError> {
    let name = body.display_name.trim().to_string();
    if name.is_empty() {
        return Err(ApiError::invalid_body("display_name must not be empty"));
    }
    let profile = blocking(service, move |s| s.create_profile(&name)).await?;
    Ok((
        StatusCode::CREATED,
        ApiJson(ProfileCreated {
            profile_id: profile.profile_id,
            display_name: profile.display_name,
            created_at: profile.created_at,
        }),
    ))
}

async fn get_profile(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<Response, ApiError> {
    let profile = blocking(service, move |s| s.profile(&id)).await?;
    Ok(ApiJson(profile).into_response())
}

/// Streams the `file` field into a temporary file, enforcing the size cap.
/// The file is removed when the returned handle drops.
async fn receive_upload(
    mut multipart: Multipart,
) -> Result<(String, tempfile::NamedTempFile), ApiError> {
    while let Some(mut field) = multipart.next_field().await? {
        if field.name() != Some("file") {
            continue;
        }
        let filename = field.file_name().unwrap_or("resume").to_string();
        let mut tmp =
            tempfile::NamedTempFile::new().map_err(|e| ApiError::internal(e.to_string()))?;
        let mut written = 0usize;
        while let Some(chunk) = field.chunk().await? {
            written += chunk.len();
            if written > MAX_UPLOAD_BYTES {
                return Err(ApiError::payload_too_large(MAX_UPLOAD_BYTES));
            }
            tmp.write_all(&chunk)
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        return Ok((filename, tmp));
    }
    Err(ApiError::invalid_body(
        "multipart body needs a `file` field",
    ))
}

async fn upload_resume(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Response, ApiError> {
    let (filename, mut tmp) = receive_upload(multipart?).await?;
    let bundle = blocking(service, move |s| {
        let mut bytes = Vec::new();
        tmp.rewind()
            .and_then(|_| tmp.read_to_end(&mut bytes))
            .map_err(|e| coach_core::store::StoreError::StorageUnavailable(e.to_string()))?;
        let result = s.upload_resume(&id, &filename, &bytes);
        drop(tmp);
        result
    })
    .await?;
    Ok(ApiJson(bundle).into_response())
}

async fn career_path(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<Response, ApiError> {
    Ok(ApiJson(blocking(service, move |s| s.career_path(&id)).await?).into_response())
}

async fn skill_report(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<Response, ApiError> {
    Ok(ApiJson(blocking(service, move |s| s.skill_report(&id)).await?).into_response())
}

#[derive(Serialize)]
struct Recommendations {
    query: Option<RecommendationQuery>,
    courses: Vec<ScoredCourse>,
    tracker: Vec<TrackedCourse>,
}

async fn recommendations(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<ApiJson<Recommendations>, ApiError> {
    let profile = blocking(service, move |s| {
        let p = s.profile(&id)?;
        if p.latest_report.is_none() {
            return Err(PipelineError::NoReportYet);
        }
        Ok(p)
    })
    .await?;
    Ok(ApiJson(Recommendations {
        query: profile.recommendation_query,
        courses: profile.recommendations,
        tracker: profile.course_tracker,
    }))
}

async fn get_qa(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<Response, ApiError> {
    Ok(ApiJson(blocking(service, move |s| s.qa(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct PostAnswer {
    question_id: String,
    answer: String,
    #[serde(default)]
    attests_advanced: bool,
}

async fn post_qa(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<PostAnswer>,
) -> Result<Response, ApiError> {
    let outcome = blocking(service, move |s| {
        s.answer(&id, &body.question_id, &body.answer, body.attests_advanced)
    })
    .await?;
    Ok(ApiJson(outcome).into_response())
}

async fn get_chat(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<ApiJson<Vec<ChatTurn>>, ApiError> {
    Ok(ApiJson(
        blocking(service, move |s| Ok(s.profile(&id)?.chat)).await?,
    ))
}

#[derive(Deserialize)]
struct PostChat {
    text: String,
}

async fn post_chat(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<PostChat>,
) -> Result<ApiJson<ChatTurn>, ApiError> {
    Ok(ApiJson(
        blocking(service, move |s| s.chat(&id, &body.text)).await?,
    ))
}

async fn takeaways(
    State(service): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<Response, ApiError> {
    Ok(ApiJson(blocking(service, move |s| s.takeaways(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct PutStatus {
    status: CourseStatus,
}

async fn put_course_status(
    State(service): State<AppState>,
    ApiPath((id, course_id)): ApiPath<(String, String)>,
    ApiJson(body): ApiJson<PutStatus>,
) -> Result<ApiJson<TrackedCourse>, ApiError> {
    Ok(ApiJson(
        blocking(service, move |s| {
            s.set_course_status(&id, &course_id, body.status)
        })
        .await?,
    ))
}
