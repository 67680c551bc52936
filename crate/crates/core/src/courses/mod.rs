//! Course catalog ingestion, composite-vector indexing and cosine retrieval.

mod catalog;
mod collection;
mod query;

use thiserror::Error;

use crate::embeddings::EmbedError;

pub use catalog::{
    course_id_for_url, ingest_csv, keyword_match, CourseRecord, CsvIngest, DEFAULT_KEYWORDS,
};
pub use collection::{
    index_courses, search, search_vector, search_vector_with, search_with, ScanMode, ScoredCourse,
    VectorCollection, VectorEntry,
};
pub use query::{build_query, RecommendationQuery, DEFAULT_K};

#[derive(Debug, Error)]
pub enum CourseError {
    #[error("malformed course CSV: {0}")]
    MalformedCsv(String),
    #[error("no courses to index")]
    NoCourses,
    #[error("collection `{name}` has dimension {expected}, embedder produces {found}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("collection was indexed with a different embedder configuration")]
    EmbedderMismatch,
    #[error("collection is empty")]
    EmptyCollection,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("the report has no skill gaps")]
    NoGaps,
    #[error("cannot read or write collection snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error(transparent)]
    Template(#[from] crate::templates::TemplateError),
}
