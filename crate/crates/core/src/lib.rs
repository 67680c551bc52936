pub mod career;
pub mod coach;
pub mod courses;
pub mod embeddings;
pub mod gateway;
pub mod ingest;
pub mod par;
pub mod pipeline;
pub mod skills;
pub mod store;
pub mod templates;
pub mod text;
pub mod time;
