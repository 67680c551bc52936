//! HTTP API and configuration loading for the career coaching service.

pub mod config;
pub mod error;
pub mod routes;

pub use config::AppConfig;
pub use error::ApiError;
pub use routes::router;
