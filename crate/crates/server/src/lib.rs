//! HTTP service and operator CLI for the text-animation engine.

pub mod api;
pub mod cli;
pub mod error;
pub mod state;

pub use api::router;
pub use error::ApiError;
pub use state::AppState;
