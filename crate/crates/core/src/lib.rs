//! Headless text-animation editing engine.
//!
//! The project document lives in [`model`]; timeline edits and render-state
//! evaluation in [`timeline`]; the script panel model in [`script`]. Agents
//! ([`agents`], [`chat`]) talk to language models through [`llm`] and mutate
//! the project only through [`tools`].

pub mod agents;
pub mod catalog;
pub mod chat;
pub mod context;
pub mod error;
pub mod id;
pub mod llm;
pub mod meta;
pub mod model;
pub mod par;
pub mod persist;
pub mod script;
pub mod time;
pub mod timeline;
pub mod tools;

pub use error::{Error, Result};
pub use id::{IdKind, ObjectId};
pub use model::Project;
pub use time::Time;
