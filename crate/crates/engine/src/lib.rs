//! Command-line and HTTP front end for the scene graph reward engine.

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod service;
pub mod store;

pub use config::EngineConfig;
pub use error::EngineError;
pub use service::Engine;
