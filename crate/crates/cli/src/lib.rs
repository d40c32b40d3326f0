pub mod commands;
pub mod config;

pub use commands::{exit_code, Manifest, Outcome};
pub use config::RunConfig;
