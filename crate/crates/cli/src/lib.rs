//! File formats, worker pool and command implementations behind `poistab`.

pub mod commands;
pub mod error;
pub mod report;
pub mod system;

pub use error::{CliError, ErrorKind};
pub use report::{ProbeJson, Report, SCHEMA_VERSION};
pub use system::{LoadedSystem, SystemFile};
