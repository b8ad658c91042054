//! File formats, multi-threaded training back ends and the command
//! pipeline around [`wikiwealth_core`].
//!
//! * [`formats`]: corpus JSON lines, survey CSV, and the binary image
//!   (`NLIM`), embedding (`PVDB`), regressor (`GWNN`) and feature (`GWFT`)
//!   files.
//! * [`parallel`]: lock-free multi-worker embedding training and a
//!   threaded mini-batch gradient.
//! * [`pipeline`]: one function per command, used by the binary.
//! * [`report`], [`manifest`]: CSV/JSON outputs and run manifests.

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use error::{Error, Result};
