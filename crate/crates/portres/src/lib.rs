//! Batch pipeline around `portres-core`: file formats, configuration, stage
//! orchestration with a hash manifest, and a synthetic fixture generator.
//!
//! ```no_run
//! use portres::{config::PipelineConfig, stages::Context};
//!
//! let cfg = PipelineConfig::load("fixture/portres.toml".as_ref())?;
//! let ctx = Context::new(cfg, "out".into());
//! ctx.run_all()?;
//! # Ok::<(), portres::error::PipelineError>(())
//! ```

pub mod config;
pub mod error;
pub mod fixture;
pub mod io;
pub mod manifest;
pub mod stages;

pub use error::{PipelineError, Result};
pub use stages::{Context, Stage};
