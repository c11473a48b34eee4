//! Pipeline stages. Each reads declared inputs, writes its artifacts
//! atomically into the output directory and records hashes in the manifest.

mod baseline;
mod common;
mod detect;
mod effects;
mod exposure;
mod fit;
mod ingest;
mod network;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::manifest::{self, Manifest, StageEntry};

pub use fit::{build_model_table, run_fit, FitRecord, ModelTable};
pub use network::INTERACTION_COLUMNS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Exposure,
    Baseline,
    Detect,
    Network,
    Fit,
    Effects,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Exposure,
        Stage::Baseline,
        Stage::Detect,
        Stage::Network,
        Stage::Fit,
        Stage::Effects,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Exposure => "exposure",
            Stage::Baseline => "baseline",
            Stage::Detect => "detect",
            Stage::Network => "network",
            Stage::Fit => "fit",
            Stage::Effects => "effects",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a stage needs: configuration, output directory and options.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
    /// Exit with the non-convergence code when a final fit fails R̂.
    pub strict: bool,
}

/// Files a stage read and wrote, for the manifest.
#[derive(Debug, Default)]
pub struct Record {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    /// Non-fatal problems found by the stage.
    pub non_converged: Vec<String>,
}

impl Record {
    pub fn input(&mut self, p: &Path) -> Result<PathBuf> {
        PipelineConfig::require(p)?;
        self.inputs.push(p.to_path_buf());
        Ok(p.to_path_buf())
    }

    pub fn output(&mut self, p: PathBuf) -> PathBuf {
        self.outputs.push(p.clone());
        p
    }
}

impl Context {
    pub fn new(cfg: PipelineConfig, out: PathBuf) -> Self {
        Self {
            cfg,
            out,
            strict: false,
        }
    }

    /// Path of an artifact in the output directory.
    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Hash of the configuration with machine-specific paths reduced to file
    /// names, so relocated inputs and outputs hash the same.
    pub fn config_hash(&self) -> String {
        let mut c = self.cfg.clone();
        c.out = None;
        let strip = |p: &mut PathBuf| {
            if let Some(n) = p.file_name() {
                *p = PathBuf::from(n);
            }
        };
        let ps = &mut c.paths;
        for p in [
            &mut ps.ais,
            &mut ps.ports,
            &mut ps.tracks,
            &mut ps.stations,
            &mut ps.water_level,
            &mut ps.wind,
            &mut ps.rainfall,
            &mut ps.census,
        ] {
            strip(p);
        }
        if let Some(l) = ps.land.as_mut() {
            strip(l);
        }
        manifest::sha256_hex(c.to_toml().as_bytes())
    }

    pub fn run(&self, stage: Stage) -> Result<Record> {
        std::fs::create_dir_all(&self.out).map_err(|e| PipelineError::io(&self.out, e))?;
        log::info!("stage {stage}");
        let mut rec = Record::default();
        match stage {
            Stage::Ingest => ingest::run(self, &mut rec)?,
            Stage::Exposure => exposure::run(self, &mut rec)?,
            Stage::Baseline => baseline::run(self, &mut rec)?,
            Stage::Detect => detect::run(self, &mut rec)?,
            Stage::Network => network::run(self, &mut rec)?,
            Stage::Fit => fit::run(self, &mut rec)?,
            Stage::Effects => effects::run(self, &mut rec)?,
            Stage::Report => report::run(self, &mut rec)?,
        }
        self.record(stage, &rec)?;
        if self.strict && !rec.non_converged.is_empty() {
            return Err(PipelineError::NonConvergence(format!(
                "fits did not reach split-R̂ below the threshold: {}",
                rec.non_converged.join(", ")
            )));
        }
        Ok(rec)
    }

    fn record(&self, stage: Stage, rec: &Record) -> Result<()> {
        let mut m = Manifest::load_or_new(&self.out, self.cfg.seed, &self.config_hash())?;
        let name = |p: &Path| -> String {
            p.strip_prefix(&self.out)
                .ok()
                .map(|r| r.to_string_lossy().into_owned())
                .or_else(|| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_default()
        };
        let mut entry = StageEntry::default();
        for p in &rec.inputs {
            entry.inputs.insert(name(p), manifest::file_sha256(p)?);
        }
        for p in &rec.outputs {
            entry.outputs.insert(name(p), manifest::file_sha256(p)?);
        }
        m.stages.insert(stage.name().into(), entry);
        m.save(&self.out)
    }

    /// Runs every stage in order.
    pub fn run_all(&self) -> Result<Vec<Record>> {
        Stage::ALL.iter().map(|&s| self.run(s)).collect()
    }
}

/// Runs `f` on a pool of `threads` workers (0 = all cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Other(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
