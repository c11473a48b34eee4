//! Pipeline configuration, read from TOML.
//!
//! Every constant taken from the analysis design has its own key, defaulting
//! to the published value. Relative input paths resolve against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use portres_core::baseline::BaselineConfig;
use portres_core::countmodel::{McmcConfig, Priors, Variant};
use portres_core::impact::ImpactConfig;
use portres_core::netgraph::NetworkConfig;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    pub paths: Paths,
    pub ais: AisSection,
    pub exposure: ExposureSection,
    pub baseline: BaselineSection,
    pub impact: ImpactConfig,
    pub network: NetworkConfig,
    pub model: ModelSection,
    pub effects: EffectsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            out: None,
            paths: Paths::default(),
            ais: AisSection::default(),
            exposure: ExposureSection::default(),
            baseline: BaselineSection::default(),
            impact: ImpactConfig::default(),
            network: NetworkConfig::default(),
            model: ModelSection::default(),
            effects: EffectsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub ais: PathBuf,
    pub ports: PathBuf,
    pub tracks: PathBuf,
    pub stations: PathBuf,
    pub water_level: PathBuf,
    pub wind: PathBuf,
    pub rainfall: PathBuf,
    pub census: PathBuf,
    /// Optional land polygon for the landfall indicators.
    pub land: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            ais: "ais.csv".into(),
            ports: "ports.geojson".into(),
            tracks: "tracks.csv".into(),
            stations: "stations.csv".into(),
            water_level: "water_level.csv".into(),
            wind: "wind.csv".into(),
            rainfall: "rainfall.csv".into(),
            census: "census.csv".into(),
            land: None,
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.ais,
            &mut self.ports,
            &mut self.tracks,
            &mut self.stations,
            &mut self.water_level,
            &mut self.wind,
            &mut self.rainfall,
            &mut self.census,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(l) = self.land.as_mut().filter(|l| l.is_relative()) {
            *l = base.join(&*l);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisColumns {
    pub vessel_id: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub vessel_type: String,
}

impl Default for AisColumns {
    fn default() -> Self {
        Self {
            vessel_id: "MMSI".into(),
            timestamp: "BaseDateTime".into(),
            lat: "LAT".into(),
            lon: "LON".into(),
            vessel_type: "VesselType".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisSection {
    pub min_dwell_hours: f64,
    pub max_gap_hours: f64,
    /// Inclusive ranges of commercial vessel-type codes.
    pub vessel_types: Vec<(u16, u16)>,
    pub columns: AisColumns,
}

impl Default for AisSection {
    fn default() -> Self {
        Self {
            min_dwell_hours: 4.0,
            max_gap_hours: 24.0,
            vessel_types: vec![(70, 79), (80, 89)],
            columns: AisColumns::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureSection {
    pub radius_km: f64,
    pub step_hours: f64,
    pub max_station_km: f64,
    pub typical_sea_level_days: i64,
}

impl Default for ExposureSection {
    fn default() -> Self {
        Self {
            radius_km: 500.0,
            step_hours: 1.0,
            max_station_km: 100.0,
            typical_sea_level_days: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSection {
    pub pad_before_days: i64,
    pub pad_after_days: i64,
    #[serde(flatten)]
    pub fit: BaselineConfig,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            pad_before_days: 10,
            pad_after_days: 10,
            fit: BaselineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DicKind {
    /// Deviance conditional on the sampled latents.
    #[default]
    Conditional,
    /// Deviance with the Lindley effect and random parameters integrated out.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Interaction-table columns modeled as counts.
    pub responses: Vec<String>,
    pub variants: Vec<Variant>,
    /// Variant used for stepwise selection; the others reuse its covariates.
    pub selection_variant: Variant,
    /// Candidate covariates: interaction-table columns or derived ones
    /// (`Ln_Pop_C`, `SSHS_TD`, `SSHS_1` … `SSHS_5`).
    pub covariates: Vec<String>,
    /// Skip VIF screening and stepwise selection and fit all covariates.
    pub select: bool,
    pub literal_eq11: bool,
    pub dic: DicKind,
    /// Treat non-converged candidate fits as failures during selection.
    pub require_convergence: bool,
    pub priors: Priors,
    pub mcmc: McmcConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            split_seed: 7,
            responses: vec![
                "total_impact".into(),
                "day_of_recover".into(),
                "Degree_difference".into(),
            ],
            variants: Variant::ALL.to_vec(),
            selection_variant: Variant::Rpnbl,
            covariates: [
                "Wind_speed",
                "Rainfall",
                "Surge_height",
                "DISTANCE",
                "Coast_Atlantic",
                "Coast_Pacific",
                "Coast_Gulf_of_Mexico",
                "Ln_Pop_C",
                "WF",
                "PCT_Pov",
                "PCT_TI",
                "PCT_TA",
                "Dock_Count",
                "Railway_Length",
                "Highway_Length",
                "D_normal",
                "C_normal",
                "B_normal",
            ]
            .map(String::from)
            .to_vec(),
            select: true,
            literal_eq11: false,
            dic: DicKind::Conditional,
            require_convergence: true,
            priors: Priors::default(),
            mcmc: McmcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectsSection {
    pub vif_threshold: f64,
    pub stepwise_threshold: f64,
    pub allow_random: bool,
    pub max_steps: usize,
    pub halton_draws: usize,
    pub halton_skip: usize,
    pub full_posterior: bool,
    pub posterior_draws: usize,
}

impl Default for EffectsSection {
    fn default() -> Self {
        Self {
            vif_threshold: 5.0,
            stepwise_threshold: 2.0,
            allow_random: true,
            max_steps: 200,
            halton_draws: 200,
            halton_skip: 20,
            full_posterior: false,
            posterior_draws: 200,
        }
    }
}

impl PipelineConfig {
    /// Reads and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        cfg.paths.resolve(base);
        if let Some(out) = cfg.out.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| PipelineError::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::invalid(m));
        let positive = [
            ("ais.min_dwell_hours", self.ais.min_dwell_hours),
            ("ais.max_gap_hours", self.ais.max_gap_hours),
            ("exposure.radius_km", self.exposure.radius_km),
            ("exposure.step_hours", self.exposure.step_hours),
            ("exposure.max_station_km", self.exposure.max_station_km),
            ("effects.vif_threshold", self.effects.vif_threshold),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        if self.ais.vessel_types.iter().any(|(lo, hi)| lo > hi) {
            return bad("ais.vessel_types ranges must be ordered".into());
        }
        if self.exposure.typical_sea_level_days < 1 {
            return bad("exposure.typical_sea_level_days must be at least 1".into());
        }
        if self.baseline.pad_before_days < 0 || self.baseline.pad_after_days < 0 {
            return bad("baseline pads must be non-negative".into());
        }
        if !(self.baseline.fit.ci_level > 0.0 && self.baseline.fit.ci_level < 1.0) {
            return bad(format!(
                "baseline.ci_level must lie in (0, 1), got {}",
                self.baseline.fit.ci_level
            ));
        }
        if self.network.m == 0 {
            return bad("network.m must be at least 1".into());
        }
        if !(self.impact.low_traffic_threshold >= 0.0) {
            return bad("impact.low_traffic_threshold must be non-negative".into());
        }
        if !(self.model.train_fraction > 0.0 && self.model.train_fraction < 1.0) {
            return bad(format!(
                "model.train_fraction must lie in (0, 1), got {}",
                self.model.train_fraction
            ));
        }
        if self.model.responses.is_empty() || self.model.variants.is_empty() {
            return bad("model.responses and model.variants must be non-empty".into());
        }
        self.model.mcmc.validate()?;
        if !(self.effects.stepwise_threshold >= 0.0) {
            return bad("effects.stepwise_threshold must be non-negative".into());
        }
        if self.effects.halton_draws == 0 {
            return bad("effects.halton_draws must be at least 1".into());
        }
        Ok(())
    }

    /// Checks that every input file exists, naming the first missing one.
    pub fn require(path: &Path) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(PipelineError::MissingInput(path.to_path_buf()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_published_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.exposure.radius_km, 500.0);
        assert_eq!(
            (c.baseline.pad_before_days, c.baseline.pad_after_days),
            (10, 10)
        );
        assert_eq!(c.ais.min_dwell_hours, 4.0);
        assert_eq!(c.network.m, 4);
        assert_eq!(c.impact.low_traffic_threshold, 5.0);
        assert_eq!(c.model.train_fraction, 0.8);
        assert_eq!(c.effects.vif_threshold, 5.0);
        assert_eq!(c.effects.halton_draws, 200);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = PipelineConfig::from_toml("seed = 3\n[exposure]\nradius_km = 250.0\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.exposure.radius_km, 250.0);
        assert_eq!(c.exposure.step_hours, 1.0);
    }

    #[test]
    fn rejects_bad_values_and_keys() {
        for text in [
            "[exposure]\nradius_km = -1.0\n",
            "[model]\ntrain_fraction = 1.5\n",
            "[model.mcmc]\nchains = 1\n",
            "[baseline]\nci_level = 1.0\n",
            "unknown_key = 1\n",
        ] {
            let e = PipelineConfig::from_toml(text).unwrap_err();
            assert_eq!(e.exit_code(), 3, "{text}");
        }
    }
}
