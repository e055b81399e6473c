//! Run configuration, read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every section and key is optional; defaults follow the published
//! analysis (Nov 1 to Apr 30 window, 1000 bootstrap replicates, 1000
//! sampled models with 1000 sequences each, 20-year smoothing window,
//! quantiles 2.5/25/50/75/97.5 %, 1968-1971 excluded).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bootstrap::SampleMode;
use crate::error::{Error, Result};
use crate::features::{FeatureTable, ScalingMode, SeasonWindow};
use crate::firth::{AiccLoglik, FirthOptions};
use crate::selection::SelectionOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; required by the bootstrap and project stages.
    pub seed: Option<u64>,
    pub scaling: ScalingMode,
    pub excluded_years: Vec<i32>,
    pub window: WindowConfig,
    pub melt_test: MeltTestConfig,
    pub stations: StationsConfig,
    pub data: DataConfig,
    pub selection: SelectionConfig,
    pub fit: FitConfig,
    pub bootstrap: BootstrapConfig,
    pub projection: ProjectionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            scaling: ScalingMode::ZScore,
            excluded_years: vec![1968, 1969, 1970, 1971],
            window: WindowConfig::default(),
            melt_test: MeltTestConfig::default(),
            stations: StationsConfig::default(),
            data: DataConfig::default(),
            selection: SelectionConfig::default(),
            fit: FitConfig::default(),
            bootstrap: BootstrapConfig::default(),
            projection: ProjectionConfig::default(),
        }
    }
}

/// `"MM-DD"`; the start falls in the year before breakup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub start: String,
    pub end: String,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { start: "11-01".into(), end: "04-30".into() }
    }
}

impl WindowConfig {
    pub fn for_year(&self, breakup_year: i32) -> Result<SeasonWindow> {
        SeasonWindow::from_month_days(breakup_year, parse_month_day(&self.start)?, parse_month_day(&self.end)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeltTestConfig {
    pub lower: f64,
    pub upper: f64,
    pub end: String,
}

impl Default for MeltTestConfig {
    fn default() -> Self {
        Self { lower: 40.0, upper: 150.0, end: "06-30".into() }
    }
}

impl MeltTestConfig {
    pub fn to_melt_test(&self) -> Result<crate::features::MeltTest> {
        if !(self.lower >= 0.0 && self.lower <= self.upper) {
            return Err(Error::Config(format!(
                "melt_test thresholds must satisfy 0 <= lower <= upper, got {} and {}",
                self.lower, self.upper
            )));
        }
        Ok(crate::features::MeltTest { lower: self.lower, upper: self.upper, end: parse_month_day(&self.end)? })
    }
}

pub fn parse_month_day(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("expected MM-DD, got `{s}`"));
    let (m, d) = s.split_once('-').ok_or_else(bad)?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    let d: u32 = d.parse().map_err(|_| bad())?;
    chrono::NaiveDate::from_ymd_opt(2000, m, d).ok_or_else(bad)?;
    Ok((m, d))
}

/// A station CSV with an optional donor used to fill its gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationRef {
    pub file: PathBuf,
    pub donor: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationsConfig {
    /// Winter precipitation (and, by default, melt-test temperature).
    pub precip: Option<StationRef>,
    /// Freezing degree-days upstream of the delta.
    pub upstream_temperature: Option<StationRef>,
    /// Freezing degree-days inside the delta.
    pub downstream_temperature: Option<StationRef>,
    /// Melt-test temperature; falls back to the precipitation station.
    pub melt_temperature: Option<StationRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// `year,flood`.
    pub flood_file: Option<PathBuf>,
    /// `year,<covariate>...`, e.g. freeze-up elevation and monthly flows.
    pub covariates_file: Option<PathBuf>,
    /// Pre-built raw feature table; replaces station processing.
    pub feature_table: Option<PathBuf>,
    /// Frozen bootstrap ensemble reused by the project stage.
    pub ensemble_file: Option<PathBuf>,
    /// `gcm,rcp,year,<covariates>`; one or more scenario blocks per file.
    pub forcing_files: Vec<PathBuf>,
    /// Units of the forcing files.
    pub forcing_scaling: ScalingMode,
    /// Columns that must be present in every feature row; rows missing one
    /// are reported as incomplete.
    pub required_columns: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            flood_file: None,
            covariates_file: None,
            feature_table: None,
            ensemble_file: None,
            forcing_files: Vec::new(),
            forcing_scaling: ScalingMode::Raw,
            required_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Candidate covariates; list order breaks AICc ties.
    pub candidates: Vec<String>,
    pub max_steps: usize,
    pub min_aicc_improvement: f64,
    pub max_p_value: f64,
    pub aicc_loglik: AiccLoglik,
    /// Pair compared as sum, interaction and first principal component.
    pub combination: Option<[String; 2]>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        let d = SelectionOptions::default();
        Self {
            candidates: [
                FeatureTable::GP_PRECIP,
                FeatureTable::FV_DDF,
                FeatureTable::FC_DDF,
                FeatureTable::MELT_TEST,
                FeatureTable::FREEZEUP,
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            max_steps: d.max_steps,
            min_aicc_improvement: d.min_aicc_improvement,
            max_p_value: d.max_p_value,
            aicc_loglik: AiccLoglik::Penalized,
            combination: Some([FeatureTable::GP_PRECIP.into(), FeatureTable::FV_DDF.into()]),
        }
    }
}

impl SelectionConfig {
    pub fn firth_options(&self) -> FirthOptions {
        FirthOptions { aicc_loglik: self.aicc_loglik, ..FirthOptions::default() }
    }

    pub fn options(&self) -> SelectionOptions {
        SelectionOptions {
            max_steps: self.max_steps,
            min_aicc_improvement: self.min_aicc_improvement,
            max_p_value: self.max_p_value,
            firth: self.firth_options(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Covariates of the projected model; empty means the selected model.
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: crate::bootstrap::DEFAULT_REPLICATES, level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorridorSource {
    /// Quantiles of the model probabilities.
    #[default]
    Parameter,
    /// Quantiles of per-model simulated flood frequencies.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub models: usize,
    pub replicates_per_model: usize,
    pub sample_mode: SampleMode,
    pub window: usize,
    pub quantiles: Vec<f64>,
    pub reference_years: Vec<i32>,
    /// Prepend the observed covariate history to each scenario.
    pub include_history: bool,
    pub corridor_source: CorridorSource,
    /// Years averaged for the per-scenario summary probability.
    pub summary_years: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            models: 1000,
            replicates_per_model: 1000,
            sample_mode: SampleMode::WithReplacement,
            window: crate::projection::DEFAULT_WINDOW,
            quantiles: crate::projection::DEFAULT_LEVELS.to_vec(),
            reference_years: vec![2030, 2050],
            include_history: true,
            corridor_source: CorridorSource::Parameter,
            summary_years: 20,
        }
    }
}

impl RunConfig {
    /// Parses TOML text; relative paths stay relative.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in [
            &mut self.stations.precip,
            &mut self.stations.upstream_temperature,
            &mut self.stations.downstream_temperature,
            &mut self.stations.melt_temperature,
        ]
        .into_iter()
        .flatten()
        {
            fix(&mut s.file);
            if let Some(d) = s.donor.as_mut() {
                fix(d);
            }
        }
        let d = &mut self.data;
        for p in [&mut d.flood_file, &mut d.covariates_file, &mut d.feature_table, &mut d.ensemble_file]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        d.forcing_files.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<()> {
        self.window.for_year(2000)?;
        self.melt_test.to_melt_test()?;
        let b = &self.bootstrap;
        if b.replicates == 0 {
            return Err(Error::Config("bootstrap.replicates must be at least 1".into()));
        }
        if !(b.level > 0.0 && b.level < 1.0) {
            return Err(Error::Config(format!("bootstrap.level must lie in (0, 1), got {}", b.level)));
        }
        let p = &self.projection;
        if p.models == 0 || p.replicates_per_model == 0 || p.window == 0 {
            return Err(Error::Config(
                "projection.models, replicates_per_model and window must be positive".into(),
            ));
        }
        if p.quantiles.is_empty()
            || p.quantiles.iter().any(|q| !(0.0..=1.0).contains(q))
            || p.quantiles.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(format!(
                "projection.quantiles must be increasing within [0, 1], got {:?}",
                p.quantiles
            )));
        }
        Ok(())
    }

    /// The master seed, or an error naming the stochastic stage.
    pub fn require_seed(&self, stage: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("stage `{stage}` is stochastic and needs a seed (config `seed` or --seed)")))
    }

    pub fn has_stations(&self) -> bool {
        let s = &self.stations;
        s.precip.is_some() || s.upstream_temperature.is_some() || s.downstream_temperature.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_setup() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.excluded_years, vec![1968, 1969, 1970, 1971]);
        assert_eq!(c.bootstrap.replicates, 1000);
        assert_eq!(c.projection.replicates_per_model, 1000);
        assert_eq!(c.projection.window, 20);
        assert_eq!(c.projection.quantiles, vec![0.025, 0.25, 0.5, 0.75, 0.975]);
        let w = c.window.for_year(1990).unwrap();
        assert_eq!(w.start.to_string(), "1989-11-01");
        assert_eq!(w.end.to_string(), "1990-04-30");
        assert_eq!(c.scaling, ScalingMode::ZScore);
        assert!(c.seed.is_none());
        assert!(c.require_seed("bootstrap").is_err());
    }

    #[test]
    fn parses_and_resolves() {
        let text = r#"
            seed = 7
            scaling = "percent-of-average"
            excluded_years = []
            [stations.precip]
            file = "gp.csv"
            donor = "/abs/bl.csv"
            [data]
            flood_file = "flood.csv"
            forcing_files = ["a.csv"]
            [projection]
            reference_years = [2040]
        "#;
        let mut c = RunConfig::from_toml(text).unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.scaling, ScalingMode::PercentOfAverage);
        let p = c.stations.precip.as_ref().unwrap();
        assert_eq!(p.file, PathBuf::from("/cfg/gp.csv"));
        assert_eq!(p.donor.as_deref(), Some(Path::new("/abs/bl.csv")));
        assert_eq!(c.data.forcing_files, vec![PathBuf::from("/cfg/a.csv")]);
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        assert!(RunConfig::from_toml("[window]\nstart = \"13-01\"").is_err());
        assert!(RunConfig::from_toml("[bootstrap]\nlevel = 1.5").is_err());
        assert!(RunConfig::from_toml("[projection]\nquantiles = [0.5, 0.25]").is_err());
        assert!(RunConfig::from_toml("[melt_test]\nlower = 200.0").is_err());
    }
}
