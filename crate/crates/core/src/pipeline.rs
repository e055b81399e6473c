//! Stage orchestration: features, select, fit, bootstrap, project, report.
//!
//! Requested stages run in dependency order. A stage whose output is needed
//! but which was not requested runs in memory without writing files. The
//! whole bundle is rendered in memory and written only when every stage
//! succeeded, together with `manifest.json` listing each file's SHA-256.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bootstrap::{parametric_bootstrap, percentile_ci, sample_models, BootstrapEnsemble, PercentileInterval};
use crate::config::{CorridorSource, RunConfig, StationRef};
use crate::error::{Error, Result};
use crate::features::{
    degree_days_freezing, fill_gaps_precip, fill_gaps_temperature, winter_precip, AffineScaling, FeatureTable,
    ScalingMode, SeasonFeatures, StationSeries,
};
use crate::firth::{fit_firth_with, DesignMatrix, FittedModel};
use crate::io;
use crate::projection::{project_probabilities, simulate_summary, Corridor, SampledModels, ScenarioForcing};
use crate::report::{self, MissingFeature, ScenarioSummary, WaitReport};
use crate::selection::{compare_combinations, forward_stepwise, Combinations, SelectionPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Features,
    Select,
    Fit,
    Bootstrap,
    Project,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Features, Stage::Select, Stage::Fit, Stage::Bootstrap, Stage::Project, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Features => "features",
            Stage::Select => "select",
            Stage::Fit => "fit",
            Stage::Bootstrap => "bootstrap",
            Stage::Project => "project",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }

    /// Comma-separated list, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.trim() == "all" {
            return Ok(Stage::ALL.to_vec());
        }
        let mut out: Vec<Stage> = s.split(',').filter(|p| !p.trim().is_empty()).map(Stage::parse).collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::InvalidArgument("no stages given".into()));
        }
        Ok(out)
    }
}

fn in_stage<T>(stage: Stage, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage { stage: stage.as_str(), source: Box::new(other) },
    })
}

/// Feature table plus everything recorded while building it.
#[derive(Debug, Clone)]
pub struct FeatureBuild {
    /// Every flood-file year, raw units.
    pub raw: FeatureTable,
    /// Excluded years dropped, scaled.
    pub table: FeatureTable,
    /// Every year, scaled with the parameters fitted on `table`.
    pub history: FeatureTable,
    pub scaling: BTreeMap<String, AffineScaling>,
    pub scaling_mode: ScalingMode,
    /// `station_id,date,field,value,donor_id` rows.
    pub provenance: Vec<Vec<String>>,
    pub missing: Vec<MissingFeature>,
    pub required: Vec<String>,
}

impl FeatureBuild {
    /// Rows complete on the required columns: the modelling table.
    pub fn model_table(&self) -> Result<FeatureTable> {
        let req: Vec<&str> = self.required.iter().map(String::as_str).collect();
        self.table.complete_on(&req)
    }
}

struct Filled {
    series: StationSeries,
    provenance: Vec<Vec<String>>,
}

fn load_filled(s: &StationRef, precip: bool) -> Result<Filled> {
    let target = io::load_station_csv(&s.file)?;
    let Some(donor_path) = &s.donor else {
        return Ok(Filled { series: target, provenance: Vec::new() });
    };
    let donor = io::load_station_csv(donor_path)?;
    let id = target.station_id().to_string();
    let t = fill_gaps_temperature(&target, &donor)?;
    let mut provenance = report::filled_values(&id, &t.filled);
    let series = if precip {
        let p = fill_gaps_precip(&t.series, &donor)?;
        provenance.extend(report::filled_values(&id, &p.filled));
        p.series
    } else {
        t.series
    };
    Ok(Filled { series, provenance })
}

fn missing_reason(e: Error) -> Result<String> {
    match e {
        Error::MissingData { dates, .. } => Ok(format!(
            "{} unfilled day(s) from {} to {}",
            dates.len(),
            dates.first().map(|d| d.to_string()).unwrap_or_default(),
            dates.last().map(|d| d.to_string()).unwrap_or_default()
        )),
        other => Err(other),
    }
}

fn raw_from_stations(cfg: &RunConfig) -> Result<(FeatureTable, Vec<Vec<String>>, Vec<MissingFeature>)> {
    let flood_file = cfg
        .data
        .flood_file
        .as_ref()
        .ok_or_else(|| Error::Config("data.flood_file is required to build features from stations".into()))?;
    let floods = io::load_flood_file(flood_file)?;
    let mut provenance = Vec::new();
    let mut missing = Vec::new();
    let mut load = |s: &Option<StationRef>, precip: bool| -> Result<Option<StationSeries>> {
        s.as_ref()
            .map(|s| {
                let f = load_filled(s, precip)?;
                provenance.extend(f.provenance);
                Ok(f.series)
            })
            .transpose()
    };
    let gp = load(&cfg.stations.precip, true)?;
    let up = load(&cfg.stations.upstream_temperature, false)?;
    let down = load(&cfg.stations.downstream_temperature, false)?;
    let melt_own = load(&cfg.stations.melt_temperature, false)?;
    let melt_series = melt_own.as_ref().or(gp.as_ref());
    let melt = cfg.melt_test.to_melt_test()?;

    let mut rows = Vec::new();
    for (&year, &flood) in &floods {
        let mut row = SeasonFeatures::new(year, flood);
        let window = cfg.window.for_year(year)?;
        let mut record = |col: &str, r: Result<Option<f64>>, row: &mut SeasonFeatures| -> Result<()> {
            match r {
                Ok(v) => {
                    if v.is_none() {
                        missing.push(MissingFeature {
                            breakup_year: year,
                            column: col.into(),
                            reason: format!("cumulative thaw never reached {} by the end date", melt.upper),
                        });
                    }
                    row.set(col, v);
                }
                Err(e) => missing.push(MissingFeature { breakup_year: year, column: col.into(), reason: missing_reason(e)? }),
            }
            Ok(())
        };
        if let Some(s) = &gp {
            record(FeatureTable::GP_PRECIP, winter_precip(s, &window).map(Some), &mut row)?;
        }
        if let Some(s) = &up {
            record(FeatureTable::FV_DDF, degree_days_freezing(s, &window).map(|v| Some(-v)), &mut row)?;
        }
        if let Some(s) = &down {
            record(FeatureTable::FC_DDF, degree_days_freezing(s, &window).map(|v| Some(-v)), &mut row)?;
        }
        if let Some(s) = melt_series {
            record(FeatureTable::MELT_TEST, melt.evaluate(s, year).map(|d| d.map(f64::from)), &mut row)?;
        }
        rows.push(row);
    }

    // winter precipitation as a fraction of its mean over the fitting years
    if gp.is_some() {
        let baseline: Vec<f64> = rows
            .iter()
            .filter(|r| !cfg.excluded_years.contains(&r.breakup_year))
            .filter_map(|r| r.gp_precip_pct)
            .collect();
        let pct = AffineScaling::fit(ScalingMode::PercentOfAverage, &baseline)?;
        for r in rows.iter_mut() {
            r.gp_precip_pct = r.gp_precip_pct.map(|v| pct.apply(v));
        }
    }

    let mut extra = Vec::new();
    if let Some(path) = &cfg.data.covariates_file {
        let cov = io::load_covariates_file(path)?;
        for name in &cov.names {
            if name == FeatureTable::YEAR || name == FeatureTable::FLOOD {
                return Err(Error::Config(format!("covariates file may not contain `{name}`")));
            }
            if !FeatureTable::STANDARD.contains(&name.as_str()) {
                extra.push(name.clone());
            }
        }
        for r in rows.iter_mut() {
            match cov.rows.get(&r.breakup_year) {
                Some(vals) => cov.names.iter().zip(vals).for_each(|(n, v)| r.set(n, *v)),
                None => cov.names.iter().for_each(|n| r.set(n, None)),
            }
        }
    }
    Ok((FeatureTable::new(rows, extra)?, provenance, missing))
}

/// Builds the raw table (from stations or a supplied table), drops the
/// excluded years, and scales every non-empty covariate column.
pub fn build_feature_table(cfg: &RunConfig) -> Result<FeatureBuild> {
    let (raw, provenance, mut missing) = match &cfg.data.feature_table {
        Some(path) => (io::load_feature_table(path)?, Vec::new(), Vec::new()),
        None if cfg.has_stations() => raw_from_stations(cfg)?,
        None => {
            return Err(Error::Config(
                "no feature source: set data.feature_table or at least one [stations.*] entry".into(),
            ))
        }
    };
    let fitting = raw.without_years(&cfg.excluded_years);
    let mut scaling = BTreeMap::new();
    for name in raw.covariate_names() {
        let baseline: Vec<f64> = fitting.column(&name)?.into_iter().flatten().collect();
        if baseline.is_empty() {
            continue;
        }
        let s = AffineScaling::fit(cfg.scaling, &baseline)
            .map_err(|e| Error::InvalidArgument(format!("cannot scale column `{name}`: {e}")))?;
        scaling.insert(name, s);
    }
    let table = fitting.with_scaling(&scaling)?;
    let history = raw.with_scaling(&scaling)?;
    for col in &cfg.data.required_columns {
        for (year, v) in table.years().into_iter().zip(table.column(col)?) {
            if v.is_none() && !missing.iter().any(|m| m.breakup_year == year && &m.column == col) {
                missing.push(MissingFeature { breakup_year: year, column: col.clone(), reason: "value absent".into() });
            }
        }
    }
    missing.sort_by(|a, b| (a.breakup_year, &a.column).cmp(&(b.breakup_year, &b.column)));
    Ok(FeatureBuild {
        raw,
        table,
        history,
        scaling,
        scaling_mode: cfg.scaling,
        provenance,
        missing,
        required: cfg.data.required_columns.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub path: SelectionPath,
    pub combinations: Option<Combinations>,
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub model: FittedModel,
    pub design: DesignMatrix,
}

#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub ensemble: BootstrapEnsemble,
    pub scaling: ScalingMode,
    pub intervals: Option<Vec<PercentileInterval>>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub forcing: ScenarioForcing,
    pub corridor: Corridor,
    pub waits: Vec<WaitReport>,
    pub summary: ScenarioSummary,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub models: SampledModels,
    pub scenarios: Vec<ScenarioResult>,
}

/// Lazily computed stage results.
struct Context<'a> {
    cfg: &'a RunConfig,
    features: Option<FeatureBuild>,
    selection: Option<Selection>,
    fit: Option<Fit>,
    bootstrap: Option<Bootstrap>,
    projection: Option<Projection>,
    /// Bootstrap requested explicitly; otherwise a configured ensemble file wins.
    fresh_bootstrap: bool,
}

impl<'a> Context<'a> {
    fn features(&mut self) -> Result<&FeatureBuild> {
        if self.features.is_none() {
            info!("stage features");
            self.features = Some(in_stage(Stage::Features, build_feature_table(self.cfg))?);
        }
        Ok(self.features.as_ref().expect("set"))
    }

    fn selection(&mut self) -> Result<&Selection> {
        if self.selection.is_none() {
            let cfg = self.cfg;
            let base = in_stage(Stage::Features, self.features()?.model_table())?;
            info!("stage select");
            let sel = in_stage(Stage::Select, run_selection(cfg, &base))?;
            self.selection = Some(sel);
        }
        Ok(self.selection.as_ref().expect("set"))
    }

    fn fit(&mut self) -> Result<&Fit> {
        if self.fit.is_none() {
            let cfg = self.cfg;
            let covs = if cfg.fit.covariates.is_empty() {
                self.selection()?.path.chosen_covariates().to_vec()
            } else {
                cfg.fit.covariates.clone()
            };
            let base = in_stage(Stage::Features, self.features()?.model_table())?;
            info!("stage fit: {}", if covs.is_empty() { "constant".into() } else { covs.join(", ") });
            let fit = in_stage(Stage::Fit, run_fit(cfg, &base, &covs))?;
            self.fit = Some(fit);
        }
        Ok(self.fit.as_ref().expect("set"))
    }

    fn bootstrap(&mut self) -> Result<&Bootstrap> {
        if self.bootstrap.is_none() {
            let cfg = self.cfg;
            let boot = match (&cfg.data.ensemble_file, self.fresh_bootstrap) {
                (Some(path), false) => {
                    info!("loading ensemble {}", path.display());
                    let (ensemble, scaling) = in_stage(Stage::Bootstrap, io::load_ensemble_csv(path))?;
                    Bootstrap { ensemble, scaling, intervals: None }
                }
                _ => {
                    let seed = in_stage(Stage::Bootstrap, cfg.require_seed(Stage::Bootstrap.as_str()))?;
                    let scaling = cfg.scaling;
                    let fit = self.fit()?;
                    info!("stage bootstrap: {} replicates", cfg.bootstrap.replicates);
                    in_stage(Stage::Bootstrap, run_bootstrap(cfg, fit, seed, scaling))?
                }
            };
            self.bootstrap = Some(boot);
        }
        Ok(self.bootstrap.as_ref().expect("set"))
    }

    fn projection(&mut self) -> Result<&Projection> {
        if self.projection.is_none() {
            let cfg = self.cfg;
            let seed = in_stage(Stage::Project, cfg.require_seed(Stage::Project.as_str()))?;
            if cfg.data.forcing_files.is_empty() {
                return Err(in_stage::<()>(Stage::Project, Err(Error::Config("data.forcing_files is empty".into())))
                    .unwrap_err());
            }
            let boot = self.bootstrap()?.clone();
            let needs_features = cfg.projection.include_history || cfg.data.forcing_scaling != boot.scaling;
            let features = if needs_features { Some(self.features()?.clone()) } else { None };
            info!("stage project");
            let proj = in_stage(Stage::Project, run_projection(cfg, &boot, features.as_ref(), seed))?;
            self.projection = Some(proj);
        }
        Ok(self.projection.as_ref().expect("set"))
    }
}

fn run_selection(cfg: &RunConfig, base: &FeatureTable) -> Result<Selection> {
    let has_values = |c: &String| base.column(c).map(|v| v.iter().any(Option::is_some)).unwrap_or(true);
    let candidates: Vec<String> = if cfg.selection.candidates.is_empty() {
        base.covariate_names().into_iter().filter(has_values).collect()
    } else {
        let (keep, empty): (Vec<String>, Vec<String>) = cfg.selection.candidates.iter().cloned().partition(has_values);
        if !empty.is_empty() {
            warn!("candidates without any values skipped: {}", empty.join(", "));
        }
        keep
    };
    let path = forward_stepwise(base, &candidates, &cfg.selection.options())?;
    let pair = match &cfg.selection.combination {
        Some(p) => Some(p.clone()),
        None => match path.chosen_covariates() {
            [a, b] => Some([a.clone(), b.clone()]),
            _ => None,
        },
    };
    let combinations = pair
        .map(|[a, b]| compare_combinations(base, &a, &b, &cfg.selection.firth_options()))
        .transpose()?;
    Ok(Selection { path, combinations })
}

fn run_fit(cfg: &RunConfig, base: &FeatureTable, covs: &[String]) -> Result<Fit> {
    let refs: Vec<&str> = covs.iter().map(String::as_str).collect();
    let (design, _) = base.design(&refs)?;
    let opts = cfg.selection.firth_options();
    let model = fit_firth_with(&design, &opts)?.with_p_values(&design, &opts)?;
    if !model.converged {
        warn!("fit did not converge after {} iterations", model.iterations);
    }
    Ok(Fit { model, design })
}

fn run_bootstrap(cfg: &RunConfig, fit: &Fit, seed: u64, scaling: ScalingMode) -> Result<Bootstrap> {
    let opts = cfg.selection.firth_options();
    let ensemble = parametric_bootstrap(&fit.model, &fit.design, cfg.bootstrap.replicates, seed, &opts)?;
    info!("bootstrap {}", ensemble.diagnostics());
    let intervals = match percentile_ci(&ensemble, cfg.bootstrap.level) {
        Ok(ci) => Some(ci),
        Err(e @ Error::TooFewReplicates { .. }) => {
            warn!("no bootstrap intervals: {e}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Bootstrap { ensemble, scaling, intervals })
}

/// Observed covariates as a forcing block: the last contiguous run of
/// years complete on `names`.
pub fn history_forcing(history: &FeatureTable, names: &[String], scaling: ScalingMode) -> Result<ScenarioForcing> {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let complete = history.complete_on(&refs)?;
    let years = complete.years();
    let mut start = years.len().saturating_sub(1);
    while start > 0 && years[start - 1] + 1 == years[start] {
        start -= 1;
    }
    let rows = &complete.rows()[start..];
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no complete observed years for the history".into()));
    }
    if start > 0 {
        warn!("history starts at {} (gap before it)", rows[0].breakup_year);
    }
    let values = rows.iter().map(|r| names.iter().map(|n| r.get(n).expect("complete")).collect()).collect();
    ScenarioForcing::new(
        "observed",
        "history",
        rows.iter().map(|r| r.breakup_year).collect(),
        names.to_vec(),
        values,
        scaling,
    )
}

fn run_projection(cfg: &RunConfig, boot: &Bootstrap, features: Option<&FeatureBuild>, seed: u64) -> Result<Projection> {
    let p = &cfg.projection;
    let coefficients = sample_models(&boot.ensemble, p.models, seed, p.sample_mode)?;
    let models = SampledModels { names: boot.ensemble.names.clone(), scaling: boot.scaling, coefficients };
    let covs = models.names[1..].to_vec();

    let history = match (p.include_history, features) {
        (true, Some(f)) => {
            if f.scaling_mode != boot.scaling {
                return Err(Error::ScalingMismatch {
                    model: boot.scaling.as_str().into(),
                    forcing: f.scaling_mode.as_str().into(),
                });
            }
            Some(history_forcing(&f.history, &covs, boot.scaling)?)
        }
        _ => None,
    };

    let mut scenarios = Vec::new();
    for path in &cfg.data.forcing_files {
        for raw in io::load_forcing_csv(path, cfg.data.forcing_scaling)? {
            let raw = raw.select(&covs)?;
            let mut forcing = if raw.scaling == boot.scaling {
                raw
            } else {
                let f = features.ok_or_else(|| Error::ScalingMismatch {
                    model: boot.scaling.as_str().into(),
                    forcing: raw.scaling.as_str().into(),
                })?;
                let params: BTreeMap<String, AffineScaling> = raw
                    .names()
                    .iter()
                    .filter_map(|n| f.scaling.get(n).map(|s| (n.clone(), *s)))
                    .collect();
                let missing: Vec<&String> = raw.names().iter().filter(|n| !params.contains_key(*n)).collect();
                if let Some(n) = missing.first() {
                    return Err(Error::UnknownCovariate((*n).clone()));
                }
                raw.to_model_scaling(&params)?
            };
            if let Some(h) = &history {
                forcing = forcing.with_history(h)?;
            }
            info!("scenario {} ({}-{})", forcing.label(), forcing.years()[0], forcing.years()[forcing.years().len() - 1]);
            scenarios.push(run_scenario(cfg, &models, forcing, seed)?);
        }
    }
    Ok(Projection { models, scenarios })
}

fn run_scenario(cfg: &RunConfig, models: &SampledModels, forcing: ScenarioForcing, seed: u64) -> Result<ScenarioResult> {
    let p = &cfg.projection;
    let fan = project_probabilities(models, &forcing)?;
    let sim = simulate_summary(&fan, p.replicates_per_model, seed, &p.reference_years)?;
    let corridor = match p.corridor_source {
        CorridorSource::Parameter => fan.moving_average(p.window)?.corridor(&p.quantiles)?,
        CorridorSource::Simulated => sim.frequency_fan().moving_average(p.window)?.corridor(&p.quantiles)?,
    };
    let waits = sim.waits.iter().map(|w| WaitReport::new(&forcing.gcm, &forcing.rcp, w, &p.quantiles)).collect();
    let years = forcing.years();
    let last = years[years.len() - 1];
    let from = (last - p.summary_years as i32 + 1).max(years[0]);
    let summary = ScenarioSummary {
        gcm: forcing.gcm.clone(),
        rcp: forcing.rcp.clone(),
        first_year: years[0],
        last_year: last,
        summary_from: from,
        mean_p: fan.mean_over(from, last).unwrap_or(f64::NAN),
        pooled_simulated_frequency: sim.pooled_frequency(),
    };
    Ok(ScenarioResult { forcing, corridor, waits, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub stages: Vec<String>,
    pub files: Vec<ManifestFile>,
}

/// Files produced by a run, keyed by relative path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.files
            .iter()
            .map(|(name, bytes)| {
                let p = dir.join(name);
                io::write_bytes(&p, bytes)?;
                Ok(p)
            })
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_bytes(render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    Ok(buf)
}

/// Runs `stages` and returns the rendered bundle without touching disk.
pub fn render_pipeline(cfg: &RunConfig, stages: &[Stage]) -> Result<(Bundle, Manifest)> {
    cfg.validate()?;
    let mut stages = stages.to_vec();
    stages.sort();
    stages.dedup();
    let wants = |s: Stage| stages.contains(&s);
    let mut ctx = Context {
        cfg,
        features: None,
        selection: None,
        fit: None,
        bootstrap: None,
        projection: None,
        fresh_bootstrap: wants(Stage::Bootstrap),
    };
    // fail fast on a missing seed before any work
    for s in [Stage::Bootstrap, Stage::Project] {
        if wants(s) {
            cfg.require_seed(s.as_str())?;
        }
    }
    let mut bundle = Bundle::default();

    if wants(Stage::Features) {
        let f = ctx.features()?;
        bundle.add("features.csv", csv_bytes(|w| io::feature_table_to(w, &f.table))?);
        bundle.add("features_raw.csv", csv_bytes(|w| io::feature_table_to(w, &f.raw))?);
        bundle.add("scaling.csv", report::scaling(&f.scaling)?);
        bundle.add("provenance.csv", report::provenance(f.provenance.clone())?);
        bundle.add("missing_features.csv", report::missing_features(&f.missing)?);
    }
    if wants(Stage::Select) {
        let s = ctx.selection()?;
        bundle.add("selection_candidates.csv", report::selection_candidates(&s.path)?);
    }
    if wants(Stage::Fit) {
        let f = ctx.fit()?;
        bundle.add("model.csv", report::fitted_model(&f.model)?);
        bundle.add("model_summary.csv", report::fit_summary(&f.model, cfg.scaling.as_str())?);
    }
    if wants(Stage::Bootstrap) {
        let b = ctx.bootstrap()?;
        bundle.add("ensemble.csv", csv_bytes(|w| io::ensemble_csv_to(w, &b.ensemble, b.scaling))?);
        bundle.add("bootstrap_diagnostics.csv", report::bootstrap_diagnostics(&b.ensemble)?);
    }
    if wants(Stage::Project) {
        let p = ctx.projection()?;
        for s in &p.scenarios {
            let label = s.forcing.label();
            bundle.add(format!("corridor_{label}.csv"), csv_bytes(|w| io::corridor_csv_to(w, &s.corridor))?);
            bundle.add(format!("waits_{label}.json"), report::wait_reports_json(&s.waits)?);
        }
    }
    if wants(Stage::Report) {
        let sel = ctx.selection()?.clone();
        bundle.add("table2.csv", report::selection_path(&sel.path)?);
        if let Some(c) = &sel.combinations {
            bundle.add("table3.csv", report::combinations(c)?);
            bundle.add("principal_component.csv", report::principal_component(c)?);
        }
        let fit = ctx.fit()?.clone();
        if cfg.seed.is_some() {
            // a frozen ensemble has no intervals of its own; recompute them
            let b = ctx.bootstrap()?;
            let ci = match &b.intervals {
                Some(ci) => Some(ci.clone()),
                None => percentile_ci(&b.ensemble, cfg.bootstrap.level).ok(),
            };
            if let Some(ci) = ci {
                if ci.len() == fit.model.k() {
                    bundle.add("table4.csv", report::bootstrap_intervals(&fit.model, &ci)?);
                }
            }
            if !cfg.data.forcing_files.is_empty() {
                let p = ctx.projection()?;
                let waits: Vec<WaitReport> = p.scenarios.iter().flat_map(|s| s.waits.iter().cloned()).collect();
                bundle.add("table5.csv", report::wait_table(&waits)?);
                let sums: Vec<ScenarioSummary> = p.scenarios.iter().map(|s| s.summary.clone()).collect();
                bundle.add("scenario_summary.csv", report::scenario_summaries(&sums)?);
            }
        } else {
            warn!("report: no seed, skipping bootstrap and projection tables");
        }
    }

    let config_text = cfg.to_toml();
    bundle.add("config_used.toml", config_text.clone().into_bytes());
    let manifest = Manifest {
        tool: "icejam".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: cfg.seed,
        stages: stages.iter().map(|s| s.as_str().to_string()).collect(),
        files: bundle.files.iter().map(|(p, b)| ManifestFile { path: p.clone(), sha256: sha256_hex(b) }).collect(),
    };
    let mut m = serde_json::to_vec_pretty(&manifest)?;
    m.push(b'\n');
    bundle.add("manifest.json", m);
    Ok((bundle, manifest))
}

/// Runs `stages` and writes the bundle into `out_dir`.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage], out_dir: &Path) -> Result<(Manifest, Vec<PathBuf>)> {
    let (bundle, manifest) = render_pipeline(cfg, stages)?;
    let written = bundle.write_to(out_dir)?;
    Ok((manifest, written))
}
