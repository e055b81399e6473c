//! Synthetic station records, flood indicators and scenario forcings for
//! demos and end-to-end tests.
//!
//! A regional daily temperature and precipitation signal drives six
//! stations (three targets, three donors). Targets lose a fraction of their
//! values at random; donors stay complete so every gap is fillable. Flood
//! indicators are drawn from a known logistic model on the standardized
//! winter precipitation and upstream freezing features computed from the
//! same records.

use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::config::{RunConfig, StationRef};
use crate::error::{Error, Result};
use crate::features::{
    date_range, degree_days_freezing, fill_gaps_precip, fill_gaps_temperature, winter_precip, AffineScaling,
    DailyRecord, Field, FeatureTable, ScalingMode, SeasonWindow, StationSeries,
};
use crate::firth::logistic;
use crate::io;
use crate::projection::ScenarioForcing;

pub const GCMS: [&str; 6] = ["CanESM2", "CCSM4", "CNRM-CM5", "HadGEM2-ES", "INM-CM4", "MPI-ESM-LR"];
pub const RCPS: [&str; 2] = ["rcp45", "rcp85"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub first_year: i32,
    pub last_year: i32,
    pub seed: u64,
    /// Probability that a target value is deleted.
    pub gap_rate: f64,
    /// Flood model on (constant, z precip, z upstream freezing).
    pub beta: [f64; 3],
    pub gcms: usize,
    pub rcps: usize,
    pub projection_end: i32,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            first_year: 1962,
            last_year: 2020,
            seed: 1,
            gap_rate: 0.01,
            beta: [-2.6, 1.9, -1.5],
            gcms: GCMS.len(),
            rcps: RCPS.len(),
            projection_end: 2100,
        }
    }
}

/// Paths and ground truth of a generated dataset.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    /// `(station_id, date, field)` of every deleted target value.
    pub injected_gaps: Vec<(String, NaiveDate, Field)>,
    pub floods: Vec<(i32, bool)>,
}

struct Regional {
    dates: Vec<NaiveDate>,
    temp: Vec<f64>,
    precip: Vec<f64>,
}

fn regional(opts: &SyntheticOptions, rng: &mut ChaCha8Rng) -> Result<Regional> {
    let start = NaiveDate::from_ymd_opt(opts.first_year - 1, 10, 1).ok_or_else(bad_years)?;
    let end = NaiveDate::from_ymd_opt(opts.last_year, 6, 30).ok_or_else(bad_years)?;
    let dates: Vec<NaiveDate> = date_range(start, end).collect();
    let season_anom = Normal::<f64>::new(0.0, 2.5).expect("sd > 0");
    let spring_anom = Normal::new(0.0, 1.5).expect("sd > 0");
    let wet_log = Normal::<f64>::new(0.0, 0.3).expect("sd > 0");
    let shock = Normal::new(0.0, 3.0).expect("sd > 0");
    let years = opts.first_year..=opts.last_year;
    let anoms: Vec<(f64, f64, f64)> = years
        .map(|_| (season_anom.sample(rng), spring_anom.sample(rng), wet_log.sample(rng).exp()))
        .collect();
    let mut temp = Vec::with_capacity(dates.len());
    let mut precip = Vec::with_capacity(dates.len());
    let mut ar = 0.0;
    for d in &dates {
        // season ending in the spring of `sy`
        let sy = if d.month() >= 10 { d.year() + 1 } else { d.year() };
        let idx = (sy - opts.first_year).clamp(0, opts.last_year - opts.first_year) as usize;
        let (winter, spring, wet) = anoms[idx];
        let doy = d.ordinal() as f64;
        let clim = -3.0 + 19.0 * (2.0 * std::f64::consts::PI * (doy - 110.0) / 365.25).sin();
        let anomaly = if (5..=9).contains(&d.month()) { spring } else { winter };
        ar = 0.7 * ar + shock.sample(rng);
        temp.push(clim + anomaly + ar);
        let winter_month = !(5..=9).contains(&d.month());
        let mean = if winter_month { 1.8 * wet } else { 3.0 };
        let amount: f64 = if rng.random::<f64>() < 0.3 { Exp::new(1.0 / mean).expect("rate > 0").sample(rng) } else { 0.0 };
        precip.push((amount * 10.0).round() / 10.0);
    }
    Ok(Regional { dates, temp, precip })
}

fn bad_years() -> Error {
    Error::InvalidArgument("synthetic years out of range".into())
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

struct StationPair {
    target: StationSeries,
    donor: StationSeries,
}

/// Target = regional + shift; donor = target + monthly offset. Target
/// values are deleted at `gap_rate`.
fn station_pair(
    reg: &Regional,
    ids: (&str, &str),
    shift: f64,
    with_precip: bool,
    opts: &SyntheticOptions,
    rng: &mut ChaCha8Rng,
    gaps: &mut Vec<(String, NaiveDate, Field)>,
) -> Result<StationPair> {
    let noise = Normal::new(0.0, 0.4).expect("sd > 0");
    let mut target = Vec::with_capacity(reg.dates.len());
    let mut donor = Vec::with_capacity(reg.dates.len());
    for (i, d) in reg.dates.iter().enumerate() {
        let t = round1(reg.temp[i] + shift + noise.sample(rng));
        let dt = round1(t + 0.15 * d.month() as f64 - 1.0 + noise.sample(rng));
        let p = with_precip.then_some(reg.precip[i]);
        let dp = p.map(|v| round1(v * rng.random_range(0.8..1.2)));
        let mut rec = DailyRecord::new(*d, Some(t), p);
        if rng.random::<f64>() < opts.gap_rate {
            rec.tmean = None;
            gaps.push((ids.0.to_string(), *d, Field::Tmean));
        }
        if with_precip && rng.random::<f64>() < opts.gap_rate {
            rec.precip = None;
            gaps.push((ids.0.to_string(), *d, Field::Precip));
        }
        target.push(rec);
        donor.push(DailyRecord::new(*d, Some(dt), dp));
    }
    Ok(StationPair { target: StationSeries::new(ids.0, target)?, donor: StationSeries::new(ids.1, donor)? })
}

fn normal_pair(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).expect("sd > 0").sample(rng)
}

/// Writes stations, flood file, forcing file and `config.toml` into `dir`.
pub fn write_dataset(dir: &Path, opts: &SyntheticOptions) -> Result<SyntheticDataset> {
    if opts.last_year <= opts.first_year + 5 {
        return Err(Error::InvalidArgument("need more than five synthetic years".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let reg = regional(opts, &mut rng)?;
    let mut gaps = Vec::new();
    let gp = station_pair(&reg, ("GP", "BL"), 0.0, true, opts, &mut rng, &mut gaps)?;
    let fv = station_pair(&reg, ("FV", "HL"), -3.0, false, opts, &mut rng, &mut gaps)?;
    let fc = station_pair(&reg, ("FC", "FS"), -4.0, false, opts, &mut rng, &mut gaps)?;

    let files = [
        ("gp.csv", &gp.target),
        ("bl.csv", &gp.donor),
        ("fv.csv", &fv.target),
        ("hl.csv", &fv.donor),
        ("fc.csv", &fc.target),
        ("fs.csv", &fc.donor),
    ];
    for (name, s) in files {
        io::write_station_csv(&dir.join(name), s)?;
    }

    // flood indicators from the features the pipeline will compute
    let gp_filled = fill_gaps_precip(&fill_gaps_temperature(&gp.target, &gp.donor)?.series, &gp.donor)?.series;
    let fv_filled = fill_gaps_temperature(&fv.target, &fv.donor)?.series;
    let fc_filled = fill_gaps_temperature(&fc.target, &fc.donor)?.series;
    let excluded = RunConfig::default().excluded_years;
    let years: Vec<i32> = (opts.first_year..=opts.last_year).collect();
    let mut precip = Vec::new();
    let mut ddf = Vec::new();
    let mut ddf_down = Vec::new();
    for &y in &years {
        let w = SeasonWindow::winter(y);
        precip.push(winter_precip(&gp_filled, &w)?);
        ddf.push(-degree_days_freezing(&fv_filled, &w)?);
        ddf_down.push(-degree_days_freezing(&fc_filled, &w)?);
    }
    let fitting = |v: &[f64]| -> Vec<f64> {
        years.iter().zip(v).filter(|(y, _)| !excluded.contains(y)).map(|(_, x)| *x).collect()
    };
    let pct = AffineScaling::fit(ScalingMode::PercentOfAverage, &fitting(&precip))?;
    let precip_pct: Vec<f64> = precip.iter().map(|v| pct.apply(*v)).collect();
    let zp = AffineScaling::fit(ScalingMode::ZScore, &fitting(&precip_pct))?;
    let zd = AffineScaling::fit(ScalingMode::ZScore, &fitting(&ddf))?;
    let zc = AffineScaling::fit(ScalingMode::ZScore, &fitting(&ddf_down))?;
    let b = opts.beta;
    let floods: Vec<(i32, bool)> = years
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let eta = b[0] + b[1] * zp.apply(precip_pct[i]) + b[2] * zd.apply(ddf[i]);
            (y, rng.random::<f64>() < logistic(eta))
        })
        .collect();
    let mut flood_csv = String::from("year,flood\n");
    for (y, f) in &floods {
        flood_csv.push_str(&format!("{y},{}\n", *f as u8));
    }
    io::write_bytes(&dir.join("flood.csv"), flood_csv.as_bytes())?;

    // raw-unit scenarios: wetter and warmer with scenario-dependent trends
    let proj_years: Vec<i32> = (opts.last_year + 1..=opts.projection_end).collect();
    let span = (opts.projection_end - opts.last_year).max(1) as f64;
    let mut scenarios = Vec::new();
    for (g, gcm) in GCMS.iter().take(opts.gcms).enumerate() {
        for (r, rcp) in RCPS.iter().take(opts.rcps).enumerate() {
            let sens = 0.7 + 0.12 * g as f64;
            let forcing = (1.0 + r as f64) * sens;
            let values = proj_years
                .iter()
                .map(|&y| {
                    let f = (y - opts.last_year) as f64 / span;
                    let p = zp.invert(0.3 * forcing * f + normal_pair(&mut rng));
                    let cold = 1.2 * forcing * f + normal_pair(&mut rng);
                    let d = zd.invert(cold).min(0.0);
                    let c = zc.invert(cold + 0.2 * normal_pair(&mut rng)).min(0.0);
                    vec![p, d, c]
                })
                .collect();
            scenarios.push(ScenarioForcing::new(
                *gcm,
                *rcp,
                proj_years.clone(),
                vec![FeatureTable::GP_PRECIP.into(), FeatureTable::FV_DDF.into(), FeatureTable::FC_DDF.into()],
                values,
                ScalingMode::Raw,
            )?);
        }
    }
    if !scenarios.is_empty() {
        io::write_forcing_csv(&dir.join("forcing.csv"), &scenarios)?;
    }

    let station = |f: &str, d: &str| Some(StationRef { file: f.into(), donor: Some(d.into()) });
    let mut cfg = RunConfig { seed: Some(opts.seed), ..RunConfig::default() };
    cfg.stations.precip = station("gp.csv", "bl.csv");
    cfg.stations.upstream_temperature = station("fv.csv", "hl.csv");
    cfg.stations.downstream_temperature = station("fc.csv", "fs.csv");
    cfg.data.flood_file = Some("flood.csv".into());
    if !scenarios.is_empty() {
        cfg.data.forcing_files = vec!["forcing.csv".into()];
    }
    let reference: Vec<i32> = [2030, 2050].into_iter().filter(|y| proj_years.contains(y)).collect();
    cfg.projection.reference_years = reference;
    let config_path = dir.join("config.toml");
    io::write_bytes(&config_path, cfg.to_toml().as_bytes())?;
    Ok(SyntheticDataset { dir: dir.to_path_buf(), config_path, injected_gaps: gaps, floods })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_reproducible_and_loadable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = SyntheticOptions { first_year: 1990, last_year: 2000, gcms: 1, rcps: 1, projection_end: 2040, ..Default::default() };
        let da = write_dataset(a.path(), &opts).unwrap();
        let db = write_dataset(b.path(), &opts).unwrap();
        for f in ["gp.csv", "fv.csv", "flood.csv", "forcing.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
        assert_eq!(da.floods, db.floods);
        assert!(!da.injected_gaps.is_empty());
        let cfg = RunConfig::load(&da.config_path).unwrap();
        assert_eq!(cfg.stations.precip.unwrap().file, a.path().join("gp.csv"));
    }
}
