//! CSV and JSON readers and writers for every file the pipeline touches.
//!
//! Files that are read back (feature tables, ensembles) print floats in
//! the shortest form that parses back to the same double. Report files
//! print 6 significant digits via [`fmt_sig`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::bootstrap::{BootstrapEnsemble, ReplicateStatus};
use crate::error::{Error, Result};
use crate::features::{DailyRecord, FeatureTable, ScalingMode, SeasonFeatures, StationSeries};
use crate::projection::{instantaneous_return_period, Corridor, ScenarioForcing};

pub const STATION_HEADER: [&str; 4] = ["station_id", "date", "tmean_c", "precip_mm"];

/// `x` to 6 significant digits, trailing zeros trimmed; empty for NaN.
pub fn fmt_sig(x: f64) -> String {
    fmt_sig_n(x, 6)
}

pub fn fmt_sig_n(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Shortest round-trip representation.
pub fn fmt_full(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_full).unwrap_or_default()
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(file))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    create(path)?.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Renders into memory, then writes the file in one go.
fn to_path(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_bytes(path, &buf)
}

/// Line of the record in the file, 1-based, header included.
fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn header(reader: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    Ok(reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn read_records(reader: &mut csv::Reader<File>, path: &Path) -> Result<Vec<csv::StringRecord>> {
    reader
        .records()
        .map(|r| {
            r.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::parse(path, line, e.to_string())
            })
        })
        .collect()
}

fn parse_opt_f64(s: &str, path: &Path, line: u64, col: &str) -> Result<Option<f64>> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(path, line, format!("column `{col}`: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("column `{col}`: non-finite value")));
    }
    Ok(Some(v))
}

fn parse_f64(s: &str, path: &Path, line: u64, col: &str) -> Result<f64> {
    parse_opt_f64(s, path, line, col)?
        .ok_or_else(|| Error::parse(path, line, format!("column `{col}` is empty")))
}

fn parse_int<T: std::str::FromStr>(s: &str, path: &Path, line: u64, col: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(path, line, format!("column `{col}`: `{s}` is not an integer")))
}

fn parse_flag(s: &str, path: &Path, line: u64, col: &str) -> Result<bool> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(Error::parse(path, line, format!("column `{col}`: expected 0 or 1, got `{s}`"))),
    }
}

/// Daily station file with header `station_id,date,tmean_c,precip_mm`.
/// Empty cells are missing values.
pub fn load_station_csv(path: &Path) -> Result<StationSeries> {
    let mut rdr = open_reader(path)?;
    let head = header(&mut rdr, path)?;
    if head != STATION_HEADER {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`, got `{}`", STATION_HEADER.join(","), head.join(",")),
        ));
    }
    let mut station: Option<String> = None;
    let mut records: Vec<DailyRecord> = Vec::new();
    let mut seen: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for rec in read_records(&mut rdr, path)? {
        let line = line_of(&rec);
        let id = &rec[0];
        match &station {
            None => station = Some(id.to_string()),
            Some(s) if s != id => {
                return Err(Error::parse(path, line, format!("station id `{id}` differs from `{s}`")));
            }
            _ => {}
        }
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|_| Error::parse(path, line, format!("bad date `{}`", &rec[1])))?;
        if let Some(prev) = seen.insert(date, line) {
            return Err(Error::parse(path, line, format!("duplicate date {date} (first on line {prev})")));
        }
        let tmean = parse_opt_f64(&rec[2], path, line, "tmean_c")?;
        let precip = parse_opt_f64(&rec[3], path, line, "precip_mm")?;
        if precip.is_some_and(|p| p < 0.0) {
            return Err(Error::parse(path, line, format!("negative precipitation {}", &rec[3])));
        }
        records.push(DailyRecord::new(date, tmean, precip));
    }
    let id = station.unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    records.sort_by_key(|r| r.date);
    StationSeries::new(id, records)
}

pub fn write_station_csv(path: &Path, series: &StationSeries) -> Result<()> {
    to_path(path, |w| station_csv_to(w, series))
}

pub fn station_csv_to<W: Write>(out: W, series: &StationSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATION_HEADER)?;
    for r in series.records() {
        w.write_record([
            series.station_id().to_string(),
            r.date.format("%Y-%m-%d").to_string(),
            fmt_opt(r.tmean),
            fmt_opt(r.precip),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `year,flood` with flood in {0, 1}.
pub fn load_flood_file(path: &Path) -> Result<BTreeMap<i32, bool>> {
    let mut rdr = open_reader(path)?;
    let head = header(&mut rdr, path)?;
    if head != ["year", "flood"] {
        return Err(Error::parse(path, 1, format!("expected header `year,flood`, got `{}`", head.join(","))));
    }
    let mut out = BTreeMap::new();
    for rec in read_records(&mut rdr, path)? {
        let line = line_of(&rec);
        let year: i32 = parse_int(&rec[0], path, line, "year")?;
        let flood = parse_flag(&rec[1], path, line, "flood")?;
        if out.insert(year, flood).is_some() {
            return Err(Error::parse(path, line, format!("duplicate year {year}")));
        }
    }
    Ok(out)
}

/// Yearly covariates: `year,<name>...`, empty cells missing.
#[derive(Debug, Clone, PartialEq)]
pub struct YearlyCovariates {
    pub names: Vec<String>,
    pub rows: BTreeMap<i32, Vec<Option<f64>>>,
}

pub fn load_covariates_file(path: &Path) -> Result<YearlyCovariates> {
    let mut rdr = open_reader(path)?;
    let head = header(&mut rdr, path)?;
    if head.first().map(String::as_str) != Some("year") || head.len() < 2 {
        return Err(Error::parse(path, 1, "expected header `year,<covariate>...`"));
    }
    let names = head[1..].to_vec();
    let mut rows = BTreeMap::new();
    for rec in read_records(&mut rdr, path)? {
        let line = line_of(&rec);
        let year: i32 = parse_int(&rec[0], path, line, "year")?;
        let vals = names
            .iter()
            .enumerate()
            .map(|(j, n)| parse_opt_f64(&rec[j + 1], path, line, n))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(year, vals).is_some() {
            return Err(Error::parse(path, line, format!("duplicate year {year}")));
        }
    }
    Ok(YearlyCovariates { names, rows })
}

fn feature_columns(table: &FeatureTable) -> Vec<String> {
    let mut cols = vec![FeatureTable::YEAR.to_string(), FeatureTable::FLOOD.to_string()];
    cols.extend(table.covariate_names());
    cols
}

pub fn write_feature_table(path: &Path, table: &FeatureTable) -> Result<()> {
    to_path(path, |w| feature_table_to(w, table))
}

pub fn feature_table_to<W: Write>(out: W, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let cols = feature_columns(table);
    w.write_record(&cols)?;
    for r in table.rows() {
        let mut rec = vec![r.breakup_year.to_string(), (r.flood as u8).to_string()];
        rec.extend(cols[2..].iter().map(|c| fmt_opt(r.get(c))));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn load_feature_table(path: &Path) -> Result<FeatureTable> {
    let mut rdr = open_reader(path)?;
    let head = header(&mut rdr, path)?;
    if head.len() < 2 || head[0] != FeatureTable::YEAR || head[1] != FeatureTable::FLOOD {
        return Err(Error::parse(
            path,
            1,
            format!("feature table must start with `{},{}`", FeatureTable::YEAR, FeatureTable::FLOOD),
        ));
    }
    let covs = &head[2..];
    let extra: Vec<String> =
        covs.iter().filter(|c| !FeatureTable::STANDARD.contains(&c.as_str())).cloned().collect();
    let mut rows = Vec::new();
    for rec in read_records(&mut rdr, path)? {
        let line = line_of(&rec);
        let mut row = SeasonFeatures::new(
            parse_int(&rec[0], path, line, FeatureTable::YEAR)?,
            parse_flag(&rec[1], path, line, FeatureTable::FLOOD)?,
        );
        for (j, c) in covs.iter().enumerate() {
            row.set(c, parse_opt_f64(&rec[j + 2], path, line, c)?);
        }
        rows.push(row);
    }
    FeatureTable::new(rows, extra)
}

/// Ensemble file: a `#` comment line carrying the coefficient names and
/// scaling, then `replicate,beta_0,...,beta_k,converged`.
pub fn write_ensemble_csv(path: &Path, e: &BootstrapEnsemble, scaling: ScalingMode) -> Result<()> {
    to_path(path, |w| ensemble_csv_to(w, e, scaling))
}

pub fn ensemble_csv_to<W: Write>(mut out: W, e: &BootstrapEnsemble, scaling: ScalingMode) -> Result<()> {
    writeln!(out, "# names={} scaling={} seed={}", e.names.join(";"), scaling.as_str(), e.seed)
        .map_err(|err| Error::io("<ensemble>", err))?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["replicate".to_string()];
    head.extend((0..e.names.len()).map(|j| format!("beta_{j}")));
    head.push("converged".into());
    w.write_record(&head)?;
    for (b, (row, status)) in e.betas.iter().zip(&e.status).enumerate() {
        let mut rec = vec![b.to_string()];
        rec.extend(row.iter().map(|v| if v.is_finite() { fmt_full(*v) } else { String::new() }));
        rec.push(((*status == ReplicateStatus::Converged) as u8).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|err| Error::io("<csv>", err))
}

pub fn load_ensemble_csv(path: &Path) -> Result<(BootstrapEnsemble, ScalingMode)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::parse(path, 1, "missing `# names=... scaling=...` line"))?;
    let mut names = None;
    let mut scaling = None;
    let mut seed = 0;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("names", v)) => names = Some(v.split(';').map(str::to_string).collect::<Vec<_>>()),
            Some(("scaling", v)) => scaling = Some(ScalingMode::parse(v)?),
            Some(("seed", v)) => seed = parse_int(v, path, 1, "seed")?,
            _ => {}
        }
    }
    let names = names.ok_or_else(|| Error::parse(path, 1, "missing names="))?;
    let scaling = scaling.ok_or_else(|| Error::parse(path, 1, "missing scaling="))?;
    let mut rdr = open_reader(path)?;
    let head = header(&mut rdr, path)?;
    let k = names.len();
    if head.len() != k + 2 || head[0] != "replicate" || head[k + 1] != "converged" {
        return Err(Error::parse(path, 2, format!("expected replicate, {k} beta columns and converged")));
    }
    let mut betas = Vec::new();
    let mut status = Vec::new();
    for rec in read_records(&mut rdr, path)? {
        let line = line_of(&rec);
        let row = (1..=k)
            .map(|j| Ok(parse_opt_f64(&rec[j], path, line, &head[j])?.unwrap_or(f64::NAN)))
            .collect::<Result<Vec<_>>>()?;
        let ok = parse_flag(&rec[k + 1], path, line, "converged")?;
        if ok && row.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, line, "converged replicate with empty coefficient"));
        }
        betas.push(row);
        status.push(if ok { ReplicateStatus::Converged } else { ReplicateStatus::Failed });
    }
    Ok((BootstrapEnsemble { names, betas, status, seed, source_beta: None }, scaling))
}

/// Scenario forcing file `gcm,rcp,year,<covariates>`; blocks are
/// returned in order of first appearance.
pub fn load_forcing_csv(path: &Path, scaling: ScalingMode) -> Result<Vec<ScenarioForcing>> {
    let mut rdr = open_reader(path)?;
    let head = header(&mut rdr, path)?;
    if head.len() < 4 || head[..3] != ["gcm", "rcp", "year"] {
        return Err(Error::parse(path, 1, "expected header `gcm,rcp,year,<covariate>...`"));
    }
    let names = head[3..].to_vec();
    let mut blocks: Vec<((String, String), Vec<i32>, Vec<Vec<f64>>, u64)> = Vec::new();
    for rec in read_records(&mut rdr, path)? {
        let line = line_of(&rec);
        let key = (rec[0].to_string(), rec[1].to_string());
        let year: i32 = parse_int(&rec[2], path, line, "year")?;
        let vals = names
            .iter()
            .enumerate()
            .map(|(j, n)| parse_f64(&rec[j + 3], path, line, n))
            .collect::<Result<Vec<_>>>()?;
        match blocks.iter_mut().find(|b| b.0 == key) {
            Some(b) => {
                b.1.push(year);
                b.2.push(vals);
            }
            None => blocks.push((key, vec![year], vec![vals], line)),
        }
    }
    if blocks.is_empty() {
        return Err(Error::parse(path, 2, "no forcing rows"));
    }
    blocks
        .into_iter()
        .map(|((gcm, rcp), years, values, line)| {
            ScenarioForcing::new(gcm, rcp, years, names.clone(), values, scaling)
                .map_err(|e| Error::parse(path, line, e.to_string()))
        })
        .collect()
}

pub fn write_forcing_csv(path: &Path, scenarios: &[ScenarioForcing]) -> Result<()> {
    to_path(path, |w| forcing_csv_to(w, scenarios))
}

pub fn forcing_csv_to<W: Write>(out: W, scenarios: &[ScenarioForcing]) -> Result<()> {
    let first = scenarios.first().ok_or_else(|| Error::InvalidArgument("no scenarios".into()))?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["gcm".to_string(), "rcp".into(), "year".into()];
    head.extend(first.names().iter().cloned());
    w.write_record(&head)?;
    for s in scenarios {
        if s.names() != first.names() {
            return Err(Error::InvalidArgument("scenarios have different covariates".into()));
        }
        for (y, row) in s.years().iter().zip(s.values()) {
            let mut rec = vec![s.gcm.clone(), s.rcp.clone(), y.to_string()];
            rec.extend(row.iter().map(|v| fmt_full(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `year,level,p,return_period`; the return period at level `q` is
/// `1 / p` at level `1 - q` and is left empty when that level is absent or
/// `p` is 0 or 1.
pub fn write_corridor_csv(path: &Path, c: &Corridor) -> Result<()> {
    to_path(path, |w| corridor_csv_to(w, c))
}

pub fn corridor_csv_to<W: Write>(out: W, c: &Corridor) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["year", "level", "p", "return_period"])?;
    for (y, row) in c.years.iter().zip(&c.values) {
        for (&q, &p) in c.levels.iter().zip(row) {
            let rp = c
                .level_index(1.0 - q)
                .and_then(|j| instantaneous_return_period(row[j]).ok())
                .map(fmt_sig)
                .unwrap_or_default();
            w.write_record([y.to_string(), fmt_sig(q), fmt_sig(p), rp])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(42.17223), "42.1722");
        assert_eq!(fmt_sig(0.007845023030455634), "0.00784502");
        assert_eq!(fmt_sig(-4.84), "-4.84");
        assert_eq!(fmt_sig(1500.0), "1500");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig(0.0000012345678), "1.23457e-6");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(999999.7), "1e6");
        assert_eq!(fmt_sig(f64::NAN), "");
    }

    fn tmp(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        (dir, p)
    }

    #[test]
    fn station_file_parsing() {
        let (_d, p) = tmp(
            "s.csv",
            "station_id,date,tmean_c,precip_mm\nGP,2000-01-01,-3.5,0.2\nGP,2000-01-02,,1\nGP,2000-01-03,1.0,\n",
        );
        let s = load_station_csv(&p).unwrap();
        assert_eq!(s.records().len(), 3);
        assert_eq!(s.records()[1].tmean, None);
        assert_eq!(s.records()[2].precip, None);
        assert_eq!(s.station_id(), "GP");
    }

    #[test]
    fn station_file_errors_name_the_line() {
        let (_d, p) = tmp("s.csv", "station_id,date,tmean_c,precip_mm\nGP,2000-01-01,1,0\nGP,2000-01-01,2,0\n");
        match load_station_csv(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        let (_d, p) = tmp("s.csv", "station_id,date,tmean_c,precip_mm\nGP,2000-01-01,1,-0.5\n");
        assert!(matches!(load_station_csv(&p), Err(Error::Parse { line: 2, .. })));
        let (_d, p) = tmp("s.csv", "station,date,t,p\n");
        assert!(matches!(load_station_csv(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn feature_table_round_trip() {
        let rows = (0..5)
            .map(|i| {
                let mut r = SeasonFeatures::new(1990 + i, i % 2 == 0);
                r.gp_precip_pct = Some(0.1 + i as f64 / 3.0);
                r.fv_ddf = Some(-1234.5678901234567 * i as f64);
                r.melt_test = if i == 3 { None } else { Some(i as f64) };
                r.extra.insert("hh_nov".into(), Some(std::f64::consts::PI.powi(i)));
                r
            })
            .collect();
        let t = FeatureTable::new(rows, vec!["hh_nov".into()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_feature_table(&p, &t).unwrap();
        assert_eq!(load_feature_table(&p).unwrap(), t);
    }

    #[test]
    fn ensemble_round_trip() {
        let e = BootstrapEnsemble {
            names: vec!["constant".into(), "gp_precip_pct".into()],
            betas: vec![vec![-1.0 / 3.0, 2.5], vec![f64::NAN, f64::NAN], vec![0.1, 1e-300]],
            status: vec![ReplicateStatus::Converged, ReplicateStatus::Failed, ReplicateStatus::Converged],
            seed: 17,
            source_beta: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_ensemble_csv(&p, &e, ScalingMode::ZScore).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("replicate,beta_0,beta_1,converged"));
        let (back, mode) = load_ensemble_csv(&p).unwrap();
        assert_eq!(mode, ScalingMode::ZScore);
        assert_eq!(back.names, e.names);
        assert_eq!(back.seed, 17);
        assert_eq!(back.betas[0], e.betas[0]);
        assert_eq!(back.betas[2], e.betas[2]);
        assert_eq!(back.converged_count(), 2);
    }

    #[test]
    fn forcing_blocks() {
        let (_d, p) = tmp(
            "f.csv",
            "gcm,rcp,year,gp_precip_pct,fv_ddf\nA,rcp45,2020,1,2\nA,rcp45,2021,1,2\nB,rcp85,2020,3,4\nB,rcp85,2021,3,4\n",
        );
        let f = load_forcing_csv(&p, ScalingMode::Raw).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].label(), "B_rcp85");
        assert_eq!(f[1].values()[1], vec![3.0, 4.0]);
        let (_d, p) = tmp("f.csv", "gcm,rcp,year,x\nA,r,2020,1\nA,r,2022,1\n");
        assert!(matches!(load_forcing_csv(&p, ScalingMode::Raw), Err(Error::Parse { .. })));
    }

    #[test]
    fn flood_file() {
        let (_d, p) = tmp("fl.csv", "year,flood\n1962,0\n1963,1\n");
        let f = load_flood_file(&p).unwrap();
        assert_eq!(f[&1963], true);
        let (_d, p) = tmp("fl.csv", "year,flood\n1962,2\n");
        assert!(load_flood_file(&p).is_err());
    }
}
