//! Report tables rendered to bytes. Numbers use 6 significant digits.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bootstrap::{BootstrapEnsemble, PercentileInterval, ReplicateStatus};
use crate::error::{Error, Result};
use crate::features::{AffineScaling, FilledValue};
use crate::firth::FittedModel;
use crate::io::fmt_sig;
use crate::projection::{MedianWait, WaitTimeSummary};
use crate::selection::{Combinations, SelectionPath};

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::io("<report>", e.into_error()))
}

/// Every candidate fitted during forward selection, one row per term.
pub fn selection_candidates(path: &SelectionPath) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for c in &path.candidate_table {
        let head = vec![
            c.step.to_string(),
            c.added.clone(),
            c.covariates.join("+"),
            c.n.to_string(),
            (c.comparable as u8).to_string(),
        ];
        match &c.outcome {
            Ok(m) => {
                let wald = m.model.wald_p_values();
                for (j, name) in m.model.names.iter().enumerate() {
                    let mut r = head.clone();
                    r.extend([
                        "ok".to_string(),
                        fmt_sig(m.aicc),
                        opt(m.lr_p),
                        name.clone(),
                        fmt_sig(m.model.beta[j]),
                        fmt_sig(wald[j]),
                    ]);
                    rows.push(r);
                }
            }
            Err(msg) => {
                let mut r = head;
                r.extend([msg.clone(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                rows.push(r);
            }
        }
    }
    render(
        &["step", "candidate", "covariates", "n", "comparable", "status", "aicc", "lr_p", "term", "estimate", "wald_p"],
        rows,
    )
}

/// Best model at each step of the forward path.
pub fn selection_path(path: &SelectionPath) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (s, step) in path.steps.iter().enumerate() {
        let wald = step.model.wald_p_values();
        let se = step.model.std_errors();
        for (j, name) in step.model.names.iter().enumerate() {
            rows.push(vec![
                s.to_string(),
                step.added.clone().unwrap_or_default(),
                (step.accepted as u8).to_string(),
                ((s == path.chosen) as u8).to_string(),
                step.model.n.to_string(),
                fmt_sig(step.aicc),
                opt(step.lr_p),
                name.clone(),
                fmt_sig(step.model.beta[j]),
                fmt_sig(se[j]),
                fmt_sig(wald[j]),
            ]);
        }
    }
    render(
        &["step", "added", "accepted", "chosen", "n", "aicc", "lr_p", "term", "estimate", "std_error", "wald_p"],
        rows,
    )
}

/// Precipitation and freezing combinations, plus the principal component.
pub fn combinations(c: &Combinations) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for r in &c.rows {
        let wald = r.model.wald_p_values();
        for (j, name) in r.model.names.iter().enumerate() {
            rows.push(vec![
                r.label.clone(),
                r.model.n.to_string(),
                fmt_sig(r.aicc),
                name.clone(),
                fmt_sig(r.model.beta[j]),
                fmt_sig(wald[j]),
            ]);
        }
    }
    render(&["model", "n", "aicc", "term", "estimate", "wald_p"], rows)
}

pub fn principal_component(c: &Combinations) -> Result<Vec<u8>> {
    render(
        &["quantity", "value"],
        [
            vec!["correlation".into(), fmt_sig(c.correlation)],
            vec!["variance_share".into(), fmt_sig(c.pc_variance_share)],
            vec!["loading_1".into(), fmt_sig(c.pc_loading[0])],
            vec!["loading_2".into(), fmt_sig(c.pc_loading[1])],
        ],
    )
}

pub fn fitted_model(m: &FittedModel) -> Result<Vec<u8>> {
    let se = m.std_errors();
    let wald = m.wald_p_values();
    let tests = m.tests.as_deref();
    let rows = m.names.iter().enumerate().map(|(j, name)| {
        let t = tests.and_then(|t| t.get(j));
        vec![
            name.clone(),
            fmt_sig(m.beta[j]),
            fmt_sig(se[j]),
            fmt_sig(wald[j]),
            opt(t.and_then(|t| t.lr_statistic)),
            opt(t.and_then(|t| t.lr_p)),
        ]
    });
    render(&["term", "estimate", "std_error", "wald_p", "lr_statistic", "lr_p"], rows)
}

pub fn fit_summary(m: &FittedModel, scaling: &str) -> Result<Vec<u8>> {
    render(
        &["quantity", "value"],
        [
            vec!["n".into(), m.n.to_string()],
            vec!["k".into(), m.k().to_string()],
            vec!["loglik".into(), fmt_sig(m.loglik)],
            vec!["penalized_loglik".into(), fmt_sig(m.penalized_loglik)],
            vec!["aicc".into(), opt(m.aicc)],
            vec!["aicc_loglik".into(), format!("{:?}", m.aicc_loglik).to_lowercase()],
            vec!["converged".into(), (m.converged as u8).to_string()],
            vec!["iterations".into(), m.iterations.to_string()],
            vec!["scaling".into(), scaling.into()],
        ],
    )
}

/// Point estimates with bootstrap percentile intervals.
pub fn bootstrap_intervals(m: &FittedModel, ci: &[PercentileInterval]) -> Result<Vec<u8>> {
    let rows = ci.iter().zip(&m.beta).map(|(iv, b)| {
        vec![
            iv.name.clone(),
            fmt_sig(*b),
            fmt_sig(iv.lower),
            fmt_sig(iv.upper),
            fmt_sig(iv.level),
            (!iv.contains(0.0) as u8).to_string(),
        ]
    });
    render(&["term", "estimate", "lower", "upper", "level", "excludes_zero"], rows)
}

pub fn bootstrap_diagnostics(e: &BootstrapEnsemble) -> Result<Vec<u8>> {
    let count = |s| e.status.iter().filter(|x| **x == s).count().to_string();
    render(
        &["quantity", "value"],
        [
            vec!["replicates".into(), e.replicates().to_string()],
            vec!["converged".into(), count(ReplicateStatus::Converged)],
            vec!["degenerate".into(), count(ReplicateStatus::Degenerate)],
            vec!["failed".into(), count(ReplicateStatus::Failed)],
            vec!["excluded_fraction".into(), fmt_sig(e.excluded_fraction())],
        ],
    )
}

pub fn filled_values(station: &str, filled: &[FilledValue]) -> Vec<Vec<String>> {
    filled
        .iter()
        .map(|f| {
            vec![
                station.to_string(),
                f.date.format("%Y-%m-%d").to_string(),
                f.field.as_str().to_string(),
                fmt_sig(f.value),
                f.donor_id.clone(),
            ]
        })
        .collect()
}

pub fn provenance(rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    render(&["station_id", "date", "field", "value", "donor_id"], rows)
}

/// A feature value that could not be computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingFeature {
    pub breakup_year: i32,
    pub column: String,
    pub reason: String,
}

pub fn missing_features(rows: &[MissingFeature]) -> Result<Vec<u8>> {
    render(
        &["breakup_year", "column", "reason"],
        rows.iter().map(|m| vec![m.breakup_year.to_string(), m.column.clone(), m.reason.clone()]),
    )
}

pub fn scaling(params: &BTreeMap<String, AffineScaling>) -> Result<Vec<u8>> {
    render(
        &["column", "mode", "center", "scale"],
        params.iter().map(|(n, s)| {
            vec![n.clone(), s.mode.as_str().into(), crate::io::fmt_full(s.center), crate::io::fmt_full(s.scale)]
        }),
    )
}

/// Wait-time summary for one scenario and reference year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaitReport {
    pub gcm: String,
    pub rcp: String,
    pub reference_year: i32,
    /// Product-limit median; the horizon when beyond it.
    pub median: u32,
    pub median_beyond_horizon: bool,
    pub horizon: u32,
    pub censored_fraction: f64,
    /// Product-limit quantiles by level; `null` beyond the horizon.
    pub quantiles: BTreeMap<String, Option<u32>>,
}

impl WaitReport {
    pub fn new(gcm: &str, rcp: &str, w: &WaitTimeSummary, levels: &[f64]) -> Self {
        let (median, beyond) = match w.median() {
            MedianWait::Years(y) => (y, false),
            MedianWait::BeyondHorizon(h) => (h, true),
        };
        Self {
            gcm: gcm.into(),
            rcp: rcp.into(),
            reference_year: w.reference_year,
            median,
            median_beyond_horizon: beyond,
            horizon: w.horizon,
            censored_fraction: fmt_sig(w.censored_fraction()).parse().unwrap_or(f64::NAN),
            quantiles: levels.iter().map(|q| fmt_sig(*q)).zip(w.quantiles(levels)).collect(),
        }
    }
}

pub fn wait_reports_json(w: &[WaitReport]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(w)?;
    out.push(b'\n');
    Ok(out)
}

pub fn wait_table(w: &[WaitReport]) -> Result<Vec<u8>> {
    render(
        &["gcm", "rcp", "reference_year", "median", "median_beyond_horizon", "horizon", "censored_fraction"],
        w.iter().map(|r| {
            vec![
                r.gcm.clone(),
                r.rcp.clone(),
                r.reference_year.to_string(),
                r.median.to_string(),
                (r.median_beyond_horizon as u8).to_string(),
                r.horizon.to_string(),
                fmt_sig(r.censored_fraction),
            ]
        }),
    )
}

/// Mean probability over the last years of each scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub gcm: String,
    pub rcp: String,
    pub first_year: i32,
    pub last_year: i32,
    pub summary_from: i32,
    pub mean_p: f64,
    pub pooled_simulated_frequency: f64,
}

pub fn scenario_summaries(s: &[ScenarioSummary]) -> Result<Vec<u8>> {
    render(
        &[
            "gcm",
            "rcp",
            "first_year",
            "last_year",
            "summary_from",
            "mean_p",
            "return_period_of_mean",
            "pooled_simulated_frequency",
        ],
        s.iter().map(|r| {
            vec![
                r.gcm.clone(),
                r.rcp.clone(),
                r.first_year.to_string(),
                r.last_year.to_string(),
                r.summary_from.to_string(),
                fmt_sig(r.mean_p),
                crate::projection::instantaneous_return_period(r.mean_p).map(fmt_sig).unwrap_or_default(),
                fmt_sig(r.pooled_simulated_frequency),
            ]
        }),
    )
}
