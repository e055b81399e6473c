//! Scenario forcing of sampled models, probability corridors, flood
//! sequence simulation and censored wait times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AffineScaling, ScalingMode};
use crate::firth::{logistic, INTERCEPT};
use crate::stats::quantile_sorted;

pub mod simulate;
pub mod survival;

pub use simulate::{
    simulate_sequences, simulate_summary, wait_times, FloodSequenceEnsemble, SimulationSummary,
    WaitTimeSummary,
};
pub use survival::{kaplan_meier, km_median, km_quantile, KmStep, MedianWait};

pub const DEFAULT_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];
pub const DEFAULT_WINDOW: usize = 20;

/// Annual covariates for one GCM × RCP scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioForcing {
    pub gcm: String,
    pub rcp: String,
    years: Vec<i32>,
    names: Vec<String>,
    /// `values[t][j]` is covariate `names[j]` in `years[t]`.
    values: Vec<Vec<f64>>,
    pub scaling: ScalingMode,
}

impl ScenarioForcing {
    pub fn new(
        gcm: impl Into<String>,
        rcp: impl Into<String>,
        years: Vec<i32>,
        names: Vec<String>,
        values: Vec<Vec<f64>>,
        scaling: ScalingMode,
    ) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::InvalidArgument("forcing has no years".into()));
        }
        if let Some(w) = years.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(Error::InvalidArgument(format!(
                "forcing years must be contiguous ascending: {} followed by {}",
                w[0], w[1]
            )));
        }
        if values.len() != years.len() {
            return Err(Error::LengthMismatch { expected: years.len(), got: values.len() });
        }
        for (row, year) in values.iter().zip(&years) {
            if row.len() != names.len() {
                return Err(Error::LengthMismatch { expected: names.len(), got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite forcing value in {year}")));
            }
        }
        Ok(Self { gcm: gcm.into(), rcp: rcp.into(), years, names, values, scaling })
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.gcm, self.rcp)
    }

    /// Keeps only `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names.iter().position(|h| h == n).ok_or_else(|| Error::MissingCovariate {
                    forcing: self.label(),
                    covariate: n.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let values = self.values.iter().map(|row| idx.iter().map(|&j| row[j]).collect()).collect();
        Ok(Self { names: names.to_vec(), values, ..self.clone() })
    }

    /// Converts raw-unit forcing into the fitted model's units.
    pub fn to_model_scaling(&self, params: &BTreeMap<String, AffineScaling>) -> Result<Self> {
        let mode = match params.values().next() {
            Some(p) => p.mode,
            None => return Ok(self.clone()),
        };
        if self.scaling == mode {
            return Ok(self.clone());
        }
        if self.scaling != ScalingMode::Raw {
            return Err(Error::ScalingMismatch {
                model: mode.as_str().into(),
                forcing: self.scaling.as_str().into(),
            });
        }
        let maps: Vec<AffineScaling> = self
            .names
            .iter()
            .map(|n| params.get(n).copied().ok_or_else(|| Error::UnknownCovariate(n.clone())))
            .collect::<Result<_>>()?;
        let values = self
            .values
            .iter()
            .map(|row| row.iter().zip(&maps).map(|(v, s)| s.apply(*v)).collect())
            .collect();
        Ok(Self { values, scaling: mode, ..self.clone() })
    }

    /// Prepends the years of `history` that precede this scenario.
    pub fn with_history(&self, history: &ScenarioForcing) -> Result<Self> {
        if history.scaling != self.scaling {
            return Err(Error::ScalingMismatch {
                model: self.scaling.as_str().into(),
                forcing: history.scaling.as_str().into(),
            });
        }
        let idx: Vec<usize> = self
            .names
            .iter()
            .map(|n| {
                history
                    .names
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::UnknownCovariate(n.clone()))
            })
            .collect::<Result<_>>()?;
        let first = self.years[0];
        let mut years = Vec::new();
        let mut values = Vec::new();
        for (y, row) in history.years.iter().zip(&history.values) {
            if *y < first {
                years.push(*y);
                values.push(idx.iter().map(|&j| row[j]).collect());
            }
        }
        years.extend_from_slice(&self.years);
        values.extend(self.values.iter().cloned());
        Self::new(self.gcm.clone(), self.rcp.clone(), years, self.names.clone(), values, self.scaling)
    }
}

/// Coefficient vectors drawn from a bootstrap ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledModels {
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    pub scaling: ScalingMode,
    pub coefficients: Vec<Vec<f64>>,
}

/// `probs[m][t]`: flood probability of sampled model `m` in `years[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityFan {
    pub years: Vec<i32>,
    pub probs: Vec<Vec<f64>>,
}

impl ProbabilityFan {
    pub fn models(&self) -> usize {
        self.probs.len()
    }

    /// Same probability for every model and year.
    pub fn constant(p: f64, years: Vec<i32>, models: usize) -> Self {
        let row = vec![p; years.len()];
        Self { probs: vec![row; models], years }
    }

    /// Mean probability across models and the years in `[from, to]`.
    pub fn mean_over(&self, from: i32, to: i32) -> Option<f64> {
        let cols: Vec<usize> = (0..self.years.len())
            .filter(|&t| self.years[t] >= from && self.years[t] <= to)
            .collect();
        if cols.is_empty() || self.probs.is_empty() {
            return None;
        }
        let total: f64 = self.probs.iter().flat_map(|r| cols.iter().map(move |&t| r[t])).sum();
        Some(total / (cols.len() * self.probs.len()) as f64)
    }

    /// Trailing `window`-year mean of each model's series.
    pub fn moving_average(&self, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("moving-average window must be positive".into()));
        }
        if self.years.len() < window {
            return Err(Error::InvalidArgument(format!(
                "series of {} years is shorter than the {window}-year window",
                self.years.len()
            )));
        }
        let probs = self
            .probs
            .iter()
            .map(|row| {
                let mut sum: f64 = row[..window - 1].iter().sum();
                (window - 1..row.len())
                    .map(|t| {
                        sum += row[t];
                        let out = sum / window as f64;
                        sum -= row[t + 1 - window];
                        out
                    })
                    .collect()
            })
            .collect();
        Ok(Self { years: self.years[window - 1..].to_vec(), probs })
    }

    /// Cross-model quantiles at each year.
    pub fn corridor(&self, levels: &[f64]) -> Result<Corridor> {
        check_levels(levels)?;
        if self.probs.is_empty() {
            return Err(Error::InvalidArgument("empty probability fan".into()));
        }
        let values = (0..self.years.len())
            .map(|t| {
                let mut col: Vec<f64> = self.probs.iter().map(|r| r[t]).collect();
                col.sort_by(f64::total_cmp);
                levels.iter().map(|&q| quantile_sorted(&col, q)).collect()
            })
            .collect();
        Ok(Corridor { years: self.years.clone(), levels: levels.to_vec(), values })
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no quantile levels".into()));
    }
    if levels.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::InvalidArgument(format!("quantile levels must lie in [0, 1]: {levels:?}")));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("quantile levels must be increasing: {levels:?}")));
    }
    Ok(())
}

/// `values[t][l]`: quantile `levels[l]` in `years[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub years: Vec<i32>,
    pub levels: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Corridor {
    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|l| (l - level).abs() < 1e-12)
    }

    /// Return-period corridor: at level `q` the value is `1 / p` at level
    /// `1 - q`. Reflected levels missing from the corridor are an error.
    pub fn to_return_periods(&self) -> Result<Corridor> {
        let reflected: Vec<usize> = self
            .levels
            .iter()
            .map(|&q| {
                self.level_index(1.0 - q).ok_or_else(|| {
                    Error::InvalidArgument(format!("level {} has no reflected level in the corridor", q))
                })
            })
            .collect::<Result<_>>()?;
        let values = self
            .values
            .iter()
            .map(|row| reflected.iter().map(|&j| instantaneous_return_period(row[j])).collect())
            .collect::<Result<_>>()?;
        Ok(Corridor { years: self.years.clone(), levels: self.levels.clone(), values })
    }
}

/// `p[m][t] = logistic(β⁽ᵐ⁾ · [1, x_t])`.
pub fn project_probabilities(models: &SampledModels, forcing: &ScenarioForcing) -> Result<ProbabilityFan> {
    if models.scaling != forcing.scaling {
        return Err(Error::ScalingMismatch {
            model: models.scaling.as_str().into(),
            forcing: forcing.scaling.as_str().into(),
        });
    }
    let (first, covs) = models
        .names
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("model has no coefficients".into()))?;
    if first != INTERCEPT {
        return Err(Error::InvalidArgument(format!("first coefficient must be `{INTERCEPT}`, got `{first}`")));
    }
    let idx: Vec<usize> = covs
        .iter()
        .map(|n| {
            forcing
                .names
                .iter()
                .position(|f| f == n)
                .ok_or_else(|| Error::UnknownCovariate(n.clone()))
        })
        .collect::<Result<_>>()?;
    let probs = models
        .coefficients
        .iter()
        .map(|beta| {
            if beta.len() != models.names.len() {
                return Err(Error::LengthMismatch { expected: models.names.len(), got: beta.len() });
            }
            Ok(forcing
                .values
                .iter()
                .map(|row| {
                    let eta = beta[0] + idx.iter().zip(&beta[1..]).map(|(&j, b)| b * row[j]).sum::<f64>();
                    logistic(eta)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ProbabilityFan { years: forcing.years.clone(), probs })
}

/// Trailing moving average of each model's probabilities, then per-year
/// cross-model quantiles.
pub fn moving_average_corridor(fan: &ProbabilityFan, window: usize, levels: &[f64]) -> Result<Corridor> {
    fan.moving_average(window)?.corridor(levels)
}

/// `1 / p` for `p` strictly inside (0, 1).
pub fn instantaneous_return_period(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(1.0 / p)
    } else {
        Err(Error::InvalidProbability(p))
    }
}
