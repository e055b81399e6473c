//! Parametric bootstrap of a fitted logistic model.
//!
//! Each replicate keeps the design fixed, redraws every response from
//! `Bernoulli(p̂_i)` and refits. Replicate `b` draws from the substream
//! `(seed, b)`, so the ensemble is identical for any number of workers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firth::{fit_firth_with, DesignMatrix, FirthOptions, FittedModel};
use crate::rng::{substream, Domain};
use crate::stats::quantile_sorted;

pub const DEFAULT_REPLICATES: usize = 1000;

/// Why a replicate was excluded from summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateStatus {
    Converged,
    /// Simulated responses were all 0 or all 1.
    Degenerate,
    /// Newton iteration did not converge or the refit failed.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    /// One row per replicate; `NaN` where the refit failed outright.
    pub betas: Vec<Vec<f64>>,
    pub status: Vec<ReplicateStatus>,
    pub seed: u64,
    /// Coefficients of the model the responses were simulated from.
    pub source_beta: Option<Vec<f64>>,
}

impl BootstrapEnsemble {
    pub fn replicates(&self) -> usize {
        self.betas.len()
    }

    pub fn converged_mask(&self) -> Vec<bool> {
        self.status.iter().map(|s| *s == ReplicateStatus::Converged).collect()
    }

    pub fn converged_rows(&self) -> Vec<&[f64]> {
        self.betas
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| **s == ReplicateStatus::Converged)
            .map(|(b, _)| b.as_slice())
            .collect()
    }

    pub fn converged_count(&self) -> usize {
        self.status.iter().filter(|s| **s == ReplicateStatus::Converged).count()
    }

    /// One-line count of included and excluded replicates.
    pub fn diagnostics(&self) -> String {
        let count = |s| self.status.iter().filter(|x| **x == s).count();
        format!(
            "replicates={} converged={} degenerate={} failed={}",
            self.replicates(),
            count(ReplicateStatus::Converged),
            count(ReplicateStatus::Degenerate),
            count(ReplicateStatus::Failed)
        )
    }

    /// Fraction of replicates excluded from summaries.
    pub fn excluded_fraction(&self) -> f64 {
        1.0 - self.converged_count() as f64 / self.replicates().max(1) as f64
    }
}

/// Simulated responses for replicate `b`.
pub fn simulate_responses(probs: &[f64], seed: u64, b: u64) -> Vec<bool> {
    let mut rng = substream(seed, Domain::Bootstrap, &[b]);
    probs.iter().map(|&p| rng.random::<f64>() < p).collect()
}

/// Parametric bootstrap with `replicates` refits.
pub fn parametric_bootstrap(
    model: &FittedModel,
    design: &DesignMatrix,
    replicates: usize,
    seed: u64,
    opts: &FirthOptions,
) -> Result<BootstrapEnsemble> {
    if !model.converged {
        return Err(Error::InvalidArgument("bootstrap source model did not converge".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    if model.k() != design.k() {
        return Err(Error::LengthMismatch { expected: design.k(), got: model.k() });
    }
    let probs: Vec<f64> = (0..design.n())
        .map(|i| model.predict_prob(&design.covariates(i)))
        .collect::<Result<_>>()?;

    let k = model.k();
    let results: Vec<(Vec<f64>, ReplicateStatus)> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let y = simulate_responses(&probs, seed, b);
            let ones = y.iter().filter(|v| **v).count();
            let degenerate = ones == 0 || ones == y.len();
            let fit = design.with_response(y).and_then(|d| fit_firth_with(&d, opts));
            match fit {
                Ok(m) if degenerate => (m.beta, ReplicateStatus::Degenerate),
                Ok(m) if m.converged => (m.beta, ReplicateStatus::Converged),
                Ok(m) => (m.beta, ReplicateStatus::Failed),
                Err(_) => (vec![f64::NAN; k], ReplicateStatus::Failed),
            }
        })
        .collect();
    let (betas, status) = results.into_iter().unzip();
    Ok(BootstrapEnsemble {
        names: model.names.clone(),
        betas,
        status,
        seed,
        source_beta: Some(model.beta.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileInterval {
    pub name: String,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PercentileInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Per-coefficient `((1-level)/2, 1-(1-level)/2)` quantiles of the
/// converged replicates (see [`quantile_sorted`] for the interpolation).
pub fn percentile_ci(e: &BootstrapEnsemble, level: f64) -> Result<Vec<PercentileInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} not in (0, 1)")));
    }
    let rows = e.converged_rows();
    if rows.len() < 2 {
        return Err(Error::TooFewReplicates { needed: 2, have: rows.len() });
    }
    let alpha = (1.0 - level) / 2.0;
    Ok(e.names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            PercentileInterval {
                name: name.clone(),
                level,
                lower: quantile_sorted(&col, alpha),
                upper: quantile_sorted(&col, 1.0 - alpha),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Uniform draws with replacement from the converged replicates.
    #[default]
    WithReplacement,
    /// The converged replicates in order, cycling if `count` exceeds them.
    Identity,
}

/// Draws `count` coefficient vectors from the converged replicates.
pub fn sample_models(e: &BootstrapEnsemble, count: usize, seed: u64, mode: SampleMode) -> Result<Vec<Vec<f64>>> {
    let rows = e.converged_rows();
    if rows.is_empty() {
        return Err(Error::TooFewReplicates { needed: 1, have: 0 });
    }
    Ok(match mode {
        SampleMode::Identity => (0..count).map(|i| rows[i % rows.len()].to_vec()).collect(),
        SampleMode::WithReplacement => {
            let mut rng = substream(seed, Domain::ModelSampling, &[]);
            (0..count).map(|_| rows[rng.random_range(0..rows.len())].to_vec()).collect()
        }
    })
}
