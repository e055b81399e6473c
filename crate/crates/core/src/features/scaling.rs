use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How covariate columns are scaled before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// `(v - mean) / sd` against the baseline, sd with `n - 1`.
    #[default]
    ZScore,
    /// `v / mean` against the baseline.
    PercentOfAverage,
    /// Values as measured.
    Raw,
}

impl ScalingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalingMode::ZScore => "z-score",
            ScalingMode::PercentOfAverage => "percent-of-average",
            ScalingMode::Raw => "raw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "z-score" | "zscore" => Ok(ScalingMode::ZScore),
            "percent-of-average" | "percent" => Ok(ScalingMode::PercentOfAverage),
            "raw" => Ok(ScalingMode::Raw),
            other => Err(Error::Config(format!("unknown scaling mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `scaled = (raw - center) / scale`. Every [`ScalingMode`] is one of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineScaling {
    pub mode: ScalingMode,
    pub center: f64,
    pub scale: f64,
}

impl AffineScaling {
    pub fn identity() -> Self {
        Self { mode: ScalingMode::Raw, center: 0.0, scale: 1.0 }
    }

    pub fn fit(mode: ScalingMode, baseline: &[f64]) -> Result<Self> {
        match mode {
            ScalingMode::Raw => Ok(Self::identity()),
            ScalingMode::ZScore => {
                let (mean, sd) = mean_sd(baseline)?;
                Ok(Self { mode, center: mean, scale: sd })
            }
            ScalingMode::PercentOfAverage => {
                if baseline.is_empty() {
                    return Err(Error::InvalidArgument("empty baseline".into()));
                }
                let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
                if mean == 0.0 {
                    return Err(Error::ZeroMean);
                }
                Ok(Self { mode, center: 0.0, scale: mean })
            }
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }

    #[inline]
    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.center
    }
}

fn mean_sd(baseline: &[f64]) -> Result<(f64, f64)> {
    if baseline.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = baseline.len() as f64;
    let mean = baseline.iter().sum::<f64>() / n;
    let ss: f64 = baseline.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((mean, sd))
}

/// Z-scores of `values` against the mean and sample sd of `baseline`.
pub fn standardize(values: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    let s = AffineScaling::fit(ScalingMode::ZScore, baseline)?;
    Ok(values.iter().map(|&v| s.apply(v)).collect())
}

/// `values` as a fraction of the baseline mean.
pub fn percent_of_average(values: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    let s = AffineScaling::fit(ScalingMode::PercentOfAverage, baseline)?;
    Ok(values.iter().map(|&v| s.apply(v)).collect())
}
