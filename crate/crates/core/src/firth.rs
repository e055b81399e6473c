//! Firth bias-reduced logistic regression.
//!
//! Maximizes the penalized log-likelihood
//!
//! ```text
//! ℓ*(β) = ℓ(β) + ½ log det I(β),    I(β) = Xᵀ W X,  W = diag(p (1 - p))
//! ```
//!
//! by Newton iteration on the modified score
//! `U*(β) = Xᵀ (y - p + h ⊙ (½ - p))`, where `h` is the diagonal of the hat
//! matrix `W^½ X I⁻¹ Xᵀ W^½`. The penalty is the Jeffreys prior, so the
//! estimate exists and is finite even under complete separation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "constant";

/// `exp(η) / (1 + exp(η))`, evaluated without overflow and clamped to the
/// open unit interval.
#[inline]
pub fn logistic(eta: f64) -> f64 {
    let p = if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Log-odds of `p`.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(η))`.
#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// `p (1 - p)` at `p = logistic(η)`.
#[inline]
fn bernoulli_variance(eta: f64) -> f64 {
    let e = (-eta.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Covariates with a leading intercept column and a binary response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    x: DMatrix<f64>,
    y: Vec<bool>,
}

impl DesignMatrix {
    /// `x` must include the intercept column of ones first.
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: Vec<bool>) -> Result<Self> {
        let (n, k) = x.shape();
        if names.len() != k {
            return Err(Error::LengthMismatch { expected: k, got: names.len() });
        }
        if y.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: y.len() });
        }
        if k == 0 || x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidDesign("first column must be all ones".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDesign("non-finite entry".into()));
        }
        if n <= k {
            return Err(Error::InvalidDesign(format!("need n > k, have n = {n}, k = {k}")));
        }
        Ok(Self { names, x, y })
    }

    /// Builds the design from covariate columns, prepending the intercept.
    pub fn from_columns<S: AsRef<str>>(
        covariates: &[S],
        columns: &[Vec<f64>],
        y: &[bool],
    ) -> Result<Self> {
        if covariates.len() != columns.len() {
            return Err(Error::LengthMismatch { expected: covariates.len(), got: columns.len() });
        }
        let n = y.len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch { expected: n, got: c.len() });
        }
        let k = columns.len() + 1;
        let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
        let names = std::iter::once(INTERCEPT.to_string())
            .chain(covariates.iter().map(|s| s.as_ref().to_string()))
            .collect();
        Self::new(names, x, y.to_vec())
    }

    pub fn intercept_only(y: &[bool]) -> Result<Self> {
        Self::from_columns::<&str>(&[], &[], y)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }

    pub fn successes(&self) -> usize {
        self.y.iter().filter(|&&v| v).count()
    }

    /// Same covariates with a different response.
    pub fn with_response(&self, y: Vec<bool>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), got: y.len() });
        }
        Ok(Self { names: self.names.clone(), x: self.x.clone(), y })
    }

    /// Covariate row `i` without the intercept.
    pub fn covariates(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().skip(1).copied().collect()
    }

    /// Names of a set of linearly dependent columns, if any.
    pub fn collinear_columns(&self) -> Option<Vec<String>> {
        let k = self.k();
        for j in 0..k {
            let col = self.x.column(j).into_owned();
            let norm = col.norm();
            if norm == 0.0 {
                return Some(vec![self.names[j].clone()]);
            }
            if j == 0 {
                continue;
            }
            let prev = self.x.columns(0, j).into_owned();
            let coef = prev.clone().svd(true, true).solve(&col, 1e-12).ok()?;
            let resid = (&col - &prev * &coef).norm();
            if resid <= 1e-9 * norm {
                let scale = coef.amax().max(1e-300);
                let mut cols: Vec<String> = (0..j)
                    .filter(|&i| coef[i].abs() > 1e-8 * scale)
                    .map(|i| self.names[i].clone())
                    .collect();
                cols.push(self.names[j].clone());
                return Some(cols);
            }
        }
        None
    }
}

/// Which log-likelihood enters the AICc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AiccLoglik {
    /// `ℓ*`, the Firth-penalized log-likelihood at the estimate.
    #[default]
    Penalized,
    /// `ℓ`, the ordinary Bernoulli log-likelihood at the estimate.
    Unpenalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirthOptions {
    /// Convergence when `max |U*| < tolerance`.
    pub tolerance: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub aicc_loglik: AiccLoglik,
}

impl Default for FirthOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 100, max_halvings: 20, aicc_loglik: AiccLoglik::Penalized }
    }
}

/// Significance of one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTest {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub wald_p: f64,
    /// `2 (ℓ*_full - ℓ*_restricted)`; `None` when the restricted fit failed.
    pub lr_statistic: Option<f64>,
    pub lr_p: Option<f64>,
}

/// Result of a Firth fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// `(XᵀWX)⁻¹` at the estimate.
    pub cov: DMatrix<f64>,
    pub loglik: f64,
    pub penalized_loglik: f64,
    /// `None` when `n <= k + 1`.
    pub aicc: Option<f64>,
    pub aicc_loglik: AiccLoglik,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    /// `max |U*|` at the returned estimate.
    pub max_score: f64,
    /// Filled by [`FittedModel::with_p_values`].
    pub tests: Option<Vec<CoefficientTest>>,
}

impl FittedModel {
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names[1..]
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.cov[(i, i)].max(0.0).sqrt()).collect()
    }

    pub fn wald_p_values(&self) -> Vec<f64> {
        self.beta
            .iter()
            .zip(self.std_errors())
            .map(|(b, se)| erfc((b / se).abs() / std::f64::consts::SQRT_2))
            .collect()
    }

    /// AICc using the chosen log-likelihood.
    pub fn aicc_with(&self, kind: AiccLoglik) -> Result<f64> {
        let ll = match kind {
            AiccLoglik::Penalized => self.penalized_loglik,
            AiccLoglik::Unpenalized => self.loglik,
        };
        aicc(ll, self.k(), self.n)
    }

    /// Linear predictor for covariates `x` (intercept implicit).
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        linear_predictor(&self.beta, x)
    }

    /// `logistic(β · [1, x])`.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        predict_prob(&self.beta, x)
    }

    /// Adds likelihood-ratio and Wald tests for every coefficient.
    pub fn with_p_values(mut self, design: &DesignMatrix, opts: &FirthOptions) -> Result<Self> {
        self.tests = Some(p_values(&self, design, opts)?);
        Ok(self)
    }
}

/// `β · [1, x]`.
pub fn linear_predictor(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() + 1 {
        return Err(Error::LengthMismatch { expected: beta.len() - 1, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite covariate".into()));
    }
    Ok(beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
}

/// `logistic(β · [1, x])`.
pub fn predict_prob(beta: &[f64], x: &[f64]) -> Result<f64> {
    linear_predictor(beta, x).map(logistic)
}

/// Small-sample corrected Akaike criterion
/// `-2ℓ + 2k + 2k(k+1)/(n-k-1)`, `k` counting the intercept.
pub fn aicc(loglik: f64, k: usize, n: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::AiccUndefined { n, k });
    }
    let (kf, nf) = (k as f64, n as f64);
    Ok(-2.0 * loglik + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0))
}

/// Quantities at one β.
struct Eval {
    loglik: f64,
    penalized: f64,
    info: DMatrix<f64>,
    info_inv: DMatrix<f64>,
    score: DVector<f64>,
}

fn evaluate(d: &DesignMatrix, beta: &DVector<f64>) -> Option<Eval> {
    let x = &d.x;
    let eta = x * beta;
    let n = d.n();
    let mut loglik = 0.0;
    let mut p = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let e = eta[i];
        loglik += if d.y[i] { e } else { 0.0 } - softplus(e);
        p[i] = logistic(e);
        w[i] = bernoulli_variance(e);
    }
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let info = x.transpose() * &xw;
    let chol = Cholesky::new(info.clone())?;
    let half_logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let inv = chol.inverse();
    let info_inv = (&inv + inv.transpose()) * 0.5;

    // h_i = w_i x_iᵀ I⁻¹ x_i
    let xi = x * &info_inv;
    let mut resid = DVector::zeros(n);
    for i in 0..n {
        let h = w[i] * xi.row(i).dot(&x.row(i));
        let y = if d.y[i] { 1.0 } else { 0.0 };
        resid[i] = y - p[i] + h * (0.5 - p[i]);
    }
    let score = x.transpose() * resid;
    Some(Eval { loglik, penalized: loglik + half_logdet, info, info_inv, score })
}

fn max_abs_free(v: &DVector<f64>, free: &[bool]) -> f64 {
    v.iter().zip(free).filter(|(_, f)| **f).map(|(s, _)| s.abs()).fold(0.0, f64::max)
}

const MAX_POLISH: usize = 25;

struct NewtonOutcome {
    beta: DVector<f64>,
    eval: Eval,
    converged: bool,
    iterations: usize,
    max_score: f64,
}

/// Newton iteration over the free coordinates; fixed coordinates keep
/// their starting value. The penalty always uses the full information
/// matrix.
fn newton(
    d: &DesignMatrix,
    free: &[bool],
    start: DVector<f64>,
    opts: &FirthOptions,
) -> Result<NewtonOutcome> {
    let singular = || Error::InvalidDesign("information matrix XᵀWX is not positive definite".into());
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let newton_step = |eval: &Eval| -> Result<DVector<f64>> {
        if idx.len() == free.len() {
            return Ok(&eval.info_inv * &eval.score);
        }
        let sub = eval.info.select_rows(&idx).select_columns(&idx);
        let u = eval.score.select_rows(&idx);
        let chol: Cholesky<f64, Dyn> = Cholesky::new(sub).ok_or_else(singular)?;
        let s = chol.solve(&u);
        let mut full = DVector::zeros(free.len());
        for (j, &i) in idx.iter().enumerate() {
            full[i] = s[j];
        }
        Ok(full)
    };
    let mut beta = start;
    let mut eval = evaluate(d, &beta).ok_or_else(singular)?;
    let mut iterations = 0;
    loop {
        let max_score = max_abs_free(&eval.score, free);
        if max_score < opts.tolerance || idx.is_empty() {
            if idx.is_empty() {
                return Ok(NewtonOutcome { beta, eval, converged: true, iterations, max_score });
            }
            // polish while the score keeps shrinking; ℓ* is flat to rounding here
            let (mut beta, mut eval, mut max_score) = (beta, eval, max_score);
            for _ in 0..MAX_POLISH {
                let candidate = &beta + newton_step(&eval)?;
                let Some(next) = evaluate(d, &candidate) else { break };
                let polished = max_abs_free(&next.score, free);
                if polished >= max_score {
                    break;
                }
                (beta, eval, max_score) = (candidate, next, polished);
            }
            return Ok(NewtonOutcome { beta, eval, converged: true, iterations, max_score });
        }
        if iterations >= opts.max_iter {
            return Ok(NewtonOutcome { beta, eval, converged: false, iterations, max_score });
        }
        iterations += 1;

        let mut step = newton_step(&eval)?;
        let mut candidate = &beta + &step;
        let mut next = evaluate(d, &candidate);
        let mut halvings = 0;
        while halvings < opts.max_halvings
            && next.as_ref().is_none_or(|e| e.penalized < eval.penalized)
        {
            step *= 0.5;
            candidate = &beta + &step;
            next = evaluate(d, &candidate);
            halvings += 1;
        }
        let Some(next) = next else { return Err(singular()) };
        beta = candidate;
        eval = next;
    }
}

/// Firth fit with default options.
pub fn fit_firth(d: &DesignMatrix) -> Result<FittedModel> {
    fit_firth_with(d, &FirthOptions::default())
}

/// Firth fit. Collinear designs are rejected up front; a fit that runs out
/// of iterations is returned with `converged == false`.
pub fn fit_firth_with(d: &DesignMatrix, opts: &FirthOptions) -> Result<FittedModel> {
    if let Some(columns) = d.collinear_columns() {
        return Err(Error::Collinear { columns });
    }
    let k = d.k();
    let out = newton(d, &vec![true; k], DVector::zeros(k), opts)?;
    let mut model = FittedModel {
        names: d.names.clone(),
        beta: out.beta.iter().copied().collect(),
        cov: out.eval.info_inv.clone(),
        loglik: out.eval.loglik,
        penalized_loglik: out.eval.penalized,
        aicc: None,
        aicc_loglik: opts.aicc_loglik,
        n: d.n(),
        converged: out.converged,
        iterations: out.iterations,
        max_score: out.max_score,
        tests: None,
    };
    model.aicc = model.aicc_with(opts.aicc_loglik).ok();
    Ok(model)
}

/// Maximum penalized log-likelihood with coefficient `j` held at zero.
/// Returns `(ℓ*, converged)`.
pub fn restricted_penalized_loglik(
    model: &FittedModel,
    d: &DesignMatrix,
    j: usize,
    opts: &FirthOptions,
) -> Result<(f64, bool)> {
    let mut free = vec![true; d.k()];
    free[j] = false;
    let mut start = DVector::from_column_slice(&model.beta);
    start[j] = 0.0;
    let out = newton(d, &free, start, opts)?;
    Ok((out.eval.penalized, out.converged))
}

/// Penalized likelihood-ratio p-value for coefficient `j`, referred to χ²₁.
pub fn lr_test(
    model: &FittedModel,
    d: &DesignMatrix,
    j: usize,
    opts: &FirthOptions,
) -> Option<(f64, f64)> {
    let (restricted, ok) = restricted_penalized_loglik(model, d, j, opts).ok()?;
    if !ok || !model.converged {
        return None;
    }
    let stat = (2.0 * (model.penalized_loglik - restricted)).max(0.0);
    Some((stat, chi2_1_sf(stat)))
}

/// Upper tail of the χ² distribution with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    erfc((x / 2.0).sqrt()).clamp(0.0, 1.0)
}

/// Per-coefficient penalized likelihood-ratio p-values (primary) and Wald
/// p-values (secondary).
pub fn p_values(model: &FittedModel, d: &DesignMatrix, opts: &FirthOptions) -> Result<Vec<CoefficientTest>> {
    if model.k() != d.k() {
        return Err(Error::LengthMismatch { expected: d.k(), got: model.k() });
    }
    let se = model.std_errors();
    let wald = model.wald_p_values();
    Ok((0..model.k())
        .map(|j| {
            let lr = lr_test(model, d, j, opts);
            CoefficientTest {
                name: model.names[j].clone(),
                estimate: model.beta[j],
                std_error: se[j],
                wald_p: wald[j],
                lr_statistic: lr.map(|t| t.0),
                lr_p: lr.map(|t| t.1),
            }
        })
        .collect())
}

/// Penalized log-likelihood at an arbitrary β; `None` where `XᵀWX` is
/// numerically singular.
pub fn penalized_loglik(d: &DesignMatrix, beta: &[f64]) -> Option<f64> {
    evaluate(d, &DVector::from_column_slice(beta)).map(|e| e.penalized)
}
