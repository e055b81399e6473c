//! Forward stepwise covariate selection by AICc.
//!
//! Starting from the intercept-only model, each step fits every
//! single-covariate extension of the incumbent and keeps the one with the
//! lowest AICc. A step is accepted only when it lowers the incumbent AICc by
//! more than `min_aicc_improvement` and the added coefficient's penalized
//! likelihood-ratio p-value is below `max_p_value`. Ties go to the earlier
//! candidate in the caller's list.
//!
//! Candidates whose covariates are missing on some rows are fitted on the
//! reduced row set, reported with `comparable == false`, and never selected.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{first_pc, FeatureTable, FLOOD_FAVORABLE};
use crate::firth::{fit_firth_with, lr_test, DesignMatrix, FirthOptions, FittedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub max_steps: usize,
    pub min_aicc_improvement: f64,
    pub max_p_value: f64,
    pub firth: FirthOptions,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            max_steps: 4,
            min_aicc_improvement: 0.1,
            max_p_value: 0.10,
            firth: FirthOptions::default(),
        }
    }
}

/// A successfully fitted candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub model: FittedModel,
    pub aicc: f64,
    /// Likelihood-ratio p-value of the newly added coefficient.
    pub lr_p: Option<f64>,
}

/// One row of the per-step candidate table.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFit {
    pub step: usize,
    pub added: String,
    /// Incumbent covariates followed by `added`.
    pub covariates: Vec<String>,
    pub n: usize,
    pub comparable: bool,
    /// `Err` holds the reason the candidate was skipped.
    pub outcome: std::result::Result<CandidateModel, String>,
}

impl CandidateFit {
    fn eligible(&self) -> Option<&CandidateModel> {
        match &self.outcome {
            Ok(c) if self.comparable && c.model.converged => Some(c),
            _ => None,
        }
    }
}

/// Best model at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    /// `None` for the intercept-only start.
    pub added: Option<String>,
    pub covariates: Vec<String>,
    pub model: FittedModel,
    pub aicc: f64,
    pub lr_p: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPath {
    /// Step 0 is the constant model; a rejected best extension, if any, is
    /// the last entry with `accepted == false`.
    pub steps: Vec<SelectionStep>,
    /// Index of the final accepted step.
    pub chosen: usize,
    pub candidate_table: Vec<CandidateFit>,
    /// Candidate order used for tie-breaking.
    pub candidate_order: Vec<String>,
    pub reference_n: usize,
}

impl SelectionPath {
    pub fn chosen_step(&self) -> &SelectionStep {
        &self.steps[self.chosen]
    }

    pub fn chosen_covariates(&self) -> &[String] {
        &self.chosen_step().covariates
    }
}

fn fit_on(table: &FeatureTable, names: &[String], opts: &FirthOptions) -> Result<(FittedModel, DesignMatrix)> {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let (design, _) = table.design(&refs)?;
    let model = fit_firth_with(&design, opts)?;
    Ok((model, design))
}

fn aicc_of(model: &FittedModel) -> Result<f64> {
    model.aicc.ok_or(Error::AiccUndefined { n: model.n, k: model.k() })
}

/// Forward stepwise selection over `candidates` on every row of `table`.
pub fn forward_stepwise(
    table: &FeatureTable,
    candidates: &[String],
    opts: &SelectionOptions,
) -> Result<SelectionPath> {
    for c in candidates {
        if !table.has_column(c) {
            return Err(Error::UnknownCovariate(c.clone()));
        }
    }
    let reference_n = table.len();
    let (constant, _) = fit_on(table, &[], &opts.firth)?;
    let mut incumbent_aicc = aicc_of(&constant)?;
    let mut steps = vec![SelectionStep {
        added: None,
        covariates: vec![],
        model: constant,
        aicc: incumbent_aicc,
        lr_p: None,
        accepted: true,
    }];
    let mut chosen = 0;
    let mut incumbent: Vec<String> = vec![];
    let mut candidate_table = vec![];

    for step in 1..=opts.max_steps {
        let remaining: Vec<&String> = candidates.iter().filter(|c| !incumbent.contains(c)).collect();
        if remaining.is_empty() {
            break;
        }
        let fits: Vec<CandidateFit> = remaining
            .par_iter()
            .map(|&c| {
                let mut covariates = incumbent.clone();
                covariates.push(c.clone());
                let n = table
                    .complete_on(&covariates.iter().map(String::as_str).collect::<Vec<_>>())
                    .map(|t| t.len())
                    .unwrap_or(0);
                let outcome = fit_on(table, &covariates, &opts.firth)
                    .and_then(|(model, design)| {
                        let aicc = aicc_of(&model)?;
                        let lr_p = lr_test(&model, &design, model.k() - 1, &opts.firth).map(|t| t.1);
                        Ok(CandidateModel { model, aicc, lr_p })
                    })
                    .map_err(|e| e.to_string());
                CandidateFit {
                    step,
                    added: c.clone(),
                    covariates,
                    n,
                    comparable: n == reference_n,
                    outcome,
                }
            })
            .collect();
        for f in &fits {
            if let Err(reason) = &f.outcome {
                warn!("step {step}: skipping candidate `{}`: {reason}", f.added);
            }
        }

        let mut best: Option<&CandidateFit> = None;
        for f in &fits {
            let Some(c) = f.eligible() else { continue };
            if best.is_none_or(|b| c.aicc < b.eligible().unwrap().aicc) {
                best = Some(f);
            }
        }
        let Some(best) = best else {
            candidate_table.extend(fits);
            break;
        };
        let cm = best.eligible().unwrap().clone();
        let accepted = incumbent_aicc - cm.aicc > opts.min_aicc_improvement
            && cm.lr_p.is_some_and(|p| p < opts.max_p_value);
        steps.push(SelectionStep {
            added: Some(best.added.clone()),
            covariates: best.covariates.clone(),
            model: cm.model,
            aicc: cm.aicc,
            lr_p: cm.lr_p,
            accepted,
        });
        let added = best.added.clone();
        candidate_table.extend(fits);
        if !accepted {
            break;
        }
        chosen = steps.len() - 1;
        incumbent.push(added);
        incumbent_aicc = cm.aicc;
    }

    Ok(SelectionPath {
        steps,
        chosen,
        candidate_table,
        candidate_order: candidates.to_vec(),
        reference_n,
    })
}

/// One row of the combined precipitation/temperature comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationFit {
    pub label: String,
    pub covariates: Vec<String>,
    pub model: FittedModel,
    pub aicc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combinations {
    pub rows: Vec<CombinationFit>,
    pub correlation: f64,
    pub pc_variance_share: f64,
    pub pc_loading: [f64; 2],
}

pub const INTERACTION: &str = "interaction";
pub const FIRST_PC: &str = "first_pc";

/// Fits the constant model, `{precip, ddf}`, `{precip, ddf, precip×ddf}`,
/// `{precip×ddf}` and `{first PC}` on the rows complete on both columns.
pub fn compare_combinations(
    table: &FeatureTable,
    precip: &str,
    ddf: &str,
    opts: &FirthOptions,
) -> Result<Combinations> {
    let sub = table.complete_on(&[precip, ddf])?;
    let p: Vec<f64> = sub.column(precip)?.into_iter().flatten().collect();
    let d: Vec<f64> = sub.column(ddf)?.into_iter().flatten().collect();
    let y: Vec<bool> = sub.rows().iter().map(|r| r.flood).collect();
    let interaction: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a * b).collect();
    let pc = first_pc(&p, &d, FLOOD_FAVORABLE)?;

    let specs: Vec<(&str, Vec<(&str, &Vec<f64>)>)> = vec![
        ("constant", vec![]),
        ("precip+ddf", vec![(precip, &p), (ddf, &d)]),
        ("precip+ddf+interaction", vec![(precip, &p), (ddf, &d), (INTERACTION, &interaction)]),
        ("interaction", vec![(INTERACTION, &interaction)]),
        ("first_pc", vec![(FIRST_PC, &pc.scores)]),
    ];
    let rows = specs
        .into_iter()
        .map(|(label, cols)| {
            let names: Vec<&str> = cols.iter().map(|c| c.0).collect();
            let columns: Vec<Vec<f64>> = cols.iter().map(|c| c.1.clone()).collect();
            let design = DesignMatrix::from_columns(&names, &columns, &y)?;
            let model = fit_firth_with(&design, opts)?;
            let aicc = aicc_of(&model)?;
            Ok(CombinationFit {
                label: label.to_string(),
                covariates: names.iter().map(|s| s.to_string()).collect(),
                model,
                aicc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Combinations {
        rows,
        correlation: pc.correlation,
        pc_variance_share: pc.variance_share,
        pc_loading: pc.loading,
    })
}
