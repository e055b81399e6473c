//! Bernoulli flood-sequence simulation.
//!
//! Sequence `(m, r)` draws one uniform per year from the substream
//! `(seed, m, r)` and floods when `u < p[m][t]`. The materialized ensemble
//! and the streaming summary use the same draws, so they always agree.

use rand::Rng;
use rayon::prelude::*;

use super::survival::{kaplan_meier, km_median, km_quantile, MedianWait};
use super::ProbabilityFan;
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

#[inline]
fn draw_sequence(probs: &[f64], seed: u64, m: usize, r: usize, out: &mut [bool]) {
    let mut rng = substream(seed, Domain::FloodSequence, &[m as u64, r as u64]);
    for (o, &p) in out.iter_mut().zip(probs) {
        *o = rng.random::<f64>() < p;
    }
}

/// Bit-packed sequences, model-major: sequence `m * R + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodSequenceEnsemble {
    pub years: Vec<i32>,
    pub models: usize,
    pub replicates_per_model: usize,
    pub seed: u64,
    words: usize,
    bits: Vec<u64>,
}

impl FloodSequenceEnsemble {
    pub fn sequences(&self) -> usize {
        self.models * self.replicates_per_model
    }

    pub fn sequence(&self, idx: usize) -> Vec<bool> {
        let w = &self.bits[idx * self.words..(idx + 1) * self.words];
        (0..self.years.len()).map(|t| w[t / 64] >> (t % 64) & 1 == 1).collect()
    }

    pub fn get(&self, m: usize, r: usize) -> Vec<bool> {
        self.sequence(m * self.replicates_per_model + r)
    }

    pub fn flood_count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Materializes every sequence; prefer [`simulate_summary`] at scale.
pub fn simulate_sequences(fan: &ProbabilityFan, replicates_per_model: usize, seed: u64) -> Result<FloodSequenceEnsemble> {
    check_replicates(replicates_per_model)?;
    let n_years = fan.years.len();
    let words = n_years.div_ceil(64).max(1);
    let bits: Vec<u64> = (0..fan.models() * replicates_per_model)
        .into_par_iter()
        .flat_map_iter(|idx| {
            let (m, r) = (idx / replicates_per_model, idx % replicates_per_model);
            let mut seq = vec![false; n_years];
            draw_sequence(&fan.probs[m], seed, m, r, &mut seq);
            let mut packed = vec![0u64; words];
            for (t, _) in seq.iter().enumerate().filter(|(_, f)| **f) {
                packed[t / 64] |= 1 << (t % 64);
            }
            packed
        })
        .collect();
    Ok(FloodSequenceEnsemble {
        years: fan.years.clone(),
        models: fan.models(),
        replicates_per_model,
        seed,
        words,
        bits,
    })
}

fn check_replicates(r: usize) -> Result<()> {
    if r == 0 {
        Err(Error::InvalidArgument("replicates_per_model must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn reference_index(years: &[i32], reference_year: i32) -> Result<usize> {
    years.iter().position(|&y| y == reference_year).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "reference year {reference_year} outside projection span {}-{}",
            years.first().copied().unwrap_or_default(),
            years.last().copied().unwrap_or_default()
        ))
    })
}

/// Years to the first flood strictly after `ref_idx`, or `None`.
#[inline]
fn first_wait(seq: &[bool], ref_idx: usize) -> Option<u32> {
    seq[ref_idx + 1..].iter().position(|f| *f).map(|i| i as u32 + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaitTimeSummary {
    pub reference_year: i32,
    /// `last projection year - reference_year`.
    pub horizon: u32,
    pub waits: Vec<u32>,
    pub censored: Vec<bool>,
}

impl WaitTimeSummary {
    fn new(reference_year: i32, horizon: u32, raw: impl Iterator<Item = Option<u32>>) -> Self {
        let (waits, censored) = raw.map(|w| (w.unwrap_or(horizon), w.is_none())).unzip();
        Self { reference_year, horizon, waits, censored }
    }

    pub fn median(&self) -> MedianWait {
        km_median(&self.waits, &self.censored, self.horizon)
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored.iter().filter(|c| **c).count() as f64 / self.waits.len().max(1) as f64
    }

    /// Product-limit quantiles; `None` where survival stays above `1 - q`.
    pub fn quantiles(&self, levels: &[f64]) -> Vec<Option<u32>> {
        let steps = kaplan_meier(&self.waits, &self.censored);
        levels.iter().map(|&q| km_quantile(&steps, q)).collect()
    }
}

pub fn wait_times(e: &FloodSequenceEnsemble, reference_year: i32) -> Result<WaitTimeSummary> {
    let ri = reference_index(&e.years, reference_year)?;
    let horizon = (e.years[e.years.len() - 1] - reference_year) as u32;
    Ok(WaitTimeSummary::new(
        reference_year,
        horizon,
        (0..e.sequences()).map(|i| first_wait(&e.sequence(i), ri)),
    ))
}

/// Tallies accumulated without storing the sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub years: Vec<i32>,
    pub replicates_per_model: usize,
    /// `floods[m][t]`: replicates of model `m` flooding in `years[t]`.
    pub floods: Vec<Vec<u32>>,
    pub waits: Vec<WaitTimeSummary>,
}

impl SimulationSummary {
    pub fn sequences(&self) -> u64 {
        (self.floods.len() * self.replicates_per_model) as u64
    }

    pub fn flood_count(&self) -> u64 {
        self.floods.iter().flatten().map(|&c| c as u64).sum()
    }

    /// Floods per sequence-year over the whole ensemble.
    pub fn pooled_frequency(&self) -> f64 {
        self.flood_count() as f64 / (self.sequences() * self.years.len() as u64) as f64
    }

    /// Per-model simulated flood frequency in each year.
    pub fn frequency_fan(&self) -> ProbabilityFan {
        let r = self.replicates_per_model as f64;
        ProbabilityFan {
            years: self.years.clone(),
            probs: self.floods.iter().map(|row| row.iter().map(|&c| c as f64 / r).collect()).collect(),
        }
    }

    pub fn wait(&self, reference_year: i32) -> Option<&WaitTimeSummary> {
        self.waits.iter().find(|w| w.reference_year == reference_year)
    }
}

/// Streams every `(m, r)` sequence, keeping per-year flood counts and the
/// wait after each reference year.
pub fn simulate_summary(
    fan: &ProbabilityFan,
    replicates_per_model: usize,
    seed: u64,
    reference_years: &[i32],
) -> Result<SimulationSummary> {
    check_replicates(replicates_per_model)?;
    let refs: Vec<usize> = reference_years
        .iter()
        .map(|&y| reference_index(&fan.years, y))
        .collect::<Result<_>>()?;
    let n_years = fan.years.len();
    let per_model: Vec<(Vec<u32>, Vec<Vec<Option<u32>>>)> = (0..fan.models())
        .into_par_iter()
        .map(|m| {
            let mut counts = vec![0u32; n_years];
            let mut waits = vec![Vec::with_capacity(replicates_per_model); refs.len()];
            let mut seq = vec![false; n_years];
            for r in 0..replicates_per_model {
                draw_sequence(&fan.probs[m], seed, m, r, &mut seq);
                for (c, f) in counts.iter_mut().zip(&seq) {
                    *c += *f as u32;
                }
                for (w, &ri) in waits.iter_mut().zip(&refs) {
                    w.push(first_wait(&seq, ri));
                }
            }
            (counts, waits)
        })
        .collect();
    let last = fan.years[n_years - 1];
    let waits = reference_years
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            WaitTimeSummary::new(
                y,
                (last - y) as u32,
                per_model.iter().flat_map(|(_, w)| w[k].iter().copied()),
            )
        })
        .collect();
    Ok(SimulationSummary {
        years: fan.years.clone(),
        replicates_per_model,
        floods: per_model.into_iter().map(|(c, _)| c).collect(),
        waits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_floods() {
        let fan = ProbabilityFan::constant(1.0, (2020..2030).collect(), 3);
        let e = simulate_sequences(&fan, 4, 1).unwrap();
        assert_eq!(e.sequences(), 12);
        for i in 0..12 {
            assert!(e.sequence(i).iter().all(|f| *f));
        }
        let w = wait_times(&e, 2020).unwrap();
        assert!(w.waits.iter().all(|&x| x == 1));
        assert_eq!(w.median(), MedianWait::Years(1));
    }

    #[test]
    fn no_floods_are_censored_at_horizon() {
        let fan = ProbabilityFan::constant(0.0, (2020..=2100).collect(), 2);
        let s = simulate_summary(&fan, 5, 1, &[2030]).unwrap();
        let w = s.wait(2030).unwrap();
        assert!(w.censored.iter().all(|c| *c));
        assert!(w.waits.iter().all(|&x| x == 70));
        assert_eq!(w.median(), MedianWait::BeyondHorizon(70));
        assert_eq!(w.censored_fraction(), 1.0);
    }

    #[test]
    fn summary_agrees_with_materialized_sequences() {
        let years: Vec<i32> = (1962..=2100).collect();
        let probs = (0..7)
            .map(|m| years.iter().map(|&y| 0.02 + 0.01 * m as f64 + (y - 1962) as f64 * 1e-3).collect())
            .collect();
        let fan = ProbabilityFan { years, probs };
        let e = simulate_sequences(&fan, 33, 99).unwrap();
        let s = simulate_summary(&fan, 33, 99, &[2030, 2050]).unwrap();
        assert_eq!(e.flood_count(), s.flood_count());
        assert_eq!(wait_times(&e, 2030).unwrap(), *s.wait(2030).unwrap());
        assert_eq!(wait_times(&e, 2050).unwrap(), *s.wait(2050).unwrap());
        assert!(wait_times(&e, 2200).is_err());
    }

    #[test]
    fn half_probability_median_is_one() {
        let fan = ProbabilityFan::constant(0.5, (0..40).collect(), 20);
        let s = simulate_summary(&fan, 500, 3, &[0]).unwrap();
        assert_eq!(s.wait(0).unwrap().median(), MedianWait::Years(1));
    }

    #[test]
    fn waits_respect_censoring_invariants() {
        let fan = ProbabilityFan::constant(0.05, (2020..=2100).collect(), 10);
        let s = simulate_summary(&fan, 100, 5, &[2030]).unwrap();
        let w = s.wait(2030).unwrap();
        for (x, c) in w.waits.iter().zip(&w.censored) {
            if *c {
                assert_eq!(*x, 70);
            } else {
                assert!((1..=70).contains(x));
            }
        }
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let fan = ProbabilityFan::constant(0.1, (0..80).collect(), 16);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| (simulate_sequences(&fan, 50, 11).unwrap(), simulate_summary(&fan, 50, 11, &[10]).unwrap()))
        };
        assert_eq!(run(1), run(5));
    }

    #[test]
    fn frequency_fan_from_counts() {
        let fan = ProbabilityFan::constant(0.3, (0..5).collect(), 2);
        let s = simulate_summary(&fan, 10, 8, &[]).unwrap();
        let f = s.frequency_fan();
        for (row, counts) in f.probs.iter().zip(&s.floods) {
            for (p, c) in row.iter().zip(counts) {
                assert_eq!(*p, *c as f64 / 10.0);
            }
        }
    }
}
