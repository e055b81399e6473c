//! Kaplan–Meier product-limit estimate for right-censored wait times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One distinct observed time in the product-limit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmStep {
    pub time: u32,
    pub at_risk: u64,
    pub events: u64,
    pub censored: u64,
    /// `S(t)` just after `time`.
    pub survival: f64,
}

/// Median (or other quantile) of a wait-time distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "years", rename_all = "snake_case")]
pub enum MedianWait {
    Years(u32),
    /// Survival never fell to the required level; carries the horizon.
    BeyondHorizon(u32),
}

impl MedianWait {
    pub fn years(self) -> Option<u32> {
        match self {
            MedianWait::Years(y) => Some(y),
            MedianWait::BeyondHorizon(_) => None,
        }
    }
}

/// Product-limit table. Censored observations at time `t` are still at risk
/// for events at `t`.
pub fn kaplan_meier(times: &[u32], censored: &[bool]) -> Vec<KmStep> {
    assert_eq!(times.len(), censored.len(), "times and censoring flags differ in length");
    let mut counts: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for (&t, &c) in times.iter().zip(censored) {
        let e = counts.entry(t).or_default();
        if c {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    let mut at_risk = times.len() as u64;
    let mut s = 1.0;
    counts
        .into_iter()
        .map(|(time, (events, cens))| {
            if events > 0 {
                s *= 1.0 - events as f64 / at_risk as f64;
            }
            let step = KmStep { time, at_risk, events, censored: cens, survival: s };
            at_risk -= events + cens;
            step
        })
        .collect()
}

/// Smallest event time with `S(t) <= 1 - q`.
pub fn km_quantile(steps: &[KmStep], q: f64) -> Option<u32> {
    let target = 1.0 - q;
    steps
        .iter()
        .find(|s| s.events > 0 && s.survival <= target + 1e-12)
        .map(|s| s.time)
}

/// Smallest event time with `S(t) <= 0.5`, or the horizon flag.
///
/// Without censoring this is the `⌈n/2⌉`-th smallest wait (the lower
/// median for even `n`).
pub fn km_median(times: &[u32], censored: &[bool], horizon: u32) -> MedianWait {
    match km_quantile(&kaplan_meier(times, censored), 0.5) {
        Some(t) => MedianWait::Years(t),
        None => MedianWait::BeyondHorizon(horizon),
    }
}
