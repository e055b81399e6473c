//! Annual covariates derived from daily station weather.
//!
//! A breakup year `Y` is described by the winter that ends in spring `Y`
//! (default window Nov 1 of `Y - 1` through Apr 30 of `Y`). From the daily
//! record of a station this module derives:
//!
//! - winter precipitation with the freeze-reset rule ([`winter_precip`]),
//! - total degree-days of freezing ([`degree_days_freezing`]),
//! - the melt-rapidity statistic ([`melt_test`]),
//!
//! plus the donor-station gap filling applied beforehand and the scaling and
//! principal-component helpers applied afterwards.

mod pca;
mod scaling;
mod table;

use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pca::{first_pc, PrincipalComponent, FLOOD_FAVORABLE};
pub use scaling::{percent_of_average, standardize, AffineScaling, ScalingMode};
pub use table::{FeatureTable, SeasonFeatures};

/// One day of observations. Either value may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Daily mean air temperature, °C.
    pub tmean: Option<f64>,
    /// Daily precipitation, mm water equivalent.
    pub precip: Option<f64>,
}

impl DailyRecord {
    pub fn new(date: NaiveDate, tmean: Option<f64>, precip: Option<f64>) -> Self {
        Self { date, tmean, precip }
    }
}

/// Daily observations for one station, ordered by date with no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    station_id: String,
    records: Vec<DailyRecord>,
}

impl StationSeries {
    pub fn new(station_id: impl Into<String>, records: Vec<DailyRecord>) -> Result<Self> {
        let station_id = station_id.into();
        for pair in records.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::InvalidArgument(format!(
                    "{station_id}: dates must be strictly increasing ({} follows {})",
                    pair[1].date, pair[0].date
                )));
            }
        }
        for r in &records {
            match r.precip {
                Some(p) if !(p >= 0.0) => {
                    return Err(Error::InvalidArgument(format!(
                        "{station_id}: precipitation {p} on {} is negative or NaN",
                        r.date
                    )))
                }
                _ => {}
            }
            if r.tmean.is_some_and(|t| !t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{station_id}: non-finite temperature on {}",
                    r.date
                )));
            }
        }
        Ok(Self { station_id, records })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn get(&self, date: NaiveDate) -> Option<&DailyRecord> {
        self.records
            .binary_search_by_key(&date, |r| r.date)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn tmean(&self, date: NaiveDate) -> Option<f64> {
        self.get(date).and_then(|r| r.tmean)
    }

    pub fn precip(&self, date: NaiveDate) -> Option<f64> {
        self.get(date).and_then(|r| r.precip)
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }
}

/// The winter season preceding a breakup year, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonWindow {
    pub breakup_year: i32,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl SeasonWindow {
    pub fn new(breakup_year: i32, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidWindow(format!("start {start} is not before end {end}")));
        }
        if (end - start).num_days() > 366 {
            return Err(Error::InvalidWindow(format!(
                "{start}..{end} spans more than one winter"
            )));
        }
        Ok(Self { breakup_year, start, end })
    }

    /// Nov 1 of `breakup_year - 1` through Apr 30 of `breakup_year`.
    pub fn winter(breakup_year: i32) -> Self {
        Self::from_month_days(breakup_year, (11, 1), (4, 30)).expect("default winter window")
    }

    /// Window from `(month, day)` to `(month, day)`. A start later in the
    /// calendar than the end falls in the previous year.
    pub fn from_month_days(breakup_year: i32, start: (u32, u32), end: (u32, u32)) -> Result<Self> {
        let start_year = if start > end { breakup_year - 1 } else { breakup_year };
        let s = ymd(start_year, start)?;
        let e = ymd(breakup_year, end)?;
        Self::new(breakup_year, s, e)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        date_range(self.start, self.end)
    }

    pub fn len_days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

fn ymd(year: i32, (month, day): (u32, u32)) -> Result<NaiveDate> {
    NaiveDate::from_ymd_opt(year, month, day)
        .ok_or_else(|| Error::InvalidWindow(format!("{year}-{month:02}-{day:02} is not a date")))
}

/// Inclusive daily iterator.
pub fn date_range(start: NaiveDate, end: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    std::iter::successors(Some(start), move |d| {
        d.checked_add_days(Days::new(1)).filter(|n| *n <= end)
    })
    .take_while(move |d| *d <= end)
}

/// Which daily field a gap-fill touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Tmean,
    Precip,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Tmean => "tmean",
            Field::Precip => "precip",
        }
    }
}

/// A single value written by gap filling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilledValue {
    pub date: NaiveDate,
    pub field: Field,
    pub value: f64,
    pub donor_id: String,
}

/// Result of filling one field of a target series from a donor.
#[derive(Debug, Clone)]
pub struct GapFill {
    pub series: StationSeries,
    pub filled: Vec<FilledValue>,
    /// Dates in the target span still missing because the donor is missing too.
    pub still_missing: Vec<NaiveDate>,
}

/// Fills missing temperatures from a donor station adjusted by the mean
/// monthly target-minus-donor offset over all coincident days of that
/// calendar month.
pub fn fill_gaps_temperature(target: &StationSeries, donor: &StationSeries) -> Result<GapFill> {
    let mut sums = [0.0f64; 12];
    let mut counts = [0usize; 12];
    for r in &target.records {
        if let (Some(t), Some(d)) = (r.tmean, donor.tmean(r.date)) {
            let m = r.date.month0() as usize;
            sums[m] += t - d;
            counts[m] += 1;
        }
    }
    fill_field(target, donor, Field::Tmean, |date, donor_value| {
        let m = date.month0() as usize;
        if counts[m] == 0 {
            return Err(Error::NoCoincidentDays {
                station: target.station_id.clone(),
                month: date.month(),
            });
        }
        Ok(donor_value + sums[m] / counts[m] as f64)
    })
}

/// Monthly mean target-minus-donor temperature offsets, keyed by month 1..=12.
pub fn monthly_offsets(target: &StationSeries, donor: &StationSeries) -> BTreeMap<u32, f64> {
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for r in &target.records {
        if let (Some(t), Some(d)) = (r.tmean, donor.tmean(r.date)) {
            let e = acc.entry(r.date.month()).or_default();
            e.0 += t - d;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect()
}

/// Fills missing precipitation by direct substitution of the donor value.
pub fn fill_gaps_precip(target: &StationSeries, donor: &StationSeries) -> Result<GapFill> {
    let mut coincident = [false; 12];
    for r in &target.records {
        if r.precip.is_some() && donor.precip(r.date).is_some() {
            coincident[r.date.month0() as usize] = true;
        }
    }
    fill_field(target, donor, Field::Precip, |date, donor_value| {
        if !coincident[date.month0() as usize] {
            return Err(Error::NoCoincidentDays {
                station: target.station_id.clone(),
                month: date.month(),
            });
        }
        Ok(donor_value)
    })
}

/// Walks the full target span (absent dates count as missing) and replaces
/// missing values of `field` where the donor has one.
fn fill_field(
    target: &StationSeries,
    donor: &StationSeries,
    field: Field,
    mut estimate: impl FnMut(NaiveDate, f64) -> Result<f64>,
) -> Result<GapFill> {
    let (Some(first), Some(last)) = (target.first_date(), target.last_date()) else {
        return Ok(GapFill { series: target.clone(), filled: vec![], still_missing: vec![] });
    };
    let read = |r: &DailyRecord| match field {
        Field::Tmean => r.tmean,
        Field::Precip => r.precip,
    };

    let mut records = Vec::with_capacity(target.records.len());
    let mut filled = Vec::new();
    let mut still_missing = Vec::new();
    let mut existing = target.records.iter().peekable();
    for date in date_range(first, last) {
        let mut rec = match existing.peek() {
            Some(r) if r.date == date => *existing.next().unwrap(),
            _ => DailyRecord::new(date, None, None),
        };
        if read(&rec).is_none() {
            match donor.get(date).and_then(read) {
                Some(dv) => {
                    let value = estimate(date, dv)?;
                    match field {
                        Field::Tmean => rec.tmean = Some(value),
                        Field::Precip => rec.precip = Some(value),
                    }
                    filled.push(FilledValue {
                        date,
                        field,
                        value,
                        donor_id: donor.station_id.clone(),
                    });
                }
                None => still_missing.push(date),
            }
        }
        // dates with neither value nor fill are kept only if the target had them
        if rec.tmean.is_some() || rec.precip.is_some() || target.get(date).is_some() {
            records.push(rec);
        }
    }
    let series = StationSeries::new(target.station_id.clone(), records)?;
    Ok(GapFill { series, filled, still_missing })
}

fn collect_window<T>(
    what: &str,
    days: impl Iterator<Item = NaiveDate>,
    mut value: impl FnMut(NaiveDate) -> Option<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for d in days {
        match value(d) {
            Some(v) => out.push(v),
            None => missing.push(d),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::MissingData { what: what.to_string(), dates: missing })
    }
}

/// Winter precipitation accumulated under the freeze-reset rule, tracking
/// the signed freezing sum from the window start.
pub fn winter_precip(series: &StationSeries, window: &SeasonWindow) -> Result<f64> {
    winter_precip_from(series, window, window.start)
}

/// Winter precipitation with the signed freezing tracker started at
/// `tracker_start` (on or before the window start).
///
/// `S(d) = Σ (0 - tmean)` from `tracker_start`. Precipitation accumulates
/// on days with `S > 0` and the accumulator is zeroed whenever `S <= 0`, so
/// only snow that fell after the last return of `S` to zero survives. Warm
/// spells that leave `S` positive do not reset anything.
pub fn winter_precip_from(
    series: &StationSeries,
    window: &SeasonWindow,
    tracker_start: NaiveDate,
) -> Result<f64> {
    if tracker_start > window.start {
        return Err(Error::InvalidWindow(format!(
            "tracker start {tracker_start} is after window start {}",
            window.start
        )));
    }
    let what = format!("{} winter precipitation {}", series.station_id, window.breakup_year);
    let days = collect_window(&what, date_range(tracker_start, window.end), |d| {
        let r = series.get(d)?;
        let t = r.tmean?;
        if d < window.start {
            Some((d, t, 0.0))
        } else {
            Some((d, t, r.precip?))
        }
    })?;

    let mut freezing = 0.0;
    let mut acc = 0.0;
    for (_, t, p) in days {
        freezing -= t;
        if freezing > 0.0 {
            acc += p;
        } else {
            acc = 0.0;
        }
    }
    Ok(acc)
}

/// Plain sum of precipitation over the window.
pub fn window_precip_sum(series: &StationSeries, window: &SeasonWindow) -> Result<f64> {
    let what = format!("{} precipitation {}", series.station_id, window.breakup_year);
    Ok(collect_window(&what, window.days(), |d| series.precip(d))?.iter().sum())
}

/// Total degree-days of freezing, `Σ max(0, -tmean)`, over the window.
pub fn degree_days_freezing(series: &StationSeries, window: &SeasonWindow) -> Result<f64> {
    let what = format!("{} degree-days freezing {}", series.station_id, window.breakup_year);
    let temps = collect_window(&what, window.days(), |d| series.tmean(d))?;
    Ok(temps.iter().map(|t| (-t).max(0.0)).sum())
}

/// Thresholds of the melt-rapidity statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeltTest {
    /// Cumulative thaw degree-days marking the onset, °C·day.
    pub lower: f64,
    /// Cumulative thaw degree-days marking sustained melt, °C·day.
    pub upper: f64,
    /// Last `(month, day)` searched; accumulation starts Jan 1.
    pub end: (u32, u32),
}

impl Default for MeltTest {
    fn default() -> Self {
        Self { lower: 40.0, upper: 150.0, end: (6, 30) }
    }
}

impl MeltTest {
    /// Days between cumulative thaw reaching `lower` and reaching `upper`,
    /// counting a day on which the cumulative sum equals a threshold as
    /// crossed. `None` when `upper` is never reached by the end date.
    pub fn evaluate(&self, series: &StationSeries, breakup_year: i32) -> Result<Option<u32>> {
        let start = ymd(breakup_year, (1, 1))?;
        let end = ymd(breakup_year, self.end)?;
        let what = format!("{} melt test {breakup_year}", series.station_id);
        let temps = collect_window(&what, date_range(start, end), |d| series.tmean(d))?;

        let mut thaw = 0.0;
        let mut lower_day = None;
        for (day, t) in temps.iter().enumerate() {
            thaw += t.max(0.0);
            if lower_day.is_none() && thaw >= self.lower {
                lower_day = Some(day);
            }
            if thaw >= self.upper {
                // lower <= upper, so lower_day is set by now
                return Ok(lower_day.map(|l| (day - l) as u32));
            }
        }
        Ok(None)
    }
}

/// Melt test with the default 40 → 150 °C·day thresholds.
pub fn melt_test(series: &StationSeries, breakup_year: i32) -> Result<Option<u32>> {
    MeltTest::default().evaluate(series, breakup_year)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn series_from(
        start: NaiveDate,
        end: NaiveDate,
        mut f: impl FnMut(NaiveDate) -> (Option<f64>, Option<f64>),
    ) -> StationSeries {
        let recs = date_range(start, end)
            .map(|date| {
                let (t, p) = f(date);
                DailyRecord::new(date, t, p)
            })
            .collect();
        StationSeries::new("S", recs).unwrap()
    }

    #[test]
    fn rejects_duplicate_dates_and_negative_precip() {
        let r = DailyRecord::new(d(2000, 1, 1), Some(0.0), Some(1.0));
        assert!(StationSeries::new("x", vec![r, r]).is_err());
        let neg = DailyRecord::new(d(2000, 1, 1), Some(0.0), Some(-1.0));
        assert!(StationSeries::new("x", vec![neg]).is_err());
    }

    #[test]
    fn default_window_is_nov_to_apr() {
        let w = SeasonWindow::winter(2001);
        assert_eq!(w.start, d(2000, 11, 1));
        assert_eq!(w.end, d(2001, 4, 30));
        assert_eq!(w.len_days(), 181);
        assert!(SeasonWindow::new(2001, d(2001, 4, 30), d(2000, 11, 1)).is_err());
    }

    #[test]
    fn temperature_fill_uses_monthly_offset() {
        // January offset +2: target = donor + 2 on every present day
        let donor = series_from(d(2000, 1, 1), d(2000, 1, 31), |_| (Some(-12.0), None));
        let target = series_from(d(2000, 1, 1), d(2000, 1, 31), |date| {
            if date.day() == 5 {
                (None, None)
            } else {
                (Some(-10.0), None)
            }
        });
        let out = fill_gaps_temperature(&target, &donor).unwrap();
        assert_eq!(out.series.tmean(d(2000, 1, 5)), Some(-10.0));
        assert_eq!(out.filled.len(), 1);
        assert!(out.still_missing.is_empty());
    }

    #[test]
    fn complete_target_is_unchanged() {
        let donor = series_from(d(2000, 1, 1), d(2000, 3, 31), |_| (Some(1.0), Some(2.0)));
        let target = series_from(d(2000, 1, 1), d(2000, 3, 31), |date| {
            (Some(date.day() as f64), Some(0.5))
        });
        assert_eq!(fill_gaps_temperature(&target, &donor).unwrap().series, target);
        assert_eq!(fill_gaps_precip(&target, &donor).unwrap().series, target);
    }

    #[test]
    fn three_month_offsets_hand_trace() {
        // donor temperature varies by day; target = donor + offset(month)
        let offset = |m: u32| match m {
            1 => 1.0,
            2 => -2.0,
            _ => 0.0,
        };
        let donor_t = |date: NaiveDate| (date.ordinal() as f64 * 0.37).sin() * 10.0;
        let gaps = [d(2001, 1, 3), d(2001, 1, 20), d(2001, 2, 14), d(2001, 3, 1), d(2001, 3, 31)];
        let donor = series_from(d(2001, 1, 1), d(2001, 3, 31), |date| (Some(donor_t(date)), None));
        let target = series_from(d(2001, 1, 1), d(2001, 3, 31), |date| {
            if gaps.contains(&date) {
                (None, None)
            } else {
                (Some(donor_t(date) + offset(date.month())), None)
            }
        });
        let out = fill_gaps_temperature(&target, &donor).unwrap();
        assert_eq!(out.filled.len(), gaps.len());
        for g in gaps {
            let want = donor_t(g) + offset(g.month());
            assert!((out.series.tmean(g).unwrap() - want).abs() < 1e-12, "{g}");
        }
        let offs = monthly_offsets(&target, &donor);
        assert!((offs[&2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn fill_reports_missing_month_and_unfillable_dates() {
        // donor has no January overlap with present target values
        let donor = series_from(d(2000, 1, 1), d(2000, 2, 29), |date| {
            if date.month() == 1 && date.day() > 1 {
                (None, None)
            } else {
                (Some(0.0), Some(0.0))
            }
        });
        let target = series_from(d(2000, 1, 1), d(2000, 2, 29), |date| {
            if date.month() == 1 && date.day() == 1 {
                (None, None)
            } else {
                (Some(1.0), Some(1.0))
            }
        });
        let err = fill_gaps_temperature(&target, &donor).unwrap_err();
        assert!(matches!(err, Error::NoCoincidentDays { month: 1, .. }), "{err}");

        // a February gap where the donor is missing too stays missing
        let donor = series_from(d(2000, 1, 1), d(2000, 2, 29), |date| {
            if date == d(2000, 2, 10) {
                (None, None)
            } else {
                (Some(0.0), Some(3.0))
            }
        });
        let target = series_from(d(2000, 1, 1), d(2000, 2, 29), |date| {
            if date == d(2000, 2, 10) || date == d(2000, 2, 11) {
                (None, None)
            } else {
                (Some(1.0), Some(1.0))
            }
        });
        let out = fill_gaps_precip(&target, &donor).unwrap();
        assert_eq!(out.still_missing, vec![d(2000, 2, 10)]);
        assert_eq!(out.series.precip(d(2000, 2, 11)), Some(3.0));
        assert_eq!(out.series.precip(d(2000, 2, 10)), None);
    }

    #[test]
    fn precip_fill_substitutes_and_sums() {
        let gaps = [d(2000, 11, 3), d(2000, 11, 17), d(2000, 12, 25)];
        let donor = series_from(d(2000, 11, 1), d(2000, 12, 31), |date| {
            if date == d(2000, 11, 3) {
                (None, Some(4.2))
            } else {
                (None, Some(date.day() as f64 * 0.1 + 1.0))
            }
        });
        let target = series_from(d(2000, 11, 1), d(2000, 12, 31), |date| {
            if gaps.contains(&date) {
                (None, None)
            } else {
                (None, Some(1.5))
            }
        });
        let out = fill_gaps_precip(&target, &donor).unwrap();
        assert_eq!(out.series.precip(d(2000, 11, 3)), Some(4.2));
        let total: f64 = out.series.records().iter().filter_map(|r| r.precip).sum();
        let present = (61 - gaps.len()) as f64 * 1.5;
        let donor_part: f64 = gaps.iter().map(|g| donor.precip(*g).unwrap()).sum();
        assert!((total - (present + donor_part)).abs() < 1e-9);
    }

    #[test]
    fn absent_dates_inside_span_are_filled() {
        let donor = series_from(d(2000, 1, 1), d(2000, 1, 10), |_| (Some(0.0), Some(2.0)));
        let recs: Vec<_> = date_range(d(2000, 1, 1), d(2000, 1, 10))
            .filter(|x| x.day() != 4)
            .map(|x| DailyRecord::new(x, Some(1.0), Some(1.0)))
            .collect();
        let target = StationSeries::new("T", recs).unwrap();
        let out = fill_gaps_precip(&target, &donor).unwrap();
        assert_eq!(out.series.precip(d(2000, 1, 4)), Some(2.0));
        assert_eq!(out.series.tmean(d(2000, 1, 4)), None);
        let out = fill_gaps_temperature(&out.series, &donor).unwrap();
        assert_eq!(out.series.tmean(d(2000, 1, 4)), Some(1.0));
    }

    #[test]
    fn winter_precip_constant_cold_is_plain_sum() {
        let w = SeasonWindow::winter(2001);
        let s = series_from(w.start, w.end, |_| (Some(-10.0), Some(1.0)));
        assert_eq!(winter_precip(&s, &w).unwrap(), 181.0);
        assert_eq!(window_precip_sum(&s, &w).unwrap(), 181.0);
    }

    #[test]
    fn winter_precip_resets_after_early_melt_out() {
        // days 0..10: -5 °C, 1 mm/day (10 mm, S = 50)
        // days 10..20: +5 °C, dry (S back to 0 on day 19)
        // remaining days: -10 °C, 50 mm spread over the first 10 of them
        let w = SeasonWindow::winter(2001);
        let s = series_from(w.start, w.end, |date| {
            let i = (date - w.start).num_days();
            match i {
                0..=9 => (Some(-5.0), Some(1.0)),
                10..=19 => (Some(5.0), Some(0.0)),
                20..=29 => (Some(-10.0), Some(5.0)),
                _ => (Some(-10.0), Some(0.0)),
            }
        });
        assert_eq!(winter_precip(&s, &w).unwrap(), 50.0);
        assert_eq!(window_precip_sum(&s, &w).unwrap(), 60.0);
    }

    #[test]
    fn mid_winter_warm_week_does_not_reset() {
        let w = SeasonWindow::winter(2001);
        // long cold build-up then a warm week that leaves S well above zero
        let s = series_from(w.start, w.end, |date| {
            let i = (date - w.start).num_days();
            let t = if (60..67).contains(&i) { 3.0 } else { -15.0 };
            (Some(t), Some(0.5 + (i % 3) as f64))
        });
        let full = window_precip_sum(&s, &w).unwrap();
        assert_eq!(winter_precip(&s, &w).unwrap(), full);
    }

    #[test]
    fn winter_precip_reports_missing_dates() {
        let w = SeasonWindow::winter(2001);
        let s = series_from(w.start, w.end, |date| {
            if date == d(2001, 1, 15) {
                (Some(-3.0), None)
            } else {
                (Some(-3.0), Some(1.0))
            }
        });
        match winter_precip(&s, &w).unwrap_err() {
            Error::MissingData { dates, .. } => assert_eq!(dates, vec![d(2001, 1, 15)]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn ddf_constant_and_alternating() {
        let w = SeasonWindow::new(2001, d(2000, 11, 1), d(2001, 3, 30)).unwrap();
        assert_eq!(w.len_days(), 150);
        let s = series_from(w.start, w.end, |_| (Some(-10.0), None));
        assert_eq!(degree_days_freezing(&s, &w).unwrap(), 1500.0);

        let w = SeasonWindow::new(2001, d(2001, 1, 1), d(2001, 1, 10)).unwrap();
        let s = series_from(w.start, w.end, |date| {
            (Some(if date.day() % 2 == 1 { -5.0 } else { 5.0 }), None)
        });
        assert_eq!(degree_days_freezing(&s, &w).unwrap(), 25.0);
    }

    fn spring(year: i32, t: impl Fn(NaiveDate) -> f64) -> StationSeries {
        series_from(d(year, 1, 1), d(year, 6, 30), |date| (Some(t(date)), None))
    }

    #[test]
    fn melt_test_hand_accumulations() {
        let apr1 = d(2001, 4, 1);
        let s = spring(2001, |date| if date >= apr1 { 10.0 } else { 0.0 });
        assert_eq!(melt_test(&s, 2001).unwrap(), Some(11));
        let s = spring(2001, |date| if date >= apr1 { 5.0 } else { 0.0 });
        assert_eq!(melt_test(&s, 2001).unwrap(), Some(22));
        let s = spring(2001, |date| if date == apr1 { 150.0 } else { -1.0 });
        assert_eq!(melt_test(&s, 2001).unwrap(), Some(0));
    }

    #[test]
    fn melt_test_undefined_when_upper_never_reached() {
        let s = spring(2001, |_| 0.5);
        // 181 days * 0.5 = 90.5 < 150
        assert_eq!(melt_test(&s, 2001).unwrap(), None);
    }

    #[test]
    fn melt_test_exact_threshold_counts_as_crossed() {
        // 20, 20 -> 40 on day 1; then 110 on day 2 -> exactly 150
        let s = spring(2001, |date| match date.ordinal() {
            1 | 2 => 20.0,
            3 => 110.0,
            _ => 0.0,
        });
        assert_eq!(melt_test(&s, 2001).unwrap(), Some(1));
    }
}
