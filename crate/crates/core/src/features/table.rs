use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firth::DesignMatrix;

use super::scaling::{AffineScaling, ScalingMode};

/// Covariate row for one breakup year.
///
/// Freezing covariates use the signed convention: the column holds
/// `-Σ max(0, -tmean)`, so colder winters are more negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonFeatures {
    pub breakup_year: i32,
    pub flood: bool,
    pub gp_precip_pct: Option<f64>,
    pub fv_ddf: Option<f64>,
    pub fc_ddf: Option<f64>,
    pub melt_test: Option<f64>,
    pub freezeup_elev: Option<f64>,
    /// Optional extra covariates (monthly flows and the like), by column name.
    pub extra: BTreeMap<String, Option<f64>>,
}

impl SeasonFeatures {
    pub fn new(breakup_year: i32, flood: bool) -> Self {
        Self {
            breakup_year,
            flood,
            gp_precip_pct: None,
            fv_ddf: None,
            fc_ddf: None,
            melt_test: None,
            freezeup_elev: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            FeatureTable::GP_PRECIP => self.gp_precip_pct,
            FeatureTable::FV_DDF => self.fv_ddf,
            FeatureTable::FC_DDF => self.fc_ddf,
            FeatureTable::MELT_TEST => self.melt_test,
            FeatureTable::FREEZEUP => self.freezeup_elev,
            other => self.extra.get(other).copied().flatten(),
        }
    }

    fn slot(&mut self, name: &str) -> &mut Option<f64> {
        match name {
            FeatureTable::GP_PRECIP => &mut self.gp_precip_pct,
            FeatureTable::FV_DDF => &mut self.fv_ddf,
            FeatureTable::FC_DDF => &mut self.fc_ddf,
            FeatureTable::MELT_TEST => &mut self.melt_test,
            FeatureTable::FREEZEUP => &mut self.freezeup_elev,
            other => self.extra.entry(other.to_string()).or_insert(None),
        }
    }

    pub fn set(&mut self, name: &str, value: Option<f64>) {
        *self.slot(name) = value;
    }
}

/// One row per breakup year, ordered by year.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    rows: Vec<SeasonFeatures>,
    extra_names: Vec<String>,
}

impl FeatureTable {
    pub const YEAR: &'static str = "breakup_year";
    pub const FLOOD: &'static str = "flood";
    pub const GP_PRECIP: &'static str = "gp_precip_pct";
    pub const FV_DDF: &'static str = "fv_ddf";
    pub const FC_DDF: &'static str = "fc_ddf";
    pub const MELT_TEST: &'static str = "melt_test";
    pub const FREEZEUP: &'static str = "freezeup_elev";
    pub const STANDARD: [&'static str; 5] =
        [Self::GP_PRECIP, Self::FV_DDF, Self::FC_DDF, Self::MELT_TEST, Self::FREEZEUP];

    pub fn new(mut rows: Vec<SeasonFeatures>, extra_names: Vec<String>) -> Result<Self> {
        rows.sort_by_key(|r| r.breakup_year);
        if let Some(w) = rows.windows(2).find(|w| w[0].breakup_year == w[1].breakup_year) {
            return Err(Error::InvalidArgument(format!(
                "duplicate breakup year {}",
                w[0].breakup_year
            )));
        }
        for name in &extra_names {
            if Self::STANDARD.contains(&name.as_str())
                || name == Self::YEAR
                || name == Self::FLOOD
            {
                return Err(Error::InvalidArgument(format!("extra column `{name}` is reserved")));
            }
        }
        for r in &mut rows {
            for name in &extra_names {
                r.extra.entry(name.clone()).or_insert(None);
            }
            if let Some(k) = r.extra.keys().find(|k| !extra_names.contains(k)) {
                return Err(Error::UnknownCovariate(k.clone()));
            }
        }
        Ok(Self { rows, extra_names })
    }

    pub fn rows(&self) -> &[SeasonFeatures] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extra_names(&self) -> &[String] {
        &self.extra_names
    }

    /// Every covariate column name, standard columns first.
    pub fn covariate_names(&self) -> Vec<String> {
        Self::STANDARD
            .iter()
            .map(|s| s.to_string())
            .chain(self.extra_names.iter().cloned())
            .collect()
    }

    pub fn has_column(&self, name: &str) -> bool {
        Self::STANDARD.contains(&name) || self.extra_names.iter().any(|n| n == name)
    }

    pub fn years(&self) -> Vec<i32> {
        self.rows.iter().map(|r| r.breakup_year).collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        if !self.has_column(name) {
            return Err(Error::UnknownCovariate(name.to_string()));
        }
        Ok(self.rows.iter().map(|r| r.get(name)).collect())
    }

    /// Replaces or appends a covariate column.
    pub fn set_column(&mut self, name: &str, values: &[Option<f64>]) -> Result<()> {
        if values.len() != self.rows.len() {
            return Err(Error::LengthMismatch { expected: self.rows.len(), got: values.len() });
        }
        if name == Self::YEAR || name == Self::FLOOD {
            return Err(Error::InvalidArgument(format!("`{name}` is not a covariate")));
        }
        if !self.has_column(name) {
            self.extra_names.push(name.to_string());
        }
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.set(name, *v);
        }
        Ok(())
    }

    pub fn without_years(&self, years: &[i32]) -> Self {
        Self {
            rows: self.rows.iter().filter(|r| !years.contains(&r.breakup_year)).cloned().collect(),
            extra_names: self.extra_names.clone(),
        }
    }

    /// Drops rows missing any of `names`.
    pub fn complete_on(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            if !self.has_column(n) {
                return Err(Error::UnknownCovariate(n.to_string()));
            }
        }
        Ok(Self {
            rows: self
                .rows
                .iter()
                .filter(|r| names.iter().all(|n| r.get(n).is_some()))
                .cloned()
                .collect(),
            extra_names: self.extra_names.clone(),
        })
    }

    /// Design matrix over the rows complete on `names`, with the years used.
    pub fn design(&self, names: &[&str]) -> Result<(DesignMatrix, Vec<i32>)> {
        let sub = self.complete_on(names)?;
        let columns: Vec<Vec<f64>> = names
            .iter()
            .map(|n| sub.rows.iter().map(|r| r.get(n).expect("complete")).collect())
            .collect();
        let y: Vec<bool> = sub.rows.iter().map(|r| r.flood).collect();
        let d = DesignMatrix::from_columns(names, &columns, &y)?;
        Ok((d, sub.years()))
    }

    /// Applies `mode` to each listed column, fitting the scaling on the
    /// non-missing values of this table.
    pub fn scaled(
        &self,
        mode: ScalingMode,
        names: &[&str],
    ) -> Result<(Self, BTreeMap<String, AffineScaling>)> {
        let mut out = self.clone();
        let mut params = BTreeMap::new();
        for name in names {
            let col = self.column(name)?;
            let baseline: Vec<f64> = col.iter().flatten().copied().collect();
            let s = AffineScaling::fit(mode, &baseline)?;
            let scaled: Vec<Option<f64>> = col.iter().map(|v| v.map(|x| s.apply(x))).collect();
            out.set_column(name, &scaled)?;
            params.insert(name.to_string(), s);
        }
        Ok((out, params))
    }
}

impl FeatureTable {
    /// Applies previously fitted scalings; columns without one are unchanged.
    pub fn with_scaling(&self, params: &BTreeMap<String, AffineScaling>) -> Result<Self> {
        let mut out = self.clone();
        for (name, s) in params {
            let col = self.column(name)?;
            let scaled: Vec<Option<f64>> = col.iter().map(|v| v.map(|x| s.apply(x))).collect();
            out.set_column(name, &scaled)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> FeatureTable {
        let rows = (0..6)
            .map(|i| {
                let mut r = SeasonFeatures::new(1990 + i, i % 3 == 0);
                r.gp_precip_pct = Some(i as f64);
                r.fv_ddf = if i == 2 { None } else { Some(-(i as f64) * 10.0) };
                r.extra.insert("hh_nov".into(), Some(1.0 + i as f64));
                r
            })
            .collect();
        FeatureTable::new(rows, vec!["hh_nov".into()]).unwrap()
    }

    #[test]
    fn design_drops_incomplete_rows() {
        let t = table();
        let (d, years) = t.design(&[FeatureTable::GP_PRECIP, FeatureTable::FV_DDF]).unwrap();
        assert_eq!(d.n(), 5);
        assert!(!years.contains(&1992));
        let (d, _) = t.design(&[FeatureTable::GP_PRECIP]).unwrap();
        assert_eq!(d.n(), 6);
    }

    #[test]
    fn unknown_and_reserved_columns() {
        let t = table();
        assert!(matches!(t.column("nope"), Err(Error::UnknownCovariate(_))));
        assert!(FeatureTable::new(vec![], vec!["flood".into()]).is_err());
        let dup = vec![SeasonFeatures::new(2000, true), SeasonFeatures::new(2000, false)];
        assert!(FeatureTable::new(dup, vec![]).is_err());
    }

    #[test]
    fn scaling_round_trips_through_params() {
        let t = table();
        let (s, params) = t.scaled(ScalingMode::ZScore, &["hh_nov"]).unwrap();
        let p = params["hh_nov"];
        for (a, b) in t.column("hh_nov").unwrap().iter().zip(s.column("hh_nov").unwrap()) {
            assert!((p.invert(b.unwrap()) - a.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn exclusions() {
        let t = table().without_years(&[1991, 1993]);
        assert_eq!(t.years(), vec![1990, 1992, 1994, 1995]);
    }
}
