//! Hourly input series and their reduction to representative days.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::ScenarioError;

pub const HOURS_PER_DAY: usize = 24;

/// One year (or more) of aligned hourly series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    /// MWh per hour.
    pub demand: Vec<f64>,
    pub cf_solar: Vec<f64>,
    pub cf_onshore: Vec<f64>,
    pub cf_offshore: Vec<f64>,
    /// System-wide inflow into mid-term storage, MWh per hour.
    pub hydro_inflow: Vec<f64>,
}

impl HourlySeries {
    /// Builds a series set from demand alone; missing series are zero-filled.
    pub fn from_demand(demand: Vec<f64>) -> Self {
        let n = demand.len();
        Self {
            demand,
            cf_solar: vec![0.0; n],
            cf_onshore: vec![0.0; n],
            cf_offshore: vec![0.0; n],
            hydro_inflow: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    fn named(&self) -> [(&'static str, &Vec<f64>); 5] {
        [
            ("demand", &self.demand),
            ("cf_solar", &self.cf_solar),
            ("cf_onshore", &self.cf_onshore),
            ("cf_offshore", &self.cf_offshore),
            ("hydro_inflow", &self.hydro_inflow),
        ]
    }

    fn check(&self, windows_per_year: usize) -> Result<usize, ScenarioError> {
        let n = self.len();
        for (name, s) in self.named() {
            if s.len() != n {
                return Err(ScenarioError::invalid(
                    format!("timeseries.{name}"),
                    format!("length {} differs from demand length {n}", s.len()),
                ));
            }
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(ScenarioError::NonFinite { series: name.to_string(), index: i });
            }
        }
        if windows_per_year == 0 || n < windows_per_year * HOURS_PER_DAY {
            return Err(ScenarioError::SeriesTooShort { hours: n, needed: windows_per_year.max(1) * HOURS_PER_DAY });
        }
        Ok(n / HOURS_PER_DAY)
    }
}

/// A 24-hour profile standing in for a contiguous window of calendar days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeDay {
    pub demand: [f64; HOURS_PER_DAY],
    pub cf_solar: [f64; HOURS_PER_DAY],
    pub cf_onshore: [f64; HOURS_PER_DAY],
    pub cf_offshore: [f64; HOURS_PER_DAY],
    pub hydro_inflow: [f64; HOURS_PER_DAY],
    pub months_represented: f64,
}

impl RepresentativeDay {
    pub fn flat(demand: f64) -> Self {
        Self {
            demand: [demand; HOURS_PER_DAY],
            cf_solar: [0.0; HOURS_PER_DAY],
            cf_onshore: [0.0; HOURS_PER_DAY],
            cf_offshore: [0.0; HOURS_PER_DAY],
            hydro_inflow: [0.0; HOURS_PER_DAY],
            months_represented: 1.0,
        }
    }

    pub fn mean_demand(&self) -> f64 {
        self.demand.iter().sum::<f64>() / HOURS_PER_DAY as f64
    }

    pub fn max_demand(&self) -> f64 {
        self.demand.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_inflow(&self) -> f64 {
        self.hydro_inflow.iter().sum()
    }
}

fn day_slice(s: &[f64], day: usize) -> &[f64] {
    &s[day * HOURS_PER_DAY..(day + 1) * HOURS_PER_DAY]
}

/// Averages hour `h` over every day of each contiguous window. Window `w`
/// covers days `[w*D/W, (w+1)*D/W)` of the `D` complete days available.
pub fn build_representative_days(
    series: &HourlySeries,
    windows_per_year: usize,
) -> Result<Vec<RepresentativeDay>, ScenarioError> {
    let days = series.check(windows_per_year)?;
    let months = 12.0 / windows_per_year as f64;
    let mut out = Vec::with_capacity(windows_per_year);
    for w in 0..windows_per_year {
        let start = w * days / windows_per_year;
        let end = (w + 1) * days / windows_per_year;
        let n = (end - start) as f64;
        let avg = |s: &[f64]| {
            let mut acc = [0.0; HOURS_PER_DAY];
            for d in start..end {
                for (a, v) in acc.iter_mut().zip(day_slice(s, d)) {
                    *a += v;
                }
            }
            acc.map(|a| a / n)
        };
        out.push(RepresentativeDay {
            demand: avg(&series.demand),
            cf_solar: avg(&series.cf_solar),
            cf_onshore: avg(&series.cf_onshore),
            cf_offshore: avg(&series.cf_offshore),
            hydro_inflow: avg(&series.hydro_inflow),
            months_represented: months,
        });
    }
    Ok(out)
}

/// The calendar day holding the annual maximum hourly demand, with all
/// concurrent series from that same day. Ties go to the earliest day.
pub fn build_peak_day(series: &HourlySeries, windows_per_year: usize) -> Result<RepresentativeDay, ScenarioError> {
    let days = series.check(windows_per_year)?;
    let usable = &series.demand[..days * HOURS_PER_DAY];
    let mut peak_hour = 0;
    for (i, v) in usable.iter().enumerate() {
        if *v > usable[peak_hour] {
            peak_hour = i;
        }
    }
    let day = peak_hour / HOURS_PER_DAY;
    let copy = |s: &[f64]| -> [f64; HOURS_PER_DAY] { day_slice(s, day).try_into().expect("24-hour slice") };
    Ok(RepresentativeDay {
        demand: copy(&series.demand),
        cf_solar: copy(&series.cf_solar),
        cf_onshore: copy(&series.cf_onshore),
        cf_offshore: copy(&series.cf_offshore),
        hydro_inflow: copy(&series.hydro_inflow),
        months_represented: 12.0 / windows_per_year as f64,
    })
}

/// Reads a single-series CSV: a header row, then one value per row. When a
/// row has several columns the last one is the value.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>, ScenarioError> {
    if !path.exists() {
        return Err(ScenarioError::MissingSeries { path: path.to_path_buf() });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ScenarioError::parse(path, e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ScenarioError::parse(path, e.to_string()))?;
        let cell = rec
            .iter()
            .last()
            .ok_or_else(|| ScenarioError::parse(path, format!("row {} is empty", i + 2)))?;
        let v: f64 = cell
            .parse()
            .map_err(|_| ScenarioError::parse(path, format!("row {}: `{cell}` is not a number", i + 2)))?;
        out.push(v);
    }
    Ok(out)
}

/// Brings a series sampled every `resolution_minutes` to hourly resolution:
/// sub-hourly samples are averaged, coarser samples are repeated.
pub fn resample_to_hourly(values: &[f64], resolution_minutes: u32) -> Result<Vec<f64>, String> {
    match resolution_minutes {
        0 => Err("resolution_minutes must be > 0".into()),
        60 => Ok(values.to_vec()),
        r if r < 60 => {
            if 60 % r != 0 {
                return Err(format!("resolution {r} min does not divide an hour"));
            }
            let k = (60 / r) as usize;
            Ok(values.chunks_exact(k).map(|c| c.iter().sum::<f64>() / k as f64).collect())
        }
        r => {
            if r % 60 != 0 {
                return Err(format!("resolution {r} min is not a whole number of hours"));
            }
            let k = (r / 60) as usize;
            Ok(values.iter().flat_map(|v| std::iter::repeat(*v).take(k)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn year_of(f: impl Fn(usize) -> f64) -> HourlySeries {
        HourlySeries::from_demand((0..8760).map(f).collect())
    }

    #[test]
    fn constant_demand_is_a_fixed_point() {
        let s = year_of(|_| 100.0);
        let days = build_representative_days(&s, 6).unwrap();
        assert_eq!(days.len(), 6);
        for d in &days {
            assert!(d.demand.iter().all(|v| *v == 100.0));
            assert_eq!(d.months_represented, 2.0);
        }
    }

    #[test]
    fn alternating_days_average_by_hand() {
        // two-day window: day 0 at 50, day 1 at 150 => 100 every hour
        let demand: Vec<f64> = (0..48).map(|h| if h < 24 { 50.0 } else { 150.0 }).collect();
        let s = HourlySeries::from_demand(demand);
        let days = build_representative_days(&s, 1).unwrap();
        assert!(days[0].demand.iter().all(|v| *v == 100.0));
    }

    #[test]
    fn window_means_preserved() {
        let s = year_of(|h| 100.0 + 30.0 * ((h as f64) * 0.37).sin() + (h % 97) as f64);
        let w = 6;
        let days = build_representative_days(&s, w).unwrap();
        let n_days = 365;
        for (i, d) in days.iter().enumerate() {
            let (a, b) = (i * n_days / w * 24, (i + 1) * n_days / w * 24);
            let input_mean = s.demand[a..b].iter().sum::<f64>() / (b - a) as f64;
            let rel = (d.mean_demand() - input_mean).abs() / input_mean;
            assert!(rel < 1e-9, "window {i}: rel err {rel}");
        }
    }

    #[test]
    fn peak_day_is_raw_day_with_earliest_tie() {
        let mut s = year_of(|h| 100.0 + (h % 24) as f64);
        s.cf_solar = (0..8760).map(|h| (h as f64) / 8760.0).collect();
        s.demand[200 * 24 + 19] = 500.0;
        let p = build_peak_day(&s, 6).unwrap();
        assert_eq!(&p.demand[..], &s.demand[200 * 24..201 * 24]);
        assert_eq!(&p.cf_solar[..], &s.cf_solar[200 * 24..201 * 24]);
        assert_eq!(p.max_demand(), 500.0);

        s.demand[100 * 24 + 3] = 500.0;
        let p = build_peak_day(&s, 6).unwrap();
        assert_eq!(p.demand[3], 500.0);
    }

    #[test]
    fn short_or_non_finite_series_rejected() {
        let s = HourlySeries::from_demand(vec![1.0; 100]);
        assert!(matches!(build_representative_days(&s, 6), Err(ScenarioError::SeriesTooShort { .. })));
        let mut s = year_of(|_| 1.0);
        s.cf_solar[5] = f64::NAN;
        assert!(matches!(build_peak_day(&s, 6), Err(ScenarioError::NonFinite { .. })));
    }

    #[test]
    fn resampling() {
        assert_eq!(resample_to_hourly(&[1.0, 3.0, 5.0, 7.0], 30).unwrap(), vec![2.0, 6.0]);
        assert_eq!(resample_to_hourly(&[1.0, 2.0], 120).unwrap(), vec![1.0, 1.0, 2.0, 2.0]);
        assert!(resample_to_hourly(&[1.0], 7).is_err());
    }
}
