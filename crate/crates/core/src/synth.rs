//! Seasonal hourly load generator used as a stand-in for public grid-load exports.
//!
//! The shape is a product of an annual cycle (winter peak), a weekly cycle
//! (lower weekends) and a two-peak daily profile, plus AR(1) noise.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::series::{parse_timestamp, TimeSeries};
use crate::util;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLoad {
    pub base: f64,
    pub annual_amp: f64,
    pub daily_amp: f64,
    pub weekend_drop: f64,
    pub noise_sd: f64,
    pub noise_ar: f64,
    pub seed: u64,
}

impl Default for SyntheticLoad {
    fn default() -> Self {
        Self {
            base: 55_000.0,
            annual_amp: 0.12,
            daily_amp: 0.18,
            weekend_drop: 0.12,
            noise_sd: 0.006,
            noise_ar: 0.8,
            seed: 2015,
        }
    }
}

fn daily_profile(hour: f64) -> f64 {
    // Night trough near 04:00, midday and evening peaks.
    let bump = |center: f64, width: f64| (-((hour - center) / width).powi(2)).exp();
    -0.55 + 0.9 * bump(12.0, 3.5) + 0.8 * bump(19.0, 2.5) + 0.35 * bump(8.0, 1.5)
}

impl SyntheticLoad {
    pub fn value_at(&self, t: NaiveDateTime) -> f64 {
        let doy = t.ordinal0() as f64;
        let annual = self.annual_amp * (2.0 * PI * (doy + 10.0) / 365.25).cos();
        let weekly = match t.weekday() {
            Weekday::Sat => -0.6 * self.weekend_drop,
            Weekday::Sun => -self.weekend_drop,
            _ => 0.0,
        };
        let hour = t.hour() as f64;
        let daily_scale = if matches!(t.weekday(), Weekday::Sat | Weekday::Sun) { 0.7 } else { 1.0 };
        let daily = self.daily_amp * daily_scale * daily_profile(hour);
        self.base * (1.0 + annual + weekly + daily)
    }

    pub fn generate(&self, start: NaiveDateTime, len: usize) -> Result<TimeSeries> {
        let mut rng = util::rng(self.seed);
        let normal = Normal::new(0.0, self.noise_sd.max(0.0)).expect("finite sd");
        let mut ar = 0.0;
        let values = (0..len)
            .map(|i| {
                let t = start + chrono::Duration::hours(i as i64);
                ar = self.noise_ar * ar + normal.sample(&mut rng);
                (self.value_at(t) * (1.0 + ar)).max(0.0)
            })
            .collect();
        TimeSeries::hourly(start, values, None)
    }

    /// Four years of hourly normal data (2015–2018, 35064 points) and the
    /// `test_len` hours that follow it.
    pub fn partitions(&self, normal_len: usize, test_len: usize) -> Result<(TimeSeries, TimeSeries)> {
        let start = parse_timestamp("2015-01-01T00:00:00").expect("valid literal");
        let all = self.generate(start, normal_len + test_len)?;
        Ok(all.split_at(normal_len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_positive() {
        let g = SyntheticLoad::default();
        let (a, b) = g.partitions(35_064, 1008).unwrap();
        assert_eq!(a.len(), 35_064);
        assert_eq!(b.len(), 1008);
        assert_eq!(b.timestamps[0], parse_timestamp("2019-01-01T00:00:00").unwrap());
        assert!(a.values.iter().all(|&v| v > 0.0));
        let (a2, _) = g.partitions(35_064, 1008).unwrap();
        assert_eq!(a, a2);
    }

    #[test]
    fn winter_weekday_noon_exceeds_summer_sunday_night() {
        let g = SyntheticLoad::default();
        let w = g.value_at(parse_timestamp("2016-01-13T12:00:00").unwrap());
        let s = g.value_at(parse_timestamp("2016-07-17T04:00:00").unwrap());
        assert!(w > s);
    }
}
