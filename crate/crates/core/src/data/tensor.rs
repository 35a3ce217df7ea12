use chrono::{NaiveDate, Timelike};
use log::warn;
use nalgebra::DMatrix;

use super::{is_observed, SpeedSeries, MINUTES_PER_DAY};
use crate::error::{Error, Result};

/// Whole days of signals arranged by time-of-day slot.
///
/// `slots[t]` is `N x m`: column `d` holds the snapshot at slot `t` of day
/// `days[d]`. Missing entries are `NaN`. Days are consecutive.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTensor {
    pub sensor_ids: Vec<String>,
    pub interval_minutes: u32,
    pub days: Vec<NaiveDate>,
    pub slots: Vec<DMatrix<f64>>,
}

impl DayTensor {
    /// Slots per day, T.
    pub fn slots_per_day(&self) -> usize {
        self.slots.len()
    }

    /// Number of days, m.
    pub fn num_days(&self) -> usize {
        self.days.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensor_ids.len()
    }

    /// True where slot `t` was observed.
    pub fn mask(&self, t: usize) -> DMatrix<bool> {
        self.slots[t].map(|v| !v.is_nan())
    }

    pub fn observed_count(&self) -> usize {
        self.slots
            .iter()
            .map(|s| s.iter().filter(|v| !v.is_nan()).count())
            .sum()
    }

    /// Signal at stream position `p = d * T + t` (sensor values, may be NaN).
    pub fn stream_column(&self, p: usize) -> nalgebra::DVectorView<'_, f64> {
        let t_per = self.slots_per_day();
        self.slots[p % t_per].column(p / t_per)
    }

    /// Total number of stream positions, `m * T`.
    pub fn stream_len(&self) -> usize {
        self.num_days() * self.slots_per_day()
    }

    /// Copy restricted to `days[range]`.
    pub fn day_range(&self, range: std::ops::Range<usize>) -> DayTensor {
        let len = range.len();
        DayTensor {
            sensor_ids: self.sensor_ids.clone(),
            interval_minutes: self.interval_minutes,
            days: self.days[range.clone()].to_vec(),
            slots: self
                .slots
                .iter()
                .map(|s| s.columns(range.start, len).into_owned())
                .collect(),
        }
    }

    /// Back to a flat series starting at midnight of the first day.
    pub fn flatten(&self) -> SpeedSeries {
        let n = self.num_sensors();
        let mut values = Vec::with_capacity(self.stream_len() * n);
        for p in 0..self.stream_len() {
            values.extend(self.stream_column(p).iter());
        }
        SpeedSeries {
            sensor_ids: self.sensor_ids.clone(),
            start: self.days[0].and_hms_opt(0, 0, 0).expect("midnight"),
            interval_minutes: self.interval_minutes,
            values,
        }
    }
}

/// Reshapes a series into whole days; partial leading/trailing days are dropped.
pub fn to_day_tensor(s: &SpeedSeries) -> Result<DayTensor> {
    let iv = s.interval_minutes;
    if iv == 0 || !MINUTES_PER_DAY.is_multiple_of(iv) {
        return Err(Error::Validation(format!("interval {iv} min does not divide a day")));
    }
    let t0 = s.start.time();
    if !(t0.hour() * 60 + t0.minute()).is_multiple_of(iv) || t0.second() != 0 {
        return Err(Error::Validation(format!(
            "series start {} is not aligned to the {iv}-minute slot grid",
            s.start
        )));
    }
    let per_day = s.slots_per_day();
    let rows = s.num_rows();
    let lead = (0..rows)
        .find(|&k| {
            let t = s.timestamp(k).time();
            t.hour() == 0 && t.minute() == 0
        })
        .unwrap_or(rows);
    let m = (rows - lead) / per_day;
    let trail = rows - lead - m * per_day;
    if lead > 0 || trail > 0 {
        warn!("dropping {lead} leading and {trail} trailing rows of partial days");
    }
    if m < 2 {
        return Err(Error::Validation(format!("need at least 2 complete days, found {m}")));
    }
    let n = s.num_sensors();
    let days = (0..m).map(|d| s.timestamp(lead + d * per_day).date()).collect();
    let slots = (0..per_day)
        .map(|t| {
            DMatrix::from_fn(n, m, |i, d| {
                let v = s.row(lead + d * per_day + t)[i];
                if is_observed(v) {
                    v
                } else {
                    f64::NAN
                }
            })
        })
        .collect();
    Ok(DayTensor {
        sensor_ids: s.sensor_ids.clone(),
        interval_minutes: iv,
        days,
        slots,
    })
}

/// Chronological whole-day split: the first `round(fraction * m)` days train.
pub fn split_days(dt: &DayTensor, train_fraction: f64) -> Result<(DayTensor, DayTensor)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let m = dt.num_days();
    let n_train = (train_fraction * m as f64).round() as usize;
    if n_train == 0 || n_train >= m {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} over {m} days leaves an empty side"
        )));
    }
    Ok((dt.day_range(0..n_train), dt.day_range(n_train..m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_timestamp;
    use proptest::prelude::*;

    fn series(n: usize, rows: usize, interval: u32, start: &str, f: impl Fn(usize, usize) -> f64) -> SpeedSeries {
        SpeedSeries {
            sensor_ids: (0..n).map(|i| format!("s{i}")).collect(),
            start: parse_timestamp(start).unwrap(),
            interval_minutes: interval,
            values: (0..rows * n).map(|k| f(k / n, k % n)).collect(),
        }
    }

    #[test]
    fn two_days_of_five_minute_slots() {
        let s = series(3, 576, 5, "2017-01-01T00:00:00", |k, i| 50.0 + k as f64 + i as f64);
        let dt = to_day_tensor(&s).unwrap();
        assert_eq!(dt.slots_per_day(), 288);
        assert_eq!(dt.num_days(), 2);
        assert_eq!(dt.slots[0].shape(), (3, 2));
        // slot 10 of day 1 is row 298
        assert_eq!(dt.slots[10][(2, 1)], 50.0 + 298.0 + 2.0);
    }

    #[test]
    fn zero_is_masked() {
        let s = series(2, 96, 60, "2017-01-01T00:00:00", |k, i| {
            if k == 30 && i == 1 {
                0.0
            } else {
                55.0
            }
        });
        let dt = to_day_tensor(&s).unwrap();
        assert!(!dt.mask(6)[(1, 1)]);
        assert!(dt.mask(6)[(0, 1)]);
        assert_eq!(dt.observed_count(), 2 * 96 - 1);
    }

    #[test]
    fn partial_days_dropped_and_too_short_rejected() {
        let s = series(1, 24 * 3 + 5, 60, "2017-01-01T20:00:00", |_, _| 60.0);
        let dt = to_day_tensor(&s).unwrap();
        // 4 leading and 1 trailing partial rows
        assert_eq!(dt.num_days(), 3);
        assert_eq!(dt.days[0].to_string(), "2017-01-02");
        let short = series(1, 30, 60, "2017-01-01T00:00:00", |_, _| 60.0);
        assert!(to_day_tensor(&short).is_err());
    }

    #[test]
    fn downsampled_series_has_fewer_slots() {
        let s = series(2, 288 * 2, 5, "2017-01-01T00:00:00", |k, _| 60.0 + (k % 2) as f64);
        let d = crate::data::downsample(&s, 2).unwrap();
        assert_eq!(to_day_tensor(&d).unwrap().slots_per_day(), 144);
    }

    fn tensor_with_days(m: usize) -> DayTensor {
        let s = series(1, 24 * m, 60, "2017-01-01T00:00:00", |k, _| k as f64 + 1.0);
        to_day_tensor(&s).unwrap()
    }

    #[test]
    fn split_counts() {
        let (tr, te) = split_days(&tensor_with_days(10), 0.8).unwrap();
        assert_eq!((tr.num_days(), te.num_days()), (8, 2));
        let (tr, te) = split_days(&tensor_with_days(209), 0.8).unwrap();
        assert_eq!((tr.num_days(), te.num_days()), (167, 42));
        let (tr, te) = split_days(&tensor_with_days(170), 97.0 / 170.0).unwrap();
        assert_eq!((tr.num_days(), te.num_days()), (97, 73));
        assert!(tr.days.last() < te.days.first());
        assert!(split_days(&tensor_with_days(2), 0.1).is_err());
        assert!(split_days(&tensor_with_days(5), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn flatten_then_reshape_is_identity(n in 1usize..4, m in 2usize..5, seed in 0u64..100) {
            let s = series(n, 24 * m, 60, "2017-03-04T00:00:00", |k, i| {
                let v = ((k * 31 + i * 7 + seed as usize) % 17) as f64;
                if v == 0.0 { f64::NAN } else { 40.0 + v }
            });
            let dt = to_day_tensor(&s).unwrap();
            let again = to_day_tensor(&dt.flatten()).unwrap();
            prop_assert_eq!(dt.days.clone(), again.days.clone());
            for t in 0..dt.slots_per_day() {
                for (a, b) in dt.slots[t].iter().zip(again.slots[t].iter()) {
                    prop_assert!(a == b || (a.is_nan() && b.is_nan()));
                }
            }
        }
    }
}
