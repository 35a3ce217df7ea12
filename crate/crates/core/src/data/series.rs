use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike};
use log::warn;

use super::{is_observed, MINUTES_PER_DAY};
use crate::error::{Error, Result};
use crate::graph::DistanceTable;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Multivariate speed series sampled on a fixed grid.
///
/// Row `k` is observed at `start + k * interval_minutes`. Missing cells are
/// `NaN` (empty in the CSV) or `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSeries {
    pub sensor_ids: Vec<String>,
    pub start: NaiveDateTime,
    pub interval_minutes: u32,
    /// Row-major, `rows x N`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Required sampling interval; needed for single-row files.
    pub interval_minutes: Option<u32>,
    /// Insert all-missing rows for absent timestamps instead of failing.
    pub fill_gaps: bool,
}

impl SpeedSeries {
    pub fn num_sensors(&self) -> usize {
        self.sensor_ids.len()
    }

    pub fn num_rows(&self) -> usize {
        if self.sensor_ids.is_empty() {
            0
        } else {
            self.values.len() / self.sensor_ids.len()
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.num_sensors();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        self.start + chrono::Duration::minutes(k as i64 * self.interval_minutes as i64)
    }

    /// Rows per day at this sampling interval.
    pub fn slots_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.interval_minutes) as usize
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.sensor_ids.iter().cloned());
        w.write_record(&header)?;
        for k in 0..self.num_rows() {
            let mut rec = vec![self.timestamp(k).format(TIMESTAMP_FORMAT).to_string()];
            rec.extend(
                self.row(k)
                    .iter()
                    .map(|v| if v.is_nan() { String::new() } else { format!("{v}") }),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Parses ISO-8601 timestamps; a fixed UTC offset, if present, is dropped
/// and the wall-clock time kept.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    None
}

fn minutes_between(a: NaiveDateTime, b: NaiveDateTime) -> i64 {
    (b - a).num_seconds() / 60
}

/// Reads a speed CSV: `timestamp,<sensor_1>,...,<sensor_N>`.
pub fn load_speeds(path: impl AsRef<Path>, opts: LoadOptions) -> Result<SpeedSeries> {
    let f = std::fs::File::open(path.as_ref())?;
    read_speeds(f, opts)
}

pub fn read_speeds<R: Read>(reader: R, opts: LoadOptions) -> Result<SpeedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("timestamp") || header.len() < 2 {
        return Err(Error::Parse {
            line: Some(1),
            msg: "header must be `timestamp,<sensor ids...>`".into(),
        });
    }
    let sensor_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = sensor_ids.len();

    let mut stamps = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line: Some(line),
            msg: e.to_string(),
        })?;
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                line: Some(line),
                msg: format!("ragged row: {} fields, expected {}", rec.len(), n + 1),
            });
        }
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| Error::Parse {
            line: Some(line),
            msg: format!("malformed timestamp `{}`", &rec[0]),
        })?;
        let mut row = Vec::with_capacity(n);
        for cell in rec.iter().skip(1) {
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    line: Some(line),
                    msg: format!("invalid speed `{cell}`"),
                })?
            };
            row.push(v);
        }
        stamps.push((line, ts));
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: None,
            msg: "no data rows".into(),
        });
    }

    for w in stamps.windows(2) {
        if minutes_between(w[0].1, w[1].1) <= 0 {
            return Err(Error::Parse {
                line: Some(w[1].0),
                msg: format!("non-monotone timestamp {} after {}", w[1].1, w[0].1),
            });
        }
    }

    let interval = match opts.interval_minutes {
        Some(iv) => iv as i64,
        None if stamps.len() >= 2 => minutes_between(stamps[0].1, stamps[1].1),
        None => {
            return Err(Error::Parse {
                line: None,
                msg: "cannot infer sampling interval from a single row".into(),
            })
        }
    };
    if interval <= 0 || MINUTES_PER_DAY as i64 % interval != 0 {
        return Err(Error::Parse {
            line: stamps.get(1).map(|s| s.0),
            msg: format!("sampling interval {interval} min must be positive and divide 1440"),
        });
    }

    let mut values = Vec::with_capacity(rows.len() * n);
    values.extend_from_slice(&rows[0]);
    for w in 1..rows.len() {
        let (_, prev) = stamps[w - 1];
        let (line, cur) = stamps[w];
        let step = minutes_between(prev, cur);
        if step != interval {
            if !opts.fill_gaps || step % interval != 0 {
                return Err(Error::Parse {
                    line: Some(line),
                    msg: format!("gap in timestamps: {prev} -> {cur} (interval {interval} min)"),
                });
            }
            let missing = (step / interval - 1) as usize;
            values.extend(std::iter::repeat_n(f64::NAN, missing * n));
        }
        values.extend_from_slice(&rows[w]);
    }

    let start = stamps[0].1;
    if start.second() != 0 {
        return Err(Error::Parse {
            line: Some(2),
            msg: "timestamps must fall on whole minutes".into(),
        });
    }
    Ok(SpeedSeries {
        sensor_ids,
        start,
        interval_minutes: interval as u32,
        values,
    })
}

/// Every series sensor must be present in the distance table.
pub fn check_sensors(series: &SpeedSeries, table: &DistanceTable) -> Result<()> {
    let known = table.known_nodes();
    let unknown: Vec<String> = series
        .sensor_ids
        .iter()
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::SensorMismatch(unknown))
    }
}

/// Averages `factor` consecutive rows, ignoring missing cells.
///
/// Leading rows are skipped until the first timestamp aligned with the new
/// interval; a trailing partial window is dropped.
pub fn downsample(s: &SpeedSeries, factor: usize) -> Result<SpeedSeries> {
    if factor == 0 {
        return Err(Error::Config("downsampling factor must be positive".into()));
    }
    let per_day = s.slots_per_day();
    if !per_day.is_multiple_of(factor) {
        return Err(Error::Config(format!(
            "factor {factor} does not divide {per_day} slots per day"
        )));
    }
    let new_interval = s.interval_minutes * factor as u32;
    let n = s.num_sensors();
    let rows = s.num_rows();
    let lead = (0..rows)
        .find(|&k| {
            let t = s.timestamp(k).time();
            (t.hour() * 60 + t.minute()).is_multiple_of(new_interval)
        })
        .unwrap_or(rows);
    let windows = (rows - lead) / factor;
    if lead > 0 {
        warn!("downsample: skipped {lead} leading rows to align to {new_interval} min");
    }

    let mut values = Vec::with_capacity(windows * n);
    for w in 0..windows {
        let base = lead + w * factor;
        for i in 0..n {
            let (sum, cnt) = (base..base + factor)
                .map(|k| s.row(k)[i])
                .filter(|v| is_observed(*v))
                .fold((0.0, 0usize), |(a, c), v| (a + v, c + 1));
            values.push(if cnt == 0 { f64::NAN } else { sum / cnt as f64 });
        }
    }
    Ok(SpeedSeries {
        sensor_ids: s.sensor_ids.clone(),
        start: s.timestamp(lead),
        interval_minutes: new_interval,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>, interval: u32) -> SpeedSeries {
        SpeedSeries {
            sensor_ids: vec!["s".into()],
            start: parse_timestamp("2017-01-01T00:00:00").unwrap(),
            interval_minutes: interval,
            values,
        }
    }

    #[test]
    fn small_csv() {
        let csv = "timestamp,a,b\n2017-01-01 00:00:00,60.5,61\n2017-01-01 00:05:00,,0\n";
        let s = read_speeds(csv.as_bytes(), LoadOptions::default()).unwrap();
        assert_eq!(s.num_sensors(), 2);
        assert_eq!(s.num_rows(), 2);
        assert_eq!(s.interval_minutes, 5);
        assert!(s.row(1)[0].is_nan());
        assert_eq!(s.row(1)[1], 0.0);
        assert!(!is_observed(s.row(1)[1]));
    }

    #[test]
    fn gap_is_named() {
        let csv = "timestamp,a\n2017-01-01T00:00:00,1\n2017-01-01T00:05:00,1\n2017-01-01T00:15:00,1\n";
        let err = read_speeds(csv.as_bytes(), LoadOptions::default()).unwrap_err();
        match &err {
            Error::Parse { line, msg } => {
                assert_eq!(*line, Some(4));
                assert!(msg.contains("00:05:00") && msg.contains("00:15:00"), "{msg}");
            }
            e => panic!("unexpected {e}"),
        }
        let filled = read_speeds(
            csv.as_bytes(),
            LoadOptions {
                fill_gaps: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(filled.num_rows(), 4);
        assert!(filled.row(2)[0].is_nan());
    }

    #[test]
    fn malformed_inputs() {
        let ragged = "timestamp,a,b\n2017-01-01T00:00:00,1\n";
        assert!(matches!(
            read_speeds(ragged.as_bytes(), LoadOptions::default()),
            Err(Error::Parse { line: Some(2), .. })
        ));
        let bad_ts = "timestamp,a\n2017-01-01T00:00:00,1\nyesterday,2\n";
        assert!(matches!(
            read_speeds(bad_ts.as_bytes(), LoadOptions::default()),
            Err(Error::Parse { line: Some(3), .. })
        ));
        let backwards = "timestamp,a\n2017-01-01T00:05:00,1\n2017-01-01T00:00:00,2\n";
        let err = read_speeds(backwards.as_bytes(), LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("non-monotone"));
    }

    #[test]
    fn offset_timestamps_keep_wall_clock() {
        let t = parse_timestamp("2017-01-01T08:30:00-08:00").unwrap();
        assert_eq!(t.format(TIMESTAMP_FORMAT).to_string(), "2017-01-01T08:30:00");
    }

    #[test]
    fn downsample_masked_mean() {
        let s = series(vec![60.0, 62.0, 60.0, 0.0, 0.0, f64::NAN], 5);
        let d = downsample(&s, 2).unwrap();
        assert_eq!(d.interval_minutes, 10);
        assert_eq!(d.values[0], 61.0);
        assert_eq!(d.values[1], 60.0);
        assert!(d.values[2].is_nan());
        assert!(downsample(&s, 0).is_err());
        assert!(downsample(&s, 7).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = series(vec![60.25, f64::NAN, 1.0 / 3.0], 5);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = read_speeds(buf.as_slice(), LoadOptions::default()).unwrap();
        assert_eq!(back.start, s.start);
        assert_eq!(back.values[0], 60.25);
        assert!(back.values[1].is_nan());
        assert_eq!(back.values[2], 1.0 / 3.0);
    }
}
