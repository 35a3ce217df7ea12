//! Rolling-origin evaluation and per-slot diagnostics.

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{is_observed, DayTensor};
use crate::error::{Error, Result};
use crate::model::TrainedModel;

/// Floor applied to the long-period weight when forming the short/long ratio.
pub const RATIO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct HorizonScore {
    pub steps: usize,
    pub minutes: u32,
    /// RMSE over observed targets only.
    pub model_rmse: Option<f64>,
    pub baseline_rmse: Option<f64>,
    /// RMSE with missing targets scored as zero speed.
    pub model_rmse_unmasked: Option<f64>,
    pub baseline_rmse_unmasked: Option<f64>,
    pub count: usize,
    pub count_unmasked: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlotScore {
    pub slot: usize,
    pub minute_of_day: u32,
    pub steps: usize,
    pub model_rmse: Option<f64>,
    pub baseline_rmse: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub interval_minutes: u32,
    pub wrap: bool,
    pub test_days: Vec<NaiveDate>,
    pub horizons: Vec<HorizonScore>,
    #[serde(skip)]
    pub per_slot: Vec<SlotScore>,
}

#[derive(Clone)]
struct Acc {
    model: Vec<f64>,
    base: Vec<f64>,
    count: Vec<usize>,
    model_u: Vec<f64>,
    base_u: Vec<f64>,
    count_u: Vec<usize>,
    // [horizon][slot]
    slot_model: Vec<Vec<f64>>,
    slot_base: Vec<Vec<f64>>,
    slot_count: Vec<Vec<usize>>,
}

impl Acc {
    fn new(nh: usize, t_per: usize) -> Self {
        Self {
            model: vec![0.0; nh],
            base: vec![0.0; nh],
            count: vec![0; nh],
            model_u: vec![0.0; nh],
            base_u: vec![0.0; nh],
            count_u: vec![0; nh],
            slot_model: vec![vec![0.0; t_per]; nh],
            slot_base: vec![vec![0.0; t_per]; nh],
            slot_count: vec![vec![0; t_per]; nh],
        }
    }

    fn merge(mut self, o: &Acc) -> Self {
        fn add<T: Copy + std::ops::AddAssign>(a: &mut [T], b: &[T]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        add(&mut self.model, &o.model);
        add(&mut self.base, &o.base);
        add(&mut self.count, &o.count);
        add(&mut self.model_u, &o.model_u);
        add(&mut self.base_u, &o.base_u);
        add(&mut self.count_u, &o.count_u);
        for h in 0..self.model.len() {
            add(&mut self.slot_model[h], &o.slot_model[h]);
            add(&mut self.slot_base[h], &o.slot_base[h]);
            add(&mut self.slot_count[h], &o.slot_count[h]);
        }
        self
    }
}

fn rmse(sse: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| (sse / n as f64).sqrt())
}

/// Scores forecasts from every position of the test stream at each horizon (in steps).
///
/// Days are treated as one continuous stream, so with wrap enabled forecasts
/// issued late in a day are scored against the next test day.
pub fn evaluate(model: &TrainedModel, test: &DayTensor, horizons: &[usize], baseline_only: bool) -> Result<EvalReport> {
    if test.sensor_ids != model.sensor_ids {
        let diff = test
            .sensor_ids
            .iter()
            .zip(&model.sensor_ids)
            .filter(|(a, b)| a != b)
            .map(|(a, b)| format!("{a}!={b}"))
            .collect::<Vec<_>>();
        return Err(Error::SensorMismatch(if diff.is_empty() {
            vec![format!(
                "{} vs {} sensors",
                test.sensor_ids.len(),
                model.sensor_ids.len()
            )]
        } else {
            diff
        }));
    }
    if test.slots_per_day() != model.slots_per_day || test.interval_minutes != model.interval_minutes {
        return Err(Error::Validation(format!(
            "test data has {} slots/day at {} min, model has {} at {} min",
            test.slots_per_day(),
            test.interval_minutes,
            model.slots_per_day,
            model.interval_minutes
        )));
    }
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::Validation(
            "horizons must be non-empty and at least one step".into(),
        ));
    }
    let t_per = model.slots_per_day;
    let len = test.stream_len();
    let nh = horizons.len();

    let per_day: Vec<Acc> = (0..test.num_days())
        .into_par_iter()
        .map(|d| {
            let mut acc = Acc::new(nh, t_per);
            for t in 0..t_per {
                let p = d * t_per + t;
                let valid: Vec<bool> = horizons
                    .iter()
                    .map(|&h| p + h < len && (model.wrap || t + h < t_per))
                    .collect();
                let Some(max_h) = horizons.iter().zip(&valid).filter(|(_, v)| **v).map(|(h, _)| *h).max() else {
                    continue;
                };
                let x: Vec<f64> = test.stream_column(p).iter().copied().collect();
                let z = model.norm.normalize_snapshot(&x);
                let base = model.norm.denormalize(&z);
                let path = if baseline_only {
                    None
                } else {
                    Some(model.propagate(&z, t, max_h).expect("horizon validated"))
                };
                for (hi, &h) in horizons.iter().enumerate() {
                    if !valid[hi] {
                        continue;
                    }
                    let truth = test.stream_column(p + h);
                    let pred = path.as_ref().map(|pa| model.norm.denormalize(&pa[h - 1]));
                    for i in 0..truth.len() {
                        let observed = is_observed(truth[i]);
                        let y = if observed { truth[i] } else { 0.0 };
                        let eb = (base[i] - y).powi(2);
                        let em = pred.as_ref().map_or(0.0, |v| (v[i] - y).powi(2));
                        acc.base_u[hi] += eb;
                        acc.model_u[hi] += em;
                        acc.count_u[hi] += 1;
                        if observed {
                            acc.base[hi] += eb;
                            acc.model[hi] += em;
                            acc.count[hi] += 1;
                            acc.slot_base[hi][t] += eb;
                            acc.slot_model[hi][t] += em;
                            acc.slot_count[hi][t] += 1;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let acc = per_day.iter().fold(Acc::new(nh, t_per), |a, b| a.merge(b));

    let with_model = |v: Option<f64>| if baseline_only { None } else { v };
    let interval = model.interval_minutes;
    let scores = horizons
        .iter()
        .enumerate()
        .map(|(hi, &h)| HorizonScore {
            steps: h,
            minutes: h as u32 * interval,
            model_rmse: with_model(rmse(acc.model[hi], acc.count[hi])),
            baseline_rmse: rmse(acc.base[hi], acc.count[hi]),
            model_rmse_unmasked: with_model(rmse(acc.model_u[hi], acc.count_u[hi])),
            baseline_rmse_unmasked: rmse(acc.base_u[hi], acc.count_u[hi]),
            count: acc.count[hi],
            count_unmasked: acc.count_u[hi],
        })
        .collect();
    let per_slot = horizons
        .iter()
        .enumerate()
        .flat_map(|(hi, &h)| {
            let acc = &acc;
            (0..t_per).map(move |t| {
                let n = acc.slot_count[hi][t];
                SlotScore {
                    slot: t,
                    minute_of_day: t as u32 * interval,
                    steps: h,
                    model_rmse: with_model(rmse(acc.slot_model[hi][t], n)),
                    baseline_rmse: rmse(acc.slot_base[hi][t], n),
                    count: n,
                }
            })
        })
        .collect();
    Ok(EvalReport {
        interval_minutes: interval,
        wrap: model.wrap,
        test_days: test.days.clone(),
        horizons: scores,
        per_slot,
    })
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.horizons {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_slot_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.per_slot {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn score(&self, steps: usize) -> Option<&HorizonScore> {
        self.horizons.iter().find(|s| s.steps == steps)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlotDiagnostics {
    pub slot: usize,
    pub minute_of_day: u32,
    pub c_data: f64,
    pub c_prior: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Weight on the shortest period over the weight on the longest.
    pub pi_ratio: f64,
    /// Whether the longest-period weight was below [`RATIO_FLOOR`].
    pub ratio_floored: bool,
    pub log_evidence: f64,
    pub converged: bool,
}

/// Per-slot data/prior balance and short/long diffusion preference.
pub fn diagnostics(model: &TrainedModel) -> Vec<SlotDiagnostics> {
    model
        .slots
        .iter()
        .map(|s| {
            let pi = &s.hyper.pi;
            let long = *pi.last().expect("non-empty mixture");
            SlotDiagnostics {
                slot: s.t,
                minute_of_day: s.t as u32 * model.interval_minutes,
                c_data: s.c_data,
                c_prior: s.c_prior,
                alpha: s.hyper.alpha,
                gamma: s.hyper.gamma,
                pi_ratio: pi[0] / long.max(RATIO_FLOOR),
                ratio_floored: long < RATIO_FLOOR,
                log_evidence: s.log_evidence,
                converged: s.converged,
            }
        })
        .collect()
}

pub fn write_diagnostics_csv<W: Write>(rows: &[SlotDiagnostics], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean `c_data` over slots whose start time falls in `[from_min, to_min)`.
pub fn mean_c_data(rows: &[SlotDiagnostics], from_min: u32, to_min: u32) -> Option<f64> {
    let sel: Vec<f64> = rows
        .iter()
        .filter(|r| (from_min..to_min).contains(&r.minute_of_day))
        .map(|r| r.c_data)
        .collect();
    (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
}
