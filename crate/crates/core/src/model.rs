//! Trained model and its on-disk container.
//!
//! Layout: 8-byte magic, `u64` little-endian length of a JSON metadata
//! block, the JSON itself, then every slot transition as `N x N` little-endian
//! `f64` in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::dlm::SlotModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GDLMODEL";
pub const SCHEMA_VERSION: u32 = 1;

/// How each slot's transition is formed from the fitted hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMode {
    /// Posterior mode combining data and the diffusion prior.
    #[default]
    Map,
    /// The prior mean alone.
    PriorOnly,
    /// Least squares on the data alone.
    MaxLikelihood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub sensor_ids: Vec<String>,
    pub interval_minutes: u32,
    pub slots_per_day: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub taus: Vec<f64>,
    pub norm: NormStats,
    /// Whether the end-of-day transition into the next morning was trained.
    pub wrap: bool,
    pub mode: TransitionMode,
    pub training_days: Vec<NaiveDate>,
    pub slots: Vec<SlotModel>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    schema_version: u32,
    sensor_ids: Vec<String>,
    interval_minutes: u32,
    slots_per_day: usize,
    num_periods: usize,
    taus: Vec<f64>,
    kappa: f64,
    sigma: f64,
    epsilon: f64,
    norm: NormStats,
    wrap: bool,
    mode: TransitionMode,
    training_days: Vec<NaiveDate>,
    slots: Vec<SlotModel>,
}

impl TrainedModel {
    pub fn num_sensors(&self) -> usize {
        self.sensor_ids.len()
    }

    pub fn num_periods(&self) -> usize {
        self.taus.len()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = Metadata {
            schema_version: SCHEMA_VERSION,
            sensor_ids: self.sensor_ids.clone(),
            interval_minutes: self.interval_minutes,
            slots_per_day: self.slots_per_day,
            num_periods: self.num_periods(),
            taus: self.taus.clone(),
            kappa: self.kappa,
            sigma: self.sigma,
            epsilon: self.epsilon,
            norm: self.norm.clone(),
            wrap: self.wrap,
            mode: self.mode,
            training_days: self.training_days.clone(),
            slots: self.slots.clone(),
        };
        let json = serde_json::to_vec(&meta)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let n = self.num_sensors();
        let mut buf = Vec::with_capacity(n * n * 8);
        for s in &self.slots {
            buf.clear();
            for i in 0..n {
                for j in 0..n {
                    buf.extend_from_slice(&s.h_hat[(i, j)].to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::ModelFormat("file too short for header".into()))?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)
            .map_err(|_| Error::ModelFormat("file too short for header".into()))?;
        let len = usize::try_from(u64::from_le_bytes(len))
            .map_err(|_| Error::ModelFormat("metadata length overflows".into()))?;
        let mut json = Vec::new();
        r.by_ref().take(len as u64).read_to_end(&mut json)?;
        if json.len() != len {
            return Err(Error::ModelFormat("truncated metadata".into()));
        }
        let meta: Metadata = serde_json::from_slice(&json).map_err(|e| Error::ModelFormat(format!("metadata: {e}")))?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                meta.schema_version
            )));
        }
        let n = meta.sensor_ids.len();
        let expected_slots = meta.slots_per_day - usize::from(!meta.wrap);
        if meta.num_periods != meta.taus.len()
            || meta.norm.len() != n
            || meta.slots.len() != expected_slots
            || meta.slots.iter().any(|s| s.hyper.pi.len() != meta.num_periods)
        {
            return Err(Error::ModelFormat("inconsistent metadata".into()));
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let want = meta.slots.len() * n * n * 8;
        if payload.len() != want {
            return Err(Error::ModelFormat(format!(
                "payload is {} bytes, expected {want}",
                payload.len()
            )));
        }
        let mut slots = meta.slots;
        for (s, chunk) in slots.iter_mut().zip(payload.chunks_exact((n * n * 8).max(1))) {
            let vals = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
            s.h_hat = DMatrix::from_row_iterator(n, n, vals);
        }
        Ok(Self {
            sensor_ids: meta.sensor_ids,
            interval_minutes: meta.interval_minutes,
            slots_per_day: meta.slots_per_day,
            kappa: meta.kappa,
            sigma: meta.sigma,
            epsilon: meta.epsilon,
            taus: meta.taus,
            norm: meta.norm,
            wrap: meta.wrap,
            mode: meta.mode,
            training_days: meta.training_days,
            slots,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
