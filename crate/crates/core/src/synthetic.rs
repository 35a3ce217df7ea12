//! Planted-parameter data generator.
//!
//! Sensors are scattered uniformly in a square and linked when closer than a
//! radius. Each day starts from a standard normal state and evolves through
//! per-slot transitions `H_t = sum_k pi*_tk H(tau_k) + E_t` with Gaussian
//! perturbations `E_t` and observation noise, then is mapped to speeds.

use chrono::{NaiveDate, NaiveTime};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::SpeedSeries;
use crate::error::{Error, Result};
use crate::graph::{
    all_pairs_shortest, build_graph, build_grid, mix_kernels, DiffusionGrid, DirectedEdge, DistanceTable, GraphConfig,
    SensorGraph,
};

const MAX_GRAPH_DRAWS: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub num_sensors: usize,
    pub slots_per_day: usize,
    pub num_days: usize,
    pub num_periods: usize,
    pub epsilon: f64,
    /// Side of the square holding the sensors, in meters.
    pub side: f64,
    /// Sensors closer than this are joined by a road segment.
    pub link_radius: f64,
    /// Observation noise precision.
    pub alpha: f64,
    /// Transition perturbation precision.
    pub gamma: f64,
    /// Multiplier on the transition perturbation.
    pub residual_scale: f64,
    /// Multiplier on the observation noise.
    pub noise_scale: f64,
    pub base_speed: f64,
    pub speed_scale: f64,
    pub start: NaiveDate,
    pub seed: u64,
    /// Per-slot mixture weights; drawn uniformly from the simplex when absent.
    pub pi: Option<Vec<Vec<f64>>>,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            num_sensors: 10,
            slots_per_day: 48,
            num_days: 200,
            num_periods: 5,
            epsilon: 0.01,
            side: 10_000.0,
            link_radius: 4_000.0,
            alpha: 25.0,
            gamma: 1e4,
            residual_scale: 1.0,
            noise_scale: 1.0,
            base_speed: 60.0,
            speed_scale: 5.0,
            start: NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date"),
            seed: 0,
            pi: None,
        }
    }
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_sensors < 2 || self.num_days < 2 || self.slots_per_day < 2 || self.num_periods == 0 {
            return Err(Error::Config(
                "need at least 2 sensors, 2 days, 2 slots per day and 1 diffusion period".into(),
            ));
        }
        if 1440 % self.slots_per_day != 0 {
            return Err(Error::Config(format!("{} slots do not tile a day", self.slots_per_day)));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("side", self.side),
            ("link_radius", self.link_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.residual_scale >= 0.0) || !(self.noise_scale >= 0.0) {
            return Err(Error::Config("noise scales must be non-negative".into()));
        }
        if let Some(pi) = &self.pi {
            if pi.len() != self.slots_per_day - 1 {
                return Err(Error::Config(format!(
                    "expected {} mixture vectors, got {}",
                    self.slots_per_day - 1,
                    pi.len()
                )));
            }
            for p in pi {
                crate::graph::kernels::validate_simplex(p, self.num_periods)?;
            }
        }
        Ok(())
    }

    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            kappa: None,
            sigma: None,
            epsilon: self.epsilon,
            num_periods: self.num_periods,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotTruth {
    pub slot: usize,
    pub pi: Vec<f64>,
    /// Realized transition, row by row.
    pub transition: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: PlantedSpec,
    pub sensor_ids: Vec<String>,
    pub positions: Vec<[f64; 2]>,
    pub kappa: f64,
    pub sigma: f64,
    pub taus: Vec<f64>,
    pub slots: Vec<SlotTruth>,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub series: SpeedSeries,
    pub distances: DistanceTable,
    pub graph: SensorGraph,
    pub grid: DiffusionGrid,
    pub truth: GroundTruth,
}

fn uniform_points(n: usize, side: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect()
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Pairwise Euclidean distances of `n` uniform points in a `side x side` square.
pub fn random_geometric_distances(n: usize, side: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = uniform_points(n, side, &mut rng);
    DMatrix::from_fn(n, n, |i, j| euclid(p[i], p[j]))
}

fn sensor_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (0..n).map(|i| format!("S{i:0width$}")).collect()
}

type Network = (Vec<[f64; 2]>, DistanceTable, SensorGraph);

/// Draws sensor positions until the weighted graph is connected.
fn road_network(spec: &PlantedSpec, ids: &[String], rng: &mut ChaCha8Rng) -> Result<Network> {
    let n = spec.num_sensors;
    for _ in 0..MAX_GRAPH_DRAWS {
        let pts = uniform_points(n, spec.side, rng);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let d = euclid(pts[i], pts[j]);
                if i != j && d <= spec.link_radius {
                    // round to centimeters so the CSV round-trips exactly
                    edges.push(DirectedEdge {
                        from: ids[i].clone(),
                        to: ids[j].clone(),
                        distance: (d * 100.0).round() / 100.0,
                    });
                }
            }
        }
        let table = DistanceTable::new(ids.to_vec(), edges)?;
        if table.known_nodes().len() < n {
            continue;
        }
        let dist = all_pairs_shortest(&table)?;
        if dist.iter().any(|v| !v.is_finite()) {
            continue;
        }
        match build_graph(&dist, &spec.graph_config()) {
            Ok(g) => return Ok((pts, table, g)),
            Err(Error::DisconnectedGraph { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Config(format!(
        "no connected road network after {MAX_GRAPH_DRAWS} draws; increase link_radius"
    )))
}

fn dirichlet_ones(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Draws a network, planted transitions and a speed series.
pub fn generate(spec: &PlantedSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.num_sensors;
    let t_per = spec.slots_per_day;
    let ids = sensor_ids(n);
    let (positions, distances, graph) = road_network(spec, &ids, &mut rng)?;
    let grid = build_grid(&graph, &spec.graph_config())?;

    let pis: Vec<Vec<f64>> = match &spec.pi {
        Some(p) => p.clone(),
        None => (0..t_per - 1)
            .map(|_| dirichlet_ones(spec.num_periods, &mut rng))
            .collect(),
    };
    let resid_sd = spec.residual_scale / spec.gamma.sqrt();
    let mut transitions = Vec::with_capacity(t_per - 1);
    for pi in &pis {
        let e = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * resid_sd);
        transitions.push(mix_kernels(&grid, pi)? + e);
    }

    let noise_sd = spec.noise_scale / spec.alpha.sqrt();
    let mut values = Vec::with_capacity(spec.num_days * t_per * n);
    for _ in 0..spec.num_days {
        let mut z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        for t in 0..t_per {
            if t > 0 {
                let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * noise_sd);
                z = &transitions[t - 1] * z + eps;
            }
            values.extend(z.iter().map(|v| spec.base_speed + spec.speed_scale * v));
        }
    }

    let series = SpeedSeries {
        sensor_ids: ids.clone(),
        start: spec.start.and_time(NaiveTime::MIN),
        interval_minutes: (1440 / t_per) as u32,
        values,
    };
    let truth = GroundTruth {
        spec: spec.clone(),
        sensor_ids: ids,
        positions,
        kappa: graph.kappa,
        sigma: graph.sigma,
        taus: grid.taus.clone(),
        slots: pis
            .into_iter()
            .zip(&transitions)
            .enumerate()
            .map(|(slot, (pi, h))| SlotTruth {
                slot,
                pi,
                transition: h.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
            .collect(),
    };
    Ok(Synthetic {
        series,
        distances,
        graph,
        grid,
        truth,
    })
}
