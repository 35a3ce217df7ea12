//! Loading a speeds file together with its road-distance table.

use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{check_sensors, load_speeds, to_day_tensor, DayTensor, LoadOptions};
use crate::graph::{all_pairs_shortest, DistanceTable};
use crate::Result;

/// Whole-day speed tensor plus the symmetric sensor distance matrix, in the
/// sensor order of the speeds file.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub tensor: DayTensor,
    pub distances: DMatrix<f64>,
}

pub fn load_inputs(speeds: impl AsRef<Path>, distances: impl AsRef<Path>, opts: LoadOptions) -> Result<Inputs> {
    let series = load_speeds(speeds, opts)?;
    let table = DistanceTable::from_csv_path(distances, series.sensor_ids.clone())?;
    check_sensors(&series, &table)?;
    let distances = all_pairs_shortest(&table)?;
    let tensor = to_day_tensor(&series)?;
    Ok(Inputs { tensor, distances })
}
