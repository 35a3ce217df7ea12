//! Speed time-series ingestion and the day-by-slot tensor layout.

mod norm;
mod series;
mod tensor;

pub(crate) use norm::imputed_slots;
pub use norm::NormStats;
pub use series::{
    check_sensors, downsample, load_speeds, parse_timestamp, read_speeds, LoadOptions, SpeedSeries, TIMESTAMP_FORMAT,
};
pub use tensor::{split_days, to_day_tensor, DayTensor};

pub const MINUTES_PER_DAY: u32 = 1440;

/// Observed speeds are finite and nonzero; `0` and empty cells are missing.
#[inline]
pub fn is_observed(v: f64) -> bool {
    v.is_finite() && v != 0.0
}
