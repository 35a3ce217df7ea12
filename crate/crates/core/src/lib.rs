//! Forecasting daily-periodic signals on sensor graphs with a per-slot
//! dynamic linear model whose transitions are shrunk toward mixtures of
//! heat-diffusion kernels.
//!
//! The pipeline: [`graph`] turns travel distances into a Laplacian and a grid
//! of diffusion kernels, [`data`] loads and normalizes speed series into a
//! day tensor, [`train`] fits every slot by maximizing the marginal
//! likelihood, and [`TrainedModel`] forecasts. [`eval`] scores forecasts and
//! [`synthetic`] generates data with known parameters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dlm;
pub mod error;
pub mod eval;
pub mod evidence;
pub mod forecast;
pub mod graph;
pub mod inputs;
pub mod model;
mod optim;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use model::{TrainedModel, TransitionMode};
