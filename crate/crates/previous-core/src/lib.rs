//! Core library for predicting per-layer CNN inference cost on a target
//! device from architectural metrics alone.
//!
//! The crate is organized as a pipeline:
//!
//! * [`netdef`] — network descriptions (layers, shapes, validation,
//!   shape inference, topological order) plus the canonical JSON codec.
//! * [`metrics`] — per-layer architectural metrics: weight count,
//!   operation count and memory-access count.
//! * [`previousnet`] — generators for the two characterization networks
//!   (`PreVIousNet-01` conv-style, `PreVIousNet-02` FC-style) used to
//!   collect training observations on a device.
//! * [`profiling`] — reductions over measured timing logs and power
//!   traces: per-layer runtime statistics, trace segmentation and
//!   trapezoidal energy integration.
//! * [`model`] — standardized ridge regression per layer kind, plus the
//!   network-level correction coefficient.
//! * [`predict`] — applying a fitted model bundle to an unseen network
//!   and reporting errors against optional measurements.
//! * [`simdevice`] — a deterministic synthetic device that fabricates
//!   profiling artifacts with a hidden linear cost model, used to
//!   exercise the whole pipeline end to end.
//!
//! `no_std` + `alloc` compatible; the `std` feature (default) only
//! forwards to serde's std support.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

mod float;
mod rng;

pub mod metrics;
pub mod model;
pub mod netdef;
pub mod predict;
pub mod previousnet;
pub mod profiling;
pub mod simdevice;
