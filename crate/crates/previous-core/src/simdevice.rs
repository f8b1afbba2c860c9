//! A simulated measurement device for end-to-end pipeline validation.
//!
//! The device hides a linear cost model per layer kind — runtime
//! `t = α_w·w + α_ops·ops + α_mem·mem + β` milliseconds and a per-kind
//! plateau power drawn from 2.5–3.5 W — and emits exactly the artifacts a
//! real profiling session produces: a per-run timing log, an execution
//! schedule, a power trace, and measured network totals scaled by a
//! hidden whole-network coefficient. Because the hidden model is linear
//! in the architectural predictors, a correct fitting pipeline must
//! recover it: noiseless simulations close the loop exactly, and the
//! hidden coefficient reappears as the fitted network coefficient.
//!
//! Trace synthesis mirrors the segmentation walk sample for sample.
//! Every burst spans a whole number `m` of sample periods (the schedule
//! stores `per_run_ms = m·Δt`), and the plateau height is chosen so the
//! trapezoidal integral over the window returns the run's energy
//! exactly: `P = E / ((m−1)·Δt)`. Since `β ≥ 0.1 ms` and plateau power
//! is at least `2.5·(1−noise)` W, bursts always rise above the 1 W idle
//! baseline, even at the maximum admissible noise.
//!
//! All randomness is keyed by `(seed, network, channel, layer, run)`, so
//! regenerating any value is order-independent and bit-identical whether
//! layers are processed serially or in parallel.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::float;
use crate::metrics::{network_metrics, MetricsError, MetricsOptions};
use crate::netdef::{LayerKind, ShapedNetwork};
use crate::profiling::{PowerTrace, ScheduleEntry, TimingRecord};
use crate::rng::{mix, SplitMix64};

/// Meter sample period: 40.96 µs.
pub const SAMPLE_PERIOD_S: f64 = 40.96e-6;
/// Idle power between bursts.
pub const BASELINE_W: f64 = 1.0;

const CH_POWER: u64 = 0;
const CH_TIMING: u64 = 1;
const CH_ENERGY: u64 = 2;
const CH_TOTAL_RUNTIME: u64 = 3;
const CH_TOTAL_ENERGY: u64 = 4;
const CH_KIND_COST: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
struct KindCost {
    alpha: [f64; 3],
    beta: f64,
    power_w: f64,
}

/// Measured totals for one network, as a device reports them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTotals {
    pub network: String,
    pub runtime_ms: f64,
    pub energy_mj: f64,
}

/// Everything one profiling session on the device produces.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedProfile {
    pub timing: Vec<TimingRecord>,
    pub schedule: Vec<ScheduleEntry>,
    pub gap_ms: f64,
    pub trace: PowerTrace,
    pub totals: NetworkTotals,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimDeviceError {
    NoiseOutOfRange { value: f64 },
    CoefficientOutOfRange { value: f64 },
    BadRunCount,
    BadGap { value: f64 },
}

impl fmt::Display for SimDeviceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimDeviceError::NoiseOutOfRange { value } => {
                write!(f, "relative noise {value} outside [0, 0.5]")
            }
            SimDeviceError::CoefficientOutOfRange { value } => {
                write!(f, "network coefficient {value} outside [0.5, 1.5]")
            }
            SimDeviceError::BadRunCount => write!(f, "run count must be at least 1"),
            SimDeviceError::BadGap { value } => {
                write!(f, "inter-run gap {value} ms must be positive")
            }
        }
    }
}

impl core::error::Error for SimDeviceError {}

#[derive(Clone, Debug)]
pub struct SimDevice {
    seed: u64,
    noise_rel: f64,
    hidden_c: f64,
    runs: u32,
    gap_ms: f64,
    costs: BTreeMap<LayerKind, KindCost>,
}

fn name_tag(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf29ce484222325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100000001b3)
        })
}

/// Coefficient ranges per kind: `(α_w, α_ops, α_mem)` low/high pairs plus
/// the fixed-cost range, in ms. Predictor-free terms are pinned to zero.
fn cost_ranges(kind: LayerKind) -> ([[f64; 2]; 3], [f64; 2]) {
    match kind {
        LayerKind::Conv => (
            [[5e-9, 2e-8], [1e-7, 3e-7], [2e-8, 6e-8]],
            [0.15, 0.3],
        ),
        LayerKind::Fc => (
            [[8e-8, 2e-7], [8e-8, 2e-7], [2e-8, 6e-8]],
            [0.1, 0.2],
        ),
        LayerKind::Pool => ([[0.0, 0.0], [4e-8, 1.2e-7], [2e-8, 8e-8]], [0.1, 0.18]),
        LayerKind::Relu => ([[0.0, 0.0], [2e-8, 6e-8], [2e-8, 7e-8]], [0.1, 0.15]),
        LayerKind::BatchNorm => (
            [[1e-7, 3e-7], [3e-8, 8e-8], [2e-8, 7e-8]],
            [0.1, 0.16],
        ),
        LayerKind::Scale => (
            [[1e-7, 3e-7], [3e-8, 8e-8], [2e-8, 7e-8]],
            [0.1, 0.16],
        ),
        LayerKind::Concat => ([[0.0, 0.0], [0.0, 0.0], [4e-8, 1.2e-7]], [0.1, 0.15]),
        LayerKind::Eltwise => ([[0.0, 0.0], [3e-8, 9e-8], [2e-8, 8e-8]], [0.1, 0.15]),
        LayerKind::Softmax => ([[0.0, 0.0], [5e-8, 1.5e-7], [3e-8, 9e-8]], [0.1, 0.15]),
    }
}

impl SimDevice {
    /// A device with hidden costs drawn from `seed`. `noise_rel` bounds
    /// the multiplicative measurement noise (0 to 0.5); `hidden_c` is the
    /// whole-network coefficient the fit should recover (0.5 to 1.5).
    pub fn new(seed: u64, noise_rel: f64, hidden_c: f64) -> Result<Self, SimDeviceError> {
        if !(0.0..=0.5).contains(&noise_rel) {
            return Err(SimDeviceError::NoiseOutOfRange { value: noise_rel });
        }
        if !(0.5..=1.5).contains(&hidden_c) {
            return Err(SimDeviceError::CoefficientOutOfRange { value: hidden_c });
        }
        let mut costs = BTreeMap::new();
        for (idx, kind) in LayerKind::ALL.iter().enumerate() {
            let mut stream = SplitMix64::new(mix(&[seed, CH_KIND_COST, idx as u64]));
            let (alpha_ranges, beta_range) = cost_ranges(*kind);
            let mut alpha = [0.0f64; 3];
            for (a, range) in alpha.iter_mut().zip(alpha_ranges) {
                *a = stream.uniform(range[0], range[1]);
            }
            let beta = stream.uniform(beta_range[0], beta_range[1]);
            let mut power_stream = SplitMix64::new(mix(&[seed, CH_POWER, idx as u64]));
            let power_w = power_stream.uniform(2.5, 3.5);
            costs.insert(
                *kind,
                KindCost {
                    alpha,
                    beta,
                    power_w,
                },
            );
        }
        Ok(Self {
            seed,
            noise_rel,
            hidden_c,
            runs: 10,
            gap_ms: 300.0,
            costs,
        })
    }

    pub fn with_runs(mut self, runs: u32) -> Result<Self, SimDeviceError> {
        if runs == 0 {
            return Err(SimDeviceError::BadRunCount);
        }
        self.runs = runs;
        Ok(self)
    }

    pub fn with_gap_ms(mut self, gap_ms: f64) -> Result<Self, SimDeviceError> {
        if !(gap_ms > 0.0) {
            return Err(SimDeviceError::BadGap { value: gap_ms });
        }
        self.gap_ms = gap_ms;
        Ok(self)
    }

    pub fn gap_ms(&self) -> f64 {
        self.gap_ms
    }

    pub fn hidden_coefficient(&self) -> f64 {
        self.hidden_c
    }

    /// Noise-free runtime of one layer, in ms.
    pub fn true_layer_runtime(&self, kind: LayerKind, predictors: [f64; 3]) -> f64 {
        let cost = &self.costs[&kind];
        let mut t = cost.beta;
        for (a, p) in cost.alpha.iter().zip(predictors) {
            t += a * p;
        }
        t
    }

    /// Noise-free energy of one layer, in mJ.
    pub fn true_layer_energy(&self, kind: LayerKind, predictors: [f64; 3]) -> f64 {
        self.costs[&kind].power_w * self.true_layer_runtime(kind, predictors)
    }

    fn noise(&self, words: &[u64]) -> f64 {
        if self.noise_rel == 0.0 {
            return 1.0;
        }
        let mut stream = SplitMix64::new(mix(words));
        1.0 + stream.uniform(-self.noise_rel, self.noise_rel)
    }

    /// Run every layer of `shaped` on the device: per-layer costs follow
    /// the hidden model, each run is independently noised, and the trace
    /// is synthesized so that segmenting it with the returned schedule
    /// and gap reproduces each run's energy exactly.
    pub fn simulate_profile(
        &self,
        shaped: &ShapedNetwork,
    ) -> Result<SimulatedProfile, MetricsError> {
        let rows = network_metrics(shaped, MetricsOptions::default())?;
        let tag = name_tag(&shaped.net.name);
        let dt_ms = SAMPLE_PERIOD_S * 1000.0;

        let mut timing = Vec::new();
        let mut schedule = Vec::with_capacity(rows.len());
        // (start, len, plateau) for every burst
        let mut bursts: Vec<(usize, usize, f64)> = Vec::new();
        let mut pos_ms = 0.0;
        let mut true_runtime_sum = 0.0;
        let mut true_energy_sum = 0.0;

        for (l, row) in rows.iter().enumerate() {
            let t_true = self.true_layer_runtime(row.kind, row.predictors());
            let e_true = self.true_layer_energy(row.kind, row.predictors());
            true_runtime_sum += t_true;
            true_energy_sum += e_true;

            let m = (float::ceil(t_true / dt_ms) as usize).max(2);
            let per_run_ms = m as f64 * dt_ms;
            schedule.push(ScheduleEntry {
                layer: row.layer_name.clone(),
                n_runs: self.runs,
                per_run_ms,
            });

            for r in 0..self.runs {
                let t_run =
                    t_true * self.noise(&[self.seed, tag, CH_TIMING, l as u64, r as u64]);
                timing.push(TimingRecord {
                    layer: row.layer_name.clone(),
                    run: r,
                    elapsed_ms: t_run,
                });
                let e_run =
                    e_true * self.noise(&[self.seed, tag, CH_ENERGY, l as u64, r as u64]);
                // mirror the segmentation walk so windows line up exactly
                pos_ms += self.gap_ms;
                let start = float::round(pos_ms / dt_ms) as usize;
                let plateau = e_run / 1000.0 / ((m - 1) as f64 * SAMPLE_PERIOD_S);
                bursts.push((start, m, plateau));
                pos_ms += per_run_ms;
            }
        }

        let total_samples = float::round((pos_ms + self.gap_ms) / dt_ms) as usize;
        let mut samples_w = alloc::vec![BASELINE_W; total_samples];
        for (start, len, plateau) in bursts {
            for sample in samples_w.iter_mut().skip(start).take(len) {
                *sample = plateau;
            }
        }

        let totals = NetworkTotals {
            network: shaped.net.name.clone(),
            runtime_ms: self.hidden_c
                * true_runtime_sum
                * self.noise(&[self.seed, tag, CH_TOTAL_RUNTIME]),
            energy_mj: self.hidden_c
                * true_energy_sum
                * self.noise(&[self.seed, tag, CH_TOTAL_ENERGY]),
        };

        Ok(SimulatedProfile {
            timing,
            schedule,
            gap_ms: self.gap_ms,
            trace: PowerTrace {
                sample_period_s: SAMPLE_PERIOD_S,
                samples_w,
            },
            totals,
        })
    }
}
