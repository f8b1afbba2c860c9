//! Turning raw device measurements into per-layer runtime and energy
//! statistics.
//!
//! Two measurement channels feed the fitting stage:
//!
//! * a **timing log**: one elapsed-time record per (layer, run), summarised
//!   into mean and sample standard deviation per layer;
//! * a **power trace**: watts sampled at a fixed period by an external
//!   meter, aligned against the execution **schedule** (per-layer run
//!   counts and per-run durations, separated by idle gaps), then
//!   integrated window by window into millijoules.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use crate::float;

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRecord {
    pub layer: String,
    pub run: u32,
    pub elapsed_ms: f64,
}

/// Mean/spread of a layer's elapsed times across runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuntimeStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub n_runs: usize,
}

/// Mean/spread of a layer's per-run energies across trace windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyStats {
    pub mean_mj: f64,
    pub std_mj: f64,
    pub n_windows: usize,
}

/// Power samples at a fixed period, in watts.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerTrace {
    pub sample_period_s: f64,
    pub samples_w: Vec<f64>,
}

/// One layer's slot in the measurement schedule: `n_runs` bursts of
/// `per_run_ms` each, every burst preceded by an idle gap.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleEntry {
    pub layer: String,
    pub n_runs: u32,
    pub per_run_ms: f64,
}

/// A burst located in the trace: `len` samples starting at `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWindow {
    pub layer: String,
    pub run: u32,
    pub start: usize,
    pub len: usize,
}

/// Trace regions classified by the schedule walk.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub windows: Vec<LayerWindow>,
    /// Idle stretches between bursts, as `(start, len)` sample ranges.
    pub gap_regions: Vec<(usize, usize)>,
}

/// Combined per-layer measurement summary.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerProfile {
    pub layer: String,
    pub runtime: RuntimeStats,
    pub energy: Option<EnergyStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProfilingError {
    EmptyTimingLog,
    DuplicateRun { layer: String, run: u32 },
    NonPositiveElapsed { layer: String, run: u32, value: f64 },
    NonPositiveSamplePeriod { value: f64 },
    /// The schedule walks past the end of the trace.
    TraceTooShort { expected: usize, available: usize },
    /// A window's mean power does not rise above the idle level before it,
    /// so the burst the schedule promised is not there.
    BurstNotFound {
        layer: String,
        run: u32,
        window_mean_w: f64,
        gap_mean_w: f64,
    },
    /// A window of fewer than two samples cannot be integrated.
    WindowTooNarrow { layer: String, len: usize },
    EmptyWindowList,
}

impl fmt::Display for ProfilingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfilingError::EmptyTimingLog => write!(f, "timing log holds no records"),
            ProfilingError::DuplicateRun { layer, run } => {
                write!(f, "duplicate timing record for layer {layer}, run {run}")
            }
            ProfilingError::NonPositiveElapsed { layer, run, value } => write!(
                f,
                "layer {layer} run {run} has non-positive elapsed time {value} ms"
            ),
            ProfilingError::NonPositiveSamplePeriod { value } => {
                write!(f, "sample period {value} s must be positive")
            }
            ProfilingError::TraceTooShort {
                expected,
                available,
            } => write!(
                f,
                "schedule needs {expected} trace samples but only {available} are present"
            ),
            ProfilingError::BurstNotFound {
                layer,
                run,
                window_mean_w,
                gap_mean_w,
            } => write!(
                f,
                "no burst for layer {layer} run {run}: window mean {window_mean_w} W \
                 does not exceed idle mean {gap_mean_w} W"
            ),
            ProfilingError::WindowTooNarrow { layer, len } => write!(
                f,
                "window of {len} sample(s) for layer {layer} is too narrow to integrate"
            ),
            ProfilingError::EmptyWindowList => {
                write!(f, "cannot aggregate energy over an empty window list")
            }
        }
    }
}

impl core::error::Error for ProfilingError {}

fn sample_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, float::sqrt(ss / (n - 1) as f64))
}

/// Collapse a timing log into per-layer runtime statistics.
///
/// Rejects empty logs, repeated (layer, run) pairs and non-positive
/// elapsed times. A single run yields a standard deviation of zero.
pub fn ingest_timing(
    records: &[TimingRecord],
) -> Result<BTreeMap<String, RuntimeStats>, ProfilingError> {
    if records.is_empty() {
        return Err(ProfilingError::EmptyTimingLog);
    }
    let mut per_layer: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for record in records {
        if !(record.elapsed_ms > 0.0) {
            return Err(ProfilingError::NonPositiveElapsed {
                layer: record.layer.clone(),
                run: record.run,
                value: record.elapsed_ms,
            });
        }
        let runs = per_layer.entry(record.layer.clone()).or_default();
        if runs.insert(record.run, record.elapsed_ms).is_some() {
            return Err(ProfilingError::DuplicateRun {
                layer: record.layer.clone(),
                run: record.run,
            });
        }
    }
    Ok(per_layer
        .into_iter()
        .map(|(layer, runs)| {
            let values: Vec<f64> = runs.into_values().collect();
            let (mean_ms, std_ms) = sample_mean_std(&values);
            (
                layer,
                RuntimeStats {
                    mean_ms,
                    std_ms,
                    n_runs: values.len(),
                },
            )
        })
        .collect())
}

fn region_mean(samples: &[f64], start: usize, len: usize) -> Option<f64> {
    if len == 0 {
        return None;
    }
    let slice = &samples[start..start + len];
    Some(slice.iter().sum::<f64>() / len as f64)
}

/// Locate every scheduled burst in the trace.
///
/// The schedule is walked in order; each run advances a clock by
/// `gap_ms` of idle time and then `per_run_ms` of burst. The burst
/// window starts at the nearest sample to the clock position and spans
/// `ceil(per_run_ms / sample_period)` samples. When `gap_ms > 0`, each
/// window's mean power must exceed the mean over the idle region before
/// it, otherwise the trace and schedule are out of step.
pub fn segment_power_trace(
    trace: &PowerTrace,
    schedule: &[ScheduleEntry],
    gap_ms: f64,
) -> Result<Segmentation, ProfilingError> {
    if !(trace.sample_period_s > 0.0) {
        return Err(ProfilingError::NonPositiveSamplePeriod {
            value: trace.sample_period_s,
        });
    }
    let dt_ms = trace.sample_period_s * 1000.0;
    let mut windows = Vec::new();
    let mut gap_regions = Vec::new();
    let mut pos_ms = 0.0;
    let mut prev_end = 0usize;
    for entry in schedule {
        for run in 0..entry.n_runs {
            pos_ms += gap_ms;
            let start = float::round(pos_ms / dt_ms) as usize;
            // tiny epsilon keeps exact multiples of the period from being
            // pushed up a sample by representation error
            let len = float::ceil(entry.per_run_ms / dt_ms - 1e-9) as usize;
            let end = start + len;
            if end > trace.samples_w.len() {
                return Err(ProfilingError::TraceTooShort {
                    expected: end,
                    available: trace.samples_w.len(),
                });
            }
            if gap_ms > 0.0 && start > prev_end {
                let gap_len = start - prev_end;
                gap_regions.push((prev_end, gap_len));
                let gap_mean = region_mean(&trace.samples_w, prev_end, gap_len).unwrap();
                let window_mean = region_mean(&trace.samples_w, start, len).unwrap_or(gap_mean);
                if window_mean <= gap_mean {
                    return Err(ProfilingError::BurstNotFound {
                        layer: entry.layer.clone(),
                        run,
                        window_mean_w: window_mean,
                        gap_mean_w: gap_mean,
                    });
                }
            }
            windows.push(LayerWindow {
                layer: entry.layer.clone(),
                run,
                start,
                len,
            });
            prev_end = end;
            pos_ms += entry.per_run_ms;
        }
    }
    Ok(Segmentation {
        windows,
        gap_regions,
    })
}

/// Trapezoidal integral of one window, in millijoules.
fn window_energy_mj(trace: &PowerTrace, window: &LayerWindow) -> Result<f64, ProfilingError> {
    if window.len < 2 {
        return Err(ProfilingError::WindowTooNarrow {
            layer: window.layer.clone(),
            len: window.len,
        });
    }
    let samples = &trace.samples_w[window.start..window.start + window.len];
    let mut joules = 0.0;
    for i in 1..samples.len() {
        joules += (samples[i - 1] + samples[i]) * 0.5 * trace.sample_period_s;
    }
    Ok(joules * 1000.0)
}

/// Integrate one layer's windows into per-run energy statistics.
///
/// `baseline_w`, when given, is an idle power level whose contribution
/// over each window's duration is subtracted before averaging.
pub fn layer_energy(
    trace: &PowerTrace,
    windows: &[LayerWindow],
    baseline_w: Option<f64>,
) -> Result<EnergyStats, ProfilingError> {
    if windows.is_empty() {
        return Err(ProfilingError::EmptyWindowList);
    }
    let mut energies = Vec::with_capacity(windows.len());
    for window in windows {
        let mut mj = window_energy_mj(trace, window)?;
        if let Some(idle) = baseline_w {
            let span_s = (window.len - 1) as f64 * trace.sample_period_s;
            mj -= idle * span_s * 1000.0;
        }
        energies.push(mj);
    }
    let (mean_mj, std_mj) = sample_mean_std(&energies);
    Ok(EnergyStats {
        mean_mj,
        std_mj,
        n_windows: energies.len(),
    })
}

/// Mean idle power over a segmentation's gap regions, if any.
pub fn baseline_power_w(trace: &PowerTrace, segmentation: &Segmentation) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for &(start, len) in &segmentation.gap_regions {
        total += trace.samples_w[start..start + len].iter().sum::<f64>();
        count += len;
    }
    if count == 0 {
        None
    } else {
        Some(total / count as f64)
    }
}

/// Join runtime statistics with trace-derived energies into per-layer
/// profiles, ordered by layer name.
///
/// `subtract_baseline` replaces each window's integral with the part
/// above the trace's pooled idle level. Layers timed but absent from the
/// segmentation carry no energy figure.
pub fn assemble_profiles(
    runtimes: &BTreeMap<String, RuntimeStats>,
    energy_source: Option<(&PowerTrace, &Segmentation)>,
    subtract_baseline: bool,
) -> Result<Vec<LayerProfile>, ProfilingError> {
    let mut energies: BTreeMap<String, EnergyStats> = BTreeMap::new();
    if let Some((trace, segmentation)) = energy_source {
        let baseline = if subtract_baseline {
            baseline_power_w(trace, segmentation)
        } else {
            None
        };
        let mut grouped: BTreeMap<String, Vec<LayerWindow>> = BTreeMap::new();
        for window in &segmentation.windows {
            grouped
                .entry(window.layer.clone())
                .or_default()
                .push(window.clone());
        }
        for (layer, windows) in grouped {
            let stats = layer_energy(trace, &windows, baseline)?;
            energies.insert(layer, stats);
        }
    }
    Ok(runtimes
        .iter()
        .map(|(layer, runtime)| LayerProfile {
            layer: layer.clone(),
            runtime: *runtime,
            energy: energies.get(layer).copied(),
        })
        .collect())
}
