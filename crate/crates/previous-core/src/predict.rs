//! Applying a fitted model bundle to a network: per-layer predictions,
//! network totals, rankings and error tables.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::metrics::{network_metrics, MetricsError, MetricsOptions};
use crate::model::{ModelBundle, Target};
use crate::netdef::{LayerKind, ShapedNetwork};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPrediction {
    pub layer: String,
    pub kind: LayerKind,
    pub predicted: f64,
    /// Raw model output fell below zero and was clamped.
    pub clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub measured: Option<f64>,
}

/// Per-layer predictions for one network and target, with the summed and
/// coefficient-scaled totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub network: String,
    pub target: Target,
    pub layers: Vec<LayerPrediction>,
    /// Plain sum of per-layer predictions.
    pub sum_layers: f64,
    /// Network coefficient applied to the sum.
    pub coefficient: f64,
    pub network_total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PredictError {
    /// The bundle has no model for a layer kind present in the network.
    MissingModel { kind: LayerKind, target: Target },
    Metrics(MetricsError),
}

impl fmt::Display for PredictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictError::MissingModel { kind, target } => write!(
                f,
                "bundle has no {target} model for {} layers",
                kind.as_str()
            ),
            PredictError::Metrics(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PredictError {}

impl From<MetricsError> for PredictError {
    fn from(e: MetricsError) -> Self {
        PredictError::Metrics(e)
    }
}

/// Metrics options a bundle's models were fitted under; predictions must
/// recompute predictors the same way.
pub fn bundle_metrics_options(bundle: &ModelBundle) -> MetricsOptions {
    MetricsOptions {
        im2col: bundle.provenance.im2col,
        count_bias_ops: bundle.provenance.count_bias_ops,
    }
}

/// Predict every layer of `shaped` with the bundle's models, recomputing
/// metrics under the options the bundle was fitted with. Negative raw
/// predictions are clamped to zero and flagged.
pub fn predict_per_layer(
    shaped: &ShapedNetwork,
    bundle: &ModelBundle,
    target: Target,
) -> Result<PredictionReport, PredictError> {
    let rows = network_metrics(shaped, bundle_metrics_options(bundle))?;
    predict_rows(&shaped.net.name, &rows, bundle, target)
}

/// Predict from already-computed metrics rows. The rows must have been
/// computed under [`bundle_metrics_options`].
pub fn predict_rows(
    network: &str,
    rows: &[crate::metrics::ArchMetrics],
    bundle: &ModelBundle,
    target: Target,
) -> Result<PredictionReport, PredictError> {
    let mut layers = Vec::with_capacity(rows.len());
    let mut sum_layers = 0.0;
    for row in rows {
        let model = bundle
            .model_for(row.kind, target)
            .ok_or(PredictError::MissingModel {
                kind: row.kind,
                target,
            })?;
        let raw = model.predict(row.predictors());
        let clamped = raw < 0.0;
        let predicted = if clamped { 0.0 } else { raw };
        sum_layers += predicted;
        layers.push(LayerPrediction {
            layer: row.layer_name.clone(),
            kind: row.kind,
            predicted,
            clamped,
            measured: None,
        });
    }
    let coefficient = bundle.network_coefficient(target);
    Ok(PredictionReport {
        network: network.into(),
        target,
        layers,
        sum_layers,
        coefficient,
        network_total: coefficient * sum_layers,
    })
}

impl PredictionReport {
    /// Copy measured values onto matching layers (by name).
    pub fn attach_measurements(&mut self, measured: &BTreeMap<String, f64>) {
        for layer in &mut self.layers {
            if let Some(value) = measured.get(&layer.layer) {
                layer.measured = Some(*value);
            }
        }
    }

    /// Layer indices from the largest predicted cost down; equal costs
    /// keep network order.
    pub fn hot_ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.layers.len()).collect();
        order.sort_by(|&a, &b| {
            self.layers[b]
                .predicted
                .total_cmp(&self.layers[a].predicted)
                .then(a.cmp(&b))
        });
        order
    }

    /// Mean absolute percentage error over layers carrying a measurement.
    pub fn layer_mape(&self) -> Option<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for layer in &self.layers {
            if let Some(err) = layer
                .measured
                .and_then(|m| error_pct(layer.predicted, m))
            {
                total += err.abs();
                count += 1;
            }
        }
        if count == 0 {
            None
        } else {
            Some(total / count as f64)
        }
    }
}

/// Signed percentage error of `predicted` against `measured`; `None` when
/// the measured value is zero.
pub fn error_pct(predicted: f64, measured: f64) -> Option<f64> {
    if measured == 0.0 {
        None
    } else {
        Some((predicted - measured) / measured * 100.0)
    }
}

/// One line of a measured-versus-predicted network comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalsRow {
    pub network: String,
    pub measured: f64,
    pub predicted: f64,
    pub error_pct: f64,
}

/// Network-level comparison table with its average absolute error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalsTable {
    pub rows: Vec<TotalsRow>,
    pub average_abs_error_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TableError {
    ZeroMeasurement { network: String },
    Empty,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::ZeroMeasurement { network } => {
                write!(f, "network {network} has a zero measured total")
            }
            TableError::Empty => write!(f, "no rows to tabulate"),
        }
    }
}

impl core::error::Error for TableError {}

/// Build the comparison table for `(network, measured, predicted)` rows,
/// preserving their order.
pub fn totals_error_table(rows: &[(String, f64, f64)]) -> Result<TotalsTable, TableError> {
    if rows.is_empty() {
        return Err(TableError::Empty);
    }
    let mut out = Vec::with_capacity(rows.len());
    let mut abs_total = 0.0;
    for (network, measured, predicted) in rows {
        let err = error_pct(*predicted, *measured).ok_or_else(|| TableError::ZeroMeasurement {
            network: network.clone(),
        })?;
        abs_total += err.abs();
        out.push(TotalsRow {
            network: network.clone(),
            measured: *measured,
            predicted: *predicted,
            error_pct: err,
        });
    }
    Ok(TotalsTable {
        average_abs_error_pct: abs_total / out.len() as f64,
        rows: out,
    })
}
