//! Per-layer-kind ridge regression from architectural predictors
//! (weights, operations, memory accesses) to measured runtime or energy,
//! plus the whole-network proportionality coefficient and the bundle
//! format that stores a fitted system model.
//!
//! Predictors are standardized column-wise (sample standard deviation)
//! before solving `(ZᵀZ + λI) w = Zᵀ(y − ȳ)`; the intercept is the target
//! mean and is never penalized. Characterization data routinely makes
//! predictors exactly collinear within a layer kind (for instance a
//! ReLU's memory traffic is always twice its operation count), so at
//! `λ = 0` the solver drops dependent columns instead of amplifying
//! noise: their coefficient is zero and the surviving columns carry the
//! fit. Predictions are unaffected because the dropped relation holds for
//! unseen layers of the same kind too.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::float;
use crate::metrics::ArchMetrics;
use crate::netdef::LayerKind;
use crate::profiling::LayerProfile;

/// Which measured quantity a model predicts.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Runtime,
    Energy,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::Runtime => "runtime",
            Target::Energy => "energy",
        }
    }

    /// Unit of the predicted value.
    pub fn unit(&self) -> &'static str {
        match self {
            Target::Runtime => "ms",
            Target::Energy => "mJ",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Training rows for one (layer kind, target) pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    pub rows: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
}

impl ObservationSet {
    pub fn push(&mut self, predictors: [f64; 3], target: f64) {
        self.rows.push(predictors);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A fitted linear model for one layer kind and target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub kind: LayerKind,
    pub target: Target,
    /// Coefficients in standardized predictor space.
    pub coef: [f64; 3],
    pub intercept: f64,
    /// Column means used for standardization.
    pub mean: [f64; 3],
    /// Column sample standard deviations; constant columns store 1.
    pub std: [f64; 3],
    pub lambda: f64,
}

impl RidgeModel {
    /// Predicted target value; may be negative for inputs far outside the
    /// training range.
    pub fn predict(&self, predictors: [f64; 3]) -> f64 {
        let mut value = self.intercept;
        for j in 0..3 {
            value += self.coef[j] * (predictors[j] - self.mean[j]) / self.std[j];
        }
        value
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    NoObservations,
    NegativeLambda { lambda: f64 },
    NonFiniteInput,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NoObservations => write!(f, "cannot fit a model without observations"),
            ModelError::NegativeLambda { lambda } => {
                write!(f, "ridge penalty must be non-negative, got {lambda}")
            }
            ModelError::NonFiniteInput => write!(f, "observations contain non-finite values"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Fit one ridge model. See the module notes for the standardization and
/// column-dropping rules.
pub fn fit_ridge(
    kind: LayerKind,
    target: Target,
    obs: &ObservationSet,
    lambda: f64,
) -> Result<RidgeModel, ModelError> {
    if obs.is_empty() {
        return Err(ModelError::NoObservations);
    }
    if !(lambda >= 0.0) {
        return Err(ModelError::NegativeLambda { lambda });
    }
    if obs
        .rows
        .iter()
        .flatten()
        .chain(obs.targets.iter())
        .any(|v| !v.is_finite())
    {
        return Err(ModelError::NonFiniteInput);
    }

    let n = obs.len();
    let nf = n as f64;

    let mut mean = [0.0f64; 3];
    for row in &obs.rows {
        for j in 0..3 {
            mean[j] += row[j];
        }
    }
    for m in &mut mean {
        *m /= nf;
    }

    let mut std = [1.0f64; 3];
    let mut active = [false; 3];
    if n >= 2 {
        for j in 0..3 {
            let ss: f64 = obs
                .rows
                .iter()
                .map(|row| (row[j] - mean[j]) * (row[j] - mean[j]))
                .sum();
            let s = float::sqrt(ss / (nf - 1.0));
            if s > 0.0 {
                std[j] = s;
                active[j] = true;
            }
        }
    }

    let y_mean = obs.targets.iter().sum::<f64>() / nf;
    let intercept = y_mean;

    // standardized active columns
    let cols: Vec<usize> = (0..3).filter(|&j| active[j]).collect();
    let p = cols.len();
    let mut coef = [0.0f64; 3];
    if p == 0 {
        return Ok(RidgeModel {
            kind,
            target,
            coef,
            intercept,
            mean,
            std,
            lambda,
        });
    }

    // A = ZᵀZ + λI, b = Zᵀ(y − ȳ)
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for (row, &y) in obs.rows.iter().zip(&obs.targets) {
        let mut z = [0.0f64; 3];
        for (idx, &j) in cols.iter().enumerate() {
            z[idx] = (row[j] - mean[j]) / std[j];
        }
        for i in 0..p {
            for k in i..p {
                a[i][k] += z[i] * z[k];
            }
            b[i] += z[i] * (y - y_mean);
        }
    }
    for i in 0..p {
        a[i][i] += lambda;
        for k in 0..i {
            a[i][k] = a[k][i];
        }
    }

    // Gaussian elimination on the symmetric system. A standardized
    // column's untouched diagonal is n−1, so a pivot collapsing to a tiny
    // fraction of that marks the column as dependent on earlier ones; it
    // is dropped (coefficient zero) rather than divided by.
    let tol = (nf - 1.0).max(1.0) * 1e-9;
    let mut dropped = [false; 3];
    for j in 0..p {
        if a[j][j].abs() <= tol {
            dropped[j] = true;
            continue;
        }
        for i in (j + 1)..p {
            let factor = a[i][j] / a[j][j];
            for k in j..p {
                a[i][k] -= factor * a[j][k];
            }
            b[i] -= factor * b[j];
        }
    }
    let mut w = [0.0f64; 3];
    for j in (0..p).rev() {
        if dropped[j] {
            continue;
        }
        let mut acc = b[j];
        for k in (j + 1)..p {
            acc -= a[j][k] * w[k];
        }
        w[j] = acc / a[j][j];
    }
    for (idx, &j) in cols.iter().enumerate() {
        coef[j] = w[idx];
    }

    Ok(RidgeModel {
        kind,
        target,
        coef,
        intercept,
        mean,
        std,
        lambda,
    })
}

/// Pearson correlation of two equal-length samples, or `None` when either
/// side has no variance or fewer than two points.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (float::sqrt(va) * float::sqrt(vb)))
}

/// Whole-network proportionality coefficient: the least-squares slope
/// through the origin from summed per-layer predictions to measured
/// network totals, `c = Σ mᵢsᵢ / Σ sᵢ²`.
pub fn fit_network_coefficient(measured: &[f64], summed: &[f64]) -> Option<f64> {
    if measured.len() != summed.len() || measured.is_empty() {
        return None;
    }
    let num: f64 = measured.iter().zip(summed).map(|(m, s)| m * s).sum();
    let den: f64 = summed.iter().map(|s| s * s).sum();
    if den <= 0.0 {
        return None;
    }
    Some(num / den)
}

/// Group metric/measurement pairs into per-kind training sets.
///
/// Rows join on layer name. Returns the observation sets and a list of
/// human-readable warnings for rows that could not be used (a metrics row
/// with no measurement, a measurement with no metrics row, or a profile
/// lacking energy when energy is the target).
pub fn collect_observations(
    metrics: &[ArchMetrics],
    profiles: &[LayerProfile],
    target: Target,
) -> (BTreeMap<LayerKind, ObservationSet>, Vec<String>) {
    let mut by_name: BTreeMap<&str, &LayerProfile> = BTreeMap::new();
    for profile in profiles {
        by_name.insert(profile.layer.as_str(), profile);
    }
    let mut sets: BTreeMap<LayerKind, ObservationSet> = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut used = alloc::collections::BTreeSet::new();
    for row in metrics {
        let Some(profile) = by_name.get(row.layer_name.as_str()) else {
            warnings.push(alloc::format!(
                "layer {} has metrics but no measurement; skipped",
                row.layer_name
            ));
            continue;
        };
        used.insert(row.layer_name.as_str());
        let value = match target {
            Target::Runtime => Some(profile.runtime.mean_ms),
            Target::Energy => profile.energy.map(|e| e.mean_mj),
        };
        let Some(value) = value else {
            warnings.push(alloc::format!(
                "layer {} has no energy measurement; skipped",
                row.layer_name
            ));
            continue;
        };
        sets.entry(row.kind).or_default().push(row.predictors(), value);
    }
    for profile in profiles {
        if !used.contains(profile.layer.as_str()) {
            warnings.push(alloc::format!(
                "measurement for unknown layer {}; skipped",
                profile.layer
            ));
        }
    }
    (sets, warnings)
}

/// Options the models were fitted under; predictions must recompute
/// metrics the same way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub im2col: bool,
    pub count_bias_ops: bool,
    pub subtract_baseline: bool,
    /// Names of the networks the training measurements came from.
    pub suite: Vec<String>,
}

/// A complete fitted system model: per-(kind, target) layer models plus
/// the network-total coefficients for each target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub system_id: String,
    pub provenance: Provenance,
    pub models: Vec<RidgeModel>,
    pub c_runtime: f64,
    pub c_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleParseError {
    pub message: String,
}

impl fmt::Display for BundleParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model bundle: {}", self.message)
    }
}

impl core::error::Error for BundleParseError {}

impl ModelBundle {
    /// Keep the model list in (kind, target) order so serialization is
    /// reproducible.
    pub fn normalize(&mut self) {
        self.models.sort_by_key(|m| (m.kind, m.target));
    }

    pub fn model_for(&self, kind: LayerKind, target: Target) -> Option<&RidgeModel> {
        self.models
            .iter()
            .find(|m| m.kind == kind && m.target == target)
    }

    pub fn network_coefficient(&self, target: Target) -> f64 {
        match target {
            Target::Runtime => self.c_runtime,
            Target::Energy => self.c_energy,
        }
    }

    pub fn to_json(&self) -> String {
        let mut sorted = self.clone();
        sorted.normalize();
        let mut text = serde_json::to_string_pretty(&sorted)
            .expect("bundle serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, BundleParseError> {
        serde_json::from_str(text).map_err(|e| BundleParseError {
            message: alloc::format!("{e}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn obs(rows: &[([f64; 3], f64)]) -> ObservationSet {
        let mut set = ObservationSet::default();
        for (row, y) in rows {
            set.push(*row, *y);
        }
        set
    }

    #[test]
    fn single_predictor_ridge_matches_hand_computation() {
        // y = 2x with x = 1,2,3 padded by constant columns; standardized
        // x is (-1, 0, 1), so ZᵀZ = 2, Zᵀy_c = 4 and w = 4/(2+λ)
        let set = obs(&[
            ([1.0, 7.0, 7.0], 2.0),
            ([2.0, 7.0, 7.0], 4.0),
            ([3.0, 7.0, 7.0], 6.0),
        ]);
        let model = fit_ridge(LayerKind::Relu, Target::Runtime, &set, 1.0).unwrap();
        assert!((model.coef[0] - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(model.coef[1], 0.0);
        assert_eq!(model.coef[2], 0.0);
        assert_relative_eq!(model.intercept, 4.0);
        assert_eq!(model.std[1], 1.0);

        let unpenalized = fit_ridge(LayerKind::Relu, Target::Runtime, &set, 0.0).unwrap();
        assert!((unpenalized.coef[0] - 2.0).abs() < 1e-12);
        assert_relative_eq!(unpenalized.predict([4.0, 7.0, 7.0]), 8.0);
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    /// Solve the 4x4 normal equations of unstandardized least squares
    /// with an intercept column.
    fn ols_oracle(rows: &[[f64; 3]], y: &[f64]) -> [f64; 4] {
        let mut xtx = [[0.0f64; 4]; 4];
        let mut xty = [0.0f64; 4];
        for (row, &target) in rows.iter().zip(y) {
            let ext = [1.0, row[0], row[1], row[2]];
            for i in 0..4 {
                for j in 0..4 {
                    xtx[i][j] += ext[i] * ext[j];
                }
                xty[i] += ext[i] * target;
            }
        }
        // plain Gauss-Jordan with partial pivoting
        let mut aug = [[0.0f64; 5]; 4];
        for i in 0..4 {
            aug[i][..4].copy_from_slice(&xtx[i]);
            aug[i][4] = xty[i];
        }
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            let pv = aug[col][col];
            for k in col..5 {
                aug[col][k] /= pv;
            }
            for r in 0..4 {
                if r != col {
                    let factor = aug[r][col];
                    for k in col..5 {
                        aug[r][k] -= factor * aug[col][k];
                    }
                }
            }
        }
        [aug[0][4], aug[1][4], aug[2][4], aug[3][4]]
    }

    #[test]
    fn unpenalized_fits_match_normal_equations_on_random_instances() {
        let mut rng = Lcg(0x5eed);
        for _ in 0..100 {
            let n = 5 + (rng.next() * 25.0) as usize;
            let mut rows = Vec::new();
            let mut y = Vec::new();
            let truth = [
                rng.next() * 4.0 - 2.0,
                rng.next() * 4.0 - 2.0,
                rng.next() * 4.0 - 2.0,
            ];
            let bias = rng.next() * 10.0;
            for _ in 0..n {
                let row = [
                    rng.next() * 100.0,
                    rng.next() * 50.0 + 10.0,
                    rng.next() * 1000.0,
                ];
                let noise = rng.next() * 0.1;
                y.push(
                    bias + truth[0] * row[0] + truth[1] * row[1] + truth[2] * row[2] + noise,
                );
                rows.push(row);
            }
            let set = obs(&rows.iter().copied().zip(y.iter().copied()).collect::<Vec<_>>());
            let model = fit_ridge(LayerKind::Conv, Target::Runtime, &set, 0.0).unwrap();
            let beta = ols_oracle(&rows, &y);
            for (row, &target) in rows.iter().zip(&y) {
                let oracle = beta[0] + beta[1] * row[0] + beta[2] * row[1] + beta[3] * row[2];
                let scale = target.abs().max(1.0);
                assert!(
                    (model.predict(*row) - oracle).abs() <= 1e-9 * scale,
                    "prediction {} vs oracle {}",
                    model.predict(*row),
                    oracle
                );
            }
        }
    }

    #[test]
    fn coefficient_norm_shrinks_as_the_penalty_grows() {
        let mut rng = Lcg(42);
        for _ in 0..20 {
            let mut set = ObservationSet::default();
            for _ in 0..30 {
                let row = [rng.next() * 10.0, rng.next() * 10.0, rng.next() * 10.0];
                set.push(row, row[0] * 3.0 - row[1] + row[2] * 0.5 + rng.next());
            }
            let mut previous = f64::INFINITY;
            for lambda in [0.0, 1.0, 10.0, 1000.0] {
                let model = fit_ridge(LayerKind::Fc, Target::Energy, &set, lambda).unwrap();
                let norm: f64 = model.coef.iter().map(|c| c * c).sum();
                assert!(
                    norm <= previous + 1e-12,
                    "norm {norm} grew at lambda {lambda}"
                );
                previous = norm;
            }
        }
    }

    #[test]
    fn constant_columns_are_ignored() {
        let set = obs(&[
            ([5.0, 1.0, 0.0], 3.0),
            ([5.0, 2.0, 0.0], 5.0),
            ([5.0, 3.0, 0.0], 7.0),
        ]);
        let model = fit_ridge(LayerKind::Pool, Target::Runtime, &set, 0.0).unwrap();
        assert_eq!(model.coef[0], 0.0);
        assert_eq!(model.coef[2], 0.0);
        assert_relative_eq!(model.predict([5.0, 4.0, 0.0]), 9.0);
        // constant columns do not disturb prediction even if the query
        // disagrees with the training constant
        assert_relative_eq!(model.predict([9.0, 4.0, 1.0]), 9.0);
    }

    #[test]
    fn exactly_collinear_columns_are_dropped_not_amplified() {
        // memory traffic fixed at twice the op count, as for relu layers
        let mut set = ObservationSet::default();
        for i in 1..=6 {
            let ops = (i * 1000) as f64;
            set.push([0.0, ops, 2.0 * ops], 0.5 + ops * 1e-3);
        }
        let model = fit_ridge(LayerKind::Relu, Target::Runtime, &set, 0.0).unwrap();
        assert_eq!(model.coef[2], 0.0, "dependent column kept: {:?}", model.coef);
        assert!(model.coef[1] != 0.0);
        // prediction on an unseen layer obeying the same relation is exact
        let ops = 4321.0;
        assert_relative_eq!(
            model.predict([0.0, ops, 2.0 * ops]),
            0.5 + ops * 1e-3,
            max_relative = 1e-9
        );
    }

    #[test]
    fn predictions_are_invariant_to_column_scaling() {
        let mut rng = Lcg(7);
        let mut small = ObservationSet::default();
        let mut large = ObservationSet::default();
        let mut queries = Vec::new();
        for _ in 0..25 {
            let row = [rng.next() * 5.0, rng.next() * 5.0, rng.next() * 5.0];
            let y = 1.0 + row[0] * 2.0 + row[1] - row[2] * 0.3 + rng.next() * 0.01;
            small.push(row, y);
            large.push([row[0] * 1000.0, row[1], row[2]], y);
            queries.push(row);
        }
        let ms = fit_ridge(LayerKind::Conv, Target::Runtime, &small, 1.0).unwrap();
        let ml = fit_ridge(LayerKind::Conv, Target::Runtime, &large, 1.0).unwrap();
        for q in queries {
            assert_relative_eq!(
                ms.predict(q),
                ml.predict([q[0] * 1000.0, q[1], q[2]]),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn degenerate_fits_error_or_fall_back_to_the_mean() {
        assert_eq!(
            fit_ridge(LayerKind::Conv, Target::Runtime, &ObservationSet::default(), 0.0),
            Err(ModelError::NoObservations)
        );
        let set = obs(&[([1.0, 2.0, 3.0], 5.0)]);
        assert!(matches!(
            fit_ridge(LayerKind::Conv, Target::Runtime, &set, -1.0),
            Err(ModelError::NegativeLambda { .. })
        ));
        // a single row has no variance anywhere: the model is the mean
        let model = fit_ridge(LayerKind::Conv, Target::Runtime, &set, 0.0).unwrap();
        assert_eq!(model.coef, [0.0; 3]);
        assert_relative_eq!(model.predict([9.0, 9.0, 9.0]), 5.0);

        let bad = obs(&[([f64::NAN, 0.0, 0.0], 1.0)]);
        assert_eq!(
            fit_ridge(LayerKind::Conv, Target::Runtime, &bad, 0.0),
            Err(ModelError::NonFiniteInput)
        );
    }

    #[test]
    fn pearson_matches_hand_computed_examples() {
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0]).unwrap();
        assert!((r - 0.866025403784).abs() < 1e-9);
        let perfect = pearson(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]).unwrap();
        assert_relative_eq!(perfect, 1.0, max_relative = 1e-12);
        let inverse = pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap();
        assert_relative_eq!(inverse, -1.0, max_relative = 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), None);
        assert_eq!(pearson(&[1.0], &[2.0]), None);
        assert_eq!(pearson(&[1.0, 2.0], &[2.0]), None);
    }

    #[test]
    fn network_coefficient_is_the_through_origin_slope() {
        assert_relative_eq!(
            fit_network_coefficient(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(),
            2.0
        );
        assert_relative_eq!(
            fit_network_coefficient(&[3.0, 5.0], &[1.0, 2.0]).unwrap(),
            2.6
        );
        assert_eq!(fit_network_coefficient(&[1.0], &[0.0]), None);
        assert_eq!(fit_network_coefficient(&[], &[]), None);
        assert_eq!(fit_network_coefficient(&[1.0, 2.0], &[1.0]), None);
    }

    #[test]
    fn observation_collection_joins_by_name_and_warns_on_gaps() {
        use crate::metrics::{network_metrics, MetricsOptions};
        use crate::netdef::{infer_shapes, parse_network};
        use crate::profiling::{EnergyStats, RuntimeStats};

        let net = parse_network(
            r#"{
                "name": "tiny",
                "input": {"h": 4, "w": 4, "c": 2},
                "layers": [
                    {"name": "r1", "kind": "relu", "inputs": ["input"]},
                    {"name": "r2", "kind": "relu", "inputs": ["r1"]},
                    {"name": "sm", "kind": "softmax", "inputs": ["r2"]}
                ]
            }"#,
        )
        .unwrap();
        let shaped = infer_shapes(&net).unwrap();
        let metrics = network_metrics(&shaped, MetricsOptions::default()).unwrap();
        let profile = |layer: &str, ms: f64, mj: Option<f64>| LayerProfile {
            layer: layer.into(),
            runtime: RuntimeStats {
                mean_ms: ms,
                std_ms: 0.0,
                n_runs: 1,
            },
            energy: mj.map(|mean_mj| EnergyStats {
                mean_mj,
                std_mj: 0.0,
                n_windows: 1,
            }),
        };
        let profiles = [
            profile("r1", 1.0, Some(2.0)),
            profile("r2", 1.5, None),
            profile("ghost", 9.0, None),
        ];

        let (sets, warnings) = collect_observations(&metrics, &profiles, Target::Runtime);
        assert_eq!(sets[&LayerKind::Relu].len(), 2);
        assert!(!sets.contains_key(&LayerKind::Softmax));
        // sm missing measurement + ghost missing metrics
        assert_eq!(warnings.len(), 2);

        let (energy_sets, energy_warnings) =
            collect_observations(&metrics, &profiles, Target::Energy);
        assert_eq!(energy_sets[&LayerKind::Relu].len(), 1);
        assert_eq!(energy_warnings.len(), 3);
    }

    #[test]
    fn bundles_round_trip_through_json_byte_for_byte() {
        let mut bundle = ModelBundle {
            system_id: "test-device".into(),
            provenance: Provenance {
                im2col: false,
                count_bias_ops: true,
                subtract_baseline: false,
                suite: alloc::vec!["previousnet01_56x56x32".into()],
            },
            models: alloc::vec![
                fit_ridge(
                    LayerKind::Relu,
                    Target::Energy,
                    &obs(&[([0.0, 1.0, 2.0], 1.0), ([0.0, 2.0, 4.0], 2.0)]),
                    0.0,
                )
                .unwrap(),
                fit_ridge(
                    LayerKind::Conv,
                    Target::Runtime,
                    &obs(&[([1.0, 1.0, 2.0], 1.0), ([2.0, 2.0, 4.0], 2.0)]),
                    1.0,
                )
                .unwrap(),
            ],
            c_runtime: 1.05,
            c_energy: 0.97,
        };
        bundle.normalize();
        assert_eq!(bundle.models[0].kind, LayerKind::Conv);
        let text = bundle.to_json();
        let parsed = ModelBundle::from_json(&text).unwrap();
        assert_eq!(parsed, bundle);
        assert_eq!(parsed.to_json(), text);
        assert!(text.contains("\"kind\": \"conv\""));
        assert!(text.contains("\"target\": \"energy\""));
        assert!(parsed.model_for(LayerKind::Relu, Target::Energy).is_some());
        assert!(parsed.model_for(LayerKind::Pool, Target::Runtime).is_none());

        assert!(ModelBundle::from_json("{").is_err());
    }
}
