//! Architectural metrics per layer: number of learnt weights, number of
//! arithmetic operations (MACs for conv/FC, elementary ops elsewhere) and
//! number of memory accesses (inputs read + weights read + outputs
//! written). These three numbers are the predictors every cost model in
//! this crate is fitted on.
//!
//! All counting is exact `u64` arithmetic; anything that would overflow
//! is reported rather than wrapped.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::netdef::{LayerKind, LayerParams, LayerSpec, PoolWindow, ShapedNetwork, TensorShape};

/// Counting options.
///
/// * `im2col` — count convolution input reads as the unrolled
///   (im2col) matrix instead of the raw tensor: each of the `H_out·W_out`
///   output positions re-reads its whole `k_h·k_w·C_in/groups` receptive
///   field, per group.
/// * `count_bias_ops` — include the one extra MAC per output element that
///   a bias term costs (conv, FC and scale). Bias *weights* always count
///   toward `n_weights`; this flag only affects operation counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricsOptions {
    pub im2col: bool,
    pub count_bias_ops: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            im2col: false,
            count_bias_ops: true,
        }
    }
}

/// The metrics of one layer, together with its identity and output shape
/// (the extra columns every metrics table carries).
#[derive(Clone, Debug, PartialEq)]
pub struct ArchMetrics {
    pub layer_name: String,
    pub kind: LayerKind,
    pub out_shape: TensorShape,
    pub n_weights: u64,
    pub ops: u64,
    pub mem_ops: u64,
}

impl ArchMetrics {
    /// Predictor vector in the fixed column order used by the models.
    pub fn predictors(&self) -> [f64; 3] {
        [self.n_weights as f64, self.ops as f64, self.mem_ops as f64]
    }
}

/// Column names matching [`ArchMetrics::predictors`].
pub const PREDICTOR_NAMES: [&str; 3] = ["n_weights", "ops", "mem_ops"];

#[derive(Clone, Debug, PartialEq)]
pub enum MetricsError {
    /// A count exceeded u64.
    Overflow { layer: String },
    /// Input shape list inconsistent with the layer kind (the network was
    /// not validated).
    BadArity { layer: String },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Overflow { layer } => {
                write!(f, "layer '{layer}': metric exceeds the u64 budget")
            }
            MetricsError::BadArity { layer } => {
                write!(f, "layer '{layer}': input arity does not match its kind")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

fn product(layer: &str, factors: &[u64]) -> Result<u64, MetricsError> {
    let mut acc: u64 = 1;
    for &f in factors {
        acc = acc.checked_mul(f).ok_or(MetricsError::Overflow {
            layer: layer.to_string(),
        })?;
    }
    Ok(acc)
}

fn sum(layer: &str, terms: &[u64]) -> Result<u64, MetricsError> {
    let mut acc: u64 = 0;
    for &t in terms {
        acc = acc.checked_add(t).ok_or(MetricsError::Overflow {
            layer: layer.to_string(),
        })?;
    }
    Ok(acc)
}

fn elements(layer: &str, shape: TensorShape) -> Result<u64, MetricsError> {
    shape.elements().ok_or(MetricsError::Overflow {
        layer: layer.to_string(),
    })
}

fn single_input(layer: &LayerSpec, in_shapes: &[TensorShape]) -> Result<TensorShape, MetricsError> {
    if in_shapes.len() != 1 {
        return Err(MetricsError::BadArity {
            layer: layer.name.clone(),
        });
    }
    Ok(in_shapes[0])
}

/// Number of learnt parameters of a layer.
///
/// * conv: `k_h·k_w·(C_in/groups)·N`, plus `N` biases
/// * fc: `N_in·N_out`, plus `N_out` biases (`N_in` = flattened input)
/// * batchnorm: `2·C_in` (mean and variance per channel)
/// * scale: `C_in` factors, plus `C_in` biases
/// * everything else: 0
pub fn layer_weights(layer: &LayerSpec, in_shapes: &[TensorShape]) -> Result<u64, MetricsError> {
    let name = layer.name.as_str();
    match &layer.params {
        LayerParams::Conv {
            kernel_h,
            kernel_w,
            num_kernels,
            groups,
            has_bias,
            ..
        } => {
            let input = single_input(layer, in_shapes)?;
            let per_kernel = product(name, &[*kernel_h, *kernel_w, input.c / groups])?;
            let mut w = product(name, &[per_kernel, *num_kernels])?;
            if *has_bias {
                w = sum(name, &[w, *num_kernels])?;
            }
            Ok(w)
        }
        LayerParams::Fc {
            out_features,
            has_bias,
        } => {
            let input = single_input(layer, in_shapes)?;
            let n_in = elements(name, input)?;
            let mut w = product(name, &[n_in, *out_features])?;
            if *has_bias {
                w = sum(name, &[w, *out_features])?;
            }
            Ok(w)
        }
        LayerParams::BatchNorm => {
            let input = single_input(layer, in_shapes)?;
            product(name, &[2, input.c])
        }
        LayerParams::Scale { has_bias } => {
            let input = single_input(layer, in_shapes)?;
            if *has_bias {
                product(name, &[2, input.c])
            } else {
                Ok(input.c)
            }
        }
        LayerParams::Pool { .. }
        | LayerParams::Relu
        | LayerParams::Concat
        | LayerParams::Eltwise { .. }
        | LayerParams::Softmax => Ok(0),
    }
}

/// Number of arithmetic operations of one forward pass.
///
/// MAC-counting convention: one multiply-accumulate is one operation.
///
/// * conv: `k_h·k_w·(C_in/groups)·H_out·W_out·N` MACs, plus
///   `H_out·W_out·N` bias MACs when biased
/// * fc: `N_in·N_out` MACs plus `N_out` bias MACs
/// * pool: one op per window element: `k_h·k_w·H_out·W_out·C_out`
///   (`H_in·W_in·C_in` for global pools)
/// * relu: `n(I)` comparisons
/// * batchnorm: `2·n(I)` (subtract mean, divide by deviation)
/// * scale: `n(I)` multiplies plus `n(I)` bias adds when biased
/// * eltwise: `(inputs − 1)·n(O)`
/// * concat: 0 (pure data movement)
/// * softmax: `3·n(I)` (exponential, reduction, normalization passes)
pub fn layer_ops(
    layer: &LayerSpec,
    in_shapes: &[TensorShape],
    out_shape: TensorShape,
    opts: MetricsOptions,
) -> Result<u64, MetricsError> {
    let name = layer.name.as_str();
    match &layer.params {
        LayerParams::Conv {
            kernel_h,
            kernel_w,
            num_kernels,
            groups,
            has_bias,
            ..
        } => {
            let input = single_input(layer, in_shapes)?;
            let per_out = product(name, &[*kernel_h, *kernel_w, input.c / groups])?;
            let outputs = product(name, &[out_shape.h, out_shape.w, *num_kernels])?;
            let mut ops = product(name, &[per_out, outputs])?;
            if *has_bias && opts.count_bias_ops {
                ops = sum(name, &[ops, outputs])?;
            }
            Ok(ops)
        }
        LayerParams::Fc {
            out_features,
            has_bias,
        } => {
            let input = single_input(layer, in_shapes)?;
            let n_in = elements(name, input)?;
            let mut ops = product(name, &[n_in, *out_features])?;
            if *has_bias && opts.count_bias_ops {
                ops = sum(name, &[ops, *out_features])?;
            }
            Ok(ops)
        }
        LayerParams::Pool { window, .. } => {
            let input = single_input(layer, in_shapes)?;
            match window {
                PoolWindow::Global => elements(name, input),
                PoolWindow::Window {
                    kernel_h, kernel_w, ..
                } => {
                    let outputs = elements(name, out_shape)?;
                    product(name, &[*kernel_h, *kernel_w, outputs])
                }
            }
        }
        LayerParams::Relu => elements(name, single_input(layer, in_shapes)?),
        LayerParams::BatchNorm => {
            let n = elements(name, single_input(layer, in_shapes)?)?;
            product(name, &[2, n])
        }
        LayerParams::Scale { has_bias } => {
            let n = elements(name, single_input(layer, in_shapes)?)?;
            if *has_bias && opts.count_bias_ops {
                product(name, &[2, n])
            } else {
                Ok(n)
            }
        }
        LayerParams::Eltwise { .. } => {
            if in_shapes.len() < 2 {
                return Err(MetricsError::BadArity {
                    layer: layer.name.clone(),
                });
            }
            let n_out = elements(name, out_shape)?;
            product(name, &[(in_shapes.len() - 1) as u64, n_out])
        }
        LayerParams::Concat => Ok(0),
        LayerParams::Softmax => {
            let n = elements(name, single_input(layer, in_shapes)?)?;
            product(name, &[3, n])
        }
    }
}

/// Number of memory accesses: every input element read, every weight
/// read, every output element written:
///
/// `mem_ops = Σ n(I_i) + n(W) + n(O)`
///
/// With `opts.im2col`, a convolution's input term is replaced by the
/// unrolled input matrix `(k_h·k_w·C_in/groups)·(H_out·W_out)·groups`,
/// reflecting frameworks that materialize the im2col buffer.
pub fn layer_mem_ops(
    layer: &LayerSpec,
    in_shapes: &[TensorShape],
    out_shape: TensorShape,
    n_weights: u64,
    opts: MetricsOptions,
) -> Result<u64, MetricsError> {
    let name = layer.name.as_str();
    let input_reads = match &layer.params {
        LayerParams::Conv {
            kernel_h,
            kernel_w,
            groups,
            ..
        } if opts.im2col => {
            let input = single_input(layer, in_shapes)?;
            let per_group = product(name, &[*kernel_h, *kernel_w, input.c / groups])?;
            let positions = product(name, &[out_shape.h, out_shape.w])?;
            product(name, &[per_group, positions, *groups])?
        }
        _ => {
            let mut total = 0u64;
            for shape in in_shapes {
                total = sum(name, &[total, elements(name, *shape)?])?;
            }
            total
        }
    };
    let output_writes = elements(name, out_shape)?;
    sum(name, &[input_reads, n_weights, output_writes])
}

/// Compute the full metrics table of a shaped network, one row per layer
/// in evaluation (declaration) order.
pub fn network_metrics(
    shaped: &ShapedNetwork,
    opts: MetricsOptions,
) -> Result<Vec<ArchMetrics>, MetricsError> {
    let mut rows = Vec::with_capacity(shaped.net.layers.len());
    for layer in &shaped.net.layers {
        let shapes = shaped
            .layer_shapes(&layer.name)
            .ok_or(MetricsError::BadArity {
                layer: layer.name.clone(),
            })?;
        let n_weights = layer_weights(layer, &shapes.inputs)?;
        let ops = layer_ops(layer, &shapes.inputs, shapes.output, opts)?;
        let mem_ops = layer_mem_ops(layer, &shapes.inputs, shapes.output, n_weights, opts)?;
        rows.push(ArchMetrics {
            layer_name: layer.name.clone(),
            kind: layer.kind(),
            out_shape: shapes.output,
            n_weights,
            ops,
            mem_ops,
        });
    }
    Ok(rows)
}

/// Network-level totals across a metrics table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricsTotals {
    pub n_weights: u64,
    pub ops: u64,
    pub mem_ops: u64,
}

pub fn metrics_totals(rows: &[ArchMetrics]) -> Result<MetricsTotals, MetricsError> {
    let mut t = MetricsTotals {
        n_weights: 0,
        ops: 0,
        mem_ops: 0,
    };
    for row in rows {
        t.n_weights = sum("total", &[t.n_weights, row.n_weights])?;
        t.ops = sum("total", &[t.ops, row.ops])?;
        t.mem_ops = sum("total", &[t.mem_ops, row.mem_ops])?;
    }
    Ok(t)
}
