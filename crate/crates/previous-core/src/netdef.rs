//! Network definitions: layer descriptions, the canonical JSON document
//! codec, structural validation, shape inference and topological order.
//!
//! A network is a DAG of layers over `h × w × c` tensors. Layers refer to
//! their producers by name; the reserved name [`INPUT_NAME`] refers to the
//! network input pseudo-layer, whose shape is [`NetworkDef::input_shape`].
//! References must point at earlier-declared layers, so declaration order
//! is always a valid evaluation order for a well-formed network.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use serde::{Deserialize, Serialize};

/// Name of the input pseudo-layer. Layers may reference it but may not
/// claim it as their own name.
pub const INPUT_NAME: &str = "input";

/// Shape of one activation tensor. All dimensions are at least 1;
/// fully-connected vectors use `1 × 1 × c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorShape {
    pub h: u64,
    pub w: u64,
    pub c: u64,
}

impl TensorShape {
    pub fn new(h: u64, w: u64, c: u64) -> Self {
        Self { h, w, c }
    }

    /// Element count `h·w·c`, or `None` on u64 overflow.
    pub fn elements(&self) -> Option<u64> {
        self.h.checked_mul(self.w)?.checked_mul(self.c)
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

/// The nine supported layer kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
    Pool,
    Relu,
    BatchNorm,
    Scale,
    Concat,
    Eltwise,
    Softmax,
}

impl LayerKind {
    pub const ALL: [LayerKind; 9] = [
        LayerKind::Conv,
        LayerKind::Fc,
        LayerKind::Pool,
        LayerKind::Relu,
        LayerKind::BatchNorm,
        LayerKind::Scale,
        LayerKind::Concat,
        LayerKind::Eltwise,
        LayerKind::Softmax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
            LayerKind::Pool => "pool",
            LayerKind::Relu => "relu",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::Scale => "scale",
            LayerKind::Concat => "concat",
            LayerKind::Eltwise => "eltwise",
            LayerKind::Softmax => "softmax",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<LayerKind> {
        LayerKind::ALL.iter().copied().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolFn {
    Max,
    Avg,
}

impl PoolFn {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoolFn::Max => "max",
            PoolFn::Avg => "avg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EltwiseFn {
    Sum,
    Prod,
    Max,
}

impl EltwiseFn {
    pub fn as_str(&self) -> &'static str {
        match self {
            EltwiseFn::Sum => "sum",
            EltwiseFn::Prod => "prod",
            EltwiseFn::Max => "max",
        }
    }
}

/// Spatial window of a pooling layer. Global pools reduce the whole
/// feature map to `1 × 1` and carry no window fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolWindow {
    Global,
    Window {
        kernel_h: u64,
        kernel_w: u64,
        stride: u64,
        pad: u64,
    },
}

/// Kind-specific layer parameters. Invalid cross-kind field combinations
/// are unrepresentable by construction; numeric positivity is enforced by
/// [`validate`] (and by the document parser).
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    Conv {
        kernel_h: u64,
        kernel_w: u64,
        stride: u64,
        pad: u64,
        num_kernels: u64,
        groups: u64,
        has_bias: bool,
    },
    Fc {
        out_features: u64,
        has_bias: bool,
    },
    Pool {
        pool_fn: PoolFn,
        window: PoolWindow,
    },
    Relu,
    BatchNorm,
    Scale {
        has_bias: bool,
    },
    Concat,
    Eltwise {
        eltwise_fn: EltwiseFn,
    },
    Softmax,
}

impl LayerParams {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerParams::Conv { .. } => LayerKind::Conv,
            LayerParams::Fc { .. } => LayerKind::Fc,
            LayerParams::Pool { .. } => LayerKind::Pool,
            LayerParams::Relu => LayerKind::Relu,
            LayerParams::BatchNorm => LayerKind::BatchNorm,
            LayerParams::Scale { .. } => LayerKind::Scale,
            LayerParams::Concat => LayerKind::Concat,
            LayerParams::Eltwise { .. } => LayerKind::Eltwise,
            LayerParams::Softmax => LayerKind::Softmax,
        }
    }
}

/// One layer: a unique name, the ordered list of producer names, and
/// kind-specific parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub inputs: Vec<String>,
    pub params: LayerParams,
}

impl LayerSpec {
    pub fn new(name: &str, inputs: &[&str], params: LayerParams) -> Self {
        Self {
            name: name.to_string(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            params,
        }
    }

    pub fn kind(&self) -> LayerKind {
        self.params.kind()
    }
}

/// A whole network: name, input shape and layers in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkDef {
    pub name: String,
    pub input_shape: TensorShape,
    pub layers: Vec<LayerSpec>,
}

/// Resolved tensor shapes of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerShapes {
    pub inputs: Vec<TensorShape>,
    pub output: TensorShape,
}

/// A network whose every layer has resolved input/output shapes.
#[derive(Clone, Debug)]
pub struct ShapedNetwork {
    pub net: NetworkDef,
    shapes: BTreeMap<String, LayerShapes>,
}

impl ShapedNetwork {
    pub fn layer_shapes(&self, name: &str) -> Option<&LayerShapes> {
        self.shapes.get(name)
    }

    pub fn output_shape(&self, name: &str) -> Option<TensorShape> {
        if name == INPUT_NAME {
            return Some(self.net.input_shape);
        }
        self.shapes.get(name).map(|s| s.output)
    }
}

/// One validation finding: the offending layer (or [`INPUT_NAME`] for
/// network-level problems), a stable machine-readable rule id, and a
/// human-readable message.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub layer: String,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: [{}] {}", self.layer, self.rule, self.message)
    }
}

/// Error from [`infer_shapes`]: the first violation encountered.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeError(pub Violation);

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shape inference failed at {}", self.0)
    }
}

impl core::error::Error for ShapeError {}

/// Error from [`topological_order`]: the members of one dependency cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleError {
    pub members: Vec<String>,
}

impl fmt::Display for CycleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dependency cycle: {}", self.members.join(" -> "))
    }
}

impl core::error::Error for CycleError {}

/// Error from [`parse_network`].
#[derive(Clone, Debug, PartialEq)]
pub enum ParseError {
    /// Malformed JSON or a document that does not match the schema
    /// (unknown fields included). Line/column point at the problem.
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    UnknownKind {
        layer: String,
        kind: String,
    },
    DuplicateName {
        name: String,
    },
    /// A layer tried to claim the reserved input pseudo-layer name.
    ReservedName {
        name: String,
    },
    MissingField {
        layer: String,
        field: &'static str,
    },
    /// A field that does not belong to the layer's kind was present.
    NotApplicable {
        layer: String,
        field: &'static str,
    },
    InvalidValue {
        layer: String,
        field: &'static str,
        message: String,
    },
    /// Reference to a layer that is not declared earlier in the document.
    UnresolvedInput {
        layer: String,
        reference: String,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Json {
                line,
                column,
                message,
            } => write!(f, "invalid document at line {line}, column {column}: {message}"),
            ParseError::UnknownKind { layer, kind } => {
                write!(f, "layer '{layer}': unknown layer kind '{kind}'")
            }
            ParseError::DuplicateName { name } => write!(f, "duplicate layer name '{name}'"),
            ParseError::ReservedName { name } => {
                write!(f, "layer name '{name}' is reserved for the network input")
            }
            ParseError::MissingField { layer, field } => {
                write!(f, "layer '{layer}': missing mandatory field '{field}'")
            }
            ParseError::NotApplicable { layer, field } => {
                write!(f, "layer '{layer}': field '{field}' does not apply to this kind")
            }
            ParseError::InvalidValue {
                layer,
                field,
                message,
            } => write!(f, "layer '{layer}': invalid '{field}': {message}"),
            ParseError::UnresolvedInput { layer, reference } => {
                write!(f, "layer '{layer}': unresolved input '{reference}'")
            }
        }
    }
}

impl core::error::Error for ParseError {}

// ---------------------------------------------------------------------------
// Canonical JSON document
// ---------------------------------------------------------------------------

/// Flat mirror of one layer object in the JSON document. Field order here
/// is the canonical serialization order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    name: String,
    kind: String,
    inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_h: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_w: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pad: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_kernels: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_features: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool_fn: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    global_pool: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eltwise_fn: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    has_bias: Option<bool>,
}

impl Default for LayerDoc {
    fn default() -> Self {
        LayerDoc {
            name: String::new(),
            kind: String::new(),
            inputs: Vec::new(),
            kernel_h: None,
            kernel_w: None,
            stride: None,
            pad: None,
            num_kernels: None,
            groups: None,
            out_features: None,
            pool_fn: None,
            global_pool: None,
            eltwise_fn: None,
            has_bias: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    name: String,
    input: TensorShape,
    layers: Vec<LayerDoc>,
}

/// Tracks which optional document fields a kind consumed, so leftovers can
/// be rejected with a precise error.
struct FieldReader<'a> {
    layer: &'a str,
    doc: &'a LayerDoc,
    used: BTreeSet<&'static str>,
}

impl<'a> FieldReader<'a> {
    fn new(layer: &'a str, doc: &'a LayerDoc) -> Self {
        Self {
            layer,
            doc,
            used: BTreeSet::new(),
        }
    }

    fn get(&mut self, field: &'static str) -> Option<u64> {
        self.used.insert(field);
        match field {
            "kernel_h" => self.doc.kernel_h,
            "kernel_w" => self.doc.kernel_w,
            "stride" => self.doc.stride,
            "pad" => self.doc.pad,
            "num_kernels" => self.doc.num_kernels,
            "groups" => self.doc.groups,
            "out_features" => self.doc.out_features,
            _ => unreachable!("not a numeric field: {field}"),
        }
    }

    fn require(&mut self, field: &'static str) -> Result<u64, ParseError> {
        self.get(field).ok_or(ParseError::MissingField {
            layer: self.layer.to_string(),
            field,
        })
    }

    fn positive(&mut self, field: &'static str, default: u64) -> Result<u64, ParseError> {
        let v = self.get(field).unwrap_or(default);
        if v == 0 {
            return Err(ParseError::InvalidValue {
                layer: self.layer.to_string(),
                field,
                message: "must be at least 1".to_string(),
            });
        }
        Ok(v)
    }

    fn require_positive(&mut self, field: &'static str) -> Result<u64, ParseError> {
        let v = self.require(field)?;
        if v == 0 {
            return Err(ParseError::InvalidValue {
                layer: self.layer.to_string(),
                field,
                message: "must be at least 1".to_string(),
            });
        }
        Ok(v)
    }

    fn bias(&mut self, default: bool) -> bool {
        self.used.insert("has_bias");
        self.doc.has_bias.unwrap_or(default)
    }

    fn pool_fn(&mut self) -> Result<PoolFn, ParseError> {
        self.used.insert("pool_fn");
        match self.doc.pool_fn.as_deref() {
            Some("max") => Ok(PoolFn::Max),
            Some("avg") => Ok(PoolFn::Avg),
            Some(other) => Err(ParseError::InvalidValue {
                layer: self.layer.to_string(),
                field: "pool_fn",
                message: format!("expected 'max' or 'avg', got '{other}'"),
            }),
            None => Err(ParseError::MissingField {
                layer: self.layer.to_string(),
                field: "pool_fn",
            }),
        }
    }

    fn eltwise_fn(&mut self) -> Result<EltwiseFn, ParseError> {
        self.used.insert("eltwise_fn");
        match self.doc.eltwise_fn.as_deref() {
            Some("sum") => Ok(EltwiseFn::Sum),
            Some("prod") => Ok(EltwiseFn::Prod),
            Some("max") => Ok(EltwiseFn::Max),
            Some(other) => Err(ParseError::InvalidValue {
                layer: self.layer.to_string(),
                field: "eltwise_fn",
                message: format!("expected 'sum', 'prod' or 'max', got '{other}'"),
            }),
            None => Err(ParseError::MissingField {
                layer: self.layer.to_string(),
                field: "eltwise_fn",
            }),
        }
    }

    fn global_pool(&mut self) -> bool {
        self.used.insert("global_pool");
        self.doc.global_pool.unwrap_or(false)
    }

    /// Reject any present field this kind did not consume.
    fn finish(self) -> Result<(), ParseError> {
        let present: [(&'static str, bool); 11] = [
            ("kernel_h", self.doc.kernel_h.is_some()),
            ("kernel_w", self.doc.kernel_w.is_some()),
            ("stride", self.doc.stride.is_some()),
            ("pad", self.doc.pad.is_some()),
            ("num_kernels", self.doc.num_kernels.is_some()),
            ("groups", self.doc.groups.is_some()),
            ("out_features", self.doc.out_features.is_some()),
            ("pool_fn", self.doc.pool_fn.is_some()),
            ("global_pool", self.doc.global_pool.is_some()),
            ("eltwise_fn", self.doc.eltwise_fn.is_some()),
            ("has_bias", self.doc.has_bias.is_some()),
        ];
        for (field, is_present) in present {
            if is_present && !self.used.contains(field) {
                return Err(ParseError::NotApplicable {
                    layer: self.layer.to_string(),
                    field,
                });
            }
        }
        Ok(())
    }
}

fn layer_from_doc(doc: &LayerDoc) -> Result<LayerSpec, ParseError> {
    let kind = LayerKind::from_str_opt(&doc.kind).ok_or_else(|| ParseError::UnknownKind {
        layer: doc.name.clone(),
        kind: doc.kind.clone(),
    })?;
    if doc.inputs.is_empty() {
        return Err(ParseError::InvalidValue {
            layer: doc.name.clone(),
            field: "inputs",
            message: "must list at least one producer".to_string(),
        });
    }

    let mut r = FieldReader::new(&doc.name, doc);
    let params = match kind {
        LayerKind::Conv => {
            let kernel_h = r.require_positive("kernel_h")?;
            let kernel_w = r.require_positive("kernel_w")?;
            let stride = r.positive("stride", 1)?;
            let pad = r.get("pad").unwrap_or(0);
            let num_kernels = r.require_positive("num_kernels")?;
            let groups = r.positive("groups", 1)?;
            let has_bias = r.bias(true);
            LayerParams::Conv {
                kernel_h,
                kernel_w,
                stride,
                pad,
                num_kernels,
                groups,
                has_bias,
            }
        }
        LayerKind::Fc => LayerParams::Fc {
            out_features: r.require_positive("out_features")?,
            has_bias: r.bias(true),
        },
        LayerKind::Pool => {
            let pool_fn = r.pool_fn()?;
            let window = if r.global_pool() {
                PoolWindow::Global
            } else {
                PoolWindow::Window {
                    kernel_h: r.require_positive("kernel_h")?,
                    kernel_w: r.require_positive("kernel_w")?,
                    stride: r.positive("stride", 1)?,
                    pad: r.get("pad").unwrap_or(0),
                }
            };
            LayerParams::Pool { pool_fn, window }
        }
        LayerKind::Relu => LayerParams::Relu,
        LayerKind::BatchNorm => LayerParams::BatchNorm,
        LayerKind::Scale => LayerParams::Scale {
            has_bias: r.bias(false),
        },
        LayerKind::Concat => LayerParams::Concat,
        LayerKind::Eltwise => LayerParams::Eltwise {
            eltwise_fn: r.eltwise_fn()?,
        },
        LayerKind::Softmax => LayerParams::Softmax,
    };
    r.finish()?;

    Ok(LayerSpec {
        name: doc.name.clone(),
        inputs: doc.inputs.clone(),
        params,
    })
}

fn layer_to_doc(layer: &LayerSpec) -> LayerDoc {
    let mut doc = LayerDoc {
        name: layer.name.clone(),
        kind: layer.kind().as_str().to_string(),
        inputs: layer.inputs.clone(),
        ..LayerDoc::default()
    };
    match &layer.params {
        LayerParams::Conv {
            kernel_h,
            kernel_w,
            stride,
            pad,
            num_kernels,
            groups,
            has_bias,
        } => {
            doc.kernel_h = Some(*kernel_h);
            doc.kernel_w = Some(*kernel_w);
            doc.stride = Some(*stride);
            doc.pad = Some(*pad);
            doc.num_kernels = Some(*num_kernels);
            doc.groups = Some(*groups);
            doc.has_bias = Some(*has_bias);
        }
        LayerParams::Fc {
            out_features,
            has_bias,
        } => {
            doc.out_features = Some(*out_features);
            doc.has_bias = Some(*has_bias);
        }
        LayerParams::Pool { pool_fn, window } => {
            doc.pool_fn = Some(pool_fn.as_str().to_string());
            match window {
                PoolWindow::Global => doc.global_pool = Some(true),
                PoolWindow::Window {
                    kernel_h,
                    kernel_w,
                    stride,
                    pad,
                } => {
                    doc.kernel_h = Some(*kernel_h);
                    doc.kernel_w = Some(*kernel_w);
                    doc.stride = Some(*stride);
                    doc.pad = Some(*pad);
                    doc.global_pool = Some(false);
                }
            }
        }
        LayerParams::Scale { has_bias } => doc.has_bias = Some(*has_bias),
        LayerParams::Eltwise { eltwise_fn } => {
            doc.eltwise_fn = Some(eltwise_fn.as_str().to_string())
        }
        LayerParams::Relu | LayerParams::BatchNorm | LayerParams::Concat | LayerParams::Softmax => {}
    }
    doc
}

/// Parse a canonical JSON network document.
///
/// Beyond JSON syntax and schema (unknown fields are rejected), this
/// enforces the name-level structure: no duplicate or reserved layer
/// names, and every input reference resolves to an earlier-declared layer
/// or the network input. Shape-level problems are left to [`validate`] /
/// [`infer_shapes`].
pub fn parse_network(text: &str) -> Result<NetworkDef, ParseError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    if doc.input.h == 0 || doc.input.w == 0 || doc.input.c == 0 {
        return Err(ParseError::InvalidValue {
            layer: INPUT_NAME.to_string(),
            field: "input",
            message: "input dimensions must be at least 1".to_string(),
        });
    }

    let mut layers = Vec::with_capacity(doc.layers.len());
    let mut declared: BTreeSet<&str> = BTreeSet::new();
    for layer_doc in &doc.layers {
        let layer = layer_from_doc(layer_doc)?;
        if layer.name == INPUT_NAME {
            return Err(ParseError::ReservedName { name: layer.name });
        }
        if declared.contains(layer.name.as_str()) {
            return Err(ParseError::DuplicateName { name: layer.name });
        }
        for reference in &layer.inputs {
            if reference != INPUT_NAME && !declared.contains(reference.as_str()) {
                return Err(ParseError::UnresolvedInput {
                    layer: layer.name.clone(),
                    reference: reference.clone(),
                });
            }
        }
        declared.insert(&layer_doc.name);
        layers.push(layer);
    }

    Ok(NetworkDef {
        name: doc.name,
        input_shape: doc.input,
        layers,
    })
}

/// Serialize to the canonical JSON document: pretty-printed, fixed field
/// order, every kind-applicable field written explicitly. `parse` of the
/// result reproduces the definition, and serializing again is
/// byte-identical.
pub fn serialize_network(net: &NetworkDef) -> String {
    let doc = NetworkDoc {
        name: net.name.clone(),
        input: net.input_shape,
        layers: net.layers.iter().map(layer_to_doc).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("network serialization cannot fail");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Validation and shape inference
// ---------------------------------------------------------------------------

/// Compute one layer's output shape from its resolved input shapes, or the
/// violation that makes it impossible.
fn layer_output_shape(layer: &LayerSpec, inputs: &[TensorShape]) -> Result<TensorShape, Violation> {
    let violation = |rule: &'static str, message: String| Violation {
        layer: layer.name.clone(),
        rule,
        message,
    };

    let unary = |kind: &str| -> Result<TensorShape, Violation> {
        if inputs.len() != 1 {
            return Err(violation(
                "arity",
                format!("{kind} takes exactly one input, got {}", inputs.len()),
            ));
        }
        Ok(inputs[0])
    };

    // Output extent of a strided window along one spatial axis.
    let window_out = |name: &'static str, extent: u64, kernel: u64, stride: u64, pad: u64| {
        let padded = extent
            .checked_add(pad.checked_mul(2).unwrap_or(u64::MAX))
            .unwrap_or(u64::MAX);
        if padded < kernel {
            return Err(violation(
                "output-dim",
                format!(
                    "{name}: window {kernel} exceeds padded extent {padded} (non-positive output)"
                ),
            ));
        }
        Ok((padded - kernel) / stride + 1)
    };

    match &layer.params {
        LayerParams::Conv {
            kernel_h,
            kernel_w,
            stride,
            pad,
            num_kernels,
            groups,
            ..
        } => {
            let input = unary("conv")?;
            if *groups == 0 || *stride == 0 || *kernel_h == 0 || *kernel_w == 0 || *num_kernels == 0
            {
                return Err(violation(
                    "field-positive",
                    "kernel, stride, num_kernels and groups must be at least 1".to_string(),
                ));
            }
            if input.c % groups != 0 {
                return Err(violation(
                    "conv-groups",
                    format!("input channels {} not divisible by groups {}", input.c, groups),
                ));
            }
            if num_kernels % groups != 0 {
                return Err(violation(
                    "conv-groups",
                    format!("num_kernels {} not divisible by groups {}", num_kernels, groups),
                ));
            }
            Ok(TensorShape {
                h: window_out("height", input.h, *kernel_h, *stride, *pad)?,
                w: window_out("width", input.w, *kernel_w, *stride, *pad)?,
                c: *num_kernels,
            })
        }
        LayerParams::Fc { out_features, .. } => {
            let input = unary("fc")?;
            if *out_features == 0 {
                return Err(violation(
                    "field-positive",
                    "out_features must be at least 1".to_string(),
                ));
            }
            // The input tensor is implicitly flattened to h·w·c features.
            if input.elements().is_none() {
                return Err(violation(
                    "shape-overflow",
                    format!("input {input} exceeds the u64 element budget"),
                ));
            }
            Ok(TensorShape::new(1, 1, *out_features))
        }
        LayerParams::Pool { window, .. } => {
            let input = unary("pool")?;
            match window {
                PoolWindow::Global => Ok(TensorShape::new(1, 1, input.c)),
                PoolWindow::Window {
                    kernel_h,
                    kernel_w,
                    stride,
                    pad,
                } => {
                    if *stride == 0 || *kernel_h == 0 || *kernel_w == 0 {
                        return Err(violation(
                            "field-positive",
                            "kernel and stride must be at least 1".to_string(),
                        ));
                    }
                    Ok(TensorShape {
                        h: window_out("height", input.h, *kernel_h, *stride, *pad)?,
                        w: window_out("width", input.w, *kernel_w, *stride, *pad)?,
                        c: input.c,
                    })
                }
            }
        }
        LayerParams::Relu => unary("relu"),
        LayerParams::BatchNorm => unary("batchnorm"),
        LayerParams::Scale { .. } => unary("scale"),
        LayerParams::Softmax => unary("softmax"),
        LayerParams::Concat => {
            if inputs.len() < 2 {
                return Err(violation(
                    "arity",
                    format!("concat takes at least two inputs, got {}", inputs.len()),
                ));
            }
            let (h, w) = (inputs[0].h, inputs[0].w);
            let mut c: u64 = 0;
            for shape in inputs {
                if shape.h != h || shape.w != w {
                    return Err(violation(
                        "concat-shape",
                        format!("inputs disagree on spatial size: {} vs {}x{}", shape, h, w),
                    ));
                }
                c = c.checked_add(shape.c).ok_or_else(|| {
                    violation("shape-overflow", "channel sum exceeds u64".to_string())
                })?;
            }
            Ok(TensorShape { h, w, c })
        }
        LayerParams::Eltwise { .. } => {
            if inputs.len() < 2 {
                return Err(violation(
                    "arity",
                    format!("eltwise takes at least two inputs, got {}", inputs.len()),
                ));
            }
            let first = inputs[0];
            for shape in &inputs[1..] {
                if *shape != first {
                    return Err(violation(
                        "eltwise-shape",
                        format!("inputs disagree: {} vs {}", first, shape),
                    ));
                }
            }
            Ok(first)
        }
    }
}

/// Check every structural and shape invariant, returning all violations in
/// a deterministic order (declaration order; fixed rule order per layer).
/// An empty result means [`infer_shapes`] will succeed.
pub fn validate(net: &NetworkDef) -> Vec<Violation> {
    let mut violations = Vec::new();

    if net.input_shape.h == 0 || net.input_shape.w == 0 || net.input_shape.c == 0 {
        violations.push(Violation {
            layer: INPUT_NAME.to_string(),
            rule: "field-positive",
            message: format!("input dimensions must be at least 1, got {}", net.input_shape),
        });
    }
    if net.input_shape.elements().is_none() {
        violations.push(Violation {
            layer: INPUT_NAME.to_string(),
            rule: "shape-overflow",
            message: "input element count exceeds u64".to_string(),
        });
    }

    // Shape of each resolvable producer; `None` marks layers whose shape
    // could not be established (their consumers skip shape checks).
    let mut shapes: BTreeMap<&str, Option<TensorShape>> = BTreeMap::new();
    shapes.insert(INPUT_NAME, Some(net.input_shape));

    for layer in &net.layers {
        let mut structurally_ok = true;

        if layer.name == INPUT_NAME {
            violations.push(Violation {
                layer: layer.name.clone(),
                rule: "reserved-name",
                message: "layer name 'input' is reserved for the network input".to_string(),
            });
            structurally_ok = false;
        } else if shapes.contains_key(layer.name.as_str()) {
            violations.push(Violation {
                layer: layer.name.clone(),
                rule: "duplicate-name",
                message: "layer name already declared".to_string(),
            });
            // The first declaration keeps the name; skip shape insertion.
            structurally_ok = false;
        }

        if layer.inputs.is_empty() {
            violations.push(Violation {
                layer: layer.name.clone(),
                rule: "arity",
                message: "layer lists no inputs".to_string(),
            });
            structurally_ok = false;
        }

        let mut input_shapes = Vec::with_capacity(layer.inputs.len());
        let mut inputs_known = true;
        for reference in &layer.inputs {
            match shapes.get(reference.as_str()) {
                Some(Some(shape)) => input_shapes.push(*shape),
                Some(None) => inputs_known = false,
                None => {
                    violations.push(Violation {
                        layer: layer.name.clone(),
                        rule: "unresolved-input",
                        message: format!(
                            "'{reference}' is not the network input or an earlier-declared layer"
                        ),
                    });
                    inputs_known = false;
                    structurally_ok = false;
                }
            }
        }

        let mut out = None;
        if structurally_ok && inputs_known {
            match layer_output_shape(layer, &input_shapes) {
                Ok(shape) => {
                    if shape.elements().is_none() {
                        violations.push(Violation {
                            layer: layer.name.clone(),
                            rule: "shape-overflow",
                            message: format!("output {shape} exceeds the u64 element budget"),
                        });
                    } else {
                        out = Some(shape);
                    }
                }
                Err(v) => violations.push(v),
            }
        }
        if layer.name != INPUT_NAME && !shapes.contains_key(layer.name.as_str()) {
            shapes.insert(layer.name.as_str(), out);
        }
    }

    violations
}

/// Resolve every layer's input/output shapes, walking declaration order.
/// Fails on the first violation; run [`validate`] for an exhaustive list.
pub fn infer_shapes(net: &NetworkDef) -> Result<ShapedNetwork, ShapeError> {
    let mut resolved: BTreeMap<String, TensorShape> = BTreeMap::new();
    resolved.insert(INPUT_NAME.to_string(), net.input_shape);
    let mut shapes = BTreeMap::new();

    for layer in &net.layers {
        if layer.name == INPUT_NAME || shapes.contains_key(&layer.name) {
            return Err(ShapeError(Violation {
                layer: layer.name.clone(),
                rule: if layer.name == INPUT_NAME {
                    "reserved-name"
                } else {
                    "duplicate-name"
                },
                message: "layer name unusable".to_string(),
            }));
        }
        let mut inputs = Vec::with_capacity(layer.inputs.len());
        for reference in &layer.inputs {
            let shape = resolved.get(reference).ok_or_else(|| {
                ShapeError(Violation {
                    layer: layer.name.clone(),
                    rule: "unresolved-input",
                    message: format!(
                        "'{reference}' is not the network input or an earlier-declared layer"
                    ),
                })
            })?;
            inputs.push(*shape);
        }
        let output = layer_output_shape(layer, &inputs).map_err(ShapeError)?;
        if output.elements().is_none() {
            return Err(ShapeError(Violation {
                layer: layer.name.clone(),
                rule: "shape-overflow",
                message: format!("output {output} exceeds the u64 element budget"),
            }));
        }
        resolved.insert(layer.name.clone(), output);
        shapes.insert(layer.name.clone(), LayerShapes { inputs, output });
    }

    Ok(ShapedNetwork {
        net: net.clone(),
        shapes,
    })
}

/// Return layer names in a topological order that is stable with respect
/// to declaration order among independent layers. For a network that
/// passes [`validate`] this is exactly declaration order; the general
/// algorithm exists to detect cycles in programmatically built graphs.
pub fn topological_order(net: &NetworkDef) -> Result<Vec<String>, CycleError> {
    let index_of: BTreeMap<&str, usize> = net
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| (l.name.as_str(), i))
        .collect();

    let n = net.layers.len();
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, layer) in net.layers.iter().enumerate() {
        for reference in &layer.inputs {
            if reference == INPUT_NAME {
                continue;
            }
            // References to undeclared names cannot gate readiness; they are
            // a `validate` concern, not a cycle.
            if let Some(&p) = index_of.get(reference.as_str()) {
                indegree[i] += 1;
                consumers[p].push(i);
            }
        }
    }

    // Min-heap on declaration index keeps the order stable.
    let mut ready: alloc::collections::BinaryHeap<core::cmp::Reverse<usize>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(core::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];

    while let Some(core::cmp::Reverse(i)) = ready.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        order.push(net.layers[i].name.clone());
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(core::cmp::Reverse(c));
            }
        }
    }

    if order.len() == n {
        return Ok(order);
    }

    // Walk producer edges among the unfinished layers until one repeats;
    // the repeated segment is a cycle.
    let start = (0..n).find(|&i| !done[i]).expect("an unfinished layer exists");
    let mut seen_at: BTreeMap<usize, usize> = BTreeMap::new();
    let mut path = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&pos) = seen_at.get(&cur) {
            let members = path[pos..].iter().map(|&i: &usize| net.layers[i].name.clone()).collect();
            return Err(CycleError { members });
        }
        seen_at.insert(cur, path.len());
        path.push(cur);
        cur = net.layers[cur]
            .inputs
            .iter()
            .filter_map(|r| index_of.get(r.as_str()).copied())
            .find(|&p| !done[p])
            .expect("every unfinished layer waits on an unfinished producer");
    }
}
