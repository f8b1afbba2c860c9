//! Generators for the two characterization networks used to collect
//! per-layer training observations on a device.
//!
//! `previousnet01` is the convolutional profile: 52 layers in 5 levels.
//! The trunk keeps the input resolution `h × w` end to end and doubles its
//! channel count at each level transition (`c, 2c, 4c, 8c, 16c`). Each
//! level carries a cluster of convolutions cycling through five shapes —
//! standard 3×3 stride 1, pointwise expanding (`2·C_in`), depthwise 3×3,
//! pointwise bottleneck (`C_in/2`), standard 3×3 stride 2 — plus
//! batchnorm/scale/relu chains at varied attachment points, one eltwise
//! and one concat joining equal-shaped sibling branches, and pooling
//! layers. Downsampling layers (strided convolutions, windowed pools) sit
//! on terminal branches so they never shrink the trunk; layers are
//! profiled one at a time, so dead-end outputs cost nothing.
//!
//! `previousnet02` is the fully-connected profile: 44 layers (32 FC, 12
//! softmax) over `1 × 1 × v` vectors. A trunk of expanding FCs visits the
//! sizes `c, 2c, 4c, 8c, 16c`; per-level clusters map each trunk size to
//! itself, to the fixed head sizes `k1`/`k2`, and across the size ladder.
//! Softmax layers attach to twelve of the FC outputs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use crate::netdef::{
    EltwiseFn, LayerParams, LayerSpec, NetworkDef, PoolFn, PoolWindow, TensorShape, INPUT_NAME,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PNetVariant {
    Net01,
    Net02,
}

/// Configuration of one characterization network instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PNetConfig {
    pub variant: PNetVariant,
    pub h: u64,
    pub w: u64,
    pub c: u64,
    /// Head vector sizes exercised by `previousnet02` (ignored by 01).
    pub k1: u64,
    pub k2: u64,
}

impl PNetConfig {
    pub fn net01(h: u64, w: u64, c: u64) -> Self {
        Self {
            variant: PNetVariant::Net01,
            h,
            w,
            c,
            k1: 10,
            k2: 1000,
        }
    }

    pub fn net02(c: u64, k1: u64, k2: u64) -> Self {
        Self {
            variant: PNetVariant::Net02,
            h: 1,
            w: 1,
            c,
            k1,
            k2,
        }
    }

    /// Stable label used as the network name and suggested file stem.
    pub fn label(&self) -> String {
        match self.variant {
            PNetVariant::Net01 => format!("previousnet01_{}x{}x{}", self.h, self.w, self.c),
            PNetVariant::Net02 => format!("previousnet02_{}x{}x{}", self.h, self.w, self.c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigError {
    /// `previousnet01` needs room for its 3×3 windows and halves channels
    /// in bottleneck convolutions, so `h, w ≥ 3` and `c` even.
    Net01 { message: String },
    /// `previousnet02` operates on vectors: `h = w = 1`, positive sizes.
    Net02 { message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Net01 { message } => write!(f, "previousnet01 config: {message}"),
            ConfigError::Net02 { message } => write!(f, "previousnet02 config: {message}"),
        }
    }
}

impl core::error::Error for ConfigError {}

/// The five measurement configurations profiled on a device, in order:
/// four `previousnet01` resolutions and one `previousnet02` vector size.
pub fn standard_suite() -> Vec<PNetConfig> {
    alloc::vec![
        PNetConfig::net01(56, 56, 32),
        PNetConfig::net01(28, 28, 64),
        PNetConfig::net01(14, 14, 64),
        PNetConfig::net01(7, 7, 64),
        PNetConfig::net02(256, 10, 1000),
    ]
}

/// Generate the configured variant.
pub fn generate(cfg: &PNetConfig) -> Result<NetworkDef, ConfigError> {
    match cfg.variant {
        PNetVariant::Net01 => generate_01(cfg),
        PNetVariant::Net02 => generate_02(cfg),
    }
}

// --- previousnet01 building blocks -----------------------------------------

fn conv(name: String, input: &str, k: u64, stride: u64, pad: u64, n: u64, groups: u64) -> LayerSpec {
    LayerSpec {
        name,
        inputs: alloc::vec![input.into()],
        params: LayerParams::Conv {
            kernel_h: k,
            kernel_w: k,
            stride,
            pad,
            num_kernels: n,
            groups,
            has_bias: true,
        },
    }
}

fn unary(name: String, input: &str, params: LayerParams) -> LayerSpec {
    LayerSpec {
        name,
        inputs: alloc::vec![input.into()],
        params,
    }
}

fn pair(name: String, a: &str, b: &str, params: LayerParams) -> LayerSpec {
    LayerSpec {
        name,
        inputs: alloc::vec![a.into(), b.into()],
        params,
    }
}

fn pool(name: String, input: &str, pool_fn: PoolFn, window: PoolWindow) -> LayerSpec {
    unary(name, input, LayerParams::Pool { pool_fn, window })
}

fn window(k: u64, stride: u64) -> PoolWindow {
    PoolWindow::Window {
        kernel_h: k,
        kernel_w: k,
        stride,
        pad: 0,
    }
}

/// Append a batchnorm → scale → relu chain rooted at `input`; returns the
/// relu's name.
fn norm_chain(layers: &mut Vec<LayerSpec>, prefix: &str, input: &str) -> String {
    let bn = format!("{prefix}_bn");
    let sc = format!("{prefix}_scale");
    let re = format!("{prefix}_relu");
    layers.push(unary(bn.clone(), input, LayerParams::BatchNorm));
    layers.push(unary(sc.clone(), &bn, LayerParams::Scale { has_bias: true }));
    layers.push(unary(re.clone(), &sc, LayerParams::Relu));
    re
}

/// Build `previousnet01`: 52 layers (15 conv, 7 batchnorm, 7 scale,
/// 7 relu, 6 pool, 5 eltwise, 5 concat) in 5 constant-resolution levels.
pub fn generate_01(cfg: &PNetConfig) -> Result<NetworkDef, ConfigError> {
    if cfg.variant != PNetVariant::Net01 {
        return Err(ConfigError::Net01 {
            message: "config targets the FC variant".into(),
        });
    }
    if cfg.h < 3 || cfg.w < 3 {
        return Err(ConfigError::Net01 {
            message: format!(
                "spatial size {}x{} too small for 3x3 windows (need at least 3x3)",
                cfg.h, cfg.w
            ),
        });
    }
    if cfg.c < 2 || cfg.c % 2 != 0 {
        return Err(ConfigError::Net01 {
            message: format!("channel count {} must be even (bottleneck convs halve it)", cfg.c),
        });
    }

    let mut layers: Vec<LayerSpec> = Vec::with_capacity(52);
    // trunk tensor entering the current level, with its channel count
    let mut trunk: String = INPUT_NAME.into();
    let mut x = cfg.c;

    for level in 0..5u64 {
        let p = |suffix: &str| format!("l{level}_{suffix}");
        match level {
            // level 0: bottleneck + its standard consumer, strided standard,
            // residual-style eltwise, two norm chains, two 2x2 pools,
            // concat doubles the trunk (c -> 2c)
            0 => {
                layers.push(conv(p("conv_bneck"), &trunk, 1, 1, 0, x / 2, 1));
                layers.push(conv(p("conv_std1"), &p("conv_bneck"), 3, 1, 1, x / 2, 1));
                layers.push(conv(p("conv_std2"), &trunk, 3, 2, 1, x, 1));
                layers.push(pair(
                    p("elt"),
                    &p("conv_bneck"),
                    &p("conv_std1"),
                    LayerParams::Eltwise {
                        eltwise_fn: EltwiseFn::Sum,
                    },
                ));
                norm_chain(&mut layers, &p("main"), &p("elt"));
                layers.push(pool(p("pool_max2"), &trunk, PoolFn::Max, window(2, 2)));
                layers.push(pool(p("pool_avg2"), &trunk, PoolFn::Avg, window(2, 2)));
                let side = norm_chain(&mut layers, &p("side"), &trunk);
                layers.push(pair(p("cat"), &trunk, &side, LayerParams::Concat));
                trunk = p("cat");
            }
            // levels 1-3: three convs (window of the five-shape cycle), one
            // eltwise + one concat over equal siblings, one norm chain, one
            // pool; the pointwise expander carries the trunk forward
            1 => {
                layers.push(conv(p("conv_std2"), &trunk, 3, 2, 1, x, 1));
                layers.push(conv(p("conv_std1"), &trunk, 3, 1, 1, x, 1));
                layers.push(pair(
                    p("elt"),
                    &trunk,
                    &p("conv_std1"),
                    LayerParams::Eltwise {
                        eltwise_fn: EltwiseFn::Sum,
                    },
                ));
                let main = norm_chain(&mut layers, &p("main"), &p("elt"));
                layers.push(pool(p("pool_max3s2"), &trunk, PoolFn::Max, window(3, 2)));
                layers.push(pair(p("cat"), &p("conv_std1"), &main, LayerParams::Concat));
                layers.push(conv(p("conv_pwgen"), &trunk, 1, 1, 0, 2 * x, 1));
                trunk = p("conv_pwgen");
            }
            2 => {
                layers.push(conv(p("conv_std1"), &trunk, 3, 1, 1, x, 1));
                layers.push(conv(p("conv_dw"), &trunk, 3, 1, 1, x, x));
                layers.push(pair(
                    p("elt"),
                    &p("conv_std1"),
                    &p("conv_dw"),
                    LayerParams::Eltwise {
                        eltwise_fn: EltwiseFn::Sum,
                    },
                ));
                let main = norm_chain(&mut layers, &p("main"), &p("elt"));
                layers.push(pool(p("pool_max3s1"), &trunk, PoolFn::Max, window(3, 1)));
                layers.push(pair(p("cat"), &trunk, &main, LayerParams::Concat));
                layers.push(conv(p("conv_pwgen"), &trunk, 1, 1, 0, 2 * x, 1));
                trunk = p("conv_pwgen");
            }
            3 => {
                layers.push(conv(p("conv_dw"), &trunk, 3, 1, 1, x, x));
                layers.push(conv(p("conv_bneck"), &trunk, 1, 1, 0, x / 2, 1));
                layers.push(pair(
                    p("elt"),
                    &trunk,
                    &p("conv_dw"),
                    LayerParams::Eltwise {
                        eltwise_fn: EltwiseFn::Sum,
                    },
                ));
                // norm chain on the bottleneck branch this level
                norm_chain(&mut layers, &p("side"), &p("conv_bneck"));
                layers.push(pool(p("pool_avg3s2"), &trunk, PoolFn::Avg, window(3, 2)));
                layers.push(pair(p("cat"), &p("conv_dw"), &p("elt"), LayerParams::Concat));
                layers.push(conv(p("conv_pwgen"), &trunk, 1, 1, 0, 2 * x, 1));
                trunk = p("conv_pwgen");
            }
            // level 4: depthwise/bottleneck/strided trio, two norm chains,
            // global pool; the trunk ends here
            _ => {
                layers.push(conv(p("conv_dw"), &trunk, 3, 1, 1, x, x));
                layers.push(conv(p("conv_bneck"), &trunk, 1, 1, 0, x / 2, 1));
                layers.push(conv(p("conv_std2"), &trunk, 3, 2, 1, x, 1));
                layers.push(pair(
                    p("elt"),
                    &trunk,
                    &p("conv_dw"),
                    LayerParams::Eltwise {
                        eltwise_fn: EltwiseFn::Sum,
                    },
                ));
                let main = norm_chain(&mut layers, &p("main"), &p("elt"));
                norm_chain(&mut layers, &p("side"), &p("conv_bneck"));
                layers.push(pool(
                    p("pool_gavg"),
                    &trunk,
                    PoolFn::Avg,
                    PoolWindow::Global,
                ));
                layers.push(pair(p("cat"), &p("elt"), &main, LayerParams::Concat));
            }
        }
        // levels 0-3 hand a doubled trunk to the next level
        if level < 4 {
            x *= 2;
        }
    }

    Ok(NetworkDef {
        name: cfg.label(),
        input_shape: TensorShape::new(cfg.h, cfg.w, cfg.c),
        layers,
    })
}

// --- previousnet02 ----------------------------------------------------------

/// Build `previousnet02`: 44 layers (32 FC, 12 softmax) over vectors.
pub fn generate_02(cfg: &PNetConfig) -> Result<NetworkDef, ConfigError> {
    if cfg.variant != PNetVariant::Net02 {
        return Err(ConfigError::Net02 {
            message: "config targets the convolutional variant".into(),
        });
    }
    if cfg.h != 1 || cfg.w != 1 {
        return Err(ConfigError::Net02 {
            message: format!("input must be a vector (1x1xc), got {}x{}", cfg.h, cfg.w),
        });
    }
    if cfg.c == 0 || cfg.k1 == 0 || cfg.k2 == 0 {
        return Err(ConfigError::Net02 {
            message: "c, k1 and k2 must be at least 1".into(),
        });
    }

    let size = |level: u64| cfg.c << level;

    let mut layers: Vec<LayerSpec> = Vec::with_capacity(44);
    let fc = |name: String, input: &str, out: u64| {
        unary(
            name,
            input,
            LayerParams::Fc {
                out_features: out,
                has_bias: true,
            },
        )
    };
    let softmax = |name: String, input: &str| unary(name, input, LayerParams::Softmax);

    let mut trunk: String = INPUT_NAME.into();

    for level in 0..5u64 {
        let p = |suffix: &str| format!("l{level}_{suffix}");
        let v = size(level);

        layers.push(fc(p("fc_same"), &trunk, v));
        if level > 0 {
            layers.push(softmax(p("sm_same"), &p("fc_same")));
        }

        layers.push(fc(p("fc_k1"), &trunk, cfg.k1));
        if level % 2 == 0 {
            layers.push(softmax(p("sm_k1"), &p("fc_k1")));
        }

        layers.push(fc(p("fc_k2"), &trunk, cfg.k2));
        if level == 0 || level == 1 || level == 3 {
            layers.push(softmax(p("sm_k2"), &p("fc_k2")));
        }

        if level == 2 {
            // classifier funnel k2 -> k1 with its own softmax
            layers.push(fc(p("fc_k2_k1"), &p("fc_k2"), cfg.k1));
            layers.push(softmax(p("sm_k2_k1"), &p("fc_k2_k1")));
        }
        if level == 4 {
            // same-size transform at k2
            layers.push(fc(p("fc_k2_k2"), &p("fc_k2"), cfg.k2));
        }

        if level >= 1 {
            layers.push(fc(p("fc_half"), &trunk, size(level - 1)));
        }
        if level <= 2 {
            layers.push(fc(p("fc_quad"), &trunk, size(level + 2)));
        }
        if level >= 2 {
            layers.push(fc(p("fc_quarter"), &trunk, size(level - 2)));
        }
        if level == 4 {
            let base = p("fc_base");
            layers.push(fc(base.clone(), &trunk, size(0)));
            layers.push(softmax(p("sm_base"), &base));
        }

        if level < 4 {
            let expand = p("fc_expand");
            layers.push(fc(expand.clone(), &trunk, size(level + 1)));
            trunk = expand;
        }
    }

    Ok(NetworkDef {
        name: cfg.label(),
        input_shape: TensorShape::new(1, 1, cfg.c),
        layers,
    })
}
