//! Counting-formula falsification: every closed-form metric must agree
//! exactly with a brute-force loop-nest counter that shares no code with
//! the library. The counters below literally iterate the work a naive
//! implementation of each layer would perform, incrementing by one.

use previous_core::metrics::{
    layer_mem_ops, layer_ops, layer_weights, MetricsOptions,
};
use previous_core::netdef::{
    infer_shapes, EltwiseFn, LayerParams, LayerSpec, NetworkDef, PoolFn, PoolWindow, TensorShape,
};

// Test-local generator so the randomized cases are reproducible and do not
// depend on the library's RNG.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next() % (hi - lo + 1)
    }

    fn flip(&mut self) -> bool {
        self.next() % 2 == 0
    }
}

// ---------------------------------------------------------------------------
// Loop-nest oracles
// ---------------------------------------------------------------------------

fn spatial_out(extent: u64, kernel: u64, stride: u64, pad: u64) -> u64 {
    (extent + 2 * pad - kernel) / stride + 1
}

#[allow(clippy::too_many_arguments)]
fn oracle_conv_ops(
    k: u64,
    c_in: u64,
    groups: u64,
    n: u64,
    h_out: u64,
    w_out: u64,
    bias: bool,
    count_bias: bool,
) -> u64 {
    let mut count = 0u64;
    for _kernel in 0..n {
        for _y in 0..h_out {
            for _x in 0..w_out {
                for _c in 0..(c_in / groups) {
                    for _i in 0..k {
                        for _j in 0..k {
                            count += 1; // one MAC
                        }
                    }
                }
                if bias && count_bias {
                    count += 1; // bias accumulate
                }
            }
        }
    }
    count
}

fn oracle_conv_weights(k: u64, c_in: u64, groups: u64, n: u64, bias: bool) -> u64 {
    let mut count = 0u64;
    for _kernel in 0..n {
        for _c in 0..(c_in / groups) {
            for _i in 0..k {
                for _j in 0..k {
                    count += 1;
                }
            }
        }
        if bias {
            count += 1;
        }
    }
    count
}

fn oracle_fc_ops(n_in: u64, n_out: u64, bias: bool, count_bias: bool) -> u64 {
    let mut count = 0u64;
    for _o in 0..n_out {
        for _i in 0..n_in {
            count += 1;
        }
        if bias && count_bias {
            count += 1;
        }
    }
    count
}

fn oracle_fc_weights(n_in: u64, n_out: u64, bias: bool) -> u64 {
    let mut count = 0u64;
    for _o in 0..n_out {
        for _i in 0..n_in {
            count += 1;
        }
        if bias {
            count += 1;
        }
    }
    count
}

fn oracle_pool_ops(k: u64, h_out: u64, w_out: u64, c: u64) -> u64 {
    let mut count = 0u64;
    for _c in 0..c {
        for _y in 0..h_out {
            for _x in 0..w_out {
                for _i in 0..k {
                    for _j in 0..k {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

fn oracle_elements(s: TensorShape) -> u64 {
    let mut count = 0u64;
    for _ in 0..s.h {
        for _ in 0..s.w {
            for _ in 0..s.c {
                count += 1;
            }
        }
    }
    count
}

/// Memory-access oracle: one access per input element read (or per im2col
/// matrix entry for convolutions under that convention), per weight read,
/// and per output element written.
fn oracle_mem_ops(
    layer: &LayerSpec,
    ins: &[TensorShape],
    out: TensorShape,
    weights: u64,
    im2col: bool,
) -> u64 {
    let mut count = 0u64;
    match &layer.params {
        LayerParams::Conv {
            kernel_h,
            kernel_w,
            groups,
            ..
        } if im2col => {
            for _g in 0..*groups {
                for _pos in 0..(out.h * out.w) {
                    for _c in 0..(ins[0].c / groups) {
                        for _i in 0..*kernel_h {
                            for _j in 0..*kernel_w {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
        _ => {
            for s in ins {
                count += oracle_elements(*s);
            }
        }
    }
    count += weights;
    count += oracle_elements(out);
    count
}

// ---------------------------------------------------------------------------
// Random layer construction (all dims small enough to loop over)
// ---------------------------------------------------------------------------

struct Case {
    layer: LayerSpec,
    ins: Vec<TensorShape>,
    out: TensorShape,
}

fn random_case(rng: &mut Lcg) -> Case {
    let h = rng.range(1, 8);
    let w = rng.range(1, 8);
    let c = rng.range(1, 8);
    let input = TensorShape::new(h, w, c);

    match rng.range(0, 8) {
        0 => {
            // conv: kernel must fit the padded extent; groups divide C and N
            let pad = rng.range(0, 2);
            let k = rng.range(1, (h.min(w) + 2 * pad).min(8));
            let stride = rng.range(1, 3);
            let divisors: Vec<u64> = (1..=c).filter(|d| c % d == 0).collect();
            let groups = divisors[rng.range(0, divisors.len() as u64 - 1) as usize];
            let n = groups * rng.range(1, 8);
            let bias = rng.flip();
            let layer = LayerSpec::new(
                "conv",
                &["input"],
                LayerParams::Conv {
                    kernel_h: k,
                    kernel_w: k,
                    stride,
                    pad,
                    num_kernels: n,
                    groups,
                    has_bias: bias,
                },
            );
            let out = TensorShape::new(
                spatial_out(h, k, stride, pad),
                spatial_out(w, k, stride, pad),
                n,
            );
            Case {
                layer,
                ins: vec![input],
                out,
            }
        }
        1 => {
            let n_out = rng.range(1, 8);
            let layer = LayerSpec::new(
                "fc",
                &["input"],
                LayerParams::Fc {
                    out_features: n_out,
                    has_bias: rng.flip(),
                },
            );
            Case {
                layer,
                ins: vec![input],
                out: TensorShape::new(1, 1, n_out),
            }
        }
        2 => {
            let pool_fn = if rng.flip() { PoolFn::Max } else { PoolFn::Avg };
            if rng.flip() {
                let layer = LayerSpec::new(
                    "pool",
                    &["input"],
                    LayerParams::Pool {
                        pool_fn,
                        window: PoolWindow::Global,
                    },
                );
                Case {
                    layer,
                    ins: vec![input],
                    out: TensorShape::new(1, 1, c),
                }
            } else {
                let pad = rng.range(0, 2);
                let k = rng.range(1, (h.min(w) + 2 * pad).min(8));
                let stride = rng.range(1, 3);
                let layer = LayerSpec::new(
                    "pool",
                    &["input"],
                    LayerParams::Pool {
                        pool_fn,
                        window: PoolWindow::Window {
                            kernel_h: k,
                            kernel_w: k,
                            stride,
                            pad,
                        },
                    },
                );
                let out = TensorShape::new(
                    spatial_out(h, k, stride, pad),
                    spatial_out(w, k, stride, pad),
                    c,
                );
                Case {
                    layer,
                    ins: vec![input],
                    out,
                }
            }
        }
        3 => Case {
            layer: LayerSpec::new("relu", &["input"], LayerParams::Relu),
            ins: vec![input],
            out: input,
        },
        4 => Case {
            layer: LayerSpec::new("bn", &["input"], LayerParams::BatchNorm),
            ins: vec![input],
            out: input,
        },
        5 => Case {
            layer: LayerSpec::new(
                "scale",
                &["input"],
                LayerParams::Scale { has_bias: rng.flip() },
            ),
            ins: vec![input],
            out: input,
        },
        6 => {
            let k = rng.range(2, 4) as usize;
            let mut c_total = 0;
            let mut ins = Vec::new();
            for _ in 0..k {
                let ci = rng.range(1, 8);
                c_total += ci;
                ins.push(TensorShape::new(h, w, ci));
            }
            Case {
                layer: LayerSpec::new("cat", &vec!["x"; k], LayerParams::Concat),
                ins,
                out: TensorShape::new(h, w, c_total),
            }
        }
        7 => {
            let k = rng.range(2, 4) as usize;
            let fns = [EltwiseFn::Sum, EltwiseFn::Prod, EltwiseFn::Max];
            Case {
                layer: LayerSpec::new(
                    "elt",
                    &vec!["x"; k],
                    LayerParams::Eltwise {
                        eltwise_fn: fns[rng.range(0, 2) as usize],
                    },
                ),
                ins: vec![input; k],
                out: input,
            }
        }
        _ => {
            let v = TensorShape::new(1, 1, rng.range(1, 8));
            Case {
                layer: LayerSpec::new("sm", &["input"], LayerParams::Softmax),
                ins: vec![v],
                out: v,
            }
        }
    }
}

fn oracle_weights(case: &Case) -> u64 {
    match &case.layer.params {
        LayerParams::Conv {
            kernel_h,
            num_kernels,
            groups,
            has_bias,
            ..
        } => oracle_conv_weights(*kernel_h, case.ins[0].c, *groups, *num_kernels, *has_bias),
        LayerParams::Fc {
            out_features,
            has_bias,
        } => oracle_fc_weights(oracle_elements(case.ins[0]), *out_features, *has_bias),
        LayerParams::BatchNorm => 2 * case.ins[0].c,
        LayerParams::Scale { has_bias } => {
            if *has_bias {
                2 * case.ins[0].c
            } else {
                case.ins[0].c
            }
        }
        _ => 0,
    }
}

fn oracle_ops(case: &Case, count_bias: bool) -> u64 {
    match &case.layer.params {
        LayerParams::Conv {
            kernel_h,
            num_kernels,
            groups,
            has_bias,
            ..
        } => oracle_conv_ops(
            *kernel_h,
            case.ins[0].c,
            *groups,
            *num_kernels,
            case.out.h,
            case.out.w,
            *has_bias,
            count_bias,
        ),
        LayerParams::Fc {
            out_features,
            has_bias,
        } => oracle_fc_ops(
            oracle_elements(case.ins[0]),
            *out_features,
            *has_bias,
            count_bias,
        ),
        LayerParams::Pool { window, .. } => match window {
            PoolWindow::Global => oracle_elements(case.ins[0]),
            PoolWindow::Window { kernel_h, .. } => {
                oracle_pool_ops(*kernel_h, case.out.h, case.out.w, case.out.c)
            }
        },
        LayerParams::Relu => oracle_elements(case.ins[0]),
        LayerParams::BatchNorm => 2 * oracle_elements(case.ins[0]),
        LayerParams::Scale { has_bias } => {
            let n = oracle_elements(case.ins[0]);
            if *has_bias && count_bias {
                2 * n
            } else {
                n
            }
        }
        LayerParams::Eltwise { .. } => {
            let mut count = 0;
            for _extra in 1..case.ins.len() {
                count += oracle_elements(case.out);
            }
            count
        }
        LayerParams::Concat => 0,
        LayerParams::Softmax => 3 * oracle_elements(case.ins[0]),
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[test]
fn thousand_random_layers_match_loop_nest_counts_exactly() {
    let started = std::time::Instant::now();
    let mut rng = Lcg(0x5eed_0001);
    for i in 0..1000 {
        let count_bias = rng.flip();
        let opts = MetricsOptions {
            im2col: false,
            count_bias_ops: count_bias,
        };
        let case = random_case(&mut rng);

        let w = layer_weights(&case.layer, &case.ins).unwrap();
        let ops = layer_ops(&case.layer, &case.ins, case.out, opts).unwrap();
        assert_eq!(
            w,
            oracle_weights(&case),
            "case {i}: weights diverge for {:?}",
            case.layer
        );
        assert_eq!(
            ops,
            oracle_ops(&case, count_bias),
            "case {i}: ops diverge for {:?}",
            case.layer
        );
    }
    assert!(
        started.elapsed() < std::time::Duration::from_secs(10),
        "oracle sweep exceeded its time budget: {:?}",
        started.elapsed()
    );
}

#[test]
fn mem_ops_match_term_by_term_oracle() {
    let mut rng = Lcg(0x5eed_0002);
    for i in 0..1000 {
        let im2col = rng.flip();
        let opts = MetricsOptions {
            im2col,
            count_bias_ops: true,
        };
        let case = random_case(&mut rng);
        let w = layer_weights(&case.layer, &case.ins).unwrap();
        let mem = layer_mem_ops(&case.layer, &case.ins, case.out, w, opts).unwrap();
        assert_eq!(
            mem,
            oracle_mem_ops(&case.layer, &case.ins, case.out, w, im2col),
            "case {i}: mem_ops diverge for {:?}",
            case.layer
        );
    }
}

#[test]
fn pointwise_stride1_convs_invariant_under_im2col() {
    // an unpadded pointwise stride-1 convolution reads each input element
    // exactly once whether or not the input is unrolled
    for h in [1, 3, 7, 14] {
        for c in [1, 4, 64] {
            for n in [1, 8, 128] {
                for groups in [1, c] {
                    let layer = LayerSpec::new(
                        "pw",
                        &["input"],
                        LayerParams::Conv {
                            kernel_h: 1,
                            kernel_w: 1,
                            stride: 1,
                            pad: 0,
                            num_kernels: n * groups,
                            groups,
                            has_bias: true,
                        },
                    );
                    let ins = [TensorShape::new(h, h, c)];
                    let out = TensorShape::new(h, h, n * groups);
                    let w = layer_weights(&layer, &ins).unwrap();
                    let plain =
                        layer_mem_ops(&layer, &ins, out, w, MetricsOptions::default()).unwrap();
                    let unrolled = layer_mem_ops(
                        &layer,
                        &ins,
                        out,
                        w,
                        MetricsOptions {
                            im2col: true,
                            count_bias_ops: true,
                        },
                    )
                    .unwrap();
                    assert_eq!(plain, unrolled, "1x1 conv h={h} c={c} n={n} g={groups}");
                }
            }
        }
    }
}

#[test]
fn im2col_inflation_matches_identity() {
    let mut rng = Lcg(0x5eed_0003);
    let mut pointwise_seen = 0;
    let mut widening_seen = 0;
    for _ in 0..2000 {
        let case = random_case(&mut rng);
        let (k, groups, stride, pad) = match &case.layer.params {
            LayerParams::Conv {
                kernel_h,
                groups,
                stride,
                pad,
                ..
            } => (*kernel_h, *groups, *stride, *pad),
            _ => continue,
        };
        let w = layer_weights(&case.layer, &case.ins).unwrap();
        let plain = layer_mem_ops(&case.layer, &case.ins, case.out, w, MetricsOptions::default())
            .unwrap();
        let unrolled = layer_mem_ops(
            &case.layer,
            &case.ins,
            case.out,
            w,
            MetricsOptions {
                im2col: true,
                count_bias_ops: true,
            },
        )
        .unwrap();

        // the inflated input term is exactly (k·k·C/g)·(H_out·W_out)·g
        let expected_input = (k * k * case.ins[0].c / groups) * (case.out.h * case.out.w) * groups;
        let out_elems = case.out.h * case.out.w * case.out.c;
        assert_eq!(unrolled, expected_input + w + out_elems);

        if k == 1 && stride == 1 && pad == 0 {
            pointwise_seen += 1;
            assert_eq!(plain, unrolled);
        }
        if k > 1 && stride == 1 {
            // a widening receptive field can only add re-reads
            widening_seen += 1;
            assert!(unrolled >= plain);
        }
    }
    assert!(pointwise_seen > 0, "generator never produced 1x1 convs");
    assert!(widening_seen > 10, "generator never produced k>1 convs");
}

#[test]
fn metrics_never_shrink_when_input_grows() {
    // Growing any input dimension (channels stepped by `groups` to keep the
    // layer valid) must not decrease any metric.
    let mut rng = Lcg(0x5eed_0004);
    let opts = MetricsOptions::default();
    let mut checked = 0;
    for _ in 0..600 {
        let case = random_case(&mut rng);
        if case.ins.len() != 1 {
            continue;
        }
        let base_in = case.ins[0];
        let step_c = match &case.layer.params {
            LayerParams::Conv { groups, .. } => *groups,
            _ => 1,
        };
        let grown = [
            TensorShape::new(base_in.h + 1, base_in.w, base_in.c),
            TensorShape::new(base_in.h, base_in.w + 1, base_in.c),
            TensorShape::new(base_in.h, base_in.w, base_in.c + step_c),
        ];
        for bigger in grown {
            // recompute the output for the grown input
            let net = NetworkDef {
                name: "t".into(),
                input_shape: bigger,
                layers: vec![case.layer.clone()],
            };
            let Ok(shaped) = infer_shapes(&net) else {
                continue;
            };
            let out2 = shaped.output_shape(&case.layer.name).unwrap();
            let ins2 = [bigger];

            let w1 = layer_weights(&case.layer, &case.ins).unwrap();
            let w2 = layer_weights(&case.layer, &ins2).unwrap();
            let ops1 = layer_ops(&case.layer, &case.ins, case.out, opts).unwrap();
            let ops2 = layer_ops(&case.layer, &ins2, out2, opts).unwrap();
            let mem1 = layer_mem_ops(&case.layer, &case.ins, case.out, w1, opts).unwrap();
            let mem2 = layer_mem_ops(&case.layer, &ins2, out2, w2, opts).unwrap();
            assert!(w2 >= w1, "weights shrank: {:?}", case.layer);
            assert!(ops2 >= ops1, "ops shrank: {:?}", case.layer);
            assert!(mem2 >= mem1, "mem_ops shrank: {:?}", case.layer);
            checked += 1;
        }
    }
    assert!(checked > 500, "not enough grown cases exercised: {checked}");
}

#[test]
fn inferred_shapes_agree_with_oracle_windows() {
    let mut rng = Lcg(0x5eed_0005);
    for _ in 0..500 {
        let case = random_case(&mut rng);
        if case.ins.len() != 1 {
            continue;
        }
        let net = NetworkDef {
            name: "t".into(),
            input_shape: case.ins[0],
            layers: vec![case.layer.clone()],
        };
        let shaped = infer_shapes(&net).unwrap();
        assert_eq!(
            shaped.output_shape(&case.layer.name).unwrap(),
            case.out,
            "shape inference disagrees with the oracle for {:?}",
            case.layer
        );
    }
}
