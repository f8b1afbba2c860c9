use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;

use previous_core::netdef::validate;

use crate::{domain, load_network, CmdResult};

#[derive(Args)]
pub struct InspectArgs {
    /// Network definition (JSON).
    pub network: PathBuf,
    /// Emit the shape report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: InspectArgs) -> CmdResult {
    let net = load_network(&args.network)?;
    let violations = validate(&net);
    if !violations.is_empty() {
        for v in &violations {
            println!("{}: {}: {}", v.layer, v.rule, v.message);
        }
        return Err(domain(anyhow!(
            "network {} failed validation with {} violation(s)",
            net.name,
            violations.len()
        )));
    }
    let shaped = crate::shape_network(&net)?;

    if args.json {
        let layers: Vec<serde_json::Value> = net
            .layers
            .iter()
            .map(|layer| {
                let out = shaped.output_shape(&layer.name).expect("validated layer");
                serde_json::json!({
                    "name": layer.name,
                    "kind": layer.kind().as_str(),
                    "output": {"h": out.h, "w": out.w, "c": out.c},
                })
            })
            .collect();
        let doc = serde_json::json!({
            "network": net.name,
            "input": {"h": net.input_shape.h, "w": net.input_shape.w, "c": net.input_shape.c},
            "layers": layers,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("static json"));
        return Ok(());
    }

    println!(
        "network {} (input {}, {} layers)",
        net.name,
        net.input_shape,
        net.layers.len()
    );
    let name_width = net
        .layers
        .iter()
        .map(|l| l.name.len())
        .max()
        .unwrap_or(0)
        .max(5);
    for layer in &net.layers {
        let out = shaped.output_shape(&layer.name).expect("validated layer");
        println!(
            "{:<name_width$}  {:<9}  {}",
            layer.name,
            layer.kind().as_str(),
            out
        );
    }
    Ok(())
}
