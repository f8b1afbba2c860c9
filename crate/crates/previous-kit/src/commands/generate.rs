use std::path::PathBuf;

use anyhow::anyhow;
use clap::{Args, ValueEnum};

use previous_core::netdef::serialize_network;
use previous_core::previousnet::{generate, standard_suite, PNetConfig};

use crate::{domain, input, write_text, CmdResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    /// Convolutional characterization network.
    #[value(name = "01")]
    Net01,
    /// Fully-connected characterization network.
    #[value(name = "02")]
    Net02,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Emit the full standard measurement suite.
    #[arg(long, conflicts_with_all = ["variant", "height", "width", "channels"])]
    pub suite: bool,
    #[arg(long)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub height: Option<u64>,
    #[arg(long)]
    pub width: Option<u64>,
    #[arg(long)]
    pub channels: Option<u64>,
    /// Small head size for the fully-connected variant.
    #[arg(long, default_value_t = 10)]
    pub k1: u64,
    /// Large head size for the fully-connected variant.
    #[arg(long, default_value_t = 1000)]
    pub k2: u64,
    /// Directory the network JSON files are written into.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(args: GenerateArgs) -> CmdResult {
    let configs: Vec<PNetConfig> = if args.suite {
        standard_suite()
    } else {
        let variant = args
            .variant
            .ok_or_else(|| input(anyhow!("pass --suite or --variant")))?;
        let channels = args
            .channels
            .ok_or_else(|| input(anyhow!("--channels is required with --variant")))?;
        let cfg = match variant {
            VariantArg::Net01 => {
                let h = args
                    .height
                    .ok_or_else(|| input(anyhow!("--height is required for variant 01")))?;
                let w = args
                    .width
                    .ok_or_else(|| input(anyhow!("--width is required for variant 01")))?;
                PNetConfig::net01(h, w, channels)
            }
            VariantArg::Net02 => PNetConfig::net02(channels, args.k1, args.k2),
        };
        vec![cfg]
    };

    for cfg in &configs {
        let net = generate(cfg).map_err(domain)?;
        let path = args.out_dir.join(format!("{}.json", cfg.label()));
        write_text(&path, &serialize_network(&net))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
