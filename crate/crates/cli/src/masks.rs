use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use jointrecon::acquisition::MaskSpec;
use jointrecon::tensor_io::{tensor_write, Tensor};

use crate::config::{parse_mask, parse_shape};
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct MasksArgs {
    /// Sampling pattern, e.g. cartesian:4, gaussian:4, radial:45.
    #[arg(long, value_parser = parse_mask)]
    pub mask: MaskSpec,
    /// Grid size, e.g. 128x96.
    #[arg(long, value_parser = parse_shape, default_value = "128x96")]
    pub shape: (usize, usize),
    /// Write the mask as a 0/1 real tensor.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the mask as text ('#' sampled).
    #[arg(long)]
    pub ascii: bool,
}

#[derive(Serialize)]
struct Summary {
    label: String,
    spec: MaskSpec,
    height: usize,
    width: usize,
    selected: usize,
    acceleration: f64,
}

pub fn run(args: &MasksArgs) -> CliResult<()> {
    let mask = args.mask.build(args.shape)?;
    if let Some(out) = &args.out {
        tensor_write(out, &Tensor::Real(mask.to_image::<f64>())).map_err(|e| CliError::from(e).context(out.display()))?;
    }
    if args.ascii {
        for r in 0..mask.height() {
            let line: String = (0..mask.width()).map(|c| if mask.get(r, c) { '#' } else { '.' }).collect();
            println!("{line}");
        }
    }
    let summary = Summary {
        label: args.mask.label(),
        spec: args.mask,
        height: mask.height(),
        width: mask.width(),
        selected: mask.selected(),
        acceleration: mask.acceleration(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}
