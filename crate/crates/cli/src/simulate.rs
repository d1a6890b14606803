use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use jointrecon::acquisition::{simulate, simulate_mixture, MaskSpec, MixturePrior, PhantomSpec};

use crate::config::{layered, parse_mask, parse_shape};
use crate::error::{CliError, CliResult};
use crate::store::{write_dataset, Command, RunManifest};

/// Contents of a `simulate --spec` file; every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub phantom: PhantomSpec,
    pub mask: MaskSpec,
    /// Draw the object from this Gaussian mixture inside `crop` instead of
    /// rendering random ellipses over the whole grid.
    pub prior: Option<MixturePrior>,
    pub crop: Option<(usize, usize)>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { phantom: PhantomSpec::default(), mask: MaskSpec::CARTESIAN_4X, prior: None, crop: None }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON simulation spec (phantom, mask, prior, crop).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Re-run exactly what an earlier manifest describes.
    #[arg(long, conflicts_with = "spec")]
    pub manifest: Option<PathBuf>,
    /// Seed of every random draw (phantom, coils, noise, random masks).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid size, e.g. 128x96.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<(usize, usize)>,
    /// Number of receive coils.
    #[arg(long)]
    pub coils: Option<usize>,
    /// Std of the complex Gaussian noise added to measured k-space.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Sampling pattern, e.g. cartesian:4, gaussian:4, radial:45.
    #[arg(long, value_parser = parse_mask)]
    pub mask: Option<MaskSpec>,
    /// Draw the object from the default Gaussian-mixture prior.
    #[arg(long)]
    pub mixture: bool,
    /// Object support / score crop for mixture phantoms, e.g. 64x64.
    #[arg(long, value_parser = parse_shape)]
    pub crop: Option<(usize, usize)>,
}

fn resolve(args: &SimulateArgs) -> CliResult<SimulationSpec> {
    let mut spec = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            m.expect(Command::Simulate, path)?;
            let phantom = m.phantom.ok_or_else(|| CliError::validation("manifest has no phantom spec"))?;
            let mask = m.mask.ok_or_else(|| CliError::validation("manifest has no mask spec"))?;
            SimulationSpec { phantom, mask, prior: m.prior, crop: m.crop }
        }
        None => layered(&SimulationSpec::default(), args.spec.as_deref())?,
    };
    if let Some(seed) = args.seed {
        spec.phantom.seed = seed;
        if let MaskSpec::Gaussian { seed: s, .. } = &mut spec.mask {
            *s = seed;
        }
    }
    if let Some((h, w)) = args.shape {
        (spec.phantom.height, spec.phantom.width) = (h, w);
    }
    if let Some(c) = args.coils {
        spec.phantom.coils = c;
    }
    if let Some(n) = args.noise_std {
        spec.phantom.noise_std = n;
    }
    if let Some(m) = args.mask {
        spec.mask = m;
    }
    if args.mixture && spec.prior.is_none() {
        spec.prior = Some(MixturePrior::default());
    }
    if args.crop.is_some() {
        spec.crop = args.crop;
    }
    if spec.prior.is_some() && spec.crop.is_none() {
        return Err(CliError::validation("a mixture phantom needs a crop (--crop HxW)"));
    }
    Ok(spec)
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let spec = resolve(args)?;
    let ds = match (&spec.prior, spec.crop) {
        (Some(prior), Some(crop)) => simulate_mixture::<f64>(&spec.phantom, &spec.mask, prior, crop)?,
        _ => simulate::<f64>(&spec.phantom, &spec.mask)?,
    };
    let outputs = write_dataset(&args.out, &ds)?;
    let manifest = RunManifest {
        phantom: Some(spec.phantom.clone()),
        mask: Some(spec.mask),
        prior: spec.prior.clone(),
        crop: spec.crop,
        inputs: args.spec.iter().chain(&args.manifest).cloned().collect(),
        outputs,
        ..RunManifest::new(Command::Simulate, spec.phantom.seed)
    };
    manifest.write_dir(&args.out)?;
    print_summary(&args.out, &spec, ds.mask.acceleration());
    Ok(())
}

fn print_summary(out: &Path, spec: &SimulationSpec, accel: f64) {
    println!(
        "simulated {}x{} phantom, {} coils, {} (acceleration {accel:.2}) -> {}",
        spec.phantom.height,
        spec.phantom.width,
        spec.phantom.coils,
        spec.mask.label(),
        out.display()
    );
}
