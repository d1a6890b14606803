//! On-disk layout of datasets and reconstructions, and the run manifest
//! written next to every output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use jointrecon::acquisition::{Dataset, MaskSpec, MixturePrior, PhantomSpec};
use jointrecon::diffusion::NetArch;
use jointrecon::eval::{Method, TvParams};
use jointrecon::image::{CoilSet, KSpaceData, RealImage, SamplingMask};
use jointrecon::sampler::ReconConfig;
use jointrecon::tensor_io::{tensor_read, tensor_write, Tensor};

use crate::config::{read_json, write_json};
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const IMAGE: &str = "image.tnsr";
pub const COILS: &str = "coils.tnsr";
pub const MASK: &str = "mask.tnsr";
pub const KSPACE_FULL: &str = "kspace_full.tnsr";
pub const KSPACE: &str = "kspace.tnsr";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Reconstruct,
}

/// Image prior used by a diffusion run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreSpec {
    Zero,
    Mixture { prior: MixturePrior },
    Gaussian { mean: PathBuf, var: PathBuf },
    Net { weights: PathBuf, arch: NetArch },
}

/// Everything needed to redo a run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
    /// Mixture prior the phantom was drawn from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<MixturePrior>,
    /// Region the phantom occupies; also the default score-model crop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon: Option<ReconConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv: Option<TvParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreSpec>,
    /// Wall-clock time of the reconstruction itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: Command, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed,
            phantom: None,
            mask: None,
            prior: None,
            crop: None,
            method: None,
            recon: None,
            tv: None,
            score: None,
            runtime_s: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    pub fn read_dir(dir: &Path) -> CliResult<Self> {
        Self::read(&dir.join(MANIFEST))
    }

    pub fn write_dir(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    pub fn expect(&self, command: Command, path: &Path) -> CliResult<()> {
        if self.command != command {
            return Err(CliError::validation(format!(
                "{}: manifest of a {:?} run, expected {command:?}",
                path.display(),
                self.command
            )));
        }
        Ok(())
    }
}

fn read(dir: &Path, name: &str) -> CliResult<Tensor<f64>> {
    let path = dir.join(name);
    tensor_read(&path).map_err(|e| CliError::from(e).context(path.display()))
}

fn write(dir: &Path, name: &str, t: &Tensor<f64>) -> CliResult<()> {
    let path = dir.join(name);
    tensor_write(&path, t).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::from(e).context(dir.display()))
}

pub fn write_dataset(dir: &Path, ds: &Dataset<f64>) -> CliResult<Vec<String>> {
    create_dir(dir)?;
    write(dir, IMAGE, &Tensor::Real(ds.image.clone()))?;
    write(dir, COILS, &Tensor::Coils(ds.coils.clone()))?;
    write(dir, MASK, &Tensor::Real(ds.mask.to_image()))?;
    write(dir, KSPACE_FULL, &Tensor::Coils(ds.full.to_stack()))?;
    write(dir, KSPACE, &Tensor::Coils(ds.measured.to_stack()))?;
    Ok([IMAGE, COILS, MASK, KSPACE_FULL, KSPACE].map(String::from).to_vec())
}

/// The measured side of a dataset: all a reconstruction may look at.
pub fn read_measured(dir: &Path) -> CliResult<KSpaceData<f64>> {
    let mask = SamplingMask::from_image(&read(dir, MASK)?.into_real()?)?;
    let channels = read(dir, KSPACE)?.into_coils()?.into_coils();
    Ok(KSpaceData::new(channels, mask).map_err(|e| CliError::from(e).context(dir.join(KSPACE).display()))?)
}

/// Ground truth needed for scoring.
pub struct Truth {
    pub image: RealImage<f64>,
    pub full: KSpaceData<f64>,
}

pub fn read_truth(dir: &Path) -> CliResult<Truth> {
    let image = read(dir, IMAGE)?.into_real()?;
    let channels = read(dir, KSPACE_FULL)?.into_coils()?.into_coils();
    let (h, w) = image.shape();
    let full = KSpaceData::new(channels, SamplingMask::full(h, w))?;
    Ok(Truth { image, full })
}

pub fn write_recon(dir: &Path, image: &RealImage<f64>, coils: &CoilSet<f64>) -> CliResult<Vec<String>> {
    create_dir(dir)?;
    write(dir, IMAGE, &Tensor::Real(image.clone()))?;
    write(dir, COILS, &Tensor::Coils(coils.clone()))?;
    Ok(vec![IMAGE.into(), COILS.into()])
}

pub fn read_recon(dir: &Path) -> CliResult<(RealImage<f64>, CoilSet<f64>)> {
    Ok((read(dir, IMAGE)?.into_real()?, read(dir, COILS)?.into_coils()?))
}

pub fn read_real(path: &Path) -> CliResult<RealImage<f64>> {
    let t = tensor_read(path).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(t.into_real()?)
}
