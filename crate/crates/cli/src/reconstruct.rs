use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use log::info;
use rayon::prelude::*;

use jointrecon::acquisition::MixturePrior;
use jointrecon::coil_estimation::{zf_coil_maps, CoilNormalization};
use jointrecon::diffusion::{GaussianPriorScore, NetArch, ScoreFunction, ScoreNet, ZeroScore, load_weights};
use jointrecon::eval::{tv_reconstruct, zf_reconstruct, Method, TvParams};
use jointrecon::forward_model::ForwardModel;
use jointrecon::image::{CoilSet, KSpaceData, RealImage};
use jointrecon::presets::{Contrast, PatternKind};
use jointrecon::sampler::{reconstruct, ReconConfig};

use crate::config::{layered, parse_shape, read_json};
use crate::error::{CliError, CliResult};
use crate::store::{read_measured, read_real, write_recon, Command, RunManifest, ScoreSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Diffusion,
    Tv,
    Zf,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Diffusion => Method::Diffusion,
            MethodArg::Tv => Method::Tv,
            MethodArg::Zf => Method::Zf,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    /// Gaussian mixture the dataset was drawn from (default prior if the
    /// dataset records none).
    Mixture,
    /// Independent Gaussian pixels; needs --prior-mean and --prior-var.
    Gaussian,
    /// Trained score network; needs --weights.
    Net,
    /// No prior at all.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    SquaredNorm,
    Norm,
    None,
}

impl From<NormArg> for CoilNormalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::SquaredNorm => CoilNormalization::SquaredNorm,
            NormArg::Norm => CoilNormalization::Norm,
            NormArg::None => CoilNormalization::None,
        }
    }
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Dataset directory; repeat to reconstruct several cases.
    #[arg(long = "data")]
    pub data: Vec<PathBuf>,
    /// Output directory (one subdirectory per dataset when several).
    #[arg(long)]
    pub out: PathBuf,
    /// Reconstruction method (diffusion by default).
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// JSON file overriding the method's defaults key by key.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-run exactly what an earlier reconstruction manifest describes.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub score: Option<ScoreArg>,
    /// Score-network weights ("SDW1").
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Score-network architecture as JSON (defaults to the stock one).
    #[arg(long)]
    pub arch: Option<PathBuf>,
    /// Prior mean image (TNSR) for --score gaussian.
    #[arg(long)]
    pub prior_mean: Option<PathBuf>,
    /// Prior per-pixel variance image (TNSR) for --score gaussian.
    #[arg(long)]
    pub prior_var: Option<PathBuf>,
    /// Contrast whose tuned schedules seed the defaults.
    #[arg(long, value_enum, default_value = "pd")]
    pub contrast: ContrastArg,
    /// Number of reverse-diffusion steps N.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Seed of the sampler's noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Crop seen by the score model, e.g. 64x64.
    #[arg(long, value_parser = parse_shape)]
    pub crop: Option<(usize, usize)>,
    /// Global rescaling of the initial coil maps.
    #[arg(long, value_enum)]
    pub coil_normalization: Option<NormArg>,
    /// Datasets reconstructed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ContrastArg {
    Pd,
    Pdfs,
}

/// One fully resolved reconstruction.
struct Job {
    data: PathBuf,
    out: PathBuf,
    method: Method,
    recon: Option<ReconConfig>,
    tv: Option<TvParams>,
    score: Option<ScoreSpec>,
}

fn score_spec(args: &ReconstructArgs, dataset: Option<&RunManifest>) -> CliResult<ScoreSpec> {
    Ok(match args.score.unwrap_or(ScoreArg::Mixture) {
        ScoreArg::Zero => ScoreSpec::Zero,
        ScoreArg::Mixture => ScoreSpec::Mixture {
            prior: dataset.and_then(|m| m.prior.clone()).unwrap_or_else(MixturePrior::default),
        },
        ScoreArg::Gaussian => match (&args.prior_mean, &args.prior_var) {
            (Some(mean), Some(var)) => ScoreSpec::Gaussian { mean: mean.clone(), var: var.clone() },
            _ => return Err(CliError::validation("--score gaussian needs --prior-mean and --prior-var")),
        },
        ScoreArg::Net => {
            let weights = args.weights.clone().ok_or_else(|| CliError::validation("--score net needs --weights"))?;
            let arch = match &args.arch {
                Some(p) => read_json(p)?,
                None => NetArch::default(),
            };
            ScoreSpec::Net { weights, arch }
        }
    })
}

fn plan(args: &ReconstructArgs) -> CliResult<Vec<Job>> {
    let previous = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            m.expect(Command::Reconstruct, path)?;
            Some(m)
        }
        None => None,
    };
    let data: Vec<PathBuf> = if !args.data.is_empty() {
        args.data.clone()
    } else {
        previous.as_ref().map(|m| m.inputs.clone()).unwrap_or_default()
    };
    if data.is_empty() {
        return Err(CliError::validation("no dataset given (--data DIR)"));
    }
    let method = match (args.method, &previous) {
        (Some(m), _) => m.into(),
        (None, Some(p)) => p.method.ok_or_else(|| CliError::validation("manifest records no method"))?,
        (None, None) => Method::Diffusion,
    };
    let contrast = match args.contrast {
        ContrastArg::Pd => Contrast::Pd,
        ContrastArg::Pdfs => Contrast::Pdfs,
    };
    let many = data.len() > 1;
    data.iter()
        .enumerate()
        .map(|(k, dir)| {
            let dataset = RunManifest::read_dir(dir).ok();
            let out = if many {
                let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| format!("case-{k}"));
                args.out.join(name)
            } else {
                args.out.clone()
            };
            let mut job = Job { data: dir.clone(), out, method, recon: None, tv: None, score: None };
            match method {
                Method::Diffusion => {
                    let base = match previous.as_ref().and_then(|p| p.recon.clone()) {
                        Some(r) => r,
                        None => {
                            let kind = dataset.as_ref().and_then(|m| m.mask).map_or(PatternKind::Cartesian, |m| m.pattern());
                            ReconConfig { crop: dataset.as_ref().and_then(|m| m.crop), ..ReconConfig::preset(kind, contrast) }
                        }
                    };
                    let mut cfg = layered(&base, args.config.as_deref())?;
                    if let Some(n) = args.steps {
                        cfg.steps = n;
                    }
                    if let Some(s) = args.seed {
                        cfg.seed = s;
                    }
                    if args.crop.is_some() {
                        cfg.crop = args.crop;
                    }
                    if let Some(n) = args.coil_normalization {
                        cfg.coil_normalization = n.into();
                    }
                    cfg.validate()?;
                    job.score = Some(match (&previous, args.score) {
                        (Some(p), None) => p.score.clone().ok_or_else(|| CliError::validation("manifest records no score"))?,
                        _ => score_spec(args, dataset.as_ref())?,
                    });
                    job.recon = Some(cfg);
                }
                Method::Tv => {
                    let base = previous.as_ref().and_then(|p| p.tv.clone()).unwrap_or_default();
                    let mut tv = layered(&base, args.config.as_deref())?;
                    if let Some(n) = args.steps {
                        tv.iterations = n;
                    }
                    if let Some(n) = args.coil_normalization {
                        tv.coil_normalization = n.into();
                    }
                    tv.validate()?;
                    job.tv = Some(tv);
                }
                Method::Zf => {}
            }
            Ok(job)
        })
        .collect()
}

fn build_score(spec: &ScoreSpec, shape: (usize, usize)) -> CliResult<Box<dyn ScoreFunction<f64>>> {
    Ok(match spec {
        ScoreSpec::Zero => Box::new(ZeroScore),
        ScoreSpec::Mixture { prior } => Box::new(prior.score::<f64>(shape)?),
        ScoreSpec::Gaussian { mean, var } => {
            let (m, v) = (read_real(mean)?, read_real(var)?);
            if m.shape() != shape {
                return Err(CliError::validation(format!("prior mean is {:?}, the score sees {shape:?}", m.shape())));
            }
            Box::new(GaussianPriorScore::new(m, v)?)
        }
        ScoreSpec::Net { weights, arch } => {
            let w = load_weights(weights, arch.clone()).map_err(|e| CliError::from(e).context(weights.display()))?;
            Box::new(ScoreNet::new(w))
        }
    })
}

fn check_finite(image: &RealImage<f64>, coils: &CoilSet<f64>) -> CliResult<()> {
    if !image.is_finite() || !coils.is_finite() {
        return Err(CliError::Numerical("non-finite values in the reconstruction".into()));
    }
    Ok(())
}

fn execute(job: &Job) -> CliResult<f64> {
    let y: KSpaceData<f64> = read_measured(&job.data)?;
    let t = Instant::now();
    let (image, coils) = match job.method {
        Method::Diffusion => {
            let cfg = job.recon.as_ref().expect("diffusion job has a config");
            let shape = cfg.crop.unwrap_or(y.shape());
            let score = build_score(job.score.as_ref().expect("diffusion job has a score"), shape)?;
            let out = reconstruct(&y, cfg, &score)?;
            (out.image, out.coils)
        }
        Method::Tv => {
            let out = tv_reconstruct(&y, job.tv.as_ref().expect("tv job has parameters"))?;
            (out.image, out.coils)
        }
        Method::Zf => (zf_reconstruct(&y), zf_coil_maps(&ForwardModel::new(y.mask().clone()), &y)?),
    };
    let seconds = t.elapsed().as_secs_f64();
    check_finite(&image, &coils)?;
    let outputs = write_recon(&job.out, &image, &coils)?;
    let manifest = RunManifest {
        method: Some(job.method),
        recon: job.recon.clone(),
        tv: job.tv.clone(),
        score: job.score.clone(),
        runtime_s: Some(seconds),
        inputs: vec![job.data.clone()],
        outputs,
        ..RunManifest::new(Command::Reconstruct, job.recon.as_ref().map_or(0, |c| c.seed))
    };
    manifest.write_dir(&job.out)?;
    Ok(seconds)
}

fn label(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(args: &ReconstructArgs) -> CliResult<()> {
    if args.jobs == 0 {
        return Err(CliError::validation("--jobs must be >= 1"));
    }
    let jobs = plan(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::validation(e.to_string()))?;
    let results: Vec<CliResult<f64>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                info!("reconstructing {} with {:?}", label(&job.data), job.method);
                execute(job).map_err(|e| e.context(label(&job.data)))
            })
            .collect()
    });
    let mut first_error = None;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(s) => println!("{}: {:?} reconstruction in {s:.2} s -> {}", label(&job.data), job.method, label(&job.out)),
            Err(e) => {
                eprintln!("error: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}
