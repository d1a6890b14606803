use std::path::PathBuf;

use clap::Args;

use jointrecon::eval::{fit_intensity_map, nullspace_residual, psnr, MetricRecord};
use jointrecon::image::{CropWindow, RealImage};

use crate::config::write_json;
use crate::error::{CliError, CliResult};
use crate::store::{read_recon, read_truth, Command, RunManifest};

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset directory holding the ground truth.
    #[arg(long)]
    pub data: PathBuf,
    /// Reconstruction directory; repeat to compare methods.
    #[arg(long = "recon", required = true)]
    pub recon: Vec<PathBuf>,
    /// Fit a monotone intensity map from reconstruction to ground truth
    /// before scoring.
    #[arg(long)]
    pub correct_intensity: bool,
    /// Where to write the metric records (JSON array).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Case id in the records; the dataset directory name by default.
    #[arg(long)]
    pub case_id: Option<String>,
}

fn corrected(x: &RealImage<f64>, gt: &RealImage<f64>) -> CliResult<RealImage<f64>> {
    let pairs: Vec<(f64, f64)> = x.as_slice().iter().copied().zip(gt.as_slice().iter().copied()).collect();
    Ok(fit_intensity_map(&pairs)?.apply_image(x))
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let dataset = RunManifest::read_dir(&args.data)?;
    dataset.expect(Command::Simulate, &args.data)?;
    let truth = read_truth(&args.data)?;
    let (h, w) = truth.image.shape();
    let window = match dataset.crop {
        Some(c) => CropWindow::new((h, w), c)?,
        None => CropWindow::identity(h, w),
    };
    let gt = window.crop(&truth.image)?;
    let case_id = args.case_id.clone().unwrap_or_else(|| {
        args.data.file_name().map_or_else(|| args.data.display().to_string(), |n| n.to_string_lossy().into_owned())
    });
    let mask_spec = dataset.mask.map_or_else(|| "unknown".into(), |m| m.label());

    let mut records = Vec::new();
    for dir in &args.recon {
        let m = RunManifest::read_dir(dir)?;
        m.expect(Command::Reconstruct, dir)?;
        let method = m.method.ok_or_else(|| CliError::validation(format!("{}: manifest records no method", dir.display())))?;
        let (image, coils) = read_recon(dir)?;
        if image.shape() != (h, w) {
            return Err(CliError::validation(format!(
                "{}: image is {:?}, dataset is {:?}",
                dir.display(),
                image.shape(),
                (h, w)
            )));
        }
        let mut x = window.crop(&image)?;
        if args.correct_intensity {
            x = corrected(&x, &gt)?;
        }
        let score = psnr(&x, &gt)?;
        let (_, null) = nullspace_residual(&truth.full, &coils)?;
        if score.is_nan() || !null.is_finite() {
            return Err(CliError::Numerical(format!("{}: metric is not a number", dir.display())));
        }
        records.push(MetricRecord {
            case_id: case_id.clone(),
            mask_spec: mask_spec.clone(),
            method,
            psnr_db: score,
            nullspace_norm: Some(null),
            runtime_s: m.runtime_s,
        });
    }

    println!("{:<14} {:<12} {:>10} {:>12}", "case", "method", "psnr_db", "null-space");
    for r in &records {
        println!("{:<14} {:<12} {:>10.3} {:>12.5}", r.case_id, format!("{:?}", r.method).to_lowercase(), r.psnr_db, r.nullspace_norm.unwrap_or(f64::NAN));
    }
    if let Some(out) = &args.out {
        write_json(out, &records)?;
    }
    Ok(())
}
