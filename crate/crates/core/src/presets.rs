//! Published step-size schedules and sampling defaults.

use serde::{Deserialize, Serialize};

use crate::diffusion::StepSchedule;

/// Sampling pattern family a preset was tuned for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// 4x Cartesian.
    Cartesian,
    /// 4x Cartesian with swapped phase-encoding direction.
    CartesianSwapped,
    /// 4x Gaussian.
    Gaussian,
    /// 11x radial.
    Radial,
}

/// Image contrast a preset was tuned for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    /// Proton density.
    #[default]
    Pd,
    /// Proton density, fat suppressed.
    Pdfs,
}

pub const STEPS: usize = 1000;
pub const CORRECTOR_STEPS: usize = 1;
pub const SNR: f64 = 0.0075;

/// `(lambda_N, lambda_1, mu_N, mu_1)` from the grid search.
pub fn endpoints(kind: PatternKind, contrast: Contrast) -> (f64, f64, f64, f64) {
    use Contrast::*;
    use PatternKind::*;
    match (kind, contrast) {
        (Cartesian, Pd) => (0.56, 0.07, 1e-6, 25.0),
        (Cartesian, Pdfs) => (0.40, 0.05, 1e-6, 25.0),
        (CartesianSwapped, Pd) => (0.80, 0.30, 1e-6, 25.0),
        (CartesianSwapped, Pdfs) => (0.80, 0.30, 1e-6, 10.0),
        (Gaussian, Pd) => (0.56, 0.21, 1e-6, 25.0),
        (Gaussian, Pdfs) => (0.56, 0.07, 1e-6, 25.0),
        (Radial, _) => (0.70, 0.21, 1e-6, 20.0),
    }
}

/// The `lambda` and `mu` schedules of a preset.
pub fn schedules(kind: PatternKind, contrast: Contrast) -> (StepSchedule, StepSchedule) {
    let (l_n, l_1, m_n, m_1) = endpoints(kind, contrast);
    (
        StepSchedule::Exponential { first: l_n, last: l_1 },
        StepSchedule::Exponential { first: m_n, last: m_1 },
    )
}
