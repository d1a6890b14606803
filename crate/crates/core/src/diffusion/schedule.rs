use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric noise levels `sigma(t) = sigma_min (sigma_max / sigma_min)^t`,
/// discretized as `sigma_i = sigma(i / N)` for `i = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub steps: usize,
}

impl SigmaSchedule {
    pub const DEFAULT_SIGMA_MIN: f64 = 0.01;
    pub const DEFAULT_SIGMA_MAX: f64 = 378.0;

    pub fn new(sigma_min: f64, sigma_max: f64, steps: usize) -> Result<Self> {
        let s = Self { sigma_min, sigma_max, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_max > self.sigma_min && self.sigma_max.is_finite()) {
            return Err(Error::domain(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.steps == 0 {
            return Err(Error::domain("sigma schedule needs at least one step"));
        }
        Ok(())
    }

    /// Continuous-time noise level; the endpoints are returned exactly.
    pub fn at_time(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("time {t} outside [0, 1]")));
        }
        Ok(if t == 0.0 {
            self.sigma_min
        } else if t == 1.0 {
            self.sigma_max
        } else {
            self.sigma_min * (self.sigma_max / self.sigma_min).powf(t)
        })
    }

    /// Discrete level `sigma_i`, `0 <= i <= N`.
    pub fn at(&self, i: usize) -> Result<f64> {
        if i > self.steps {
            return Err(Error::domain(format!("sigma index {i} beyond {} steps", self.steps)));
        }
        self.at_time(i as f64 / self.steps as f64)
    }

    /// Constant ratio `sigma_{i+1} / sigma_i`.
    pub fn ratio(&self) -> f64 {
        (self.sigma_max / self.sigma_min).powf(1.0 / self.steps as f64)
    }
}

/// Per-iteration step sizes indexed `i = 1..=N`, where `i = N` is used in
/// the first sampler iteration and `i = 1` in the last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `chi_i = exp(zeta_i)` with `zeta` equispaced between `ln first`
    /// (at `i = N`) and `ln last` (at `i = 1`). Endpoints are exact. With a
    /// single step only `first` is used.
    Exponential { first: f64, last: f64 },
    Constant { value: f64 },
}

impl StepSchedule {
    pub fn exponential(first: f64, last: f64) -> Result<Self> {
        let s = StepSchedule::Exponential { first, last };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Exponential { first, last } => {
                if !(first > 0.0 && last > 0.0 && first.is_finite() && last.is_finite()) {
                    return Err(Error::domain(format!(
                        "exponential schedule endpoints must be positive, got {first} and {last}"
                    )));
                }
            }
            StepSchedule::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::domain(format!("constant schedule value {value} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, i: usize, steps: usize) -> Result<f64> {
        if i == 0 || i > steps {
            return Err(Error::domain(format!("schedule index {i} outside 1..={steps}")));
        }
        Ok(match *self {
            StepSchedule::Constant { value } => value,
            StepSchedule::Exponential { first, .. } if i == steps => first,
            StepSchedule::Exponential { last, .. } if i == 1 => last,
            StepSchedule::Exponential { first, last } => {
                let frac = (i - 1) as f64 / (steps - 1) as f64;
                (last.ln() + frac * (first.ln() - last.ln())).exp()
            }
        })
    }

    /// Largest value the schedule takes.
    pub fn max_value(&self) -> f64 {
        match *self {
            StepSchedule::Exponential { first, last } => first.max(last),
            StepSchedule::Constant { value } => value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_endpoints() {
        let s = SigmaSchedule::new(0.01, 378.0, 1000).unwrap();
        assert_eq!(s.at_time(0.0).unwrap(), 0.01);
        assert_eq!(s.at_time(1.0).unwrap(), 378.0);
        assert_eq!(s.at(0).unwrap(), 0.01);
        assert_eq!(s.at(1000).unwrap(), 378.0);
        assert!((s.at_time(0.5).unwrap() - (0.01f64 * 378.0).sqrt()).abs() < 1e-12);
        assert!((s.at_time(0.5).unwrap() - 1.94422).abs() < 1e-5);
        assert!(s.at_time(1.5).is_err());
        assert!(s.at(1001).is_err());
    }

    #[test]
    fn constant_ratio_and_monotone() {
        let s = SigmaSchedule::new(0.01, 378.0, 50).unwrap();
        let r = s.ratio();
        for i in 0..50 {
            let q = s.at(i + 1).unwrap() / s.at(i).unwrap();
            assert!(q > 1.0);
            assert!((q - r).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_endpoints_and_midpoint() {
        let n = 1000;
        let lam = StepSchedule::exponential(0.56, 0.07).unwrap();
        assert_eq!(lam.at(n, n).unwrap(), 0.56);
        assert_eq!(lam.at(1, n).unwrap(), 0.07);
        let mu = StepSchedule::exponential(1e-6, 25.0).unwrap();
        let m = 101;
        assert!((mu.at((m + 1) / 2, m).unwrap() - 5e-3).abs() < 1e-15);
        // log-linear and monotone
        let vals: Vec<f64> = (1..=n).map(|i| lam.at(i, n).unwrap()).collect();
        assert!(vals.windows(2).all(|p| p[1] > p[0]));
        let d: Vec<f64> = vals.windows(2).map(|p| (p[1] / p[0]).ln()).collect();
        assert!(d.iter().all(|v| (v - d[0]).abs() < 1e-9));
        assert!(lam.at(0, n).is_err());
        assert!(lam.at(n + 1, n).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SigmaSchedule::new(0.0, 1.0, 10).is_err());
        assert!(SigmaSchedule::new(2.0, 1.0, 10).is_err());
        assert!(SigmaSchedule::new(0.1, 1.0, 0).is_err());
        assert!(StepSchedule::exponential(0.0, 1.0).is_err());
        assert!(StepSchedule::Constant { value: -1.0 }.validate().is_err());
    }
}
