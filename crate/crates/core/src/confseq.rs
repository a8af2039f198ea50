//! Confidence sequences for `E_ρ μ(θ)` under subGaussian losses.
//!
//! Both sequences are valid for one fixed pair `(ρ, ν)`: the divergence is
//! frozen per query and the guarantee does not hold simultaneously over all
//! posteriors.

use crate::error::{check_delta, Error, Result};
use crate::schedule::LambdaSchedule;

/// The interval `center ± width` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSequence {
    pub t: u64,
    pub center: f64,
    pub width: f64,
}

impl ConfidenceSequence {
    pub fn lo(&self) -> f64 {
        self.center - self.width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }
}

/// Center `Σλ_i x_i / Σλ_i` and width `(ln(2/δ) + kl + (σ²/2)Σλ_i²)/Σλ_i`,
/// where `x_i = E_ρ f(Z_i, θ)`.
pub fn subgaussian_cs(
    t: u64,
    weighted_sum: f64,
    sum_lambda: f64,
    sum_lambda_sq: f64,
    sigma: f64,
    kl: f64,
    delta: f64,
) -> Result<ConfidenceSequence> {
    check_delta(delta)?;
    check_sigma(sigma)?;
    if !(kl >= 0.0) {
        return Err(Error::Domain {
            name: "kl",
            value: kl,
            domain: "[0, inf]",
        });
    }
    if !(sum_lambda > 0.0) {
        return Err(Error::Domain {
            name: "sum_lambda",
            value: sum_lambda,
            domain: "(0, inf)",
        });
    }
    let width = ((2.0 / delta).ln() + kl + sigma * sigma / 2.0 * sum_lambda_sq) / sum_lambda;
    Ok(ConfidenceSequence {
        t,
        center: weighted_sum / sum_lambda,
        width,
    })
}

/// `2√((ln(6.3/δ) + 1.4·ln log₂(2t))/t) + kl/√((ln(6.3/δ) + 1.4·ln log₂(t+1))·t)`,
/// the stitched width for 1-subGaussian losses. Rescale losses by `1/σ` for
/// other scales.
pub fn stitched_cs_width(t: u64, kl: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if t == 0 {
        return Err(Error::Domain {
            name: "t",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    if !(kl >= 0.0) {
        return Err(Error::Domain {
            name: "kl",
            value: kl,
            domain: "[0, inf]",
        });
    }
    let tf = t as f64;
    let base = (6.3 / delta).ln();
    let first = 2.0 * ((base + 1.4 * (2.0 * tf).log2().ln()) / tf).sqrt();
    if kl == 0.0 {
        return Ok(first);
    }
    Ok(first + kl / ((base + 1.4 * (tf + 1.0).log2().ln()) * tf).sqrt())
}

/// Running state for the subGaussian confidence sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGaussianCs {
    schedule: LambdaSchedule,
    sigma: f64,
    t: u64,
    weighted_sum: f64,
    sum_lambda: f64,
    sum_lambda_sq: f64,
}

impl SubGaussianCs {
    pub fn new(schedule: LambdaSchedule, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            schedule,
            sigma,
            t: 0,
            weighted_sum: 0.0,
            sum_lambda: 0.0,
            sum_lambda_sq: 0.0,
        })
    }

    /// Feeds `E_ρ f(Z_t, θ)` for the next step.
    pub fn update(&mut self, loss: f64) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let l = self.schedule.at(self.t + 1)?;
        self.t += 1;
        self.weighted_sum += l * loss;
        self.sum_lambda += l;
        self.sum_lambda_sq += l * l;
        Ok(())
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn interval(&self, kl: f64, delta: f64) -> Result<ConfidenceSequence> {
        subgaussian_cs(
            self.t,
            self.weighted_sum,
            self.sum_lambda,
            self.sum_lambda_sq,
            self.sigma,
            kl,
            delta,
        )
    }
}

/// Running state for the stitched confidence sequence (center = plain mean).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StitchedCs {
    t: u64,
    sum: f64,
}

impl StitchedCs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, loss: f64) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        self.t += 1;
        self.sum += loss;
        Ok(())
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn interval(&self, kl: f64, delta: f64) -> Result<ConfidenceSequence> {
        let width = stitched_cs_width(self.t, kl, delta)?;
        Ok(ConfidenceSequence {
            t: self.t,
            center: self.sum / self.t as f64,
            width,
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "sigma",
            value: sigma,
            domain: "(0, inf)",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::default_lambda_schedule;
    use approx::assert_abs_diff_eq;

    #[test]
    fn subgaussian_width_example() {
        let mut cs = SubGaussianCs::new(LambdaSchedule::constant(0.2).unwrap(), 1.0).unwrap();
        for i in 0..100 {
            cs.update((i % 3) as f64).unwrap();
        }
        let c = cs.interval(0.0, 0.05).unwrap();
        assert_abs_diff_eq!(c.width, (40f64.ln() + 2.0) / 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.width, 0.28445, epsilon = 1e-5);
        let mean = (0..100).map(|i| (i % 3) as f64).sum::<f64>() / 100.0;
        assert_abs_diff_eq!(c.center, mean, epsilon = 1e-12);
        let d = cs.interval(0.6, 0.05).unwrap().width - cs.interval(0.3, 0.05).unwrap().width;
        assert_abs_diff_eq!(d, 0.3 / 20.0, epsilon = 1e-12);
    }

    #[test]
    fn subgaussian_errors() {
        assert!(subgaussian_cs(0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.05).is_err());
        assert!(SubGaussianCs::new(LambdaSchedule::constant(1.0).unwrap(), 0.0).is_err());
        let cs = SubGaussianCs::new(LambdaSchedule::constant(1.0).unwrap(), 1.0).unwrap();
        assert!(cs.interval(0.0, 0.05).is_err());
    }

    #[test]
    fn union_bound_structure() {
        // Each side at δ is the one-sided width at δ/2.
        let two_sided = subgaussian_cs(10, 0.0, 2.0, 0.4, 1.0, 0.1, 0.1)
            .unwrap()
            .width;
        let one_sided = ((1.0 / 0.05f64).ln() + 0.1 + 0.2) / 2.0;
        assert_abs_diff_eq!(two_sided, one_sided, epsilon = 1e-14);
    }

    #[test]
    fn constant_lambda_width_floor() {
        let mut cs = SubGaussianCs::new(LambdaSchedule::constant(0.3).unwrap(), 1.0).unwrap();
        for _ in 0..1_000_000 {
            cs.update(0.0).unwrap();
        }
        let w = cs.interval(0.0, 0.05).unwrap().width;
        assert_abs_diff_eq!(w, 0.3 / 2.0, epsilon = 1e-4);
    }

    #[test]
    fn default_schedule_width_shrinks() {
        let mut cs = SubGaussianCs::new(default_lambda_schedule(0.05, 1.0).unwrap(), 1.0).unwrap();
        let mut widths = Vec::new();
        for t in 1..=100_000u64 {
            cs.update((t % 2) as f64).unwrap();
            if [10, 1000, 100_000].contains(&t) {
                widths.push(cs.interval(0.0, 0.05).unwrap().width);
            }
        }
        assert!(widths[2] < widths[1] && widths[1] < widths[0]);
    }

    #[test]
    fn stitched_width_examples() {
        let w = stitched_cs_width(1024, 0.0, 0.05).unwrap();
        let want = 2.0 * ((126f64.ln() + 1.4 * 11f64.ln()) / 1024.0).sqrt();
        assert_abs_diff_eq!(w, want, epsilon = 1e-14);
        assert_abs_diff_eq!(w, 0.17890, epsilon = 1e-4);
        assert!(stitched_cs_width(0, 0.0, 0.05).is_err());
        assert!(stitched_cs_width(5, -1.0, 0.05).is_err());
        assert!(
            stitched_cs_width(5, 1.0, 0.05).unwrap() > stitched_cs_width(5, 0.0, 0.05).unwrap()
        );
    }

    #[test]
    fn stitched_width_lil_rate() {
        let mut max_ratio: f64 = 0.0;
        let mut t = 16u64;
        while t <= 1 << 20 {
            let w = stitched_cs_width(t, 0.0, 0.05).unwrap();
            let tf = t as f64;
            max_ratio = max_ratio.max(w * (tf / tf.ln().ln()).sqrt());
            t += 1 + t / 64;
        }
        assert!(max_ratio < 10.0, "ratio {max_ratio}");
    }

    #[test]
    fn stitched_width_nonincreasing() {
        let mut prev = f64::INFINITY;
        for t in 2..100_000 {
            let w = stitched_cs_width(t, 0.5, 0.05).unwrap();
            assert!(w <= prev + 1e-15);
            prev = w;
        }
    }
}
