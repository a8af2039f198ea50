use crate::error::{check_delta, Error, Result};

/// A predictable sequence `(λ_t)_{t≥1}` of nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSchedule {
    /// `λ_t = λ`.
    Constant(f64),
    /// `λ_t = λ/n`: tuned so the bound at time `n` matches the classical fixed-time form.
    Target { lambda: f64, n: u64 },
    /// `λ_t = c/√(t·ln(t+1))`.
    SqrtLog(f64),
    /// `λ_t = values[t−1]`.
    Explicit(Vec<f64>),
}

impl LambdaSchedule {
    pub fn constant(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self::Constant(lambda))
    }

    pub fn target(lambda: f64, n: u64) -> Result<Self> {
        check_lambda(lambda)?;
        if n == 0 {
            return Err(Error::Domain {
                name: "n",
                value: 0.0,
                domain: "[1, inf)",
            });
        }
        Ok(Self::Target { lambda, n })
    }

    pub fn sqrt_log(c: f64) -> Result<Self> {
        check_lambda(c)?;
        Ok(Self::SqrtLog(c))
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        for v in &values {
            check_lambda(*v)?;
        }
        Ok(Self::Explicit(values))
    }

    /// `λ_t` for `t ≥ 1`.
    pub fn at(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::Domain {
                name: "t",
                value: 0.0,
                domain: "[1, inf)",
            });
        }
        match self {
            Self::Constant(l) => Ok(*l),
            Self::Target { lambda, n } => Ok(lambda / *n as f64),
            Self::SqrtLog(c) => {
                let tf = t as f64;
                Ok(c / (tf * (tf + 1.0).ln()).sqrt())
            }
            Self::Explicit(v) => v.get((t - 1) as usize).copied().ok_or(Error::Domain {
                name: "t",
                value: t as f64,
                domain: "within the explicit schedule",
            }),
        }
    }

    /// `(Σ_{i≤t} λ_i, Σ_{i≤t} λ_i²)`.
    pub fn partial_sums(&self, t: u64) -> Result<(f64, f64)> {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 1..=t {
            let l = self.at(i)?;
            s1 += l;
            s2 += l * l;
        }
        Ok((s1, s2))
    }
}

/// `λ_t = √(2·ln(2/δ)) / (σ·√(t·ln(t+1)))`, the shrinking schedule that drives
/// confidence-sequence widths to zero at rate `√(log t / t)`.
///
/// The formula is decreasing in `t`, so it never exceeds its value at `t = 1`.
pub fn default_lambda_schedule(delta: f64, sigma: f64) -> Result<LambdaSchedule> {
    check_delta(delta)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain {
            name: "sigma",
            value: sigma,
            domain: "(0, inf)",
        });
    }
    LambdaSchedule::sqrt_log((2.0 * (2.0 / delta).ln()).sqrt() / sigma)
}

fn check_lambda(l: f64) -> Result<()> {
    if l >= 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "lambda",
            value: l,
            domain: "[0, inf)",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kinds() {
        assert_eq!(LambdaSchedule::constant(0.2).unwrap().at(7).unwrap(), 0.2);
        assert_eq!(
            LambdaSchedule::target(20.0, 100).unwrap().at(3).unwrap(),
            0.2
        );
        let e = LambdaSchedule::explicit(vec![1.0, 2.0]).unwrap();
        assert_eq!(e.at(2).unwrap(), 2.0);
        assert!(e.at(3).is_err());
        assert!(e.at(0).is_err());
        assert!(LambdaSchedule::constant(-1.0).is_err());
        assert!(LambdaSchedule::constant(f64::NAN).is_err());
        assert!(LambdaSchedule::target(1.0, 0).is_err());
    }

    #[test]
    fn partial_sums_target() {
        let s = LambdaSchedule::target(20.0, 100).unwrap();
        let (s1, s2) = s.partial_sums(100).unwrap();
        assert_abs_diff_eq!(s1, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s2, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn default_schedule_first_value() {
        let s = default_lambda_schedule(0.05, 1.0).unwrap();
        let want = (2.0 * 40f64.ln()).sqrt() / 2f64.ln().sqrt();
        assert_abs_diff_eq!(s.at(1).unwrap(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(s.at(1).unwrap(), 3.26249, epsilon = 1e-5);
        assert!(default_lambda_schedule(0.0, 1.0).is_err());
        assert!(default_lambda_schedule(0.05, 0.0).is_err());
    }

    #[test]
    fn default_schedule_decreasing() {
        let s = default_lambda_schedule(0.05, 0.5).unwrap();
        let mut prev = f64::INFINITY;
        for t in 1..10_000 {
            let l = s.at(t).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }
}
