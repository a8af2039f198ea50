//! Divergences between distributions over the parameter space.
//!
//! Two families are supported: finite mixtures (a probability vector over a
//! finite `Θ`) and diagonal Gaussians over `R^d`. The KL divergence covers both;
//! Rényi and total variation are defined for finite mixtures only.
//!
//! The module also houses the Bernoulli relative entropy `kl(p‖q)` and its
//! upper inversion, which turns a bound on `kl(R̂‖R)` into a bound on `R`.

use crate::error::{check_finite, check_probability, Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const KL_INV_TOL: f64 = 1e-10;
const KL_INV_MAX_ITER: usize = 200;

/// A probability vector over a finite parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMixture {
    weights: Vec<f64>,
}

impl FiniteMixture {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("mixture weights"));
        }
        check_finite("mixture weights", &weights)?;
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights so they sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        check_finite("mixture weights", &weights)?;
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidDistribution("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(support_size: usize) -> Result<Self> {
        if support_size == 0 {
            return Err(Error::Empty("mixture support"));
        }
        Ok(Self {
            weights: vec![1.0 / support_size as f64; support_size],
        })
    }

    /// Point mass on index `i`.
    pub fn dirac(support_size: usize, i: usize) -> Result<Self> {
        if i >= support_size {
            return Err(Error::DimensionMismatch(i, support_size));
        }
        let mut weights = vec![0.0; support_size];
        weights[i] = 1.0;
        Ok(Self { weights })
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E_{θ∼ρ}[values(θ)]`.
    pub fn expect(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(values.len(), self.weights.len()));
        }
        Ok(self
            .weights
            .iter()
            .zip(values)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * v)
            .sum())
    }
}

/// Product of independent univariate Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::DimensionMismatch(mean.len(), variance.len()));
        }
        if mean.is_empty() {
            return Err(Error::Empty("gaussian dimension"));
        }
        check_finite("gaussian mean", &mean)?;
        check_finite("gaussian variance", &variance)?;
        if let Some(v) = variance.iter().find(|v| **v <= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "variance {v} is not strictly positive"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }
}

/// A posterior or prior over `Θ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Finite(FiniteMixture),
    Gaussian(DiagonalGaussian),
}

impl Distribution {
    pub fn as_finite(&self) -> Option<&FiniteMixture> {
        match self {
            Distribution::Finite(m) => Some(m),
            Distribution::Gaussian(_) => None,
        }
    }
}

impl From<FiniteMixture> for Distribution {
    fn from(m: FiniteMixture) -> Self {
        Distribution::Finite(m)
    }
}

impl From<DiagonalGaussian> for Distribution {
    fn from(g: DiagonalGaussian) -> Self {
        Distribution::Gaussian(g)
    }
}

/// `a·ln(a/b)` with the convention `0·ln(0/b) = 0`.
fn xlogy_ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln()
    }
}

/// Relative entropy between Bernoulli(p) and Bernoulli(q).
pub fn klsf(p: f64, q: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    Ok(klsf_unchecked(p, q))
}

pub(crate) fn klsf_unchecked(p: f64, q: f64) -> f64 {
    let v = xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q);
    // Rounding can push the sum a hair below zero when p ≈ q.
    v.max(0.0)
}

/// Largest `q ∈ [p_hat, 1]` with `kl(p_hat‖q) ≤ c`, found by bisection.
pub fn kl_inv_upper(p_hat: f64, c: f64) -> Result<f64> {
    check_probability("p_hat", p_hat)?;
    if c.is_nan() || c < 0.0 {
        return Err(Error::Domain {
            name: "c",
            value: c,
            domain: "[0, inf)",
        });
    }
    if p_hat == 1.0 || c == f64::INFINITY {
        return Ok(1.0);
    }
    if c == 0.0 {
        return Ok(p_hat);
    }
    let (mut lo, mut hi) = (p_hat, 1.0);
    for _ in 0..KL_INV_MAX_ITER {
        if hi - lo <= KL_INV_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if klsf_unchecked(p_hat, mid) <= c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `D_KL(ρ‖ν)`; `+∞` when `ρ` is not absolutely continuous w.r.t. `ν`.
pub fn kl_divergence(rho: &Distribution, nu: &Distribution) -> Result<f64> {
    match (rho, nu) {
        (Distribution::Finite(r), Distribution::Finite(n)) => finite_kl(r, n),
        (Distribution::Gaussian(r), Distribution::Gaussian(n)) => gaussian_kl(r, n),
        _ => Err(Error::MixedFamily),
    }
}

pub fn finite_kl(rho: &FiniteMixture, nu: &FiniteMixture) -> Result<f64> {
    same_support(rho, nu)?;
    let kl: f64 = rho
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(r, n)| xlogy_ratio(*r, *n))
        .sum();
    Ok(kl.max(0.0))
}

fn gaussian_kl(rho: &DiagonalGaussian, nu: &DiagonalGaussian) -> Result<f64> {
    if rho.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), nu.dim()));
    }
    let kl: f64 = (0..rho.dim())
        .map(|i| {
            let (m1, v1) = (rho.mean[i], rho.variance[i]);
            let (m0, v0) = (nu.mean[i], nu.variance[i]);
            let dm = m1 - m0;
            0.5 * ((v0 / v1).ln() + (v1 + dm * dm) / v0 - 1.0)
        })
        .sum();
    Ok(kl.max(0.0))
}

/// Rényi divergence of order `α > 1`: `(1/(α−1))·ln Σ ρ_i^α ν_i^{1−α}`.
pub fn renyi_divergence(rho: &FiniteMixture, nu: &FiniteMixture, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(1, inf)",
        });
    }
    same_support(rho, nu)?;
    if rho == nu {
        return Ok(0.0);
    }
    let mut log_terms = Vec::with_capacity(rho.support_size());
    for (r, n) in rho.weights.iter().zip(&nu.weights) {
        if *r == 0.0 {
            continue;
        }
        if *n == 0.0 {
            return Ok(f64::INFINITY);
        }
        log_terms.push(alpha * r.ln() + (1.0 - alpha) * n.ln());
    }
    let d = log_sum_exp(&log_terms) / (alpha - 1.0);
    Ok(d.max(0.0))
}

/// Total variation `½·Σ|ρ_i − ν_i|`.
pub fn tv_distance(rho: &FiniteMixture, nu: &FiniteMixture) -> Result<f64> {
    same_support(rho, nu)?;
    let tv: f64 = rho
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(r, n)| (r - n).abs())
        .sum::<f64>()
        * 0.5;
    Ok(tv.clamp(0.0, 1.0))
}

fn same_support(rho: &FiniteMixture, nu: &FiniteMixture) -> Result<()> {
    if rho.support_size() != nu.support_size() {
        Err(Error::DimensionMismatch(
            rho.support_size(),
            nu.support_size(),
        ))
    } else {
        Ok(())
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
