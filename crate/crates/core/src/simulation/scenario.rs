//! Loss-stream generators with exact conditional moments.
//!
//! Every scenario exposes, before step `t` is drawn, the conditional law of
//! `f(Z_t, θ)` given the past. The bounds read their oracle moments (mean,
//! variance, log-MGF, central `p`-th moment) from that law; nothing is estimated.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Binomial, Continuous, ContinuousCDF, Discrete, Hypergeometric, Normal};
use statrs::function::beta::beta;

use super::config::ScenarioConfig;
use super::rng::stream_rng;
use crate::error::{Error, Result};
use crate::forward::StepObservation;

/// Subintervals for the Simpson rule on the bounded part of the Pareto moment integral.
const PARETO_SIMPSON_STEPS: usize = 4000;

/// A Gaussian conditioned on `[0, ∞)`, with its moments cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TruncNormal {
    mu: f64,
    sd: f64,
    mean: f64,
    var: f64,
    ln_z: f64,
}

impl TruncNormal {
    fn new(mu: f64, sd: f64) -> Self {
        let std = Normal::standard();
        let a = mu / sd;
        let z = std.cdf(a);
        // Inverse Mills ratio.
        let h = std.pdf(a) / z;
        Self {
            mu,
            sd,
            mean: mu + sd * h,
            var: sd * sd * (1.0 - a * h - h * h),
            ln_z: z.ln(),
        }
    }

    fn log_mgf(&self, lambda: f64) -> f64 {
        let std = Normal::standard();
        self.mu * lambda
            + self.sd * self.sd * lambda * lambda / 2.0
            + std.cdf(self.mu / self.sd + self.sd * lambda).ln()
            - self.ln_z
    }
}

/// `scale · U^{−1/shape}` on `[scale, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Pareto {
    shape: f64,
    scale: f64,
    p: f64,
    kappa: f64,
}

impl Pareto {
    fn new(shape: f64, scale: f64, p: f64) -> Self {
        Self {
            shape,
            scale,
            p,
            kappa: pareto_abs_central_moment(shape, scale, p),
        }
    }

    fn mean(&self) -> f64 {
        self.scale * self.shape / (self.shape - 1.0)
    }

    fn second_moment(&self) -> f64 {
        self.scale * self.scale * self.shape / (self.shape - 2.0)
    }
}

/// `E|X − E X|^p` for `X = s·U^{−1/α}`.
///
/// Above the mean, `x = μ/u` turns the integral into `α(s/μ)^α μ^p B(α−p, p+1)`.
/// Below it the integrand is smooth on `[s, μ]` and Simpson's rule suffices.
pub(crate) fn pareto_abs_central_moment(shape: f64, scale: f64, p: f64) -> f64 {
    let (a, s) = (shape, scale);
    let mu = s * a / (a - 1.0);
    let upper = a * (s / mu).powf(a) * mu.powf(p) * beta(a - p, p + 1.0);
    let density = |x: f64| a * s.powf(a) * x.powf(-a - 1.0);
    let g = |x: f64| (mu - x).powf(p) * density(x);
    let n = PARETO_SIMPSON_STEPS;
    let h = (mu - s) / n as f64;
    let mut acc = g(s) + g(mu);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(s + i as f64 * h);
    }
    upper + acc * h / 3.0
}

/// The conditional law of one loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Law {
    Bernoulli(f64),
    Uniform(f64),
    TruncNormal(TruncNormal),
    TwoPoint { lo: f64, hi: f64, p_hi: f64 },
    Pareto(Pareto),
}

impl Law {
    pub(crate) fn mean(&self) -> f64 {
        match *self {
            Law::Bernoulli(q) => q,
            Law::Uniform(b) => b / 2.0,
            Law::TruncNormal(n) => n.mean,
            Law::TwoPoint { lo, hi, p_hi } => p_hi * hi + (1.0 - p_hi) * lo,
            Law::Pareto(p) => p.mean(),
        }
    }

    pub(crate) fn second_moment(&self) -> f64 {
        match *self {
            Law::Bernoulli(q) => q,
            Law::Uniform(b) => b * b / 3.0,
            Law::TruncNormal(n) => n.var + n.mean * n.mean,
            Law::TwoPoint { lo, hi, p_hi } => p_hi * hi * hi + (1.0 - p_hi) * lo * lo,
            Law::Pareto(p) => p.second_moment(),
        }
    }

    pub(crate) fn variance(&self) -> f64 {
        match *self {
            Law::Bernoulli(q) => q * (1.0 - q),
            Law::Uniform(b) => b * b / 12.0,
            Law::TruncNormal(n) => n.var,
            Law::TwoPoint { lo, hi, p_hi } => {
                let m = self.mean();
                p_hi * (hi - m).powi(2) + (1.0 - p_hi) * (lo - m).powi(2)
            }
            Law::Pareto(p) => p.second_moment() - p.mean().powi(2),
        }
    }

    /// `ln E exp(λ f)`, when finite for every `λ ≥ 0`.
    pub(crate) fn log_mgf(&self, lambda: f64) -> Option<f64> {
        match *self {
            Law::Bernoulli(q) => Some((q * lambda.exp_m1()).ln_1p()),
            Law::Uniform(b) => {
                let x = lambda * b;
                Some(if x == 0.0 { 0.0 } else { (x.exp_m1() / x).ln() })
            }
            Law::TruncNormal(n) => Some(n.log_mgf(lambda)),
            Law::TwoPoint { lo, hi, p_hi } => {
                let (a, b) = (lambda * lo, lambda * hi);
                let m = a.max(b);
                Some(m + (p_hi * (b - m).exp() + (1.0 - p_hi) * (a - m).exp()).ln())
            }
            Law::Pareto(_) => None,
        }
    }

    /// `E|f − E f|^p`.
    pub(crate) fn abs_central_moment(&self, p: f64) -> Option<f64> {
        match *self {
            Law::Bernoulli(q) => Some(q * (1.0 - q).powf(p) + (1.0 - q) * q.powf(p)),
            Law::Uniform(b) => Some((b / 2.0).powf(p) / (p + 1.0)),
            Law::TruncNormal(_) => None,
            Law::TwoPoint { lo, hi, p_hi } => {
                let m = self.mean();
                Some(p_hi * (hi - m).abs().powf(p) + (1.0 - p_hi) * (lo - m).abs().powf(p))
            }
            Law::Pareto(par) => Some(if p == par.p {
                par.kappa
            } else {
                pareto_abs_central_moment(par.shape, par.scale, p)
            }),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Bernoulli(q) => f64::from(rng.random::<f64>() < q),
            Law::Uniform(b) => b * rng.random::<f64>(),
            Law::TruncNormal(n) => loop {
                let z: f64 = rng.sample(StandardNormal);
                let x = n.mu + n.sd * z;
                if x >= 0.0 {
                    break x;
                }
            },
            Law::TwoPoint { lo, hi, p_hi } => {
                if rng.random::<f64>() < p_hi {
                    hi
                } else {
                    lo
                }
            }
            Law::Pareto(p) => p.scale * (1.0 - rng.random::<f64>()).powf(-1.0 / p.shape),
        }
    }
}

/// Which oracle quantities a scenario can supply, and so which bounds it supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Capabilities {
    /// A subGaussian scale `σ_t`.
    pub sigma: bool,
    /// A range `H_t` with `|f| ≤ H_t`.
    pub range: bool,
    /// A Bernstein-condition pair `(σ_t, c_t)`.
    pub bernstein: bool,
    pub nonnegative: bool,
    pub mgf: bool,
    pub abs_moment: bool,
    /// Independent, identically distributed over time (needed by the confidence sequences).
    pub iid: bool,
    /// Exchangeable losses in `[0, 1]` with a known risk `R(θ)` (the reverse bounds).
    pub unit_exchangeable: bool,
    /// Exact distribution of the empirical risk, for MGF and moment oracles.
    pub exact_law: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Iid(Vec<Law>),
    Urn { size: u64, ones: Vec<u64> },
    Mds { low: Vec<f64>, high: Vec<f64> },
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Scenario {
    kind: Kind,
    caps: Capabilities,
    default_p: f64,
}

/// Per-replication mutable state.
#[derive(Debug, Clone)]
pub(crate) struct RepState {
    urn: Vec<Vec<bool>>,
    ones_left: Vec<u64>,
    amp: Vec<f64>,
}

/// One drawn step: losses plus the conditional laws they were drawn from.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    pub loss: Vec<f64>,
    pub laws: Vec<Law>,
    pub obs: StepObservation,
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

fn check_all(name: &str, values: &[f64], ok: impl Fn(f64) -> bool, domain: &str) -> Result<()> {
    match values.iter().find(|v| !ok(**v)) {
        Some(v) => Err(bad(format!("scenario {name} = {v} must be {domain}"))),
        None => Ok(()),
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(bad(format!(
            "scenario parameter vectors have different lengths ({a} vs {b})"
        )))
    }
}

impl Scenario {
    pub(crate) fn new(cfg: &ScenarioConfig, horizon: u64) -> Result<Self> {
        let all = Capabilities {
            sigma: true,
            range: true,
            bernstein: true,
            nonnegative: true,
            mgf: true,
            abs_moment: true,
            iid: true,
            unit_exchangeable: true,
            exact_law: true,
        };
        let mut default_p = 2.0;
        let (kind, caps) = match cfg {
            ScenarioConfig::Bernoulli { p } => {
                check_all("p", p, |q| (0.0..=1.0).contains(&q), "in [0, 1]")?;
                (
                    Kind::Iid(p.iter().map(|q| Law::Bernoulli(*q)).collect()),
                    all,
                )
            }
            ScenarioConfig::Uniform { range } => {
                check_all("range", range, |b| b > 0.0 && b.is_finite(), "positive")?;
                let caps = Capabilities {
                    unit_exchangeable: range.iter().all(|b| *b <= 1.0),
                    exact_law: false,
                    ..all
                };
                (
                    Kind::Iid(range.iter().map(|b| Law::Uniform(*b)).collect()),
                    caps,
                )
            }
            ScenarioConfig::Gaussian { mean, sd } => {
                same_len(mean.len(), sd.len())?;
                check_all("mean", mean, |m| m >= 0.0 && m.is_finite(), "nonnegative")?;
                check_all("sd", sd, |s| s > 0.0 && s.is_finite(), "positive")?;
                let laws = mean
                    .iter()
                    .zip(sd)
                    .map(|(m, s)| Law::TruncNormal(TruncNormal::new(*m, *s)))
                    .collect();
                let caps = Capabilities {
                    sigma: true,
                    nonnegative: true,
                    mgf: true,
                    iid: true,
                    ..Capabilities::default()
                };
                (Kind::Iid(laws), caps)
            }
            ScenarioConfig::Pareto { shape, scale, p } => {
                same_len(shape.len(), scale.len())?;
                check_all(
                    "shape",
                    shape,
                    |a| a > 2.0 && a.is_finite(),
                    "greater than 2",
                )?;
                check_all("scale", scale, |s| s > 0.0 && s.is_finite(), "positive")?;
                if !(*p > 1.0 && *p <= 2.0) {
                    return Err(bad(format!("scenario p = {p} must be in (1, 2]")));
                }
                default_p = *p;
                let laws = shape
                    .iter()
                    .zip(scale)
                    .map(|(a, s)| Law::Pareto(Pareto::new(*a, *s, *p)))
                    .collect();
                let caps = Capabilities {
                    nonnegative: true,
                    abs_moment: true,
                    iid: true,
                    ..Capabilities::default()
                };
                (Kind::Iid(laws), caps)
            }
            ScenarioConfig::WithoutReplacement { size, ones } => {
                if *size < horizon {
                    return Err(bad(format!(
                        "urn size {size} is smaller than the horizon {horizon}"
                    )));
                }
                if let Some(m) = ones.iter().find(|m| **m > *size) {
                    return Err(bad(format!("urn holds {size} items but ones = {m}")));
                }
                let caps = Capabilities { iid: false, ..all };
                (
                    Kind::Urn {
                        size: *size,
                        ones: ones.clone(),
                    },
                    caps,
                )
            }
            ScenarioConfig::Mds { low, high } => {
                same_len(low.len(), high.len())?;
                check_all("low", low, |a| a < 0.0 && a.is_finite(), "negative")?;
                check_all("high", high, |b| b > 0.0 && b.is_finite(), "positive")?;
                let caps = Capabilities {
                    sigma: true,
                    range: true,
                    bernstein: true,
                    abs_moment: true,
                    ..Capabilities::default()
                };
                (
                    Kind::Mds {
                        low: low.clone(),
                        high: high.clone(),
                    },
                    caps,
                )
            }
        };
        let s = Self {
            kind,
            caps,
            default_p,
        };
        if s.theta_count() == 0 {
            return Err(bad("scenario has no parameters".into()));
        }
        Ok(s)
    }

    pub(crate) fn theta_count(&self) -> usize {
        match &self.kind {
            Kind::Iid(l) => l.len(),
            Kind::Urn { ones, .. } => ones.len(),
            Kind::Mds { low, .. } => low.len(),
        }
    }

    pub(crate) fn capabilities(&self) -> Capabilities {
        self.caps
    }

    /// Moment order used by the p-th moment bound when the config leaves it open.
    pub(crate) fn default_p(&self) -> f64 {
        self.default_p
    }

    /// `R(θ)` for the reverse bounds.
    pub(crate) fn risk(&self) -> Option<Vec<f64>> {
        if !self.caps.unit_exchangeable {
            return None;
        }
        match &self.kind {
            Kind::Iid(laws) => Some(laws.iter().map(Law::mean).collect()),
            Kind::Urn { size, ones } => {
                Some(ones.iter().map(|m| *m as f64 / *size as f64).collect())
            }
            Kind::Mds { .. } => None,
        }
    }

    /// `μ(θ)` for i.i.d. scenarios.
    pub(crate) fn iid_mean(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Iid(laws) => Some(laws.iter().map(Law::mean).collect()),
            _ => None,
        }
    }

    /// Exact law of the empirical risk after `j` draws, as `(value, probability)` pairs.
    pub(crate) fn empirical_risk_law(&self, theta: usize, j: u64) -> Option<Vec<(f64, f64)>> {
        if j == 0 {
            return None;
        }
        let jf = j as f64;
        let pmf: Vec<f64> = match &self.kind {
            Kind::Iid(laws) => match laws[theta] {
                Law::Bernoulli(q) => {
                    let b = Binomial::new(q, j).ok()?;
                    (0..=j).map(|k| b.pmf(k)).collect()
                }
                _ => return None,
            },
            Kind::Urn { size, ones } => {
                let h = Hypergeometric::new(*size, ones[theta], j).ok()?;
                (0..=j).map(|k| h.pmf(k)).collect()
            }
            Kind::Mds { .. } => return None,
        };
        Some(
            pmf.into_iter()
                .enumerate()
                .filter(|(_, p)| *p > 0.0)
                .map(|(k, p)| (k as f64 / jf, p))
                .collect(),
        )
    }

    pub(crate) fn start(&self, seed: u64, rep: u64, horizon: u64) -> RepState {
        let n = self.theta_count();
        match &self.kind {
            Kind::Urn { size, ones } => {
                let urn = ones
                    .iter()
                    .enumerate()
                    .map(|(theta, m)| {
                        // Items `0..m` are the ones; draw `horizon` distinct
                        // positions in order without materializing the urn.
                        let mut rng = stream_rng(seed, rep, theta as u64, 0);
                        index::sample(&mut rng, *size as usize, horizon as usize)
                            .into_iter()
                            .map(|i| (i as u64) < *m)
                            .collect()
                    })
                    .collect();
                RepState {
                    urn,
                    ones_left: ones.clone(),
                    amp: Vec::new(),
                }
            }
            _ => RepState {
                urn: Vec::new(),
                ones_left: Vec::new(),
                amp: vec![1.0; n],
            },
        }
    }

    /// Conditional laws at step `t`, then the draw, then the state update.
    pub(crate) fn step(&self, state: &mut RepState, seed: u64, rep: u64, t: u64) -> Step {
        let n = self.theta_count();
        let (laws, loss): (Vec<Law>, Vec<f64>) = match &self.kind {
            Kind::Iid(laws) => {
                let loss = laws
                    .iter()
                    .enumerate()
                    .map(|(theta, law)| law.sample(&mut stream_rng(seed, rep, theta as u64, t)))
                    .collect();
                (laws.clone(), loss)
            }
            Kind::Urn { size, .. } => {
                let remaining = (*size - (t - 1)) as f64;
                let laws = state
                    .ones_left
                    .iter()
                    .map(|m| Law::Bernoulli(*m as f64 / remaining))
                    .collect();
                let loss: Vec<f64> = (0..n)
                    .map(|i| f64::from(state.urn[i][(t - 1) as usize]))
                    .collect();
                for (m, f) in state.ones_left.iter_mut().zip(&loss) {
                    if *f == 1.0 {
                        *m -= 1;
                    }
                }
                (laws, loss)
            }
            Kind::Mds { low, high } => {
                let laws: Vec<Law> = (0..n)
                    .map(|i| {
                        let (a, b) = (low[i], high[i]);
                        Law::TwoPoint {
                            lo: state.amp[i] * a,
                            hi: state.amp[i] * b,
                            p_hi: -a / (b - a),
                        }
                    })
                    .collect();
                let loss: Vec<f64> = laws
                    .iter()
                    .enumerate()
                    .map(|(theta, law)| law.sample(&mut stream_rng(seed, rep, theta as u64, t)))
                    .collect();
                for (a, f) in state.amp.iter_mut().zip(&loss) {
                    *a = if *f >= 0.0 { 1.0 } else { 0.5 };
                }
                (laws, loss)
            }
        };
        let obs = self.observation(&laws, &loss);
        Step { loss, laws, obs }
    }

    fn observation(&self, laws: &[Law], loss: &[f64]) -> StepObservation {
        let max = |f: &dyn Fn(&Law) -> f64| laws.iter().map(f).fold(0.0, f64::max);
        let (sigma, range, c) = match &self.kind {
            Kind::Iid(_) | Kind::Urn { .. } => match laws[0] {
                Law::Bernoulli(_) => (Some(0.5), Some(1.0), Some(1.0 / 3.0)),
                Law::Uniform(_) => {
                    let b = max(&|l| if let Law::Uniform(b) = l { *b } else { 0.0 });
                    (Some(b / 2.0), Some(b), Some(b / 6.0))
                }
                Law::TruncNormal(_) => {
                    let s = max(&|l| {
                        if let Law::TruncNormal(n) = l {
                            n.sd
                        } else {
                            0.0
                        }
                    });
                    (Some(s), None, None)
                }
                _ => (None, None, None),
            },
            Kind::Mds { .. } => {
                let s = max(&|l| match l {
                    Law::TwoPoint { lo, hi, .. } => (hi - lo) / 2.0,
                    _ => 0.0,
                });
                let h = max(&|l| match l {
                    Law::TwoPoint { lo, hi, .. } => lo.abs().max(*hi),
                    _ => 0.0,
                });
                (Some(s), Some(h), Some(h / 3.0))
            }
        };
        StepObservation {
            loss: loss.to_vec(),
            mean: laws.iter().map(Law::mean).collect(),
            variance: Some(laws.iter().map(Law::variance).collect()),
            second_moment: Some(laws.iter().map(Law::second_moment).collect()),
            log_mgf: None,
            sigma,
            range,
            bernstein_c: c,
            kappa: None,
            p: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Quantile-space midpoint rule: `E g(X) = ∫₀¹ g(s·u^{−1/α}) du` with `u = v^10`
    /// to smooth the endpoint singularity.
    fn pareto_moment_by_quantiles(shape: f64, scale: f64, g: impl Fn(f64) -> f64) -> f64 {
        let n = 2_000_000;
        let m = 10.0;
        (0..n)
            .map(|i| {
                let v = (i as f64 + 0.5) / n as f64;
                let u = v.powf(m);
                g(scale * u.powf(-1.0 / shape)) * m * v.powf(m - 1.0)
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn pareto_moments_match_quadrature() {
        for (a, s, p) in [(2.2, 1.0, 1.5), (3.0, 0.5, 1.2), (2.5, 2.0, 2.0)] {
            let law = Pareto::new(a, s, p);
            let mu = law.mean();
            let oracle = pareto_moment_by_quantiles(a, s, |x| (x - mu).abs().powf(p));
            assert!(
                (law.kappa - oracle).abs() < 2e-4 * oracle,
                "{a} {s} {p}: {} vs {oracle}",
                law.kappa
            );
            let mean = pareto_moment_by_quantiles(a, s, |x| x);
            assert!((mu - mean).abs() < 1e-4 * mu);
        }
        // p = 2 is the variance.
        let law = Law::Pareto(Pareto::new(3.0, 1.0, 2.0));
        assert_abs_diff_eq!(
            law.abs_central_moment(2.0).unwrap(),
            law.variance(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(law.variance(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn truncated_normal_moments_match_quadrature() {
        for (mu, sd) in [(0.0, 1.0), (0.5, 0.3), (1.0, 2.0)] {
            let n = TruncNormal::new(mu, sd);
            let dens = |x: f64| (-(x - mu) * (x - mu) / (2.0 * sd * sd)).exp();
            let hi = mu + 12.0 * sd;
            let k = 200_000;
            let h = hi / k as f64;
            let (mut z, mut m1, mut m2, mut e) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..k {
                let x = (i as f64 + 0.5) * h;
                let d = dens(x) * h;
                z += d;
                m1 += x * d;
                m2 += x * x * d;
                e += (0.7 * x).exp() * d;
            }
            let mean = m1 / z;
            assert_abs_diff_eq!(n.mean, mean, epsilon = 1e-6);
            assert_abs_diff_eq!(n.var, m2 / z - mean * mean, epsilon = 1e-6);
            assert_abs_diff_eq!(n.log_mgf(0.7), (e / z).ln(), epsilon = 1e-6);
        }
    }

    #[test]
    fn law_moments() {
        let b = Law::Bernoulli(0.3);
        assert_abs_diff_eq!(
            b.log_mgf(1.0).unwrap(),
            (0.7 + 0.3 * 1f64.exp()).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(b.abs_central_moment(2.0).unwrap(), 0.21, epsilon = 1e-15);
        let u = Law::Uniform(2.0);
        // ∫₀² e^{x}/2 dx = (e² − 1)/2.
        assert_abs_diff_eq!(
            u.log_mgf(1.0).unwrap(),
            ((2f64.exp() - 1.0) / 2.0).ln(),
            epsilon = 1e-14
        );
        assert_eq!(u.log_mgf(0.0), Some(0.0));
        assert_abs_diff_eq!(
            u.abs_central_moment(2.0).unwrap(),
            u.variance(),
            epsilon = 1e-15
        );
        let tp = Law::TwoPoint {
            lo: -1.0,
            hi: 3.0,
            p_hi: 0.25,
        };
        assert_abs_diff_eq!(tp.mean(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tp.variance(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            tp.log_mgf(0.5).unwrap(),
            (0.25 * 1.5f64.exp() + 0.75 * (-0.5f64).exp()).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn urn_draws_are_a_permutation_and_moments_track_it() {
        let cfg = ScenarioConfig::WithoutReplacement {
            size: 20,
            ones: vec![7, 0, 20],
        };
        let s = Scenario::new(&cfg, 20).unwrap();
        let mut st = s.start(1, 0, 20);
        let mut count = [0.0; 3];
        for t in 1..=20 {
            let step = s.step(&mut st, 1, 0, t);
            for i in 0..3 {
                let left = [7.0, 0.0, 20.0][i] - count[i];
                assert_abs_diff_eq!(step.obs.mean[i], left / (21 - t) as f64, epsilon = 1e-15);
                count[i] += step.loss[i];
            }
        }
        assert_eq!(count, [7.0, 0.0, 20.0]);
        assert!(Scenario::new(&cfg, 21).is_err());
    }

    #[test]
    fn mds_is_centered_and_amplitude_is_predictable() {
        let cfg = ScenarioConfig::Mds {
            low: vec![-1.0],
            high: vec![2.0],
        };
        let s = Scenario::new(&cfg, 100).unwrap();
        let mut st = s.start(3, 0, 100);
        let mut prev: Option<f64> = None;
        for t in 1..=100 {
            let step = s.step(&mut st, 3, 0, t);
            assert_abs_diff_eq!(step.obs.mean[0], 0.0, epsilon = 1e-15);
            let amp = match prev {
                Some(f) if f < 0.0 => 0.5,
                _ => 1.0,
            };
            assert!(step.loss[0] == -amp || step.loss[0] == 2.0 * amp);
            prev = Some(step.loss[0]);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_roughly_right() {
        let cfg = ScenarioConfig::Bernoulli { p: vec![0.3] };
        let s = Scenario::new(&cfg, 10).unwrap();
        let draw = |rep| {
            let mut st = s.start(5, rep, 10_000);
            (1..=10_000)
                .map(|t| s.step(&mut st, 5, rep, t).loss[0])
                .sum::<f64>()
        };
        assert_eq!(draw(0), draw(0));
        let mean = draw(1) / 10_000.0;
        assert!((mean - 0.3).abs() < 0.02, "{mean}");
    }

    #[test]
    fn empirical_risk_law_sums_to_one() {
        let s = Scenario::new(&ScenarioConfig::Bernoulli { p: vec![0.2] }, 10).unwrap();
        let law = s.empirical_risk_law(0, 16).unwrap();
        assert_abs_diff_eq!(
            law.iter().map(|(_, p)| p).sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            law.iter().map(|(v, p)| v * p).sum::<f64>(),
            0.2,
            epsilon = 1e-12
        );
        let cfg = ScenarioConfig::WithoutReplacement {
            size: 30,
            ones: vec![9],
        };
        let s = Scenario::new(&cfg, 10).unwrap();
        let law = s.empirical_risk_law(0, 30).unwrap();
        // Drawing the whole urn reveals its mean exactly.
        assert_eq!(law, vec![(0.3, 1.0)]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = [
            ScenarioConfig::Bernoulli { p: vec![1.2] },
            ScenarioConfig::Bernoulli { p: vec![] },
            ScenarioConfig::Uniform { range: vec![0.0] },
            ScenarioConfig::Gaussian {
                mean: vec![-1.0],
                sd: vec![1.0],
            },
            ScenarioConfig::Pareto {
                shape: vec![1.9],
                scale: vec![1.0],
                p: 1.5,
            },
            ScenarioConfig::Pareto {
                shape: vec![2.5],
                scale: vec![1.0],
                p: 2.5,
            },
            ScenarioConfig::Mds {
                low: vec![1.0],
                high: vec![2.0],
            },
        ];
        for cfg in bad {
            assert!(Scenario::new(&cfg, 10).is_err(), "{cfg:?}");
        }
    }
}
