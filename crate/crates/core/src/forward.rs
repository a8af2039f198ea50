//! Supermartingale-based bounds on `Σ λ_i E_ρ Δ_i(θ)`, where
//! `Δ_i(θ) = μ_i(θ) − f_i(Z_i, θ)` is the gap between the conditional mean loss
//! and the observed loss.
//!
//! Each [`ForwardKind`] corresponds to one exponential supermartingale. A
//! [`ForwardBoundState`] accumulates its compensator (the right-hand side
//! deviation term) and the left-hand side per parameter; the divergence term is
//! supplied at query time, so the bound holds simultaneously over all `t` and
//! all posteriors `ρ`.

use std::fmt;
use std::str::FromStr;

use crate::divergences::{kl_divergence, Distribution, FiniteMixture};
use crate::error::{check_delta, check_finite, Error, Result};
use crate::schedule::LambdaSchedule;

/// The deviation inequality a forward bound is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForwardKind {
    /// `σ`-subGaussian losses; subexponential when a Bernstein `c` caps `λ ≤ 1/c`.
    SubGaussian,
    /// Gaussian mixture over `λ` of the subGaussian supermartingale.
    GaussianMixture,
    /// Losses with `|f| ≤ H`, `λ ≤ 1/H`; variance-adaptive with constant `e − 2`.
    BernsteinBounded,
    /// Bennett-type compensator `(μ²/H²)·ψ_P(λH)`.
    Bennett,
    /// Losses satisfying Bernstein's moment condition with parameter `c`; `λ < 1/c`.
    BernsteinCondition,
    /// Nonnegative losses with a known log-MGF; bounds `Σ λ_i E_ρ f_i`.
    BoundedMgf,
    /// Nonnegative losses with finite conditional second moment.
    SecondMoment,
    /// Self-normalized quadratic-variation supermartingale.
    BercuTouati,
    /// Losses with finite `p`-th central moment, `1 < p ≤ 2`.
    PthMoment,
}

impl ForwardKind {
    pub const ALL: [ForwardKind; 9] = [
        ForwardKind::SubGaussian,
        ForwardKind::GaussianMixture,
        ForwardKind::BernsteinBounded,
        ForwardKind::Bennett,
        ForwardKind::BernsteinCondition,
        ForwardKind::BoundedMgf,
        ForwardKind::SecondMoment,
        ForwardKind::BercuTouati,
        ForwardKind::PthMoment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ForwardKind::SubGaussian => "subgaussian",
            ForwardKind::GaussianMixture => "gaussian-mixture",
            ForwardKind::BernsteinBounded => "bernstein-bounded",
            ForwardKind::Bennett => "bennett",
            ForwardKind::BernsteinCondition => "bernstein-condition",
            ForwardKind::BoundedMgf => "bounded-mgf",
            ForwardKind::SecondMoment => "second-moment",
            ForwardKind::BercuTouati => "bercu-touati",
            ForwardKind::PthMoment => "pth-moment",
        }
    }

    /// Whether the compensator depends on `θ` and must be averaged under `ρ`.
    fn per_theta_rhs(self) -> bool {
        matches!(
            self,
            ForwardKind::BernsteinBounded
                | ForwardKind::Bennett
                | ForwardKind::BoundedMgf
                | ForwardKind::SecondMoment
                | ForwardKind::BercuTouati
        )
    }
}

impl fmt::Display for ForwardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ForwardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ForwardKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown forward bound kind `{s}`")))
    }
}

/// Which compensator the Bercu–Touati bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BercuForm {
    /// `(λ²/6)(Δ² + 2E[Δ²|F])`.
    #[default]
    Tight,
    /// `(λ²/6)(f² + 2E[f²|F])`; looser but free of the conditional mean.
    Simplified,
}

/// One time step of losses and oracle moments, indexed by parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepObservation {
    /// `f_i(Z_i, θ)`.
    pub loss: Vec<f64>,
    /// `μ_i(θ) = E[f_i(Z, θ) | F_{i−1}]`.
    pub mean: Vec<f64>,
    /// `E[Δ_i(θ)² | F_{i−1}]`, the conditional variance.
    pub variance: Option<Vec<f64>>,
    /// `E[f_i(Z, θ)² | F_{i−1}]`.
    pub second_moment: Option<Vec<f64>>,
    /// `ln E[exp(λ_i f_i(Z, θ)) | F_{i−1}]` at this step's `λ_i`.
    pub log_mgf: Option<Vec<f64>>,
    /// SubGaussian scale `σ_i` (also the variance bound `σ_i²` under Bernstein's condition).
    pub sigma: Option<f64>,
    /// Range `H_i` with `|f_i| ≤ H_i`.
    pub range: Option<f64>,
    /// Bernstein parameter `c_i`.
    pub bernstein_c: Option<f64>,
    /// Central `p`-th moment bound `κ`.
    pub kappa: Option<f64>,
    pub p: Option<f64>,
}

impl StepObservation {
    fn theta_count(&self) -> usize {
        self.loss.len()
    }
}

/// `ζ_p(x) = x` for `x ≤ 0` and `ln(1 + x + x^p/p)` otherwise.
pub fn zeta_p(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        x
    } else {
        (x + x.powf(p) / p).ln_1p()
    }
}

/// `ψ_P(x) = eˣ − x − 1`.
pub fn psi_poisson(x: f64) -> f64 {
    x.exp_m1() - x
}

/// Running accumulators for one forward bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBoundState {
    kind: ForwardKind,
    bercu: BercuForm,
    t: u64,
    sum_lambda: f64,
    sum_lambda_sq: f64,
    sum_sigma2: f64,
    rhs_scalar: f64,
    rhs_theta: Vec<f64>,
    lhs_theta: Vec<f64>,
}

impl ForwardBoundState {
    pub fn new(kind: ForwardKind, theta_count: usize) -> Self {
        Self {
            kind,
            bercu: BercuForm::default(),
            t: 0,
            sum_lambda: 0.0,
            sum_lambda_sq: 0.0,
            sum_sigma2: 0.0,
            rhs_scalar: 0.0,
            rhs_theta: vec![0.0; theta_count],
            lhs_theta: vec![0.0; theta_count],
        }
    }

    pub fn with_bercu_form(mut self, form: BercuForm) -> Self {
        self.bercu = form;
        self
    }

    pub fn kind(&self) -> ForwardKind {
        self.kind
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `Σ_{i≤t} λ_i`; the normalizer that turns the bound into one on a weighted mean.
    pub fn sum_lambda(&self) -> f64 {
        self.sum_lambda
    }

    pub fn sum_lambda_sq(&self) -> f64 {
        self.sum_lambda_sq
    }

    /// `Σ_{i≤t} σ_i²`.
    pub fn sum_sigma2(&self) -> f64 {
        self.sum_sigma2
    }

    /// Per-parameter left-hand side sums.
    pub fn lhs_per_theta(&self) -> &[f64] {
        &self.lhs_theta
    }

    /// Advances by one step using `λ_{t+1}` from `schedule`.
    pub fn update(&mut self, schedule: &LambdaSchedule, obs: &StepObservation) -> Result<()> {
        let lambda = schedule.at(self.t + 1)?;
        self.update_with_lambda(lambda, obs)
    }

    /// Advances by one step with an explicit `λ`. On error the state is unchanged.
    pub fn update_with_lambda(&mut self, lambda: f64, obs: &StepObservation) -> Result<()> {
        let kind = self.kind;
        let name = kind.name();
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain {
                name: "lambda",
                value: lambda,
                domain: "[0, inf)",
            });
        }
        let n = self.lhs_theta.len();
        if obs.theta_count() != n {
            return Err(Error::DimensionMismatch(obs.theta_count(), n));
        }
        if obs.mean.len() != n {
            return Err(Error::DimensionMismatch(obs.mean.len(), n));
        }
        check_finite("loss", &obs.loss)?;
        check_finite("mean", &obs.mean)?;

        let vector = |v: &Option<Vec<f64>>, field: &'static str| -> Result<Vec<f64>> {
            let v = v.as_ref().ok_or(Error::MissingField(field, name))?;
            if v.len() != n {
                return Err(Error::DimensionMismatch(v.len(), n));
            }
            check_finite(field, v)?;
            Ok(v.clone())
        };
        let scalar = |v: Option<f64>, field: &'static str| -> Result<f64> {
            let v = v.ok_or(Error::MissingField(field, name))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(field));
            }
            Ok(v)
        };
        let positive = |v: f64, field: &'static str| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Domain {
                    name: field,
                    value: v,
                    domain: "(0, inf)",
                })
            }
        };
        let nonnegative_losses = || -> Result<()> {
            match obs.loss.iter().find(|f| **f < 0.0) {
                Some(f) => Err(Error::Domain {
                    name: "loss",
                    value: *f,
                    domain: "[0, inf)",
                }),
                None => Ok(()),
            }
        };
        let bounded_losses = |h: f64| -> Result<()> {
            match obs.loss.iter().find(|f| f.abs() > h) {
                Some(f) => Err(Error::Domain {
                    name: "loss",
                    value: *f,
                    domain: "[-H, H]",
                }),
                None => Ok(()),
            }
        };
        let cap = |cap: f64, strict: bool| -> Result<()> {
            let violated = if strict { lambda >= cap } else { lambda > cap };
            if violated {
                Err(Error::LambdaCap {
                    lambda,
                    cap,
                    kind: name,
                })
            } else {
                Ok(())
            }
        };

        let gaps: Vec<f64> = obs.mean.iter().zip(&obs.loss).map(|(m, f)| m - f).collect();
        let l2 = lambda * lambda;
        let mut d_scalar = 0.0;
        let mut d_theta = vec![0.0; n];
        let mut d_lhs: Vec<f64> = gaps.iter().map(|g| lambda * g).collect();
        let mut d_sigma2 = 0.0;

        match kind {
            ForwardKind::SubGaussian => {
                let sigma = positive(scalar(obs.sigma, "sigma")?, "sigma")?;
                if let Some(c) = obs.bernstein_c {
                    if c > 0.0 {
                        cap(1.0 / c, false)?;
                    }
                }
                d_sigma2 = sigma * sigma;
                d_scalar = l2 * d_sigma2 / 2.0;
            }
            ForwardKind::GaussianMixture => {
                let sigma = positive(scalar(obs.sigma, "sigma")?, "sigma")?;
                d_sigma2 = sigma * sigma;
                // λ is integrated out; the left-hand side is the raw gap sum.
                d_lhs = gaps.clone();
            }
            ForwardKind::BernsteinBounded => {
                let h = positive(scalar(obs.range, "range")?, "range")?;
                bounded_losses(h)?;
                cap(1.0 / h, false)?;
                let var = vector(&obs.variance, "variance")?;
                let e2 = std::f64::consts::E - 2.0;
                d_theta = var.iter().map(|v| l2 * e2 * v).collect();
            }
            ForwardKind::Bennett => {
                let h = positive(scalar(obs.range, "range")?, "range")?;
                bounded_losses(h)?;
                let psi = psi_poisson(lambda * h);
                d_theta = obs.mean.iter().map(|m| m * m / (h * h) * psi).collect();
            }
            ForwardKind::BernsteinCondition => {
                let sigma = positive(scalar(obs.sigma, "sigma")?, "sigma")?;
                let c = scalar(obs.bernstein_c, "bernstein_c")?;
                if c < 0.0 {
                    return Err(Error::Domain {
                        name: "bernstein_c",
                        value: c,
                        domain: "[0, inf)",
                    });
                }
                if c > 0.0 {
                    cap(1.0 / c, true)?;
                }
                d_scalar = l2 * sigma * sigma / (2.0 * (1.0 - c * lambda));
            }
            ForwardKind::BoundedMgf => {
                nonnegative_losses()?;
                d_theta = vector(&obs.log_mgf, "log_mgf")?;
                d_lhs = obs.loss.iter().map(|f| lambda * f).collect();
            }
            ForwardKind::SecondMoment => {
                nonnegative_losses()?;
                let m2 = vector(&obs.second_moment, "second_moment")?;
                d_theta = m2.iter().map(|m| l2 / 2.0 * m).collect();
            }
            ForwardKind::BercuTouati => match self.bercu {
                BercuForm::Tight => {
                    let var = vector(&obs.variance, "variance")?;
                    d_theta = gaps
                        .iter()
                        .zip(&var)
                        .map(|(g, v)| l2 / 6.0 * (g * g + 2.0 * v))
                        .collect();
                }
                BercuForm::Simplified => {
                    nonnegative_losses()?;
                    let m2 = vector(&obs.second_moment, "second_moment")?;
                    d_theta = obs
                        .loss
                        .iter()
                        .zip(&m2)
                        .map(|(f, m)| l2 / 6.0 * (f * f + 2.0 * m))
                        .collect();
                }
            },
            ForwardKind::PthMoment => {
                let p = scalar(obs.p, "p")?;
                if !(p > 1.0 && p <= 2.0) {
                    return Err(Error::Domain {
                        name: "p",
                        value: p,
                        domain: "(1, 2]",
                    });
                }
                let kappa = positive(scalar(obs.kappa, "kappa")?, "kappa")?;
                d_scalar = (lambda.powf(p) * kappa / p).ln_1p();
                d_lhs = gaps.iter().map(|g| zeta_p(lambda * g, p)).collect();
            }
        }

        check_finite("rhs increment", &d_theta)?;
        check_finite("lhs increment", &d_lhs)?;
        if !d_scalar.is_finite() {
            return Err(Error::NonFinite("rhs increment"));
        }

        self.t += 1;
        self.sum_lambda += lambda;
        self.sum_lambda_sq += l2;
        self.sum_sigma2 += d_sigma2;
        self.rhs_scalar += d_scalar;
        for (acc, d) in self.rhs_theta.iter_mut().zip(&d_theta) {
            *acc += d;
        }
        for (acc, d) in self.lhs_theta.iter_mut().zip(&d_lhs) {
            *acc += d;
        }
        Ok(())
    }

    /// The accumulated compensator, averaged under `ρ` where it depends on `θ`.
    pub fn deviation(&self, posterior: &Distribution) -> Result<f64> {
        if !self.kind.per_theta_rhs() {
            return Ok(self.rhs_scalar);
        }
        let rho = posterior.as_finite().ok_or_else(|| {
            Error::InvalidDistribution(format!("the {} bound needs a finite posterior", self.kind))
        })?;
        Ok(self.rhs_scalar + rho.expect(&self.rhs_theta)?)
    }

    /// Full right-hand side: deviation + `D_KL(ρ‖ν)` + `ln(1/δ)`.
    ///
    /// For the Gaussian mixture this is the square-root bound of
    /// [`Self::gaussian_mixture_rhs`] over the default `β` grid.
    pub fn rhs(&self, posterior: &Distribution, prior: &Distribution, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let kl = kl_divergence(posterior, prior)?;
        self.rhs_with_kl(posterior, kl, delta)
    }

    /// As [`Self::rhs`] with a precomputed divergence.
    pub fn rhs_with_kl(&self, posterior: &Distribution, kl: f64, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        check_kl(kl)?;
        if self.kind == ForwardKind::GaussianMixture {
            return self.gaussian_mixture_rhs(&default_beta_grid(), kl, delta);
        }
        Ok(self.deviation(posterior)? + kl + (1.0 / delta).ln())
    }

    /// `min_β √((s_t(β)/β)·(kl + ln(s_t(β)/δ)))` with `s_t(β) = 1 + β·Σσ_i²`,
    /// a bound on `Σ_{i≤t} E_ρ Δ_i(θ)`.
    pub fn gaussian_mixture_rhs(&self, betas: &[f64], kl: f64, delta: f64) -> Result<f64> {
        gaussian_mixture_rhs(self.sum_sigma2, betas, kl, delta)
    }

    /// `E_ρ` of the left-hand side: `Σ λ_i E_ρ Δ_i(θ)`, or the kind's variant
    /// (`Σ ζ_p(λ_i Δ_i)` for the p-th moment bound, `Σ λ_i E_ρ f_i` for the MGF
    /// bound, `Σ E_ρ Δ_i` for the Gaussian mixture).
    pub fn gap_lhs(&self, posterior: &FiniteMixture) -> Result<f64> {
        posterior.expect(&self.lhs_theta)
    }
}

/// See [`ForwardBoundState::gaussian_mixture_rhs`].
pub fn gaussian_mixture_rhs(sum_sigma2: f64, betas: &[f64], kl: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_kl(kl)?;
    if betas.is_empty() {
        return Err(Error::Empty("beta sweep"));
    }
    let mut best = f64::INFINITY;
    for &beta in betas {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain {
                name: "beta",
                value: beta,
                domain: "(0, inf)",
            });
        }
        let s = 1.0 + beta * sum_sigma2;
        best = best.min(((s / beta) * (kl + (s / delta).ln())).sqrt());
    }
    Ok(best)
}

/// `2^{-10}, 2^{-9.5}, …, 2^{10}`: 41 geometrically spaced mixture variances.
pub fn default_beta_grid() -> Vec<f64> {
    (0..41).map(|i| 2f64.powf(-10.0 + 0.5 * i as f64)).collect()
}

/// Value of the Gaussian-mixture supermartingale
/// `∫ exp(λD − λ²V/2) N(0, β)(dλ) = s^{−1/2}·exp(βD²/(2s))`, `s = 1 + βV`,
/// for gap sum `D` and variance proxy `V = Σσ_i²`.
pub fn gaussian_mixture_process(d: f64, v: f64, beta: f64) -> f64 {
    let s = 1.0 + beta * v;
    (beta * d * d / (2.0 * s)).exp() / s.sqrt()
}

fn check_kl(kl: f64) -> Result<()> {
    if kl >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "kl",
            value: kl,
            domain: "[0, inf]",
        })
    }
}
