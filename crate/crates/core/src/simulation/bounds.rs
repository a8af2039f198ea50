//! Per-bound trackers: each turns one step of losses and oracle moments into
//! an `(lhs, rhs)` pair, where a violation means `lhs > rhs`.

use std::collections::HashMap;
use std::sync::Arc;

use super::config::{BoundConfig, BoundKind};
use super::scenario::{Scenario, Step};
use crate::confseq::{stitched_cs_width, subgaussian_cs};
use crate::divergences::{log_sum_exp, renyi_divergence, tv_distance, Distribution, FiniteMixture};
use crate::error::{Error, Result};
use crate::forward::{BercuForm, ForwardBoundState, ForwardKind};
use crate::reverse::{
    convex_phi_rhs_stitched, convex_phi_rhs_target, ipm_rhs_stitched, ipm_rhs_target,
    mcallester_bound, mcallester_bound_target, renyi_convex_rhs, renyi_convex_rhs_target,
    seeger_rhs, seeger_rhs_target, thiemann_bound, thiemann_bound_optimized, thiemann_bound_target,
    thiemann_bound_target_optimized, ConvexPhiSpec, Phi,
};
use crate::schedule::{default_lambda_schedule, LambdaSchedule};

const DEFAULT_RENYI_ALPHA: f64 = 2.0;

/// Everything a tracker may read at time `t`, after the step has been absorbed.
pub(crate) struct Context<'a> {
    pub t: u64,
    pub delta: f64,
    pub rho: &'a Distribution,
    pub nu: &'a FiniteMixture,
    pub kl: f64,
    /// `Σ_{i≤t} f_i(θ)`.
    pub cum_loss: &'a [f64],
    pub risk: Option<&'a [f64]>,
    pub mean: Option<&'a [f64]>,
}

impl Context<'_> {
    fn rho(&self) -> &FiniteMixture {
        self.rho
            .as_finite()
            .expect("the harness only builds finite posteriors")
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Tracker {
    Forward {
        state: ForwardBoundState,
        schedule: LambdaSchedule,
        p: f64,
    },
    Seeger {
        target: Option<u64>,
    },
    McAllester {
        target: Option<u64>,
    },
    Thiemann {
        target: Option<u64>,
        lambda: Option<f64>,
    },
    ConvexPhi {
        spec: ConvexPhiSpec,
        target: Option<u64>,
    },
    Renyi {
        phi: Phi,
        alpha: f64,
        moments: Arc<HashMap<u64, f64>>,
        target: Option<u64>,
    },
    Ipm {
        spec: ConvexPhiSpec,
        target: Option<u64>,
    },
    SubGaussianCs {
        schedule: LambdaSchedule,
        sigma: f64,
        weighted: Vec<f64>,
        sum_lambda: f64,
        sum_lambda_sq: f64,
    },
    StitchedCs {
        sigma: f64,
    },
}

fn incompatible(kind: BoundKind, scenario: &str, why: &str) -> Error {
    Error::Config(format!(
        "bound `{kind}` cannot run on scenario `{scenario}`: {why}"
    ))
}

fn unused(kind: BoundKind, field: &str) -> Error {
    Error::Config(format!("field `{field}` does not apply to bound `{kind}`"))
}

/// Explicit schedules must supply a `λ` for every step of the run.
fn covering(schedule: LambdaSchedule, horizon: u64) -> Result<LambdaSchedule> {
    match schedule.at(horizon) {
        Ok(_) => Ok(schedule),
        Err(_) => Err(Error::Config(format!(
            "schedule has no lambda for t = {horizon} (the horizon)"
        ))),
    }
}

/// The time points the stitched and target forms query oracles at.
fn oracle_times(horizon: u64, target: Option<u64>) -> Vec<u64> {
    match target {
        Some(n) => vec![n],
        None => (0..64)
            .map(|k| 1u64 << k)
            .take_while(|j| *j <= horizon)
            .collect(),
    }
}

/// `ln E_ν E_D exp(λ_j φ(R̂_j, R))` by exact summation over the law of `R̂_j`.
fn exact_log_mgf(
    scenario: &Scenario,
    prior: &FiniteMixture,
    risk: &[f64],
    phi: Phi,
    lambda: f64,
    j: u64,
) -> Result<f64> {
    let mut terms = Vec::new();
    for (theta, w) in prior.weights().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let law = scenario
            .empirical_risk_law(theta, j)
            .ok_or(Error::Config("no exact law for the empirical risk".into()))?;
        for (x, p) in law {
            terms.push(w.ln() + p.ln() + lambda * phi.eval(x, risk[theta]));
        }
    }
    Ok(log_sum_exp(&terms))
}

/// `ln E_ν E_D[φ(R̂_j, R)^q]`.
fn exact_log_moment(
    scenario: &Scenario,
    prior: &FiniteMixture,
    risk: &[f64],
    phi: Phi,
    q: f64,
    j: u64,
) -> Result<f64> {
    let mut acc = 0.0;
    for (theta, w) in prior.weights().iter().enumerate() {
        let law = scenario
            .empirical_risk_law(theta, j)
            .ok_or(Error::Config("no exact law for the empirical risk".into()))?;
        for (x, p) in law {
            acc += w * p * phi.eval(x, risk[theta]).powf(q);
        }
    }
    Ok(acc.ln())
}

impl Tracker {
    pub(crate) fn new(
        cfg: &BoundConfig,
        scenario: &Scenario,
        scenario_name: &str,
        prior: &FiniteMixture,
        horizon: u64,
        delta: f64,
    ) -> Result<Self> {
        let kind = cfg.kind;
        let caps = scenario.capabilities();
        let no = |why: &str| incompatible(kind, scenario_name, why);
        let is_forward = matches!(kind, BoundKind::Forward(_));
        let is_reverse = matches!(
            kind,
            BoundKind::Seeger
                | BoundKind::McAllester
                | BoundKind::Thiemann
                | BoundKind::ConvexPhi
                | BoundKind::Renyi
                | BoundKind::Ipm
        );
        let uses_schedule = is_forward || kind == BoundKind::SubGaussianCs;
        if cfg.schedule.is_some() && !uses_schedule {
            return Err(unused(kind, "schedule"));
        }
        if cfg.target.is_some() && !is_reverse {
            return Err(unused(kind, "target"));
        }
        if cfg.phi.is_some()
            && !matches!(
                kind,
                BoundKind::ConvexPhi | BoundKind::Renyi | BoundKind::Ipm
            )
        {
            return Err(unused(kind, "phi"));
        }
        if cfg.alpha.is_some() && kind != BoundKind::Renyi {
            return Err(unused(kind, "alpha"));
        }
        if cfg.lambda.is_some() && kind != BoundKind::Thiemann {
            return Err(unused(kind, "lambda"));
        }
        if cfg.p.is_some() && kind != BoundKind::Forward(ForwardKind::PthMoment) {
            return Err(unused(kind, "p"));
        }
        if cfg.bercu.is_some() && kind != BoundKind::Forward(ForwardKind::BercuTouati) {
            return Err(unused(kind, "bercu"));
        }
        if let Some(n) = cfg.target {
            if n == 0 || n > horizon {
                return Err(Error::Config(format!(
                    "target {n} must lie in [1, horizon = {horizon}]"
                )));
            }
        }

        if is_reverse && !caps.unit_exchangeable {
            return Err(no("needs exchangeable losses in [0, 1] with a known risk"));
        }
        let needs_law = matches!(
            kind,
            BoundKind::ConvexPhi | BoundKind::Renyi | BoundKind::Ipm
        );
        if needs_law && !caps.exact_law {
            return Err(no("needs an exactly computable law of the empirical risk"));
        }
        let risk = scenario.risk();
        let phi = cfg.phi.as_deref().map(str::parse::<Phi>).transpose()?;

        let tracker = match kind {
            BoundKind::Forward(fk) => {
                let (need, why): (bool, &str) = match fk {
                    ForwardKind::SubGaussian | ForwardKind::GaussianMixture => {
                        (caps.sigma, "needs subGaussian losses")
                    }
                    ForwardKind::BernsteinBounded | ForwardKind::Bennett => {
                        (caps.range, "needs bounded losses")
                    }
                    ForwardKind::BernsteinCondition => {
                        (caps.bernstein, "needs Bernstein's moment condition")
                    }
                    ForwardKind::BoundedMgf => (
                        caps.nonnegative && caps.mgf,
                        "needs nonnegative losses with a finite MGF",
                    ),
                    ForwardKind::SecondMoment => (caps.nonnegative, "needs nonnegative losses"),
                    ForwardKind::BercuTouati => match cfg.bercu.unwrap_or_default() {
                        BercuForm::Tight => (true, ""),
                        BercuForm::Simplified => (caps.nonnegative, "needs nonnegative losses"),
                    },
                    ForwardKind::PthMoment => (caps.abs_moment, "needs a central p-th moment"),
                };
                if !need {
                    return Err(no(why));
                }
                let p = cfg.p.unwrap_or_else(|| scenario.default_p());
                if !(p > 1.0 && p <= 2.0) {
                    return Err(Error::Config(format!("p = {p} must be in (1, 2]")));
                }
                let schedule = match &cfg.schedule {
                    Some(s) => covering(s.build()?, horizon)?,
                    None => default_lambda_schedule(delta, 1.0)?,
                };
                let state = ForwardBoundState::new(fk, scenario.theta_count())
                    .with_bercu_form(cfg.bercu.unwrap_or_default());
                Tracker::Forward { state, schedule, p }
            }
            BoundKind::Seeger => Tracker::Seeger { target: cfg.target },
            BoundKind::McAllester => Tracker::McAllester { target: cfg.target },
            BoundKind::Thiemann => {
                if let Some(l) = cfg.lambda {
                    if !(l > 0.0 && l < 2.0) {
                        return Err(Error::Config(format!(
                            "thiemann lambda = {l} must be in (0, 2)"
                        )));
                    }
                }
                Tracker::Thiemann {
                    target: cfg.target,
                    lambda: cfg.lambda,
                }
            }
            BoundKind::ConvexPhi | BoundKind::Ipm => {
                let default_phi = if kind == BoundKind::Ipm {
                    Phi::Quadratic
                } else {
                    Phi::Catoni(1.0)
                };
                let phi = phi.unwrap_or(default_phi);
                if kind == BoundKind::Ipm && phi == Phi::Kl {
                    return Err(Error::Config(
                        "the TV-IPM bound needs a bounded phi (`quadratic` or `catoni:<c>`)".into(),
                    ));
                }
                let risk = risk.expect("checked above");
                let mut table = HashMap::new();
                for j in oracle_times(horizon, cfg.target) {
                    table.insert(j, exact_log_mgf(scenario, prior, &risk, phi, j as f64, j)?);
                }
                let spec = ConvexPhiSpec::new(
                    phi,
                    move |_, j| {
                        table
                            .get(&j)
                            .copied()
                            .ok_or(Error::Config(format!("no MGF oracle at j = {j}")))
                    },
                    |j| j as f64,
                );
                if kind == BoundKind::Ipm {
                    Tracker::Ipm {
                        spec,
                        target: cfg.target,
                    }
                } else {
                    Tracker::ConvexPhi {
                        spec,
                        target: cfg.target,
                    }
                }
            }
            BoundKind::Renyi => {
                let phi = phi.unwrap_or(Phi::Kl);
                if let Phi::Catoni(_) = phi {
                    return Err(Error::Config(
                        "the Renyi bound needs a nonnegative phi (`kl` or `quadratic`)".into(),
                    ));
                }
                let alpha = cfg.alpha.unwrap_or(DEFAULT_RENYI_ALPHA);
                if !(alpha > 1.0) || !alpha.is_finite() {
                    return Err(Error::Config(format!(
                        "alpha = {alpha} must be finite and > 1"
                    )));
                }
                let risk = risk.expect("checked above");
                let q = alpha / (alpha - 1.0);
                let mut table = HashMap::new();
                for j in oracle_times(horizon, cfg.target) {
                    table.insert(j, exact_log_moment(scenario, prior, &risk, phi, q, j)?);
                }
                Tracker::Renyi {
                    phi,
                    alpha,
                    moments: Arc::new(table),
                    target: cfg.target,
                }
            }
            BoundKind::SubGaussianCs | BoundKind::StitchedCs => {
                if !(caps.iid && caps.sigma) {
                    return Err(no("needs i.i.d. subGaussian losses"));
                }
                let sigma = scenario_sigma(scenario)?;
                if kind == BoundKind::StitchedCs {
                    Tracker::StitchedCs { sigma }
                } else {
                    let schedule = match &cfg.schedule {
                        Some(s) => covering(s.build()?, horizon)?,
                        None => default_lambda_schedule(delta, sigma)?,
                    };
                    Tracker::SubGaussianCs {
                        schedule,
                        sigma,
                        weighted: vec![0.0; scenario.theta_count()],
                        sum_lambda: 0.0,
                        sum_lambda_sq: 0.0,
                    }
                }
            }
        };
        Ok(tracker)
    }

    /// Absorbs step `t`.
    pub(crate) fn update(&mut self, t: u64, step: &Step) -> Result<()> {
        match self {
            Tracker::Forward { state, schedule, p } => {
                let mut obs = step.obs.clone();
                let mut lambda = schedule.at(t)?;
                match state.kind() {
                    ForwardKind::SubGaussian => obs.bernstein_c = None,
                    ForwardKind::BernsteinBounded => {
                        if let Some(h) = obs.range {
                            lambda = lambda.min(1.0 / h);
                        }
                    }
                    ForwardKind::BernsteinCondition => {
                        if let Some(c) = obs.bernstein_c.filter(|c| *c > 0.0) {
                            lambda = lambda.min(0.5 / c);
                        }
                    }
                    ForwardKind::BoundedMgf => {
                        let mgf = step
                            .laws
                            .iter()
                            .map(|l| l.log_mgf(lambda).ok_or(Error::NonFinite("log_mgf")))
                            .collect::<Result<Vec<_>>>()?;
                        obs.log_mgf = Some(mgf);
                    }
                    ForwardKind::PthMoment => {
                        let kappa = step
                            .laws
                            .iter()
                            .map(|l| l.abs_central_moment(*p).ok_or(Error::NonFinite("kappa")))
                            .collect::<Result<Vec<_>>>()?
                            .into_iter()
                            .fold(0.0, f64::max);
                        // A degenerate step has nothing to bound; any positive κ is valid.
                        obs.kappa = Some(kappa.max(f64::MIN_POSITIVE));
                        obs.p = Some(*p);
                    }
                    _ => {}
                }
                state.update_with_lambda(lambda, &obs)
            }
            Tracker::SubGaussianCs {
                schedule,
                weighted,
                sum_lambda,
                sum_lambda_sq,
                ..
            } => {
                let l = schedule.at(t)?;
                for (w, f) in weighted.iter_mut().zip(&step.loss) {
                    *w += l * f;
                }
                *sum_lambda += l;
                *sum_lambda_sq += l * l;
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `(lhs, rhs)` at time `t`, or `None` when the bound makes no claim yet.
    pub(crate) fn evaluate(&self, ctx: &Context<'_>) -> Result<Option<(f64, f64)>> {
        let t = ctx.t;
        let before_target = |target: &Option<u64>| target.is_some_and(|n| t < n);
        let rho = ctx.rho();
        let empirical = || -> Vec<f64> { ctx.cum_loss.iter().map(|c| c / t as f64).collect() };
        let risk = || ctx.risk.expect("reverse bounds require a known risk");
        let phi_values = |phi: Phi| -> Vec<f64> {
            empirical()
                .iter()
                .zip(risk())
                .map(|(x, r)| phi.eval(*x, *r))
                .collect()
        };
        let out = match self {
            Tracker::Forward { state, .. } => {
                let lhs = state.gap_lhs(rho)?;
                let rhs = state.rhs_with_kl(ctx.rho, ctx.kl, ctx.delta)?;
                (lhs, rhs)
            }
            Tracker::Seeger { target } => {
                if before_target(target) {
                    return Ok(None);
                }
                let lhs = rho.expect(&phi_values(Phi::Kl))?;
                let rhs = match target {
                    Some(n) => seeger_rhs_target(*n, ctx.kl, ctx.delta)?,
                    None => seeger_rhs(t, ctx.kl, ctx.delta)?,
                };
                (lhs, rhs)
            }
            Tracker::McAllester { target } => {
                if before_target(target) {
                    return Ok(None);
                }
                let r_hat = rho.expect(&empirical())?.clamp(0.0, 1.0);
                let b = match target {
                    Some(n) => mcallester_bound_target(*n, ctx.kl, ctx.delta, r_hat)?,
                    None => mcallester_bound(t, ctx.kl, ctx.delta, r_hat)?,
                };
                (rho.expect(risk())?, b.raw)
            }
            Tracker::Thiemann { target, lambda } => {
                if before_target(target) {
                    return Ok(None);
                }
                let r_hat = rho.expect(&empirical())?.clamp(0.0, 1.0);
                let b = match (target, lambda) {
                    (Some(n), Some(l)) => thiemann_bound_target(*n, ctx.kl, ctx.delta, *l, r_hat)?,
                    (Some(n), None) => {
                        thiemann_bound_target_optimized(*n, ctx.kl, ctx.delta, r_hat)?.1
                    }
                    (None, Some(l)) => thiemann_bound(t, ctx.kl, ctx.delta, *l, r_hat)?,
                    (None, None) => thiemann_bound_optimized(t, ctx.kl, ctx.delta, r_hat)?.1,
                };
                (rho.expect(risk())?, b.raw)
            }
            Tracker::ConvexPhi { spec, target } => {
                if before_target(target) {
                    return Ok(None);
                }
                let lhs = rho.expect(&phi_values(spec.phi))?;
                let rhs = match target {
                    Some(n) => convex_phi_rhs_target(spec, *n, t, ctx.kl, ctx.delta)?,
                    None => convex_phi_rhs_stitched(spec, t, ctx.kl, ctx.delta)?,
                };
                (lhs, rhs)
            }
            Tracker::Ipm { spec, target } => {
                if before_target(target) {
                    return Ok(None);
                }
                let lhs = rho.expect(&phi_values(spec.phi))?;
                // |E_ρ h − E_ν h| ≤ (sup h − inf h)·TV for h = λφ.
                let tv = tv_distance(rho, ctx.nu)?;
                let j = target.unwrap_or_else(|| crate::stitch::eta(t).expect("t ≥ 1"));
                let gamma = spec.lambda_at(j) * phi_range(spec.phi) * tv;
                let rhs = match target {
                    Some(n) => ipm_rhs_target(spec, *n, t, gamma, ctx.delta)?,
                    None => ipm_rhs_stitched(spec, t, gamma, ctx.delta)?,
                };
                (lhs, rhs)
            }
            Tracker::Renyi {
                phi,
                alpha,
                moments,
                target,
            } => {
                if before_target(target) {
                    return Ok(None);
                }
                let lhs = rho.expect(&phi_values(*phi))?.ln();
                let d = renyi_divergence(rho, ctx.nu, *alpha)?;
                let moment = |j: u64| {
                    moments
                        .get(&j)
                        .copied()
                        .ok_or(Error::Config(format!("no moment oracle at j = {j}")))
                };
                let rhs = match target {
                    Some(n) => renyi_convex_rhs_target(*n, t, *alpha, d, moment, ctx.delta)?,
                    None => renyi_convex_rhs(t, *alpha, d, moment, ctx.delta)?,
                };
                (lhs, rhs)
            }
            Tracker::SubGaussianCs {
                sigma,
                weighted,
                sum_lambda,
                sum_lambda_sq,
                ..
            } => {
                let cs = subgaussian_cs(
                    t,
                    rho.expect(weighted)?,
                    *sum_lambda,
                    *sum_lambda_sq,
                    *sigma,
                    ctx.kl,
                    ctx.delta,
                )?;
                let truth =
                    rho.expect(ctx.mean.expect("confidence sequences need i.i.d. means"))?;
                ((cs.center - truth).abs(), cs.width)
            }
            Tracker::StitchedCs { sigma } => {
                // Losses rescaled by 1/σ to the unit-scale form, then mapped back.
                let center = rho.expect(&empirical())?;
                let width = sigma * stitched_cs_width(t, ctx.kl, ctx.delta)?;
                let truth =
                    rho.expect(ctx.mean.expect("confidence sequences need i.i.d. means"))?;
                ((center - truth).abs(), width)
            }
        };
        Ok(Some(out))
    }
}

/// `sup φ − inf φ` on `[0, 1]²`.
fn phi_range(phi: Phi) -> f64 {
    match phi {
        Phi::Quadratic => 2.0,
        // −c·x ∈ [−c, 0] and −ln(1 − y(1 − e^{−c})) ∈ [0, c].
        Phi::Catoni(c) => 2.0 * c,
        Phi::Kl => f64::INFINITY,
    }
}

/// The subGaussian scale of an i.i.d. scenario, read from its first step's oracle.
fn scenario_sigma(scenario: &Scenario) -> Result<f64> {
    let mut st = scenario.start(0, 0, 1);
    scenario
        .step(&mut st, 0, 0, 1)
        .obs
        .sigma
        .ok_or(Error::Config("scenario has no subGaussian scale".into()))
}
