//! Stitched bounds for exchangeable data, built on reverse submartingales.
//!
//! For a convex `φ`, `φ_t(θ) = φ(R̂_t(θ), R(θ))` is a reverse submartingale.
//! A Ville-type inequality applies on each epoch `[2^k, 2^{k+1})`; stitching
//! the epochs together costs the iterated-logarithm term `IL_t`. Each bound
//! also has a target-time form that drops `IL_t` but only speaks about
//! `t ≥ n` for a prespecified `n`.
//!
//! All functions assume the caller has established exchangeability; nothing
//! here can check it.

use std::sync::Arc;

use crate::divergences::{kl_inv_upper, klsf_unchecked};
use crate::error::{check_delta, check_probability, Error, Result};
use crate::stitch::{eta, il, ln_xi};

/// A convex comparison `φ(R̂, R)` between empirical and true risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// `kl(x‖y)`.
    Kl,
    /// `2(x − y)²`.
    Quadratic,
    /// `−c·x − ln(1 − y(1 − e^{−c}))`.
    Catoni(f64),
}

impl Phi {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Phi::Kl => klsf_unchecked(x, y),
            Phi::Quadratic => 2.0 * (x - y) * (x - y),
            Phi::Catoni(c) => -c * x - (y * (-c).exp_m1()).ln_1p(),
        }
    }
}

impl std::str::FromStr for Phi {
    type Err = Error;

    /// `kl`, `quadratic`, or `catoni:<c>` with `c > 0`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Phi::Kl),
            "quadratic" => Ok(Phi::Quadratic),
            _ => {
                let c = s
                    .strip_prefix("catoni:")
                    .and_then(|c| c.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown phi `{s}`")))?;
                if c > 0.0 && c.is_finite() {
                    Ok(Phi::Catoni(c))
                } else {
                    Err(Error::Config(format!(
                        "catoni constant must be positive, got {c}"
                    )))
                }
            }
        }
    }
}

type MgfFn = dyn Fn(f64, u64) -> Result<f64> + Send + Sync;
type LambdaFn = dyn Fn(u64) -> f64 + Send + Sync;

/// A convex `φ` together with the oracles the bound needs: the log-MGF
/// `(λ, j) ↦ ln E_ν E_D exp(λ φ_j(θ))` under the
/// data-free prior `ν` and the per-epoch weight `j ↦ λ_j`.
#[derive(Clone)]
pub struct ConvexPhiSpec {
    pub phi: Phi,
    mgf: Arc<MgfFn>,
    lambda: Arc<LambdaFn>,
}

impl std::fmt::Debug for ConvexPhiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexPhiSpec")
            .field("phi", &self.phi)
            .finish_non_exhaustive()
    }
}

impl ConvexPhiSpec {
    pub fn new(
        phi: Phi,
        mgf: impl Fn(f64, u64) -> Result<f64> + Send + Sync + 'static,
        lambda: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi,
            mgf: Arc::new(mgf),
            lambda: Arc::new(lambda),
        }
    }

    /// `φ = kl`, `λ_j = j`, with Maurer's bound `ln ξ(j)` on the log-MGF;
    /// valid for losses in `[0, 1]`.
    pub fn maurer() -> Self {
        Self::new(Phi::Kl, |_, j| ln_xi(j), |j| j as f64)
    }

    pub fn lambda_at(&self, j: u64) -> f64 {
        (self.lambda)(j)
    }

    pub fn ln_mgf(&self, lambda: f64, j: u64) -> Result<f64> {
        (self.mgf)(lambda, j)
    }

    fn positive_lambda(&self, j: u64) -> Result<f64> {
        let l = self.lambda_at(j);
        if l > 0.0 && l.is_finite() {
            Ok(l)
        } else {
            Err(Error::Domain {
                name: "lambda",
                value: l,
                domain: "(0, inf)",
            })
        }
    }
}

impl ConvexPhiSpec {
    /// Oracles that hold for any losses in `[0, 1]`, with `λ_j = j`: Maurer's
    /// `ln ξ(j)` for `kl` (and for `2(x−y)² ≤ kl` by Pinsker), and `0` for
    /// Catoni's `φ`, whose exponential moment is at most one by convexity.
    pub fn data_free(phi: Phi) -> Self {
        match phi {
            Phi::Kl | Phi::Quadratic => Self::new(phi, |_, j| ln_xi(j), |j| j as f64),
            Phi::Catoni(_) => Self::new(phi, |_, _| Ok(0.0), |j| j as f64),
        }
    }
}

/// A data-free bound on `ln E[φ_j^q]` for nonnegative `φ ∈ {kl, quadratic}`
/// and losses in `[0, 1]`: `x^q ≤ (q/(e·j))^q e^{jx}` turns Maurer's bound into
/// `q·ln(q/(e·j)) + ln ξ(j)`.
pub fn data_free_log_moment(phi: Phi, q: f64, j: u64) -> Result<f64> {
    if let Phi::Catoni(_) = phi {
        return Err(Error::Config(
            "Catoni's phi can be negative; no moment bound".into(),
        ));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain {
            name: "q",
            value: q,
            domain: "(0, inf)",
        });
    }
    let jf = j as f64;
    Ok(q * (q / (std::f64::consts::E * jf)).ln() + ln_xi(j)?)
}

/// Largest `E_ρ R` consistent with `E_ρ φ(R̂, R) ≤ bound` given `E_ρ R̂ = r_hat`,
/// using convexity of `φ` to pass `E_ρ` inside. Clipped to `[0, 1]`.
pub fn convex_phi_risk_bound(phi: Phi, r_hat: f64, bound: f64) -> Result<f64> {
    check_probability("r_hat", r_hat)?;
    if bound.is_nan() {
        return Err(Error::NonFinite("bound"));
    }
    let b = bound.max(0.0);
    let r = match phi {
        Phi::Kl => kl_inv_upper(r_hat, b)?,
        Phi::Quadratic => r_hat + (b / 2.0).sqrt(),
        Phi::Catoni(c) => -(-(bound + c * r_hat)).exp_m1() / -(-c).exp_m1(),
    };
    Ok(r.clamp(0.0, 1.0))
}

/// A risk bound for `[0, 1]` losses: the raw formula and its value clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBound {
    pub raw: f64,
    pub clipped: f64,
}

impl RiskBound {
    fn new(raw: f64) -> Self {
        Self {
            raw,
            clipped: raw.clamp(0.0, 1.0),
        }
    }
}

/// `[ln E exp(λ_η φ_η) + kl + ln(1/δ) + IL_t] / λ_η` with `η = η(t)`; bounds
/// `E_ρ φ(R̂_t, R)` for all `t ≥ 1` simultaneously.
pub fn convex_phi_rhs_stitched(spec: &ConvexPhiSpec, t: u64, kl: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    let e = eta(t)?;
    let lambda = spec.positive_lambda(e)?;
    let mgf = spec.ln_mgf(lambda, e)?;
    Ok((mgf + kl + (1.0 / delta).ln() + il(t)?) / lambda)
}

/// `[ln E exp(λ_n φ_n) + kl + ln(1/δ)] / λ_n`, valid for all `t ≥ n`.
pub fn convex_phi_rhs_target(
    spec: &ConvexPhiSpec,
    n: u64,
    t: u64,
    kl: f64,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_target(n, t)?;
    let lambda = spec.positive_lambda(n)?;
    let mgf = spec.ln_mgf(lambda, n)?;
    Ok((mgf + kl + (1.0 / delta).ln()) / lambda)
}

/// `(kl + ln(ξ(η)/δ) + IL_t)/η`; bounds `E_ρ kl(R̂_t‖R)` for all `t`.
pub fn seeger_rhs(t: u64, kl: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    let e = eta(t)?;
    Ok((kl + ln_xi(e)? - delta.ln() + il(t)?) / e as f64)
}

/// `(kl + ln(ξ(n)/δ))/n`, valid for all `t ≥ n`.
pub fn seeger_rhs_target(n: u64, kl: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    if n == 0 {
        return Err(zero_n());
    }
    Ok((kl + ln_xi(n)? - delta.ln()) / n as f64)
}

/// Upper bound on `E_ρ R` by inverting the stitched Seeger bound at `r̂ = E_ρ R̂_t`.
pub fn seeger_risk_bound(t: u64, kl: f64, delta: f64, r_hat: f64) -> Result<f64> {
    kl_inv_upper(r_hat, seeger_rhs(t, kl, delta)?)
}

/// `r̂ + √((kl + ln(2√η/δ) + IL_t)/(2η))`.
pub fn mcallester_bound(t: u64, kl: f64, delta: f64, r_hat: f64) -> Result<RiskBound> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_probability("r_hat", r_hat)?;
    let e = eta(t)? as f64;
    let num = kl + (2.0 * e.sqrt() / delta).ln() + il(t)?;
    Ok(RiskBound::new(r_hat + (num / (2.0 * e)).sqrt()))
}

/// `r̂ + √((kl + ln(2n/δ))/(2n))`, valid for all `t ≥ n`.
pub fn mcallester_bound_target(n: u64, kl: f64, delta: f64, r_hat: f64) -> Result<RiskBound> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_probability("r_hat", r_hat)?;
    if n == 0 {
        return Err(zero_n());
    }
    let nf = n as f64;
    Ok(RiskBound::new(
        r_hat + ((kl + (2.0 * nf / delta).ln()) / (2.0 * nf)).sqrt(),
    ))
}

/// `r̂/(1−λ/2) + (kl + ln(2√η/δ) + IL_t)/(η·λ·(1−λ/2))` for `λ ∈ (0, 2)`.
pub fn thiemann_bound(t: u64, kl: f64, delta: f64, lambda: f64, r_hat: f64) -> Result<RiskBound> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_probability("r_hat", r_hat)?;
    check_thiemann_lambda(lambda)?;
    let e = eta(t)? as f64;
    let c = kl + (2.0 * e.sqrt() / delta).ln() + il(t)?;
    Ok(thiemann_formula(r_hat, c, e, lambda))
}

/// Target-time Thiemann bound at `n`: `η` becomes `n` and `IL_t` disappears.
pub fn thiemann_bound_target(
    n: u64,
    kl: f64,
    delta: f64,
    lambda: f64,
    r_hat: f64,
) -> Result<RiskBound> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_probability("r_hat", r_hat)?;
    check_thiemann_lambda(lambda)?;
    if n == 0 {
        return Err(zero_n());
    }
    let nf = n as f64;
    let c = kl + (2.0 * nf.sqrt() / delta).ln();
    Ok(thiemann_formula(r_hat, c, nf, lambda))
}

/// Grid of 199 values of `λ` uniformly spaced on `[0.01, 1.99]`.
pub fn thiemann_grid() -> impl Iterator<Item = f64> {
    (0..199).map(|i| 0.01 + 0.01 * i as f64)
}

/// [`thiemann_bound`] minimized over [`thiemann_grid`]; returns the minimizing `λ`.
///
/// The bound holds simultaneously for every `λ ∈ (0, 2)`, so the minimum is valid.
pub fn thiemann_bound_optimized(
    t: u64,
    kl: f64,
    delta: f64,
    r_hat: f64,
) -> Result<(f64, RiskBound)> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_probability("r_hat", r_hat)?;
    let e = eta(t)? as f64;
    let c = kl + (2.0 * e.sqrt() / delta).ln() + il(t)?;
    Ok(thiemann_minimize(r_hat, c, e))
}

/// Target-time counterpart of [`thiemann_bound_optimized`].
pub fn thiemann_bound_target_optimized(
    n: u64,
    kl: f64,
    delta: f64,
    r_hat: f64,
) -> Result<(f64, RiskBound)> {
    check_delta(delta)?;
    check_nonnegative("kl", kl)?;
    check_probability("r_hat", r_hat)?;
    if n == 0 {
        return Err(zero_n());
    }
    let nf = n as f64;
    let c = kl + (2.0 * nf.sqrt() / delta).ln();
    Ok(thiemann_minimize(r_hat, c, nf))
}

fn thiemann_minimize(r_hat: f64, c: f64, e: f64) -> (f64, RiskBound) {
    thiemann_grid()
        .map(|l| (l, thiemann_formula(r_hat, c, e, l)))
        .fold((f64::NAN, RiskBound::new(f64::INFINITY)), |best, cur| {
            if cur.1.raw < best.1.raw {
                cur
            } else {
                best
            }
        })
}

fn thiemann_formula(r_hat: f64, c: f64, e: f64, lambda: f64) -> RiskBound {
    let shrink = 1.0 - lambda / 2.0;
    RiskBound::new(r_hat / shrink + c / (e * shrink * lambda))
}

/// [`convex_phi_rhs_stitched`] with an integral probability metric `γ(ρ, ν)`
/// in place of the KL divergence. For total variation the caller scales `γ`
/// to the declared function class.
pub fn ipm_rhs_stitched(spec: &ConvexPhiSpec, t: u64, gamma: f64, delta: f64) -> Result<f64> {
    check_nonnegative("gamma", gamma)?;
    convex_phi_rhs_stitched(spec, t, gamma, delta)
}

/// Target-time counterpart of [`ipm_rhs_stitched`].
pub fn ipm_rhs_target(spec: &ConvexPhiSpec, n: u64, t: u64, gamma: f64, delta: f64) -> Result<f64> {
    check_nonnegative("gamma", gamma)?;
    convex_phi_rhs_target(spec, n, t, gamma, delta)
}

/// `((α−1)/α)·(D_α + ln E_{ν,D}[φ_η^{α/(α−1)}] + ln(1/δ) + IL_t)`, a bound on
/// `ln E_ρ φ(R̂_t, R)`. `moment` maps `j` to the log-moment at epoch start `j`.
pub fn renyi_convex_rhs(
    t: u64,
    alpha: f64,
    d_alpha: f64,
    moment: impl Fn(u64) -> Result<f64>,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_alpha(alpha)?;
    check_nonnegative("d_alpha", d_alpha)?;
    let e = eta(t)?;
    Ok((alpha - 1.0) / alpha * (d_alpha + moment(e)? - delta.ln() + il(t)?))
}

/// Target-time counterpart of [`renyi_convex_rhs`], valid for `t ≥ n`.
pub fn renyi_convex_rhs_target(
    n: u64,
    t: u64,
    alpha: f64,
    d_alpha: f64,
    moment: impl Fn(u64) -> Result<f64>,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_alpha(alpha)?;
    check_nonnegative("d_alpha", d_alpha)?;
    check_target(n, t)?;
    Ok((alpha - 1.0) / alpha * (d_alpha + moment(n)? - delta.ln()))
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: v,
            domain: "[0, inf]",
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(1, inf]",
        })
    }
}

fn check_thiemann_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 2.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "lambda",
            value: lambda,
            domain: "(0, 2)",
        })
    }
}

fn check_target(n: u64, t: u64) -> Result<()> {
    if n == 0 {
        return Err(zero_n());
    }
    if t < n {
        return Err(Error::Domain {
            name: "t",
            value: t as f64,
            domain: "[n, inf)",
        });
    }
    Ok(())
}

fn zero_n() -> Error {
    Error::Domain {
        name: "n",
        value: 0.0,
        domain: "[1, inf)",
    }
}
