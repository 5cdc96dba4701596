//! Replication of the terminal-guarantee put on the fixed-term asset.
//!
//! Holding ψ units of the fixed-term asset, the guarantee V(T) ≥ V̲ is
//! enforced by a liquid position worth X_B(t) that pays (V̲ − ψF(T))⁺ at the
//! horizon. Because F is driven by the same Brownian motion as the stock,
//! the put is spanned and X_B has a closed form in truncated kernel moments.

use crate::error::{Error, Result};
use crate::market::{MarketState, Scenario};
use crate::xi::{h_factor, xi_dz_ln, xi_ln};

/// Volatility below which the fixed-term asset is treated as deterministic.
pub(crate) const SIGMA_F_DETERMINISTIC: f64 = 1e-8;

/// A priced guarantee overlay at time 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuote {
    /// Fixed-term position size ψ.
    pub psi2: f64,
    /// Cost of the terminal put (V̲ − ψF(T))⁺.
    pub x_b: f64,
    /// Total locked capital ψF₀ + x_B.
    pub total_cost: f64,
}

/// Put value and its z-delta at a state, with the asset price moved in lock
/// step with the kernel (the two are comonotone functions of the same W, so
/// this is the derivative the hedge needs).
fn put_value_and_dz(
    t: f64,
    z: f64,
    f: f64,
    psi2: f64,
    scenario: &Scenario,
    want_dz: bool,
) -> Result<(f64, f64)> {
    let t_end = scenario.horizon_t();
    let tau = t_end - t;
    let vf = scenario.constraints.v_floor();
    let r = scenario.market.r();
    if psi2 == 0.0 {
        return Ok(((-r * tau).exp() * vf, 0.0));
    }
    let sf = scenario.illiquid.sigma_f();
    if sf < SIGMA_F_DETERMINISTIC {
        let payoff = (vf - psi2 * f * (scenario.illiquid.mu_f() * tau).exp()).max(0.0);
        return Ok(((-r * tau).exp() * payoff, 0.0));
    }
    let gamma = scenario.market.gamma();
    let h = h_factor(t, t_end, &scenario.illiquid, &scenario.market)?;
    // ψF(T) = C·Z̃(T)^{−σ_F/γ} with C = ψ·f·h·z^{σ_F/γ}; C is invariant
    // under kernel moves (f adjusts through the link), so z-derivatives
    // below hold C fixed.
    let ln_c = (psi2 * f * h).ln() + sf / gamma * z.ln();
    let c = ln_c.exp();
    let ln_a = gamma / sf * (ln_c - vf.ln());
    let k_f = 1.0 - sf / gamma;
    let xi_floor = xi_ln(t_end, t, z, 1.0, ln_a, f64::INFINITY, gamma, r);
    let xi_asset = xi_ln(t_end, t, z, k_f, ln_a, f64::INFINITY, gamma, r);
    let value = (vf * xi_floor - c * xi_asset) / z;
    if !want_dz {
        return Ok((value, 0.0));
    }
    let d_floor = xi_dz_ln(t_end, t, z, 1.0, ln_a, f64::INFINITY, gamma, r)?;
    let d_asset = xi_dz_ln(t_end, t, z, k_f, ln_a, f64::INFINITY, gamma, r)?;
    let dz = (vf * d_floor - c * d_asset) / z - value / z;
    Ok((value, dz))
}

/// Time-0 price of the terminal put (V̲ − ψF(T))⁺ for a position of ψ units.
pub fn put_price_x_b(psi2: f64, scenario: &Scenario) -> Result<f64> {
    if psi2.is_nan() || psi2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "psi2 must be non-negative, got {psi2}"
        )));
    }
    Ok(put_value_and_dz(0.0, 1.0, scenario.illiquid.f0(), psi2, scenario, false)?.0)
}

/// Quote the locked capital of a guaranteed position: put price and
/// ψF₀ + x_B(ψ).
pub fn replication_quote(psi2: f64, scenario: &Scenario) -> Result<BoundQuote> {
    let x_b = put_price_x_b(psi2, scenario)?;
    Ok(BoundQuote {
        psi2,
        x_b,
        total_cost: psi2 * scenario.illiquid.f0() + x_b,
    })
}

/// Put value and z-delta at a state, for assembling hedges of plans that
/// include the guarantee put as one leg.
pub(crate) fn put_value_and_dz_at(
    state: &MarketState,
    psi2: f64,
    scenario: &Scenario,
) -> Result<(f64, f64)> {
    put_value_and_dz(state.t(), state.z(), state.f(), psi2, scenario, true)
}

/// Value X_B(t) of the guarantee put at a state. At t = T this is the exact
/// payoff (V̲ − ψf)⁺.
pub fn put_value_x_b(state: &MarketState, psi2: f64, scenario: &Scenario) -> Result<f64> {
    if psi2.is_nan() || psi2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "psi2 must be non-negative, got {psi2}"
        )));
    }
    if state.t() > scenario.horizon_t() {
        return Err(Error::InvalidArgument(format!(
            "state time {} beyond horizon {}",
            state.t(),
            scenario.horizon_t()
        )));
    }
    Ok(put_value_and_dz(state.t(), state.z(), state.f(), psi2, scenario, false)?.0)
}

/// Stock fraction of the put-replication wealth X_B at a state.
///
/// π_B·X_B = −(γ/σ)·z·∂X_B/∂z with the asset price co-moving with the
/// kernel. Deterministic-asset and ψ = 0 positions are pure bond (0).
/// Errors at t ≥ T and when X_B = 0 (nothing left to allocate).
pub fn put_replication_pi_b(state: &MarketState, psi2: f64, scenario: &Scenario) -> Result<f64> {
    if psi2.is_nan() || psi2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "psi2 must be non-negative, got {psi2}"
        )));
    }
    if state.t() >= scenario.horizon_t() {
        return Err(Error::UndefinedStrategy(format!(
            "put replication ends at T = {}; got t = {}",
            scenario.horizon_t(),
            state.t()
        )));
    }
    if psi2 == 0.0 || scenario.illiquid.sigma_f() < SIGMA_F_DETERMINISTIC {
        return Ok(0.0);
    }
    let (value, dz) = put_value_and_dz(state.t(), state.z(), state.f(), psi2, scenario, true)?;
    if value <= 0.0 {
        return Err(Error::UndefinedStrategy(
            "put value is zero; stock fraction undefined".into(),
        ));
    }
    let gamma = scenario.market.gamma();
    Ok(-gamma / scenario.market.sigma() * state.z() * dz / value)
}
