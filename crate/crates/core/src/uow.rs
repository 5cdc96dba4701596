//! Terminal-wealth subproblem: choose a fixed-term position ψ at time 0 and
//! a liquid investment plan financed by capital v₂ to maximize
//! E[V(T)^{p₂}/p₂] subject to V(T) ≥ V̲.
//!
//! The optimal terminal wealth is the pointwise maximum of three claims —
//! the guarantee V̲, the asset leg ψF(T), and the discretionary claim
//! I₂(λ̃₂Z̃(T)) = (λ̃₂Z̃(T))^{1/(p₂−1)} — so wealth and value decompose into
//! truncated kernel moments over the regions where each claim is on top.
//! The region layout depends on the sign of D = 1 + σ_F(p₂−1)/γ, which
//! compares the asset's log-volatility σ_F with the discretionary claim's
//! γ/(1−p₂).

use crate::bound::{self, SIGMA_F_DETERMINISTIC};
use crate::error::{Error, Result};
use crate::market::{
    classify_nonredundancy, BoundaryFlag, MarketState, Nonredundancy, Scenario,
};
use crate::roots;
use crate::xi::{h_factor, xi_dz_ln, xi_ln};

/// Relative slack below which a capital is treated as exactly the boundary.
const BOUNDARY_REL_TOL: f64 = 1e-9;

/// Which claim-layout regime the solved plan lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// σ_F ≈ 0: the asset pays a known amount, a single floor max(V̲, ψF(T)).
    DeterministicAsset,
    /// ψ = 0: no asset leg, the guarantee is the only floor.
    ZeroPosition,
    /// σ_F(1 − p₂) < γ: the discretionary claim outgrows the asset, topping
    /// the stack in good states with the asset in a middle band.
    DiscretionaryDominatesGoodStates,
    /// σ_F(1 − p₂) = γ: asset and discretionary claims are proportional and
    /// a single z-independent comparison decides which one is on top.
    ProportionalClaims,
    /// σ_F(1 − p₂) > γ: the asset outgrows the discretionary claim and tops
    /// the stack in good states.
    AssetDominatesGoodStates,
}

/// Solved terminal-wealth subproblem at a capital v₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UoWSolution {
    /// Capital allocated to terminal wealth.
    pub v2: f64,
    /// Fixed-term position chosen at time 0.
    pub psi2_star: f64,
    /// Multiplier of the discretionary budget; `None` when the plan is pure
    /// replication (all capital locked in asset + guarantee put).
    pub lambda2: Option<f64>,
    /// Time-0 cost of the guarantee put (V̲ − ψF(T))⁺.
    pub x_b: f64,
    /// Time-0 discretionary budget x̃₂ = v₂ − ψF₀ − x_B.
    pub x_tilde2: f64,
    /// Optimal expected utility of terminal wealth.
    pub value: f64,
    /// Claim-layout regime at the optimum.
    pub case_tag: CaseTag,
    /// Interior vs minimal-capital boundary.
    pub boundary: BoundaryFlag,
}

/// Minimal capital that can finance the guarantee: v₂_min = e^{−rT}·V̲
/// (a pure bond position, ψ = 0).
pub fn v2_min(scenario: &Scenario) -> f64 {
    (-scenario.market.r() * scenario.horizon_t()).exp() * scenario.constraints.v_floor()
}

/// One truncated-moment contribution coef·ξ(T, t, z, k, lo, hi) with
/// log-space truncation bounds.
#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    k: f64,
    lo: f64,
    hi: f64,
}

fn eval_terms(terms: &[Term], t: f64, z: f64, scenario: &Scenario) -> f64 {
    let t_end = scenario.horizon_t();
    let gamma = scenario.market.gamma();
    let r = scenario.market.r();
    terms
        .iter()
        .map(|tm| tm.coef * xi_ln(t_end, t, z, tm.k, tm.lo, tm.hi, gamma, r))
        .sum()
}

fn eval_terms_dz(terms: &[Term], t: f64, z: f64, scenario: &Scenario) -> Result<f64> {
    let t_end = scenario.horizon_t();
    let gamma = scenario.market.gamma();
    let r = scenario.market.r();
    let mut acc = 0.0;
    for tm in terms {
        acc += tm.coef * xi_dz_ln(t_end, t, z, tm.k, tm.lo, tm.hi, gamma, r)?;
    }
    Ok(acc)
}

/// Region geometry of the three-claim stack for a position with (log) asset
/// scale ln_c, where ψF(T) = C·Z̃(T)^{−σ_F/γ}.
struct ClaimGeometry {
    ln_c: f64,
    c: f64,
    ln_za: f64,
    d: f64,
    vf: f64,
    ln_vf: f64,
    p2: f64,
    k2: f64,
    /// Deflated asset power: Z̃·ψF(T) ∝ Z̃^{1−σ_F/γ}.
    k_asset_deflated: f64,
    /// Utility asset power: (ψF(T))^{p₂} ∝ Z̃^{−σ_F·p₂/γ}.
    k_asset_utility: f64,
}

impl ClaimGeometry {
    fn new(ln_c: f64, scenario: &Scenario) -> Self {
        let gamma = scenario.market.gamma();
        let sf = scenario.illiquid.sigma_f();
        let p2 = scenario.prefs.p2();
        let vf = scenario.constraints.v_floor();
        Self {
            ln_c,
            c: ln_c.exp(),
            ln_za: gamma / sf * (ln_c - vf.ln()),
            d: 1.0 + sf * (p2 - 1.0) / gamma,
            vf,
            ln_vf: vf.ln(),
            p2,
            k2: p2 / (p2 - 1.0),
            k_asset_deflated: 1.0 - sf / gamma,
            k_asset_utility: -sf * p2 / gamma,
        }
    }

    fn proportional(&self) -> bool {
        self.d.abs() <= 1e-12
    }

    /// Deflated cost terms of the discretionary excess
    /// (I₂ − max{V̲, ψF(T)})⁺ under log-multiplier ll; empty when the
    /// excess is identically 0.
    fn excess_wealth_terms(&self, ll: f64) -> Vec<Term> {
        let ln_zb = (self.p2 - 1.0) * self.ln_vf - ll;
        let i2_coef = (ll / (self.p2 - 1.0)).exp();
        if self.proportional() {
            if ll > (self.p2 - 1.0) * self.ln_c {
                // The asset claim dominates I₂ everywhere: no excess.
                return Vec::new();
            }
            return vec![
                Term {
                    coef: i2_coef,
                    k: self.k2,
                    lo: f64::NEG_INFINITY,
                    hi: ln_zb,
                },
                Term {
                    coef: -self.vf,
                    k: 1.0,
                    lo: self.ln_za,
                    hi: ln_zb,
                },
                Term {
                    coef: -self.c,
                    k: self.k_asset_deflated,
                    lo: f64::NEG_INFINITY,
                    hi: self.ln_za.min(ln_zb),
                },
            ];
        }
        let ln_zc = ((self.p2 - 1.0) * self.ln_c - ll) / self.d;
        if self.d > 0.0 {
            let m = ln_zb.min(ln_zc);
            vec![
                Term {
                    coef: i2_coef,
                    k: self.k2,
                    lo: f64::NEG_INFINITY,
                    hi: m,
                },
                Term {
                    coef: -self.vf,
                    k: 1.0,
                    lo: self.ln_za,
                    hi: m,
                },
                Term {
                    coef: -self.c,
                    k: self.k_asset_deflated,
                    lo: f64::NEG_INFINITY,
                    hi: self.ln_za.min(m),
                },
            ]
        } else {
            vec![
                Term {
                    coef: i2_coef,
                    k: self.k2,
                    lo: ln_zc,
                    hi: ln_zb,
                },
                Term {
                    coef: -self.vf,
                    k: 1.0,
                    lo: self.ln_za.max(ln_zc),
                    hi: ln_zb,
                },
                Term {
                    coef: -self.c,
                    k: self.k_asset_deflated,
                    lo: ln_zc,
                    hi: self.ln_za.min(ln_zb),
                },
            ]
        }
    }

    /// Utility terms of the optimal terminal wealth
    /// max{V̲, ψF(T), I₂(λ̃₂Z̃(T))} (I₂ omitted when ll is `None`).
    fn value_terms(&self, ll: Option<f64>) -> Vec<Term> {
        let u_floor = self.vf.powf(self.p2) / self.p2;
        let u_asset = (self.p2 * self.ln_c).exp() / self.p2;
        let ll = match ll {
            None => {
                return vec![
                    Term {
                        coef: u_floor,
                        k: 0.0,
                        lo: self.ln_za,
                        hi: f64::INFINITY,
                    },
                    Term {
                        coef: u_asset,
                        k: self.k_asset_utility,
                        lo: f64::NEG_INFINITY,
                        hi: self.ln_za,
                    },
                ];
            }
            Some(ll) => ll,
        };
        let ln_zb = (self.p2 - 1.0) * self.ln_vf - ll;
        let u_i2 = (ll * self.k2).exp() / self.p2;
        let t_floor = Term {
            coef: u_floor,
            k: 0.0,
            lo: self.ln_za.max(ln_zb),
            hi: f64::INFINITY,
        };
        if self.proportional() {
            if ll >= (self.p2 - 1.0) * self.ln_c {
                return vec![
                    t_floor,
                    Term {
                        coef: u_asset,
                        k: self.k_asset_utility,
                        lo: f64::NEG_INFINITY,
                        hi: self.ln_za,
                    },
                ];
            }
            return vec![
                t_floor,
                Term {
                    coef: u_i2,
                    k: self.k2,
                    lo: f64::NEG_INFINITY,
                    hi: ln_zb,
                },
            ];
        }
        let ln_zc = ((self.p2 - 1.0) * self.ln_c - ll) / self.d;
        if self.d > 0.0 {
            vec![
                t_floor,
                Term {
                    coef: u_asset,
                    k: self.k_asset_utility,
                    lo: ln_zc,
                    hi: self.ln_za,
                },
                Term {
                    coef: u_i2,
                    k: self.k2,
                    lo: f64::NEG_INFINITY,
                    hi: ln_zb.min(ln_zc),
                },
            ]
        } else {
            vec![
                t_floor,
                Term {
                    coef: u_asset,
                    k: self.k_asset_utility,
                    lo: f64::NEG_INFINITY,
                    hi: ln_zc.min(self.ln_za),
                },
                Term {
                    coef: u_i2,
                    k: self.k2,
                    lo: ln_zc,
                    hi: ln_zb,
                },
            ]
        }
    }
}

/// Deflated cost terms of (I₂ − M)⁺ against a single known floor M
/// (deterministic asset, or ψ = 0 where M = V̲).
fn floor_excess_terms(ll: f64, ln_m: f64, p2: f64) -> [Term; 2] {
    let k2 = p2 / (p2 - 1.0);
    let ln_zb = (p2 - 1.0) * ln_m - ll;
    [
        Term {
            coef: (ll / (p2 - 1.0)).exp(),
            k: k2,
            lo: f64::NEG_INFINITY,
            hi: ln_zb,
        },
        Term {
            coef: -ln_m.exp(),
            k: 1.0,
            lo: f64::NEG_INFINITY,
            hi: ln_zb,
        },
    ]
}

/// Utility terms of max{M, I₂} against a single known floor M.
fn floor_value_terms(ll: Option<f64>, ln_m: f64, p2: f64) -> Vec<Term> {
    let u_floor = (p2 * ln_m).exp() / p2;
    match ll {
        None => vec![Term {
            coef: u_floor,
            k: 0.0,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }],
        Some(ll) => {
            let k2 = p2 / (p2 - 1.0);
            let ln_zb = (p2 - 1.0) * ln_m - ll;
            vec![
                Term {
                    coef: u_floor,
                    k: 0.0,
                    lo: ln_zb,
                    hi: f64::INFINITY,
                },
                Term {
                    coef: (ll * k2).exp() / p2,
                    k: k2,
                    lo: f64::NEG_INFINITY,
                    hi: ln_zb,
                },
            ]
        }
    }
}

/// Solve budget(ll) = x̃₂ for the log-multiplier; the budget is
/// non-increasing in ll, so a doubling bracket plus bisection suffices.
fn solve_log_lambda2<F: FnMut(f64) -> f64>(
    mut budget: F,
    x_tilde2: f64,
    v2: f64,
    scenario: &Scenario,
) -> Result<f64> {
    let (mut lo, mut hi) = (-400.0, 400.0);
    for _ in 0..3 {
        if budget(lo) - x_tilde2 > 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..3 {
        if budget(hi) - x_tilde2 < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let ll = roots::bisect(
        |l| budget(l) - x_tilde2,
        lo,
        hi,
        scenario.numerics.bisect_tol,
        300,
    )?;
    let residual = (budget(ll) - x_tilde2).abs();
    if residual > 1e-10 * v2.max(1.0) {
        return Err(Error::NoConvergence(format!(
            "terminal-wealth budget residual {residual:e} exceeds 1e-10 * max(1, v2)"
        )));
    }
    Ok(ll)
}

fn case_tag_for(psi2: f64, scenario: &Scenario) -> CaseTag {
    if scenario.illiquid.sigma_f() < SIGMA_F_DETERMINISTIC {
        if psi2 == 0.0 {
            return CaseTag::ZeroPosition;
        }
        return CaseTag::DeterministicAsset;
    }
    if psi2 == 0.0 {
        return CaseTag::ZeroPosition;
    }
    let d = 1.0
        + scenario.illiquid.sigma_f() * (scenario.prefs.p2() - 1.0) / scenario.market.gamma();
    if d.abs() <= 1e-12 {
        CaseTag::ProportionalClaims
    } else if d > 0.0 {
        CaseTag::DiscretionaryDominatesGoodStates
    } else {
        CaseTag::AssetDominatesGoodStates
    }
}

/// Largest feasible position at capital v₂: the greatest ψ ≥ 0 with
/// ψF₀ + x_B(ψ) ≤ v₂. Exactly 0 at v₂ = v₂_min; equal to v₂/F₀ when even
/// the full-capital position still covers its own guarantee put.
pub fn feasible_psi_max(v2: f64, scenario: &Scenario) -> Result<f64> {
    let vmin = v2_min(scenario);
    if v2 < vmin * (1.0 - BOUNDARY_REL_TOL) {
        return Err(Error::InfeasibleCapital {
            capital: v2,
            minimum: vmin,
        });
    }
    if v2 <= vmin * (1.0 + 1e-12) {
        return Ok(0.0);
    }
    let f0 = scenario.illiquid.f0();
    let cap = v2 / f0;
    // Priced once through the fallible API; the closure below can then
    // assume the scenario admits pricing.
    let x_b_cap = bound::put_price_x_b(cap, scenario)?;
    if v2 - cap * f0 - x_b_cap >= 0.0 {
        return Ok(cap);
    }
    let slack = |p: f64| {
        v2 - p * f0
            - bound::put_price_x_b(p, scenario).expect("pricing succeeded for this scenario above")
    };
    roots::bisect(slack, 0.0, cap, 1e-10 * cap, 200)
}

/// Internals of a fixed-position solve shared by the public evaluators.
fn solve_conditional(psi2: f64, v2: f64, scenario: &Scenario) -> Result<UoWSolution> {
    if psi2.is_nan() || psi2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "psi2 must be non-negative, got {psi2}"
        )));
    }
    if !(v2 > 0.0) || !v2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "v2 must be strictly positive, got {v2}"
        )));
    }
    let f0 = scenario.illiquid.f0();
    let x_b = bound::put_price_x_b(psi2, scenario)?;
    let locked = psi2 * f0 + x_b;
    let x_tilde2_raw = v2 - locked;
    // The tolerance accommodates the resolution of the position-feasibility
    // root-find, whose slack maps into capital with an order-one factor.
    if x_tilde2_raw < -1e-9 * v2.max(1.0) {
        return Err(Error::InfeasibleCapital {
            capital: v2,
            minimum: locked,
        });
    }
    let x_tilde2 = x_tilde2_raw.max(0.0);
    let pure = x_tilde2 <= 1e-14 * v2.max(1.0);
    let p2 = scenario.prefs.p2();
    let vf = scenario.constraints.v_floor();
    let t_end = scenario.horizon_t();
    let tag = case_tag_for(psi2, scenario);

    let (lambda2, value) = if scenario.illiquid.sigma_f() < SIGMA_F_DETERMINISTIC || psi2 == 0.0
    {
        let m = vf.max(psi2 * f0 * (scenario.illiquid.mu_f() * t_end).exp());
        if pure {
            (None, eval_terms(&floor_value_terms(None, m.ln(), p2), 0.0, 1.0, scenario))
        } else {
            let ll = solve_log_lambda2(
                |l| eval_terms(&floor_excess_terms(l, m.ln(), p2), 0.0, 1.0, scenario),
                x_tilde2,
                v2,
                scenario,
            )?;
            (
                Some(ll.exp()),
                eval_terms(&floor_value_terms(Some(ll), m.ln(), p2), 0.0, 1.0, scenario),
            )
        }
    } else {
        let h = h_factor(0.0, t_end, &scenario.illiquid, &scenario.market)?;
        let geo = ClaimGeometry::new((psi2 * f0 * h).ln(), scenario);
        if pure {
            (None, eval_terms(&geo.value_terms(None), 0.0, 1.0, scenario))
        } else {
            let ll = solve_log_lambda2(
                |l| eval_terms(&geo.excess_wealth_terms(l), 0.0, 1.0, scenario),
                x_tilde2,
                v2,
                scenario,
            )?;
            (
                Some(ll.exp()),
                eval_terms(&geo.value_terms(Some(ll)), 0.0, 1.0, scenario),
            )
        }
    };
    Ok(UoWSolution {
        v2,
        psi2_star: psi2,
        lambda2,
        x_b,
        x_tilde2,
        value,
        case_tag: tag,
        boundary: BoundaryFlag::Interior,
    })
}

/// Expected utility of the optimal plan for a *fixed* position ψ at capital
/// v₂. Errors when the position plus its guarantee put costs more than v₂.
pub fn conditional_value(psi2: f64, v2: f64, scenario: &Scenario) -> Result<f64> {
    Ok(solve_conditional(psi2, v2, scenario)?.value)
}

/// Solve the subproblem at capital v₂, optimizing the position ψ.
///
/// At v₂ = v₂_min the plan is pinned to the bond-financed guarantee
/// (ψ = 0). When the asset's Sharpe ratio does not strictly exceed the
/// market price of risk the tie breaks to ψ = 0. Otherwise the position is
/// maximized over [0, ψ_max] by a coarse grid plus golden-section
/// refinement with tolerance 1e-8·v₂/F₀.
pub fn optimize_psi2(v2: f64, scenario: &Scenario) -> Result<UoWSolution> {
    optimize_with(v2, scenario, false)
}

pub(crate) fn optimize_with(
    v2: f64,
    scenario: &Scenario,
    force_psi_zero: bool,
) -> Result<UoWSolution> {
    let vmin = v2_min(scenario);
    if v2 < vmin * (1.0 - BOUNDARY_REL_TOL) {
        return Err(Error::InfeasibleCapital {
            capital: v2,
            minimum: vmin,
        });
    }
    if v2 <= vmin * (1.0 + BOUNDARY_REL_TOL) {
        let p2 = scenario.prefs.p2();
        let vf = scenario.constraints.v_floor();
        return Ok(UoWSolution {
            v2,
            psi2_star: 0.0,
            lambda2: None,
            x_b: vmin,
            x_tilde2: 0.0,
            value: vf.powf(p2) / p2,
            case_tag: CaseTag::ZeroPosition,
            boundary: BoundaryFlag::AtMinimum,
        });
    }
    if force_psi_zero
        || classify_nonredundancy(&scenario.market, &scenario.illiquid)
            != Nonredundancy::StrictlyAttractive
    {
        return solve_conditional(0.0, v2, scenario);
    }
    let psi_max = feasible_psi_max(v2, scenario)?;
    if psi_max <= 0.0 {
        return solve_conditional(0.0, v2, scenario);
    }
    let n = scenario.numerics.psi_grid.max(2);
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    let mut grid_vals = Vec::with_capacity(n);
    for i in 0..n {
        let p = psi_max * i as f64 / (n - 1) as f64;
        let v = conditional_value(p, v2, scenario)?;
        grid_vals.push((p, v));
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = grid_vals[best_i.saturating_sub(1)].0;
    let hi = grid_vals[(best_i + 1).min(n - 1)].0;
    let xtol = 1e-8 * v2 / scenario.illiquid.f0();
    let (psi_ref, val_ref) = roots::golden_max(
        |p| conditional_value(p, v2, scenario).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        xtol,
    );
    let (psi_star, _) = if val_ref >= best_v {
        (psi_ref, val_ref)
    } else {
        grid_vals[best_i]
    };
    solve_conditional(psi_star, v2, scenario)
}

/// Optimal value at capital v₂ (optionally with the position forced to 0,
/// for liquid-only benchmarks).
pub(crate) fn value_at(v2: f64, scenario: &Scenario, force_psi_zero: bool) -> Result<f64> {
    Ok(optimize_with(v2, scenario, force_psi_zero)?.value)
}

/// Liquid wealth backing the terminal plan at a state: guarantee put value
/// plus discretionary claim value (the ψF₀ leg is not liquid and excluded).
/// At the minimal-capital boundary this is the bond value e^{−r(T−t)}·V̲.
pub fn wealth(state: &MarketState, solution: &UoWSolution, scenario: &Scenario) -> Result<f64> {
    if state.t() > scenario.horizon_t() {
        return Err(Error::InvalidArgument(format!(
            "state time {} beyond horizon {}",
            state.t(),
            scenario.horizon_t()
        )));
    }
    let tau = scenario.horizon_t() - state.t();
    if solution.boundary == BoundaryFlag::AtMinimum {
        return Ok((-scenario.market.r() * tau).exp() * scenario.constraints.v_floor());
    }
    let x_b = bound::put_value_x_b(state, solution.psi2_star, scenario)?;
    let excess = match solution.lambda2 {
        None => 0.0,
        Some(lambda) => excess_wealth_at(state, solution.psi2_star, lambda.ln(), scenario)?,
    };
    Ok(x_b + excess)
}

fn excess_wealth_at(
    state: &MarketState,
    psi2: f64,
    ll: f64,
    scenario: &Scenario,
) -> Result<f64> {
    let (t, z) = (state.t(), state.z());
    let p2 = scenario.prefs.p2();
    let t_end = scenario.horizon_t();
    if scenario.illiquid.sigma_f() < SIGMA_F_DETERMINISTIC || psi2 == 0.0 {
        let m = scenario.constraints.v_floor().max(
            psi2 * state.f() * (scenario.illiquid.mu_f() * (t_end - t)).exp(),
        );
        return Ok(eval_terms(&floor_excess_terms(ll, m.ln(), p2), t, z, scenario) / z);
    }
    let h = h_factor(t, t_end, &scenario.illiquid, &scenario.market)?;
    let ln_c =
        (psi2 * state.f() * h).ln() + scenario.illiquid.sigma_f() / scenario.market.gamma() * z.ln();
    let geo = ClaimGeometry::new(ln_c, scenario);
    Ok(eval_terms(&geo.excess_wealth_terms(ll), t, z, scenario) / z)
}

/// Stock fraction of the liquid terminal-wealth reserve at a state.
///
/// π₂·X₂ = −(γ/σ)·z·∂X₂/∂z with the asset price co-moving with the kernel.
/// The boundary plan is pure bond (0). Errors at t ≥ T.
pub fn strategy(state: &MarketState, solution: &UoWSolution, scenario: &Scenario) -> Result<f64> {
    if state.t() >= scenario.horizon_t() {
        return Err(Error::UndefinedStrategy(format!(
            "terminal plan matured: t = {} >= T = {}",
            state.t(),
            scenario.horizon_t()
        )));
    }
    if solution.boundary == BoundaryFlag::AtMinimum {
        return Ok(0.0);
    }
    let gamma = scenario.market.gamma();
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let total = wealth(state, solution, scenario)?;
    if total <= 0.0 {
        return Err(Error::UndefinedStrategy(
            "terminal-wealth reserve is zero; stock fraction undefined".into(),
        ));
    }
    let (t, z) = (state.t(), state.z());
    let psi2 = solution.psi2_star;
    let t_end = scenario.horizon_t();
    let p2 = scenario.prefs.p2();
    let (_, dx_b) = bound::put_value_and_dz_at(state, psi2, scenario)?;
    let d_excess = match solution.lambda2 {
        None => 0.0,
        Some(lambda) => {
            let ll = lambda.ln();
            if scenario.illiquid.sigma_f() < SIGMA_F_DETERMINISTIC || psi2 == 0.0 {
                let m = scenario.constraints.v_floor().max(
                    psi2 * state.f() * (scenario.illiquid.mu_f() * (t_end - t)).exp(),
                );
                let terms = floor_excess_terms(ll, m.ln(), p2);
                let val = eval_terms(&terms, t, z, scenario) / z;
                eval_terms_dz(&terms, t, z, scenario)? / z - val / z
            } else {
                let h = h_factor(t, t_end, &scenario.illiquid, &scenario.market)?;
                let ln_c = (psi2 * state.f() * h).ln()
                    + scenario.illiquid.sigma_f() / gamma * z.ln();
                let geo = ClaimGeometry::new(ln_c, scenario);
                let terms = geo.excess_wealth_terms(ll);
                let val = eval_terms(&terms, t, z, scenario) / z;
                eval_terms_dz(&terms, t, z, scenario)? / z - val / z
            }
        }
    };
    Ok(-gamma / scenario.market.sigma() * z * (dx_b + d_excess) / total)
}

/// Realized optimal terminal wealth max{V̲, ψ*f_T, I₂(λ̃₂z_T)} for a
/// terminal kernel value z_T and asset price f_T.
pub fn terminal_wealth(
    z_t: f64,
    f_t: f64,
    solution: &UoWSolution,
    scenario: &Scenario,
) -> Result<f64> {
    if !(z_t > 0.0) || !(f_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need z_T > 0 and f_T > 0, got {z_t} and {f_t}"
        )));
    }
    let vf = scenario.constraints.v_floor();
    if solution.boundary == BoundaryFlag::AtMinimum {
        return Ok(vf);
    }
    let mut v = vf.max(solution.psi2_star * f_t);
    if let Some(lambda) = solution.lambda2 {
        v = v.max((lambda * z_t).powf(1.0 / (scenario.prefs.p2() - 1.0)));
    }
    Ok(v)
}
