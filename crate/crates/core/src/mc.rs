//! Monte Carlo cross-checks for the closed-form machinery.
//!
//! Every estimator here is an *independent route* to a quantity the library
//! also computes in closed form: the truncated-moment kernel, the floor-put
//! price embedded in the guarantee replication, and the full policy (its
//! expected utility, its budget identity, its constraint compliance, and the
//! self-financing accuracy of the reported hedge ratios).  The estimators
//! deliberately avoid the analytic code paths they are meant to validate;
//! they only share the market primitives (pricing-kernel dynamics, paths).
//!
//! Sampling is antithetic and the random streams are counter-based per pair,
//! so results are bit-reproducible for a given seed regardless of batch
//! order or parallelism.  Reductions use pairwise summation to keep the
//! floating-point error of large-sample means at O(log n) ulps.

use crate::error::{Error, Result};
use crate::market::{self, MarketState, Scenario};
use crate::policy::{self, PolicySolution};
use crate::quad;
use crate::uoc;
use crate::uow;
use crate::xi::XiArgs;

/// Summary of one Monte Carlo estimation run.
#[derive(Debug, Clone)]
pub struct McReport {
    /// Point estimate of the target quantity.
    pub estimate: f64,
    /// Standard error of the estimate (sample std of the per-pair averages
    /// divided by sqrt(#pairs); zero when the integrand is degenerate).
    pub std_error: f64,
    /// Number of sample paths consumed (2 x pairs for antithetic runs).
    pub n_samples: u64,
    /// Seed the run was keyed on.
    pub seed: u64,
    /// Number of samples on which a hard constraint was violated beyond
    /// numerical tolerance (consumption floor or terminal guarantee).
    pub violations: u64,
    /// Root-mean-square terminal replication error of the self-financed
    /// hedge portfolio, when a hedging check was performed.
    pub rms_hedge_error: Option<f64>,
}

/// Joint report of the policy-level simulation check: the expected-utility
/// estimate (which also carries constraint-violation counts and the hedge
/// replication error) and the budget-identity estimate, whose target is the
/// initial capital.
#[derive(Debug, Clone)]
pub struct PolicyCheck {
    /// Estimate of total expected utility along the optimal policy.
    pub utility: McReport,
    /// Estimate of the initial cost of the policy's cash-flow stream
    /// (deflated consumption plus deflated terminal wealth net of the
    /// illiquid payoff, plus the upfront illiquid purchase).
    pub budget: McReport,
}

/// Sums a slice by recursive pairwise splitting: error grows like
/// O(log n) ulps instead of O(n) for naive left-to-right accumulation.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        3 => (xs[0] + xs[1]) + xs[2],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Mean and standard error of a sample of i.i.d. observations.
fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(samples) / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    // Guard tiny negative round-off when all samples are identical.
    let se = (var.max(0.0) / n as f64).sqrt();
    (mean, se)
}

/// Estimates the truncated power moment
/// `E[ Z(s)^k · 1{a < Z(s) < b} | Z(t) = z ]`
/// by direct sampling of the lognormal kernel value at the horizon,
/// without using the closed-form normal-cdf representation.
///
/// Uses antithetic pairs; `n_pairs` is the number of pairs, so the report's
/// `n_samples` is `2 * n_pairs`.
pub fn mc_xi(args: &XiArgs, n_pairs: u64, seed: u64) -> McReport {
    let tau = args.s() - args.t();
    let gamma = args.gamma();
    let r = args.r();
    let ln_z = args.z().ln();
    // ln Z(s) | Z(t)=z  ~  Normal(ln z - (r + gamma^2/2) tau, gamma^2 tau)
    let m = ln_z - (r + 0.5 * gamma * gamma) * tau;
    let sd = gamma * tau.sqrt();
    let k = args.k();
    let ln_a = if args.a() <= 0.0 {
        f64::NEG_INFINITY
    } else {
        args.a().ln()
    };
    let ln_b = if args.b() == f64::INFINITY {
        f64::INFINITY
    } else {
        args.b().ln()
    };

    let mut pair_means = Vec::with_capacity(n_pairs as usize);
    let payoff = |g: f64| -> f64 {
        let ln_zs = m + sd * g;
        if ln_zs > ln_a && ln_zs < ln_b {
            (k * ln_zs).exp()
        } else {
            0.0
        }
    };
    for i in 0..n_pairs {
        let mut rng = market::path_rng(seed, i);
        let g = market::standard_normal(&mut rng);
        pair_means.push(0.5 * (payoff(g) + payoff(-g)));
    }
    let (estimate, std_error) = mean_se(&pair_means);
    McReport {
        estimate,
        std_error,
        n_samples: 2 * n_pairs,
        seed,
        violations: 0,
        rms_hedge_error: None,
    }
}

/// Estimates the time-0 price of the terminal-guarantee shortfall option
/// `E[ Z(T) · max(V_floor - psi2 * F(T), 0) ]`
/// by joint sampling of the kernel and the illiquid value at the horizon.
///
/// Variance reduction: antithetic pairs plus a regression control variate on
/// the kernel itself, whose mean `E[Z(T)] = e^{-rT}` is known exactly.  The
/// control makes degenerate cases (psi2 = 0, or a deterministic illiquid
/// leg) price exactly with zero standard error.
pub fn mc_put_price(psi2: f64, scenario: &Scenario, n_pairs: u64, seed: u64) -> McReport {
    let t_end = scenario.horizon_t();
    let r = scenario.market.r();
    let gamma = scenario.market.gamma();
    let mu_f = scenario.illiquid.mu_f();
    let sigma_f = scenario.illiquid.sigma_f();
    let f0 = scenario.illiquid.f0();
    let vf = scenario.constraints.v_floor();
    let sqrt_t = t_end.sqrt();

    let kernel_drift = -(r + 0.5 * gamma * gamma) * t_end;
    let asset_drift = (mu_f - 0.5 * sigma_f * sigma_f) * t_end;

    let mut ys = Vec::with_capacity(2 * n_pairs as usize);
    let mut cs = Vec::with_capacity(2 * n_pairs as usize);
    let leg = |g: f64| -> (f64, f64) {
        let z_t = (kernel_drift - gamma * sqrt_t * g).exp();
        let f_t = f0 * (asset_drift + sigma_f * sqrt_t * g).exp();
        (z_t * (vf - psi2 * f_t).max(0.0), z_t)
    };
    for i in 0..n_pairs {
        let mut rng = market::path_rng(seed, i);
        let g = market::standard_normal(&mut rng);
        for gg in [g, -g] {
            let (y, c) = leg(gg);
            ys.push(y);
            cs.push(c);
        }
    }

    let n = ys.len() as f64;
    let y_bar = pairwise_sum(&ys) / n;
    let c_bar = pairwise_sum(&cs) / n;
    let cov_terms: Vec<f64> = ys
        .iter()
        .zip(&cs)
        .map(|(y, c)| (y - y_bar) * (c - c_bar))
        .collect();
    let var_terms: Vec<f64> = cs.iter().map(|c| (c - c_bar) * (c - c_bar)).collect();
    let s_yc = pairwise_sum(&cov_terms);
    let s_cc = pairwise_sum(&var_terms);
    let beta = if s_cc > 0.0 { s_yc / s_cc } else { 0.0 };
    let control_mean = (-r * t_end).exp();

    // Adjusted per-pair samples: average the controlled observations within
    // each antithetic pair, then treat pairs as i.i.d.
    let mut pair_means = Vec::with_capacity(n_pairs as usize);
    for p in 0..n_pairs as usize {
        let a = ys[2 * p] - beta * (cs[2 * p] - control_mean);
        let b = ys[2 * p + 1] - beta * (cs[2 * p + 1] - control_mean);
        pair_means.push(0.5 * (a + b));
    }
    let (estimate, std_error) = mean_se(&pair_means);
    McReport {
        estimate,
        std_error,
        n_samples: 2 * n_pairs,
        seed,
        violations: 0,
        rms_hedge_error: None,
    }
}

/// Offset separating the random streams of the hedging sub-study from the
/// utility/budget sampling so the two never share draws.
const HEDGE_STREAM_OFFSET: u64 = 1 << 32;

/// Number of paths used for the self-financing hedge replication check.
const HEDGE_PATHS_CAP: u64 = 1024;

/// Simulates the optimal policy forward and verifies it end to end:
///
/// * expected utility (running consumption plus terminal wealth) against the
///   reported optimal value,
/// * the deflated budget identity against the initial capital,
/// * pathwise compliance with the consumption floor and terminal guarantee
///   (count reported in `utility.violations`),
/// * terminal replication accuracy of a discretely rebalanced self-financed
///   portfolio that follows the reported consumption and stock-weight
///   policy (`utility.rms_hedge_error`).
///
/// Consumption utility is integrated along each path with the same
/// Gauss-Legendre rule density the closed-form kernel integrals use;
/// the kernel and asset are sampled exactly at those nodes (no Euler bias).
pub fn mc_policy_check(
    solution: &PolicySolution,
    scenario: &Scenario,
    n_paths: u64,
    n_steps: usize,
    seed: u64,
) -> Result<PolicyCheck> {
    if n_paths < 2 {
        return Err(Error::InvalidArgument(
            "mc_policy_check requires at least 2 paths".into(),
        ));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument(
            "mc_policy_check requires at least 1 hedge step".into(),
        ));
    }
    let t_end = scenario.horizon_t();
    let r = scenario.market.r();
    let gamma = scenario.market.gamma();
    let mu = scenario.market.mu();
    let sigma = scenario.market.sigma();
    let mu_f = scenario.illiquid.mu_f();
    let sigma_f = scenario.illiquid.sigma_f();
    let f0 = scenario.illiquid.f0();
    let c_floor = scenario.constraints.c_floor();
    let vf = scenario.constraints.v_floor();
    let p1 = scenario.prefs.p1();
    let p2 = scenario.prefs.p2();
    let psi = solution.psi_star();
    let v0 = scenario.v0();

    // --- Utility / budget / constraint pass -------------------------------
    // Grid: Gauss-Legendre nodes on [0, T] (for the consumption integral)
    // plus the horizon itself.  Nodes are interior, so no duplicates.
    let (q_nodes, q_weights) = quad::mapped_rule(0.0, t_end, scenario.numerics.quad_nodes);
    let mut times = q_nodes.clone();
    times.push(t_end);
    let n_times = times.len();
    let mut sqrt_dts = Vec::with_capacity(n_times);
    let mut prev = 0.0;
    for &t in &times {
        sqrt_dts.push((t - prev).sqrt());
        prev = t;
    }

    let n_pairs = n_paths / 2;
    let mut utility_pairs = Vec::with_capacity(n_pairs as usize);
    let mut budget_pairs = Vec::with_capacity(n_pairs as usize);
    let mut violations: u64 = 0;
    let mut gs = vec![0.0; n_times];

    for i in 0..n_pairs {
        let mut rng = market::path_rng(seed, i);
        for g in gs.iter_mut() {
            *g = market::standard_normal(&mut rng);
        }
        let mut pair_utility = 0.0;
        let mut pair_budget = 0.0;
        for sign in [1.0, -1.0] {
            let mut w = 0.0;
            let mut u_run = 0.0;
            let mut b_run = 0.0;
            let mut violated = false;
            for (j, &t) in times.iter().enumerate() {
                w += sqrt_dts[j] * sign * gs[j];
                let z = (-(r + 0.5 * gamma * gamma) * t - gamma * w).exp();
                if j < n_times - 1 {
                    let f = f0 * ((mu_f - 0.5 * sigma_f * sigma_f) * t + sigma_f * w).exp();
                    let state = MarketState::new(t, z, f)?;
                    let c = uoc::optimal_consumption(&state, &solution.uoc, scenario);
                    if c < c_floor * (1.0 - 1e-12) {
                        violated = true;
                    }
                    u_run += q_weights[j] * c.powf(p1) / p1;
                    b_run += q_weights[j] * z * c;
                } else {
                    let f = f0 * ((mu_f - 0.5 * sigma_f * sigma_f) * t + sigma_f * w).exp();
                    let v_term = uow::terminal_wealth(z, f, &solution.uow, scenario)?;
                    if v_term < vf * (1.0 - 1e-12) {
                        violated = true;
                    }
                    u_run += v_term.powf(p2) / p2;
                    b_run += z * (v_term - psi * f);
                }
            }
            if violated {
                violations += 1;
            }
            pair_utility += 0.5 * u_run;
            pair_budget += 0.5 * (b_run + psi * f0);
        }
        utility_pairs.push(pair_utility);
        budget_pairs.push(pair_budget);
    }

    let (u_est, u_se) = mean_se(&utility_pairs);
    let (b_est, b_se) = mean_se(&budget_pairs);
    let n_samples = 2 * n_pairs;

    // --- Self-financing hedge pass ----------------------------------------
    // Roll a discretely rebalanced liquid portfolio forward using the
    // closed-form policy (stock weight and consumption rate) evaluated at
    // each grid time, and compare its terminal value with the liquid part
    // of the optimal terminal wealth.
    let hedge_paths = n_paths.min(HEDGE_PATHS_CAP);
    let dt = t_end / n_steps as f64;
    let bond_growth = (r * dt).exp() - 1.0;
    let sqrt_dt = dt.sqrt();
    let mut sq_errs = Vec::with_capacity(hedge_paths as usize);
    let x0 = v0 - psi * f0;
    for i in 0..hedge_paths {
        let mut rng = market::path_rng(seed, HEDGE_STREAM_OFFSET + i);
        let mut w = 0.0;
        let mut x = x0;
        for step in 0..n_steps {
            let t = step as f64 * dt;
            let z = (-(r + 0.5 * gamma * gamma) * t - gamma * w).exp();
            let f = f0 * ((mu_f - 0.5 * sigma_f * sigma_f) * t + sigma_f * w).exp();
            let state = MarketState::new(t, z, f)?;
            let eval = policy::evaluate_policy(&state, solution, scenario)?;
            let g = market::standard_normal(&mut rng);
            let dw = sqrt_dt * g;
            // Simple return of the stock over the step.
            let s_ret = ((mu - 0.5 * sigma * sigma) * dt + sigma * dw).exp() - 1.0;
            x = x * (1.0 + eval.pi_fraction * s_ret + (1.0 - eval.pi_fraction) * bond_growth)
                - eval.c_rate * dt;
            w += dw;
        }
        let z_t = (-(r + 0.5 * gamma * gamma) * t_end - gamma * w).exp();
        let f_t = f0 * ((mu_f - 0.5 * sigma_f * sigma_f) * t_end + sigma_f * w).exp();
        let target = uow::terminal_wealth(z_t, f_t, &solution.uow, scenario)? - psi * f_t;
        sq_errs.push((x - target) * (x - target));
    }
    let rms = (pairwise_sum(&sq_errs) / sq_errs.len() as f64).sqrt();

    Ok(PolicyCheck {
        utility: McReport {
            estimate: u_est,
            std_error: u_se,
            n_samples,
            seed,
            violations,
            rms_hedge_error: Some(rms),
        },
        budget: McReport {
            estimate: b_est,
            std_error: b_se,
            n_samples,
            seed,
            violations: 0,
            rms_hedge_error: None,
        },
    })
}
