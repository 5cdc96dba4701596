//! Subcommand implementations: solve, sweep, single metrics, validate.

use crate::config::Params;
use crate::fmt::sig12;
use fixterm::xi::{self, XiArgs};
use fixterm::{bound, mc, policy, split, uoc, uow};
use fixterm::{Error as CoreError, MarketState, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// A failed run, carrying the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Bad flags, bad config, bad parameter names — exit 1.
    Input(String),
    /// The scenario is valid but cannot fund its own floors — exit 2.
    Infeasible(String),
    /// A solver failed to bracket or converge — exit 3.
    Numerical(String),
    /// A cross-check gate failed during `validate` — exit 4.
    Validation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Validation(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m)
            | Failure::Infeasible(m)
            | Failure::Numerical(m)
            | Failure::Validation(m) => m,
        }
    }
}

/// Map library errors onto exit-code classes.
fn from_core(e: CoreError) -> Failure {
    match &e {
        CoreError::InfeasibleCapital { .. } => Failure::Infeasible(e.to_string()),
        CoreError::InvalidSpec(_) | CoreError::InvalidArgument(_) => {
            Failure::Input(e.to_string())
        }
        _ => Failure::Numerical(e.to_string()),
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Numerical(format!("csv writer: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, Failure> {
    let bytes = w
        .into_inner()
        .map_err(|e| Failure::Numerical(format!("csv writer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Failure::Numerical(format!("csv not UTF-8: {e}")))
}

/// Relative budget residuals of a solved policy at time zero: the
/// reserve-backed consumption wealth against v₁*, and the discretionary part
/// of the terminal-wealth account against its closed-form size.
fn budget_residuals(
    sol: &policy::PolicySolution,
    sc: &Scenario,
) -> fixterm::Result<(f64, f64)> {
    let s0 = MarketState::new(0.0, 1.0, sc.illiquid.f0())?;
    let w1 = uoc::wealth(&s0, &sol.uoc, sc)?;
    let res1 = ((w1 - sol.split.v1_star) / sol.split.v1_star).abs();
    let w2 = uow::wealth(&s0, &sol.uow, sc)?;
    let put0 = bound::put_value_x_b(&s0, sol.psi_star(), sc)?;
    let x_tilde = sol.uow.x_tilde2;
    let res2 = if x_tilde > 1e-9 * sc.v0() {
        ((w2 - put0 - x_tilde) / x_tilde).abs()
    } else {
        // At an all-in-the-asset corner the discretionary account is empty;
        // compare absolutely, scaled by the initial capital.
        (w2 - put0 - x_tilde).abs() / sc.v0()
    };
    Ok((res1, res2))
}

/// `solve`: one CSV row with the full solution summary.
pub fn run_solve(params: &Params) -> Result<String, Failure> {
    let sc = params.to_scenario().map_err(Failure::Input)?;
    let sol = policy::solve_policy(&sc).map_err(from_core)?;
    let (res1, res2) = budget_residuals(&sol, &sc).map_err(from_core)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "v0_min", "v1_star", "v2_star", "psi_star", "osiw", "x_b", "lambda1", "lambda2",
        "value", "case_tag", "residuals",
    ])
    .map_err(csv_failure)?;
    w.write_record([
        sig12(split::v0_min(&sc)),
        sig12(sol.split.v1_star),
        sig12(sol.split.v2_star),
        sig12(sol.psi_star()),
        sig12(policy::osiw(&sol, &sc)),
        sig12(sol.uow.x_b),
        sol.uoc.lambda1.map(sig12).unwrap_or_default(),
        sol.uow.lambda2.map(sig12).unwrap_or_default(),
        sig12(sol.total_value),
        format!("{:?}", sol.uow.case_tag),
        sig12(res1.max(res2)),
    ])
    .map_err(csv_failure)?;
    finish(w)
}

/// Output selectable in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Osiw,
    Svf,
    Geug,
    Value,
    PsiStar,
    V1Star,
    V2Star,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Osiw,
        Metric::Svf,
        Metric::Geug,
        Metric::Value,
        Metric::PsiStar,
        Metric::V1Star,
        Metric::V2Star,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Osiw => "osiw",
            Metric::Svf => "svf",
            Metric::Geug => "geug",
            Metric::Value => "value",
            Metric::PsiStar => "psi_star",
            Metric::V1Star => "v1_star",
            Metric::V2Star => "v2_star",
        }
    }

    fn parse(name: &str) -> Result<Metric, String> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == name)
            .ok_or_else(|| {
                format!(
                    "unknown metric `{name}`; expected a subset of \
                     osiw, svf, geug, value, psi_star, v1_star, v2_star"
                )
            })
    }
}

/// Parse the `--metrics` list. `None` selects every metric; an empty string
/// selects none (header-only output).
pub fn parse_metrics(selection: Option<&str>) -> Result<Vec<Metric>, Failure> {
    match selection {
        None => Ok(Metric::ALL.to_vec()),
        Some(list) => {
            let mut out = Vec::new();
            for token in list.split(',') {
                let token = token.trim();
                if token.is_empty() {
                    continue;
                }
                out.push(Metric::parse(token).map_err(Failure::Input)?);
            }
            Ok(out)
        }
    }
}

/// Parse the `--grid` comma list.
pub fn parse_grid(list: &str) -> Result<Vec<f64>, Failure> {
    let mut out = Vec::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        out.push(
            token
                .parse::<f64>()
                .map_err(|e| Failure::Input(format!("grid value `{token}`: {e}")))?,
        );
    }
    if out.is_empty() {
        return Err(Failure::Input("grid must contain at least one value".into()));
    }
    Ok(out)
}

struct PointRow {
    metric: &'static str,
    result: String,
    diagnostics: String,
}

/// Evaluate every requested metric at one grid value. Failures become
/// diagnostics text on the affected rows; they never abort the sweep.
fn evaluate_point(params: &Params, param: &str, value: f64, metrics: &[Metric]) -> Vec<PointRow> {
    let all_failed = |message: &str| -> Vec<PointRow> {
        metrics
            .iter()
            .map(|m| PointRow {
                metric: m.name(),
                result: String::new(),
                diagnostics: message.to_string(),
            })
            .collect()
    };
    let mut point = params.clone();
    if let Err(e) = point.set(param, value) {
        return all_failed(&e);
    }
    let sc = match point.to_scenario() {
        Ok(sc) => sc,
        Err(e) => return all_failed(&e),
    };
    let needs_solution = metrics.iter().any(|m| {
        matches!(
            m,
            Metric::Osiw | Metric::Value | Metric::PsiStar | Metric::V1Star | Metric::V2Star
        )
    });
    let solution = if needs_solution {
        Some(policy::solve_policy(&sc))
    } else {
        None
    };
    metrics
        .iter()
        .map(|&m| {
            let outcome: Result<f64, String> = match m {
                Metric::Svf => policy::svf(&sc).map_err(|e| e.to_string()),
                Metric::Geug => policy::geug(&sc).map_err(|e| e.to_string()),
                _ => match solution.as_ref().expect("solution computed when needed") {
                    Ok(sol) => Ok(match m {
                        Metric::Osiw => policy::osiw(sol, &sc),
                        Metric::Value => sol.total_value,
                        Metric::PsiStar => sol.psi_star(),
                        Metric::V1Star => sol.split.v1_star,
                        Metric::V2Star => sol.split.v2_star,
                        Metric::Svf | Metric::Geug => unreachable!(),
                    }),
                    Err(e) => Err(e.to_string()),
                },
            };
            match outcome {
                Ok(v) => PointRow {
                    metric: m.name(),
                    result: sig12(v),
                    diagnostics: "ok".to_string(),
                },
                Err(e) => PointRow {
                    metric: m.name(),
                    result: String::new(),
                    diagnostics: e,
                },
            }
        })
        .collect()
}

/// `sweep`: evaluate metrics over a one-parameter grid. Grid points run
/// concurrently; rows are buffered and emitted in grid order.
pub fn run_sweep(
    params: &Params,
    param: &str,
    grid: &[f64],
    metrics: &[Metric],
    workers: usize,
) -> Result<String, Failure> {
    if grid.is_empty() {
        return Err(Failure::Input("grid must contain at least one value".into()));
    }
    // Reject a bad parameter name up front instead of once per row.
    params
        .clone()
        .set(param, grid[0])
        .map_err(Failure::Input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))?;
    let per_point: Vec<Vec<PointRow>> = pool.install(|| {
        grid.par_iter()
            .map(|&gv| evaluate_point(params, param, gv, metrics))
            .collect()
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["parameter", "value", "metric", "result", "diagnostics"])
        .map_err(csv_failure)?;
    for (gv, rows) in grid.iter().zip(per_point) {
        for row in rows {
            w.write_record([
                param.to_string(),
                sig12(*gv),
                row.metric.to_string(),
                row.result,
                row.diagnostics,
            ])
            .map_err(csv_failure)?;
        }
    }
    finish(w)
}

/// `svf` / `geug`: a single metric as a two-line CSV.
pub fn run_single_metric(params: &Params, metric: Metric) -> Result<String, Failure> {
    let sc = params.to_scenario().map_err(Failure::Input)?;
    let value = match metric {
        Metric::Svf => policy::svf(&sc).map_err(from_core)?,
        Metric::Geug => policy::geug(&sc).map_err(from_core)?,
        other => {
            return Err(Failure::Input(format!(
                "metric {} has no dedicated command",
                other.name()
            )))
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "result"]).map_err(csv_failure)?;
    w.write_record([metric.name().to_string(), sig12(value)])
        .map_err(csv_failure)?;
    finish(w)
}

/// Debug-only fault injection: multiply the consumption multiplier by the
/// factor in `FIXTERM_CORRUPT_LAMBDA` before the budget cross-check, so the
/// gate's sensitivity can be demonstrated end to end. Compiled out of
/// release builds.
fn corruption_factor() -> f64 {
    #[cfg(debug_assertions)]
    {
        if let Ok(text) = std::env::var("FIXTERM_CORRUPT_LAMBDA") {
            if let Ok(factor) = text.parse::<f64>() {
                return factor;
            }
        }
    }
    1.0
}

struct CheckOutcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn draw_args(rng: &mut ChaCha12Rng, sc: &Scenario) -> XiArgs {
    let horizon = sc.horizon_t();
    let gamma = sc.market.gamma();
    let r = sc.market.r();
    let t = 0.95 * horizon * rng.gen::<f64>();
    let s = t + (horizon - t) * (0.05 + 0.95 * rng.gen::<f64>());
    let k = -3.0 + 6.0 * rng.gen::<f64>();
    let ln_a = -2.0 + 2.0 * rng.gen::<f64>();
    let ln_b = ln_a + 0.3 + 2.0 * rng.gen::<f64>();
    let m_inside = ln_a + (ln_b - ln_a) * rng.gen::<f64>();
    let tau = s - t;
    let z = (m_inside + (r + 0.5 * gamma * gamma) * tau).exp();
    XiArgs::new(s, t, z, k, ln_a.exp(), ln_b.exp(), gamma, r).expect("drawn inside the domain")
}

fn check_kernel_oracle(sc: &Scenario, n_pairs: u64, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut pass = true;
    for i in 0..5u64 {
        let args = draw_args(&mut rng, sc);
        let rep = mc::mc_xi(&args, n_pairs, seed + 1 + i);
        let gap = (xi::xi(&args) - rep.estimate).abs();
        if rep.std_error > 0.0 {
            worst = worst.max(gap / rep.std_error);
            pass &= gap <= 4.0 * rep.std_error;
        } else {
            pass &= gap <= 1e-12 * (1.0 + xi::xi(&args).abs());
        }
    }
    CheckOutcome {
        name: "kernel_oracle",
        pass,
        detail: format!(
            "5 kernel moments vs simulation, worst gap {worst:.2} SE (gate 4 SE), {n_pairs} antithetic pairs, seeds {}..{}",
            seed + 1,
            seed + 5
        ),
    }
}

fn check_put_pricing(sc: &Scenario, n_pairs: u64, seed: u64) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut zero_gap = 0.0f64;
    let mut pass = true;
    for (i, frac) in [0.0f64, 0.2, 0.4].into_iter().enumerate() {
        let psi = frac * sc.v0() / sc.illiquid.f0();
        let analytic = match bound::put_price_x_b(psi, sc) {
            Ok(v) => v,
            Err(e) => {
                return CheckOutcome {
                    name: "put_pricing",
                    pass: false,
                    detail: format!("pricing failed at position {psi}: {e}"),
                }
            }
        };
        let rep = mc::mc_put_price(psi, sc, n_pairs, seed + 10 + i as u64);
        let gap = (analytic - rep.estimate).abs();
        if frac == 0.0 {
            zero_gap = gap;
            pass &= gap <= 1e-12 * analytic.max(1.0);
        } else if rep.std_error > 0.0 {
            worst = worst.max(gap / rep.std_error);
            pass &= gap <= 4.0 * rep.std_error;
        } else {
            pass &= gap <= 1e-12 * analytic.max(1.0);
        }
    }
    CheckOutcome {
        name: "put_pricing",
        pass,
        detail: format!(
            "guarantee shortfall put at 3 positions, zero-position gap {zero_gap:.1e} (gate 1e-12 rel), others worst {worst:.2} SE (gate 4 SE), seeds {}..{}",
            seed + 10,
            seed + 12
        ),
    }
}

fn check_budget_residuals(sol: &policy::PolicySolution, sc: &Scenario) -> CheckOutcome {
    let mut probe = *sol;
    let factor = corruption_factor();
    if let Some(l1) = probe.uoc.lambda1 {
        probe.uoc.lambda1 = Some(l1 * factor);
    }
    match budget_residuals(&probe, sc) {
        Ok((res1, res2)) => {
            let worst = res1.max(res2);
            CheckOutcome {
                name: "budget_residuals",
                pass: worst <= 1e-8,
                detail: format!(
                    "time-zero wealth vs allocated capital, relative residuals {res1:.2e} / {res2:.2e} (gate 1e-8)"
                ),
            }
        }
        Err(e) => CheckOutcome {
            name: "budget_residuals",
            pass: false,
            detail: format!("residual evaluation failed: {e}"),
        },
    }
}

fn check_policy_simulation(
    sol: &policy::PolicySolution,
    sc: &Scenario,
    seed: u64,
) -> CheckOutcome {
    let n_paths = (sc.numerics.mc_paths as u64).max(2);
    let report = match mc::mc_policy_check(sol, sc, n_paths, sc.numerics.mc_steps, seed + 20) {
        Ok(r) => r,
        Err(e) => {
            return CheckOutcome {
                name: "policy_simulation",
                pass: false,
                detail: format!("simulation failed: {e}"),
            }
        }
    };
    let u_gap = (report.utility.estimate - sol.total_value).abs();
    let b_gap = (report.budget.estimate - sc.v0()).abs();
    let u_ok = u_gap <= 4.0 * report.utility.std_error + 1e-12;
    let b_ok = b_gap <= 4.0 * report.budget.std_error + 1e-12;
    let v_ok = report.utility.violations == 0;
    CheckOutcome {
        name: "policy_simulation",
        pass: u_ok && b_ok && v_ok,
        detail: format!(
            "{} paths, seed {}: {} floor violations, utility gap {:.2e} (4 SE = {:.2e}), budget gap {:.2e} (4 SE = {:.2e})",
            n_paths,
            seed + 20,
            report.utility.violations,
            u_gap,
            4.0 * report.utility.std_error,
            b_gap,
            4.0 * report.budget.std_error,
        ),
    }
}

fn check_derivatives(
    sol: &policy::PolicySolution,
    sc: &Scenario,
    seed: u64,
) -> CheckOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(seed + 30);
    let gamma = sc.market.gamma();
    let sigma = sc.market.sigma();
    let sigma_f = sc.illiquid.sigma_f();
    let horizon = sc.horizon_t();

    // Kernel-moment slope against a central difference in z.
    let mut worst_xi = 0.0f64;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 20 && attempts < 400 {
        attempts += 1;
        let args = draw_args(&mut rng, sc);
        let value = xi::xi(&args);
        let slope = match xi::xi_dz(&args) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if slope.abs() * args.z() < 1e-3 * value {
            continue;
        }
        let h = 1e-4 * args.z();
        let at = |z: f64| {
            let a = XiArgs::new(
                args.s(),
                args.t(),
                z,
                args.k(),
                args.a(),
                args.b(),
                args.gamma(),
                args.r(),
            )
            .expect("bumped state stays in the domain");
            xi::xi(&a)
        };
        let fd = (at(args.z() + h) - at(args.z() - h)) / (2.0 * h);
        worst_xi = worst_xi.max(((slope - fd) / slope).abs());
        checked += 1;
    }

    // Stock positions against central differences of the wealth processes
    // along the single Brownian factor (the asset price co-moves with the
    // kernel as f ~ z^(-sigma_f/gamma), so bumps stay on that manifold).
    let mut worst_pos = 0.0f64;
    let mut states = 0;
    let mut tries = 0;
    let mut failure: Option<String> = None;
    while states < 20 && tries < 400 && failure.is_none() {
        tries += 1;
        let t = horizon * (0.05 + 0.85 * rng.gen::<f64>());
        let z = (-1.0 + 2.0 * rng.gen::<f64>()).exp();
        let f = sc.illiquid.f0() * (-0.3 + 0.8 * rng.gen::<f64>()).exp();
        let h = 1e-4 * z;
        let manifold = |zz: f64| f * (zz / z).powf(-sigma_f / gamma);
        let mk = |zz: f64| MarketState::new(t, zz, manifold(zz));
        let run = || -> fixterm::Result<Option<(f64, f64)>> {
            let st = mk(z)?;
            let st_up = mk(z + h)?;
            let st_dn = mk(z - h)?;
            let x1 = uoc::wealth(&st, &sol.uoc, sc)?;
            let an1 = uoc::strategy(&st, &sol.uoc, sc)? * x1;
            if an1.abs() < 1e-4 * x1 {
                return Ok(None);
            }
            let fd1 = -(gamma / sigma)
                * z
                * (uoc::wealth(&st_up, &sol.uoc, sc)? - uoc::wealth(&st_dn, &sol.uoc, sc)?)
                / (2.0 * h);
            let x2 = uow::wealth(&st, &sol.uow, sc)?;
            let an2 = uow::strategy(&st, &sol.uow, sc)? * x2;
            let fd2 = -(gamma / sigma)
                * z
                * (uow::wealth(&st_up, &sol.uow, sc)? - uow::wealth(&st_dn, &sol.uow, sc)?)
                / (2.0 * h);
            let e1 = ((an1 - fd1) / an1.abs().max(fd1.abs())).abs();
            let e2 = if an2.abs().max(fd2.abs()) > 1e-4 * x2.abs().max(1.0) {
                ((an2 - fd2) / an2.abs().max(fd2.abs())).abs()
            } else {
                0.0
            };
            Ok(Some((e1, e2)))
        };
        match run() {
            Ok(Some((e1, e2))) => {
                worst_pos = worst_pos.max(e1).max(e2);
                states += 1;
            }
            Ok(None) => {}
            Err(e) => failure = Some(e.to_string()),
        }
    }

    if let Some(e) = failure {
        return CheckOutcome {
            name: "derivative_checks",
            pass: false,
            detail: format!("state evaluation failed: {e}"),
        };
    }
    let pass = checked == 20 && states == 20 && worst_xi <= 1e-5 && worst_pos <= 1e-5;
    CheckOutcome {
        name: "derivative_checks",
        pass,
        detail: format!(
            "kernel slope vs finite differences worst {worst_xi:.2e} over {checked} states; position formulas worst {worst_pos:.2e} over {states} states (gate 1e-5), seed {}",
            seed + 30
        ),
    }
}

fn check_case_boundary(params: &Params, sc: &Scenario) -> CheckOutcome {
    // The claim layout switches regime where sigma_f (1 - p2) = gamma; the
    // conditional value must be continuous across that volatility.
    let boundary = sc.market.gamma() / (1.0 - sc.prefs.p2());
    let delta = 1e-7 * boundary.max(1e-3);
    let value_at = |sigma_f: f64| -> Result<f64, String> {
        let mut p = params.clone();
        p.set("sigma_f", sigma_f)?;
        let sci = p.to_scenario()?;
        let v2 = uow::v2_min(&sci) * 1.02 + 1e-6;
        let psi = 0.5 * uow::feasible_psi_max(v2, &sci).map_err(|e| e.to_string())?;
        uow::conditional_value(psi, v2, &sci).map_err(|e| e.to_string())
    };
    let (below, at, above) = match (
        value_at(boundary - delta),
        value_at(boundary),
        value_at(boundary + delta),
    ) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
            return CheckOutcome {
                name: "case_boundary",
                pass: false,
                detail: format!("evaluation near the regime boundary failed: {e}"),
            }
        }
    };
    let scale = at.abs().max(1e-12);
    let jump = ((below - at).abs()).max((above - at).abs()) / scale;
    CheckOutcome {
        name: "case_boundary",
        pass: jump <= 1e-5,
        detail: format!(
            "conditional value across the regime volatility {boundary:.6}: worst relative jump {jump:.2e} (gate 1e-5)"
        ),
    }
}

/// `validate`: run the oracle suite and report pass/fail per check. Returns
/// the printable report plus the names of failed checks.
pub fn run_validate(params: &Params) -> Result<(String, Vec<&'static str>), Failure> {
    let sc = params.to_scenario().map_err(Failure::Input)?;
    let seed = sc.numerics.seed;
    let n_pairs = (sc.numerics.mc_paths as u64 / 2).max(1);
    let sol = policy::solve_policy(&sc).map_err(from_core)?;

    let outcomes = [
        check_kernel_oracle(&sc, n_pairs, seed),
        check_put_pricing(&sc, n_pairs, seed),
        check_budget_residuals(&sol, &sc),
        check_policy_simulation(&sol, &sc, seed),
        check_derivatives(&sol, &sc, seed),
        check_case_boundary(params, &sc),
    ];

    let mut report = format!("validate: seed {seed}, {} paths\n", sc.numerics.mc_paths);
    let mut failed = Vec::new();
    for c in &outcomes {
        let status = if c.pass { "PASS" } else { "FAIL" };
        report.push_str(&format!("check {}: {} — {}\n", c.name, status, c.detail));
        if !c.pass {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        report.push_str(&format!("result: PASS ({}/{} checks)\n", outcomes.len(), outcomes.len()));
    } else {
        report.push_str(&format!("result: FAIL ({})\n", failed.join(", ")));
    }
    Ok((report, failed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params() -> Params {
        Params::default()
    }

    #[test]
    fn solve_emits_one_row_with_tight_residuals() {
        let out = run_solve(&base_params()).unwrap();
        let mut lines = out.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            "v0_min,v1_star,v2_star,psi_star,osiw,x_b,lambda1,lambda2,value,case_tag,residuals"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        let v0_min: f64 = row[0].parse().unwrap();
        assert!((v0_min - 81.72).abs() < 0.01, "v0_min = {v0_min}");
        let psi: f64 = row[3].parse().unwrap();
        let osiw: f64 = row[4].parse().unwrap();
        assert!((osiw - psi / 100.0).abs() < 1e-9);
        let residuals: f64 = row[10].parse().unwrap();
        assert!(residuals <= 1e-8, "residuals = {residuals}");
        assert!(lines.next().is_none());
    }

    #[test]
    fn infeasible_capital_exits_with_code_two_and_names_the_minimum() {
        let mut p = base_params();
        p.v0 = 50.0;
        let err = run_solve(&p).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("81.7"), "{}", err.message());
    }

    #[test]
    fn metric_list_parsing_handles_default_empty_and_bad_names() {
        assert_eq!(parse_metrics(None).unwrap(), Metric::ALL.to_vec());
        assert!(parse_metrics(Some("")).unwrap().is_empty());
        assert_eq!(
            parse_metrics(Some("osiw, svf")).unwrap(),
            vec![Metric::Osiw, Metric::Svf]
        );
        let err = parse_metrics(Some("sharpe")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.message().contains("sharpe"));
    }

    #[test]
    fn grid_parsing_rejects_garbage_and_empty_lists() {
        assert_eq!(parse_grid("1,2.5, 3").unwrap(), vec![1.0, 2.5, 3.0]);
        assert_eq!(parse_grid("70,80,90").unwrap(), vec![70.0, 80.0, 90.0]);
        assert!(parse_grid("1,x").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_grid(",").is_err());
    }

    #[test]
    fn sweep_keeps_grid_order_and_survives_infeasible_points() {
        let out = run_sweep(
            &base_params(),
            "v0",
            &[50.0, 100.0],
            &[Metric::Osiw],
            2,
        )
        .unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "parameter,value,metric,result,diagnostics");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("v0,50,osiw,,"), "{}", lines[1]);
        assert!(lines[1].contains("81.7"), "{}", lines[1]);
        assert!(lines[2].starts_with("v0,100,osiw,0.47"), "{}", lines[2]);
        assert!(lines[2].ends_with(",ok"), "{}", lines[2]);
    }

    #[test]
    fn sweep_with_no_metrics_is_header_only() {
        let out = run_sweep(&base_params(), "T", &[1.0, 2.0], &[], 1).unwrap();
        assert_eq!(out, "parameter,value,metric,result,diagnostics\n");
    }

    #[test]
    fn sweep_rejects_unknown_parameter_names() {
        let err = run_sweep(&base_params(), "gamma", &[1.0], &[Metric::Osiw], 1).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.message().contains("gamma"));
    }

    #[test]
    fn sweep_output_does_not_depend_on_worker_count() {
        let grid = [1.0, 2.0, 3.0];
        let metrics = [Metric::Osiw, Metric::V1Star];
        let one = run_sweep(&base_params(), "T", &grid, &metrics, 1).unwrap();
        let four = run_sweep(&base_params(), "T", &grid, &metrics, 4).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn single_metric_commands_match_the_library() {
        let sc = base_params().to_scenario().unwrap();
        let svf = run_single_metric(&base_params(), Metric::Svf).unwrap();
        let expected = policy::svf(&sc).unwrap();
        let line = svf.lines().nth(1).unwrap();
        let shown: f64 = line.strip_prefix("svf,").unwrap().parse().unwrap();
        assert!((shown - expected).abs() <= 1e-12 * expected.abs());
        assert!(run_single_metric(&base_params(), Metric::Osiw).is_err());
    }

    #[test]
    fn validate_passes_on_the_base_scenario_with_small_samples() {
        let mut p = base_params();
        p.numerics.mc_paths = 4000;
        p.numerics.mc_steps = 16;
        let (report, failed) = run_validate(&p).unwrap();
        assert!(failed.is_empty(), "{report}");
        assert!(report.contains("check kernel_oracle: PASS"), "{report}");
        assert!(report.contains("check case_boundary: PASS"), "{report}");
        assert!(report.contains("result: PASS (6/6 checks)"), "{report}");
        assert!(report.contains("seed 42"), "{report}");
    }

    #[test]
    fn validate_report_is_deterministic_for_a_fixed_seed() {
        let mut p = base_params();
        p.numerics.mc_paths = 2000;
        p.numerics.mc_steps = 8;
        let a = run_validate(&p).unwrap();
        let b = run_validate(&p).unwrap();
        assert_eq!(a.0, b.0);
        p.numerics.seed = 43;
        let c = run_validate(&p).unwrap();
        assert!(c.1.is_empty(), "{}", c.0);
        assert_ne!(a.0, c.0, "different seeds must change the sampled draws");
    }
}
