//! Split of the initial capital v₀ between the consumption subproblem (v₁)
//! and the terminal-wealth subproblem (v₂ = v₀ − v₁).
//!
//! Both subproblem values are strictly concave in their capital, so the
//! derivative difference G(v₁) = V₁′(v₁) − V₂′(v₀ − v₁) is strictly
//! decreasing and the optimal split is its root, projected onto
//! [v₁_min, v₀ − v₂_min] when the root falls outside.

use crate::error::{Error, Result};
use crate::market::Scenario;
use crate::roots;
use crate::{uoc, uow};

/// Optimal division of the initial capital.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResult {
    /// Capital assigned to the consumption subproblem.
    pub v1_star: f64,
    /// Capital assigned to the terminal-wealth subproblem (v₀ − v1_star).
    pub v2_star: f64,
    /// Root estimate of the first-order condition before projection. When
    /// the derivative difference has no interior sign change this is pinned
    /// at the nearest probe and `projected` is set.
    pub vbar1: f64,
    /// Whether the optimum sits at (or is pressed against) a boundary of the
    /// feasible interval rather than at an interior stationary point; at such
    /// points the first-order condition does not vanish.
    pub projected: bool,
}

/// Least capital admitting any feasible policy: the sum of the subproblem
/// minima (perpetual floor consumption plus the bond-financed guarantee).
pub fn v0_min(scenario: &Scenario) -> f64 {
    uoc::v1_min(scenario) + uow::v2_min(scenario)
}

/// Central finite difference (f(v+h) − f(v−h)) / (2h).
pub fn value_derivative<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    v: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    Ok((f(v + h)? - f(v - h)?) / (2.0 * h))
}

/// Solve the split for a capital v₀ under a scenario.
pub fn solve_split(v0: f64, scenario: &Scenario) -> Result<SplitResult> {
    solve_split_with(v0, scenario, false)
}

/// Split with the terminal-wealth side optionally restricted to ψ = 0
/// (liquid-only benchmark).
pub(crate) fn solve_split_with(
    v0: f64,
    scenario: &Scenario,
    force_psi_zero: bool,
) -> Result<SplitResult> {
    if !(v0 > 0.0) || !v0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "v0 must be strictly positive, got {v0}"
        )));
    }
    let v1m = uoc::v1_min(scenario);
    let v2m = uow::v2_min(scenario);
    let v0m = v1m + v2m;
    if v0 < v0m * (1.0 - 1e-9) {
        return Err(Error::InfeasibleCapital {
            capital: v0,
            minimum: v0m,
        });
    }
    // Inner solves run with a tightened tolerance so their noise stays
    // below the finite-difference resolution of the outer solve.
    let tight = scenario.tightened();
    let value1 = |v1: f64| uoc::value_at(v1, &tight);
    let value2 = |v2: f64| uow::value_at(v2, &tight, force_psi_zero);
    let fd_h = |v: f64| (scenario.numerics.fd_rel_step * v).max(1e-7 * v0);
    split_concave_sum(
        v0,
        v1m,
        (v0 - v2m).max(v1m),
        fd_h,
        value1,
        value2,
        scenario.numerics.bisect_tol * v0.max(1.0),
    )
}

/// Core split of v₀ between two concave value maps with v₁ confined to
/// [lo, hi]; `value2` is evaluated at v₀ − v₁.
fn split_concave_sum(
    v0: f64,
    lo: f64,
    hi: f64,
    fd_h: impl Fn(f64) -> f64,
    mut value1: impl FnMut(f64) -> Result<f64>,
    mut value2: impl FnMut(f64) -> Result<f64>,
    xtol: f64,
) -> Result<SplitResult> {
    let finish = |v1_star: f64, vbar1: f64, projected: bool| SplitResult {
        v1_star,
        v2_star: v0 - v1_star,
        vbar1,
        projected,
    };
    let width = hi - lo;
    let h_ref = fd_h(hi);
    let mut total_err: Option<Error> = None;
    if width <= 4.0 * h_ref {
        // Interval too thin for differencing: maximize the total directly.
        if width <= 0.0 {
            return Ok(finish(lo, lo, false));
        }
        let mut total = |v1: f64| -> f64 {
            match value1(v1).and_then(|a| Ok(a + value2(v0 - v1)?)) {
                Ok(t) => t,
                Err(e) => {
                    total_err = Some(e);
                    f64::NEG_INFINITY
                }
            }
        };
        let (v1, _) = roots::golden_max(&mut total, lo, hi, (1e-9 * width).max(xtol));
        if let Some(e) = total_err {
            return Err(e);
        }
        return Ok(finish(v1, v1, false));
    }

    // Derivative difference with the probe step clamped into the domain.
    let mut deriv_gap = |v1: f64| -> Result<f64> {
        let h = fd_h(v1).min(v1 - lo).min(hi - v1);
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split probe {v1} leaves no room for differencing in [{lo}, {hi}]"
            )));
        }
        let d1 = (value1(v1 + h)? - value1(v1 - h)?) / (2.0 * h);
        let d2 = (value2(v0 - v1 + h)? - value2(v0 - v1 - h)?) / (2.0 * h);
        Ok(d1 - d2)
    };
    let lo2 = lo + 2.0 * fd_h(lo);
    let hi2 = hi - 2.0 * fd_h(hi);
    let g_lo = deriv_gap(lo2)?;
    let g_hi = deriv_gap(hi2)?;

    // Golden confirmation of a corner: finite-difference noise must not be
    // allowed to pin the split to a boundary the total map disagrees with.
    let confirm_corner = |corner: f64,
                              probe: f64,
                              value1: &mut dyn FnMut(f64) -> Result<f64>,
                              value2: &mut dyn FnMut(f64) -> Result<f64>|
     -> Result<SplitResult> {
        let mut total_err: Option<Error> = None;
        let mut total = |v1: f64| -> f64 {
            match value1(v1).and_then(|a| Ok(a + value2(v0 - v1)?)) {
                Ok(t) => t,
                Err(e) => {
                    total_err = Some(e);
                    f64::NEG_INFINITY
                }
            }
        };
        let gtol = (1e-8 * width).max(xtol);
        let (v1_g, t_g) = roots::golden_max(&mut total, lo, hi, gtol);
        let t_corner = total(corner);
        if let Some(e) = total_err {
            return Err(e);
        }
        if t_g > t_corner + 1e-10 * t_corner.abs().max(1e-12) {
            // The winner may itself be pressed against the boundary: the
            // total can increase all the way to an open edge (its supremum is
            // not attained exactly at the corner when the corner solution
            // switches branch). Flag such points as projected so callers do
            // not expect a vanishing first-order condition there.
            let pinned = (v1_g - corner).abs() <= 8.0 * gtol;
            return Ok(finish(v1_g, v1_g, pinned));
        }
        Ok(finish(corner, probe, true))
    };

    if g_lo <= 0.0 {
        // Terminal-wealth capital is worth more everywhere: all slack to v₂.
        return confirm_corner(lo, lo2, &mut { value1 }, &mut { value2 });
    }
    if g_hi >= 0.0 {
        // Consumption capital is worth more everywhere: all slack to v₁.
        return confirm_corner(hi, hi2, &mut { value1 }, &mut { value2 });
    }
    let mut gap_err: Option<Error> = None;
    let root = roots::bisect(
        |v1| match deriv_gap(v1) {
            Ok(g) => g,
            Err(e) => {
                gap_err = Some(e);
                f64::NAN
            }
        },
        lo2,
        hi2,
        xtol,
        200,
    );
    if let Some(e) = gap_err {
        return Err(e);
    }
    let vbar1 = root?;
    Ok(finish(vbar1.clamp(lo, hi), vbar1, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{Constraints, IlliquidSpec, MarketSpec, Preferences};
    use crate::numerics::NumericsConfig;

    fn base() -> Scenario {
        Scenario::new(
            MarketSpec::new(0.03, 0.08, 0.25).unwrap(),
            IlliquidSpec::new(1.0, 0.10, 0.25).unwrap(),
            Preferences::new(-2.0, -1.0).unwrap(),
            Constraints::new(3.0, 80.0).unwrap(),
            3.0,
            100.0,
            NumericsConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn minimal_total_capital_is_sum_of_component_minima() {
        let sc = base();
        let want = 8.606_881_472_877_181_325_26 + 73.114_494_821_698_254_939_8;
        assert!(((v0_min(&sc) - want) / want).abs() < 1e-14);
        assert!(matches!(
            solve_split(want * 0.99, &sc),
            Err(Error::InfeasibleCapital { .. })
        ));
    }

    #[test]
    fn central_difference_is_exact_on_quadratics() {
        let d = value_derivative(|x| Ok(3.0 * x * x - 2.0 * x + 1.0), 1.7, 0.05).unwrap();
        assert!((d - (6.0 * 1.7 - 2.0)).abs() < 1e-10);
        assert!(value_derivative(|x| Ok(x), 1.0, 0.0).is_err());
    }

    #[test]
    fn split_solves_symmetric_toy_at_half() {
        // Identical concave maps on both sides: the root must be v0/2.
        let v = |x: f64| Ok(-1.0 / x);
        let res = split_concave_sum(10.0, 1.0, 9.0, |_| 1e-4, v, v, 1e-10).unwrap();
        assert!((res.vbar1 - 5.0).abs() < 1e-6, "vbar1 {}", res.vbar1);
        assert!(!res.projected);
        assert!((res.v1_star + res.v2_star - 10.0).abs() < 1e-12);
    }

    #[test]
    fn split_projects_one_sided_preference_to_corner() {
        // value1 gains nothing from capital; everything goes to side 2.
        let flat = |_x: f64| Ok(0.0);
        let hungry = |x: f64| Ok(-1.0 / x);
        let res = split_concave_sum(10.0, 1.0, 9.0, |_| 1e-4, flat, hungry, 1e-10).unwrap();
        assert_eq!(res.v1_star, 1.0);
        assert!(res.projected);
        // Mirror image pins to the upper corner.
        let res = split_concave_sum(10.0, 1.0, 9.0, |_| 1e-4, hungry, flat, 1e-10).unwrap();
        assert_eq!(res.v1_star, 9.0);
        assert!(res.projected);
    }

    #[test]
    fn base_split_satisfies_first_order_condition() {
        let sc = base();
        let res = solve_split(100.0, &sc).unwrap();
        assert!((res.v1_star + res.v2_star - 100.0).abs() < 1e-12 * 100.0);
        assert!(res.v1_star >= uoc::v1_min(&sc) - 1e-12);
        assert!(res.v1_star <= 100.0 - uow::v2_min(&sc) + 1e-12);
        if !res.projected {
            // Residual of the derivative difference is small relative to
            // the marginal value of consumption capital.
            let tight = sc.tightened();
            let h = 1e-4 * res.v1_star;
            let d1 = value_derivative(|v| uoc::value_at(v, &tight), res.v1_star, h).unwrap();
            let d2 =
                value_derivative(|v| uow::value_at(v, &tight, false), res.v2_star, h).unwrap();
            assert!(
                ((d1 - d2) / d1).abs() < 1e-5,
                "residual {:e} vs scale {:e}",
                d1 - d2,
                d1
            );
        }
    }

    #[test]
    fn base_split_beats_eleven_point_grid() {
        let sc = base();
        let res = solve_split(100.0, &sc).unwrap();
        let best = uoc::value_at(res.v1_star, &sc).unwrap()
            + uow::value_at(res.v2_star, &sc, false).unwrap();
        let lo = uoc::v1_min(&sc);
        let hi = 100.0 - uow::v2_min(&sc);
        for i in 0..11 {
            let v1 = lo + (hi - lo) * i as f64 / 10.0;
            let total =
                uoc::value_at(v1, &sc).unwrap() + uow::value_at(100.0 - v1, &sc, false).unwrap();
            assert!(
                total <= best + 1e-9 * best.abs(),
                "grid v1 {v1} total {total} beats split {best}"
            );
        }
    }

    #[test]
    fn total_map_is_concave_on_feasible_interval() {
        let sc = base();
        let lo = uoc::v1_min(&sc);
        let hi = 100.0 - uow::v2_min(&sc);
        let n = 15;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let v1 = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
                uoc::value_at(v1, &sc).unwrap() + uow::value_at(100.0 - v1, &sc, false).unwrap()
            })
            .collect();
        let scale = vals.iter().fold(0f64, |a, v| a.max(v.abs()));
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] < 1e-8 * scale);
        }
    }

    #[test]
    fn exact_minimum_capital_splits_to_both_boundaries() {
        let sc = base();
        let v0m = v0_min(&sc);
        let res = solve_split(v0m, &sc).unwrap();
        assert!((res.v1_star - uoc::v1_min(&sc)).abs() < 1e-9 * v0m);
        assert!((res.v2_star - uow::v2_min(&sc)).abs() < 1e-9 * v0m);
    }

    #[test]
    fn envelope_derivative_matches_consumption_multiplier() {
        // The derivative of the consumption value function at an interior
        // capital equals its budget multiplier.
        let sc = base();
        let v1 = 20.0;
        let lam = uoc::solve_lambda1(v1, &sc).unwrap();
        let d = value_derivative(|v| uoc::value_at(v, &sc), v1, 1e-4 * v1).unwrap();
        assert!(((d - lam) / lam).abs() < 1e-4, "d {d:e} lam {lam:e}");
    }

    #[test]
    fn value_derivatives_decrease_in_capital() {
        let sc = base();
        let mut prev = f64::INFINITY;
        for i in 0..6 {
            let v1 = 12.0 + 3.0 * i as f64;
            let d = value_derivative(|v| uoc::value_at(v, &sc), v1, 1e-4 * v1).unwrap();
            assert!(d < prev);
            prev = d;
        }
        let mut prev = f64::INFINITY;
        for i in 0..5 {
            let v2 = 74.0 + 4.0 * i as f64;
            let d =
                value_derivative(|v| uow::value_at(v, &sc, false), v2, 1e-5 * v2).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }
}
