//! Market, asset, preference, and constraint specifications plus exact path
//! simulation of the pricing kernel and the fixed-term asset.

use crate::error::{Error, Result};
use crate::numerics::NumericsConfig;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Black–Scholes liquid market: bond rate `r`, stock drift `mu`, stock
/// volatility `sigma`, and the derived market price of risk γ = (μ − r)/σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSpec {
    r: f64,
    mu: f64,
    sigma: f64,
}

impl MarketSpec {
    /// Validate and build a market specification. Requires σ > 0 and r > 0
    /// (the consumption-floor annuity divides by r).
    pub fn new(r: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "sigma must be strictly positive, got {sigma}"
            )));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "r must be strictly positive, got {r}"
            )));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidSpec(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { r, mu, sigma })
    }

    /// Risk-free rate per year.
    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Stock drift per year.
    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Stock volatility per √year.
    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Market price of risk γ = (μ − r)/σ.
    #[inline]
    pub fn gamma(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }
}

/// Market price of risk γ = (μ − r)/σ.
pub fn market_price_of_risk(mu: f64, r: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "sigma must be strictly positive, got {sigma}"
        )));
    }
    Ok((mu - r) / sigma)
}

/// Fixed-term (illiquid) asset: initial price F₀, drift μ_F, volatility σ_F.
///
/// The asset can be bought only at time 0 and pays F(T) at the horizon; it is
/// driven by the same Brownian motion as the stock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlliquidSpec {
    f0: f64,
    mu_f: f64,
    sigma_f: f64,
}

impl IlliquidSpec {
    /// Validate and build. Requires F₀ > 0 and σ_F ≥ 0.
    pub fn new(f0: f64, mu_f: f64, sigma_f: f64) -> Result<Self> {
        if !(f0 > 0.0) || !f0.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "f0 must be strictly positive, got {f0}"
            )));
        }
        if !(sigma_f >= 0.0) || !sigma_f.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "sigma_f must be non-negative, got {sigma_f}"
            )));
        }
        if !mu_f.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "mu_f must be finite, got {mu_f}"
            )));
        }
        Ok(Self { f0, mu_f, sigma_f })
    }

    /// Initial price F₀.
    #[inline]
    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Drift μ_F per year.
    #[inline]
    pub fn mu_f(&self) -> f64 {
        self.mu_f
    }

    /// Volatility σ_F per √year.
    #[inline]
    pub fn sigma_f(&self) -> f64 {
        self.sigma_f
    }
}

/// Power-utility exponents: consumption utility c^{p₁}/p₁ and terminal-wealth
/// utility v^{p₂}/p₂, with p < 1 and p ≠ 0 (relative risk aversion 1 − p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    p1: f64,
    p2: f64,
}

impl Preferences {
    /// Validate and build. Each exponent must satisfy p < 1, p ≠ 0.
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(p < 1.0) || p == 0.0 || !p.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "{name} must satisfy p < 1 and p != 0, got {p}"
                )));
            }
        }
        Ok(Self { p1, p2 })
    }

    /// Consumption risk-aversion exponent p₁.
    #[inline]
    pub fn p1(&self) -> f64 {
        self.p1
    }

    /// Terminal-wealth risk-aversion exponent p₂.
    #[inline]
    pub fn p2(&self) -> f64 {
        self.p2
    }
}

/// Hard constraints: consumption floor c̲ > 0 (per year) and terminal-wealth
/// guarantee V̲ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    c_floor: f64,
    v_floor: f64,
}

impl Constraints {
    /// Validate and build. Both floors must be strictly positive.
    pub fn new(c_floor: f64, v_floor: f64) -> Result<Self> {
        if !(c_floor > 0.0) || !c_floor.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "c_floor must be strictly positive, got {c_floor}"
            )));
        }
        if !(v_floor > 0.0) || !v_floor.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "v_floor must be strictly positive, got {v_floor}"
            )));
        }
        Ok(Self { c_floor, v_floor })
    }

    /// Consumption floor c̲ (money per year).
    #[inline]
    pub fn c_floor(&self) -> f64 {
        self.c_floor
    }

    /// Terminal guarantee V̲ (money).
    #[inline]
    pub fn v_floor(&self) -> f64 {
        self.v_floor
    }
}

/// A full problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    /// Liquid market specification.
    pub market: MarketSpec,
    /// Fixed-term asset specification.
    pub illiquid: IlliquidSpec,
    /// Utility exponents.
    pub prefs: Preferences,
    /// Consumption floor and terminal guarantee.
    pub constraints: Constraints,
    horizon_t: f64,
    v0: f64,
    /// Numerical-method configuration.
    pub numerics: NumericsConfig,
}

impl Scenario {
    /// Validate and build a scenario. Requires T > 0 and v₀ > 0.
    pub fn new(
        market: MarketSpec,
        illiquid: IlliquidSpec,
        prefs: Preferences,
        constraints: Constraints,
        horizon_t: f64,
        v0: f64,
        numerics: NumericsConfig,
    ) -> Result<Self> {
        if !(horizon_t > 0.0) || !horizon_t.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "horizon_t must be strictly positive, got {horizon_t}"
            )));
        }
        if !(v0 > 0.0) || !v0.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "v0 must be strictly positive, got {v0}"
            )));
        }
        numerics.validate()?;
        Ok(Self {
            market,
            illiquid,
            prefs,
            constraints,
            horizon_t,
            v0,
            numerics,
        })
    }

    /// Horizon T in years.
    #[inline]
    pub fn horizon_t(&self) -> f64 {
        self.horizon_t
    }

    /// Initial capital v₀.
    #[inline]
    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Copy with a different initial capital.
    pub fn with_v0(&self, v0: f64) -> Result<Self> {
        Self::new(
            self.market,
            self.illiquid,
            self.prefs,
            self.constraints,
            self.horizon_t,
            v0,
            self.numerics,
        )
    }

    /// Copy with a different terminal guarantee.
    pub fn with_v_floor(&self, v_floor: f64) -> Result<Self> {
        Self::new(
            self.market,
            self.illiquid,
            self.prefs,
            Constraints::new(self.constraints.c_floor(), v_floor)?,
            self.horizon_t,
            self.v0,
            self.numerics,
        )
    }

    /// Copy with a different numerics configuration.
    pub fn with_numerics(&self, numerics: NumericsConfig) -> Result<Self> {
        Self::new(
            self.market,
            self.illiquid,
            self.prefs,
            self.constraints,
            self.horizon_t,
            self.v0,
            numerics,
        )
    }

    pub(crate) fn tightened(&self) -> Self {
        let mut s = *self;
        s.numerics = s.numerics.tightened();
        s
    }
}

/// Solution position relative to the subproblem's minimal-capital boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFlag {
    /// Capital strictly above the minimum; the multiplier exists.
    Interior,
    /// Capital exactly at the minimum; the policy is the boundary display.
    AtMinimum,
}

/// A `(t, Z̃(t), F(t))` state along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    t: f64,
    z: f64,
    f: f64,
}

impl MarketState {
    /// Validate and build a state. Requires t ≥ 0, z > 0, f > 0.
    pub fn new(t: f64, z: f64, f: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t must be non-negative, got {t}"
            )));
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "z must be strictly positive, got {z}"
            )));
        }
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "f must be strictly positive, got {f}"
            )));
        }
        Ok(Self { t, z, f })
    }

    /// Time t in years.
    #[inline]
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Pricing-kernel value Z̃(t).
    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Fixed-term asset price F(t).
    #[inline]
    pub fn f(&self) -> f64 {
        self.f
    }
}

/// Pricing-kernel value Z̃(t) = exp(−(r + γ²/2)t − γ·W(t)).
#[inline]
pub fn pricing_kernel_value(t: f64, w: f64, market: &MarketSpec) -> f64 {
    let g = market.gamma();
    (-(market.r() + 0.5 * g * g) * t - g * w).exp()
}

/// Whether buying the fixed-term asset can ever be strictly optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonredundancy {
    /// Sharpe ratio of F strictly above the market price of risk.
    StrictlyAttractive,
    /// Sharpe ratios equal: the agent is indifferent; ties break to ψ = 0.
    Indifferent,
    /// Sharpe ratio strictly below: a rational agent holds ψ = 0.
    Redundant,
}

/// Classify the fixed-term asset's Sharpe ratio (μ_F − r)/σ_F against γ.
///
/// For σ_F = 0 the ratio degenerates and the test becomes μ_F vs r. Equality
/// is detected with relative tolerance 1e-12 so that parameter sets written
/// as decimal literals land on the indifference branch.
pub fn classify_nonredundancy(market: &MarketSpec, illiquid: &IlliquidSpec) -> Nonredundancy {
    let g = market.gamma();
    let tol = 1e-12 * g.abs().max(1.0);
    let excess = if illiquid.sigma_f() == 0.0 {
        illiquid.mu_f() - market.r()
    } else {
        (illiquid.mu_f() - market.r()) / illiquid.sigma_f() - g
    };
    if excess > tol {
        Nonredundancy::StrictlyAttractive
    } else if excess < -tol {
        Nonredundancy::Redundant
    } else {
        Nonredundancy::Indifferent
    }
}

/// One simulated path sampled on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Brownian motion W at the grid times.
    pub w: Vec<f64>,
    /// Pricing kernel Z̃ at the grid times (closed form, no Euler error).
    pub z: Vec<f64>,
    /// Fixed-term asset price F at the grid times (closed form).
    pub f: Vec<f64>,
}

/// A batch of simulated paths on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    /// Grid times 0 = t₀ < … < t_n = T.
    pub times: Vec<f64>,
    /// The paths, indexed by their derived stream number.
    pub paths: Vec<Path>,
    /// Seed the streams were derived from.
    pub seed: u64,
}

/// Sample a standard normal via the Box–Muller transform, consuming two
/// uniforms per pair of normals (the second draw is discarded for simplicity;
/// path streams are independent, so this costs only throughput).
#[inline]
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}

/// RNG for the given path index: one seed, one independent stream per path,
/// so batches are reproducible and order-independent.
pub(crate) fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Simulate `n_paths` exact-distribution paths of (W, Z̃, F) on a uniform
/// grid with `n_steps` steps over [0, T].
///
/// W is sampled by exact Gaussian increments; Z̃ and F are evaluated from
/// their closed forms at the grid points, so the only randomness is in W and
/// there is no discretization error in Z̃ or F. Deterministic for fixed seed.
pub fn simulate_paths(
    scenario: &Scenario,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathSet> {
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidArgument(
            "n_paths and n_steps must be at least 1".into(),
        ));
    }
    let t_end = scenario.horizon_t();
    let dt = t_end / n_steps as f64;
    let times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
    let sqrt_dt = dt.sqrt();
    let market = scenario.market;
    let ill = scenario.illiquid;
    let paths = (0..n_paths)
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut w = Vec::with_capacity(times.len());
            let mut acc = 0.0;
            w.push(0.0);
            for _ in 0..n_steps {
                acc += sqrt_dt * standard_normal(&mut rng);
                w.push(acc);
            }
            let z: Vec<f64> = times
                .iter()
                .zip(&w)
                .map(|(&t, &wt)| pricing_kernel_value(t, wt, &market))
                .collect();
            let f: Vec<f64> = times
                .iter()
                .zip(&w)
                .map(|(&t, &wt)| {
                    ill.f0()
                        * ((ill.mu_f() - 0.5 * ill.sigma_f() * ill.sigma_f()) * t
                            + ill.sigma_f() * wt)
                            .exp()
                })
                .collect();
            Path { w, z, f }
        })
        .collect();
    Ok(PathSet { times, paths, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xi::h_factor;

    fn base_market() -> MarketSpec {
        MarketSpec::new(0.03, 0.08, 0.25).unwrap()
    }

    fn base_illiquid() -> IlliquidSpec {
        IlliquidSpec::new(1.0, 0.10, 0.25).unwrap()
    }

    fn base_scenario() -> Scenario {
        Scenario::new(
            base_market(),
            base_illiquid(),
            Preferences::new(-2.0, -1.0).unwrap(),
            Constraints::new(3.0, 80.0).unwrap(),
            3.0,
            100.0,
            NumericsConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn price_of_risk_examples() {
        assert_eq!(market_price_of_risk(0.08, 0.03, 0.25).unwrap(), 0.2);
        assert_eq!(market_price_of_risk(0.05, 0.05, 0.3).unwrap(), 0.0);
        assert!((market_price_of_risk(0.10, 0.03, 0.25).unwrap() - 0.28).abs() < 1e-15);
        assert!(market_price_of_risk(0.08, 0.03, 0.0).is_err());
        assert!(market_price_of_risk(0.08, 0.03, -1.0).is_err());
    }

    #[test]
    fn kernel_value_examples() {
        let m = base_market();
        assert_eq!(pricing_kernel_value(0.0, 0.0, &m), 1.0);
        // γ = 0: deterministic discounting.
        let flat = MarketSpec::new(0.03, 0.03, 0.25).unwrap();
        assert!((pricing_kernel_value(2.0, 1.3, &flat) - (-0.06f64).exp()).abs() < 1e-15);
        // At w = 0 only the drift term remains: exp(−(r + γ²/2)t).
        assert!((pricing_kernel_value(3.0, 0.0, &m) - (-0.15f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn nonredundancy_classification() {
        let m = base_market();
        assert_eq!(
            classify_nonredundancy(&m, &base_illiquid()),
            Nonredundancy::StrictlyAttractive
        );
        // Sharpe equality: μ_F = r + σ_F·γ.
        let indiff = IlliquidSpec::new(1.0, 0.03 + 0.25 * 0.2, 0.25).unwrap();
        assert_eq!(
            classify_nonredundancy(&m, &indiff),
            Nonredundancy::Indifferent
        );
        let red = IlliquidSpec::new(1.0, 0.05, 0.5).unwrap();
        assert_eq!(classify_nonredundancy(&m, &red), Nonredundancy::Redundant);
        // σ_F = 0 degenerates to μ_F vs r.
        let det_up = IlliquidSpec::new(1.0, 0.05, 0.0).unwrap();
        assert_eq!(
            classify_nonredundancy(&m, &det_up),
            Nonredundancy::StrictlyAttractive
        );
        let det_eq = IlliquidSpec::new(1.0, 0.03, 0.0).unwrap();
        assert_eq!(
            classify_nonredundancy(&m, &det_eq),
            Nonredundancy::Indifferent
        );
    }

    #[test]
    fn spec_validation_rejects_bad_fields() {
        assert!(MarketSpec::new(0.03, 0.08, 0.0).is_err());
        assert!(MarketSpec::new(0.0, 0.08, 0.25).is_err());
        assert!(IlliquidSpec::new(0.0, 0.1, 0.25).is_err());
        assert!(IlliquidSpec::new(1.0, 0.1, -0.1).is_err());
        assert!(Preferences::new(0.0, -1.0).is_err());
        assert!(Preferences::new(-2.0, 1.0).is_err());
        assert!(Constraints::new(0.0, 80.0).is_err());
        assert!(Constraints::new(3.0, 0.0).is_err());
    }

    #[test]
    fn paths_initial_conditions_and_determinism() {
        let sc = base_scenario();
        let one = simulate_paths(&sc, 1, 1, 42).unwrap();
        assert_eq!(one.paths[0].z[0], 1.0);
        assert_eq!(one.paths[0].f[0], 1.0);
        let a = simulate_paths(&sc, 8, 16, 7).unwrap();
        let b = simulate_paths(&sc, 8, 16, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(&sc, 8, 16, 8).unwrap();
        assert_ne!(a, c);
        assert!(simulate_paths(&sc, 0, 4, 1).is_err());
        assert!(simulate_paths(&sc, 4, 0, 1).is_err());
    }

    #[test]
    fn kernel_log_identity_along_paths() {
        // ln Z̃ must equal −(r + γ²/2)t − γW(t) on every grid point.
        let sc = base_scenario();
        let set = simulate_paths(&sc, 16, 32, 3).unwrap();
        let g = sc.market.gamma();
        for p in &set.paths {
            for ((&t, &w), &z) in set.times.iter().zip(&p.w).zip(&p.z) {
                let expect = -(sc.market.r() + 0.5 * g * g) * t - g * w;
                assert!((z.ln() - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fixed_term_link_along_paths() {
        // F(t) = F₀·h(0,t)·Z̃(t)^{−σ_F/γ} pathwise when σ_F > 0.
        let sc = base_scenario();
        let set = simulate_paths(&sc, 16, 32, 11).unwrap();
        let g = sc.market.gamma();
        let sf = sc.illiquid.sigma_f();
        for p in &set.paths {
            for ((&t, &z), &f) in set.times.iter().zip(&p.z).zip(&p.f) {
                let h = h_factor(0.0, t, &sc.illiquid, &sc.market).unwrap();
                let link = sc.illiquid.f0() * h * z.powf(-sf / g);
                assert!((f - link).abs() / f <= 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_asset_paths() {
        let sc = Scenario::new(
            base_market(),
            IlliquidSpec::new(1.0, 0.10, 0.0).unwrap(),
            Preferences::new(-2.0, -1.0).unwrap(),
            Constraints::new(3.0, 80.0).unwrap(),
            3.0,
            100.0,
            NumericsConfig::default(),
        )
        .unwrap();
        let set = simulate_paths(&sc, 4, 8, 5).unwrap();
        for p in &set.paths {
            for (&t, &f) in set.times.iter().zip(&p.f) {
                assert!((f - (0.10 * t).exp()).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn discounted_kernel_is_martingale() {
        // Sample mean of Z̃(T) ≈ e^{−rT} within 4 standard errors.
        let sc = base_scenario();
        let n = 200_000;
        let set = simulate_paths(&sc, n, 1, 12345).unwrap();
        let zs: Vec<f64> = set.paths.iter().map(|p| *p.z.last().unwrap()).collect();
        let mean: f64 = zs.iter().sum::<f64>() / n as f64;
        let var: f64 = zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let target = (-0.03f64 * 3.0).exp();
        assert!(
            (mean - target).abs() <= 4.0 * se,
            "mean {mean} vs target {target} (se {se})"
        );
    }
}
