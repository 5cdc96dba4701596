//! Truncated power moments of the lognormal pricing kernel.
//!
//! The central object is
//!
//! ξ(s, t, z, k, a, b) = E[ Z̃(s)^k · 1{a < Z̃(s) < b} | Z̃(t) = z ],
//!
//! where ln Z̃(s) | Z̃(t)=z is Gaussian with mean ln z − (r + γ²/2)(s − t)
//! and standard deviation |γ|√(s − t). Every wealth, budget, and value
//! expression in this crate reduces to sums of ξ terms, so this module is
//! written for accuracy deep in the distribution tails: probabilities are
//! formed from the complementary error function on its positive branch and
//! thresholds are handled in log space so that 0 and ∞ bounds are exact.

use crate::error::{Error, Result};
use crate::market::{IlliquidSpec, MarketSpec};
use crate::quad;

// Coefficients of W. J. Cody's rational-minimax evaluation of erf/erfc
// (region boundaries 0.46875 and 4.0), accurate to ~1e-16 relative in the
// primary domain and with correctly scaled tails down to the underflow
// threshold near x = 26.543.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];
const SQRPI: f64 = 5.641_895_835_477_562_9e-1;
const ERFC_XBIG: f64 = 26.543;

/// Complementary error function erfc(x) = 2/√π ∫ₓ^∞ e^{−u²} du.
///
/// Relative accuracy ≈ 1e-16 for x ≥ 0; the tail underflows to 0 beyond
/// x ≈ 26.543 where the true value drops below the smallest subnormal.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    let result = if y <= 0.46875 {
        // erfc = 1 − erf with erf from the central rational approximation.
        let ysq = if y > 1.110_223_024_625_156_54e-16 {
            y * y
        } else {
            0.0
        };
        let mut xnum = ERF_A[4] * ysq;
        let mut xden = ysq;
        for i in 0..3 {
            xnum = (xnum + ERF_A[i]) * ysq;
            xden = (xden + ERF_B[i]) * ysq;
        }
        return 1.0 - x * (xnum + ERF_A[3]) / (xden + ERF_B[3]);
    } else if y <= 4.0 {
        let mut xnum = ERFC_C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + ERFC_C[i]) * y;
            xden = (xden + ERFC_D[i]) * y;
        }
        let r = (xnum + ERFC_C[7]) / (xden + ERFC_D[7]);
        // Split y² as ysq² + del with ysq on a 1/16 grid so exp keeps full
        // precision in the product of the two factors.
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    } else if y < ERFC_XBIG {
        let ysq = 1.0 / (y * y);
        let mut xnum = ERFC_P[5] * ysq;
        let mut xden = ysq;
        for i in 0..4 {
            xnum = (xnum + ERFC_P[i]) * ysq;
            xden = (xden + ERFC_Q[i]) * ysq;
        }
        let mut r = ysq * (xnum + ERFC_P[4]) / (xden + ERFC_Q[4]);
        r = (SQRPI - r) / y;
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Standard normal cumulative distribution Φ(x).
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density φ(x).
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ(x₁) − Φ(x₂) without cancellation.
///
/// The difference is rewritten on whichever erfc branch keeps both
/// arguments non-negative-leaning, so probabilities of deep-tail intervals
/// retain full relative precision instead of collapsing to 1 − 1 = 0.
/// Infinite arguments are honored (Φ(∞) = 1, Φ(−∞) = 0).
#[inline]
pub fn phi_diff(x1: f64, x2: f64) -> f64 {
    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;
    // Both expressions are algebraically Φ(x₁) − Φ(x₂); pick the one whose
    // erfc arguments fall in the accurately represented positive regime.
    if x1 + x2 > 0.0 {
        0.5 * (erfc(x2 * S) - erfc(x1 * S))
    } else {
        0.5 * (erfc(-x1 * S) - erfc(-x2 * S))
    }
}

/// Standardized log-threshold d̄(x) = (ln(z/x) − (r + γ²/2)τ)/(|γ|√τ),
/// with τ = s − t. Conventions: d̄(0) = +∞ and d̄(∞) = −∞.
///
/// Errors when the conditional law is degenerate (s ≤ t or γ = 0) or the
/// state/threshold is invalid (z ≤ 0, x < 0).
pub fn d_bar(s: f64, t: f64, z: f64, x: f64, gamma: f64, r: f64) -> Result<f64> {
    if !(s > t) {
        return Err(Error::InvalidArgument(format!(
            "d_bar needs s > t, got s = {s}, t = {t}"
        )));
    }
    if gamma == 0.0 {
        return Err(Error::InvalidArgument(
            "d_bar undefined for gamma = 0 (deterministic kernel)".into(),
        ));
    }
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "d_bar needs z > 0, got {z}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "d_bar needs threshold x >= 0, got {x}"
        )));
    }
    let tau = s - t;
    let sd = gamma.abs() * tau.sqrt();
    if x == 0.0 {
        return Ok(f64::INFINITY);
    }
    if x == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(((z / x).ln() - (r + 0.5 * gamma * gamma) * tau) / sd)
}

/// Multiplicative drift factor linking the fixed-term asset across times:
/// F(t₂) = F(t₁) · h(t₁, t₂) · (Z̃(t₂)/Z̃(t₁))^{−σ_F/γ}, with
/// h(t₁, t₂) = exp((μ_F − σ_F²/2 − σ_F·r/γ − σ_F·γ/2)(t₂ − t₁)).
///
/// For σ_F = 0 the asset is deterministic and h = exp(μ_F·(t₂ − t₁)).
/// Errors if t₂ < t₁, or if γ = 0 while σ_F > 0 (the asset is then not a
/// function of the pricing kernel and no such factor exists).
pub fn h_factor(t1: f64, t2: f64, illiquid: &IlliquidSpec, market: &MarketSpec) -> Result<f64> {
    if !(t2 >= t1) {
        return Err(Error::InvalidArgument(format!(
            "h_factor needs t2 >= t1, got t1 = {t1}, t2 = {t2}"
        )));
    }
    let sf = illiquid.sigma_f();
    let dt = t2 - t1;
    if sf == 0.0 {
        return Ok((illiquid.mu_f() * dt).exp());
    }
    let g = market.gamma();
    if g == 0.0 {
        return Err(Error::InvalidArgument(
            "h_factor undefined: gamma = 0 with sigma_f > 0 leaves the fixed-term asset unspanned"
                .into(),
        ));
    }
    let rate = illiquid.mu_f() - 0.5 * sf * sf - sf * market.r() / g - 0.5 * sf * g;
    Ok((rate * dt).exp())
}

/// Validated argument pack for [`xi`] / [`xi_dz`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiArgs {
    s: f64,
    t: f64,
    z: f64,
    k: f64,
    a: f64,
    b: f64,
    gamma: f64,
    r: f64,
}

impl XiArgs {
    /// Validate and pack arguments: 0 ≤ t ≤ s, z > 0, finite k/γ/r, and
    /// thresholds a, b ∈ [0, ∞] (0 and ∞ select one-sided intervals).
    #[allow(clippy::too_many_arguments)]
    pub fn new(s: f64, t: f64, z: f64, k: f64, a: f64, b: f64, gamma: f64, r: f64) -> Result<Self> {
        if !(t >= 0.0) || !(s >= t) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= t <= s < inf, got s = {s}, t = {t}"
            )));
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::InvalidArgument(format!("need z > 0, got {z}")));
        }
        if !k.is_finite() || !gamma.is_finite() || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need finite k, gamma, r, got k = {k}, gamma = {gamma}, r = {r}"
            )));
        }
        for (name, v) in [("a", a), ("b", b)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "threshold {name} must be in [0, inf], got {v}"
                )));
            }
        }
        Ok(Self {
            s,
            t,
            z,
            k,
            a,
            b,
            gamma,
            r,
        })
    }

    /// Evaluation time s.
    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Conditioning time t.
    #[inline]
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Kernel value z = Z̃(t).
    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Moment power k.
    #[inline]
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Lower truncation a.
    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Upper truncation b.
    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Market price of risk γ.
    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Risk-free rate r.
    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }
}

/// Core evaluation with thresholds given directly in log space
/// (ln a = −∞ and ln b = +∞ encode one-sided truncations).
#[allow(clippy::too_many_arguments)]
pub(crate) fn xi_ln(
    s: f64,
    t: f64,
    z: f64,
    k: f64,
    ln_a: f64,
    ln_b: f64,
    gamma: f64,
    r: f64,
) -> f64 {
    if !(ln_a < ln_b) {
        return 0.0;
    }
    let tau = s - t;
    let lnz = z.ln();
    if tau == 0.0 {
        // Degenerate conditioning: Z̃(s) = z with certainty.
        return if ln_a < lnz && lnz < ln_b {
            (k * lnz).exp()
        } else {
            0.0
        };
    }
    if gamma == 0.0 {
        // Deterministic kernel: Z̃(s) = z·e^{−rτ}.
        let ln_zs = lnz - r * tau;
        return if ln_a < ln_zs && ln_zs < ln_b {
            (k * ln_zs).exp()
        } else {
            0.0
        };
    }
    let sd = gamma.abs() * tau.sqrt();
    let drift = (r + 0.5 * gamma * gamma) * tau;
    // E[Z̃^k 1{}] = exp(k·m + k²sd²/2)·(Φ(dₐ) − Φ(d_b)) with m = lnz − drift
    // and d_x = (m + k·sd² − ln x)/sd = d̄(x) + k·sd.
    let e_ln = k * lnz - k * drift + 0.5 * k * k * sd * sd;
    let da = if ln_a == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (lnz - ln_a - drift) / sd + k * sd
    };
    let db = if ln_b == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        (lnz - ln_b - drift) / sd + k * sd
    };
    e_ln.exp() * phi_diff(da, db)
}

/// ∂/∂z of [`xi_ln`]. Errors when the law is degenerate (s = t or γ = 0):
/// there the map z ↦ ξ is an indicator and has no classical derivative.
#[allow(clippy::too_many_arguments)]
pub(crate) fn xi_dz_ln(
    s: f64,
    t: f64,
    z: f64,
    k: f64,
    ln_a: f64,
    ln_b: f64,
    gamma: f64,
    r: f64,
) -> Result<f64> {
    let tau = s - t;
    if tau <= 0.0 || gamma == 0.0 {
        return Err(Error::UndefinedStrategy(format!(
            "xi_dz undefined for degenerate law (tau = {tau}, gamma = {gamma})"
        )));
    }
    if !(ln_a < ln_b) {
        return Ok(0.0);
    }
    let lnz = z.ln();
    let sd = gamma.abs() * tau.sqrt();
    let drift = (r + 0.5 * gamma * gamma) * tau;
    let e_ln = k * lnz - k * drift + 0.5 * k * k * sd * sd;
    let da = if ln_a == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (lnz - ln_a - drift) / sd + k * sd
    };
    let db = if ln_b == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        (lnz - ln_b - drift) / sd + k * sd
    };
    let pdf_a = if da.is_finite() { normal_pdf(da) } else { 0.0 };
    let pdf_b = if db.is_finite() { normal_pdf(db) } else { 0.0 };
    let value = xi_ln(s, t, z, k, ln_a, ln_b, gamma, r);
    Ok(k / z * value + e_ln.exp() * (pdf_a - pdf_b) / (z * sd))
}

/// Truncated conditional moment
/// ξ = E[Z̃(s)^k · 1{a < Z̃(s) < b} | Z̃(t) = z].
///
/// Implemented in log space through [`phi_diff`], so tail intervals keep
/// relative precision and a = 0 / b = ∞ are exact one-sided limits. An empty
/// interval (a ≥ b) gives 0; s = t gives z^k·1{a < z < b}; γ = 0 gives the
/// deterministic-kernel point mass at z·e^{−r(s−t)}.
pub fn xi(args: &XiArgs) -> f64 {
    xi_ln(
        args.s,
        args.t,
        args.z,
        args.k,
        args.a.ln(),
        args.b.ln(),
        args.gamma,
        args.r,
    )
}

/// ∂ξ/∂z at the packed arguments. Errors for s = t or γ = 0 where the
/// derivative does not exist.
pub fn xi_dz(args: &XiArgs) -> Result<f64> {
    xi_dz_ln(
        args.s,
        args.t,
        args.z,
        args.k,
        args.a.ln(),
        args.b.ln(),
        args.gamma,
        args.r,
    )
}

/// ∫ ξ(s, …) ds over s ∈ [t_lo, t_hi] by the shared Gauss–Legendre rule,
/// with the integrand's remaining arguments supplied per time point.
pub fn integrate_xi_over_time<F>(mut args_at: F, t_lo: f64, t_hi: f64, n: usize) -> f64
where
    F: FnMut(f64) -> XiArgs,
{
    quad::integrate(|s| xi(&args_at(s)), t_lo, t_hi, n)
}
