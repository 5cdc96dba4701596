//! Semi-closed-form optimal consumption and investment with a fixed-term
//! illiquid asset, a consumption floor, and a terminal-wealth guarantee.
//!
//! A power-utility investor trades a Black–Scholes market (bond + stock),
//! consumes at a rate that must stay above a subsistence floor c̲, must end
//! the horizon with wealth of at least V̲, and may additionally buy — at time
//! zero only — ψ units of a fixed-term asset `F` that cannot be traded before
//! maturity. The optimum decouples into a utility-of-consumption subproblem
//! and a utility-of-terminal-wealth subproblem linked by a scalar capital
//! split, and every quantity (multipliers, wealth processes, strategies,
//! value functions) reduces to truncated power moments of the lognormal
//! pricing kernel.
//!
//! Module layout:
//! - [`market`]: market/asset/preference specifications, pricing kernel,
//!   non-redundancy classification, exact path simulation.
//! - [`xi`]: the truncated-lognormal moment kernel ξ, its z-derivative, the
//!   growth factor h, the normal CDF, and time quadrature.
//! - [`uoc`]: the consumption subproblem (floor-constrained Merton).
//! - [`bound`]: pricing and replication of the guarantee shortfall put
//!   (V̲ − ψF(T))⁺.
//! - [`uow`]: the terminal-wealth subproblem with the illiquid position,
//!   including its three parametric case displays.
//! - [`split`]: the scalar capital split between the two subproblems.
//! - [`policy`]: full-solution assembly and the sensitivity metrics
//!   (optimal share of illiquid wealth, subjective value of the fixed-term
//!   asset, guarantee-equivalent utility gain).
//! - [`mc`]: independent Monte-Carlo oracles for every closed form.

pub mod bound;
pub mod error;
pub mod market;
pub mod mc;
pub mod numerics;
pub mod policy;
pub mod quad;
pub mod roots;
pub mod split;
pub mod uoc;
pub mod uow;
pub mod xi;

pub use error::{Error, Result};
pub use market::{
    Constraints, IlliquidSpec, MarketSpec, MarketState, Nonredundancy, Preferences, Scenario,
};
pub use numerics::NumericsConfig;
