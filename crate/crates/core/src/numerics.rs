//! Numerical-method configuration shared by every solver.

/// Tunable tolerances, node counts, and sample sizes.
///
/// The defaults reproduce the tolerances used throughout the test suite; all
/// solvers read them from [`crate::market::Scenario::numerics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig {
    /// Relative tolerance for multiplier bisections (budget-equation solves).
    pub bisect_tol: f64,
    /// Gauss–Legendre node count for time integrals of ξ.
    pub quad_nodes: usize,
    /// Coarse grid size for the ψ search before golden-section refinement.
    pub psi_grid: usize,
    /// Relative step for central finite differences of value functions.
    pub fd_rel_step: f64,
    /// Default Monte-Carlo path count for oracle checks.
    pub mc_paths: usize,
    /// Default time-step count for discrete-hedge simulations.
    pub mc_steps: usize,
    /// Seed for all pseudo-random streams (per-path streams are derived).
    pub seed: u64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            bisect_tol: 1e-12,
            quad_nodes: 64,
            psi_grid: 65,
            fd_rel_step: 1e-4,
            mc_paths: 100_000,
            mc_steps: 64,
            seed: 42,
        }
    }
}

impl NumericsConfig {
    /// Validate counts and tolerances.
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return Err(crate::Error::InvalidSpec(format!(
                "bisect_tol must lie in (0,1), got {}",
                self.bisect_tol
            )));
        }
        if !(self.fd_rel_step > 0.0 && self.fd_rel_step < 1.0) {
            return Err(crate::Error::InvalidSpec(format!(
                "fd_rel_step must lie in (0,1), got {}",
                self.fd_rel_step
            )));
        }
        if self.quad_nodes < 1 || self.psi_grid < 1 || self.mc_paths < 1 || self.mc_steps < 1 {
            return Err(crate::Error::InvalidSpec(
                "quad_nodes, psi_grid, mc_paths, mc_steps must all be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    /// Copy with the bisection tolerance tightened by one order of magnitude,
    /// used while an outer finite-difference solve is in progress so inner
    /// solver noise stays below the outer tolerance.
    pub(crate) fn tightened(mut self) -> Self {
        self.bisect_tol = (self.bisect_tol * 0.1).max(1e-15);
        self
    }
}
