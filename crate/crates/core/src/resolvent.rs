//! Truncated Robin problem and the resolvent (I + lambda Lambda)^-1.
//!
//! The Robin problem minimizes tv(u) + Sigma_b s_b Gamma_{g_b, alpha}(u_b),
//! where Gamma is the convex antiderivative of -T1(g - alpha t). Its
//! Euler-Lagrange boundary condition is [z, nu] = T1(g - alpha Tu).
//! Solving with alpha = lambda and setting h = g - lambda [z, nu] applies
//! the resolvent: (g - h)/lambda is then a certified selection of Lambda h.

use crate::error::{Error, Result};
use crate::grid::{conormal, BoundaryData, BulkField, DualField, Grid, TvNorm};
use crate::saddle::{self, BoundaryTerm, SaddleState};
use crate::tvmin::SolverOptions;

/// T1: clamp to [-1, 1].
pub fn truncator(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

/// Gamma_{g,alpha}(t) = integral_0^t -T1(g - alpha tau) d tau, in closed
/// form: quadratic where the truncator is inactive, linear of slope +-1
/// outside, with Gamma(0) = 0. Convex, minimized at t = g/alpha.
pub fn gamma_potential(g_b: f64, alpha: f64, t: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    let antiderivative = |tau: f64| -> f64 {
        let t1 = (g_b - 1.0) / alpha;
        let t2 = (g_b + 1.0) / alpha;
        let mid = |x: f64| 0.5 * alpha * x * x - g_b * x;
        if tau < t1 {
            mid(t1) - (tau - t1)
        } else if tau > t2 {
            mid(t2) + (tau - t2)
        } else {
            mid(tau)
        }
    };
    antiderivative(t) - antiderivative(0.0)
}

/// Legendre conjugate of Gamma_{g,alpha} on its domain [-1, 1]; infinite
/// outside (the flux constraint).
pub fn gamma_conjugate(g_b: f64, alpha: f64, q: f64) -> f64 {
    debug_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&q));
    let t_star = (g_b + q) / alpha;
    q * t_star - gamma_potential(g_b, alpha, t_star)
}

/// A certified Robin solution.
#[derive(Debug, Clone)]
pub struct RobinSolution {
    pub u: BulkField,
    /// Extended dual field (boundary slots hold the co-normal flux).
    pub z: DualField,
    /// conormal(z); satisfies the truncated flux relation up to `bc_defect`.
    pub conormal_g: BoundaryData,
    pub alpha: f64,
    pub primal_energy: f64,
    pub dual_energy: f64,
    pub gap: f64,
    pub div_residual: f64,
    pub div_l1: f64,
    /// max_b | conormal_b - T1(g_b - alpha u_b) |.
    pub bc_defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize tv(u) + Sigma_b s_b Gamma_{g_b, alpha}(u_b).
pub fn solve_robin(
    grid: &Grid,
    g: &BoundaryData,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<RobinSolution> {
    solve_robin_warm(grid, g, alpha, opts, None)
}

pub(crate) fn solve_robin_warm(
    grid: &Grid,
    g: &BoundaryData,
    alpha: f64,
    opts: &SolverOptions,
    warm: Option<SaddleState>,
) -> Result<RobinSolution> {
    grid.check_boundary(g)?;
    if !g.is_finite() {
        return Err(Error::InvalidArgument(
            "Robin data contains non-finite entries".to_string(),
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    opts.validate(grid)?;
    let res = saddle::solve(grid, BoundaryTerm::Robin { g, alpha }, TvNorm::Isotropic, opts, warm);
    let conormal_g = conormal(grid, &res.z)?;
    Ok(RobinSolution {
        u: res.u,
        conormal_g,
        z: res.z,
        alpha,
        primal_energy: res.primal,
        dual_energy: res.dual,
        gap: res.gap,
        div_residual: res.div_residual,
        div_l1: res.div_l1,
        bc_defect: res.flux_defect,
        iterations: res.iterations,
        converged: res.converged,
    })
}

/// One resolvent application h = J_lambda(g): a Robin solve followed by
/// h = g - lambda [z, nu], so that (g - h)/lambda equals the co-normal flux
/// and ||h - g||_inf <= lambda.
///
/// The Robin problem is solved with data g/lambda and coefficient 1/lambda,
/// whose flux relation is [z, nu] = T1((g - u)/lambda). This composition is
/// the exact proximal map of the boundary energy in the weighted L2 metric,
/// so h + lambda * Lambda h really contains g; running the Robin problem at
/// (g, lambda) instead satisfies the inclusion only at lambda = 1.
pub fn resolvent_apply(
    grid: &Grid,
    g: &BoundaryData,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<(BoundaryData, RobinSolution)> {
    resolvent_apply_warm(grid, g, lambda, opts, None)
}

pub(crate) fn resolvent_apply_warm(
    grid: &Grid,
    g: &BoundaryData,
    lambda: f64,
    opts: &SolverOptions,
    warm: Option<SaddleState>,
) -> Result<(BoundaryData, RobinSolution)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let g_scaled = BoundaryData {
        values: g.values.iter().map(|v| v / lambda).collect(),
    };
    let sol = solve_robin_warm(grid, &g_scaled, 1.0 / lambda, opts, warm)?;
    let h = BoundaryData {
        values: g
            .values
            .iter()
            .zip(&sol.conormal_g.values)
            .map(|(gv, dv)| gv - lambda * dv)
            .collect(),
    };
    Ok((h, sol))
}

/// Reuse of a converged Robin state as a warm start.
pub(crate) fn state_of(sol: &RobinSolution) -> SaddleState {
    SaddleState {
        u: sol.u.values.clone(),
        z: sol.z.values.clone(),
    }
}

/// Residuals of (g - h)/lambda as a selection of Lambda at h: solves the
/// Dirichlet problem at h and cross-checks the Robin certificate against it.
/// This is the discrete form of the range condition h + lambda Lambda h = g.
pub fn resolvent_identity_defect(
    grid: &Grid,
    g: &BoundaryData,
    h: &BoundaryData,
    lambda: f64,
    robin: &RobinSolution,
    opts: &SolverOptions,
) -> Result<crate::tvmin::CertificateReport> {
    // (g - h)/lambda must coincide with the stored flux
    for (b, (gv, hv)) in g.values.iter().zip(&h.values).enumerate() {
        let flux = (gv - hv) / lambda;
        if (flux - robin.conormal_g.values[b]).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "h was not produced by this Robin solution".to_string(),
            ));
        }
    }
    let dirichlet = crate::tvmin::solve_relaxed_dirichlet(grid, h, opts)?;
    crate::tvmin::certify_pair(grid, h, &dirichlet.u, &robin.z)
}
