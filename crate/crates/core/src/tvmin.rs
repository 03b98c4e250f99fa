//! Relaxed least-gradient Dirichlet solver.
//!
//! Minimizes Phi_h(v) = tv(v) + Sigma_b s_b |h_b - v_b| and returns both a
//! minimizer u and a feasible dual certificate: a vector field z with
//! ||z||_inf <= 1 whose extended divergence vanishes, whose pairing with Gu
//! attains tv(u), and whose boundary trace satisfies the sign condition
//! against h - T(u). The duality gap is the a-posteriori optimality bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    boundary_integral, conormal, divergence, gradient, trace, tv, BoundaryData, BulkField,
    DualField, Grid, TvNorm,
};
use crate::saddle::{self, BoundaryTerm};

/// Controls for the primal-dual iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Target relative duality gap.
    pub tolerance: f64,
    /// Target on the L1 norm of the extended divergence, relative to the
    /// energy scale.
    pub div_tolerance: f64,
    /// Primal step; picked from the power-iteration operator norm when None.
    pub step_primal: Option<f64>,
    /// Dual step; same convention.
    pub step_dual: Option<f64>,
    /// Seed for the primal initialization.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 400_000,
            tolerance: 1e-6,
            div_tolerance: 1e-8,
            step_primal: None,
            step_dual: None,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        SolverOptions {
            tolerance,
            ..Default::default()
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.tolerance < 0.0 || self.div_tolerance < 0.0 {
            return Err(Error::InvalidArgument(
                "tolerances must be nonnegative".to_string(),
            ));
        }
        if let (Some(tp), Some(td)) = (self.step_primal, self.step_dual) {
            if !(tp > 0.0 && td > 0.0) {
                return Err(Error::InvalidArgument(
                    "steps must be positive".to_string(),
                ));
            }
            let k = saddle::operator_norm(grid);
            if tp * td * k * k > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "step_primal*step_dual*||K||^2 = {} > 1 breaks the convergence condition",
                    tp * td * k * k
                )));
            }
        }
        Ok(())
    }
}

/// A certified (u, z) pair for the relaxed Dirichlet problem.
#[derive(Debug, Clone)]
pub struct TvSolution {
    pub u: BulkField,
    /// Extended dual field: interior faces hold z, boundary faces hold the
    /// boundary dual, i.e. the selected co-normal derivative.
    pub z: DualField,
    /// Dual of the boundary L1 term (values in [-1, 1]); equals conormal(z).
    pub s: BoundaryData,
    pub primal_energy: f64,
    pub dual_energy: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Max over cells of the extended divergence.
    pub div_residual: f64,
    /// Sigma_c a_c |div z|_c, the rigorous dual correction.
    pub div_l1: f64,
    pub converged: bool,
}

/// Residuals of the weak-solution characterization for a (u, z) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    /// max per staggered location of ||z||.
    pub z_sup_norm: f64,
    /// max interior |div z| (extended field).
    pub max_divergence: f64,
    /// | <Gu, z> - tv(u) |.
    pub pairing_defect: f64,
    /// max_b [ |h - Tu| - g (h - Tu) ]^+ with g = conormal(z).
    pub sign_defect: f64,
}

impl CertificateReport {
    pub fn max_defect(&self) -> f64 {
        self.pairing_defect
            .max(self.sign_defect)
            .max(self.max_divergence)
            .max((self.z_sup_norm - 1.0).max(0.0))
    }
}

/// Solve the relaxed Dirichlet problem for boundary data h.
pub fn solve_relaxed_dirichlet(
    grid: &Grid,
    h: &BoundaryData,
    opts: &SolverOptions,
) -> Result<TvSolution> {
    solve_with_norm(grid, h, opts, TvNorm::Isotropic)
}

pub(crate) fn solve_with_norm(
    grid: &Grid,
    h: &BoundaryData,
    opts: &SolverOptions,
    norm: TvNorm,
) -> Result<TvSolution> {
    grid.check_boundary(h)?;
    if !h.is_finite() {
        return Err(Error::InvalidArgument(
            "boundary data contains non-finite entries".to_string(),
        ));
    }
    opts.validate(grid)?;
    let res = saddle::solve(grid, BoundaryTerm::AbsoluteGap { h }, norm, opts, None);
    let s = conormal(grid, &res.z)?;
    Ok(TvSolution {
        u: res.u,
        s,
        z: res.z,
        primal_energy: res.primal,
        dual_energy: res.dual,
        gap: res.gap,
        iterations: res.iterations,
        div_residual: res.div_residual,
        div_l1: res.div_l1,
        converged: res.converged,
    })
}

/// Phi_h(u) = tv(u) + Sigma_b s_b |h_b - (Tu)_b|, recomputed independently
/// of any solver state.
pub fn energy_phi_h(grid: &Grid, h: &BoundaryData, u: &BulkField) -> Result<f64> {
    grid.check_boundary(h)?;
    grid.check_bulk(u)?;
    let tu = trace(grid, u)?;
    let gap = BoundaryData {
        values: h
            .values
            .iter()
            .zip(&tu.values)
            .map(|(a, b)| (a - b).abs())
            .collect(),
    };
    Ok(tv(grid, u)? + boundary_integral(grid, &gap)?)
}

/// Check the triple (u, z) of `sol` against the weak-solution conditions for
/// data h, reporting each defect.
pub fn certify(grid: &Grid, h: &BoundaryData, sol: &TvSolution) -> Result<CertificateReport> {
    certify_pair(grid, h, &sol.u, &sol.z)
}

/// Certificate defects of an arbitrary (u, z) pair; `z` may come from a
/// different solve (cross-certification).
pub fn certify_pair(
    grid: &Grid,
    h: &BoundaryData,
    u: &BulkField,
    z: &DualField,
) -> Result<CertificateReport> {
    grid.check_boundary(h)?;
    grid.check_bulk(u)?;
    grid.check_dual(z)?;
    let gu = gradient(grid, u)?;
    let pairing = grid.dot_dual(&gu, z);
    let total_variation = tv(grid, u)?;
    let div = divergence(grid, z)?;
    let max_divergence = div.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tu = trace(grid, u)?;
    let g = conormal(grid, z)?;
    let mut sign_defect: f64 = 0.0;
    for b in 0..grid.n_boundary() {
        let r = h.values[b] - tu.values[b];
        sign_defect = sign_defect.max(r.abs() - g.values[b] * r);
    }
    Ok(CertificateReport {
        z_sup_norm: z.sup_norm(grid),
        max_divergence,
        pairing_defect: (pairing - total_variation).abs(),
        sign_defect: sign_defect.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_disk_grid, build_square_grid};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_h(grid: &Grid, seed: u64) -> BoundaryData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BoundaryData {
            values: (0..grid.n_boundary())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        }
    }

    #[test]
    fn constant_data_is_exactly_flat() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = BoundaryData::constant(&grid, 2.5);
        let sol = solve_relaxed_dirichlet(&grid, &h, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.primal_energy <= 1e-10 * 2.5 * grid.perimeter);
        assert!(sol.z.sup_norm(&grid) <= 1.0 + 1e-12);
        for v in &sol.u.values {
            assert!((v - 2.5).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_nan_data() {
        let grid = build_square_grid(4, 1.0).unwrap();
        let mut h = BoundaryData::constant(&grid, 1.0);
        h.values[3] = f64::NAN;
        assert!(solve_relaxed_dirichlet(&grid, &h, &SolverOptions::default()).is_err());
    }

    #[test]
    fn rejects_bad_steps() {
        let grid = build_square_grid(4, 1.0).unwrap();
        let opts = SolverOptions {
            step_primal: Some(10.0),
            step_dual: Some(10.0),
            ..Default::default()
        };
        assert!(opts.validate(&grid).is_err());
    }

    #[test]
    fn certificate_defects_shrink_with_gap() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = random_h(&grid, 42);
        let opts = SolverOptions::with_tolerance(1e-8);
        let sol = solve_relaxed_dirichlet(&grid, &h, &opts).unwrap();
        assert!(sol.converged, "gap {} after {} iters", sol.gap, sol.iterations);
        assert!(sol.gap >= -1e-12 * grid.perimeter);
        assert!(sol.primal_energy >= sol.dual_energy - 1e-12);
        let report = certify(&grid, &h, &sol).unwrap();
        assert!(report.z_sup_norm <= 1.0 + 1e-12);
        // defects are controlled by the gap
        let tol = 1e-5 * grid.perimeter.max(sol.primal_energy);
        assert!(report.pairing_defect <= tol, "pairing {}", report.pairing_defect);
        assert!(report.sign_defect <= tol, "sign {}", report.sign_defect);
        assert!(report.max_divergence <= 1e-4, "div {}", report.max_divergence);
    }

    #[test]
    fn energy_value_homogeneity() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = random_h(&grid, 5);
        let opts = SolverOptions::with_tolerance(1e-8);
        let base = solve_relaxed_dirichlet(&grid, &h, &opts).unwrap();
        for lam in [0.0, 0.5, 2.0, 10.0] {
            let lh = BoundaryData {
                values: h.values.iter().map(|v| lam * v).collect(),
            };
            let sol = solve_relaxed_dirichlet(&grid, &lh, &opts).unwrap();
            let bound = sol.gap + lam * base.gap + 1e-12;
            assert!(
                (sol.primal_energy - lam * base.primal_energy).abs() <= bound.max(1e-9),
                "lambda {lam}: {} vs {}",
                sol.primal_energy,
                lam * base.primal_energy
            );
        }
    }

    #[test]
    fn seeds_cross_certify() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = random_h(&grid, 9);
        let mut opts = SolverOptions::with_tolerance(1e-8);
        let a = solve_relaxed_dirichlet(&grid, &h, &opts).unwrap();
        opts.seed = 1234;
        let b = solve_relaxed_dirichlet(&grid, &h, &opts).unwrap();
        let tol = 1e-4 * grid.perimeter;
        let ab = certify_pair(&grid, &h, &a.u, &b.z).unwrap();
        let ba = certify_pair(&grid, &h, &b.u, &a.z).unwrap();
        assert!(ab.max_defect() <= tol, "{:?}", ab);
        assert!(ba.max_defect() <= tol, "{:?}", ba);
    }

    #[test]
    fn sign_jump_on_disk_has_energy_near_four() {
        // optimal cut is the vertical diameter: jump 2 across a chord of
        // length 2; the staircase chord length differs at O(h)
        let grid = build_disk_grid(32, 1.0).unwrap();
        let h = BoundaryData::from_fn(&grid, |x, _| if x > 0.0 { 1.0 } else { -1.0 });
        let opts = SolverOptions::default();
        let sol = solve_relaxed_dirichlet(&grid, &h, &opts).unwrap();
        assert!(sol.converged);
        assert!((sol.primal_energy - 4.0).abs() / 4.0 < 0.05, "{}", sol.primal_energy);
    }

    #[test]
    fn phi_of_zero_data_is_zero() {
        let grid = build_square_grid(6, 1.0).unwrap();
        let h = BoundaryData::zeros(&grid);
        let sol = solve_relaxed_dirichlet(&grid, &h, &SolverOptions::default()).unwrap();
        assert_eq!(sol.primal_energy, 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn energy_phi_h_boundary_only_term() {
        // u = 0 against h = 1 pays the perimeter
        let grid = build_square_grid(64, 1.0).unwrap();
        let h = BoundaryData::constant(&grid, 1.0);
        let u = BulkField::zeros(&grid);
        assert!((energy_phi_h(&grid, &h, &u).unwrap() - 4.0).abs() < 1e-12);
    }
}
