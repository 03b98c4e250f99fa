//! Regularized p-Laplace Robin problems and the continuation p -> 1.
//!
//! For p in (1, 2] the energy
//!   E_p(u) = Sigma_c a_c (1/p) (||grad u||^2 + eps^2)^{p/2}
//!          + Sigma_b s_b Gamma_{g_b, alpha}(u_b)
//! is smooth and strictly convex in the gradient; a damped Newton iteration
//! with a matrix-free CG solve handles the semismooth boundary term. The
//! continuation re-solves along a decreasing p schedule, warm-starting each
//! solve, and compares against the TV Robin solution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, BulkField, Grid};
use crate::resolvent::{gamma_potential, solve_robin, truncator};
use crate::tvmin::SolverOptions;

#[derive(Debug, Clone, Serialize)]
pub struct PlapOptions {
    /// Exponent in (1, 2].
    pub p: f64,
    /// Gradient regularization: ||grad u||^2 + epsilon^2.
    pub epsilon: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Smallest line-search step before the iteration is flagged divergent.
    pub min_damping: f64,
}

impl Default for PlapOptions {
    fn default() -> Self {
        PlapOptions {
            p: 1.5,
            epsilon: 1e-6,
            newton_tol: 1e-9,
            max_newton: 200,
            min_damping: 1e-12,
        }
    }
}

impl PlapOptions {
    pub fn with_p(p: f64) -> Self {
        PlapOptions {
            p,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "p must lie in (1, 2], got {}",
                self.p
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlapSolution {
    pub u: BulkField,
    pub energy: f64,
    /// Sup norm of the energy gradient scaled by cell area.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct PlapProblem<'a> {
    grid: &'a Grid,
    g: &'a BoundaryData,
    alpha: f64,
    p: f64,
    eps2: f64,
}

impl PlapProblem<'_> {
    /// Grouped gradient quotient per cell.
    fn grad_at(&self, u: &[f64], c: usize) -> (f64, f64) {
        let h = self.grid.spacing;
        let gx = self.grid.east_face[c].map_or(0.0, |f| {
            let face = &self.grid.faces[f as usize];
            (u[face.pos.unwrap() as usize] - u[face.neg.unwrap() as usize]) / h
        });
        let gy = self.grid.north_face[c].map_or(0.0, |f| {
            let face = &self.grid.faces[f as usize];
            (u[face.pos.unwrap() as usize] - u[face.neg.unwrap() as usize]) / h
        });
        (gx, gy)
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let mut e = 0.0;
        for c in 0..self.grid.n_cells() {
            let (gx, gy) = self.grad_at(u, c);
            let q2 = gx * gx + gy * gy + self.eps2;
            e += self.grid.cells[c].area / self.p * q2.powf(0.5 * self.p);
        }
        for (b, seg) in self.grid.boundary.iter().enumerate() {
            e += seg.weight
                * gamma_potential(self.g.values[b], self.alpha, u[seg.cell as usize]);
        }
        e
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n_cells();
        let h = self.grid.spacing;
        let mut grad = vec![0.0; n];
        for c in 0..n {
            let (gx, gy) = self.grad_at(u, c);
            let kappa = (gx * gx + gy * gy + self.eps2).powf(0.5 * self.p - 1.0);
            let a = self.grid.cells[c].area;
            if let Some(f) = self.grid.east_face[c] {
                let face = &self.grid.faces[f as usize];
                let w = a * kappa * gx / h;
                grad[face.pos.unwrap() as usize] += w;
                grad[face.neg.unwrap() as usize] -= w;
            }
            if let Some(f) = self.grid.north_face[c] {
                let face = &self.grid.faces[f as usize];
                let w = a * kappa * gy / h;
                grad[face.pos.unwrap() as usize] += w;
                grad[face.neg.unwrap() as usize] -= w;
            }
        }
        for (b, seg) in self.grid.boundary.iter().enumerate() {
            grad[seg.cell as usize] -= seg.weight
                * truncator(self.g.values[b] - self.alpha * u[seg.cell as usize]);
        }
        grad
    }

    /// Hessian-vector product at u, with a small shift for definiteness.
    fn hessian_apply(&self, u: &[f64], v: &[f64], shift: f64, out: &mut [f64]) {
        let n = self.grid.n_cells();
        let h = self.grid.spacing;
        for (o, x) in out.iter_mut().zip(v) {
            *o = shift * x;
        }
        for c in 0..n {
            let (gx, gy) = self.grad_at(u, c);
            let (vx, vy) = self.grad_at(v, c);
            let q2 = gx * gx + gy * gy + self.eps2;
            let kappa = q2.powf(0.5 * self.p - 1.0);
            let coef = (self.p - 2.0) * q2.powf(0.5 * self.p - 2.0) * (gx * vx + gy * vy);
            let hx = kappa * vx + coef * gx;
            let hy = kappa * vy + coef * gy;
            let a = self.grid.cells[c].area;
            if let Some(f) = self.grid.east_face[c] {
                let face = &self.grid.faces[f as usize];
                let w = a * hx / h;
                out[face.pos.unwrap() as usize] += w;
                out[face.neg.unwrap() as usize] -= w;
            }
            if let Some(f) = self.grid.north_face[c] {
                let face = &self.grid.faces[f as usize];
                let w = a * hy / h;
                out[face.pos.unwrap() as usize] += w;
                out[face.neg.unwrap() as usize] -= w;
            }
        }
        for (b, seg) in self.grid.boundary.iter().enumerate() {
            let active = (self.g.values[b] - self.alpha * u[seg.cell as usize]).abs() < 1.0;
            if active {
                out[seg.cell as usize] += seg.weight * self.alpha * v[seg.cell as usize];
            }
        }
    }
}

/// Conjugate gradients on the matrix-free Hessian.
fn solve_cg(problem: &PlapProblem<'_>, u: &[f64], rhs: &[f64], shift: f64) -> Vec<f64> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut hp = vec![0.0; n];
    let rr0: f64 = r.iter().map(|v| v * v).sum();
    if rr0 == 0.0 {
        return x;
    }
    let mut rr = rr0;
    for _ in 0..10 * n.max(50) {
        problem.hessian_apply(u, &p, shift, &mut hp);
        let php: f64 = p.iter().zip(&hp).map(|(a, b)| a * b).sum();
        if php <= 0.0 {
            break;
        }
        let alpha = rr / php;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new <= 1e-24 * rr0 {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Solve the regularized p-Laplace Robin problem by damped Newton.
pub fn solve_robin_p(
    grid: &Grid,
    g: &BoundaryData,
    alpha: f64,
    opts: &PlapOptions,
) -> Result<PlapSolution> {
    solve_robin_p_warm(grid, g, alpha, opts, None)
}

pub fn solve_robin_p_warm(
    grid: &Grid,
    g: &BoundaryData,
    alpha: f64,
    opts: &PlapOptions,
    warm: Option<BulkField>,
) -> Result<PlapSolution> {
    opts.validate()?;
    grid.check_boundary(g)?;
    if !g.is_finite() {
        return Err(Error::InvalidArgument("non-finite Robin data".to_string()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".to_string()));
    }
    let problem = PlapProblem {
        grid,
        g,
        alpha,
        p: opts.p,
        eps2: opts.epsilon * opts.epsilon,
    };
    let mut u = match warm {
        Some(w) => {
            grid.check_bulk(&w)?;
            w.values
        }
        None => {
            let mean = crate::grid::boundary_mean(grid, g)? / alpha;
            vec![mean; grid.n_cells()]
        }
    };

    let res_scale = grid.cells.iter().map(|c| c.area).fold(0.0, f64::max)
        * (1.0 + g.linf());
    let mut history = Vec::new();
    let mut energy = problem.energy(&u);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_newton {
        let grad = problem.gradient(&u);
        let residual = grad.iter().fold(0.0f64, |m, v| m.max(v.abs())) / res_scale;
        history.push(residual);
        if residual <= opts.newton_tol {
            converged = true;
            break;
        }
        let shift = 1e-12 * res_scale.max(1.0);
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let step = solve_cg(&problem, &u, &rhs, shift);

        // backtracking line search with Armijo decrease
        let slope: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = false;
        while t >= opts.min_damping {
            let candidate: Vec<f64> =
                u.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let e = problem.energy(&candidate);
            if e <= energy + 1e-4 * t * slope {
                u = candidate;
                energy = e;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }

    let grad = problem.gradient(&u);
    let residual = grad.iter().fold(0.0f64, |m, v| m.max(v.abs())) / res_scale;
    Ok(PlapSolution {
        u: BulkField { values: u },
        energy,
        residual,
        residual_history: history,
        iterations,
        converged: converged || residual <= opts.newton_tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationEntry {
    pub p: f64,
    /// ||u_p - u_TV||_1 / area.
    pub distance_l1: f64,
    /// ||T1(g - alpha u_p) - conormal_TV||_1 / perimeter.
    pub flux_gap_l1: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationReport {
    pub entries: Vec<ContinuationEntry>,
    pub tv_energy: f64,
    pub tv_converged: bool,
}

/// Warm-started continuation along a decreasing p schedule, measured against
/// the TV Robin solution.
pub fn continuation(
    grid: &Grid,
    g: &BoundaryData,
    alpha: f64,
    p_schedule: &[f64],
    opts: &PlapOptions,
    tv_opts: &SolverOptions,
) -> Result<ContinuationReport> {
    if p_schedule.is_empty() {
        return Err(Error::InvalidArgument("empty p schedule".to_string()));
    }
    for w in p_schedule.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidArgument(
                "p schedule must decrease toward 1".to_string(),
            ));
        }
    }
    let tv = solve_robin(grid, g, alpha, tv_opts)?;
    let area = grid.total_area();
    let mut entries = Vec::new();
    let mut warm: Option<BulkField> = None;
    for &p in p_schedule {
        let popts = PlapOptions { p, ..opts.clone() };
        let sol = solve_robin_p_warm(grid, g, alpha, &popts, warm.take())?;
        let mut dist = 0.0;
        for (c, cell) in grid.cells.iter().enumerate() {
            dist += cell.area * (sol.u.values[c] - tv.u.values[c]).abs();
        }
        let mut flux_gap = 0.0;
        for (b, seg) in grid.boundary.iter().enumerate() {
            let fp = truncator(g.values[b] - alpha * sol.u.values[seg.cell as usize]);
            flux_gap += seg.weight * (fp - tv.conormal_g.values[b]).abs();
        }
        entries.push(ContinuationEntry {
            p,
            distance_l1: dist / area,
            flux_gap_l1: flux_gap / grid.perimeter,
            residual: sol.residual,
            converged: sol.converged,
        });
        warm = Some(sol.u);
    }
    Ok(ContinuationReport {
        entries,
        tv_energy: tv.primal_energy,
        tv_converged: tv.converged,
    })
}
