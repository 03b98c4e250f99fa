//! 2-D finite-volume grids with staggered dual layout.
//!
//! Cells carry scalar unknowns at their centers, faces carry the normal
//! component of dual vector fields, and exposed faces form the boundary.
//! The discrete gradient G (raw differences across interior faces),
//! divergence D (signed flux sums per cell), trace T (boundary-cell value)
//! and co-normal trace N (boundary-face value) satisfy
//!
//! ```text
//!   <u, D z>_bulk + <G u, z>_dual = <T u, N z>_boundary
//! ```
//!
//! exactly, by construction: the three sums are reindexings of one flux sum.
//!
//! Total variation is isotropic: per cell the x- and y-face differences are
//! grouped into a 2-vector and measured in the Euclidean norm, so the dual
//! constraint ||z||_inf <= 1 acts per staggered location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// One cell of the polygonal discretization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub center: [f64; 2],
    pub area: f64,
}

/// A face between two cells (interior) or between a cell and the exterior
/// (boundary). Interior face values are the Cartesian component along the
/// positive axis; boundary face values are the outward-normal component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Face {
    pub axis: Axis,
    /// Cell on the negative side along `axis`, if any.
    pub neg: Option<u32>,
    /// Cell on the positive side along `axis`, if any.
    pub pos: Option<u32>,
    pub length: f64,
    pub midpoint: [f64; 2],
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.neg.is_some() && self.pos.is_some()
    }
}

/// A boundary face with its arc-length weight and outward unit normal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub face: u32,
    pub cell: u32,
    pub normal: [f64; 2],
    /// Arc-length weight s_b (= face length).
    pub weight: f64,
    pub midpoint: [f64; 2],
}

/// Shape metadata recorded by the builder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Shape {
    Square { n: usize, side: f64 },
    Disk { n: usize, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub shape: Shape,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub boundary: Vec<BoundarySegment>,
    /// Uniform cell spacing.
    pub spacing: f64,
    /// Measured perimeter Sigma s_b. All boundary integrals use this, never
    /// an analytic value.
    pub perimeter: f64,
    /// Interior face on the +x side of each cell, if present.
    pub(crate) east_face: Vec<Option<u32>>,
    /// Interior face on the +y side of each cell, if present.
    pub(crate) north_face: Vec<Option<u32>>,
    /// Per cell: (face id, signed length) for every incident face; the sign
    /// is + when the stored face value is an outflux of this cell.
    pub(crate) cell_faces: Vec<Vec<(u32, f64)>>,
    /// Per cell: incident boundary segment ids.
    pub(crate) cell_boundary: Vec<Vec<u32>>,
}

/// Scalar values on grid cells (discrete u in BV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkField {
    pub values: Vec<f64>,
}

/// Normal components on grid faces (discrete z in L^inf, staggered layout).
/// Boundary-face entries hold the outward-normal component, i.e. the weak
/// trace [z, nu].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualField {
    pub values: Vec<f64>,
}

/// Scalar values on boundary segments (discrete h, g in L^q of the boundary);
/// the weights are the grid's s_b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub values: Vec<f64>,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn check_bulk(&self, u: &BulkField) -> Result<()> {
        if u.values.len() != self.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "bulk field has {} values, grid has {} cells",
                u.values.len(),
                self.n_cells()
            )));
        }
        Ok(())
    }

    pub fn check_dual(&self, z: &DualField) -> Result<()> {
        if z.values.len() != self.n_faces() {
            return Err(Error::InvalidArgument(format!(
                "dual field has {} values, grid has {} faces",
                z.values.len(),
                self.n_faces()
            )));
        }
        Ok(())
    }

    pub fn check_boundary(&self, b: &BoundaryData) -> Result<()> {
        if b.values.len() != self.n_boundary() {
            return Err(Error::InvalidArgument(format!(
                "boundary data has {} values, grid has {} segments",
                b.values.len(),
                self.n_boundary()
            )));
        }
        Ok(())
    }

    /// Weighted bulk inner product Sigma a_c u_c v_c.
    pub fn dot_bulk(&self, u: &BulkField, v: &BulkField) -> f64 {
        u.values
            .iter()
            .zip(&v.values)
            .zip(&self.cells)
            .map(|((a, b), c)| a * b * c.area)
            .sum()
    }

    /// Weighted dual inner product over interior faces, Sigma l_f z_f w_f.
    pub fn dot_dual(&self, z: &DualField, w: &DualField) -> f64 {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_interior())
            .map(|(i, f)| f.length * z.values[i] * w.values[i])
            .sum()
    }

    /// Weighted boundary inner product Sigma s_b a_b b_b.
    pub fn dot_boundary(&self, a: &BoundaryData, b: &BoundaryData) -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .zip(&self.boundary)
            .map(|((x, y), s)| x * y * s.weight)
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Interior face on the +x side of a cell: the x slot of its staggered
    /// group, if present.
    pub fn group_x_face(&self, cell: usize) -> Option<usize> {
        self.east_face[cell].map(|f| f as usize)
    }

    /// Interior face on the +y side of a cell.
    pub fn group_y_face(&self, cell: usize) -> Option<usize> {
        self.north_face[cell].map(|f| f as usize)
    }

    /// All faces incident to a cell as (face id, signed length); the sign is
    /// positive when the stored face value is an outflux of this cell.
    pub fn faces_of_cell(&self, cell: usize) -> &[(u32, f64)] {
        &self.cell_faces[cell]
    }

    /// Boundary segment ids incident to a cell.
    pub fn boundary_of_cell(&self, cell: usize) -> &[u32] {
        &self.cell_boundary[cell]
    }
}

impl BulkField {
    pub fn zeros(grid: &Grid) -> Self {
        BulkField {
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        BulkField {
            values: vec![c; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        BulkField {
            values: grid.cells.iter().map(|c| f(c.center[0], c.center[1])).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl DualField {
    pub fn zeros(grid: &Grid) -> Self {
        DualField {
            values: vec![0.0; grid.n_faces()],
        }
    }

    /// Constant Cartesian vector field: interior faces get the component
    /// along their axis, boundary faces the outward-normal component.
    pub fn from_vector(grid: &Grid, v: [f64; 2]) -> Self {
        let mut values = vec![0.0; grid.n_faces()];
        for (i, f) in grid.faces.iter().enumerate() {
            values[i] = match f.axis {
                Axis::X => v[0],
                Axis::Y => v[1],
            };
        }
        for seg in &grid.boundary {
            values[seg.face as usize] = v[0] * seg.normal[0] + v[1] * seg.normal[1];
        }
        DualField { values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Supremum norm measured per staggered location: Euclidean norm of the
    /// grouped (x, y) components per cell, absolute value on boundary faces.
    pub fn sup_norm(&self, grid: &Grid) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..grid.n_cells() {
            let zx = grid.east_face[c].map_or(0.0, |f| self.values[f as usize]);
            let zy = grid.north_face[c].map_or(0.0, |f| self.values[f as usize]);
            m = m.max(zx.hypot(zy));
        }
        for seg in &grid.boundary {
            m = m.max(self.values[seg.face as usize].abs());
        }
        m
    }
}

impl BoundaryData {
    pub fn zeros(grid: &Grid) -> Self {
        BoundaryData {
            values: vec![0.0; grid.n_boundary()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        BoundaryData {
            values: vec![c; grid.n_boundary()],
        }
    }

    /// Sample a function of the segment midpoint.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        BoundaryData {
            values: grid
                .boundary
                .iter()
                .map(|s| f(s.midpoint[0], s.midpoint[1]))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted l1 norm Sigma s_b |b_b|.
    pub fn l1(&self, grid: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&grid.boundary)
            .map(|(v, s)| v.abs() * s.weight)
            .sum()
    }

    /// Weighted l2 norm squared Sigma s_b b_b^2.
    pub fn l2_sq(&self, grid: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&grid.boundary)
            .map(|(v, s)| v * v * s.weight)
            .sum()
    }

    /// Weighted lq norm for q in {1, 2, inf}.
    pub fn norm_q(&self, grid: &Grid, q: f64) -> f64 {
        if q.is_infinite() {
            self.linf()
        } else if q == 1.0 {
            self.l1(grid)
        } else if q == 2.0 {
            self.l2_sq(grid).sqrt()
        } else {
            self.values
                .iter()
                .zip(&grid.boundary)
                .map(|(v, s)| v.abs().powf(q) * s.weight)
                .sum::<f64>()
                .powf(1.0 / q)
        }
    }
}

/// Build the uniform n x n cell grid over (0, side)^2.
pub fn build_square_grid(n: usize, side: f64) -> Result<Grid> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "square grid needs n >= 2, got {n}"
        )));
    }
    if !(side > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "side must be positive, got {side}"
        )));
    }
    let h = side / n as f64;
    build_masked(
        n,
        n,
        h,
        [0.0, 0.0],
        |_, _| true,
        Shape::Square { n, side },
    )
}

/// Polygonal staircase approximation of the disk of given radius: cells of a
/// uniform n x n lattice over (-r, r)^2 whose centers lie inside the circle,
/// boundary = exposed faces. The measured perimeter converges to the
/// staircase constant, not 2 pi r; all boundary integrals use s_b.
pub fn build_disk_grid(n: usize, radius: f64) -> Result<Grid> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "disk grid needs n >= 8, got {n}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let h = 2.0 * radius / n as f64;
    let r2 = radius * radius;
    build_masked(
        n,
        n,
        h,
        [-radius, -radius],
        |x, y| x * x + y * y < r2,
        Shape::Disk { n, radius },
    )
}

fn build_masked(
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
    inside: impl Fn(f64, f64) -> bool,
    shape: Shape,
) -> Result<Grid> {
    let center = |i: usize, j: usize| {
        [
            origin[0] + (i as f64 + 0.5) * h,
            origin[1] + (j as f64 + 0.5) * h,
        ]
    };
    let mut index = vec![u32::MAX; nx * ny];
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let [x, y] = center(i, j);
            if inside(x, y) {
                index[j * nx + i] = cells.len() as u32;
                cells.push(Cell {
                    center: [x, y],
                    area: h * h,
                });
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument(
            "mask excludes every cell".to_string(),
        ));
    }

    let at = |i: i64, j: i64| -> Option<u32> {
        if i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 {
            None
        } else {
            let v = index[j as usize * nx + i as usize];
            (v != u32::MAX).then_some(v)
        }
    };

    let mut faces: Vec<Face> = Vec::new();
    let mut boundary: Vec<BoundarySegment> = Vec::new();
    let mut east_face = vec![None; cells.len()];
    let mut north_face = vec![None; cells.len()];
    let mut cell_faces: Vec<Vec<(u32, f64)>> = vec![Vec::new(); cells.len()];
    let mut cell_boundary: Vec<Vec<u32>> = vec![Vec::new(); cells.len()];

    let push_boundary =
        |faces: &mut Vec<Face>,
         boundary: &mut Vec<BoundarySegment>,
         cell_faces: &mut Vec<Vec<(u32, f64)>>,
         cell_boundary: &mut Vec<Vec<u32>>,
         c: u32,
         axis: Axis,
         outward: [f64; 2],
         midpoint: [f64; 2]| {
            let fid = faces.len() as u32;
            let (neg, pos) = if outward[0] + outward[1] > 0.0 {
                (Some(c), None)
            } else {
                (None, Some(c))
            };
            faces.push(Face {
                axis,
                neg,
                pos,
                length: h,
                midpoint,
            });
            // boundary face values are outward components: always an outflux
            cell_faces[c as usize].push((fid, h));
            cell_boundary[c as usize].push(boundary.len() as u32);
            boundary.push(BoundarySegment {
                face: fid,
                cell: c,
                normal: outward,
                weight: h,
                midpoint,
            });
        };

    for j in 0..ny as i64 {
        for i in 0..nx as i64 {
            let Some(c) = at(i, j) else { continue };
            let [x, y] = cells[c as usize].center;
            // +x side
            match at(i + 1, j) {
                Some(e) => {
                    let fid = faces.len() as u32;
                    faces.push(Face {
                        axis: Axis::X,
                        neg: Some(c),
                        pos: Some(e),
                        length: h,
                        midpoint: [x + 0.5 * h, y],
                    });
                    east_face[c as usize] = Some(fid);
                    cell_faces[c as usize].push((fid, h));
                    cell_faces[e as usize].push((fid, -h));
                }
                None => push_boundary(
                    &mut faces,
                    &mut boundary,
                    &mut cell_faces,
                    &mut cell_boundary,
                    c,
                    Axis::X,
                    [1.0, 0.0],
                    [x + 0.5 * h, y],
                ),
            }
            // +y side
            match at(i, j + 1) {
                Some(nn) => {
                    let fid = faces.len() as u32;
                    faces.push(Face {
                        axis: Axis::Y,
                        neg: Some(c),
                        pos: Some(nn),
                        length: h,
                        midpoint: [x, y + 0.5 * h],
                    });
                    north_face[c as usize] = Some(fid);
                    cell_faces[c as usize].push((fid, h));
                    cell_faces[nn as usize].push((fid, -h));
                }
                None => push_boundary(
                    &mut faces,
                    &mut boundary,
                    &mut cell_faces,
                    &mut cell_boundary,
                    c,
                    Axis::Y,
                    [0.0, 1.0],
                    [x, y + 0.5 * h],
                ),
            }
            // -x and -y sides only produce boundary faces (interior faces were
            // created from the neighbor's +x/+y scan)
            if at(i - 1, j).is_none() {
                push_boundary(
                    &mut faces,
                    &mut boundary,
                    &mut cell_faces,
                    &mut cell_boundary,
                    c,
                    Axis::X,
                    [-1.0, 0.0],
                    [x - 0.5 * h, y],
                );
            }
            if at(i, j - 1).is_none() {
                push_boundary(
                    &mut faces,
                    &mut boundary,
                    &mut cell_faces,
                    &mut cell_boundary,
                    c,
                    Axis::Y,
                    [0.0, -1.0],
                    [x, y - 0.5 * h],
                );
            }
        }
    }

    let perimeter = boundary.iter().map(|b| b.weight).sum();
    Ok(Grid {
        shape,
        cells,
        faces,
        boundary,
        spacing: h,
        perimeter,
        east_face,
        north_face,
        cell_faces,
        cell_boundary,
    })
}

/// Discrete gradient: raw differences u_pos - u_neg across interior faces,
/// zero on boundary faces.
pub fn gradient(grid: &Grid, u: &BulkField) -> Result<DualField> {
    grid.check_bulk(u)?;
    let mut g = vec![0.0; grid.n_faces()];
    for (i, f) in grid.faces.iter().enumerate() {
        if let (Some(a), Some(b)) = (f.neg, f.pos) {
            g[i] = u.values[b as usize] - u.values[a as usize];
        }
    }
    Ok(DualField { values: g })
}

/// Discrete divergence: per cell, the signed flux sum over all incident
/// faces (boundary faces included) divided by the cell area.
pub fn divergence(grid: &Grid, z: &DualField) -> Result<BulkField> {
    grid.check_dual(z)?;
    let mut d = vec![0.0; grid.n_cells()];
    for (c, incident) in grid.cell_faces.iter().enumerate() {
        let mut s = 0.0;
        for &(f, signed_len) in incident {
            s += signed_len * z.values[f as usize];
        }
        d[c] = s / grid.cells[c].area;
    }
    Ok(BulkField { values: d })
}

/// Discrete trace: the boundary-cell value per segment.
pub fn trace(grid: &Grid, u: &BulkField) -> Result<BoundaryData> {
    grid.check_bulk(u)?;
    Ok(BoundaryData {
        values: grid
            .boundary
            .iter()
            .map(|b| u.values[b.cell as usize])
            .collect(),
    })
}

/// Discrete co-normal trace [z, nu]: the boundary-face value per segment.
pub fn conormal(grid: &Grid, z: &DualField) -> Result<BoundaryData> {
    grid.check_dual(z)?;
    Ok(BoundaryData {
        values: grid
            .boundary
            .iter()
            .map(|b| z.values[b.face as usize])
            .collect(),
    })
}

/// Isotropic total variation: per cell the Euclidean norm of the
/// length-weighted (x, y) face differences.
pub fn tv(grid: &Grid, u: &BulkField) -> Result<f64> {
    grid.check_bulk(u)?;
    let g = gradient(grid, u)?;
    Ok(tv_of_gradient(grid, &g, TvNorm::Isotropic))
}

/// Crate-internal: TV norm selector. Anisotropic exists only for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TvNorm {
    Isotropic,
    Anisotropic,
}

pub(crate) fn tv_of_gradient(grid: &Grid, g: &DualField, norm: TvNorm) -> f64 {
    match norm {
        TvNorm::Isotropic => {
            let mut s = 0.0;
            for c in 0..grid.n_cells() {
                let gx = grid.east_face[c].map_or(0.0, |f| {
                    grid.faces[f as usize].length * g.values[f as usize]
                });
                let gy = grid.north_face[c].map_or(0.0, |f| {
                    grid.faces[f as usize].length * g.values[f as usize]
                });
                s += gx.hypot(gy);
            }
            s
        }
        TvNorm::Anisotropic => grid
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_interior())
            .map(|(i, f)| f.length * g.values[i].abs())
            .sum(),
    }
}

/// Sigma s_b b_b.
pub fn boundary_integral(grid: &Grid, b: &BoundaryData) -> Result<f64> {
    grid.check_boundary(b)?;
    Ok(b
        .values
        .iter()
        .zip(&grid.boundary)
        .map(|(v, s)| v * s.weight)
        .sum())
}

/// Weighted mean over the boundary.
pub fn boundary_mean(grid: &Grid, b: &BoundaryData) -> Result<f64> {
    Ok(boundary_integral(grid, b)? / grid.perimeter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_fields(grid: &Grid, seed: u64) -> (BulkField, DualField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = BulkField {
            values: (0..grid.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let z = DualField {
            values: (0..grid.n_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        (u, z)
    }

    fn sbp_residual(grid: &Grid, u: &BulkField, z: &DualField) -> f64 {
        let gu = gradient(grid, u).unwrap();
        let dz = divergence(grid, z).unwrap();
        let tu = trace(grid, u).unwrap();
        let nz = conormal(grid, z).unwrap();
        grid.dot_bulk(u, &dz) + grid.dot_dual(&gu, z) - grid.dot_boundary(&tu, &nz)
    }

    #[test]
    fn square_2x2_counts_and_perimeter() {
        let g = build_square_grid(2, 1.0).unwrap();
        assert_eq!(g.n_cells(), 4);
        assert_eq!(g.n_boundary(), 8);
        assert!((g.perimeter - 4.0).abs() < 1e-15);
    }

    #[test]
    fn square_perimeter_is_exact_for_side_2() {
        let g = build_square_grid(128, 2.0).unwrap();
        assert!((g.perimeter - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_builders() {
        assert!(build_square_grid(1, 1.0).is_err());
        assert!(build_disk_grid(7, 1.0).is_err());
        assert!(build_square_grid(4, -1.0).is_err());
    }

    #[test]
    fn summation_by_parts_square() {
        let g = build_square_grid(64, 1.0).unwrap();
        let (u, z) = random_fields(&g, 7);
        let scale = g.n_cells() as f64;
        assert!(sbp_residual(&g, &u, &z).abs() <= 1e-12 * scale);
    }

    #[test]
    fn summation_by_parts_disk() {
        let g = build_disk_grid(32, 1.5).unwrap();
        let (u, z) = random_fields(&g, 11);
        let scale = g.n_cells() as f64;
        assert!(sbp_residual(&g, &u, &z).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = build_disk_grid(16, 1.0).unwrap();
        let u = BulkField::constant(&g, 3.25);
        let gu = gradient(&g, &u).unwrap();
        assert!(gu.values.iter().all(|&v| v == 0.0));
        assert_eq!(tv(&g, &u).unwrap(), 0.0);
    }

    #[test]
    fn divergence_of_constant_vector_vanishes() {
        for g in [build_square_grid(8, 1.0).unwrap(), build_disk_grid(16, 1.0).unwrap()] {
            let z = DualField::from_vector(&g, [0.3, -1.7]);
            let d = divergence(&g, &z).unwrap();
            // exact: every cell is a closed box of equal-length faces
            assert!(d.values.iter().all(|&v| v.abs() < 1e-13));
            let nz = conormal(&g, &z).unwrap();
            let total: f64 = boundary_integral(&g, &nz).unwrap();
            assert!(total.abs() < 1e-12);
        }
    }

    #[test]
    fn tv_is_one_homogeneous() {
        let g = build_square_grid(16, 1.0).unwrap();
        let (u, _) = random_fields(&g, 3);
        let t = tv(&g, &u).unwrap();
        for lam in [0.5, 2.0, 4.0] {
            let scaled = BulkField {
                values: u.values.iter().map(|v| v * lam).collect(),
            };
            // powers of two scale exactly
            assert_eq!(tv(&g, &scaled).unwrap(), lam * t);
        }
        let scaled = BulkField {
            values: u.values.iter().map(|v| v * -1.3).collect(),
        };
        let rel = (tv(&g, &scaled).unwrap() - 1.3 * t).abs() / t;
        assert!(rel < 1e-13);
    }

    #[test]
    fn tv_of_half_square_indicator_is_one() {
        // one cut of length 1, jump 1
        let g = build_square_grid(64, 1.0).unwrap();
        let u = BulkField::from_fn(&g, |x, _| if x > 0.5 { 1.0 } else { 0.0 });
        assert!((tv(&g, &u).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn boundary_mean_of_constant_is_constant() {
        let g = build_disk_grid(128, 1.0).unwrap();
        let b = BoundaryData::constant(&g, 0.731);
        assert!((boundary_mean(&g, &b).unwrap() - 0.731).abs() < 1e-13);
        let tu = trace(&g, &BulkField::constant(&g, -2.5)).unwrap();
        assert!((boundary_mean(&g, &tu).unwrap() + 2.5).abs() < 1e-13);
    }

    #[test]
    fn disk_has_positive_boundary_and_recorded_perimeter() {
        let g = build_disk_grid(8, 1.0).unwrap();
        assert!(g.n_boundary() > 0);
        assert!(g.perimeter > 0.0);
        let sum: f64 = g.boundary.iter().map(|b| b.weight).sum();
        assert_eq!(sum, g.perimeter);
    }

    #[test]
    fn disk_tv_of_linear_matches_cell_union_quadrature() {
        // u = x has |grad u| = 1, so int |Du| over the cell union is its area.
        let g = build_disk_grid(128, 1.0).unwrap();
        let u = BulkField::from_fn(&g, |x, _| x);
        let quadrature = g.total_area();
        let t = tv(&g, &u).unwrap();
        assert!((t - quadrature).abs() / quadrature < 0.03);
        // and the staircase area is close to the disk area
        assert!((quadrature - std::f64::consts::PI).abs() / std::f64::consts::PI < 0.03);
    }

    #[test]
    fn shape_mismatch_errors() {
        let g = build_square_grid(4, 1.0).unwrap();
        let g2 = build_square_grid(5, 1.0).unwrap();
        let u = BulkField::constant(&g2, 1.0);
        assert!(gradient(&g, &u).is_err());
        let z = DualField::zeros(&g2);
        assert!(divergence(&g, &z).is_err());
    }

    #[test]
    fn dual_sup_norm_groups_components() {
        let g = build_square_grid(4, 1.0).unwrap();
        let z = DualField::from_vector(&g, [3.0, 4.0]);
        assert!((z.sup_norm(&g) - 5.0).abs() < 1e-15);
    }
}

