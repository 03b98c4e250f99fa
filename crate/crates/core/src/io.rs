//! Persistence: grids as JSON, fields as CSV or a binary column format.
//!
//! CSV fields round-trip value-exactly at 17 significant digits; the binary
//! format round-trips bit-exactly. Binary layout: 16-byte header
//! (magic "LGD1", version u32 LE, count u64 LE) followed by count f64 LE.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundarySegment, Cell, Face, Grid, Shape};

pub const BINARY_MAGIC: &[u8; 4] = b"LGD1";
pub const BINARY_VERSION: u32 = 1;

/// Write a scalar column as `index,value` CSV.
pub fn save_field_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 28 + 16);
    out.push_str("index,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_field_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.trim() == "index,value" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| Error::Io(format!("{}:{}: expected index,value", path.display(), lineno + 1)))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("{}:{}: bad index: {e}", path.display(), lineno + 1)))?;
        if idx != values.len() {
            return Err(Error::Io(format!(
                "{}:{}: indices must be consecutive from 0",
                path.display(),
                lineno + 1
            )));
        }
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|e| Error::Io(format!("{}:{}: bad value: {e}", path.display(), lineno + 1)))?;
        values.push(v);
    }
    Ok(values)
}

/// Write a scalar column in the binary format.
pub fn save_field_bin(path: &Path, values: &[f64]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(BINARY_MAGIC)?;
    file.write_all(&BINARY_VERSION.to_le_bytes())?;
    file.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_field_bin(path: &Path) -> Result<Vec<f64>> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(Error::Io(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::Io(format!("{}: unsupported version {version}", path.display())));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(Error::Io(format!(
            "{}: expected {} bytes of payload, found {}",
            path.display(),
            count * 8,
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// On-disk grid layout: geometry only; adjacency is rebuilt on load.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridFile {
    pub format_version: u32,
    pub shape: Shape,
    pub spacing: f64,
    pub perimeter: f64,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub boundary: Vec<BoundarySegment>,
}

pub fn save_grid(path: &Path, grid: &Grid) -> Result<()> {
    let file = GridFile {
        format_version: 1,
        shape: grid.shape.clone(),
        spacing: grid.spacing,
        perimeter: grid.perimeter,
        cells: grid.cells.clone(),
        faces: grid.faces.clone(),
        boundary: grid.boundary.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path)?;
    let file: GridFile =
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    grid_from_file(file)
}

fn grid_from_file(file: GridFile) -> Result<Grid> {
    let n = file.cells.len();
    let mut east_face = vec![None; n];
    let mut north_face = vec![None; n];
    let mut cell_faces: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut cell_boundary: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, f) in file.faces.iter().enumerate() {
        let fid = i as u32;
        match (f.neg, f.pos) {
            (Some(a), Some(b)) => {
                if a as usize >= n || b as usize >= n {
                    return Err(Error::Io("face references missing cell".to_string()));
                }
                match f.axis {
                    crate::grid::Axis::X => east_face[a as usize] = Some(fid),
                    crate::grid::Axis::Y => north_face[a as usize] = Some(fid),
                }
                cell_faces[a as usize].push((fid, f.length));
                cell_faces[b as usize].push((fid, -f.length));
            }
            (Some(c), None) | (None, Some(c)) => {
                if c as usize >= n {
                    return Err(Error::Io("face references missing cell".to_string()));
                }
                cell_faces[c as usize].push((fid, f.length));
            }
            (None, None) => {
                return Err(Error::Io("face with no cells".to_string()));
            }
        }
    }
    for (b, seg) in file.boundary.iter().enumerate() {
        if seg.cell as usize >= n || seg.face as usize >= file.faces.len() {
            return Err(Error::Io("boundary segment references missing item".to_string()));
        }
        cell_boundary[seg.cell as usize].push(b as u32);
    }
    Ok(Grid {
        shape: file.shape,
        cells: file.cells,
        faces: file.faces,
        boundary: file.boundary,
        spacing: file.spacing,
        perimeter: file.perimeter,
        east_face,
        north_face,
        cell_faces,
        cell_boundary,
    })
}

/// Serialize any report as pretty JSON.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_disk_grid, build_square_grid, gradient, BulkField, DualField};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csv_round_trip_is_value_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..100).map(|_| rng.gen_range(-1e3..1e3)).collect();
        save_field_csv(&path, &values).unwrap();
        let loaded = load_field_csv(&path).unwrap();
        assert_eq!(values, loaded);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..257).map(|_| rng.gen::<f64>() * 1e-7).collect();
        save_field_bin(&path, &values).unwrap();
        let loaded = load_field_bin(&path).unwrap();
        assert_eq!(
            values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            loaded.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn binary_rejects_corrupt_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOPE00000000000000").unwrap();
        assert!(load_field_bin(&path).is_err());
    }

    #[test]
    fn grid_round_trip_preserves_operators() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        let grid = build_disk_grid(12, 1.0).unwrap();
        save_grid(&path, &grid).unwrap();
        let loaded = load_grid(&path).unwrap();
        assert_eq!(grid.n_cells(), loaded.n_cells());
        assert_eq!(grid.n_faces(), loaded.n_faces());
        assert_eq!(grid.perimeter, loaded.perimeter);
        // operators behave identically
        let u = BulkField::from_fn(&grid, |x, y| x * y);
        let gu_a = gradient(&grid, &u).unwrap();
        let gu_b = gradient(&loaded, &u).unwrap();
        assert_eq!(gu_a, gu_b);
        let z = DualField::from_vector(&grid, [0.2, -0.4]);
        assert_eq!(z.sup_norm(&grid), z.sup_norm(&loaded));
    }

    #[test]
    fn csv_reports_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "index,value\n0,1.0\n2,3.0\n").unwrap();
        let err = load_field_csv(&path).unwrap_err();
        assert!(err.to_string().contains("consecutive"));
    }

    #[test]
    fn square_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sq.json");
        let grid = build_square_grid(5, 2.0).unwrap();
        save_grid(&path, &grid).unwrap();
        let loaded = load_grid(&path).unwrap();
        assert_eq!(loaded.n_boundary(), grid.n_boundary());
        assert_eq!(loaded.spacing, grid.spacing);
    }
}
