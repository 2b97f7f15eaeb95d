//! Text and image artifacts: CSV fields and tables, 16-bit PGM rasters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::scheme::Trajectory;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn format_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// One line per grid row `j = 0..ny`, `nx` comma-separated values each,
/// written with 17 significant digits so the values read back exactly.
pub fn field_to_csv(f: &ScalarField) -> String {
    let g = f.grid();
    let mut out = String::with_capacity(g.n_cells() * 25);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", f.at(i, j));
        }
        out.push('\n');
    }
    out
}

pub fn write_field_csv(f: &ScalarField, path: &Path) -> Result<()> {
    write(path, field_to_csv(f))
}

/// Reads a field written by [`write_field_csv`]. With `grid` given, the
/// shape must match it; otherwise unit spacing is assumed.
pub fn read_field_csv(path: &Path, grid: Option<GridSpec>) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_error(path, format!("line {}: {e}", n + 1)))?;
        match nx {
            None => nx = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(format_error(
                    path,
                    format!("line {} has {} values, expected {w}", n + 1, row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        ny += 1;
    }
    let nx = nx.ok_or_else(|| format_error(path, "no data"))?;
    let grid = match grid {
        Some(g) if (g.nx, g.ny) != (nx, ny) => {
            return Err(Error::ShapeMismatch(format!(
                "{} holds {nx}x{ny} values, grid is {}x{}",
                path.display(),
                g.nx,
                g.ny
            )))
        }
        Some(g) => g,
        None => GridSpec::new(nx, ny, 1.0, 1.0)?,
    };
    ScalarField::from_values(grid, values)
}

pub const DIAG_HEADER: &str = "k,t,lyapunov,diss_mob,diss_grad,diss_mass,mass,fp_iters,fp_residual";

/// Per-step diagnostics, one row per stored state.
pub fn diag_csv(traj: &Trajectory) -> String {
    let mut out = String::from(DIAG_HEADER);
    out.push('\n');
    for s in &traj.states {
        let d = &s.diagnostics;
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            s.k, s.t, d.lyapunov, d.diss_mob, d.diss_grad, d.diss_mass, d.mass, d.fp_iters, d.fp_residual
        );
    }
    out
}

/// One row of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyRow {
    pub j_coarse: usize,
    pub j_fine: usize,
    pub p: f64,
    pub norm: f64,
}

pub fn cauchy_csv(rows: &[CauchyRow]) -> String {
    let mut out = String::from("j_coarse,j_fine,p,norm\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.16e}", r.j_coarse, r.j_fine, r.p, r.norm);
    }
    out
}

/// Steps at which snapshots are written: the first, the last, and every
/// `every`-th in between.
pub fn snapshot_steps(j: usize, every: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (0..=j).step_by(every.max(1)).collect();
    if steps.last() != Some(&j) {
        steps.push(j);
    }
    steps
}

/// Writes `u_KKKK.csv` and `v_KKKK.csv` for the selected states.
pub fn write_snapshots(traj: &Trajectory, every: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for k in snapshot_steps(traj.j(), every) {
        let state = &traj.states[k];
        for (name, field) in [("u", &state.u), ("v", &state.v)] {
            let path = dir.join(format!("{name}_{k:04}.csv"));
            write_field_csv(field, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Sidecar holding the value range of a raster.
pub fn raster_sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".range");
    PathBuf::from(name)
}

/// Binary 16-bit PGM with the top image row at the largest `y`. Values map
/// linearly from `[min, max]` to `[0, 65535]`; the range goes to the sidecar.
/// A constant field maps to mid-gray.
pub fn emit_raster(f: &ScalarField, path: &Path) -> Result<()> {
    let g = f.grid();
    let (lo, hi) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut bytes = format!("P5\n{} {}\n65535\n", g.nx, g.ny).into_bytes();
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let level = if hi > lo {
                ((f.at(i, j) - lo) / (hi - lo) * 65535.0).round() as u16
            } else {
                32768
            };
            bytes.extend_from_slice(&level.to_be_bytes());
        }
    }
    write(path, bytes)?;
    write(
        &raster_sidecar(path),
        format!("min = {lo:.16e}\nmax = {hi:.16e}\n"),
    )
}

/// Reads a raster written by [`emit_raster`] and maps the levels back to
/// values through the sidecar range.
pub fn read_raster(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // Header: magic, width, height, maxval, each followed by one whitespace byte.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_error(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(format_error(path, "not a 16-bit binary PGM"));
    }
    let dim = |s: &str| s.parse::<usize>().map_err(|e| format_error(path, e.to_string()));
    let (nx, ny) = (dim(&fields[1])?, dim(&fields[2])?);
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() != 2 * nx * ny {
        return Err(format_error(path, "pixel data has the wrong length"));
    }

    let side = raster_sidecar(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut range = [None, None];
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            let slot = match k.trim() {
                "min" => 0,
                "max" => 1,
                _ => continue,
            };
            range[slot] = v.trim().parse::<f64>().ok();
        }
    }
    let [Some(lo), Some(hi)] = range else {
        return Err(format_error(&side, "missing min or max"));
    };

    let grid = GridSpec::new(nx, ny, 1.0, 1.0)?;
    let mut values = vec![0.0; nx * ny];
    for (row, chunk) in data.chunks_exact(2 * nx).enumerate() {
        let j = ny - 1 - row;
        for (i, px) in chunk.chunks_exact(2).enumerate() {
            let level = u16::from_be_bytes([px[0], px[1]]) as f64;
            values[grid.idx(i, j)] = if hi > lo {
                lo + level / 65535.0 * (hi - lo)
            } else {
                lo
            };
        }
    }
    ScalarField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(nx: usize, ny: usize) -> ScalarField {
        let g = GridSpec::new(nx, ny, 0.1, 0.2).unwrap();
        ScalarField::from_fn(g, |i, j| (i as f64 - 0.3 * j as f64) * 1.7e-3)
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let g = GridSpec::new(5, 3, 0.1, 0.2).unwrap();
        let f = ScalarField::from_fn(g, |i, j| {
            ((i * 7 + j * 3) as f64).sin() * 10f64.powi(i as i32 - 2) + 1.0 / 3.0
        });
        write_field_csv(&f, &path).unwrap();
        let back = read_field_csv(&path, Some(g)).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(matches!(
            read_field_csv(&path, Some(GridSpec::new(3, 5, 0.1, 0.1).unwrap())),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn ragged_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,2,3\n4,5\n").unwrap();
        assert!(matches!(read_field_csv(&path, None), Err(Error::Format { .. })));
    }

    #[test]
    fn snapshot_cadence() {
        assert_eq!(snapshot_steps(50, 5), vec![0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(snapshot_steps(7, 3), vec![0, 3, 6, 7]);
        assert_eq!(snapshot_steps(1, 1), vec![0, 1]);
    }

    #[test]
    fn constant_raster_is_mid_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let g = GridSpec::new(4, 3, 1.0, 1.0).unwrap();
        emit_raster(&ScalarField::constant(g, -2.5), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n4 3\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].chunks(2).all(|p| p == [0x80, 0x00]));
        let side = fs::read_to_string(raster_sidecar(&path)).unwrap();
        assert!(side.contains("min = -2.5") && side.contains("max = -2.5"));
        assert!(read_raster(&path).unwrap().values().iter().all(|&x| x == -2.5));
    }

    #[test]
    fn ramp_raster_is_monotone_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.pgm");
        let f = ramp(7, 4);
        emit_raster(&f, &path).unwrap();
        let back = read_raster(&path).unwrap();
        let (lo, hi) = (f.values()[f.grid().idx(0, 3)], f.values()[f.grid().idx(6, 0)]);
        let quantum = (hi - lo) / 65535.0;
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5 * quantum + 1e-15);
        }
        for j in 0..4 {
            for i in 0..6 {
                assert!(back.at(i + 1, j) > back.at(i, j));
            }
        }
    }
}
