//! File formats: TATF1 binary fields, PGM previews, CSV tables and JSONL
//! snapshot indices. Every writer goes through [`write_atomic`].
//!
//! A TATF1 file is the ASCII header `TATF1 <M> <M> <D>\n` followed by `M²`
//! little-endian `f64` values in row-major order (`values[i * M + j]`).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, RealField};
use crate::imaging::Recording;
use crate::placement::{BoundaryGeometry, BoundaryProfile, SensorSet};
use crate::tv::IterationRecord;
use crate::wave::Trajectory;

/// Write to a temporary file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn encode_field(field: &RealField) -> Vec<u8> {
    let g = field.grid();
    let header = format!("TATF1 {} {} {}\n", g.m(), g.m(), g.side());
    let mut out = Vec::with_capacity(header.len() + 8 * g.len());
    out.extend_from_slice(header.as_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8], origin: &Path) -> Result<RealField> {
    let bad = |msg: String| Error::Format {
        path: origin.to_path_buf(),
        msg,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing TATF1 header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split_ascii_whitespace().collect();
    if parts.len() != 4 || parts[0] != "TATF1" {
        return Err(bad(format!("expected 'TATF1 <M> <M> <D>', found '{header}'")));
    }
    let m1: usize = parts[1].parse().map_err(|_| bad(format!("bad size '{}'", parts[1])))?;
    let m2: usize = parts[2].parse().map_err(|_| bad(format!("bad size '{}'", parts[2])))?;
    let side: f64 = parts[3]
        .parse()
        .map_err(|_| bad(format!("bad box size '{}'", parts[3])))?;
    if m1 != m2 {
        return Err(bad(format!("field must be square, found {m1} x {m2}")));
    }
    let grid = Grid2D::new(side, m1).map_err(|e| bad(e.to_string()))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * grid.len() {
        return Err(bad(format!(
            "expected {} data bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RealField::from_values(grid, values).map_err(|e| bad(e.to_string()))
}

pub fn write_field(path: &Path, field: &RealField) -> Result<()> {
    write_atomic(path, &encode_field(field))
}

pub fn read_field(path: &Path) -> Result<RealField> {
    decode_field(&std::fs::read(path)?, path)
}

/// 8-bit binary PGM with min–max scaling; `x₁` runs left to right and `x₂`
/// bottom to top.
pub fn encode_pgm(field: &RealField) -> Vec<u8> {
    let m = field.grid().m();
    let (lo, hi) = field.min_max();
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut out = format!("P5\n{m} {m}\n255\n").into_bytes();
    for row in 0..m {
        let j = m - 1 - row;
        for i in 0..m {
            out.push(((field.get(i, j) - lo) * scale).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, field: &RealField) -> Result<()> {
    write_atomic(path, &encode_pgm(field))
}

/// `theta,psi` per boundary sample.
pub fn psi_csv(profile: &BoundaryProfile, geom: &BoundaryGeometry) -> String {
    let mut s = String::from("theta,psi\n");
    for (b, v) in profile.values().iter().enumerate() {
        let _ = writeln!(s, "{},{}", geom.theta(b), v);
    }
    s
}

/// `n,theta_start,theta_end` per arc (end angles unwrapped past the start).
pub fn arcs_csv(set: &SensorSet, geom: &BoundaryGeometry) -> String {
    let mut s = String::from("n,theta_start,theta_end\n");
    for (n, (a, b)) in set.intervals(geom).into_iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", n + 1, a, b);
    }
    s
}

/// `iter,J0,A1,TV,linf_change` per iterate.
pub fn trace_csv(log: &[IterationRecord]) -> String {
    let mut s = String::from("iter,J0,A1,TV,linf_change\n");
    for r in log {
        let _ = writeln!(s, "{},{},{},{},{}", r.iter, r.j0, r.a1, r.tv, r.linf_change);
    }
    s
}

#[derive(Debug, Serialize)]
struct IndexLine<'a> {
    k: usize,
    t: f64,
    file: &'a str,
}

fn export_snapshots(
    dir: &Path,
    prefix: &str,
    steps: usize,
    stride: usize,
    time: impl Fn(usize) -> f64,
    field: impl Fn(usize) -> Result<RealField>,
) -> Result<Vec<PathBuf>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("snapshot stride must be at least 1".into()));
    }
    let mut index = String::new();
    let mut files = Vec::new();
    for k in (0..=steps).step_by(stride) {
        let name = format!("{prefix}_{k:05}.tatf");
        let path = dir.join(&name);
        write_field(&path, &field(k)?)?;
        let line = IndexLine {
            k,
            t: time(k),
            file: &name,
        };
        index.push_str(&serde_json::to_string(&line)?);
        index.push('\n');
        files.push(path);
    }
    write_atomic(&dir.join(format!("{prefix}_index.jsonl")), index.as_bytes())?;
    Ok(files)
}

/// Pressure snapshots of a full trajectory every `stride` steps, plus
/// `<prefix>_index.jsonl` with one `{k, t, file}` object per snapshot.
pub fn export_trajectory(dir: &Path, prefix: &str, traj: &Trajectory, stride: usize) -> Result<Vec<PathBuf>> {
    let time = *traj.time_grid();
    export_snapshots(
        dir,
        prefix,
        time.steps,
        stride,
        |k| time.time(k),
        |k| traj.pressure_field(k),
    )
}

/// Recorded sensor data scattered back onto the grid, every `stride` steps.
pub fn export_recording(dir: &Path, prefix: &str, rec: &Recording, stride: usize) -> Result<Vec<PathBuf>> {
    let time = *rec.time_grid();
    export_snapshots(
        dir,
        prefix,
        time.steps,
        stride,
        |k| time.time(k),
        |k| Ok(rec.snapshot(k)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{centered_arc, SensorIndicator};
    use crate::wave::{solve_forward, Sampling, TimeGrid};

    #[test]
    fn field_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::new(4.0, 16).unwrap();
        let f = RealField::from_fn(grid, |x, y| (3.0 * x).sin() * y + 1e-300);
        let path = dir.path().join("sub/f.tatf");
        write_field(&path, &f).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"TATF1 16 16 4\n"));
        assert_eq!(bytes.len(), 14 + 8 * 256);
        assert_eq!(read_field(&path).unwrap(), f);
    }

    #[test]
    fn rejects_malformed_fields() {
        let p = Path::new("x.tatf");
        assert!(decode_field(b"TATF2 4 4 4\n", p).is_err());
        assert!(decode_field(b"TATF1 4 8 4\n", p).is_err());
        assert!(decode_field(b"TATF1 4 4 4\n\0\0", p).is_err());
        assert!(decode_field(b"no header", p).is_err());
        let mut nan = b"TATF1 2 2 4\n".to_vec();
        for v in [0.0, f64::NAN, 1.0, 2.0] {
            nan.extend_from_slice(&f64::to_le_bytes(v));
        }
        assert!(decode_field(&nan, p).is_err());
    }

    #[test]
    fn pgm_scales_to_full_range() {
        let grid = Grid2D::new(4.0, 8).unwrap();
        let f = RealField::from_fn(grid, |x, _| x);
        let img = encode_pgm(&f);
        let header = b"P5\n8 8\n255\n";
        assert!(img.starts_with(header));
        let px = &img[header.len()..];
        assert_eq!(px.len(), 64);
        assert_eq!(px[0], 0);
        assert_eq!(px[7], 255);
        let flat = encode_pgm(&RealField::zeros(grid));
        assert!(flat[header.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn csv_tables() {
        let geom = BoundaryGeometry::circle(1.0, 8).unwrap();
        let prof = BoundaryProfile::new((1..=8).map(f64::from).collect()).unwrap();
        let csv = psi_csv(&prof, &geom);
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("theta,psi\n0,1\n"));
        let g = BoundaryGeometry::circle(1.0, 64).unwrap();
        let arcs = centered_arc(&g, 1.0, 0.5).unwrap();
        let csv = arcs_csv(&arcs.into(), &g);
        assert_eq!(csv.lines().count(), 2);
        let ind: SensorSet = SensorIndicator::full(64).into();
        assert!(arcs_csv(&ind, &g).starts_with("n,theta_start,theta_end\n1,"));
        let log = [IterationRecord {
            iter: 0,
            j0: 1.5,
            a1: 1.0,
            tv: 50.0,
            linf_change: 0.0,
        }];
        assert_eq!(trace_csv(&log), "iter,J0,A1,TV,linf_change\n0,1.5,1,50,0\n");
    }

    #[test]
    fn trajectory_export_with_index() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::new(4.0, 16).unwrap();
        let p0 = RealField::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
        let time = TimeGrid::with_steps(1.0, 8).unwrap();
        let traj = solve_forward(&p0, &time, &Sampling::full()).unwrap();
        let files = export_trajectory(dir.path(), "p", &traj, 4).unwrap();
        assert_eq!(files.len(), 3);
        let index = std::fs::read_to_string(dir.path().join("p_index.jsonl")).unwrap();
        let lines: Vec<serde_json::Value> = index.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1]["k"], 4);
        assert_eq!(lines[1]["t"], 0.5);
        assert_eq!(lines[2]["file"], "p_00008.tatf");
        let back = read_field(&files[0]).unwrap();
        assert!(back.combine(1.0, &p0, -1.0).unwrap().linf_norm() < 1e-14);
    }
}
