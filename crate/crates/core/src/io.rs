//! Text persistence: two-column profile tables and trajectory snapshot CSVs.
//! All floats are written with 17 significant digits so round-trips are exact.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{KrfError, Result};
use crate::flow::{StepDiagnostics, Trajectory};
use crate::geometry::{Background, BackgroundKind, MetricState, RadialGrid};

pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a two-column (s, value) table with a comment header.
pub fn write_table(path: &Path, s: &[f64], values: &[f64]) -> Result<()> {
    let mut out = String::new();
    out.push_str("# two-column radial profile: s value\n");
    for (a, b) in s.iter().zip(values) {
        out.push_str(&fmt_g17(*a));
        out.push(' ');
        out.push_str(&fmt_g17(*b));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a two-column (s, value) table; `#` starts a comment.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut s = Vec::new();
    let mut v = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<f64> {
            tok.ok_or_else(|| KrfError::DataFormat {
                path: path.display().to_string(),
                message: format!("line {}: expected two columns", lineno + 1),
            })?
            .parse::<f64>()
            .map_err(|e| KrfError::DataFormat {
                path: path.display().to_string(),
                message: format!("line {}: {e}", lineno + 1),
            })
        };
        s.push(parse(it.next())?);
        v.push(parse(it.next())?);
        if it.next().is_some() {
            return Err(KrfError::DataFormat {
                path: path.display().to_string(),
                message: format!("line {}: more than two columns", lineno + 1),
            });
        }
    }
    if s.len() < 2 {
        return Err(KrfError::DataFormat {
            path: path.display().to_string(),
            message: "table needs at least two rows".into(),
        });
    }
    Ok((s, v))
}

/// Grid inferred from a table's s column; spacing must be uniform.
pub fn grid_from_samples(s: &[f64]) -> Result<RadialGrid> {
    let n = s.len();
    let grid = RadialGrid::new(s[0], s[n - 1], n)?;
    for (i, &v) in s.iter().enumerate() {
        if (v - grid.node(i)).abs() > 1e-9 * (1.0 + v.abs()) {
            return Err(KrfError::GridMismatch(format!(
                "sample {i} at s = {v} is not on a uniform grid"
            )));
        }
    }
    Ok(grid)
}

// ---------------------------------------------------------------------------
// snapshot CSVs
// ---------------------------------------------------------------------------

const SNAPSHOT_COLUMNS: &str = "s,xi0,phi,Qp,Qpp,lambda_rad,lambda_sph,phidot";

/// One snapshot per file, schema:
///   # t=..., # n=..., # background=..., [# k=...], [# degenerate=true]
///   s,xi0,phi,Qp,Qpp,lambda_rad,lambda_sph,phidot
pub fn write_snapshot(path: &Path, state: &MetricState) -> Result<()> {
    let grid = state.grid();
    let bg = state.background();
    let mut out = String::new();
    out.push_str(&format!("# t={}\n", fmt_g17(state.t())));
    out.push_str(&format!("# n={}\n", state.n()));
    out.push_str(&format!("# background={}\n", bg.kind().label()));
    if let BackgroundKind::ComplexHyperbolic { k } = bg.kind() {
        out.push_str(&format!("# k={}\n", fmt_g17(k)));
    }
    if state.is_degenerate() {
        out.push_str("# degenerate=true\n");
    }
    out.push_str(SNAPSHOT_COLUMNS);
    out.push('\n');
    let (rad, sph) = state.eigenvalues_for_io();
    let phidot = state.log_det_ratio_for_io();
    for i in 0..grid.len() {
        let row = [
            grid.node(i),
            state.xi0()[i],
            state.phi()[i],
            state.q_prime()[i],
            state.q_second()[i],
            rad[i],
            sph[i],
            phidot[i],
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt_g17(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub struct SnapshotData {
    pub t: f64,
    pub n: u32,
    pub background: String,
    pub k: Option<f64>,
    pub degenerate: bool,
    pub s: Vec<f64>,
    pub xi0: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData> {
    let text = fs::read_to_string(path)?;
    let bad = |message: String| KrfError::DataFormat {
        path: path.display().to_string(),
        message,
    };
    let mut t = None;
    let mut n = None;
    let mut background = None;
    let mut k = None;
    let mut degenerate = false;
    let mut s = Vec::new();
    let mut xi0 = Vec::new();
    let mut phi = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once('=') {
                match key.trim() {
                    "t" => t = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                    "n" => n = Some(value.trim().parse::<u32>().map_err(|e| bad(e.to_string()))?),
                    "background" => background = Some(value.trim().to_string()),
                    "k" => k = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                    "degenerate" => degenerate = value.trim() == "true",
                    _ => {}
                }
            }
            continue;
        }
        if line == SNAPSHOT_COLUMNS {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(bad(format!(
                "line {}: expected 8 columns, got {}",
                lineno + 1,
                cells.len()
            )));
        }
        let parse = |idx: usize| -> Result<f64> {
            cells[idx]
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
        };
        s.push(parse(0)?);
        xi0.push(parse(1)?);
        phi.push(parse(2)?);
    }
    Ok(SnapshotData {
        t: t.ok_or_else(|| bad("missing # t= header".into()))?,
        n: n.ok_or_else(|| bad("missing # n= header".into()))?,
        background: background.ok_or_else(|| bad("missing # background= header".into()))?,
        k,
        degenerate,
        s,
        xi0,
        phi,
    })
}

// ---------------------------------------------------------------------------
// trajectory directories
// ---------------------------------------------------------------------------

/// Persist a trajectory: snapshot_NNNN.csv files, per-step diagnostics.csv,
/// and (for tabulated backgrounds) a sidecar background.csv.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, state) in traj.states.iter().enumerate() {
        write_snapshot(&dir.join(format!("snapshot_{i:04}.csv")), state)?;
    }
    let bg = traj.initial().background();
    if bg.kind() == BackgroundKind::Tabulated {
        write_table(&dir.join("background.csv"), bg.grid().nodes(), bg.xi_h())?;
    }
    let mut f = fs::File::create(dir.join("diagnostics.csv"))?;
    writeln!(f, "t,dt,newton_iters,sup_phidot,band_lo,band_hi,sup_rm")?;
    for d in &traj.steps {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            fmt_g17(d.t),
            fmt_g17(d.dt),
            d.newton_iters,
            fmt_g17(d.sup_phidot),
            fmt_g17(d.band.0),
            fmt_g17(d.band.1),
            d.sup_rm.map(fmt_g17).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Load a trajectory directory written by `write_trajectory`.
pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let mut snapshot_paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .map(|f| f.starts_with("snapshot_") && f.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    snapshot_paths.sort();
    if snapshot_paths.is_empty() {
        return Err(KrfError::DataFormat {
            path: dir.display().to_string(),
            message: "no snapshot_*.csv files".into(),
        });
    }
    let mut background: Option<Arc<Background>> = None;
    let mut states = Vec::new();
    for p in &snapshot_paths {
        let snap = read_snapshot(p)?;
        let bg = match &background {
            Some(bg) => bg.clone(),
            None => {
                let grid = grid_from_samples(&snap.s)?;
                let bg = match snap.background.as_str() {
                    "flat" => Background::flat(snap.n, grid)?,
                    "complex_hyperbolic" => {
                        let k = snap.k.ok_or_else(|| KrfError::DataFormat {
                            path: p.display().to_string(),
                            message: "complex_hyperbolic snapshot lacks # k=".into(),
                        })?;
                        Background::complex_hyperbolic(snap.n, grid, k)?
                    }
                    "tabulated" => {
                        let (ts, tv) = read_table(&dir.join("background.csv"))?;
                        let tgrid = grid_from_samples(&ts)?;
                        if !tgrid.same_as(&grid) {
                            return Err(KrfError::GridMismatch(
                                "sidecar background grid differs from snapshots".into(),
                            ));
                        }
                        Background::tabulated(snap.n, grid, tv)?
                    }
                    other => {
                        return Err(KrfError::DataFormat {
                            path: p.display().to_string(),
                            message: format!("unknown background kind {other}"),
                        })
                    }
                };
                background = Some(bg.clone());
                bg
            }
        };
        let state = if snap.degenerate {
            MetricState::new_degenerate(bg, snap.xi0)?
        } else {
            MetricState::new(bg, snap.xi0, snap.t, snap.phi)?
        };
        states.push(state);
    }
    let mut steps: Vec<StepDiagnostics> = Vec::new();
    let diag_path = dir.join("diagnostics.csv");
    if diag_path.exists() {
        let text = fs::read_to_string(&diag_path)?;
        for line in text.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                continue;
            }
            let f = |i: usize| cells[i].parse::<f64>().unwrap_or(f64::NAN);
            steps.push(StepDiagnostics {
                t: f(0),
                dt: f(1),
                newton_iters: cells[2].parse().unwrap_or(0),
                sup_phidot: f(3),
                band: (f(4), f(5)),
                sup_rm: if cells[6].is_empty() { None } else { Some(f(6)) },
            });
        }
    }
    Ok(Trajectory { states, steps })
}
