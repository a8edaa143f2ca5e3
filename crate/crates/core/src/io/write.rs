//! Deterministic CSV/JSON output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dispersion::DispersionPoint;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{density, SelfField, SpinorPair};
use crate::scan::KSample;
use crate::solver::TraceRow;

/// Writes through a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Full-precision field: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv<I: IntoIterator<Item = Vec<String>>>(header: &str, rows: I) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `x,u,v,phi0,rho` per node.
pub fn profiles_csv(grid: &Grid, pair: &SpinorPair, field: &SelfField) -> String {
    let rho = density(pair).rho;
    csv(
        "x,u,v,phi0,rho",
        (0..grid.len()).map(|i| {
            vec![
                num(grid.x()[i]),
                num(pair.u[i]),
                num(pair.v[i]),
                num(field.phi0[i]),
                num(rho[i]),
            ]
        }),
    )
}

pub fn k_history_csv(history: &[KSample]) -> String {
    csv(
        "a,k,iterations,residual",
        history.iter().map(|h| {
            vec![
                num(h.a),
                num(h.k),
                h.iterations.to_string(),
                num(h.residual),
            ]
        }),
    )
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    csv(
        "iteration,k,residual_norm,mu,tau",
        rows.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.k),
                num(r.residual_norm),
                num(r.mu),
                num(r.tau),
            ]
        }),
    )
}

pub fn dispersion_csv(points: &[DispersionPoint]) -> String {
    csv(
        "P,E_e,E_p,L,K,velocity",
        points.iter().map(|p| {
            vec![
                num(p.p),
                num(p.e_electron),
                num(p.e_positron),
                num(p.l),
                num(p.k),
                num(p.velocity),
            ]
        }),
    )
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    writeln!(s).expect("writing to a String");
    atomic_write(path, s.as_bytes())
}
