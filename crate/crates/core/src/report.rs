//! JSON and CSV emitters. Files are written to a temporary sibling and
//! renamed into place, so reruns overwrite atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::eigensolver::EigenTriple;
use crate::evolve::Trajectory;
use crate::meshops::GridFunction;
use crate::Result;

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::Internal(format!("json serialization: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Grid function as `x, value, log_value, prefactored`.
pub fn write_grid_csv(path: &Path, f: &GridFunction) -> Result<()> {
    let mut out = String::from("x,value,log_value,prefactored\n");
    for (i, &x) in f.mesh.nodes().iter().enumerate() {
        let v = f.values[i];
        out.push_str(&format!(
            "{x:.17e},{v:.17e},{:.17e},{}\n",
            v.ln(),
            f.prefactored
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Solved profiles as `x, G, phi, G_exp_prefactored`.
pub fn write_triple_csv(path: &Path, t: &EigenTriple) -> Result<()> {
    let mut out = String::from("x,G,phi,G_exp_prefactored\n");
    for (i, &x) in t.g.mesh.nodes().iter().enumerate() {
        out.push_str(&format!(
            "{x:.17e},{:.17e},{:.17e},{:.17e}\n",
            t.g.values[i], t.phi.values[i], t.g_tilde.values[i]
        ));
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Serialize)]
pub struct TripleSummary {
    pub lambda_l: f64,
    pub lambda_primal: f64,
    pub l: f64,
    pub n: usize,
    pub residual_g: f64,
    pub residual_phi: f64,
    pub norm_residual_g: f64,
    pub norm_residual_gphi: f64,
    pub prefactored: bool,
    pub iterations: (usize, usize),
    pub warnings: Vec<String>,
}

impl TripleSummary {
    pub fn from_triple(t: &EigenTriple) -> Self {
        Self {
            lambda_l: t.lambda,
            lambda_primal: t.lambda_primal,
            l: t.g.mesh.truncation(),
            n: t.g.mesh.len(),
            residual_g: t.residual_g,
            residual_phi: t.residual_phi,
            norm_residual_g: t.norm_residual_g,
            norm_residual_gphi: t.norm_residual_gphi,
            prefactored: t.prefactored,
            iterations: t.iterations,
            warnings: t.warnings.clone(),
        }
    }
}

/// `(x, ratio)` series as CSV.
pub fn write_series_csv(path: &Path, header: &str, series: &[(f64, f64)]) -> Result<()> {
    let mut out = format!("{header}\n");
    for (x, v) in series {
        out.push_str(&format!("{x:.17e},{v:.17e}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Trajectory observables as `t, conserved, H, D, fitted_rate_so_far`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("t,conserved,H,D,fitted_rate_so_far\n");
    for r in &traj.rows {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.t, r.conserved, r.entropy, r.dissipation, r.fitted_rate_so_far
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Checkpoint densities, one column per requested time.
pub fn write_checkpoints_csv(
    path: &Path,
    nodes: &[f64],
    checkpoints: &[(f64, Vec<f64>)],
) -> Result<()> {
    let mut out = String::from("x");
    for (t, _) in checkpoints {
        out.push_str(&format!(",g_at_t_{t:.6}"));
    }
    out.push('\n');
    for (i, &x) in nodes.iter().enumerate() {
        out.push_str(&format!("{x:.17e}"));
        for (_, g) in checkpoints {
            out.push_str(&format!(",{:.17e}", g[i]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshops::build_mesh;
    use std::sync::Arc;

    #[test]
    fn atomic_overwrite_and_grid_csv_roundtrip() {
        let dir = std::env::temp_dir().join("growfrag-report-test");
        let path = dir.join("grid.csv");
        let mesh = Arc::new(build_mesh(2.0, 8, 0.5).unwrap());
        let f = GridFunction::new(Arc::clone(&mesh), mesh.nodes().to_vec());
        write_grid_csv(&path, &f).unwrap();
        let first = fs::read_to_string(&path).unwrap();
        assert!(first.starts_with("x,value,log_value,prefactored\n"));
        assert_eq!(first.lines().count(), 9);
        // Overwrite leaves a single consistent file.
        write_grid_csv(&path, &f).unwrap();
        let second = fs::read_to_string(&path).unwrap();
        assert_eq!(first, second);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn json_is_deterministic() {
        #[derive(Serialize)]
        struct Demo {
            b: u32,
            a: u32,
        }
        let dir = std::env::temp_dir().join("growfrag-json-test");
        let path = dir.join("d.json");
        write_json(&path, &Demo { b: 2, a: 1 }).unwrap();
        let one = fs::read_to_string(&path).unwrap();
        write_json(&path, &Demo { b: 2, a: 1 }).unwrap();
        let two = fs::read_to_string(&path).unwrap();
        assert_eq!(one, two);
        fs::remove_dir_all(&dir).ok();
    }
}
