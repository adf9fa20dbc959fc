//! Human-readable configuration of coefficient families and run
//! parameters (TOML).
//!
//! ```toml
//! [growth]
//! kind = "pure-power"     # pure-power | power-with-perturbation | tabulated
//! alpha = 1.0
//! tau_inf = 1.0
//!
//! [frag]
//! kind = "pure-power"
//! gamma = 1.0
//! B_inf = 1.0
//!
//! [fragments]
//! kind = "uniform"        # uniform | power | mitosis | table
//! # power:   mu = 1.0, nu = 0.0
//! # table:   zs = [...], values = [...], mu, nu, p0, p1, lower_bound
//! # extra atoms on any kind: atoms = [[0.5, 2.0]]
//!
//! [mesh]                  # optional
//! n = 1024
//! x1 = 1e-3
//!
//! [truncation]            # optional
//! l = 40.0
//! ls = [20.0, 40.0, 80.0]
//! dual_boundary = "zero"  # zero | constant | linear
//! delta = 1.0
//! ```

use serde::Deserialize;

use crate::coefficients::{
    Atom, CoefficientSet, FragmentMeasure, GrowthRate, TotalFragRate,
};
use crate::eigensolver::{DualBoundary, MeshSpec, TruncationConfig};
use crate::error::Error;
use crate::Result;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    growth: GrowthSection,
    frag: FragSection,
    fragments: FragmentsSection,
    #[serde(default)]
    mesh: Option<MeshSection>,
    #[serde(default)]
    truncation: Option<TruncationSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrowthSection {
    kind: String,
    alpha: f64,
    tau_inf: f64,
    #[serde(default)]
    perturbation_amplitude: Option<f64>,
    #[serde(default)]
    perturbation_decay: Option<f64>,
    #[serde(default)]
    table: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    alpha0: Option<f64>,
    #[serde(default)]
    tau0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FragSection {
    kind: String,
    gamma: f64,
    #[serde(rename = "B_inf")]
    b_inf: f64,
    #[serde(default)]
    perturbation_amplitude: Option<f64>,
    #[serde(default)]
    perturbation_decay: Option<f64>,
    #[serde(default)]
    table: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    gamma0: Option<f64>,
    #[serde(rename = "B0", default)]
    b0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FragmentsSection {
    kind: String,
    #[serde(default)]
    mu: Option<f64>,
    #[serde(default)]
    nu: Option<f64>,
    #[serde(default)]
    p0: Option<f64>,
    #[serde(default)]
    p1: Option<f64>,
    #[serde(default)]
    lower_bound: Option<f64>,
    #[serde(default)]
    zs: Option<Vec<f64>>,
    #[serde(default)]
    values: Option<Vec<f64>>,
    #[serde(default)]
    atoms: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshSection {
    n: usize,
    x1: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncationSection {
    #[serde(default)]
    l: Option<f64>,
    #[serde(default)]
    ls: Option<Vec<f64>>,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    dual_boundary: Option<String>,
    #[serde(default)]
    delta: Option<f64>,
}

/// Everything a config file can pin down.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub coefficients: CoefficientSet,
    pub mesh: Option<MeshSpec>,
    pub truncation: Option<TruncationConfig>,
    pub l_values: Option<Vec<f64>>,
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;

    let growth = match raw.growth.kind.as_str() {
        "pure-power" => GrowthRate::pure_power(raw.growth.tau_inf, raw.growth.alpha),
        "power-with-perturbation" => {
            let a = raw.growth.perturbation_amplitude.ok_or_else(|| {
                Error::Config("growth.perturbation_amplitude required for this kind".into())
            })?;
            let d = raw.growth.perturbation_decay.ok_or_else(|| {
                Error::Config("growth.perturbation_decay required for this kind".into())
            })?;
            GrowthRate::with_perturbation(raw.growth.tau_inf, raw.growth.alpha, a, d)?
        }
        "tabulated" => {
            let table = raw
                .growth
                .table
                .ok_or_else(|| Error::Config("growth.table required for tabulated kind".into()))?;
            let (xs, vs): (Vec<f64>, Vec<f64>) = table.iter().map(|r| (r[0], r[1])).unzip();
            let alpha0 = raw.growth.alpha0.unwrap_or(raw.growth.alpha);
            let tau0 = raw.growth.tau0.unwrap_or(raw.growth.tau_inf);
            GrowthRate::tabulated(xs, vs, (tau0, alpha0), (raw.growth.tau_inf, raw.growth.alpha))?
        }
        other => {
            return Err(Error::Config(format!(
                "growth.kind '{other}' is not one of pure-power | power-with-perturbation | tabulated"
            )))
        }
    };

    let frag = match raw.frag.kind.as_str() {
        "pure-power" => TotalFragRate::pure_power(raw.frag.b_inf, raw.frag.gamma),
        "power-with-perturbation" => {
            let a = raw.frag.perturbation_amplitude.ok_or_else(|| {
                Error::Config("frag.perturbation_amplitude required for this kind".into())
            })?;
            let d = raw.frag.perturbation_decay.ok_or_else(|| {
                Error::Config("frag.perturbation_decay required for this kind".into())
            })?;
            TotalFragRate::with_perturbation(raw.frag.b_inf, raw.frag.gamma, a, d)?
        }
        "tabulated" => {
            let table = raw
                .frag
                .table
                .ok_or_else(|| Error::Config("frag.table required for tabulated kind".into()))?;
            let (xs, vs): (Vec<f64>, Vec<f64>) = table.iter().map(|r| (r[0], r[1])).unzip();
            let gamma0 = raw.frag.gamma0.unwrap_or(raw.frag.gamma);
            let b0 = raw.frag.b0.unwrap_or(raw.frag.b_inf);
            TotalFragRate::tabulated(xs, vs, (b0, gamma0), (raw.frag.b_inf, raw.frag.gamma))?
        }
        other => {
            return Err(Error::Config(format!(
                "frag.kind '{other}' is not one of pure-power | power-with-perturbation | tabulated"
            )))
        }
    };

    let atoms: Vec<Atom> = raw
        .fragments
        .atoms
        .unwrap_or_default()
        .iter()
        .map(|a| Atom {
            location: a[0],
            weight: a[1],
        })
        .collect();
    let fragments = match raw.fragments.kind.as_str() {
        "uniform" => {
            let base = FragmentMeasure::uniform();
            if atoms.is_empty() {
                base
            } else {
                base.with_atoms(atoms)?
            }
        }
        "power" => {
            let mu = raw
                .fragments
                .mu
                .ok_or_else(|| Error::Config("fragments.mu required for power kind".into()))?;
            let nu = raw
                .fragments
                .nu
                .ok_or_else(|| Error::Config("fragments.nu required for power kind".into()))?;
            let base = FragmentMeasure::power(mu, nu)?;
            if atoms.is_empty() {
                base
            } else {
                base.with_atoms(atoms)?
            }
        }
        "mitosis" => {
            if !atoms.is_empty() {
                return Err(Error::Config(
                    "mitosis already is a pure atom; extra atoms not supported".into(),
                ));
            }
            FragmentMeasure::mitosis()
        }
        "table" => {
            let zs = raw
                .fragments
                .zs
                .ok_or_else(|| Error::Config("fragments.zs required for table kind".into()))?;
            let values = raw
                .fragments
                .values
                .ok_or_else(|| Error::Config("fragments.values required for table kind".into()))?;
            let mu = raw.fragments.mu.unwrap_or(1.0);
            let nu = raw.fragments.nu.unwrap_or(0.0);
            let p0 = raw.fragments.p0.unwrap_or(0.0);
            let p1 = raw.fragments.p1.unwrap_or(0.0);
            let lb = raw.fragments.lower_bound.unwrap_or(0.0);
            FragmentMeasure::tabulated(zs, values, (mu, p0), (nu, p1), lb, atoms)?
        }
        other => {
            return Err(Error::Config(format!(
                "fragments.kind '{other}' is not one of uniform | power | mitosis | table"
            )))
        }
    };

    let coefficients = CoefficientSet::new(growth, frag, fragments);

    let mesh = raw.mesh.map(|m| MeshSpec { n: m.n, x1: m.x1 });
    let (truncation, l_values) = match raw.truncation {
        None => (None, None),
        Some(t) => {
            let l = t
                .l
                .or_else(|| t.ls.as_ref().and_then(|v| v.last().copied()))
                .ok_or_else(|| Error::Config("truncation needs l or ls".into()))?;
            let mut cfg = TruncationConfig::new(l);
            cfg.eta = t.eta;
            if let Some(eps) = t.epsilon {
                cfg.epsilon = eps;
            }
            if let Some(kind) = t.dual_boundary {
                let delta = t.delta.unwrap_or(1.0);
                cfg.dual_boundary = match kind.as_str() {
                    "zero" => DualBoundary::Zero,
                    "constant" => DualBoundary::Constant(delta),
                    "linear" => DualBoundary::Linear(delta),
                    other => {
                        return Err(Error::Config(format!(
                            "truncation.dual_boundary '{other}' is not zero | constant | linear"
                        )))
                    }
                };
            }
            (Some(cfg), t.ls)
        }
    };

    Ok(RunConfig {
        coefficients,
        mesh,
        truncation,
        l_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_power_family() {
        let cfg = parse(
            r#"
            [growth]
            kind = "pure-power"
            alpha = 1.0
            tau_inf = 1.0

            [frag]
            kind = "pure-power"
            gamma = 1.0
            B_inf = 1.0

            [fragments]
            kind = "uniform"

            [mesh]
            n = 512
            x1 = 1e-3

            [truncation]
            ls = [20.0, 40.0, 80.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mesh.unwrap().n, 512);
        assert_eq!(cfg.l_values.unwrap(), vec![20.0, 40.0, 80.0]);
        assert_eq!(cfg.truncation.unwrap().l, 80.0);
        assert_eq!(cfg.coefficients.exponents().gamma, 1.0);
    }

    #[test]
    fn parse_mitosis_and_atoms() {
        let cfg = parse(
            r#"
            [growth]
            kind = "pure-power"
            alpha = 0.0
            tau_inf = 1.0

            [frag]
            kind = "pure-power"
            gamma = 1.0
            B_inf = 1.0

            [fragments]
            kind = "mitosis"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.coefficients.fragments.atoms.len(), 1);
        assert_eq!(cfg.coefficients.fragments.p0, 0.0);
    }

    #[test]
    fn parse_errors_carry_key_diagnostics() {
        let err = parse(
            r#"
            [growth]
            kind = "pure-power"
            alpha = 1.0
            tau_inf = 1.0

            [frag]
            kind = "pure-power"
            gamma = 1.0
            B_inf = 1.0

            [fragments]
            kind = "power"
            "#,
        )
        .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("fragments.mu"), "got: {msg}");

        let err = parse("[growth]\nbogus = 1\n").unwrap_err();
        assert!(format!("{err}").contains("parse error"));
    }
}
