//! Strict JSON parameter files: unknown keys are rejected, every parameter
//! must be positive, and mutation comes in exactly one of two forms.

use std::path::Path;

use serde::Deserialize;

use morphfront::{ModelParams, MutationScaling};

use crate::CliError;

/// On-disk schema. Mutation is either the explicit rate pair `mu_e`/`mu_d`
/// or the magnitude-times-relative-rates triple `mu`/`e`/`d`; the latter
/// fixes the relative rates that the small-mutation limits hold constant.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(rename = "D_e")]
    d_e: f64,
    #[serde(rename = "D_d")]
    d_d: f64,
    r_e: f64,
    r_d: f64,
    m_ee: f64,
    m_dd: f64,
    m_ed: f64,
    m_de: f64,
    mu_e: Option<f64>,
    mu_d: Option<f64>,
    mu: Option<f64>,
    e: Option<f64>,
    d: Option<f64>,
    sim: Option<SimSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(rename = "L")]
    length: Option<f64>,
    nx: Option<usize>,
    t_end: Option<f64>,
    cfl_safety: Option<f64>,
    threshold_frac: Option<f64>,
    x0: Option<f64>,
    boundary: Option<String>,
}

/// A parsed and validated parameter file.
pub struct RunConfig {
    pub params: ModelParams,
    pub scaling: MutationScaling,
    pub sim: SimSettings,
}

/// Simulation settings after defaults and the config file are merged;
/// command-line flags may still override individual fields.
#[derive(Clone, Debug)]
pub struct SimSettings {
    pub length: f64,
    pub nx: usize,
    pub t_end: f64,
    pub cfl_safety: f64,
    /// Front level as a fraction of the back-state total density.
    pub threshold_frac: f64,
    pub x0: f64,
    pub boundary: BoundaryChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryChoice {
    Neumann,
    DirichletLeft,
}

pub fn parse_boundary(name: &str) -> Result<BoundaryChoice, CliError> {
    match name {
        "neumann" => Ok(BoundaryChoice::Neumann),
        "dirichlet-left" => Ok(BoundaryChoice::DirichletLeft),
        other => Err(CliError::Validation(format!(
            "boundary must be \"neumann\" or \"dirichlet-left\", got \"{other}\""
        ))),
    }
}

/// Checks that simulation settings are usable; called again after flag
/// overrides, which can reintroduce bad values.
pub fn validate_sim(s: &SimSettings) -> Result<(), CliError> {
    let checks = [
        ("L", s.length, s.length > 0.0 && s.length.is_finite()),
        ("t_end", s.t_end, s.t_end > 0.0 && s.t_end.is_finite()),
        (
            "cfl_safety",
            s.cfl_safety,
            s.cfl_safety > 0.0 && s.cfl_safety <= 1.0,
        ),
        (
            "threshold_frac",
            s.threshold_frac,
            s.threshold_frac > 0.0 && s.threshold_frac < 1.0,
        ),
        ("x0", s.x0, s.x0 > 0.0 && s.x0.is_finite()),
    ];
    for (name, value, ok) in checks {
        if !ok {
            return Err(CliError::Validation(format!(
                "simulation setting `{name}` is out of range (got {value})"
            )));
        }
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;

    let mut positives = vec![
        ("D_e", file.d_e),
        ("D_d", file.d_d),
        ("r_e", file.r_e),
        ("r_d", file.r_d),
        ("m_ee", file.m_ee),
        ("m_dd", file.m_dd),
        ("m_ed", file.m_ed),
        ("m_de", file.m_de),
    ];
    for (name, value) in [
        ("mu_e", file.mu_e),
        ("mu_d", file.mu_d),
        ("mu", file.mu),
        ("e", file.e),
        ("d", file.d),
    ] {
        if let Some(value) = value {
            positives.push((name, value));
        }
    }
    for (name, value) in positives {
        if !value.is_finite() || value <= 0.0 {
            return Err(CliError::Validation(format!(
                "parameter `{name}` must be positive and finite (got {value})"
            )));
        }
    }

    let scaling = match ((file.mu_e, file.mu_d), (file.mu, file.e, file.d)) {
        // Explicit rates double as the relative-rate form at unit magnitude,
        // which is what the limit computations expect.
        ((Some(mu_e), Some(mu_d)), (None, None, None)) => MutationScaling::new(1.0, mu_e, mu_d)?,
        ((None, None), (Some(mu), Some(e), Some(d))) => MutationScaling::new(mu, e, d)?,
        _ => {
            return Err(CliError::Validation(
                "mutation must be given either as `mu_e` and `mu_d`, or as `mu`, `e` and `d`"
                    .into(),
            ))
        }
    };
    let params = ModelParams::new(
        file.d_e,
        file.d_d,
        file.r_e,
        file.r_d,
        file.m_ee,
        file.m_dd,
        file.m_ed,
        file.m_de,
        scaling.mu * scaling.e,
        scaling.mu * scaling.d,
    )?;

    let s = file.sim.unwrap_or_default();
    let boundary = match s.boundary.as_deref() {
        None => BoundaryChoice::Neumann,
        Some(name) => parse_boundary(name)?,
    };
    let sim = SimSettings {
        length: s.length.unwrap_or(400.0),
        nx: s.nx.unwrap_or(4001),
        t_end: s.t_end.unwrap_or(200.0),
        cfl_safety: s.cfl_safety.unwrap_or(0.4),
        threshold_frac: s.threshold_frac.unwrap_or(0.1),
        x0: s.x0.unwrap_or(50.0),
        boundary,
    };
    validate_sim(&sim)?;

    Ok(RunConfig {
        params,
        scaling,
        sim,
    })
}
