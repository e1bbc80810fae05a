//! Problem definition files: a flat key/value format with three sections.
//!
//! ```text
//! [problem]
//! potential   = 0.5*y^2 + 0.5*(1+y)*x^2
//! deformation = x^2*y            # optional
//! e0          = 0.0
//! epsilon0    = 0.4              # or sweep_lo / sweep_hi / sweep_samples
//!
//! [tolerances]                   # optional overrides, all positive
//! rtol = 1e-11
//!
//! [output]
//! format = json                  # json | csv | text
//! path   = report.json           # omitted: stdout
//! ```
//!
//! `#` starts a comment; whitespace is free. Keys are unique per section.

use anyhow::{anyhow, bail, Context, Result};
use libration_core::{ClassifyTols, NumericsConfig, OracleConfig};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            other => bail!("unknown output format '{other}' (expected json|csv|text)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum EnergySpec {
    Single(f64),
    Sweep { lo: f64, hi: f64, samples: usize },
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub potential: String,
    pub deformation: Option<String>,
    pub e0: f64,
    pub energy: EnergySpec,
    pub num: NumericsConfig,
    pub tols: ClassifyTols,
    pub oracle: OracleConfig,
    pub fd_tol_order1: f64,
    pub fd_tol_order2: f64,
    pub fd_tol_order3: f64,
    pub format: OutputFormat,
    pub out_path: Option<String>,
}

fn parse_sections(src: &str) -> Result<HashMap<String, HashMap<String, String>>> {
    let mut sections: HashMap<String, HashMap<String, String>> = HashMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in src.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            let name = line
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| anyhow!("line {}: malformed section header", lineno + 1))?
                .trim()
                .to_string();
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
        let section = current
            .clone()
            .ok_or_else(|| anyhow!("line {}: key outside any [section]", lineno + 1))?;
        let prev = sections
            .get_mut(&section)
            .unwrap()
            .insert(k.trim().to_string(), v.trim().to_string());
        if prev.is_some() {
            bail!(
                "line {}: duplicate key '{}' in [{}]",
                lineno + 1,
                k.trim(),
                section
            );
        }
    }
    Ok(sections)
}

fn get_f64(map: &HashMap<String, String>, key: &str) -> Result<Option<f64>> {
    map.get(key)
        .map(|v| {
            v.parse::<f64>()
                .with_context(|| format!("key '{key}': invalid number '{v}'"))
        })
        .transpose()
}

fn get_usize(map: &HashMap<String, String>, key: &str) -> Result<Option<usize>> {
    map.get(key)
        .map(|v| {
            v.parse::<usize>()
                .with_context(|| format!("key '{key}': invalid integer '{v}'"))
        })
        .transpose()
}

pub fn parse_config(src: &str) -> Result<ProblemConfig> {
    let sections = parse_sections(src)?;
    let empty = HashMap::new();
    let problem = sections
        .get("problem")
        .ok_or_else(|| anyhow!("missing [problem] section"))?;
    let tol = sections.get("tolerances").unwrap_or(&empty);
    let output = sections.get("output").unwrap_or(&empty);
    for name in sections.keys() {
        if !matches!(name.as_str(), "problem" | "tolerances" | "output") {
            bail!("unknown section [{name}]");
        }
    }

    let potential = problem
        .get("potential")
        .ok_or_else(|| anyhow!("[problem] needs a 'potential'"))?
        .clone();
    let deformation = problem.get("deformation").cloned();
    let e0 = get_f64(problem, "e0")?.unwrap_or(0.0);
    let eps0 = get_f64(problem, "epsilon0")?;
    let sweep_lo = get_f64(problem, "sweep_lo")?;
    let sweep_hi = get_f64(problem, "sweep_hi")?;
    let sweep_samples = get_usize(problem, "sweep_samples")?;
    let has_sweep = sweep_lo.is_some() || sweep_hi.is_some() || sweep_samples.is_some();
    let energy = match (eps0, has_sweep) {
        (Some(_), true) => bail!("specify either epsilon0 or a sweep range, not both"),
        (Some(e), false) => EnergySpec::Single(e),
        (None, true) => {
            let lo = sweep_lo.ok_or_else(|| anyhow!("sweep needs sweep_lo"))?;
            let hi = sweep_hi.ok_or_else(|| anyhow!("sweep needs sweep_hi"))?;
            let samples = sweep_samples.ok_or_else(|| anyhow!("sweep needs sweep_samples"))?;
            if samples < 2 {
                bail!("sweep_samples must be at least 2");
            }
            if hi.is_nan() || lo.is_nan() || hi <= lo {
                bail!("sweep range must have sweep_hi > sweep_lo");
            }
            EnergySpec::Sweep { lo, hi, samples }
        }
        (None, false) => bail!("[problem] needs epsilon0 or a sweep range"),
    };

    let mut cfg = ProblemConfig {
        potential,
        deformation,
        e0,
        energy,
        num: NumericsConfig::default(),
        tols: ClassifyTols::default(),
        oracle: OracleConfig::default(),
        fd_tol_order1: 1e-5,
        fd_tol_order2: 1e-4,
        fd_tol_order3: 1e-3,
        format: OutputFormat::Json,
        out_path: None,
    };
    for (k, v) in tol {
        apply_tolerance(&mut cfg, k, v)?;
    }
    if let Some(f) = output.get("format") {
        cfg.format = OutputFormat::parse(f)?;
    }
    if let Some(p) = output.get("path") {
        cfg.out_path = Some(p.clone());
    }
    Ok(cfg)
}

/// Apply one tolerance override (also the handler for --tol-override).
pub fn apply_tolerance(cfg: &mut ProblemConfig, key: &str, value: &str) -> Result<()> {
    let fval = || -> Result<f64> {
        let v: f64 = value
            .parse()
            .with_context(|| format!("tolerance '{key}': invalid number '{value}'"))?;
        if v.is_nan() || v <= 0.0 {
            bail!("tolerance '{key}' must be positive, got {value}");
        }
        Ok(v)
    };
    let uval = || -> Result<usize> {
        let v: usize = value
            .parse()
            .with_context(|| format!("tolerance '{key}': invalid integer '{value}'"))?;
        if v == 0 {
            bail!("tolerance '{key}' must be positive");
        }
        Ok(v)
    };
    match key {
        "rtol" => cfg.num.rtol = fval()?,
        "atol" => cfg.num.atol = fval()?,
        "grid_intervals" => cfg.num.grid_intervals = uval()?,
        "substeps" => cfg.num.substeps = uval()?,
        "max_time" => cfg.num.max_time = fval()?,
        "tol_energy" => cfg.num.tol_energy = fval()?,
        "tol_singular" => cfg.tols.tol_singular = fval()?,
        "tol_prime" => cfg.tols.tol_prime = fval()?,
        "tol_2" => cfg.tols.tol_2 = fval()?,
        "tol_3" => cfg.tols.tol_3 = fval()?,
        "tol_guard" => cfg.tols.tol_guard = fval()?,
        "oracle_steps" => cfg.oracle.steps_per_period = uval()?,
        "h_q" => {
            cfg.oracle.h_q = fval()?;
        }
        "h_eps" => cfg.oracle.h_eps = fval()?,
        "h_delta" => cfg.oracle.h_delta = fval()?,
        "newton_max" => cfg.oracle.newton_max = uval()?,
        "fd_tol_order1" => cfg.fd_tol_order1 = fval()?,
        "fd_tol_order2" => cfg.fd_tol_order2 = fval()?,
        "fd_tol_order3" => cfg.fd_tol_order3 = fval()?,
        other => bail!("unknown tolerance key '{other}'"),
    }
    Ok(())
}
