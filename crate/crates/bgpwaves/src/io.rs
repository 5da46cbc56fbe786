//! CSV and JSON formats shared with the command-line front end.
//!
//! Profile CSVs carry `x,value`; full solutions carry `x,w,dw,z,sigma,A` plus
//! an optional `nu` column. Floats are written with 17 significant digits so
//! files round-trip bit-exactly.

use crate::grid::Grid;
use crate::kpp::WaveSolution;
use crate::mfg::BgpSolution;
use crate::profile::{fit_left_tail, fit_right_tail, LeftTail, Profile, RightTail};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid data: {0}")]
    Invalid(String),
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_profile_csv(path: &Path, p: &Profile) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x,value")?;
    for (x, v) in p.grid().nodes().iter().zip(p.values()) {
        writeln!(f, "{},{}", fmt(*x), fmt(*v))?;
    }
    Ok(())
}

pub fn read_profile_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if k == 0 && line.starts_with('x') {
            continue;
        }
        let mut parts = line.split(',');
        let x: f64 = parts
            .next()
            .ok_or_else(|| IoError::Csv(format!("line {}: missing x", k + 1)))?
            .trim()
            .parse()
            .map_err(|e| IoError::Csv(format!("line {}: {e}", k + 1)))?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| IoError::Csv(format!("line {}: missing value", k + 1)))?
            .trim()
            .parse()
            .map_err(|e| IoError::Csv(format!("line {}: {e}", k + 1)))?;
        xs.push(x);
        vs.push(v);
    }
    if xs.len() < 2 {
        return Err(IoError::Csv("need at least two rows".into()));
    }
    Ok((xs, vs))
}

/// Wave-only solution: `x,w,dw`.
pub fn write_wave_csv(path: &Path, wave: &WaveSolution) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x,w,dw")?;
    let w = &wave.w;
    for ((x, v), t) in w.grid().nodes().iter().zip(w.values()).zip(w.tangents()) {
        writeln!(f, "{},{},{}", fmt(*x), fmt(*v), fmt(*t))?;
    }
    Ok(())
}

/// Full BGP solution on the master grid: `x,w,dw,z,sigma,A,nu`.
pub fn write_solution_csv(path: &Path, b: &BgpSolution) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x,w,dw,z,sigma,A,nu")?;
    for (i, &x) in b.z.grid().nodes().iter().enumerate() {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            fmt(x),
            fmt(b.wave.w.eval(x)),
            fmt(b.wave.w.deriv(x)),
            fmt(b.z.values()[i]),
            fmt(b.policy.sigma.values()[i]),
            fmt(b.policy.kernel.eval(x)),
            fmt(b.nu.values()[i]),
        )?;
    }
    Ok(())
}

/// Columns of a solution CSV (wave-only or full).
#[derive(Debug, Clone)]
pub struct SolutionData {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
}

pub fn read_solution_csv(path: &Path) -> Result<SolutionData, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| IoError::Csv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    if cols.first() != Some(&"x") || !cols.contains(&"w") || !cols.contains(&"dw") {
        return Err(IoError::Csv(format!("unexpected header {header:?}")));
    }
    let idx = |name: &str| cols.iter().position(|&c| c == name);
    let (iw, idw) = (idx("w").unwrap(), idx("dw").unwrap());
    let (iz, isg, ia, inu) = (idx("z"), idx("sigma"), idx("A"), idx("nu"));

    let mut data = SolutionData {
        x: vec![],
        w: vec![],
        dw: vec![],
        z: iz.map(|_| vec![]),
        sigma: isg.map(|_| vec![]),
        a: ia.map(|_| vec![]),
        nu: inu.map(|_| vec![]),
    };
    for (k, line) in lines.enumerate() {
        let parts: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Csv(format!("line {}: {e}", k + 2)))?;
        if parts.len() != cols.len() {
            return Err(IoError::Csv(format!("line {}: {} fields, expected {}", k + 2, parts.len(), cols.len())));
        }
        data.x.push(parts[0]);
        data.w.push(parts[iw]);
        data.dw.push(parts[idw]);
        if let (Some(i), Some(v)) = (iz, data.z.as_mut()) {
            v.push(parts[i]);
        }
        if let (Some(i), Some(v)) = (isg, data.sigma.as_mut()) {
            v.push(parts[i]);
        }
        if let (Some(i), Some(v)) = (ia, data.a.as_mut()) {
            v.push(parts[i]);
        }
        if let (Some(i), Some(v)) = (inu, data.nu.as_mut()) {
            v.push(parts[i]);
        }
    }
    if data.x.len() < 16 {
        return Err(IoError::Csv("need at least 16 rows".into()));
    }
    Ok(data)
}

/// Rebuild the wave profile from CSV columns, re-fitting the tails from the
/// sampled data.
pub fn wave_profile_from_data(data: &SolutionData) -> Result<Profile, IoError> {
    let grid = Grid::new(data.x.clone()).map_err(|e| IoError::Invalid(e.to_string()))?;
    let draft = Profile::with_tangents(
        grid.clone(),
        data.w.clone(),
        data.dw.clone(),
        LeftTail::flat(data.w[0]),
        RightTail::flat(),
    )
    .map_err(|e| IoError::Invalid(e.to_string()))?;
    let left = if 1.0 - data.w[0] < 1e-3 {
        fit_left_tail(&draft, 12, 1.0).unwrap_or(LeftTail::flat(data.w[0]))
    } else {
        LeftTail::flat(data.w[0])
    };
    let right = match fit_right_tail(&draft, 12) {
        Ok(fit) => RightTail {
            rate: fit.rate,
            poly_degree: fit.poly_degree,
        },
        Err(_) => RightTail::flat(),
    };
    Profile::with_tangents(grid, data.w.clone(), data.dw.clone(), left, right)
        .map_err(|e| IoError::Invalid(e.to_string()))
}

/// JSON summary of a single wave solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveSummary {
    pub c: f64,
    pub theta: f64,
    pub i_value: f64,
    pub lambda: f64,
    pub residual: f64,
    pub critical: bool,
}

impl WaveSummary {
    pub fn of(w: &WaveSolution) -> Self {
        Self {
            c: w.c,
            theta: w.theta,
            i_value: w.i_value,
            lambda: w.lambda,
            residual: w.residual,
            critical: w.critical,
        }
    }
}

/// JSON summary of a balanced growth path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BgpSummary {
    pub c: f64,
    #[serde(rename = "I")]
    pub i_value: f64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k_const: f64,
    pub tail_inequality: f64,
    pub residuals: ResidualSummary,
    pub iterations: usize,
    pub critical: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub criticality: f64,
    pub bellman: f64,
    pub idempotence: f64,
    pub wave: f64,
    pub mass_gap: f64,
}

impl BgpSummary {
    pub fn of(b: &BgpSolution) -> Self {
        Self {
            c: b.c,
            i_value: b.diagnostics.i_quadrature,
            lambda: b.wave.lambda,
            k_const: b.k_const,
            tail_inequality: b.tail_inequality,
            residuals: ResidualSummary {
                criticality: b.diagnostics.crit_residual,
                bellman: b.diagnostics.bellman_residual,
                idempotence: b.diagnostics.idempotence_gap,
                wave: b.wave.residual,
                mass_gap: (b.diagnostics.mass_quadrature - b.wave.w.left_tail().limit).abs(),
            },
            iterations: b.diagnostics.iterations,
            critical: b.diagnostics.critical_branch,
        }
    }
}
