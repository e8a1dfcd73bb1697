//! Deterministic conical regularity ratio `‖A S∗g‖_T / ‖g‖_T`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::stochastic::{deterministic_convolution, NoiseConfig, NoisePath};
use crate::tent::{tent_norm_on, TentParams};

use super::families::Family;
use super::setup::{GridDescriptor, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicReport {
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub grid: GridDescriptor,
    pub coefficients: String,
    pub family: String,
}

/// Lower bound on `p` for the deterministic estimate: `max(2n/(n+2(1+β)), 1)`.
pub fn exponent_threshold(n: usize, beta: f64) -> f64 {
    let n = n as f64;
    (2.0 * n / (n + 2.0 * (1.0 + beta))).max(1.0)
}

pub fn deterministic_ratio(
    setup: &Setup,
    params: TentParams,
    family: &Family,
) -> Result<DeterministicReport> {
    params.validate()?;
    let threshold = exponent_threshold(setup.torus().dim(), params.beta);
    if !(params.p > threshold) {
        return Err(invalid(
            "p",
            format!("deterministic estimate needs p > {threshold}, got {}", params.p),
        ));
    }
    if !family.is_deterministic() {
        return Err(invalid("family", format!("{} depends on the noise", family.tag())));
    }
    let cfg = NoiseConfig::new(1, setup.noise.dt, setup.noise.steps, 0)?;
    let quiet = NoisePath::from_increments(cfg, vec![0.0; cfg.steps])?;
    let g = family.realize(setup, &quiet)?;
    let grid = setup.times.with_beta(params.beta);
    let conv = deterministic_convolution(&setup.op, &g, &grid)?;
    let lhs = tent_norm_on(&conv.generator, &grid, &params)?;
    let rhs = tent_norm_on(&g.sample_on(&grid), &grid, &params)?;
    if !(rhs > 0.0) {
        return Err(LabError::Degenerate("g = 0 on the time grid".into()));
    }
    Ok(DeterministicReport {
        p: params.p,
        beta: params.beta,
        alpha: params.alpha,
        lhs,
        rhs,
        ratio: lhs / rhs,
        grid: setup.grid,
        coefficients: setup.coefficients.clone(),
        family: family.tag(),
    })
}
