//! Classical `L^p(dt; L²)` ratio against the conical ratio on time-localized data.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{SpaceTimeField, TimeGrid};
use crate::tent::{ConeAverages, TentParams};

use super::conical::{check_trials, moment_ratio, per_trial, trial_fields};
use super::families::Family;
use super::setup::{GridDescriptor, Setup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRow {
    pub level: usize,
    pub classical_ratio: f64,
    pub classical_stderr: f64,
    pub conical_ratio: f64,
    pub conical_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalVsConical {
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    pub trials: usize,
    pub rows: Vec<ClassicalRow>,
    /// Every successive classical difference is positive.
    pub classical_increasing: bool,
    /// Max/min of the conical ratios across levels.
    pub conical_spread: f64,
    /// Max/min of the classical ratios across levels.
    pub classical_spread: f64,
    pub grid: GridDescriptor,
    pub coefficients: String,
    pub seed: u64,
}

/// `(Σ_k w_k ‖f(t_k)‖₂^p)^{1/p}` with the weights of `grid`.
pub fn classical_norm(f: &SpaceTimeField, grid: &TimeGrid, p: f64) -> f64 {
    let cell = f.torus().cell_volume();
    let values: Vec<f64> = (0..grid.len())
        .map(|k| (cell * f.squared_magnitude(k).iter().sum::<f64>()).sqrt().powf(p))
        .collect();
    grid.integrate_values(&values).powf(1.0 / p)
}

/// Runs the singular family at each level, reporting the classical ratio
/// (unweighted `dt`) next to the conical ratio with `params`.
pub fn classical_vs_conical(
    setup: &Setup,
    params: TentParams,
    levels: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ClassicalVsConical> {
    params.validate()?;
    if !(params.p < 2.0) {
        return Err(invalid("p", format!("classical comparison needs p ∈ [1, 2), got {}", params.p)));
    }
    if levels.is_empty() {
        return Err(invalid("levels", "need at least one localization level"));
    }
    check_trials(trials)?;
    let flat = setup.times.with_beta(0.0);
    let weighted = setup.times.with_beta(params.beta);
    let p = params.p;

    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let family = Family::Singular { level };
        let norms = per_trial(trials, seed, |s| {
            let (grad, gs) = trial_fields(setup, &family, s)?;
            let cl = (classical_norm(&grad, &flat, p), classical_norm(&gs, &flat, p));
            let co = (
                ConeAverages::of(&grad, params.alpha).norm(&weighted, p)?,
                ConeAverages::of(&gs, params.alpha).norm(&weighted, p)?,
            );
            Ok((cl, co))
        })?;
        let pick = |f: fn(&((f64, f64), (f64, f64))) -> f64| norms.iter().map(f).collect::<Vec<_>>();
        let cl = moment_ratio(&pick(|t| t.0 .0), &pick(|t| t.0 .1), p)?;
        let co = moment_ratio(&pick(|t| t.1 .0), &pick(|t| t.1 .1), p)?;
        rows.push(ClassicalRow {
            level,
            classical_ratio: cl.ratio,
            classical_stderr: cl.stderr,
            conical_ratio: co.ratio,
            conical_stderr: co.stderr,
        });
    }
    let classical: Vec<f64> = rows.iter().map(|r| r.classical_ratio).collect();
    let conical: Vec<f64> = rows.iter().map(|r| r.conical_ratio).collect();
    Ok(ClassicalVsConical {
        p,
        beta: params.beta,
        alpha: params.alpha,
        trials,
        classical_increasing: classical.windows(2).all(|w| w[1] > w[0]),
        conical_spread: super::drift(&conical),
        classical_spread: super::drift(&classical),
        rows,
        grid: setup.grid,
        coefficients: setup.coefficients.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::CoefficientSource;
    use crate::lab::setup::GridSpec;

    #[test]
    fn rejects_p_two() {
        let s = Setup::build(&GridSpec::new(1, 8).with_nodes(8), &CoefficientSource::Identity, 1).unwrap();
        let prm = TentParams::new(2.0, 1.0, 1.0).unwrap();
        assert!(classical_vs_conical(&s, prm, &[0], 2, 1).is_err());
    }

    #[test]
    fn level_zero_ratios_finite() {
        let s = Setup::build(&GridSpec::new(1, 16).with_nodes(24), &CoefficientSource::Identity, 1).unwrap();
        let prm = TentParams::new(1.0, 1.0, 1.0).unwrap();
        let r = classical_vs_conical(&s, prm, &[0], 8, 1).unwrap();
        assert!(r.rows[0].classical_ratio.is_finite() && r.rows[0].classical_ratio > 0.0);
        assert!(r.rows[0].conical_ratio.is_finite() && r.rows[0].conical_ratio > 0.0);
    }
}
