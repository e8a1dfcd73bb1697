//! Weighted `L²` estimate `E‖A^{1/2} S⋄g‖²_{L²(t^{-β}dt; L²)} / E‖g‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::pairwise_sum;
use crate::stochastic::convolution::completed_steps;
use crate::stochastic::{sample_noise, stochastic_convolution_spectral, NoiseConfig, SimpleProcess};

use super::conical::{check_trials, moment_ratio, per_trial};
use super::families::Family;
use super::setup::{GridDescriptor, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedL2Report {
    pub beta: f64,
    pub trials: usize,
    /// Mean of `‖A^{1/2} S⋄g‖²` over trials.
    pub lhs: f64,
    /// Mean of `‖g‖²` over trials.
    pub rhs: f64,
    pub ratio: f64,
    pub stderr: f64,
    /// Closed-form expected ratio, available for deterministic families.
    pub exact_ratio: Option<f64>,
    pub grid: GridDescriptor,
    pub d_h: usize,
    pub coefficients: String,
    pub family: String,
    pub seed: u64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("weight must be non-negative, got {beta}")));
    }
    Ok(())
}

pub fn weighted_l2_check(
    setup: &Setup,
    family: &Family,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<WeightedL2Report> {
    check_beta(beta)?;
    check_trials(trials)?;
    let grid = setup.times.with_beta(beta);
    let lam = setup.op.eigenvalues();
    let cell = setup.torus().cell_volume();

    let pairs = per_trial(trials, seed, |s| {
        let noise = sample_noise(&setup.noise.with_seed(s))?;
        let g = family.realize(setup, &noise)?;
        let series = stochastic_convolution_spectral(&setup.op, &g, &noise, grid.nodes())?;
        let energy: Vec<f64> = series
            .coeffs
            .iter()
            .map(|c| cell * pairwise_sum(&c.iter().zip(lam).map(|(v, l)| l * v * v).collect::<Vec<_>>()))
            .collect();
        let gs = g.sample_on(&grid);
        Ok((grid.integrate_values(&energy), gs.weighted_l2_norm().powi(2)))
    })?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let m = moment_ratio(&lhs, &rhs, 1.0)?;

    let exact_ratio = if family.is_deterministic() {
        let noise = sample_noise(&NoiseConfig { seed, ..setup.noise })?;
        let g = family.realize(setup, &noise)?;
        Some(exact_weighted_l2(setup, &g, beta)? / m.rhs)
    } else {
        None
    };

    Ok(WeightedL2Report {
        beta,
        trials,
        lhs: m.lhs,
        rhs: m.rhs,
        ratio: m.ratio,
        stderr: m.stderr,
        exact_ratio,
        grid: setup.grid,
        d_h: setup.noise.d_h,
        coefficients: setup.coefficients.clone(),
        family: family.tag(),
        seed,
    })
}

/// Expected `‖A^{1/2} S⋄g‖²_{L²(t^{-β}dt)}` for a deterministic integrand, by
/// the Itô isometry summed step by step in the eigenbasis:
/// `E|⟨S⋄g(t), v_j⟩|² = Σ_{k<K(t)} e^{-2(t-k·dt)λ_j} Σ_m ĝ_{m,j}(k)² dt`.
pub fn exact_weighted_l2(setup: &Setup, g: &SimpleProcess, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let op = &setup.op;
    let lam = op.eigenvalues();
    let cell = setup.torus().cell_volume();
    let dt = g.dt();
    let d_h = g.d_h();
    let grid = setup.times.with_beta(beta);

    // Σ_m ĝ_{m,j}² per piece.
    let power: Vec<Vec<f64>> = g
        .pieces()
        .iter()
        .map(|p| {
            let mut acc = vec![0.0; lam.len()];
            for m in 0..d_h {
                let c = op.to_spectral(&SimpleProcess::mode_snapshot(&p.field, d_h, m))?;
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += v * v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(grid.len());
    for &t in grid.nodes() {
        let upto = completed_steps(t, dt).min(g.steps());
        let mut total = 0.0;
        for (j, &l) in lam.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for (p, pw) in g.pieces().iter().zip(&power) {
                for k in p.start..p.end.min(upto) {
                    s += (-2.0 * (t - k as f64 * dt) * l).exp() * dt * pw[j];
                }
            }
            total += l * s;
        }
        values.push(cell * total);
    }
    Ok(grid.integrate_values(&values))
}
