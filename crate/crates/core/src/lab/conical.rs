//! Conical stochastic regularity ratio `(E‖G S⋄g‖^p)^{1/p} / (E‖g‖^p)^{1/p}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::lattice::{SpaceTimeField, TimeGrid};
use crate::numeric::{covariance, derive_seed, mean_var};
use crate::stochastic::{sample_noise, stochastic_convolution_spectral};
use crate::tent::{ConeAverages, TentParams};

use super::families::Family;
use super::setup::{GridDescriptor, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    pub trials: usize,
    pub lhs_moment: f64,
    pub rhs_moment: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub grid: GridDescriptor,
    pub d_h: usize,
    pub coefficients: String,
    pub family: String,
    pub seed: u64,
}

/// Ratio of `p`-th moment means with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub stderr: f64,
}

/// `(mean lhs_i^p)^{1/p} / (mean rhs_i^p)^{1/p}` over paired trials.
pub fn moment_ratio(lhs: &[f64], rhs: &[f64], p: f64) -> Result<MomentRatio> {
    if lhs.len() != rhs.len() || lhs.is_empty() {
        return Err(invalid("trials", "need at least one paired trial"));
    }
    let x: Vec<f64> = lhs.iter().map(|v| v.powf(p)).collect();
    let y: Vec<f64> = rhs.iter().map(|v| v.powf(p)).collect();
    let (mx, vx) = mean_var(&x);
    let (my, vy) = mean_var(&y);
    if !(my > 0.0) {
        return Err(LabError::Degenerate(
            "right-hand side vanishes: the family produced g = 0".into(),
        ));
    }
    let lhs_m = mx.powf(1.0 / p);
    let rhs_m = my.powf(1.0 / p);
    let ratio = lhs_m / rhs_m;
    let stderr = if mx > 0.0 {
        let n = x.len() as f64;
        let cxy = covariance(&x, &y);
        let var_log = vx / (n * mx * mx) + vy / (n * my * my) - 2.0 * cxy / (n * mx * my);
        ratio / p * var_log.max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(MomentRatio {
        lhs: lhs_m,
        rhs: rhs_m,
        ratio,
        stderr,
    })
}

/// Sampled `G S⋄g` and `g` on the tent-norm nodes for one trial.
pub(crate) fn trial_fields(
    setup: &Setup,
    family: &Family,
    seed: u64,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let noise = sample_noise(&setup.noise.with_seed(seed))?;
    let g = family.realize(setup, &noise)?;
    let series = stochastic_convolution_spectral(&setup.op, &g, &noise, setup.times.nodes())?;
    let grad = series.gradients(&setup.op, &setup.times)?;
    Ok((grad, g.sample_on(&setup.times)))
}

pub(crate) fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    Ok(())
}

/// Runs `f` on every trial seed in parallel and returns results in trial order.
pub(crate) fn per_trial<T: Send>(
    trials: usize,
    seed: u64,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..trials)
        .into_par_iter()
        .map(|i| f(derive_seed(seed, i as u64)))
        .collect()
}

/// Estimates the conical ratio for several parameter triples from one set
/// of trials. Cone averages are shared across `(p, β)` with equal `α`.
pub fn conical_ratios(
    setup: &Setup,
    params: &[TentParams],
    family: &Family,
    trials: usize,
    seed: u64,
) -> Result<Vec<RegularityReport>> {
    check_trials(trials)?;
    for prm in params {
        prm.validate()?;
        if !(prm.beta > 0.0) {
            return Err(invalid("beta", format!("stochastic ratio needs β > 0, got {}", prm.beta)));
        }
    }
    let mut alphas: Vec<f64> = params.iter().map(|p| p.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let grids: Vec<TimeGrid> = params.iter().map(|p| setup.times.with_beta(p.beta)).collect();

    // [trial][param] -> (lhs, rhs)
    let norms = per_trial(trials, seed, |s| {
        let (grad, gs) = trial_fields(setup, family, s)?;
        let cones: Vec<(ConeAverages, ConeAverages)> = alphas
            .iter()
            .map(|&a| (ConeAverages::of(&grad, a), ConeAverages::of(&gs, a)))
            .collect();
        params
            .iter()
            .zip(&grids)
            .map(|(prm, grid)| {
                let i = alphas.iter().position(|&a| a == prm.alpha).expect("alpha listed");
                Ok((cones[i].0.norm(grid, prm.p)?, cones[i].1.norm(grid, prm.p)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    params
        .iter()
        .enumerate()
        .map(|(j, prm)| {
            let lhs: Vec<f64> = norms.iter().map(|t| t[j].0).collect();
            let rhs: Vec<f64> = norms.iter().map(|t| t[j].1).collect();
            let m = moment_ratio(&lhs, &rhs, prm.p)?;
            Ok(RegularityReport {
                p: prm.p,
                beta: prm.beta,
                alpha: prm.alpha,
                trials,
                lhs_moment: m.lhs,
                rhs_moment: m.rhs,
                ratio: m.ratio,
                stderr: m.stderr,
                grid: setup.grid,
                d_h: setup.noise.d_h,
                coefficients: setup.coefficients.clone(),
                family: family.tag(),
                seed,
            })
        })
        .collect()
}

pub fn conical_ratio(
    setup: &Setup,
    params: TentParams,
    family: &Family,
    trials: usize,
    seed: u64,
) -> Result<RegularityReport> {
    Ok(conical_ratios(setup, &[params], family, trials, seed)?.remove(0))
}

/// Families probed by [`estimate_constant`].
pub fn shipped_families(setup: &Setup) -> Vec<Family> {
    let h = setup.torus().spacing();
    vec![
        Family::Eigenmode { index: 1 },
        Family::Adapted,
        Family::Singular { level: 1 },
        Family::Singular { level: 2 },
        Family::Atom {
            radius: (setup.torus().side() / 8.0).max(h),
            seed: 1,
        },
    ]
}

/// Lower estimate of the regularity constant: the largest conical ratio over
/// the shipped families.
pub fn estimate_constant(
    setup: &Setup,
    params: TentParams,
    trials: usize,
    seed: u64,
) -> Result<(f64, Vec<RegularityReport>)> {
    let reports = shipped_families(setup)
        .iter()
        .map(|f| conical_ratio(setup, params, f, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let k = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((k, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::CoefficientSource;
    use crate::lab::setup::GridSpec;

    fn small() -> Setup {
        Setup::build(&GridSpec::new(1, 16).with_nodes(24), &CoefficientSource::Identity, 1).unwrap()
    }

    #[test]
    fn zero_family_is_degenerate() {
        let s = small();
        let err = conical_ratio(&s, TentParams::new(2.0, 1.0, 1.0).unwrap(), &Family::Zero, 4, 1);
        assert!(matches!(err, Err(LabError::Degenerate(_))));
    }

    #[test]
    fn beta_zero_rejected() {
        let s = small();
        let prm = TentParams::new(2.0, 0.0, 1.0).unwrap();
        assert!(conical_ratio(&s, prm, &Family::Eigenmode { index: 1 }, 4, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let s = small();
        let prm = TentParams::new(1.5, 0.5, 1.0).unwrap();
        let a = conical_ratio(&s, prm, &Family::Adapted, 8, 7).unwrap();
        let b = conical_ratio(&s, prm, &Family::Adapted, 8, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.ratio.is_finite() && a.stderr >= 0.0);
    }

    #[test]
    fn moment_ratio_of_constant_trials_has_zero_error() {
        let m = moment_ratio(&[2.0; 5], &[1.0; 5], 3.0).unwrap();
        assert!((m.ratio - 2.0).abs() < 1e-15);
        assert_eq!(m.stderr, 0.0);
    }
}
