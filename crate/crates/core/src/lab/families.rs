//! Integrand families `g` used by the ratio experiments.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::Torus;
use crate::stochastic::noise::standard_normal;
use crate::stochastic::{AdaptedBuilder, NoisePath, Piece, SimpleProcess};

use super::setup::Setup;

/// A generator of (possibly noise-dependent) simple processes.
///
/// Spatial and temporal scales are physical (fractions of `L` and `t_max`),
/// so one family describes the same continuum integrand at every `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Zero,
    /// `L²`-normalised eigenvector `k` of `A` in mode 0, active on `(0, t_max/2]`.
    Eigenmode { index: usize },
    /// Gaussian bumps whose amplitude is modulated by the Brownian path up to
    /// each piece's left endpoint.
    Adapted,
    /// Bump of width `ρ = τ^{1/2}` active on `(τ, 2τ]` with `τ = (L/8)² 2^{-level}`.
    /// Keeping away from `t = 0` makes the weighted norms finite for every `β`.
    Singular { level: usize },
    /// Random field supported in `(0, r²] × B(c, r)`, `c` the centre site.
    Atom { radius: f64, seed: u64 },
    /// Another family multiplied by a constant.
    Scaled { factor: f64, inner: Box<Family> },
}

impl Family {
    pub fn tag(&self) -> String {
        match self {
            Family::Zero => "zero".into(),
            Family::Eigenmode { index } => format!("eigenmode{index}"),
            Family::Adapted => "adapted".into(),
            Family::Singular { level } => format!("singular{level}"),
            Family::Atom { radius, seed } => format!("atom_r{radius}_s{seed}"),
            Family::Scaled { factor, inner } => format!("{}x{factor}", inner.tag()),
        }
    }

    /// True when the integrand does not depend on the noise path.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Family::Adapted => false,
            Family::Scaled { inner, .. } => inner.is_deterministic(),
            _ => true,
        }
    }

    /// Realize one integrand against a sampled path.
    pub fn realize(&self, setup: &Setup, noise: &NoisePath) -> Result<SimpleProcess> {
        let torus = *setup.torus();
        let cfg = noise.config();
        let (d_h, dt, steps) = (cfg.d_h, cfg.dt, cfg.steps);
        let t_max = setup.grid.t_max;
        let side = torus.side();
        match self {
            Family::Zero => SimpleProcess::zero(torus, d_h, dt, steps),
            Family::Eigenmode { index } => {
                if *index >= torus.num_sites() {
                    return Err(invalid("index", format!("eigenmode {index} out of range")));
                }
                let scale = torus.cell_volume().powf(-0.5);
                let v = setup.op.eigenvector(*index);
                let mut field = vec![0.0; torus.num_sites() * d_h];
                for (x, vx) in v.iter().enumerate() {
                    field[x * d_h] = vx * scale;
                }
                let end = steps_until(0.5 * t_max, dt, steps);
                SimpleProcess::deterministic(torus, d_h, dt, steps, vec![Piece { start: 0, end, field }])
            }
            Family::Adapted => {
                let piece_len = ((t_max / 128.0) / dt).round().max(1.0) as usize;
                let active = steps_until(0.5 * t_max, dt, steps);
                let sigma = side / 10.0;
                let centres: Vec<f64> = (0..d_h)
                    .map(|m| side * (0.25 + 0.5 * m as f64 / d_h as f64))
                    .collect();
                let profiles: Vec<Vec<f64>> = centres.iter().map(|&c| bump(&torus, c, sigma)).collect();
                let wave: Vec<f64> = (0..torus.num_sites())
                    .map(|x| (std::f64::consts::TAU * torus.position(x)[0] / side).cos())
                    .collect();
                let amp = 4.0 / t_max.sqrt();
                let norm = (d_h as f64).sqrt();
                let mut builder = AdaptedBuilder::new(torus, noise);
                let mut start = 0;
                while start < active {
                    let end = (start + piece_len).min(active);
                    builder = builder.piece(start, end, |past| {
                        let mut field = vec![0.0; torus.num_sites() * d_h];
                        for m in 0..d_h {
                            let mod_ = (amp * past.brownian(m)).tanh();
                            for x in 0..torus.num_sites() {
                                field[x * d_h + m] = profiles[m][x] * (1.0 + 0.5 * mod_ * wave[x]) / norm;
                            }
                        }
                        Ok(field)
                    })?;
                    start = end;
                }
                builder.build()
            }
            Family::Singular { level } => {
                let tau = (side / 8.0).powi(2) * 0.5f64.powi(*level as i32);
                let rho = tau.sqrt();
                let start = steps_until(tau, dt, steps);
                let end = steps_until(2.0 * tau, dt, steps).max(start + 1);
                if end > steps {
                    return Err(invalid("level", format!("singular level {level} lies beyond the horizon")));
                }
                let profile = bump(&torus, 0.5 * side, rho);
                let mut field = vec![0.0; torus.num_sites() * d_h];
                for (x, v) in profile.iter().enumerate() {
                    field[x * d_h] = *v;
                }
                SimpleProcess::deterministic(torus, d_h, dt, steps, vec![Piece { start, end, field }])
            }
            Family::Atom { radius, seed } => {
                let r = *radius;
                if r < torus.spacing() {
                    return Err(invalid("radius", format!("atom radius {r} below lattice spacing")));
                }
                let centre = centre_site(&torus);
                let support = steps_until(r * r, dt, steps).max(1);
                let blocks = 8.min(support);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut pieces = Vec::new();
                for b in 0..blocks {
                    let start = b * support / blocks;
                    let end = (b + 1) * support / blocks;
                    let mut field = vec![0.0; torus.num_sites() * d_h];
                    for x in 0..torus.num_sites() {
                        if torus.distance(centre, x) < r {
                            for m in 0..d_h {
                                field[x * d_h + m] = standard_normal(&mut rng);
                            }
                        }
                    }
                    pieces.push(Piece { start, end, field });
                }
                SimpleProcess::deterministic(torus, d_h, dt, steps, pieces)
            }
            Family::Scaled { factor, inner } => Ok(inner.realize(setup, noise)?.scaled(*factor)),
        }
    }
}

/// Number of whole steps covering `(0, t]`, capped at `steps`.
fn steps_until(t: f64, dt: f64, steps: usize) -> usize {
    ((t / dt).round() as usize).min(steps)
}

/// Site closest to the centre of the torus.
pub fn centre_site(torus: &Torus) -> usize {
    let c = vec![torus.points() / 2; torus.dim()];
    torus.site(&c)
}

/// Periodic Gaussian bump `exp(-|x - c|²/(2σ²))` centred at `(c, …, c)`.
pub fn bump(torus: &Torus, centre: f64, sigma: f64) -> Vec<f64> {
    let side = torus.side();
    (0..torus.num_sites())
        .map(|x| {
            let d2: f64 = torus
                .position(x)
                .iter()
                .map(|&p| {
                    let d = (p - centre).rem_euclid(side);
                    let d = d.min(side - d);
                    d * d
                })
                .sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}
