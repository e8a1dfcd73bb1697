//! Gradient formulation of the semilinear stochastic heat equation
//! `dU = -AU dt + b(∇U) dW`, solved pathwise for `V = ∇U` by Picard iteration
//! of `V = ∇S(·)u₀ + ∇S⋄B(V)`.

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::DiscreteOperator;
use crate::error::{invalid, LabError, Result};
use crate::lab::Setup;
use crate::lattice::{SpaceTimeField, TimeGrid, ValueKind};
use crate::numeric::{linear_fit, pairwise_sum};
use crate::stochastic::noise::standard_normal;
use crate::stochastic::{sample_noise, stochastic_convolution_spectral, NoisePath, Piece, SimpleProcess};
use crate::tent::{tent_norm_on, TentParams};

type Map = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Pointwise nonlinearity `b : ℝⁿ → ℝ` with declared Lipschitz and growth constants.
#[derive(Clone)]
pub struct NemytskiiSpec {
    dim: usize,
    map: Map,
    lipschitz: f64,
    growth: f64,
    tag: String,
}

impl fmt::Debug for NemytskiiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NemytskiiSpec")
            .field("dim", &self.dim)
            .field("tag", &self.tag)
            .field("lipschitz", &self.lipschitz)
            .field("growth", &self.growth)
            .finish()
    }
}

const CHECK_PAIRS: usize = 10_000;

impl NemytskiiSpec {
    /// `b(x) = λ (x·v)` with `v` normalised to unit length.
    pub fn linear(lambda: f64, direction: &[f64]) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(invalid("lambda", "must be finite"));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if direction.is_empty() || !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("direction", "need a non-zero finite vector"));
        }
        let v: Vec<f64> = direction.iter().map(|x| x / norm).collect();
        Ok(Self {
            dim: v.len(),
            map: Arc::new(move |x: &[f64]| lambda * x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()),
            lipschitz: lambda.abs(),
            growth: lambda.abs(),
            tag: format!("linear({lambda})"),
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            map: Arc::new(|_: &[f64]| 0.0),
            lipschitz: 0.0,
            growth: 0.0,
            tag: "zero".into(),
        }
    }

    /// User map with declared constants, validated on sampled pairs.
    pub fn custom(
        dim: usize,
        tag: impl Into<String>,
        lipschitz: f64,
        growth: f64,
        map: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let spec = Self {
            dim,
            map: Arc::new(map),
            lipschitz,
            growth,
            tag: tag.into(),
        };
        spec.check(0x5eed)?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.map)(x)
    }

    /// Checks `|b(x)-b(y)| ≤ L_b|x-y|` and `|b(x)| ≤ C_b|x|` on random pairs
    /// drawn over several orders of magnitude.
    pub fn check(&self, seed: u64) -> Result<()> {
        if !(self.lipschitz >= 0.0 && self.growth >= 0.0) {
            return Err(invalid("nemytskii", "constants must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slack = 1.0 + 1e-12;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..CHECK_PAIRS {
            let scale = 10f64.powf(-3.0 + 6.0 * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64);
            let x: Vec<f64> = (0..self.dim).map(|_| scale * standard_normal(&mut rng)).collect();
            let y: Vec<f64> = (0..self.dim).map(|_| scale * standard_normal(&mut rng)).collect();
            let (bx, by) = (self.eval(&x), self.eval(&y));
            let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            if (bx - by).abs() > self.lipschitz * norm(&diff) * slack + 1e-300 {
                return Err(invalid(
                    "nemytskii",
                    format!("{} violates the declared Lipschitz constant {}", self.tag, self.lipschitz),
                ));
            }
            if bx.abs() > self.growth * norm(&x) * slack + 1e-300 {
                return Err(invalid(
                    "nemytskii",
                    format!("{} violates the declared growth constant {}", self.tag, self.growth),
                ));
            }
        }
        Ok(())
    }

    fn apply_snapshot(&self, v: &[f64]) -> Vec<f64> {
        v.chunks(self.dim).map(|x| self.eval(x)).collect()
    }
}

/// `(B(V))(t, x) = b(V(t, x))`.
pub fn nemytskii_apply(spec: &NemytskiiSpec, v: &SpaceTimeField) -> Result<SpaceTimeField> {
    if v.components() != spec.dim {
        return Err(LabError::GridMismatch(format!(
            "field has {} components, b acts on ℝ^{}",
            v.components(),
            spec.dim
        )));
    }
    let data = spec.apply_snapshot(v.data());
    SpaceTimeField::from_data(*v.torus(), v.times().clone(), ValueKind::Scalar, data)
}

/// Whether `(1/p, β)` lies strictly inside the pentagon with vertices
/// `(0,0), (1,0), (1,1), (1/2,1), (0,β₀)`.
pub fn in_polytope(p: f64, beta: f64, beta0: f64) -> bool {
    let pt = (1.0 / p, beta);
    let verts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.5, 1.0), (0.0, beta0)];
    (0..verts.len()).all(|i| {
        let (a, b) = (verts[i], verts[(i + 1) % verts.len()]);
        (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0) > 0.0
    })
}

#[derive(Debug, Clone)]
pub struct InitialTerm {
    /// `G S(t) u₀` on the grid nodes.
    pub field: SpaceTimeField,
    pub norm: f64,
    pub in_polytope: bool,
}

/// Gradient of the free evolution of `u₀` and its tent norm.
///
/// Outside the admissible `(1/p, β)` region this is an error for constant
/// coefficients (where `β₀ = 1` is known) and a logged warning otherwise.
pub fn initial_term(
    op: &DiscreteOperator,
    u0: &[f64],
    grid: &TimeGrid,
    params: &TentParams,
    beta0: f64,
) -> Result<InitialTerm> {
    params.validate()?;
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("u0", "initial data must be finite"));
    }
    if !(beta0 > 0.0 && beta0 <= 1.0) {
        return Err(invalid("beta0", format!("must lie in (0, 1], got {beta0}")));
    }
    let inside = params.p > 1.0 && params.beta > 0.0 && params.beta < 1.0 && in_polytope(params.p, params.beta, beta0);
    if !inside {
        let msg = format!(
            "(1/p, β) = ({}, {}) is outside the admissible polytope for β₀ = {beta0}",
            1.0 / params.p,
            params.beta
        );
        if op.coeffs().is_constant() {
            return Err(invalid("params", msg));
        }
        log::warn!("{msg}; continuing because β₀ is not known for these coefficients");
    }
    let grid = grid.with_beta(params.beta);
    let field = free_gradient(op, u0, &grid)?;
    let norm = tent_norm_on(&field, &grid, params)?;
    Ok(InitialTerm {
        field,
        norm,
        in_polytope: inside,
    })
}

fn free_gradient_at(op: &DiscreteOperator, c0: &[f64], t: f64) -> Vec<f64> {
    let c: Vec<f64> = c0
        .iter()
        .zip(op.eigenvalues())
        .map(|(c, l)| c * (-t * l).exp())
        .collect();
    op.gradient_of_spectral(&c)
}

fn free_gradient(op: &DiscreteOperator, u0: &[f64], grid: &TimeGrid) -> Result<SpaceTimeField> {
    let c0 = op.to_spectral(u0)?;
    let n = op.torus().dim();
    let mut data = Vec::with_capacity(grid.len() * u0.len() * n);
    for &t in grid.nodes() {
        data.extend(free_gradient_at(op, &c0, t));
    }
    SpaceTimeField::from_data(*op.torus(), grid.clone(), ValueKind::Vector(n), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Relative tolerance on `‖V_{k+1} - V_k‖ / ‖V_1‖`.
    pub tol: f64,
    /// Assumed elliptic-regularity exponent for the admissibility gate.
    pub beta0: f64,
    /// Prior estimate of `K_{p,β}` used only to report `K·L_b`.
    pub contraction_constant: Option<f64>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-6,
            beta0: 1.0,
            contraction_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub seed: u64,
    pub iterations: usize,
    /// `‖V_{k+1} - V_k‖` for each applied map.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    /// `‖V - F(V)‖ / ‖V‖` at the returned iterate.
    pub relative_residual: f64,
    pub initial_norm: f64,
    pub solution_norm: f64,
    pub k_times_lb: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// `V` on the tent-norm nodes.
    pub v: SpaceTimeField,
    pub report: PicardReport,
}

/// Iterate kept on the left endpoints of the Itô steps (for the next
/// integrand) and on the tent-norm nodes (for measurement).
struct Iterate {
    steps: Vec<Vec<f64>>,
    nodes: SpaceTimeField,
}

struct FixedPointMap<'a> {
    op: &'a DiscreteOperator,
    spec: &'a NemytskiiSpec,
    noise: &'a NoisePath,
    grid: &'a TimeGrid,
    free: Iterate,
    eval_times: Vec<f64>,
}

impl FixedPointMap<'_> {
    /// `F(V) = ∇S(·)u₀ + ∇S⋄B(V)`. The integrand on step `j` is `b(V(j·dt))`,
    /// which only depends on increments before step `j`.
    fn apply(&self, v: &Iterate) -> Result<Iterate> {
        let cfg = self.noise.config();
        let torus = *self.op.torus();
        let pieces: Vec<Piece> = v
            .steps
            .iter()
            .enumerate()
            .filter_map(|(j, vs)| {
                let field = self.spec.apply_snapshot(vs);
                field.iter().any(|x| *x != 0.0).then_some(Piece {
                    start: j,
                    end: j + 1,
                    field,
                })
            })
            .collect();
        let g = SimpleProcess::from_pieces_trusted(torus, 1, cfg.dt, cfg.steps, pieces);
        let series = stochastic_convolution_spectral(self.op, &g, self.noise, &self.eval_times)?;
        let grads: Vec<Vec<f64>> = series.coeffs.iter().map(|c| self.op.gradient_of_spectral(c)).collect();
        let (on_steps, on_nodes) = grads.split_at(cfg.steps);
        let steps = on_steps
            .iter()
            .zip(&self.free.steps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let mut data = Vec::with_capacity(self.free.nodes.data().len());
        for (k, gk) in on_nodes.iter().enumerate() {
            data.extend(gk.iter().zip(self.free.nodes.snapshot(k)).map(|(x, y)| x + y));
        }
        let nodes = SpaceTimeField::from_data(torus, self.grid.clone(), self.free.nodes.kind(), data)?;
        Ok(Iterate { steps, nodes })
    }
}

/// Pathwise Picard iteration at a fixed noise seed, starting from the free term.
pub fn picard_solve(
    setup: &Setup,
    spec: &NemytskiiSpec,
    u0: &[f64],
    params: &TentParams,
    seed: u64,
    options: &PicardOptions,
) -> Result<PicardSolution> {
    let op = &setup.op;
    let n = op.torus().dim();
    if spec.dim() != n {
        return Err(LabError::GridMismatch(format!("b acts on ℝ^{}, gradients live in ℝ^{n}", spec.dim())));
    }
    if setup.noise.d_h != 1 {
        return Err(invalid("d_H", "the nonlinear problem is driven by a scalar Brownian motion"));
    }
    if options.max_iter == 0 || !(options.tol > 0.0) {
        return Err(invalid("picard", "need max_iter ≥ 1 and tol > 0"));
    }
    let init = initial_term(op, u0, &setup.times, params, options.beta0)?;
    let k_times_lb = options.contraction_constant.map(|k| k * spec.lipschitz());
    if let Some(kl) = k_times_lb {
        if kl >= 1.0 {
            log::warn!("estimated K·L_b = {kl:.3} ≥ 1; the iteration may not contract");
        }
    }

    let grid = setup.times.with_beta(params.beta);
    let noise = sample_noise(&setup.noise.with_seed(seed))?;
    let dt = setup.noise.dt;
    let steps = setup.noise.steps;
    let c0 = op.to_spectral(u0)?;
    let free = Iterate {
        steps: (0..steps).map(|j| free_gradient_at(op, &c0, j as f64 * dt)).collect(),
        nodes: init.field.clone(),
    };
    let mut eval_times: Vec<f64> = (0..steps).map(|j| j as f64 * dt).collect();
    eval_times.extend_from_slice(grid.nodes());
    let map = FixedPointMap {
        op,
        spec,
        noise: &noise,
        grid: &grid,
        free,
        eval_times,
    };
    let norm = |f: &SpaceTimeField| tent_norm_on(f, &grid, params);

    let mut current = Iterate {
        steps: map.free.steps.clone(),
        nodes: map.free.nodes.clone(),
    };
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut scale = None;
    let mut streak = 0;
    loop {
        if increments.len() == options.max_iter {
            let last = increments.last().copied().unwrap_or(f64::NAN) / scale.unwrap_or(1.0);
            return Err(LabError::MaxIterations {
                max_iter: options.max_iter,
                last,
            });
        }
        let next = map.apply(&current)?;
        let inc = norm(&next.nodes.sub(&current.nodes)?)?;
        let reference = *scale.get_or_insert(norm(&next.nodes)?);
        if let Some(&prev) = increments.last() {
            let ratio = if prev > 0.0 { inc / prev } else { 0.0 };
            ratios.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(LabError::NonContraction {
                    ratio,
                    iteration: increments.len() + 1,
                });
            }
        }
        increments.push(inc);
        current = next;
        if inc == 0.0 || inc < options.tol * reference {
            break;
        }
    }

    let solution_norm = norm(&current.nodes)?;
    let residual = if increments.last() == Some(&0.0) {
        0.0
    } else {
        norm(&map.apply(&current)?.nodes.sub(&current.nodes)?)?
    };
    let relative_residual = if solution_norm > 0.0 { residual / solution_norm } else { residual };
    Ok(PicardSolution {
        v: current.nodes,
        report: PicardReport {
            seed,
            iterations: increments.len(),
            increments,
            ratios,
            relative_residual,
            initial_norm: init.norm,
            solution_norm,
            k_times_lb,
        },
    })
}

/// Per-seed solves with the increments aggregated across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardEnsemble {
    pub reports: Vec<PicardReport>,
    /// `(mean_s inc_{k,s}^p)^{1/p}` over the iterations every seed reached.
    pub increment_moments: Vec<f64>,
    /// Geometric decay rate of `increment_moments` from iteration 3 on.
    pub rate: f64,
}

/// First iteration (0-based index into the increments) used for the rate fit.
pub const RATE_FROM: usize = 3;

/// `exp` of the least-squares slope of `ln inc_k` against `k` for `k ≥ from`.
pub fn geometric_rate(increments: &[f64], from: usize) -> f64 {
    let pts: Vec<(f64, f64)> = increments
        .iter()
        .enumerate()
        .skip(from)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linear_fit(&x, &y).slope.exp()
}

/// Solves on every seed concurrently; results keep seed order.
pub fn picard_ensemble(
    setup: &Setup,
    spec: &NemytskiiSpec,
    u0: &[f64],
    params: &TentParams,
    seeds: &[u64],
    options: &PicardOptions,
) -> Result<PicardEnsemble> {
    if seeds.is_empty() {
        return Err(invalid("seeds", "need at least one seed"));
    }
    let reports: Vec<PicardReport> = seeds
        .par_iter()
        .map(|&s| picard_solve(setup, spec, u0, params, s, options).map(|sol| sol.report))
        .collect::<Result<_>>()?;
    let depth = reports.iter().map(|r| r.increments.len()).min().unwrap_or(0);
    let p = params.p;
    let increment_moments: Vec<f64> = (0..depth)
        .map(|k| {
            let pw: Vec<f64> = reports.iter().map(|r| r.increments[k].powf(p)).collect();
            (pairwise_sum(&pw) / pw.len() as f64).powf(1.0 / p)
        })
        .collect();
    let rate = geometric_rate(&increment_moments, RATE_FROM);
    Ok(PicardEnsemble {
        reports,
        increment_moments,
        rate,
    })
}
