//! Left-point (Itô) stochastic convolution `S⋄g` and the deterministic
//! convolution `S∗g`, both evaluated in the eigenbasis of `A`.
//!
//! With `ξ_k = Σ_m ĝ_m(k·dt) ΔW_{k,m}` the partial sums
//! `Y_K = Σ_{k<K} e^{-(K-k)dt Λ} ξ_k` obey `Y_{K+1} = e^{-dt Λ}(Y_K + ξ_K)`,
//! and `S⋄g(t) = e^{-(t-K dt)Λ} Y_K` with `K = #{k : (k+1)dt ≤ t}`.

use crate::elliptic::DiscreteOperator;
use crate::error::{invalid, LabError, Result};
use crate::lattice::{SpaceTimeField, TimeGrid, ValueKind};

use super::noise::NoisePath;
use super::process::SimpleProcess;

/// Spectral coefficients of a convolution at a list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSeries {
    pub times: Vec<f64>,
    /// `[time][eigen index]`
    pub coeffs: Vec<Vec<f64>>,
}

impl SpectralSeries {
    fn to_field(
        &self,
        op: &DiscreteOperator,
        grid: &TimeGrid,
        kind: ValueKind,
        map: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<SpaceTimeField> {
        if grid.nodes() != self.times.as_slice() {
            return Err(LabError::GridMismatch("series times differ from grid nodes".into()));
        }
        let mut data = Vec::with_capacity(grid.len() * op.torus().num_sites() * kind.components());
        for c in &self.coeffs {
            data.extend(map(c));
        }
        SpaceTimeField::from_data(*op.torus(), grid.clone(), kind, data)
    }

    /// Physical values.
    pub fn values(&self, op: &DiscreteOperator, grid: &TimeGrid) -> Result<SpaceTimeField> {
        self.to_field(op, grid, ValueKind::Scalar, |c| op.from_spectral(c))
    }

    /// Gradients `G(·)`, vector valued.
    pub fn gradients(&self, op: &DiscreteOperator, grid: &TimeGrid) -> Result<SpaceTimeField> {
        let n = op.torus().dim();
        self.to_field(op, grid, ValueKind::Vector(n), |c| op.gradient_of_spectral(c))
    }

    /// `A^θ(·)`.
    pub fn frac_power(&self, op: &DiscreteOperator, grid: &TimeGrid, theta: f64) -> Result<SpaceTimeField> {
        let lam = op.eigenvalues();
        self.to_field(op, grid, ValueKind::Scalar, |c| {
            let scaled: Vec<f64> = c
                .iter()
                .zip(lam)
                .map(|(v, &l)| if l == 0.0 { if theta == 0.0 { *v } else { 0.0 } } else { v * l.powf(theta) })
                .collect();
            op.from_spectral(&scaled)
        })
    }
}

/// Number of steps `k` with `(k+1)·dt ≤ t`.
pub fn completed_steps(t: f64, dt: f64) -> usize {
    let x = t / dt;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.floor() };
    k.max(0.0) as usize
}

fn check_operator(op: &DiscreteOperator, g: &SimpleProcess) -> Result<()> {
    if op.torus() != g.torus() {
        return Err(LabError::GridMismatch(
            "integrand lives on a different torus than the operator".into(),
        ));
    }
    Ok(())
}

fn check_noise(g: &SimpleProcess, w: &NoisePath) -> Result<()> {
    let cfg = w.config();
    if (g.dt() - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(LabError::GridMismatch(format!(
            "integrand step {} differs from noise step {}",
            g.dt(),
            cfg.dt
        )));
    }
    if g.d_h() != cfg.d_h {
        return Err(LabError::GridMismatch(format!(
            "integrand has {} H-modes, noise has {}",
            g.d_h(),
            cfg.d_h
        )));
    }
    if g.steps() > cfg.steps {
        return Err(LabError::GridMismatch(format!(
            "integrand spans {} steps, noise only {}",
            g.steps(),
            cfg.steps
        )));
    }
    Ok(())
}

/// Generic left-point convolution with per-step, per-mode scalar weights
/// (`ΔW_{k,m}` for the Itô sum, `dt` for the Riemann sum).
pub fn convolve_spectral(
    op: &DiscreteOperator,
    g: &SimpleProcess,
    weight: impl Fn(usize, usize) -> f64,
    times: &[f64],
    horizon: f64,
) -> Result<SpectralSeries> {
    check_operator(op, g)?;
    for &t in times {
        if !(t >= 0.0) || t > horizon * (1.0 + 1e-9) {
            return Err(invalid(
                "eval_times",
                format!("time {t} outside the representable range [0, {horizon}]"),
            ));
        }
    }
    let lam = op.eigenvalues();
    let sites = lam.len();
    let dt = g.dt();
    let d_h = g.d_h();
    let decay: Vec<f64> = lam.iter().map(|l| (-dt * l).exp()).collect();

    // spectral coefficients per piece and mode: [piece][mode][eig]
    let spectral: Vec<Vec<Vec<f64>>> = g
        .pieces()
        .iter()
        .map(|p| {
            (0..d_h)
                .map(|m| op.to_spectral(&SimpleProcess::mode_snapshot(&p.field, d_h, m)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut out = vec![Vec::new(); times.len()];
    let mut y = vec![0.0; sites];
    let mut done = 0usize;
    let mut piece = 0usize;
    let pieces = g.pieces();
    for idx in order {
        let t = times[idx];
        let target = completed_steps(t, dt).min(g.steps());
        while done < target {
            while piece < pieces.len() && pieces[piece].end <= done {
                piece += 1;
            }
            let active = piece < pieces.len() && pieces[piece].start <= done;
            if active {
                for m in 0..d_h {
                    let w = weight(done, m);
                    if w != 0.0 {
                        for (yj, gj) in y.iter_mut().zip(&spectral[piece][m]) {
                            *yj += gj * w;
                        }
                    }
                }
            }
            for (yj, d) in y.iter_mut().zip(&decay) {
                *yj *= d;
            }
            done += 1;
        }
        let lag = (t - done as f64 * dt).max(0.0);
        out[idx] = y
            .iter()
            .zip(lam)
            .map(|(v, l)| if lag == 0.0 { *v } else { v * (-lag * l).exp() })
            .collect();
    }
    Ok(SpectralSeries {
        times: times.to_vec(),
        coeffs: out,
    })
}

/// Itô sum in spectral form at arbitrary times.
pub fn stochastic_convolution_spectral(
    op: &DiscreteOperator,
    g: &SimpleProcess,
    w: &NoisePath,
    times: &[f64],
) -> Result<SpectralSeries> {
    check_noise(g, w)?;
    convolve_spectral(op, g, |k, m| w.increment(k, m), times, w.config().horizon())
}

/// `S⋄g` on the nodes of `eval_times`.
pub fn stochastic_convolution(
    op: &DiscreteOperator,
    g: &SimpleProcess,
    w: &NoisePath,
    eval_times: &TimeGrid,
) -> Result<SpaceTimeField> {
    stochastic_convolution_spectral(op, g, w, eval_times.nodes())?.values(op, eval_times)
}

/// `G(S⋄g)` on the nodes of `eval_times` (vector valued).
pub fn grad_stochastic_convolution(
    op: &DiscreteOperator,
    g: &SimpleProcess,
    w: &NoisePath,
    eval_times: &TimeGrid,
) -> Result<SpaceTimeField> {
    stochastic_convolution_spectral(op, g, w, eval_times.nodes())?.gradients(op, eval_times)
}

/// Computes `G(S⋄g)` both ways (gradient of the sum, sum of gradients of
/// every term) and fails if they differ beyond `1e-10` relative.
pub fn grad_stochastic_convolution_checked(
    op: &DiscreteOperator,
    g: &SimpleProcess,
    w: &NoisePath,
    eval_times: &TimeGrid,
) -> Result<SpaceTimeField> {
    let fast = grad_stochastic_convolution(op, g, w, eval_times)?;
    let slow = reference::grad_stochastic_convolution_termwise(op, g, w, eval_times)?;
    let scale = slow.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let diff = fast
        .data()
        .iter()
        .zip(slow.data())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if diff > 1e-10 * scale {
        return Err(LabError::Degenerate(format!(
            "gradient does not commute with the Itô sum: max deviation {diff:e} (scale {scale:e})"
        )));
    }
    Ok(fast)
}

/// Left-point Riemann sums `S∗g` and `AS∗g` for a deterministic scalar integrand.
#[derive(Debug, Clone)]
pub struct DeterministicConvolution {
    pub mild: SpaceTimeField,
    pub generator: SpaceTimeField,
}

pub fn deterministic_convolution(
    op: &DiscreteOperator,
    g: &SimpleProcess,
    eval_times: &TimeGrid,
) -> Result<DeterministicConvolution> {
    if g.d_h() != 1 {
        return Err(invalid("g", "deterministic convolution expects a scalar integrand (d_H = 1)"));
    }
    let dt = g.dt();
    let horizon = g.steps() as f64 * dt;
    let series = convolve_spectral(op, g, |_, _| dt, eval_times.nodes(), horizon)?;
    Ok(DeterministicConvolution {
        mild: series.values(op, eval_times)?,
        generator: series.frac_power(op, eval_times, 1.0)?,
    })
}

/// Direct term-by-term evaluations, independent of the spectral recursion.
pub mod reference {
    use super::*;

    fn terms(
        op: &DiscreteOperator,
        g: &SimpleProcess,
        w: &NoisePath,
        t: f64,
        mut visit: impl FnMut(Vec<f64>) -> Result<()>,
    ) -> Result<()> {
        let dt = g.dt();
        let d_h = g.d_h();
        for k in 0..g.steps() {
            if (k + 1) as f64 * dt > t * (1.0 + 1e-12) {
                break;
            }
            let Some(field) = g.field_at_step(k) else { continue };
            for m in 0..d_h {
                let mut snap = SimpleProcess::mode_snapshot(field, d_h, m);
                let dw = w.increment(k, m);
                snap.iter_mut().for_each(|v| *v *= dw);
                visit(op.semigroup_apply(t - k as f64 * dt, &snap)?)?;
            }
        }
        Ok(())
    }

    /// `Σ_k Σ_m S(t − k dt) g_m(k dt) ΔW_{k,m}` term by term.
    pub fn stochastic_convolution_termwise(
        op: &DiscreteOperator,
        g: &SimpleProcess,
        w: &NoisePath,
        eval_times: &TimeGrid,
    ) -> Result<SpaceTimeField> {
        check_noise(g, w)?;
        let sites = op.torus().num_sites();
        let mut data = Vec::with_capacity(eval_times.len() * sites);
        for &t in eval_times.nodes() {
            let mut acc = vec![0.0; sites];
            terms(op, g, w, t, |v| {
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
                Ok(())
            })?;
            data.extend(acc);
        }
        SpaceTimeField::from_data(*op.torus(), eval_times.clone(), ValueKind::Scalar, data)
    }

    /// `Σ_k Σ_m G S(t − k dt) g_m(k dt) ΔW_{k,m}` term by term.
    pub fn grad_stochastic_convolution_termwise(
        op: &DiscreteOperator,
        g: &SimpleProcess,
        w: &NoisePath,
        eval_times: &TimeGrid,
    ) -> Result<SpaceTimeField> {
        check_noise(g, w)?;
        let n = op.torus().dim();
        let len = op.torus().num_sites() * n;
        let mut data = Vec::with_capacity(eval_times.len() * len);
        for &t in eval_times.nodes() {
            let mut acc = vec![0.0; len];
            terms(op, g, w, t, |v| {
                let gv = op.gradient(&v)?;
                acc.iter_mut().zip(&gv).for_each(|(a, b)| *a += b);
                Ok(())
            })?;
            data.extend(acc);
        }
        SpaceTimeField::from_data(*op.torus(), eval_times.clone(), ValueKind::Vector(n), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::CoefficientField;
    use crate::lattice::{make_time_grid, Torus};
    use crate::stochastic::noise::{sample_noise, NoiseConfig};
    use crate::stochastic::process::Piece;

    fn op(n: usize) -> DiscreteOperator {
        let t = Torus::new(1, n, 1.0).unwrap();
        let c = CoefficientField::checkerboard(&t, 4, 5, 0.5, 2.0).unwrap();
        DiscreteOperator::assemble(t, c).unwrap()
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let op = op(8);
        let w = sample_noise(&NoiseConfig::new(2, 0.01, 40, 3).unwrap()).unwrap();
        let g = SimpleProcess::zero(*op.torus(), 2, 0.01, 40).unwrap();
        let grid = make_time_grid(0.01, 0.4, 8, 0.5).unwrap();
        let u = stochastic_convolution(&op, &g, &w, &grid).unwrap();
        assert!(u.data().iter().all(|v| *v == 0.0));
        let du = grad_stochastic_convolution(&op, &g, &w, &grid).unwrap();
        assert!(du.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_step_single_mode() {
        let op = op(8);
        let dt = 0.01;
        let w = sample_noise(&NoiseConfig::new(1, dt, 1, 9).unwrap()).unwrap();
        let phi: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        let g = SimpleProcess::deterministic(
            *op.torus(),
            1,
            dt,
            1,
            vec![Piece { start: 0, end: 1, field: phi.clone() }],
        )
        .unwrap();
        let series = stochastic_convolution_spectral(&op, &g, &w, &[dt]).unwrap();
        let got = op.from_spectral(&series.coeffs[0]);
        let expect: Vec<f64> = op
            .semigroup_apply(dt, &phi)
            .unwrap()
            .into_iter()
            .map(|v| v * w.increment(0, 0))
            .collect();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
        let grad = op.gradient_of_spectral(&series.coeffs[0]);
        let expect_grad = op.gradient(&expect).unwrap();
        for (a, b) in grad.iter().zip(&expect_grad) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn recursion_matches_termwise() {
        let op = op(8);
        let dt = 0.002;
        let w = sample_noise(&NoiseConfig::new(2, dt, 200, 4).unwrap()).unwrap();
        let g = SimpleProcess::from_fn(*op.torus(), 2, dt, 200, 3, |t, x, m| {
            (1.0 + t) * ((x + m) as f64).sin()
        })
        .unwrap();
        let grid = make_time_grid(0.003, 0.4, 12, 0.5).unwrap();
        let fast = stochastic_convolution(&op, &g, &w, &grid).unwrap();
        let slow = reference::stochastic_convolution_termwise(&op, &g, &w, &grid).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        grad_stochastic_convolution_checked(&op, &g, &w, &grid).unwrap();
    }

    #[test]
    fn grid_mismatch_rejected() {
        let op = op(8);
        let w = sample_noise(&NoiseConfig::new(1, 0.01, 10, 4).unwrap()).unwrap();
        let g = SimpleProcess::zero(*op.torus(), 1, 0.02, 10).unwrap();
        let grid = make_time_grid(0.01, 0.1, 4, 0.5).unwrap();
        assert!(stochastic_convolution(&op, &g, &w, &grid).is_err());
        let g2 = SimpleProcess::zero(*op.torus(), 2, 0.01, 10).unwrap();
        assert!(stochastic_convolution(&op, &g2, &w, &grid).is_err());
        let late = make_time_grid(0.01, 0.5, 4, 0.5).unwrap();
        let g3 = SimpleProcess::zero(*op.torus(), 1, 0.01, 10).unwrap();
        assert!(stochastic_convolution(&op, &g3, &w, &late).is_err());
    }

    #[test]
    fn deterministic_eigenmode_closed_form() {
        let op = op(16);
        let k = 3;
        let v = op.eigenvector(k);
        let lam = op.eigenvalues()[k];
        let dt = 1e-4;
        let steps = 2000;
        let g = SimpleProcess::deterministic(
            *op.torus(),
            1,
            dt,
            steps,
            vec![Piece { start: 0, end: steps, field: v.clone() }],
        )
        .unwrap();
        let grid = make_time_grid(1e-3, 0.2, 10, 0.0).unwrap();
        let conv = deterministic_convolution(&op, &g, &grid).unwrap();
        for (i, &t) in grid.nodes().iter().enumerate() {
            let kk = completed_steps(t, dt);
            // discrete geometric sum Σ_{j<K} e^{-(t - j dt) λ} dt
            let disc: f64 = (0..kk).map(|j| (-(t - j as f64 * dt) * lam).exp() * dt).sum();
            let cont = (1.0 - (-t * lam).exp()) / lam;
            for x in 0..16 {
                let got = conv.mild.value(i, x, 0);
                assert!((got - disc * v[x]).abs() < 1e-10);
                assert!((got - cont * v[x]).abs() < 2.0 * lam * dt * cont.abs() + 1e-3 * dt);
                let gen = conv.generator.value(i, x, 0);
                assert!((gen - lam * disc * v[x]).abs() < 1e-8);
            }
        }
        let zero = SimpleProcess::zero(*op.torus(), 1, dt, steps).unwrap();
        let z = deterministic_convolution(&op, &zero, &grid).unwrap();
        assert!(z.generator.data().iter().all(|v| *v == 0.0));
    }
}
