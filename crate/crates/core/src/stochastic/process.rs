//! Adapted simple processes on the uniform stepping grid.

use crate::error::{invalid, LabError, Result};
use crate::lattice::{SpaceTimeField, TimeGrid, Torus, ValueKind};

use super::noise::NoisePath;

/// Constant H-valued field on the step interval `(start·dt, end·dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub start: usize,
    pub end: usize,
    /// `[site][mode]`
    pub field: Vec<f64>,
}

/// Piecewise-constant H-valued process `g = Σ_ℓ 1_{(t_ℓ, t_{ℓ+1}]} φ_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleProcess {
    torus: Torus,
    d_h: usize,
    dt: f64,
    steps: usize,
    pieces: Vec<Piece>,
}

impl SimpleProcess {
    fn validated(torus: Torus, d_h: usize, dt: f64, steps: usize, pieces: Vec<Piece>) -> Result<Self> {
        if d_h == 0 {
            return Err(invalid("d_H", "need at least one H-mode"));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt", "step must be positive"));
        }
        let len = torus.num_sites() * d_h;
        let mut last_end = 0;
        for (i, p) in pieces.iter().enumerate() {
            if p.start >= p.end || p.end > steps {
                return Err(invalid(
                    "pieces",
                    format!("piece {i} has invalid interval [{}, {}) for {steps} steps", p.start, p.end),
                ));
            }
            if p.start < last_end {
                return Err(invalid("pieces", format!("piece {i} overlaps or is out of order")));
            }
            if p.field.len() != len {
                return Err(LabError::GridMismatch(format!(
                    "piece {i} field has {} values, expected {len}",
                    p.field.len()
                )));
            }
            if p.field.iter().any(|v| !v.is_finite()) {
                return Err(invalid("pieces", format!("piece {i} has non-finite values")));
            }
            last_end = p.end;
        }
        Ok(Self {
            torus,
            d_h,
            dt,
            steps,
            pieces,
        })
    }

    /// Process with explicit pieces. The fields must not depend on the noise
    /// path; use [`AdaptedBuilder`] for noise-dependent integrands.
    pub fn deterministic(torus: Torus, d_h: usize, dt: f64, steps: usize, pieces: Vec<Piece>) -> Result<Self> {
        Self::validated(torus, d_h, dt, steps, pieces)
    }

    /// Deterministic process with one piece per block of `piece_len` steps,
    /// valued `f(left endpoint time, site, mode)`.
    pub fn from_fn(
        torus: Torus,
        d_h: usize,
        dt: f64,
        steps: usize,
        piece_len: usize,
        f: impl Fn(f64, usize, usize) -> f64,
    ) -> Result<Self> {
        if piece_len == 0 {
            return Err(invalid("piece_len", "must be positive"));
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < steps {
            let end = (start + piece_len).min(steps);
            let t = start as f64 * dt;
            let mut field = Vec::with_capacity(torus.num_sites() * d_h);
            for x in 0..torus.num_sites() {
                for m in 0..d_h {
                    field.push(f(t, x, m));
                }
            }
            if field.iter().any(|v| *v != 0.0) {
                pieces.push(Piece { start, end, field });
            }
            start = end;
        }
        Self::validated(torus, d_h, dt, steps, pieces)
    }

    /// The zero process.
    pub fn zero(torus: Torus, d_h: usize, dt: f64, steps: usize) -> Result<Self> {
        Self::validated(torus, d_h, dt, steps, Vec::new())
    }

    pub(crate) fn from_pieces_trusted(
        torus: Torus,
        d_h: usize,
        dt: f64,
        steps: usize,
        pieces: Vec<Piece>,
    ) -> Self {
        debug_assert!(Self::validated(torus, d_h, dt, steps, pieces.clone()).is_ok());
        Self {
            torus,
            d_h,
            dt,
            steps,
            pieces,
        }
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn d_h(&self) -> usize {
        self.d_h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.field.iter().all(|v| *v == 0.0))
    }

    /// Field active on step `k`, i.e. on `(k·dt, (k+1)·dt]`.
    pub fn field_at_step(&self, k: usize) -> Option<&[f64]> {
        let idx = self.pieces.partition_point(|p| p.end <= k);
        self.pieces
            .get(idx)
            .filter(|p| p.start <= k && k < p.end)
            .map(|p| p.field.as_slice())
    }

    /// Mode `m` of a piece field as a spatial snapshot.
    pub fn mode_snapshot(field: &[f64], d_h: usize, m: usize) -> Vec<f64> {
        field.iter().skip(m).step_by(d_h).cloned().collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.field.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    /// `Σ_k Σ_m ‖g_m(k·dt)‖²_{L²} dt`.
    pub fn l2_energy(&self) -> f64 {
        let cell = self.torus.cell_volume();
        self.pieces
            .iter()
            .map(|p| (p.end - p.start) as f64 * self.dt * cell * p.field.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Samples on a time grid with the left-point convention: at time `t`
    /// the value is the piece covering step `⌈t/dt⌉ − 1`.
    pub fn sample_on(&self, times: &TimeGrid) -> SpaceTimeField {
        let kind = if self.d_h == 1 {
            ValueKind::Scalar
        } else {
            ValueKind::Hilbert(self.d_h)
        };
        let mut out = SpaceTimeField::zeros(self.torus, times.clone(), kind);
        for (k, &t) in times.nodes().iter().enumerate() {
            if let Some(step) = step_covering(t, self.dt) {
                if let Some(f) = self.field_at_step(step) {
                    out.snapshot_mut(k).copy_from_slice(f);
                }
            }
        }
        out
    }
}

/// Index of the step interval `(k·dt, (k+1)·dt]` containing `t`.
pub fn step_covering(t: f64, dt: f64) -> Option<usize> {
    if t <= 0.0 {
        return None;
    }
    let x = t / dt;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    Some(k as usize - 1)
}

/// Read-only view of increments strictly before a piece's start step.
pub struct PastIncrements<'a> {
    noise: &'a NoisePath,
    limit: usize,
}

impl PastIncrements<'_> {
    /// `ΔW_{step, mode}`; errors unless the increment is complete by the
    /// piece's left endpoint (`step < start`).
    pub fn get(&self, step: usize, mode: usize) -> Result<f64> {
        if step >= self.limit {
            return Err(LabError::NotAdapted {
                piece_start: self.limit,
                step,
            });
        }
        Ok(self.noise.increment(step, mode))
    }

    /// `W_m` at the piece's left endpoint.
    pub fn brownian(&self, mode: usize) -> f64 {
        self.noise.brownian(self.limit, mode)
    }

    pub fn start(&self) -> usize {
        self.limit
    }

    pub fn d_h(&self) -> usize {
        self.noise.config().d_h
    }
}

/// Builds adapted processes: each piece's field is computed from a view that
/// only exposes increments before the piece starts.
pub struct AdaptedBuilder<'a> {
    torus: Torus,
    noise: &'a NoisePath,
    pieces: Vec<Piece>,
}

impl<'a> AdaptedBuilder<'a> {
    pub fn new(torus: Torus, noise: &'a NoisePath) -> Self {
        Self {
            torus,
            noise,
            pieces: Vec::new(),
        }
    }

    pub fn piece(
        mut self,
        start: usize,
        end: usize,
        f: impl FnOnce(&PastIncrements<'_>) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        let view = PastIncrements {
            noise: self.noise,
            limit: start,
        };
        let field = f(&view)?;
        self.pieces.push(Piece { start, end, field });
        Ok(self)
    }

    pub fn build(self) -> Result<SimpleProcess> {
        let cfg = self.noise.config();
        SimpleProcess::validated(self.torus, cfg.d_h, cfg.dt, cfg.steps, self.pieces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::noise::{sample_noise, NoiseConfig};

    fn setup() -> (Torus, NoisePath) {
        let t = Torus::new(1, 4, 1.0).unwrap();
        let w = sample_noise(&NoiseConfig::new(1, 0.1, 10, 1).unwrap()).unwrap();
        (t, w)
    }

    #[test]
    fn builder_rejects_lookahead() {
        let (t, w) = setup();
        let err = AdaptedBuilder::new(t, &w)
            .piece(3, 4, |past| {
                let x = past.get(3, 0)?;
                Ok(vec![x; 4])
            })
            .err()
            .unwrap();
        assert!(matches!(err, LabError::NotAdapted { piece_start: 3, step: 3 }));
    }

    #[test]
    fn builder_allows_past() {
        let (t, w) = setup();
        let g = AdaptedBuilder::new(t, &w)
            .piece(3, 5, |past| Ok(vec![past.get(2, 0)? + past.brownian(0); 4]))
            .unwrap()
            .build()
            .unwrap();
        let expect = w.increment(2, 0) + w.brownian(3, 0);
        assert_eq!(g.field_at_step(4).unwrap()[0], expect);
        assert!(g.field_at_step(5).is_none());
        assert!(g.field_at_step(2).is_none());
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let t = Torus::new(1, 2, 1.0).unwrap();
        let pieces = vec![
            Piece { start: 0, end: 3, field: vec![1.0, 1.0] },
            Piece { start: 2, end: 4, field: vec![1.0, 1.0] },
        ];
        assert!(SimpleProcess::deterministic(t, 1, 0.1, 5, pieces).is_err());
    }

    #[test]
    fn left_point_sampling() {
        assert_eq!(step_covering(0.1, 0.1), Some(0));
        assert_eq!(step_covering(0.15, 0.1), Some(1));
        assert_eq!(step_covering(0.2, 0.1), Some(1));
        assert_eq!(step_covering(0.0, 0.1), None);
    }
}
