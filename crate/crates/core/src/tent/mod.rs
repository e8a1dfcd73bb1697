//! Weighted parabolic tent-space norms.
//!
//! The discrete norm is the lattice/time-grid quadrature of
//!
//! ```text
//! ‖g‖ = ( ∫ ( ∫ avg_{B(x, α t^{1/2})} |g(t,y)|² dy dt/t^β )^{p/2} dx )^{1/p}
//! ```
//!
//! and is evaluated in two stages: per-node ball averages of `|g|²`
//! (independent of `p` and `β`), then the weighted time sum and the outer
//! `L^p` sum over cone vertices.

pub mod atoms;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::lattice::{ball_averages, SpaceTimeField, TimeGrid, Torus};
use crate::numeric::pairwise_sum;

pub use atoms::{atom_bound_constant, make_atom, Atom};

/// Exponent, weight and aperture of a tent norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TentParams {
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl TentParams {
    pub fn new(p: f64, beta: f64, alpha: f64) -> Result<Self> {
        let params = Self { p, beta, alpha };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid("p", format!("tent exponent must lie in [1, ∞), got {}", self.p)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("weight must be non-negative, got {}", self.beta)));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("aperture must be at least 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Ball averages `avg_{B(x, α t_k^{1/2})} |g(t_k, ·)|²` for every node and vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeAverages {
    torus: Torus,
    nodes: Vec<f64>,
    /// `[node][site]`
    values: Vec<f64>,
}

impl ConeAverages {
    pub fn of(g: &SpaceTimeField, alpha: f64) -> Self {
        let torus = *g.torus();
        let nodes = g.times().nodes().to_vec();
        let mut values = Vec::with_capacity(nodes.len() * torus.num_sites());
        for (k, &t) in nodes.iter().enumerate() {
            values.extend(ball_averages(&torus, &g.squared_magnitude(k), alpha * t.sqrt()));
        }
        Self {
            torus,
            nodes,
            values,
        }
    }

    /// Cone square function `Σ_k w_k avg_k(x)` at every vertex `x`.
    pub fn square_function(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        if grid.nodes() != self.nodes.as_slice() {
            return Err(LabError::GridMismatch(
                "time grid nodes differ from the field's nodes".into(),
            ));
        }
        let sites = self.torus.num_sites();
        let mut out = vec![0.0; sites];
        for (k, w) in grid.weights().iter().enumerate() {
            for (o, v) in out.iter_mut().zip(&self.values[k * sites..(k + 1) * sites]) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Tent norm for exponent `p` and weight `β` from cached averages.
    pub fn norm(&self, grid: &TimeGrid, p: f64) -> Result<f64> {
        let sq = self.square_function(grid)?;
        Ok(norm_from_square_function(&self.torus, &sq, p))
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }
}

/// `( Σ_x cell · s(x)^{p/2} )^{1/p}` with a fixed-order pairwise sum.
pub fn norm_from_square_function(torus: &Torus, sq: &[f64], p: f64) -> f64 {
    let terms: Vec<f64> = sq.iter().map(|s| s.max(0.0).powf(p / 2.0)).collect();
    (torus.cell_volume() * pairwise_sum(&terms)).powf(1.0 / p)
}

/// Tent norm of `g` (scalar, vector or H-valued; `|g|²` sums components).
pub fn tent_norm(g: &SpaceTimeField, params: &TentParams) -> Result<f64> {
    params.validate()?;
    let grid = g.times().with_beta(params.beta);
    ConeAverages::of(g, params.alpha).norm(&grid, params.p)
}

/// Tent norm with an explicitly supplied time grid, which must share the
/// field's nodes.
pub fn tent_norm_on(g: &SpaceTimeField, grid: &TimeGrid, params: &TentParams) -> Result<f64> {
    if !grid.same_nodes(g.times()) {
        return Err(LabError::GridMismatch(
            "tent norm grid does not match the field's time nodes".into(),
        ));
    }
    tent_norm(g, params)
}

/// `‖g‖_{α} / (α^{n/(p∧2)} ‖g‖_{1})`, the quantity bounded by the
/// change-of-aperture constant.
pub fn aperture_ratio(g: &SpaceTimeField, p: f64, beta: f64, alpha: f64) -> Result<f64> {
    let wide = tent_norm(g, &TentParams::new(p, beta, alpha)?)?;
    let base = tent_norm(g, &TentParams::new(p, beta, 1.0)?)?;
    if !(base > 0.0) {
        return Err(LabError::Degenerate(
            "aperture ratio undefined: tent norm at aperture 1 is zero".into(),
        ));
    }
    let n = g.torus().dim() as f64;
    Ok(wide / (alpha.powf(n / p.min(2.0)) * base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_time_grid, ValueKind};

    fn grid() -> (Torus, TimeGrid) {
        let t = Torus::new(1, 8, 1.0).unwrap();
        (t, make_time_grid(1.0 / 64.0, 0.5, 16, 0.5).unwrap())
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let (t, g) = grid();
        let f = SpaceTimeField::zeros(t, g, ValueKind::Scalar);
        assert_eq!(tent_norm(&f, &TentParams::new(1.5, 0.5, 1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(TentParams::new(0.5, 0.5, 1.0).is_err());
        assert!(TentParams::new(1.0, -0.1, 1.0).is_err());
        assert!(TentParams::new(1.0, 0.5, 0.9).is_err());
    }

    #[test]
    fn aperture_one_is_unity() {
        let (t, g) = grid();
        let f = SpaceTimeField::from_fn(t, g, ValueKind::Scalar, |k, _, x| {
            vec![((k + 2 * x) % 5) as f64]
        })
        .unwrap();
        assert!((aperture_ratio(&f, 1.0, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_field_aperture_ratio() {
        let (t, g) = grid();
        let f = SpaceTimeField::from_fn(t, g, ValueKind::Scalar, |_, _, _| vec![1.0]).unwrap();
        for p in [1.0, 3.0] {
            for alpha in [2.0, 4.0] {
                let r = aperture_ratio(&f, p, 0.5, alpha).unwrap();
                let expect = alpha.powf(-1.0 / f64::min(p, 2.0));
                assert!((r - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_aperture() {
        let (t, g) = grid();
        let f = SpaceTimeField::zeros(t, g, ValueKind::Scalar);
        assert!(matches!(
            aperture_ratio(&f, 1.0, 0.5, 2.0),
            Err(LabError::Degenerate(_))
        ));
    }

    #[test]
    fn mismatched_grid_rejected() {
        let (t, g) = grid();
        let f = SpaceTimeField::zeros(t, g, ValueKind::Scalar);
        let other = make_time_grid(1.0 / 64.0, 0.5, 17, 0.5).unwrap();
        assert!(tent_norm_on(&f, &other, &TentParams::new(1.0, 0.5, 1.0).unwrap()).is_err());
    }
}
