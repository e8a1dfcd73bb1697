//! Discretization bundle shared by every experiment.

use serde::{Deserialize, Serialize};

use crate::elliptic::{CoefficientSource, DiscreteOperator};
use crate::error::{invalid, Result};
use crate::lattice::{TimeGrid, Torus};
use crate::stochastic::NoiseConfig;

/// Lattice, time grid and stepping parameters.
///
/// `t_min` defaults to `h²` (parabolic resolution limit of the lattice),
/// `t_max` to `L²/4`, and the Itô step `dt` to `t_min / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub points: usize,
    #[serde(default = "one")]
    pub side: f64,
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub dt: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_nodes() -> usize {
    64
}

impl GridSpec {
    pub fn new(n: usize, points: usize) -> Self {
        Self {
            n,
            points,
            side: 1.0,
            t_min: None,
            t_max: None,
            nodes: default_nodes(),
            dt: None,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_t_min(mut self, t_min: f64) -> Self {
        self.t_min = Some(t_min);
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn resolved(&self) -> Result<GridDescriptor> {
        let torus = Torus::new(self.n, self.points, self.side)?;
        let h = torus.spacing();
        let t_min = self.t_min.unwrap_or(h * h);
        let t_max = self.t_max.unwrap_or(self.side * self.side / 4.0);
        let dt = self.dt.unwrap_or(t_min / 2.0);
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if dt > t_min * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!("Itô step {dt} must not exceed t_min = {t_min}"),
            ));
        }
        let steps = (t_max / dt - 1e-9).ceil() as usize;
        Ok(GridDescriptor {
            n: self.n,
            points: self.points,
            side: self.side,
            t_min,
            t_max,
            nodes: self.nodes,
            dt,
            steps,
        })
    }
}

/// Fully resolved grid parameters, recorded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub n: usize,
    pub points: usize,
    pub side: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nodes: usize,
    pub dt: f64,
    pub steps: usize,
}

/// Operator, tent-norm time grid and noise stepping for one experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub op: DiscreteOperator,
    /// Nodes shared by all tent norms; weights are recomputed per `β`.
    pub times: TimeGrid,
    /// Stepping and H-truncation; the seed is replaced per trial.
    pub noise: NoiseConfig,
    pub grid: GridDescriptor,
    pub coefficients: String,
}

impl Setup {
    pub fn build(spec: &GridSpec, coeffs: &CoefficientSource, d_h: usize) -> Result<Self> {
        let grid = spec.resolved()?;
        let torus = Torus::new(grid.n, grid.points, grid.side)?;
        let field = coeffs.build(&torus)?;
        let op = DiscreteOperator::assemble(torus, field)?;
        Self::from_operator(op, &grid, d_h, coeffs.tag())
    }

    pub fn from_operator(
        op: DiscreteOperator,
        grid: &GridDescriptor,
        d_h: usize,
        coefficients: String,
    ) -> Result<Self> {
        let times = TimeGrid::new(grid.t_min, grid.t_max, grid.nodes, 0.0)?;
        let noise = NoiseConfig::new(d_h, grid.dt, grid.steps, 0)?;
        Ok(Self {
            op,
            times,
            noise,
            grid: *grid,
            coefficients,
        })
    }

    pub fn torus(&self) -> &Torus {
        self.op.torus()
    }

    /// Same operator and grids with a different H-truncation.
    pub fn with_d_h(&self, d_h: usize) -> Result<Self> {
        let mut s = self.clone();
        s.noise = NoiseConfig::new(d_h, self.noise.dt, self.noise.steps, 0)?;
        Ok(s)
    }

    /// Same setup with the tent-norm time grid shifted to a new `t_min`.
    pub fn with_t_min(&self, t_min: f64) -> Result<Self> {
        let mut s = self.clone();
        s.times = TimeGrid::new(t_min, self.grid.t_max, self.grid.nodes, 0.0)?;
        s.grid.t_min = t_min;
        Ok(s)
    }
}
