//! Periodic spatial lattice, geometric time grid and space-time fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::numeric::pairwise_sum;

/// Uniform periodic lattice `(ℝ / Lℤ)^n` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    dim: usize,
    points: usize,
    side: f64,
}

impl Torus {
    pub fn new(dim: usize, points: usize, side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("n", "spatial dimension must be at least 1"));
        }
        if points < 2 {
            return Err(invalid("N", format!("need at least 2 points per axis, got {points}")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(invalid("L", format!("side length must be positive, got {side}")));
        }
        let sites = points
            .checked_pow(dim as u32)
            .ok_or_else(|| invalid("N", "site count overflows"))?;
        if sites > 1 << 16 {
            return Err(invalid("N", format!("{sites} sites exceeds the desk-scale limit 65536")));
        }
        Ok(Self { dim, points, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Lattice spacing `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.side / self.points as f64
    }

    /// Volume of one lattice cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn num_sites(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Multi-index of a site (axis 0 varies slowest).
    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        let mut rem = site;
        for axis in (0..self.dim).rev() {
            c[axis] = rem % self.points;
            rem /= self.points;
        }
        c
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.points + (c % self.points))
    }

    /// Physical position of a site in `[0, L)^n`.
    pub fn position(&self, site: usize) -> Vec<f64> {
        let h = self.spacing();
        self.coords(site).into_iter().map(|c| c as f64 * h).collect()
    }

    /// Neighbouring site after moving `delta` lattice steps along `axis`.
    pub fn shift(&self, site: usize, axis: usize, delta: isize) -> usize {
        let stride = self.points.pow((self.dim - 1 - axis) as u32);
        let c = (site / stride) % self.points;
        let n = self.points as isize;
        let shifted = ((c as isize + delta).rem_euclid(n)) as usize;
        site - c * stride + shifted * stride
    }

    /// Translate every site by the same lattice vector.
    pub fn translate(&self, site: usize, by: &[isize]) -> usize {
        by.iter()
            .enumerate()
            .fold(site, |s, (axis, &d)| self.shift(s, axis, d))
    }

    fn axis_gap(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.points - d)
    }

    /// Periodic Euclidean distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let h = self.spacing();
        ca.iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let g = self.axis_gap(x, y) as f64 * h;
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Offsets (as site-index displacements from site 0) of the open ball of
    /// radius `r`, i.e. all sites `y` with `d(0, y) < r`.
    pub fn ball_offsets(&self, r: f64) -> Vec<usize> {
        (0..self.num_sites())
            .filter(|&y| self.distance(0, y) < r)
            .collect()
    }

    /// Set of sites in the open ball `B(x, r)`.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        let cx = self.coords(x);
        self.ball_offsets(r)
            .into_iter()
            .map(|off| {
                let co = self.coords(off);
                let moved: Vec<usize> = cx.iter().zip(&co).map(|(a, b)| a + b).collect();
                self.site(&moved)
            })
            .collect()
    }
}

/// Average of `f` over the periodic ball `B(x, r)` with respect to the
/// discrete (counting) measure of the same site set.
pub fn ball_average(torus: &Torus, f: &[f64], x: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid("r", format!("ball radius must be positive, got {r}")));
    }
    if f.len() != torus.num_sites() {
        return Err(LabError::GridMismatch(format!(
            "snapshot has {} values, torus has {} sites",
            f.len(),
            torus.num_sites()
        )));
    }
    let sites = torus.ball(x, r);
    Ok(sites.iter().map(|&y| f[y]).sum::<f64>() / sites.len() as f64)
}

/// Ball averages of `f` at every site for a common radius `r`.
///
/// On the torus the ball is translation invariant, so one stencil serves all
/// centres. In one dimension the ball is a cyclic window and the averages come
/// from prefix sums.
pub fn ball_averages(torus: &Torus, f: &[f64], r: f64) -> Vec<f64> {
    debug_assert_eq!(f.len(), torus.num_sites());
    let n = torus.points();
    if torus.dim() == 1 {
        let h = torus.spacing();
        // largest m with m*h < r
        let mut m = (r / h).ceil() as usize;
        while m > 0 && m as f64 * h >= r {
            m -= 1;
        }
        if 2 * m + 1 >= n {
            let mean = f.iter().sum::<f64>() / n as f64;
            return vec![mean; n];
        }
        let mut prefix = Vec::with_capacity(3 * n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..3 * n {
            acc += f[i % n];
            prefix.push(acc);
        }
        let width = (2 * m + 1) as f64;
        return (0..n)
            .map(|x| {
                let lo = x + n - m;
                let hi = x + n + m + 1;
                (prefix[hi] - prefix[lo]) / width
            })
            .collect();
    }
    let offsets: Vec<Vec<usize>> = torus
        .ball_offsets(r)
        .into_iter()
        .map(|o| torus.coords(o))
        .collect();
    let count = offsets.len() as f64;
    (0..torus.num_sites())
        .map(|x| {
            let cx = torus.coords(x);
            let mut moved = vec![0; torus.dim()];
            offsets
                .iter()
                .map(|o| {
                    for (m, (a, b)) in moved.iter_mut().zip(cx.iter().zip(o)) {
                        *m = a + b;
                    }
                    f[torus.site(&moved)]
                })
                .sum::<f64>()
                / count
        })
        .collect()
}

/// Geometrically spaced time nodes with quadrature weights for `∫ f(t) dt / t^β`.
///
/// Node `k` owns the log-cell bounded by the geometric midpoints with its
/// neighbours (clipped to `[t_min, t_max]`); its weight is the exact integral
/// of `t^{-β}` over that cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    beta: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn power_integral(a: f64, b: f64, beta: f64) -> f64 {
    if (1.0 - beta).abs() < 1e-12 {
        (b / a).ln()
    } else {
        let e = 1.0 - beta;
        (b.powf(e) - a.powf(e)) / e
    }
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize, beta: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min.is_finite()) {
            return Err(invalid(
                "t_min",
                format!("must be strictly positive (t^-beta is singular at 0), got {t_min}"),
            ));
        }
        if !(t_max > t_min && t_max.is_finite()) {
            return Err(invalid("t_max", format!("must exceed t_min = {t_min}, got {t_max}")));
        }
        if count < 2 {
            return Err(invalid("M", format!("need at least 2 time nodes, got {count}")));
        }
        if !beta.is_finite() {
            return Err(invalid("beta", "must be finite"));
        }
        let ratio = t_max / t_min;
        let last = (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count)
            .map(|k| t_min * ratio.powf(k as f64 / last))
            .collect();
        nodes[0] = t_min;
        nodes[count - 1] = t_max;
        let weights = Self::weights_for(&nodes, beta);
        Ok(Self {
            t_min,
            t_max,
            beta,
            nodes,
            weights,
        })
    }

    fn weights_for(nodes: &[f64], beta: f64) -> Vec<f64> {
        let m = nodes.len();
        let mut bounds = Vec::with_capacity(m + 1);
        bounds.push(nodes[0]);
        for k in 1..m {
            bounds.push((nodes[k - 1] * nodes[k]).sqrt());
        }
        bounds.push(nodes[m - 1]);
        bounds
            .windows(2)
            .map(|w| power_integral(w[0], w[1], beta))
            .collect()
    }

    /// Same nodes, weights recomputed for another `β`.
    pub fn with_beta(&self, beta: f64) -> Self {
        Self {
            beta,
            weights: Self::weights_for(&self.nodes, beta),
            ..self.clone()
        }
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted sum `Σ_k w_k f(t_k)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// `Σ_k w_k v_k` for values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let terms: Vec<f64> = values.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        pairwise_sum(&terms)
    }

    /// True when both grids share nodes (weights may differ by `β`).
    pub fn same_nodes(&self, other: &TimeGrid) -> bool {
        self.nodes == other.nodes
    }
}

/// Convenience constructor mirroring the operation name used in configs.
pub fn make_time_grid(t_min: f64, t_max: f64, count: usize, beta: f64) -> Result<TimeGrid> {
    TimeGrid::new(t_min, t_max, count, beta)
}

/// What a field stores at each space-time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Scalar,
    /// `ℝ^n`-valued, one component per spatial axis.
    Vector(usize),
    /// Values in a `d_H`-dimensional truncation of `H`.
    Hilbert(usize),
}

impl ValueKind {
    pub fn components(&self) -> usize {
        match *self {
            ValueKind::Scalar => 1,
            ValueKind::Vector(n) => n,
            ValueKind::Hilbert(d) => d,
        }
    }
}

/// Samples of a function on (time node) × (lattice site) × (component).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    torus: Torus,
    times: TimeGrid,
    kind: ValueKind,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(torus: Torus, times: TimeGrid, kind: ValueKind) -> Self {
        let len = times.len() * torus.num_sites() * kind.components();
        Self {
            torus,
            times,
            kind,
            data: vec![0.0; len],
        }
    }

    pub fn from_data(torus: Torus, times: TimeGrid, kind: ValueKind, data: Vec<f64>) -> Result<Self> {
        let expected = times.len() * torus.num_sites() * kind.components();
        if data.len() != expected {
            return Err(LabError::GridMismatch(format!(
                "field data has {} entries, expected {expected}",
                data.len()
            )));
        }
        if kind.components() == 0 {
            return Err(invalid("value_kind", "must have at least one component"));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid("data", format!("non-finite entry at index {bad}")));
        }
        Ok(Self {
            torus,
            times,
            kind,
            data,
        })
    }

    /// Build from a closure `(time index, t, site) -> component values`.
    pub fn from_fn(
        torus: Torus,
        times: TimeGrid,
        kind: ValueKind,
        mut f: impl FnMut(usize, f64, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let comps = kind.components();
        let mut data = Vec::with_capacity(times.len() * torus.num_sites() * comps);
        for (k, &t) in times.nodes().iter().enumerate() {
            for x in 0..torus.num_sites() {
                let v = f(k, t, x);
                if v.len() != comps {
                    return Err(LabError::GridMismatch(format!(
                        "closure returned {} components, expected {comps}",
                        v.len()
                    )));
                }
                data.extend(v);
            }
        }
        Self::from_data(torus, times, kind, data)
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn stride(&self) -> usize {
        self.torus.num_sites() * self.components()
    }

    /// All values at time node `k`, laid out as `[site][component]`.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        let s = self.stride();
        &self.data[k * s..(k + 1) * s]
    }

    pub fn snapshot_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn value(&self, k: usize, site: usize, component: usize) -> f64 {
        self.data[(k * self.torus.num_sites() + site) * self.components() + component]
    }

    /// Pointwise squared norm `|g(t_k, y)|²` over components, for every site.
    pub fn squared_magnitude(&self, k: usize) -> Vec<f64> {
        let c = self.components();
        self.snapshot(k)
            .chunks_exact(c)
            .map(|v| v.iter().map(|x| x * x).sum())
            .collect()
    }

    /// Weighted `L²(t^{-β}dt × dy)` norm on the grid's own weights.
    pub fn weighted_l2_norm(&self) -> f64 {
        let cell = self.torus.cell_volume();
        let total: f64 = self
            .times
            .weights()
            .iter()
            .enumerate()
            .map(|(k, w)| w * cell * self.snapshot(k).iter().map(|v| v * v).sum::<f64>())
            .sum();
        total.sqrt()
    }

    pub fn check_compatible(&self, other: &SpaceTimeField) -> Result<()> {
        if self.torus != other.torus {
            return Err(LabError::GridMismatch("fields live on different tori".into()));
        }
        if !self.times.same_nodes(&other.times) {
            return Err(LabError::GridMismatch("fields use different time nodes".into()));
        }
        if self.components() != other.components() {
            return Err(LabError::GridMismatch(format!(
                "component counts differ ({} vs {})",
                self.components(),
                other.components()
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }

    pub fn add(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> SpaceTimeField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Shift the field spatially by a lattice vector.
    pub fn translated(&self, by: &[isize]) -> SpaceTimeField {
        let mut out = self.clone();
        let c = self.components();
        let sites = self.torus.num_sites();
        for k in 0..self.times.len() {
            let src = self.snapshot(k);
            let dst = out.snapshot_mut(k);
            for x in 0..sites {
                let y = self.torus.translate(x, by);
                dst[y * c..(y + 1) * c].copy_from_slice(&src[x * c..(x + 1) * c]);
            }
        }
        out
    }

    /// Same samples reinterpreted on a grid with a different weight `β`.
    pub fn with_beta(&self, beta: f64) -> SpaceTimeField {
        SpaceTimeField {
            times: self.times.with_beta(beta),
            ..self.clone()
        }
    }

    /// Relabel the value kind without touching data (component count must match).
    pub fn relabeled(mut self, kind: ValueKind) -> Result<SpaceTimeField> {
        if kind.components() != self.components() {
            return Err(LabError::GridMismatch("relabel changes component count".into()));
        }
        self.kind = kind;
        Ok(self)
    }
}
