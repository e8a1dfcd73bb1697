//! Atoms: fields supported in a parabolic box `(0, r²] × B(x₀, r)` with
//! weighted `L²` norm `r^{-n/2}`.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::{invalid, LabError, Result};
use crate::lattice::{SpaceTimeField, TimeGrid, Torus, ValueKind};
use crate::stochastic::noise::standard_normal;

use super::{tent_norm, TentParams};

#[derive(Debug, Clone)]
pub struct Atom {
    pub field: SpaceTimeField,
    pub r: f64,
    pub x0: usize,
}

/// Time nodes inside `(0, r²]`; the top node is kept when it sits on `r²`
/// up to rounding.
fn in_time_support(t: f64, r: f64) -> bool {
    t <= r * r * (1.0 + 1e-12)
}

impl Atom {
    /// Verify support and normalisation.
    pub fn check(&self) -> Result<()> {
        let torus = self.field.torus();
        for (k, &t) in self.field.times().nodes().iter().enumerate() {
            for y in 0..torus.num_sites() {
                let inside = in_time_support(t, self.r) && torus.distance(self.x0, y) < self.r;
                if !inside && (0..self.field.components()).any(|c| self.field.value(k, y, c) != 0.0) {
                    return Err(LabError::Degenerate(format!(
                        "atom has mass outside its box at node {k}, site {y}"
                    )));
                }
            }
        }
        let bound = self.r.powf(-(torus.dim() as f64) / 2.0);
        let norm = self.field.weighted_l2_norm();
        if norm > bound * (1.0 + 1e-10) {
            return Err(LabError::Degenerate(format!(
                "atom norm {norm} exceeds r^(-n/2) = {bound}"
            )));
        }
        Ok(())
    }
}

/// Random atom at `x0` with radius `r`, normalised to `‖a‖_{L²(t^{-β}dt×dy)} = r^{-n/2}`
/// using the weights of `times`.
pub fn make_atom(
    torus: &Torus,
    times: &TimeGrid,
    r: f64,
    x0: usize,
    seed: u64,
    d_h: usize,
) -> Result<Atom> {
    if r < torus.spacing() * (1.0 - 1e-12) {
        return Err(invalid(
            "r",
            format!("atom radius {r} below lattice spacing {}", torus.spacing()),
        ));
    }
    if r * r < times.t_min() * (1.0 - 1e-12) {
        return Err(invalid(
            "r",
            format!("r² = {} below t_min = {}", r * r, times.t_min()),
        ));
    }
    if x0 >= torus.num_sites() {
        return Err(invalid("x0", format!("site {x0} outside the torus")));
    }
    if d_h == 0 {
        return Err(invalid("d_H", "need at least one H-mode"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = if d_h == 1 {
        ValueKind::Scalar
    } else {
        ValueKind::Hilbert(d_h)
    };
    let raw = SpaceTimeField::from_fn(*torus, times.clone(), kind, |_, t, y| {
        if in_time_support(t, r) && torus.distance(x0, y) < r {
            (0..d_h).map(|_| standard_normal(&mut rng)).collect()
        } else {
            vec![0.0; d_h]
        }
    })?;
    let norm = raw.weighted_l2_norm();
    if !(norm > 0.0) {
        return Err(LabError::Degenerate("atom support contains no grid point".into()));
    }
    let target = r.powf(-(torus.dim() as f64) / 2.0);
    Ok(Atom {
        field: raw.scaled(target / norm),
        r,
        x0,
    })
}

/// `‖a‖_{T^{p}} / (r^{n(1/p-1/2)} ‖a‖_{L²})`: the constant in the support bound.
pub fn atom_bound_constant(field: &SpaceTimeField, p: f64, beta: f64, r: f64) -> Result<f64> {
    let weighted = field.with_beta(beta);
    let l2 = weighted.weighted_l2_norm();
    if !(l2 > 0.0) {
        return Err(LabError::Degenerate("zero field has no bound constant".into()));
    }
    let n = field.torus().dim() as f64;
    let t = tent_norm(&weighted, &TentParams::new(p, beta, 1.0)?)?;
    Ok(t / (r.powf(n * (1.0 / p - 0.5)) * l2))
}
