//! `L^q–L²` off-diagonal decay of `t^{1/2} G S(t)` between lattice boxes.

use serde::{Deserialize, Serialize};

use crate::elliptic::DiscreteOperator;
use crate::error::{invalid, LabError, Result};
use crate::lattice::Torus;
use crate::numeric::{linear_fit, LinearFit};

/// Cube of `width` sites per axis with lowest corner `corner`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub corner: Vec<usize>,
    pub width: usize,
}

impl LatticeBox {
    pub fn sites(&self, torus: &Torus) -> Vec<usize> {
        let n = torus.dim();
        let mut out = Vec::with_capacity(self.width.pow(n as u32));
        let mut idx = vec![0usize; n];
        loop {
            let c: Vec<usize> = self.corner.iter().zip(&idx).map(|(a, b)| a + b).collect();
            out.push(torus.site(&c));
            let mut axis = n;
            loop {
                if axis == 0 {
                    out.sort_unstable();
                    out.dedup();
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.width {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// Source box `F` and a family of target boxes `E` placed `gap` sites past
/// the end of `F` along axis 0, probed at each time in `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub source: LatticeBox,
    pub target_width: usize,
    pub gaps: Vec<usize>,
    pub times: Vec<f64>,
}

impl BoxGeometry {
    /// Two-site boxes, gaps of 3 to 9 sites and `t ∈ {4, 6, 8, 12, 16}·h²`.
    pub fn default_for(torus: &Torus) -> Self {
        let h2 = torus.spacing().powi(2);
        Self {
            source: LatticeBox {
                corner: vec![torus.points() / 8; torus.dim()],
                width: 2,
            },
            target_width: 2,
            gaps: vec![3, 5, 7, 9],
            times: [4.0, 6.0, 8.0, 12.0, 16.0].iter().map(|c| c * h2).collect(),
        }
    }

    pub fn target(&self, gap: usize) -> LatticeBox {
        let mut corner = self.source.corner.clone();
        corner[0] += self.source.width - 1 + gap;
        LatticeBox {
            corner,
            width: self.target_width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagSample {
    pub t: f64,
    pub distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagReport {
    pub q: f64,
    pub samples: Vec<OffDiagSample>,
    /// Fit of `ln ratio` against `d(E,F)²/t`.
    pub fit: LinearFit,
}

fn q_norm(torus: &Torus, f: &[f64], q: f64) -> f64 {
    let cell = torus.cell_volume();
    (cell * f.iter().map(|v| v.abs().powf(q)).sum::<f64>()).powf(1.0 / q)
}

fn set_distance(torus: &Torus, a: &[usize], b: &[usize]) -> f64 {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| torus.distance(x, y)))
        .fold(f64::INFINITY, f64::min)
}

/// `‖1_E t^{1/2} G S(t) f‖₂` with `E` given as a site list.
fn restricted_gradient_norm(op: &DiscreteOperator, t: f64, f: &[f64], e: &[usize]) -> Result<f64> {
    let n = op.torus().dim();
    let grad = op.gradient(&op.semigroup_apply(t, f)?)?;
    let sum: f64 = e
        .iter()
        .map(|&x| grad[x * n..(x + 1) * n].iter().map(|v| v * v).sum::<f64>())
        .sum();
    Ok((t * op.torus().cell_volume() * sum).sqrt())
}

pub fn offdiag_probe(
    op: &DiscreteOperator,
    q: f64,
    f: &[f64],
    geometry: &BoxGeometry,
) -> Result<OffDiagReport> {
    if q != 1.0 && q != 2.0 {
        return Err(invalid("q", format!("off-diagonal exponent must be 1 or 2, got {q}")));
    }
    let torus = op.torus();
    if f.len() != torus.num_sites() {
        return Err(LabError::GridMismatch("f does not match the torus".into()));
    }
    if geometry.source.corner.len() != torus.dim() {
        return Err(invalid("source", "box corner has the wrong dimension"));
    }
    let f_sites = geometry.source.sites(torus);
    let outside = (0..torus.num_sites()).any(|x| f[x] != 0.0 && f_sites.binary_search(&x).is_err());
    if outside {
        return Err(invalid("f", "f must be supported in the source box F"));
    }
    let f_norm = q_norm(torus, f, q);
    if !(f_norm > 0.0) {
        return Err(LabError::Degenerate("f vanishes on F".into()));
    }
    let pairs = geometry.gaps.len() * geometry.times.len();
    if pairs < 8 {
        return Err(invalid("geometry", format!("decay fit needs at least 8 (t, d) pairs, got {pairs}")));
    }
    let n = torus.dim() as f64;
    let mut samples = Vec::with_capacity(pairs);
    for &gap in &geometry.gaps {
        let e_sites = geometry.target(gap).sites(torus);
        if e_sites.iter().any(|x| f_sites.binary_search(x).is_ok()) {
            return Err(invalid(
                "geometry",
                format!("target box at gap {gap} overlaps the source box"),
            ));
        }
        let d = set_distance(torus, &e_sites, &f_sites);
        for &t in &geometry.times {
            if !(t > 0.0) {
                return Err(invalid("times", format!("probe times must be positive, got {t}")));
            }
            let num = restricted_gradient_norm(op, t, f, &e_sites)?;
            let ratio = num / (t.powf(-0.5 * n * (1.0 / q - 0.5)) * f_norm);
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(LabError::Degenerate(format!(
                    "off-diagonal ratio {ratio} at t = {t}, d = {d} is not a positive finite number"
                )));
            }
            samples.push(OffDiagSample { t, distance: d, ratio });
        }
    }
    let x: Vec<f64> = samples.iter().map(|s| s.distance * s.distance / s.t).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.ratio.ln()).collect();
    Ok(OffDiagReport {
        q,
        samples,
        fit: linear_fit(&x, &y),
    })
}

/// `sup_t ‖t^{1/2} G S(t) f‖₂ / ‖f‖₂`, the `E = F = torus` special case.
pub fn uniform_bound(op: &DiscreteOperator, f: &[f64], times: &[f64]) -> Result<f64> {
    let all: Vec<usize> = (0..op.torus().num_sites()).collect();
    let f_norm = op.l2_norm(f);
    if !(f_norm > 0.0) {
        return Err(LabError::Degenerate("f = 0".into()));
    }
    let mut sup = 0.0f64;
    for &t in times {
        sup = sup.max(restricted_gradient_norm(op, t, f, &all)? / f_norm);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::CoefficientField;

    fn identity(n: usize) -> DiscreteOperator {
        let t = Torus::new(1, n, 1.0).unwrap();
        DiscreteOperator::assemble(t, CoefficientField::identity(&t)).unwrap()
    }

    fn indicator(op: &DiscreteOperator, b: &LatticeBox) -> Vec<f64> {
        let mut f = vec![0.0; op.torus().num_sites()];
        for x in b.sites(op.torus()) {
            f[x] = 1.0;
        }
        f
    }

    #[test]
    fn box_sites_wrap() {
        let t = Torus::new(2, 4, 1.0).unwrap();
        let b = LatticeBox { corner: vec![3, 3], width: 2 };
        assert_eq!(b.sites(&t), vec![0, 3, 12, 15]);
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let op = identity(32);
        let mut g = BoxGeometry::default_for(op.torus());
        g.gaps = vec![0, 3];
        let f = indicator(&op, &g.source);
        assert!(offdiag_probe(&op, 2.0, &f, &g).is_err());
    }

    #[test]
    fn support_outside_source_rejected() {
        let op = identity(32);
        let g = BoxGeometry::default_for(op.torus());
        let mut f = indicator(&op, &g.source);
        f[30] = 1.0;
        assert!(offdiag_probe(&op, 2.0, &f, &g).is_err());
    }

    #[test]
    fn whole_torus_bound_is_finite() {
        let op = identity(32);
        let f: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).sin()).collect();
        let times: Vec<f64> = (0..20).map(|k| 1e-5 * 2f64.powi(k)).collect();
        let b = uniform_bound(&op, &f, &times).unwrap();
        assert!(b.is_finite() && b > 0.0 && b < 10.0);
    }

    #[test]
    fn identity_decays() {
        let op = identity(64);
        let g = BoxGeometry::default_for(op.torus());
        let f = indicator(&op, &g.source);
        for q in [1.0, 2.0] {
            let r = offdiag_probe(&op, q, &f, &g).unwrap();
            assert!(r.fit.slope < 0.0 && r.fit.r_squared >= 0.9, "q={q}: {:?}", r.fit);
        }
    }
}
