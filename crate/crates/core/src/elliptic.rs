//! Discrete divergence-form operator `A = -div a∇` on the torus.
//!
//! `A = Gᵀ D G` where `G` is the periodic forward-difference gradient and `D`
//! is block diagonal with the coefficient matrix `a(x)` acting on the edges
//! leaving site `x`. Everything downstream (semigroup, fractional powers,
//! gradients of spectral vectors) goes through one dense symmetric
//! eigendecomposition.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::lattice::Torus;

const ELLIPTIC_TOL: f64 = 1e-12;

/// Per-site symmetric `n × n` coefficient matrices with declared ellipticity
/// bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    dim: usize,
    /// `sites × n × n`, row-major per site.
    entries: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

/// How a coefficient field is produced; recorded in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSource {
    Identity,
    Checkerboard {
        seed: u64,
        lambda_min: f64,
        lambda_max: f64,
        #[serde(default = "default_blocks")]
        blocks: usize,
    },
    Csv {
        path: String,
        lambda_min: f64,
        lambda_max: f64,
    },
}

fn default_blocks() -> usize {
    8
}

impl CoefficientSource {
    pub fn build(&self, torus: &Torus) -> Result<CoefficientField> {
        match self {
            CoefficientSource::Identity => Ok(CoefficientField::identity(torus)),
            CoefficientSource::Checkerboard {
                seed,
                lambda_min,
                lambda_max,
                blocks,
            } => CoefficientField::checkerboard(torus, *blocks, *seed, *lambda_min, *lambda_max),
            CoefficientSource::Csv {
                path,
                lambda_min,
                lambda_max,
            } => CoefficientField::from_csv(torus, path, *lambda_min, *lambda_max),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientSource::Identity)
    }

    pub fn tag(&self) -> String {
        match self {
            CoefficientSource::Identity => "identity".into(),
            CoefficientSource::Checkerboard { seed, .. } => format!("checkerboard{seed}"),
            CoefficientSource::Csv { path, .. } => format!("csv:{path}"),
        }
    }
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit directions used for the sampled ellipticity check.
fn sphere_samples(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 64.0;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let mut out: Vec<Vec<f64>> = (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            for _ in 0..256 {
                let v: Vec<f64> = (0..dim).map(|_| uniform01(&mut rng) * 2.0 - 1.0).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-3 {
                    out.push(v.into_iter().map(|x| x / norm).collect());
                }
            }
            out
        }
    }
}

impl CoefficientField {
    pub fn new(torus: &Torus, entries: Vec<f64>, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        let n = torus.dim();
        if entries.len() != torus.num_sites() * n * n {
            return Err(LabError::GridMismatch(format!(
                "coefficient field has {} entries, expected {}",
                entries.len(),
                torus.num_sites() * n * n
            )));
        }
        if !(lambda_min > 0.0 && lambda_max >= lambda_min && lambda_max.is_finite()) {
            return Err(invalid(
                "lambda",
                format!("need 0 < lambda_min <= lambda_max, got [{lambda_min}, {lambda_max}]"),
            ));
        }
        let field = Self {
            dim: n,
            entries,
            lambda_min,
            lambda_max,
        };
        field.check_elliptic()?;
        Ok(field)
    }

    pub fn identity(torus: &Torus) -> Self {
        let n = torus.dim();
        let mut entries = Vec::with_capacity(torus.num_sites() * n * n);
        for _ in 0..torus.num_sites() {
            for i in 0..n {
                for j in 0..n {
                    entries.push(if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        Self {
            dim: n,
            entries,
            lambda_min: 1.0,
            lambda_max: 1.0,
        }
    }

    /// Piecewise-constant random field on a `blocks^n` checkerboard of the
    /// torus. Each block carries `R diag(μ) Rᵀ` with eigenvalues `μ` uniform in
    /// `[lambda_min, lambda_max]` (a random rotation `R` in 2-D; scalars in 1-D).
    ///
    /// Blocks are defined in physical space and sampled at edge midpoints, so
    /// the same seed describes the same continuum field at every `N`.
    pub fn checkerboard(
        torus: &Torus,
        blocks: usize,
        seed: u64,
        lambda_min: f64,
        lambda_max: f64,
    ) -> Result<Self> {
        if blocks == 0 {
            return Err(invalid("blocks", "checkerboard needs at least one block per axis"));
        }
        let n = torus.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nblocks = blocks.pow(n as u32);
        let block_mats: Vec<Vec<f64>> = (0..nblocks)
            .map(|_| {
                let mu: Vec<f64> = (0..n)
                    .map(|_| lambda_min + (lambda_max - lambda_min) * uniform01(&mut rng))
                    .collect();
                if n == 2 {
                    let th = std::f64::consts::PI * uniform01(&mut rng);
                    let (c, s) = (th.cos(), th.sin());
                    vec![
                        c * c * mu[0] + s * s * mu[1],
                        c * s * (mu[0] - mu[1]),
                        c * s * (mu[0] - mu[1]),
                        s * s * mu[0] + c * c * mu[1],
                    ]
                } else {
                    let mut m = vec![0.0; n * n];
                    for i in 0..n {
                        m[i * n + i] = mu[i];
                    }
                    m
                }
            })
            .collect();
        let h = torus.spacing();
        let mut entries = Vec::with_capacity(torus.num_sites() * n * n);
        for x in 0..torus.num_sites() {
            let block = torus.coords(x).iter().fold(0, |acc, &c| {
                let mid = (c as f64 + 0.5) * h / torus.side();
                let b = ((mid * blocks as f64).floor() as usize).min(blocks - 1);
                acc * blocks + b
            });
            entries.extend_from_slice(&block_mats[block]);
        }
        Self::new(torus, entries, lambda_min, lambda_max)
    }

    /// Load per-site matrices from CSV: one row per site (in site-index
    /// order), `n²` columns in row-major order. Lines starting with `#` are
    /// ignored.
    pub fn from_csv(
        torus: &Torus,
        path: impl AsRef<Path>,
        lambda_min: f64,
        lambda_max: f64,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let n = torus.dim();
        let mut entries = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != n * n {
                return Err(LabError::GridMismatch(format!(
                    "coefficient CSV row {row} has {} columns, expected {}",
                    record.len(),
                    n * n
                )));
            }
            for (col, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    invalid("coefficients", format!("row {row}, column {col}: cannot parse {cell:?}"))
                })?;
                entries.push(v);
            }
        }
        Self::new(torus, entries, lambda_min, lambda_max)
    }

    /// Same matrix at every site.
    pub fn is_constant(&self) -> bool {
        let m = self.dim * self.dim;
        self.entries.chunks(m).all(|c| c == &self.entries[..m])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Matrix at a site, row-major.
    pub fn at(&self, site: usize) -> &[f64] {
        let nn = self.dim * self.dim;
        &self.entries[site * nn..(site + 1) * nn]
    }

    /// Sampled ellipticity: `a ξ·ξ ≥ λ_min |ξ|²` and `|a ξ·ξ'| ≤ λ_max |ξ||ξ'|`
    /// over a grid of unit directions, plus symmetry.
    pub fn check_elliptic(&self) -> Result<()> {
        let n = self.dim;
        let dirs = sphere_samples(n);
        let nsites = self.entries.len() / (n * n);
        for site in 0..nsites {
            let a = self.at(site);
            if let Some(bad) = a.iter().position(|v| !v.is_finite()) {
                return Err(LabError::NotElliptic(format!("site {site}: non-finite entry {bad}")));
            }
            for i in 0..n {
                for j in 0..i {
                    let (u, v) = (a[i * n + j], a[j * n + i]);
                    if (u - v).abs() > ELLIPTIC_TOL * u.abs().max(v.abs()).max(1.0) {
                        return Err(LabError::NotElliptic(format!(
                            "site {site}: matrix is not symmetric ({u} vs {v})"
                        )));
                    }
                }
            }
            let form = |xi: &[f64], eta: &[f64]| -> f64 {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += a[i * n + j] * eta[j] * xi[i];
                    }
                }
                s
            };
            for xi in &dirs {
                let q = form(xi, xi);
                if q < self.lambda_min * (1.0 - ELLIPTIC_TOL) {
                    return Err(LabError::NotElliptic(format!(
                        "site {site}: a ξ·ξ = {q} below lambda_min = {}",
                        self.lambda_min
                    )));
                }
                for eta in &dirs {
                    let b = form(xi, eta).abs();
                    if b > self.lambda_max * (1.0 + ELLIPTIC_TOL) {
                        return Err(LabError::NotElliptic(format!(
                            "site {site}: |a ξ·ξ'| = {b} above lambda_max = {}",
                            self.lambda_max
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Assembled operator together with its full eigendecomposition.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    torus: Torus,
    coeffs: CoefficientField,
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, sorted by ascending eigenvalue.
    eigenvectors: DMatrix<f64>,
    /// `G V`: gradients of the eigenvectors, rows laid out `[site][axis]`.
    grad_eigenvectors: DMatrix<f64>,
}

impl DiscreteOperator {
    pub fn assemble(torus: Torus, coeffs: CoefficientField) -> Result<Self> {
        coeffs.check_elliptic()?;
        let n = torus.dim();
        let sites = torus.num_sites();
        if coeffs.entries.len() != sites * n * n || coeffs.dim != n {
            return Err(LabError::GridMismatch(
                "coefficient field does not match torus".into(),
            ));
        }
        let inv_h2 = 1.0 / torus.spacing().powi(2);
        let mut matrix = DMatrix::<f64>::zeros(sites, sites);
        for x in 0..sites {
            let a = coeffs.at(x);
            for i in 0..n {
                let xi = torus.shift(x, i, 1);
                for j in 0..n {
                    let c = a[i * n + j] * inv_h2;
                    if c == 0.0 {
                        continue;
                    }
                    let xj = torus.shift(x, j, 1);
                    // (e_{x+e_i} - e_x)(e_{x+e_j} - e_x)ᵀ
                    matrix[(xi, xj)] += c;
                    matrix[(xi, x)] -= c;
                    matrix[(x, xj)] -= c;
                    matrix[(x, x)] += c;
                }
            }
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let mut order: Vec<usize> = (0..sites).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
        let mut eigenvalues = Vec::with_capacity(sites);
        let mut eigenvectors = DMatrix::<f64>::zeros(sites, sites);
        for (col, &k) in order.iter().enumerate() {
            let lam = eig.eigenvalues[k];
            if lam < -1e-10 * top {
                return Err(LabError::NotElliptic(format!(
                    "assembled operator has negative eigenvalue {lam}"
                )));
            }
            eigenvalues.push(if lam.abs() <= 1e-10 * top { 0.0 } else { lam });
            eigenvectors.set_column(col, &eig.eigenvectors.column(k));
        }
        let mut grad_eigenvectors = DMatrix::<f64>::zeros(sites * n, sites);
        for col in 0..sites {
            let v: Vec<f64> = eigenvectors.column(col).iter().cloned().collect();
            let g = gradient_on(&torus, &v);
            grad_eigenvectors.set_column(col, &DVector::from_vec(g));
        }
        Ok(Self {
            torus,
            coeffs,
            matrix,
            eigenvalues,
            eigenvectors,
            grad_eigenvectors,
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn coeffs(&self) -> &CoefficientField {
        &self.coeffs
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn grad_eigenvectors(&self) -> &DMatrix<f64> {
        &self.grad_eigenvectors
    }

    /// Eigenvector `k` as a snapshot (Euclidean unit norm).
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().cloned().collect()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.torus.num_sites() {
            return Err(LabError::GridMismatch(format!(
                "snapshot has {} values, operator acts on {} sites",
                f.len(),
                self.torus.num_sites()
            )));
        }
        Ok(())
    }

    /// `A f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok((&self.matrix * DVector::from_column_slice(f)).as_slice().to_vec())
    }

    /// Coordinates `⟨f, v_j⟩` in the eigenbasis.
    pub fn to_spectral(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok(self
            .eigenvectors
            .tr_mul(&DVector::from_column_slice(f))
            .as_slice()
            .to_vec())
    }

    pub fn from_spectral(&self, c: &[f64]) -> Vec<f64> {
        (&self.eigenvectors * DVector::from_column_slice(c))
            .as_slice()
            .to_vec()
    }

    /// `G Σ_j c_j v_j`, laid out `[site][axis]`.
    pub fn gradient_of_spectral(&self, c: &[f64]) -> Vec<f64> {
        (&self.grad_eigenvectors * DVector::from_column_slice(c))
            .as_slice()
            .to_vec()
    }

    fn spectral_map(&self, f: &[f64], mult: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let mut c = self.to_spectral(f)?;
        for (cj, &lam) in c.iter_mut().zip(&self.eigenvalues) {
            *cj *= mult(lam);
        }
        Ok(self.from_spectral(&c))
    }

    /// `S(t) f = Σ_j e^{-tλ_j} ⟨f, v_j⟩ v_j`.
    pub fn semigroup_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("semigroup time must be non-negative, got {t}")));
        }
        if t == 0.0 {
            self.check_len(f)?;
            return Ok(f.to_vec());
        }
        self.spectral_map(f, |lam| (-t * lam).exp())
    }

    /// `A^θ f` with `0^θ = 0` for `θ > 0` and `A^0 = I`.
    pub fn frac_power_apply(&self, theta: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(theta >= 0.0) {
            return Err(invalid("theta", format!("exponent must be non-negative, got {theta}")));
        }
        if theta == 0.0 {
            self.check_len(f)?;
            return Ok(f.to_vec());
        }
        self.spectral_map(f, |lam| if lam == 0.0 { 0.0 } else { lam.powf(theta) })
    }

    /// `A^{-θ}` on the orthogonal complement of the kernel; the constant
    /// mode is projected out first.
    pub fn inverse_frac_power_apply(&self, theta: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(theta >= 0.0) {
            return Err(invalid("theta", format!("exponent must be non-negative, got {theta}")));
        }
        self.spectral_map(f, |lam| if lam == 0.0 { 0.0 } else { lam.powf(-theta) })
    }

    /// Forward-difference periodic gradient, the same `G` used in assembly.
    pub fn gradient(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok(gradient_on(&self.torus, f))
    }

    /// `Gᵀ w` for a vector field laid out `[site][axis]`.
    pub fn gradient_transpose(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.torus.dim();
        if w.len() != self.torus.num_sites() * n {
            return Err(LabError::GridMismatch("vector field length mismatch".into()));
        }
        let inv_h = 1.0 / self.torus.spacing();
        let mut out = vec![0.0; self.torus.num_sites()];
        for x in 0..self.torus.num_sites() {
            for i in 0..n {
                let v = w[x * n + i] * inv_h;
                out[self.torus.shift(x, i, 1)] += v;
                out[x] -= v;
            }
        }
        Ok(out)
    }

    /// Pointwise `a(x) w(x)` for a vector field laid out `[site][axis]`.
    pub fn apply_coefficients(&self, w: &[f64]) -> Vec<f64> {
        let n = self.torus.dim();
        let mut out = vec![0.0; w.len()];
        for x in 0..self.torus.num_sites() {
            let a = self.coeffs.at(x);
            for i in 0..n {
                out[x * n + i] = (0..n).map(|j| a[i * n + j] * w[x * n + j]).sum();
            }
        }
        out
    }

    /// `L²` inner product with cell weights.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.torus.cell_volume() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }
}

fn gradient_on(torus: &Torus, f: &[f64]) -> Vec<f64> {
    let n = torus.dim();
    let inv_h = 1.0 / torus.spacing();
    let mut out = vec![0.0; f.len() * n];
    for x in 0..f.len() {
        for i in 0..n {
            out[x * n + i] = (f[torus.shift(x, i, 1)] - f[x]) * inv_h;
        }
    }
    out
}

/// Convenience wrapper matching the operation name.
pub fn assemble(torus: Torus, coeffs: CoefficientField) -> Result<DiscreteOperator> {
    DiscreteOperator::assemble(torus, coeffs)
}
