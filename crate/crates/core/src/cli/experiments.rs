//! Computation of one sweep cell for each experiment kind.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::lab::{
    classical_vs_conical, conical_ratio, deterministic_ratio, estimate_constant, families::centre_site, offdiag_probe,
    random_field, weighted_l2_check, BoxGeometry, LatticeBox, Setup,
};
use crate::lattice::{TimeGrid, ValueKind};
use crate::numeric::{derive_seed, mean_var};
use crate::spde::{picard_ensemble, NemytskiiSpec, PicardOptions};
use crate::tent::{aperture_ratio, atom_bound_constant, make_atom, TentParams};

use super::config::{Cell, ExperimentConfig, ExperimentKind};

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "M")]
    pub nodes: usize,
    pub trials: usize,
    pub ratio: f64,
    pub stderr: f64,
    pub family: String,
    pub seed: u64,
}

/// Rows and nested reports produced by one cell.
#[derive(Debug, Clone, Default)]
pub struct CellOutput {
    pub rows: Vec<CsvRow>,
    pub reports: Vec<Value>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    cell: Cell,
    seed: u64,
    out: CellOutput,
}

impl Ctx<'_> {
    fn row(&mut self, trials: usize, ratio: f64, stderr: f64, family: String) {
        self.out.rows.push(CsvRow {
            p: self.cell.p,
            beta: self.cell.beta,
            alpha: self.cell.alpha,
            points: self.cell.points,
            nodes: self.cfg.grid.nodes,
            trials,
            ratio,
            stderr,
            family,
            seed: self.seed,
        });
    }

    fn report(&mut self, value: impl Serialize) -> Result<()> {
        self.out.reports.push(serde_json::to_value(value)?);
        Ok(())
    }

    fn params(&self) -> Result<TentParams> {
        TentParams::new(self.cell.p, self.cell.beta, self.cell.alpha)
    }
}

/// Smooth two-mode initial datum used by the Picard experiment.
pub fn default_initial_data(setup: &Setup) -> Vec<f64> {
    let torus = setup.torus();
    let side = torus.side();
    (0..torus.num_sites())
        .map(|x| {
            let pos = torus.position(x);
            let s = std::f64::consts::TAU * pos[0] / side;
            s.sin() + 0.3 * (3.0 * s).cos()
        })
        .collect()
}

pub fn run_cell(cfg: &ExperimentConfig, cell: Cell, seed: u64) -> Result<CellOutput> {
    let setup = Setup::build(&cfg.grid_spec(cell.points), &cfg.operator, cfg.noise.d_h)?;
    let mut ctx = Ctx {
        cfg,
        cell,
        seed,
        out: CellOutput::default(),
    };
    let trials = cfg.trials;
    match cfg.kind {
        ExperimentKind::ConicalRatio => {
            let prm = ctx.params()?;
            for fam in &cfg.families {
                let r = conical_ratio(&setup, prm, fam, trials, seed)?;
                ctx.row(trials, r.ratio, r.stderr, r.family.clone());
                ctx.report(&r)?;
            }
        }
        ExperimentKind::WeightedL2 => {
            for fam in &cfg.families {
                let r = weighted_l2_check(&setup, fam, cell.beta, trials, seed)?;
                ctx.row(trials, r.ratio, r.stderr, r.family.clone());
                ctx.report(&r)?;
            }
        }
        ExperimentKind::ClassicalVsConical => {
            let r = classical_vs_conical(&setup, ctx.params()?, &cfg.classical.levels, trials, seed)?;
            for row in &r.rows {
                ctx.row(trials, row.classical_ratio, row.classical_stderr, format!("classical:singular{}", row.level));
                ctx.row(trials, row.conical_ratio, row.conical_stderr, format!("conical:singular{}", row.level));
            }
            ctx.report(&r)?;
        }
        ExperimentKind::Offdiag => {
            let torus = *setup.torus();
            let h2 = torus.spacing().powi(2);
            let oc = &cfg.offdiag;
            let geometry = BoxGeometry {
                source: LatticeBox {
                    corner: vec![torus.points() / 8; torus.dim()],
                    width: oc.source_width,
                },
                target_width: oc.target_width,
                gaps: oc.gaps.clone(),
                times: oc.time_factors.iter().map(|c| c * h2).collect(),
            };
            let mut f = vec![0.0; torus.num_sites()];
            for x in geometry.source.sites(&torus) {
                f[x] = 1.0;
            }
            for &q in &oc.q {
                let r = offdiag_probe(&setup.op, q, &f, &geometry)?;
                ctx.out.rows.push(CsvRow {
                    p: q,
                    beta: 0.0,
                    alpha: 1.0,
                    points: cell.points,
                    nodes: cfg.grid.nodes,
                    trials: r.samples.len(),
                    ratio: r.fit.slope,
                    stderr: r.fit.slope_stderr,
                    family: "offdiag_slope".into(),
                    seed,
                });
                ctx.report(json!({ "coefficients": setup.coefficients, "N": cell.points, "probe": r }))?;
            }
        }
        ExperimentKind::DeterministicRatio => {
            let prm = ctx.params()?;
            for fam in &cfg.families {
                let r = deterministic_ratio(&setup, prm, fam)?;
                ctx.row(1, r.ratio, 0.0, r.family.clone());
                ctx.report(&r)?;
            }
        }
        ExperimentKind::Picard => {
            let prm = ctx.params()?;
            let pc = &cfg.picard;
            let (lambda, k) = match (pc.lambda, pc.kl_target) {
                (Some(l), _) => (l, None),
                (None, Some(target)) => {
                    let (k, _) = estimate_constant(&setup, prm, trials, seed)?;
                    (target / k, Some(k))
                }
                (None, None) => unreachable!("validated"),
            };
            let spec = NemytskiiSpec::linear(lambda, &pc.direction)?;
            let options = PicardOptions {
                max_iter: pc.max_iter,
                tol: pc.tol,
                beta0: pc.beta0,
                contraction_constant: k,
            };
            let seeds: Vec<u64> = (0..pc.seeds).map(|i| derive_seed(seed, i as u64)).collect();
            let u0 = default_initial_data(&setup);
            let ens = picard_ensemble(&setup, &spec, &u0, &prm, &seeds, &options)?;
            ctx.row(seeds.len(), ens.rate, 0.0, format!("picard:{}", spec.tag()));
            ctx.report(json!({
                "lambda": lambda,
                "contraction_constant": k,
                "nemytskii": spec.tag(),
                "ensemble": ens,
            }))?;
        }
        ExperimentKind::AtomSuite => {
            let torus = *setup.torus();
            let h = torus.spacing();
            let grid = setup.times.with_beta(cell.beta);
            let x0 = centre_site(&torus);
            for &rh in &cfg.atoms.radii {
                let r = rh * h;
                let values: Vec<f64> = (0..cfg.atoms.seeds)
                    .map(|s| {
                        let atom = make_atom(&torus, &grid, r, x0, derive_seed(seed, s as u64), cfg.noise.d_h)?;
                        atom_bound_constant(&atom.field, cell.p, cell.beta, r)
                    })
                    .collect::<Result<_>>()?;
                let (mean, var) = mean_var(&values);
                let stderr = (var / values.len() as f64).sqrt();
                ctx.row(values.len(), mean, stderr, format!("atom_r{rh}h"));
                ctx.report(json!({ "radius_h": rh, "constants": values }))?;
            }
        }
        ExperimentKind::ApertureSuite => {
            let torus = *setup.torus();
            let grid: TimeGrid = setup.times.with_beta(cell.beta);
            let kind = if cfg.noise.d_h == 1 {
                ValueKind::Scalar
            } else {
                ValueKind::Hilbert(cfg.noise.d_h)
            };
            let values: Vec<f64> = (0..cfg.aperture.fields)
                .map(|i| {
                    let g = random_field(torus, &grid, kind, derive_seed(seed, i as u64))?;
                    aperture_ratio(&g, cell.p, cell.beta, cell.alpha)
                })
                .collect::<Result<_>>()?;
            let max = values.iter().cloned().fold(0.0, f64::max);
            ctx.row(values.len(), max, 0.0, "aperture_max".into());
            ctx.report(json!({ "ratios": values }))?;
        }
    }
    Ok(ctx.out)
}
