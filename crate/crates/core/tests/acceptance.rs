//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p conical-lab --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use conical_lab::cli::{execute, Mode, RunOptions};
use conical_lab::elliptic::CoefficientSource;
use conical_lab::lab::families::centre_site;
use conical_lab::lab::{
    classical_vs_conical, conical_ratios, deterministic_ratio, drift, estimate_constant, offdiag_probe,
    random_field, random_mean_zero, shipped_families, weighted_l2_check, BoxGeometry, Family, GridSpec, Setup,
};
use conical_lab::lattice::{SpaceTimeField, TimeGrid, Torus, ValueKind};
use conical_lab::numeric::{derive_seed, mean_var};
use conical_lab::spde::{initial_term, picard_ensemble, picard_solve, NemytskiiSpec, PicardOptions};
use conical_lab::stochastic::{sample_noise, stochastic_convolution_spectral, SimpleProcess};
use conical_lab::tent::{aperture_ratio, atom_bound_constant, make_atom, tent_norm, TentParams};
use conical_lab::LabError;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: conical_lab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rough() -> CoefficientSource {
    CoefficientSource::Checkerboard {
        seed: 11,
        lambda_min: 0.2,
        lambda_max: 5.0,
        blocks: 8,
    }
}

fn coefficient_sets() -> [(&'static str, CoefficientSource); 2] {
    [("identity", CoefficientSource::Identity), ("rough", rough())]
}

fn setup(points: usize, nodes: usize, coeffs: &CoefficientSource, d_h: usize) -> Result<Setup, String> {
    ok(Setup::build(&GridSpec::new(1, points).with_nodes(nodes), coeffs, d_h))
}

fn kind_for(d_h: usize) -> ValueKind {
    if d_h == 1 {
        ValueKind::Scalar
    } else {
        ValueKind::Hilbert(d_h)
    }
}

fn c1_tent_identity() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let (n, points) = if i % 4 == 3 { (2, 8) } else { (1, 16) };
        let torus = ok(Torus::new(n, points, 1.0))?;
        let beta = [0.0, 0.25, 0.5, 1.0][(i % 4) as usize];
        let grid = ok(TimeGrid::new(torus.spacing().powi(2), 0.25, 16, beta))?;
        let d_h = if i % 3 == 0 { 4 } else { 1 };
        let g = ok(random_field(torus, &grid, kind_for(d_h), derive_seed(101, i)))?;
        let tent = ok(tent_norm(&g, &ok(TentParams::new(2.0, beta, 1.0))?))?;
        let l2 = g.weighted_l2_norm();
        worst = worst.max((tent - l2).abs() / l2);
    }
    ensure(worst <= 1e-8, || format!("max relative error {worst:e} > 1e-8"))?;
    Ok(format!("max relative error {worst:.2e} over 100 fields"))
}

/// Direct quadruple sum: vertices, nodes, sites inside the ball, components.
fn naive_tent_norm(g: &SpaceTimeField, p: f64, alpha: f64) -> f64 {
    let torus = g.torus();
    let nodes = g.times().nodes();
    let weights = g.times().weights();
    let mut total = 0.0;
    for x in 0..torus.num_sites() {
        let mut s = 0.0;
        for (k, &t) in nodes.iter().enumerate() {
            let r = alpha * t.sqrt();
            let (mut sum, mut count) = (0.0, 0usize);
            for y in 0..torus.num_sites() {
                if torus.distance(x, y) < r {
                    for c in 0..g.components() {
                        sum += g.value(k, y, c).powi(2);
                    }
                    count += 1;
                }
            }
            s += weights[k] * sum / count as f64;
        }
        total += s.powf(p / 2.0);
    }
    (torus.cell_volume() * total).powf(1.0 / p)
}

fn c2_brute_force() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [1, 2] {
        let torus = ok(Torus::new(n, 8, 1.0))?;
        let grid = ok(TimeGrid::new(torus.spacing().powi(2) / 2.0, 0.5, 16, 0.5))?;
        for (i, d_h) in [1usize, 3].into_iter().enumerate() {
            let g = ok(random_field(torus, &grid, kind_for(d_h), derive_seed(202, (n * 10 + i) as u64)))?;
            for p in [1.0, 1.5, 2.0, 3.0] {
                for alpha in [1.0, 2.0] {
                    let fast = ok(tent_norm(&g, &ok(TentParams::new(p, 0.5, alpha))?))?;
                    let slow = naive_tent_norm(&g, p, alpha);
                    worst = worst.max((fast - slow).abs() / slow);
                    cases += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max relative deviation {worst:e} > 1e-10"))?;
    Ok(format!("max relative deviation {worst:.2e} over {cases} cases"))
}

fn c3_aperture() -> Outcome {
    let torus = ok(Torus::new(1, 32, 1.0))?;
    let grid = ok(TimeGrid::new(torus.spacing().powi(2), 0.25, 32, 0.5))?;
    let mut lines = Vec::new();
    for p in [1.0, 2.0] {
        for d_h in [1usize, 4] {
            let fields: Vec<SpaceTimeField> = (0..100u64)
                .map(|i| ok(random_field(torus, &grid, kind_for(d_h), derive_seed(303, i))))
                .collect::<Result<_, _>>()?;
            let max_at = |alpha: f64| -> Result<f64, String> {
                let mut m = 0.0f64;
                for g in &fields {
                    m = m.max(ok(aperture_ratio(g, p, 0.5, alpha))?);
                }
                Ok(m)
            };
            let c = max_at(2.0)?;
            for alpha in [4.0, 8.0] {
                let m = max_at(alpha)?;
                ensure(m <= 1.5 * c, || {
                    format!("p={p}, d_H={d_h}: max ratio {m:.4} at α={alpha} exceeds 1.5·C = {:.4}", 1.5 * c)
                })?;
            }
            lines.push(format!("p={p},d_H={d_h}: C={c:.3}, α=8 max={:.3}", max_at(8.0)?));
        }
    }
    Ok(lines.join("; "))
}

fn c4_atoms() -> Outcome {
    let torus = ok(Torus::new(1, 64, 1.0))?;
    let h = torus.spacing();
    let beta = 0.5;
    let grid = ok(TimeGrid::new(h * h, 0.25, 64, beta))?;
    let x0 = centre_site(&torus);
    let mut means = Vec::new();
    for rh in [4.0, 8.0, 16.0] {
        let r = rh * h;
        let values: Vec<f64> = (0..50u64)
            .map(|s| {
                let atom = ok(make_atom(&torus, &grid, r, x0, derive_seed(404, s), 1))?;
                ok(atom.check())?;
                ok(atom_bound_constant(&atom.field, 1.0, beta, r))
            })
            .collect::<Result<_, _>>()?;
        means.push(mean_var(&values).0);
    }
    let d = drift(&means);
    ensure(d < 1.5, || format!("normalized atom norms {means:?} drift {d:.3} ≥ 1.5"))?;
    Ok(format!("means {:.3?} over r ∈ {{4h, 8h, 16h}}, drift {d:.3}", means))
}

/// Exact conditional right side `Σ_k Σ_m ‖S(t − k dt) g_m(k dt)‖² dt`, term by term.
fn isometry_rhs(setup: &Setup, g: &SimpleProcess, t: f64) -> Result<f64, String> {
    let dt = g.dt();
    let mut total = 0.0;
    for k in 0..g.steps() {
        if (k + 1) as f64 * dt > t * (1.0 + 1e-12) {
            break;
        }
        let Some(field) = g.field_at_step(k) else { continue };
        for m in 0..g.d_h() {
            let snap = SimpleProcess::mode_snapshot(field, g.d_h(), m);
            let v = ok(setup.op.semigroup_apply(t - k as f64 * dt, &snap))?;
            total += setup.op.l2_norm(&v).powi(2) * dt;
        }
    }
    Ok(total)
}

fn c5_ito_isometry() -> Outcome {
    let trials = 2000u64;
    let mut lines = Vec::new();
    for d_h in [1usize, 4] {
        let s = setup(16, 16, &CoefficientSource::Identity, d_h)?;
        let t = (s.noise.steps / 4) as f64 * s.noise.dt;
        let cell = s.torus().cell_volume();
        for family in [Family::Eigenmode { index: 1 }, Family::Adapted] {
            let mut diff = Vec::with_capacity(trials as usize);
            let mut lhs_all = Vec::with_capacity(trials as usize);
            for i in 0..trials {
                let noise = ok(sample_noise(&s.noise.with_seed(derive_seed(505, i))))?;
                let g = ok(family.realize(&s, &noise))?;
                let series = ok(stochastic_convolution_spectral(&s.op, &g, &noise, &[t]))?;
                let lhs = cell * series.coeffs[0].iter().map(|c| c * c).sum::<f64>();
                let rhs = isometry_rhs(&s, &g, t)?;
                diff.push(lhs - rhs);
                lhs_all.push(lhs);
            }
            let (m, v) = mean_var(&diff);
            let se = (v / trials as f64).sqrt();
            let z = m / se;
            ensure(z.abs() <= 3.0, || {
                format!("{} d_H={d_h}: mean deviation {m:e} is {z:.2} standard errors", family.tag())
            })?;
            lines.push(format!("{} d_H={d_h}: z={z:+.2}", family.tag()));
        }
    }
    Ok(lines.join("; "))
}

fn c6_kato() -> Outcome {
    let (lmin, lmax) = (0.2f64, 5.0f64);
    let (lo, hi) = (lmin.sqrt() * (1.0 - 1e-6), lmax.sqrt() * (1.0 + 1e-6));
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    for (n, points) in [(1usize, 64usize), (2, 12)] {
        let torus = ok(Torus::new(n, points, 1.0))?;
        let coeffs = ok(rough().build(&torus))?;
        let op = ok(conical_lab::elliptic::assemble(torus, coeffs))?;
        for i in 0..200u64 {
            let f = random_mean_zero(&torus, derive_seed(606, i));
            let half = op.l2_norm(&ok(op.frac_power_apply(0.5, &f))?);
            let grad = ok(op.gradient(&f))?;
            let gnorm = (torus.cell_volume() * grad.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let r = half / gnorm;
            min = min.min(r);
            max = max.max(r);
        }
    }
    ensure(min >= lo && max <= hi, || {
        format!("ratios in [{min:.6}, {max:.6}] escape [{lo:.6}, {hi:.6}]")
    })?;
    Ok(format!("ratios in [{min:.4}, {max:.4}] ⊂ [{lo:.4}, {hi:.4}] over 400 fields"))
}

fn c7_offdiag() -> Outcome {
    let mut lines = Vec::new();
    for (name, coeffs) in coefficient_sets() {
        let s = setup(64, 16, &coeffs, 1)?;
        let torus = *s.torus();
        let geometry = BoxGeometry::default_for(&torus);
        let mut f = vec![0.0; torus.num_sites()];
        for (i, x) in geometry.source.sites(&torus).into_iter().enumerate() {
            f[x] = 1.0 + 0.5 * i as f64;
        }
        for q in [1.0, 2.0] {
            let r = ok(offdiag_probe(&s.op, q, &f, &geometry))?;
            ensure(r.fit.slope < 0.0, || format!("{name} q={q}: slope {} not negative", r.fit.slope))?;
            if name == "identity" {
                ensure(r.fit.r_squared >= 0.9, || format!("{name} q={q}: R² = {:.3} < 0.9", r.fit.r_squared))?;
            }
            lines.push(format!("{name} q={q}: slope {:.3}, R² {:.3}", r.fit.slope, r.fit.r_squared));
        }
    }
    Ok(lines.join("; "))
}

fn c8_weighted_l2() -> Outcome {
    let families = [Family::Eigenmode { index: 1 }, Family::Adapted];
    let mut worst = (0.0f64, String::new());
    for (name, coeffs) in coefficient_sets() {
        let setups: Vec<Setup> = [16, 32, 64].iter().map(|&n| setup(n, 64, &coeffs, 1)).collect::<Result<_, _>>()?;
        for fam in &families {
            for beta in [0.25, 0.5, 1.0] {
                let ratios: Vec<f64> = setups
                    .iter()
                    .map(|s| ok(weighted_l2_check(s, fam, beta, 200, 808)).map(|r| r.ratio))
                    .collect::<Result<_, _>>()?;
                let d = drift(&ratios);
                ensure(d < 2.0, || format!("{name} {} β={beta}: ratios {ratios:.4?} drift {d:.3}", fam.tag()))?;
                if d > worst.0 {
                    worst = (d, format!("{name} {} β={beta}", fam.tag()));
                }
            }
        }
    }
    let mut checks = Vec::new();
    for fam in [Family::Eigenmode { index: 1 }, Family::Singular { level: 1 }] {
        let s = setup(32, 64, &CoefficientSource::Identity, 1)?;
        let r = ok(weighted_l2_check(&s, &fam, 0.0, 2000, 809))?;
        let exact = r.exact_ratio.ok_or("no closed form for a deterministic family")?;
        let z = (r.ratio - exact) / r.stderr;
        ensure(z.abs() <= 3.0, || {
            format!("β=0 {}: Monte-Carlo {:.6} vs closed form {exact:.6} ({z:.2} stderr)", fam.tag(), r.ratio)
        })?;
        checks.push(format!("{} z={z:+.2}", fam.tag()));
    }
    Ok(format!("worst drift {:.3} ({}); β=0 closed form: {}", worst.0, worst.1, checks.join(", ")))
}

fn c9_main_estimate() -> Outcome {
    let start = Instant::now();
    let params: Vec<TentParams> = [1.0, 1.5, 2.0, 4.0]
        .iter()
        .flat_map(|&p| [0.5, 1.0].map(|b| TentParams { p, beta: b, alpha: 1.0 }))
        .collect();
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for (name, coeffs) in coefficient_sets() {
        let setups: Vec<Setup> = [16, 32, 64].iter().map(|&n| setup(n, 64, &coeffs, 1)).collect::<Result<_, _>>()?;
        for fam in shipped_families(&setups[0]) {
            // [N][param]
            let reports: Vec<Vec<f64>> = setups
                .iter()
                .map(|s| ok(conical_ratios(s, &params, &fam, 200, 909)).map(|v| v.iter().map(|r| r.ratio).collect()))
                .collect::<Result<_, _>>()?;
            for (j, prm) in params.iter().enumerate() {
                let ratios: Vec<f64> = reports.iter().map(|r| r[j]).collect();
                let d = drift(&ratios);
                let label = format!("{name} {} p={} β={}", fam.tag(), prm.p, prm.beta);
                ensure(d < 2.0, || format!("{label}: ratios {ratios:.4?} drift {d:.3}"))?;
                if d > worst.0 {
                    worst = (d, label);
                }
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 1200.0, || format!("sweep took {secs:.0} s > 20 min"))?;
    Ok(format!("{count} cells, worst drift {:.3} ({}), {secs:.1} s", worst.0, worst.1))
}

fn c10_classical_failure() -> Outcome {
    let s = setup(64, 64, &CoefficientSource::Identity, 1)?;
    let r = ok(classical_vs_conical(&s, ok(TentParams::new(1.0, 1.0, 1.0))?, &[0, 1, 2, 3, 4], 400, 1010))?;
    let classical: Vec<f64> = r.rows.iter().map(|row| row.classical_ratio).collect();
    let conical: Vec<f64> = r.rows.iter().map(|row| row.conical_ratio).collect();
    let increasing = classical.windows(2).all(|w| w[1] > w[0]);
    ensure(increasing, || format!("classical ratios {classical:.3?} not increasing"))?;
    ensure(r.conical_spread < 2.0, || format!("conical ratios {conical:.3?} spread {:.3}", r.conical_spread))?;
    Ok(format!("classical {classical:.3?}; conical spread {:.3}", r.conical_spread))
}

/// `A S∗g` for `g = c·v` on steps `[0, active)`: the left-point Riemann sum
/// `λ dt Σ_{j<J} e^{-λ(t - j dt)}` summed as a geometric series.
fn eigenmode_generator(t: f64, lambda: f64, dt: f64, active: usize) -> f64 {
    let completed = ((t / dt) * (1.0 + 1e-12)).floor() as usize;
    let j = completed.min(active) as f64;
    if lambda == 0.0 {
        return 0.0;
    }
    let q = (lambda * dt).exp();
    lambda * dt * (-lambda * t).exp() * (q.powf(j) - 1.0) / (q - 1.0)
}

fn c11_deterministic() -> Outcome {
    let mut worst = 0.0f64;
    for (_, coeffs) in coefficient_sets() {
        let s = setup(32, 64, &coeffs, 1)?;
        let torus = *s.torus();
        let index = 1;
        let lambda = s.op.eigenvalues()[index];
        let v = s.op.eigenvector(index);
        let c = torus.cell_volume().powf(-0.5);
        let dt = s.noise.dt;
        let active = ((0.5 * s.grid.t_max / dt).round() as usize).min(s.noise.steps);
        for prm in [TentParams { p: 1.2, beta: 0.5, alpha: 1.0 }, TentParams { p: 2.0, beta: 0.5, alpha: 2.0 }] {
            let grid = s.times.with_beta(prm.beta);
            let lhs_field = ok(SpaceTimeField::from_fn(torus, grid.clone(), ValueKind::Scalar, |_, t, x| {
                vec![c * v[x] * eigenmode_generator(t, lambda, dt, active)]
            }))?;
            let rhs_field = ok(SpaceTimeField::from_fn(torus, grid.clone(), ValueKind::Scalar, |_, t, x| {
                let on = t <= active as f64 * dt * (1.0 + 1e-12);
                vec![if on { c * v[x] } else { 0.0 }]
            }))?;
            let expect = ok(tent_norm(&lhs_field, &prm))? / ok(tent_norm(&rhs_field, &prm))?;
            let r = ok(deterministic_ratio(&s, prm, &Family::Eigenmode { index }))?;
            worst = worst.max((r.ratio - expect).abs() / expect);
        }
    }
    ensure(worst <= 1e-8, || format!("eigenmode ratio deviates from closed form by {worst:e}"))?;

    let prm = TentParams { p: 1.2, beta: 0.5, alpha: 1.0 };
    let mut max_drift = 0.0f64;
    for (name, coeffs) in coefficient_sets() {
        let setups: Vec<Setup> = [16, 32, 64].iter().map(|&n| setup(n, 64, &coeffs, 1)).collect::<Result<_, _>>()?;
        for fam in [Family::Eigenmode { index: 1 }, Family::Singular { level: 1 }, Family::Singular { level: 2 }] {
            let ratios: Vec<f64> = setups
                .iter()
                .map(|s| ok(deterministic_ratio(s, prm, &fam)).map(|r| r.ratio))
                .collect::<Result<_, _>>()?;
            let d = drift(&ratios);
            ensure(d < 2.0, || format!("{name} {}: ratios {ratios:.4?} drift {d:.3}", fam.tag()))?;
            max_drift = max_drift.max(d);
        }
    }
    Ok(format!("closed-form deviation {worst:.2e}; worst drift at (1.2, 0.5) {max_drift:.3}"))
}

fn c12_picard() -> Outcome {
    let s = ok(Setup::build(&GridSpec::new(1, 32).with_nodes(48), &CoefficientSource::Identity, 1))?;
    let prm = ok(TentParams::new(2.0, 0.5, 1.0))?;
    let u0 = conical_lab::cli::experiments::default_initial_data(&s);
    let (k, _) = ok(estimate_constant(&s, prm, 200, 1212))?;
    let seeds: Vec<u64> = (0..4).map(|i| derive_seed(1213, i)).collect();

    let spec = ok(NemytskiiSpec::linear(0.5 / k, &[1.0]))?;
    let options = PicardOptions {
        contraction_constant: Some(k),
        ..PicardOptions::default()
    };
    let ens = ok(picard_ensemble(&s, &spec, &u0, &prm, &seeds, &options))?;
    ensure(ens.rate <= 0.6, || format!("increment decay rate {:.3} > 0.6 at K·L_b = 0.5", ens.rate))?;
    let residual = ens.reports.iter().map(|r| r.relative_residual).fold(0.0, f64::max);
    ensure(residual < 1e-6, || format!("relative residual {residual:e} ≥ 1e-6"))?;

    let zero = ok(picard_solve(&s, &NemytskiiSpec::zero(1), &u0, &prm, seeds[0], &options))?;
    let init = ok(initial_term(&s.op, &u0, &s.times.with_beta(prm.beta), &prm, 1.0))?;
    ensure(zero.report.iterations == 1, || format!("b = 0 took {} iterations", zero.report.iterations))?;
    ensure(zero.v.data() == init.field.data(), || "b = 0 solution differs from the initial term".into())?;

    let wild = ok(NemytskiiSpec::linear(2.0 / k, &[1.0]))?;
    for &seed in &seeds {
        match picard_solve(&s, &wild, &u0, &prm, seed, &options) {
            Err(LabError::NonContraction { .. }) => {}
            Err(e) => return Err(format!("K·L_b = 2: expected non-contraction, got `{e}`")),
            Ok(sol) => {
                return Err(format!(
                    "K·L_b = 2: converged in {} iterations instead of failing",
                    sol.report.iterations
                ))
            }
        }
    }
    Ok(format!(
        "K = {k:.3}, rate {:.3}, max residual {residual:.1e}, b=0 in 1 step, K·L_b=2 rejected on {} seeds",
        ens.rate,
        seeds.len()
    ))
}

const DETERMINISM_CONFIGS: &[(&str, &str)] = &[
    ("conical", "kind = \"conical_ratio\"\ntrials = 40\n[grid]\nN = [16, 32]\nM = 24\n[tent]\np = [1.0, 2.0]\n[[families]]\nkind = \"adapted\"\n[[families]]\nkind = \"singular\"\nlevel = 1\n"),
    ("weighted", "kind = \"weighted_l2\"\ntrials = 40\n[grid]\nN = [16]\nM = 24\n[operator]\nkind = \"checkerboard\"\nseed = 2\nlambda_min = 0.2\nlambda_max = 5.0\n[tent]\nbeta = [0.0, 0.5]\n"),
    ("classical", "kind = \"classical_vs_conical\"\ntrials = 20\n[grid]\nN = [16]\nM = 24\n[tent]\np = [1.0]\nbeta = [1.0]\n[classical]\nlevels = [0, 1, 2]\n"),
    ("offdiag", "kind = \"offdiag\"\n[grid]\nN = [32]\nM = 8\n"),
    ("deterministic", "kind = \"deterministic_ratio\"\n[grid]\nN = [16, 32]\nM = 24\n[tent]\np = [1.2]\n[[families]]\nkind = \"eigenmode\"\nindex = 1\n"),
    ("picard", "kind = \"picard\"\ntrials = 20\n[grid]\nN = [16]\nM = 16\n[tent]\np = [2.0]\n[picard]\nkl_target = 0.5\nseeds = 3\n"),
    ("atoms", "kind = \"atom_suite\"\n[grid]\nN = [32]\nM = 24\n[tent]\np = [1.0]\n[atoms]\nseeds = 10\n"),
    ("aperture", "kind = \"aperture_suite\"\n[grid]\nN = [16]\nM = 16\n[tent]\nalpha = [2.0, 4.0]\n[noise]\nd_h = 4\n[aperture]\nfields = 10\n"),
];

fn run_csv(config: &Path, out: &Path, workers: usize) -> Result<Vec<u8>, String> {
    let opts = RunOptions {
        seed: Some(17),
        workers,
        out_dir: out.to_path_buf(),
    };
    let outcome = ok(execute(config, Mode::Sweep, &opts))?;
    std::fs::read(&outcome.csv).map_err(|e| e.to_string())
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut configs: Vec<std::path::PathBuf> = Vec::new();
    for (name, body) in DETERMINISM_CONFIGS {
        let path = dir.path().join(format!("{name}.cfg"));
        std::fs::write(&path, body).map_err(|e| e.to_string())?;
        configs.push(path);
    }
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/conical_n1.cfg");
    configs.push(shipped);
    for cfg in &configs {
        let a = run_csv(cfg, &dir.path().join("w1a"), 1)?;
        let b = run_csv(cfg, &dir.path().join("w1b"), 1)?;
        let c = run_csv(cfg, &dir.path().join("w4"), 4)?;
        let name = cfg.file_name().unwrap().to_string_lossy();
        ensure(a == b, || format!("{name}: rerun at 1 worker changed the CSV"))?;
        ensure(a == c, || format!("{name}: 4 workers changed the CSV"))?;
    }
    Ok(format!("{} configs byte-identical across reruns and 1/4 workers", configs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("tent-norm identity at p=2", c1_tent_identity),
        ("brute-force tent norm", c2_brute_force),
        ("change of aperture", c3_aperture),
        ("atom bound", c4_atoms),
        ("Itô isometry", c5_ito_isometry),
        ("discrete Kato equivalence", c6_kato),
        ("off-diagonal decay", c7_offdiag),
        ("weighted L² estimate", c8_weighted_l2),
        ("conical regularity across refinement", c9_main_estimate),
        ("classical estimate fails, conical holds", c10_classical_failure),
        ("deterministic conical regularity", c11_deterministic),
        ("Picard solver", c12_picard),
        ("determinism", c13_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
