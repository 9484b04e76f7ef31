use std::error::Error;
use std::path::Path;

use dgd_core::analysis::{
    advection_convergence, advection_run, assemble_linearization, centroid_states, compute_spectrum, entropy_wave_convergence,
    l2_error, sod_l1_error, sod_semi, ConvergenceTable, SpectrumReport,
};
use dgd_core::dgd_ops::{
    assemble_global, quadrature_oracle, reference_operator, reproduction_error, sbp_dgd_equivalence_check, verify_dense_norm_sbp,
    DgdSpace,
};
use dgd_core::euler::{Gas, State};
use dgd_core::mesh::{Mesh, Point};
use dgd_core::problems::{entropy_wave, sod_ic, unsteady_vortex, ProblemId, RiemannSolution, VortexForm, VortexParams};
use dgd_core::residual::{FluxMode, SemiDiscretization};
use dgd_core::sbp::{build_lgl_sbp_1d, verify_sbp, SbpReport};
use dgd_core::timeint::{advance, TimeSettings};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{flux_name, Command, RunConfig};
use crate::output::{f17, write_csv, Checks};

pub type CmdResult = Result<Checks, Box<dyn Error>>;

pub fn execute(cfg: &RunConfig) -> CmdResult {
    std::fs::create_dir_all(&cfg.out)?;
    match cfg.command {
        Command::VerifyOperators => verify_operators(cfg),
        Command::Run => run(cfg),
        Command::Spectra => spectra(cfg),
        Command::Convergence => convergence(cfg),
    }
}

fn config_json(cfg: &RunConfig) -> Value {
    json!({
        "command": cfg.command.name(),
        "problem": cfg.problem.name(),
        "dim": cfg.dim,
        "p": cfg.p,
        "N": cfg.n,
        "flux": flux_name(cfg.flux),
        "cfl": cfg.cfl,
        "T": cfg.final_time,
        "relaxation": cfg.relaxation,
        "seed": cfg.seed,
        "vortex_form": match cfg.vortex_form { VortexForm::Scaled => "scaled", VortexForm::Literal => "literal" },
        "sizes": cfg.sizes,
    })
}

fn write_summary(out: &Path, cfg: &RunConfig, results: Value, checks: &Checks) -> std::io::Result<()> {
    let doc = json!({ "config": config_json(cfg), "results": results, "checks": checks, "pass": checks.all_pass() });
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&doc)? + "\n")
}

fn periodic_mesh(dim: usize, n: usize, periodic: bool) -> dgd_core::Result<Mesh> {
    if dim == 1 {
        Mesh::interval(n, 0.0, 1.0, periodic)
    } else {
        Mesh::unit_square(n, periodic)
    }
}

fn sbp_json(r: &SbpReport) -> Value {
    json!({
        "accuracy": r.accuracy,
        "min_norm_weight": r.min_norm_weight,
        "skew": r.skew,
        "q_plus_qt_minus_e": r.q_plus_qt_minus_e,
        "boundary_accuracy": r.boundary_accuracy,
        "face_decomposition": r.face_decomposition,
        "quadrature_degree": r.quadrature_degree,
    })
}

fn sbp_checks(checks: &mut Checks, tag: &str, r: &SbpReport) {
    checks.le(format!("{tag} accuracy"), r.accuracy, 1e-12);
    checks.gt(format!("{tag} min norm weight"), r.min_norm_weight, 0.0);
    checks.le(format!("{tag} skew"), r.skew, 1e-14);
    checks.le(format!("{tag} Q + Q^T - E"), r.q_plus_qt_minus_e, 1e-13);
    checks.le(format!("{tag} boundary accuracy"), r.boundary_accuracy, 1e-12);
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn verify_operators(cfg: &RunConfig) -> CmdResult {
    let mut checks = Checks::default();
    let mut results = serde_json::Map::new();

    let element = reference_operator(cfg.dim, cfg.p)?;
    if cfg.dim == 1 {
        let lgl = build_lgl_sbp_1d(cfg.p)?;
        let r = verify_sbp(&lgl, cfg.p);
        sbp_checks(&mut checks, "lgl", &r);
        results.insert("lgl_sbp".into(), sbp_json(&r));
    }
    let r = verify_sbp(&element, cfg.p);
    sbp_checks(&mut checks, "element", &r);
    checks.ge("element quadrature degree", r.quadrature_degree as f64, (2 * cfg.p) as f64);
    results.insert("element_sbp".into(), sbp_json(&r));
    std::fs::write(cfg.out.join("reference_operator.txt"), element.to_text())?;

    let velocity: Point = if cfg.dim == 1 { [1.0, 0.0] } else { [0.7, -0.3] };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for periodic in [false, true] {
        let tag = if periodic { "periodic" } else { "bounded" };
        let space = DgdSpace::new(periodic_mesh(cfg.dim, cfg.n, periodic)?, cfg.p)?;
        let n = space.num_elements();
        let global = assemble_global(&space);
        let oracle = quadrature_oracle(&space);
        let oracle_diff = global.max_diff(&oracle);
        let dense = verify_dense_norm_sbp(&space, &global);
        let repro = reproduction_error(&space);
        let (u, v, dudt) = (random_vec(&mut rng, n), random_vec(&mut rng, n), random_vec(&mut rng, n));
        let eq = sbp_dgd_equivalence_check(&space, &oracle, velocity, &u, &v, &dudt);
        checks.le(format!("{tag} assembled vs quadrature"), oracle_diff, 1e-12);
        checks.gt(format!("{tag} min eigenvalue of M"), dense.min_eigenvalue, 0.0);
        checks.le(format!("{tag} dense accuracy"), dense.accuracy, 1e-11);
        checks.le(format!("{tag} dense Q + Q^T - E"), dense.q_plus_qt_minus_e, 1e-13);
        checks.le(format!("{tag} dense boundary accuracy"), dense.boundary_accuracy, 1e-11);
        checks.le(format!("{tag} reproduction"), repro, 1e-11);
        checks.le(format!("{tag} weak-form equivalence"), eq.max(), 1e-13);
        let stencil_sizes: Vec<usize> = space.stencils.iter().map(|s| s.members.len()).collect();
        results.insert(
            tag.into(),
            json!({
                "elements": n,
                "assembled_vs_quadrature": oracle_diff,
                "min_eigenvalue": dense.min_eigenvalue,
                "dense_accuracy": dense.accuracy,
                "dense_q_plus_qt_minus_e": dense.q_plus_qt_minus_e,
                "dense_boundary_accuracy": dense.boundary_accuracy,
                "rows_checked": dense.rows_checked,
                "reproduction": repro,
                "equivalence": { "temporal": eq.temporal, "q_terms": eq.q_terms, "e_terms": eq.e_terms },
                "stencil_size_min": stencil_sizes.iter().min(),
                "stencil_size_max": stencil_sizes.iter().max(),
            }),
        );
    }
    write_summary(&cfg.out, cfg, Value::Object(results), &checks)?;
    Ok(checks)
}

fn advection_velocity(dim: usize) -> Point {
    if dim == 1 {
        [1.0, 0.0]
    } else {
        [1.0, 1.0]
    }
}

/// Initial condition and, when known, the exact solution of an Euler problem.
struct EulerCase {
    semi: SemiDiscretization,
    initial: Box<dyn Fn(Point) -> State>,
    exact: Option<Box<dyn Fn(Point, f64) -> State>>,
}

fn euler_case(cfg: &RunConfig) -> dgd_core::Result<EulerCase> {
    let gas = Gas::new(1.4, cfg.dim);
    Ok(match cfg.problem {
        ProblemId::EntropyWave => {
            let space = DgdSpace::new(Mesh::interval(cfg.n, 0.0, 1.0, true)?, cfg.p)?;
            EulerCase {
                semi: SemiDiscretization::new(space, gas.gamma, cfg.flux, None)?,
                initial: Box::new(move |x| entropy_wave(&gas, x[0], 0.0)),
                exact: Some(Box::new(move |x, t| entropy_wave(&gas, x[0], t))),
            }
        }
        ProblemId::UnsteadyVortex => {
            let prm = VortexParams { form: cfg.vortex_form, ..VortexParams::default() };
            let space = DgdSpace::new(Mesh::unit_square(cfg.n, true)?, cfg.p)?;
            EulerCase {
                semi: SemiDiscretization::new(space, gas.gamma, cfg.flux, None)?,
                initial: Box::new(move |x| unsteady_vortex(&gas, &prm, x, 0.0)),
                exact: match prm.form {
                    VortexForm::Scaled => Some(Box::new(move |x, t| unsteady_vortex(&gas, &prm, x, t))),
                    VortexForm::Literal => None,
                },
            }
        }
        ProblemId::Sod => {
            let riemann = RiemannSolution::sod()?;
            EulerCase {
                semi: sod_semi(cfg.n, cfg.p, cfg.flux)?,
                initial: Box::new(move |x| sod_ic(&gas, x[0])),
                exact: Some(Box::new(move |x, t| riemann.state(&gas, x[0], t))),
            }
        }
        ProblemId::Advection => unreachable!("advection is not an Euler problem"),
    })
}

fn run(cfg: &RunConfig) -> CmdResult {
    if cfg.problem == ProblemId::Advection {
        return run_advection(cfg);
    }
    let case = euler_case(cfg)?;
    let semi = &case.semi;
    let gas = semi.gas;
    let w0 = semi.interpolate(&*case.initial)?;
    let totals0 = semi.conserved_totals(&w0)?;
    let settings = TimeSettings { cfl: cfg.cfl, relaxation: cfg.relaxation, ..TimeSettings::default() };

    let mut history = Vec::new();
    let (mut max_abs_ds, mut max_ds) = (0.0f64, f64::NEG_INFINITY);
    let (mut beta_min, mut beta_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut newton_total = 0;
    let traj = advance(semi, &w0, cfg.final_time, &settings, |s, _| {
        history.push(vec![s.step.to_string(), f17(s.t), f17(s.entropy), f17(s.entropy_change), f17(s.beta)]);
        if s.step > 0 {
            info!("step {} t = {:.6} dS = {:.3e} beta = {:.15}", s.step, s.t, s.entropy_change, s.beta);
            max_abs_ds = max_abs_ds.max(s.entropy_change.abs());
            max_ds = max_ds.max(s.entropy_change);
            beta_min = beta_min.min(s.beta);
            beta_max = beta_max.max(s.beta);
            newton_total += s.newton_iterations;
        }
    })?;
    write_csv(&cfg.out.join("entropy_history.csv"), &["step", "t", "S", "dS", "beta"], &history)?;

    let totals = semi.conserved_totals(&traj.w)?;
    let drift: Vec<f64> = (0..semi.nvar()).map(|i| (totals[i] - totals0[i]).abs() / totals0[i].abs().max(1.0)).collect();

    let mesh = &semi.space.mesh;
    let states = centroid_states(semi, &traj.w)?;
    let mut header = vec!["x", "y", "rho", "u", "v", "p", "w1"];
    if case.exact.is_some() {
        header.extend(["rho_exact", "u_exact", "v_exact", "p_exact", "w1_exact"]);
    }
    let row_of = |u: &State| -> Result<Vec<String>, dgd_core::DgdError> {
        let vel = gas.velocity(u);
        let w = gas.entropy_vars(u)?;
        Ok(vec![f17(u[0]), f17(vel[0]), f17(vel[1]), f17(gas.pressure(u)), f17(w[0])])
    };
    let mut rows = Vec::with_capacity(states.len());
    for (k, u) in states.iter().enumerate() {
        let c = mesh.centroid(k);
        let mut row = vec![f17(c[0]), f17(c[1])];
        row.extend(row_of(u)?);
        if let Some(ex) = &case.exact {
            row.extend(row_of(&ex(c, traj.t))?);
        }
        rows.push(row);
    }
    write_csv(&cfg.out.join("solution.csv"), &header, &rows)?;

    let mut results = json!({
        "steps": traj.steps,
        "final_time": traj.t,
        "initial_entropy": semi.total_entropy(&w0)?,
        "final_entropy": semi.total_entropy(&traj.w)?,
        "max_abs_dS": max_abs_ds,
        "max_dS": max_ds,
        "beta_min": beta_min,
        "beta_max": beta_max,
        "newton_iterations": newton_total,
        "conservation_drift": drift,
    });
    if let Some(ex) = &case.exact {
        let t = traj.t;
        if cfg.problem == ProblemId::Sod {
            results["l1_error_w1"] = json!(sod_l1_error(semi, &traj.w, &RiemannSolution::sod()?, t)?);
        } else {
            results["l2_error_rho"] = json!(l2_error(semi, &traj.w, &|x| ex(x, t), 0)?);
        }
    }

    let mut checks = Checks::default();
    if mesh.is_periodic() && cfg.relaxation {
        match cfg.flux {
            FluxMode::Conservative => checks.le("max |dS| per step", max_abs_ds, 1e-10),
            FluxMode::Stable => checks.le("max dS per step", max_ds, 1e-14),
        }
    }
    write_summary(&cfg.out, cfg, results, &checks)?;
    Ok(checks)
}

fn run_advection(cfg: &RunConfig) -> CmdResult {
    let velocity = advection_velocity(cfg.dim);
    let space = DgdSpace::new(periodic_mesh(cfg.dim, cfg.n, true)?, cfg.p)?;
    let (u, err) = advection_run(&space, velocity, cfg.final_time)?;
    let rows: Vec<Vec<String>> = space
        .mesh
        .centroids()
        .iter()
        .zip(&u)
        .map(|(c, ui)| {
            let ex = dgd_core::problems::advection_exact(cfg.dim, velocity, *c, cfg.final_time);
            vec![f17(c[0]), f17(c[1]), f17(*ui), f17(ex)]
        })
        .collect();
    write_csv(&cfg.out.join("solution.csv"), &["x", "y", "u", "u_exact"], &rows)?;
    let checks = Checks::default();
    write_summary(&cfg.out, cfg, json!({ "l2_error": err, "velocity": velocity }), &checks)?;
    Ok(checks)
}

fn spectrum_at(cfg: &RunConfig, p: usize) -> Result<SpectrumReport, Box<dyn Error>> {
    let case = euler_case(&RunConfig { p, ..cfg.clone() })?;
    let w0 = case.semi.interpolate(&*case.initial)?;
    let (m, j) = assemble_linearization(&case.semi, &w0)?;
    Ok(compute_spectrum(&m, &j)?)
}

fn spectra(cfg: &RunConfig) -> CmdResult {
    let mut rep = spectrum_at(cfg, cfg.p)?;
    let reference = if cfg.p == 1 { rep.spectral_radius } else { spectrum_at(cfg, 1)?.spectral_radius };
    rep.renormalize(reference);
    let rows: Vec<Vec<String>> =
        rep.eigenvalues.iter().zip(rep.normalized()).map(|(l, n)| vec![f17(l.re), f17(l.im), f17(n.re), f17(n.im)]).collect();
    write_csv(&cfg.out.join("eigenvalues.csv"), &["re", "im", "normalized_re", "normalized_im"], &rows)?;

    let mut checks = Checks::default();
    if cfg.p == 1 && cfg.problem == ProblemId::UnsteadyVortex && cfg.vortex_form == VortexForm::Scaled {
        match cfg.flux {
            FluxMode::Stable => checks.le("max normalized Re", rep.max_normalized_real(), 1e-8),
            FluxMode::Conservative => checks.le("max normalized Re", rep.max_normalized_real(), 5e-3),
        }
    }
    let results = json!({
        "eigenvalues": rep.eigenvalues.len(),
        "spectral_radius": rep.spectral_radius,
        "max_real": rep.max_real,
        "normalization": rep.normalization,
        "max_normalized_real": rep.max_normalized_real(),
        "normalized_spectral_radius": rep.spectral_radius / rep.normalization,
    });
    write_summary(&cfg.out, cfg, results, &checks)?;
    Ok(checks)
}

fn convergence(cfg: &RunConfig) -> CmdResult {
    let table: ConvergenceTable = match cfg.problem {
        ProblemId::Advection => advection_convergence(cfg.p, &cfg.sizes)?,
        _ => entropy_wave_convergence(cfg.p, &cfg.sizes, cfg.flux, cfg.final_time, cfg.relaxation)?,
    };
    let rates = table.rates();
    let rows: Vec<Vec<String>> = (0..table.sizes.len())
        .map(|i| {
            vec![table.sizes[i].to_string(), f17(table.h[i]), f17(table.errors[i]), rates[i].map(f17).unwrap_or_default()]
        })
        .collect();
    write_csv(&cfg.out.join("errors.csv"), &["K", "h", "error", "rate"], &rows)?;
    let checks = Checks::default();
    let results = json!({
        "label": table.label,
        "errors": table.errors,
        "rates": rates,
        "final_rate": table.last_rate(),
        "target_rate": cfg.p as f64 + 0.5,
    });
    write_summary(&cfg.out, cfg, results, &checks)?;
    Ok(checks)
}
