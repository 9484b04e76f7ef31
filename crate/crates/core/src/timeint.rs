//! Implicit midpoint time stepping with optional relaxation for entropy.

use log::{debug, warn};

use crate::error::{DgdError, Result};
use crate::linalg::SparseLu;
use crate::residual::SemiDiscretization;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Tolerance on the residual ∞-norm, scaled by `max(1, |m̃(wⁿ)|∞)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for the residual Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tol: 1e-12, max_iter: 25, fd_step: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSettings {
    pub cfl: f64,
    /// Overrides the CFL rule; the interval is split into equal steps no longer than this.
    pub fixed_dt: Option<f64>,
    pub relaxation: bool,
    pub newton: NewtonSettings,
    pub secant_tol: f64,
    pub secant_max_iter: usize,
}

impl Default for TimeSettings {
    fn default() -> Self {
        TimeSettings { cfl: 10.0, fixed_dt: None, relaxation: true, newton: NewtonSettings::default(), secant_tol: 1e-13, secant_max_iter: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub history: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `G(w*) = m̃(w*) - m̃(wⁿ) + Δt R̃(½(w* + wⁿ))`.
fn midpoint_residual(semi: &SemiDiscretization, w_star: &[f64], m_n: &[f64], w_n: &[f64], dt: f64) -> Result<Vec<f64>> {
    let half: Vec<f64> = w_star.iter().zip(w_n).map(|(a, b)| 0.5 * (a + b)).collect();
    let m = semi.dgd_mass_term(w_star)?;
    let r = semi.dgd_residual(&half)?;
    Ok(m.iter().zip(m_n).zip(&r).map(|((a, b), c)| a - b + dt * c).collect())
}

/// Jacobian of the midpoint system: `∂m̃/∂w̃|_{w*} + (Δt/2) ∂R̃/∂w̃|_{w^{n+½}}`.
pub fn midpoint_jacobian(
    semi: &SemiDiscretization,
    w_star: &[f64],
    w_n: &[f64],
    dt: f64,
    fd_step: f64,
) -> Result<crate::linalg::CsrMatrix> {
    let half: Vec<f64> = w_star.iter().zip(w_n).map(|(a, b)| 0.5 * (a + b)).collect();
    let mj = semi.mass_jacobian(w_star)?;
    let rj = semi.residual_jacobian_fd(&half, fd_step, false)?;
    Ok(mj.axpby(1.0, &rj, 0.5 * dt))
}

/// Solve the implicit midpoint system for `w*` by Newton's method.
pub fn midpoint_solve(
    semi: &SemiDiscretization,
    w_n: &[f64],
    dt: f64,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport)> {
    let m_n = semi.dgd_mass_term(w_n)?;
    let mut w = w_n.to_vec();
    let mut g = midpoint_residual(semi, &w, &m_n, w_n, dt)?;
    let mut history = vec![max_abs(&g)];
    let mut iterations = 0;
    let tol = settings.tol * max_abs(&m_n).max(1.0);
    while history[history.len() - 1] > tol {
        if iterations >= settings.max_iter {
            return Err(DgdError::NewtonDiverged { iterations, history });
        }
        let jac = midpoint_jacobian(semi, &w, w_n, dt, settings.fd_step)?;
        let lu = SparseLu::new(&jac)?;
        let dw = lu.solve(&g)?;
        // back off if the full step leaves the admissible set
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a - alpha * b).collect();
            match midpoint_residual(semi, &trial, &m_n, w_n, dt) {
                Ok(gt) => {
                    accepted = Some((trial, gt));
                    break;
                }
                Err(DgdError::Nonphysical { .. }) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, gt)) = accepted else {
            return Err(DgdError::NewtonDiverged { iterations, history });
        };
        w = trial;
        g = gt;
        iterations += 1;
        history.push(max_abs(&g));
        debug!("newton {iterations}: |G| = {:e}", history[iterations]);
    }
    Ok((w, NewtonReport { iterations, history }))
}

/// Relaxation parameter for `w^{n+1} = wⁿ + β (w* - wⁿ)` making
/// `S(w^{n+1}) - S(wⁿ) + β Δt R(w^{n+½}) = 0`, by secant iteration from 1 and 1 - 1e-6.
/// `rate` is `R(w^{n+½})`. Returns `(β, residual, converged)`.
pub fn relaxation_beta(
    semi: &SemiDiscretization,
    w_n: &[f64],
    w_star: &[f64],
    dt: f64,
    rate: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64, bool)> {
    let s_n = semi.total_entropy(w_n)?;
    let d: Vec<f64> = w_star.iter().zip(w_n).map(|(a, b)| a - b).collect();
    let r = |beta: f64| -> Result<f64> {
        let w: Vec<f64> = w_n.iter().zip(&d).map(|(a, b)| a + beta * b).collect();
        Ok(semi.total_entropy(&w)? - s_n + beta * dt * rate)
    };
    let scale = s_n.abs().max(1.0);
    let (mut b0, mut b1) = (1.0, 1.0 - 1e-6);
    let mut r0 = r(b0)?;
    if r0.abs() <= tol * scale {
        return Ok((b0, r0, true));
    }
    let mut r1 = r(b1)?;
    for _ in 0..max_iter {
        if r1.abs() <= tol * scale {
            return Ok((b1, r1, true));
        }
        if r1 == r0 {
            break;
        }
        let b2 = b1 - r1 * (b1 - b0) / (r1 - r0);
        b0 = b1;
        r0 = r1;
        b1 = b2;
        r1 = r(b1)?;
        if (b1 - b0).abs() <= tol {
            return Ok((b1, r1, true));
        }
    }
    Ok((b1, r1, false))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub entropy: f64,
    pub entropy_change: f64,
    pub beta: f64,
    /// `S(w^{n+1}) - S(wⁿ) + β Δt R(w^{n+½})`.
    pub relaxation_residual: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub w: Vec<f64>,
    pub beta: f64,
    pub newton_iterations: usize,
    /// `R(w^{n+½})`.
    pub entropy_rate: f64,
}

/// One implicit midpoint step, relaxed if requested.
pub fn rrk_step(semi: &SemiDiscretization, w_n: &[f64], dt: f64, settings: &TimeSettings) -> Result<StepOutcome> {
    let (w_star, report) = midpoint_solve(semi, w_n, dt, &settings.newton)?;
    let half: Vec<f64> = w_star.iter().zip(w_n).map(|(a, b)| 0.5 * (a + b)).collect();
    let rate = semi.entropy_rate(&half)?;
    let mut beta = 1.0;
    if settings.relaxation {
        let (b, _, ok) = relaxation_beta(semi, w_n, &w_star, dt, rate, settings.secant_tol, settings.secant_max_iter)?;
        if ok && b.is_finite() && b > 0.0 {
            beta = b;
        } else {
            warn!("relaxation secant failed (beta = {b}); taking the plain midpoint step");
        }
    }
    let w = if beta == 1.0 { w_star } else { w_n.iter().zip(&w_star).map(|(a, b)| a + beta * (b - a)).collect() };
    Ok(StepOutcome { w, beta, newton_iterations: report.iterations, entropy_rate: rate })
}

/// CFL time step `CFL · min_k h_k / max |u·n| + c` over all SBP nodes.
pub fn cfl_time_step(semi: &SemiDiscretization, w: &[f64], cfl: f64) -> Result<f64> {
    let mesh = &semi.space.mesh;
    let hmin = (0..mesh.num_elements()).map(|k| mesh.diameter(k)).fold(f64::INFINITY, f64::min);
    let states = semi.nodal_conservative(w)?;
    let smax = states.iter().flatten().map(|u| semi.gas.max_wave_speed(u)).fold(0.0, f64::max);
    Ok(cfl * hmin / smax)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub w: Vec<f64>,
    pub t: f64,
    pub steps: usize,
}

/// March from `w0` to `final_time`; `callback` sees the initial state (step 0)
/// and every accepted step.
pub fn advance(
    semi: &SemiDiscretization,
    w0: &[f64],
    final_time: f64,
    settings: &TimeSettings,
    mut callback: impl FnMut(&StepInfo, &[f64]),
) -> Result<Trajectory> {
    let mut w = w0.to_vec();
    let mut t = 0.0;
    let mut s = semi.total_entropy(&w)?;
    let mut step = 0;
    callback(
        &StepInfo { step, t, dt: 0.0, entropy: s, entropy_change: 0.0, beta: 1.0, relaxation_residual: 0.0, newton_iterations: 0 },
        &w,
    );
    while t < final_time * (1.0 - 1e-14) {
        let mut dt = match settings.fixed_dt {
            Some(h) => final_time / (final_time / h).ceil(),
            None => cfl_time_step(semi, &w, settings.cfl)?,
        };
        if t + dt > final_time {
            dt = final_time - t;
        }
        let out = rrk_step(semi, &w, dt, settings)?;
        let s_next = semi.total_entropy(&out.w)?;
        step += 1;
        t = if (final_time - (t + dt)).abs() < 1e-14 * final_time.max(1.0) { final_time } else { t + dt };
        let info = StepInfo {
            step,
            t,
            dt,
            entropy: s_next,
            entropy_change: s_next - s,
            beta: out.beta,
            relaxation_residual: s_next - s + out.beta * dt * out.entropy_rate,
            newton_iterations: out.newton_iterations,
        };
        let w_next = out.w;
        callback(&info, &w_next);
        w = w_next;
        s = s_next;
    }
    Ok(Trajectory { w, t, steps: step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgd_ops::DgdSpace;
    use crate::mesh::Mesh;
    use crate::problems::entropy_wave;
    use crate::residual::FluxMode;

    fn wave_semi(k: usize, p: usize, mode: FluxMode) -> (SemiDiscretization, Vec<f64>) {
        let sd = SemiDiscretization::new(DgdSpace::new(Mesh::interval(k, 0.0, 1.0, true).unwrap(), p).unwrap(), 1.4, mode, None).unwrap();
        let gas = sd.gas;
        let w = sd.interpolate(&|x| entropy_wave(&gas, x[0], 0.0)).unwrap();
        (sd, w)
    }

    #[test]
    fn free_stream_is_a_fixed_point() {
        let sd = SemiDiscretization::new(DgdSpace::new(Mesh::unit_square(3, true).unwrap(), 1).unwrap(), 1.4, FluxMode::Stable, None).unwrap();
        let u0 = sd.gas.from_primitive(1.0, [0.5, 0.2], 1.0);
        let w = sd.interpolate(&|_| u0).unwrap();
        let (ws, rep) = midpoint_solve(&sd, &w, 0.1, &NewtonSettings::default()).unwrap();
        assert!(rep.iterations <= 1);
        assert!(ws.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-13));
        let (beta, _, ok) = relaxation_beta(&sd, &w, &ws, 0.1, 0.0, 1e-13, 50).unwrap();
        assert!(ok && beta == 1.0);
    }

    #[test]
    fn midpoint_jacobian_matches_fd() {
        let (sd, w) = wave_semi(8, 2, FluxMode::Stable);
        let dt = 0.02;
        let wstar: Vec<f64> = w.iter().enumerate().map(|(i, x)| x + 1e-3 * ((i as f64) * 0.7).sin()).collect();
        let jac = midpoint_jacobian(&sd, &wstar, &w, dt, 1e-8).unwrap();
        let m_n = sd.dgd_mass_term(&w).unwrap();
        let delta: Vec<f64> = (0..w.len()).map(|i| ((i as f64) * 1.3).cos()).collect();
        let jd = jac.matvec(&delta);
        let g0 = midpoint_residual(&sd, &wstar, &m_n, &w, dt).unwrap();
        let err = |eps: f64| {
            let wp: Vec<f64> = wstar.iter().zip(&delta).map(|(a, b)| a + eps * b).collect();
            let g1 = midpoint_residual(&sd, &wp, &m_n, &w, dt).unwrap();
            max_abs(&g1.iter().zip(&g0).zip(&jd).map(|((a, b), c)| (a - b) / eps - c).collect::<Vec<_>>())
        };
        let (e1, e2) = (err(1e-4), err(5e-5));
        assert!(e1 < 1e-2 && e1 / e2 > 1.8, "{e1:e} {e2:e}");
    }

    #[test]
    fn relaxed_step_balances_entropy() {
        for mode in [FluxMode::Conservative, FluxMode::Stable] {
            let (sd, w) = wave_semi(10, 2, mode);
            let settings = TimeSettings::default();
            let dt = cfl_time_step(&sd, &w, 1.0).unwrap();
            let out = rrk_step(&sd, &w, dt, &settings).unwrap();
            let (w1, beta) = (out.w, out.beta);
            assert!((beta - 1.0).abs() < 1e-3);
            let ds = sd.total_entropy(&w1).unwrap() - sd.total_entropy(&w).unwrap();
            match mode {
                FluxMode::Conservative => assert!(ds.abs() < 1e-12, "{ds:e}"),
                FluxMode::Stable => assert!(ds < 1e-14, "{ds:e}"),
            }
        }
    }

    #[test]
    fn beta_tends_to_one() {
        let (sd, w) = wave_semi(10, 1, FluxMode::Stable);
        let settings = TimeSettings::default();
        let b = |dt: f64| (rrk_step(&sd, &w, dt, &settings).unwrap().beta - 1.0).abs();
        let (b1, b2) = (b(0.04), b(0.02));
        assert!(b2 < b1 * 0.6, "{b1:e} {b2:e}");
    }

    #[test]
    fn advance_hits_final_time() {
        let (sd, w) = wave_semi(8, 1, FluxMode::Stable);
        let mut settings = TimeSettings::default();
        settings.cfl = 1.0;
        let mut log = Vec::new();
        let tr = advance(&sd, &w, 0.1, &settings, |info, _| log.push(info.clone())).unwrap();
        assert_eq!(tr.t, 0.1);
        assert_eq!(log.len(), tr.steps + 1);
        let dt = log[1].dt;
        assert!((tr.steps as f64 - 0.1 / dt).abs() <= 1.0);
        assert!(log.iter().skip(1).all(|i| i.entropy_change <= 1e-14 && i.relaxation_residual.abs() < 1e-12));
        let none = advance(&sd, &w, 0.0, &settings, |_, _| {}).unwrap();
        assert_eq!((none.steps, none.w), (0, w));
    }

    #[test]
    fn temporal_order_is_two() {
        let (sd, w) = wave_semi(6, 1, FluxMode::Stable);
        let settings = TimeSettings::default();
        let run = |n: usize| {
            let mut u = w.clone();
            for _ in 0..n {
                u = rrk_step(&sd, &u, 0.1 / n as f64, &settings).unwrap().w;
            }
            u
        };
        let (a, b, c) = (run(2), run(4), run(8));
        let e1 = max_abs(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        let e2 = max_abs(&b.iter().zip(&c).map(|(x, y)| x - y).collect::<Vec<_>>());
        let rate = (e1 / e2).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
    }
}
