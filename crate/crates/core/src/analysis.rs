//! Linearized spectra, error norms and convergence studies.

use nalgebra::{Complex, DMatrix};

use crate::dgd_ops::{assemble_global, AdvectionOperator, DgdSpace};
use crate::error::{DgdError, Result};
use crate::euler::State;
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, Point};
use crate::problems::{advection_exact, entropy_wave, RiemannSolution};
use crate::residual::{FluxMode, GhostFn, SemiDiscretization};
use crate::timeint::{advance, TimeSettings};

/// Central-difference step used for spectra.
pub const SPECTRUM_FD_STEP: f64 = 1e-7;

/// Mass Jacobian `∂m̃/∂w̃` and residual Jacobian `∂R̃/∂w̃` at `w0`.
pub fn assemble_linearization(semi: &SemiDiscretization, w0: &[f64]) -> Result<(CsrMatrix, CsrMatrix)> {
    let m = semi.mass_jacobian(w0)?;
    let j = semi.residual_jacobian_fd(w0, SPECTRUM_FD_STEP, true)?;
    Ok((m, j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Eigenvalues of `-M̃⁻¹J̃`, sorted by real part then imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub spectral_radius: f64,
    pub max_real: f64,
    /// Divides the eigenvalues for the normalized quantities.
    pub normalization: f64,
}

impl SpectrumReport {
    pub fn max_normalized_real(&self) -> f64 {
        self.max_real / self.normalization
    }

    pub fn normalized(&self) -> impl Iterator<Item = Complex<f64>> + '_ {
        self.eigenvalues.iter().map(move |l| l / self.normalization)
    }

    pub fn renormalize(&mut self, normalization: f64) {
        self.normalization = normalization;
    }
}

/// Dense eigen-decomposition of `-M̃⁻¹J̃` through the congruent matrix
/// `-L⁻¹J̃L⁻ᵀ` (`M̃ = LLᵀ`). The normalization defaults to the spectral radius.
pub fn compute_spectrum(m: &CsrMatrix, j: &CsrMatrix) -> Result<SpectrumReport> {
    let n = m.nrows();
    if j.nrows() != n || j.ncols() != n || m.ncols() != n {
        return Err(DgdError::DimensionMismatch(format!("mass {}x{}, jacobian {}x{}", n, m.ncols(), j.nrows(), j.ncols())));
    }
    let md = m.to_dense();
    let sym = 0.5 * (&md + md.transpose());
    let chol = sym.cholesky().ok_or_else(|| DgdError::Eigen("mass Jacobian is not positive definite".into()))?;
    let l = chol.l();
    let jd = j.to_dense();
    let x = l
        .solve_lower_triangular(&jd)
        .ok_or_else(|| DgdError::Eigen("singular Cholesky factor".into()))?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| DgdError::Eigen("singular Cholesky factor".into()))?;
    let a: DMatrix<f64> = -y.transpose();
    let schur = nalgebra::Schur::try_new(a, 1e-15, 10_000 * n.max(1))
        .ok_or_else(|| DgdError::Eigen("Schur iteration did not converge".into()))?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let max_real = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumReport { eigenvalues, spectral_radius, max_real, normalization: spectral_radius })
}

/// `sqrt(Σ_k e_kᵀ H_k e_k)` for nodal values `values[k][q]` against `exact`.
/// Summed serially so the result does not depend on the thread count.
pub fn l2_error_nodal(space: &DgdSpace, values: &[Vec<f64>], exact: &dyn Fn(Point) -> f64) -> f64 {
    space
        .operators
        .iter()
        .zip(values)
        .map(|(op, v)| op.nodes.iter().zip(&op.h).zip(v).map(|((x, h), vq)| h * (vq - exact(*x)).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// L2 error of the prolonged conservative component `comp`.
pub fn l2_error(
    semi: &SemiDiscretization,
    w: &[f64],
    exact: &dyn Fn(Point) -> State,
    comp: usize,
) -> Result<f64> {
    let states = semi.nodal_conservative(w)?;
    let values: Vec<Vec<f64>> = states.iter().map(|s| s.iter().map(|u| u[comp]).collect()).collect();
    Ok(l2_error_nodal(&semi.space, &values, &|x| exact(x)[comp]))
}

/// Conservative state of the prolonged solution at each element centroid.
pub fn centroid_states(semi: &SemiDiscretization, w: &[f64]) -> Result<Vec<State>> {
    let mesh = &semi.space.mesh;
    let s = semi.nvar();
    (0..mesh.num_elements())
        .map(|k| {
            let pr = &semi.space.prolongations[k];
            let row = pr.at_points(&[mesh.centroid(k)]);
            let mut wc = [0.0; 4];
            for (m, &nu) in pr.members.iter().enumerate() {
                for (i, wi) in wc.iter_mut().enumerate().take(s) {
                    *wi += row[(0, m)] * w[s * nu + i];
                }
            }
            semi.gas.state_from_entropy_vars(&wc)
        })
        .collect()
}

/// `Σ_k |Ω_k| |f_h(x̄_k) - f(x̄_k)|` with `f_h` the prolonged field at each centroid.
pub fn l1_error_centroids(
    semi: &SemiDiscretization,
    w: &[f64],
    exact: &dyn Fn(Point) -> f64,
    field: &dyn Fn(&State) -> f64,
) -> Result<f64> {
    let mesh = &semi.space.mesh;
    let states = centroid_states(semi, w)?;
    Ok(states.iter().enumerate().map(|(k, u)| mesh.measure(k) * (field(u) - exact(mesh.centroid(k))).abs()).sum())
}

/// Errors on a mesh sequence with pairwise observed orders `log2(e_h / e_{h/2})`
/// (the sequence is assumed to halve `h`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub label: String,
    pub degree: usize,
    pub sizes: Vec<usize>,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ConvergenceTable {
    pub fn rates(&self) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for i in 1..self.errors.len() {
            let r = (self.errors[i - 1] / self.errors[i]).ln() / (self.h[i - 1] / self.h[i]).ln();
            out.push(Some(r));
        }
        out
    }

    pub fn last_rate(&self) -> Option<f64> {
        self.rates().last().copied().flatten()
    }
}

/// Advection of the sine profile on `space` to `final_time` with classical RK4 at
/// `Δt ≤ 1/ρ(M̃⁻¹Ã)`, small enough that temporal error stays well below the spatial one.
/// Returns the final coefficients and the L2 error.
pub fn advection_run(space: &DgdSpace, velocity: Point, final_time: f64) -> Result<(Vec<f64>, f64)> {
    let dim = space.dim();
    let adv = AdvectionOperator::new(assemble_global(space), velocity)?;
    let neg = adv.rhs_matrix().axpby(-1.0, adv.rhs_matrix(), 0.0);
    let radius = compute_spectrum(&adv.op.m, &neg)?.spectral_radius;
    let steps = (final_time * radius).ceil().max(1.0) as usize;
    let dt = final_time / steps as f64;
    let mut u: Vec<f64> = space.mesh.centroids().iter().map(|c| advection_exact(dim, velocity, *c, 0.0)).collect();
    for _ in 0..steps {
        let k1 = adv.rhs(&u)?;
        let k2 = adv.rhs(&axpy(&u, 0.5 * dt, &k1))?;
        let k3 = adv.rhs(&axpy(&u, 0.5 * dt, &k2))?;
        let k4 = adv.rhs(&axpy(&u, dt, &k3))?;
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let nodal: Vec<Vec<f64>> = space.prolongations.iter().map(|pr| pr.apply(&u)).collect();
    let err = l2_error_nodal(space, &nodal, &|x| advection_exact(dim, velocity, x, final_time));
    Ok((u, err))
}

/// Periodic 1D advection with unit speed over one period on `[0, 1]` meshes with `sizes` elements.
pub fn advection_convergence(p: usize, sizes: &[usize]) -> Result<ConvergenceTable> {
    let mut errors = Vec::new();
    let mut hs = Vec::new();
    for &k in sizes {
        let space = DgdSpace::new(Mesh::interval(k, 0.0, 1.0, true)?, p)?;
        errors.push(advection_run(&space, [1.0, 0.0], 1.0)?.1);
        hs.push(1.0 / k as f64);
    }
    Ok(ConvergenceTable { label: "advection".into(), degree: p, sizes: sizes.to_vec(), h: hs, errors })
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

/// Time step for the smooth Euler study: `0.5 h^{max(1, (p+1)/2)}` keeps the
/// second-order midpoint error below the spatial one.
pub fn entropy_wave_time_step(p: usize, h: f64) -> f64 {
    0.5 * h.powf(((p + 1) as f64 / 2.0).max(1.0))
}

/// Density L2 error of the 1D entropy wave at `final_time`.
pub fn entropy_wave_convergence(
    p: usize,
    sizes: &[usize],
    mode: FluxMode,
    final_time: f64,
    relaxation: bool,
) -> Result<ConvergenceTable> {
    let mut errors = Vec::new();
    let mut hs = Vec::new();
    for &k in sizes {
        let h = 1.0 / k as f64;
        let semi = SemiDiscretization::new(DgdSpace::new(Mesh::interval(k, 0.0, 1.0, true)?, p)?, 1.4, mode, None)?;
        let gas = semi.gas;
        let w0 = semi.interpolate(&|x| entropy_wave(&gas, x[0], 0.0))?;
        let settings = TimeSettings { fixed_dt: Some(entropy_wave_time_step(p, h)), relaxation, ..TimeSettings::default() };
        let traj = advance(&semi, &w0, final_time, &settings, |_, _| {})?;
        errors.push(l2_error(&semi, &traj.w, &|x| entropy_wave(&gas, x[0], final_time), 0)?);
        hs.push(h);
    }
    Ok(ConvergenceTable { label: "entropy-wave".into(), degree: p, sizes: sizes.to_vec(), h: hs, errors })
}

/// Shock-tube semi-discretization on `[0, 1]` with the initial states held at both ends.
pub fn sod_semi(k: usize, p: usize, mode: FluxMode) -> Result<SemiDiscretization> {
    let gas1 = crate::euler::Gas::new(1.4, 1);
    let ghost: GhostFn = std::sync::Arc::new(move |x: Point| crate::problems::sod_ic(&gas1, x[0]));
    SemiDiscretization::new(DgdSpace::new(Mesh::interval(k, 0.0, 1.0, false)?, p)?, 1.4, mode, Some(ghost))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SodResult {
    pub k: usize,
    pub degree: usize,
    pub w: Vec<f64>,
    pub l1_error: f64,
    pub steps: usize,
}

/// Sod run in stable mode to `final_time`; L1 error of `𝒲₁` at the centroids.
pub fn run_sod(k: usize, p: usize, final_time: f64, settings: &TimeSettings) -> Result<(SemiDiscretization, SodResult)> {
    let semi = sod_semi(k, p, FluxMode::Stable)?;
    let gas = semi.gas;
    let w0 = semi.interpolate(&|x| crate::problems::sod_ic(&gas, x[0]))?;
    let traj = advance(&semi, &w0, final_time, settings, |_, _| {})?;
    let exact = RiemannSolution::sod()?;
    let l1 = sod_l1_error(&semi, &traj.w, &exact, final_time)?;
    Ok((semi, SodResult { k, degree: p, w: traj.w, l1_error: l1, steps: traj.steps }))
}

pub fn sod_l1_error(semi: &SemiDiscretization, w: &[f64], exact: &RiemannSolution, t: f64) -> Result<f64> {
    let gas = semi.gas;
    l1_error_centroids(
        semi,
        w,
        &|x| gas.entropy_vars(&exact.state(&gas, x[0], t)).map(|v| v[0]).unwrap_or(f64::NAN),
        &|u| gas.entropy_vars(u).map(|v| v[0]).unwrap_or(f64::NAN),
    )
}

/// Positions of the largest jumps of `f` between neighbouring centroid samples,
/// searched separately inside each window `(lo, hi)`.
pub fn locate_jumps(x: &[f64], f: &[f64], windows: &[(f64, f64)]) -> Vec<Option<f64>> {
    windows
        .iter()
        .map(|&(lo, hi)| {
            let mut best: Option<(f64, f64)> = None;
            for i in 0..x.len().saturating_sub(1) {
                let mid = 0.5 * (x[i] + x[i + 1]);
                if mid < lo || mid > hi {
                    continue;
                }
                let jump = (f[i + 1] - f[i]).abs();
                if best.is_none_or(|(j, _)| jump > j) {
                    best = Some((jump, mid));
                }
            }
            best.map(|(_, m)| m)
        })
        .collect()
}

/// Equal-area position of a step from `upstream` (left) to `downstream` (right)
/// inside `window`: the jump location of the ideal step that holds the same
/// integral of `f` over the cells whose centroids fall in the window. Insensitive
/// to oscillations that do not change the integral.
pub fn equal_area_location(
    x: &[f64],
    widths: &[f64],
    f: &[f64],
    window: (f64, f64),
    upstream: f64,
    downstream: f64,
) -> Option<f64> {
    let cells: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= window.0 && x[i] <= window.1).collect();
    let first = *cells.first()?;
    if upstream == downstream {
        return None;
    }
    let start = x[first] - 0.5 * widths[first];
    let area: f64 = cells.iter().map(|&i| widths[i] * (f[i] - downstream)).sum();
    Some(start + area / (upstream - downstream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgd_ops::DgdSpace;

    #[test]
    fn advection_spectrum_is_imaginary() {
        // uniform periodic 1D: neighbouring prolongations agree on faces, so Ẽ = 0 and Q̃ is skew
        for p in 1..=4 {
            let space = DgdSpace::new(Mesh::interval(12, 0.0, 1.0, true).unwrap(), p).unwrap();
            let adv = AdvectionOperator::new(assemble_global(&space), [1.0, 0.0]).unwrap();
            let neg = adv.rhs_matrix().axpby(-1.0, adv.rhs_matrix(), 0.0);
            let rep = compute_spectrum(&adv.op.m, &neg).unwrap();
            assert_eq!(rep.eigenvalues.len(), space.num_elements());
            let re = rep.eigenvalues.iter().map(|l| l.re.abs()).fold(0.0, f64::max);
            assert!(re <= 1e-10 * rep.spectral_radius, "p={p}: {re:e} vs {:e}", rep.spectral_radius);
        }
    }

    #[test]
    fn spectrum_of_diagonal_pair() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]);
        let j = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, -8.0)]);
        let rep = compute_spectrum(&m, &j).unwrap();
        assert!((rep.eigenvalues[0].re + 1.0).abs() < 1e-14);
        assert!((rep.eigenvalues[1].re - 2.0).abs() < 1e-14);
        assert_eq!(rep.max_real, rep.eigenvalues[1].re);
        assert!((rep.spectral_radius - 2.0).abs() < 1e-14);
    }

    #[test]
    fn linearization_matches_directional_fd() {
        let semi = SemiDiscretization::new(DgdSpace::new(Mesh::interval(8, 0.0, 1.0, true).unwrap(), 2).unwrap(), 1.4, FluxMode::Stable, None).unwrap();
        let gas = semi.gas;
        let w = semi.interpolate(&|x| entropy_wave(&gas, x[0], 0.0)).unwrap();
        let (m, j) = assemble_linearization(&semi, &w).unwrap();
        let md = m.to_dense();
        assert!((&md - md.transpose()).amax() <= 1e-12 * md.amax());
        let d: Vec<f64> = (0..w.len()).map(|i| ((i as f64) * 0.37).sin()).collect();
        let jd = j.matvec(&d);
        let eps = 1e-6;
        let rp = semi.dgd_residual(&axpy(&w, eps, &d)).unwrap();
        let rm = semi.dgd_residual(&axpy(&w, -eps, &d)).unwrap();
        let err = jd.iter().enumerate().map(|(i, v)| (v - (rp[i] - rm[i]) / (2.0 * eps)).abs()).fold(0.0, f64::max);
        let scale = jd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6 * scale.max(1.0), "{err:e}");
    }

    #[test]
    fn stable_linearization_about_uniform_flow() {
        for (mesh, p) in [(Mesh::interval(10, 0.0, 1.0, true).unwrap(), 2), (Mesh::unit_square(4, true).unwrap(), 1)] {
            let semi = SemiDiscretization::new(DgdSpace::new(mesh, p).unwrap(), 1.4, FluxMode::Stable, None).unwrap();
            let u0 = semi.gas.from_primitive(1.0, [0.5, 0.2], 1.0);
            let w = semi.interpolate(&|_| u0).unwrap();
            let (m, j) = assemble_linearization(&semi, &w).unwrap();
            let rep = compute_spectrum(&m, &j).unwrap();
            assert_eq!(rep.eigenvalues.len(), semi.num_unknowns());
            assert!(rep.max_normalized_real() <= 1e-8, "{:e}", rep.max_normalized_real());
            assert!(rep.eigenvalues.iter().any(|l| l.re < -1e-3 * rep.spectral_radius));
        }
    }

    #[test]
    fn reproduced_fields_have_zero_l2_error() {
        let space = DgdSpace::new(Mesh::unit_square(6, true).unwrap(), 1).unwrap();
        let f = |x: Point| 0.3 + 2.0 * x[0] - x[1];
        let u: Vec<f64> = space.mesh.centroids().iter().map(|c| f(*c)).collect();
        let nodal: Vec<Vec<f64>> = space.prolongations.iter().map(|pr| pr.apply(&u)).collect();
        // periodic wrap makes the field discontinuous across the seam, so compare unwrapped elements
        let inner: Vec<usize> = (0..space.num_elements()).filter(|&k| space.stencil_unwrapped(k)).collect();
        assert!(!inner.is_empty());
        for k in inner {
            let op = &space.operators[k];
            for (x, v) in op.nodes.iter().zip(&nodal[k]) {
                assert!((v - f(*x)).abs() < 1e-12);
            }
        }
        let zero = vec![vec![0.0; 7]; space.num_elements()];
        assert_eq!(l2_error_nodal(&space, &zero, &|_| 0.0), 0.0);
    }

    #[test]
    fn l2_error_of_constant_offset() {
        let space = DgdSpace::new(Mesh::interval(5, 0.0, 2.0, true).unwrap(), 2).unwrap();
        let vals: Vec<Vec<f64>> = space.operators.iter().map(|op| vec![1.0; op.num_nodes()]).collect();
        assert!((l2_error_nodal(&space, &vals, &|_| 0.0) - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn rates_are_base_two_logs() {
        let t = ConvergenceTable { label: String::new(), degree: 1, sizes: vec![8, 16, 32], h: vec![0.125, 0.0625, 0.03125], errors: vec![1.0, 0.25, 0.0625] };
        let r = t.rates();
        assert!(r[0].is_none());
        assert!((r[1].unwrap() - 2.0).abs() < 1e-14 && (t.last_rate().unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn advection_p1_converges() {
        let t = advection_convergence(1, &[16, 32]).unwrap();
        assert!(t.last_rate().unwrap() > 1.5, "{:?}", t.errors);
    }

    #[test]
    fn equal_area_ignores_zero_mean_oscillation() {
        let n = 100;
        let h = 1.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let f: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| if xi < 0.6 { 2.0 } else { 1.0 } + if (55..65).contains(&i) { 0.3 * if i % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 })
            .collect();
        let pos = equal_area_location(&x, &vec![h; n], &f, (0.4, 0.8), 2.0, 1.0).unwrap();
        assert!((pos - 0.6).abs() < 1e-12);
        assert!(equal_area_location(&x, &vec![h; n], &f, (2.0, 3.0), 2.0, 1.0).is_none());
    }

    #[test]
    fn jumps_are_located_per_window() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 + 0.5).collect();
        let f: Vec<f64> = x.iter().map(|&v| if v < 3.0 { 1.0 } else if v < 7.0 { 0.5 } else { 0.0 }).collect();
        let j = locate_jumps(&x, &f, &[(0.0, 5.0), (5.0, 10.0)]);
        assert_eq!(j, vec![Some(3.0), Some(7.0)]);
    }
}
