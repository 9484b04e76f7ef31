//! Global DGD operators assembled from element SBP operators and prolongations.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::basis::{build_prolongation, PolyBasis, Prolongation};
use crate::error::{DgdError, Result};
use crate::linalg::{CsrMatrix, SparseLu};
use crate::mesh::{Mesh, Point};
use crate::quadrature;
use crate::sbp::{self, element_rule, map_to_physical, SbpOperator};
use crate::stencil::{build_all_stencils, Stencil};

/// Reference element operator used for a degree-`p` DGD space.
///
/// In 1D the `p + 1` Lobatto operator only integrates to degree `2p - 1`, so
/// the `p + 2` Lobatto operator is used to keep the norm `2p` exact. On
/// triangles the `p = 1` SBP-Γ operator serves degrees 0 and 1; the `p = 2`
/// operator integrates exactly to degree 4.
pub fn reference_operator(dim: usize, p: usize) -> Result<SbpOperator> {
    match dim {
        1 => sbp::build_sbp_1d_2p_exact(p),
        2 if p <= 2 => sbp::build_tri_sbp(p.max(1)),
        2 => Err(DgdError::UnsupportedDegree { degree: p, what: "2D DGD (p <= 2)" }),
        _ => Err(DgdError::InvalidMesh(format!("unsupported dimension {dim}"))),
    }
}

/// Mesh, stencils, prolongations and physical element operators of a DGD space.
#[derive(Debug, Clone)]
pub struct DgdSpace {
    pub mesh: Mesh,
    pub degree: usize,
    pub stencils: Vec<Stencil>,
    pub prolongations: Vec<Prolongation>,
    pub operators: Vec<SbpOperator>,
}

impl DgdSpace {
    pub fn new(mesh: Mesh, p: usize) -> Result<Self> {
        let reference = reference_operator(mesh.dim(), p)?;
        let stencils = build_all_stencils(&mesh, p)?;
        let operators: Vec<SbpOperator> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|k| map_to_physical(&reference, &mesh.element_vertices(k)).map_err(|_| DgdError::DegenerateElement(k)))
            .collect::<Result<_>>()?;
        let prolongations: Vec<Prolongation> = stencils
            .par_iter()
            .zip(&operators)
            .map(|(st, op)| build_prolongation(p, mesh.dim(), st, &op.nodes))
            .collect::<Result<_>>()?;
        Ok(DgdSpace { mesh, degree: p, stencils, prolongations, operators })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// True if element `k`'s stencil needs no periodic translation.
    pub fn stencil_unwrapped(&self, k: usize) -> bool {
        let st = &self.stencils[k];
        st.members.iter().zip(&st.member_centroids).all(|(&m, c)| {
            let raw = self.mesh.centroid(m);
            (raw[0] - c[0]).abs() < 1e-12 && (raw[1] - c[1]).abs() < 1e-12
        })
    }
}

/// `max |P_k q(x̃_{N_k}) - q(X_k)|` over elements and monomials `q` of degree ≤ p,
/// sampling at the member centroids as seen from the owner (periodic images included).
pub fn reproduction_error(space: &DgdSpace) -> f64 {
    let dim = space.dim();
    (0..space.num_elements())
        .map(|k| {
            let st = &space.stencils[k];
            let basis = PolyBasis::new(space.degree, dim, space.mesh.centroid(k), space.mesh.diameter(k));
            let pr = &space.prolongations[k];
            let nodes = &space.operators[k].nodes;
            let mut err: f64 = 0.0;
            for j in 0..basis.len() {
                let samples: Vec<f64> = st.member_centroids.iter().map(|&c| basis.eval(j, c)).collect();
                for (q, x) in nodes.iter().enumerate() {
                    let v: f64 = (0..samples.len()).map(|m| pr.matrix[(q, m)] * samples[m]).sum();
                    err = err.max((v - basis.eval(j, *x)).abs());
                }
            }
            err
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct GlobalOperator {
    pub degree: usize,
    pub dim: usize,
    pub m: CsrMatrix,
    pub q: Vec<CsrMatrix>,
    pub e: Vec<CsrMatrix>,
}

impl GlobalOperator {
    /// Largest entrywise difference over `M`, `Q_d` and `E_d`.
    pub fn max_diff(&self, other: &GlobalOperator) -> f64 {
        let mut d = self.m.axpby(1.0, &other.m, -1.0).max_abs();
        for i in 0..self.dim {
            d = d.max(self.q[i].axpby(1.0, &other.q[i], -1.0).max_abs());
            d = d.max(self.e[i].axpby(1.0, &other.e[i], -1.0).max_abs());
        }
        d
    }

    /// `D̃_d = M̃^{-1} Q̃_d` applied to `u`.
    pub fn apply_d(&self, lu: &SparseLu, dir: usize, u: &[f64]) -> Result<Vec<f64>> {
        lu.solve(&self.q[dir].matvec(u))
    }
}

/// Element blocks `(members, M_k, [Q_k], [E_k])` scattered into global matrices.
type Blocks = Vec<(Vec<usize>, DMatrix<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)>;

fn scatter(k_total: usize, dim: usize, degree: usize, blocks: Blocks) -> GlobalOperator {
    let mut tm = Vec::new();
    let mut tq = vec![Vec::new(); dim];
    let mut te = vec![Vec::new(); dim];
    for (members, m, q, e) in blocks {
        for (a, &i) in members.iter().enumerate() {
            for (b, &j) in members.iter().enumerate() {
                tm.push((i, j, m[(a, b)]));
                for d in 0..dim {
                    tq[d].push((i, j, q[d][(a, b)]));
                    te[d].push((i, j, e[d][(a, b)]));
                }
            }
        }
    }
    GlobalOperator {
        degree,
        dim,
        m: CsrMatrix::from_triplets(k_total, k_total, &tm),
        q: tq.iter().map(|t| CsrMatrix::from_triplets(k_total, k_total, t)).collect(),
        e: te.iter().map(|t| CsrMatrix::from_triplets(k_total, k_total, t)).collect(),
    }
}

/// `M̃ = Σ P_kᵀ H_k P_k`, `Q̃_d = Σ P_kᵀ Q_d P_k`, `Ẽ_d = Σ P_kᵀ E_d P_k`.
pub fn assemble_global(space: &DgdSpace) -> GlobalOperator {
    let dim = space.dim();
    let blocks: Blocks = space
        .prolongations
        .par_iter()
        .zip(&space.operators)
        .map(|(pr, op)| {
            let p = &pr.matrix;
            let mut hp = p.clone();
            for (r, &h) in op.h.iter().enumerate() {
                hp.row_mut(r).scale_mut(h);
            }
            let m = p.transpose() * hp;
            let q = (0..dim).map(|d| p.transpose() * &op.q[d] * p).collect();
            let e = (0..dim).map(|d| p.transpose() * &op.e[d] * p).collect();
            (pr.members.clone(), m, q, e)
        })
        .collect();
    scatter(space.num_elements(), dim, space.degree, blocks)
}

/// The integrals defining the DGD matrices, evaluated with Gauss rules of
/// degree `2p + 2` on every element and face, independent of the SBP nodes.
pub fn quadrature_oracle(space: &DgdSpace) -> GlobalOperator {
    let dim = space.dim();
    let p = space.degree;
    let mesh = &space.mesh;
    let blocks: Blocks = (0..space.num_elements())
        .into_par_iter()
        .map(|k| {
            let pr = &space.prolongations[k];
            let verts = mesh.element_vertices(k);
            let rule = element_rule(&verts, 2 * p + 2);
            let pts: Vec<Point> = rule.iter().map(|(x, _)| *x).collect();
            let phi = pr.at_points(&pts);
            let mut wphi = phi.clone();
            for (r, (_, w)) in rule.iter().enumerate() {
                wphi.row_mut(r).scale_mut(*w);
            }
            let m = wphi.transpose() * &phi;
            let q = (0..dim).map(|d| wphi.transpose() * pr.deriv_at_points(&pts, d)).collect();

            let nk = pr.stencil_size();
            let mut e = vec![DMatrix::zeros(nk, nk); dim];
            for (lf, (a, b)) in face_segments(&verts).into_iter().enumerate() {
                let (normal, _) = mesh.local_face_geometry(k, lf);
                let face_rule: Vec<(Point, f64)> =
                    if dim == 1 { vec![(a, 1.0)] } else { quadrature::segment_rule(a, b, p + 2) };
                let fpts: Vec<Point> = face_rule.iter().map(|(x, _)| *x).collect();
                let fphi = pr.at_points(&fpts);
                for (r, (_, w)) in face_rule.iter().enumerate() {
                    let row = fphi.row(r);
                    let outer = row.transpose() * row;
                    for d in 0..dim {
                        e[d] += *w * normal[d] * &outer;
                    }
                }
            }
            (pr.members.clone(), m, q, e)
        })
        .collect();
    scatter(space.num_elements(), dim, p, blocks)
}

/// Faces of an element as vertex pairs (a 1D face is a single point, returned twice).
fn face_segments(verts: &[Point]) -> Vec<(Point, Point)> {
    if verts.len() == 2 {
        vec![(verts[0], verts[0]), (verts[1], verts[1])]
    } else {
        (0..3).map(|i| (verts[i], verts[(i + 1) % 3])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseNormReport {
    /// Smallest eigenvalue of `M̃`.
    pub min_eigenvalue: f64,
    /// `max |Q̃_d ṽ_i - M̃ ṽ_i'|` over checked rows.
    pub accuracy: f64,
    /// `max |Q̃_d + Q̃_dᵀ - Ẽ_d|`.
    pub q_plus_qt_minus_e: f64,
    /// `max |ṽ_iᵀ Ẽ_d ṽ_j - ∮_∂Ω V_i V_j n_d dΓ|`.
    pub boundary_accuracy: f64,
    /// Rows where the accuracy check applies (all rows on non-periodic meshes).
    pub rows_checked: usize,
}

/// Check that the global DGD operators form a degree-`p` dense-norm SBP operator.
///
/// A polynomial sampled at the centroids is not periodic, so on periodic meshes
/// the accuracy check is restricted to rows whose contributing stencils need no
/// periodic translation, and the boundary check uses the constant only.
pub fn verify_dense_norm_sbp(space: &DgdSpace, op: &GlobalOperator) -> DenseNormReport {
    let mesh = &space.mesh;
    let kk = space.num_elements();
    let dim = space.dim();
    let (lo, hi) = mesh.bounds();
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let basis = PolyBasis::new(space.degree, dim, center, scale);
    let cents = mesh.centroids();

    let eig = SymmetricEigen::new(op.m.to_dense());
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut row_ok = vec![true; kk];
    if mesh.is_periodic() {
        for k in 0..kk {
            if !space.stencil_unwrapped(k) {
                for &i in &space.stencils[k].members {
                    row_ok[i] = false;
                }
            }
        }
    }
    let rows_checked = row_ok.iter().filter(|&&b| b).count();

    let samples: Vec<Vec<f64>> = (0..basis.len()).map(|j| cents.iter().map(|&c| basis.eval(j, c)).collect()).collect();
    let mut accuracy: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for d in 0..dim {
        for j in 0..basis.len() {
            let deriv: Vec<f64> = cents.iter().map(|&c| basis.eval_deriv(j, d, c)).collect();
            let lhs = op.q[d].matvec(&samples[j]);
            let rhs = op.m.matvec(&deriv);
            for i in 0..kk {
                if row_ok[i] {
                    accuracy = accuracy.max((lhs[i] - rhs[i]).abs());
                }
            }
        }
        let s = op.q[d].axpby(1.0, &op.q[d].transpose(), 1.0).axpby(1.0, &op.e[d], -1.0);
        sym = sym.max(s.max_abs());

        if mesh.is_periodic() {
            let ones = vec![1.0; kk];
            let v: f64 = ones.iter().zip(op.e[d].matvec(&ones)).map(|(a, b)| a * b).sum();
            boundary = boundary.max(v.abs());
        } else {
            for i in 0..basis.len() {
                let ei = op.e[d].matvec(&samples[i]);
                for j in 0..basis.len() {
                    let disc: f64 = ei.iter().zip(&samples[j]).map(|(a, b)| a * b).sum();
                    let exact = outer_boundary_integral(mesh, &basis, i, j, d);
                    boundary = boundary.max((disc - exact).abs());
                }
            }
        }
    }
    DenseNormReport { min_eigenvalue, accuracy, q_plus_qt_minus_e: sym, boundary_accuracy: boundary, rows_checked }
}

/// `∮_∂Ω V_i V_j n_d dΓ` by Gauss quadrature on the mesh boundary faces.
fn outer_boundary_integral(mesh: &Mesh, basis: &PolyBasis, i: usize, j: usize, d: usize) -> f64 {
    let mut total = 0.0;
    for bf in mesh.boundary_faces() {
        let verts = mesh.element_vertices(bf.element);
        let (a, b) = face_segments(&verts)[bf.local];
        let rule = if mesh.dim() == 1 { vec![(a, 1.0)] } else { quadrature::segment_rule(a, b, basis.degree() + 1) };
        for (x, w) in rule {
            total += w * basis.eval(i, x) * basis.eval(j, x) * bf.normal[d];
        }
    }
    total
}

/// Semi-discrete linear advection `M̃ dũ/dt = Σ_d λ_d (Q̃_dᵀ - Ẽ_d) ũ`.
pub struct AdvectionOperator {
    pub op: GlobalOperator,
    pub velocity: Point,
    rhs_matrix: CsrMatrix,
    mass_lu: SparseLu,
}

impl AdvectionOperator {
    pub fn new(op: GlobalOperator, velocity: Point) -> Result<Self> {
        let n = op.m.nrows();
        let mut a = CsrMatrix::from_triplets(n, n, &[]);
        for d in 0..op.dim {
            let term = op.q[d].transpose().axpby(1.0, &op.e[d], -1.0);
            a = a.axpby(1.0, &term, velocity[d]);
        }
        let mass_lu = SparseLu::new(&op.m)?;
        Ok(AdvectionOperator { op, velocity, rhs_matrix: a, mass_lu })
    }

    /// The right-hand side before the mass solve.
    pub fn weak_rhs(&self, u: &[f64]) -> Vec<f64> {
        self.rhs_matrix.matvec(u)
    }

    /// `dũ/dt`.
    pub fn rhs(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.mass_lu.solve(&self.weak_rhs(u))
    }

    pub fn mass_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.mass_lu.solve(b)
    }

    pub fn rhs_matrix(&self) -> &CsrMatrix {
        &self.rhs_matrix
    }
}

/// Discrepancies between SBP weak-form terms (element sums with `u_k = P_k ũ`)
/// and the matching DGD bilinear forms, each relative to the term's scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub temporal: f64,
    pub q_terms: f64,
    pub e_terms: f64,
}

impl EquivalenceReport {
    pub fn max(&self) -> f64 {
        self.temporal.max(self.q_terms).max(self.e_terms)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compare each term of the element SBP weak form against `ṽᵀ M̃ dũ/dt`,
/// `λ_d ṽᵀ Q̃_dᵀ ũ` and `λ_d ṽᵀ Ẽ_d ũ` built from `dgd` (typically the quadrature oracle).
pub fn sbp_dgd_equivalence_check(
    space: &DgdSpace,
    dgd: &GlobalOperator,
    velocity: Point,
    u: &[f64],
    v: &[f64],
    dudt: &[f64],
) -> EquivalenceReport {
    let dim = space.dim();
    let mut sbp_t = 0.0;
    let mut scale_t = 0.0;
    let mut sbp_q = 0.0;
    let mut scale_q = 0.0;
    let mut sbp_e = 0.0;
    let mut scale_e = 0.0;
    for (pr, op) in space.prolongations.iter().zip(&space.operators) {
        let uk = pr.apply(u);
        let vk = pr.apply(v);
        let dk = pr.apply(dudt);
        for q in 0..op.num_nodes() {
            let t = vk[q] * op.h[q] * dk[q];
            sbp_t += t;
            scale_t += t.abs();
        }
        for d in 0..dim {
            for a in 0..op.num_nodes() {
                for b in 0..op.num_nodes() {
                    // vᵀ Qᵀ u = Σ v_a Q_ba u_b
                    let tq = velocity[d] * vk[a] * op.q[d][(b, a)] * uk[b];
                    sbp_q += tq;
                    scale_q += tq.abs();
                    let te = velocity[d] * vk[a] * op.e[d][(a, b)] * uk[b];
                    sbp_e += te;
                    scale_e += te.abs();
                }
            }
        }
    }
    let dgd_t = dot(v, &dgd.m.matvec(dudt));
    let mut dgd_q = 0.0;
    let mut dgd_e = 0.0;
    for d in 0..dim {
        dgd_q += velocity[d] * dot(u, &dgd.q[d].matvec(v));
        dgd_e += velocity[d] * dot(v, &dgd.e[d].matvec(u));
    }
    let rel = |a: f64, b: f64, s: f64| (a - b).abs() / s.max(f64::MIN_POSITIVE);
    EquivalenceReport {
        temporal: rel(sbp_t, dgd_t, scale_t),
        q_terms: rel(sbp_q, dgd_q, scale_q),
        e_terms: rel(sbp_e, dgd_e, scale_e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn monomials_are_reproduced() {
        for (mesh, p) in [
            (Mesh::interval(20, 0.0, 1.0, true).unwrap(), 4),
            (Mesh::interval(7, -1.0, 2.0, false).unwrap(), 3),
            (Mesh::unit_square(8, true).unwrap(), 2),
            (Mesh::unit_square(5, false).unwrap(), 1),
        ] {
            let space = DgdSpace::new(mesh, p).unwrap();
            assert!(reproduction_error(&space) < 1e-12);
        }
    }

    #[test]
    fn piecewise_constant_mass_is_diagonal() {
        let space = DgdSpace::new(Mesh::interval(4, 0.0, 1.0, true).unwrap(), 0).unwrap();
        let op = assemble_global(&space);
        let m = op.m.to_dense();
        assert!((m - DMatrix::identity(4, 4) * 0.25).amax() < 1e-15);
    }

    #[test]
    fn mass_is_the_unrolled_element_sum() {
        let space = DgdSpace::new(Mesh::unit_square(4, true).unwrap(), 1).unwrap();
        let op = assemble_global(&space);
        let u = random_vec(space.num_elements(), 1);
        let v = random_vec(space.num_elements(), 2);
        let global = dot(&v, &op.m.matvec(&u));
        let mut local = 0.0;
        for (pr, sop) in space.prolongations.iter().zip(&space.operators) {
            let (uk, vk) = (pr.apply(&u), pr.apply(&v));
            local += (0..uk.len()).map(|q| vk[q] * sop.h[q] * uk[q]).sum::<f64>();
        }
        assert!((global - local).abs() < 1e-14);
    }

    #[test]
    fn lemma_identities_against_quadrature() {
        for (mesh, p) in [
            (Mesh::interval(12, 0.0, 1.0, true).unwrap(), 3),
            (Mesh::interval(9, 0.0, 2.0, false).unwrap(), 2),
            (Mesh::unit_square(4, false).unwrap(), 1),
        ] {
            let space = DgdSpace::new(mesh, p).unwrap();
            let diff = assemble_global(&space).max_diff(&quadrature_oracle(&space));
            assert!(diff < 1e-12, "p={p} diff={diff:e}");
        }
    }

    #[test]
    fn sparsity_follows_shared_stencils() {
        let space = DgdSpace::new(Mesh::interval(12, 0.0, 1.0, false).unwrap(), 2).unwrap();
        let op = assemble_global(&space);
        for (i, j, _) in op.q[0].triplets() {
            assert!(space.stencils.iter().any(|s| s.members.contains(&i) && s.members.contains(&j)));
        }
    }

    #[test]
    fn dense_norm_sbp_nonperiodic() {
        for (mesh, p) in [(Mesh::interval(10, 0.0, 1.0, false).unwrap(), 3), (Mesh::unit_square(4, false).unwrap(), 1)] {
            let space = DgdSpace::new(mesh, p).unwrap();
            let r = verify_dense_norm_sbp(&space, &assemble_global(&space));
            assert!(r.min_eigenvalue > 0.0);
            assert!(r.accuracy < 1e-11, "{r:?}");
            assert!(r.q_plus_qt_minus_e < 1e-13, "{r:?}");
            assert!(r.boundary_accuracy < 1e-11, "{r:?}");
            assert_eq!(r.rows_checked, space.num_elements());
        }
    }

    #[test]
    fn dense_norm_sbp_periodic() {
        let space = DgdSpace::new(Mesh::interval(16, 0.0, 1.0, true).unwrap(), 2).unwrap();
        let op = assemble_global(&space);
        let r = verify_dense_norm_sbp(&space, &op);
        assert!(r.rows_checked > 8 && r.accuracy < 1e-11, "{r:?}");
        assert!(r.boundary_accuracy < 1e-14);
        let ones = vec![1.0; 16];
        assert!(op.q[0].matvec(&ones).iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn advection_rhs_properties() {
        let space = DgdSpace::new(Mesh::interval(12, 0.0, 1.0, false).unwrap(), 2).unwrap();
        let adv = AdvectionOperator::new(assemble_global(&space), [1.5, 0.0]).unwrap();
        let c = adv.rhs(&[2.0; 12]).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-12));
        // quadratic q = x^2 - x: residual = -λ q'
        let u: Vec<f64> = space.mesh.centroids().iter().map(|x| x[0] * x[0] - x[0]).collect();
        let r = adv.rhs(&u).unwrap();
        for (ri, x) in r.iter().zip(space.mesh.centroids()) {
            assert!((ri + 1.5 * (2.0 * x[0] - 1.0)).abs() < 1e-10);
        }
        let still = AdvectionOperator::new(assemble_global(&space), [0.0, 0.0]).unwrap();
        assert!(still.rhs(&u).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn periodic_advection_conserves() {
        let space = DgdSpace::new(Mesh::unit_square(4, true).unwrap(), 1).unwrap();
        let adv = AdvectionOperator::new(assemble_global(&space), [1.0, 0.5]).unwrap();
        let u = random_vec(space.num_elements(), 3);
        let w = adv.weak_rhs(&u);
        assert!(w.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn equivalence_with_random_data() {
        for (mesh, p, lam) in
            [(Mesh::interval(10, 0.0, 1.0, true).unwrap(), 2, [1.0, 0.0]), (Mesh::unit_square(4, false).unwrap(), 1, [0.7, -0.3])]
        {
            let space = DgdSpace::new(mesh, p).unwrap();
            let n = space.num_elements();
            let oracle = quadrature_oracle(&space);
            let r = sbp_dgd_equivalence_check(&space, &oracle, lam, &random_vec(n, 4), &random_vec(n, 5), &random_vec(n, 6));
            assert!(r.max() < 1e-13, "{r:?}");
        }
    }
}
