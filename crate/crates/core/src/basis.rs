//! Polynomial bases, centroid Vandermonde systems and prolongation matrices.
//!
//! The DGD solution on element `k` is the degree-`p` least-squares fit of the
//! coefficients stored at the centroids of its stencil. Everything here is
//! expressed through `P_k = V_k C_k`, where `C_k` is the pseudo-inverse of the
//! centroid Vandermonde matrix and `V_k` evaluates the same polynomial basis at
//! the element's nodes.

use nalgebra::DMatrix;

use crate::error::{DgdError, Result};
use crate::mesh::Point;
use crate::stencil::Stencil;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Monomials of total degree `<= p`, shifted to `center` and scaled by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    degree: usize,
    dim: usize,
    center: Point,
    scale: f64,
    exponents: Vec<(usize, usize)>,
}

pub fn num_polynomials(p: usize, dim: usize) -> usize {
    match dim {
        1 => p + 1,
        _ => (p + 1) * (p + 2) / 2,
    }
}

impl PolyBasis {
    pub fn new(degree: usize, dim: usize, center: Point, scale: f64) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        assert!(scale > 0.0, "basis scale must be positive");
        let exponents = if dim == 1 {
            (0..=degree).map(|a| (a, 0)).collect()
        } else {
            let mut e = Vec::new();
            for total in 0..=degree {
                for b in 0..=total {
                    e.push((total - b, b));
                }
            }
            e
        };
        PolyBasis { degree, dim, center, scale, exponents }
    }

    /// Unshifted, unscaled monomials.
    pub fn monomials(degree: usize, dim: usize) -> Self {
        Self::new(degree, dim, [0.0, 0.0], 1.0)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    fn local(&self, x: Point) -> (f64, f64) {
        ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale)
    }

    pub fn eval(&self, j: usize, x: Point) -> f64 {
        let (a, b) = self.exponents[j];
        let (s, t) = self.local(x);
        s.powi(a as i32) * t.powi(b as i32)
    }

    /// Partial derivative of basis function `j` in direction `dir` (0 = x, 1 = y).
    pub fn eval_deriv(&self, j: usize, dir: usize, x: Point) -> f64 {
        let (a, b) = self.exponents[j];
        let (s, t) = self.local(x);
        match dir {
            0 if a == 0 => 0.0,
            0 => a as f64 * s.powi(a as i32 - 1) * t.powi(b as i32) / self.scale,
            _ if b == 0 => 0.0,
            _ => b as f64 * s.powi(a as i32) * t.powi(b as i32 - 1) / self.scale,
        }
    }

    /// `[V]_{qj} = V_j(x_q)`.
    pub fn vandermonde(&self, points: &[Point]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), self.len(), |q, j| self.eval(j, points[q]))
    }

    pub fn vandermonde_deriv(&self, points: &[Point], dir: usize) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), self.len(), |q, j| self.eval_deriv(j, dir, points[q]))
    }
}

/// Basis adapted to a stencil: centred on the owner's centroid and scaled by
/// the largest centroid distance in the stencil.
pub fn stencil_basis(p: usize, dim: usize, stencil: &Stencil) -> PolyBasis {
    let c = stencil.member_centroids[0];
    let scale = stencil
        .member_centroids
        .iter()
        .map(|x| crate::mesh::dist(*x, c))
        .fold(0.0, f64::max);
    PolyBasis::new(p, dim, c, if scale > 0.0 { scale } else { 1.0 })
}

/// `[Ṽ]_{ij} = V_j(x̃_{ν_i})` over the stencil's (translated) centroids.
pub fn centroid_vandermonde(basis: &PolyBasis, stencil: &Stencil) -> DMatrix<f64> {
    basis.vandermonde(&stencil.member_centroids)
}

/// Moore–Penrose pseudo-inverse of a full-column-rank Vandermonde matrix,
/// computed from its SVD. `owner` is only used for error reporting.
pub fn dgd_coefficients(vt: &DMatrix<f64>, owner: usize) -> Result<DMatrix<f64>> {
    let (n, m) = vt.shape();
    if n < m {
        return Err(DgdError::RankDeficient { element: owner, ratio: 0.0 });
    }
    let svd = vt.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    if !(smax > 0.0) || smin / smax < RANK_TOLERANCE {
        return Err(DgdError::RankDeficient { element: owner, ratio: if smax > 0.0 { smin / smax } else { 0.0 } });
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    // C = V Σ^{-1} U^T
    let mut c = DMatrix::zeros(m, n);
    for r in 0..m {
        let inv = 1.0 / s[r];
        for i in 0..m {
            let vir = v_t[(r, i)] * inv;
            for j in 0..n {
                c[(i, j)] += vir * u[(j, r)];
            }
        }
    }
    Ok(c)
}

/// Local prolongation from the stencil's centroid coefficients to nodal values
/// on the owner element.
#[derive(Debug, Clone)]
pub struct Prolongation {
    pub owner: usize,
    /// Global element ids of the columns (the stencil members).
    pub members: Vec<usize>,
    /// `n_q x n_k`.
    pub matrix: DMatrix<f64>,
    /// Pseudo-inverse of the centroid Vandermonde, kept for evaluating the
    /// same fit at other points.
    pub coefficients: DMatrix<f64>,
    pub basis: PolyBasis,
}

impl Prolongation {
    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn stencil_size(&self) -> usize {
        self.matrix.ncols()
    }

    /// Rows of the prolongation evaluated at arbitrary points of the owner
    /// element (in the owner's frame).
    pub fn at_points(&self, points: &[Point]) -> DMatrix<f64> {
        self.basis.vandermonde(points) * &self.coefficients
    }

    pub fn deriv_at_points(&self, points: &[Point], dir: usize) -> DMatrix<f64> {
        self.basis.vandermonde_deriv(points, dir) * &self.coefficients
    }

    /// Apply to a global scalar coefficient vector.
    pub fn apply(&self, global: &[f64]) -> Vec<f64> {
        let nq = self.num_nodes();
        let mut out = vec![0.0; nq];
        for (c, &nu) in self.members.iter().enumerate() {
            let g = global[nu];
            for q in 0..nq {
                out[q] += self.matrix[(q, c)] * g;
            }
        }
        out
    }
}

pub fn build_prolongation(p: usize, dim: usize, stencil: &Stencil, nodes: &[Point]) -> Result<Prolongation> {
    if nodes.is_empty() {
        return Err(DgdError::DimensionMismatch("empty node set".into()));
    }
    let basis = stencil_basis(p, dim, stencil);
    let vt = centroid_vandermonde(&basis, stencil);
    let coefficients = dgd_coefficients(&vt, stencil.owner)?;
    let matrix = basis.vandermonde(nodes) * &coefficients;
    Ok(Prolongation {
        owner: stencil.owner,
        members: stencil.members.clone(),
        matrix,
        coefficients,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::stencil::build_stencil;

    fn stencil_1d(centroids: Vec<Point>) -> Stencil {
        Stencil {
            owner: 0,
            members: (0..centroids.len()).collect(),
            member_centroids: centroids,
        }
    }

    #[test]
    fn prolongation_ignores_member_order() {
        let mesh = Mesh::unit_square(6, true).unwrap();
        let st = build_stencil(&mesh, 14, 2).unwrap();
        let nodes = [[0.3, 0.4], [0.35, 0.42], [0.31, 0.47]];
        let a = build_prolongation(2, 2, &st, &nodes).unwrap();
        let mut order: Vec<usize> = (1..st.members.len()).rev().collect();
        order.insert(0, 0);
        let permuted = Stencil {
            owner: st.owner,
            members: order.iter().map(|&i| st.members[i]).collect(),
            member_centroids: order.iter().map(|&i| st.member_centroids[i]).collect(),
        };
        let b = build_prolongation(2, 2, &permuted, &nodes).unwrap();
        for (j, &i) in order.iter().enumerate() {
            assert!((b.matrix.column(j) - a.matrix.column(i)).amax() < 1e-13);
        }
    }

    #[test]
    fn constant_basis_vandermonde() {
        let st = stencil_1d(vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]);
        let b = PolyBasis::new(0, 1, [0.0, 0.0], 1.0);
        let v = centroid_vandermonde(&b, &st);
        assert_eq!(v.shape(), (3, 1));
        assert!(v.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn shifted_scaled_linear_vandermonde() {
        let h = 0.25;
        let st = stencil_1d(vec![[-h, 0.0], [0.0, 0.0], [h, 0.0]]);
        let b = PolyBasis::new(1, 1, [0.0, 0.0], h);
        let v = centroid_vandermonde(&b, &st);
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!((v - expected).amax() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_properties() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 1.0, 0.0, 1.0, 1.0]);
        let c = dgd_coefficients(&v, 0).unwrap();
        assert!((&c * &v - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!((&v * &c * &v - &v).amax() <= 1e-13 * v.norm());

        let sq = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 5.0]);
        let c = dgd_coefficients(&sq, 0).unwrap();
        assert!((&sq * &c - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(dgd_coefficients(&v, 7), Err(DgdError::RankDeficient { element: 7, .. })));
    }

    #[test]
    fn triangle_linear_vandermonde_has_full_rank() {
        let mesh = Mesh::unit_square(4, true).unwrap();
        let st = build_stencil(&mesh, 5, 1).unwrap();
        let b = stencil_basis(1, 2, &st);
        let v = centroid_vandermonde(&b, &st);
        assert_eq!(v.shape(), (4, 3));
        assert_eq!(v.clone().svd(false, false).rank(1e-10), 3);
    }

    #[test]
    fn constant_prolongation() {
        let mesh = Mesh::interval(6, 0.0, 1.0, true).unwrap();
        let st = build_stencil(&mesh, 2, 0).unwrap();
        let nodes = [[0.3, 0.0], [0.35, 0.0], [0.4, 0.0]];
        let pr = build_prolongation(0, 1, &st, &nodes).unwrap();
        assert_eq!(pr.matrix.shape(), (3, 1));
        assert!(pr.matrix.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn minimum_frobenius_norm() {
        // P = V C is the minimum-norm solution of P Ṽ = V; adding any matrix
        // whose rows annihilate Ṽ keeps exactness but grows the norm.
        let mesh = Mesh::unit_square(3, true).unwrap();
        let st = build_stencil(&mesh, 4, 1).unwrap();
        let nodes = [[0.4, 0.4], [0.5, 0.45], [0.45, 0.5]];
        let pr = build_prolongation(1, 2, &st, &nodes).unwrap();
        let vt = centroid_vandermonde(&pr.basis, &st);
        let v = pr.basis.vandermonde(&nodes);
        // left null vector of Ṽ
        let proj = DMatrix::<f64>::identity(vt.nrows(), vt.nrows()) - &vt * &pr.coefficients;
        let null = proj.row(0).into_owned();
        assert!(null.norm() > 1e-3);
        let mut alt = pr.matrix.clone();
        for q in 0..alt.nrows() {
            for i in 0..alt.ncols() {
                alt[(q, i)] += 0.1 * (q as f64 + 1.0) * null[(0, i)];
            }
        }
        assert!((&alt * &vt - &v).amax() < 1e-13);
        assert!((&pr.matrix * &vt - &v).amax() < 1e-13);
        assert!(pr.matrix.norm() < alt.norm());
    }
}
