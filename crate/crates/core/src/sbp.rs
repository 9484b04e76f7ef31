//! Diagonal-norm summation-by-parts first-derivative operators.
//!
//! Element operators belong to the SBP-Γ family: every face carries its own
//! nodes with diagonal face-quadrature weights, so `E_d` is diagonal and splits
//! face by face. Reference operators are built once and pushed forward to affine
//! physical elements with [`map_to_physical`].

use nalgebra::{DMatrix, DVector};

use crate::basis::PolyBasis;
use crate::error::{DgdError, Result};
use crate::mesh::{dist, Point};
use crate::quadrature;

#[derive(Debug, Clone, PartialEq)]
pub struct SbpFace {
    /// Node indices on this face, ordered from the face's first vertex to its second.
    pub nodes: Vec<usize>,
    /// Face-quadrature weights (physical length units once mapped).
    pub weights: Vec<f64>,
    /// Outward unit normal.
    pub normal: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbpOperator {
    pub degree: usize,
    pub dim: usize,
    /// Element vertices: `[-1, 1]` or the unit right triangle for reference operators.
    pub vertices: Vec<Point>,
    pub nodes: Vec<Point>,
    pub h: Vec<f64>,
    /// `Q_d` for each coordinate direction.
    pub q: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
    pub faces: Vec<SbpFace>,
}

impl SbpOperator {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `D_d = H^{-1} Q_d`.
    pub fn d(&self, dir: usize) -> DMatrix<f64> {
        let mut d = self.q[dir].clone();
        for (i, &hi) in self.h.iter().enumerate() {
            d.row_mut(i).scale_mut(1.0 / hi);
        }
        d
    }

    pub fn measure(&self) -> f64 {
        self.h.iter().sum()
    }

    /// Plain-text dump: nodes, norm, `Q_d` and face tables at 17 significant digits.
    pub fn to_text(&self) -> String {
        let f = |x: f64| format!("{x:.16e}");
        let mut s = format!("sbp dim {} degree {} nodes {}\n", self.dim, self.degree, self.num_nodes());
        for (i, x) in self.nodes.iter().enumerate() {
            s += &format!("node {i} {} {} {}\n", f(x[0]), f(x[1]), f(self.h[i]));
        }
        for (d, q) in self.q.iter().enumerate() {
            s += &format!("Q {d}\n");
            for i in 0..q.nrows() {
                let row: Vec<String> = (0..q.ncols()).map(|j| f(q[(i, j)])).collect();
                s += &row.join(" ");
                s += "\n";
            }
        }
        for (k, face) in self.faces.iter().enumerate() {
            let nodes: Vec<String> = face.nodes.iter().map(|n| n.to_string()).collect();
            let w: Vec<String> = face.weights.iter().map(|&x| f(x)).collect();
            s += &format!(
                "face {k} normal {} {} nodes {} weights {}\n",
                f(face.normal[0]),
                f(face.normal[1]),
                nodes.join(","),
                w.join(",")
            );
        }
        s
    }
}

/// Assemble `E_d = Σ_f R_f^T (B_f n_{d,f}) R_f`.
fn boundary_operators(dim: usize, n: usize, faces: &[SbpFace]) -> Vec<DMatrix<f64>> {
    (0..dim)
        .map(|d| {
            let mut e = DMatrix::zeros(n, n);
            for face in faces {
                for (&a, &w) in face.nodes.iter().zip(&face.weights) {
                    e[(a, a)] += w * face.normal[d];
                }
            }
            e
        })
        .collect()
}

/// Lagrange differentiation matrix on the given 1D nodes.
fn lagrange_diff(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let bary: Vec<f64> = (0..n)
        .map(|j| 1.0 / (0..n).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>())
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[(i, j)] = bary[j] / bary[i] / (x[i] - x[j]);
                diag -= d[(i, j)];
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Degree-`p` operator on `n` Gauss–Lobatto nodes of `[-1, 1]` (`n >= p + 1`).
pub fn lgl_sbp_1d(p: usize, n: usize) -> Result<SbpOperator> {
    if n < p + 1 || n < 2 {
        return Err(DgdError::UnsupportedDegree { degree: p, what: "1D LGL operator with too few nodes" });
    }
    let (x, w) = quadrature::gauss_lobatto(n);
    let dmat = lagrange_diff(&x);
    let mut q = DMatrix::from_diagonal(&DVector::from_vec(w.clone())) * dmat;
    let faces = vec![
        SbpFace { nodes: vec![0], weights: vec![1.0], normal: [-1.0, 0.0] },
        SbpFace { nodes: vec![n - 1], weights: vec![1.0], normal: [1.0, 0.0] },
    ];
    let e = boundary_operators(1, n, &faces);
    // remove rounding from the symmetric part
    let s = 0.5 * (&q - q.transpose());
    q = &s + 0.5 * &e[0];
    Ok(SbpOperator {
        degree: p,
        dim: 1,
        vertices: vec![[-1.0, 0.0], [1.0, 0.0]],
        nodes: x.iter().map(|&t| [t, 0.0]).collect(),
        h: w,
        q: vec![q],
        s: vec![s],
        e,
        faces,
    })
}

/// Degree-`p` operator on the `p + 1` Gauss–Lobatto nodes (norm exact to `2p - 1`).
pub fn build_lgl_sbp_1d(p: usize) -> Result<SbpOperator> {
    if !(1..=4).contains(&p) {
        return Err(DgdError::UnsupportedDegree { degree: p, what: "1D LGL SBP (1..=4)" });
    }
    lgl_sbp_1d(p, p + 1)
}

/// Degree-`p` 1D operator whose norm is at least `2p` exact: `p + 2` Lobatto
/// nodes, giving `2p + 1` exactness.
pub fn build_sbp_1d_2p_exact(p: usize) -> Result<SbpOperator> {
    if p > 4 {
        return Err(DgdError::UnsupportedDegree { degree: p, what: "1D SBP (0..=4)" });
    }
    lgl_sbp_1d(p, p + 2)
}

pub const REFERENCE_TRIANGLE: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// `∫ x^a y^b` over the unit right triangle.
fn reference_triangle_moment(a: usize, b: usize) -> f64 {
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 2)
}

/// Point with barycentric coordinates `(α, α, 1 - 2α)` on the reference triangle and its rotations.
fn interior_orbit(alpha: f64) -> [Point; 3] {
    let v = REFERENCE_TRIANGLE;
    let bc = [[alpha, alpha, 1.0 - 2.0 * alpha], [alpha, 1.0 - 2.0 * alpha, alpha], [1.0 - 2.0 * alpha, alpha, alpha]];
    bc.map(|b| [b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0], b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1]])
}

/// Interior orbit parameter for the `p = 2` node set: vertices, two Lobatto
/// points per edge and one 3-point orbit admit a positive degree-4 rule only for
/// one `α` near 0.2129. Found by bisection on the determinant of the augmented
/// moment system in `x⁰, x², x³, x⁴`.
fn tri_p2_alpha() -> f64 {
    let (lx, _) = quadrature::gauss_lobatto(4);
    let edge: Vec<Point> = (0..3)
        .flat_map(|f| {
            let (a, b) = (REFERENCE_TRIANGLE[f], REFERENCE_TRIANGLE[(f + 1) % 3]);
            lx[1..3].iter().map(move |&t| {
                let s = 0.5 * (t + 1.0);
                [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
            })
        })
        .collect();
    let det = |alpha: f64| {
        let orbits: [Vec<Point>; 3] = [REFERENCE_TRIANGLE.to_vec(), edge.clone(), interior_orbit(alpha).to_vec()];
        let m = DMatrix::from_fn(4, 4, |r, c| {
            let k = [0, 2, 3, 4][r];
            if c < 3 {
                orbits[c].iter().map(|x| x[0].powi(k)).sum::<f64>()
            } else {
                reference_triangle_moment(k as usize, 0)
            }
        });
        m.determinant()
    };
    let (mut lo, mut hi) = (0.2, 0.23);
    let flo = det(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (det(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// SBP-Γ operator on the reference triangle `(0,0), (1,0), (0,1)`.
///
/// Nodes: the three vertices, the `p` interior Lobatto points of each edge, and
/// the centroid (`p = 1`) or a 3-point interior orbit (`p = 2`). Volume weights
/// come from a least-squares solve of the moment equations over symmetry orbits
/// (degree 3 for `p = 1`, degree 4 for `p = 2`); the skew part is the minimum
/// Frobenius-norm solution of the accuracy conditions.
pub fn build_tri_sbp(p: usize) -> Result<SbpOperator> {
    if !(1..=2).contains(&p) {
        return Err(DgdError::UnsupportedDegree { degree: p, what: "triangle SBP-Gamma (p = 1, 2)" });
    }
    let v = REFERENCE_TRIANGLE;
    let (lx, _) = quadrature::gauss_lobatto(p + 2);
    let n_edge_interior = lx.len() - 2;

    // nodes: vertices, then edge-interior points edge by edge, then centroid
    let mut nodes: Vec<Point> = v.to_vec();
    let mut orbits: Vec<Vec<usize>> = vec![vec![0, 1, 2]];
    let mut edge_nodes: Vec<Vec<usize>> = vec![Vec::new(); 3];
    for f in 0..3 {
        let (a, b) = (v[f], v[(f + 1) % 3]);
        edge_nodes[f].push(f);
        for &t in &lx[1..lx.len() - 1] {
            let s = 0.5 * (t + 1.0);
            edge_nodes[f].push(nodes.len());
            nodes.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
        edge_nodes[f].push((f + 1) % 3);
    }
    for i in 0..n_edge_interior {
        orbits.push((0..3).map(|f| 3 + f * n_edge_interior + i).collect());
    }
    if p == 1 {
        orbits.push(vec![nodes.len()]);
        nodes.push([1.0 / 3.0, 1.0 / 3.0]);
    } else {
        orbits.push((nodes.len()..nodes.len() + 3).collect());
        nodes.extend(interior_orbit(tri_p2_alpha()));
    }
    let n = nodes.len();

    let moment_degree = if p == 1 { 3 } else { 4 };
    let mono = PolyBasis::monomials(moment_degree, 2);
    let a = DMatrix::from_fn(mono.len(), orbits.len(), |m, o| {
        orbits[o].iter().map(|&i| mono.eval(m, nodes[i])).sum::<f64>()
    });
    let rhs = DVector::from_fn(mono.len(), |m, _| {
        let (ea, eb) = mono.exponents()[m];
        reference_triangle_moment(ea, eb)
    });
    let orbit_w = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| DgdError::SbpConstruction(e.to_string()))?;
    let moment_res = (&a * &orbit_w - &rhs).amax();
    if moment_res > 1e-13 || orbit_w.iter().any(|&w| w <= 0.0) {
        return Err(DgdError::SbpConstruction(format!(
            "no positive degree-{moment_degree} rule on the node set (residual {moment_res:e})"
        )));
    }
    let mut h = vec![0.0; n];
    for (o, orbit) in orbits.iter().enumerate() {
        for &i in orbit {
            h[i] = orbit_w[o];
        }
    }

    // faces use the Lobatto rule along each edge
    let (_, lw) = quadrature::gauss_lobatto(p + 2);
    let faces: Vec<SbpFace> = (0..3)
        .map(|f| {
            let (a, b) = (v[f], v[(f + 1) % 3]);
            let len = dist(a, b);
            let t = [b[0] - a[0], b[1] - a[1]];
            // outward for a counter-clockwise triangle
            let normal = [t[1] / len, -t[0] / len];
            SbpFace {
                nodes: edge_nodes[f].clone(),
                weights: lw.iter().map(|w| 0.5 * len * w).collect(),
                normal,
            }
        })
        .collect();
    let e = boundary_operators(2, n, &faces);

    let basis = PolyBasis::monomials(p, 2);
    let vmat = basis.vandermonde(&nodes);
    let hmat = DMatrix::from_diagonal(&DVector::from_vec(h.clone()));
    let mut s = Vec::with_capacity(2);
    let mut q = Vec::with_capacity(2);
    for d in 0..2 {
        let target = &hmat * basis.vandermonde_deriv(&nodes, d) - 0.5 * &e[d] * &vmat;
        let sd = min_norm_skew_solve(&vmat, &target)?;
        q.push(&sd + 0.5 * &e[d]);
        s.push(sd);
    }
    Ok(SbpOperator { degree: p, dim: 2, vertices: v.to_vec(), nodes, h, q, s, e, faces })
}

/// Minimum Frobenius-norm skew-symmetric `S` with `S V = T`.
fn min_norm_skew_solve(v: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = v.nrows();
    let m = v.ncols();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut a = DMatrix::zeros(n * m, pairs.len());
    let mut b = DVector::zeros(n * m);
    for r in 0..n {
        for c in 0..m {
            let row = r * m + c;
            b[row] = t[(r, c)];
            for (u, &(i, j)) in pairs.iter().enumerate() {
                // S_ij = s_u, S_ji = -s_u
                if i == r {
                    a[(row, u)] += v[(j, c)];
                }
                if j == r {
                    a[(row, u)] -= v[(i, c)];
                }
            }
        }
    }
    // scale the singular-value cutoff to the problem
    let svd = a.clone().svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max();
    let x = svd.solve(&b, cutoff).map_err(|e| DgdError::SbpConstruction(e.to_string()))?;
    let res = (&a * &x - &b).amax();
    if res > 1e-12 {
        return Err(DgdError::SbpConstruction(format!("accuracy conditions not satisfiable (residual {res:e})")));
    }
    let mut s = DMatrix::zeros(n, n);
    for (u, &(i, j)) in pairs.iter().enumerate() {
        s[(i, j)] = x[u];
        s[(j, i)] = -x[u];
    }
    Ok(s)
}

/// Push a reference operator forward to the affine element with the given vertices.
pub fn map_to_physical(op: &SbpOperator, vertices: &[Point]) -> Result<SbpOperator> {
    if vertices.len() != op.vertices.len() {
        return Err(DgdError::DimensionMismatch(format!(
            "{} vertices for a {}-vertex reference element",
            vertices.len(),
            op.vertices.len()
        )));
    }
    let r0 = op.vertices[0];
    let x0 = vertices[0];
    // Jacobian of reference -> physical and its inverse, as 2x2 (1D embeds as diag(j, 1))
    let (jac, det) = if op.dim == 1 {
        let j = (vertices[1][0] - x0[0]) / (op.vertices[1][0] - r0[0]);
        ([[j, 0.0], [0.0, 1.0]], j)
    } else {
        // columns: images of reference edge vectors
        let re = [
            [op.vertices[1][0] - r0[0], op.vertices[2][0] - r0[0]],
            [op.vertices[1][1] - r0[1], op.vertices[2][1] - r0[1]],
        ];
        let pe = [
            [vertices[1][0] - x0[0], vertices[2][0] - x0[0]],
            [vertices[1][1] - x0[1], vertices[2][1] - x0[1]],
        ];
        let re_inv = inv2(re).ok_or(DgdError::DegenerateElement(0))?;
        let j = mul2(pe, re_inv);
        (j, j[0][0] * j[1][1] - j[0][1] * j[1][0])
    };
    if det.abs() < 1e-300 || !det.is_finite() {
        return Err(DgdError::DegenerateElement(0));
    }
    let jinv = inv2(jac).ok_or(DgdError::DegenerateElement(0))?;
    let adet = det.abs();

    let map = |r: Point| -> Point {
        let d = [r[0] - r0[0], r[1] - r0[1]];
        if op.dim == 1 {
            [x0[0] + jac[0][0] * d[0], 0.0]
        } else {
            [x0[0] + jac[0][0] * d[0] + jac[0][1] * d[1], x0[1] + jac[1][0] * d[0] + jac[1][1] * d[1]]
        }
    };

    // ∂ξ_a/∂x_d = jinv[a][d]
    let combine = |mats: &[DMatrix<f64>], d: usize| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(op.num_nodes(), op.num_nodes());
        for (a, m) in mats.iter().enumerate() {
            out += adet * jinv[a][d] * m;
        }
        out
    };
    let s: Vec<DMatrix<f64>> = (0..op.dim).map(|d| combine(&op.s, d)).collect();

    let faces: Vec<SbpFace> = op
        .faces
        .iter()
        .map(|f| {
            // J^{-T} n_ref
            let nr = f.normal;
            let m = if op.dim == 1 {
                [jinv[0][0] * nr[0], 0.0]
            } else {
                [jinv[0][0] * nr[0] + jinv[1][0] * nr[1], jinv[0][1] * nr[0] + jinv[1][1] * nr[1]]
            };
            let len = (m[0] * m[0] + m[1] * m[1]).sqrt();
            // 1D point faces carry unit weight
            let scale = if op.dim == 1 { 1.0 } else { adet * len };
            SbpFace {
                nodes: f.nodes.clone(),
                weights: f.weights.iter().map(|w| w * scale).collect(),
                normal: [m[0] / len, m[1] / len],
            }
        })
        .collect();
    let e = boundary_operators(op.dim, op.num_nodes(), &faces);
    let q = s.iter().zip(&e).map(|(s, e)| s + 0.5 * e).collect();
    Ok(SbpOperator {
        degree: op.degree,
        dim: op.dim,
        vertices: vertices.to_vec(),
        nodes: op.nodes.iter().map(|&r| map(r)).collect(),
        h: op.h.iter().map(|h| h * adet).collect(),
        q,
        s,
        e,
        faces,
    })
}

fn inv2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Largest residual of each SBP property.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbpReport {
    /// `max |D_d V - V_d|` over basis functions and nodes.
    pub accuracy: f64,
    /// Smallest diagonal norm entry (must be positive).
    pub min_norm_weight: f64,
    /// `max |S + S^T|`.
    pub skew: f64,
    /// `max |Q + Q^T - E|`.
    pub q_plus_qt_minus_e: f64,
    /// `max |v_i^T E v_j - ∮ V_i V_j n dΓ|`.
    pub boundary_accuracy: f64,
    /// `max |E - Σ_f R_f^T B_f n_f R_f|`.
    pub face_decomposition: f64,
    /// Highest total degree integrated exactly (to 1e-13) by the norm.
    pub quadrature_degree: usize,
}

impl SbpReport {
    pub fn passes(&self, tol_accuracy: f64, tol_skew: f64, tol_sym: f64, tol_boundary: f64) -> bool {
        self.accuracy <= tol_accuracy
            && self.min_norm_weight > 0.0
            && self.skew <= tol_skew
            && self.q_plus_qt_minus_e <= tol_sym
            && self.boundary_accuracy <= tol_boundary
    }
}

/// Check the SBP definition for a degree-`p` operator (report only).
pub fn verify_sbp(op: &SbpOperator, p: usize) -> SbpReport {
    let center = centroid(&op.vertices);
    let scale = diameter(&op.vertices);
    let basis = PolyBasis::new(p, op.dim, center, scale);
    let v = basis.vandermonde(&op.nodes);

    let mut accuracy: f64 = 0.0;
    let mut skew: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    let mut face_decomp: f64 = 0.0;
    for d in 0..op.dim {
        let dv = op.d(d) * &v;
        let exact = basis.vandermonde_deriv(&op.nodes, d);
        accuracy = accuracy.max((dv - exact).amax());
        skew = skew.max((&op.s[d] + op.s[d].transpose()).amax());
        sym = sym.max((&op.q[d] + op.q[d].transpose() - &op.e[d]).amax());

        let mut from_faces = DMatrix::zeros(op.num_nodes(), op.num_nodes());
        for f in &op.faces {
            for (&a, &w) in f.nodes.iter().zip(&f.weights) {
                from_faces[(a, a)] += w * f.normal[d];
            }
        }
        face_decomp = face_decomp.max((&from_faces - &op.e[d]).amax());

        let vev = v.transpose() * &op.e[d] * &v;
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let exact = boundary_integral(op, &basis, i, j, d);
                boundary = boundary.max((vev[(i, j)] - exact).abs());
            }
        }
    }
    let min_norm_weight = op.h.iter().cloned().fold(f64::INFINITY, f64::min);
    SbpReport {
        accuracy,
        min_norm_weight,
        skew,
        q_plus_qt_minus_e: sym,
        boundary_accuracy: boundary,
        face_decomposition: face_decomp,
        quadrature_degree: quadrature_degree(op, 2 * p + 3),
    }
}

/// Highest degree `d <= max_degree` such that the norm integrates all
/// monomials of degree `<= d` to 1e-13 relative.
pub fn quadrature_degree(op: &SbpOperator, max_degree: usize) -> usize {
    let center = centroid(&op.vertices);
    let scale = diameter(&op.vertices);
    let oracle = element_rule(&op.vertices, max_degree);
    let mut exact_to = None;
    for deg in 0..=max_degree {
        let basis = PolyBasis::new(deg, op.dim, center, scale);
        let ok = (0..basis.len()).filter(|&j| {
            let (a, b) = basis.exponents()[j];
            a + b == deg
        }).all(|j| {
            let approx: f64 = op.nodes.iter().zip(&op.h).map(|(x, w)| w * basis.eval(j, *x)).sum();
            let exact: f64 = oracle.iter().map(|(x, w)| w * basis.eval(j, *x)).sum();
            (approx - exact).abs() <= 1e-13 * op.measure().max(1e-300)
        });
        if ok {
            exact_to = Some(deg);
        } else {
            break;
        }
    }
    exact_to.unwrap_or(0)
}

/// Gauss rule over an interval or triangle given by its vertices.
pub fn element_rule(vertices: &[Point], degree: usize) -> Vec<(Point, f64)> {
    if vertices.len() == 2 {
        quadrature::interval_rule(vertices[0][0], vertices[1][0], degree)
    } else {
        quadrature::triangle_rule([vertices[0], vertices[1], vertices[2]], degree)
    }
}

/// `∮ V_i V_j n_d dΓ` over the element boundary, by exact Gauss quadrature.
fn boundary_integral(op: &SbpOperator, basis: &PolyBasis, i: usize, j: usize, d: usize) -> f64 {
    if op.dim == 1 {
        let (a, b) = (op.vertices[0], op.vertices[1]);
        let sgn = if b[0] > a[0] { 1.0 } else { -1.0 };
        return sgn * (basis.eval(i, b) * basis.eval(j, b) - basis.eval(i, a) * basis.eval(j, a));
    }
    let npts = basis.degree() + 1;
    let mut total = 0.0;
    for (f, face) in op.faces.iter().enumerate() {
        let a = op.vertices[f];
        let b = op.vertices[(f + 1) % 3];
        for (x, w) in quadrature::segment_rule(a, b, npts) {
            total += w * basis.eval(i, x) * basis.eval(j, x) * face.normal[d];
        }
    }
    total
}

pub(crate) fn centroid(v: &[Point]) -> Point {
    let n = v.len() as f64;
    [v.iter().map(|p| p[0]).sum::<f64>() / n, v.iter().map(|p| p[1]).sum::<f64>() / n]
}

pub(crate) fn diameter(v: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d = d.max(dist(v[i], v[j]));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lgl_p1_matches_hand_solution() {
        let op = build_lgl_sbp_1d(1).unwrap();
        assert_eq!(op.nodes, vec![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(op.h, vec![1.0, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, 0.5]);
        assert!((&op.q[0] - q).amax() < 1e-15);
        let e = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!((&op.e[0] - &e).amax() < 1e-15);
        assert!((&op.q[0] + op.q[0].transpose() - e).amax() < 1e-15);
        let r = verify_sbp(&op, 1);
        assert!(r.passes(1e-14, 1e-14, 1e-14, 1e-14), "{r:?}");
    }

    #[test]
    fn lgl_p2_weights() {
        let op = build_lgl_sbp_1d(2).unwrap();
        assert!((op.nodes[1][0]).abs() < 1e-16);
        let expected = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for (h, e) in op.h.iter().zip(expected) {
            assert!((h - e).abs() < 1e-15);
        }
    }

    #[test]
    fn lgl_operators_pass_verification() {
        for p in 1..=4 {
            let op = build_lgl_sbp_1d(p).unwrap();
            let ones = DVector::from_element(op.num_nodes(), 1.0);
            assert!((op.d(0) * ones).amax() < 1e-13);
            let r = verify_sbp(&op, p);
            assert!(r.passes(1e-12, 1e-14, 1e-13, 1e-12), "p={p} {r:?}");
            assert_eq!(r.quadrature_degree, 2 * p - 1);
        }
        assert!(build_lgl_sbp_1d(0).is_err());
        assert!(build_lgl_sbp_1d(5).is_err());
    }

    #[test]
    fn augmented_1d_operators_are_2p_exact() {
        for p in 0..=4 {
            let op = build_sbp_1d_2p_exact(p).unwrap();
            let r = verify_sbp(&op, p);
            assert!(r.passes(1e-12, 1e-14, 1e-13, 1e-12), "p={p} {r:?}");
            assert!(r.quadrature_degree >= 2 * p);
        }
    }

    #[test]
    fn corrupted_q_is_flagged() {
        let mut op = build_lgl_sbp_1d(3).unwrap();
        op.q[0][(1, 2)] += 1e-6;
        let r = verify_sbp(&op, 3);
        assert!(r.accuracy > 1e-7 && r.accuracy < 1e-4, "{r:?}");
        assert!(r.q_plus_qt_minus_e > 5e-7);
    }

    #[test]
    fn triangle_p1_structure() {
        let op = build_tri_sbp(1).unwrap();
        assert_eq!(op.num_nodes(), 7);
        // classical vertices / midpoints / centroid rule, scaled to area 1/2
        let expect = [1.0 / 40.0, 1.0 / 15.0, 9.0 / 40.0];
        assert!((op.h[0] - expect[0]).abs() < 1e-14);
        assert!((op.h[3] - expect[1]).abs() < 1e-14);
        assert!((op.h[6] - expect[2]).abs() < 1e-14);
        assert!((op.measure() - 0.5).abs() < 1e-14);
        for d in 0..2 {
            let row_sum: f64 = op.e[d].iter().sum();
            assert!(row_sum.abs() < 1e-15);
        }
        let r = verify_sbp(&op, 1);
        assert!(r.passes(1e-12, 1e-14, 1e-13, 1e-13), "{r:?}");
        assert!(r.face_decomposition < 1e-15);
        assert!(r.quadrature_degree >= 3);
    }

    #[test]
    fn triangle_p2_structure() {
        let op = build_tri_sbp(2).unwrap();
        assert_eq!(op.num_nodes(), 12);
        // weights and orbit parameter from an independent root-find of the same moment system
        let alpha = 0.21285435711180792;
        assert!((tri_p2_alpha() - alpha).abs() < 1e-13);
        let expect = [0.006261126504899716, 0.026823800250389065, 0.1067579396609889];
        assert!((op.h[0] - expect[0]).abs() < 1e-13);
        assert!((op.h[3] - expect[1]).abs() < 1e-13);
        assert!((op.h[9] - expect[2]).abs() < 1e-13);
        assert!((op.measure() - 0.5).abs() < 1e-14);
        let r = verify_sbp(&op, 2);
        assert!(r.passes(1e-12, 1e-14, 1e-13, 1e-12), "{r:?}");
        assert!(r.quadrature_degree >= 4);
        assert!(build_tri_sbp(3).is_err());
    }

    #[test]
    fn physical_interval_scaling() {
        let op = build_lgl_sbp_1d(3).unwrap();
        let h = 0.2;
        let ph = map_to_physical(&op, &[[1.0, 0.0], [1.0 + h, 0.0]]).unwrap();
        for (a, b) in ph.h.iter().zip(&op.h) {
            assert!((a - b * h / 2.0).abs() < 1e-15);
        }
        assert!((ph.d(0) - op.d(0) * (2.0 / h)).amax() < 1e-12);
        assert!(verify_sbp(&ph, 3).passes(1e-10, 1e-14, 1e-13, 1e-12));
        let same = map_to_physical(&op, &[[-1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!((&same.q[0] - &op.q[0]).amax() < 1e-15);
    }

    #[test]
    fn physical_triangle() {
        let op = build_tri_sbp(1).unwrap();
        let same = map_to_physical(&op, &REFERENCE_TRIANGLE).unwrap();
        assert!((&same.q[1] - &op.q[1]).amax() < 1e-15);
        let h = 0.125;
        let ph = map_to_physical(&op, &[[0.5, 0.5], [0.5 + h, 0.5], [0.5, 0.5 + h]]).unwrap();
        assert!((ph.measure() - h * h / 2.0).abs() < 1e-16);
        let skewed = map_to_physical(&op, &[[0.1, 0.2], [0.4, 0.25], [0.2, 0.6]]).unwrap();
        let r = verify_sbp(&skewed, 1);
        assert!(r.passes(1e-11, 1e-14, 1e-13, 1e-13), "{r:?}");
        // face-by-face E agrees with the metric combination of reference E
        let c = skewed.q[0].clone() + skewed.q[0].transpose();
        assert!((c - &skewed.e[0]).amax() < 1e-14);
        assert!(map_to_physical(&op, &[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn text_dump_has_seventeen_digits() {
        let op = build_lgl_sbp_1d(1).unwrap();
        let txt = op.to_text();
        assert!(txt.contains("node 0 -1.0000000000000000e0"));
        assert!(txt.contains("face 1 normal"));
    }
}
