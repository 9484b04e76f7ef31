//! Entropy-conservative and entropy-stable DGD residual for the Euler equations.
//!
//! Unknowns are entropy variables at the element centroids, stored element-major:
//! `w̃[s ν + c]` is component `c` of element `ν`. They are prolonged to the SBP
//! nodes of each element, mapped to conservative states, and fed to a
//! Hadamard-form element residual with Ismail–Roe volume and face fluxes.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dgd_ops::DgdSpace;
use crate::error::{DgdError, Result};
use crate::euler::{Gas, IrParams, State};
use crate::linalg::CsrMatrix;
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxMode {
    Conservative,
    Stable,
}

/// Exterior state prescribed at a boundary face node.
pub type GhostFn = Arc<dyn Fn(Point) -> State + Send + Sync>;

/// Coupling of one local face to the neighbor element.
#[derive(Debug, Clone)]
enum FaceLink {
    /// Neighbor id and, for each node of this face, the collocated neighbor node.
    Interior { neighbor: usize, nodes: Vec<usize> },
    Boundary,
}

#[derive(Clone)]
pub struct SemiDiscretization {
    pub space: DgdSpace,
    pub gas: Gas,
    pub mode: FluxMode,
    ghost: Option<GhostFn>,
    links: Vec<Vec<FaceLink>>,
    coloring: Arc<std::sync::OnceLock<Coloring>>,
}

/// Nodal data of one element.
struct NodalStates {
    u: Vec<State>,
    params: Vec<IrParams>,
}

/// Column groups for finite-difference Jacobians, with the rows each column touches.
#[derive(Debug, Clone)]
struct Coloring {
    colors: Vec<Vec<usize>>,
    rows: Vec<Vec<usize>>,
}

impl SemiDiscretization {
    pub fn new(space: DgdSpace, gamma: f64, mode: FluxMode, ghost: Option<GhostFn>) -> Result<Self> {
        let mesh = &space.mesh;
        if !mesh.boundary_faces().is_empty() && ghost.is_none() {
            return Err(DgdError::InvalidMesh("non-periodic mesh needs exterior boundary states".into()));
        }
        let mut links = Vec::with_capacity(mesh.num_elements());
        for k in 0..mesh.num_elements() {
            let op = &space.operators[k];
            let mut lk = Vec::with_capacity(op.faces.len());
            for (lf, face) in op.faces.iter().enumerate() {
                match mesh.neighbor_across(k, lf) {
                    None => lk.push(FaceLink::Boundary),
                    Some((nb, nb_lf, shift)) => {
                        let nb_op = &space.operators[nb];
                        let nb_face = &nb_op.faces[nb_lf];
                        let mut nodes = Vec::with_capacity(face.nodes.len());
                        for &a in &face.nodes {
                            let x = op.nodes[a];
                            let found = nb_face.nodes.iter().copied().find(|&b| {
                                let y = nb_op.nodes[b];
                                (y[0] + shift[0] - x[0]).abs() < 1e-12 && (y[1] + shift[1] - x[1]).abs() < 1e-12
                            });
                            match found {
                                Some(b) => nodes.push(b),
                                None => {
                                    return Err(DgdError::InvalidMesh(format!(
                                        "face nodes of elements {k} and {nb} are not collocated"
                                    )))
                                }
                            }
                        }
                        lk.push(FaceLink::Interior { neighbor: nb, nodes });
                    }
                }
            }
            links.push(lk);
        }
        let gas = Gas::new(gamma, mesh.dim());
        Ok(SemiDiscretization { space, gas, mode, ghost, links, coloring: Arc::new(std::sync::OnceLock::new()) })
    }

    pub fn nvar(&self) -> usize {
        self.gas.nvar()
    }

    pub fn num_elements(&self) -> usize {
        self.space.num_elements()
    }

    pub fn num_unknowns(&self) -> usize {
        self.nvar() * self.num_elements()
    }

    /// Nodal entropy variables of element `k`: `w_k = (P_k ⊗ I_s) w̃`.
    pub fn prolong(&self, k: usize, w: &[f64]) -> Vec<State> {
        let s = self.nvar();
        let pr = &self.space.prolongations[k];
        let mut out = vec![[0.0; 4]; pr.num_nodes()];
        for (m, &nu) in pr.members.iter().enumerate() {
            for (q, o) in out.iter_mut().enumerate() {
                let pq = pr.matrix[(q, m)];
                for c in 0..s {
                    o[c] += pq * w[s * nu + c];
                }
            }
        }
        out
    }

    /// Add `(P_k ⊗ I_s)ᵀ v` into `out`.
    fn scatter_add(&self, k: usize, v: &[State], out: &mut [f64]) {
        let s = self.nvar();
        let pr = &self.space.prolongations[k];
        for (m, &nu) in pr.members.iter().enumerate() {
            for (q, vq) in v.iter().enumerate() {
                let pq = pr.matrix[(q, m)];
                for c in 0..s {
                    out[s * nu + c] += pq * vq[c];
                }
            }
        }
    }

    fn nodal_states(&self, k: usize, w: &[f64]) -> Result<NodalStates> {
        let wk = self.prolong(k, w);
        let mut u = Vec::with_capacity(wk.len());
        for (q, wq) in wk.iter().enumerate() {
            let uq = self.gas.state_from_entropy_vars(wq).map_err(|_| DgdError::Nonphysical {
                element: k,
                node: q,
                rho: f64::NAN,
                pressure: f64::NAN,
            })?;
            if !self.gas.is_physical(&uq) {
                return Err(DgdError::Nonphysical { element: k, node: q, rho: uq[0], pressure: self.gas.pressure(&uq) });
            }
            u.push(uq);
        }
        let params = u.iter().map(|x| self.gas.ir_params(x)).collect();
        Ok(NodalStates { u, params })
    }

    fn all_nodal_states(&self, w: &[f64]) -> Result<Vec<NodalStates>> {
        if w.len() != self.num_unknowns() {
            return Err(DgdError::DimensionMismatch(format!("{} unknowns, expected {}", w.len(), self.num_unknowns())));
        }
        (0..self.num_elements()).into_par_iter().map(|k| self.nodal_states(k, w)).collect()
    }

    /// `H_k r_k` from nodal states of `k` and its neighbors.
    fn element_weak_residual(&self, k: usize, states: &[NodalStates]) -> Vec<State> {
        let gas = &self.gas;
        let s = self.nvar();
        let op = &self.space.operators[k];
        let mine = &states[k];
        let n = op.num_nodes();
        let mut r = vec![[0.0; 4]; n];
        for i in 0..n {
            for j in 0..n {
                let nx = op.q[0][(i, j)];
                let ny = if op.dim == 2 { op.q[1][(i, j)] } else { 0.0 };
                if nx == 0.0 && ny == 0.0 {
                    continue;
                }
                let f = if i == j {
                    gas.flux(&mine.u[i], [nx, ny])
                } else {
                    gas.ismail_roe_params(&mine.params[i], &mine.params[j], [nx, ny])
                };
                for c in 0..s {
                    r[i][c] += 2.0 * f[c];
                }
            }
        }
        for (lf, face) in op.faces.iter().enumerate() {
            for (pos, (&a, &b)) in face.nodes.iter().zip(&face.weights).enumerate() {
                let ua = &mine.u[a];
                let (ext, ext_params) = match &self.links[k][lf] {
                    FaceLink::Interior { neighbor, nodes } => {
                        let nb = &states[*neighbor];
                        (nb.u[nodes[pos]], nb.params[nodes[pos]])
                    }
                    FaceLink::Boundary => {
                        let g = self.ghost.as_ref().expect("checked at construction")(op.nodes[a]);
                        (g, gas.ir_params(&g))
                    }
                };
                let mut fstar = gas.ismail_roe_params(&mine.params[a], &ext_params, face.normal);
                if self.mode == FluxMode::Stable {
                    let d = gas.interface_dissipation(ua, &ext, face.normal);
                    for c in 0..s {
                        fstar[c] += d[c];
                    }
                }
                let fa = gas.flux(ua, face.normal);
                for c in 0..s {
                    r[a][c] += b * (fstar[c] - fa[c]);
                }
            }
        }
        r
    }

    /// Element residual `r_k` (nodal, `H_k^{-1}` applied) for the given global state.
    pub fn element_residual(&self, k: usize, w: &[f64]) -> Result<Vec<State>> {
        let states = self.all_nodal_states(w)?;
        let mut r = self.element_weak_residual(k, &states);
        for (rq, h) in r.iter_mut().zip(&self.space.operators[k].h) {
            for c in rq.iter_mut() {
                *c /= h;
            }
        }
        Ok(r)
    }

    /// `R̃ = Σ_k (P_k ⊗ I_s)ᵀ H_k r_k(w̃)`.
    pub fn dgd_residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        let states = self.all_nodal_states(w)?;
        let local: Vec<Vec<State>> =
            (0..self.num_elements()).into_par_iter().map(|k| self.element_weak_residual(k, &states)).collect();
        let mut out = vec![0.0; self.num_unknowns()];
        for (k, r) in local.iter().enumerate() {
            self.scatter_add(k, r, &mut out);
        }
        Ok(out)
    }

    /// `m̃ = Σ_k (P_k ⊗ I_s)ᵀ H_k u_k(w̃)`.
    pub fn dgd_mass_term(&self, w: &[f64]) -> Result<Vec<f64>> {
        let states = self.all_nodal_states(w)?;
        let mut out = vec![0.0; self.num_unknowns()];
        for (k, st) in states.iter().enumerate() {
            let h = &self.space.operators[k].h;
            let v: Vec<State> = st.u.iter().zip(h).map(|(u, &hq)| u.map(|x| x * hq)).collect();
            self.scatter_add(k, &v, &mut out);
        }
        Ok(out)
    }

    /// `∂m̃/∂w̃ = Σ_k P̄_kᵀ H̄_k (∂u/∂w) P̄_k`.
    pub fn mass_jacobian(&self, w: &[f64]) -> Result<CsrMatrix> {
        let states = self.all_nodal_states(w)?;
        let s = self.nvar();
        let blocks: Vec<Vec<(usize, usize, f64)>> = (0..self.num_elements())
            .into_par_iter()
            .map(|k| {
                let pr = &self.space.prolongations[k];
                let h = &self.space.operators[k].h;
                let nk = pr.stencil_size();
                let mut t = Vec::with_capacity(nk * nk * s * s);
                let a0: Vec<[[f64; 4]; 4]> = states[k].u.iter().map(|u| self.gas.dudw(u)).collect();
                for m1 in 0..nk {
                    for m2 in 0..nk {
                        let mut blk = [[0.0; 4]; 4];
                        for q in 0..pr.num_nodes() {
                            let c = pr.matrix[(q, m1)] * h[q] * pr.matrix[(q, m2)];
                            for (bi, ai) in blk.iter_mut().zip(&a0[q]) {
                                for (b, a) in bi.iter_mut().zip(ai) {
                                    *b += c * a;
                                }
                            }
                        }
                        for c1 in 0..s {
                            for c2 in 0..s {
                                t.push((s * pr.members[m1] + c1, s * pr.members[m2] + c2, blk[c1][c2]));
                            }
                        }
                    }
                }
                t
            })
            .collect();
        let n = self.num_unknowns();
        Ok(CsrMatrix::from_triplets(n, n, &blocks.concat()))
    }

    /// `S(w̃) = Σ_k Σ_q H_qq 𝒮(u_q)`.
    pub fn total_entropy(&self, w: &[f64]) -> Result<f64> {
        let states = self.all_nodal_states(w)?;
        Ok(states
            .iter()
            .zip(&self.space.operators)
            .map(|(st, op)| st.u.iter().zip(&op.h).map(|(u, h)| h * self.gas.entropy(u)).sum::<f64>())
            .sum())
    }

    /// `R(w̃) = w̃ᵀ R̃(w̃)`.
    pub fn entropy_rate(&self, w: &[f64]) -> Result<f64> {
        let r = self.dgd_residual(w)?;
        Ok(w.iter().zip(&r).map(|(a, b)| a * b).sum())
    }

    /// `Σ_k Σ_q H_qq u_q`, the discrete integral of each conserved variable.
    pub fn conserved_totals(&self, w: &[f64]) -> Result<State> {
        let states = self.all_nodal_states(w)?;
        let mut tot = [0.0; 4];
        for (st, op) in states.iter().zip(&self.space.operators) {
            for (u, h) in st.u.iter().zip(&op.h) {
                for c in 0..4 {
                    tot[c] += h * u[c];
                }
            }
        }
        Ok(tot)
    }

    /// Conservative states at the SBP nodes of every element.
    pub fn nodal_conservative(&self, w: &[f64]) -> Result<Vec<Vec<State>>> {
        Ok(self.all_nodal_states(w)?.into_iter().map(|s| s.u).collect())
    }

    /// Centroid coefficients `w̃_k = 𝒲(u(x̃_k))` from a conservative-state field.
    pub fn interpolate(&self, f: &dyn Fn(Point) -> State) -> Result<Vec<f64>> {
        let s = self.nvar();
        let mut w = vec![0.0; self.num_unknowns()];
        for (k, c) in self.space.mesh.centroids().iter().enumerate() {
            let wk = self.gas.entropy_vars(&f(*c))?;
            w[s * k..s * k + s].copy_from_slice(&wk[..s]);
        }
        Ok(w)
    }

    fn coloring(&self) -> &Coloring {
        self.coloring.get_or_init(|| self.build_coloring())
    }

    /// Greedy column grouping: two unknowns share a color only if the residual
    /// rows they influence are disjoint.
    fn build_coloring(&self) -> Coloring {
        let mesh = &self.space.mesh;
        let kk = self.num_elements();
        let s = self.nvar();
        // elements whose residual depends on element-coefficient ν
        let mut touched: Vec<Vec<usize>> = vec![Vec::new(); kk];
        for k in 0..kk {
            for &nu in &self.space.stencils[k].members {
                touched[nu].push(k);
            }
        }
        let mut elem_rows: Vec<Vec<usize>> = Vec::with_capacity(kk);
        for nu in 0..kk {
            let mut affected: Vec<usize> = Vec::new();
            for &k in &touched[nu] {
                affected.push(k);
                affected.extend(mesh.face_neighbors(k).unwrap_or_default());
            }
            let mut rows: Vec<usize> = affected.iter().flat_map(|&k| self.space.stencils[k].members.iter().copied()).collect();
            rows.sort_unstable();
            rows.dedup();
            elem_rows.push(rows);
        }
        // color elements; every component of an element gets its own color class
        let mut colors_of_rows: Vec<Vec<bool>> = Vec::new();
        let mut elem_color = vec![0; kk];
        for nu in 0..kk {
            let c = (0..colors_of_rows.len())
                .find(|&c| elem_rows[nu].iter().all(|&r| !colors_of_rows[c][r]))
                .unwrap_or_else(|| {
                    colors_of_rows.push(vec![false; kk]);
                    colors_of_rows.len() - 1
                });
            for &r in &elem_rows[nu] {
                colors_of_rows[c][r] = true;
            }
            elem_color[nu] = c;
        }
        let ncol = colors_of_rows.len();
        let mut colors = vec![Vec::new(); ncol * s];
        for nu in 0..kk {
            for comp in 0..s {
                colors[elem_color[nu] * s + comp].push(s * nu + comp);
            }
        }
        let rows = (0..kk * s)
            .map(|col| elem_rows[col / s].iter().flat_map(|&e| (0..s).map(move |c| s * e + c)).collect())
            .collect();
        Coloring { colors, rows }
    }

    pub fn num_jacobian_colors(&self) -> usize {
        self.coloring().colors.len()
    }

    /// `∂R̃/∂w̃` by grouped finite differences with steps `rel_step (1 + |w_j|)`.
    /// `central` doubles the cost and gives second-order accuracy.
    pub fn residual_jacobian_fd(&self, w: &[f64], rel_step: f64, central: bool) -> Result<CsrMatrix> {
        let col = self.coloring();
        let base = if central { None } else { Some(self.dgd_residual(w)?) };
        let groups: Vec<Vec<(usize, usize, f64)>> = col
            .colors
            .par_iter()
            .map(|group| -> Result<Vec<(usize, usize, f64)>> {
                let steps: Vec<f64> = group.iter().map(|&j| rel_step * (1.0 + w[j].abs())).collect();
                let mut wp = w.to_vec();
                for (&j, &h) in group.iter().zip(&steps) {
                    wp[j] += h;
                }
                let rp = self.dgd_residual(&wp)?;
                let (rm, denom) = match &base {
                    Some(b) => (b.clone(), 1.0),
                    None => {
                        let mut wm = w.to_vec();
                        for (&j, &h) in group.iter().zip(&steps) {
                            wm[j] -= h;
                        }
                        (self.dgd_residual(&wm)?, 2.0)
                    }
                };
                let mut t = Vec::new();
                for (&j, &h) in group.iter().zip(&steps) {
                    for &r in &col.rows[j] {
                        t.push((r, j, (rp[r] - rm[r]) / (denom * h)));
                    }
                }
                Ok(t)
            })
            .collect::<Result<_>>()?;
        let n = self.num_unknowns();
        Ok(CsrMatrix::from_triplets(n, n, &groups.concat()))
    }
}
