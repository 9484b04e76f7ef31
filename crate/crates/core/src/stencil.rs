//! Per-element patches grown by face adjacency.

use crate::basis::num_polynomials;
use crate::error::{DgdError, Result};
use crate::mesh::{Mesh, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub owner: usize,
    /// Owner first, then breadth-first generations, each sorted by element id.
    pub members: Vec<usize>,
    /// Member centroids translated into the owner's frame.
    pub member_centroids: Vec<Point>,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Grow `N_k^j = N_k^{j-1} ∪ F(N_k^{j-1})` until it holds at least as many
/// elements as there are degree-`p` polynomials. No trimming afterwards.
pub fn build_stencil(mesh: &Mesh, k: usize, p: usize) -> Result<Stencil> {
    if k >= mesh.num_elements() {
        return Err(DgdError::InvalidElement(k));
    }
    let needed = num_polynomials(p, mesh.dim());
    let mut members = vec![k];
    let mut offsets: Vec<Point> = vec![[0.0, 0.0]];
    while members.len() < needed {
        let mut fresh: Vec<(usize, Point)> = Vec::new();
        for (i, &m) in members.iter().enumerate() {
            let base = offsets[i];
            for (nb, shift) in mesh.face_neighbors_with_shift(m) {
                if members.contains(&nb) || fresh.iter().any(|(e, _)| *e == nb) {
                    continue;
                }
                fresh.push((nb, [base[0] + shift[0], base[1] + shift[1]]));
            }
        }
        if fresh.is_empty() {
            return Err(DgdError::StencilTooSmall { element: k, reached: members.len(), needed });
        }
        fresh.sort_by_key(|(e, _)| *e);
        for (e, o) in fresh {
            members.push(e);
            offsets.push(o);
        }
    }
    let member_centroids = members
        .iter()
        .zip(&offsets)
        .map(|(&m, o)| {
            let c = mesh.centroid(m);
            [c[0] + o[0], c[1] + o[1]]
        })
        .collect();
    Ok(Stencil { owner: k, members, member_centroids })
}

pub fn build_all_stencils(mesh: &Mesh, p: usize) -> Result<Vec<Stencil>> {
    (0..mesh.num_elements()).map(|k| build_stencil(mesh, k, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_owner_only() {
        let mesh = Mesh::unit_square(3, false).unwrap();
        for k in 0..mesh.num_elements() {
            let s = build_stencil(&mesh, k, 0).unwrap();
            assert_eq!(s.members, vec![k]);
        }
    }

    #[test]
    fn interior_1d_stencils_are_symmetric() {
        let mesh = Mesh::interval(10, 0.0, 1.0, true).unwrap();
        let s = build_stencil(&mesh, 4, 2).unwrap();
        assert_eq!(s.members, vec![4, 3, 5]);
        for p in 1..=4 {
            for k in 0..10 {
                let s = build_stencil(&mesh, k, p).unwrap();
                let c = s.member_centroids[0][0];
                let mut offsets: Vec<f64> = s.member_centroids.iter().map(|x| x[0] - c).collect();
                offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = offsets.len();
                for i in 0..n {
                    assert!((offsets[i] + offsets[n - 1 - i]).abs() < 1e-14, "p={p} k={k}");
                }
            }
        }
    }

    #[test]
    fn wrapped_centroids_are_contiguous() {
        let mesh = Mesh::interval(10, 0.0, 1.0, true).unwrap();
        let s = build_stencil(&mesh, 0, 2).unwrap();
        assert_eq!(s.members, vec![0, 1, 9]);
        assert!((s.member_centroids[2][0] - (-0.05)).abs() < 1e-14);
    }

    #[test]
    fn boundary_stencils_grow_inward() {
        let mesh = Mesh::interval(10, 0.0, 1.0, false).unwrap();
        let s = build_stencil(&mesh, 0, 2).unwrap();
        assert_eq!(s.members, vec![0, 1, 2]);
    }

    #[test]
    fn triangle_linear_stencil_overshoots() {
        let mesh = Mesh::unit_square(8, true).unwrap();
        for k in 0..mesh.num_elements() {
            let s = build_stencil(&mesh, k, 1).unwrap();
            assert_eq!(s.len(), 4);
            assert_eq!(s.members[0], k);
        }
    }

    #[test]
    fn too_small_mesh_fails() {
        let mesh = Mesh::interval(2, 0.0, 1.0, false).unwrap();
        assert!(matches!(build_stencil(&mesh, 0, 3), Err(DgdError::StencilTooSmall { .. })));
    }

    #[test]
    fn generations_are_monotone() {
        let mesh = Mesh::unit_square(6, false).unwrap();
        for k in [0, 17, 40] {
            let s1 = build_stencil(&mesh, k, 1).unwrap();
            let s2 = build_stencil(&mesh, k, 2).unwrap();
            assert!(s1.members.iter().all(|m| s2.members.contains(m)));
            let mut uniq = s2.members.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), s2.len());
        }
    }
}
