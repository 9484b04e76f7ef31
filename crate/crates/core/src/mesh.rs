//! Interval and triangle meshes with face connectivity and periodic identification.
//!
//! Points are stored as `[f64; 2]` in both dimensions; 1D meshes leave the second
//! coordinate at zero. Periodic boundary faces are glued into interior faces that
//! carry a translation (`shift`) mapping the right element into the frame of the
//! left one, so neighbor geometry stays contiguous across the seam.

use std::collections::HashMap;

use crate::error::{DgdError, Result};

pub type Point = [f64; 2];

/// Which side of an interior face an element sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceRef {
    Interior { face: usize, side: Side },
    Boundary { face: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    pub left: usize,
    pub right: usize,
    pub left_local: usize,
    pub right_local: usize,
    /// Unit normal pointing from `left` into `right`.
    pub normal: Point,
    pub measure: f64,
    /// Translation added to coordinates of `right` to place it next to `left`.
    pub shift: Point,
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub element: usize,
    pub local: usize,
    pub normal: Point,
    pub measure: f64,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    elements: Vec<Vec<usize>>,
    interior_faces: Vec<InteriorFace>,
    boundary_faces: Vec<BoundaryFace>,
    centroids: Vec<Point>,
    measures: Vec<f64>,
    element_faces: Vec<Vec<FaceRef>>,
    lower: Point,
    upper: Point,
    periodic: bool,
}

impl Mesh {
    /// Uniform partition of `[a, b]` into `k` cells.
    pub fn interval(k: usize, a: f64, b: f64, periodic: bool) -> Result<Self> {
        if k == 0 {
            return Err(DgdError::InvalidMesh("element count must be positive".into()));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(DgdError::InvalidMesh(format!("degenerate domain [{a}, {b}]")));
        }
        let h = (b - a) / k as f64;
        let vertices: Vec<Point> = (0..=k)
            .map(|i| {
                let x = if i == k { b } else { a + i as f64 * h };
                [x, 0.0]
            })
            .collect();
        let elements: Vec<Vec<usize>> = (0..k).map(|i| vec![i, i + 1]).collect();

        let mut interior_faces = Vec::new();
        let mut boundary_faces = Vec::new();
        let mut element_faces = vec![vec![FaceRef::Boundary { face: usize::MAX }; 2]; k];
        for i in 0..k.saturating_sub(1) {
            let idx = interior_faces.len();
            interior_faces.push(InteriorFace {
                left: i,
                right: i + 1,
                left_local: 1,
                right_local: 0,
                normal: [1.0, 0.0],
                measure: 1.0,
                shift: [0.0, 0.0],
                periodic: false,
            });
            element_faces[i][1] = FaceRef::Interior { face: idx, side: Side::Left };
            element_faces[i + 1][0] = FaceRef::Interior { face: idx, side: Side::Right };
        }
        if periodic {
            let idx = interior_faces.len();
            interior_faces.push(InteriorFace {
                left: k - 1,
                right: 0,
                left_local: 1,
                right_local: 0,
                normal: [1.0, 0.0],
                measure: 1.0,
                shift: [b - a, 0.0],
                periodic: true,
            });
            element_faces[k - 1][1] = FaceRef::Interior { face: idx, side: Side::Left };
            element_faces[0][0] = FaceRef::Interior { face: idx, side: Side::Right };
        } else {
            boundary_faces.push(BoundaryFace {
                element: 0,
                local: 0,
                normal: [-1.0, 0.0],
                measure: 1.0,
                tag: BoundaryTag::Left,
            });
            element_faces[0][0] = FaceRef::Boundary { face: 0 };
            boundary_faces.push(BoundaryFace {
                element: k - 1,
                local: 1,
                normal: [1.0, 0.0],
                measure: 1.0,
                tag: BoundaryTag::Right,
            });
            element_faces[k - 1][1] = FaceRef::Boundary { face: 1 };
        }

        let centroids = elements
            .iter()
            .map(|e| [0.5 * (vertices[e[0]][0] + vertices[e[1]][0]), 0.0])
            .collect();
        let measures = elements
            .iter()
            .map(|e| vertices[e[1]][0] - vertices[e[0]][0])
            .collect();
        Ok(Mesh {
            dim: 1,
            vertices,
            elements,
            interior_faces,
            boundary_faces,
            centroids,
            measures,
            element_faces,
            lower: [a, 0.0],
            upper: [b, 0.0],
            periodic,
        })
    }

    /// `2 n^2` triangles on the unit square, each quad split along its
    /// lower-left to upper-right diagonal.
    pub fn unit_square(n: usize, periodic: bool) -> Result<Self> {
        Self::structured_triangles(n, [0.0, 0.0], [1.0, 1.0], periodic)
    }

    pub fn structured_triangles(n: usize, lower: Point, upper: Point, periodic: bool) -> Result<Self> {
        if n == 0 {
            return Err(DgdError::InvalidMesh("cells per side must be positive".into()));
        }
        if !(lower[0] < upper[0] && lower[1] < upper[1]) {
            return Err(DgdError::InvalidMesh("degenerate rectangle".into()));
        }
        let (lx, ly) = (upper[0] - lower[0], upper[1] - lower[1]);
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let x = if i == n { upper[0] } else { lower[0] + lx * i as f64 / n as f64 };
                let y = if j == n { upper[1] } else { lower[1] + ly * j as f64 / n as f64 };
                vertices.push([x, y]);
            }
        }
        // Grid coordinates of each vertex, kept for periodic edge matching.
        let grid = |v: usize| (v % (n + 1), v / (n + 1));

        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                elements.push(vec![a, b, c]);
                elements.push(vec![a, c, d]);
            }
        }

        let measures: Vec<f64> = elements
            .iter()
            .map(|e| triangle_area(vertices[e[0]], vertices[e[1]], vertices[e[2]]))
            .collect();
        let centroids: Vec<Point> = elements
            .iter()
            .map(|e| {
                let (p, q, r) = (vertices[e[0]], vertices[e[1]], vertices[e[2]]);
                [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
            })
            .collect();

        // Edge key: start grid point (wrapped when periodic) plus direction.
        type Key = ((usize, usize), (usize, usize));
        let edge_key = |va: usize, vb: usize| -> Key {
            let (ia, ja) = grid(va);
            let (ib, jb) = grid(vb);
            // every grid edge direction has components of one sign
            let (p, q) = if ib < ia || jb < ja {
                ((ib, jb), (ia, ja))
            } else {
                ((ia, ja), (ib, jb))
            };
            let dir = (q.0 - p.0, q.1 - p.1);
            let start = if periodic { (p.0 % n, p.1 % n) } else { p };
            (start, dir)
        };

        let mut first_seen: HashMap<Key, (usize, usize)> = HashMap::new();
        let mut interior_faces = Vec::new();
        let mut boundary_faces = Vec::new();
        let mut element_faces = vec![vec![FaceRef::Boundary { face: usize::MAX }; 3]; elements.len()];
        for (e, verts) in elements.iter().enumerate() {
            for lf in 0..3 {
                let key = edge_key(verts[lf], verts[(lf + 1) % 3]);
                if let Some((e0, lf0)) = first_seen.remove(&key) {
                    let (normal, measure) = face_normal(&vertices, &elements[e0], lf0);
                    let mid_left = face_midpoint(&vertices, &elements[e0], lf0);
                    let mid_right = face_midpoint(&vertices, verts, lf);
                    let shift = [mid_left[0] - mid_right[0], mid_left[1] - mid_right[1]];
                    let periodic_face = shift[0].abs() > 1e-12 * lx || shift[1].abs() > 1e-12 * ly;
                    let idx = interior_faces.len();
                    interior_faces.push(InteriorFace {
                        left: e0,
                        right: e,
                        left_local: lf0,
                        right_local: lf,
                        normal,
                        measure,
                        shift: if periodic_face { shift } else { [0.0, 0.0] },
                        periodic: periodic_face,
                    });
                    element_faces[e0][lf0] = FaceRef::Interior { face: idx, side: Side::Left };
                    element_faces[e][lf] = FaceRef::Interior { face: idx, side: Side::Right };
                } else {
                    first_seen.insert(key, (e, lf));
                }
            }
        }
        // Whatever is left unmatched lies on the outer boundary.
        let mut leftovers: Vec<(usize, usize)> = first_seen.into_values().collect();
        leftovers.sort_unstable();
        for (e, lf) in leftovers {
            let (normal, measure) = face_normal(&vertices, &elements[e], lf);
            let tag = if normal[0] < -0.5 {
                BoundaryTag::Left
            } else if normal[0] > 0.5 {
                BoundaryTag::Right
            } else if normal[1] < -0.5 {
                BoundaryTag::Bottom
            } else {
                BoundaryTag::Top
            };
            let idx = boundary_faces.len();
            boundary_faces.push(BoundaryFace { element: e, local: lf, normal, measure, tag });
            element_faces[e][lf] = FaceRef::Boundary { face: idx };
        }

        Ok(Mesh {
            dim: 2,
            vertices,
            elements,
            interior_faces,
            boundary_faces,
            centroids,
            measures,
            element_faces,
            lower,
            upper,
            periodic,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn element(&self, k: usize) -> &[usize] {
        &self.elements[k]
    }

    /// Vertex coordinates of element `k`, in element-local order.
    pub fn element_vertices(&self, k: usize) -> Vec<Point> {
        self.elements[k].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn element_faces(&self, k: usize) -> &[FaceRef] {
        &self.element_faces[k]
    }

    pub fn centroid(&self, k: usize) -> Point {
        self.centroids[k]
    }

    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    pub fn measure(&self, k: usize) -> f64 {
        self.measures[k]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn bounds(&self) -> (Point, Point) {
        (self.lower, self.upper)
    }

    pub fn domain_measure(&self) -> f64 {
        match self.dim {
            1 => self.upper[0] - self.lower[0],
            _ => (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1]),
        }
    }

    /// Element diameter: cell length in 1D, longest edge in 2D.
    pub fn diameter(&self, k: usize) -> f64 {
        let v = self.element_vertices(k);
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max(dist(v[i], v[j]));
            }
        }
        d
    }

    /// Outward unit normal and measure of local face `lf` of element `k`.
    pub fn local_face_geometry(&self, k: usize, lf: usize) -> (Point, f64) {
        if self.dim == 1 {
            if lf == 0 {
                ([-1.0, 0.0], 1.0)
            } else {
                ([1.0, 0.0], 1.0)
            }
        } else {
            face_normal(&self.vertices, &self.elements[k], lf)
        }
    }

    /// Neighbor across local face `lf` of `k`, with the translation that moves
    /// the neighbor's coordinates into the frame of `k`.
    pub fn neighbor_across(&self, k: usize, lf: usize) -> Option<(usize, usize, Point)> {
        match self.element_faces[k][lf] {
            FaceRef::Interior { face, side } => {
                let f = &self.interior_faces[face];
                Some(match side {
                    Side::Left => (f.right, f.right_local, f.shift),
                    Side::Right => (f.left, f.left_local, [-f.shift[0], -f.shift[1]]),
                })
            }
            FaceRef::Boundary { .. } => None,
        }
    }

    /// Face-adjacent elements of `k` (periodic wrap included), without
    /// duplicates and never containing `k` itself.
    pub fn face_neighbors(&self, k: usize) -> Result<Vec<usize>> {
        if k >= self.num_elements() {
            return Err(DgdError::InvalidElement(k));
        }
        let mut out: Vec<usize> = Vec::with_capacity(3);
        for lf in 0..self.element_faces[k].len() {
            if let Some((nb, _, _)) = self.neighbor_across(k, lf) {
                if nb != k && !out.contains(&nb) {
                    out.push(nb);
                }
            }
        }
        Ok(out)
    }

    /// Neighbors paired with their coordinate shifts into the frame of `k`.
    pub fn face_neighbors_with_shift(&self, k: usize) -> Vec<(usize, Point)> {
        let mut out: Vec<(usize, Point)> = Vec::with_capacity(3);
        for lf in 0..self.element_faces[k].len() {
            if let Some((nb, _, shift)) = self.neighbor_across(k, lf) {
                if nb != k && !out.iter().any(|(e, _)| *e == nb) {
                    out.push((nb, shift));
                }
            }
        }
        out
    }

    /// The face glued to (`k`, `lf`) through a periodic identification.
    pub fn periodic_partner(&self, k: usize, lf: usize) -> Option<(usize, usize)> {
        match self.element_faces[k][lf] {
            FaceRef::Interior { face, side } if self.interior_faces[face].periodic => {
                let f = &self.interior_faces[face];
                Some(match side {
                    Side::Left => (f.right, f.right_local),
                    Side::Right => (f.left, f.left_local),
                })
            }
            _ => None,
        }
    }

    /// Plain-text node/element dump for debugging.
    pub fn to_text(&self) -> String {
        let mut s = format!("# dim {}\n# vertices {}\n", self.dim, self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            s += &format!("v {i} {:.17e} {:.17e}\n", v[0], v[1]);
        }
        s += &format!("# elements {}\n", self.elements.len());
        for (i, e) in self.elements.iter().enumerate() {
            let ids: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            s += &format!("e {i} {}\n", ids.join(" "));
        }
        s
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

fn face_midpoint(vertices: &[Point], elem: &[usize], lf: usize) -> Point {
    let a = vertices[elem[lf]];
    let b = vertices[elem[(lf + 1) % elem.len()]];
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Outward normal of triangle face `lf` (from vertex `lf` to `lf + 1`).
fn face_normal(vertices: &[Point], elem: &[usize], lf: usize) -> (Point, f64) {
    let a = vertices[elem[lf]];
    let b = vertices[elem[(lf + 1) % 3]];
    let c = vertices[elem[(lf + 2) % 3]];
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    let mut n = [t[1] / len, -t[0] / len];
    // orient away from the opposite vertex
    let to_c = [c[0] - a[0], c[1] - a[1]];
    if n[0] * to_c[0] + n[1] * to_c[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    (n, len)
}
