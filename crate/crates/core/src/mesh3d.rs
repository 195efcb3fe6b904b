//! Tetrahedral meshes of an axis-aligned box and P1 element geometry.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Which face of the box a boundary facet lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceTag {
    /// The four faces with normals along x or y.
    Lateral,
    /// The face `z = zmax`.
    Top,
    /// The face `z = zmin`.
    Bottom,
}

impl FaceTag {
    pub const ALL: [FaceTag; 3] = [FaceTag::Lateral, FaceTag::Top, FaceTag::Bottom];

    pub fn index(self) -> usize {
        match self {
            FaceTag::Lateral => 0,
            FaceTag::Top => 1,
            FaceTag::Bottom => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 3],
    pub tag: FaceTag,
    pub tet: usize,
}

#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Point3<f64>>,
    tets: Vec<[usize; 4]>,
    boundary_facets: Vec<BoundaryFacet>,
    h: f64,
    lower: Point3<f64>,
    upper: Point3<f64>,
}

/// Meshes `[-l/2, l/2]^3` with `n` cells per axis, each cell split into the
/// six Kuhn tetrahedra sharing its main diagonal.
pub fn build_box_mesh(l: f64, n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidDiscretization("box mesh needs at least one subdivision".into()));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidDiscretization(format!("box edge must be positive, got {l}")));
    }
    let np = n + 1;
    let step = l / n as f64;
    let coord = |i: usize| -0.5 * l + i as f64 * step;
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push(Point3::new(coord(i), coord(j), coord(k)));
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut ijk = [i, j, k];
                    let mut tet = [vid(i, j, k); 4];
                    for (step_no, &axis) in perm.iter().enumerate() {
                        ijk[axis] += 1;
                        tet[step_no + 1] = vid(ijk[0], ijk[1], ijk[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let half = 0.5 * l;
    TetMesh::from_parts(vertices, tets, Point3::new(-half, -half, -half), Point3::new(half, half, half))
}

impl TetMesh {
    /// Builds a mesh from raw vertices and connectivity, orienting every tet
    /// positively and tagging boundary facets by their outward normal.
    pub fn from_parts(vertices: Vec<Point3<f64>>, mut tets: Vec<[usize; 4]>, lower: Point3<f64>, upper: Point3<f64>) -> Result<Self> {
        for (t, tet) in tets.iter_mut().enumerate() {
            let vol = signed_volume(&vertices, tet);
            if vol.abs() <= 1e-14 * (upper - lower).norm().powi(3) {
                return Err(Error::DegenerateTet { tet: t, volume: vol });
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        let mut h: f64 = 0.0;
        for tet in &tets {
            for a in 0..4 {
                for b in a + 1..4 {
                    h = h.max((vertices[tet[a]] - vertices[tet[b]]).norm());
                }
            }
        }
        let mut faces: HashMap<[usize; 3], (usize, usize, usize)> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for skip in 0..4 {
                let mut face = [0; 3];
                let mut m = 0;
                for (local, &v) in tet.iter().enumerate() {
                    if local != skip {
                        face[m] = v;
                        m += 1;
                    }
                }
                let mut key = face;
                key.sort_unstable();
                let entry = faces.entry(key).or_insert((0, t, skip));
                entry.0 += 1;
            }
        }
        let mut boundary_facets: Vec<BoundaryFacet> = faces
            .into_iter()
            .filter(|(_, (count, _, _))| *count == 1)
            .map(|(key, (_, t, skip))| {
                let tet = tets[t];
                let p = |i: usize| vertices[key[i]];
                let mut normal = (p(1) - p(0)).cross(&(p(2) - p(0))).normalize();
                if normal.dot(&(vertices[tet[skip]] - p(0))) > 0.0 {
                    normal = -normal;
                }
                let tag = if normal.z > 1.0 - 1e-12 {
                    FaceTag::Top
                } else if normal.z < -1.0 + 1e-12 {
                    FaceTag::Bottom
                } else {
                    FaceTag::Lateral
                };
                BoundaryFacet { vertices: key, tag, tet: t }
            })
            .collect();
        boundary_facets.sort_by_key(|f| f.vertices);
        Ok(Self {
            vertices,
            tets,
            boundary_facets,
            h,
            lower,
            upper,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    /// Largest edge length over all tets.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        (self.lower, self.upper)
    }

    /// Longest edge of the bounding box; the reference length for tolerances.
    pub fn box_edge(&self) -> f64 {
        (self.upper - self.lower).max()
    }

    pub fn geometric_tolerance(&self) -> f64 {
        1e-10 * self.box_edge()
    }

    pub fn tet_points(&self, t: usize) -> [Point3<f64>; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.vertices, &self.tets[t])
    }

    /// Gradients of the four barycentric basis functions of tet `t`.
    pub fn tet_p1_gradients(&self, t: usize) -> Result<[Vector3<f64>; 4]> {
        let [p0, p1, p2, p3] = self.tet_points(t);
        let (e1, e2, e3) = (p1 - p0, p2 - p0, p3 - p0);
        let det = e1.dot(&e2.cross(&e3));
        let scale = e1.norm() * e2.norm() * e3.norm();
        if det.abs() <= 1e-14 * scale {
            return Err(Error::DegenerateTet { tet: t, volume: det / 6.0 });
        }
        let g1 = e2.cross(&e3) / det;
        let g2 = e3.cross(&e1) / det;
        let g3 = e1.cross(&e2) / det;
        Ok([-(g1 + g2 + g3), g1, g2, g3])
    }

    /// Barycentric coordinates of `p` with respect to tet `t`.
    pub fn barycentric(&self, t: usize, p: &Point3<f64>) -> Result<[f64; 4]> {
        let grads = self.tet_p1_gradients(t)?;
        Ok(barycentric_from_gradients(&grads, &self.vertices[self.tets[t][0]], p))
    }

    /// True when `p` lies in the closed tet inflated by `tol` (a length).
    pub fn contains(&self, t: usize, p: &Point3<f64>, tol: f64) -> Result<bool> {
        let grads = self.tet_p1_gradients(t)?;
        let lam = barycentric_from_gradients(&grads, &self.vertices[self.tets[t][0]], p);
        Ok(lam.iter().zip(&grads).all(|(l, g)| *l >= -tol * g.norm()))
    }

    /// Lowest-index tet containing `p` within the geometric tolerance.
    pub fn locate_point(&self, p: &Point3<f64>) -> Option<usize> {
        let tol = self.geometric_tolerance();
        (0..self.tets.len()).find(|&t| self.contains(t, p, tol).unwrap_or(false))
    }

    pub fn in_box(&self, p: &Point3<f64>, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.lower[i] - tol && p[i] <= self.upper[i] + tol)
    }

    /// Vertices on facets with the given tag.
    pub fn vertices_with_tag(&self, tag: FaceTag) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_facets
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| f.vertices)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Splits the segment `a -> b` at every crossing of a tet boundary.
    ///
    /// Intervals lying on shared faces or edges are assigned to the
    /// lowest-index tet that contains them; tangential contacts of zero
    /// length are dropped.
    pub fn locate_segment_breakpoints(&self, a: &Point3<f64>, b: &Point3<f64>) -> Result<InducedPartition> {
        let tol = self.geometric_tolerance();
        let dir = b - a;
        let length = dir.norm();
        if length <= tol {
            return Err(Error::ZeroLengthSegment);
        }
        for p in [a, b] {
            if !self.in_box(p, tol) {
                return Err(Error::SegmentOutsideDomain { point: [p.x, p.y, p.z] });
            }
        }
        let seg_lo = a.inf(b);
        let seg_hi = a.sup(b);
        // breakpoints come from a roundoff-level clip so that tolerance
        // inflation cannot create spurious sliver intervals
        let roundoff = 1e-13 * self.box_edge();
        let mut raw: Vec<f64> = vec![0.0, length];
        let mut candidates: Vec<(f64, f64, usize)> = Vec::new();
        for (t, tet) in self.tets.iter().enumerate() {
            let pts = tet.map(|v| self.vertices[v]);
            let lo = pts.iter().fold(pts[0], |m, p| m.inf(p));
            let hi = pts.iter().fold(pts[0], |m, p| m.sup(p));
            if (0..3).any(|i| lo[i] > seg_hi[i] + tol || hi[i] < seg_lo[i] - tol) {
                continue;
            }
            let grads = self.tet_p1_gradients(t)?;
            let la = barycentric_from_gradients(&grads, &pts[0], a);
            let lb = barycentric_from_gradients(&grads, &pts[0], b);
            if let Some((t0, t1)) = clip_parameter_range(&la, &lb, &grads, roundoff) {
                if (t1 - t0) * length > tol {
                    raw.push((t0 * length).clamp(0.0, length));
                    raw.push((t1 * length).clamp(0.0, length));
                }
            }
            if let Some((t0, t1)) = clip_parameter_range(&la, &lb, &grads, tol) {
                if t1 >= t0 {
                    candidates.push((t0 * length, t1 * length, t));
                }
            }
        }
        raw.sort_by(f64::total_cmp);
        let mut breaks: Vec<f64> = Vec::with_capacity(raw.len());
        for v in raw {
            match breaks.last() {
                Some(&last) if v - last <= tol => {}
                _ => breaks.push(v),
            }
        }
        *breaks.last_mut().unwrap() = length;
        if breaks.len() < 2 {
            return Err(Error::ZeroLengthSegment);
        }
        let mut tets = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            // candidates are in ascending tet order
            let owner = candidates
                .iter()
                .find(|&&(s0, s1, _)| s0 <= w[0] + tol && w[1] <= s1 + tol)
                .map(|&(_, _, t)| t)
                .ok_or(Error::UncoveredInterval { start: w[0], end: w[1] })?;
            tets.push(owner);
        }
        Ok(InducedPartition { length, breaks, tets })
    }
}

/// Parameter range `[t0, t1]` of `a + t (b - a)`, `t` in [0, 1], inside the
/// tet inflated by `slack` (a length); `None` when empty.
fn clip_parameter_range(la: &[f64; 4], lb: &[f64; 4], grads: &[Vector3<f64>; 4], slack: f64) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for i in 0..4 {
        let bound = -slack * grads[i].norm();
        let slope = lb[i] - la[i];
        if slope.abs() <= 1e-15 {
            if la[i] < bound {
                return None;
            }
        } else {
            let root = (bound - la[i]) / slope;
            if slope > 0.0 {
                t0 = t0.max(root);
            } else {
                t1 = t1.min(root);
            }
        }
    }
    (t1 >= t0).then_some((t0, t1))
}

#[inline]
pub fn barycentric_from_gradients(grads: &[Vector3<f64>; 4], p0: &Point3<f64>, p: &Point3<f64>) -> [f64; 4] {
    let d = p - p0;
    let l1 = grads[1].dot(&d);
    let l2 = grads[2].dot(&d);
    let l3 = grads[3].dot(&d);
    [1.0 - l1 - l2 - l3, l1, l2, l3]
}

fn signed_volume(vertices: &[Point3<f64>], tet: &[usize; 4]) -> f64 {
    let p0 = vertices[tet[0]];
    let e1 = vertices[tet[1]] - p0;
    let e2 = vertices[tet[2]] - p0;
    let e3 = vertices[tet[3]] - p0;
    e1.dot(&e2.cross(&e3)) / 6.0
}

/// The 1D mesh a segment inherits from the tets it crosses: breakpoints in
/// arclength and the tet owning each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedPartition {
    length: f64,
    breaks: Vec<f64>,
    tets: Vec<usize>,
}

impl InducedPartition {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn tets(&self) -> &[usize] {
        &self.tets
    }

    pub fn n_intervals(&self) -> usize {
        self.tets.len()
    }

    /// Interval index containing arclength `s` (right-continuous, last
    /// interval closed).
    pub fn interval_at(&self, s: f64) -> usize {
        let k = self.breaks.partition_point(|&b| b <= s);
        k.saturating_sub(1).min(self.tets.len() - 1)
    }
}
