//! Inclusion centrelines: segments, their splitting at intersections, and the
//! independent 1D partitions carrying the line unknowns.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh3d::InducedPartition;

/// Boundary condition at one end of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointBc {
    Dirichlet(f64),
    /// Homogeneous Neumann, imposed naturally.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEnd {
    Start,
    End,
}

/// A straight inclusion of circular cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
    pub bc: [EndpointBc; 2],
}

impl Segment {
    pub fn new(a: Point3<f64>, b: Point3<f64>, radius: f64) -> Self {
        Self {
            a,
            b,
            radius,
            bc: [EndpointBc::Neumann; 2],
        }
    }

    pub fn with_bc(mut self, start: EndpointBc, end: EndpointBc) -> Self {
        self.bc = [start, end];
        self
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn tangent(&self) -> Vector3<f64> {
        (self.b - self.a) / self.length()
    }

    pub fn point_at(&self, s: f64) -> Point3<f64> {
        self.a + self.tangent() * s
    }

    /// `|Γ(s)|`, the section perimeter.
    pub fn perimeter(&self) -> f64 {
        2.0 * PI * self.radius
    }

    /// `|Σ(s)|`, the section area.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn endpoint(&self, end: SegmentEnd) -> Point3<f64> {
        match end {
            SegmentEnd::Start => self.a,
            SegmentEnd::End => self.b,
        }
    }

    pub fn endpoint_bc(&self, end: SegmentEnd) -> EndpointBc {
        match end {
            SegmentEnd::Start => self.bc[0],
            SegmentEnd::End => self.bc[1],
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::InvalidDiscretization(format!("segment radius must be positive, got {}", self.radius)));
        }
        if self.length() <= 0.0 {
            return Err(Error::ZeroLengthSegment);
        }
        if self.radius > self.length() / 10.0 {
            log::warn!(
                "segment radius {} is not small against its length {}; the 1D reduction assumes R << S",
                self.radius,
                self.length()
            );
        }
        Ok(())
    }
}

/// A piece of an input segment between consecutive intersection points.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsegment {
    pub segment: Segment,
    /// Index of the input segment this piece was cut from.
    pub parent: usize,
    /// Arclength of the piece's start within its parent.
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub subsegment: usize,
    pub end: SegmentEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub point: Point3<f64>,
    pub incidences: Vec<Incidence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentNetwork {
    segments: Vec<Segment>,
    subsegments: Vec<Subsegment>,
    junctions: Vec<Junction>,
}

impl SegmentNetwork {
    pub fn empty() -> Self {
        Self {
            segments: Vec::new(),
            subsegments: Vec::new(),
            junctions: Vec::new(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn subsegments(&self) -> &[Subsegment] {
        &self.subsegments
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn is_empty(&self) -> bool {
        self.subsegments.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.subsegments.iter().map(|s| s.segment.length()).sum()
    }
}

/// Closest points of two segments as parameters in `[0, 1]`.
fn closest_parameters(p: &Segment, q: &Segment) -> (f64, f64) {
    let d1 = p.b - p.a;
    let d2 = q.b - q.a;
    let r = p.a - q.a;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

/// Splits crossing centrelines into pieces that meet only at endpoints and
/// records every shared point as a junction.
///
/// Two segments intersect when their distance is at most `tol`; parallel
/// segments sharing more than a point are rejected.
pub fn split_at_intersections(segments: &[Segment], tol: f64) -> Result<SegmentNetwork> {
    for s in segments {
        s.validate()?;
    }
    let mut cuts: Vec<Vec<f64>> = segments.iter().map(|_| vec![0.0, 1.0]).collect();
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            let (p, q) = (&segments[i], &segments[j]);
            let cross = p.tangent().cross(&q.tangent()).norm();
            if cross < 1e-12 {
                // parallel: reject overlaps of positive length
                let qa = project(p, &q.a);
                let qb = project(p, &q.b);
                let dist_line = (q.a - p.point_at(qa * p.length())).norm();
                if dist_line <= tol {
                    let (lo, hi) = (qa.min(qb), qa.max(qb));
                    let overlap = (hi.min(1.0) - lo.max(0.0)) * p.length();
                    if overlap > tol {
                        return Err(Error::CollinearOverlap { first: i, second: j });
                    }
                }
            }
            let (s, t) = closest_parameters(p, q);
            let pp = p.a + (p.b - p.a) * s;
            let qq = q.a + (q.b - q.a) * t;
            if (pp - qq).norm() <= tol {
                cuts[i].push(s);
                cuts[j].push(t);
            }
        }
    }
    let mut subsegments = Vec::new();
    for (idx, (seg, params)) in segments.iter().zip(cuts.iter_mut()).enumerate() {
        params.sort_by(f64::total_cmp);
        let length = seg.length();
        let mut kept: Vec<f64> = Vec::with_capacity(params.len());
        for &t in params.iter() {
            match kept.last() {
                Some(&last) if (t - last) * length <= tol => {}
                _ => kept.push(t),
            }
        }
        *kept.last_mut().unwrap() = 1.0;
        if kept.len() < 2 {
            kept = vec![0.0, 1.0];
        }
        let last = kept.len() - 2;
        for (k, w) in kept.windows(2).enumerate() {
            let a = if k == 0 { seg.a } else { seg.a + (seg.b - seg.a) * w[0] };
            let b = if k == last { seg.b } else { seg.a + (seg.b - seg.a) * w[1] };
            let start_bc = if k == 0 { seg.bc[0] } else { EndpointBc::Neumann };
            let end_bc = if k == last { seg.bc[1] } else { EndpointBc::Neumann };
            subsegments.push(Subsegment {
                segment: Segment {
                    a,
                    b,
                    radius: seg.radius,
                    bc: [start_bc, end_bc],
                },
                parent: idx,
                offset: w[0] * length,
            });
        }
    }
    let mut junctions: Vec<Junction> = Vec::new();
    for (k, sub) in subsegments.iter().enumerate() {
        for end in [SegmentEnd::Start, SegmentEnd::End] {
            let p = sub.segment.endpoint(end);
            let inc = Incidence { subsegment: k, end };
            match junctions.iter_mut().find(|j| (j.point - p).norm() <= tol) {
                Some(j) => j.incidences.push(inc),
                None => junctions.push(Junction { point: p, incidences: vec![inc] }),
            }
        }
    }
    junctions.retain(|j| j.incidences.len() >= 2);
    Ok(SegmentNetwork {
        segments: segments.to_vec(),
        subsegments,
        junctions,
    })
}

fn project(seg: &Segment, p: &Point3<f64>) -> f64 {
    let d = seg.b - seg.a;
    (p - seg.a).dot(&d) / d.dot(&d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Continuous piecewise linear; one DOF per node.
    P1,
    /// Piecewise constant; one DOF per element.
    P0,
}

/// An equispaced partition of one subsegment carrying a 1D field.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition1D {
    pub subsegment: usize,
    nodes: Vec<f64>,
    pub kind: BasisKind,
    pub ratio: f64,
}

/// Element count `round(ratio * m)` clamped to at least one, equispaced on
/// `[0, S]`.
pub fn make_partition(subsegment: usize, induced: &InducedPartition, ratio: f64, kind: BasisKind) -> Result<Partition1D> {
    if !(ratio > 0.0) {
        return Err(Error::InvalidDiscretization(format!("mesh ratio must be positive, got {ratio}")));
    }
    let m = induced.n_intervals();
    let elements = ((ratio * m as f64).round() as usize).max(1);
    Ok(Partition1D::uniform(subsegment, induced.length(), elements, kind, ratio))
}

impl Partition1D {
    pub fn uniform(subsegment: usize, length: f64, elements: usize, kind: BasisKind, ratio: f64) -> Self {
        let mut nodes: Vec<f64> = (0..=elements).map(|k| length * k as f64 / elements as f64).collect();
        nodes[elements] = length;
        Self {
            subsegment,
            nodes,
            kind,
            ratio,
        }
    }

    pub fn from_nodes(subsegment: usize, nodes: Vec<f64>, kind: BasisKind) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDiscretization("1D nodes must start at 0 and increase strictly".into()));
        }
        Ok(Self {
            subsegment,
            nodes,
            kind,
            ratio: f64::NAN,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_dofs(&self) -> usize {
        match self.kind {
            BasisKind::P1 => self.nodes.len(),
            BasisKind::P0 => self.n_elements(),
        }
    }

    /// Element containing `s`; interior nodes belong to the element on their
    /// right, the end node to the last element.
    pub fn element_at(&self, s: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= s);
        k.saturating_sub(1).min(self.n_elements() - 1)
    }

    /// Nonzero basis functions at `s` as `(local DOF, value)`.
    pub fn eval_basis_1d(&self, s: f64) -> Result<Vec<(usize, f64)>> {
        let length = self.length();
        if !(0.0..=length).contains(&s) {
            return Err(Error::OutOfRange { s, length });
        }
        let e = self.element_at(s);
        Ok(match self.kind {
            BasisKind::P0 => vec![(e, 1.0)],
            BasisKind::P1 => {
                let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
                let t = (s - x0) / (x1 - x0);
                vec![(e, 1.0 - t), (e + 1, t)]
            }
        })
    }

    /// Values of the basis on element `e` at local coordinate `t` in [0, 1].
    #[inline]
    pub(crate) fn local_basis(&self, e: usize, t: f64) -> ([usize; 2], [f64; 2], usize) {
        match self.kind {
            BasisKind::P0 => ([e, e], [1.0, 0.0], 1),
            BasisKind::P1 => ([e, e + 1], [1.0 - t, t], 2),
        }
    }

    /// Value of a discrete field with DOF values `coeffs` at `s`.
    pub fn interpolate(&self, coeffs: &[f64], s: f64) -> f64 {
        let e = self.element_at(s.clamp(0.0, self.length()));
        match self.kind {
            BasisKind::P0 => coeffs[e],
            BasisKind::P1 => {
                let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
                let t = (s - x0) / (x1 - x0);
                (1.0 - t) * coeffs[e] + t * coeffs[e + 1]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seg(a: [f64; 3], b: [f64; 3]) -> Segment {
        Segment::new(Point3::from(a), Point3::from(b), 0.01)
    }

    #[test]
    fn x_crossing_gives_four_pieces_one_junction() {
        let net = split_at_intersections(&[seg([-1., 0., 0.], [1., 0., 0.]), seg([0., -1., 0.], [0., 1., 0.])], 1e-9).unwrap();
        assert_eq!(net.subsegments().len(), 4);
        assert_eq!(net.junctions().len(), 1);
        assert_eq!(net.junctions()[0].incidences.len(), 4);
        assert_relative_eq!(net.junctions()[0].point, Point3::origin(), epsilon = 1e-15);
    }

    #[test]
    fn disjoint_segments_untouched() {
        let net = split_at_intersections(&[seg([-1., 0., 0.], [1., 0., 0.]), seg([0., -1., 0.5], [0., 1., 0.5])], 1e-9).unwrap();
        assert_eq!(net.subsegments().len(), 2);
        assert!(net.junctions().is_empty());
    }

    #[test]
    fn t_junction_and_shared_endpoint() {
        let net = split_at_intersections(
            &[seg([-1., 0., 0.], [1., 0., 0.]), seg([0., 0., 0.], [0., 1., 0.]), seg([1., 0., 0.], [1., 1., 0.])],
            1e-9,
        )
        .unwrap();
        assert_eq!(net.subsegments().len(), 4);
        let mut counts: Vec<usize> = net.junctions().iter().map(|j| j.incidences.len()).collect();
        counts.sort_unstable();
        assert_eq!(counts, vec![2, 3]);
    }

    #[test]
    fn collinear_overlap_rejected() {
        let err = split_at_intersections(&[seg([0., 0., 0.], [1., 0., 0.]), seg([0.5, 0., 0.], [2., 0., 0.])], 1e-9).unwrap_err();
        assert!(matches!(err, Error::CollinearOverlap { first: 0, second: 1 }));
        // collinear but only touching at an endpoint is a junction
        let net = split_at_intersections(&[seg([0., 0., 0.], [1., 0., 0.]), seg([1., 0., 0.], [2., 0., 0.])], 1e-9).unwrap();
        assert_eq!(net.junctions().len(), 1);
    }

    #[test]
    fn skew_but_close_is_not_an_intersection() {
        let net = split_at_intersections(&[seg([-1., 0., 0.], [1., 0., 0.]), seg([0., -1., 1e-6], [0., 1., 1e-6])], 1e-9).unwrap();
        assert!(net.junctions().is_empty());
    }

    #[test]
    fn endpoint_conditions_follow_pieces() {
        let a = seg([-1., 0., 0.], [1., 0., 0.]).with_bc(EndpointBc::Dirichlet(1.0), EndpointBc::Dirichlet(2.0));
        let net = split_at_intersections(&[a, seg([0., -1., 0.], [0., 1., 0.])], 1e-9).unwrap();
        let first = &net.subsegments()[0];
        assert_eq!(first.segment.bc, [EndpointBc::Dirichlet(1.0), EndpointBc::Neumann]);
        assert_eq!(net.subsegments()[1].segment.bc, [EndpointBc::Neumann, EndpointBc::Dirichlet(2.0)]);
        assert_relative_eq!(net.subsegments()[1].offset, 1.0);
    }

    fn induced(m: usize) -> InducedPartition {
        let mesh = crate::mesh3d::build_box_mesh(2.0, m).unwrap();
        mesh.locate_segment_breakpoints(&Point3::new(0.0, 0.0, -1.0), &Point3::new(0.0, 0.0, 1.0))
            .unwrap()
    }

    #[test]
    fn partition_element_counts() {
        let ind = induced(10);
        assert_eq!(ind.n_intervals(), 10);
        let p = make_partition(0, &ind, 1.0, BasisKind::P1).unwrap();
        assert_eq!((p.n_elements(), p.nodes().len()), (10, 11));
        assert_eq!(make_partition(0, &ind, 0.5, BasisKind::P1).unwrap().n_elements(), 5);
        assert_eq!(make_partition(0, &induced(3), 0.1, BasisKind::P0).unwrap().n_elements(), 1);
        assert!(make_partition(0, &ind, 0.0, BasisKind::P1).is_err());
    }

    #[test]
    fn basis_evaluation() {
        let p1 = Partition1D::from_nodes(0, vec![0.0, 1.0, 2.0], BasisKind::P1).unwrap();
        assert_eq!(p1.eval_basis_1d(0.5).unwrap(), vec![(0, 0.5), (1, 0.5)]);
        let p0 = Partition1D::from_nodes(0, vec![0.0, 1.0, 2.0], BasisKind::P0).unwrap();
        assert_eq!(p0.eval_basis_1d(1.5).unwrap(), vec![(1, 1.0)]);
        assert!(matches!(p1.eval_basis_1d(2.5), Err(Error::OutOfRange { .. })));
        assert_eq!(p0.eval_basis_1d(2.0).unwrap(), vec![(1, 1.0)]);
    }
}
