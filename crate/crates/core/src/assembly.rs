//! Discrete blocks of the coupled problem: bulk stiffness with trace
//! stabilization, line stiffness, trace and line coupling matrices, the
//! functional matrices, junction continuity rows and the load vectors.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{stack_blocks, SparseBlock, TripletBuilder};
use crate::mesh3d::{FaceTag, InducedPartition, TetMesh};
use crate::net1d::{make_partition, BasisKind, EndpointBc, Partition1D, SegmentEnd, SegmentNetwork};
use crate::quadrature::{merge_breakpoints, TetRule, GAUSS2_UNIT};

pub use crate::quadrature::merged_quadrature;

/// A scalar function of position.
pub type ScalarField = Arc<dyn Fn(&Point3<f64>) -> f64 + Send + Sync>;

pub fn constant_field(value: f64) -> ScalarField {
    Arc::new(move |_| value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusivity {
    Scalar(f64),
    Tensor(Matrix3<f64>),
}

impl Diffusivity {
    fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Diffusivity::Scalar(k) => v * *k,
            Diffusivity::Tensor(k) => k * v,
        }
    }

    fn is_positive(&self) -> bool {
        match self {
            Diffusivity::Scalar(k) => *k > 0.0,
            Diffusivity::Tensor(k) => k.symmetric_eigenvalues().iter().all(|&e| e > 0.0),
        }
    }
}

#[derive(Clone)]
pub enum FaceBc {
    Dirichlet(ScalarField),
    /// Homogeneous Neumann.
    Neumann,
}

impl fmt::Debug for FaceBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaceBc::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            FaceBc::Neumann => f.write_str("Neumann"),
        }
    }
}

/// Coefficients, data and boundary conditions of a coupled problem. Line
/// coefficients are indexed by input segment.
#[derive(Clone)]
pub struct ProblemSpec {
    pub diffusivity: Diffusivity,
    pub line_diffusivity: Vec<f64>,
    pub forcing: ScalarField,
    /// Section-averaged line forcing, evaluated on the centreline.
    pub line_forcing: Vec<ScalarField>,
    pub face_bc: [FaceBc; 3],
    pub alpha: f64,
    pub alpha_hat: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("diffusivity", &self.diffusivity)
            .field("line_diffusivity", &self.line_diffusivity)
            .field("face_bc", &self.face_bc)
            .field("alpha", &self.alpha)
            .field("alpha_hat", &self.alpha_hat)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Unit diffusivities, zero data, homogeneous Dirichlet on every face
    /// and unit stabilization for `segments` input segments.
    pub fn new(segments: usize) -> Self {
        Self {
            diffusivity: Diffusivity::Scalar(1.0),
            line_diffusivity: vec![1.0; segments],
            forcing: constant_field(0.0),
            line_forcing: vec![constant_field(0.0); segments],
            face_bc: [
                FaceBc::Dirichlet(constant_field(0.0)),
                FaceBc::Dirichlet(constant_field(0.0)),
                FaceBc::Dirichlet(constant_field(0.0)),
            ],
            alpha: 1.0,
            alpha_hat: 1.0,
        }
    }

    pub fn face(&self, tag: FaceTag) -> &FaceBc {
        &self.face_bc[tag.index()]
    }

    pub fn set_face(&mut self, tag: FaceTag, bc: FaceBc) {
        self.face_bc[tag.index()] = bc;
    }

    pub fn validate(&self, network: &SegmentNetwork) -> Result<()> {
        let n = network.segments().len();
        if self.line_diffusivity.len() != n || self.line_forcing.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} segments but {} line diffusivities and {} line forcings",
                n,
                self.line_diffusivity.len(),
                self.line_forcing.len()
            )));
        }
        if !self.diffusivity.is_positive() || self.line_diffusivity.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidDiscretization("diffusivities must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha_hat >= 0.0) {
            return Err(Error::InvalidDiscretization("stabilization parameters must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Element-count ratios of the line partitions against the induced one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshRatios {
    pub u_hat: f64,
    pub phi: f64,
    pub psi: f64,
}

impl Default for MeshRatios {
    fn default() -> Self {
        Self {
            u_hat: 1.0,
            phi: 0.5,
            psi: 0.5,
        }
    }
}

/// The bulk mesh, the network and all per-subsegment partitions, with the
/// global numbering of the line unknowns (subsegment blocks in order).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TetMesh,
    pub network: SegmentNetwork,
    pub induced: Vec<InducedPartition>,
    pub parts_u: Vec<Partition1D>,
    pub parts_phi: Vec<Partition1D>,
    pub parts_psi: Vec<Partition1D>,
    pub ratios: MeshRatios,
    offsets_u: Vec<usize>,
    offsets_phi: Vec<usize>,
    offsets_psi: Vec<usize>,
}

fn offsets(parts: &[Partition1D]) -> Vec<usize> {
    let mut out = Vec::with_capacity(parts.len() + 1);
    out.push(0);
    for p in parts {
        out.push(out.last().unwrap() + p.n_dofs());
    }
    out
}

impl Discretization {
    pub fn new(mesh: TetMesh, network: SegmentNetwork, ratios: MeshRatios) -> Result<Self> {
        let tol = mesh.geometric_tolerance();
        let mut induced = Vec::new();
        let (mut parts_u, mut parts_phi, mut parts_psi) = (Vec::new(), Vec::new(), Vec::new());
        for (k, sub) in network.subsegments().iter().enumerate() {
            for p in [sub.segment.a, sub.segment.b] {
                if !mesh.in_box(&p, tol) {
                    return Err(Error::SegmentOutsideDomain { point: [p.x, p.y, p.z] });
                }
            }
            let ind = mesh.locate_segment_breakpoints(&sub.segment.a, &sub.segment.b)?;
            parts_u.push(make_partition(k, &ind, ratios.u_hat, BasisKind::P1)?);
            parts_phi.push(make_partition(k, &ind, ratios.phi, BasisKind::P0)?);
            parts_psi.push(make_partition(k, &ind, ratios.psi, BasisKind::P1)?);
            induced.push(ind);
        }
        Ok(Self {
            offsets_u: offsets(&parts_u),
            offsets_phi: offsets(&parts_phi),
            offsets_psi: offsets(&parts_psi),
            mesh,
            network,
            induced,
            parts_u,
            parts_phi,
            parts_psi,
            ratios,
        })
    }

    /// Number of bulk unknowns.
    pub fn n_u(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_u_hat(&self) -> usize {
        *self.offsets_u.last().unwrap()
    }

    pub fn n_phi(&self) -> usize {
        *self.offsets_phi.last().unwrap()
    }

    pub fn n_psi(&self) -> usize {
        *self.offsets_psi.last().unwrap()
    }

    /// First global line DOF of each subsegment (plus the total at the end).
    pub fn offsets_u(&self) -> &[usize] {
        &self.offsets_u
    }

    pub fn offsets_phi(&self) -> &[usize] {
        &self.offsets_phi
    }

    pub fn offsets_psi(&self) -> &[usize] {
        &self.offsets_psi
    }

    /// Global line DOF at one end of a subsegment.
    pub fn end_dof(&self, subsegment: usize, end: SegmentEnd) -> usize {
        match end {
            SegmentEnd::Start => self.offsets_u[subsegment],
            SegmentEnd::End => self.offsets_u[subsegment + 1] - 1,
        }
    }

    /// Sorted union of the induced and line breakpoints of a subsegment.
    pub fn merged_breaks(&self, subsegment: usize) -> Result<Vec<f64>> {
        let tol = self.mesh.geometric_tolerance();
        merge_breakpoints(
            &[
                self.induced[subsegment].breaks(),
                self.parts_u[subsegment].nodes(),
                self.parts_phi[subsegment].nodes(),
                self.parts_psi[subsegment].nodes(),
            ],
            tol,
        )
    }
}

/// Every block of the discrete problem. `q` holds the junction continuity
/// rows acting on the line unknowns.
#[derive(Debug, Clone)]
pub struct CoupledBlocks {
    pub a: SparseBlock,
    pub a_hat: SparseBlock,
    pub q: SparseBlock,
    pub b: SparseBlock,
    pub b_hat: SparseBlock,
    pub c_alpha: SparseBlock,
    pub c_hat_alpha: SparseBlock,
    pub g: SparseBlock,
    pub g_hat: SparseBlock,
    pub g_psi: SparseBlock,
    pub c: SparseBlock,
    pub c_hat: SparseBlock,
    pub f: Vec<f64>,
    pub g_rhs: Vec<f64>,
    pub alpha: f64,
    pub alpha_hat: f64,
}

impl CoupledBlocks {
    pub fn n_u(&self) -> usize {
        self.a.rows()
    }

    pub fn n_u_hat(&self) -> usize {
        self.a_hat.rows()
    }

    pub fn n_q(&self) -> usize {
        self.q.rows()
    }

    pub fn n_phi(&self) -> usize {
        self.b.cols()
    }

    pub fn n_psi(&self) -> usize {
        self.c.cols()
    }

    /// Size of the state `W = (U, Û, Q multipliers)`.
    pub fn n_state(&self) -> usize {
        self.n_u() + self.n_u_hat() + self.n_q()
    }

    /// The line operator bordered by the junction rows.
    pub fn a_hat_star(&self) -> SparseBlock {
        let (nh, nq) = (self.n_u_hat(), self.n_q());
        let qt = self.q.transpose();
        stack_blocks(nh + nq, nh + nq, &[(0, 0, &self.a_hat), (0, nh, &qt), (nh, 0, &self.q)])
    }

    /// State operator `diag(A, Â★)`.
    pub fn state_operator(&self) -> SparseBlock {
        let n = self.n_u();
        let star = self.a_hat_star();
        let m = self.n_state();
        stack_blocks(m, m, &[(0, 0, &self.a), (n, n, &star)])
    }

    /// Flux control operator `[B; -B̂; 0]`.
    pub fn flux_operator(&self) -> SparseBlock {
        let neg = self.b_hat.scaled(-1.0);
        stack_blocks(self.n_state(), self.n_phi(), &[(0, 0, &self.b), (self.n_u(), 0, &neg)])
    }

    /// Pressure control operator `[Cᵅ; Ĉᵅ; 0]`.
    pub fn pressure_operator(&self) -> SparseBlock {
        stack_blocks(self.n_state(), self.n_psi(), &[(0, 0, &self.c_alpha), (self.n_u(), 0, &self.c_hat_alpha)])
    }

    /// Functional cross term `[C; Ĉ; 0]`.
    pub fn mismatch_operator(&self) -> SparseBlock {
        stack_blocks(self.n_state(), self.n_psi(), &[(0, 0, &self.c), (self.n_u(), 0, &self.c_hat)])
    }

    /// Functional state term `diag(G, Ĝ, 0)`.
    pub fn functional_state(&self) -> SparseBlock {
        let m = self.n_state();
        stack_blocks(m, m, &[(0, 0, &self.g), (self.n_u(), self.n_u(), &self.g_hat)])
    }

    pub fn state_rhs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_state());
        out.extend_from_slice(&self.f);
        out.extend_from_slice(&self.g_rhs);
        out.resize(self.n_state(), 0.0);
        out
    }

    /// `J̃ = ½ ||U|_Λ - Ψ||² + ½ ||Û - Ψ||²` in matrix form.
    pub fn functional(&self, u: &[f64], u_hat: &[f64], psi: &[f64]) -> f64 {
        let quad = |m: &SparseBlock, x: &[f64]| crate::linalg::dot(x, &m.mul_vec(x));
        let cross = crate::linalg::dot(u, &self.c.mul_vec(psi)) + crate::linalg::dot(u_hat, &self.c_hat.mul_vec(psi));
        0.5 * (quad(&self.g, u) + quad(&self.g_hat, u_hat) + 2.0 * quad(&self.g_psi, psi)) - cross
    }
}

/// Bulk stiffness `∫ K∇φ_k·∇φ_l` plus the trace mass `α Σ ∫ |Γ| φ_k φ_l`.
pub fn assemble_a(disc: &Discretization, spec: &ProblemSpec) -> Result<SparseBlock> {
    let mesh = &disc.mesh;
    let n = mesh.n_vertices();
    let mut tb = TripletBuilder::with_capacity(n, n, 16 * mesh.n_tets());
    for (t, tet) in mesh.tets().iter().enumerate() {
        let grads = mesh.tet_p1_gradients(t)?;
        let vol = mesh.tet_volume(t);
        for i in 0..4 {
            let kg = spec.diffusivity.apply(&grads[i]);
            for j in 0..4 {
                tb.add(tet[i], tet[j], vol * kg.dot(&grads[j]));
            }
        }
    }
    if spec.alpha != 0.0 {
        for (k, sub) in disc.network.subsegments().iter().enumerate() {
            let weight = spec.alpha * sub.segment.perimeter();
            for_each_trace_point(disc, k, |w, tet, lambda| {
                for i in 0..4 {
                    for j in 0..4 {
                        tb.add(tet[i], tet[j], weight * w * lambda[i] * lambda[j]);
                    }
                }
            })?;
        }
    }
    Ok(tb.build())
}

/// Visits the two Gauss points of every induced interval of a subsegment
/// with the owning tet and the barycentric coordinates there.
fn for_each_trace_point<F>(disc: &Discretization, subsegment: usize, mut visit: F) -> Result<()>
where
    F: FnMut(f64, &[usize; 4], [f64; 4]),
{
    let seg = &disc.network.subsegments()[subsegment].segment;
    let induced = &disc.induced[subsegment];
    for (w, &t) in induced.breaks().windows(2).zip(induced.tets()) {
        let len = w[1] - w[0];
        for &g in &GAUSS2_UNIT {
            let s = w[0] + g * len;
            let lambda = disc.mesh.barycentric(t, &seg.point_at(s))?;
            visit(0.5 * len, &disc.mesh.tets()[t], lambda);
        }
    }
    Ok(())
}

/// Line stiffness `∫ K̃|Σ| φ̂'φ̂'` plus `α̂ ∫ |Γ| φ̂φ̂`, block diagonal over
/// subsegments, and the junction rows `Q`.
pub fn assemble_a_hat(disc: &Discretization, spec: &ProblemSpec) -> Result<(SparseBlock, SparseBlock)> {
    let n = disc.n_u_hat();
    let mut tb = TripletBuilder::new(n, n);
    for (k, sub) in disc.network.subsegments().iter().enumerate() {
        let part = &disc.parts_u[k];
        let off = disc.offsets_u()[k];
        let stiff = spec.line_diffusivity[sub.parent] * sub.segment.area();
        let mass = spec.alpha_hat * sub.segment.perimeter();
        for (e, w) in part.nodes().windows(2).enumerate() {
            let h = w[1] - w[0];
            let (i, j) = (off + e, off + e + 1);
            let kd = stiff / h;
            let (md, mo) = (mass * h / 3.0, mass * h / 6.0);
            tb.add(i, i, kd + md);
            tb.add(j, j, kd + md);
            tb.add(i, j, -kd + mo);
            tb.add(j, i, -kd + mo);
        }
    }
    let q = junction_rows(disc, &line_dirichlet(disc)?)?;
    Ok((tb.build(), q))
}

/// Dirichlet values of line DOFs from the endpoint conditions, propagated
/// through junctions to every coincident DOF.
fn line_dirichlet(disc: &Discretization) -> Result<Vec<Option<f64>>> {
    let mut fixed = vec![None; disc.n_u_hat()];
    let set = |fixed: &mut Vec<Option<f64>>, dof: usize, v: f64| -> Result<()> {
        match fixed[dof] {
            Some(old) if (old - v).abs() > 1e-12 * old.abs().max(v.abs()).max(1.0) => Err(Error::ConflictingBoundary {
                dof,
                first: old,
                second: v,
            }),
            _ => {
                fixed[dof] = Some(v);
                Ok(())
            }
        }
    };
    for (k, sub) in disc.network.subsegments().iter().enumerate() {
        for end in [SegmentEnd::Start, SegmentEnd::End] {
            if let EndpointBc::Dirichlet(v) = sub.segment.endpoint_bc(end) {
                set(&mut fixed, disc.end_dof(k, end), v)?;
            }
        }
    }
    for j in disc.network.junctions() {
        let dofs: Vec<usize> = j.incidences.iter().map(|inc| disc.end_dof(inc.subsegment, inc.end)).collect();
        if let Some(v) = dofs.iter().find_map(|&d| fixed[d]) {
            for &d in &dofs {
                set(&mut fixed, d, v)?;
            }
        }
    }
    Ok(fixed)
}

/// One row `e_lowest - e_other` per extra coincident DOF at every junction
/// whose DOFs are not prescribed.
fn junction_rows(disc: &Discretization, fixed: &[Option<f64>]) -> Result<SparseBlock> {
    let mut rows = Vec::new();
    for j in disc.network.junctions() {
        let mut dofs = Vec::with_capacity(j.incidences.len());
        for inc in &j.incidences {
            if inc.subsegment >= disc.parts_u.len() {
                return Err(Error::MissingJunctionDof { subsegment: inc.subsegment });
            }
            dofs.push(disc.end_dof(inc.subsegment, inc.end));
        }
        dofs.sort_unstable();
        dofs.dedup();
        if dofs.iter().any(|&d| fixed[d].is_some()) {
            continue;
        }
        for &d in &dofs[1..] {
            rows.push((dofs[0], d));
        }
    }
    let mut t = Vec::with_capacity(2 * rows.len());
    for (r, &(lo, other)) in rows.iter().enumerate() {
        t.push((r, lo, 1.0));
        t.push((r, other, -1.0));
    }
    Ok(SparseBlock::from_triplets(rows.len(), disc.n_u_hat(), t))
}

/// Coupling and functional blocks, integrated on the merged partitions.
#[derive(Debug, Clone)]
pub struct CouplingBlocks {
    pub b: SparseBlock,
    pub b_hat: SparseBlock,
    pub c_alpha: SparseBlock,
    pub c_hat_alpha: SparseBlock,
    pub c: SparseBlock,
    pub c_hat: SparseBlock,
    pub g: SparseBlock,
    pub g_hat: SparseBlock,
    pub g_psi: SparseBlock,
}

/// One Gauss point of a merged interval with all basis values there.
struct LinePoint {
    weight: f64,
    tet: [usize; 4],
    lambda: [f64; 4],
    u: ([usize; 2], [f64; 2]),
    phi: usize,
    psi: ([usize; 2], [f64; 2]),
}

fn for_each_line_point<F>(disc: &Discretization, k: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&LinePoint),
{
    let seg = &disc.network.subsegments()[k].segment;
    let induced = &disc.induced[k];
    let (pu, pf, pp) = (&disc.parts_u[k], &disc.parts_phi[k], &disc.parts_psi[k]);
    let (ou, of, op) = (disc.offsets_u()[k], disc.offsets_phi()[k], disc.offsets_psi()[k]);
    let local = |part: &Partition1D, off: usize, e: usize, s: f64| {
        let (x0, x1) = (part.nodes()[e], part.nodes()[e + 1]);
        let (idx, val, _) = part.local_basis(e, (s - x0) / (x1 - x0));
        ([off + idx[0], off + idx[1]], val)
    };
    for w in disc.merged_breaks(k)?.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let len = s1 - s0;
        let mid = 0.5 * (s0 + s1);
        let t = induced.tets()[induced.interval_at(mid)];
        let (eu, ef, ep) = (pu.element_at(mid), pf.element_at(mid), pp.element_at(mid));
        for &g in &GAUSS2_UNIT {
            let s = s0 + g * len;
            visit(&LinePoint {
                weight: 0.5 * len,
                tet: disc.mesh.tets()[t],
                lambda: disc.mesh.barycentric(t, &seg.point_at(s))?,
                u: local(pu, ou, eu, s),
                phi: of + ef,
                psi: local(pp, op, ep, s),
            });
        }
    }
    Ok(())
}

pub fn assemble_coupling(disc: &Discretization, spec: &ProblemSpec) -> Result<CouplingBlocks> {
    let (n, nh, nf, np) = (disc.n_u(), disc.n_u_hat(), disc.n_phi(), disc.n_psi());
    let mut b = TripletBuilder::new(n, nf);
    let mut b_hat = TripletBuilder::new(nh, nf);
    let mut c_alpha = TripletBuilder::new(n, np);
    let mut c_hat_alpha = TripletBuilder::new(nh, np);
    let mut c = TripletBuilder::new(n, np);
    let mut c_hat = TripletBuilder::new(nh, np);
    let mut g = TripletBuilder::new(n, n);
    let mut g_hat = TripletBuilder::new(nh, nh);
    let mut g_psi = TripletBuilder::new(np, np);
    for (k, sub) in disc.network.subsegments().iter().enumerate() {
        let perim = sub.segment.perimeter();
        for_each_line_point(disc, k, |p| {
            let w = p.weight;
            for i in 0..4 {
                let (row, li) = (p.tet[i], p.lambda[i]);
                b.add(row, p.phi, perim * w * li);
                for j in 0..2 {
                    let (col, eta) = (p.psi.0[j], p.psi.1[j]);
                    c_alpha.add(row, col, spec.alpha * perim * w * li * eta);
                    c.add(row, col, w * li * eta);
                }
                for j in 0..4 {
                    g.add(row, p.tet[j], w * li * p.lambda[j]);
                }
            }
            for i in 0..2 {
                let (row, ui) = (p.u.0[i], p.u.1[i]);
                b_hat.add(row, p.phi, perim * w * ui);
                for j in 0..2 {
                    let (col, eta) = (p.psi.0[j], p.psi.1[j]);
                    c_hat_alpha.add(row, col, spec.alpha_hat * perim * w * ui * eta);
                    c_hat.add(row, col, w * ui * eta);
                    g_hat.add(row, p.u.0[j], w * ui * p.u.1[j]);
                    g_psi.add(p.psi.0[i], col, w * p.psi.1[i] * eta);
                }
            }
        })?;
    }
    Ok(CouplingBlocks {
        b: b.build(),
        b_hat: b_hat.build(),
        c_alpha: c_alpha.build(),
        c_hat_alpha: c_hat_alpha.build(),
        c: c.build(),
        c_hat: c_hat.build(),
        g: g.build(),
        g_hat: g_hat.build(),
        g_psi: g_psi.build(),
    })
}

/// Bulk load `∫ f φ_k` (four-point rule) and line load `∫ |Σ| ḡ̄ φ̂_k`.
pub fn assemble_rhs(disc: &Discretization, spec: &ProblemSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = &disc.mesh;
    let rule = TetRule::order2();
    let mut f = vec![0.0; mesh.n_vertices()];
    for (t, tet) in mesh.tets().iter().enumerate() {
        let pts = mesh.tet_points(t);
        let vol = mesh.tet_volume(t);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = Point3::from(pts.iter().zip(bary).fold(Vector3::zeros(), |acc, (p, l)| acc + p.coords * *l));
            let fx = (spec.forcing)(&x);
            for i in 0..4 {
                f[tet[i]] += vol * w * fx * bary[i];
            }
        }
    }
    let mut g = vec![0.0; disc.n_u_hat()];
    for (k, sub) in disc.network.subsegments().iter().enumerate() {
        let part = &disc.parts_u[k];
        let off = disc.offsets_u()[k];
        let area = sub.segment.area();
        let field = &spec.line_forcing[sub.parent];
        for (e, w) in part.nodes().windows(2).enumerate() {
            let len = w[1] - w[0];
            for &gp in &GAUSS2_UNIT {
                let s = w[0] + gp * len;
                let val = 0.5 * len * area * field(&sub.segment.point_at(s));
                g[off + e] += val * (1.0 - gp);
                g[off + e + 1] += val * gp;
            }
        }
    }
    Ok((f, g))
}

/// Assembles every block of the coupled problem.
pub fn assemble(disc: &Discretization, spec: &ProblemSpec) -> Result<CoupledBlocks> {
    spec.validate(&disc.network)?;
    let a = assemble_a(disc, spec)?;
    let (a_hat, q) = assemble_a_hat(disc, spec)?;
    let cp = assemble_coupling(disc, spec)?;
    let (f, g_rhs) = assemble_rhs(disc, spec)?;
    Ok(CoupledBlocks {
        a,
        a_hat,
        q,
        b: cp.b,
        b_hat: cp.b_hat,
        c_alpha: cp.c_alpha,
        c_hat_alpha: cp.c_hat_alpha,
        g: cp.g,
        g_hat: cp.g_hat,
        g_psi: cp.g_psi,
        c: cp.c,
        c_hat: cp.c_hat,
        f,
        g_rhs,
        alpha: spec.alpha,
        alpha_hat: spec.alpha_hat,
    })
}

/// Prescribed values over the state `W = (U, Û, Q multipliers)`.
pub fn dirichlet_values(disc: &Discretization, spec: &ProblemSpec) -> Result<Vec<Option<f64>>> {
    let mesh = &disc.mesh;
    let n = mesh.n_vertices();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for tag in FaceTag::ALL {
        if let FaceBc::Dirichlet(field) = spec.face(tag) {
            for v in mesh.vertices_with_tag(tag) {
                let val = field(&mesh.vertices()[v]);
                match fixed[v] {
                    Some(old) if (old - val).abs() > 1e-12 * old.abs().max(val.abs()).max(1.0) => {
                        return Err(Error::ConflictingBoundary { dof: v, first: old, second: val });
                    }
                    _ => fixed[v] = Some(val),
                }
            }
        }
    }
    let line = line_dirichlet(disc)?;
    fixed.extend(line);
    let n_q = junction_rows(disc, &fixed[n..])?.rows();
    fixed.resize(fixed.len() + n_q, None);
    Ok(fixed)
}

/// The problem restricted to the free state DOFs. The prescribed part of the
/// state is lifted into the right-hand side and into the linear and
/// constant terms of the functional:
/// `J = ½ WᵀGW + c_wᵀW - WᵀCΨ + ΨᵀG_ψΨ + c_ψᵀΨ + q0` subject to
/// `A W - B Φ - Cᵅ Ψ = F`.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub state_op: SparseBlock,
    pub a_free: SparseBlock,
    pub a_hat_star_free: SparseBlock,
    pub flux_op: SparseBlock,
    pub pressure_op: SparseBlock,
    pub mismatch_op: SparseBlock,
    pub functional_state: SparseBlock,
    pub g_psi: SparseBlock,
    pub rhs: Vec<f64>,
    pub lin_state: Vec<f64>,
    pub lin_psi: Vec<f64>,
    pub constant: f64,
    /// Free state indices, bulk ones first.
    pub free: Vec<usize>,
    /// Number of free bulk DOFs (leading entries of `free`).
    pub n_free_u: usize,
    pub prescribed: Vec<Option<f64>>,
    pub n_u: usize,
    pub n_u_hat: usize,
}

impl ConstrainedSystem {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_phi(&self) -> usize {
        self.flux_op.cols()
    }

    pub fn n_psi(&self) -> usize {
        self.g_psi.rows()
    }

    /// Full state from its free part.
    pub fn expand(&self, w_free: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = self.prescribed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (&i, &v) in self.free.iter().zip(w_free) {
            w[i] = v;
        }
        w
    }

    /// Functional value at a free state and pressure control.
    pub fn functional(&self, w_free: &[f64], psi: &[f64]) -> f64 {
        use crate::linalg::dot;
        0.5 * dot(w_free, &self.functional_state.mul_vec(w_free)) + dot(&self.lin_state, w_free)
            - dot(w_free, &self.mismatch_op.mul_vec(psi))
            + dot(psi, &self.g_psi.mul_vec(psi))
            + dot(&self.lin_psi, psi)
            + self.constant
    }
}

/// Eliminates prescribed state DOFs symmetrically.
pub fn apply_dirichlet(blocks: &CoupledBlocks, prescribed: &[Option<f64>]) -> Result<ConstrainedSystem> {
    let m = blocks.n_state();
    if prescribed.len() != m {
        return Err(Error::DimensionMismatch(format!("{} prescribed flags for a state of size {m}", prescribed.len())));
    }
    let n = blocks.n_u();
    let free: Vec<usize> = (0..m).filter(|&i| prescribed[i].is_none()).collect();
    let fixed: Vec<usize> = (0..m).filter(|&i| prescribed[i].is_some()).collect();
    let wd: Vec<f64> = fixed.iter().map(|&i| prescribed[i].unwrap()).collect();
    let n_free_u = free.partition_point(|&i| i < n);
    let all_phi: Vec<usize> = (0..blocks.n_phi()).collect();
    let all_psi: Vec<usize> = (0..blocks.n_psi()).collect();

    let state = blocks.state_operator();
    let gs = blocks.functional_state();
    let mism = blocks.mismatch_operator();
    let state_op = state.select(&free, &free);
    let mut rhs: Vec<f64> = {
        let full = blocks.state_rhs();
        free.iter().map(|&i| full[i]).collect()
    };
    state.select(&free, &fixed).mul_vec_add(-1.0, &wd, &mut rhs);
    let lin_state = gs.select(&free, &fixed).mul_vec(&wd);
    let mism_fixed = mism.select(&fixed, &all_psi);
    let lin_psi: Vec<f64> = mism_fixed.tr_mul_vec(&wd).into_iter().map(|v| -v).collect();
    let constant = 0.5 * crate::linalg::dot(&wd, &gs.select(&fixed, &fixed).mul_vec(&wd));

    let free_u: Vec<usize> = free[..n_free_u].to_vec();
    let free_line: Vec<usize> = free[n_free_u..].iter().map(|&i| i - n).collect();
    Ok(ConstrainedSystem {
        a_free: blocks.a.select(&free_u, &free_u),
        a_hat_star_free: blocks.a_hat_star().select(&free_line, &free_line),
        flux_op: blocks.flux_operator().select(&free, &all_phi),
        pressure_op: blocks.pressure_operator().select(&free, &all_psi),
        mismatch_op: mism.select(&free, &all_psi),
        functional_state: gs.select(&free, &free),
        g_psi: blocks.g_psi.clone(),
        state_op,
        rhs,
        lin_state,
        lin_psi,
        constant,
        free,
        n_free_u,
        prescribed: prescribed.to_vec(),
        n_u: n,
        n_u_hat: blocks.n_u_hat(),
    })
}
