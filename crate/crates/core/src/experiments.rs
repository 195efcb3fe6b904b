//! End-to-end solves and the standard test problems: a manufactured
//! single-inclusion problem with known solution, a forced single inclusion
//! with varying line diffusivity, and a network of intersecting inclusions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::assembly::{
    apply_dirichlet, assemble, constant_field, dirichlet_values, ConstrainedSystem, CoupledBlocks, Diffusivity, Discretization, FaceBc,
    MeshRatios, ProblemSpec,
};
use crate::error::{Error, Result};
use crate::mesh3d::{build_box_mesh, FaceTag};
use crate::net1d::{split_at_intersections, EndpointBc, Segment, SegmentNetwork};
use crate::postproc::{continuity_indicator, error_norms_1d, error_norms_3d, ExactField, ExactLineField};
use crate::solver::{build_kkt, estimate_condition, solve_kkt_direct, solve_reduced, MinimizeOptions, ReducedMethod, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    Kkt,
    ReducedCg,
    ReducedSd,
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverChoice::Kkt => "kkt",
            SolverChoice::ReducedCg => "reduced-cg",
            SolverChoice::ReducedSd => "reduced-sd",
        })
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kkt" => Ok(SolverChoice::Kkt),
            "reduced-cg" => Ok(SolverChoice::ReducedCg),
            "reduced-sd" => Ok(SolverChoice::ReducedSd),
            other => Err(Error::InvalidDiscretization(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub solver: SolverChoice,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solver: SolverChoice::Kkt,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn with_solver(solver: SolverChoice) -> Self {
        Self { solver, ..Self::default() }
    }
}

/// Everything produced by one end-to-end solve.
#[derive(Debug, Clone)]
pub struct Solved {
    pub disc: Discretization,
    pub blocks: CoupledBlocks,
    pub system: ConstrainedSystem,
    pub result: SolveResult,
}

/// Assembles, eliminates boundary data and solves with the chosen method.
pub fn prepare(disc: &Discretization, spec: &ProblemSpec) -> Result<(CoupledBlocks, ConstrainedSystem)> {
    let blocks = assemble(disc, spec)?;
    let prescribed = dirichlet_values(disc, spec)?;
    let system = apply_dirichlet(&blocks, &prescribed)?;
    Ok((blocks, system))
}

pub fn solve_system(system: &ConstrainedSystem, blocks: &CoupledBlocks, options: &SolveOptions) -> Result<SolveResult> {
    let method = match options.solver {
        SolverChoice::Kkt => return solve_kkt_direct(system, Some(blocks)),
        SolverChoice::ReducedCg => ReducedMethod::ConjugateGradient,
        SolverChoice::ReducedSd => ReducedMethod::SteepestDescent,
    };
    if blocks.alpha == 0.0 && blocks.alpha_hat == 0.0 {
        log::warn!("reduced solve without stabilization: the subdomain operators may be singular");
    }
    let opts = MinimizeOptions {
        method,
        tol: options.tol,
        max_iter: options.max_iter,
    };
    solve_reduced(system, Some(blocks), &opts)
}

pub fn solve_problem(disc: Discretization, spec: &ProblemSpec, options: &SolveOptions) -> Result<Solved> {
    let (blocks, system) = prepare(&disc, spec)?;
    let result = solve_system(&system, &blocks, options)?;
    Ok(Solved {
        disc,
        blocks,
        system,
        result,
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_slope(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Single vertical inclusion on the axis of a cube whose exact bulk
/// solution is radial and whose line solution is the constant `k1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tp1 {
    pub edge: f64,
    pub radius: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for Tp1 {
    fn default() -> Self {
        Self {
            edge: 2.0,
            radius: 0.01,
            k1: 0.5,
            k2: 5.0,
        }
    }
}

impl Tp1 {
    /// Radius of the cylinder circumscribing the cube.
    pub fn outer_radius(&self) -> f64 {
        self.edge * std::f64::consts::SQRT_2 / 2.0
    }

    /// `(a, b, c)` of `u = a r² + b r + c`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        let d = (self.outer_radius() - self.radius).powi(2);
        let jump = self.k2 - self.k1;
        (jump / d, -2.0 * self.radius * jump / d, self.k1 + jump * self.radius * self.radius / d)
    }

    pub fn exact(&self) -> ExactField {
        let (a, b, c) = self.coefficients();
        ExactField {
            value: Arc::new(move |p| {
                let r = p.x.hypot(p.y);
                a * r * r + b * r + c
            }),
            gradient: Arc::new(move |p| {
                let r = p.x.hypot(p.y);
                let radial = if r > 0.0 { 2.0 * a + b / r } else { 0.0 };
                Vector3::new(radial * p.x, radial * p.y, 0.0)
            }),
        }
    }

    pub fn exact_line(&self) -> ExactLineField {
        ExactLineField::constant(self.k1)
    }

    pub fn segment(&self) -> Segment {
        let h = 0.5 * self.edge;
        Segment::new(Point3::new(0.0, 0.0, -h), Point3::new(0.0, 0.0, h), self.radius)
            .with_bc(EndpointBc::Dirichlet(self.k1), EndpointBc::Dirichlet(self.k1))
    }

    pub fn network(&self) -> Result<SegmentNetwork> {
        split_at_intersections(&[self.segment()], 1e-9 * self.edge)
    }

    pub fn spec(&self) -> ProblemSpec {
        let (a, b, _) = self.coefficients();
        let exact = self.exact();
        let mut spec = ProblemSpec::new(1);
        spec.forcing = Arc::new(move |p| {
            let r = p.x.hypot(p.y);
            -b / r - 4.0 * a
        });
        spec.set_face(FaceTag::Lateral, FaceBc::Dirichlet(exact.value.clone()));
        spec.set_face(FaceTag::Top, FaceBc::Neumann);
        spec.set_face(FaceTag::Bottom, FaceBc::Neumann);
        spec
    }

    pub fn discretize(&self, n: usize, ratios: MeshRatios) -> Result<Discretization> {
        Discretization::new(build_box_mesh(self.edge, n)?, self.network()?, ratios)
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub n_u: usize,
    pub n_u_hat: usize,
    pub e_l2: f64,
    pub e_h1: f64,
    pub line_l2: f64,
    pub line_h1: f64,
    pub functional: f64,
    pub indicator: f64,
}

pub fn tp1_row(tp1: &Tp1, n: usize, ratios: MeshRatios, options: &SolveOptions) -> Result<(ConvergenceRow, Solved)> {
    let solved = solve_problem(tp1.discretize(n, ratios)?, &tp1.spec(), options)?;
    let r = &solved.result;
    let (e_l2, e_h1) = error_norms_3d(&solved.disc.mesh, &r.u, &tp1.exact())?;
    let (line_l2, line_h1) = error_norms_1d(&solved.disc, &r.u_hat, &tp1.exact_line())?;
    let row = ConvergenceRow {
        n,
        h: solved.disc.mesh.h(),
        n_u: solved.disc.n_u(),
        n_u_hat: solved.disc.n_u_hat(),
        e_l2,
        e_h1,
        line_l2,
        line_h1,
        functional: r.functional,
        indicator: continuity_indicator(&solved.disc, &r.u, &r.u_hat)?,
    };
    log::info!("TP1 n={n}: E_L2={e_l2:.3e} E_H1={e_h1:.3e} line L2={line_l2:.3e} J={:.3e}", r.functional);
    Ok((row, solved))
}

pub fn run_tp1(tp1: &Tp1, ns: &[usize], ratios: MeshRatios, options: &SolveOptions) -> Result<Vec<ConvergenceRow>> {
    ns.iter().map(|&n| tp1_row(tp1, n, ratios, options).map(|(row, _)| row)).collect()
}

/// One point of a conditioning sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningRow {
    pub u_hat: f64,
    pub phi: f64,
    pub psi: f64,
    pub condition: f64,
}

/// Condition number of the saddle-point matrix of the manufactured problem
/// for every combination of the given ratios.
pub fn conditioning_sweep(tp1: &Tp1, n: usize, u_hat: &[f64], phi: &[f64], psi: &[f64], cap: usize) -> Result<Vec<ConditioningRow>> {
    let mesh = build_box_mesh(tp1.edge, n)?;
    let network = tp1.network()?;
    let spec = tp1.spec();
    let mut rows = Vec::new();
    for &du in u_hat {
        for &dp in phi {
            for &ds in psi {
                let ratios = MeshRatios { u_hat: du, phi: dp, psi: ds };
                let disc = Discretization::new(mesh.clone(), network.clone(), ratios)?;
                let (_, system) = prepare(&disc, &spec)?;
                let condition = estimate_condition(&build_kkt(&system).matrix, cap)?;
                log::info!("cond(δ̂u={du}, δφ={dp}, δψ={ds}) = {condition:.4e}");
                rows.push(ConditioningRow {
                    u_hat: du,
                    phi: dp,
                    psi: ds,
                    condition,
                });
            }
        }
    }
    Ok(rows)
}

/// Single axial inclusion with unit bulk forcing, Dirichlet zero on the top
/// and bottom faces and at the inclusion ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tp2 {
    pub edge: f64,
    pub radius: f64,
}

impl Default for Tp2 {
    fn default() -> Self {
        Self { edge: 2.0, radius: 0.01 }
    }
}

/// Property report of one line diffusivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Tp2Profile {
    pub line_diffusivity: f64,
    /// `(s, Û(s))` at the line nodes.
    pub profile: Vec<(f64, f64)>,
    pub min_u: f64,
    /// `max |Û(s) - Û(S - s)| / max |Û|`.
    pub symmetry_defect: f64,
    pub midpoint: f64,
}

impl Tp2 {
    pub fn segment(&self) -> Segment {
        let h = 0.5 * self.edge;
        Segment::new(Point3::new(0.0, 0.0, -h), Point3::new(0.0, 0.0, h), self.radius)
            .with_bc(EndpointBc::Dirichlet(0.0), EndpointBc::Dirichlet(0.0))
    }

    pub fn spec(&self, line_diffusivity: f64) -> ProblemSpec {
        let mut spec = ProblemSpec::new(1);
        spec.diffusivity = Diffusivity::Scalar(1.0);
        spec.line_diffusivity = vec![line_diffusivity];
        spec.forcing = constant_field(1.0);
        spec.set_face(FaceTag::Lateral, FaceBc::Neumann);
        spec
    }

    pub fn solve(&self, n: usize, line_diffusivity: f64, ratios: MeshRatios, options: &SolveOptions) -> Result<(Tp2Profile, Solved)> {
        let network = split_at_intersections(&[self.segment()], 1e-9 * self.edge)?;
        let disc = Discretization::new(build_box_mesh(self.edge, n)?, network, ratios)?;
        let solved = solve_problem(disc, &self.spec(line_diffusivity), options)?;
        let nodes = solved.disc.parts_u[0].nodes();
        let values = &solved.result.u_hat;
        let profile: Vec<(f64, f64)> = nodes.iter().copied().zip(values.iter().copied()).collect();
        let vmax = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let len = solved.disc.parts_u[0].length();
        let part = &solved.disc.parts_u[0];
        let symmetry_defect = nodes
            .iter()
            .map(|&s| (part.interpolate(values, s) - part.interpolate(values, len - s)).abs())
            .fold(0.0, f64::max)
            / vmax;
        let report = Tp2Profile {
            line_diffusivity,
            min_u: solved.result.u.iter().copied().fold(f64::INFINITY, f64::min),
            symmetry_defect,
            midpoint: part.interpolate(values, 0.5 * len),
            profile,
        };
        Ok((report, solved))
    }
}

/// The bundled network of intersecting inclusions: 19 segments meeting in
/// 9 junctions, with dead ends on the top and bottom faces held at zero and
/// interior dead ends left free.
pub fn mi_segments() -> Vec<Segment> {
    // offsets keep vertices off the planes of the structured box meshes
    let p = |x: f64, y: f64, z: f64| Point3::new(x + 0.0123, y - 0.0071, if z.abs() == 1.0 { z } else { z + 0.0047 });
    let j = [
        p(0.02, -0.03, -0.55),
        p(-0.4, 0.3, -0.2),
        p(0.45, -0.25, -0.15),
        p(-0.6, 0.55, 0.25),
        p(-0.15, 0.05, 0.3),
        p(0.7, -0.1, 0.3),
        p(0.2, -0.55, 0.25),
        p(0.1, 0.4, 0.65),
        p(0.35, -0.35, 0.65),
    ];
    let boundary = [
        p(0.1, 0.05, -1.0),
        p(0.3, -0.7, -1.0),
        p(-0.7, 0.62, 1.0),
        p(0.75, 0.05, 1.0),
        p(0.05, 0.5, 1.0),
        p(0.4, -0.3, 1.0),
    ];
    let interior = [p(-0.85, 0.2, 0.5), p(-0.3, -0.5, 0.45), p(0.8, -0.7, 0.1), p(0.45, 0.6, 0.7), p(0.6, -0.6, 0.8)];
    let r = 0.01;
    let inner = |a: usize, b: usize| Segment::new(j[a], j[b], r);
    let to_face = |a: usize, f: usize| Segment::new(j[a], boundary[f], r).with_bc(EndpointBc::Neumann, EndpointBc::Dirichlet(0.0));
    let to_end = |a: usize, e: usize| Segment::new(j[a], interior[e], r);
    vec![
        Segment::new(boundary[0], j[0], r).with_bc(EndpointBc::Dirichlet(0.0), EndpointBc::Neumann),
        inner(0, 1),
        inner(0, 2),
        inner(1, 3),
        inner(1, 4),
        inner(2, 5),
        inner(2, 6),
        to_face(3, 2),
        to_end(3, 0),
        inner(4, 7),
        to_end(4, 1),
        to_face(5, 3),
        to_end(5, 2),
        inner(6, 8),
        to_face(6, 1),
        to_face(7, 4),
        to_end(7, 3),
        to_face(8, 5),
        to_end(8, 4),
    ]
}

/// Physical data of the network problem: no bulk forcing, line diffusivity
/// 100, line forcing 3.14e-2, zero Dirichlet data on every face.
pub fn mi_spec(segments: usize) -> ProblemSpec {
    let mut spec = ProblemSpec::new(segments);
    spec.line_diffusivity = vec![100.0; segments];
    spec.line_forcing = vec![constant_field(3.14e-2); segments];
    spec
}

/// Result of one network solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiPoint {
    pub n: usize,
    pub h: f64,
    pub ratios: MeshRatios,
    pub indicator: f64,
    pub functional: f64,
}

pub fn run_mi_point(
    segments: &[Segment],
    spec: &ProblemSpec,
    edge: f64,
    n: usize,
    ratios: MeshRatios,
    options: &SolveOptions,
) -> Result<(MiPoint, Solved)> {
    let network = split_at_intersections(segments, 1e-9 * edge)?;
    let disc = Discretization::new(build_box_mesh(edge, n)?, network, ratios)?;
    let solved = solve_problem(disc, spec, options)?;
    let indicator = continuity_indicator(&solved.disc, &solved.result.u, &solved.result.u_hat)?;
    log::info!("network n={n} ratios={ratios:?}: indicator {indicator:.4e}");
    Ok((
        MiPoint {
            n,
            h: solved.disc.mesh.h(),
            ratios,
            indicator,
            functional: solved.result.functional,
        },
        solved,
    ))
}
