//! Error norms, the trace continuity indicator and field export.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::assembly::{Discretization, ScalarField};
use crate::error::{Error, Result};
use crate::mesh3d::TetMesh;
use crate::quadrature::{gauss_legendre, TetRule, GAUSS2_UNIT};
use crate::solver::{IterationRecord, SolveResult};

pub type VectorField = Arc<dyn Fn(&Point3<f64>) -> Vector3<f64> + Send + Sync>;

/// A bulk field with its gradient.
#[derive(Clone)]
pub struct ExactField {
    pub value: ScalarField,
    pub gradient: VectorField,
}

/// A line field given per subsegment as a function of arclength.
#[derive(Clone)]
pub struct ExactLineField {
    pub value: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    pub derivative: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
}

impl ExactField {
    /// Largest relative mismatch between the gradient and central
    /// differences of the value with step `h` at `points`.
    pub fn gradient_defect(&self, points: &[Point3<f64>], h: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for p in points {
            let g = (self.gradient)(p);
            let mut fd = Vector3::zeros();
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = h;
                fd[i] = ((self.value)(&(p + e)) - (self.value)(&(p - e))) / (2.0 * h);
            }
            worst = worst.max((g - fd).norm() / g.norm().max(1.0));
        }
        worst
    }
}

impl ExactLineField {
    pub fn constant(value: f64) -> Self {
        Self {
            value: Arc::new(move |_, _| value),
            derivative: Arc::new(|_, _| 0.0),
        }
    }
}

/// Relative `L²` and full `H¹` errors of a P1 field against `exact`,
/// integrated with `rule` on every tet.
pub fn error_norms_3d_with_rule(mesh: &TetMesh, u: &[f64], exact: &ExactField, rule: &TetRule) -> Result<(f64, f64)> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch(format!("{} values for {} vertices", u.len(), mesh.n_vertices())));
    }
    let (mut e0, mut e1, mut n0, mut n1) = (0.0, 0.0, 0.0, 0.0);
    for (t, tet) in mesh.tets().iter().enumerate() {
        let grads = mesh.tet_p1_gradients(t)?;
        let pts = mesh.tet_points(t);
        let vol = mesh.tet_volume(t);
        let grad_u: Vector3<f64> = (0..4).map(|i| grads[i] * u[tet[i]]).sum();
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = Point3::from((0..4).map(|i| pts[i].coords * bary[i]).sum::<Vector3<f64>>());
            let uh: f64 = (0..4).map(|i| bary[i] * u[tet[i]]).sum();
            let ue = (exact.value)(&x);
            let ge = (exact.gradient)(&x);
            let wv = w * vol;
            e0 += wv * (ue - uh).powi(2);
            e1 += wv * (ge - grad_u).norm_squared();
            n0 += wv * ue * ue;
            n1 += wv * ge.norm_squared();
        }
    }
    if n0 == 0.0 {
        return Err(Error::Undefined("relative error of a zero exact solution"));
    }
    Ok(((e0 / n0).sqrt(), ((e0 + e1) / (n0 + n1)).sqrt()))
}

/// Relative errors with the eleven-point quartic rule.
pub fn error_norms_3d(mesh: &TetMesh, u: &[f64], exact: &ExactField) -> Result<(f64, f64)> {
    error_norms_3d_with_rule(mesh, u, exact, &TetRule::order4())
}

/// Relative `L²` and full `H¹` errors of the line field over all
/// subsegments.
pub fn error_norms_1d(disc: &Discretization, u_hat: &[f64], exact: &ExactLineField) -> Result<(f64, f64)> {
    if u_hat.len() != disc.n_u_hat() {
        return Err(Error::DimensionMismatch(format!("{} values for {} line DOFs", u_hat.len(), disc.n_u_hat())));
    }
    let (x, w) = gauss_legendre(4);
    let (mut e0, mut e1, mut n0, mut n1) = (0.0, 0.0, 0.0, 0.0);
    for (k, part) in disc.parts_u.iter().enumerate() {
        let coeffs = &u_hat[disc.offsets_u()[k]..disc.offsets_u()[k + 1]];
        for (e, nodes) in part.nodes().windows(2).enumerate() {
            let h = nodes[1] - nodes[0];
            let slope = (coeffs[e + 1] - coeffs[e]) / h;
            for (xi, wi) in x.iter().zip(&w) {
                let t = 0.5 * (xi + 1.0);
                let s = nodes[0] + t * h;
                let uh = (1.0 - t) * coeffs[e] + t * coeffs[e + 1];
                let (ue, de) = ((exact.value)(k, s), (exact.derivative)(k, s));
                let wh = 0.5 * wi * h;
                e0 += wh * (ue - uh).powi(2);
                e1 += wh * (de - slope).powi(2);
                n0 += wh * ue * ue;
                n1 += wh * de * de;
            }
        }
    }
    if n0 == 0.0 {
        return Err(Error::Undefined("relative error of a zero exact solution"));
    }
    Ok(((e0 / n0).sqrt(), ((e0 + e1) / (n0 + n1)).sqrt()))
}

/// Nondimensional mismatch between the bulk trace and the line field:
/// `sqrt(Σ ||U|_Λ - Û||²) / (max |U, Û| · sqrt(total length))`, the maximum
/// taken over all nodal values.
pub fn continuity_indicator(disc: &Discretization, u: &[f64], u_hat: &[f64]) -> Result<f64> {
    let tol = disc.mesh.geometric_tolerance();
    let mut num = 0.0;
    for (k, sub) in disc.network.subsegments().iter().enumerate() {
        let induced = &disc.induced[k];
        let part = &disc.parts_u[k];
        let coeffs = &u_hat[disc.offsets_u()[k]..disc.offsets_u()[k + 1]];
        let breaks = crate::quadrature::merge_breakpoints(&[induced.breaks(), part.nodes()], tol)?;
        for w in breaks.windows(2) {
            let len = w[1] - w[0];
            let t = induced.tets()[induced.interval_at(0.5 * (w[0] + w[1]))];
            let tet = disc.mesh.tets()[t];
            for &g in &GAUSS2_UNIT {
                let s = w[0] + g * len;
                let lam = disc.mesh.barycentric(t, &sub.segment.point_at(s))?;
                let trace: f64 = (0..4).map(|i| lam[i] * u[tet[i]]).sum();
                num += 0.5 * len * (trace - part.interpolate(coeffs, s)).powi(2);
            }
        }
    }
    let vmax = u.iter().chain(u_hat).fold(0.0_f64, |m, v| m.max(v.abs()));
    let total = disc.network.total_length();
    if vmax == 0.0 || total == 0.0 {
        return Err(Error::Undefined("continuity indicator of a zero solution"));
    }
    Ok(num.sqrt() / (vmax * total.sqrt()))
}

/// Legacy ASCII VTK unstructured grid with the given point scalars.
pub fn write_vtk<W: Write>(out: W, mesh: &TetMesh, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "coupled 3D-1D solution")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:e} {:e} {:e}", p.x, p.y, p.z)?;
    }
    writeln!(out, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets())?;
    for t in mesh.tets() {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_tets())?;
    for _ in mesh.tets() {
        writeln!(out, "10")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, values) in fields {
            if values.len() != mesh.n_vertices() {
                return Err(Error::DimensionMismatch(format!("field {name} has {} values", values.len())));
            }
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(out, "{v:e}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn export_vtk(mesh: &TetMesh, u: &[f64], path: &Path) -> Result<()> {
    write_vtk(File::create(path)?, mesh, &[("U", u)])
}

/// Counts read back from a legacy VTK file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkSummary {
    pub points: usize,
    pub cells: usize,
    pub cell_types: Vec<u8>,
    pub scalars: Vec<(String, Vec<f64>)>,
}

/// Minimal reader for the files produced by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkSummary> {
    let reader = BufReader::new(File::open(path)?);
    let mut tokens: Vec<String> = Vec::new();
    for line in reader.lines() {
        tokens.extend(line?.split_whitespace().map(str::to_owned));
    }
    let bad = |what: &str| Error::InvalidDiscretization(format!("malformed VTK file: {what}"));
    let num = |s: Option<&String>| -> Result<usize> { s.and_then(|s| s.parse().ok()).ok_or_else(|| bad("count")) };
    let mut out = VtkSummary::default();
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            "POINTS" => {
                out.points = num(tokens.get(i + 1))?;
                i += 3 + 3 * out.points;
            }
            "CELLS" => {
                out.cells = num(tokens.get(i + 1))?;
                i += 3 + num(tokens.get(i + 2))?;
            }
            "CELL_TYPES" => {
                let n = num(tokens.get(i + 1))?;
                out.cell_types = tokens[i + 2..i + 2 + n].iter().map(|t| t.parse().map_err(|_| bad("cell type"))).collect::<Result<_>>()?;
                i += 2 + n;
            }
            "SCALARS" => {
                let name = tokens.get(i + 1).ok_or_else(|| bad("scalar name"))?.clone();
                // SCALARS name type 1 LOOKUP_TABLE default
                let start = i + 6;
                let values = tokens[start..start + out.points]
                    .iter()
                    .map(|t| t.parse().map_err(|_| bad("scalar value")))
                    .collect::<Result<Vec<f64>>>()?;
                out.scalars.push((name, values));
                i = start + out.points;
            }
            _ => i += 1,
        }
    }
    Ok(out)
}

/// One CSV per subsegment (`segment_NNN.csv`) with columns
/// `s, u_hat, phi, psi` sampled at the line-field nodes.
pub fn export_segments_csv(disc: &Discretization, result: &SolveResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for k in 0..disc.parts_u.len() {
        let (pu, pf, pp) = (&disc.parts_u[k], &disc.parts_phi[k], &disc.parts_psi[k]);
        let uh = &result.u_hat[disc.offsets_u()[k]..disc.offsets_u()[k + 1]];
        let phi = &result.phi[disc.offsets_phi()[k]..disc.offsets_phi()[k + 1]];
        let psi = &result.psi[disc.offsets_psi()[k]..disc.offsets_psi()[k + 1]];
        let mut w = csv::Writer::from_path(dir.join(format!("segment_{k:03}.csv")))?;
        w.write_record(["s", "u_hat", "phi", "psi"])?;
        for (i, &s) in pu.nodes().iter().enumerate() {
            w.write_record([s, uh[i], pf.interpolate(phi, s), pp.interpolate(psi, s)].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn write_history_csv(history: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "relative_gradient", "functional"])?;
    for r in history {
        w.write_record(&[r.iteration.to_string(), format!("{:e}", r.gradient), format!("{:e}", r.functional)])?;
    }
    w.flush()?;
    Ok(())
}
