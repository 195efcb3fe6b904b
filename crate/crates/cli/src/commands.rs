//! Subcommand drivers. Every table is written with `{:e}` formatting so
//! identical runs give byte-identical files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use threefield::assembly::{Discretization, MeshRatios};
use threefield::experiments::{
    conditioning_sweep, fit_slope, mi_segments, mi_spec, run_mi_point, solve_problem, tp1_row, Solved, Tp1, Tp2,
};
use threefield::mesh3d::build_box_mesh;
use threefield::net1d::split_at_intersections;
use threefield::postproc::{continuity_indicator, export_segments_csv, export_vtk, write_history_csv, write_vtk};

use crate::config::RunConfig;

fn e(v: f64) -> String {
    format!("{v:e}")
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
}

/// Field exports shared by the single-solve commands.
fn export_solution(dir: &Path, solved: &Solved) -> Result<()> {
    export_vtk(&solved.disc.mesh, &solved.result.u, &dir.join("field.vtk"))?;
    export_segments_csv(&solved.disc, &solved.result, &dir.join("segments"))?;
    write_history_csv(&solved.result.history, &dir.join("diagnostics.csv"))?;
    Ok(())
}

const RESULT_HEADER: [&str; 12] = [
    "solver", "n", "h", "n_u", "n_u_hat", "n_phi", "n_psi", "functional", "iterations", "residual", "indicator", "min_u",
];

fn result_record(config: &RunConfig, n: usize, solved: &Solved) -> Result<Vec<String>> {
    let (disc, r) = (&solved.disc, &solved.result);
    let indicator = if disc.network.is_empty() {
        f64::NAN
    } else {
        continuity_indicator(disc, &r.u, &r.u_hat).unwrap_or(f64::NAN)
    };
    Ok(vec![
        config.solver.method.clone(),
        n.to_string(),
        e(disc.mesh.h()),
        disc.n_u().to_string(),
        disc.n_u_hat().to_string(),
        disc.n_phi().to_string(),
        disc.n_psi().to_string(),
        e(r.functional),
        r.iterations.to_string(),
        e(r.residual),
        e(indicator),
        e(r.u.iter().copied().fold(f64::INFINITY, f64::min)),
    ])
}

fn log_solve(solved: &Solved) {
    let r = &solved.result;
    log::info!(
        "solved in {:.2?}: J = {:.6e}, {} iterations, residual {:.2e}",
        r.wall_time,
        r.functional,
        r.iterations,
        r.residual
    );
}

/// Single solve of the configured problem.
pub fn solve(config: &RunConfig, dir: &Path) -> Result<()> {
    let segments = config.segments();
    let edge = config.geometry.edge;
    let network = split_at_intersections(&segments, 1e-9 * edge)?;
    let disc = Discretization::new(build_box_mesh(edge, config.geometry.n)?, network, config.ratios())?;
    let solved = solve_problem(disc, &config.problem_spec()?, &config.solve_options()?)?;
    log_solve(&solved);
    let mut w = writer(dir, "results.csv")?;
    w.write_record(RESULT_HEADER)?;
    w.write_record(result_record(config, config.geometry.n, &solved)?)?;
    w.flush()?;
    export_solution(dir, &solved)
}

/// Convergence study of the manufactured single-inclusion problem.
pub fn tp1(config: &RunConfig, dir: &Path) -> Result<()> {
    let tp1 = Tp1 {
        edge: config.geometry.edge,
        ..Tp1::default()
    };
    let options = config.solve_options()?;
    let mut rows = Vec::new();
    let mut finest = None;
    for &n in &config.geometry.meshes {
        let (row, solved) = tp1_row(&tp1, n, config.ratios(), &options)?;
        log_solve(&solved);
        rows.push(row);
        finest = Some(solved);
    }
    let mut w = writer(dir, "convergence.csv")?;
    w.write_record(["n", "h", "N", "N_hat", "E_L2", "E_H1", "E_hat_L2", "E_hat_H1", "J", "indicator"])?;
    for r in &rows {
        w.write_record([
            r.n.to_string(),
            e(r.h),
            r.n_u.to_string(),
            r.n_u_hat.to_string(),
            e(r.e_l2),
            e(r.e_h1),
            e(r.line_l2),
            e(r.line_h1),
            e(r.functional),
            e(r.indicator),
        ])?;
    }
    w.flush()?;

    let (a, b, c) = tp1.coefficients();
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slope = |f: fn(&threefield::experiments::ConvergenceRow) -> f64| {
        if rows.len() > 1 {
            fit_slope(&h, &rows.iter().map(f).collect::<Vec<_>>())
        } else {
            f64::NAN
        }
    };
    let mut w = writer(dir, "results.csv")?;
    w.write_record(["a", "b", "c", "slope_L2", "slope_H1", "slope_hat_L2", "slope_hat_H1"])?;
    w.write_record([
        e(a),
        e(b),
        e(c),
        e(slope(|r| r.e_l2)),
        e(slope(|r| r.e_h1)),
        e(slope(|r| r.line_l2)),
        e(slope(|r| r.line_h1)),
    ])?;
    w.flush()?;
    if let Some(solved) = finest {
        export_solution(dir, &solved)?;
    }
    Ok(())
}

/// Forced single inclusion for each configured line diffusivity.
pub fn tp2(config: &RunConfig, dir: &Path) -> Result<()> {
    let tp2 = Tp2 {
        edge: config.geometry.edge,
        ..Tp2::default()
    };
    let options = config.solve_options()?;
    let mut summary = writer(dir, "results.csv")?;
    summary.write_record(["line_diffusivity", "min_u", "symmetry_defect", "midpoint_u_hat", "functional"])?;
    let mut profiles = writer(dir, "profiles.csv")?;
    profiles.write_record(["line_diffusivity", "s", "u_hat"])?;
    let mut fields: Vec<(String, Vec<f64>)> = Vec::new();
    let mut last = None;
    for &k in &config.tp2.line_diffusivities {
        let (profile, solved) = tp2.solve(config.geometry.n, k, config.ratios(), &options)?;
        log_solve(&solved);
        if profile.min_u < -1e-10 {
            log::warn!("line diffusivity {k}: minimum of U is {:.3e}", profile.min_u);
        }
        summary.write_record([e(k), e(profile.min_u), e(profile.symmetry_defect), e(profile.midpoint), e(solved.result.functional)])?;
        for (s, v) in &profile.profile {
            profiles.write_record([e(k), e(*s), e(*v)])?;
        }
        fields.push((format!("U_k{}", fields.len()), solved.result.u.clone()));
        last = Some(solved);
    }
    summary.flush()?;
    profiles.flush()?;
    if let Some(solved) = last {
        let named: Vec<(&str, &[f64])> = fields.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        write_vtk(fs::File::create(dir.join("field.vtk"))?, &solved.disc.mesh, &named)?;
        export_segments_csv(&solved.disc, &solved.result, &dir.join("segments"))?;
        write_history_csv(&solved.result.history, &dir.join("diagnostics.csv"))?;
    }
    Ok(())
}

/// Network problem: base solve, a flux/pressure ratio table and a line
/// ratio/refinement table of the continuity indicator.
pub fn mi(config: &RunConfig, dir: &Path) -> Result<()> {
    let (segments, spec) = if config.segments.is_empty() {
        let segments = mi_segments();
        let spec = mi_spec(segments.len());
        (segments, spec)
    } else {
        (config.segments(), config.problem_spec()?)
    };
    let edge = config.geometry.edge;
    let options = config.solve_options()?;
    let base = config.ratios();

    let (_, solved) = run_mi_point(&segments, &spec, edge, config.geometry.n, base, &options)?;
    log_solve(&solved);
    let mut w = writer(dir, "results.csv")?;
    w.write_record(RESULT_HEADER)?;
    w.write_record(result_record(config, config.geometry.n, &solved)?)?;
    w.flush()?;
    export_solution(dir, &solved)?;

    let mut w = writer(dir, "mi_ratios.csv")?;
    w.write_record(["n", "u_hat", "phi", "psi", "indicator", "functional"])?;
    for &phi in &config.mi.phi {
        for &psi in &config.mi.psi {
            let ratios = MeshRatios { phi, psi, ..base };
            let (p, _) = run_mi_point(&segments, &spec, edge, config.geometry.n, ratios, &options)?;
            w.write_record([p.n.to_string(), e(ratios.u_hat), e(phi), e(psi), e(p.indicator), e(p.functional)])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "mi_refinement.csv")?;
    w.write_record(["n", "h", "u_hat", "phi", "psi", "indicator", "functional"])?;
    for &u_hat in &config.mi.u_hat {
        for &n in &config.geometry.meshes {
            let ratios = MeshRatios { u_hat, ..base };
            let (p, _) = run_mi_point(&segments, &spec, edge, n, ratios, &options)?;
            w.write_record([n.to_string(), e(p.h), e(u_hat), e(ratios.phi), e(ratios.psi), e(p.indicator), e(p.functional)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Condition numbers of the saddle-point matrix of the manufactured problem
/// over the configured ratio grid.
pub fn cond_sweep(config: &RunConfig, dir: &Path) -> Result<()> {
    let tp1 = Tp1 {
        edge: config.geometry.edge,
        ..Tp1::default()
    };
    let s = &config.sweep;
    let rows = conditioning_sweep(&tp1, s.n, &s.u_hat, &s.phi, &s.psi, s.dense_cap)?;
    let mut w = writer(dir, "conditioning.csv")?;
    w.write_record(["u_hat", "phi", "psi", "condition"])?;
    for r in rows {
        w.write_record([e(r.u_hat), e(r.phi), e(r.psi), e(r.condition)])?;
    }
    w.flush()?;
    Ok(())
}
