//! Run configuration read from TOML, with every key defaulted.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use threefield::assembly::{constant_field, Diffusivity, FaceBc, MeshRatios, ProblemSpec};
use threefield::experiments::{SolveOptions, SolverChoice};
use threefield::mesh3d::FaceTag;
use threefield::net1d::{EndpointBc, Segment};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub discretization: DiscretizationConfig,
    pub coefficients: CoefficientConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub tp2: Tp2Config,
    pub mi: MiConfig,
    pub segments: Vec<SegmentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Edge of the cube `[-edge/2, edge/2]³`.
    pub edge: f64,
    /// Subdivisions per edge for single solves.
    pub n: usize,
    /// Subdivisions per edge for refinement studies.
    pub meshes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub u_hat: f64,
    pub phi: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientConfig {
    pub diffusivity: f64,
    pub forcing: f64,
    pub alpha: f64,
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub lateral: BcConfig,
    pub top: BcConfig,
    pub bottom: BcConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcConfig {
    Neumann,
    Dirichlet(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// `kkt`, `reduced-cg` or `reduced-sd`.
    pub method: String,
    pub tol: f64,
    /// Zero selects ten times the number of controls.
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub u_hat: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub dense_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tp2Config {
    pub line_diffusivities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiConfig {
    /// Line mesh ratios of the refinement table.
    pub u_hat: Vec<f64>,
    /// Flux and pressure ratios of the ratio table.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
    #[serde(default = "one")]
    pub line_diffusivity: f64,
    #[serde(default)]
    pub line_forcing: f64,
    #[serde(default = "neumann")]
    pub start: BcConfig,
    #[serde(default = "neumann")]
    pub end: BcConfig,
}

fn one() -> f64 {
    1.0
}

fn neumann() -> BcConfig {
    BcConfig::Neumann
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            edge: 2.0,
            n: 8,
            meshes: vec![6, 8, 12, 16],
        }
    }
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            u_hat: 1.0,
            phi: 0.5,
            psi: 0.5,
        }
    }
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            diffusivity: 1.0,
            forcing: 0.0,
            alpha: 1.0,
            alpha_hat: 1.0,
        }
    }
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            lateral: BcConfig::Dirichlet(0.0),
            top: BcConfig::Dirichlet(0.0),
            bottom: BcConfig::Dirichlet(0.0),
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverChoice::Kkt.to_string(),
            tol: 1e-10,
            max_iter: 0,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 8,
            u_hat: vec![0.6, 0.8, 1.0, 1.2, 1.4],
            phi: (1..=10).map(|i| i as f64 / 10.0).collect(),
            psi: vec![0.5],
            dense_cap: threefield::solver::DEFAULT_DENSE_CAP,
        }
    }
}

impl Default for Tp2Config {
    fn default() -> Self {
        Self {
            line_diffusivities: vec![1.0, 1e2, 1e5],
        }
    }
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            u_hat: vec![0.6, 1.0, 1.4, 2.0],
            phi: vec![0.25, 0.5, 1.0],
            psi: vec![0.25, 0.5, 1.0],
        }
    }
}

impl From<BcConfig> for EndpointBc {
    fn from(bc: BcConfig) -> Self {
        match bc {
            BcConfig::Neumann => EndpointBc::Neumann,
            BcConfig::Dirichlet(v) => EndpointBc::Dirichlet(v),
        }
    }
}

impl From<EndpointBc> for BcConfig {
    fn from(bc: EndpointBc) -> Self {
        match bc {
            EndpointBc::Neumann => BcConfig::Neumann,
            EndpointBc::Dirichlet(v) => BcConfig::Dirichlet(v),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn ratios(&self) -> MeshRatios {
        MeshRatios {
            u_hat: self.discretization.u_hat,
            phi: self.discretization.phi,
            psi: self.discretization.psi,
        }
    }

    pub fn solve_options(&self) -> Result<SolveOptions> {
        let solver: SolverChoice = self.solver.method.parse()?;
        Ok(SolveOptions {
            solver,
            tol: self.solver.tol,
            max_iter: (self.solver.max_iter > 0).then_some(self.solver.max_iter),
        })
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.segments
            .iter()
            .map(|s| {
                Segment::new(Point3::from(s.a), Point3::from(s.b), s.radius).with_bc(s.start.into(), s.end.into())
            })
            .collect()
    }

    /// Physical data of a configured problem with constant coefficients.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let c = &self.coefficients;
        let mut spec = ProblemSpec::new(self.segments.len());
        spec.diffusivity = Diffusivity::Scalar(c.diffusivity);
        spec.forcing = constant_field(c.forcing);
        spec.alpha = c.alpha;
        spec.alpha_hat = c.alpha_hat;
        spec.line_diffusivity = self.segments.iter().map(|s| s.line_diffusivity).collect();
        spec.line_forcing = self.segments.iter().map(|s| constant_field(s.line_forcing)).collect();
        for (tag, bc) in [
            (FaceTag::Lateral, self.boundary.lateral),
            (FaceTag::Top, self.boundary.top),
            (FaceTag::Bottom, self.boundary.bottom),
        ] {
            spec.set_face(
                tag,
                match bc {
                    BcConfig::Neumann => FaceBc::Neumann,
                    BcConfig::Dirichlet(v) => FaceBc::Dirichlet(Arc::new(move |_: &Point3<f64>| v)),
                },
            );
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.geometry.edge > 0.0) {
            bail!("geometry.edge must be positive");
        }
        if self.geometry.n == 0 || self.geometry.meshes.contains(&0) || self.sweep.n == 0 {
            bail!("mesh subdivisions must be positive");
        }
        self.solve_options()?;
        Ok(())
    }
}
