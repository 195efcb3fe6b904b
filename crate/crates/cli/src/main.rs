mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "threefield", version, about = "Coupled 3D-1D elliptic solver by three-field domain decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured problem once.
    Solve,
    /// Convergence study of the manufactured single-inclusion problem.
    Tp1,
    /// Forced single inclusion for several line diffusivities.
    Tp2,
    /// Network of intersecting inclusions (bundled geometry unless segments are configured).
    Mi,
    /// Condition-number sweep over the mesh ratios.
    CondSweep,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving all outputs (created if missing).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Subdivisions per cube edge for single solves.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Comma-separated subdivisions for refinement studies.
    #[arg(long, global = true, value_delimiter = ',')]
    meshes: Option<Vec<usize>>,
    /// Line-field mesh ratio.
    #[arg(long, global = true)]
    u_hat: Option<f64>,
    /// Flux mesh ratio.
    #[arg(long, global = true)]
    phi: Option<f64>,
    /// Pressure mesh ratio.
    #[arg(long, global = true)]
    psi: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    alpha_hat: Option<f64>,
    /// kkt, reduced-cg or reduced-sd.
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Relative gradient tolerance of the reduced solvers.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
}

impl Common {
    fn apply(&self, config: &mut RunConfig) {
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = &$flag {
                    $field = v.clone();
                }
            };
        }
        set!(self.n => config.geometry.n);
        set!(self.meshes => config.geometry.meshes);
        set!(self.u_hat => config.discretization.u_hat);
        set!(self.phi => config.discretization.phi);
        set!(self.psi => config.discretization.psi);
        set!(self.alpha => config.coefficients.alpha);
        set!(self.alpha_hat => config.coefficients.alpha_hat);
        set!(self.solver => config.solver.method);
        set!(self.tol => config.solver.tol);
        set!(self.max_iter => config.solver.max_iter);
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let dir = cli.common.output_dir.clone().context("--output-dir is required")?;
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.common.apply(&mut config);
    config.validate()?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), config.to_toml()?)?;
    match cli.command {
        Command::Solve => commands::solve(&config, &dir),
        Command::Tp1 => commands::tp1(&config, &dir),
        Command::Tp2 => commands::tp2(&config, &dir),
        Command::Mi => commands::mi(&config, &dir),
        Command::CondSweep => commands::cond_sweep(&config, &dir),
    }
}
