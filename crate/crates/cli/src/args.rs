use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "critdet", version, about = "Radial critical metrics of regularized determinants on S^4")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out/<command>`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Coefficient preset: paneitz, half-torsion or conformal-laplacian.
    #[arg(long, global = true)]
    pub coeffs: Option<String>,
    /// Explicit `g1,g2,g3`; takes precedence over `--coeffs`.
    #[arg(long, global = true)]
    pub gammas: Option<String>,
    /// Ratio `beta = g2 / (12 g3)`; takes precedence over `--coeffs`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_step: Option<f64>,
    /// Suppress the summary line on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Periodic family at `C = 0`, parametrized by normalized energy.
    Delaunay(DelaunayArgs),
    /// A single Newton orbit, or the separatrix orbit with `--special`.
    Orbit(OrbitArgs),
    /// Shape of the potential for one or more values of `C`.
    ClassifyPotential(ClassifyArgs),
    /// Chart of the invariant disc.
    Disc(DiscArgs),
    /// Equilibria of the third-order system and their spectra.
    Stationary,
    /// Linearization at the round solution and its growth amplitude.
    Linearize(LinearizeArgs),
    /// Classify the shooting trajectory for one epsilon.
    Shoot(ShootArgs),
    /// Locate the end of the convergent range and build the admissible profile.
    EpsBar(EpsBarArgs),
    /// Log-slopes of the functionals along the bubble family.
    Bubble(BubbleArgs),
    /// Residuals of the invariant evolution laws on random trajectories.
    VerifyInvariants(VerifyArgs),
    /// Shooting for a ratio outside the admissible regime.
    ExploreBeta(ExploreArgs),
    /// Rerun a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DelaunayArgs {
    /// Comma-separated values in [0, 1].
    #[arg(long)]
    pub alphas: Option<String>,
    /// Evenly spaced values in [0, 1) when `--alphas` is absent.
    #[arg(long)]
    pub n: Option<usize>,
    /// Also write one sampled period per family member.
    #[arg(long)]
    pub orbits: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OrbitArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Hamiltonian level.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long)]
    pub special: bool,
    /// Potential graphs for the representative values of `C`.
    #[arg(long)]
    pub figure: bool,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    /// Comma-separated values of `C`.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct DiscArgs {
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct LinearizeArgs {
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ShootArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Also evaluate the linearized estimate on its window for this delta.
    #[arg(long)]
    pub gronwall_delta: Option<f64>,
    /// Entry and exit report for the set {|y| + |z| < eta, |Q| < B}.
    #[arg(long)]
    pub omega: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EpsBarArgs {
    /// `lo,hi`
    #[arg(long)]
    pub bracket: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct BubbleArgs {
    /// `default` or a comma-separated list.
    #[arg(long)]
    pub eps_grid: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Use `-1` for the reflected profile.
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Largest accepted residual.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ExploreArgs {
    #[arg(long)]
    pub bracket: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Delaunay(_) => "delaunay",
            Command::Orbit(_) => "orbit",
            Command::ClassifyPotential(_) => "classify-potential",
            Command::Disc(_) => "disc",
            Command::Stationary => "stationary",
            Command::Linearize(_) => "linearize",
            Command::Shoot(_) => "shoot",
            Command::EpsBar(_) => "eps-bar",
            Command::Bubble(_) => "bubble",
            Command::VerifyInvariants(_) => "verify-invariants",
            Command::ExploreBeta(_) => "explore-beta",
            Command::Replay(_) => "replay",
        }
    }
}
