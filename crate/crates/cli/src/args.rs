use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use strip_anderson::ids::Boundary;

#[derive(Parser, Debug)]
#[command(name = "strip-anderson", version, about = "Spectral statistics of random Schrödinger operators on a strip")]
pub struct Cli {
    /// Worker threads. Defaults to STRIP_ANDERSON_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Lyapunov spectrum over an energy grid.
    Lyapunov(LyapunovArgs),
    /// Finite-box integrated density of states.
    Ids(IdsArgs),
    /// Feynman–Kac estimate of the Laplace transform of the IDS measure.
    FkLaplace(FkArgs),
    /// Averaged Weyl function w(E + ia) and Green-function trace.
    Wfunc(WfuncArgs),
    /// Fit of the Thouless relation between γ-sums and an IDS table.
    Thouless(ThoulessArgs),
    /// Hölder exponent of a sampled curve.
    Hoelder(HoelderArgs),
    /// Lie-algebra rank of sampled transfer matrices.
    Rank(RankArgs),
    /// Check the a-priori growth and Lipschitz bounds on sampled cells.
    Bounds(BoundsArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lyapunov(_) => "lyapunov",
            Command::Ids(_) => "ids",
            Command::FkLaplace(_) => "fk-laplace",
            Command::Wfunc(_) => "wfunc",
            Command::Thouless(_) => "thouless",
            Command::Hoelder(_) => "hoelder",
            Command::Rank(_) => "rank",
            Command::Bounds(_) => "bounds",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    /// Model JSON file. Defaults to the two-coupled-strings Bernoulli preset.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Either a single `--energy` or a uniform grid of `--esteps` points on `[emin, emax]`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct EnergyGrid {
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["emin", "emax", "esteps"])]
    pub energy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub emax: Option<f64>,
    #[arg(long)]
    pub esteps: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: EnergyGrid,
    #[arg(long, default_value_t = 100_000)]
    pub cells: usize,
    /// Cells between QR renormalizations.
    #[arg(long, default_value_t = 10)]
    pub renorm: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IdsParams {
    #[arg(long, allow_hyphen_values = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub emax: Option<f64>,
    #[arg(long)]
    pub esteps: Option<usize>,
    /// Half-width L of the box [-L, L].
    #[arg(long, default_value_t = 100)]
    pub box_length: usize,
    #[arg(long, default_value_t = 0.01)]
    pub mesh: f64,
    #[arg(long, default_value = "dirichlet")]
    pub boundary: Boundary,
    /// Directory of cached IDS tables. Defaults to STRIP_ANDERSON_CACHE; no caching when unset.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IdsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub params: IdsParams,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FkArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Times t; repeat the flag for several.
    #[arg(long = "t", required = true)]
    pub times: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0.01)]
    pub time_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum WMethod {
    /// Independent realizations with random base points.
    Iid,
    /// One long chain averaged over cells and base-point offsets.
    Ergodic,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WfuncArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: EnergyGrid,
    /// Imaginary parts a > 0; repeat the flag for several.
    #[arg(long = "a", default_values_t = [0.1])]
    pub imag: Vec<f64>,
    #[arg(long, value_enum, default_value_t = WMethod::Iid)]
    pub method: WMethod,
    /// Truncation window L_w in cells (iid method).
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long, default_value_t = 200)]
    pub realizations: usize,
    /// Chain length in cells (ergodic method).
    #[arg(long, default_value_t = 100_000)]
    pub cells: usize,
    /// Cells discarded next to each wall (ergodic method).
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    /// Base-point offsets per cell (ergodic method).
    #[arg(long, default_value_t = 8)]
    pub offsets: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ThoulessArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// IDS CSV with columns `energy` and `ids`. Computed from the IDS flags when omitted.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    #[command(flatten)]
    pub ids_params: IdsParams,
    /// γ-sum CSV: `energy, gamma_sum`, or a lyapunov CSV whose top half of exponents is summed.
    #[arg(long)]
    pub gamma: PathBuf,
    /// Channel count for the high-energy tail. Defaults to the model's.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Also estimate Re w(i) from an ergodic chain of this many cells.
    #[arg(long)]
    pub rew_cells: Option<usize>,
    /// Per-energy residual CSV. Defaults to `<out>` with extension `residuals.csv`.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HoelderArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// CSV holding an `energy` column and the sampled curve.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Column of `--input` to analyse. `gamma_sum` is formed from a lyapunov CSV if absent.
    #[arg(long, default_value = "ids")]
    pub column: String,
    /// Restrict to energies at or above this value.
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Restrict to energies at or below this value.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[command(flatten)]
    pub ids_params: IdsParams,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: EnergyGrid,
    #[arg(long, default_value_t = 10_000)]
    pub max_power: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub emin: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub emax: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
