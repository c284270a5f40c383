mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smaup::par::Workers;
use smaup::statistic::Lookup;
use smaup::stats::Center;
use smaup::Level;

#[derive(Debug, Parser)]
#[command(name = "smaup", version, about = "S-maup test for MAUP sensitivity and its simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build rook contiguity weights from a lattice, adjacency list or GeoJSON.
    Weights(WeightsArgs),
    /// Draw a SAR field.
    Simulate(SimulateArgs),
    /// Rearrange a variable's values toward a target rho.
    PermuteRho(PermuteArgs),
    /// Randomly aggregate areas into k contiguous regions.
    Aggregate(AggregateArgs),
    /// Run the S-maup test for one k.
    Test(TestArgs),
    /// Run the test over a range of k and report the minimum safe k.
    Scan(ScanArgs),
    /// Simulate the null distribution of the statistic.
    Null(NullArgs),
    /// Estimate the power of the test.
    Power(PowerSizeArgs),
    /// Estimate the size of the test.
    Size(PowerSizeArgs),
    /// Measure aggregation effects on mean and variance.
    Effects(EffectsArgs),
    /// Write the embedded critical-value table as CSV.
    ExportCriticalValues(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LookupArg {
    Nearest,
    Bilinear,
}

impl From<LookupArg> for Lookup {
    fn from(l: LookupArg) -> Self {
        match l {
            LookupArg::Nearest => Lookup::Nearest,
            LookupArg::Bilinear => Lookup::Bilinear,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CenterArg {
    Mean,
    Median,
}

impl From<CenterArg> for Center {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Mean => Center::Mean,
            CenterArg::Median => Center::Median,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Isolation,
    Independent,
}

fn parse_level(s: &str) -> Result<Level, String> {
    let alpha: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    Level::try_from(alpha).map_err(|e| e.to_string())
}

#[derive(Debug, Args, Serialize)]
struct SeedArgs {
    /// Master seed; drawn from system entropy (and printed) when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct WorkerArgs {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, env = "SMAUP_WORKERS")]
    workers: Option<usize>,
}

impl WorkerArgs {
    fn resolve(&self) -> Workers {
        self.workers.map_or_else(Workers::all, Workers::new)
    }
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
struct GraphSource {
    /// Rook lattice with ROWS x COLS areas.
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"])]
    lattice: Option<Vec<usize>>,
    /// Weights JSON written by `smaup weights`.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["lattice", "adjacency", "geojson"])))]
struct WeightsArgs {
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"])]
    lattice: Option<Vec<usize>>,
    /// Adjacency list, one `area: neighbour neighbour ...` line per area.
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// GeoJSON FeatureCollection of Polygon/MultiPolygon features.
    #[arg(long)]
    geojson: Option<PathBuf>,
    /// Keep binary weights instead of row-standardizing.
    #[arg(long)]
    binary: bool,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphSource,
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    #[command(flatten)]
    seed: SeedArgs,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PermuteArgs {
    /// Area values CSV.
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    target: f64,
    #[arg(long, default_value_t = 0.5)]
    window: f64,
    #[arg(long, default_value_t = 100)]
    max_retries: usize,
    #[command(flatten)]
    seed: SeedArgs,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct AggregateArgs {
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    seed: SeedArgs,
    /// Where to write the `area_id,region_id` partition.
    #[serde(skip)]
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Where to write the region means.
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TestCommon {
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Null distribution JSON written by `smaup null`.
    #[arg(long)]
    null: Option<PathBuf>,
    /// Use this rho instead of estimating it.
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, value_parser = parse_level, default_value = "0.05")]
    alpha: Level,
    #[arg(long, value_enum, default_value_t = LookupArg::Nearest)]
    lookup: LookupArg,
    #[serde(skip)]
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    common: TestCommon,
    #[arg(long)]
    k: usize,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    common: TestCommon,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    /// Defaults to the number of areas.
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct RecipeArgs {
    /// Random aggregations per instance.
    #[arg(long, default_value_t = 30)]
    r: usize,
    /// Use the generating rho in the statistic instead of re-estimating it.
    #[arg(long)]
    reuse_rho: bool,
    /// Centre of the Levene test in the acceptance filter.
    #[arg(long, value_enum, default_value_t = CenterArg::Mean)]
    center: CenterArg,
    /// Attempts without an acceptance before giving up.
    #[arg(long, default_value_t = smaup::experiments::STALL_WINDOW)]
    stall_window: usize,
}

#[derive(Debug, Args, Serialize)]
struct NullArgs {
    /// Number of areas of a square rook lattice.
    #[arg(long, conflicts_with_all = ["lattice", "weights"])]
    n: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"], conflicts_with = "weights")]
    lattice: Option<Vec<usize>>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[command(flatten)]
    recipe: RecipeArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[serde(skip)]
    #[command(flatten)]
    workers: WorkerArgs,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PowerSizeArgs {
    /// Numbers of areas (square lattices), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Rho values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// 0.01, 0.05 or 0.1; 0 never rejects and 1 always does.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = LookupArg::Nearest)]
    lookup: LookupArg,
    #[command(flatten)]
    recipe: RecipeArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[serde(skip)]
    #[command(flatten)]
    workers: WorkerArgs,
    #[serde(skip)]
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EffectsArgs {
    /// Numbers of areas (square lattices); defaults to the full grid.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Rho values; defaults to the nine grid values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho: Vec<f64>,
    /// Region counts for one N as `N=k1,k2,...`; repeatable. Defaults to
    /// the published lists.
    #[arg(long = "k")]
    ks: Vec<String>,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 30)]
    r: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Isolation)]
    mode: ModeArg,
    /// Acceptance window around the target rho in isolation mode.
    #[arg(long, default_value_t = 0.5)]
    window: f64,
    #[arg(long, default_value_t = 200)]
    max_retries: usize,
    #[command(flatten)]
    seed: SeedArgs,
    #[serde(skip)]
    #[command(flatten)]
    workers: WorkerArgs,
    #[serde(skip)]
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[serde(skip)]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Exit status per failure class.
fn exit_code(err: &anyhow::Error) -> u8 {
    use smaup::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Stall { .. }) => 4,
        Some(
            E::Singular { .. }
            | E::DegenerateInput(_)
            | E::DegenerateSample(_)
            | E::InsufficientData { .. }
            | E::UndefinedRatio(_)
            | E::RetryExhausted { .. }
            | E::ContiguityImpossible,
        ) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Weights(a) => commands::weights(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::PermuteRho(a) => commands::permute_rho(a),
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Test(a) => commands::test(a),
        Command::Scan(a) => commands::scan(a),
        Command::Null(a) => commands::null(a),
        Command::Power(a) => commands::power_size(a, commands::Kind::Power),
        Command::Size(a) => commands::power_size(a, commands::Kind::Size),
        Command::Effects(a) => commands::effects(a),
        Command::ExportCriticalValues(a) => commands::export_critical_values(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
