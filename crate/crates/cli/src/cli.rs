use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "modex", version, about = "Extract small decision trees from blackbox models")]
pub struct Cli {
    /// TOML file whose sections override command-line flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode a raw CSV and optionally split it into train and test files
    Prepare(PrepareArgs),
    /// Fit a diagonal Gaussian mixture to a dataset
    FitGmm(FitGmmArgs),
    /// Train a bagged forest on a dataset
    TrainForest(TrainForestArgs),
    /// Train a CART tree on a dataset's own labels
    TrainCart(TrainCartArgs),
    /// Extract a tree from an oracle by sampling a mixture
    Extract(ExtractArgs),
    /// Train a CART tree on oracle labels of the training points
    Baseline(BaselineArgs),
    /// Score a tree against an oracle on test data
    Evaluate(EvaluateArgs),
    /// Dependence, occurrence and comparison reports
    Analyze(AnalyzeArgs),
    /// Estimate the reward of a cart-pole policy
    PolicyEval(PolicyEvalArgs),
    /// Record expert cart-pole states as an encoded dataset
    CartpoleData(CartpoleDataArgs),
    /// Write a synthetic benchmark-shaped CSV and its schema hints
    Synth(SynthArgs),
    /// Serve a model file over the oracle line protocol on stdin/stdout
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Encoded CSV written by `prepare`
    #[arg(long)]
    pub data: PathBuf,
    /// Schema manifest; defaults to manifest.json next to the data file
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct OracleArgs {
    /// Model file (tree or forest JSON)
    #[arg(long)]
    pub oracle_model: Option<PathBuf>,
    /// Shell command speaking the oracle line protocol
    #[arg(long)]
    pub oracle_cmd: Option<String>,
    /// Built-in oracle
    #[arg(long, value_enum)]
    pub oracle_builtin: Option<Builtin>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Builtin {
    CartpoleExpert,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[arg(long)]
    pub csv: PathBuf,
    /// JSON schema hints; alternatively give --response
    #[arg(long, conflicts_with = "response")]
    pub hints: Option<PathBuf>,
    #[arg(long, required_unless_present = "hints")]
    pub response: Option<String>,
    #[arg(long)]
    pub task: Option<String>,
    /// Fraction of rows held out; without it a single data.csv is written
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitGmmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest component count tried under BIC selection
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Fit exactly this many components instead of selecting by BIC
    #[arg(long, conflicts_with = "kmax")]
    pub components: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainForestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Give every tree all features instead of round(sqrt(d))
    #[arg(long)]
    pub all_features: bool,
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainCartArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 31)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Mixture file from `fit-gmm`
    #[arg(long, conflicts_with = "data")]
    pub gmm: Option<PathBuf>,
    /// Fit the mixture on this encoded dataset instead
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Node budget
    #[arg(long, default_value_t = 31)]
    pub k: usize,
    /// Samples drawn per node
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a Graphviz rendering
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 31)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub report: AnalyzeCommand,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// Overall effect of a feature and subgroup effects at the tree's splits
    Dependence(DependenceArgs),
    /// Where a feature occurs across several trees
    Occurrence(OccurrenceArgs),
    /// Compare trees extracted from different models
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct DependenceArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long)]
    pub gmm: PathBuf,
    /// Test points for subgroup prevalence
    #[command(flatten)]
    pub data: DataArgs,
    /// Feature name or index
    #[arg(long)]
    pub feature: String,
    /// Class whose indicator is averaged (classification only)
    #[arg(long)]
    pub effect_class: Option<usize>,
    /// Low and high regions as `lo:hi` intervals; defaults to the two sides of 0.5
    #[arg(long, requires = "high")]
    pub low: Option<String>,
    #[arg(long, requires = "low")]
    pub high: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OccurrenceArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub trees: Vec<PathBuf>,
    #[arg(long)]
    pub feature: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// `tag=tree.json`, repeated
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<String>,
    /// `tag=report.json` from `evaluate`, optional per model
    #[arg(long = "report")]
    pub reports: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct PolicyArgs {
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Evaluate the built-in expert
    #[arg(long)]
    pub expert: bool,
}

#[derive(Args, Debug)]
pub struct PolicyEvalArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML file with environment constants
    #[arg(long)]
    pub env_config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CartpoleDataArgs {
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    /// Fraction of episodes held out as the test set
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub env_config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    Wine,
    Leak,
    Student,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub dataset: SynthKind,
    /// Grade shift for male students (student dataset only)
    #[arg(long, default_value_t = 0.5)]
    pub male_shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path; hints go to the same path with a .hints.json suffix
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
