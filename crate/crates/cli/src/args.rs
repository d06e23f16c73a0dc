use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "htn",
    version,
    about = "HTN planner with a language-model fallback for missing methods"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan for one problem and print the plan, one action per line.
    Plan(PlanArgs),
    /// Check a plan file against a problem.
    Validate(ValidateArgs),
    /// Run the ablation matrix over one or more bundled domains.
    Experiment(ExperimentArgs),
    /// Look inside a recorded oracle exchange cache.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
    /// List the bundled domains.
    Bundles,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Bundle name (logistics, household, rescue) or path to a domain JSON file.
    #[arg(short, long)]
    pub domain: String,

    /// Problem JSON file, or `unsolvable` for a bundle's unsolvable variant.
    /// Defaults to the bundle's prototypical problem.
    #[arg(short, long)]
    pub problem: Option<String>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// `failing`, `scripted`, `scripted:<file>`, `adversarial:<seed>` or `live`.
    /// `live` reads OPENAI_API_KEY, OPENAI_BASE_URL, OPENAI_MODEL and OPENAI_TEMPERATURE.
    #[arg(short, long, default_value = "failing")]
    pub oracle: String,

    /// Record every oracle exchange to this JSON-lines cache and answer
    /// repeated requests from it.
    #[arg(long)]
    pub cache: Option<PathBuf>,

    /// Answer only from --cache; a miss counts as no answer.
    #[arg(long, requires = "cache")]
    pub replay_only: bool,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// Maximum nesting of compound expansions.
    #[arg(long, default_value_t = 200)]
    pub depth_limit: usize,

    /// Maximum oracle queries per planning run.
    #[arg(long, default_value_t = 25)]
    pub oracle_budget: usize,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub limits: LimitArgs,

    /// Remove knowledge before planning: `method:<name>`, `task:<name>` or
    /// `no-model`. May be repeated.
    #[arg(long)]
    pub ablate: Vec<String>,

    /// Write the search trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Write the plan here instead of stdout.
    #[arg(long)]
    pub plan_out: Option<PathBuf>,

    /// Also print the derivation tree to stderr.
    #[arg(long)]
    pub tree: bool,

    /// Print a JSON summary instead of the bare plan.
    #[arg(long, conflicts_with = "plan_out")]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,

    /// Plan file: one action per line, `#` comments allowed.
    #[arg(long)]
    pub plan: PathBuf,

    /// Comma-separated segment lengths, one per top-level task. Without
    /// this every split is searched.
    #[arg(long, value_delimiter = ',')]
    pub segments: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Bundles to run; all of them when omitted.
    #[arg(short, long)]
    pub domain: Vec<String>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub limits: LimitArgs,

    /// Attempts per cell; stops at the first plan.
    #[arg(long, default_value_t = 5)]
    pub retries: usize,

    /// Cells run in parallel.
    #[arg(short, long, default_value_t = 1)]
    pub jobs: usize,

    /// Directory for per-cell plans and traces.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Write per-cell traces (needs --out).
    #[arg(long, requires = "out")]
    pub trace: bool,

    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CacheCommand {
    /// Summarize the records of a cache file.
    Inspect {
        file: PathBuf,
        /// Print the full prompts and responses of every record.
        #[arg(long)]
        full: bool,
    },
}
