//! `ciu`: train models, explain instances with CIU or Shapley values, and
//! inspect cooperative games.

mod explain;
mod game;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ciu_core::sampling::SamplerConfig;

#[derive(Parser)]
#[command(name = "ciu", version, about = "Contextual importance and utility explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a random forest on a CSV file and save it.
    Train(TrainArgs),
    /// Explain one instance at one abstraction level.
    Explain(ExplainArgs),
    /// Explain one instance and expand concepts into their parts.
    Drilldown(DrilldownArgs),
    /// Shapley attributions of one instance against a background set.
    Shapley(ShapleyArgs),
    /// Cooperative game utilities on game files.
    #[command(subcommand)]
    Game(game::GameCommand),
    /// Titanic experiment end to end.
    DemoTitanic(DemoArgs),
    /// Cars experiment end to end.
    DemoCars(DemoArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// CSV file, or `titanic` / `cars` for the bundled data.
    #[arg(long)]
    data: String,
    /// Label column; defaults to the bundled dataset's label.
    #[arg(long)]
    target: Option<String>,
    /// Where to write the model.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    /// Features tried per split; defaults to floor(sqrt(p)).
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    /// Fit on every row instead of the training split.
    #[arg(long)]
    all_rows: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ModelInput {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// `johnny_d`, `car1098`, `row:<n>` (needs --data), comma-separated
    /// values, or `name=value` pairs.
    #[arg(long)]
    instance: String,
    /// Dataset for `row:<n>` instances.
    #[arg(long)]
    data: Option<String>,
    /// Output to explain: class name, index, or the label column name.
    /// Defaults to the predicted class.
    #[arg(long = "class")]
    class: Option<String>,
}

#[derive(Args)]
struct CiuOptions {
    /// Vocabulary file or bundled name (`titanic`, `cars`); looked up in
    /// $CIU_CONFIG_DIR too. Without one every feature is its own concept.
    #[arg(long)]
    voc: Option<String>,
    /// Influence baseline.
    #[arg(long, default_value_t = 0.5)]
    baseline: f64,
    /// Maximum model evaluations per feature set.
    #[arg(long, default_value_t = SamplerConfig::default().budget)]
    budget: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Utility map `a,b` for regression outputs: u(y) = a*y + b.
    #[arg(long)]
    utility: Option<String>,
}

#[derive(Args)]
struct RenderOptions {
    /// Format printed to stdout.
    #[arg(long, value_enum, default_value_t = Emit::Text)]
    emit: Emit,
    /// Also write json, txt, svg and bars.json files into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base name of the files written with --out.
    #[arg(long, default_value = "explanation")]
    name: String,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Emit {
    Text,
    Json,
    Svg,
    Bars,
    None,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    input: ModelInput,
    #[command(flatten)]
    ciu: CiuOptions,
    /// `top`, a level number, or `features`.
    #[arg(long, default_value = "top")]
    level: String,
    /// Show signed influence instead of CI/CU.
    #[arg(long)]
    influence: bool,
    #[command(flatten)]
    render: RenderOptions,
}

#[derive(Args)]
struct DrilldownArgs {
    #[command(flatten)]
    input: ModelInput,
    #[command(flatten)]
    ciu: CiuOptions,
    /// Concept to expand; repeat for several.
    #[arg(long = "concept", required = true)]
    concepts: Vec<String>,
    #[arg(long)]
    influence: bool,
    #[command(flatten)]
    render: RenderOptions,
}

#[derive(Args)]
struct ShapleyArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Background rows: CSV file or bundled dataset name.
    #[arg(long)]
    background: String,
    /// Group attributions by the top level of this vocabulary.
    #[arg(long)]
    voc: Option<String>,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Enumerate all coalitions instead of sampling permutations.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    render: RenderOptions,
}

#[derive(Args)]
struct DemoArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = SamplerConfig::default().budget)]
    budget: usize,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => explain::train(a),
        Command::Explain(a) => explain::explain(a),
        Command::Drilldown(a) => explain::drilldown(a),
        Command::Shapley(a) => explain::shapley(a),
        Command::Game(c) => game::run(c),
        Command::DemoTitanic(a) => explain::demo(a, "demo-titanic", ciu_core::demo::titanic),
        Command::DemoCars(a) => explain::demo(a, "demo-cars", ciu_core::demo::cars),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
