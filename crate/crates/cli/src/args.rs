use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qpc_core::bok::TiePolicy;
use qpc_core::fluency::GateMode;
use qpc_core::weights::WeightScheme;
use qpc_llmio::Mode;

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "qpc",
    version,
    about = "Build, audit and evaluate proof-verification datasets"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct GlobalArgs {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// live, record or replay.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exchange cache for record and replay modes.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Directory for run manifests. Defaults to next to each primary output.
    #[arg(long, global = true)]
    pub manifest_dir: Option<PathBuf>,
    /// Log filter, e.g. `info` or `qpc_cli=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            mode: self.mode,
            seed: self.seed,
            manifest_dir: self.manifest_dir.clone(),
            cache_path: self.cache.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build generation requests from questions and collect generated proofs.
    Gen(GenArgs),
    /// Label generated proofs with the verifier ensemble.
    Annotate(AnnotateArgs),
    /// Human audit gates.
    #[command(subcommand)]
    Gate(GateCommand),
    /// Assign train/test splits from decided gates.
    Split(SplitArgs),
    /// Print dataset statistics by combination and provenance group.
    Stats(StatsArgs),
    /// Materialize a bundled fixture.
    #[command(subcommand)]
    Fixture(FixtureCommand),
    /// Score reward-model rollouts against gold labels.
    Reward(RewardArgs),
    /// Flag disfluent reward-model generations.
    Fluency(FluencyArgs),
    /// Per-token loss weights for rollout groups.
    Weights(WeightsArgs),
    /// Best-of-k curves over candidate pools.
    Bok(BokArgs),
    /// Serve the audit HTTP API (and optionally a static UI bundle).
    AuditServe(ServeArgs),
    /// Record or compare output digests of a run directory.
    #[command(subcommand)]
    Replay(ReplayCommand),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub questions: PathBuf,
    /// Item store directory to append generated items to.
    #[arg(long)]
    pub store: PathBuf,
    /// Where to write the generation requests.
    #[arg(long)]
    pub requests: PathBuf,
    /// Failed requests; written only when some fail.
    #[arg(long)]
    pub failures: Option<PathBuf>,
    /// Only build and write the requests.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub questions: PathBuf,
    /// Store with unlabeled generated items.
    #[arg(long)]
    pub store: PathBuf,
    /// Fresh store receiving every item, labeled where the ensemble agrees.
    #[arg(long)]
    pub out_store: PathBuf,
    /// Verdict sets, one line per annotated item.
    #[arg(long)]
    pub verdicts: PathBuf,
    /// unanimous, majority or majority:N. Overrides the config.
    #[arg(long)]
    pub policy: Option<String>,
    /// Verifier schedule such as `deepseek-r1=3,gpt-5-mini=1`. Overrides the config.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Reuse verdict sets from an earlier run instead of querying verifiers.
    #[arg(long)]
    pub verdicts_in: Option<PathBuf>,
    #[arg(long)]
    pub failures: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct GateInputs {
    /// Labeled item store.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum GateCommand {
    /// Sample audit questions and lay out the batches.
    Plan {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record judgments from the command line or a JSONL file.
    Judge(JudgeArgs),
    /// Show gate progress.
    Status {
        #[command(flatten)]
        inputs: GateInputs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Write final gate decisions; fails while any gate is pending.
    Decide {
        #[command(flatten)]
        inputs: GateInputs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    #[arg(long)]
    pub judgments: PathBuf,
    /// JSONL of judgments to append.
    #[arg(long, conflicts_with_all = ["item", "annotator", "label"])]
    pub batch: Option<PathBuf>,
    #[arg(long, requires_all = ["annotator", "label"])]
    pub item: Option<String>,
    #[arg(long)]
    pub annotator: Option<String>,
    #[arg(long)]
    pub label: Option<bool>,
    /// RFC 3339 timestamp; defaults to now.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub inputs: GateInputs,
    /// Decisions written by `gate decide`.
    #[arg(long)]
    pub gate: PathBuf,
    #[arg(long)]
    pub out_store: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
    pub store: Option<PathBuf>,
    /// Use a bundled fixture instead of a store (`table3`).
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum FixtureCommand {
    /// The published training-data distribution as a labeled store.
    Table3 {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    #[arg(long)]
    pub rollouts: PathBuf,
    /// Gold labels as `{"item_id", "label"}` lines.
    #[arg(long, required_unless_present = "store")]
    pub gold: Option<PathBuf>,
    /// Take gold labels from a labeled store instead.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Fluency reports from `qpc fluency`; heuristics are run when absent.
    #[arg(long)]
    pub fluency: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FluencyArgs {
    #[arg(long)]
    pub rollouts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// heuristic, judge or union. Overrides the config.
    #[arg(long)]
    pub gate_mode: Option<GateMode>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// Groups as `{"group_id", "lengths", "advantages"}` lines.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// inner, inter or balanced[:eta]. Overrides the config.
    #[arg(long)]
    pub scheme: Option<WeightScheme>,
}

#[derive(Debug, Args)]
pub struct BokArgs {
    /// Pool JSONL, optionally labeled as `NAME=PATH`. Repeat per reward model.
    #[arg(long = "pools", required = true)]
    pub pools: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "expected_uniform")]
    pub tie: TiePolicy,
    /// Also estimate curves by sampling this many subsets per k.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Drop pools whose candidates are all correct or all wrong.
    #[arg(long)]
    pub filter_trivial: bool,
    /// Also write an SVG plot of the mean curves.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub inputs: GateInputs,
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Static UI bundle served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Reveal the combination of each item to annotators.
    #[arg(long)]
    pub show_combination: bool,
}

#[derive(Debug, Subcommand)]
pub enum ReplayCommand {
    /// Write the per-file digests of a run directory.
    Record {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two runs, each a directory or a digest file from `record`.
    Verify { left: PathBuf, right: PathBuf },
}
