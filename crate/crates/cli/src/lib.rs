//! The `qpc` command: configuration, run manifests and one subcommand per
//! pipeline stage.

pub mod args;
pub mod config;
pub mod error;
pub mod runlog;
pub mod serve;
pub mod stages;
pub mod svg;

use std::sync::Arc;

use qpc_core::fluency::GateMode;
use qpc_llmio::{Completion, HttpTransport, LlmClient};

pub use args::Cli;
use args::{Command, FixtureCommand, GateCommand, ReplayCommand};
pub use config::{LoadedConfig, RunConfig};
pub use error::{CliError, Result};

fn live_client(cfg: &LoadedConfig) -> Result<LlmClient> {
    cfg.client(Arc::new(HttpTransport::new()))
}

/// Runs one parsed command with the HTTP transport.
pub async fn run(cli: Cli) -> Result<()> {
    let cfg = LoadedConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    run_with(cli.command, &cfg, None).await
}

/// Runs one command. `client` replaces the HTTP-backed client for stages
/// that talk to models.
pub async fn run_with(
    command: Command,
    cfg: &LoadedConfig,
    client: Option<&LlmClient>,
) -> Result<()> {
    let owned;
    let needs_client = match &command {
        Command::Gen(a) => !a.dry_run,
        Command::Annotate(_) => true,
        Command::Fluency(a) => {
            a.gate_mode.unwrap_or(cfg.config.fluency.mode) != GateMode::HeuristicOnly
        }
        _ => false,
    };
    let client = match client {
        Some(c) => Some(c),
        None if needs_client => {
            owned = live_client(cfg)?;
            Some(&owned)
        }
        None => None,
    };
    let completion = client.map(|c| c as &dyn Completion);
    match command {
        Command::Gen(a) => {
            let s = stages::gen::run(cfg, &a, client).await?;
            println!(
                "gen: {} request(s), {} generated, {} ground-truth, {} naive-negative item(s)",
                s.requests, s.generated, s.ground_truth, s.naive_negatives
            );
        }
        Command::Annotate(a) => {
            let s = stages::annotate::run(cfg, &a, completion).await?;
            println!(
                "annotate: {} item(s) checked, {} true, {} false, {} inconsistent",
                s.annotated, s.labeled_true, s.labeled_false, s.dropped
            );
        }
        Command::Gate(GateCommand::Plan { store, out }) => {
            let plan = stages::gate::plan(cfg, &store, &out)?;
            println!(
                "gate plan: {} of {} question(s) sampled, {} combination(s)",
                plan.sampled_questions.len(),
                plan.question_count,
                plan.combinations.len()
            );
        }
        Command::Gate(GateCommand::Judge(a)) => {
            let n = stages::gate::judge(&a)?;
            println!("gate judge: recorded {n} judgment(s)");
        }
        Command::Gate(GateCommand::Status { inputs, out, json }) => {
            stages::gate::status(&inputs, out.as_deref(), json)?;
        }
        Command::Gate(GateCommand::Decide { inputs, out }) => {
            let states = stages::gate::decide(cfg, &inputs, &out)?;
            for s in &states {
                println!("{} {:?} ({:.3})", s.combination, s.decision, s.consistency);
            }
        }
        Command::Split(a) => {
            let outcome = stages::split::run(cfg, &a)?;
            let count = |s: qpc_core::Split| outcome.items.iter().filter(|i| i.split == s).count();
            println!(
                "split: {} train, {} test, {} unassigned",
                count(qpc_core::Split::Train),
                count(qpc_core::Split::Test),
                count(qpc_core::Split::Unassigned)
            );
        }
        Command::Stats(a) => {
            stages::stats::run(&a)?;
        }
        Command::Fixture(FixtureCommand::Table3 { out }) => {
            let n = stages::stats::write_table3(&out)?;
            println!("fixture: wrote {n} item(s) to {}", out.display());
        }
        Command::Reward(a) => {
            let scored = stages::reward::run(cfg, &a)?;
            let rewarded = scored.iter().filter(|s| s.record.reward == 1).count();
            println!("reward: {rewarded} of {} rollout(s) rewarded", scored.len());
        }
        Command::Fluency(a) => {
            let lines = stages::fluency::run(cfg, &a, completion).await?;
            let flagged = lines.iter().filter(|l| !l.report.pass).count();
            println!("fluency: {flagged} of {} rollout(s) flagged", lines.len());
        }
        Command::Weights(a) => {
            let lines = stages::weights::run(cfg, &a)?;
            println!("weights: {} group(s)", lines.len());
        }
        Command::Bok(a) => {
            let bundle = stages::bok::run(cfg, &a)?;
            for m in &bundle.models {
                let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
                println!(
                    "bok: {} over {} pool(s): k=1 {:.4}, k=max {:.4}, oracle {:.4}",
                    m.model,
                    m.pools - m.dropped_trivial,
                    m.mean_exact.first().copied().unwrap_or(f64::NAN),
                    last(&m.mean_exact),
                    last(&m.mean_oracle)
                );
            }
        }
        Command::AuditServe(a) => serve::serve(&a).await?,
        Command::Replay(ReplayCommand::Record { dir, out }) => {
            let n = stages::replay::record(&dir, &out)?;
            println!(
                "replay record: {n} file digest(s) written to {}",
                out.display()
            );
        }
        Command::Replay(ReplayCommand::Verify { left, right }) => {
            let n = stages::replay::verify(&left, &right)?;
            println!("replay verify: {n} file(s) byte-identical");
        }
    }
    Ok(())
}
