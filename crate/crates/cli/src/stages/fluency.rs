use qpc_core::fluency::{
    gate_decision, heuristic_scan, judge_scan, FluencyError, FluencyReport, GateMode,
};
use qpc_core::reward::Rollout;
use qpc_llmio::Completion;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_records, write_records};
use crate::args::FluencyArgs;
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::runlog::RunLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencyLine {
    pub item_id: String,
    pub group_index: u32,
    pub report: FluencyReport,
}

pub async fn run(
    cfg: &LoadedConfig,
    args: &FluencyArgs,
    client: Option<&dyn Completion>,
) -> Result<Vec<FluencyLine>> {
    let mut log = RunLog::new("fluency", cfg);
    log.input(&args.rollouts)?;
    let settings = &cfg.config.fluency;
    let mode = args.gate_mode.unwrap_or(settings.mode);
    let rollouts: Vec<Rollout> = read_records(&args.rollouts)?;
    let judge = if mode == GateMode::HeuristicOnly {
        None
    } else {
        let provider = settings
            .judge_provider
            .clone()
            .ok_or_else(|| CliError::Config(format!("fluency mode {mode} needs judge_provider")))?;
        cfg.require_providers([provider.clone()])?;
        let client =
            client.ok_or_else(|| CliError::Config("fluency judge needs an LLM client".into()))?;
        Some((provider, client, cfg.templates()?))
    };

    let mut lines = Vec::with_capacity(rollouts.len());
    let mut judge_failures = 0usize;
    for r in &rollouts {
        let heuristic = heuristic_scan(&r.generation, &settings.thresholds);
        let judged = match &judge {
            Some((provider, client, templates)) => {
                match judge_scan(
                    &r.generation,
                    *client,
                    provider,
                    templates,
                    &cfg.config.verifier.params,
                )
                .await
                {
                    Ok(report) => Some(report),
                    Err(
                        e @ (FluencyError::JudgeUnavailable(_)
                        | FluencyError::UnparseableJudgment(_)),
                    ) if mode == GateMode::Union => {
                        // the heuristic layer alone still gates the rollout
                        tracing::warn!(item = %r.item_id, error = %e, "fluency judge failed; using heuristics");
                        judge_failures += 1;
                        None
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            None => None,
        };
        let report = match (mode, &judged) {
            (GateMode::Union, None) => heuristic,
            _ => gate_decision(Some(&heuristic), judged.as_ref(), mode)?,
        };
        lines.push(FluencyLine {
            item_id: r.item_id.clone(),
            group_index: r.group_index,
            report,
        });
    }
    write_records(&args.out, &lines)?;
    log.output(&args.out)?;
    let failed = lines.iter().filter(|l| !l.report.pass).count();
    log.summary(json!({
        "rollouts": lines.len(),
        "flagged": failed,
        "mode": mode.to_string(),
        "judge_failures": judge_failures,
    }));
    log.finish(&args.out)?;
    Ok(lines)
}
