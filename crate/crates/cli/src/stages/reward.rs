use std::collections::BTreeMap;

use qpc_core::fluency::{gate_decision, heuristic_scan, GateMode};
use qpc_core::reward::{group_advantages, score_rollout, RewardRecord, Rollout};
use qpc_core::store::read_store;
use qpc_core::Label;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::fluency::FluencyLine;
use super::{read_records, write_records};
use crate::args::RewardArgs;
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::runlog::RunLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub item_id: String,
    pub label: Label,
}

/// A scored rollout with its group-normalized advantage. Rollouts of the same
/// item form a group; a group of one has no advantage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRollout {
    #[serde(flatten)]
    pub record: RewardRecord,
    pub group_index: u32,
    pub advantage: Option<f64>,
}

pub fn score_all(
    rollouts: &[Rollout],
    gold: &BTreeMap<String, Label>,
    fluent: impl Fn(usize, &Rollout) -> Result<bool>,
) -> Result<Vec<ScoredRollout>> {
    let mut out = Vec::with_capacity(rollouts.len());
    for (i, r) in rollouts.iter().enumerate() {
        let g = *gold
            .get(&r.item_id)
            .ok_or_else(|| CliError::Data(format!("no gold label for item {}", r.item_id)))?;
        out.push(ScoredRollout {
            record: score_rollout(r, g, fluent(i, r)?),
            group_index: r.group_index,
            advantage: None,
        });
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rollouts.iter().enumerate() {
        groups.entry(&r.item_id).or_default().push(i);
    }
    for idx in groups.values().filter(|g| g.len() > 1) {
        let rewards: Vec<f64> = idx
            .iter()
            .map(|&i| f64::from(out[i].record.reward))
            .collect();
        for (&i, a) in idx.iter().zip(group_advantages(&rewards)?) {
            out[i].advantage = Some(a);
        }
    }
    Ok(out)
}

pub fn run(cfg: &LoadedConfig, args: &RewardArgs) -> Result<Vec<ScoredRollout>> {
    let mut log = RunLog::new("reward", cfg);
    log.input(&args.rollouts)?;
    let rollouts: Vec<Rollout> = read_records(&args.rollouts)?;
    let gold: BTreeMap<String, Label> = match (&args.gold, &args.store) {
        (Some(path), _) => {
            log.input(path)?;
            read_records::<GoldLabel>(path)?
                .into_iter()
                .map(|g| (g.item_id, g.label))
                .collect()
        }
        (None, Some(dir)) => {
            log.input(dir)?;
            read_store(dir)?
                .into_iter()
                .filter_map(|i| Some((i.item_id, i.label?)))
                .collect()
        }
        (None, None) => return Err(CliError::Data("give --gold or --store".into())),
    };
    let reports: Option<BTreeMap<(String, u32), bool>> = match &args.fluency {
        Some(path) => {
            log.input(path)?;
            Some(
                read_records::<FluencyLine>(path)?
                    .into_iter()
                    .map(|l| ((l.item_id, l.group_index), l.report.pass))
                    .collect(),
            )
        }
        None => None,
    };
    let settings = &cfg.config.fluency;
    if reports.is_none() && settings.mode != GateMode::HeuristicOnly {
        return Err(CliError::Config(format!(
            "fluency mode {} needs --fluency reports from `qpc fluency`",
            settings.mode
        )));
    }
    let scored = score_all(&rollouts, &gold, |_, r| match &reports {
        Some(map) => map
            .get(&(r.item_id.clone(), r.group_index))
            .copied()
            .ok_or_else(|| {
                CliError::Data(format!(
                    "no fluency report for {}#{}",
                    r.item_id, r.group_index
                ))
            }),
        None => {
            let h = heuristic_scan(&r.generation, &settings.thresholds);
            Ok(gate_decision(Some(&h), None, GateMode::HeuristicOnly)?.pass)
        }
    })?;
    write_records(&args.out, &scored)?;
    log.output(&args.out)?;
    let total: u32 = scored.iter().map(|s| u32::from(s.record.reward)).sum();
    log.summary(json!({"rollouts": scored.len(), "rewarded": total}));
    log.finish(&args.out)?;
    Ok(scored)
}
