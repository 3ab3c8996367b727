use qpc_core::weights::{compute_weights, weighted_objective_demo, WeightScheme};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_records, write_records};
use crate::args::WeightsArgs;
use crate::config::LoadedConfig;
use crate::error::Result;
use crate::runlog::RunLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGroup {
    #[serde(default)]
    pub group_id: Option<String>,
    pub lengths: Vec<u64>,
    #[serde(default)]
    pub advantages: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLine {
    pub group_id: Option<String>,
    pub scheme: WeightScheme,
    /// Per-token weight of each sample.
    pub weights: Vec<f64>,
    pub mass: f64,
    /// Weighted sum of advantages over all tokens, when advantages are given.
    pub objective: Option<f64>,
}

pub fn weigh(group: &WeightGroup, scheme: WeightScheme) -> Result<WeightLine> {
    let w = compute_weights(&group.lengths, scheme)?;
    let objective = match &group.advantages {
        Some(adv) => Some(weighted_objective_demo(adv, &group.lengths, scheme)?),
        None => None,
    };
    Ok(WeightLine {
        group_id: group.group_id.clone(),
        scheme,
        mass: w.mass(),
        weights: w.weights,
        objective,
    })
}

pub fn run(cfg: &LoadedConfig, args: &WeightsArgs) -> Result<Vec<WeightLine>> {
    let mut log = RunLog::new("weights", cfg);
    log.input(&args.input)?;
    let scheme = args.scheme.unwrap_or(cfg.config.weights.scheme);
    let groups: Vec<WeightGroup> = read_records(&args.input)?;
    let lines = groups
        .iter()
        .map(|g| weigh(g, scheme))
        .collect::<Result<Vec<_>>>()?;
    write_records(&args.out, &lines)?;
    log.output(&args.out)?;
    log.summary(json!({"groups": lines.len(), "scheme": scheme.to_string()}));
    log.finish(&args.out)?;
    Ok(lines)
}
