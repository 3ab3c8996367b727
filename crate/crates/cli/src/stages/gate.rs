use std::collections::BTreeMap;
use std::path::Path;

use qpc_core::gate::{
    evaluate_gates, pending_items, sample_audit_plan, AuditPlan, GateDecision, GateError,
    GateState, HumanJudgment, JudgmentLog,
};
use qpc_core::store::read_store;
use qpc_core::{Label, LabelProvenance, QpcItem};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_json, read_records, write_json};
use crate::args::{GateInputs, JudgeArgs};
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::runlog::RunLog;

/// Everything the gate stages derive from the store, plan and judgment log.
#[derive(Debug)]
pub struct GateView {
    pub items: Vec<QpcItem>,
    pub plan: AuditPlan,
    pub log: JudgmentLog,
}

impl GateView {
    pub fn load(inputs: &GateInputs) -> Result<Self> {
        Ok(GateView {
            items: read_store(&inputs.store)?,
            plan: read_json(&inputs.plan)?,
            log: JudgmentLog::open(&inputs.judgments)?,
        })
    }

    pub fn silver(&self) -> BTreeMap<String, Label> {
        silver_labels(&self.items)
    }

    pub fn states(&self) -> Vec<GateState> {
        evaluate_gates(&self.plan, &self.log.human_labels(), &self.silver())
    }

    /// Items of sampled questions that still need a human label, by question.
    pub fn test_queue(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for item in &self.items {
            if self.plan.is_sampled(&item.question_id)
                && item.label_provenance != LabelProvenance::Human
            {
                out.entry(item.question_id.clone())
                    .or_default()
                    .push(item.item_id.clone());
            }
        }
        out
    }

    pub fn pending(&self, states: &[GateState]) -> Vec<String> {
        pending_items(&self.plan, states, self.log.judgments(), &self.test_queue())
    }
}

pub fn silver_labels(items: &[QpcItem]) -> BTreeMap<String, Label> {
    items
        .iter()
        .filter(|i| i.label_provenance == LabelProvenance::LlmSilver)
        .filter_map(|i| Some((i.item_id.clone(), i.label?)))
        .collect()
}

/// Serialized gate status: one state per combination plus queue size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStatus {
    pub states: Vec<GateState>,
    pub pending_items: usize,
    pub all_decided: bool,
}

impl GateStatus {
    pub fn of(view: &GateView) -> Self {
        let states = view.states();
        GateStatus {
            pending_items: view.pending(&states).len(),
            all_decided: states.iter().all(|s| s.decision != GateDecision::Pending),
            states,
        }
    }
}

pub fn plan(cfg: &LoadedConfig, store: &Path, out: &Path) -> Result<AuditPlan> {
    let mut log = RunLog::new("gate-plan", cfg);
    log.input(store)?;
    let items = read_store(store)?;
    let plan = sample_audit_plan(&items, &cfg.config.audit, cfg.config.seed)?;
    write_json(out, &plan)?;
    log.output(out)?;
    log.summary(json!({
        "questions": plan.question_count,
        "sampled_questions": plan.sampled_questions.len(),
        "combinations": plan.combinations.len(),
    }));
    log.finish(out)?;
    Ok(plan)
}

pub fn judge(args: &JudgeArgs) -> Result<usize> {
    let mut log = JudgmentLog::open(&args.judgments)?;
    let incoming = match (&args.batch, &args.item) {
        (Some(path), _) => read_records::<HumanJudgment>(path)?,
        (None, Some(item)) => vec![HumanJudgment {
            item_id: item.clone(),
            annotator_id: args.annotator.clone().expect("clap requires annotator"),
            label: Label::from(args.label.expect("clap requires label")),
            timestamp: args
                .timestamp
                .clone()
                .unwrap_or_else(|| chrono::Utc::now().to_rfc3339()),
        }],
        (None, None) => return Err(CliError::Data("give --batch or --item".into())),
    };
    let n = incoming.len();
    for j in incoming {
        log.append(j)?;
    }
    Ok(n)
}

pub fn status(inputs: &GateInputs, out: Option<&Path>, as_json: bool) -> Result<GateStatus> {
    let view = GateView::load(inputs)?;
    let status = GateStatus::of(&view);
    if let Some(out) = out {
        write_json(out, &status)?;
    }
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&status).expect("status serializes")
        );
    } else {
        print!("{}", render_status(&view.plan, &status));
    }
    Ok(status)
}

pub fn render_status(plan: &AuditPlan, status: &GateStatus) -> String {
    let mut out = format!(
        "{:<48} {:>5} {:>7} {:>5} {:>11}  {}\n",
        "combination", "batch", "checked", "agree", "consistency", "decision"
    );
    for (cp, s) in plan.combinations.iter().zip(&status.states) {
        out.push_str(&format!(
            "{:<48} {:>5} {:>7} {:>5} {:>11.3}  {:?}\n",
            cp.combination.canonical(),
            s.batch_index,
            s.checked,
            s.agree,
            s.consistency,
            s.decision
        ));
    }
    out.push_str(&format!("pending items: {}\n", status.pending_items));
    out
}

pub fn decide(cfg: &LoadedConfig, inputs: &GateInputs, out: &Path) -> Result<Vec<GateState>> {
    let mut log = RunLog::new("gate-decide", cfg);
    log.input(&inputs.store)?;
    log.input(&inputs.plan)?;
    log.input(&inputs.judgments)?;
    let view = GateView::load(inputs)?;
    let states = view.states();
    let pending: Vec<String> = states
        .iter()
        .filter(|s| s.decision == GateDecision::Pending)
        .map(|s| s.combination.canonical())
        .collect();
    if !pending.is_empty() {
        return Err(GateError::UndecidedGate {
            combinations: pending,
        }
        .into());
    }
    write_json(out, &states)?;
    log.output(out)?;
    let accepted = states
        .iter()
        .filter(|s| s.decision == GateDecision::Accepted)
        .count();
    log.summary(json!({"accepted": accepted, "dropped": states.len() - accepted}));
    log.finish(out)?;
    Ok(states)
}
