#![allow(dead_code)]

pub mod scripted;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/minicorpus")
}

pub fn qpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpc"))
        .args(args)
        .output()
        .expect("qpc binary runs")
}

pub fn qpc_ok(args: &[&str]) -> String {
    let out = qpc(args);
    assert!(
        out.status.success(),
        "qpc {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

pub mod pipeline {
    use std::collections::{BTreeMap, BTreeSet};
    use std::path::{Path, PathBuf};

    use qpc_core::gate::{AuditPlan, GateDecision, GateState, HumanJudgment};
    use qpc_core::jsonl::write_jsonl;
    use qpc_core::store::read_store;
    use qpc_core::{Label, LabelProvenance, QpcItem, Split};

    use super::{fixture_dir, qpc_ok};

    pub const FIXED_TIME: &str = "2025-01-01T00:00:00Z";

    /// Scripted human agreement with the silver label per generating model.
    pub fn agreement_rate(combination: &str) -> f64 {
        if combination.contains("/model-a/") {
            0.95
        } else {
            0.60
        }
    }

    /// Agree on the n-th item (1-based) while the running agreement count is
    /// below `rate * n`, so every prefix tracks the target rate.
    pub fn scripted_labels(silver: &[Label], rate: f64) -> Vec<Label> {
        let mut agreed = 0usize;
        silver
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if (agreed as f64) < rate * (i + 1) as f64 - 1e-9 {
                    agreed += 1;
                    s
                } else {
                    Label::from(!s.as_bool())
                }
            })
            .collect()
    }

    /// Judgments for every audited item and every other item of a sampled
    /// question that lacks a human label.
    pub fn scripted_judgments(plan: &AuditPlan, items: &[QpcItem]) -> Vec<HumanJudgment> {
        let by_id: BTreeMap<&str, &QpcItem> =
            items.iter().map(|i| (i.item_id.as_str(), i)).collect();
        let mut out = Vec::new();
        let mut judged = BTreeSet::new();
        let judgment = |item_id: &str, label: Label| HumanJudgment {
            item_id: item_id.to_owned(),
            annotator_id: "scripted".into(),
            label,
            timestamp: FIXED_TIME.into(),
        };
        for cp in &plan.combinations {
            let silver: Vec<Label> = cp
                .items
                .iter()
                .map(|id| by_id[id.as_str()].label.expect("audited items are labeled"))
                .collect();
            let labels = scripted_labels(&silver, agreement_rate(&cp.combination.canonical()));
            for (id, label) in cp.items.iter().zip(labels) {
                judged.insert(id.clone());
                out.push(judgment(id, label));
            }
        }
        for item in items {
            if plan.is_sampled(&item.question_id)
                && item.label_provenance != LabelProvenance::Human
                && !judged.contains(&item.item_id)
            {
                out.push(judgment(&item.item_id, item.label.unwrap_or(Label::True)));
            }
        }
        out
    }

    pub struct PipelineRun {
        pub dir: PathBuf,
        pub digests: PathBuf,
        pub states: Vec<GateState>,
        pub split: Vec<QpcItem>,
    }

    impl PipelineRun {
        pub fn decision(&self, combination: &str) -> GateDecision {
            self.states
                .iter()
                .find(|s| s.combination.canonical() == combination)
                .unwrap_or_else(|| panic!("no gate for {combination}"))
                .decision
        }

        pub fn question_overlap(&self) -> usize {
            let questions = |s: Split| -> BTreeSet<&str> {
                self.split
                    .iter()
                    .filter(|i| i.split == s)
                    .map(|i| i.question_id.as_str())
                    .collect()
            };
            questions(Split::Train)
                .intersection(&questions(Split::Test))
                .count()
        }
    }

    /// gen, annotate, gate plan, scripted judgments, gate decide and split
    /// over the bundled mini-corpus in replay mode, inside `root/run`.
    pub fn run_pipeline(root: &Path) -> PipelineRun {
        let fx = fixture_dir();
        let questions = fx.join("questions.jsonl");
        let config = fx.join("config.json");
        let run = root.join("run");
        let p = |name: &str| run.join(name).to_string_lossy().into_owned();
        let q = questions.to_string_lossy().into_owned();
        let c = config.to_string_lossy().into_owned();
        let common = ["--config", c.as_str(), "--mode", "replay"];
        let with = |args: &[&str]| {
            let mut all: Vec<&str> = args.to_vec();
            all.extend_from_slice(&common);
            qpc_ok(&all)
        };

        with(&[
            "gen",
            "--questions",
            &q,
            "--store",
            &p("generated"),
            "--requests",
            &p("requests.jsonl"),
        ]);
        with(&[
            "annotate",
            "--questions",
            &q,
            "--store",
            &p("generated"),
            "--out-store",
            &p("annotated"),
            "--verdicts",
            &p("verdicts.jsonl"),
        ]);
        with(&[
            "gate",
            "plan",
            "--store",
            &p("annotated"),
            "--out",
            &p("plan.json"),
        ]);

        let plan: AuditPlan =
            serde_json::from_str(&std::fs::read_to_string(run.join("plan.json")).unwrap()).unwrap();
        let items = read_store(&run.join("annotated")).unwrap();
        let script = root.join("script.jsonl");
        write_jsonl(&script, &scripted_judgments(&plan, &items)).unwrap();
        with(&[
            "gate",
            "judge",
            "--judgments",
            &p("judgments.jsonl"),
            "--batch",
            &script.to_string_lossy(),
        ]);

        let gate = [
            "--store",
            &p("annotated"),
            "--plan",
            &p("plan.json"),
            "--judgments",
            &p("judgments.jsonl"),
        ];
        let gate_out = p("gate.json");
        let mut decide = vec!["gate", "decide"];
        decide.extend_from_slice(&gate);
        decide.extend_from_slice(&["--out", &gate_out]);
        let split_out = p("split");
        let mut split = vec!["split"];
        split.extend_from_slice(&gate);
        split.extend_from_slice(&["--gate", &gate_out, "--out-store", &split_out]);
        with(&decide);
        with(&split);

        let digests = root.join("digests.json");
        qpc_ok(&[
            "replay",
            "record",
            "--dir",
            &run.to_string_lossy(),
            "--out",
            &digests.to_string_lossy(),
        ]);
        let states: Vec<GateState> =
            serde_json::from_str(&std::fs::read_to_string(run.join("gate.json")).unwrap()).unwrap();
        PipelineRun {
            split: read_store(&run.join("split")).unwrap(),
            dir: run,
            digests,
            states,
        }
    }
}
