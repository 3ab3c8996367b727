//! HTTP API for the human audit loop.
//!
//! Item payloads never carry the silver label: annotators judge blind, and
//! agreement is only visible in aggregate through the gate endpoints.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qpc_core::gate::{GateDecision, GateError, GateState, HumanJudgment};
use qpc_core::{Label, QuestionRecord};
use serde::{Deserialize, Serialize};

use crate::args::ServeArgs;
use crate::error::{CliError, Result};
use crate::stages::gate::{GateStatus, GateView};
use crate::stages::read_questions;

pub struct AuditState {
    view: GateView,
    questions: BTreeMap<String, QuestionRecord>,
    index: BTreeMap<String, usize>,
    show_combination: bool,
}

pub type SharedState = Arc<Mutex<AuditState>>;

impl AuditState {
    pub fn new(
        view: GateView,
        questions: BTreeMap<String, QuestionRecord>,
        show_combination: bool,
    ) -> Self {
        let index = view
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| (item.item_id.clone(), i))
            .collect();
        AuditState {
            view,
            questions,
            index,
            show_combination,
        }
    }

    pub fn load(args: &ServeArgs) -> Result<Self> {
        Ok(Self::new(
            GateView::load(&args.inputs)?,
            read_questions(&args.questions)?,
            args.show_combination,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Part of an open audit batch of a combination.
    Audit,
    /// Needs a human label for the test set.
    TestLabel,
}

/// What an annotator sees before judging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub item_id: String,
    pub question_id: String,
    pub statement: String,
    pub proof: String,
    pub purpose: Purpose,
    pub batch_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub item: Option<ItemView>,
    pub remaining: usize,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub annotator: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgmentIn {
    pub item_id: String,
    pub annotator_id: String,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub recorded: bool,
    pub remaining: usize,
    /// Gate of the item's combination after this judgment, for audited items.
    pub gate: Option<GateState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationProgress {
    pub combination: String,
    pub batch_index: usize,
    pub batch_count: usize,
    /// Items exposed in the current batch and how many are judged.
    pub exposed: usize,
    pub judged: usize,
    pub threshold: f64,
    pub checked: usize,
    pub consistency: f64,
    pub decision: GateDecision,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn lock(state: &SharedState) -> std::sync::MutexGuard<'_, AuditState> {
    state.lock().unwrap_or_else(|p| p.into_inner())
}

async fn next_item(State(state): State<SharedState>, Query(q): Query<NextQuery>) -> Json<NextItem> {
    let s = lock(&state);
    let states = s.view.states();
    let pending = s.view.pending(&states);
    let judged_by_me = |id: &str| s.view.log.contains(id, &q.annotator);
    let pending: Vec<&String> = pending.iter().filter(|id| !judged_by_me(id)).collect();
    let item = pending.first().map(|id| {
        let item = &s.view.items[s.index[*id]];
        let audit = s
            .view
            .plan
            .combinations
            .iter()
            .zip(&states)
            .find(|(cp, st)| {
                st.decision == GateDecision::Pending && cp.exposed(st.batch_index).contains(id)
            });
        ItemView {
            item_id: item.item_id.clone(),
            question_id: item.question_id.clone(),
            statement: s
                .questions
                .get(&item.question_id)
                .map(|q| q.statement.clone())
                .unwrap_or_default(),
            proof: item.proof.clone(),
            purpose: if audit.is_some() {
                Purpose::Audit
            } else {
                Purpose::TestLabel
            },
            batch_index: audit.map(|(_, st)| st.batch_index),
            combination: s.show_combination.then(|| item.combination.canonical()),
        }
    });
    Json(NextItem {
        item,
        remaining: pending.len(),
    })
}

async fn submit(
    State(state): State<SharedState>,
    Json(j): Json<JudgmentIn>,
) -> std::result::Result<Json<JudgmentAck>, ApiError> {
    let mut s = lock(&state);
    let Some(&idx) = s.index.get(&j.item_id) else {
        return Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("unknown item {}", j.item_id),
        ));
    };
    if j.annotator_id.trim().is_empty() {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            "annotator_id is empty".into(),
        ));
    }
    let judgment = HumanJudgment {
        item_id: j.item_id.clone(),
        annotator_id: j.annotator_id.clone(),
        label: Label::from(j.label),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    match s.view.log.append(judgment) {
        Ok(()) => {}
        Err(e @ GateError::DuplicateJudgment { .. }) => {
            return Err(ApiError(StatusCode::CONFLICT, e.to_string()))
        }
        Err(e) => return Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
    let combination = s.view.items[idx].combination.clone();
    let states = s.view.states();
    let gate = states
        .iter()
        .find(|st| st.combination == combination)
        .cloned();
    let remaining = s.view.pending(&states).len();
    Ok(Json(JudgmentAck {
        recorded: true,
        remaining,
        gate,
    }))
}

async fn combinations(State(state): State<SharedState>) -> Json<Vec<CombinationProgress>> {
    let s = lock(&state);
    let states = s.view.states();
    let schedule = &s.view.plan.schedule;
    let progress = s
        .view
        .plan
        .combinations
        .iter()
        .zip(&states)
        .map(|(cp, st)| {
            let exposed = cp.exposed(st.batch_index);
            CombinationProgress {
                combination: cp.combination.canonical(),
                batch_index: st.batch_index,
                batch_count: schedule.batch_volumes.len(),
                exposed: exposed.len(),
                judged: exposed
                    .iter()
                    .filter(|id| s.view.log.judgments().iter().any(|j| &j.item_id == *id))
                    .count(),
                threshold: schedule.batch_thresholds[st.batch_index],
                checked: st.checked,
                consistency: st.consistency,
                decision: st.decision,
            }
        })
        .collect();
    Json(progress)
}

async fn gate_status(State(state): State<SharedState>) -> Json<GateStatus> {
    let s = lock(&state);
    Json(GateStatus::of(&s.view))
}

pub fn router(state: SharedState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/next-item", get(next_item))
        .route("/api/judgment", post(submit))
        .route("/api/combinations", get(combinations))
        .route("/api/gate-status", get(gate_status))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(args: &ServeArgs) -> Result<()> {
    let state = Arc::new(Mutex::new(AuditState::load(args)?));
    let listener = tokio::net::TcpListener::bind(args.addr)
        .await
        .map_err(|e| CliError::io(args.addr.to_string(), e))?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::io(args.addr.to_string(), e))?;
    eprintln!("audit-serve listening on http://{addr}");
    axum::serve(listener, router(state, args.ui_dir.clone()))
        .await
        .map_err(|e| CliError::io(addr.to_string(), e))
}
