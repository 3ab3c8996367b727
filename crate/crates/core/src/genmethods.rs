//! Prompt construction for the proof-variant generation methods and the
//! rule-based naive negatives.

mod mask;
mod naive;
pub mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Label, Method, QuestionRecord, Source};
use crate::seed::{sha256_hex, Seed};

pub use mask::{
    apply_mask, assemble_mask_completion, paragraphs, placeholder, plan_mask, MaskPlan,
    DEFAULT_MASK_FRACTION, PLACEHOLDER_TOKEN,
};
pub use naive::{make_naive_negative, NaiveKind};
pub use templates::TemplateSet;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("proof text is empty")]
    EmptyProof,
    #[error("question statement is empty")]
    EmptyStatement,
    #[error("proof has {paragraphs} paragraph(s); masking needs at least 3")]
    TooShort { paragraphs: usize },
    #[error("mask fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("mask plan does not fit this proof: {0}")]
    PlanMismatch(String),
    #[error("template error: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    Wording,
    Translate,
}

/// One prompt to send to a generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub request_id: String,
    pub method: Method,
    pub source: Source,
    pub target_model: String,
    pub prompt: String,
    pub source_question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_proof_hash: Option<String>,
    pub seed: Seed,
    pub template_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_plan: Option<MaskPlan>,
    /// Label the output inherits from its input, for content-preserving methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_label: Option<Label>,
}

/// Builds generation requests for one target model from a template set.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    templates: TemplateSet,
    target_model: String,
    translate_language: String,
}

impl PromptBuilder {
    pub fn new(target_model: impl Into<String>) -> Self {
        PromptBuilder {
            templates: TemplateSet::builtin(),
            target_model: target_model.into(),
            translate_language: "English".to_owned(),
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_translate_language(mut self, language: impl Into<String>) -> Self {
        self.translate_language = language.into();
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn target_model(&self) -> &str {
        &self.target_model
    }

    pub fn build_rephrase(
        &self,
        q: &QuestionRecord,
        proof: &str,
    ) -> Result<GenerationRequest, GenError> {
        check_inputs(q, Some(proof))?;
        let prompt = self.templates.render(
            templates::REPHRASE,
            &[("question", &q.statement), ("proof", proof)],
        )?;
        Ok(self.request(Method::Rephrase, q, Some(proof), prompt, None, None))
    }

    pub fn build_proof(&self, q: &QuestionRecord) -> Result<GenerationRequest, GenError> {
        check_inputs(q, None)?;
        let prompt = self
            .templates
            .render(templates::PROOF, &[("question", &q.statement)])?;
        Ok(self.request(Method::Proof, q, None, prompt, None, None))
    }

    pub fn build_mask_completion(
        &self,
        q: &QuestionRecord,
        proof: &str,
        plan: &MaskPlan,
    ) -> Result<GenerationRequest, GenError> {
        check_inputs(q, Some(proof))?;
        let masked = apply_mask(proof, plan)?;
        let gaps = plan.masked_indices.len().to_string();
        let prompt = self.templates.render(
            templates::MASK_COMPLETION,
            &[
                ("question", &q.statement),
                ("masked_proof", &masked),
                ("gap_count", &gaps),
            ],
        )?;
        Ok(self.request(
            Method::MaskCompletion,
            q,
            Some(proof),
            prompt,
            Some(plan.clone()),
            None,
        ))
    }

    /// Content-preserving rewrite. `inherited` is the label of the input
    /// proof, which the output is expected to keep.
    pub fn build_augment(
        &self,
        q: &QuestionRecord,
        proof: &str,
        mode: AugmentMode,
        inherited: Option<Label>,
    ) -> Result<GenerationRequest, GenError> {
        check_inputs(q, Some(proof))?;
        let (method, prompt) = match mode {
            AugmentMode::Wording => (
                Method::Augment,
                self.templates.render(
                    templates::AUGMENT_WORDING,
                    &[("question", &q.statement), ("proof", proof)],
                )?,
            ),
            AugmentMode::Translate => (
                Method::Translate,
                self.templates.render(
                    templates::AUGMENT_TRANSLATE,
                    &[
                        ("question", &q.statement),
                        ("proof", proof),
                        ("language", &self.translate_language),
                    ],
                )?,
            ),
        };
        Ok(self.request(method, q, Some(proof), prompt, None, inherited))
    }

    fn request(
        &self,
        method: Method,
        q: &QuestionRecord,
        proof: Option<&str>,
        prompt: String,
        mask_plan: Option<MaskPlan>,
        expected_label: Option<Label>,
    ) -> GenerationRequest {
        let proof_hash = proof.map(sha256_hex);
        let seed = Seed::derive(
            "gen",
            &[
                &q.question_id,
                method.as_str(),
                &self.target_model,
                proof_hash.as_deref().unwrap_or("-"),
            ],
        );
        GenerationRequest {
            request_id: Seed::derive("request", &[&seed.hex(), &sha256_hex(&prompt)]).hex(),
            method,
            source: q.source,
            target_model: self.target_model.clone(),
            prompt,
            source_question_id: q.question_id.clone(),
            source_proof_hash: proof_hash,
            seed,
            template_version: self.templates.version().to_owned(),
            mask_plan,
            expected_label,
        }
    }
}

fn check_inputs(q: &QuestionRecord, proof: Option<&str>) -> Result<(), GenError> {
    if q.statement.trim().is_empty() {
        return Err(GenError::EmptyStatement);
    }
    if proof.is_some_and(|p| p.trim().is_empty()) {
        return Err(GenError::EmptyProof);
    }
    Ok(())
}

/// Markers that identify the instruction block of a content-preserving prompt.
pub const PRESERVATION_INSTRUCTION: &str = "while preserving its content exactly";
