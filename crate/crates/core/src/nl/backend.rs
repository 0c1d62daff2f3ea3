//! Client for an external model service speaking the translation contract:
//! `POST {utterance, context}` answered by `[{program, score}]`.

use super::translate::{TranslationCandidate, TranslationContext};
use crate::dsl::{parse_program, render_program, validate_with_model};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("translation backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("backend program rejected: {0}")]
    ProgramRejected(String),
}

#[derive(Serialize)]
struct Request<'a> {
    utterance: &'a str,
    context: &'a TranslationContext,
}

#[derive(Deserialize)]
struct Reply {
    program: String,
    score: f64,
}

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    url: String,
    timeout: Duration,
}

impl ExternalBackend {
    pub fn new(url: &str, timeout: Duration) -> Self {
        Self {
            url: url.to_string(),
            timeout,
        }
    }

    /// Posts the utterance and re-parses and re-validates every returned
    /// program against `context`.
    pub fn translate(&self, utterance: &str, context: &TranslationContext) -> Result<Vec<TranslationCandidate>, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut response = agent
            .post(&self.url)
            .send_json(Request { utterance, context })
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        parse_reply(&body, context)
    }
}

/// Decodes a backend reply body into candidates.
pub(crate) fn parse_reply(body: &str, context: &TranslationContext) -> Result<Vec<TranslationCandidate>, BackendError> {
    let replies: Vec<Reply> = serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    if replies.is_empty() {
        return Err(BackendError::MalformedResponse("empty candidate list".into()));
    }
    replies
        .into_iter()
        .map(|r| {
            if !r.score.is_finite() {
                return Err(BackendError::MalformedResponse(format!("score {}", r.score)));
            }
            let program = parse_program(&r.program).map_err(|e| BackendError::ProgramRejected(format!("`{}`: {e}", r.program)))?;
            validate_with_model(&program, &context.envelope, context.pose, &context.motion).map_err(|v| {
                let why: Vec<String> = v.iter().map(ToString::to_string).collect();
                BackendError::ProgramRejected(format!("`{}`: {}", r.program, why.join("; ")))
            })?;
            Ok(TranslationCandidate {
                rendered: render_program(&program),
                program,
                score: r.score.clamp(0.0, 1.0),
                corpus_entry_id: None,
                filled_slots: Vec::new(),
            })
        })
        .collect()
}
