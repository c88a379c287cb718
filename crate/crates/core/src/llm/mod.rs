//! Chat-model players: prompt rendering, option permutation, response parsing,
//! the chat-completions client and the robustness-variant grid.

pub mod agent;
pub mod client;
pub mod parse;
pub mod permute;
pub mod prompt;
pub mod variants;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent::{LlmAgent, MAX_REASKS};
pub use client::{chat_complete, ChatBackend, ChatClient, ChatEndpointConfig, API_BASE_ENV, API_KEY_ENV};
pub use parse::{parse_response, ParsedResponse};
pub use permute::{permute_options, Permutation};
pub use prompt::{build_decision_prompt, build_system_prompt, render_template, PromptBundle, PromptContext, PromptSet};
pub use variants::{generate_variants, ContextKind, ScoreTransform, VariantSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("template: {0}")]
    Template(String),
    #[error("history holds {found} trials but round {round} needs {expected}")]
    History { round: u32, expected: usize, found: usize },
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error("choice {value} is outside {lo}-{hi}")]
    Range { value: i64, lo: i64, hi: i64 },
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }
}
