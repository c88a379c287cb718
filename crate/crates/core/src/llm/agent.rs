//! A player backed by a chat model.

use std::sync::Arc;

use rand::Rng;

use super::parse::{canonical_choice, parse_response};
use super::permute::Permutation;
use super::prompt::{build_decision_prompt, build_system_prompt, PromptContext};
use super::variants::VariantSpec;
use super::{ChatBackend, LlmError, Message};
use crate::agents::{Agent, AgentError, Decision};
use crate::engine::{BetLevel, Observation, TaskConfig, TrialRecord};
use crate::rng::SessionRng;

/// Extra requests after an unusable reply before the round is forfeited.
pub const MAX_REASKS: u32 = 3;

pub struct LlmAgent {
    backend: Arc<dyn ChatBackend>,
    ctx: PromptContext,
    system: String,
    reminder: String,
    levels: Vec<BetLevel>,
    forfeits: u32,
    bad_replies: u32,
}

impl LlmAgent {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        config: TaskConfig,
        variant: VariantSpec,
        permutation: Permutation,
    ) -> Result<Self, LlmError> {
        let ctx = PromptContext::new(config, variant, permutation)?;
        let system = build_system_prompt(&ctx)?;
        let reminder = ctx.reminder()?;
        let levels = ctx.bet_levels();
        Ok(LlmAgent { backend, ctx, system, reminder, levels, forfeits: 0, bad_replies: 0 })
    }

    pub fn system_prompt(&self) -> &str {
        &self.system
    }

    pub fn context(&self) -> &PromptContext {
        &self.ctx
    }

    /// Rounds decided by a random fill-in after every request failed to parse.
    pub fn forfeits(&self) -> u32 {
        self.forfeits
    }

    /// Replies that could not be parsed or were out of range.
    pub fn bad_replies(&self) -> u32 {
        self.bad_replies
    }
}

impl Agent for LlmAgent {
    fn id(&self) -> String {
        format!("llm:{}", self.backend.model_name())
    }

    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        let task = self.ctx.task();
        if obs.task() != task {
            return Err(AgentError::Unsupported { agent: self.id(), task: obs.task() });
        }
        let backend_err = |e: LlmError| AgentError::Backend(e.to_string());
        let decision = build_decision_prompt(&self.ctx, history, obs).map_err(backend_err)?;
        let order = Some(self.ctx.permutation.order());
        let mut prompt = decision.clone();
        for _ in 0..=MAX_REASKS {
            let messages = [Message::system(self.system.clone()), Message::user(prompt.clone())];
            let reply = self.backend.complete(&messages, self.ctx.variant.temperature).map_err(backend_err)?;
            match parse_response(&reply, task, &self.ctx.permutation, &self.levels) {
                Ok(parsed) => {
                    return Ok(Decision {
                        choice: parsed.choice,
                        options_order: order,
                        reasoning: parsed.reasoning,
                        forfeit: false,
                    })
                }
                Err(e) => {
                    self.bad_replies += 1;
                    log::debug!("round {}: {e}", obs.round());
                    prompt = format!("{decision}\n\n{}", self.reminder);
                }
            }
        }
        self.forfeits += 1;
        let k = rng.gen_range(0..self.ctx.permutation.n);
        Ok(Decision {
            choice: canonical_choice(task, k, &self.levels),
            options_order: order,
            reasoning: None,
            forfeit: true,
        })
    }
}
