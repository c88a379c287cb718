//! Rendering of task state into system and decision prompts.
//!
//! Template texts live in a versioned assets file; placeholders are written
//! `{name}` and every one must be supplied at render time.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::parse::cgt_option;
use super::permute::Permutation;
use super::variants::VariantSpec;
use super::LlmError;
use crate::engine::{
    BetLevel, Feedback, Item, Observation, OptionId, Outcome, Side, Stimulus, Task, TaskConfig, TrialRecord, WcstConfig,
};

const BUILTIN: &str = include_str!("../../assets/prompts.v1.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgtPrompts {
    pub system: String,
    pub clause: String,
    pub ask: String,
    pub reminder: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgtPrompts {
    pub system: String,
    pub choice_line: String,
    pub red_label: String,
    pub blue_label: String,
    pub clause: String,
    pub lucky: String,
    pub unlucky: String,
    pub gain: String,
    pub loss: String,
    pub ask: String,
    pub reminder: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WcstPrompts {
    pub system: String,
    pub card_line: String,
    pub item: String,
    pub clause: String,
    pub correct: String,
    pub failed: String,
    pub ask: String,
    pub reminder: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub version: u32,
    pub history_header: String,
    pub igt: IgtPrompts,
    pub cgt: CgtPrompts,
    pub wcst: WcstPrompts,
}

impl PromptSet {
    pub fn builtin() -> &'static PromptSet {
        static SET: OnceLock<PromptSet> = OnceLock::new();
        SET.get_or_init(|| Self::from_json(BUILTIN).expect("bundled prompt assets parse"))
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Template(format!("prompt assets: {e}")))
    }
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("valid regex"))
}

/// Substitutes `{name}` placeholders. A placeholder without a value is an error.
pub fn render_template(template: &str, values: &[(&str, String)]) -> Result<String, LlmError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for cap in placeholder().captures_iter(template) {
        let m = cap.get(0).expect("whole match");
        let name = &cap[1];
        let value = values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v)
            .ok_or_else(|| LlmError::Template(format!("unknown placeholder {{{name}}}")))?;
        out.push_str(&template[last..m.start()]);
        out.push_str(value);
        last = m.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// Everything a prompt depends on besides the trial history.
#[derive(Clone, Debug)]
pub struct PromptContext {
    pub config: TaskConfig,
    pub variant: VariantSpec,
    pub permutation: Permutation,
    pub prompts: PromptSet,
}

impl PromptContext {
    pub fn new(config: TaskConfig, variant: VariantSpec, permutation: Permutation) -> Result<Self, LlmError> {
        let task = config.task();
        if let TaskConfig::Cgt(c) = &config {
            if permutation.n != 2 * c.bet_levels.len() {
                return Err(LlmError::Config(format!(
                    "permutation over {} options, but {} bet levels give {}",
                    permutation.n,
                    c.bet_levels.len(),
                    2 * c.bet_levels.len()
                )));
            }
        } else if permutation.n != task.n_options() {
            return Err(LlmError::Config(format!("{task} has {} options, not {}", task.n_options(), permutation.n)));
        }
        if variant.score_transform != Default::default() && task == Task::Wcst {
            return Err(LlmError::Config("score transforms do not apply to the wcst".into()));
        }
        Ok(PromptContext { config, variant, permutation, prompts: PromptSet::builtin().clone() })
    }

    pub fn task(&self) -> Task {
        self.config.task()
    }

    pub fn bet_levels(&self) -> Vec<BetLevel> {
        match &self.config {
            TaskConfig::Cgt(c) => c.bet_levels.iter().filter_map(|f| BetLevel::from_fraction(*f)).collect(),
            _ => Vec::new(),
        }
    }

    fn points(&self, v: i64) -> String {
        self.variant.score_transform.display(v)
    }

    fn side_label(&self, side: Side) -> String {
        match side {
            Side::Red => self.prompts.cgt.red_label.clone(),
            Side::Blue => self.prompts.cgt.blue_label.clone(),
        }
    }

    /// 1-based label for IGT, position letter for WCST.
    fn option_label(&self, canonical: OptionId) -> String {
        let pos = self.permutation.position_of(canonical.index());
        match self.task() {
            Task::Wcst => OptionId::from_index(pos).expect("position below four").letter().to_string(),
            _ => (pos + 1).to_string(),
        }
    }

    /// Format reminder appended when a reply cannot be used.
    pub fn reminder(&self) -> Result<String, LlmError> {
        let max = (self.permutation.n - 1).to_string();
        let t = match self.task() {
            Task::Igt => &self.prompts.igt.reminder,
            Task::Cgt => &self.prompts.cgt.reminder,
            Task::Wcst => &self.prompts.wcst.reminder,
        };
        render_template(t, &[("max_choice", max)])
    }
}

fn wcst_description(
    template: &str,
    cfg: &WcstConfig,
    color: u8,
    shape: u8,
    number: u8,
    extra: &[(&str, String)],
) -> Result<String, LlmError> {
    let get = |v: &[String], i: u8, what: &str| {
        v.get(usize::from(i)).cloned().ok_or_else(|| LlmError::Config(format!("no {what} with index {i}")))
    };
    let count = *cfg
        .numbers
        .get(usize::from(number))
        .ok_or_else(|| LlmError::Config(format!("no number with index {number}")))?;
    let mut shape_name = get(&cfg.shapes, shape, "shape")?;
    if count != 1 {
        shape_name.push('s');
    }
    let mut values =
        vec![("number", count.to_string()), ("color", get(&cfg.colors, color, "color")?), ("shape", shape_name)];
    values.extend(extra.iter().cloned());
    render_template(template, &values)
}

fn describe_item(ctx: &PromptContext, cfg: &WcstConfig, item: &Item) -> Result<String, LlmError> {
    wcst_description(&ctx.prompts.wcst.item, cfg, item.color, item.shape, item.number, &[])
}

/// Task instructions, preceded by any context framing and persona text.
pub fn build_system_prompt(ctx: &PromptContext) -> Result<String, LlmError> {
    let p = &ctx.prompts;
    let body = match &ctx.config {
        TaskConfig::Igt(c) => render_template(&p.igt.system, &[("loan", ctx.points(c.loan))])?,
        TaskConfig::Cgt(c) => {
            let levels = ctx.bet_levels();
            let bet_list = levels.iter().map(|b| format!("{}%", b.percent())).collect::<Vec<_>>().join(", ");
            let lines = (0..ctx.permutation.n)
                .map(|pos| {
                    let opt = cgt_option(ctx.permutation.canonical_at(pos), &levels);
                    render_template(
                        &p.cgt.choice_line,
                        &[
                            ("index", pos.to_string()),
                            ("type", ctx.side_label(opt.side)),
                            ("percent", opt.bet.percent().to_string()),
                        ],
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            render_template(
                &p.cgt.system,
                &[
                    ("phase_len", c.phase_len.to_string()),
                    ("phase_start", ctx.points(c.phase_start)),
                    ("bet_list", bet_list),
                    ("choice_map", lines.join("\n")),
                    ("max_choice", (ctx.permutation.n - 1).to_string()),
                ],
            )?
        }
        TaskConfig::Wcst(c) => {
            let cards = (0..ctx.permutation.n)
                .map(|pos| {
                    let k = ctx.permutation.canonical_at(pos) as u8;
                    let label = OptionId::from_index(pos).expect("position below four").letter().to_string();
                    wcst_description(&p.wcst.card_line, c, k, k, k, &[("label", label)])
                })
                .collect::<Result<Vec<_>, _>>()?;
            render_template(&p.wcst.system, &[("cards", cards.join("\n"))])?
        }
    };
    let mut parts: Vec<&str> = Vec::new();
    if let Some(t) = &ctx.variant.context_text {
        parts.push(t);
    }
    if let Some(persona) = &ctx.variant.persona {
        parts.push(&persona.text);
    }
    parts.push(&body);
    Ok(parts.join("\n\n"))
}

fn history_clause(ctx: &PromptContext, t: &TrialRecord) -> Result<String, LlmError> {
    let p = &ctx.prompts;
    let schema = |what: &str| LlmError::Config(format!("round {}: {what}", t.round));
    match (&ctx.config, &t.outcome) {
        (TaskConfig::Igt(_), Outcome::Points { reward, penalty, .. }) => {
            let deck = t.choice.option().ok_or_else(|| schema("not a deck choice"))?;
            render_template(
                &p.igt.clause,
                &[
                    ("round", t.round.to_string()),
                    ("choice", ctx.option_label(deck)),
                    ("reward", ctx.points(*reward)),
                    ("penalty", ctx.points(penalty.abs())),
                ],
            )
        }
        (TaskConfig::Cgt(_), Outcome::Points { net, coin_side, .. }) => {
            let bet = t.choice.bet().ok_or_else(|| schema("not a bet"))?;
            let coin = coin_side.ok_or_else(|| schema("coin side missing"))?;
            render_template(
                &p.cgt.clause,
                &[
                    ("round", t.round.to_string()),
                    ("type", ctx.side_label(bet.side)),
                    ("percent", bet.bet.percent().to_string()),
                    ("luck", if coin == bet.side { p.cgt.lucky.clone() } else { p.cgt.unlucky.clone() }),
                    ("coin", ctx.side_label(coin)),
                    ("payoff", ctx.points(net.abs())),
                    ("kind", if *net >= 0 { p.cgt.gain.clone() } else { p.cgt.loss.clone() }),
                ],
            )
        }
        (TaskConfig::Wcst(c), Outcome::Feedback { feedback }) => {
            let Stimulus::Wcst { item, .. } = &t.stimulus else {
                return Err(schema("missing item"));
            };
            let card = t.choice.option().ok_or_else(|| schema("not a card choice"))?;
            render_template(
                &p.wcst.clause,
                &[
                    ("round", t.round.to_string()),
                    ("item", describe_item(ctx, c, item)?),
                    ("label", ctx.option_label(card)),
                    ("reason", t.reasoning.clone().unwrap_or_default()),
                    (
                        "feedback",
                        match feedback {
                            Feedback::Correct => p.wcst.correct.clone(),
                            Feedback::Incorrect => p.wcst.failed.clone(),
                        },
                    ),
                ],
            )
        }
        _ => Err(schema("outcome does not belong to this task")),
    }
}

/// History clauses for rounds 1..i-1 followed by the ask for round i.
pub fn build_decision_prompt(
    ctx: &PromptContext,
    history: &[TrialRecord],
    obs: &Observation,
) -> Result<String, LlmError> {
    let round = obs.round();
    let expected = round.saturating_sub(1) as usize;
    if history.len() != expected {
        return Err(LlmError::History { round, expected, found: history.len() });
    }
    if obs.task() != ctx.task() {
        return Err(LlmError::Config(format!("a {} observation in a {} session", obs.task(), ctx.task())));
    }
    let p = &ctx.prompts;
    let mut parts = Vec::with_capacity(history.len() + 2);
    if !history.is_empty() {
        parts.push(p.history_header.clone());
    }
    for t in history {
        parts.push(history_clause(ctx, t)?);
    }
    let ask = match (obs, &ctx.config) {
        (Observation::Igt { cumulative, .. }, _) => {
            render_template(&p.igt.ask, &[("points", ctx.points(*cumulative)), ("round", round.to_string())])?
        }
        (Observation::Cgt { phase_points, red, blue, .. }, _) => render_template(
            &p.cgt.ask,
            &[
                ("points", ctx.points(*phase_points)),
                ("round", round.to_string()),
                ("red", red.to_string()),
                ("blue", blue.to_string()),
            ],
        )?,
        (Observation::Wcst { item, .. }, TaskConfig::Wcst(c)) => {
            render_template(&p.wcst.ask, &[("round", round.to_string()), ("item", describe_item(ctx, c, item)?)])?
        }
        _ => unreachable!("task checked above"),
    };
    parts.push(ask);
    Ok(parts.join("\n\n"))
}

/// System and decision prompts for one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub decision: String,
    pub round: u32,
    pub permutation: Permutation,
}

impl PromptBundle {
    pub fn build(ctx: &PromptContext, history: &[TrialRecord], obs: &Observation) -> Result<Self, LlmError> {
        Ok(PromptBundle {
            system: build_system_prompt(ctx)?,
            decision: build_decision_prompt(ctx, history, obs)?,
            round: obs.round(),
            permutation: ctx.permutation,
        })
    }
}
