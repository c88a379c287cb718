//! Extraction of the tagged choice and reasoning from a model reply.

use std::sync::OnceLock;

use regex::Regex;

use super::permute::Permutation;
use super::LlmError;
use crate::engine::{BetChoice, BetLevel, Choice, OptionId, Side, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedResponse {
    pub choice: Choice,
    /// Presented position picked by the model.
    pub position: usize,
    pub reasoning: Option<String>,
}

fn choice_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<choice>(.*?)</choice>").expect("valid regex"))
}

fn reasoning_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<reasoning>(.*?)</reasoning>").expect("valid regex"))
}

/// Legal range of the number inside the choice tag.
pub fn choice_range(task: Task, n_options: usize) -> (i64, i64) {
    match task {
        Task::Cgt => (0, n_options as i64 - 1),
        Task::Igt | Task::Wcst => (1, n_options as i64),
    }
}

/// Canonical CGT option `k`: side `k / n_levels` (red first), bet level `k % n_levels`.
pub fn cgt_option(k: usize, levels: &[BetLevel]) -> BetChoice {
    let n = levels.len();
    BetChoice { side: if k < n { Side::Red } else { Side::Blue }, bet: levels[k % n] }
}

pub fn cgt_index(choice: BetChoice, levels: &[BetLevel]) -> Option<usize> {
    let j = levels.iter().position(|b| *b == choice.bet)?;
    Some(if choice.side == Side::Red { j } else { levels.len() + j })
}

/// The canonical choice with index `k` (below four for IGT/WCST, below `2 * levels.len()` for CGT).
pub fn canonical_choice(task: Task, k: usize, levels: &[BetLevel]) -> Choice {
    match task {
        Task::Cgt => Choice::Bet(cgt_option(k, levels)),
        Task::Igt | Task::Wcst => Choice::Option(OptionId::from_index(k).expect("index below four")),
    }
}

/// Parses a reply for `task`. `levels` are the CGT bet levels (ignored otherwise).
pub fn parse_response(
    text: &str,
    task: Task,
    permutation: &Permutation,
    levels: &[BetLevel],
) -> Result<ParsedResponse, LlmError> {
    let inner = choice_tag()
        .captures_iter(text)
        .last()
        .map(|c| c[1].trim().to_string())
        .ok_or_else(|| LlmError::Parse("no <choice> tag".into()))?;
    let value: i64 = inner.parse().map_err(|_| LlmError::Parse(format!("'{inner}' is not an integer")))?;
    let (lo, hi) = choice_range(task, permutation.n);
    if value < lo || value > hi {
        return Err(LlmError::Range { value, lo, hi });
    }
    let position = (value - lo) as usize;
    let canonical = permutation.canonical_at(position);
    let choice = canonical_choice(task, canonical, levels);
    let reasoning = reasoning_tag().captures_iter(text).last().map(|c| c[1].to_string());
    Ok(ParsedResponse { choice, position, reasoning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels() -> Vec<BetLevel> {
        [5, 25, 50, 75, 95].iter().map(|p| BetLevel::from_percent(*p).unwrap()).collect()
    }

    #[test]
    fn igt_identity() {
        let r = parse_response("<reasoning>x</reasoning><choice>3</choice>", Task::Igt, &Permutation::identity(4), &[])
            .unwrap();
        assert_eq!(r.choice, Choice::Option(OptionId::C));
        assert_eq!(r.reasoning.as_deref(), Some("x"));
    }

    #[test]
    fn last_tag_wins() {
        let r = parse_response(
            "<choice>1</choice> no wait <choice> 4 </choice>",
            Task::Igt,
            &Permutation::identity(4),
            &[],
        )
        .unwrap();
        assert_eq!(r.choice, Choice::Option(OptionId::D));
        assert_eq!(r.reasoning, None);
    }

    #[test]
    fn errors() {
        let id10 = Permutation::identity(10);
        assert_eq!(
            parse_response("<choice>12</choice>", Task::Cgt, &id10, &levels()),
            Err(LlmError::Range { value: 12, lo: 0, hi: 9 })
        );
        assert!(matches!(
            parse_response("I pick deck B", Task::Igt, &Permutation::identity(4), &[]),
            Err(LlmError::Parse(_))
        ));
        assert!(matches!(
            parse_response("<choice>B</choice>", Task::Igt, &Permutation::identity(4), &[]),
            Err(LlmError::Parse(_))
        ));
        assert!(matches!(
            parse_response("<choice>0</choice>", Task::Wcst, &Permutation::identity(4), &[]),
            Err(LlmError::Range { .. })
        ));
    }

    #[test]
    fn cgt_indices() {
        let l = levels();
        for k in 0..10 {
            assert_eq!(cgt_index(cgt_option(k, &l), &l), Some(k));
        }
        assert_eq!(cgt_option(7, &l), BetChoice { side: Side::Blue, bet: l[2] });
    }
}
