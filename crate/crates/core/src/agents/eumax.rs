//! Expected-utility-maximizing reference players for the CGT and the WCST.

use crate::engine::Stimulus;
use crate::engine::{BetChoice, BetLevel, Card, Feedback, Item, OptionId, Ratio, Rule, TrialRecord};

/// Majority colour, highest offered bet.
pub fn cgt_eumax_choose(ratio: Ratio, bet_levels: &[BetLevel]) -> BetChoice {
    let bet = bet_levels
        .iter()
        .copied()
        .max()
        .unwrap_or_else(|| BetLevel::from_percent(95).expect("95 is a valid percentage"));
    BetChoice { side: ratio.majority_side(), bet }
}

/// Candidate-elimination WCST player: keep the working rule while it pays,
/// drop every rule the failed card matched when it does not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WcstRuleTracker {
    /// Surviving candidate rules, in rule index order.
    candidates: Vec<Rule>,
}

impl Default for WcstRuleTracker {
    fn default() -> Self {
        WcstRuleTracker { candidates: Rule::ALL.to_vec() }
    }
}

impl WcstRuleTracker {
    pub fn hypothesis(&self) -> Rule {
        self.candidates[0]
    }

    pub fn candidates(&self) -> &[Rule] {
        &self.candidates
    }

    pub fn observe(&mut self, item: Item, chosen: Card, feedback: Feedback) {
        let matched: Vec<Rule> = Rule::ALL.into_iter().filter(|r| item.matches(chosen, *r)).collect();
        match feedback {
            Feedback::Correct => {
                let kept: Vec<Rule> = self.candidates.iter().copied().filter(|r| matched.contains(r)).collect();
                self.candidates = if kept.is_empty() { matched } else { kept };
            }
            Feedback::Incorrect => {
                self.candidates.retain(|r| !matched.contains(r));
                if self.candidates.is_empty() {
                    // The rule changed silently: everything but what just failed is back in play.
                    self.candidates = Rule::ALL.into_iter().filter(|r| !matched.contains(r)).collect();
                }
            }
        }
        if self.candidates.is_empty() {
            self.candidates = Rule::ALL.to_vec();
        }
    }

    pub fn observe_record(&mut self, record: &TrialRecord) {
        if let (Stimulus::Wcst { item, .. }, Some(card), Some(fb)) =
            (&record.stimulus, record.choice.option(), record.outcome.feedback())
        {
            self.observe(*item, card, fb);
        }
    }

    pub fn choose(&self, item: Item) -> Card {
        item.target(self.hypothesis()).unwrap_or(OptionId::A)
    }
}

/// Replays `history` through a fresh tracker and picks the card for `item`.
pub fn wcst_eumax_choose(history: &[TrialRecord], item: Item) -> Card {
    let mut t = WcstRuleTracker::default();
    for r in history {
        t.observe_record(r);
    }
    t.choose(item)
}
