//! Per-session cyclic reordering of the presented options.

use serde::{Deserialize, Serialize};

/// Canonical option `k` is presented at position `(k + shift) mod n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    pub shift: usize,
    pub n: usize,
}

/// The permutation for the `session_index`-th session over `n_options` options.
pub fn permute_options(session_index: u64, n_options: usize) -> Permutation {
    assert!(n_options >= 2, "a permutation needs at least two options");
    Permutation { shift: (session_index % n_options as u64) as usize, n: n_options }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        permute_options(0, n)
    }

    pub fn position_of(&self, canonical: usize) -> usize {
        (canonical + self.shift) % self.n
    }

    pub fn canonical_at(&self, position: usize) -> usize {
        (position + self.n - self.shift % self.n) % self.n
    }

    /// `order[position]` is the canonical option shown there.
    pub fn order(&self) -> Vec<u8> {
        (0..self.n).map(|p| self.canonical_at(p) as u8).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_one_over_four() {
        let p = permute_options(1, 4);
        assert_eq!((0..4).map(|k| p.position_of(k)).collect::<Vec<_>>(), vec![1, 2, 3, 0]);
        assert_eq!(p.order(), vec![3, 0, 1, 2]);
    }

    #[test]
    fn shift_zero_is_identity() {
        assert_eq!(permute_options(0, 10).order(), (0..10).collect::<Vec<u8>>());
        assert_eq!(permute_options(8, 4), permute_options(0, 4));
    }

    #[test]
    fn inverse_round_trip() {
        for n in 2..=10 {
            for s in 0..2 * n as u64 {
                let p = permute_options(s, n);
                for k in 0..n {
                    assert_eq!(p.canonical_at(p.position_of(k)), k);
                }
            }
        }
    }
}
