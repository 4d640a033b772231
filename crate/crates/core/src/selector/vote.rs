use serde::{Deserialize, Serialize};

/// Tallies of an FB-n ensemble and the strict-majority outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    /// Clipped per-call choices in call order.
    pub votes: Vec<usize>,
    /// `tallies[k]` = number of calls that chose `k`, for `k` in `0..=K`.
    pub tallies: Vec<usize>,
    pub winner: usize,
    pub majority_met: bool,
}

/// Strict-majority aggregation: the winner is the id holding more than
/// `⌊n/2⌋` votes, otherwise station-keeping (0). Votes above `k` are clipped.
pub fn aggregate_votes(votes: &[usize], k: usize) -> VoteRecord {
    let votes: Vec<usize> = votes.iter().map(|&v| v.min(k)).collect();
    let mut tallies = vec![0usize; k + 1];
    for &v in &votes {
        tallies[v] += 1;
    }
    let half = votes.len() / 2;
    let leader = tallies.iter().enumerate().find(|(_, &c)| c > half).map(|(id, _)| id);
    VoteRecord { winner: leader.unwrap_or(0), majority_met: leader.is_some(), votes, tallies }
}
