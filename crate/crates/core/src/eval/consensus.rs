use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default acceptance-frequency threshold.
pub const TAU_ACC: f64 = 0.6;
/// Maximum size of the BEST set.
pub const MAX_BEST: usize = 3;

/// One rater's judgment of one scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub rater_id: String,
    /// Ids marked acceptable. Empty means "none acceptable".
    pub accepted: BTreeSet<usize>,
    pub best: usize,
}

impl Rating {
    /// Abstentions ("none acceptable") are stored as accept {0}, best 0.
    pub fn normalized(mut self) -> Self {
        if self.accepted.is_empty() {
            self.accepted.insert(0);
            self.best = 0;
        }
        self
    }

    pub fn is_abstention(&self) -> bool {
        self.accepted.len() == 1 && self.accepted.contains(&0) && self.best == 0
    }
}

/// All ratings for one scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterData {
    pub scene_id: String,
    pub ratings: Vec<Rating>,
}

impl RaterData {
    pub fn new(scene_id: impl Into<String>, ratings: Vec<Rating>) -> Result<Self> {
        let ratings: Vec<Rating> = ratings.into_iter().map(Rating::normalized).collect();
        if ratings.is_empty() {
            return Err(Error::invalid("rater data needs at least one rater"));
        }
        Ok(Self { scene_id: scene_id.into(), ratings })
    }

    pub fn n(&self) -> usize {
        self.ratings.len()
    }

    /// Checks that every id lies in `0..=k`.
    pub fn validate_ids(&self, k: usize) -> Result<()> {
        for r in &self.ratings {
            if r.best > k || r.accepted.iter().any(|&a| a > k) {
                return Err(Error::invalid(format!("scene {} rater {} uses an id outside 0..={k}", self.scene_id, r.rater_id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub tau_acc: f64,
    /// Whether an abstaining rater's best pick (0) counts as a vote for 0.
    pub count_abstainer_best: bool,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self { tau_acc: TAU_ACC, count_abstainer_best: true }
    }
}

/// Acceptance frequencies and the ACCEPT set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptResult {
    pub p_hat: BTreeMap<usize, f64>,
    pub accept: BTreeSet<usize>,
}

/// `p̂_k = |{r : k ∈ A_r}| / N`; ACCEPT keeps ids with `p̂_k ≥ tau_acc`.
pub fn accept_set(data: &RaterData, tau_acc: f64) -> AcceptResult {
    let n = data.n() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &data.ratings {
        for &id in &r.accepted {
            *counts.entry(id).or_default() += 1;
        }
    }
    let p_hat: BTreeMap<usize, f64> = counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect();
    let accept = p_hat.iter().filter(|(_, &p)| p >= tau_acc).map(|(&k, _)| k).collect();
    AcceptResult { p_hat, accept }
}

/// Per-scene human consensus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub scene_id: String,
    pub n: usize,
    pub accept: BTreeSet<usize>,
    pub best: BTreeSet<usize>,
    pub p_hat: BTreeMap<usize, f64>,
    pub votes: BTreeMap<usize, usize>,
    pub v_max: usize,
    pub theta: usize,
}

/// Best-pick votes, `θ = max(⌈v_max/2⌉, ⌈N/4⌉)`, and BEST = {k ∈ ACCEPT : v_k ≥ θ}
/// trimmed to the top three by (votes desc, p̂ desc, id asc).
pub fn best_set(data: &RaterData, accept: &AcceptResult, count_abstainer_best: bool) -> Consensus {
    let n = data.n();
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &data.ratings {
        if !count_abstainer_best && r.is_abstention() {
            continue;
        }
        *votes.entry(r.best).or_default() += 1;
    }
    let v_max = votes.values().copied().max().unwrap_or(0);
    let theta = v_max.div_ceil(2).max(n.div_ceil(4));
    let mut best: Vec<usize> = votes
        .iter()
        .filter(|(k, &v)| v >= theta && accept.accept.contains(k))
        .map(|(&k, _)| k)
        .collect();
    let p = |k: &usize| accept.p_hat.get(k).copied().unwrap_or(0.0);
    best.sort_by(|a, b| votes[b].cmp(&votes[a]).then(p(b).total_cmp(&p(a))).then(a.cmp(b)));
    best.truncate(MAX_BEST);
    Consensus {
        scene_id: data.scene_id.clone(),
        n,
        accept: accept.accept.clone(),
        best: best.into_iter().collect(),
        p_hat: accept.p_hat.clone(),
        votes,
        v_max,
        theta,
    }
}

pub fn build_consensus(data: &RaterData, cfg: &ConsensusConfig) -> Consensus {
    best_set(data, &accept_set(data, cfg.tau_acc), cfg.count_abstainer_best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(id: usize, accepted: &[usize], best: usize) -> Rating {
        Rating { rater_id: id.to_string(), accepted: accepted.iter().copied().collect(), best }
    }

    #[test]
    fn acceptance_fraction_boundary() {
        let mk = |hits: usize| {
            let rs = (0..11).map(|i| rating(i, if i < hits { &[4] } else { &[2] }, 2)).collect();
            RaterData::new("s", rs).unwrap()
        };
        assert!(accept_set(&mk(7), TAU_ACC).accept.contains(&4));
        assert!(!accept_set(&mk(6), TAU_ACC).accept.contains(&4));
        assert!(accept_set(&mk(11), 1.0).accept.contains(&4));
        let five = RaterData::new("s", (0..5).map(|i| rating(i, if i < 3 { &[1] } else { &[2] }, 1)).collect()).unwrap();
        assert!(accept_set(&five, TAU_ACC).accept.contains(&1));
    }

    #[test]
    fn twelve_rater_fixture() {
        // A=1, B=2, C=3, D=4; everyone accepts all four.
        let picks = [1, 1, 1, 1, 1, 1, 2, 2, 2, 3, 3, 4];
        let rs = picks.iter().enumerate().map(|(i, &b)| rating(i, &[1, 2, 3, 4], b)).collect();
        let c = build_consensus(&RaterData::new("s", rs).unwrap(), &ConsensusConfig::default());
        assert_eq!(c.theta, 3);
        assert_eq!(c.best, BTreeSet::from([1, 2]));
    }

    #[test]
    fn tie_break_prefers_smaller_ids() {
        let rs = (0..10).map(|i| rating(i, &[1, 2, 3, 4, 5], 1 + i % 5)).collect();
        let c = build_consensus(&RaterData::new("s", rs).unwrap(), &ConsensusConfig::default());
        assert_eq!(c.theta, 3);
        assert!(c.best.is_empty());
        let rs = (0..5).map(|i| rating(i, &[1, 2, 3, 4, 5], 5 - i)).collect();
        let c = build_consensus(&RaterData::new("s", rs).unwrap(), &ConsensusConfig::default());
        assert_eq!(c.theta, 2);
        let rs = (0..4).map(|i| rating(i, &[1, 2, 3, 4, 5], 5 - i)).chain((4..8).map(|i| rating(i, &[1, 2, 3, 4, 5], 9 - i))).collect::<Vec<_>>();
        let c = build_consensus(&RaterData::new("s", rs).unwrap(), &ConsensusConfig::default());
        assert_eq!(c.theta, 2);
        assert_eq!(c.best, BTreeSet::from([2, 3, 4]));
    }

    #[test]
    fn abstention_switch() {
        let rs = vec![rating(0, &[], 7), rating(1, &[2], 2), rating(2, &[0, 2], 2), rating(3, &[2], 2)];
        let data = RaterData::new("s", rs).unwrap();
        assert!(data.ratings[0].is_abstention());
        let with = build_consensus(&data, &ConsensusConfig::default());
        assert_eq!(with.votes[&0], 1);
        assert_eq!(with.best, BTreeSet::from([2]));
        let without = build_consensus(&data, &ConsensusConfig { count_abstainer_best: false, ..Default::default() });
        assert!(!without.votes.contains_key(&0));
        assert_eq!(without.best, BTreeSet::from([2]));
    }

    #[test]
    fn unanimous_best_is_singleton() {
        let rs = (0..6).map(|i| rating(i, &[3, 4], 3)).collect();
        let c = build_consensus(&RaterData::new("s", rs).unwrap(), &ConsensusConfig::default());
        assert_eq!(c.best, BTreeSet::from([3]));
    }
}
