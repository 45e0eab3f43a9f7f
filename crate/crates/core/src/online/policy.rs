//! The five assignment rules. Each takes the eligible server ids in
//! ascending order and breaks ties toward the lowest id.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Random,
    GreedyMin,
    Doc4Food,
    MinDelta,
    RoundRobin,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Random,
        Policy::GreedyMin,
        Policy::Doc4Food,
        Policy::MinDelta,
        Policy::RoundRobin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::GreedyMin => "greedy-min",
            Policy::Doc4Food => "doc4food",
            Policy::MinDelta => "min-delta",
            Policy::RoundRobin => "round-robin",
        }
    }

    pub fn is_stochastic(self) -> bool {
        self == Policy::Random
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == key || p.name().replace('-', "") == key)
            .ok_or_else(|| format!("unknown policy `{s}` (expected one of random, greedy-min, doc4food, min-delta, round-robin)"))
    }
}

/// Weights `2^-(x_i - min x)` over the eligible servers.
pub fn random_weights(eligible: &[usize], rewards: &[u64]) -> Vec<f64> {
    let min = eligible.iter().map(|&i| rewards[i]).min().unwrap_or(0);
    eligible
        .iter()
        .map(|&i| (-((rewards[i] - min) as f64)).exp2())
        .collect()
}

pub fn policy_random<R: Rng + ?Sized>(eligible: &[usize], rewards: &[u64], rng: &mut R) -> usize {
    assert!(
        !eligible.is_empty(),
        "policy needs at least one eligible server"
    );
    let weights = random_weights(eligible, rewards);
    let dist = WeightedIndex::new(&weights).expect("the minimum-reward server has weight 1");
    eligible[dist.sample(rng)]
}

pub fn policy_greedy_min(eligible: &[usize], rewards: &[u64]) -> usize {
    *eligible
        .iter()
        .min_by_key(|&&i| (rewards[i], i))
        .expect("policy needs at least one eligible server")
}

/// Picks the server whose hypothetical reward vector, after receiving
/// `gain(i)`, has the smallest max-minus-min spread.
pub fn policy_min_delta(eligible: &[usize], rewards: &[u64], gain: impl Fn(usize) -> u64) -> usize {
    assert!(
        !eligible.is_empty(),
        "policy needs at least one eligible server"
    );
    let spread = |i: usize| {
        let mut lo = u64::MAX;
        let mut hi = 0;
        for (s, &x) in rewards.iter().enumerate() {
            let x = if s == i { x + gain(i) } else { x };
            lo = lo.min(x);
            hi = hi.max(x);
        }
        hi - lo
    };
    *eligible.iter().min_by_key(|&&i| (spread(i), i)).unwrap()
}

/// First eligible id scanning cyclically from `cursor`; returns the choice
/// and the advanced cursor.
pub fn policy_round_robin(eligible: &[usize], cursor: usize, k: usize) -> (usize, usize) {
    assert!(
        !eligible.is_empty(),
        "policy needs at least one eligible server"
    );
    let chosen = eligible
        .iter()
        .copied()
        .find(|&i| i >= cursor)
        .unwrap_or(eligible[0]);
    (chosen, (chosen + 1) % k)
}
