//! Evaluation metrics and Lorenz curves over per-server rewards.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::online::SimulationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub unserved: usize,
    /// Mean reward over all servers, zero-reward ones included.
    pub cost: f64,
    pub min_reward: f64,
    pub zero_reward_count: usize,
    /// Ascending.
    pub rewards: Vec<f64>,
}

/// Panics on an empty or negative reward vector.
pub fn evaluate(rewards: &[f64], unserved: usize) -> Metrics {
    assert!(!rewards.is_empty(), "need at least one server");
    assert!(
        rewards.iter().all(|&x| x >= 0.0),
        "rewards must be non-negative"
    );
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    Metrics {
        unserved,
        cost: sorted.iter().sum::<f64>() / sorted.len() as f64,
        min_reward: sorted[0],
        zero_reward_count: sorted.iter().filter(|&&x| x == 0.0).count(),
        rewards: sorted,
    }
}

pub fn evaluate_simulation(result: &SimulationResult) -> Metrics {
    let rewards: Vec<f64> = result.per_server.iter().map(|s| s.reward as f64).collect();
    evaluate(&rewards, result.unserved())
}

/// Element-wise mean of several metric sets (used for averaging seeds).
/// Sorted reward vectors are averaged position by position.
pub fn mean_metrics(all: &[Metrics]) -> Option<Metrics> {
    let first = all.first()?;
    let n = all.len() as f64;
    let k = first.rewards.len();
    let rewards = (0..k)
        .map(|i| all.iter().map(|m| m.rewards[i]).sum::<f64>() / n)
        .collect();
    Some(Metrics {
        unserved: (all.iter().map(|m| m.unserved).sum::<usize>() as f64 / n).round() as usize,
        cost: all.iter().map(|m| m.cost).sum::<f64>() / n,
        min_reward: all.iter().map(|m| m.min_reward).sum::<f64>() / n,
        zero_reward_count: (all.iter().map(|m| m.zero_reward_count).sum::<usize>() as f64 / n)
            .round() as usize,
        rewards,
    })
}

pub const DEFAULT_PERCENTILE_CUT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzPoint {
    pub pop_share: f64,
    pub reward_share: f64,
}

/// Full curve: `(0, 0)` followed by one point per server, ascending. A zero
/// total yields the line of equality.
pub fn lorenz_curve(rewards: &[f64]) -> Vec<LorenzPoint> {
    assert!(!rewards.is_empty(), "need at least one server");
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    let mut acc = 0.0;
    let mut out = vec![LorenzPoint {
        pop_share: 0.0,
        reward_share: 0.0,
    }];
    for (i, x) in sorted.iter().enumerate() {
        acc += x;
        let pop_share = (i + 1) as f64 / k;
        let reward_share = if total > 0.0 { acc / total } else { pop_share };
        out.push(LorenzPoint {
            pop_share,
            reward_share,
        });
    }
    out
}

/// Curve points with population share at most `cut`.
pub fn lorenz_prefix(rewards: &[f64], cut: f64) -> Vec<LorenzPoint> {
    lorenz_curve(rewards)
        .into_iter()
        .filter(|p| p.pop_share <= cut + 1e-12)
        .collect()
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// `metric,value` rows.
pub fn write_metrics_csv<W: Write>(m: &Metrics, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value"])?;
    w.write_record(["unserved", &m.unserved.to_string()])?;
    w.write_record(["cost", &fmt6(m.cost)])?;
    w.write_record(["min_reward", &fmt6(m.min_reward)])?;
    w.write_record(["zero_reward_count", &m.zero_reward_count.to_string()])?;
    w.flush()?;
    Ok(())
}

/// `pop_share,reward_share` rows.
pub fn write_lorenz_csv<W: Write>(curve: &[LorenzPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pop_share", "reward_share"])?;
    for p in curve {
        w.write_record([fmt6(p.pop_share), fmt6(p.reward_share)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_rewards_cost_is_min() {
        let m = evaluate(&[2444.5; 4], 0);
        assert_eq!(m.cost, m.min_reward);
        assert_eq!(m.zero_reward_count, 0);
    }

    #[test]
    fn zero_rewards_counted() {
        let m = evaluate(&[0.0, 5.0, 0.0], 3);
        assert_eq!(m.min_reward, 0.0);
        assert_eq!(m.zero_reward_count, 2);
        assert!((m.cost - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.rewards, vec![0.0, 0.0, 5.0]);
        assert_eq!(m.unserved, 3);
    }

    #[test]
    fn single_server() {
        let m = evaluate(&[7.0], 0);
        assert_eq!((m.cost, m.min_reward), (7.0, 7.0));
    }

    #[test]
    fn lorenz_examples() {
        let shares: Vec<f64> = lorenz_curve(&[4.0, 1.0, 2.0, 1.0])
            .iter()
            .map(|p| p.reward_share)
            .collect();
        assert_eq!(shares, vec![0.0, 0.125, 0.25, 0.5, 1.0]);

        for p in lorenz_curve(&[3.0; 5]) {
            assert!((p.pop_share - p.reward_share).abs() < 1e-12);
        }
        for p in lorenz_curve(&[0.0; 3]) {
            assert_eq!(p.pop_share, p.reward_share);
        }
        let c = lorenz_curve(&[0.0, 0.0, 10.0]);
        assert_eq!((c[1].reward_share, c[2].reward_share), (0.0, 0.0));
    }

    #[test]
    fn prefix_cut() {
        let c = lorenz_prefix(&[1.0, 1.0, 2.0, 4.0], DEFAULT_PERCENTILE_CUT);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].pop_share, 0.25);
    }

    #[test]
    fn csv_output() {
        let mut buf = Vec::new();
        write_metrics_csv(&evaluate(&[0.0, 5.0, 0.0], 1), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,value\nunserved,1\ncost,1.666667\nmin_reward,0.000000\nzero_reward_count,2\n"
        );
        let mut buf = Vec::new();
        write_lorenz_csv(&lorenz_curve(&[1.0, 3.0]), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "pop_share,reward_share\n0.000000,0.000000\n0.500000,0.250000\n1.000000,1.000000\n"
        );
    }

    #[test]
    fn mean_of_seeds() {
        let a = evaluate(&[0.0, 4.0], 2);
        let b = evaluate(&[2.0, 2.0], 0);
        let m = mean_metrics(&[a, b]).unwrap();
        assert_eq!(m.cost, 2.0);
        assert_eq!(m.min_reward, 1.0);
        assert_eq!(m.rewards, vec![1.0, 3.0]);
        assert_eq!(m.unserved, 1);
        assert!(mean_metrics(&[]).is_none());
    }

    proptest! {
        #[test]
        fn lorenz_monotone_convex(rewards in proptest::collection::vec(0u32..1000, 1..30)) {
            let r: Vec<f64> = rewards.iter().map(|&x| x as f64).collect();
            let c = lorenz_curve(&r);
            for w in c.windows(2) {
                prop_assert!(w[1].reward_share >= w[0].reward_share - 1e-12);
            }
            for w in c.windows(3) {
                let d = (w[2].reward_share - w[1].reward_share) - (w[1].reward_share - w[0].reward_share);
                prop_assert!(d >= -1e-12);
            }
            prop_assert!((c.last().unwrap().reward_share - 1.0).abs() < 1e-12);
        }

        #[test]
        fn evaluate_permutation_invariant(mut rewards in proptest::collection::vec(0u32..1000, 1..20)) {
            let a = evaluate(&rewards.iter().map(|&x| x as f64).collect::<Vec<_>>(), 0);
            rewards.reverse();
            let b = evaluate(&rewards.iter().map(|&x| x as f64).collect::<Vec<_>>(), 0);
            prop_assert_eq!(a.rewards, b.rewards);
            prop_assert_eq!(a.min_reward, b.min_reward);
            prop_assert!((a.cost - b.cost).abs() < 1e-9);
            prop_assert!(a.min_reward <= a.cost + 1e-9);
        }
    }
}
