use crate::flownet::TimeExpandedNetwork;

use super::Solution;

/// Per-server rewards recomputed from flows.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardReport {
    /// One entry per flow column; the aggregate model yields a single total.
    pub rewards: Vec<f64>,
    pub min_reward: f64,
    pub served: Vec<usize>,
    pub unserved: Vec<usize>,
}

pub fn extract_rewards(solution: &Solution, net: &TimeExpandedNetwork<'_>) -> RewardReport {
    let columns = solution.flows.first().map_or(0, |c| c.len());
    let mut rewards = vec![0.0; columns];
    for (edge, flows) in net.edges.iter().zip(&solution.flows) {
        if edge.cost == 0 {
            continue;
        }
        for (r, f) in rewards.iter_mut().zip(flows) {
            *r += f * edge.cost as f64;
        }
    }
    let min_reward = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let (unserved, served): (Vec<usize>, Vec<usize>) =
        (0..solution.z.len()).partition(|&j| solution.z[j] > 0.5);
    RewardReport {
        min_reward: if rewards.is_empty() { 0.0 } else { min_reward },
        rewards,
        served,
        unserved,
    }
}

/// Splits the total flow into source-to-sink paths and deals them out to `k`
/// unit-capacity servers in discovery order, splitting a path across servers
/// when it does not fit. Integral flows give one whole path per server. Works
/// for both the aggregate and the per-server model.
pub fn decompose_server_rewards(
    solution: &Solution,
    net: &TimeExpandedNetwork<'_>,
    k: usize,
) -> Vec<f64> {
    const EPS: f64 = 1e-9;
    let mut left: Vec<f64> = solution.flows.iter().map(|c| c.iter().sum()).collect();
    let mut paths: Vec<(f64, f64)> = Vec::new();
    let (source, sink) = (0, 1);
    loop {
        let mut at = source;
        let mut route = Vec::new();
        while at != sink {
            let Some(&e) = net.out_edges(at).iter().find(|&&e| left[e] > EPS) else {
                break;
            };
            route.push(e);
            at = net.edges[e].to;
        }
        if at != sink || route.is_empty() {
            break;
        }
        let amount = route.iter().map(|&e| left[e]).fold(f64::INFINITY, f64::min);
        let cost: f64 = route.iter().map(|&e| net.edges[e].cost as f64).sum();
        for &e in &route {
            left[e] -= amount;
        }
        paths.push((amount, cost));
    }

    let mut rewards = vec![0.0; k];
    let mut server = 0;
    let mut room = 1.0;
    for (mut amount, cost) in paths {
        while amount > EPS && server < k {
            let take = amount.min(room);
            rewards[server] += take * cost;
            amount -= take;
            room -= take;
            if room <= EPS {
                server += 1;
                room = 1.0;
            }
        }
    }
    rewards
}
