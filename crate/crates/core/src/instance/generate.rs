use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Instance, Request, Time};
use crate::metric::{self, Dist, MetricError, MetricSpace};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("cannot place {requested} distinct arrivals in [{lo}, {hi}]")]
    RangeExhausted {
        requested: usize,
        lo: Time,
        hi: Time,
    },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Synthetic request protocol: uniform endpoints, uniform preparation times,
/// pairwise-distinct arrival and deadline timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub n_requests: usize,
    /// Requested horizon. It is extended if the latest delivery would overrun it.
    pub horizon: Time,
    /// Inclusive interval both `t_begin` and `t_end` are drawn from.
    pub arrival_range: (Time, Time),
    /// Inclusive range of `t_end - t_begin`.
    pub prep_range: (Time, Time),
    pub k: usize,
    pub speed: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_requests: 250,
            horizon: 1000,
            arrival_range: (100, 900),
            prep_range: (1, 100),
            k: 100,
            speed: 1.0,
        }
    }
}

const MAX_RESAMPLES: usize = 10_000;

pub fn gen_synthetic(
    metric: MetricSpace,
    params: &SyntheticParams,
    seed: u64,
) -> Result<Instance, GenError> {
    let m = metric.node_count();
    let (lo, hi) = params.arrival_range;
    let (pmin, pmax) = params.prep_range;
    if m < 2 {
        return Err(GenError::InvalidParameter(
            "need at least two nodes for distinct endpoints",
        ));
    }
    if params.k == 0 {
        return Err(GenError::InvalidParameter("k must be at least 1"));
    }
    if pmin < 0 || pmax < pmin || lo < 0 || hi < lo || hi - lo < pmin {
        return Err(GenError::InvalidParameter(
            "inconsistent arrival / preparation ranges",
        ));
    }
    if !(params.speed.is_finite() && params.speed > 0.0) {
        return Err(GenError::InvalidParameter("speed must be positive"));
    }
    let slots = (hi - lo + 1) as usize;
    if params.n_requests > slots {
        return Err(GenError::RangeExhausted {
            requested: params.n_requests,
            lo,
            hi,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut begins = HashSet::new();
    let mut ends = HashSet::new();
    let mut raw = Vec::with_capacity(params.n_requests);
    for _ in 0..params.n_requests {
        let source = rng.gen_range(0..m);
        let dest = loop {
            let d = rng.gen_range(0..m);
            if d != source {
                break d;
            }
        };
        let mut placed = None;
        for _ in 0..MAX_RESAMPLES {
            let prep = rng.gen_range(pmin..=pmax.min(hi - lo));
            let t_begin = rng.gen_range(lo..=hi - prep);
            let t_end = t_begin + prep;
            if !begins.contains(&t_begin) && !ends.contains(&t_end) {
                placed = Some((t_begin, t_end));
                break;
            }
        }
        let (t_begin, t_end) = placed.ok_or(GenError::RangeExhausted {
            requested: params.n_requests,
            lo,
            hi,
        })?;
        begins.insert(t_begin);
        ends.insert(t_end);
        raw.push((source, dest, t_begin, t_end));
    }
    raw.sort_by_key(|r| r.2);
    let requests: Vec<Request> = raw
        .into_iter()
        .enumerate()
        .map(|(id, (source, dest, t_begin, t_end))| Request {
            id,
            source,
            dest,
            t_begin,
            t_end,
        })
        .collect();
    let initial_positions = (0..params.k).map(|_| rng.gen_range(0..m)).collect();

    let mut inst = Instance {
        metric,
        requests,
        k: params.k,
        initial_positions,
        eta: 1,
        horizon: params.horizon,
        speed: params.speed,
    };
    let last_delivery = inst
        .requests
        .iter()
        .map(|r| r.t_end + inst.travel_time(r.source, r.dest))
        .max()
        .unwrap_or(0);
    inst.horizon = inst.horizon.max(last_delivery);
    Ok(inst)
}

/// Partition-style instance on a star: every request starts at the centre and
/// ends at its own leaf; all servers start at the centre.
///
/// Request `j` has window `[j*P, j*P + max_d]` with `P = 2*max_d + slack`, so a
/// server delivering at any leaf can always come back for any later request.
pub fn gen_partition_instance(
    d_values: &[Dist],
    k: usize,
    slack: Time,
) -> Result<Instance, GenError> {
    if k == 0 {
        return Err(GenError::InvalidParameter("k must be at least 1"));
    }
    if slack < 0 {
        return Err(GenError::InvalidParameter("slack must be non-negative"));
    }
    let metric = metric::gen_star(d_values)?;
    let max_d = *d_values.iter().max().expect("gen_star rejects empty input") as Time;
    let period = 2 * max_d + slack;
    let requests: Vec<Request> = d_values
        .iter()
        .enumerate()
        .map(|(j, _)| {
            let t_begin = j as Time * period;
            Request {
                id: j,
                source: 0,
                dest: j + 1,
                t_begin,
                t_end: t_begin + max_d,
            }
        })
        .collect();
    let horizon = requests.last().map_or(0, |r| r.t_end) + max_d + slack;
    Ok(Instance {
        metric,
        requests,
        k,
        initial_positions: vec![0; k],
        eta: 1,
        horizon,
        speed: 1.0,
    })
}

/// Size caps for [`gen_tiny`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyLimits {
    pub max_nodes: usize,
    pub max_requests: usize,
    pub max_servers: usize,
    pub horizon: Time,
    pub max_weight: Dist,
    pub max_prep: Time,
}

impl Default for TinyLimits {
    fn default() -> Self {
        Self {
            max_nodes: 6,
            max_requests: 5,
            max_servers: 2,
            horizon: 30,
            max_weight: 5,
            max_prep: 8,
        }
    }
}

/// Small random instance for exhaustive cross-checks.
pub fn gen_tiny(seed: u64, limits: TinyLimits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let m = rng.gen_range(2..=limits.max_nodes.max(2));
    let p = rng.gen_range(0.2..0.8);
    let metric = metric::gen_erdos_renyi(m, p, 1..=limits.max_weight.max(1), rng.gen())
        .expect("positive weight range always yields a connected metric");
    let n = rng.gen_range(1..=limits.max_requests.max(1));
    let k = rng.gen_range(1..=limits.max_servers.max(1));

    let mut begins: Vec<Time> = Vec::new();
    let mut raw = Vec::new();
    let mut attempts = 0;
    while raw.len() < n && attempts < 1000 {
        attempts += 1;
        let source = rng.gen_range(0..m);
        let dest = loop {
            let d = rng.gen_range(0..m);
            if d != source {
                break d;
            }
        };
        let prep = rng.gen_range(0..=limits.max_prep);
        let travel = metric.dist(source, dest) as Time;
        let latest = limits.horizon - prep - travel;
        if latest < 0 {
            continue;
        }
        let t_begin = rng.gen_range(0..=latest);
        if begins.contains(&t_begin) {
            continue;
        }
        begins.push(t_begin);
        raw.push((source, dest, t_begin, t_begin + prep));
    }
    raw.sort_by_key(|r| r.2);
    let requests = raw
        .into_iter()
        .enumerate()
        .map(|(id, (source, dest, t_begin, t_end))| Request {
            id,
            source,
            dest,
            t_begin,
            t_end,
        })
        .collect();
    let initial_positions = (0..k).map(|_| rng.gen_range(0..m)).collect();
    Instance {
        metric,
        requests,
        k,
        initial_positions,
        eta: 1,
        horizon: limits.horizon,
        speed: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_params(n: usize) -> SyntheticParams {
        SyntheticParams {
            n_requests: n,
            k: 4,
            ..SyntheticParams::default()
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_valid() {
        let ms = metric::gen_erdos_renyi(30, 0.3, 10..=100, 1).unwrap();
        let a = gen_synthetic(ms.clone(), &small_params(40), 7).unwrap();
        let b = gen_synthetic(ms, &small_params(40), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.validate(), Ok(()));
        assert_eq!(a.requests.len(), 40);
        assert_eq!(a.initial_positions.len(), 4);
    }

    #[test]
    fn single_synthetic_request() {
        let ms = metric::gen_erdos_renyi(5, 0.5, 10..=100, 2).unwrap();
        let inst = gen_synthetic(ms, &small_params(1), 3).unwrap();
        let r = inst.requests[0];
        assert!((1..=100).contains(&r.window()));
        assert_ne!(r.source, r.dest);
        assert!(r.t_begin >= 100 && r.t_end <= 900);
    }

    #[test]
    fn synthetic_range_exhaustion() {
        let ms = metric::gen_erdos_renyi(5, 0.5, 10..=100, 2).unwrap();
        let params = SyntheticParams {
            arrival_range: (0, 9),
            prep_range: (0, 2),
            ..small_params(11)
        };
        assert!(matches!(
            gen_synthetic(ms, &params, 1),
            Err(GenError::RangeExhausted { .. })
        ));
    }

    #[test]
    fn partition_instance_shape() {
        let inst = gen_partition_instance(&[1, 2, 3], 2, 1).unwrap();
        assert_eq!(inst.metric.node_count(), 4);
        assert_eq!(inst.requests.len(), 3);
        assert_eq!(inst.initial_positions, vec![0, 0]);
        assert_eq!(inst.validate(), Ok(()));
        let total: u64 = inst
            .requests
            .iter()
            .map(|r| inst.dist(r.source, r.dest))
            .sum();
        assert_eq!(total, 6);

        let one = gen_partition_instance(&[5], 1, 0).unwrap();
        assert_eq!(one.requests.len(), 1);
        assert_eq!(one.dist(one.requests[0].source, one.requests[0].dest), 5);
    }

    #[test]
    fn tiny_instances_are_valid() {
        for seed in 0..200 {
            let inst = gen_tiny(seed, TinyLimits::default());
            assert_eq!(inst.validate(), Ok(()), "seed {seed}");
            assert!(inst.metric.node_count() <= 6 && inst.requests.len() <= 5 && inst.k <= 2);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn synthetic_always_validates_with_distinct_times(seed in any::<u64>(), n in 1usize..60) {
            let ms = metric::gen_erdos_renyi(20, 0.3, 10..=200, seed).unwrap();
            let inst = gen_synthetic(ms, &small_params(n), seed).unwrap();
            prop_assert_eq!(inst.validate(), Ok(()));
            let begins: HashSet<_> = inst.requests.iter().map(|r| r.t_begin).collect();
            let ends: HashSet<_> = inst.requests.iter().map(|r| r.t_end).collect();
            prop_assert_eq!(begins.len(), n);
            prop_assert_eq!(ends.len(), n);
        }

        #[test]
        fn partition_distance_sum_is_exact(ds in proptest::collection::vec(1u64..50, 1..8), k in 1usize..4) {
            let inst = gen_partition_instance(&ds, k, 2).unwrap();
            let total: u64 = inst.requests.iter().map(|r| inst.dist(r.source, r.dest)).sum();
            prop_assert_eq!(total, ds.iter().sum::<u64>());
            prop_assert_eq!(inst.validate(), Ok(()));
        }
    }
}
