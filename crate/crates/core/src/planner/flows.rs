use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PlannerError;
use crate::controller::FlowRequest;
use crate::topo::{HostId, Topology};

/// `count` distinct ordered host pairs drawn uniformly from a seed, named
/// `f1`, `f2`, ... in draw order.
pub fn random_flows(t: &Topology, seed: u64, count: usize) -> Result<Vec<FlowRequest>, PlannerError> {
    let hosts: Vec<&HostId> = t.hosts().map(|h| &h.id).collect();
    let n = hosts.len();
    let available = n * n.saturating_sub(1);
    if count > available {
        return Err(PlannerError::TooManyFlows { requested: count, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, available, count);
    Ok(picks
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let src = k / (n - 1);
            let mut dst = k % (n - 1);
            if dst >= src {
                dst += 1;
            }
            FlowRequest::new(format!("f{}", i + 1), hosts[src].clone(), hosts[dst].clone())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::fixtures;
    use std::collections::BTreeSet;

    #[test]
    fn flows_are_distinct_and_reproducible() {
        let t = fixtures::fattree();
        let a = random_flows(&t, 7, 120).unwrap();
        assert_eq!(a, random_flows(&t, 7, 120).unwrap());
        assert_ne!(a, random_flows(&t, 8, 120).unwrap());
        let pairs: BTreeSet<(HostId, HostId)> = a.iter().map(|f| (f.src.clone(), f.dst.clone())).collect();
        assert_eq!(pairs.len(), 120);
        assert!(a.iter().all(|f| f.src != f.dst));
        assert_eq!(a[0].id.as_str(), "f1");
    }

    #[test]
    fn every_pair_can_be_drawn() {
        let t = fixtures::motivating_example();
        assert_eq!(random_flows(&t, 1, 6).unwrap().len(), 6);
        assert!(matches!(random_flows(&t, 1, 7), Err(PlannerError::TooManyFlows { requested: 7, available: 6 })));
    }
}
