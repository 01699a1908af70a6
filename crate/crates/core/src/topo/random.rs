//! Seeded random topologies for property tests and scenarios.

use rand::seq::SliceRandom;
use rand::Rng;

use super::fixtures::numbered;
use super::model::{Link, Topology};
use super::path::is_connected;
use super::rewire::{two_switch, Pairing};

/// Connected simple graph on `n` nodes: a random spanning tree plus up to
/// `extra` random chords. Every node carries one host.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Topology {
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let max_links = n * n.saturating_sub(1) / 2;
    let wanted = (pairs.len() + extra).min(max_links);
    let mut attempts = 0;
    while pairs.len() < wanted && attempts < 50 * wanted {
        attempts += 1;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u == v || pairs.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
            continue;
        }
        pairs.push((u, v));
    }
    let hosts: Vec<usize> = (0..n).collect();
    numbered(n, &pairs, &hosts)
}

/// Applies one random valid 2-switch that keeps the graph connected.
pub fn random_two_switch<R: Rng>(rng: &mut R, t: &Topology) -> Option<Topology> {
    let links: Vec<Link> = t.links().cloned().collect();
    if links.len() < 2 {
        return None;
    }
    for _ in 0..500 {
        let pick: Vec<&Link> = links.choose_multiple(rng, 2).collect();
        let pairing = if rng.gen_bool(0.5) { Pairing::AcBd } else { Pairing::AdBc };
        if let Ok(out) = two_switch(t, pick[0], pick[1], pairing) {
            if is_connected(&out) {
                return Some(out);
            }
        }
    }
    None
}
