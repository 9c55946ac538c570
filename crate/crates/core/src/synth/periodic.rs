use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphOptions, NodeId, RawEvent, TemporalGraph};

/// Users 0..users, items users..users+items. Each user cycles through a personal item
/// sequence of length `period`; with probability `noise` an event goes to a uniform item instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub users: usize,
    pub items: usize,
    pub period: usize,
    pub events: usize,
    pub noise: f64,
}

impl Default for PeriodicSpec {
    fn default() -> Self {
        PeriodicSpec { users: 50, items: 20, period: 5, events: 20_000, noise: 0.1 }
    }
}

/// Users act in rounds (random order within each round); round r, position p has time
/// r + p/(users+1). The cycle pointer advances on every event, noisy or not.
pub fn gen_periodic_bipartite<R: Rng>(spec: &PeriodicSpec, rng: &mut R) -> Result<TemporalGraph> {
    if spec.users < 2 || spec.items < 2 || spec.period == 0 || !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::Config("periodic: need users, items >= 2, period >= 1, noise in [0, 1]".into()));
    }
    let (u, i) = (spec.users, spec.items);
    let cycles: Vec<Vec<NodeId>> = (0..u).map(|_| (0..spec.period).map(|_| (u + rng.random_range(0..i)) as NodeId).collect()).collect();
    let mut order: Vec<usize> = (0..u).collect();
    let mut ptr = vec![0usize; u];
    let mut raw = Vec::with_capacity(spec.events);
    let mut round = 0usize;
    while raw.len() < spec.events {
        order.shuffle(rng);
        for (p, &user) in order.iter().enumerate() {
            if raw.len() == spec.events {
                break;
            }
            let scheduled = cycles[user][ptr[user] % spec.period];
            ptr[user] += 1;
            let item = if rng.random_bool(spec.noise) { (u + rng.random_range(0..i)) as NodeId } else { scheduled };
            raw.push(RawEvent::new(user as NodeId, item, round as f64 + p as f64 / (u + 1) as f64));
        }
        round += 1;
    }
    TemporalGraph::from_records(u + i, raw, GraphOptions { directed: true, allow_self_loops: false })
}
