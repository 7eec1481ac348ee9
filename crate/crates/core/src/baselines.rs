//! Non-learning comparison policies: a fixed tiling, greedy merging, a
//! uniform random policy and an exhaustive search for small patches.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{evaluate, is_reachable, ClusterAssignment, JointAction, NetworkTopology, Scenario, UserState};

/// Largest network the exhaustive search accepts.
pub const EXHAUSTIVE_MAX_APS: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("exhaustive search supports at most {EXHAUSTIVE_MAX_APS} APs, got {0}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Fixed,
    Greedy,
    Random,
    Exhaustive,
}

/// Deterministic tiling: scan APs by id and group each ungrouped AP with
/// up to `max_cluster_size - 1` ungrouped neighbors, smallest id first,
/// skipping any neighbor that would make the group unreachable by handshake.
pub fn fixed_scheme(topo: &NetworkTopology) -> ClusterAssignment {
    let n = topo.len();
    let mut taken = vec![false; n];
    let mut clusters = Vec::new();
    for i in 0..n {
        if taken[i] {
            continue;
        }
        let mut group = vec![i];
        taken[i] = true;
        for &j in &topo.neighbors[i] {
            if group.len() >= topo.max_cluster_size {
                break;
            }
            if taken[j] {
                continue;
            }
            let mut trial = group.clone();
            trial.push(j);
            trial.sort_unstable();
            if is_reachable(&trial, topo) {
                taken[j] = true;
                group = trial;
            }
        }
        clusters.push(group);
    }
    ClusterAssignment::from_clusters(n, &clusters).expect("tiling covers every AP once")
}

fn merge(asg: &ClusterAssignment, a: usize, b: usize) -> ClusterAssignment {
    let mut clusters: Vec<Vec<usize>> = Vec::with_capacity(asg.clusters().len() - 1);
    let mut merged = asg.members(a).to_vec();
    merged.extend_from_slice(asg.members(b));
    merged.sort_unstable();
    for (c, m) in asg.clusters().iter().enumerate() {
        if c != a && c != b {
            clusters.push(m.clone());
        }
    }
    clusters.push(merged);
    ClusterAssignment::from_clusters(asg.n_aps(), &clusters).expect("merge keeps a partition")
}

fn clusters_touch(topo: &NetworkTopology, a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|&i| b.iter().any(|&j| topo.is_neighbor(i, j)))
}

/// Greedy merging from singletons: at each round apply the admissible merge
/// of two neighboring clusters with the largest strictly positive gain in
/// global reward (ties to the first pair in cluster order); stop when no
/// merge helps.
pub fn greedy_clustering(scn: &Scenario, users: &[UserState]) -> ClusterAssignment {
    let topo = &scn.topo;
    let mut asg = ClusterAssignment::singletons(topo.len());
    let mut current = evaluate(scn, users, &asg).global;
    loop {
        let mut best: Option<(f64, ClusterAssignment)> = None;
        let k = asg.clusters().len();
        for a in 0..k {
            for b in a + 1..k {
                let (ma, mb) = (asg.members(a), asg.members(b));
                if ma.len() + mb.len() > topo.max_cluster_size || !clusters_touch(topo, ma, mb) {
                    continue;
                }
                let cand = merge(&asg, a, b);
                let merged = &cand.clusters()[cand.cluster_of(ma[0])];
                if !is_reachable(merged, topo) {
                    continue;
                }
                let gain = evaluate(scn, users, &cand).global - current;
                if gain > 0.0 && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                    best = Some((gain, cand));
                }
            }
        }
        match best {
            Some((gain, cand)) => {
                current += gain;
                asg = cand;
            }
            None => return asg,
        }
    }
}

/// All set partitions of `0..n` as restricted-growth label strings, in
/// lexicographic order.
fn set_partitions(n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    fn rec(labels: &mut Vec<usize>, n: usize, max: usize, visit: &mut dyn FnMut(&[usize])) {
        if labels.len() == n {
            visit(labels);
            return;
        }
        for l in 0..=max + 1 {
            labels.push(l);
            rec(labels, n, max.max(l), visit);
            labels.pop();
        }
    }
    let mut labels = vec![0];
    // first AP always opens block 0; `max` tracks the highest label so far
    rec(&mut labels, n, 0, &mut visit);
}

/// Every partition whose blocks respect the size cap, are neighbor-connected
/// and can be produced by some handshake, in lexicographic label order.
pub fn candidate_partitions(topo: &NetworkTopology) -> Result<Vec<ClusterAssignment>, BaselineError> {
    let n = topo.len();
    if n > EXHAUSTIVE_MAX_APS {
        return Err(BaselineError::TooLarge(n));
    }
    let mut out = Vec::new();
    set_partitions(n, |labels| {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (ap, &l) in labels.iter().enumerate() {
            blocks[l].push(ap);
        }
        let ok = blocks
            .iter()
            .all(|b| b.len() <= topo.max_cluster_size && is_reachable(b, topo));
        if ok {
            let asg = ClusterAssignment::from_clusters(n, &blocks).expect("labels form a partition");
            if asg.validate(topo).is_ok() {
                out.push(asg);
            }
        }
    });
    Ok(out)
}

/// Best reachable partition by global reward; ties keep the first in
/// lexicographic order.
pub fn exhaustive_oracle(scn: &Scenario, users: &[UserState]) -> Result<(ClusterAssignment, f64), BaselineError> {
    let mut best: Option<(ClusterAssignment, f64)> = None;
    for asg in candidate_partitions(&scn.topo)? {
        let r = evaluate(scn, users, &asg).global;
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((asg, r));
        }
    }
    Ok(best.expect("the all-singleton partition is always a candidate"))
}

/// Uniform draw over each AP's enumerated actions.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, topo: &NetworkTopology) -> JointAction {
    let idx: Vec<usize> = (0..topo.len()).map(|ap| rng.gen_range(0..topo.actions(ap).len())).collect();
    JointAction::from_indices(topo, &idx).expect("indices drawn within range")
}
