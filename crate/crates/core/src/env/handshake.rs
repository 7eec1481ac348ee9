//! Joint cooperation requests and their resolution into clusters.
//!
//! Two APs cooperate only when each requests the other. Mutual links are
//! committed in ascending `(min id, max id)` order and a link is dropped when
//! it would grow a cluster past the size cap.

use super::topology::NetworkTopology;
use super::EnvError;

/// One request set per AP. Constructed only through [`JointAction::new`] or
/// [`JointAction::from_indices`], which check the requests against the
/// topology.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointAction {
    requests: Vec<Vec<usize>>,
}

impl JointAction {
    pub fn new(topo: &NetworkTopology, mut requests: Vec<Vec<usize>>) -> Result<Self, EnvError> {
        if requests.len() != topo.len() {
            return Err(EnvError::InvalidAction(format!(
                "expected {} request sets, got {}",
                topo.len(),
                requests.len()
            )));
        }
        for (ap, req) in requests.iter_mut().enumerate() {
            req.sort_unstable();
            req.dedup();
            if req.len() + 1 > topo.max_cluster_size.max(1) && !req.is_empty() {
                return Err(EnvError::InvalidAction(format!(
                    "AP {ap} requests {} neighbors, cap allows {}",
                    req.len(),
                    topo.max_cluster_size - 1
                )));
            }
            if let Some(bad) = req.iter().find(|&&j| !topo.is_neighbor(ap, j)) {
                return Err(EnvError::InvalidAction(format!("AP {ap} requests non-neighbor {bad}")));
            }
        }
        Ok(Self { requests })
    }

    /// Builds a joint action from per-AP indices into
    /// [`NetworkTopology::actions`].
    pub fn from_indices(topo: &NetworkTopology, indices: &[usize]) -> Result<Self, EnvError> {
        if indices.len() != topo.len() {
            return Err(EnvError::InvalidAction(format!(
                "expected {} action indices, got {}",
                topo.len(),
                indices.len()
            )));
        }
        let mut requests = Vec::with_capacity(indices.len());
        for (ap, &k) in indices.iter().enumerate() {
            let acts = topo.actions(ap);
            let act = acts.get(k).ok_or_else(|| {
                EnvError::InvalidAction(format!("AP {ap} has {} actions, index {k} out of range", acts.len()))
            })?;
            requests.push(act.clone());
        }
        Ok(Self { requests })
    }

    pub fn noop(topo: &NetworkTopology) -> Self {
        Self { requests: vec![Vec::new(); topo.len()] }
    }

    pub fn requests(&self, ap: usize) -> &[usize] {
        &self.requests[ap]
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

/// Partition of APs into cooperation clusters.
///
/// Cluster ids are dense and ordered by each cluster's smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterAssignment {
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    links: Vec<(usize, usize)>,
}

impl ClusterAssignment {
    pub fn singletons(n: usize) -> Self {
        Self {
            cluster_of: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
            links: Vec::new(),
        }
    }

    /// Builds an assignment from explicit member lists. Every AP in `0..n`
    /// must appear exactly once.
    pub fn from_clusters(n: usize, clusters: &[Vec<usize>]) -> Result<Self, EnvError> {
        let mut label = vec![usize::MAX; n];
        for (c, members) in clusters.iter().enumerate() {
            for &ap in members {
                if ap >= n || label[ap] != usize::MAX {
                    return Err(EnvError::InvalidAction(format!("AP {ap} missing or assigned twice")));
                }
                label[ap] = c;
            }
        }
        if label.contains(&usize::MAX) {
            return Err(EnvError::InvalidAction("clusters do not cover every AP".into()));
        }
        Ok(Self::from_labels(&label, Vec::new()))
    }

    fn from_labels(label: &[usize], links: Vec<(usize, usize)>) -> Self {
        let mut canon = vec![usize::MAX; label.len()];
        let mut remap = std::collections::HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (ap, &l) in label.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            canon[ap] = id;
            members[id].push(ap);
        }
        Self { cluster_of: canon, members, links }
    }

    #[inline]
    pub fn cluster_of(&self, ap: usize) -> usize {
        self.cluster_of[ap]
    }

    pub fn labels(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn members(&self, cluster: usize) -> &[usize] {
        &self.members[cluster]
    }

    /// Links committed during handshake resolution (empty for assignments
    /// built directly).
    pub fn formation_links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn n_aps(&self) -> usize {
        self.cluster_of.len()
    }

    /// Cluster counts indexed by size (`hist[s]` = number of clusters with `s` members).
    pub fn size_histogram(&self, max_size: usize) -> Vec<usize> {
        let mut hist = vec![0; max_size + 1];
        for m in &self.members {
            hist[m.len().min(max_size)] += 1;
        }
        hist
    }

    /// Checks the size cap and that each cluster is connected in the
    /// neighbor graph.
    pub fn validate(&self, topo: &NetworkTopology) -> Result<(), EnvError> {
        if self.n_aps() != topo.len() {
            return Err(EnvError::InvalidAction("assignment size does not match topology".into()));
        }
        for m in &self.members {
            if m.len() > topo.max_cluster_size {
                return Err(EnvError::InvalidAction(format!("cluster {m:?} exceeds size cap")));
            }
            if !connected_in(topo, m) {
                return Err(EnvError::InvalidAction(format!("cluster {m:?} is not neighbor-connected")));
            }
        }
        Ok(())
    }
}

fn connected_in(topo: &NetworkTopology, members: &[usize]) -> bool {
    if members.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; members.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for m in 0..members.len() {
            if !seen[m] && topo.is_neighbor(members[k], members[m]) {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Resolves a joint request into clusters by the handshake rule.
pub fn resolve_handshake(joint: &JointAction, topo: &NetworkTopology) -> ClusterAssignment {
    let n = topo.len();
    let mut mutual = Vec::new();
    for i in 0..n {
        for &j in joint.requests(i) {
            if i < j && joint.requests(j).binary_search(&i).is_ok() {
                mutual.push((i, j));
            }
        }
    }
    mutual.sort_unstable();

    let mut uf = UnionFind::new(n);
    let mut committed = Vec::new();
    for (i, j) in mutual {
        let (ri, rj) = (uf.find(i), uf.find(j));
        if ri == rj {
            committed.push((i, j));
            continue;
        }
        if uf.size[ri] + uf.size[rj] <= topo.max_cluster_size {
            let (big, small) = if ri < rj { (ri, rj) } else { (rj, ri) };
            uf.parent[small] = big;
            uf.size[big] += uf.size[small];
            committed.push((i, j));
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    ClusterAssignment::from_labels(&labels, committed)
}

/// Finds a joint action whose handshake resolution is exactly `asg`, if one
/// exists. Each AP may only request members of its own cluster, so the
/// search is local to each cluster.
pub fn joint_action_for(asg: &ClusterAssignment, topo: &NetworkTopology) -> Option<JointAction> {
    let mut requests = vec![Vec::new(); topo.len()];
    for members in asg.clusters() {
        if members.len() == 1 {
            continue;
        }
        let choice = cluster_requests(members, topo)?;
        for (k, &ap) in members.iter().enumerate() {
            requests[ap] = choice[k].clone();
        }
    }
    let joint = JointAction::new(topo, requests).ok()?;
    (resolve_handshake(&joint, topo).labels() == asg.labels()).then_some(joint)
}

/// True when some joint action produces this cluster through the handshake.
pub fn is_reachable(members: &[usize], topo: &NetworkTopology) -> bool {
    members.len() <= 1 || (members.len() <= topo.max_cluster_size && cluster_requests(members, topo).is_some())
}

fn cluster_requests(members: &[usize], topo: &NetworkTopology) -> Option<Vec<Vec<usize>>> {
    // candidate request sets per member: valid actions that stay inside the cluster
    let options: Vec<Vec<&Vec<usize>>> = members
        .iter()
        .map(|&ap| {
            topo.actions(ap)
                .iter()
                .filter(|a| !a.is_empty() && a.iter().all(|j| members.contains(j)))
                .collect()
        })
        .collect();
    if options.iter().any(|o| o.is_empty()) {
        return None;
    }
    let mut pick = vec![0usize; members.len()];
    loop {
        let chosen: Vec<&Vec<usize>> = pick.iter().enumerate().map(|(k, &p)| options[k][p]).collect();
        if mutual_connected(members, &chosen) {
            return Some(chosen.into_iter().cloned().collect());
        }
        let mut k = 0;
        loop {
            if k == members.len() {
                return None;
            }
            pick[k] += 1;
            if pick[k] < options[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

fn mutual_connected(members: &[usize], requests: &[&Vec<usize>]) -> bool {
    let idx = |ap: usize| members.iter().position(|&m| m == ap).unwrap();
    let mut seen = vec![false; members.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for &j in requests[k].iter() {
            let m = idx(j);
            if !seen[m] && requests[m].contains(&members[k]) {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::channel::ChannelConfig;
    use crate::env::topology::{build_topology, PairRestriction, TopologyConfig};

    fn strip(cols: usize, restriction: PairRestriction) -> NetworkTopology {
        let cfg = TopologyConfig { rows: 1, cols, pair_restriction: restriction, ..Default::default() };
        build_topology(&cfg, &ChannelConfig::default()).unwrap()
    }

    fn joint(topo: &NetworkTopology, reqs: &[&[usize]]) -> JointAction {
        JointAction::new(topo, reqs.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn all_noop_gives_singletons() {
        let topo = strip(4, PairRestriction::AllPairs);
        let asg = resolve_handshake(&JointAction::noop(&topo), &topo);
        assert_eq!(asg, ClusterAssignment::singletons(4));
    }

    #[test]
    fn mutual_pair_forms_cluster() {
        let topo = strip(2, PairRestriction::AllPairs);
        let asg = resolve_handshake(&joint(&topo, &[&[1], &[0]]), &topo);
        assert_eq!(asg.clusters(), &[vec![0, 1]]);
        assert_eq!(asg.formation_links(), &[(0, 1)]);
    }

    #[test]
    fn one_sided_request_ignored() {
        // 0 -> 1, 1 -> 2, 2 -> 1
        let topo = strip(3, PairRestriction::AllPairs);
        let asg = resolve_handshake(&joint(&topo, &[&[1], &[2], &[1]]), &topo);
        assert_eq!(asg.clusters(), &[vec![0], vec![1, 2]]);
    }

    #[test]
    fn chain_capped_lexicographically() {
        // 0<->1, 1<->2, 2<->3 all mutual, cap 3
        let topo = strip(4, PairRestriction::AllPairs);
        let asg = resolve_handshake(&joint(&topo, &[&[1], &[0, 2], &[1, 3], &[2]]), &topo);
        assert_eq!(asg.clusters(), &[vec![0, 1, 2], vec![3]]);
        assert_eq!(asg.formation_links(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn non_neighbor_request_rejected() {
        let topo = strip(3, PairRestriction::AllPairs);
        assert!(JointAction::new(&topo, vec![vec![2], vec![], vec![]]).is_err());
    }

    #[test]
    fn path_triple_needs_all_pairs() {
        let adj = strip(3, PairRestriction::AdjacentPairsOnly);
        let all = strip(3, PairRestriction::AllPairs);
        // 0 and 2 are not adjacent, so the middle AP cannot request both
        assert!(!is_reachable(&[0, 1, 2], &adj));
        assert!(is_reachable(&[0, 1, 2], &all));
        let asg = ClusterAssignment::from_clusters(3, &[vec![0, 1, 2]]).unwrap();
        let j = joint_action_for(&asg, &all).unwrap();
        assert_eq!(resolve_handshake(&j, &all), ClusterAssignment { links: vec![(0, 1), (1, 2)], ..asg });
    }
}
