//! Attack specialized to cluster-equalizing dynamic padding: run one
//! binary volumetric instance per within-cluster column with pairwise
//! co-prime size units, so members of a cluster receive equal injected
//! lengths (the padder stays silent) while the co-prime units keep the
//! columns separable at recovery time.

use std::collections::{BTreeMap, BTreeSet};

use super::{BaselineView, GroupInfo, InjectedFile, InjectionPlan, TargetRecord};
use crate::{Error, Result};

/// Smallest admissible size unit for a given cluster count.
pub fn min_gamma(n_clusters: usize) -> u64 {
    (n_clusters as u64).div_ceil(2).max(1)
}

/// Smallest `t` pairwise co-prime integers ≥ `min`, ascending.
pub fn select_gammas(t: usize, min: u64) -> Vec<u64> {
    let mut chosen: Vec<u64> = Vec::with_capacity(t);
    let mut candidate = min.max(1);
    while chosen.len() < t {
        if chosen.iter().all(|&g| gcd(g, candidate) == 1) {
            chosen.push(candidate);
        }
        candidate += 1;
    }
    chosen
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn cluster_bits(n_clusters: usize) -> u32 {
    64 - (n_clusters as u64 - 1).leading_zeros()
}

/// One binary volumetric instance per column u: file (u, b) holds column-u
/// members of every cluster whose index has bit b set, padded to Γ[u]·2^b.
/// Cluster indices are the codes, so cluster 0 stays uninjected.
pub fn inject(clusters: &[Vec<u32>], gammas: &[u64]) -> Result<InjectionPlan> {
    let alpha = clusters.iter().map(|c| c.len()).max().unwrap_or(0);
    if clusters.is_empty() || alpha == 0 {
        return Err(Error::InvalidArgument("empty clustering".into()));
    }
    if gammas.is_empty() || gammas.len() > alpha {
        return Err(Error::InvalidArgument(format!(
            "group count {} must be in 1..={alpha}",
            gammas.len()
        )));
    }
    let floor = min_gamma(clusters.len());
    if let Some(&g) = gammas.iter().find(|&&g| g < floor) {
        return Err(Error::InvalidArgument(format!(
            "size unit {g} below the {floor} floor for {} clusters",
            clusters.len()
        )));
    }
    let mut plan = InjectionPlan::new();
    let mut groups = Vec::with_capacity(gammas.len());
    for (u, &gamma) in gammas.iter().enumerate() {
        let start = plan.files.len();
        for bit in 0..cluster_bits(clusters.len()) {
            let keywords: BTreeSet<u32> = clusters
                .iter()
                .enumerate()
                .filter(|(v, c)| v >> bit & 1 == 1 && c.len() > u)
                .map(|(_, c)| c[u])
                .collect();
            if keywords.is_empty() {
                continue;
            }
            plan.push_file(InjectedFile::new(keywords, gamma << bit)?);
        }
        groups.push(GroupInfo {
            gamma,
            files: start..plan.files.len(),
        });
    }
    plan.groups = Some(groups);
    Ok(plan)
}

/// Per target: clusters whose padded baseline length plus injected length
/// explains the observed length, then the first (cluster, column) in
/// lexicographic order whose size shift is consistent with the baseline.
///
/// `member_rsp` carries each column's own baseline response size where the
/// adversary knows it (granted clusterings record one per member); a known
/// size must be hit exactly, which separates the columns of cluster 0 —
/// unshifted by construction — and rejects cross-cluster shift collisions.
/// Unknown members fall back to membership in the global size set.
pub fn recover(
    baseline: &BaselineView,
    targets: &[TargetRecord],
    clusters: &[Vec<u32>],
    gammas: &[u64],
    cluster_rlp: &[u64],
    member_rsp: &[Vec<Option<u64>>],
) -> Vec<Option<u32>> {
    assert_eq!(cluster_rlp.len(), clusters.len());
    assert_eq!(member_rsp.len(), clusters.len());
    targets
        .iter()
        .map(|t| {
            for (v, members) in clusters.iter().enumerate() {
                let pc = (v as u64).count_ones() as u64;
                if cluster_rlp[v] + pc != t.obs.rlp {
                    continue;
                }
                for (u, &gamma) in gammas.iter().enumerate().take(members.len()) {
                    let shifted = match t.obs.rsp.checked_sub(v as u64 * gamma) {
                        Some(s) => s,
                        None => continue,
                    };
                    let consistent = match member_rsp[v].get(u).copied().flatten() {
                        Some(own) => shifted == own,
                        None => baseline.contains_rsp(shifted),
                    };
                    if consistent {
                        return Some(members[u]);
                    }
                }
            }
            None
        })
        .collect()
}

/// Member-size table shape for adversaries without per-keyword baselines.
pub fn unknown_member_rsp(clusters: &[Vec<u32>]) -> Vec<Vec<Option<u64>>> {
    clusters.iter().map(|c| vec![None; c.len()]).collect()
}

/// Group probed keywords into clusters: two keywords share a cluster
/// exactly when their probes raised the same set of query tags. Clusters
/// are ordered by smallest member; the raised-tag sets come along so the
/// caller can read per-cluster baselines off later observations.
pub fn group_by_signature(
    probes: &[(u32, BTreeSet<u64>)],
) -> (Vec<Vec<u32>>, Vec<BTreeSet<u64>>) {
    let mut by_sig: BTreeMap<&BTreeSet<u64>, Vec<u32>> = BTreeMap::new();
    for (kw, sig) in probes {
        by_sig.entry(sig).or_default().push(*kw);
    }
    let mut groups: Vec<(Vec<u32>, BTreeSet<u64>)> = by_sig
        .into_iter()
        .map(|(sig, mut kws)| {
            kws.sort_unstable();
            (kws, sig.clone())
        })
        .collect();
    groups.sort_by_key(|(kws, _)| kws[0]);
    groups.into_iter().unzip()
}

/// Shared padded length of each cluster, read off its members' baseline
/// observations.
pub fn cluster_rlp_from_tags(baseline: &BaselineView, tag_sets: &[BTreeSet<u64>]) -> Vec<u64> {
    tag_sets
        .iter()
        .map(|tags| {
            tags.iter()
                .filter_map(|&t| baseline.tag(t).map(|b| b.rlp))
                .max()
                .unwrap_or(0)
        })
        .collect()
}
