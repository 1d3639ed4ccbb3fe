//! Shard transform for word-count caps: rewrite every oversized plan file
//! into cap-sized pieces so that each keyword's total injected size is
//! preserved exactly while no single file exceeds the cap.

use std::collections::BTreeSet;

use super::{InjectedFile, InjectionPlan};
use crate::defense::remap_groups_expanded;
use crate::{Error, Result};

/// Split each file of size s > T into, per keyword chunk of at most T
/// keywords: one chunk file of size T, ⌈s/T⌉−2 refill files of size T, and
/// ⌈#chunk/rem⌉ tail files of size rem = s − (⌈s/T⌉−1)·T — so every member
/// keyword still totals exactly s across (⌈s/T⌉ files).
pub fn shard(plan: &InjectionPlan, threshold: u64) -> Result<InjectionPlan> {
    if threshold == 0 {
        return Err(Error::InvalidArgument("cap must be positive".into()));
    }
    let mut files = Vec::new();
    let mut expansion = Vec::with_capacity(plan.files.len());
    for file in &plan.files {
        if file.size <= threshold {
            files.push(file.clone());
            expansion.push(1);
            continue;
        }
        let before = files.len();
        let pieces = file.size.div_ceil(threshold);
        let rem = file.size - (pieces - 1) * threshold;
        let keywords: Vec<u32> = file.keywords.iter().copied().collect();
        for chunk in keywords.chunks(threshold as usize) {
            let chunk_set: BTreeSet<u32> = chunk.iter().copied().collect();
            files.push(InjectedFile::new(chunk_set.clone(), threshold)?);
            for _ in 0..pieces - 2 {
                files.push(InjectedFile::new(chunk_set.clone(), threshold)?);
            }
            for sub in chunk.chunks(rem as usize) {
                files.push(InjectedFile::new(sub.iter().copied().collect(), rem)?);
            }
        }
        expansion.push(files.len() - before);
    }
    Ok(InjectionPlan {
        files,
        gamma: plan.gamma,
        groups: remap_groups_expanded(plan.groups.as_deref(), &expansion),
    })
}
