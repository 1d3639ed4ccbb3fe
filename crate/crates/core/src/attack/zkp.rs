//! Access-pattern comparator: bit-encoded files as in the binary volumetric
//! attacks, but recovery reads which injected files the response CONTAINS
//! rather than how large it is — so it needs the access leak and dies the
//! moment the deployment hides file identifiers.

use std::collections::BTreeSet;

use super::{CodeBase, InjectedFile, InjectionPlan, TargetRecord};
use crate::corpus::DocId;
use crate::{Error, Result};

pub fn inject(n_kw: u32, base: CodeBase) -> Result<InjectionPlan> {
    if n_kw == 0 {
        return Err(Error::InvalidArgument("empty keyword universe".into()));
    }
    let mut plan = InjectionPlan::new();
    for bit in 0..base.bits(n_kw) {
        let keywords: BTreeSet<u32> = (0..n_kw)
            .filter(|&u| base.code(u) >> bit & 1 == 1)
            .collect();
        let size = keywords.len().max(1) as u64;
        plan.push_file(InjectedFile::new(keywords, size)?);
    }
    Ok(plan)
}

/// Decode each target's code from the subset of plan files its access leak
/// contains. `plan_doc_ids[i]` is the id the i-th plan file received, or
/// None if a defense dropped it.
pub fn recover(
    plan_doc_ids: &[Option<DocId>],
    targets: &[TargetRecord],
    n_kw: u32,
    base: CodeBase,
) -> Result<Vec<Option<u32>>> {
    targets
        .iter()
        .map(|t| {
            let leak = t.leak.as_ref().ok_or_else(|| Error::DefenseBlocked {
                attack: "zkp".into(),
                defense: "access-pattern suppression".into(),
                detail: "recovery needs the injected-file identifiers".into(),
            })?;
            let mut code = 0u64;
            for (bit, id) in plan_doc_ids.iter().enumerate() {
                if matches!(id, Some(id) if leak.injected.contains(id)) {
                    code |= 1 << bit;
                }
            }
            Ok(base.keyword(code, n_kw))
        })
        .collect()
}
