//! Single-round length comparator: keyword with code c appears in m·c
//! one-word files, so its post-injection response length alone names the
//! code — at a file bill quadratic in the universe size.

use super::{CodeBase, InjectedFile, InjectionPlan, TargetRecord};
use crate::{Error, Result};

pub fn inject(n_kw: u32, m: u64, base: CodeBase) -> Result<InjectionPlan> {
    if n_kw == 0 {
        return Err(Error::InvalidArgument("empty keyword universe".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("multiplier must be positive".into()));
    }
    let mut plan = InjectionPlan::new();
    for u in 0..n_kw {
        for _ in 0..m * base.code(u) {
            plan.push_file(InjectedFile::new([u].into_iter().collect(), 1)?);
        }
    }
    Ok(plan)
}

/// Baseline-free: predict the code ⌊rl/m⌋, abstaining outside the range.
pub fn recover(targets: &[TargetRecord], n_kw: u32, m: u64, base: CodeBase) -> Vec<Option<u32>> {
    targets
        .iter()
        .map(|t| base.keyword(t.obs.rlp / m, n_kw))
        .collect()
}
