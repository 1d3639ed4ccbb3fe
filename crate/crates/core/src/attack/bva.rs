//! Binary volumetric attack: one injected file per code bit, sized so a
//! keyword's total injected volume is code·γ, recovered by shifting the
//! observed response size back onto the baseline reference set.

use std::collections::BTreeSet;

use super::{
    smallest_shift_code, BaselineView, CodeBase, InjectedFile, InjectionPlan, TargetRecord,
};
use crate::{Error, Result};

pub fn min_gamma(n_kw: u32) -> u64 {
    (n_kw as u64).div_ceil(2)
}

/// γ large enough that no baseline response size plus future added volume
/// can reach the next code bucket.
pub fn update_safe_gamma(n_kw: u32, max_rsp: u64, planned_added_size: u64) -> u64 {
    min_gamma(n_kw).max(max_rsp + planned_added_size + 1)
}

/// Build the bit-encoded plan: file i (1-based) holds every keyword whose
/// code has bit i−1 set and is padded to γ·2^{i−1} words.
pub fn inject(n_kw: u32, gamma: u64, base: CodeBase) -> Result<InjectionPlan> {
    if n_kw == 0 {
        return Err(Error::InvalidArgument("empty keyword universe".into()));
    }
    if gamma < min_gamma(n_kw) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} below the {} floor for {n_kw} keywords",
            min_gamma(n_kw)
        )));
    }
    let mut plan = InjectionPlan::new();
    plan.gamma = Some(gamma);
    for bit in 0..base.bits(n_kw) {
        let keywords: BTreeSet<u32> = (0..n_kw)
            .filter(|&u| base.code(u) >> bit & 1 == 1)
            .collect();
        plan.push_file(InjectedFile::new(keywords, gamma << bit)?);
    }
    Ok(plan)
}

/// Per target: the smallest code whose γ-shift lands on a baseline response
/// size, or an abstention when none does.
pub fn recover(
    baseline: &BaselineView,
    targets: &[TargetRecord],
    n_kw: u32,
    gamma: u64,
    base: CodeBase,
) -> Vec<Option<u32>> {
    targets
        .iter()
        .map(|t| {
            smallest_shift_code(baseline, t.obs.rsp, gamma, base.codes(n_kw))
                .and_then(|c| base.keyword(c, n_kw))
        })
        .collect()
}

/// Baseline-light variant for update-heavy deployments: with γ above every
/// residual volume, the code is just the γ-quotient of the response size.
pub fn modified_recover(
    targets: &[TargetRecord],
    n_kw: u32,
    gamma: u64,
    base: CodeBase,
) -> Vec<Option<u32>> {
    targets
        .iter()
        .map(|t| base.keyword(t.obs.rsp / gamma, n_kw))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sse::Observation;

    fn target(rsp: u64) -> TargetRecord {
        TargetRecord::from_observation(Observation {
            query_tag: 0,
            rlp: 0,
            rsp,
            window: 0,
        })
    }

    fn view(rsps: &[u64]) -> BaselineView {
        let obs: Vec<Observation> = rsps
            .iter()
            .enumerate()
            .map(|(i, &rsp)| Observation {
                query_tag: i as u64,
                rlp: 1,
                rsp,
                window: 0,
            })
            .collect();
        BaselineView::from_observations(&obs)
    }

    #[test]
    fn eight_keywords_three_doubling_files() {
        let plan = inject(8, 4, CodeBase::Zero).unwrap();
        let sizes: Vec<u64> = plan.files.iter().map(|f| f.size).collect();
        assert_eq!(sizes, vec![4, 8, 16]);
        assert_eq!(plan.ilen(), 3);
        assert_eq!(plan.isize(), 7 * 4);
    }

    #[test]
    fn single_keyword_needs_no_files() {
        let plan = inject(1, 1, CodeBase::Zero).unwrap();
        assert_eq!(plan.ilen(), 0);
        assert_eq!(plan.isize(), 0);
    }

    #[test]
    fn keyword_five_sits_in_files_one_and_three() {
        let plan = inject(8, 4, CodeBase::Zero).unwrap();
        let holding: Vec<usize> = plan
            .files
            .iter()
            .enumerate()
            .filter(|(_, f)| f.keywords.contains(&5))
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(holding, vec![1, 3]);
        let volume: u64 = plan
            .files
            .iter()
            .filter(|f| f.keywords.contains(&5))
            .map(|f| f.size)
            .sum();
        assert_eq!(volume, 5 * 4);
    }

    #[test]
    fn per_keyword_volume_is_code_times_gamma() {
        for &(n_kw, gamma) in &[(8u32, 4u64), (13, 7), (64, 40)] {
            for base in [CodeBase::Zero, CodeBase::One] {
                let plan = inject(n_kw, gamma, base).unwrap();
                for u in 0..n_kw {
                    let volume: u64 = plan
                        .files
                        .iter()
                        .filter(|f| f.keywords.contains(&u))
                        .map(|f| f.size)
                        .sum();
                    assert_eq!(volume, base.code(u) * gamma);
                }
            }
        }
    }

    #[test]
    fn gamma_floor_enforced() {
        assert!(inject(8, 3, CodeBase::Zero).is_err());
        assert!(inject(8, 4, CodeBase::Zero).is_ok());
        assert_eq!(update_safe_gamma(8, 100, 40), 141);
        assert_eq!(update_safe_gamma(100, 3, 4), 50);
    }

    #[test]
    fn unique_recovery_when_gamma_clears_baseline() {
        // Baseline sizes all below γ force u = (rs − rsp̃)/γ uniquely.
        let baseline = view(&[10, 25, 33]);
        let gamma = 34;
        let targets: Vec<TargetRecord> =
            (0..8).map(|u| target(25 + u * gamma)).collect();
        let got = recover(&baseline, &targets, 8, gamma, CodeBase::Zero);
        assert_eq!(got, (0..8).map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn unmatched_shift_abstains() {
        let baseline = view(&[10, 25, 33]);
        // 26 is not reachable from any baseline size by a multiple of 34.
        let got = recover(&baseline, &[target(26)], 8, 34, CodeBase::Zero);
        assert_eq!(got, vec![None]);
        let empty = BaselineView::from_observations(&[]);
        assert_eq!(recover(&empty, &[target(0)], 8, 34, CodeBase::Zero), vec![None]);
    }

    #[test]
    fn tie_breaks_to_smallest_code() {
        // Sizes 10 and 44 differ by exactly γ: both u=0 (via 44) and u=1
        // (via 10) explain rs=44; the smaller code wins.
        let baseline = view(&[10, 44]);
        let got = recover(&baseline, &[target(44)], 8, 34, CodeBase::Zero);
        assert_eq!(got, vec![Some(0)]);
    }

    #[test]
    fn modified_recovery_floors_the_quotient() {
        let targets = vec![target(0), target(140), target(6 * 140 + 139), target(8 * 140)];
        let got = modified_recover(&targets, 8, 140, CodeBase::Zero);
        assert_eq!(got, vec![Some(0), Some(1), Some(6), None]);
        let got = modified_recover(&targets, 8, 140, CodeBase::One);
        assert_eq!(got, vec![None, Some(0), Some(5), Some(7)]);
    }
}
