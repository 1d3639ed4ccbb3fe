//! Decoding-attack comparator: one singleton file of size code·offset per
//! keyword, recovered with the same size-shift rule as the binary attack
//! but paying a file per keyword instead of a file per bit.

use super::{smallest_shift_code, BaselineView, CodeBase, InjectedFile, InjectionPlan, TargetRecord};
use crate::{Error, Result};

pub fn inject(n_kw: u32, offset: u64, base: CodeBase) -> Result<InjectionPlan> {
    if n_kw == 0 {
        return Err(Error::InvalidArgument("empty keyword universe".into()));
    }
    if offset == 0 {
        return Err(Error::InvalidArgument("offset must be positive".into()));
    }
    let mut plan = InjectionPlan::new();
    plan.gamma = Some(offset);
    for u in 0..n_kw {
        let code = base.code(u);
        if code == 0 {
            continue;
        }
        plan.push_file(InjectedFile::new([u].into_iter().collect(), code * offset)?);
    }
    Ok(plan)
}

pub fn recover(
    baseline: &BaselineView,
    targets: &[TargetRecord],
    n_kw: u32,
    offset: u64,
    base: CodeBase,
) -> Vec<Option<u32>> {
    targets
        .iter()
        .map(|t| {
            smallest_shift_code(baseline, t.obs.rsp, offset, base.codes(n_kw))
                .and_then(|c| base.keyword(c, n_kw))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::bva;
    use crate::sse::Observation;

    #[test]
    fn eight_keywords_seven_singletons() {
        let plan = inject(8, 3, CodeBase::Zero).unwrap();
        assert_eq!(plan.ilen(), 7);
        assert_eq!(plan.isize(), 28 * 3);
        assert!(plan.files.iter().all(|f| f.keywords.len() == 1));
        assert_eq!(plan.files[0].size, 3);
        assert_eq!(plan.files[6].size, 21);
        assert!(plan.files.iter().all(|f| !f.keywords.contains(&0)));
    }

    #[test]
    fn one_based_codes_inject_every_keyword() {
        let plan = inject(8, 3, CodeBase::One).unwrap();
        assert_eq!(plan.ilen(), 8);
        assert_eq!(plan.isize(), 36 * 3);
    }

    #[test]
    fn recovery_agrees_with_bva_at_equal_units() {
        // With γ = offset above every baseline size, both matchers resolve
        // the same code from the same shifted observation.
        let baseline = BaselineView::from_observations(&[
            Observation {
                query_tag: 0,
                rlp: 1,
                rsp: 17,
                window: 0,
            },
            Observation {
                query_tag: 1,
                rlp: 2,
                rsp: 29,
                window: 0,
            },
        ]);
        let unit = 30;
        let targets: Vec<TargetRecord> = (0..8)
            .map(|u| {
                TargetRecord::from_observation(Observation {
                    query_tag: 10 + u,
                    rlp: 3,
                    rsp: 17 + u * unit,
                    window: 1,
                })
            })
            .collect();
        let dec = recover(&baseline, &targets, 8, unit, CodeBase::Zero);
        let bva = bva::recover(&baseline, &targets, 8, unit, CodeBase::Zero);
        assert_eq!(dec, bva);
        assert_eq!(dec, (0..8).map(Some).collect::<Vec<_>>());
    }
}
