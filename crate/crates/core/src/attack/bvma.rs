//! Binary volumetric attack with multiple injections folded into one round:
//! bit files sized 2^{i−1}+⌈#W/2⌉ give every keyword a distinct pair of
//! injected length (its popcount) and injected size, so recovery can match
//! both volume coordinates against baseline rows without a tunable γ.

use std::collections::BTreeSet;

use super::{BaselineView, CodeBase, InjectedFile, InjectionPlan, TargetRecord};
use crate::{Error, Result};

fn half(n_kw: u32) -> u64 {
    (n_kw as u64).div_ceil(2)
}

/// Injected (length, size) of one code: (popcount, code + popcount·half).
fn injected_volume(code: u64, half: u64) -> (u64, u64) {
    let pc = code.count_ones() as u64;
    (pc, code + pc * half)
}

/// The one code explaining a target's volume growth over its own baseline
/// row, if any: the length delta fixes the popcount, the size delta then
/// fixes the code, and the popcount check rejects every noisy delta.
fn decode_linked(obs: &crate::sse::Observation, row: &super::TagBaseline, h: u64) -> Option<u64> {
    let dl = obs.rlp.checked_sub(row.rlp)?;
    let code = obs.rsp.checked_sub(row.rsp)?.checked_sub(dl.checked_mul(h)?)?;
    (u64::from(code.count_ones()) == dl).then_some(code)
}

pub fn inject(n_kw: u32, base: CodeBase) -> Result<InjectionPlan> {
    if n_kw < 2 {
        return Err(Error::InvalidArgument(
            "bit-pair encoding needs at least two keywords".into(),
        ));
    }
    let h = half(n_kw);
    let mut plan = InjectionPlan::new();
    for bit in 0..base.bits(n_kw) {
        let keywords: BTreeSet<u32> = (0..n_kw)
            .filter(|&u| base.code(u) >> bit & 1 == 1)
            .collect();
        plan.push_file(InjectedFile::new(keywords, (1 << bit) + h)?);
    }
    Ok(plan)
}

/// Per target: codes whose (length, size) shift lands on some baseline row;
/// with `use_sp`, the surviving row closest in query frequency decides.
///
/// A target whose query tag repeats a baseline query is pinned to that row
/// outright when `use_sp` is set: volume pairs are injective, so the delta
/// either decodes to exactly one code or the attack abstains. Tags never
/// seen in the baseline fall back to frequency matching.
pub fn recover(
    baseline: &BaselineView,
    targets: &[TargetRecord],
    n_kw: u32,
    base: CodeBase,
    use_sp: bool,
) -> Vec<Option<u32>> {
    let h = half(n_kw);
    targets
        .iter()
        .map(|t| {
            if use_sp {
                if let Some(row) = baseline.tag(t.obs.query_tag) {
                    return decode_linked(&t.obs, row, h).and_then(|c| base.keyword(c, n_kw));
                }
            }
            let mut best: Option<(f64, u64)> = None;
            for code in base.codes(n_kw) {
                let (pc, size) = injected_volume(code, h);
                let (Some(tl), Some(ts)) =
                    (t.obs.rlp.checked_sub(pc), t.obs.rsp.checked_sub(size))
                else {
                    continue;
                };
                let mut rows = baseline
                    .rows()
                    .filter(|(_, b)| b.rlp == tl && b.rsp == ts)
                    .peekable();
                if rows.peek().is_none() {
                    continue;
                }
                let gap = match (use_sp, t.freq) {
                    (true, Some(freq)) => rows
                        .map(|(&tag, _)| (freq - baseline.freq(tag)).abs())
                        .fold(f64::INFINITY, f64::min),
                    _ => 0.0,
                };
                if best.is_none_or(|(g, _)| gap < g) {
                    best = Some((gap, code));
                }
            }
            best.and_then(|(_, code)| base.keyword(code, n_kw))
        })
        .collect()
}
