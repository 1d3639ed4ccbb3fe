//! Binary-search comparator: each round injects one file holding half the
//! surviving candidates; the replayed target's response-size delta says
//! which side it fell on.

use std::collections::BTreeSet;

use super::{InjectedFile, InjectionPlan, InteractiveOutcome, ReplayOracle};
use crate::{Error, Result};

pub fn run(oracle: &mut dyn ReplayOracle, n_kw: u32) -> Result<InteractiveOutcome> {
    if n_kw == 0 {
        return Err(Error::InvalidArgument("empty keyword universe".into()));
    }
    let mut outcome = InteractiveOutcome {
        prediction: None,
        rounds: 0,
        ilen: 0,
        isize: 0,
    };
    let mut cands: Vec<u32> = (0..n_kw).collect();
    let mut prev_rsp = oracle.replay()?.rsp;
    while cands.len() > 1 {
        outcome.rounds += 1;
        let cut = cands.len().div_ceil(2);
        let half: BTreeSet<u32> = cands[..cut].iter().copied().collect();
        let size = half.len() as u64;
        let mut plan = InjectionPlan::new();
        plan.push_file(InjectedFile::new(half, size)?);
        oracle.inject(&plan)?;
        outcome.ilen += 1;
        outcome.isize += size;
        let rsp = oracle.replay()?.rsp;
        let delta = rsp.saturating_sub(prev_rsp);
        prev_rsp = rsp;
        if delta == size {
            cands.truncate(cut);
        } else if delta == 0 {
            cands.drain(..cut);
        } else {
            return Ok(outcome);
        }
    }
    outcome.prediction = cands.first().copied();
    Ok(outcome)
}
