//! Multiple-round comparator: per round, split the surviving candidates
//! into k partitions and put partition i into i of the k−1 injected files;
//! the replayed target's response-length delta names its partition.

use std::collections::BTreeSet;

use super::{InjectedFile, InjectionPlan, InteractiveOutcome, ReplayOracle};
use crate::{Error, Result};

pub fn run(oracle: &mut dyn ReplayOracle, n_kw: u32, k: u32) -> Result<InteractiveOutcome> {
    if n_kw == 0 {
        return Err(Error::InvalidArgument("empty keyword universe".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(
            "partition count must be at least 2".into(),
        ));
    }
    let mut outcome = InteractiveOutcome {
        prediction: None,
        rounds: 0,
        ilen: 0,
        isize: 0,
    };
    let mut cands: Vec<u32> = (0..n_kw).collect();
    let mut prev_rlp = oracle.replay()?.rlp;
    while cands.len() > 1 {
        outcome.rounds += 1;
        let chunk = cands.len().div_ceil(k as usize);
        let parts: Vec<&[u32]> = cands.chunks(chunk).collect();
        let mut plan = InjectionPlan::new();
        for j in 1..parts.len() {
            let keywords: BTreeSet<u32> = parts[j..].iter().flat_map(|p| p.iter().copied()).collect();
            let size = keywords.len() as u64;
            plan.push_file(InjectedFile::new(keywords, size)?);
        }
        oracle.inject(&plan)?;
        outcome.ilen += plan.ilen();
        outcome.isize += plan.isize();
        let rlp = oracle.replay()?.rlp;
        let delta = rlp.saturating_sub(prev_rlp) as usize;
        prev_rlp = rlp;
        if delta >= parts.len() {
            return Ok(outcome);
        }
        cands = parts[delta].to_vec();
    }
    outcome.prediction = cands.first().copied();
    Ok(outcome)
}
