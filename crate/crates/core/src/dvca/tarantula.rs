//! Spectrum-based suspiciousness over planner decision tags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{DvcaError, Result};
use crate::middleware::trace::Trace;
use crate::middleware::{ComponentId, MessageId};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suspiciousness<T> {
    pub block: String,
    pub score: T,
}

/// Ranks blocks by `(f/F) / (f/F + p/P)`, highest first, ties by block id.
///
/// Counts are executions covering each block; a zero total contributes a
/// zero ratio. Blocks covered by neither side score zero.
pub fn tarantula_scores<T: Scalar>(
    passed: &BTreeMap<String, usize>,
    failed: &BTreeMap<String, usize>,
    total_passed: usize,
    total_failed: usize,
) -> Result<Vec<Suspiciousness<T>>> {
    if total_passed == 0 && total_failed == 0 {
        return Err(DvcaError::DegenerateInput("no passed or failed executions".into()));
    }
    let ratio = |n: usize, total: usize| if total == 0 { T::zero() } else { T::from_usize(n).unwrap() / T::from_usize(total).unwrap() };
    let mut blocks: Vec<&String> = passed.keys().chain(failed.keys()).collect();
    blocks.sort();
    blocks.dedup();
    let mut out: Vec<Suspiciousness<T>> = blocks
        .into_iter()
        .map(|b| {
            let fr = ratio(failed.get(b).copied().unwrap_or(0), total_failed);
            let pr = ratio(passed.get(b).copied().unwrap_or(0), total_passed);
            let score = if fr + pr == T::zero() { T::zero() } else { fr / (fr + pr) };
            Suspiciousness { block: b.clone(), score }
        })
        .collect();
    out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.block.cmp(&b.block)));
    Ok(out)
}

/// Scores planner tags with the focus plan as the failed execution and the
/// earlier non-violating plans as passed executions.
pub fn planning_suspiciousness(trace: &Trace, focus: MessageId) -> Result<Vec<Suspiciousness<f64>>> {
    let row = trace.row(ComponentId::Planning);
    let mut passed = BTreeMap::new();
    let mut failed = BTreeMap::new();
    let mut n_passed = 0;
    let mut n_failed = 0;
    for m in row.iter().take(focus.seq as usize) {
        let Some(p) = m.planning() else { continue };
        let into = if m.seq == focus.seq {
            n_failed += 1;
            &mut failed
        } else {
            n_passed += 1;
            &mut passed
        };
        for tag in &p.coverage {
            *into.entry(tag.clone()).or_insert(0) += 1;
        }
    }
    tarantula_scores(&passed, &failed, n_passed, n_failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(items: &[(&str, usize)]) -> BTreeMap<String, usize> {
        items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn degenerate_totals() {
        let e = tarantula_scores::<f64>(&BTreeMap::new(), &BTreeMap::new(), 0, 0);
        assert!(matches!(e, Err(DvcaError::DegenerateInput(_))));
    }

    #[test]
    fn ties_break_by_block_id() {
        let s = tarantula_scores::<f64>(&counts(&[]), &counts(&[("b", 1), ("a", 1)]), 1, 1).unwrap();
        assert_eq!(s[0].block, "a");
        assert_eq!(s[1].block, "b");
    }

    #[test]
    fn works_in_f32() {
        let s = tarantula_scores::<f32>(&counts(&[("x", 1)]), &counts(&[("x", 1)]), 1, 1).unwrap();
        assert!((s[0].score - 0.5).abs() < 1e-6);
    }
}
