//! Message-level attribution: the focus message within the attributed component.

use std::collections::HashMap;

use rayon::prelude::*;

use super::search::{binary_boundary, interval_dd, linear_scan, BoundaryResult, Probe, ScanResult};
use crate::error::{DvcaError, Result};
use crate::middleware::trace::Trace;
use crate::middleware::{ComponentId, MessageId};
use crate::oracles::{planning_contexts, planning_message_violates, OracleConfig};
use crate::substitutes::{dtest, State, SubstitutionMode, SubstitutionPlan};

/// Memoized `dtest` predicates over the states of one failing trace.
///
/// Runs that substitute from different states but engage on the same first
/// component output are identical, so results are cached by that output.
pub struct SuffixOracle<'a> {
    trace: &'a Trace,
    states: &'a [State],
    component: ComponentId,
    /// First component output at or after each state (index 0 is state 1).
    first_at: Vec<Option<MessageId>>,
    memo: HashMap<Option<MessageId>, bool>,
    interval_memo: HashMap<(Option<MessageId>, usize), bool>,
    dtests: usize,
}

impl<'a> SuffixOracle<'a> {
    pub fn new(trace: &'a Trace, states: &'a [State], component: ComponentId) -> Self {
        let mut first_at = vec![None; states.len()];
        let mut next = None;
        for (i, s) in states.iter().enumerate().rev() {
            if let Some(m) = s.component_messages(component).next() {
                next = Some(*m);
            }
            first_at[i] = next;
        }
        let mut memo = HashMap::new();
        // Substituting nothing reproduces the original failing run.
        memo.insert(None, false);
        SuffixOracle { trace, states, component, first_at, memo, interval_memo: HashMap::new(), dtests: 0 }
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn dtests(&self) -> usize {
        self.dtests
    }

    /// Records a result obtained elsewhere for the suffix starting at state `s`.
    pub fn seed(&mut self, s: usize, passed: bool) {
        self.memo.insert(self.first_at[s - 1], passed);
    }

    fn plan_from(&self, s: usize) -> SubstitutionPlan {
        SubstitutionPlan::single(self.component, SubstitutionMode::IdealFromState(self.states[s - 1].state_ref()))
    }

    /// `f(s)`: does substituting from state `s` onwards remove the violation?
    pub fn suffix(&mut self, s: usize) -> Result<bool> {
        let key = self.first_at[s - 1];
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let (v, _) = dtest(self.trace, self.plan_from(s))?;
        self.dtests += 1;
        self.memo.insert(key, v.passed);
        Ok(v.passed)
    }

    /// `f` over every state, running missing probes in parallel.
    pub fn all_suffixes(&mut self) -> Result<Vec<bool>> {
        let mut todo: Vec<(Option<MessageId>, usize)> = Vec::new();
        for s in 1..=self.n() {
            let key = self.first_at[s - 1];
            if !self.memo.contains_key(&key) && !todo.iter().any(|(k, _)| *k == key) {
                todo.push((key, s));
            }
        }
        let results: Vec<(Option<MessageId>, bool)> = todo
            .par_iter()
            .map(|(key, s)| dtest(self.trace, self.plan_from(*s)).map(|(v, _)| (*key, v.passed)))
            .collect::<Result<_>>()?;
        self.dtests += results.len();
        self.memo.extend(results);
        Ok((1..=self.n()).map(|s| self.memo[&self.first_at[s - 1]]).collect())
    }

    /// `g(a, b)`: does substituting only the outputs in states `a..=b` help?
    pub fn within(&mut self, a: usize, b: usize) -> Result<bool> {
        let count: usize = self.states[a - 1..b].iter().map(|s| s.component_messages(self.component).count()).sum();
        let key = (self.first_at[a - 1], count);
        if count == 0 {
            return Ok(false);
        }
        if let Some(&v) = self.interval_memo.get(&key) {
            return Ok(v);
        }
        let mode = SubstitutionMode::IdealWithinStates { from: self.states[a - 1].state_ref(), count };
        let (v, _) = dtest(self.trace, SubstitutionPlan::single(self.component, mode))?;
        self.dtests += 1;
        self.interval_memo.insert(key, v.passed);
        Ok(v.passed)
    }

    /// Last output of the component recorded in state `s`.
    pub fn last_in_state(&self, s: usize) -> Option<MessageId> {
        self.states[s - 1].component_messages(self.component).last().copied()
    }

    pub fn first_in_state(&self, s: usize) -> Option<MessageId> {
        self.states[s - 1].component_messages(self.component).next().copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessageOutcome {
    pub focus: MessageId,
    /// State holding the focus message.
    pub state: usize,
    pub probes: Vec<Probe>,
}

/// Binary search for the last state from which substitution still removes
/// the violation; the focus is the component's last output in that state.
/// `f(1)` must already be seeded as ✓.
pub fn attribute_message_nonplanning(oracle: &mut SuffixOracle<'_>) -> Result<MessageOutcome> {
    let BoundaryResult { left, probes } = binary_boundary(oracle.n(), |s| oracle.suffix(s))?;
    // ✓ at `left` and ✗ at `left + 1` means an output of the component lies
    // in `left`; with a single state the earliest later state holds it.
    let focus = oracle
        .last_in_state(left)
        .or_else(|| oracle.first_at[left - 1])
        .ok_or_else(|| DvcaError::DegenerateInput(format!("{} published nothing", oracle.component)))?;
    Ok(MessageOutcome { focus, state: left, probes })
}

/// Exhaustive suffix scan used to audit the binary search.
pub fn monotonicity_audit(oracle: &mut SuffixOracle<'_>) -> Result<ScanResult> {
    Ok(linear_scan(oracle.all_suffixes()?))
}

/// Interval variant: the minimal state interval whose substitution alone
/// removes the violation. The focus is the component's first output in it.
pub fn attribute_message_interval(oracle: &mut SuffixOracle<'_>) -> Result<((usize, usize), MessageOutcome)> {
    let ((a, b), probes) = interval_dd(oracle.n(), |a, b| oracle.within(a, b))?;
    let focus = (a..=b)
        .find_map(|s| oracle.first_in_state(s))
        .or_else(|| oracle.first_at[a - 1])
        .ok_or_else(|| DvcaError::DegenerateInput(format!("{} published nothing", oracle.component)))?;
    Ok(((a, b), MessageOutcome { focus, state: a, probes }))
}

/// First planning output that would violate a driving specification if
/// executed as planned. Needs no re-simulation.
pub fn attribute_message_planning(trace: &Trace, cfg: &OracleConfig) -> Result<MessageId> {
    let ctxs = planning_contexts(trace, cfg);
    trace
        .row(ComponentId::Planning)
        .iter()
        .zip(ctxs.iter())
        .find(|(m, ctx)| m.planning().is_some_and(|p| planning_message_violates(p, m.t_pub, ctx, cfg)))
        .map(|(m, _)| m.id())
        .ok_or(DvcaError::NoViolatingPlanningMessage)
}
