//! Search strategies over state indices, independent of simulation.
//!
//! `f(s)` is true (✓) when substituting the component from state `s`
//! onwards removes the violation. The original run is `f(n + 1) = ✗`.

use std::collections::HashMap;

use crate::error::Result;

/// One predicate evaluation, in the order it was requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Probe {
    pub from: usize,
    pub to: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryResult {
    /// Largest state index known to satisfy `f`.
    pub left: usize,
    pub probes: Vec<Probe>,
}

/// Binary search for the ✓/✗ boundary over `1..=n`, given that `f(1)` is ✓.
///
/// Evaluates `f(n)` first, then bisects; at most `⌈log2 n⌉ + 1` calls.
pub fn binary_boundary(n: usize, mut f: impl FnMut(usize) -> Result<bool>) -> Result<BoundaryResult> {
    assert!(n >= 1, "binary_boundary needs at least one state");
    let mut probes = Vec::new();
    if n == 1 {
        return Ok(BoundaryResult { left: 1, probes });
    }
    let last = f(n)?;
    probes.push(Probe { from: n, to: n, passed: last });
    if last {
        return Ok(BoundaryResult { left: n, probes });
    }
    let (mut left, mut right) = (1usize, n);
    while left + 1 < right {
        let mid = left + (right - left) / 2;
        let ok = f(mid)?;
        probes.push(Probe { from: mid, to: mid, passed: ok });
        if ok {
            left = mid;
        } else {
            right = mid;
        }
    }
    Ok(BoundaryResult { left, probes })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanResult {
    /// Last index with `f` ✓, if any.
    pub last_pass: Option<usize>,
    /// Indices where `f` is ✓ although some earlier index was ✗.
    pub non_monotone: Vec<usize>,
    pub values: Vec<bool>,
}

impl ScanResult {
    pub fn monotone(&self) -> bool {
        self.non_monotone.is_empty()
    }
}

/// Exhaustive scan of precomputed values `f(1..=n)`.
pub fn linear_scan(values: Vec<bool>) -> ScanResult {
    let mut seen_fail = false;
    let mut non_monotone = Vec::new();
    let mut last_pass = None;
    for (i, &ok) in values.iter().enumerate() {
        if ok {
            last_pass = Some(i + 1);
            if seen_fail {
                non_monotone.push(i + 1);
            }
        } else {
            seen_fail = true;
        }
    }
    ScanResult { last_pass, non_monotone, values }
}

/// Interval partition search. `g(a, b)` is ✓ when substituting only the
/// outputs in states `a..=b` removes the violation. The full interval is
/// assumed ✓. Returns the interval found and the probes made.
pub fn interval_dd(n: usize, g: impl FnMut(usize, usize) -> Result<bool>) -> Result<((usize, usize), Vec<Probe>)> {
    assert!(n >= 1, "interval_dd needs at least one state");
    let mut dd = IntervalDd { g, memo: HashMap::new(), probes: Vec::new() };
    let r = dd.attribute(1, n, n / 2)?;
    Ok((r, dd.probes))
}

struct IntervalDd<G> {
    g: G,
    memo: HashMap<(usize, usize), bool>,
    probes: Vec<Probe>,
}

impl<G: FnMut(usize, usize) -> Result<bool>> IntervalDd<G> {
    fn test(&mut self, a: usize, b: usize) -> Result<bool> {
        if let Some(&v) = self.memo.get(&(a, b)) {
            return Ok(v);
        }
        let v = (self.g)(a, b)?;
        self.probes.push(Probe { from: a, to: b, passed: v });
        self.memo.insert((a, b), v);
        Ok(v)
    }

    fn attribute(&mut self, start: usize, end: usize, step: usize) -> Result<(usize, usize)> {
        if step == 0 || start == end {
            return Ok((start, end));
        }
        let len = end - start + 1;
        let step = step.min(len);
        let shrink = |a: usize, b: usize| (b - a + 1) < len;
        // Prefix and suffix of width `step`.
        let pre = (start, start + step - 1);
        if shrink(pre.0, pre.1) && self.test(pre.0, pre.1)? {
            return self.attribute(pre.0, pre.1, step / 2);
        }
        let suf = (end + 1 - step, end);
        if shrink(suf.0, suf.1) && self.test(suf.0, suf.1)? {
            return self.attribute(suf.0, suf.1, step / 2);
        }
        // Their complements. Halving may not drop the step to zero while the
        // complement still spans several states.
        let rest_step = (step / 2).max(1);
        if start + step <= end && self.test(start + step, end)? {
            return self.attribute(start + step, end, rest_step);
        }
        if end >= start + step && self.test(start, end - step)? {
            return self.attribute(start, end - step, rest_step);
        }
        self.attribute(start, end, step / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_finds_threshold() {
        for n in 1..40 {
            for k in 1..=n {
                let mut calls = 0;
                let r = binary_boundary(n, |s| {
                    calls += 1;
                    Ok(s <= k)
                })
                .unwrap();
                assert_eq!(r.left, k, "n={n} k={k}");
                let bound = (n as f64).log2().ceil() as usize + 1;
                assert!(calls <= bound, "n={n} calls={calls}");
            }
        }
    }

    #[test]
    fn scan_flags_non_monotone() {
        let r = linear_scan(vec![true, false, true, false]);
        assert_eq!(r.last_pass, Some(3));
        assert_eq!(r.non_monotone, vec![3]);
        assert!(linear_scan(vec![true, true, false]).monotone());
    }

    #[test]
    fn walkthrough_sequence() {
        // Only substituting the outputs of state 3 helps.
        let ((a, b), probes) = interval_dd(4, |a, b| Ok(a <= 3 && 3 <= b)).unwrap();
        assert_eq!((a, b), (3, 3));
        let seq: Vec<_> = probes.iter().map(|p| (p.from, p.to, p.passed)).collect();
        assert_eq!(seq, vec![(1, 2, false), (3, 4, true), (3, 3, true)]);
    }

    #[test]
    fn single_state_interval() {
        let (r, probes) = interval_dd(1, |_, _| Ok(true)).unwrap();
        assert_eq!(r, (1, 1));
        assert!(probes.is_empty());
    }
}
