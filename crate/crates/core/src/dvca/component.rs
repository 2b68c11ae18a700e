//! Component-level attribution: which component's substitute removes the violation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DvcaError, Result};
use crate::middleware::trace::Trace;
use crate::middleware::ComponentId;
use crate::substitutes::{dtest, SubstitutionPlan};

/// Outcome of one component-level re-run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentProbe {
    /// Substituted components, joined with `+`.
    pub substituted: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentOutcome {
    pub component: ComponentId,
    pub probes: Vec<ComponentProbe>,
}

impl ComponentOutcome {
    pub fn dtests(&self) -> usize {
        self.probes.len()
    }
}

/// Finds the violation-inducing component of a failing trace.
///
/// Planning has no substitute, so it is tested first by idealizing the other
/// four together; if the violation survives, planning is responsible.
pub fn attribute_component(trace: &Trace, parallel: bool) -> Result<ComponentOutcome> {
    if trace.verdict.passed {
        return Err(DvcaError::NoViolation);
    }
    let others = ComponentId::SUBSTITUTABLE;
    let (combined, _) = dtest(trace, SubstitutionPlan::ideal(others))?;
    let mut probes = vec![ComponentProbe { substituted: others.map(|c| c.name()).join("+"), passed: combined.passed }];
    if !combined.passed {
        return Ok(ComponentOutcome { component: ComponentId::Planning, probes });
    }
    let run = |c: &ComponentId| dtest(trace, SubstitutionPlan::ideal([*c])).map(|(v, _)| (*c, v.passed));
    let singles: Vec<(ComponentId, bool)> = if parallel {
        others.par_iter().map(run).collect::<Result<_>>()?
    } else {
        others.iter().map(run).collect::<Result<_>>()?
    };
    probes.extend(singles.iter().map(|(c, ok)| ComponentProbe { substituted: c.name().into(), passed: *ok }));
    match singles.iter().find(|(_, ok)| *ok) {
        Some((c, _)) => Ok(ComponentOutcome { component: *c, probes }),
        None => Err(DvcaError::Unattributable { outcomes: probes.into_iter().map(|p| (p.substituted, p.passed)).collect() }),
    }
}
