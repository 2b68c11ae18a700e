use std::path::PathBuf;

use dvca_core::ads::faults::load_faults;
use dvca_core::ads::AdsConfig;
use dvca_core::dvca::{run_and_attribute, AttributeOptions, Strategy};
use dvca_core::middleware::trace::EndReason;
use dvca_core::scenario::load_scenario;
use dvca_core::world::rtest;
use dvca_core::{ComponentId, DvcaError, OracleConfig, RunConfig, Scenario, Trace};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(n: u32) -> Scenario {
    load_scenario(root().join(format!("scenarios/cs{n}.json"))).unwrap()
}

fn config(fault: Option<&str>) -> RunConfig {
    let faults = fault.map(|f| load_faults(root().join("bench").join(f)).unwrap()).unwrap_or_default();
    RunConfig { ads: AdsConfig::with_faults(faults), ..RunConfig::default() }
}

fn run(sc: &Scenario, cfg: &RunConfig) -> Trace {
    rtest(sc, &cfg.ads, &cfg.oracle).unwrap().2
}

#[test]
fn nominal_run_is_complete_and_counts_by_period() {
    let sc = scenario(3);
    let trace = run(&sc, &config(None));
    assert!(trace.verdict.passed);
    assert_eq!(trace.end, EndReason::Completed);
    // 10 ms components publish 100 times a second, 100 ms components 10 times.
    let secs = sc.t_max_ms.ms() / 1000;
    let expected = (2 * 100 + 3 * 10) * secs as usize;
    assert_eq!(trace.total_messages(), expected);
    assert_eq!(trace.row(ComponentId::Localization).len(), 100 * secs as usize);
}

#[test]
fn repeated_runs_serialize_identically() {
    let sc = scenario(2);
    let cfg = config(Some("cs2_perc_lon.json"));
    let a = run(&sc, &cfg);
    let b = run(&sc, &cfg);
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(a.digest(), b.digest());
}

#[test]
fn trace_round_trips_through_jsonl() {
    let sc = scenario(4);
    let trace = run(&sc, &config(Some("cs4_perc_miss.json")));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    trace.save(&path).unwrap();
    let back = Trace::load(&path).unwrap();
    assert_eq!(back.digest(), trace.digest());
    assert_eq!(back.total_messages(), trace.total_messages());
    assert_eq!(back.verdict, trace.verdict);
}

#[test]
fn corrupt_traces_are_rejected() {
    let trace = run(&scenario(5), &config(None));
    let text = trace.to_jsonl();
    let no_header: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    assert!(matches!(Trace::from_jsonl(&no_header), Err(DvcaError::Parse(_))));
    let garbage = format!("{text}{{not json\n");
    assert!(matches!(Trace::from_jsonl(&garbage), Err(DvcaError::Parse(_))));
    // Dropping one message leaves a gap in its row.
    let idx = text.lines().position(|l| l.contains("\"record\":\"message\"")).unwrap();
    let gapped: String = text.lines().enumerate().filter(|(i, _)| *i != idx).map(|(_, l)| format!("{l}\n")).collect();
    assert!(Trace::from_jsonl(&gapped).is_err());
}

#[test]
fn passing_scenario_has_nothing_to_attribute() {
    let r = run_and_attribute(&scenario(1), &config(None), &AttributeOptions::default());
    assert!(matches!(r, Err(DvcaError::NoViolation)));
}

#[test]
fn binary_and_interval_strategies_agree_on_component() {
    let sc = scenario(3);
    let cfg = config(Some("cs3_perc_miss.json"));
    let bin = run_and_attribute(&sc, &cfg, &AttributeOptions::default()).unwrap().1;
    let opts = AttributeOptions { strategy: Strategy::IntervalDd, ..AttributeOptions::default() };
    let dd = run_and_attribute(&sc, &cfg, &opts).unwrap().1;
    assert_eq!(bin.component_vi, ComponentId::Perception);
    assert_eq!(dd.component_vi, ComponentId::Perception);
    assert!(bin.focus_fault_injected);
    let (a, b) = dd.interval.expect("interval strategy reports its interval");
    assert!(a <= b && b <= dd.states);
    assert_eq!(dd.focus_message.component, ComponentId::Perception);
}

#[test]
fn planning_attribution_needs_one_dtest() {
    let (trace, report) = run_and_attribute(&scenario(3), &config(Some("cs3_plan_path.json")), &AttributeOptions::default()).unwrap();
    assert_eq!(report.component_vi, ComponentId::Planning);
    assert_eq!(report.simulations, 2);
    let focus = trace.message(report.focus_message).unwrap();
    assert!(focus.fault_injected);
    assert!(!report.tarantula.is_empty());
    assert_eq!(report.verdict_matrix.entries.len(), trace.total_messages());
}

#[test]
fn oracle_config_changes_verdict() {
    let sc = scenario(3);
    let strict = RunConfig { oracle: OracleConfig { safe_distance: 50.0, ..OracleConfig::default() }, ..config(None) };
    assert!(!run(&sc, &strict).verdict.passed);
}
