//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dvca_core::ads::faults::load_faults;
use dvca_core::ads::AdsConfig;
use dvca_core::bench::{run_bench, BenchConfig, BenchRow, BenchSummary};
use dvca_core::dvca::search::interval_dd;
use dvca_core::dvca::{tarantula_scores, AttributeOptions, AuditStatus};
use dvca_core::geom::min_obb_distance;
use dvca_core::middleware::trace::EgoSample;
use dvca_core::oracles::{check_mission, check_safe_distance, check_speeding};
use dvca_core::scenario::load_scenario;
use dvca_core::world::rtest;
use dvca_core::{ComponentId, OracleConfig, SimTime, Trace, Vec2, ViolationKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const PARALLEL: usize = 4;
const TIME_LIMIT_S: f64 = 600.0;

struct Outcome {
    lines: Vec<(String, bool, String)>,
}

impl Outcome {
    fn record(&mut self, name: &str, ok: bool, detail: String) {
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((name.to_string(), ok, detail));
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// What an instance's original run looks like, computed outside the engine.
struct Original {
    id: String,
    expected: ViolationKind,
    observed: Option<ViolationKind>,
    messages: usize,
    deterministic: bool,
}

fn original_runs(bench: &Path, cfg: &BenchConfig) -> Vec<Original> {
    let base = bench.parent().unwrap();
    cfg.instances
        .par_iter()
        .map(|inst| {
            let sc = load_scenario(base.join(&inst.scenario)).unwrap();
            let ads = AdsConfig::with_faults(load_faults(base.join(&inst.fault)).unwrap());
            let run = || rtest(&sc, &ads, &OracleConfig::default()).unwrap().2;
            let (a, b): (Trace, Trace) = (run(), run());
            Original {
                id: inst.id.clone(),
                expected: inst.expected_violation,
                observed: a.verdict.first_kind(),
                messages: ComponentId::PRIORITY.iter().map(|c| a.row(*c).len()).sum(),
                deterministic: a.to_jsonl().as_bytes() == b.to_jsonl().as_bytes() && a.digest() == b.digest(),
            }
        })
        .collect()
}

fn rows_for(summary: &BenchSummary, c: ComponentId) -> Vec<&BenchRow> {
    summary.rows.iter().filter(|r| r.expected_component == c).collect()
}

fn frac(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn criterion_1(out: &mut Outcome, cfg: &BenchConfig, s: &BenchSummary, wall: f64) {
    let kinds: BTreeSet<&str> = s.rows.iter().map(|r| r.fault_kind.as_str()).collect();
    let per: BTreeMap<ComponentId, usize> = ComponentId::PRIORITY.iter().map(|c| (*c, rows_for(s, *c).len())).collect();
    let archetypes: BTreeSet<String> =
        cfg.instances.iter().map(|i| i.scenario.file_stem().unwrap().to_string_lossy().into_owned()).collect();
    let substitutable = [ComponentId::Perception, ComponentId::Prediction, ComponentId::Planning, ComponentId::Control];
    let coverage = kinds.len() >= 13 && substitutable.iter().all(|c| per[c] >= 4) && per[&ComponentId::Localization] >= 1 && archetypes.len() == 5;
    let ok_rows = s.rows.iter().filter(|r| r.component_ok).count();
    let ok = coverage && ok_rows == s.rows.len() && !s.rows.is_empty() && wall < TIME_LIMIT_S;
    out.record(
        "1 benchmark reproduction",
        ok,
        format!(
            "{} instances, {} fault kinds, {} scenarios, per component {:?}; component success {}/{}; {:.1} s with --parallel {PARALLEL}",
            s.rows.len(),
            kinds.len(),
            archetypes.len(),
            per.iter().map(|(c, n)| format!("{c}={n}")).collect::<Vec<_>>(),
            ok_rows,
            s.rows.len(),
            wall
        ),
    );
}

fn criterion_2(out: &mut Outcome, s: &BenchSummary) {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in ComponentId::PRIORITY {
        let rows = rows_for(s, c);
        if rows.is_empty() {
            continue;
        }
        let hits = rows.iter().filter(|r| r.message_ok).count();
        let rate = frac(hits, rows.len());
        if c == ComponentId::Control {
            let misses_near = rows.iter().filter(|r| !r.message_ok).all(|r| r.message_near);
            ok &= rate >= 0.8 && misses_near;
        } else {
            ok &= hits == rows.len();
        }
        parts.push(format!("{c} {:.0}%", 100.0 * rate));
    }
    let overall = frac(s.rows.iter().filter(|r| r.message_ok).count(), s.rows.len());
    ok &= overall >= 0.9;
    out.record("2 message-level success", ok, format!("overall {:.1}%; {}", 100.0 * overall, parts.join(", ")));
}

fn criterion_3(out: &mut Outcome, s: &BenchSummary, originals: &[Original]) {
    let by_id: BTreeMap<&str, &Original> = originals.iter().map(|o| (o.id.as_str(), o)).collect();
    let mut bad = Vec::new();
    let mut min_m = usize::MAX;
    let mut min_rate = f64::INFINITY;
    for r in s.rows.iter().filter(|r| r.component_ok) {
        let m = by_id[r.id.as_str()].messages;
        let want = 1.0 - 1.0 / m as f64;
        let rate = r.reduction_rate.unwrap_or(f64::NAN);
        min_m = min_m.min(m);
        min_rate = min_rate.min(rate);
        if r.total_messages != m || rate != want || m < 600 || rate < 0.998 {
            bad.push(r.id.clone());
        }
    }
    out.record(
        "3 reduction rate",
        bad.is_empty(),
        format!("formula exact against independent message counts; min |M| = {min_m}, min rate = {min_rate:.6}; mismatches {bad:?}"),
    );
}

fn criterion_4(out: &mut Outcome, s: &BenchSummary) {
    let mut bad = Vec::new();
    let mut max_comp = 0;
    let mut max_slack = i64::MIN;
    for r in &s.rows {
        max_comp = max_comp.max(r.component_dtests);
        let ok = if r.expected_component == ComponentId::Planning {
            r.component_dtests <= 5 && r.simulations == 2
        } else {
            let bound = (r.states as f64).log2().ceil() as usize + 2;
            max_slack = max_slack.max(r.message_dtests as i64 - bound as i64);
            r.component_dtests <= 5 && r.message_dtests <= bound
        };
        if !ok || r.error.is_some() {
            bad.push(r.id.clone());
        }
    }
    out.record(
        "4 dtest budget",
        bad.is_empty(),
        format!("max component-level {max_comp}; message-level worst margin {max_slack} vs ceil(log2 n)+2; planning simulations = 2; violations {bad:?}"),
    );
}

fn criterion_5(out: &mut Outcome, originals: &[Original]) {
    let bad: Vec<_> = originals.iter().filter(|o| !o.deterministic).map(|o| o.id.clone()).collect();
    out.record("5 determinism", bad.is_empty(), format!("{} instances run twice, byte-identical traces; differing {bad:?}", originals.len()));
}

fn sample(t: u64, x: f64, y: f64, speed: f64) -> EgoSample {
    EgoSample { t: SimTime(t), p: Vec2::new(x, y), heading: 0.0, speed, accel: 0.0, min_dist: None, nearest: None }
}

fn criterion_6(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (common::random_box(&mut rng), common::random_box(&mut rng));
        worst = worst.max((min_obb_distance(&a, &b) - common::sampled_distance(&a, &b)).abs());
    }
    let obb_ok = worst <= 1e-3;

    // Safe distance against the CS3 cone, random ego positions and margins.
    let sc = load_scenario(root().join("scenarios/cs3.json")).unwrap();
    let mut monotone = true;
    for _ in 0..500 {
        let log: Vec<_> =
            (0..20).map(|i| sample(10 * i, rng.gen_range(60.0..90.0), rng.gen_range(-3.0..3.0), 1.0)).collect();
        let c1 = rng.gen_range(0.0..2.0);
        let c2 = c1 + rng.gen_range(0.0..2.0);
        if let Some(h1) = check_safe_distance(&log, &sc, c1) {
            monotone &= check_safe_distance(&log, &sc, c2).is_some_and(|h2| h2.t <= h1.t);
        }
    }

    let limit = sc.map.lanes[0].speed_limit;
    let tol = OracleConfig::default().speed_tolerance;
    let speeding_ok = check_speeding(&[], &sc.map, tol).is_none()
        && check_speeding(&[sample(0, 10.0, 0.0, limit + tol)], &sc.map, tol).is_none()
        && check_speeding(&[sample(0, 10.0, 0.0, limit + tol + 1e-6)], &sc.map, tol).is_some();
    let dest = sc.ego.dest;
    let dtol = OracleConfig::default().dest_tolerance;
    let mission_ok = !check_mission(&[], dest, dtol)
        && check_mission(&[sample(0, dest.x - dtol, dest.y, 0.0)], dest, dtol)
        && !check_mission(&[sample(0, dest.x - dtol - 1e-6, dest.y, 0.0)], dest, dtol);
    out.record(
        "6 oracle properties",
        obb_ok && monotone && speeding_ok && mission_ok,
        format!("OBB vs 10k-point sampling worst error {worst:.2e}; safe-distance monotone {monotone}; speeding boundaries {speeding_ok}; mission boundaries {mission_ok}"),
    );
}

fn criterion_7(out: &mut Outcome, audited: &BenchSummary) {
    let monotone: Vec<&BenchRow> = audited.rows.iter().filter(|r| r.audit != AuditStatus::NotRun).collect();
    let non_monotone: Vec<&str> =
        audited.rows.iter().filter(|r| r.error.as_deref().is_some_and(|e| e.contains("not monotone"))).map(|r| r.id.as_str()).collect();
    let mismatched: Vec<&str> = monotone.iter().filter(|r| r.linear_matches != Some(true)).map(|r| r.id.as_str()).collect();
    let ((a, b), probes) = interval_dd(4, |a, b| Ok(a <= 3 && 3 <= b)).unwrap();
    let seq: Vec<_> = probes.iter().map(|p| (p.from, p.to, p.passed)).collect();
    let walk_ok = (a, b) == (3, 3) && seq == vec![(1, 2, false), (3, 4, true), (3, 3, true)];
    out.record(
        "7 search correctness",
        mismatched.is_empty() && !monotone.is_empty() && walk_ok,
        format!(
            "binary = linear on {}/{} audited instances (non-monotone {non_monotone:?}); 4-state walkthrough probes {seq:?} -> [{a},{b}]",
            monotone.len() - mismatched.len(),
            monotone.len()
        ),
    );
}

fn criterion_8(out: &mut Outcome) {
    let m = |v: &[(&str, usize)]| v.iter().map(|(k, n)| (k.to_string(), *n)).collect::<BTreeMap<_, _>>();
    let passed = m(&[("b1", 0), ("b2", 1), ("b3", 1), ("b4", 1), ("b5", 0)]);
    let failed = m(&[("b1", 1), ("b2", 1), ("b3", 0), ("b4", 1), ("b5", 0)]);
    let want = [("b1", 1.0), ("b2", 0.5), ("b3", 0.0), ("b4", 0.5), ("b5", 0.0)];
    let got: BTreeMap<String, f64> =
        tarantula_scores::<f64>(&passed, &failed, 1, 1).unwrap().into_iter().map(|s| (s.block, s.score)).collect();
    let worst = want.iter().map(|(b, w)| (got[*b] - w).abs()).fold(0.0, f64::max);
    out.record("8 tarantula", worst <= 1e-12, format!("5-block 1-pass/1-fail matrix, max error {worst:.1e}"));
}

fn criterion_9(out: &mut Outcome, originals: &[Original]) {
    let nominal: Vec<(u32, bool)> = (1..=5)
        .map(|n| {
            let sc = load_scenario(root().join(format!("scenarios/cs{n}.json"))).unwrap();
            (n, rtest(&sc, &AdsConfig::default(), &OracleConfig::default()).unwrap().0.passed)
        })
        .collect();
    let wrong: Vec<String> = originals
        .iter()
        .filter(|o| o.observed != Some(o.expected))
        .map(|o| format!("{} ({:?} vs {:?})", o.id, o.observed, o.expected))
        .collect();
    out.record(
        "9 baseline soundness",
        nominal.iter().all(|(_, p)| *p) && wrong.is_empty(),
        format!("nominal {:?}; {}/{} faults flip to the recorded violation; mismatches {wrong:?}", nominal, originals.len() - wrong.len(), originals.len()),
    );
}

fn main() {
    let bench = root().join("bench/benchmark.json");
    let cfg = BenchConfig::load(&bench).unwrap();
    let mut out = Outcome { lines: Vec::new() };
    let oracle = OracleConfig::default();

    let t0 = Instant::now();
    let plain = run_bench(&bench, &oracle, &AttributeOptions { parallel: true, ..AttributeOptions::default() }, PARALLEL).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    let originals = original_runs(&bench, &cfg);

    criterion_1(&mut out, &cfg, &plain, wall);
    criterion_2(&mut out, &plain);
    criterion_3(&mut out, &plain, &originals);
    criterion_4(&mut out, &plain);
    criterion_5(&mut out, &originals);
    criterion_6(&mut out);
    let audited = run_bench(&bench, &oracle, &AttributeOptions { audit: true, parallel: true, ..AttributeOptions::default() }, PARALLEL).unwrap();
    criterion_7(&mut out, &audited);
    criterion_8(&mut out);
    criterion_9(&mut out, &originals);

    let failed: Vec<&str> = out.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!("{}/{} criteria passed", out.lines.len() - failed.len(), out.lines.len());
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
