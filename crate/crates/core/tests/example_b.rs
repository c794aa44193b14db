use lccl_core::actors::{ActorId, MetricKind, RejectReason};
use lccl_core::engine::trace::{parse_trace, ActionRecord};
use lccl_core::harness::bundled::example_b;
use lccl_core::harness::run::run_scenario;
use lccl_core::revocation::{CertificateId, ClusterId};

fn names(list: &[CertificateId]) -> Vec<&str> {
    list.iter().map(CertificateId::as_str).collect()
}

#[test]
fn final_lists_and_epochs() {
    let out = run_scenario(&example_b()).unwrap();
    let r = &out.report;
    assert_eq!(
        names(&r.clusters[&ClusterId(1)].final_entries),
        ["V8", "V25", "V5", "V11", "V16", "V19", "V15", "V12", "V2", "V3"]
    );
    assert_eq!(r.clusters[&ClusterId(1)].final_epoch, 0);
    assert_eq!(names(&r.clusters[&ClusterId(6)].final_entries), ["V9"]);
    assert_eq!(r.clusters[&ClusterId(6)].final_epoch, 1);
    for c in [2, 5] {
        assert!(r.clusters[&ClusterId(c)].final_entries.is_empty());
        assert_eq!(r.clusters[&ClusterId(c)].final_epoch, 1);
    }
    assert!(!r.metrics.contains_key(&MetricKind::ZeroListWindow));
}

#[test]
fn detections_take_fifteen_milliseconds() {
    let r = run_scenario(&example_b()).unwrap().report;
    let found: Vec<(&str, u32, Option<u64>)> =
        r.detections.iter().map(|d| (d.vehicle.as_str(), d.origin.0, d.latency_us)).collect();
    assert_eq!(found.len(), 3, "{found:?}");
    for (v, origin, latency) in found {
        assert_eq!(latency, Some(15_000), "{v}");
        let expect = match v {
            "V8" => 2,
            "V25" => 6,
            "V5" => 5,
            other => panic!("{other}"),
        };
        assert_eq!(origin, expect);
    }
}

#[test]
fn c2c_verdicts() {
    let out = run_scenario(&example_b()).unwrap();
    let (_, records) = parse_trace(&out.trace_text()).unwrap();
    let verdicts: Vec<(u64, String, String)> = records
        .iter()
        .filter(|r| r.kind == "deliver:C2C")
        .filter_map(|r| {
            let who = match &r.actor {
                ActorId::Vehicle(v) => v.as_str().to_string(),
                _ => return None,
            };
            r.details.actions.iter().find_map(|a| match a {
                ActionRecord::Accept { .. } => Some((r.time_us / 1_000_000, who.clone(), "accept".to_string())),
                ActionRecord::Reject { reason } => Some((r.time_us / 1_000_000, who.clone(), format!("{reason:?}"))),
                _ => None,
            })
        })
        .collect();
    let has = |t: u64, who: &str, what: &str| verdicts.iter().any(|(a, b, c)| *a == t && b == who && c == what);
    assert!(has(150, "V41", "BadClusterSignature"), "{verdicts:?}");
    assert!(has(160, "V40", "RevokedSender"), "{verdicts:?}");
    assert!(has(170, "V40", "RevokedSender"), "{verdicts:?}");
    assert!(has(180, "V42", "accept"), "{verdicts:?}");
    assert!(has(190, "V42", "RevokedSender"), "{verdicts:?}");

    // the second lookup in the same list is served from the front
    let costs: Vec<u64> = records
        .iter()
        .filter(|r| r.kind == "deliver:C2C" && r.actor == ActorId::Vehicle(CertificateId::new("V40").unwrap()))
        .flat_map(|r| r.details.actions.iter())
        .filter_map(|a| match a {
            ActionRecord::Metric { kind: MetricKind::LookupCost, value, .. } => Some(*value),
            _ => None,
        })
        .collect();
    assert_eq!(costs, [2, 1]);
    assert_eq!(out.report.c2c.rejected[&RejectReason::BadClusterSignature], 1);
}

#[test]
fn reruns_are_byte_identical() {
    let a = run_scenario(&example_b()).unwrap();
    let b = run_scenario(&example_b()).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.report, b.report);
    let other = run_scenario(&example_b().with_seed(99)).unwrap();
    assert_eq!(other.report.clusters, a.report.clusters);
}

#[test]
fn trace_matches_frozen_golden() {
    let golden = include_str!("golden/example_b.ndjson");
    let out = run_scenario(&example_b()).unwrap();
    let fresh = out.trace_text();
    if let Some((i, (a, b))) = golden.lines().zip(fresh.lines()).enumerate().find(|(_, (a, b))| a != b) {
        panic!("line {} differs\n golden: {a}\n  fresh: {b}", i + 1);
    }
    assert_eq!(golden.lines().count(), fresh.lines().count());
}
