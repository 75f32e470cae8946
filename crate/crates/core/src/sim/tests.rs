use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, ProptestConfig};
use proptest::strategy::Strategy as Gen;

use super::*;
use crate::charlib::{Application, ModuleVariant, ResourceVector, TaskSpec, VariantStyle};
use crate::data;
use crate::model::{estimate, VariantAssignment};
use crate::rational::q;

fn assign(app: &str, ids: &[&str]) -> VariantAssignment {
    VariantAssignment::from_ids(&data::application(app).unwrap(), &data::library(), ids).unwrap()
}

fn sim(plan: &ExecutionPlan, horizon: u32) -> SimResult {
    simulate(plan, &data::platform(), horizon, SimOptions::default()).unwrap()
}

#[test]
fn depth_single_region_latency() {
    let r = sim(&ExecutionPlan::pr1(assign("depth", &["p1"; 3])), 1);
    assert_eq!(r.first_run_latency_ms, q("54.4"));
    let kinds: Vec<EventKind> = r.latency_timeline.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.len(), 12);
    assert_eq!(&kinds[..4], &[EventKind::PrStart, EventKind::PrEnd, EventKind::RunStart, EventKind::RunEnd]);
}

#[test]
fn activity_batched_steady_state_is_exact() {
    let plan = ExecutionPlan::pr1(assign("activity", &["p1"; 3])).with_batch(64);
    let r = sim(&plan, 256);
    assert_eq!(r.steady_throughput_fps, Some(Rational::new(9744000, 398621)));
    assert!(r.peak_buffer_bytes <= 50_331_648);
    let d = compare(&r, &estimate(&plan, &data::platform()).unwrap());
    assert_eq!(d.latency_abs_ms, Rational::ZERO);
    assert_eq!(d.throughput_abs_fps, Some(Rational::ZERO));
    assert!(!d.exceeds(Rational::ZERO));
}

#[test]
fn empty_application() {
    let app = Application { name: "none".into(), tasks: vec![] };
    let plan = ExecutionPlan::pr1(VariantAssignment::new(&app, vec![]).unwrap());
    let r = sim(&plan, 4);
    assert!(r.timeline.is_empty());
    assert_eq!(r.first_run_latency_ms, Rational::ZERO);
}

#[test]
fn interleaved_latency_includes_first_load() {
    let r = sim(&ExecutionPlan::pr2(assign("depth", &["p2"; 3])), 2);
    assert_eq!(r.first_run_latency_ms, q("43.3"));
    let r = sim(&ExecutionPlan::pr2(assign("activity", &["p2"; 3])), 1);
    assert_eq!(r.first_run_latency_ms, q("92.4"));
    assert!(overlapping_pr(&r.latency_timeline).is_empty());
}

#[test]
fn interleaved_steady_state_matches_estimate() {
    let plan = ExecutionPlan::pr2(assign("depth", &["p2"; 3]));
    let r = sim(&plan, 6);
    let e = estimate(&plan, &data::platform()).unwrap();
    assert_eq!(r.steady_throughput_fps, Some(e.throughput_fps));
}

#[test]
fn staggered_regions_reach_closed_form() {
    let plan = ExecutionPlan::prk(assign("activity", &["p2"; 3]), 2).with_batch(64);
    let r = sim(&plan, 64 * 2 * 4);
    assert_eq!(r.steady_throughput_fps, Some(Rational::new(1600000, 65241)));
    assert!(overlapping_pr(&r.timeline).is_empty());
    let offsets: Vec<Rational> = (0..2)
        .map(|g| r.timeline.iter().find(|e| e.kind == EventKind::PrStart && e.region == g).unwrap().time_ms)
        .collect();
    assert_eq!(offsets, [Rational::ZERO, q("6")]);
}

#[test]
fn reconfiguration_bound_regions_fall_short() {
    // runs much shorter than a load: the single PR port is the bottleneck
    let app = Application::new("pb", vec![TaskSpec { name: "a".into(), input_bytes: 1 }]).unwrap();
    let v = ModuleVariant {
        task: "a".into(),
        variant_id: "v".into(),
        resources: ResourceVector::new(10, q("1"), 1),
        latency_ms: q("0.1"),
        throughput_fps: q("10000"),
        bandwidth_mbps: Rational::ZERO,
        output_bytes: 0,
        style: VariantStyle::Any,
    };
    let plan = ExecutionPlan::prk(VariantAssignment::new(&app, vec![v]).unwrap(), 2);
    let e = estimate(&plan, &data::platform()).unwrap();
    let r = sim(&plan, 40);
    assert!(r.steady_throughput_fps.unwrap() < e.throughput_fps);
    assert!(overlapping_pr(&r.timeline).is_empty());
}

#[test]
fn asic_busy_fractions_show_idle_area() {
    let plan = ExecutionPlan::asic(assign("depth", &["asic_depth"; 3]));
    let r = sim(&plan, 5);
    assert_eq!(r.first_run_latency_ms, q("56.7"));
    let total = q("56.7");
    assert_eq!(r.busy_fraction, vec![q("17.8") / total, q("16.7") / total, q("22.2") / total]);
}

#[test]
fn asic_pipeline_runs_at_slowest_stage() {
    let r = sim(&ExecutionPlan::asic(assign("activity", &["asic_activity"; 3])), 10);
    assert_eq!(r.steady_throughput_fps, Some(q("16")));
    assert_eq!(r.first_run_latency_ms, Rational::new(161825, 1626));
}

#[test]
fn short_horizon_has_no_steady_rate() {
    let r = sim(&ExecutionPlan::pr1(assign("activity", &["p1"; 3])).with_batch(4), 4);
    assert_eq!(r.steady_throughput_fps, None);
    assert!(r.mean_throughput_fps.is_positive());
}

#[test]
fn zero_horizon_is_rejected() {
    let plan = ExecutionPlan::pr1(assign("activity", &["p1"; 3]));
    assert_eq!(simulate(&plan, &data::platform(), 0, SimOptions::default()), Err(SimError::Horizon));
}

#[test]
fn infeasible_plan_is_rejected() {
    let plan = ExecutionPlan::pr2(assign("activity", &["p1"; 3]));
    assert!(matches!(simulate(&plan, &data::platform(), 2, SimOptions::default()), Err(SimError::Model(_))));
}

#[test]
fn capacity_blocks_instead_of_failing() {
    let mut p = data::platform();
    p.buffer_capacity_bytes = 262_144 * 3;
    let plan = ExecutionPlan::pr1(assign("activity", &["p1"; 3])).with_batch(8);
    let r = simulate(&plan, &p, 16, SimOptions::default()).unwrap();
    let b = r.blocked.expect("blocked");
    assert_eq!(b.capacity_bytes, 786_432);
    assert!(b.required_bytes > b.capacity_bytes);
    assert!(r.timeline.is_empty());
    assert_eq!(r.steady_throughput_fps, None);
}

#[test]
fn tight_capacity_slows_pipeline() {
    let mut p = data::platform();
    // room for exactly one frame in the chain at a time
    p.buffer_capacity_bytes = 262_144 * 2;
    let plan = ExecutionPlan::asic(assign("activity", &["asic_activity"; 3]));
    let r = simulate(&plan, &p, 6, SimOptions::default()).unwrap();
    assert!(r.blocked.is_none());
    assert!(r.peak_buffer_bytes <= 262_144 * 2);
    assert!(r.steady_throughput_fps.unwrap() < q("16"));
}

#[test]
fn bandwidth_sharing_slows_concurrent_modules() {
    let mut p = data::platform();
    p.mem_bandwidth_mbps = q("50");
    let plan = ExecutionPlan::asic(assign("activity", &["asic_activity"; 3]));
    let off = simulate(&plan, &p, 20, SimOptions::default()).unwrap();
    let on = simulate(&plan, &p, 20, SimOptions { bandwidth_sharing: true }).unwrap();
    assert_eq!(off.steady_throughput_fps, Some(q("16")));
    assert!(on.makespan_ms > off.makespan_ms);
    assert!(on.mean_throughput_fps < off.mean_throughput_fps);
    // a module running alone and within supply keeps its full rate
    assert_eq!(on.first_run_latency_ms, off.first_run_latency_ms);
}

#[test]
fn csv_export() {
    let r = sim(&ExecutionPlan::pr1(assign("depth", &["p1"; 3])), 1);
    let csv = timeline_csv(&r.timeline);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time_ms,kind,region,task,run"));
    assert_eq!(lines.next(), Some("0.000000,PrStart,0,hog,0"));
    assert_eq!(lines.next(), Some("12.000000,PrEnd,0,hog,0"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn stagger_search() {
    let d = [q("10"), q("10")];
    assert_eq!(stagger_offsets(2, q("2"), &d, 1), vec![q("0"), q("2")]);
    assert_eq!(stagger_offsets(3, q("0"), &d, 1), vec![q("0"); 3]);
    assert_eq!(stagger_offsets(3, q("2"), &d, 1), vec![q("0"), q("2"), q("4")]);
}

#[test]
fn overlap_scan_finds_conflicts() {
    let ev = |t: &str, kind, region| Event { time_ms: q(t), kind, region, task: "a".into(), run: 0 };
    let tl = vec![
        ev("0", EventKind::PrStart, 0),
        ev("1", EventKind::PrStart, 1),
        ev("2", EventKind::PrEnd, 0),
        ev("3", EventKind::PrEnd, 1),
    ];
    assert_eq!(overlapping_pr(&tl).len(), 1);
    let touching = vec![
        ev("0", EventKind::PrStart, 0),
        ev("2", EventKind::PrEnd, 0),
        ev("2", EventKind::PrStart, 1),
        ev("3", EventKind::PrEnd, 1),
    ];
    assert!(overlapping_pr(&touching).is_empty());
}

fn arb_plan() -> impl Gen<Value = (ExecutionPlan, u64)> {
    let task = (1i64..200, 1i64..200);
    (1usize..=3, prop::collection::vec(task, 3), 0u8..4, 1u32..5, 0u64..4_000_000, 2u32..4).prop_map(
        |(n, params, strategy, b, bits, k)| {
            let app =
                Application::new("rand", (0..n).map(|i| TaskSpec { name: format!("t{i}"), input_bytes: 32 }).collect())
                    .unwrap();
            let vs = (0..n)
                .map(|i| ModuleVariant {
                    task: format!("t{i}"),
                    variant_id: "v".into(),
                    resources: ResourceVector::new(1, q("1/2"), 0),
                    latency_ms: Rational::new(params[i].0 as i128, 7),
                    throughput_fps: Rational::from_integer(params[i].1 as i128 * 3),
                    bandwidth_mbps: Rational::ZERO,
                    output_bytes: 32,
                    style: VariantStyle::Any,
                })
                .collect();
            let a = VariantAssignment::new(&app, vs).unwrap();
            let plan = match strategy {
                0 => ExecutionPlan::asic(a),
                1 => ExecutionPlan::pr1(a).with_batch(b),
                2 => ExecutionPlan::pr2(a),
                _ => ExecutionPlan::prk(a, k).with_batch(b),
            };
            (plan, bits)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn schedule_invariants((plan, bits) in arb_plan(), horizon in 1u32..12) {
        let mut p = data::platform();
        p.bitstream_bytes_full = bits;
        let r = simulate(&plan, &p, horizon, SimOptions::default()).unwrap();
        for tl in [&r.timeline, &r.latency_timeline] {
            prop_assert!(overlapping_pr(tl).is_empty());
            // times never go backwards
            prop_assert!(tl.windows(2).all(|w| w[0].time_ms <= w[1].time_ms));
            let names: Vec<&str> = plan.assignment.variants().iter().map(|v| v.task.as_str()).collect();
            for (i, name) in names.iter().enumerate() {
                let ends = tl.iter().filter(|e| e.kind == EventKind::RunEnd && e.task == *name).count();
                prop_assert_eq!(ends, horizon as usize);
                if i == 0 {
                    continue;
                }
                for run in 0..horizon {
                    let start = find(tl, EventKind::RunStart, name, run).unwrap();
                    let prev = find(tl, EventKind::RunEnd, names[i - 1], run).unwrap();
                    prop_assert!(start >= prev);
                }
            }
        }
        for b in &r.busy_fraction {
            prop_assert!(*b >= Rational::ZERO && *b <= Rational::ONE);
        }
        // PR plans admit whole batches, so the closed-form requirement bounds them
        if plan.strategy.is_pr() {
            let e = estimate(&plan, &p).unwrap();
            prop_assert!(r.peak_buffer_bytes <= e.buffer_bytes);
        }
    }
}
