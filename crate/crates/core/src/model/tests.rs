use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
use proptest::strategy::Strategy as Gen;

use super::*;
use crate::charlib::{Application, ModuleLibrary, TaskSpec, VariantStyle};
use crate::data;
use crate::rational::q;

fn assign(app: &str, ids: &[&str]) -> VariantAssignment {
    VariantAssignment::from_ids(&data::application(app).unwrap(), &data::library(), ids).unwrap()
}

fn half() -> Rational {
    Rational::new(1, 2)
}

#[test]
fn pr_time_nominal_bitstream() {
    let p = data::platform_pcap();
    assert_eq!(pr_time(Rational::ONE, &p).unwrap(), Rational::new(5500, 453));
    assert_eq!(pr_time(half(), &p).unwrap(), Rational::new(2750, 453));
    assert_eq!(pr_time(Rational::ONE, &p).unwrap().to_fixed(2), "12.14");
}

#[test]
fn pr_time_calibrated_bitstream() {
    let p = data::platform();
    assert_eq!(pr_time(Rational::ONE, &p).unwrap(), q("12"));
    assert_eq!(pr_time(half(), &p).unwrap(), q("6"));
}

#[test]
fn pr_time_rejects_bad_fraction() {
    let p = data::platform();
    assert!(matches!(pr_time(Rational::ZERO, &p), Err(ModelError::Domain(_))));
    assert!(matches!(pr_time(q("-1/2"), &p), Err(ModelError::Domain(_))));
    assert!(matches!(pr_time(q("3/2"), &p), Err(ModelError::Domain(_))));
    let tiny = pr_time(Rational::new(1, 1_000_000), &p).unwrap();
    assert!(tiny < q("0.0001"));
}

#[test]
fn asic_case_studies() {
    let p = data::platform();
    let depth = assign("depth", &["asic_depth"; 3]);
    assert_eq!(asic_latency(&depth, &p).unwrap(), q("56.7"));
    let act = assign("activity", &["asic_activity"; 3]);
    assert_eq!(asic_throughput(&act, &p).unwrap(), q("16"));
    assert_eq!(asic_latency(&act, &p).unwrap(), Rational::new(161825, 1626));
    assert_eq!(asic_latency(&act, &p).unwrap().to_fixed(1), "99.5");
}

#[test]
fn asic_infeasible_names_resource() {
    let mut p = data::platform();
    p.budget.bram36 = q("200");
    let a = assign("activity", &["asic_activity"; 3]);
    match asic_latency(&a, &p) {
        Err(ModelError::Infeasible { resource, used, available, .. }) => {
            assert_eq!(resource, Resource::Bram36);
            assert_eq!((used, available), (q("206.5"), q("200")));
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn style_restricts_strategy() {
    let p = data::platform();
    let err = asic_latency(&assign("activity", &["p1"; 3]), &p).unwrap_err();
    assert!(matches!(err, ModelError::Style { strategy: Strategy::Asic, .. }), "{err}");
    let err = pr1_latency(&assign("depth", &["asic_depth"; 3]), &p, Rational::ONE).unwrap_err();
    assert!(matches!(err, ModelError::Style { strategy: Strategy::Pr1, .. }), "{err}");
}

#[test]
fn serialized_bounds_activity() {
    let p = data::platform();
    let app = data::application("activity").unwrap();
    let lib = data::library();
    assert_eq!(pr1_latency_bound(&app, &lib, &p).unwrap(), q("40.28"));
    assert_eq!(pr1_throughput_bound(&app, &lib, &p).unwrap(), Rational::new(487200, 19657));
}

#[test]
fn pr1_latency_case_studies() {
    let p = data::platform();
    assert_eq!(pr1_latency(&assign("depth", &["p1"; 3]), &p, Rational::ONE).unwrap(), q("54.4"));
    assert_eq!(pr1_latency(&assign("depth", &["p2"; 3]), &p, half()).unwrap(), q("55.3"));
    assert_eq!(pr1_latency(&assign("activity", &["p1"; 3]), &p, Rational::ONE).unwrap(), q("76.28"));
    assert_eq!(pr1_latency(&assign("activity", &["p2"; 3]), &p, half()).unwrap(), q("99.27"));
    assert_eq!(pr1_latency(&assign("facial", &["p1"; 3]), &p, Rational::ONE).unwrap(), q("91.88"));
}

#[test]
fn pr1_rejects_variant_larger_than_region() {
    let p = data::platform();
    let err = pr1_latency(&assign("facial", &["p1"; 3]), &p, half()).unwrap_err();
    assert!(matches!(err, ModelError::Infeasible { ref what, .. } if what.contains("viola")), "{err}");
}

#[test]
fn batched_throughput_matches_oracle() {
    let p = data::platform();
    let a = assign("activity", &["p1"; 3]);
    let expected = [
        (1, Rational::new(2436000, 185981)),
        (2, Rational::new(2436000, 142133)),
        (4, Rational::new(2436000, 120209)),
        (8, Rational::new(2436000, 109247)),
        (16, Rational::new(1218000, 51883)),
        (32, Rational::new(4872000, 202051)),
        (64, Rational::new(9744000, 398621)),
    ];
    for (b, want) in expected {
        assert_eq!(pr1_throughput(&a, &p, b, Rational::ONE).unwrap(), want, "B={b}");
    }
}

#[test]
fn batched_throughput_capacity_error() {
    let mut p = data::platform();
    p.buffer_capacity_bytes = 1_000_000;
    let a = assign("activity", &["p1"; 3]);
    match pr1_throughput(&a, &p, 64, Rational::ONE) {
        Err(ModelError::Capacity { required, available }) => {
            assert_eq!(required, 50_331_648);
            assert_eq!(available, 1_000_000);
        }
        other => panic!("expected capacity error, got {other:?}"),
    }
}

#[test]
fn pr2_latency_case_studies() {
    let p = data::platform();
    assert_eq!(pr2_latency(&assign("depth", &["p2"; 3]), &p, half()).unwrap(), q("43.3"));
    assert_eq!(pr2_latency(&assign("activity", &["p2"; 3]), &p, half()).unwrap(), q("92.4"));
    let free = p.clone().with_instant_reconfiguration();
    assert_eq!(pr2_latency(&assign("depth", &["p2"; 3]), &free, half()).unwrap(), q("37.3"));
}

#[test]
fn prk_throughput_oracle() {
    let p = data::platform();
    let a = assign("activity", &["p2"; 3]);
    assert_eq!(prk_throughput(&a, &p, 2, 64).unwrap(), Rational::new(1600000, 65241));
    let one = prk_throughput(&assign("activity", &["p1"; 3]), &p, 1, 8).unwrap();
    assert_eq!(one, pr1_throughput(&assign("activity", &["p1"; 3]), &p, 8, Rational::ONE).unwrap());
}

#[test]
fn throttling_direction() {
    let mut p = data::platform();
    let mut v = data::library().get("hog", "p1").unwrap().clone();
    assert_eq!(effective_throughput(&v, &p), q("116"));
    p.mem_bandwidth_mbps = q("45.6");
    assert_eq!(effective_throughput(&v, &p), q("58"));
    v.bandwidth_mbps = q("45.6");
    assert_eq!(effective_throughput(&v, &p), q("116"));
}

#[test]
fn asic_throughput_reports_throttled_minimum() {
    let mut p = data::platform();
    p.mem_bandwidth_mbps = q("40");
    // only cnn (42.7 MB/s) is throttled
    let a = assign("activity", &["asic_activity"; 3]);
    assert_eq!(asic_throughput(&a, &p).unwrap(), Rational::new(6400, 427));
}

#[test]
fn buffer_activity() {
    let a = assign("activity", &["p1"; 3]);
    assert_eq!(buffer_requirement(&a, 64), 50_331_648);
    assert_eq!(Rational::new(50_331_648, 1_000_000).to_fixed(1), "50.3");
    assert_eq!(buffer_requirement(&a, 2), 2 * buffer_requirement(&a, 1));
}

#[test]
fn buffer_single_task() {
    let app = Application::new("one", vec![TaskSpec { name: "hog".into(), input_bytes: 1024 }]).unwrap();
    let a = VariantAssignment::from_ids(&app, &data::library(), &["p1"]).unwrap();
    assert_eq!(buffer_requirement(&a, 1), 1024);
}

#[test]
fn densities() {
    let p = data::platform();
    let asic = estimate(&ExecutionPlan::asic(assign("activity", &["asic_activity"; 3])), &p).unwrap();
    assert_eq!(asic.bottleneck, Resource::Bram36);
    assert_eq!(asic.throughput_density, q("16") / q("206.5"));
    assert_eq!(asic.throughput_density.to_fixed(3), "0.077");
    assert_eq!(asic.latency_density.to_fixed(3), "0.049");

    let p1 = estimate(&ExecutionPlan::pr1(assign("activity", &["p1"; 3])).with_batch(64), &p).unwrap();
    assert_eq!(p1.resources_used.bram36, q("198"));
    assert_eq!(p1.throughput_density.to_fixed(2), "0.12");
    let p1_lat = estimate(&ExecutionPlan::pr1(assign("activity", &["p1"; 3])), &p).unwrap();
    assert_eq!(p1_lat.latency_density.to_fixed(3), "0.066");
}

#[test]
fn density_edge_cases() {
    let p = data::platform();
    let one = ResourceVector::new(0, q("1"), 0);
    assert_eq!(performance_density(q("24"), &one, &p).unwrap(), (q("24"), Resource::Bram36));
    assert!(matches!(performance_density(q("1"), &ResourceVector::zero(), &p), Err(ModelError::Domain(_))));
}

#[test]
fn single_region_picks_smallest_fitting_region() {
    let p = data::platform();
    let est = estimate(&ExecutionPlan::pr1(assign("depth", &["p2"; 3])).with_region_fraction(half()), &p).unwrap();
    assert_eq!(est.resources_used, ResourceVector::new(28800, q("108"), 144));
    assert_eq!(est.bottleneck_utilization, half());
    assert_eq!(est.latency_ms, q("55.3"));
}

#[test]
fn multi_region_footprint_sums_layout() {
    let p = data::platform();
    let est = estimate(&ExecutionPlan::pr2(assign("depth", &["p2"; 3])), &p).unwrap();
    assert_eq!(est.regions.len(), 2);
    assert_eq!(est.resources_used, ResourceVector::new(59040, q("216"), 360));
    assert_eq!(est.latency_ms, q("43.3"));
}

#[test]
fn estimate_strategy_summaries() {
    let p = data::platform();
    let prk = estimate(&ExecutionPlan::prk(assign("activity", &["p2"; 3]), 2).with_batch(64), &p).unwrap();
    assert_eq!(prk.throughput_fps, Rational::new(1600000, 65241));
    assert_eq!(prk.buffer_bytes, 2 * 50_331_648);
    assert_eq!(prk.pr_time_ms, q("6"));
    let p1 = estimate(&ExecutionPlan::pr1(assign("activity", &["p1"; 3])).with_batch(64), &p).unwrap();
    assert_eq!(p1.bandwidth_peak_mbps, q("91.2"));
    let asic = estimate(&ExecutionPlan::asic(assign("activity", &["asic_activity"; 3])), &p).unwrap();
    assert_eq!(asic.bandwidth_peak_mbps, q("69.6"));
    assert_eq!(asic.resources_used.bram36, q("206.5"));
}

#[test]
fn batched_first_frame_latency_reduces_to_unbatched() {
    let p = data::platform();
    let a = assign("depth", &["p1"; 3]);
    let b1 = estimate(&ExecutionPlan::pr1(a.clone()), &p).unwrap();
    assert_eq!(b1.latency_ms, q("54.4"));
    let b4 = estimate(&ExecutionPlan::pr1(a).with_batch(4), &p).unwrap();
    assert_eq!(b4.latency_ms, q("36") + q("4") * q("12.8") + q("5.6"));
}

#[test]
fn plan_invariants() {
    let a = assign("activity", &["p2"; 3]);
    assert!(ExecutionPlan::pr2(a.clone()).with_batch(2).check().is_err());
    assert!(ExecutionPlan::pr2(a.clone()).with_region_fraction(q("3/4")).check().is_err());
    assert!(ExecutionPlan::prk(a.clone(), 3).with_region_fraction(half()).check().is_err());
    assert!(ExecutionPlan::pr1(a.clone()).with_batch(0).check().is_err());
    assert!(ExecutionPlan::pr1(a).with_region_fraction(q("1/3")).check().is_ok());
}

#[test]
fn assignment_must_follow_chain() {
    let app = data::application("activity").unwrap();
    let lib = data::library();
    let wrong = vec![lib.get("cnn", "p1").unwrap().clone(); 3];
    assert!(VariantAssignment::new(&app, wrong).is_err());
    assert!(VariantAssignment::from_ids(&app, &lib, &["p1", "p1"]).is_err());
    assert!(VariantAssignment::from_ids(&app, &lib, &["p1", "p1", "nope"]).is_err());
}

/// Two identical tasks whose latency falls as c / area, free reconfiguration.
fn inverse_area_instance(c: i64, budget_lut: u64) -> (Application, ModuleLibrary, Platform) {
    let app = Application::new(
        "synthetic",
        vec![TaskSpec { name: "t0".into(), input_bytes: 8 }, TaskSpec { name: "t1".into(), input_bytes: 8 }],
    )
    .unwrap();
    let mut lib = ModuleLibrary::new();
    for task in ["t0", "t1"] {
        for (id, area) in [("full", budget_lut), ("half", budget_lut / 2)] {
            let lat = Rational::from_integer(c as i128) / Rational::from(area);
            lib.insert(ModuleVariant {
                task: task.into(),
                variant_id: id.into(),
                resources: ResourceVector::new(area, Rational::ZERO, 0),
                latency_ms: lat,
                throughput_fps: Rational::from_integer(1000) / lat,
                bandwidth_mbps: Rational::ZERO,
                output_bytes: 8,
                style: VariantStyle::Any,
            })
            .unwrap();
        }
    }
    let platform = Platform::new(ResourceVector::new(budget_lut, q("1"), 1), q("100"), 1, q("1000"), 1 << 20)
        .unwrap()
        .with_instant_reconfiguration();
    (app, lib, platform)
}

#[test]
fn inverse_area_reconstruction() {
    let (app, lib, p) = inverse_area_instance(600, 1000);
    let asic = asic_latency(&VariantAssignment::from_ids(&app, &lib, &["half", "half"]).unwrap(), &p).unwrap();
    let full =
        pr1_latency(&VariantAssignment::from_ids(&app, &lib, &["full", "full"]).unwrap(), &p, Rational::ONE).unwrap();
    let halved = pr1_latency(&VariantAssignment::from_ids(&app, &lib, &["half", "half"]).unwrap(), &p, half()).unwrap();
    assert_eq!(full * Rational::from(2u32), asic);
    assert_eq!(halved, asic);
    assert!(asic_latency(&VariantAssignment::from_ids(&app, &lib, &["full", "half"]).unwrap(), &p).is_err());
}

fn arb_rational(lo: i64, hi: i64) -> impl Gen<Value = Rational> {
    (lo..=hi, 1i64..=20).prop_map(|(n, d)| Rational::new(n as i128, d as i128))
}

fn arb_instance() -> impl Gen<Value = (VariantAssignment, Platform)> {
    (1usize..=3, prop::collection::vec((arb_rational(1, 400), arb_rational(1, 400), 1u64..2000), 3), 0u64..20_000_000)
        .prop_map(|(n, params, bitstream)| {
            let tasks: Vec<TaskSpec> = (0..n).map(|i| TaskSpec { name: format!("t{i}"), input_bytes: 64 }).collect();
            let app = Application::new("rand", tasks).unwrap();
            let variants = (0..n)
                .map(|i| {
                    let (lat, tput, lut) = params[i];
                    ModuleVariant {
                        task: format!("t{i}"),
                        variant_id: "v".into(),
                        resources: ResourceVector::new(lut, q("1"), 1),
                        latency_ms: lat,
                        throughput_fps: tput,
                        bandwidth_mbps: q("10"),
                        output_bytes: 64,
                        style: VariantStyle::Any,
                    }
                })
                .collect();
            let mut platform =
                Platform::new(ResourceVector::new(2000, q("4"), 4), q("453"), bitstream.max(1), q("100"), 1 << 30)
                    .unwrap();
            platform.bitstream_bytes_full = bitstream;
            (VariantAssignment::new(&app, variants).unwrap(), platform)
        })
}

proptest! {
    #[test]
    fn batching_is_monotone_and_bounded((a, p) in arb_instance(), b in 1u32..100) {
        let t1 = pr1_throughput(&a, &p, b, Rational::ONE).unwrap();
        let t2 = pr1_throughput(&a, &p, b + 1, Rational::ONE).unwrap();
        prop_assert!(t2 >= t1);
        let limit = a.variants().iter().map(|v| effective_throughput(v, &p).recip()).sum::<Rational>().recip();
        prop_assert!(t2 <= limit);
    }

    #[test]
    fn throttle_never_speeds_up(tput in arb_rational(1, 1000), bw in arb_rational(0, 500), supply in arb_rational(1, 500)) {
        let mut p = data::platform();
        p.mem_bandwidth_mbps = supply;
        let mut v = data::library().get("hog", "p1").unwrap().clone();
        v.throughput_fps = tput;
        v.bandwidth_mbps = bw;
        let eff = effective_throughput(&v, &p);
        prop_assert!(eff <= tput);
        prop_assert_eq!(eff == tput, bw <= supply);
    }

    #[test]
    fn bound_consistency((a, p) in arb_instance()) {
        let lib = ModuleLibrary::from_variants(a.variants().iter().cloned()).unwrap();
        let app = a.application();
        let bound = pr1_latency_bound(app, &lib, &p).unwrap();
        let lat = pr1_latency(&a, &p, Rational::ONE).unwrap();
        prop_assert!(lat >= bound);
        prop_assert_eq!(lat == bound, p.bitstream_bytes_full == 0);
        let tbound = pr1_throughput_bound(app, &lib, &p).unwrap();
        prop_assert!(pr1_throughput(&a, &p, 1, Rational::ONE).unwrap() <= tbound);
    }

    #[test]
    fn evaluation_is_reproducible((a, p) in arb_instance(), b in 1u32..64) {
        let plan = ExecutionPlan::pr1(a).with_batch(b);
        prop_assert_eq!(estimate(&plan, &p).unwrap(), estimate(&plan, &p).unwrap());
    }
}
