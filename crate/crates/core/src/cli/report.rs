use std::fmt::Write as _;

use crate::data;
use crate::explore::{self, Problem};
use crate::model::{self, Strategy};
use crate::rational::Rational;

fn calibration(s: &mut String) {
    let _ = writeln!(s, "pr time");
    let _ = writeln!(
        s,
        "  {:<12} {:>15} {:>13} {:>9} {:>9}",
        "platform", "bitstream_bytes", "pr_mbps", "full_ms", "half_ms"
    );
    for (name, p) in [("pcap", data::platform_pcap()), ("calibrated", data::platform())] {
        let full = model::pr_time(Rational::ONE, &p).expect("positive bandwidth");
        let half = model::pr_time(Rational::new(1, 2), &p).expect("positive bandwidth");
        let _ = writeln!(
            s,
            "  {name:<12} {:>15} {:>13.3} {full:>9.3} {half:>9.3}",
            p.bitstream_bytes_full, p.pr_bandwidth_mbps
        );
    }
}

fn section(s: &mut String, app: &str, problem: &Problem) {
    let title = problem.kind.name();
    let a = data::application(app).expect("shipped application");
    let r = match explore::solve(problem, &a, &data::library(), &data::platform()) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(s, "{title}: {e}");
            return;
        }
    };
    let _ = writeln!(s, "{title}");
    let _ = writeln!(
        s,
        "  {:<8} {:>10} {:>14} {:>12} {:>8} {:>8}  plan",
        "strategy", "latency_ms", "throughput_fps", "buffer_bytes", "util", "density"
    );
    let small = r
        .ranked
        .iter()
        .find(|p| p.plan.strategy == Strategy::Pr1 && p.plan.region_fraction < Rational::ONE)
        .filter(|_| problem.kind != explore::ProblemKind::MaxTGivenA);
    let rows = r.best_per_strategy.iter().map(|(s, p)| (s.name(), p)).chain(small.map(|p| ("pr1,s", p)));
    for (name, p) in rows {
        let e = &p.estimate;
        let density =
            if problem.kind == explore::ProblemKind::MaxTGivenA { e.throughput_density } else { e.latency_density };
        let _ = writeln!(
            s,
            "  {:<8} {:>10.3} {:>14.3} {:>12} {:>8.3} {:>8.3}  {}",
            name,
            e.latency_ms,
            e.throughput_fps,
            e.buffer_bytes,
            e.bottleneck_utilization,
            density,
            p.plan.label()
        );
    }
    for i in &r.infeasible {
        let _ = writeln!(s, "  {:<8} infeasible: {}", i.strategy.name(), i.reason);
    }
    let best = r.best();
    let _ = writeln!(s, "  best: {} ({:.3})", best.plan.label(), best.objective);
    if problem.kind == explore::ProblemKind::MaxTGivenA {
        if let Some(p) = r.best_per_strategy.get(&Strategy::Pr1) {
            let _ = writeln!(s, "  pr1 batching");
            let _ = writeln!(s, "    {:>4} {:>14} {:>12}", "B", "throughput_fps", "buffer_bytes");
            for b in explore::DEFAULT_BATCHES {
                let plan = p.plan.clone().with_batch(b);
                let tput = model::pr1_throughput(&plan.assignment, &data::platform(), b, plan.region_fraction);
                let buf = model::buffer_requirement(&plan.assignment, b);
                if let Ok(t) = tput {
                    let _ = writeln!(s, "    {b:>4} {t:>14.3} {buf:>12}");
                }
            }
        }
    }
}

/// Case-study result tables regenerated from the shipped data.
pub fn case_study_report() -> String {
    let mut s = String::new();
    calibration(&mut s);
    for app in data::APPLICATIONS {
        let _ = writeln!(s, "\n== {app} ==");
        section(&mut s, app, &Problem::min_latency());
        section(&mut s, app, &Problem::max_throughput());
    }
    s
}
