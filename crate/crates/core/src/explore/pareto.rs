use crate::charlib::{Application, ModuleLibrary, Platform, Resource};
use crate::model::Strategy;
use crate::rational::Rational;

use super::{solve, Problem, ProblemKind, RankedPlan};

/// One plan in (area, performance) space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParetoPoint {
    pub strategy: Strategy,
    pub label: String,
    /// Bottleneck resource of the plan's footprint and how much of it is used.
    pub resource: Resource,
    pub used: Rational,
    pub utilization: Rational,
    /// Throughput (fps) for throughput problems, latency (ms) otherwise.
    pub performance: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParetoFront {
    pub asic: Vec<ParetoPoint>,
    pub pr: Vec<ParetoPoint>,
    /// Front over both styles; PR points here improve on the ASIC front.
    pub combined: Vec<ParetoPoint>,
}

fn better(kind: ProblemKind, a: Rational, b: Rational) -> bool {
    match kind {
        ProblemKind::MaxTGivenA => a > b,
        _ => a < b,
    }
}

fn point(kind: ProblemKind, p: &RankedPlan) -> ParetoPoint {
    let e = &p.estimate;
    ParetoPoint {
        strategy: p.plan.strategy,
        label: p.plan.label(),
        resource: e.bottleneck,
        used: e.resources_used.get(e.bottleneck),
        utilization: e.bottleneck_utilization,
        performance: if kind == ProblemKind::MaxTGivenA { e.throughput_fps } else { e.latency_ms },
    }
}

/// Non-dominated points in ascending utilization. Among equal points the
/// first in input order survives.
pub(super) fn front(kind: ProblemKind, points: Vec<ParetoPoint>) -> Vec<ParetoPoint> {
    let mut order: Vec<(usize, ParetoPoint)> = points.into_iter().enumerate().collect();
    order.sort_by(|(i, a), (j, b)| {
        a.utilization.cmp(&b.utilization).then_with(|| {
            if better(kind, a.performance, b.performance) {
                std::cmp::Ordering::Less
            } else if better(kind, b.performance, a.performance) {
                std::cmp::Ordering::Greater
            } else {
                i.cmp(j)
            }
        })
    });
    let mut out: Vec<ParetoPoint> = Vec::new();
    for (_, p) in order {
        if out.last().is_none_or(|best| better(kind, p.performance, best.performance)) {
            out.push(p);
        }
    }
    out
}

/// Fronts over already-evaluated plans (in rank order).
pub fn pareto_points(kind: ProblemKind, plans: &[RankedPlan]) -> ParetoFront {
    let all: Vec<ParetoPoint> = plans.iter().map(|p| point(kind, p)).collect();
    let (asic, pr): (Vec<_>, Vec<_>) = all.iter().cloned().partition(|p| p.strategy == Strategy::Asic);
    ParetoFront { asic: front(kind, asic), pr: front(kind, pr), combined: front(kind, all) }
}

/// Area/performance fronts for a throughput or latency objective. A
/// `GivenLMinA` objective is treated as latency with no bound.
pub fn pareto_front(
    application: &Application,
    library: &ModuleLibrary,
    platform: &Platform,
    objective: ProblemKind,
) -> ParetoFront {
    let problem = match objective {
        ProblemKind::MaxTGivenA => Problem::max_throughput(),
        _ => Problem::min_latency(),
    };
    match solve(&problem, application, library, platform) {
        Ok(r) => r.pareto,
        Err(_) => ParetoFront::default(),
    }
}
