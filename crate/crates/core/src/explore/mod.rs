//! Design-space search over variant assignments and strategies.

mod pareto;

pub use pareto::{pareto_front, pareto_points, ParetoFront, ParetoPoint};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::charlib::{Application, ModuleLibrary, ModuleVariant, Platform, ResourceVector};
use crate::model::{estimate, ExecutionPlan, ModelError, PerformanceEstimate, Strategy, VariantAssignment};
use crate::rational::Rational;

/// Plans `solve_exhaustive` is willing to evaluate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

pub const DEFAULT_BATCHES: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    MaxTGivenA,
    MinLGivenA,
    GivenLMinA,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::MaxTGivenA => "max-t",
            ProblemKind::MinLGivenA => "min-l",
            ProblemKind::GivenLMinA => "given-l",
        }
    }

    /// Whether the model pairs `strategy` with this kind of problem.
    pub fn applies(self, strategy: Strategy) -> bool {
        match strategy {
            Strategy::Asic | Strategy::Pr1 => true,
            Strategy::Pr2 => self != ProblemKind::MaxTGivenA,
            Strategy::Prk => self == ProblemKind::MaxTGivenA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub kind: ProblemKind,
    /// Present exactly for `GivenLMinA`.
    pub latency_bound_ms: Option<Rational>,
    pub batch_candidates: Vec<u32>,
    pub k_max: u32,
}

impl Problem {
    pub fn max_throughput() -> Self {
        Problem {
            kind: ProblemKind::MaxTGivenA,
            latency_bound_ms: None,
            batch_candidates: DEFAULT_BATCHES.to_vec(),
            k_max: 2,
        }
    }

    pub fn min_latency() -> Self {
        Problem { kind: ProblemKind::MinLGivenA, ..Self::max_throughput() }
    }

    pub fn min_area(latency_bound_ms: Rational) -> Self {
        Problem { kind: ProblemKind::GivenLMinA, latency_bound_ms: Some(latency_bound_ms), ..Self::max_throughput() }
    }

    pub fn with_batches(mut self, batches: Vec<u32>) -> Self {
        self.batch_candidates = batches;
        self
    }

    pub fn with_k_max(mut self, k_max: u32) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn check(&self) -> Result<(), ExploreError> {
        let bad = |m: &str| Err(ExploreError::Problem(m.to_string()));
        match (self.kind, self.latency_bound_ms) {
            (ProblemKind::GivenLMinA, None) => return bad("given-l needs a latency bound"),
            (ProblemKind::GivenLMinA, Some(b)) if !b.is_positive() => return bad("latency bound must be positive"),
            (ProblemKind::MaxTGivenA | ProblemKind::MinLGivenA, Some(_)) => {
                return bad("latency bound only applies to given-l")
            }
            _ => {}
        }
        if self.batch_candidates.is_empty() || self.batch_candidates.contains(&0) {
            return bad("batch candidates must be nonempty and positive");
        }
        if self.k_max < 2 {
            return bad("k_max must be at least 2");
        }
        Ok(())
    }

    /// Batch sizes tried for a strategy. Batching only lengthens the first
    /// frame, so latency problems evaluate B = 1.
    fn batches(&self, strategy: Strategy) -> Vec<u32> {
        match (self.kind, strategy) {
            (ProblemKind::MaxTGivenA, Strategy::Pr1 | Strategy::Prk) => {
                let mut b = self.batch_candidates.clone();
                b.sort_unstable();
                b.dedup();
                b
            }
            _ => vec![1],
        }
    }

    /// Plan shapes (strategy, k, fraction, B) searched for this problem.
    fn configs(&self) -> Vec<Config> {
        let mut out = vec![Config { strategy: Strategy::Asic, k: 0, fraction: Rational::ONE, batch: 1 }];
        for m in 1..=self.k_max {
            for &batch in &self.batches(Strategy::Pr1) {
                out.push(Config { strategy: Strategy::Pr1, k: 1, fraction: Rational::new(1, m as i128), batch });
            }
        }
        if self.kind.applies(Strategy::Pr2) {
            out.push(Config { strategy: Strategy::Pr2, k: 2, fraction: Rational::new(1, 2), batch: 1 });
        }
        if self.kind.applies(Strategy::Prk) {
            for k in 2..=self.k_max {
                for &batch in &self.batches(Strategy::Prk) {
                    out.push(Config { strategy: Strategy::Prk, k, fraction: Rational::new(1, k as i128), batch });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Config {
    strategy: Strategy,
    k: u32,
    fraction: Rational,
    batch: u32,
}

impl Config {
    fn plan(&self, assignment: VariantAssignment) -> ExecutionPlan {
        let base = match self.strategy {
            Strategy::Asic => return ExecutionPlan::asic(assignment),
            Strategy::Pr1 => ExecutionPlan::pr1(assignment),
            Strategy::Pr2 => ExecutionPlan::pr2(assignment),
            Strategy::Prk => ExecutionPlan::prk(assignment, self.k),
        };
        base.with_region_fraction(self.fraction).with_batch(self.batch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedPlan {
    pub plan: ExecutionPlan,
    pub estimate: PerformanceEstimate,
    /// Throughput (fps), latency (ms) or bottleneck utilization, by problem.
    pub objective: Rational,
}

/// Why a strategy produced no feasible plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasibility {
    pub strategy: Strategy,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationResult {
    pub problem: Problem,
    /// Every feasible plan, best first.
    pub ranked: Vec<RankedPlan>,
    pub best_per_strategy: BTreeMap<Strategy, RankedPlan>,
    pub pareto: ParetoFront,
    pub infeasible: Vec<Infeasibility>,
    /// Plans evaluated by the model.
    pub evaluated: usize,
}

impl ExplorationResult {
    pub fn best(&self) -> &RankedPlan {
        &self.ranked[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("no feasible plan:{}", .0.iter().map(|i| format!("\n  {}: {}", i.strategy, i.reason)).collect::<String>())]
    Infeasible(Vec<Infeasibility>),
    #[error("search space of {size} plans exceeds the exhaustive limit of {limit}")]
    TooLarge { size: u128, limit: u128 },
}

fn objective(kind: ProblemKind, e: &PerformanceEstimate) -> Rational {
    match kind {
        ProblemKind::MaxTGivenA => e.throughput_fps,
        ProblemKind::MinLGivenA => e.latency_ms,
        ProblemKind::GivenLMinA => e.bottleneck_utilization,
    }
}

/// Total order used for ranking: objective, bottleneck utilization,
/// footprint LUTs, then strategy, variant ids, B, k and region fraction.
pub fn compare_plans(kind: ProblemKind, a: &RankedPlan, b: &RankedPlan) -> Ordering {
    let obj = match kind {
        ProblemKind::MaxTGivenA => b.objective.cmp(&a.objective),
        _ => a.objective.cmp(&b.objective),
    };
    obj.then_with(|| a.estimate.bottleneck_utilization.cmp(&b.estimate.bottleneck_utilization))
        .then_with(|| a.estimate.resources_used.lut.cmp(&b.estimate.resources_used.lut))
        .then_with(|| a.plan.strategy.cmp(&b.plan.strategy))
        .then_with(|| a.plan.assignment.ids().cmp(&b.plan.assignment.ids()))
        .then_with(|| a.plan.batch_b.cmp(&b.plan.batch_b))
        .then_with(|| a.plan.k.cmp(&b.plan.k))
        .then_with(|| a.plan.region_fraction.cmp(&b.plan.region_fraction))
}

fn evaluate(problem: &Problem, plan: ExecutionPlan, platform: &Platform) -> Result<RankedPlan, ModelError> {
    let estimate = estimate(&plan, platform)?;
    if let Some(bound) = problem.latency_bound_ms {
        if estimate.latency_ms > bound {
            return Err(ModelError::LatencyBound { latency_ms: estimate.latency_ms, bound_ms: bound });
        }
    }
    Ok(RankedPlan { objective: objective(problem.kind, &estimate), plan, estimate })
}

/// Keeps the failure closest to being satisfied; ties go to the first seen.
/// Failures without a measurable excess rank behind those with one.
#[derive(Default)]
struct Failures {
    best: Option<(Option<Rational>, String)>,
}

impl Failures {
    fn offer(&mut self, excess: Option<Rational>, msg: String) {
        let better = match &self.best {
            None => true,
            Some((None, _)) => excess.is_some(),
            Some((Some(p), _)) => excess.is_some_and(|e| e < *p),
        };
        if better {
            self.best = Some((excess, msg));
        }
    }

    fn record(&mut self, err: &ModelError) {
        self.offer(err.excess(), err.to_string());
    }

    fn merge(mut self, other: Failures) -> Failures {
        if let Some((e, m)) = other.best {
            self.offer(e, m);
        }
        self
    }
}

/// Every combination of one candidate per task, in lexicographic order.
/// `admit` sees each partial prefix and can cut the subtree.
fn assignments<'a>(
    candidates: &[Vec<&'a ModuleVariant>],
    admit: &dyn Fn(&[&'a ModuleVariant]) -> bool,
) -> Vec<Vec<&'a ModuleVariant>> {
    fn walk<'a>(
        i: usize,
        candidates: &[Vec<&'a ModuleVariant>],
        prefix: &mut Vec<&'a ModuleVariant>,
        admit: &dyn Fn(&[&'a ModuleVariant]) -> bool,
        out: &mut Vec<Vec<&'a ModuleVariant>>,
    ) {
        if i == candidates.len() {
            out.push(prefix.clone());
            return;
        }
        for v in &candidates[i] {
            prefix.push(v);
            if admit(prefix) {
                walk(i + 1, candidates, prefix, admit, out);
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if candidates.iter().all(|c| !c.is_empty()) {
        walk(0, candidates, &mut Vec::new(), admit, &mut out);
    }
    out
}

/// `w` is usable wherever `v` is and at least as good on every axis the
/// ranking can see; the lower id breaks exact ties.
fn weakly_dominates(w: &ModuleVariant, v: &ModuleVariant, platform: &Platform) -> bool {
    w.style.covers(v.style)
        && w.resources.fits_within(&v.resources)
        && w.latency_ms <= v.latency_ms
        && crate::model::effective_throughput(w, platform) >= crate::model::effective_throughput(v, platform)
        && w.output_bytes <= v.output_bytes
        && w.variant_id < v.variant_id
}

fn undominated<'a>(vs: Vec<&'a ModuleVariant>, platform: &Platform) -> Vec<&'a ModuleVariant> {
    vs.iter().filter(|v| !vs.iter().any(|w| weakly_dominates(w, v, platform))).copied().collect()
}

/// Variants of a task that could appear in a feasible plan of shape `c`.
fn fitting<'a>(library: &'a ModuleLibrary, task: &str, c: &Config, platform: &Platform) -> Vec<&'a ModuleVariant> {
    let regions = match c.strategy {
        Strategy::Asic => vec![platform.budget.clone()],
        _ if c.fraction.numer() == 1 => platform.regions(c.fraction.denom() as u32),
        _ => vec![platform.budget.scale(c.fraction)],
    };
    let fits = |v: &ModuleVariant| match c.strategy {
        Strategy::Asic => v.style.allows_asic() && v.resources.fits_within(&platform.budget),
        Strategy::Pr1 => v.style.allows_pr() && regions.iter().any(|r| v.resources.fits_within(r)),
        _ => v.style.allows_pr() && regions.iter().all(|r| v.resources.fits_within(r)),
    };
    library.iter().filter(|v| v.task == task && fits(v)).collect()
}

fn first_unfit(app: &Application, library: &ModuleLibrary, c: &Config, platform: &Platform) -> Option<ModelError> {
    let t = app.tasks.iter().find(|t| fitting(library, &t.name, c, platform).is_empty())?;
    let errors: Vec<ModelError> = library.for_task(&t.name).map(|v| single_variant_error(v, c, platform)).collect();
    // the variant closest to fitting explains the failure best
    let closest = errors.iter().enumerate().min_by(|(i, a), (j, b)| match (a.excess(), b.excess()) {
        (Some(x), Some(y)) => x.cmp(&y).then(i.cmp(j)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => i.cmp(j),
    });
    Some(closest.map(|(_, e)| e.clone()).unwrap_or_else(|| ModelError::Uncovered(t.name.clone())))
}

/// Why a lone variant cannot be placed in a plan of shape `c`.
fn single_variant_error(v: &ModuleVariant, c: &Config, platform: &Platform) -> ModelError {
    let style_ok = if c.strategy.is_pr() { v.style.allows_pr() } else { v.style.allows_asic() };
    if !style_ok {
        return ModelError::Style {
            variant: format!("{}/{}", v.task, v.variant_id),
            style: v.style,
            strategy: c.strategy,
        };
    }
    let cap: ResourceVector = match c.strategy {
        Strategy::Asic => platform.budget.clone(),
        _ if c.fraction.numer() == 1 => {
            let rs = platform.regions(c.fraction.denom() as u32);
            if c.strategy == Strategy::Pr1 {
                // the most generous region of the layout
                rs.iter().fold(ResourceVector::zero(), |a, r| {
                    ResourceVector::new(a.lut.max(r.lut), a.bram36.max(r.bram36), a.dsp.max(r.dsp))
                })
            } else {
                rs.iter().skip(1).fold(rs[0].clone(), |a, r| a.meet(r))
            }
        }
        _ => platform.budget.scale(c.fraction),
    };
    match v.resources.first_exceeded(&cap) {
        Some(r) => ModelError::Infeasible {
            what: format!("variant {}/{}", v.task, v.variant_id),
            limit: if c.strategy.is_pr() { "region".into() } else { "budget".into() },
            resource: r,
            used: v.resources.get(r),
            available: cap.get(r),
        },
        None => ModelError::Domain(format!("variant {}/{} cannot be placed", v.task, v.variant_id)),
    }
}

struct Outcome {
    plans: Vec<RankedPlan>,
    failures: BTreeMap<Strategy, Failures>,
    evaluated: usize,
}

fn run_configs(
    problem: &Problem,
    app: &Application,
    platform: &Platform,
    jobs: Vec<(Config, Vec<Vec<&ModuleVariant>>)>,
    parallel: bool,
) -> Outcome {
    let work: Vec<(Config, Vec<&ModuleVariant>)> =
        jobs.into_iter().flat_map(|(c, assigns)| assigns.into_iter().map(move |a| (c, a))).collect();
    let eval = |(c, vs): &(Config, Vec<&ModuleVariant>)| {
        let assignment = VariantAssignment::new(app, vs.iter().map(|v| (*v).clone()).collect())
            .expect("candidates follow the chain");
        (c.strategy, evaluate(problem, c.plan(assignment), platform))
    };
    let results: Vec<(Strategy, Result<RankedPlan, ModelError>)> =
        if parallel { work.par_iter().map(eval).collect() } else { work.iter().map(eval).collect() };
    let evaluated = results.len();
    let mut plans = Vec::new();
    let mut failures: BTreeMap<Strategy, Failures> = BTreeMap::new();
    for (s, r) in results {
        match r {
            Ok(p) => plans.push(p),
            Err(e) => failures.entry(s).or_default().record(&e),
        }
    }
    Outcome { plans, failures, evaluated }
}

fn finish(problem: &Problem, mut out: Outcome) -> Result<ExplorationResult, ExploreError> {
    out.plans.sort_by(|a, b| compare_plans(problem.kind, a, b));
    let mut best_per_strategy = BTreeMap::new();
    for p in &out.plans {
        best_per_strategy.entry(p.plan.strategy).or_insert_with(|| p.clone());
    }
    let mut infeasible = Vec::new();
    for s in [Strategy::Asic, Strategy::Pr1, Strategy::Pr2, Strategy::Prk] {
        if !problem.kind.applies(s) {
            infeasible.push(Infeasibility { strategy: s, reason: "strategy not applicable per model".into() });
        } else if !best_per_strategy.contains_key(&s) {
            let reason = out
                .failures
                .remove(&s)
                .and_then(|f| f.best)
                .map(|(_, m)| m)
                .unwrap_or_else(|| "no candidate plan".into());
            infeasible.push(Infeasibility { strategy: s, reason });
        }
    }
    if out.plans.is_empty() {
        return Err(ExploreError::Infeasible(infeasible));
    }
    let pareto = pareto_points(problem.kind, &out.plans);
    Ok(ExplorationResult {
        problem: problem.clone(),
        ranked: out.plans,
        best_per_strategy,
        pareto,
        infeasible,
        evaluated: out.evaluated,
    })
}

/// Searches every strategy for the problem's best plan, pruning variants
/// that cannot fit and variants another variant weakly dominates.
pub fn solve(
    problem: &Problem,
    application: &Application,
    library: &ModuleLibrary,
    platform: &Platform,
) -> Result<ExplorationResult, ExploreError> {
    problem.check()?;
    let mut jobs = Vec::new();
    let mut pre_failures: BTreeMap<Strategy, Failures> = BTreeMap::new();
    for c in problem.configs() {
        if let Some(err) = first_unfit(application, library, &c, platform) {
            pre_failures.entry(c.strategy).or_default().record(&err);
            continue;
        }
        let candidates: Vec<Vec<&ModuleVariant>> =
            application.tasks.iter().map(|t| undominated(fitting(library, &t.name, &c, platform), platform)).collect();
        let assigns = if c.strategy == Strategy::Asic {
            let budget = platform.budget.clone();
            assignments(&candidates, &move |prefix: &[&ModuleVariant]| {
                prefix.iter().fold(ResourceVector::zero(), |a, v| a.add(&v.resources)).fits_within(&budget)
            })
        } else {
            assignments(&candidates, &|_: &[&ModuleVariant]| true)
        };
        if assigns.is_empty() && c.strategy == Strategy::Asic {
            let err = smallest_asic_overflow(&candidates, platform);
            pre_failures.entry(c.strategy).or_default().record(&err);
        }
        jobs.push((c, assigns));
    }
    let mut out = run_configs(problem, application, platform, jobs, true);
    for (s, f) in pre_failures {
        let merged = out.failures.remove(&s).unwrap_or_default().merge(f);
        out.failures.insert(s, merged);
    }
    finish(problem, out)
}

/// Overflow of the componentwise-smallest ASIC footprint, a lower bound on
/// every assignment.
fn smallest_asic_overflow(candidates: &[Vec<&ModuleVariant>], platform: &Platform) -> ModelError {
    let floor = candidates.iter().fold(ResourceVector::zero(), |acc, vs| {
        let m = vs.iter().skip(1).fold(vs[0].resources.clone(), |a, v| a.meet(&v.resources));
        acc.add(&m)
    });
    let r = floor.first_exceeded(&platform.budget).unwrap_or(floor.bottleneck(&platform.budget).0);
    ModelError::Infeasible {
        what: "smallest asic assignment".into(),
        limit: "budget".into(),
        resource: r,
        used: floor.get(r),
        available: platform.budget.get(r),
    }
}

/// Number of plans `solve_exhaustive` would evaluate.
pub fn search_size(problem: &Problem, application: &Application, library: &ModuleLibrary) -> u128 {
    let per_config: u128 = application.tasks.iter().map(|t| library.for_task(&t.name).count() as u128).product();
    per_config.saturating_mul(problem.configs().len() as u128)
}

/// Brute-force reference: evaluates every assignment under every plan
/// shape, sequentially and without pruning.
pub fn solve_exhaustive(
    problem: &Problem,
    application: &Application,
    library: &ModuleLibrary,
    platform: &Platform,
) -> Result<ExplorationResult, ExploreError> {
    problem.check()?;
    let size = search_size(problem, application, library);
    if size > EXHAUSTIVE_LIMIT {
        return Err(ExploreError::TooLarge { size, limit: EXHAUSTIVE_LIMIT });
    }
    let candidates: Vec<Vec<&ModuleVariant>> =
        application.tasks.iter().map(|t| library.for_task(&t.name).collect()).collect();
    let mut uncovered = BTreeMap::new();
    if let Some(t) = application.tasks.iter().zip(&candidates).find(|(_, c)| c.is_empty()).map(|(t, _)| t) {
        for c in problem.configs() {
            uncovered
                .entry(c.strategy)
                .or_insert_with(Failures::default)
                .record(&ModelError::Uncovered(t.name.clone()));
        }
    }
    let all = assignments(&candidates, &|_: &[&ModuleVariant]| true);
    let jobs = problem.configs().into_iter().map(|c| (c, all.clone())).collect();
    let mut out = run_configs(problem, application, platform, jobs, false);
    for (s, f) in uncovered {
        out.failures.insert(s, f);
    }
    finish(problem, out)
}
