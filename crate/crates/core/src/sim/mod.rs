//! Discrete-event simulation of execution plans.
//!
//! Each plan is simulated twice. The latency pass runs every module for its
//! characterized frame latency and yields the first-frame latency. The
//! throughput pass runs every module at its (throttled) throughput interval
//! and yields the steady-state rate and the timeline.

mod engine;

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::charlib::Platform;
use crate::model::{self, ExecutionPlan, ModelError, PerformanceEstimate, Strategy};
use crate::rational::Rational;

use engine::{Input, Job, Lane, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    PrStart,
    PrEnd,
    RunStart,
    RunEnd,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::PrStart => "PrStart",
            EventKind::PrEnd => "PrEnd",
            EventKind::RunStart => "RunStart",
            EventKind::RunEnd => "RunEnd",
        }
    }

    pub fn is_pr(self) -> bool {
        matches!(self, EventKind::PrStart | EventKind::PrEnd)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// One timeline entry. For PR events `run` is the first run the load serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time_ms: Rational,
    pub kind: EventKind,
    /// Region id, or module index for ASIC plans.
    pub region: u32,
    pub task: String,
    pub run: u32,
}

/// Where a capacity-bound simulation stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedReport {
    pub time_ms: Rational,
    pub region: u32,
    pub waiting_for: String,
    pub required_bytes: u64,
    pub capacity_bytes: u64,
}

impl fmt::Display for BlockedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "blocked at {:.3} ms on region {}: {} needs {} bytes of buffer, capacity {}",
            self.time_ms, self.region, self.waiting_for, self.required_bytes, self.capacity_bytes
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Slow all running modules by BW_total / Σ BW_i whenever their combined
    /// demand exceeds the platform's memory bandwidth.
    pub bandwidth_sharing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub first_run_latency_ms: Rational,
    /// Rate over the last full macro-cycle; `None` when the horizon is too
    /// short to contain one.
    pub steady_throughput_fps: Option<Rational>,
    /// Horizon over makespan of the throughput pass.
    pub mean_throughput_fps: Rational,
    pub peak_buffer_bytes: u64,
    /// Compute time over makespan per region (per module for ASIC plans,
    /// measured with one frame in flight).
    pub busy_fraction: Vec<Rational>,
    pub makespan_ms: Rational,
    /// Throughput-pass timeline.
    pub timeline: Vec<Event>,
    /// Latency-pass timeline.
    pub latency_timeline: Vec<Event>,
    pub blocked: Option<BlockedReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(Box<ModelError>),
    #[error("horizon must be at least one run")]
    Horizon,
    #[error("simulation deadlocked: {0}")]
    Deadlock(String),
}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        SimError::Model(Box::new(e))
    }
}

fn pr_jobs_serialized(n_tasks: usize, batches: &[(u32, u32)]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &(first, count) in batches {
        for task in 0..n_tasks {
            jobs.push(Job::Pr { task, run: first, admit: if task == 0 { count } else { 0 } });
            for run in first..first + count {
                jobs.push(Job::Run { task, run, admit: false });
            }
        }
    }
    jobs
}

fn batches(horizon: u32, b: u32) -> Vec<(u32, u32)> {
    (0..horizon).step_by(b as usize).map(|first| (first, b.min(horizon - first))).collect()
}

/// Offsets, in multiples of the PR time, that keep every region's loads
/// disjoint modulo the common cycle. Falls back to `j · pr` when the search
/// finds nothing.
pub fn stagger_offsets(k: u32, pr_ms: Rational, run_ms: &[Rational], batch_b: u32) -> Vec<Rational> {
    let b = Rational::from(batch_b);
    let mut starts = Vec::new();
    let mut t = Rational::ZERO;
    for d in run_ms {
        starts.push(t);
        t += pr_ms + b * *d;
    }
    let cycle = t;
    let mut offsets = vec![Rational::ZERO];
    if !pr_ms.is_positive() {
        return vec![Rational::ZERO; k as usize];
    }
    let modc = |x: Rational| x - (x / cycle).floor() * cycle;
    let clash = |x: Rational, y: Rational| modc(y - x) < pr_ms || modc(x - y) < pr_ms;
    let limit = (cycle / pr_ms).ceil().floor_int().clamp(1, 4096) as u32;
    for j in 1..k {
        let found = (1..=limit).map(|m| Rational::from(m) * pr_ms).find(|&o| {
            starts.iter().all(|&s| offsets.iter().all(|&placed| starts.iter().all(|&s2| !clash(o + s, placed + s2))))
        });
        offsets.push(found.unwrap_or(Rational::from(j) * pr_ms));
    }
    offsets
}

fn lanes_for(plan: &ExecutionPlan, horizon: u32, run_ms: &[Rational], pr_ms: Rational) -> (Vec<Lane>, bool) {
    let n = run_ms.len();
    match plan.strategy {
        Strategy::Asic => {
            let lanes = (0..n)
                .map(|task| Lane {
                    region: task as u32,
                    offset: Rational::ZERO,
                    jobs: (0..horizon).map(|run| Job::Run { task, run, admit: task == 0 }).collect(),
                })
                .collect();
            (lanes, false)
        }
        Strategy::Pr1 => {
            let jobs = pr_jobs_serialized(n, &batches(horizon, plan.batch_b));
            (vec![Lane { region: 0, offset: Rational::ZERO, jobs }], false)
        }
        Strategy::Prk => {
            let k = plan.k.max(1);
            let all = batches(horizon, plan.batch_b);
            let offsets = stagger_offsets(k, pr_ms, run_ms, plan.batch_b);
            let lanes = (0..k)
                .map(|j| {
                    let mine: Vec<(u32, u32)> = all.iter().copied().skip(j as usize).step_by(k as usize).collect();
                    Lane { region: j, offset: offsets[j as usize], jobs: pr_jobs_serialized(n, &mine) }
                })
                .collect();
            (lanes, false)
        }
        Strategy::Pr2 => {
            let mut jobs = vec![Vec::new(), Vec::new()];
            let steps = n as u32 * horizon;
            for g in 0..steps {
                let (task, run) = ((g as usize) % n, g / n as u32);
                let lane = (g % 2) as usize;
                jobs[lane].push(Job::Pr { task, run, admit: 0 });
                jobs[lane].push(Job::Run { task, run, admit: task == 0 });
            }
            // the load that would follow the last run, so the final frame's
            // completion includes it
            jobs[(steps % 2) as usize].push(Job::Pr { task: 0, run: horizon, admit: 0 });
            let lanes = jobs
                .into_iter()
                .enumerate()
                .map(|(i, jobs)| Lane { region: i as u32, offset: Rational::ZERO, jobs })
                .collect();
            (lanes, true)
        }
    }
}

fn run_pass(
    plan: &ExecutionPlan,
    platform: &Platform,
    horizon: u32,
    run_ms: Vec<Rational>,
    one_in_flight_asic: bool,
    options: SimOptions,
) -> Result<Trace, SimError> {
    let a = &plan.assignment;
    let tasks = &a.application().tasks;
    let names: Vec<String> = tasks.iter().map(|t| t.name.clone()).collect();
    let pr_ms = if plan.strategy.is_pr() { model::pr_time(plan.region_fraction, platform)? } else { Rational::ZERO };
    let (lanes, mut one_in_flight) = lanes_for(plan, horizon, &run_ms, pr_ms);
    if plan.strategy == Strategy::Asic {
        one_in_flight = one_in_flight_asic;
    }
    let input = Input {
        task_names: &names,
        run_ms,
        bandwidth: a.variants().iter().map(|v| v.bandwidth_mbps).collect(),
        pr_ms,
        lanes,
        one_in_flight,
        stream_bytes: (0..tasks.len()).map(|i| model::stream_bytes(tasks, a.variants(), i)).collect(),
        capacity: platform.buffer_capacity_bytes,
        shared_bandwidth: options.bandwidth_sharing.then_some(platform.mem_bandwidth_mbps),
        horizon,
    };
    engine::run(&input).map_err(SimError::Deadlock)
}

fn find(tl: &[Event], kind: EventKind, task: &str, run: u32) -> Option<Rational> {
    tl.iter().find(|e| e.kind == kind && e.task == task && e.run == run).map(|e| e.time_ms)
}

fn steady(plan: &ExecutionPlan, trace: &Trace, horizon: u32, names: &[String]) -> Option<Rational> {
    let tl = &trace.timeline;
    let thousand = Rational::from_integer(1000);
    let first = names.first()?;
    let last = names.last()?;
    match plan.strategy {
        Strategy::Asic => {
            if horizon < 2 {
                return None;
            }
            let a = find(tl, EventKind::RunEnd, last, horizon - 2)?;
            let b = find(tl, EventKind::RunEnd, last, horizon - 1)?;
            Some(thousand / (b - a))
        }
        Strategy::Pr2 => {
            if horizon < 2 {
                return None;
            }
            let a = find(tl, EventKind::RunStart, first, horizon - 2)?;
            let b = find(tl, EventKind::RunStart, first, horizon - 1)?;
            Some(thousand / (b - a))
        }
        Strategy::Pr1 | Strategy::Prk => {
            let regions = plan.k.max(1);
            let mut total = Rational::ZERO;
            for region in 0..regions {
                let loads: Vec<Rational> = tl
                    .iter()
                    .filter(|e| e.kind == EventKind::PrStart && e.region == region && &e.task == first)
                    .map(|e| e.time_ms)
                    .collect();
                if loads.len() < 2 {
                    return None;
                }
                let spacing = loads[loads.len() - 1] - loads[loads.len() - 2];
                total += Rational::from(plan.batch_b) * thousand / spacing;
            }
            Some(total)
        }
    }
}

/// Simulates `horizon` frames through the plan.
pub fn simulate(
    plan: &ExecutionPlan,
    platform: &Platform,
    horizon: u32,
    options: SimOptions,
) -> Result<SimResult, SimError> {
    if plan.assignment.is_empty() {
        return Ok(SimResult {
            first_run_latency_ms: Rational::ZERO,
            steady_throughput_fps: None,
            mean_throughput_fps: Rational::ZERO,
            peak_buffer_bytes: 0,
            busy_fraction: Vec::new(),
            makespan_ms: Rational::ZERO,
            timeline: Vec::new(),
            latency_timeline: Vec::new(),
            blocked: None,
        });
    }
    if horizon == 0 {
        return Err(SimError::Horizon);
    }
    model::placement(plan, platform)?;
    let vs = plan.assignment.variants();
    let names: Vec<String> = vs.iter().map(|v| v.task.clone()).collect();
    let latency = run_pass(plan, platform, horizon, vs.iter().map(|v| v.latency_ms).collect(), true, options)?;
    // with bandwidth sharing the engine applies throttling itself
    let intervals: Vec<Rational> =
        vs.iter()
            .map(|v| {
                if options.bandwidth_sharing {
                    v.peak_interval_ms()
                } else {
                    model::effective_interval_ms(v, platform)
                }
            })
            .collect();
    let throughput = run_pass(plan, platform, horizon, intervals, false, options)?;

    let lat_tl = &latency.timeline;
    let last = names.last().unwrap();
    let end0 = find(lat_tl, EventKind::RunEnd, last, 0);
    let first_run_latency_ms = match (plan.strategy, end0) {
        (_, None) => Rational::ZERO,
        (Strategy::Pr2, Some(end)) => {
            // done once its last task ran and the following load finished
            find(lat_tl, EventKind::PrEnd, &names[0], 1).map_or(end, |t| end.max(t))
        }
        (_, Some(end)) => end,
    };
    let t = &throughput;
    let busy_source = if plan.strategy == Strategy::Asic { &latency } else { t };
    let busy_fraction = busy_source
        .busy_ms
        .iter()
        .map(|b| if busy_source.makespan_ms.is_positive() { *b / busy_source.makespan_ms } else { Rational::ZERO })
        .collect();
    let blocked = t.blocked.clone().or_else(|| latency.blocked.clone());
    let steady_throughput_fps = if blocked.is_some() { None } else { steady(plan, t, horizon, &names) };
    let mean_throughput_fps = if t.makespan_ms.is_positive() && blocked.is_none() {
        Rational::from(horizon) * Rational::from_integer(1000) / t.makespan_ms
    } else {
        Rational::ZERO
    };
    Ok(SimResult {
        first_run_latency_ms,
        steady_throughput_fps,
        mean_throughput_fps,
        peak_buffer_bytes: t.peak_buffer_bytes.max(latency.peak_buffer_bytes),
        busy_fraction,
        makespan_ms: t.makespan_ms,
        timeline: t.timeline.clone(),
        latency_timeline: latency.timeline,
        blocked,
    })
}

/// Simulation against closed-form estimate for the same plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaReport {
    pub latency_abs_ms: Rational,
    pub latency_rel: Rational,
    /// `None` when the simulation produced no steady-state rate.
    pub throughput_abs_fps: Option<Rational>,
    pub throughput_rel: Option<Rational>,
}

impl DeltaReport {
    /// Whether any relative delta is larger than `tolerance`. A missing
    /// throughput delta counts as exceeding it.
    pub fn exceeds(&self, tolerance: Rational) -> bool {
        self.latency_rel.abs() > tolerance || self.throughput_rel.is_none_or(|r| r.abs() > tolerance)
    }
}

fn rel(delta: Rational, reference: Rational) -> Rational {
    if reference.is_zero() {
        if delta.is_zero() {
            Rational::ZERO
        } else {
            Rational::ONE
        }
    } else {
        delta / reference
    }
}

/// Signed deltas, simulated minus estimated.
pub fn compare(sim: &SimResult, estimate: &PerformanceEstimate) -> DeltaReport {
    let dl = sim.first_run_latency_ms - estimate.latency_ms;
    let dt = sim.steady_throughput_fps.map(|t| t - estimate.throughput_fps);
    DeltaReport {
        latency_abs_ms: dl,
        latency_rel: rel(dl, estimate.latency_ms),
        throughput_abs_fps: dt,
        throughput_rel: dt.map(|d| rel(d, estimate.throughput_fps)),
    }
}

/// Timeline as CSV: `time_ms,kind,region,task,run`, times to 6 places.
pub fn timeline_csv(events: &[Event]) -> String {
    let mut s = String::from("time_ms,kind,region,task,run\n");
    for e in events {
        let _ = writeln!(s, "{},{},{},{},{}", e.time_ms.to_fixed(6), e.kind, e.region, e.task, e.run);
    }
    s
}

/// PR intervals as (region, start, end), in start order.
pub fn pr_intervals(events: &[Event]) -> Vec<PrInterval> {
    let mut open: Vec<(u32, Rational)> = Vec::new();
    let mut out = Vec::new();
    for e in events {
        match e.kind {
            EventKind::PrStart => open.push((e.region, e.time_ms)),
            EventKind::PrEnd => {
                if let Some(i) = open.iter().position(|(r, _)| *r == e.region) {
                    let (r, s) = open.remove(i);
                    out.push((r, s, e.time_ms));
                }
            }
            _ => {}
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}

/// A load on one region: (region, start, end).
pub type PrInterval = (u32, Rational, Rational);

/// Pairs of PR intervals that overlap in time (zero-length loads never do).
pub fn overlapping_pr(events: &[Event]) -> Vec<(PrInterval, PrInterval)> {
    let iv = pr_intervals(events);
    let mut out = Vec::new();
    for (i, a) in iv.iter().enumerate() {
        for b in &iv[i + 1..] {
            if b.1 >= a.2 {
                break;
            }
            if a.1 < b.2 && b.1 < a.2 {
                out.push((*a, *b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
