//! Closed-form performance and area model for the four implementation
//! strategies.
//!
//! Units: milliseconds for latency and PR time, frames per second for
//! throughput, MB/s (10^6 bytes) for bandwidth.

mod plan;

pub use plan::{placement, ExecutionPlan, Placement, Strategy, VariantAssignment};

use thiserror::Error;

use crate::charlib::{ModuleLibrary, ModuleVariant, Platform, Resource, ResourceVector, TaskSpec};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{what} exceeds {limit} on {resource}: {used} > {available}")]
    Infeasible { what: String, limit: String, resource: Resource, used: Rational, available: Rational },
    #[error("buffer capacity exceeded: {required} bytes needed, {available} available")]
    Capacity { required: u64, available: u64 },
    #[error("latency {latency_ms} ms exceeds bound {bound_ms} ms")]
    LatencyBound { latency_ms: Rational, bound_ms: Rational },
    #[error("variant {variant} is {style}-only and cannot be used by {strategy}")]
    Style { variant: String, style: crate::charlib::VariantStyle, strategy: Strategy },
    #[error("task {0} has no usable variant")]
    Uncovered(String),
    #[error("invalid assignment: {0}")]
    Assignment(String),
    #[error("{0}")]
    Domain(String),
}

impl ModelError {
    /// How far past its limit a violated constraint is, as used/available.
    /// Larger means tighter.
    pub fn excess(&self) -> Option<Rational> {
        match self {
            ModelError::Infeasible { used, available, .. } => {
                if available.is_positive() {
                    Some(*used / *available)
                } else {
                    Some(Rational::from_integer(i64::MAX as i128))
                }
            }
            ModelError::Capacity { required, available } => {
                Some(Rational::new(*required as i128, (*available).max(1) as i128))
            }
            ModelError::LatencyBound { latency_ms, bound_ms } if bound_ms.is_positive() => {
                Some(*latency_ms / *bound_ms)
            }
            _ => None,
        }
    }
}

fn ms_per_s() -> Rational {
    Rational::from_integer(1000)
}

/// Time to reconfigure one region covering `fraction` of the budget.
pub fn pr_time(fraction: Rational, platform: &Platform) -> Result<Rational, ModelError> {
    if !fraction.is_positive() || fraction > Rational::ONE {
        return Err(ModelError::Domain(format!("region fraction {fraction} outside (0, 1]")));
    }
    if !platform.pr_bandwidth_mbps.is_positive() {
        return Err(ModelError::Domain("PR bandwidth must be positive".into()));
    }
    let bytes = fraction * Rational::from(platform.bitstream_bytes_full);
    Ok(bytes / (platform.pr_bandwidth_mbps * ms_per_s()))
}

/// Throughput after memory-bandwidth throttling: scaled by
/// BW_total / BW_i when the variant asks for more than the platform supplies.
pub fn effective_throughput(variant: &ModuleVariant, platform: &Platform) -> Rational {
    if variant.bandwidth_mbps > platform.mem_bandwidth_mbps {
        variant.throughput_fps * platform.mem_bandwidth_mbps / variant.bandwidth_mbps
    } else {
        variant.throughput_fps
    }
}

/// Effective time between successive runs of a resident module, ms.
pub fn effective_interval_ms(variant: &ModuleVariant, platform: &Platform) -> Rational {
    ms_per_s() / effective_throughput(variant, platform)
}

/// Bytes buffered per frame entering task `i`: the raw input for the first
/// task, the larger of the task input and the producer's output otherwise.
pub fn stream_bytes(tasks: &[TaskSpec], variants: &[ModuleVariant], i: usize) -> u64 {
    if i == 0 {
        tasks[0].input_bytes
    } else {
        tasks[i].input_bytes.max(variants[i - 1].output_bytes)
    }
}

/// Intermediate storage for B frames in flight through the chain.
pub fn buffer_requirement(assignment: &VariantAssignment, batch_b: u32) -> u64 {
    let tasks = &assignment.application().tasks;
    let per_frame: u64 = (0..tasks.len()).map(|i| stream_bytes(tasks, assignment.variants(), i)).sum();
    per_frame.saturating_mul(batch_b as u64)
}

fn check_capacity(required: u64, platform: &Platform) -> Result<(), ModelError> {
    if required > platform.buffer_capacity_bytes {
        Err(ModelError::Capacity { required, available: platform.buffer_capacity_bytes })
    } else {
        Ok(())
    }
}

/// End-to-end latency with every module resident.
pub fn asic_latency(assignment: &VariantAssignment, platform: &Platform) -> Result<Rational, ModelError> {
    placement(&ExecutionPlan::asic(assignment.clone()), platform)?;
    Ok(assignment.variants().iter().map(|v| v.latency_ms).sum())
}

/// Pipelined throughput with every module resident: the slowest stage.
pub fn asic_throughput(assignment: &VariantAssignment, platform: &Platform) -> Result<Rational, ModelError> {
    placement(&ExecutionPlan::asic(assignment.clone()), platform)?;
    assignment
        .variants()
        .iter()
        .map(|v| effective_throughput(v, platform))
        .min()
        .ok_or_else(|| ModelError::Domain("empty assignment".into()))
}

fn full_region_best<'a, K: Ord>(
    library: &'a ModuleLibrary,
    task: &'a TaskSpec,
    platform: &Platform,
    key: impl Fn(&ModuleVariant) -> K,
) -> Result<&'a ModuleVariant, ModelError> {
    let full = platform.regions(1);
    library
        .for_task(&task.name)
        .filter(|v| v.style.allows_pr() && full.iter().any(|r| v.resources.fits_within(r)))
        .min_by_key(|v| key(v))
        .ok_or_else(|| ModelError::Uncovered(task.name.clone()))
}

/// Serialized latency with free reconfiguration and each task on its
/// fastest variant that fits the full region.
pub fn pr1_latency_bound(
    application: &crate::charlib::Application,
    library: &ModuleLibrary,
    platform: &Platform,
) -> Result<Rational, ModelError> {
    let mut total = Rational::ZERO;
    for t in &application.tasks {
        total += full_region_best(library, t, platform, |v| v.latency_ms)?.latency_ms;
    }
    Ok(total)
}

/// Serialized throughput with free reconfiguration: 1 / Σ 1/T_i over each
/// task's highest-throughput full-region variant.
pub fn pr1_throughput_bound(
    application: &crate::charlib::Application,
    library: &ModuleLibrary,
    platform: &Platform,
) -> Result<Rational, ModelError> {
    let mut period = Rational::ZERO;
    for t in &application.tasks {
        let best = full_region_best(library, t, platform, |v| std::cmp::Reverse(effective_throughput(v, platform)))?;
        period += effective_throughput(best, platform).recip();
    }
    if period.is_zero() {
        return Err(ModelError::Domain("empty application".into()));
    }
    Ok(period.recip())
}

fn pr1_plan(assignment: &VariantAssignment, fraction: Rational, batch_b: u32) -> ExecutionPlan {
    ExecutionPlan::pr1(assignment.clone()).with_region_fraction(fraction).with_batch(batch_b)
}

/// Single-frame latency on one region: Σ Lat + N · pr.
pub fn pr1_latency(
    assignment: &VariantAssignment,
    platform: &Platform,
    fraction: Rational,
) -> Result<Rational, ModelError> {
    placement(&pr1_plan(assignment, fraction, 1), platform)?;
    let p = pr_time(fraction, platform)?;
    let n = Rational::from(assignment.len());
    Ok(assignment.variants().iter().map(|v| v.latency_ms).sum::<Rational>() + n * p)
}

fn serialized_throughput(variants: &[ModuleVariant], platform: &Platform, p_ms: Rational, batch_b: u32) -> Rational {
    let b = Rational::from(batch_b);
    let compute_s: Rational = variants.iter().map(|v| b / effective_throughput(v, platform)).sum();
    let pr_s = Rational::from(variants.len()) * p_ms / ms_per_s();
    b / (compute_s + pr_s)
}

/// Batched throughput on one region: B / (Σ B/T_i + N · pr).
pub fn pr1_throughput(
    assignment: &VariantAssignment,
    platform: &Platform,
    batch_b: u32,
    fraction: Rational,
) -> Result<Rational, ModelError> {
    placement(&pr1_plan(assignment, fraction, batch_b), platform)?;
    check_capacity(buffer_requirement(assignment, batch_b), platform)?;
    let p = pr_time(fraction, platform)?;
    Ok(serialized_throughput(assignment.variants(), platform, p, batch_b))
}

/// Latency with two alternating regions: the first load, then per task the
/// longer of its compute and the next task's load in the other region.
pub fn pr2_latency(
    assignment: &VariantAssignment,
    platform: &Platform,
    fraction: Rational,
) -> Result<Rational, ModelError> {
    placement(&ExecutionPlan::pr2(assignment.clone()).with_region_fraction(fraction), platform)?;
    let p = pr_time(fraction, platform)?;
    Ok(p + assignment.variants().iter().map(|v| v.latency_ms.max(p)).sum::<Rational>())
}

/// Steady throughput with two alternating regions, one frame at a time.
pub fn pr2_throughput(
    assignment: &VariantAssignment,
    platform: &Platform,
    fraction: Rational,
) -> Result<Rational, ModelError> {
    placement(&ExecutionPlan::pr2(assignment.clone()).with_region_fraction(fraction), platform)?;
    let p = pr_time(fraction, platform)?;
    let period: Rational = assignment.variants().iter().map(|v| effective_interval_ms(v, platform).max(p)).sum();
    Ok(ms_per_s() / period)
}

/// k staggered regions, each running the Pr1 schedule at fraction 1/k.
pub fn prk_throughput(
    assignment: &VariantAssignment,
    platform: &Platform,
    k: u32,
    batch_b: u32,
) -> Result<Rational, ModelError> {
    if k == 0 {
        return Err(ModelError::Domain("prk needs k >= 1".into()));
    }
    let plan = ExecutionPlan::prk(assignment.clone(), k).with_batch(batch_b);
    placement(&plan, platform)?;
    check_capacity(buffer_requirement(assignment, batch_b).saturating_mul(k as u64), platform)?;
    let p = pr_time(plan.region_fraction, platform)?;
    Ok(Rational::from(k) * serialized_throughput(assignment.variants(), platform, p, batch_b))
}

/// Performance per unit of the bottleneck resource. `rate` is frames per
/// second (throughput, or 1000 / latency_ms).
pub fn performance_density(
    rate: Rational,
    used: &ResourceVector,
    platform: &Platform,
) -> Result<(Rational, Resource), ModelError> {
    let (r, _) = used.bottleneck(&platform.budget);
    let count = used.get(r);
    if !count.is_positive() {
        return Err(ModelError::Domain("density undefined for zero resource usage".into()));
    }
    Ok((rate / count, r))
}

/// Everything the model predicts about one plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerformanceEstimate {
    /// Arrival to completion of the first frame, ms.
    pub latency_ms: Rational,
    pub throughput_fps: Rational,
    pub buffer_bytes: u64,
    /// Reconfiguration time of one region (0 for Asic).
    pub pr_time_ms: Rational,
    pub bandwidth_peak_mbps: Rational,
    pub resources_used: ResourceVector,
    pub regions: Vec<ResourceVector>,
    pub bottleneck: Resource,
    pub bottleneck_utilization: Rational,
    /// Throughput per bottleneck unit.
    pub throughput_density: Rational,
    /// (1000 / latency) per bottleneck unit.
    pub latency_density: Rational,
}

fn batched_first_frame_latency(variants: &[ModuleVariant], p: Rational, batch_b: u32) -> Rational {
    let b = Rational::from(batch_b);
    let n = variants.len();
    let mut total = Rational::ZERO;
    for (i, v) in variants.iter().enumerate() {
        total += p;
        total += if i + 1 == n { v.latency_ms } else { b * v.latency_ms };
    }
    total
}

/// Evaluates a plan in closed form.
pub fn estimate(plan: &ExecutionPlan, platform: &Platform) -> Result<PerformanceEstimate, ModelError> {
    let place = placement(plan, platform)?;
    let a = &plan.assignment;
    let vs = a.variants();
    if vs.is_empty() {
        return Err(ModelError::Domain("empty assignment".into()));
    }
    let max_bw = vs.iter().map(|v| v.bandwidth_mbps).max().unwrap_or_default();
    let (latency_ms, throughput_fps, buffer_bytes, pr_time_ms, bandwidth_peak_mbps) = match plan.strategy {
        Strategy::Asic => {
            let lat = vs.iter().map(|v| v.latency_ms).sum();
            let tput = vs.iter().map(|v| effective_throughput(v, platform)).min().unwrap();
            let bw = vs.iter().map(|v| v.bandwidth_mbps).sum();
            (lat, tput, buffer_requirement(a, 1), Rational::ZERO, bw)
        }
        Strategy::Pr1 => {
            let p = pr_time(plan.region_fraction, platform)?;
            let lat = batched_first_frame_latency(vs, p, plan.batch_b);
            let tput = serialized_throughput(vs, platform, p, plan.batch_b);
            (lat, tput, buffer_requirement(a, plan.batch_b), p, max_bw)
        }
        Strategy::Pr2 => {
            let p = pr_time(plan.region_fraction, platform)?;
            let lat = p + vs.iter().map(|v| v.latency_ms.max(p)).sum::<Rational>();
            let period: Rational = vs.iter().map(|v| effective_interval_ms(v, platform).max(p)).sum();
            (lat, ms_per_s() / period, buffer_requirement(a, 1), p, max_bw)
        }
        Strategy::Prk => {
            let p = pr_time(plan.region_fraction, platform)?;
            let k = Rational::from(plan.k);
            let lat = batched_first_frame_latency(vs, p, plan.batch_b);
            let tput = k * serialized_throughput(vs, platform, p, plan.batch_b);
            let buf = buffer_requirement(a, plan.batch_b).saturating_mul(plan.k as u64);
            (lat, tput, buf, p, k * max_bw)
        }
    };
    check_capacity(buffer_bytes, platform)?;
    let (bottleneck, bottleneck_utilization) = place.used.bottleneck(&platform.budget);
    let (throughput_density, _) = performance_density(throughput_fps, &place.used, platform)?;
    let (latency_density, _) = performance_density(ms_per_s() / latency_ms, &place.used, platform)?;
    Ok(PerformanceEstimate {
        latency_ms,
        throughput_fps,
        buffer_bytes,
        pr_time_ms,
        bandwidth_peak_mbps,
        resources_used: place.used,
        regions: place.regions,
        bottleneck,
        bottleneck_utilization,
        throughput_density,
        latency_density,
    })
}

#[cfg(test)]
mod tests;
