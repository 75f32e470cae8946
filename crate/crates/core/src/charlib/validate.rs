use std::fmt;

use super::{Application, ModuleLibrary, ModuleVariant, Platform, Resource};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Info,
    Warning,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingKind {
    /// The library has no variant at all for a task of the application.
    TaskUncovered {
        task: String,
    },
    /// Variants exist, but none fits the platform budget.
    NoVariantFits {
        task: String,
    },
    VariantExceedsBudget {
        task: String,
        variant: String,
        resource: Resource,
    },
    /// Another variant of the same task is no larger and no slower.
    Dominated {
        task: String,
        variant: String,
        by: String,
    },
    /// Demand above the platform's memory bandwidth; throughput is throttled.
    BandwidthThrottled {
        task: String,
        variant: String,
        demand_mbps: Rational,
        available_mbps: Rational,
    },
    /// A producer's per-run output differs from the next task's input size.
    EdgeSizeMismatch {
        producer: String,
        variant: String,
        output_bytes: u64,
        consumer: String,
        input_bytes: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Fatal => "fatal",
        };
        write!(f, "{sev}: ")?;
        match &self.kind {
            FindingKind::TaskUncovered { task } => write!(f, "task uncovered: no variant of {task} in the library"),
            FindingKind::NoVariantFits { task } => write!(f, "no variant of {task} fits the budget"),
            FindingKind::VariantExceedsBudget { task, variant, resource } => {
                write!(f, "variant {task}/{variant} does not fit the budget ({resource})")
            }
            FindingKind::Dominated { task, variant, by } => {
                write!(f, "variant {task}/{variant} is dominated by {task}/{by}")
            }
            FindingKind::BandwidthThrottled { task, variant, demand_mbps, available_mbps } => write!(
                f,
                "variant {task}/{variant} demands {demand_mbps:.3} MB/s of {available_mbps:.3} MB/s available; throughput throttled"
            ),
            FindingKind::EdgeSizeMismatch { producer, variant, output_bytes, consumer, input_bytes } => write!(
                f,
                "{producer}/{variant} emits {output_bytes} bytes per run but {consumer} reads {input_bytes}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        !self.findings.iter().any(|f| f.severity == Severity::Fatal)
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Fatal)
    }

    fn push(&mut self, severity: Severity, kind: FindingKind) {
        self.findings.push(Finding { severity, kind });
    }
}

/// `a` is usable wherever `b` is, no larger, no slower, and better somewhere.
fn dominates(a: &ModuleVariant, b: &ModuleVariant) -> bool {
    if !a.style.covers(b.style) || !a.resources.fits_within(&b.resources) {
        return false;
    }
    if a.latency_ms > b.latency_ms || a.throughput_fps < b.throughput_fps {
        return false;
    }
    a.resources != b.resources || a.latency_ms < b.latency_ms || a.throughput_fps > b.throughput_fps
}

/// Cross-checks a library against an application and platform. Never
/// fails; everything found is reported.
pub fn validate(library: &ModuleLibrary, application: &Application, platform: &Platform) -> ValidationReport {
    let mut report = ValidationReport::default();
    for task in &application.tasks {
        let variants: Vec<&ModuleVariant> = library.for_task(&task.name).collect();
        if variants.is_empty() {
            report.push(Severity::Fatal, FindingKind::TaskUncovered { task: task.name.clone() });
            continue;
        }
        let mut any_fits = false;
        for v in &variants {
            match v.resources.first_exceeded(&platform.budget) {
                None => any_fits = true,
                Some(resource) => report.push(
                    Severity::Warning,
                    FindingKind::VariantExceedsBudget { task: v.task.clone(), variant: v.variant_id.clone(), resource },
                ),
            }
        }
        if !any_fits {
            report.push(Severity::Fatal, FindingKind::NoVariantFits { task: task.name.clone() });
        }
        for v in &variants {
            if let Some(by) = variants.iter().find(|w| dominates(w, v)) {
                report.push(
                    Severity::Warning,
                    FindingKind::Dominated {
                        task: v.task.clone(),
                        variant: v.variant_id.clone(),
                        by: by.variant_id.clone(),
                    },
                );
            }
            if v.bandwidth_mbps > platform.mem_bandwidth_mbps {
                report.push(
                    Severity::Info,
                    FindingKind::BandwidthThrottled {
                        task: v.task.clone(),
                        variant: v.variant_id.clone(),
                        demand_mbps: v.bandwidth_mbps,
                        available_mbps: platform.mem_bandwidth_mbps,
                    },
                );
            }
        }
    }
    for pair in application.tasks.windows(2) {
        let (producer, consumer) = (&pair[0], &pair[1]);
        for v in library.for_task(&producer.name) {
            if v.output_bytes != 0 && v.output_bytes != consumer.input_bytes {
                report.push(
                    Severity::Info,
                    FindingKind::EdgeSizeMismatch {
                        producer: producer.name.clone(),
                        variant: v.variant_id.clone(),
                        output_bytes: v.output_bytes,
                        consumer: consumer.name.clone(),
                        input_bytes: consumer.input_bytes,
                    },
                );
            }
        }
    }
    report
}
