//! Characterization data: module variants, task-chain applications and
//! target platforms, plus the line-oriented file format they are stored in.

mod format;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rational::Rational;

pub use format::{parse_application, parse_library, parse_platform, write_application, write_library, write_platform};
pub use validate::{validate, Finding, FindingKind, Severity, ValidationReport};

/// The three fabric resource classes tracked per variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    Lut,
    Bram36,
    Dsp,
}

impl Resource {
    pub const ALL: [Resource; 3] = [Resource::Lut, Resource::Bram36, Resource::Dsp];

    pub fn name(self) -> &'static str {
        match self {
            Resource::Lut => "lut",
            Resource::Bram36 => "bram36",
            Resource::Dsp => "dsp",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// LUT / BRAM36 / DSP counts. BRAM can be fractional (half BRAMs).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ResourceVector {
    pub lut: u64,
    pub bram36: Rational,
    pub dsp: u64,
}

impl ResourceVector {
    pub fn new(lut: u64, bram36: Rational, dsp: u64) -> Self {
        assert!(!bram36.is_negative(), "negative BRAM count");
        ResourceVector { lut, bram36, dsp }
    }

    pub fn zero() -> Self {
        ResourceVector::default()
    }

    pub fn get(&self, r: Resource) -> Rational {
        match r {
            Resource::Lut => Rational::from(self.lut),
            Resource::Bram36 => self.bram36,
            Resource::Dsp => Rational::from(self.dsp),
        }
    }

    /// Componentwise `self <= other`.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.first_exceeded(other).is_none()
    }

    /// The first resource (in LUT, BRAM, DSP order) where `self` exceeds `limit`.
    pub fn first_exceeded(&self, limit: &ResourceVector) -> Option<Resource> {
        Resource::ALL.into_iter().find(|r| self.get(*r) > limit.get(*r))
    }

    pub fn add(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector { lut: self.lut + other.lut, bram36: self.bram36 + other.bram36, dsp: self.dsp + other.dsp }
    }

    /// Scales by `f`, flooring the integer resource classes.
    pub fn scale(&self, f: Rational) -> ResourceVector {
        ResourceVector {
            lut: (Rational::from(self.lut) * f).floor_int() as u64,
            bram36: self.bram36 * f,
            dsp: (Rational::from(self.dsp) * f).floor_int() as u64,
        }
    }

    /// Componentwise minimum.
    pub fn meet(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            lut: self.lut.min(other.lut),
            bram36: self.bram36.min(other.bram36),
            dsp: self.dsp.min(other.dsp),
        }
    }

    /// used/available per class; classes with a zero budget count as 0
    /// when unused and are skipped otherwise (they can never be a ratio).
    pub fn utilization(&self, budget: &ResourceVector) -> [(Resource, Rational); 3] {
        Resource::ALL.map(|r| {
            let avail = budget.get(r);
            let used = self.get(r);
            if avail.is_zero() {
                (r, Rational::ZERO)
            } else {
                (r, used / avail)
            }
        })
    }

    /// Resource class with the highest used/budget ratio. Ties go to the
    /// earlier class in LUT, BRAM, DSP order.
    pub fn bottleneck(&self, budget: &ResourceVector) -> (Resource, Rational) {
        let mut best = (Resource::Lut, Rational::from(-1i64));
        for (r, u) in self.utilization(budget) {
            if u > best.1 {
                best = (r, u);
            }
        }
        best
    }

    pub fn is_zero(&self) -> bool {
        self.lut == 0 && self.bram36.is_zero() && self.dsp == 0
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lut={} bram36={} dsp={}", self.lut, self.bram36, self.dsp)
    }
}

/// Which design styles a variant can be instantiated in. ASIC-only variants
/// lack the uniform region interface; PR-only variants were built for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VariantStyle {
    Asic,
    Pr,
    #[default]
    Any,
}

impl VariantStyle {
    pub fn allows_asic(self) -> bool {
        matches!(self, VariantStyle::Asic | VariantStyle::Any)
    }

    pub fn allows_pr(self) -> bool {
        matches!(self, VariantStyle::Pr | VariantStyle::Any)
    }

    pub fn name(self) -> &'static str {
        match self {
            VariantStyle::Asic => "asic",
            VariantStyle::Pr => "pr",
            VariantStyle::Any => "any",
        }
    }

    /// Every context that `other` is usable in, `self` is usable in too.
    pub fn covers(self, other: VariantStyle) -> bool {
        (!other.allows_asic() || self.allows_asic()) && (!other.allows_pr() || self.allows_pr())
    }
}

impl fmt::Display for VariantStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// One implementation point of a task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModuleVariant {
    pub task: String,
    pub variant_id: String,
    pub resources: ResourceVector,
    /// Milliseconds for one run, start to finish.
    pub latency_ms: Rational,
    /// Peak runs per second.
    pub throughput_fps: Rational,
    /// Average external-memory traffic while running, MB/s.
    pub bandwidth_mbps: Rational,
    pub output_bytes: u64,
    pub style: VariantStyle,
}

impl ModuleVariant {
    pub fn key(&self) -> (&str, &str) {
        (&self.task, &self.variant_id)
    }

    /// Milliseconds between consecutive runs at peak throughput.
    pub fn peak_interval_ms(&self) -> Rational {
        Rational::from(1000i64) / self.throughput_fps
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LibraryError {
    #[error("duplicate variant ({task}, {variant})")]
    Duplicate { task: String, variant: String },
    #[error("variant ({task}, {variant}): {msg}")]
    Domain { task: String, variant: String, msg: String },
}

/// A set of variants, unique by (task, variant id), kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModuleLibrary {
    variants: Vec<ModuleVariant>,
}

impl ModuleLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_variants(variants: impl IntoIterator<Item = ModuleVariant>) -> Result<Self, LibraryError> {
        let mut lib = ModuleLibrary::new();
        for v in variants {
            lib.insert(v)?;
        }
        Ok(lib)
    }

    pub fn insert(&mut self, v: ModuleVariant) -> Result<(), LibraryError> {
        let domain = |msg: &str| LibraryError::Domain {
            task: v.task.clone(),
            variant: v.variant_id.clone(),
            msg: msg.to_string(),
        };
        if !v.latency_ms.is_positive() {
            return Err(domain("latency must be positive"));
        }
        if !v.throughput_fps.is_positive() {
            return Err(domain("throughput must be positive"));
        }
        if v.bandwidth_mbps.is_negative() || v.resources.bram36.is_negative() {
            return Err(domain("negative quantity"));
        }
        if self.get(&v.task, &v.variant_id).is_some() {
            return Err(LibraryError::Duplicate { task: v.task, variant: v.variant_id });
        }
        self.variants.push(v);
        Ok(())
    }

    pub fn get(&self, task: &str, variant_id: &str) -> Option<&ModuleVariant> {
        self.variants.iter().find(|v| v.task == task && v.variant_id == variant_id)
    }

    pub fn for_task<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a ModuleVariant> + 'a {
        self.variants.iter().filter(move |v| v.task == task)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModuleVariant> {
        self.variants.iter()
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    /// Merges another library in; duplicates are rejected.
    pub fn extend(&mut self, other: ModuleLibrary) -> Result<(), LibraryError> {
        for v in other.variants {
            self.insert(v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskSpec {
    pub name: String,
    /// Bytes consumed per run.
    pub input_bytes: u64,
}

/// A strictly sequential chain of dependent tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub name: String,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplicationError {
    #[error("application {0} has no tasks")]
    Empty(String),
    #[error("task {0} appears twice in the chain")]
    DuplicateTask(String),
}

impl Application {
    /// Checks N >= 1 and unique task names.
    pub fn new(name: impl Into<String>, tasks: Vec<TaskSpec>) -> Result<Self, ApplicationError> {
        let name = name.into();
        if tasks.is_empty() {
            return Err(ApplicationError::Empty(name));
        }
        for (i, t) in tasks.iter().enumerate() {
            if tasks[..i].iter().any(|o| o.name == t.name) {
                return Err(ApplicationError::DuplicateTask(t.name.clone()));
            }
        }
        Ok(Application { name, tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }
}

/// Target fabric plus the rates that drive reconfiguration and memory
/// throttling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Platform {
    /// Area budget A.
    pub budget: ResourceVector,
    /// Configuration port bandwidth, MB/s (1 MB = 10^6 bytes).
    pub pr_bandwidth_mbps: Rational,
    /// Partial bitstream size of one region spanning the whole budget.
    pub bitstream_bytes_full: u64,
    /// External memory bandwidth available to modules, MB/s.
    pub mem_bandwidth_mbps: Rational,
    pub buffer_capacity_bytes: u64,
    /// Optional measured region footprints, keyed by the number of regions
    /// in the layout. Layouts not listed split the budget evenly.
    pub floorplans: BTreeMap<u32, Vec<ResourceVector>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlatformError {
    #[error("platform field {0} must be positive")]
    NonPositive(&'static str),
    #[error("floorplan for {layout} regions lists {found} regions")]
    FloorplanArity { layout: u32, found: usize },
    #[error("floorplan for {layout} regions exceeds the budget")]
    FloorplanOverBudget { layout: u32 },
}

impl Platform {
    pub fn new(
        budget: ResourceVector,
        pr_bandwidth_mbps: Rational,
        bitstream_bytes_full: u64,
        mem_bandwidth_mbps: Rational,
        buffer_capacity_bytes: u64,
    ) -> Result<Self, PlatformError> {
        let p = Platform {
            budget,
            pr_bandwidth_mbps,
            bitstream_bytes_full,
            mem_bandwidth_mbps,
            buffer_capacity_bytes,
            floorplans: BTreeMap::new(),
        };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<(), PlatformError> {
        if !self.pr_bandwidth_mbps.is_positive() {
            return Err(PlatformError::NonPositive("pr_bandwidth_mbps"));
        }
        if self.bitstream_bytes_full == 0 {
            return Err(PlatformError::NonPositive("bitstream_bytes_full"));
        }
        if !self.mem_bandwidth_mbps.is_positive() {
            return Err(PlatformError::NonPositive("mem_bandwidth_mbps"));
        }
        if self.buffer_capacity_bytes == 0 {
            return Err(PlatformError::NonPositive("buffer_capacity_bytes"));
        }
        for (&layout, regions) in &self.floorplans {
            if layout == 0 || regions.len() != layout as usize {
                return Err(PlatformError::FloorplanArity { layout, found: regions.len() });
            }
            let total = regions.iter().fold(ResourceVector::zero(), |a, r| a.add(r));
            if !total.fits_within(&self.budget) {
                return Err(PlatformError::FloorplanOverBudget { layout });
            }
        }
        Ok(())
    }

    pub fn with_floorplan(mut self, regions: Vec<ResourceVector>) -> Result<Self, PlatformError> {
        self.floorplans.insert(regions.len() as u32, regions);
        self.check()?;
        Ok(self)
    }

    /// Idealized copy whose reconfigurations take no time. Only reachable
    /// programmatically; parsed platforms always have a real bitstream.
    pub fn with_instant_reconfiguration(mut self) -> Self {
        self.bitstream_bytes_full = 0;
        self
    }

    /// Region footprints for a `k`-region layout: the declared floorplan
    /// when present, otherwise `k` equal shares of the budget.
    pub fn regions(&self, k: u32) -> Vec<ResourceVector> {
        assert!(k >= 1, "layout needs at least one region");
        match self.floorplans.get(&k) {
            Some(r) => r.clone(),
            None => vec![self.budget.scale(Rational::new(1, k as i128)); k as usize],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn variant(task: &str, id: &str) -> ModuleVariant {
        ModuleVariant {
            task: task.into(),
            variant_id: id.into(),
            resources: ResourceVector::new(10, q("1.5"), 2),
            latency_ms: q("1"),
            throughput_fps: q("1000"),
            bandwidth_mbps: q("0"),
            output_bytes: 0,
            style: VariantStyle::Any,
        }
    }

    #[test]
    fn fits_within_is_componentwise() {
        let budget = ResourceVector::new(100, q("10"), 5);
        assert!(ResourceVector::new(100, q("10"), 5).fits_within(&budget));
        assert_eq!(ResourceVector::new(101, q("1"), 0).first_exceeded(&budget), Some(Resource::Lut));
        assert_eq!(ResourceVector::new(1, q("10.5"), 0).first_exceeded(&budget), Some(Resource::Bram36));
        assert_eq!(ResourceVector::new(1, q("1"), 6).first_exceeded(&budget), Some(Resource::Dsp));
    }

    #[test]
    fn bottleneck_is_highest_ratio() {
        let budget = ResourceVector::new(70560, q("216"), 360);
        let used = ResourceVector::new(37824, q("206.5"), 81);
        let (r, u) = used.bottleneck(&budget);
        assert_eq!(r, Resource::Bram36);
        assert_eq!(u, q("206.5") / q("216"));
    }

    #[test]
    fn library_rejects_duplicates_and_bad_domain() {
        let mut lib = ModuleLibrary::new();
        lib.insert(variant("hog", "v1")).unwrap();
        assert!(matches!(lib.insert(variant("hog", "v1")), Err(LibraryError::Duplicate { .. })));
        let mut bad = variant("hog", "v2");
        bad.latency_ms = q("0");
        assert!(matches!(lib.insert(bad), Err(LibraryError::Domain { .. })));
        let mut bad = variant("hog", "v3");
        bad.throughput_fps = q("-1");
        assert!(matches!(lib.insert(bad), Err(LibraryError::Domain { .. })));
        assert_eq!(lib.len(), 1);
    }

    #[test]
    fn application_invariants() {
        let t = |n: &str| TaskSpec { name: n.into(), input_bytes: 1 };
        assert!(Application::new("a", vec![]).is_err());
        assert!(Application::new("a", vec![t("x"), t("x")]).is_err());
        let app = Application::new("a", vec![t("x"), t("y")]).unwrap();
        assert_eq!(app.task_index("y"), Some(1));
    }

    #[test]
    fn default_regions_split_budget() {
        let p = Platform::new(ResourceVector::new(70560, q("216"), 360), q("453"), 1, q("1"), 1).unwrap();
        let halves = p.regions(2);
        assert_eq!(halves.len(), 2);
        assert_eq!(halves[0], ResourceVector::new(35280, q("108"), 180));
        let thirds = p.regions(3);
        assert_eq!(thirds[0].lut, 23520);
    }

    #[test]
    fn style_coverage() {
        assert!(VariantStyle::Any.covers(VariantStyle::Pr));
        assert!(!VariantStyle::Asic.covers(VariantStyle::Pr));
        assert!(!VariantStyle::Pr.covers(VariantStyle::Any));
        assert!(VariantStyle::Pr.covers(VariantStyle::Pr));
    }
}
