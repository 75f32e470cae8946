use std::fmt;

use crate::charlib::{Application, ModuleLibrary, ModuleVariant, Platform, Resource, ResourceVector};
use crate::rational::Rational;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Fixed allocation, every module resident.
    Asic,
    /// Tasks serialized on one region, B runs per residency.
    Pr1,
    /// Two regions, compute on one while the other is reconfigured.
    Pr2,
    /// k regions each running the whole chain serially, staggered.
    Prk,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Asic => "asic",
            Strategy::Pr1 => "pr1",
            Strategy::Pr2 => "pr2",
            Strategy::Prk => "prk",
        }
    }

    pub fn is_pr(self) -> bool {
        self != Strategy::Asic
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// The chosen variant for every task of an application, in chain order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantAssignment {
    application: Application,
    variants: Vec<ModuleVariant>,
}

impl VariantAssignment {
    pub fn new(application: &Application, variants: Vec<ModuleVariant>) -> Result<Self, ModelError> {
        if variants.len() != application.tasks.len() {
            return Err(ModelError::Assignment(format!(
                "{} variants for {} tasks",
                variants.len(),
                application.tasks.len()
            )));
        }
        for (t, v) in application.tasks.iter().zip(&variants) {
            if t.name != v.task {
                return Err(ModelError::Assignment(format!(
                    "variant {}/{} assigned to task {}",
                    v.task, v.variant_id, t.name
                )));
            }
        }
        Ok(VariantAssignment { application: application.clone(), variants })
    }

    /// Resolves one variant id per task (chain order) against a library.
    pub fn from_ids(application: &Application, library: &ModuleLibrary, ids: &[&str]) -> Result<Self, ModelError> {
        if ids.len() != application.tasks.len() {
            return Err(ModelError::Assignment(format!("{} ids for {} tasks", ids.len(), application.tasks.len())));
        }
        let variants = application
            .tasks
            .iter()
            .zip(ids)
            .map(|(t, id)| {
                library
                    .get(&t.name, id)
                    .cloned()
                    .ok_or_else(|| ModelError::Assignment(format!("no variant {}/{} in library", t.name, id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(application, variants)
    }

    pub fn application(&self) -> &Application {
        &self.application
    }

    pub fn variants(&self) -> &[ModuleVariant] {
        &self.variants
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.variants.iter().map(|v| v.variant_id.as_str()).collect()
    }

    pub fn total_resources(&self) -> ResourceVector {
        self.variants.iter().fold(ResourceVector::zero(), |acc, v| acc.add(&v.resources))
    }
}

/// Strategy plus everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionPlan {
    pub strategy: Strategy,
    pub assignment: VariantAssignment,
    /// Runs per residency (Pr1/Prk); 1 otherwise.
    pub batch_b: u32,
    /// Region count: 0 for Asic, 1 for Pr1, 2 for Pr2, k for Prk.
    pub k: u32,
    /// Size of each region relative to the budget; drives PR time.
    pub region_fraction: Rational,
}

impl ExecutionPlan {
    pub fn asic(assignment: VariantAssignment) -> Self {
        ExecutionPlan { strategy: Strategy::Asic, assignment, batch_b: 1, k: 0, region_fraction: Rational::ONE }
    }

    pub fn pr1(assignment: VariantAssignment) -> Self {
        ExecutionPlan { strategy: Strategy::Pr1, assignment, batch_b: 1, k: 1, region_fraction: Rational::ONE }
    }

    pub fn pr2(assignment: VariantAssignment) -> Self {
        ExecutionPlan { strategy: Strategy::Pr2, assignment, batch_b: 1, k: 2, region_fraction: Rational::new(1, 2) }
    }

    pub fn prk(assignment: VariantAssignment, k: u32) -> Self {
        ExecutionPlan {
            strategy: Strategy::Prk,
            assignment,
            batch_b: 1,
            k,
            region_fraction: Rational::new(1, k.max(1) as i128),
        }
    }

    pub fn with_batch(mut self, b: u32) -> Self {
        self.batch_b = b;
        self
    }

    pub fn with_region_fraction(mut self, f: Rational) -> Self {
        self.region_fraction = f;
        self
    }

    /// Number of PR regions the plan occupies.
    pub fn regions(&self) -> u32 {
        self.k
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let f = self.region_fraction;
        if !f.is_positive() || f > Rational::ONE {
            return Err(ModelError::Domain(format!("region fraction {f} outside (0, 1]")));
        }
        if self.batch_b == 0 {
            return Err(ModelError::Domain("batch size must be at least 1".into()));
        }
        match self.strategy {
            Strategy::Asic if self.k != 0 || self.batch_b != 1 => {
                Err(ModelError::Domain("asic plans have no regions and no batching".into()))
            }
            Strategy::Pr1 if self.k != 1 => Err(ModelError::Domain("pr1 uses exactly one region".into())),
            Strategy::Pr2 if self.k != 2 || self.batch_b != 1 => {
                Err(ModelError::Domain("pr2 uses two regions and no batching".into()))
            }
            Strategy::Pr2 if f > Rational::new(1, 2) => {
                Err(ModelError::Domain("pr2 regions are at most half the budget".into()))
            }
            Strategy::Prk if self.k < 1 => Err(ModelError::Domain("prk needs k >= 1".into())),
            Strategy::Prk if f > Rational::new(1, self.k as i128) => {
                Err(ModelError::Domain(format!("prk regions are at most 1/{} of the budget", self.k)))
            }
            _ => Ok(()),
        }
    }

    /// Compact description, e.g. `pr1 f=1/2 B=64 [hog=p2 cnn=p2 lstm=p2]`.
    pub fn label(&self) -> String {
        let vars: Vec<String> =
            self.assignment.variants().iter().map(|v| format!("{}={}", v.task, v.variant_id)).collect();
        let mut s = self.strategy.name().to_string();
        if self.strategy == Strategy::Prk {
            s.push_str(&format!(" k={}", self.k));
        }
        if self.strategy.is_pr() {
            s.push_str(&format!(" f={}", self.region_fraction));
        }
        if matches!(self.strategy, Strategy::Pr1 | Strategy::Prk) {
            s.push_str(&format!(" B={}", self.batch_b));
        }
        format!("{s} [{}]", vars.join(" "))
    }
}

/// Where a plan's modules live on the fabric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    /// Footprints of the regions the plan occupies (empty for Asic).
    pub regions: Vec<ResourceVector>,
    /// Total fabric claimed by the plan.
    pub used: ResourceVector,
}

fn unit_fraction_layout(f: Rational) -> Option<u32> {
    if f.numer() == 1 && f.denom() >= 1 && f.denom() <= u32::MAX as i128 {
        Some(f.denom() as u32)
    } else {
        None
    }
}

fn infeasible(what: String, limit: &str, r: Resource, used: &ResourceVector, cap: &ResourceVector) -> ModelError {
    ModelError::Infeasible { what, limit: limit.to_string(), resource: r, used: used.get(r), available: cap.get(r) }
}

fn check_variants_fit(variants: &[ModuleVariant], cap: &ResourceVector, limit: &str) -> Result<(), ModelError> {
    for v in variants {
        if let Some(r) = v.resources.first_exceeded(cap) {
            return Err(infeasible(format!("variant {}/{}", v.task, v.variant_id), limit, r, &v.resources, cap));
        }
    }
    Ok(())
}

/// Ranks candidate regions: smaller bottleneck utilization first, then
/// smaller total utilization, then lower index.
fn region_order_key(r: &ResourceVector, budget: &ResourceVector) -> (Rational, Rational) {
    let (_, peak) = r.bottleneck(budget);
    let total: Rational = r.utilization(budget).iter().map(|(_, u)| *u).sum();
    (peak, total)
}

/// Region footprints for a plan and the resources it claims.
///
/// Fractions of the form 1/m use the platform's m-region layout (measured
/// floorplan when declared, even split otherwise); any other fraction scales
/// the budget directly. A single-region plan picks the smallest region of
/// its layout that holds every assigned variant.
pub fn placement(plan: &ExecutionPlan, platform: &Platform) -> Result<Placement, ModelError> {
    plan.check()?;
    let variants = plan.assignment.variants();
    for v in variants {
        let ok = if plan.strategy.is_pr() { v.style.allows_pr() } else { v.style.allows_asic() };
        if !ok {
            return Err(ModelError::Style {
                variant: format!("{}/{}", v.task, v.variant_id),
                style: v.style,
                strategy: plan.strategy,
            });
        }
    }
    if plan.strategy == Strategy::Asic {
        let used = plan.assignment.total_resources();
        if let Some(r) = used.first_exceeded(&platform.budget) {
            return Err(infeasible("asic assignment".into(), "budget", r, &used, &platform.budget));
        }
        return Ok(Placement { regions: vec![], used });
    }
    let f = plan.region_fraction;
    let layout: Vec<ResourceVector> = match unit_fraction_layout(f) {
        Some(m) => platform.regions(m),
        None => vec![platform.budget.scale(f); plan.k as usize],
    };
    let regions: Vec<ResourceVector> = if plan.k == 1 {
        let mut candidates: Vec<(usize, &ResourceVector)> = layout.iter().enumerate().collect();
        candidates.sort_by(|a, b| {
            region_order_key(a.1, &platform.budget).cmp(&region_order_key(b.1, &platform.budget)).then(a.0.cmp(&b.0))
        });
        match candidates.iter().find(|(_, r)| variants.iter().all(|v| v.resources.fits_within(r))) {
            Some((_, r)) => vec![(*r).clone()],
            None => {
                let largest = candidates.last().map(|(_, r)| (*r).clone()).unwrap_or_default();
                check_variants_fit(variants, &largest, "region")?;
                unreachable!("a variant that fits the largest region fits a candidate");
            }
        }
    } else {
        if layout.len() != plan.k as usize {
            // fraction 1/m with m != k: k regions of that size
            vec![platform.budget.scale(f); plan.k as usize]
        } else {
            layout
        }
    };
    let common = regions.iter().skip(1).fold(regions[0].clone(), |acc, r| acc.meet(r));
    check_variants_fit(variants, &common, "region")?;
    let used = regions.iter().fold(ResourceVector::zero(), |acc, r| acc.add(r));
    if let Some(r) = used.first_exceeded(&platform.budget) {
        return Err(infeasible(format!("{} regions", plan.k), "budget", r, &used, &platform.budget));
    }
    Ok(Placement { regions, used })
}
