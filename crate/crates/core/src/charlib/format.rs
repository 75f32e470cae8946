//! Line-oriented characterization format.
//!
//! ```text
//! # comment
//! [variant]
//! task = hog
//! variant = p1
//! lut = 55635
//! ...
//! ```
//!
//! Record headers: `[variant]`, `[task]`, `[application]`, `[platform]`,
//! and `[region]` (optional measured floorplan entries). Values are decimal
//! rationals; `p/q` is also accepted so reciprocals stay exact.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{
    Application, ModuleLibrary, ModuleVariant, Platform, PlatformError, ResourceVector, TaskSpec, VariantStyle,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown record type [{name}]")]
    UnknownRecord { line: usize, name: String },
    #[error("line {line}: [{name}] record not allowed in this file")]
    UnexpectedRecord { line: usize, name: String },
    #[error("line {line}: unknown key {key:?} in [{record}] record")]
    UnknownKey { line: usize, record: String, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: [{record}] record is missing field {field}")]
    MissingField { line: usize, record: String, field: &'static str },
    #[error("line {line}: invalid value {value:?} for {key}: {reason}")]
    InvalidValue { line: usize, key: String, value: String, reason: &'static str },
    #[error("line {line}: duplicate variant ({task}, {variant})")]
    Duplicate { line: usize, task: String, variant: String },
    #[error("line {line}: {msg}")]
    Domain { line: usize, msg: String },
    #[error("{0}")]
    Missing(String),
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownRecord { line, .. }
            | ParseError::UnexpectedRecord { line, .. }
            | ParseError::UnknownKey { line, .. }
            | ParseError::DuplicateKey { line, .. }
            | ParseError::MissingField { line, .. }
            | ParseError::InvalidValue { line, .. }
            | ParseError::Duplicate { line, .. }
            | ParseError::Domain { line, .. } => Some(*line),
            ParseError::Missing(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Variant,
    Task,
    Application,
    Platform,
    Region,
}

impl Kind {
    fn from_name(name: &str) -> Option<Kind> {
        Some(match name {
            "variant" => Kind::Variant,
            "task" => Kind::Task,
            "application" => Kind::Application,
            "platform" => Kind::Platform,
            "region" => Kind::Region,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Variant => "variant",
            Kind::Task => "task",
            Kind::Application => "application",
            Kind::Platform => "platform",
            Kind::Region => "region",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Kind::Variant => &[
                "task",
                "variant",
                "lut",
                "bram36",
                "dsp",
                "latency_ms",
                "throughput_fps",
                "bandwidth_mbps",
                "output_bytes",
                "style",
            ],
            Kind::Task => &["name", "input_bytes"],
            Kind::Application => &["name"],
            Kind::Platform => &[
                "budget_lut",
                "budget_bram36",
                "budget_dsp",
                "pr_bandwidth_mbps",
                "bitstream_bytes_full",
                "mem_bandwidth_mbps",
                "buffer_capacity_bytes",
            ],
            Kind::Region => &["layout", "lut", "bram36", "dsp"],
        }
    }
}

struct Record {
    kind: Kind,
    line: usize,
    fields: BTreeMap<String, (String, usize)>,
}

impl Record {
    fn raw(&self, field: &'static str) -> Result<(&str, usize), ParseError> {
        self.fields.get(field).map(|(v, l)| (v.as_str(), *l)).ok_or(ParseError::MissingField {
            line: self.line,
            record: self.kind.name().into(),
            field,
        })
    }

    fn text(&self, field: &'static str) -> Result<String, ParseError> {
        let (v, line) = self.raw(field)?;
        let ident_ok = !v.is_empty() && v.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if !ident_ok {
            return Err(ParseError::InvalidValue {
                line,
                key: field.into(),
                value: v.into(),
                reason: "expected an identifier",
            });
        }
        Ok(v.to_string())
    }

    fn rational(&self, field: &'static str) -> Result<Rational, ParseError> {
        let (v, line) = self.raw(field)?;
        v.parse::<Rational>().map_err(|_| ParseError::InvalidValue {
            line,
            key: field.into(),
            value: v.into(),
            reason: "expected a decimal rational",
        })
    }

    fn nonneg(&self, field: &'static str) -> Result<Rational, ParseError> {
        let r = self.rational(field)?;
        if r.is_negative() {
            let (v, line) = self.raw(field)?;
            return Err(ParseError::InvalidValue { line, key: field.into(), value: v.into(), reason: "must be >= 0" });
        }
        Ok(r)
    }

    fn count(&self, field: &'static str) -> Result<u64, ParseError> {
        let r = self.nonneg(field)?;
        if !r.is_integer() || r.numer() > u64::MAX as i128 {
            let (v, line) = self.raw(field)?;
            return Err(ParseError::InvalidValue {
                line,
                key: field.into(),
                value: v.into(),
                reason: "expected a nonnegative integer",
            });
        }
        Ok(r.numer() as u64)
    }

    fn field_line(&self, field: &str) -> usize {
        self.fields.get(field).map(|(_, l)| *l).unwrap_or(self.line)
    }
}

fn read_records(text: &str, allowed: &[Kind]) -> Result<Vec<Record>, ParseError> {
    let mut records: Vec<Record> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ParseError::Syntax { line, msg: format!("unterminated header {content:?}") })?
                .trim();
            let kind =
                Kind::from_name(name).ok_or_else(|| ParseError::UnknownRecord { line, name: name.to_string() })?;
            if !allowed.contains(&kind) {
                return Err(ParseError::UnexpectedRecord { line, name: name.to_string() });
            }
            records.push(Record { kind, line, fields: BTreeMap::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ParseError::Syntax { line, msg: format!("expected `key = value`, got {content:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        let record = records
            .last_mut()
            .ok_or_else(|| ParseError::Syntax { line, msg: "field before any record header".into() })?;
        if !record.kind.keys().contains(&key) {
            return Err(ParseError::UnknownKey { line, record: record.kind.name().into(), key: key.into() });
        }
        if value.is_empty() {
            return Err(ParseError::Syntax { line, msg: format!("empty value for {key}") });
        }
        if record.fields.insert(key.to_string(), (value.to_string(), line)).is_some() {
            return Err(ParseError::DuplicateKey { line, key: key.into() });
        }
    }
    Ok(records)
}

fn variant_from(rec: &Record) -> Result<ModuleVariant, ParseError> {
    let latency_ms = rec.rational("latency_ms")?;
    if !latency_ms.is_positive() {
        return Err(ParseError::Domain {
            line: rec.field_line("latency_ms"),
            msg: "latency_ms must be positive".into(),
        });
    }
    let throughput_fps = rec.rational("throughput_fps")?;
    if !throughput_fps.is_positive() {
        return Err(ParseError::Domain {
            line: rec.field_line("throughput_fps"),
            msg: "throughput_fps must be positive".into(),
        });
    }
    let style = match rec.fields.get("style") {
        None => VariantStyle::Any,
        Some((v, line)) => match v.as_str() {
            "asic" => VariantStyle::Asic,
            "pr" => VariantStyle::Pr,
            "any" => VariantStyle::Any,
            _ => {
                return Err(ParseError::InvalidValue {
                    line: *line,
                    key: "style".into(),
                    value: v.clone(),
                    reason: "expected asic, pr or any",
                })
            }
        },
    };
    Ok(ModuleVariant {
        task: rec.text("task")?,
        variant_id: rec.text("variant")?,
        resources: ResourceVector { lut: rec.count("lut")?, bram36: rec.nonneg("bram36")?, dsp: rec.count("dsp")? },
        latency_ms,
        throughput_fps,
        bandwidth_mbps: rec.nonneg("bandwidth_mbps")?,
        output_bytes: rec.count("output_bytes")?,
        style,
    })
}

/// Parses `[variant]` records into a library.
pub fn parse_library(text: &str) -> Result<ModuleLibrary, ParseError> {
    let mut lib = ModuleLibrary::new();
    for rec in read_records(text, &[Kind::Variant])? {
        let v = variant_from(&rec)?;
        if lib.get(&v.task, &v.variant_id).is_some() {
            return Err(ParseError::Duplicate { line: rec.line, task: v.task, variant: v.variant_id });
        }
        lib.insert(v).map_err(|e| ParseError::Domain { line: rec.line, msg: e.to_string() })?;
    }
    Ok(lib)
}

/// Parses one `[application]` record followed by its `[task]` records, in
/// chain order.
pub fn parse_application(text: &str) -> Result<Application, ParseError> {
    let records = read_records(text, &[Kind::Application, Kind::Task])?;
    let mut name: Option<(String, usize)> = None;
    let mut tasks = Vec::new();
    for rec in &records {
        match rec.kind {
            Kind::Application => {
                if name.is_some() {
                    return Err(ParseError::Syntax {
                        line: rec.line,
                        msg: "more than one [application] record".into(),
                    });
                }
                name = Some((rec.text("name")?, rec.line));
            }
            Kind::Task => {
                if name.is_none() {
                    return Err(ParseError::Syntax { line: rec.line, msg: "[task] before [application]".into() });
                }
                let t = TaskSpec { name: rec.text("name")?, input_bytes: rec.count("input_bytes")? };
                if tasks.iter().any(|o: &TaskSpec| o.name == t.name) {
                    return Err(ParseError::Domain { line: rec.line, msg: format!("task {} appears twice", t.name) });
                }
                tasks.push(t);
            }
            _ => unreachable!(),
        }
    }
    let (name, line) = name.ok_or_else(|| ParseError::Missing("no [application] record".into()))?;
    Application::new(name, tasks).map_err(|e| ParseError::Domain { line, msg: e.to_string() })
}

/// Parses a `[platform]` record and any `[region]` floorplan entries.
pub fn parse_platform(text: &str) -> Result<Platform, ParseError> {
    let records = read_records(text, &[Kind::Platform, Kind::Region])?;
    let mut platform: Option<(Platform, usize)> = None;
    let mut regions: BTreeMap<u32, Vec<ResourceVector>> = BTreeMap::new();
    let mut last_region_line = 0;
    for rec in &records {
        match rec.kind {
            Kind::Platform => {
                if platform.is_some() {
                    return Err(ParseError::Syntax { line: rec.line, msg: "more than one [platform] record".into() });
                }
                let positive = |field: &'static str| -> Result<Rational, ParseError> {
                    let r = rec.rational(field)?;
                    if !r.is_positive() {
                        return Err(ParseError::Domain {
                            line: rec.field_line(field),
                            msg: format!("{field} must be positive"),
                        });
                    }
                    Ok(r)
                };
                let positive_count = |field: &'static str| -> Result<u64, ParseError> {
                    let n = rec.count(field)?;
                    if n == 0 {
                        return Err(ParseError::Domain {
                            line: rec.field_line(field),
                            msg: format!("{field} must be positive"),
                        });
                    }
                    Ok(n)
                };
                let p = Platform {
                    budget: ResourceVector {
                        lut: rec.count("budget_lut")?,
                        bram36: rec.nonneg("budget_bram36")?,
                        dsp: rec.count("budget_dsp")?,
                    },
                    pr_bandwidth_mbps: positive("pr_bandwidth_mbps")?,
                    bitstream_bytes_full: positive_count("bitstream_bytes_full")?,
                    mem_bandwidth_mbps: positive("mem_bandwidth_mbps")?,
                    buffer_capacity_bytes: positive_count("buffer_capacity_bytes")?,
                    floorplans: BTreeMap::new(),
                };
                platform = Some((p, rec.line));
            }
            Kind::Region => {
                let layout = rec.count("layout")?;
                if layout == 0 || layout > u32::MAX as u64 {
                    return Err(ParseError::Domain {
                        line: rec.field_line("layout"),
                        msg: "layout must be >= 1".into(),
                    });
                }
                let r =
                    ResourceVector { lut: rec.count("lut")?, bram36: rec.nonneg("bram36")?, dsp: rec.count("dsp")? };
                regions.entry(layout as u32).or_default().push(r);
                last_region_line = rec.line;
            }
            _ => unreachable!(),
        }
    }
    let (mut p, line) = platform.ok_or_else(|| ParseError::Missing("no [platform] record".into()))?;
    p.floorplans = regions;
    p.check().map_err(|e| ParseError::Domain {
        line: match e {
            PlatformError::NonPositive(_) => line,
            _ => last_region_line,
        },
        msg: e.to_string(),
    })?;
    Ok(p)
}

fn push_field(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{key} = {value}\n"));
}

pub fn write_library(lib: &ModuleLibrary) -> String {
    let mut out = String::new();
    for (i, v) in lib.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("[variant]\n");
        push_field(&mut out, "task", &v.task);
        push_field(&mut out, "variant", &v.variant_id);
        push_field(&mut out, "lut", v.resources.lut);
        push_field(&mut out, "bram36", v.resources.bram36);
        push_field(&mut out, "dsp", v.resources.dsp);
        push_field(&mut out, "latency_ms", v.latency_ms);
        push_field(&mut out, "throughput_fps", v.throughput_fps);
        push_field(&mut out, "bandwidth_mbps", v.bandwidth_mbps);
        push_field(&mut out, "output_bytes", v.output_bytes);
        if v.style != VariantStyle::Any {
            push_field(&mut out, "style", v.style.name());
        }
    }
    out
}

pub fn write_application(app: &Application) -> String {
    let mut out = String::from("[application]\n");
    push_field(&mut out, "name", &app.name);
    for t in &app.tasks {
        out.push_str("\n[task]\n");
        push_field(&mut out, "name", &t.name);
        push_field(&mut out, "input_bytes", t.input_bytes);
    }
    out
}

pub fn write_platform(p: &Platform) -> String {
    let mut out = String::from("[platform]\n");
    push_field(&mut out, "budget_lut", p.budget.lut);
    push_field(&mut out, "budget_bram36", p.budget.bram36);
    push_field(&mut out, "budget_dsp", p.budget.dsp);
    push_field(&mut out, "pr_bandwidth_mbps", p.pr_bandwidth_mbps);
    push_field(&mut out, "bitstream_bytes_full", p.bitstream_bytes_full);
    push_field(&mut out, "mem_bandwidth_mbps", p.mem_bandwidth_mbps);
    push_field(&mut out, "buffer_capacity_bytes", p.buffer_capacity_bytes);
    for (layout, regions) in &p.floorplans {
        for r in regions {
            out.push_str("\n[region]\n");
            push_field(&mut out, "layout", layout);
            push_field(&mut out, "lut", r.lut);
            push_field(&mut out, "bram36", r.bram36);
            push_field(&mut out, "dsp", r.dsp);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    const HOG_P1: &str = "
# full-region hog
[variant]
task = hog
variant = p1
lut = 55635
bram36 = 109
dsp = 114
latency_ms = 8.6
throughput_fps = 116
bandwidth_mbps = 91.2
output_bytes = 262144
style = pr
";

    const PLATFORM: &str = "
[platform]
budget_lut = 70560
budget_bram36 = 206.5
budget_dsp = 360
pr_bandwidth_mbps = 453
bitstream_bytes_full = 5500000
mem_bandwidth_mbps = 4264
buffer_capacity_bytes = 2147483648
";

    #[test]
    fn parses_hog_record_exactly() {
        let lib = parse_library(HOG_P1).unwrap();
        let v = lib.get("hog", "p1").unwrap();
        assert_eq!(v.resources, ResourceVector::new(55635, q("109"), 114));
        assert_eq!(v.throughput_fps, q("116"));
        assert_eq!(v.latency_ms, q("8.6"));
        assert_eq!(v.latency_ms, Rational::new(43, 5));
        assert_eq!(v.style, VariantStyle::Pr);
    }

    #[test]
    fn empty_file_is_empty_library() {
        assert!(parse_library("").unwrap().is_empty());
        assert!(parse_library("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_variant_is_rejected() {
        let text = format!("{HOG_P1}\n{HOG_P1}");
        match parse_library(&text) {
            Err(ParseError::Duplicate { task, variant, line }) => {
                assert_eq!((task.as_str(), variant.as_str()), ("hog", "p1"));
                assert_eq!(line, 17);
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn nonpositive_latency_is_domain_error() {
        let text = HOG_P1.replace("latency_ms = 8.6", "latency_ms = 0");
        assert!(matches!(parse_library(&text), Err(ParseError::Domain { line: 9, .. })));
        let text = HOG_P1.replace("throughput_fps = 116", "throughput_fps = -2");
        assert!(matches!(parse_library(&text), Err(ParseError::Domain { line: 10, .. })));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let text = HOG_P1.replace("dsp = 114", "dsp 114");
        assert_eq!(parse_library(&text).unwrap_err().line(), Some(8));
        let text = HOG_P1.replace("dsp = 114", "dsp = many");
        assert!(matches!(parse_library(&text), Err(ParseError::InvalidValue { line: 8, .. })));
        let text = HOG_P1.replace("lut = 55635", "lut = 1.5");
        assert!(matches!(parse_library(&text), Err(ParseError::InvalidValue { line: 6, .. })));
        assert!(matches!(parse_library("lut = 3"), Err(ParseError::Syntax { line: 1, .. })));
        assert!(matches!(parse_library("[bogus]"), Err(ParseError::UnknownRecord { line: 1, .. })));
        assert!(matches!(parse_library("[platform]"), Err(ParseError::UnexpectedRecord { .. })));
        let text = HOG_P1.replace("dsp = 114", "dsp = 114\ncolor = red");
        assert!(matches!(parse_library(&text), Err(ParseError::UnknownKey { line: 9, .. })));
    }

    #[test]
    fn missing_variant_field_is_named() {
        let text = HOG_P1.replace("bram36 = 109\n", "");
        match parse_library(&text) {
            Err(ParseError::MissingField { field, .. }) => assert_eq!(field, "bram36"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn platform_pr_time_and_half_bram() {
        let p = parse_platform(PLATFORM).unwrap();
        assert_eq!(p.budget.bram36, Rational::new(413, 2));
        assert_eq!(p.bitstream_bytes_full, 5_500_000);
        assert_eq!(p.pr_bandwidth_mbps, q("453"));
    }

    #[test]
    fn platform_missing_field_is_named() {
        let text = PLATFORM.replace("mem_bandwidth_mbps = 4264\n", "");
        let err = parse_platform(&text).unwrap_err();
        assert!(matches!(err, ParseError::MissingField { field: "mem_bandwidth_mbps", .. }));
        assert!(err.to_string().contains("mem_bandwidth_mbps"));
    }

    #[test]
    fn platform_rejects_zero_bitstream() {
        let text = PLATFORM.replace("5500000", "0");
        assert!(matches!(parse_platform(&text), Err(ParseError::Domain { .. })));
        assert!(matches!(parse_platform(""), Err(ParseError::Missing(_))));
    }

    #[test]
    fn platform_regions_group_by_layout() {
        let text = format!(
            "{PLATFORM}\n[region]\nlayout = 2\nlut = 100\nbram36 = 50\ndsp = 10\n\n[region]\nlayout = 2\nlut = 200\nbram36 = 50\ndsp = 20\n"
        );
        let p = parse_platform(&text).unwrap();
        assert_eq!(p.regions(2)[1], ResourceVector::new(200, q("50"), 20));
        let short = format!("{PLATFORM}\n[region]\nlayout = 2\nlut = 1\nbram36 = 1\ndsp = 1\n");
        assert!(matches!(parse_platform(&short), Err(ParseError::Domain { .. })));
    }

    #[test]
    fn application_parsing() {
        let text =
            "[application]\nname = demo\n[task]\nname = a\ninput_bytes = 1024\n[task]\nname = b\ninput_bytes = 2048\n";
        let app = parse_application(text).unwrap();
        assert_eq!(app.tasks.len(), 2);
        assert_eq!(app.tasks[1].input_bytes, 2048);
        assert!(parse_application("").is_err());
        assert!(parse_application("[task]\nname = a\ninput_bytes = 1\n").is_err());
        assert!(parse_application("[application]\nname = x\n").is_err());
        let dup = "[application]\nname = demo\n[task]\nname = a\ninput_bytes = 1\n[task]\nname = a\ninput_bytes = 1\n";
        assert!(matches!(parse_application(dup), Err(ParseError::Domain { line: 6, .. })));
        assert_eq!(parse_application(&write_application(&app)).unwrap(), app);
    }

    #[test]
    fn platform_round_trip() {
        let p = parse_platform(PLATFORM).unwrap().with_floorplan(vec![ResourceVector::new(1, q("2.5"), 3)]).unwrap();
        assert_eq!(parse_platform(&write_platform(&p)).unwrap(), p);
    }

    fn arb_variant() -> impl Strategy<Value = ModuleVariant> {
        (
            "[a-c]",
            "v[0-9]",
            0u64..100_000,
            (0i128..1000, 1i128..4),
            0u64..500,
            (1i128..100_000, 1i128..1000),
            (1i128..100_000, 1i128..1000),
            0i128..10_000,
            0u64..1_000_000,
            prop_oneof![Just(VariantStyle::Any), Just(VariantStyle::Asic), Just(VariantStyle::Pr)],
        )
            .prop_map(|(task, id, lut, (bn, bd), dsp, (ln, ld), (tn, td), bw, out, style)| ModuleVariant {
                task,
                variant_id: id,
                resources: ResourceVector::new(lut, Rational::new(bn, bd), dsp),
                latency_ms: Rational::new(ln, ld),
                throughput_fps: Rational::new(tn, td),
                bandwidth_mbps: Rational::new(bw, 10),
                output_bytes: out,
                style,
            })
    }

    proptest! {
        #[test]
        fn library_round_trips(vs in proptest::collection::vec(arb_variant(), 0..8)) {
            let mut lib = ModuleLibrary::new();
            for v in vs {
                let _ = lib.insert(v);
            }
            let back = parse_library(&write_library(&lib)).unwrap();
            prop_assert_eq!(back, lib);
        }
    }
}
