//! SVG rendering of simulated timelines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::rational::Rational;
use crate::sim::{Event, EventKind};

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#9c755f"];
const LEFT: f64 = 90.0;
const WIDTH: f64 = 800.0;
const TOP: f64 = 30.0;
const LANE: f64 = 28.0;
const GAP: f64 = 8.0;

struct Span {
    region: u32,
    task: usize,
    pr: bool,
    start: Rational,
    end: Rational,
}

fn spans(events: &[Event], tasks: &mut Vec<String>) -> Vec<Span> {
    let mut open: BTreeMap<(u32, bool), (Rational, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    for e in events {
        let task = match tasks.iter().position(|t| *t == e.task) {
            Some(i) => i,
            None => {
                tasks.push(e.task.clone());
                tasks.len() - 1
            }
        };
        let pr = e.kind.is_pr();
        match e.kind {
            EventKind::PrStart | EventKind::RunStart => {
                open.insert((e.region, pr), (e.time_ms, task));
            }
            EventKind::PrEnd | EventKind::RunEnd => {
                if let Some((start, task)) = open.remove(&(e.region, pr)) {
                    out.push(Span { region: e.region, task, pr, start, end: e.time_ms });
                }
            }
        }
    }
    out
}

fn placeholder() -> String {
    let mut s = String::new();
    s.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"60\" viewBox=\"0 0 400 60\">\n");
    s.push_str("<text x=\"200\" y=\"35\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">empty timeline</text>\n");
    s.push_str("</svg>\n");
    s
}

/// Gantt chart: one lane per region, solid spans for runs, hatched spans
/// for reconfiguration.
pub fn render_gantt(events: &[Event]) -> String {
    render(events, None)
}

/// Gantt chart whose lane heights are proportional to each region's share
/// of the fabric, so idle lanes show as unused area-time volume.
pub fn render_area_time(events: &[Event], lane_share: &[Rational]) -> String {
    render(events, Some(lane_share))
}

fn render(events: &[Event], lane_share: Option<&[Rational]>) -> String {
    let mut tasks = Vec::new();
    let spans = spans(events, &mut tasks);
    if spans.is_empty() {
        return placeholder();
    }
    let end = spans.iter().map(|s| s.end).max().unwrap_or(Rational::ZERO);
    let end_f = if end.is_positive() { end.to_f64() } else { 1.0 };
    let regions: Vec<u32> = {
        let mut r: Vec<u32> = spans.iter().map(|s| s.region).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let max_share = lane_share.and_then(|s| s.iter().copied().max()).filter(|m| m.is_positive());
    let height_of = |region: u32| -> f64 {
        match (lane_share, max_share) {
            (Some(shares), Some(max)) => {
                let share = shares.get(region as usize).copied().unwrap_or(Rational::ZERO);
                (LANE * 2.0 * (share / max).to_f64()).max(4.0)
            }
            _ => LANE,
        }
    };
    let mut lane_y = BTreeMap::new();
    let mut y = TOP;
    for &r in &regions {
        lane_y.insert(r, (y, height_of(r)));
        y += height_of(r) + GAP;
    }
    let legend_y = y + 28.0;
    let total_h = legend_y + 20.0;
    let total_w = LEFT + WIDTH + 20.0;
    let x = |t: Rational| LEFT + t.to_f64() / end_f * WIDTH;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w:.0}\" height=\"{total_h:.0}\" viewBox=\"0 0 {total_w:.0} {total_h:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    s.push_str("<defs>\n");
    for (i, _) in tasks.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            "<pattern id=\"pr{i}\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\" patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"white\"/><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"{c}\" stroke-width=\"3\"/></pattern>"
        );
    }
    s.push_str("</defs>\n");
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{total_w:.0}\" height=\"{total_h:.0}\" fill=\"white\"/>");
    for (&r, &(ly, h)) in &lane_y {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">region {r}</text>",
            LEFT - 8.0,
            ly + h / 2.0 + 4.0
        );
        let _ = writeln!(
            s,
            "<rect x=\"{LEFT:.2}\" y=\"{ly:.2}\" width=\"{WIDTH:.2}\" height=\"{h:.2}\" fill=\"#f4f4f4\"/>"
        );
    }
    for sp in &spans {
        let (ly, h) = lane_y[&sp.region];
        let fill = if sp.pr { format!("url(#pr{})", sp.task) } else { PALETTE[sp.task % PALETTE.len()].to_string() };
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{ly:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{fill}\" stroke=\"#333\" stroke-width=\"0.3\"><title>{} {} {}-{} ms</title></rect>",
            x(sp.start),
            (x(sp.end) - x(sp.start)).max(0.0),
            tasks[sp.task],
            if sp.pr { "pr" } else { "run" },
            sp.start.to_fixed(3),
            sp.end.to_fixed(3),
        );
    }
    let axis_y = y;
    let _ = writeln!(
        s,
        "<line x1=\"{LEFT:.2}\" y1=\"{axis_y:.2}\" x2=\"{:.2}\" y2=\"{axis_y:.2}\" stroke=\"#333\"/>",
        LEFT + WIDTH
    );
    for i in 0..=5 {
        let t = end * Rational::new(i, 5);
        let tx = x(t);
        let _ = writeln!(
            s,
            "<text x=\"{tx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{} ms</text>",
            axis_y + 14.0,
            t.to_fixed(1)
        );
    }
    let mut lx = LEFT;
    for (i, t) in tasks.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let _ =
            writeln!(s, "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{c}\"/>", legend_y - 9.0);
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{legend_y:.2}\">{t}</text>", lx + 14.0);
        lx += 24.0 + 7.0 * t.len() as f64;
    }
    let _ =
        writeln!(s, "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"url(#pr0)\"/>", legend_y - 9.0);
    let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{legend_y:.2}\">reconfiguration</text>", lx + 14.0);
    s.push_str("</svg>\n");
    s
}
