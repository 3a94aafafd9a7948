//! Prediction timelines and designed-vs-predicted heatmaps as standalone SVG
//! plus CSV. Output bytes depend only on the inputs.

use std::fmt::Write as _;

use bci_core::{ConfusionMatrix, PredictionTrace, TaskId, TaskSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no traces to plot")]
    EmptyTraces,
    #[error("task vocabulary is empty")]
    NoTasks,
    #[error("label {0} has no task name")]
    UnknownLabel(TaskId),
    #[error("confusion matrix covers {matrix} tasks but {names} names were given")]
    TaskCountMismatch { matrix: usize, names: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub svg: String,
    pub csv: String,
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_csv(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
}

const SOURCE_COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

/// One panel per session, stacked in ascending session order. Each trace is
/// a step line of its smoothed labels over window start time, with tasks as
/// categorical rows (first task on top).
pub fn render_timeline(traces: &[PredictionTrace], tasks: &TaskSet, subject: &str) -> Result<Rendered, ReportError> {
    if traces.iter().all(|t| t.is_empty()) {
        return Err(ReportError::EmptyTraces);
    }
    if tasks.is_empty() {
        return Err(ReportError::NoTasks);
    }
    let name = |l: TaskId| tasks.name(l).ok_or(ReportError::UnknownLabel(l));
    for t in traces {
        for &l in t.raw.iter().chain(&t.smoothed) {
            name(l)?;
        }
    }

    let mut sessions: Vec<u32> = traces.iter().map(|t| t.session).collect();
    sessions.sort_unstable();
    sessions.dedup();
    let mut sources: Vec<&str> = Vec::new();
    for t in traces {
        if !sources.contains(&t.source.as_str()) {
            sources.push(&t.source);
        }
    }
    let color = |source: &str| {
        let i = sources.iter().position(|s| *s == source).unwrap_or(0);
        SOURCE_COLORS[i % SOURCE_COLORS.len()]
    };

    // shared time axis: last window start plus one typical window step
    let step = traces
        .iter()
        .filter(|t| t.len() >= 2)
        .map(|t| t.window_start[1] - t.window_start[0])
        .fold(0.0_f64, f64::max);
    let t_max = traces
        .iter()
        .flat_map(|t| t.window_start.last())
        .fold(0.0_f64, |a, &b| a.max(b))
        + step;
    let t_max = if t_max > 0.0 { t_max } else { 1.0 };

    let (left, right, top) = (120.0, 30.0, 60.0);
    let plot_w = 720.0;
    let row_h = 22.0;
    let panel_h = row_h * tasks.len() as f64;
    let gap = 48.0;
    let width = left + plot_w + right;
    let height = top + sessions.len() as f64 * (panel_h + gap) + 10.0;
    let x_of = |t: f64| left + plot_w * (t / t_max);

    let mut svg = String::new();
    svg_open(&mut svg, width, height);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">Subject {}: predicted task per window</text>"#,
        width / 2.0,
        escape_xml(subject)
    );
    for (i, s) in sources.iter().enumerate() {
        let x = left + 170.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="40" x2="{:.1}" y2="40" stroke="{}" stroke-width="2"/><text x="{:.1}" y="44">{}</text>"#,
            x + 24.0,
            color(s),
            x + 30.0,
            escape_xml(s)
        );
    }

    for (k, &session) in sessions.iter().enumerate() {
        let y0 = top + k as f64 * (panel_h + gap) + 16.0;
        let row_y = |l: TaskId| y0 + row_h * (f64::from(l) + 0.5);
        let _ = writeln!(svg, r#"<g class="panel" data-session="{session}">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{left:.1}" y="{:.1}" font-weight="bold">Session {session}</text>"#,
            y0 - 4.0
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{left:.1}" y="{y0:.1}" width="{plot_w:.1}" height="{panel_h:.1}" fill="none" stroke="#444444"/>"##
        );
        for (l, task) in tasks.names().iter().enumerate() {
            let y = row_y(l as TaskId);
            let _ = writeln!(
                svg,
                r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                left + plot_w,
                left - 6.0,
                y + 4.0,
                escape_xml(task)
            );
        }
        for tick in 0..=4 {
            let t = t_max * f64::from(tick) / 4.0;
            let x = x_of(t);
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{t:.0} s</text>"#,
                y0 + panel_h + 13.0
            );
        }
        for t in traces.iter().filter(|t| t.session == session && !t.is_empty()) {
            // nudge each source apart so coinciding lines stay visible
            let k = sources.iter().position(|s| *s == t.source).unwrap_or(0) as f64;
            let nudge = 3.0 * (k - (sources.len() as f64 - 1.0) / 2.0);
            let y = |l: TaskId| row_y(l) + nudge;
            let mut d = format!("M{:.2},{:.2}", x_of(t.window_start[0]), y(t.smoothed[0]));
            for i in 1..t.len() {
                let _ = write!(d, " H{:.2} V{:.2}", x_of(t.window_start[i]), y(t.smoothed[i]));
            }
            let last = t.window_start[t.len() - 1];
            let _ = write!(d, " H{:.2}", x_of((last + step).min(t_max)));
            let _ = writeln!(
                svg,
                r#"<path class="trace" data-source="{}" d="{d}" fill="none" stroke="{}" stroke-width="2" stroke-opacity="0.8"/>"#,
                escape_xml(&t.source),
                color(&t.source)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");

    let mut csv = String::from("session,source,window_start,raw_task,predicted_task\n");
    let mut ordered: Vec<&PredictionTrace> = traces.iter().collect();
    ordered.sort_by_key(|t| t.session);
    for t in ordered {
        for i in 0..t.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                t.session,
                escape_csv(&t.source),
                t.window_start[i],
                escape_csv(name(t.raw[i])?),
                escape_csv(name(t.smoothed[i])?)
            );
        }
    }
    Ok(Rendered { svg, csv })
}

const LOW: [u8; 3] = [0xff, 0xff, 0xff];
const HIGH: [u8; 3] = [0x08, 0x51, 0x9c];

/// Fill for `count` on a linear white-to-blue scale topping out at `max`.
pub fn heat_color(count: u64, max: u64) -> String {
    let f = if max == 0 { 0.0 } else { count as f64 / max as f64 };
    let ch = |i: usize| {
        let v = f64::from(LOW[i]) + (f64::from(HIGH[i]) - f64::from(LOW[i])) * f;
        v.round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// T×T grid with designed tasks along x and predicted tasks along y. Each
/// cell shows its count and its share of the designed task's windows.
pub fn render_heatmap(matrix: &ConfusionMatrix, tasks: &TaskSet, subject: &str) -> Result<Rendered, ReportError> {
    let n = matrix.tasks();
    if n == 0 || tasks.is_empty() {
        return Err(ReportError::NoTasks);
    }
    if n != tasks.len() {
        return Err(ReportError::TaskCountMismatch {
            matrix: n,
            names: tasks.len(),
        });
    }
    let cell = 84.0;
    let (left, top) = (130.0, 60.0);
    let width = left + cell * n as f64 + 30.0;
    let height = top + cell * n as f64 + 70.0;
    let max = matrix.max();

    let mut svg = String::new();
    svg_open(&mut svg, width, height);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="28" font-size="15" text-anchor="middle">Subject {}: designed vs predicted task</text>"#,
        width / 2.0,
        escape_xml(subject)
    );
    for p in 0..n {
        for d in 0..n {
            let count = matrix.get(d, p);
            let (x, y) = (left + cell * d as f64, top + cell * p as f64);
            let fill = heat_color(count, max);
            let ink = if max > 0 && 2 * count > max {
                "#ffffff"
            } else {
                "#000000"
            };
            let share = percent(count, matrix.designed_total(d));
            let _ = writeln!(
                svg,
                r##"<rect class="cell" data-designed="{d}" data-predicted="{p}" x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{fill}" stroke="#888888"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text class="count" data-designed="{d}" data-predicted="{p}" x="{:.1}" y="{:.1}" text-anchor="middle" fill="{ink}" font-size="14">{count}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 - 2.0
            );
            let _ = writeln!(
                svg,
                r#"<text class="share" data-designed="{d}" data-predicted="{p}" x="{:.1}" y="{:.1}" text-anchor="middle" fill="{ink}" font-size="10">{share:.1}%</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 14.0
            );
        }
    }
    for (i, name) in tasks.names().iter().enumerate() {
        let name = escape_xml(name);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
            left + cell * (i as f64 + 0.5),
            top + cell * n as f64 + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{name}</text>"#,
            left - 8.0,
            top + cell * (i as f64 + 0.5) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">Designed task</text>"#,
        left + cell * n as f64 / 2.0,
        top + cell * n as f64 + 44.0
    );
    let (lx, ly) = (24.0, top + cell * n as f64 / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" font-weight="bold" transform="rotate(-90 {lx:.1} {ly:.1})">Predicted task</text>"#
    );
    svg.push_str("</svg>\n");

    let mut csv = String::from("designed,predicted,count,percent_of_designed\n");
    for d in 0..n {
        for p in 0..n {
            let count = matrix.get(d, p);
            let _ = writeln!(
                csv,
                "{},{},{count},{:.1}",
                escape_csv(&tasks.names()[d]),
                escape_csv(&tasks.names()[p]),
                percent(count, matrix.designed_total(d))
            );
        }
    }
    Ok(Rendered { svg, csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(session: u32, source: &str, labels: &[TaskId]) -> PredictionTrace {
        PredictionTrace {
            session,
            source: source.into(),
            window_start: (0..labels.len()).map(|i| i as f64).collect(),
            raw: labels.to_vec(),
            smoothed: labels.to_vec(),
        }
    }

    fn doc(svg: &str) -> roxmltree::Document<'_> {
        roxmltree::Document::parse(svg).expect("well-formed SVG")
    }

    #[test]
    fn constant_trace_is_one_horizontal_segment() {
        let r = render_timeline(&[trace(1, "a", &[2, 2, 2])], &TaskSet::numbered(3), "1").unwrap();
        let d = doc(&r.svg);
        let path = d.descendants().find(|n| n.attribute("class") == Some("trace")).unwrap();
        let moves = path.attribute("d").unwrap();
        let ys: Vec<&str> = moves
            .split(' ')
            .filter_map(|c| c.strip_prefix('V').or_else(|| c.split(',').nth(1)))
            .collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]), "{moves}");
    }

    #[test]
    fn one_panel_per_session() {
        let traces: Vec<PredictionTrace> = (1..=6)
            .flat_map(|s| [trace(s, "a", &[0, 1]), trace(s, "b", &[1, 1])])
            .collect();
        let r = render_timeline(&traces, &TaskSet::numbered(2), "1").unwrap();
        let d = doc(&r.svg);
        assert_eq!(
            d.descendants()
                .filter(|n| n.attribute("class") == Some("panel"))
                .count(),
            6
        );
        assert_eq!(r.csv.lines().count(), 1 + 6 * 4);
    }

    #[test]
    fn timeline_errors() {
        assert_eq!(
            render_timeline(&[], &TaskSet::numbered(2), "1"),
            Err(ReportError::EmptyTraces)
        );
        assert_eq!(
            render_timeline(&[trace(1, "a", &[5])], &TaskSet::numbered(2), "1"),
            Err(ReportError::UnknownLabel(5))
        );
    }

    #[test]
    fn names_are_escaped() {
        let tasks = TaskSet::new(vec!["a<b".into(), "c&d".into()]).unwrap();
        let r = render_timeline(&[trace(1, "x\"y", &[0, 1])], &tasks, "<s>").unwrap();
        doc(&r.svg);
        let h = render_heatmap(&ConfusionMatrix::zeros(2), &tasks, "<s>").unwrap();
        doc(&h.svg);
    }

    fn cells(svg: &str) -> Vec<(usize, usize, String, String)> {
        let d = doc(svg);
        let counts: Vec<_> = d
            .descendants()
            .filter(|n| n.attribute("class") == Some("count"))
            .map(|n| {
                (
                    n.attribute("data-designed").unwrap().parse::<usize>().unwrap(),
                    n.attribute("data-predicted").unwrap().parse::<usize>().unwrap(),
                    n.text().unwrap().to_string(),
                )
            })
            .collect();
        counts
            .into_iter()
            .map(|(dd, p, text)| {
                let fill = d
                    .descendants()
                    .find(|n| {
                        n.attribute("class") == Some("cell")
                            && n.attribute("data-designed") == Some(&dd.to_string())
                            && n.attribute("data-predicted") == Some(&p.to_string())
                    })
                    .unwrap()
                    .attribute("fill")
                    .unwrap()
                    .to_string();
                (dd, p, text, fill)
            })
            .collect()
    }

    #[test]
    fn annotations_match_matrix_entries() {
        let counts = vec![5, 1, 0, 2, 7, 3, 0, 0, 9];
        let m = ConfusionMatrix::from_counts(3, counts).unwrap();
        let r = render_heatmap(&m, &TaskSet::numbered(3), "1").unwrap();
        let found = cells(&r.svg);
        assert_eq!(found.len(), 9);
        for (d, p, text, _) in &found {
            assert_eq!(text.parse::<u64>().unwrap(), m.get(*d, *p));
        }
        for line in r.csv.lines().skip(1) {
            let c: Vec<&str> = line.split(',').collect();
            let d = c[0].trim_start_matches("task").parse::<usize>().unwrap() - 1;
            let p = c[1].trim_start_matches("task").parse::<usize>().unwrap() - 1;
            assert_eq!(c[2].parse::<u64>().unwrap(), m.get(d, p));
        }
    }

    #[test]
    fn identity_lights_only_the_diagonal() {
        let mut counts = vec![0; 16];
        for i in 0..4 {
            counts[i * 4 + i] = 10;
        }
        let m = ConfusionMatrix::from_counts(4, counts).unwrap();
        let r = render_heatmap(&m, &TaskSet::numbered(4), "1").unwrap();
        for (d, p, _, fill) in cells(&r.svg) {
            if d == p {
                assert_eq!(fill, heat_color(1, 1));
            } else {
                assert_eq!(fill, "#ffffff");
            }
        }
    }

    #[test]
    fn zero_matrix_is_uniform() {
        let r = render_heatmap(&ConfusionMatrix::zeros(3), &TaskSet::numbered(3), "1").unwrap();
        assert!(cells(&r.svg).iter().all(|c| c.3 == "#ffffff"));
        assert!(r.csv.lines().skip(1).all(|l| l.ends_with(",0,0.0")));
    }

    #[test]
    fn color_scale_is_linear_between_endpoints() {
        assert_eq!(heat_color(0, 10), "#ffffff");
        assert_eq!(heat_color(10, 10), "#08519c");
        assert_eq!(heat_color(5, 10), "#84a8ce");
    }
}
