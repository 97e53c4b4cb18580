//! Attribution report serialization and chart rendering.
//!
//! CSV columns are (level, target, path, optimizer, mode, mean, std,
//! reference_min, run_count); floats round-trip through the shortest
//! decimal representation. Charts are hand-emitted SVG so identical inputs
//! produce identical bytes on every platform: coordinates are printed with
//! two decimals, numeric labels with four, and nothing depends on fonts,
//! locales, or a plotting library.

use std::fmt::Write as _;

use crate::attribution::{AggregatedEC, ECMode};
use crate::store::OptimizerKind;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report input is empty")]
    Empty,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One aggregated attribution result, as serialized to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub level: String,
    pub target: String,
    /// Path id for algorithm and hyperparameter levels, `-` for steps.
    pub path: String,
    pub optimizer: OptimizerKind,
    pub mode: ECMode,
    pub mean: f64,
    pub std: f64,
    pub reference_min: f64,
    pub run_count: usize,
}

impl ReportRow {
    pub fn from_aggregate(agg: &AggregatedEC) -> ReportRow {
        ReportRow {
            level: agg.target.level().to_owned(),
            target: agg.target.label(),
            path: agg.target.path_id().unwrap_or("-").to_owned(),
            optimizer: agg.optimizer,
            mode: agg.mode,
            mean: agg.mean,
            std: agg.std,
            reference_min: agg.reference_min,
            run_count: agg.run_count,
        }
    }
}

const CSV_HEADER: &str = "level,target,path,optimizer,mode,mean,std,reference_min,run_count";

/// Rows are written in the order given; callers order by optimizer then
/// target declaration order.
pub fn write_ec_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            csv_field(&r.level),
            csv_field(&r.target),
            csv_field(&r.path),
            r.optimizer.to_string(),
            r.mode.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.reference_min.to_string(),
            r.run_count.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_ec_csv(text: &str) -> Result<Vec<ReportRow>, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, other)) => {
            return Err(ReportError::Parse {
                line: 1,
                msg: format!("expected header '{CSV_HEADER}', got '{other}'"),
            })
        }
        None => return Err(ReportError::Empty),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        let fields = split_csv_line(line).map_err(|msg| ReportError::Parse { line: n, msg })?;
        if fields.len() != 9 {
            return Err(ReportError::Parse {
                line: n,
                msg: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let field = |idx: usize, what: &str, err: String| ReportError::Parse {
            line: n,
            msg: format!("bad {what} '{}': {err}", fields[idx]),
        };
        rows.push(ReportRow {
            level: fields[0].clone(),
            target: fields[1].clone(),
            path: fields[2].clone(),
            optimizer: fields[3]
                .parse()
                .map_err(|e: String| field(3, "optimizer", e))?,
            mode: fields[4].parse().map_err(|e: String| field(4, "mode", e))?,
            mean: fields[5]
                .parse()
                .map_err(|e: std::num::ParseFloatError| field(5, "mean", e.to_string()))?,
            std: fields[6]
                .parse()
                .map_err(|e: std::num::ParseFloatError| field(6, "std", e.to_string()))?,
            reference_min: fields[7]
                .parse()
                .map_err(|e: std::num::ParseFloatError| field(7, "reference_min", e.to_string()))?,
            run_count: fields[8]
                .parse()
                .map_err(|e: std::num::ParseIntError| field(8, "run_count", e.to_string()))?,
        });
    }
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn split_csv_line(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match c {
            '"' if cur.is_empty() && !quoted => quoted = true,
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    quoted = false;
                }
            }
            ',' if !quoted => {
                fields.push(std::mem::take(&mut cur));
            }
            c => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated quote".to_owned());
    }
    fields.push(cur);
    Ok(fields)
}

pub fn optimizer_color(kind: OptimizerKind) -> &'static str {
    match kind {
        OptimizerKind::Grid => "#d62728",
        OptimizerKind::Random => "#1f77b4",
        OptimizerKind::Smbo => "#e6b400",
    }
}

/// Optimizer display order in charts and CSVs.
pub const OPTIMIZER_ORDER: [OptimizerKind; 3] = [
    OptimizerKind::Grid,
    OptimizerKind::Random,
    OptimizerKind::Smbo,
];

/// Grouped bar chart for one attribution level: one group per target in
/// first-seen row order, one bar per optimizer, whisker = ±1 std.
pub fn ec_chart_svg(title: &str, level: &str, rows: &[ReportRow]) -> Result<String, ReportError> {
    let rows: Vec<&ReportRow> = rows.iter().filter(|r| r.level == level).collect();
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut targets: Vec<&str> = Vec::new();
    for r in &rows {
        if !targets.contains(&r.target.as_str()) {
            targets.push(&r.target);
        }
    }
    let series: Vec<OptimizerKind> = OPTIMIZER_ORDER
        .into_iter()
        .filter(|o| rows.iter().any(|r| r.optimizer == *o))
        .collect();

    let groups: Vec<BarGroup> = targets
        .iter()
        .map(|t| BarGroup {
            label: (*t).to_owned(),
            bars: series
                .iter()
                .map(|o| {
                    rows.iter()
                        .find(|r| r.target == *t && r.optimizer == *o)
                        .map(|r| Bar {
                            value: r.mean,
                            whisker: r.std,
                        })
                })
                .collect(),
        })
        .collect();
    let legend: Vec<(String, &'static str)> = series
        .iter()
        .map(|o| (o.to_string(), optimizer_color(*o)))
        .collect();
    Ok(render_bar_chart(title, "error contribution", &groups, &legend))
}

/// One labeled wall-clock measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    /// `optimizer/mode`, e.g. `grid/cash`.
    pub label: String,
    pub seconds: f64,
}

/// Single-series bar chart of wall-clock seconds per run group.
pub fn timing_chart_svg(title: &str, rows: &[TimingRow]) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let groups: Vec<BarGroup> = rows
        .iter()
        .map(|r| BarGroup {
            label: r.label.clone(),
            bars: vec![Some(Bar {
                value: r.seconds,
                whisker: 0.0,
            })],
        })
        .collect();
    let legend = vec![("seconds".to_owned(), "#6b7280")];
    Ok(render_bar_chart(title, "seconds", &groups, &legend))
}

struct Bar {
    value: f64,
    whisker: f64,
}

struct BarGroup {
    label: String,
    bars: Vec<Option<Bar>>,
}

const BAR_W: f64 = 34.0;
const BAR_GAP: f64 = 6.0;
const GROUP_PAD: f64 = 16.0;
const LEFT: f64 = 76.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 64.0;
const PLOT_H: f64 = 256.0;

fn render_bar_chart(
    title: &str,
    y_label: &str,
    groups: &[BarGroup],
    legend: &[(String, &'static str)],
) -> String {
    let n_series = legend.len();
    let group_w =
        n_series as f64 * BAR_W + (n_series.saturating_sub(1)) as f64 * BAR_GAP + 2.0 * GROUP_PAD;
    let plot_w = group_w * groups.len() as f64;
    let width = LEFT + plot_w + RIGHT;
    let height = TOP + PLOT_H + BOTTOM;

    let mut vmin = 0.0f64;
    let mut vmax = f64::NEG_INFINITY;
    for g in groups {
        for b in g.bars.iter().flatten() {
            vmin = vmin.min(b.value - b.whisker);
            vmax = vmax.max(b.value + b.whisker);
        }
    }
    if !vmax.is_finite() {
        vmax = 1.0;
    }
    if vmax - vmin < 1e-12 {
        vmax = vmin + 1.0;
    }
    let y = |v: f64| TOP + PLOT_H * (vmax - v) / (vmax - vmin);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n",
        w = fmt2(width),
        h = fmt2(height),
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        fmt2(width),
        fmt2(height)
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-size=\"14\" font-weight=\"bold\" fill=\"#1f2328\">{}</text>\n",
        fmt2(LEFT),
        xml_escape(title)
    );

    // Y axis: frame line, five evenly spaced ticks, axis label.
    let _ = write!(
        svg,
        "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#1f2328\" stroke-width=\"1\"/>\n",
        x = fmt2(LEFT),
        y1 = fmt2(TOP),
        y2 = fmt2(TOP + PLOT_H),
    );
    for i in 0..=4u32 {
        let v = vmin + (vmax - vmin) * f64::from(i) / 4.0;
        let ty = y(v);
        let _ = write!(
            svg,
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#1f2328\" stroke-width=\"1\"/>\n",
            x1 = fmt2(LEFT - 5.0),
            x2 = fmt2(LEFT),
            y = fmt2(ty),
        );
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\" fill=\"#1f2328\">{v}</text>\n",
            x = fmt2(LEFT - 9.0),
            y = fmt2(ty + 4.0),
            v = fmt4(v),
        );
    }
    let _ = write!(
        svg,
        "<text x=\"16\" y=\"{y}\" font-size=\"11\" fill=\"#1f2328\" \
         transform=\"rotate(-90 16 {y})\" text-anchor=\"middle\">{label}</text>\n",
        y = fmt2(TOP + PLOT_H / 2.0),
        label = xml_escape(y_label),
    );
    // Baseline at zero.
    let _ = write!(
        svg,
        "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#1f2328\" stroke-width=\"1\"/>\n",
        x1 = fmt2(LEFT),
        x2 = fmt2(LEFT + plot_w),
        y = fmt2(y(0.0)),
    );

    for (gi, group) in groups.iter().enumerate() {
        let gx = LEFT + group_w * gi as f64;
        for (si, bar) in group.bars.iter().enumerate() {
            let Some(bar) = bar else { continue };
            let bx = gx + GROUP_PAD + si as f64 * (BAR_W + BAR_GAP);
            let (y_top, y_bot) = if bar.value >= 0.0 {
                (y(bar.value), y(0.0))
            } else {
                (y(0.0), y(bar.value))
            };
            let color = legend[si].1;
            let _ = write!(
                svg,
                "<rect class=\"bar\" x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"{color}\"/>\n",
                x = fmt2(bx),
                y = fmt2(y_top),
                w = fmt2(BAR_W),
                h = fmt2(y_bot - y_top),
            );
            let cx = bx + BAR_W / 2.0;
            if bar.whisker > 0.0 {
                let wy1 = y(bar.value + bar.whisker);
                let wy2 = y(bar.value - bar.whisker);
                let _ = write!(
                    svg,
                    "<line class=\"whisker\" x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" \
                     stroke=\"#1f2328\" stroke-width=\"1.5\"/>\n",
                    x = fmt2(cx),
                    y1 = fmt2(wy1),
                    y2 = fmt2(wy2),
                );
                for wy in [wy1, wy2] {
                    let _ = write!(
                        svg,
                        "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" \
                         stroke=\"#1f2328\" stroke-width=\"1.5\"/>\n",
                        x1 = fmt2(cx - 5.0),
                        x2 = fmt2(cx + 5.0),
                        y = fmt2(wy),
                    );
                }
            }
            let label_y = y(bar.value.max(bar.value + bar.whisker)) - 6.0;
            let _ = write!(
                svg,
                "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"middle\" fill=\"#1f2328\">{v}</text>\n",
                x = fmt2(cx),
                y = fmt2(label_y),
                v = fmt4(bar.value),
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#1f2328\">{label}</text>\n",
            x = fmt2(gx + group_w / 2.0),
            y = fmt2(TOP + PLOT_H + 20.0),
            label = xml_escape(&group.label),
        );
    }

    if legend.len() > 1 {
        for (i, (name, color)) in legend.iter().enumerate() {
            let lx = width - RIGHT - (legend.len() - i) as f64 * 96.0;
            let _ = write!(
                svg,
                "<rect x=\"{x}\" y=\"14\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
                x = fmt2(lx),
            );
            let _ = write!(
                svg,
                "<text x=\"{x}\" y=\"24\" font-size=\"11\" fill=\"#1f2328\">{name}</text>\n",
                x = fmt2(lx + 16.0),
                name = xml_escape(name),
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_owned()
    } else {
        s
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        level: &str,
        target: &str,
        path: &str,
        optimizer: OptimizerKind,
        mean: f64,
        std: f64,
    ) -> ReportRow {
        ReportRow {
            level: level.to_owned(),
            target: target.to_owned(),
            path: path.to_owned(),
            optimizer,
            mode: ECMode::Filter,
            mean,
            std,
            reference_min: 0.2,
            run_count: if optimizer == OptimizerKind::Grid { 1 } else { 5 },
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let rows = vec![
            row("step", "S1", "-", OptimizerKind::Grid, 0.025, 0.0),
            row("step", "S2", "-", OptimizerKind::Random, 1.0 / 3.0, 0.1),
            row(
                "hyperparameter",
                "S1=A.a",
                "A->C",
                OptimizerKind::Smbo,
                0.1,
                1e-17,
            ),
        ];
        let text = write_ec_csv(&rows);
        assert_eq!(parse_ec_csv(&text).unwrap(), rows);
    }

    #[test]
    fn csv_layout_is_stable() {
        let text = write_ec_csv(&[row("step", "S1", "-", OptimizerKind::Grid, 0.025, 0.0)]);
        assert_eq!(
            text,
            "level,target,path,optimizer,mode,mean,std,reference_min,run_count\n\
             step,S1,-,grid,filter,0.025,0,0.2,1\n"
        );
    }

    #[test]
    fn csv_quotes_awkward_fields() {
        let rows = vec![row("step", "S,1\"x", "-", OptimizerKind::Grid, 0.0, 0.0)];
        let text = write_ec_csv(&rows);
        assert!(text.contains("\"S,1\"\"x\""));
        assert_eq!(parse_ec_csv(&text).unwrap(), rows);
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let err = parse_ec_csv("nonsense\n").unwrap_err();
        assert!(matches!(err, ReportError::Parse { line: 1, .. }));
        let text = format!("{CSV_HEADER}\nstep,S1,-,grid,filter,oops,0,0.2,1\n");
        let err = parse_ec_csv(&text).unwrap_err();
        assert!(matches!(err, ReportError::Parse { line: 2, .. }), "{err}");
        assert!(parse_ec_csv(&format!("{CSV_HEADER}\n")).is_err());
    }

    #[test]
    fn chart_emits_one_bar_per_target_optimizer_pair() {
        let rows = vec![
            row("step", "S1", "-", OptimizerKind::Grid, 0.025, 0.0),
            row("step", "S1", "-", OptimizerKind::Random, 0.03, 0.01),
            row("step", "S2", "-", OptimizerKind::Grid, 0.0, 0.0),
            row("step", "S2", "-", OptimizerKind::Random, 0.001, 0.002),
            row("algorithm", "S1=A", "A->C", OptimizerKind::Grid, 0.1, 0.0),
        ];
        let svg = ec_chart_svg("steps", "step", &rows).unwrap();
        assert_eq!(svg.matches("class=\"bar\"").count(), 4);
        // Only the two random bars carry whiskers.
        assert_eq!(svg.matches("class=\"whisker\"").count(), 2);
        assert!(svg.contains(">0.0250<"));
        assert!(svg.contains(">S1<") && svg.contains(">S2<"));
        assert!(!svg.contains("S1=A"));
    }

    #[test]
    fn chart_is_byte_deterministic() {
        let rows = vec![
            row("step", "S1", "-", OptimizerKind::Grid, 0.025, 0.0),
            row("step", "S1", "-", OptimizerKind::Smbo, 0.028, 0.004),
        ];
        let a = ec_chart_svg("t", "step", &rows).unwrap();
        let b = ec_chart_svg("t", "step", &rows).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_only_chart_has_no_whiskers_or_legendless_surprises() {
        let rows = vec![
            row("step", "S1", "-", OptimizerKind::Grid, 0.025, 0.0),
            row("step", "S2", "-", OptimizerKind::Grid, 0.0, 0.0),
        ];
        let svg = ec_chart_svg("grid only", "step", &rows).unwrap();
        assert_eq!(svg.matches("class=\"whisker\"").count(), 0);
        assert_eq!(svg.matches("class=\"bar\"").count(), 2);
        assert!(svg.contains(optimizer_color(OptimizerKind::Grid)));
    }

    #[test]
    fn chart_rejects_levels_with_no_rows() {
        let rows = vec![row("step", "S1", "-", OptimizerKind::Grid, 0.025, 0.0)];
        assert!(matches!(
            ec_chart_svg("t", "algorithm", &rows),
            Err(ReportError::Empty)
        ));
    }

    #[test]
    fn chart_escapes_markup_in_labels() {
        let rows = vec![row("step", "a<b&c", "-", OptimizerKind::Grid, 0.1, 0.0)];
        let svg = ec_chart_svg("x<y", "step", &rows).unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(svg.contains("x&lt;y"));
        assert!(!svg.contains("a<b"));
    }

    #[test]
    fn timing_chart_has_one_bar_per_row() {
        let rows = vec![
            TimingRow {
                label: "grid/cash".to_owned(),
                seconds: 12.5,
            },
            TimingRow {
                label: "random/cash".to_owned(),
                seconds: 4.25,
            },
            TimingRow {
                label: "smbo/cash".to_owned(),
                seconds: 6.0,
            },
        ];
        let svg = timing_chart_svg("timing", &rows).unwrap();
        assert_eq!(svg.matches("class=\"bar\"").count(), 3);
        assert!(svg.contains(">12.5000<"));
        assert!(svg.contains("grid/cash"));
        assert!(timing_chart_svg("t", &[]).is_err());
    }

    #[test]
    fn negative_and_zero_scales_stay_finite() {
        // A flat all-zero chart must not divide by a zero range.
        let rows = vec![row("step", "S1", "-", OptimizerKind::Grid, 0.0, 0.0)];
        let svg = ec_chart_svg("flat", "step", &rows).unwrap();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        // Reopt rows are non-negative by construction, but the renderer
        // still handles negative means without corrupting geometry.
        let rows = vec![row("step", "S1", "-", OptimizerKind::Grid, -0.5, 0.1)];
        let svg = ec_chart_svg("neg", "step", &rows).unwrap();
        assert!(!svg.contains("NaN"));
        assert!(svg.contains(">-0.5000<"));
    }
}
