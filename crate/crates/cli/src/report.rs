//! Report emission: markdown summary tables and SVG bar charts.
//!
//! Charts are hand-emitted on a fixed 800x400 canvas with fixed-precision
//! coordinates, so identical inputs always produce identical bytes.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use anyhow::Context;

use hopqa_core::{aggregate, EvalRecord, Summary};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 5] = ["#4e79a7", "#f28e2c", "#59a14f", "#e15759", "#76b7b2"];

/// Markdown table of per-strategy means, in the order given.
pub fn render_markdown(summaries: &[Summary]) -> String {
    let mut out = String::from("| strategy | n | em | f1 | support_recall |\n");
    out.push_str("|---|---|---|---|---|\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {:.4} | {:.4} |",
            s.strategy, s.n, s.em_mean, s.f1_mean, s.support_recall_mean
        );
    }
    out
}

/// One bar per labeled value on a fixed canvas with a 0..1 axis.
pub fn render_bar_chart(title: &str, values: &[(String, f64)]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let baseline = MARGIN_TOP + plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    // Gridlines and axis labels at 0.2 steps.
    for step in 0..=5 {
        let value = step as f64 * 0.2;
        let y = baseline - value * plot_h;
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>",
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">{value:.1}</text>",
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_LEFT:.1}\" y1=\"{MARGIN_TOP:.1}\" x2=\"{MARGIN_LEFT:.1}\" y2=\"{baseline:.1}\" stroke=\"#333333\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_LEFT:.1}\" y1=\"{baseline:.1}\" x2=\"{:.1}\" y2=\"{baseline:.1}\" stroke=\"#333333\"/>",
        MARGIN_LEFT + plot_w
    );

    if !values.is_empty() {
        let slot = plot_w / values.len() as f64;
        let bar_w = slot * 0.6;
        for (i, (label, value)) in values.iter().enumerate() {
            let clamped = value.clamp(0.0, 1.0);
            let x = MARGIN_LEFT + slot * i as f64 + slot * 0.2;
            let h = clamped * plot_h;
            let y = baseline - h;
            let color = PALETTE[i % PALETTE.len()];
            let center = x + bar_w / 2.0;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{color}\"/>"
            );
            let _ = writeln!(
                svg,
                "<text x=\"{center:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{value:.3}</text>",
                y - 6.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{center:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
                baseline + 18.0,
                escape(label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `em.svg` and `f1.svg` for the given summaries.
pub fn write_charts(dir: &Path, summaries: &[Summary]) -> anyhow::Result<()> {
    let em: Vec<(String, f64)> = summaries
        .iter()
        .map(|s| (s.strategy.clone(), s.em_mean))
        .collect();
    let f1: Vec<(String, f64)> = summaries
        .iter()
        .map(|s| (s.strategy.clone(), s.f1_mean))
        .collect();
    std::fs::write(
        dir.join("em.svg"),
        render_bar_chart("exact match by strategy", &em),
    )?;
    std::fs::write(dir.join("f1.svg"), render_bar_chart("f1 by strategy", &f1))?;
    Ok(())
}

/// Reads every record from a JSON-lines file.
pub fn read_records(path: &Path) -> anyhow::Result<Vec<EvalRecord>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening records file {}", path.display()))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad record", path.display(), lineno + 1))?;
        records.push(record);
    }
    Ok(records)
}

/// Merges one or more records files: recomputes per-strategy means over the
/// union, writes `report.md`, `em.svg` and `f1.svg` into `output_dir`, and
/// returns the markdown table.
pub fn cmd_report(paths: &[std::path::PathBuf], output_dir: &Path) -> anyhow::Result<String> {
    if paths.is_empty() {
        anyhow::bail!("report: no records files given");
    }
    let mut all = Vec::new();
    for path in paths {
        all.extend(read_records(path)?);
    }
    if all.is_empty() {
        anyhow::bail!("report: records files contain no records");
    }
    let summaries = aggregate(&all)?;
    std::fs::create_dir_all(output_dir)?;
    let markdown = render_markdown(&summaries);
    std::fs::write(output_dir.join("report.md"), &markdown)?;
    write_charts(output_dir, &summaries)?;
    Ok(markdown)
}
