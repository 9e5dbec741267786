use std::fmt::Write;

use super::score::ScoreReport;
use crate::qa::TaskCategory;

/// `category,accuracy,n` rows followed by an `Average` row.
pub fn to_csv(report: &ScoreReport) -> String {
    let mut s = String::from("category,accuracy,n\n");
    for (c, v) in &report.per_category {
        let _ = writeln!(s, "{c},{:.1},{}", v.accuracy, v.n);
    }
    let n: usize = report.per_category.values().map(|v| v.n).sum();
    let _ = writeln!(s, "Average,{:.1},{n}", report.average);
    s
}

pub fn to_text(title: &str, report: &ScoreReport) -> String {
    let mut s = format!("{title}\n");
    let _ = writeln!(s, "{:<10} {:>8} {:>6}", "category", "acc(%)", "n");
    for (c, v) in &report.per_category {
        let _ = writeln!(s, "{:<10} {:>8.1} {:>6}", c.name(), v.accuracy, v.n);
    }
    let _ = writeln!(s, "{:<10} {:>8.1}", "Average", report.average);
    let _ = writeln!(s, "invalid predictions: {}", report.invalid_count);
    s
}

/// Side-by-side comparison of several reports, one column each.
pub fn comparison_table(reports: &[(&str, &ScoreReport)]) -> String {
    let mut s = format!("{:<10}", "");
    for (name, _) in reports {
        let _ = write!(s, " {name:>14}");
    }
    s.push('\n');
    for c in TaskCategory::ALL {
        if reports.iter().all(|(_, r)| r.accuracy(c).is_none()) {
            continue;
        }
        let _ = write!(s, "{:<10}", c.name());
        for (_, r) in reports {
            match r.accuracy(c) {
                Some(a) => {
                    let _ = write!(s, " {a:>14.1}");
                }
                None => {
                    let _ = write!(s, " {:>14}", "-");
                }
            }
        }
        s.push('\n');
    }
    let _ = write!(s, "{:<10}", "Average");
    for (_, r) in reports {
        let _ = write!(s, " {:>14.1}", r.average);
    }
    s.push('\n');
    s
}

/// Horizontal bar chart of per-category accuracy.
pub fn to_svg(title: &str, report: &ScoreReport) -> String {
    let rows: Vec<(String, f64)> = report
        .per_category
        .iter()
        .map(|(c, v)| (c.name().to_string(), v.accuracy))
        .chain(std::iter::once(("Average".to_string(), report.average)))
        .collect();
    let (left, bar_w, row_h) = (100.0, 400.0, 28.0);
    let height = 40.0 + row_h * rows.len() as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        left + bar_w + 60.0
    );
    let _ = writeln!(s, "  <text x=\"8\" y=\"20\" font-size=\"14\">{}</text>", escape(title));
    for (i, (name, acc)) in rows.iter().enumerate() {
        let y = 32.0 + row_h * i as f64;
        let w = bar_w * acc.clamp(0.0, 100.0) / 100.0;
        let _ = writeln!(s, "  <text x=\"8\" y=\"{}\">{}</text>", y + 15.0, escape(name));
        let _ = writeln!(
            s,
            "  <rect x=\"{left}\" y=\"{y}\" width=\"{w:.1}\" height=\"{}\" fill=\"#4a7ab5\"/>",
            row_h - 8.0
        );
        let _ = writeln!(s, "  <text x=\"{:.1}\" y=\"{}\">{acc:.1}</text>", left + w + 4.0, y + 15.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
