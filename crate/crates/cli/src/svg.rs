//! Static SVG drawings built from rect, line and text elements.

use std::fmt::Write;

use trustlens_core::analytics::BoxplotStats;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, comment: &str, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<!-- {} -->", escape(comment).replace("--", "- -"));
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#);
}

/// Blue ramp: 0 is white, 1 is a saturated blue.
fn ramp(value: f64) -> String {
    let v = value.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 33.0), lerp(255.0, 102.0), lerp(255.0, 172.0))
}

/// Grid of values in [0, 1]; `None` cells are drawn grey and labelled `NA`.
pub fn heatmap(
    comment: &str,
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<Option<f64>>],
) -> String {
    let cell_w = 44.0;
    let cell_h = 28.0;
    let left = 12.0 + 7.0 * row_labels.iter().map(|l| l.chars().count()).max().unwrap_or(4) as f64;
    let top = 56.0;
    let width = left + cell_w * col_labels.len() as f64 + 16.0;
    let height = top + cell_h * row_labels.len() as f64 + 16.0;
    let mut out = String::new();
    open(&mut out, comment, width, height);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" font-size="14">{}</text>"#, 8.0, escape(title));
    for (j, label) in col_labels.iter().enumerate() {
        let x = left + cell_w * (j as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, top - 8.0, escape(label));
    }
    for (i, label) in row_labels.iter().enumerate() {
        let y = top + cell_h * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell_h * 0.65,
            escape(label)
        );
        for (j, value) in values[i].iter().enumerate() {
            let x = left + cell_w * j as f64;
            let (fill, text, ink) = match value {
                Some(v) => (ramp(*v), format!("{v:.2}"), if *v > 0.6 { "white" } else { "black" }),
                None => ("#dddddd".to_string(), "NA".to_string(), "black"),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cell_w:.1}" height="{cell_h:.1}" fill="{fill}" stroke="white"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{ink}">{text}</text>"#,
                x + cell_w / 2.0,
                y + cell_h * 0.65
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal box-and-whisker plot on a fixed [0, 1] axis.
pub fn boxplots(comment: &str, title: &str, groups: &[(String, BoxplotStats)]) -> String {
    let left = 12.0 + 7.0 * groups.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(4) as f64;
    let plot_w = 480.0;
    let row_h = 34.0;
    let top = 40.0;
    let width = left + plot_w + 24.0;
    let height = top + row_h * groups.len() as f64 + 40.0;
    let sx = |v: f64| left + plot_w * v.clamp(0.0, 1.0);
    let mut out = String::new();
    open(&mut out, comment, width, height);
    let _ = writeln!(out, r#"<text x="8" y="20" font-size="14">{}</text>"#, escape(title));
    let axis_y = top + row_h * groups.len() as f64 + 4.0;
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" y1="{axis_y:.1}" x2="{:.1}" y2="{axis_y:.1}" stroke="black"/>"#,
        sx(0.0),
        sx(1.0)
    );
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let x = sx(v);
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{axis_y:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, axis_y + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#, axis_y + 18.0);
    }
    for (i, (label, s)) in groups.iter().enumerate() {
        let mid = top + row_h * (i as f64 + 0.5);
        let half = row_h * 0.3;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            mid + 4.0,
            escape(label)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{mid:.1}" x2="{:.1}" y2="{mid:.1}" stroke="black"/>"#,
            sx(s.min),
            sx(s.max)
        );
        for v in [s.min, s.max] {
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                mid - half / 2.0,
                mid + half / 2.0,
                x = sx(v)
            );
        }
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            sx(s.q1),
            mid - half,
            (sx(s.q3) - sx(s.q1)).max(1.0),
            2.0 * half
        );
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            mid - half,
            mid + half,
            x = sx(s.median)
        );
    }
    out.push_str("</svg>\n");
    out
}
