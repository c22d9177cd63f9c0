//! Small hand-written SVG charts. Output depends only on the input values.

use std::fmt::Write;

use valconf_core::inference::grid::{bf_histogram, BF_BIN_EDGES};

use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn axes(s: &mut String) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
}

fn fraction_label(x: f64) -> String {
    if x < 1.0 {
        format!("1/{}", (1.0 / x).round())
    } else {
        format!("{}", x.round())
    }
}

/// Histogram of BF10 values on a log axis, with the 1/3 and 3 evidence
/// boundaries drawn as dashed lines.
pub fn bf_hist(values: &[f64], title: &str) -> Result<String, CliError> {
    if values.is_empty() {
        return Err(CliError::Invalid("no Bayes factors to plot".into()));
    }
    let counts = bf_histogram(values.iter().copied());
    // log10 positions; the open outer bins get one extra half-decade
    let lo = BF_BIN_EDGES[0].log10() - 0.5;
    let hi = BF_BIN_EDGES[BF_BIN_EDGES.len() - 1].log10() + 0.5;
    let xs = |v: f64| MARGIN + (v - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN);
    let max = *counts.iter().max().unwrap_or(&1) as f64;
    let ys = |c: f64| HEIGHT - MARGIN - c / max.max(1.0) * (HEIGHT - 2.0 * MARGIN - 20.0);

    let mut s = header(title);
    axes(&mut s);
    let mut bounds = vec![lo];
    bounds.extend(BF_BIN_EDGES.iter().map(|e| e.log10()));
    bounds.push(hi);
    for (i, &c) in counts.iter().enumerate() {
        let (a, b) = (xs(bounds[i]), xs(bounds[i + 1]));
        let y = ys(c as f64);
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0" stroke="white"/>"##,
            a,
            y,
            b - a,
            HEIGHT - MARGIN - y
        );
        if c > 0 {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{c}</text>"#, (a + b) / 2.0, y - 4.0);
        }
    }
    for e in BF_BIN_EDGES {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            xs(e.log10()),
            HEIGHT - MARGIN + 16.0,
            fraction_label(e)
        );
    }
    for (e, name) in [(1.0 / 3.0, "1/3"), (3.0, "3")] {
        let x = xs(f64::log10(e));
        let _ = writeln!(
            s,
            r##"<line class="boundary" data-value="{name}" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#c44e52" stroke-width="2" stroke-dasharray="6,4"/>"##,
            HEIGHT - MARGIN,
            MARGIN
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">BF10</text>"#, WIDTH / 2.0, HEIGHT - 10.0);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Scatter of labeled 2-D points.
pub fn mds_scatter(points: &[(String, f64, f64)], title: &str) -> Result<String, CliError> {
    if points.is_empty() {
        return Err(CliError::Invalid("no MDS coordinates to plot".into()));
    }
    let ext = |f: fn(&(String, f64, f64)) -> f64| {
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            a = a.min(f(p));
            b = b.max(f(p));
        }
        if b - a < 1e-12 {
            (a - 1.0, b + 1.0)
        } else {
            let pad = 0.1 * (b - a);
            (a - pad, b + pad)
        }
    };
    let (x0, x1) = ext(|p| p.1);
    let (y0, y1) = ext(|p| p.2);
    let xs = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let ys = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = header(title);
    axes(&mut s);
    for (label, x, y) in points {
        let (px, py) = (xs(*x), ys(*y));
        let _ = writeln!(s, r##"<circle class="point" cx="{px:.2}" cy="{py:.2}" r="4" fill="#55a868"/>"##);
        let _ = writeln!(s, r#"<text class="label" x="{:.2}" y="{:.2}">{}</text>"#, px + 6.0, py - 6.0, escape(label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Bars of F1 per model with the change symbol above each bar.
pub fn f1_bars(rows: &[(String, f64, Option<String>)], title: &str) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Invalid("no results to plot".into()));
    }
    let slot = (WIDTH - 2.0 * MARGIN) / rows.len() as f64;
    let ys = |f: f64| HEIGHT - MARGIN - f.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN - 20.0);
    let mut s = header(title);
    axes(&mut s);
    for (i, (model, f1, symbol)) in rows.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + slot * 0.15;
        let w = slot * 0.7;
        let y = ys(*f1);
        let cx = x + w / 2.0;
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="#8172b2"/>"##,
            HEIGHT - MARGIN - y
        );
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{f1:.2}</text>"#, y - 4.0);
        if let Some(sym) = symbol {
            let _ = writeln!(
                s,
                r#"<text class="delta" x="{cx:.2}" y="{:.2}" text-anchor="middle" font-weight="bold">{}</text>"#,
                y - 18.0,
                escape(sym)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 16.0,
            escape(model)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bf_hist_has_both_boundaries() {
        let values: Vec<f64> = (0..100).map(|i| 10f64.powf(-2.5 + i as f64 * 0.05)).collect();
        let svg = bf_hist(&values, "t").unwrap();
        assert_eq!(svg.matches(r#"class="boundary""#).count(), 2);
        assert!(svg.contains(r#"data-value="1/3""#));
        assert!(svg.contains(r#"data-value="3""#));
        assert_eq!(svg.matches(r#"class="bar""#).count(), BF_BIN_EDGES.len() + 1);
    }

    #[test]
    fn scatter_labels_every_point() {
        let pts: Vec<(String, f64, f64)> = (0..10).map(|i| (format!("v{i}"), i as f64, (i * i) as f64)).collect();
        let svg = mds_scatter(&pts, "t").unwrap();
        assert_eq!(svg.matches(r#"class="point""#).count(), 10);
        assert_eq!(svg.matches(r#"class="label""#).count(), 10);
    }

    #[test]
    fn bars_carry_symbols() {
        let rows = vec![("text".to_string(), 0.5, None), ("text+v".to_string(), 0.52, Some("+".to_string()))];
        let svg = f1_bars(&rows, "t").unwrap();
        assert!(svg.contains(r#"font-weight="bold">+</text>"#));
        assert_eq!(svg.matches(r#"class="delta""#).count(), 1);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(bf_hist(&[], "t").is_err());
        assert!(mds_scatter(&[], "t").is_err());
        assert!(f1_bars(&[], "t").is_err());
    }
}
