//! Minimal self-contained SVG charts. No external assets, no
//! randomness, no timestamps: the same data always renders the same
//! bytes. Charts are a convenience view of the CSV tables, which remain
//! the canonical output.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() || !max.is_finite() {
            return Range { min: 0.0, max: 1.0 };
        }
        if min == max {
            // Degenerate span; widen so the point sits mid-plot.
            return Range {
                min: min - 0.5,
                max: max + 0.5,
            };
        }
        Range { min, max }
    }

    fn to_x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.min) / (self.max - self.min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn to_y(&self, v: f64) -> f64 {
        HEIGHT
            - MARGIN_BOTTOM
            - (v - self.min) / (self.max - self.min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn tick_label(v: f64) -> String {
    let text = format!("{v:.3}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "-" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn chart_frame(out: &mut String, title: &str, x_label: &str, y_label: &str, x: &Range, y: &Range) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    // Axes.
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x.min + f * (x.max - x.min);
        let yv = y.min + f * (y.max - y.min);
        let xp = x.to_x(xv);
        let yp = y.to_y(yv);
        let _ = write!(
            out,
            "<line x1=\"{xp}\" y1=\"{y0}\" x2=\"{xp}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{xp}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <line x1=\"{}\" y1=\"{yp}\" x2=\"{x0}\" y2=\"{yp}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            y0 + 5.0,
            y0 + 20.0,
            tick_label(xv),
            x0 - 5.0,
            x0 - 8.0,
            yp + 4.0,
            tick_label(yv)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Renders one or more (x, y) series as polylines with a small legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let x = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut out = String::new();
    chart_frame(&mut out, title, x_label, y_label, &x, &y);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut points = String::new();
        for (px, py) in &s.points {
            let _ = write!(points, "{:.2},{:.2} ", x.to_x(*px), y.to_y(*py));
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            points.trim_end()
        );
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            MARGIN_LEFT + 10.0,
            ly,
            MARGIN_LEFT + 28.0,
            ly + 6.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Paired bars per bin, for comparing two distributions over the same
/// binning. `bins` rows are (bin low edge, left mass, right mass).
pub fn paired_bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    bins: &[(f64, f64, f64)],
    left_name: &str,
    right_name: &str,
) -> String {
    let width = if bins.len() > 1 {
        bins[1].0 - bins[0].0
    } else {
        1.0
    };
    let x = Range::of(bins.iter().flat_map(|b| [b.0, b.0 + width]));
    let top = bins
        .iter()
        .flat_map(|b| [b.1, b.2])
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let y = Range { min: 0.0, max: top };
    let mut out = String::new();
    chart_frame(&mut out, title, x_label, y_label, &x, &y);
    let base = y.to_y(0.0);
    for (lo, left, right) in bins {
        let x_lo = x.to_x(*lo);
        let x_hi = x.to_x(lo + width);
        let half = (x_hi - x_lo) / 2.0;
        for (offset, mass, color) in [(0.0, left, COLORS[0]), (half, right, COLORS[1])] {
            let bar_top = y.to_y(*mass);
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"{color}\" fill-opacity=\"0.8\"/>",
                x_lo + offset,
                bar_top,
                (half - 1.0).max(0.5),
                base - bar_top
            );
        }
    }
    for (i, name) in [left_name, right_name].iter().enumerate() {
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"8\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            WIDTH - 180.0,
            ly,
            COLORS[i],
            WIDTH - 162.0,
            ly + 8.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic_and_self_contained() {
        let series = vec![Series {
            name: "roc".into(),
            points: vec![(0.0, 0.0), (0.25, 0.8), (1.0, 1.0)],
        }];
        let a = line_chart("ROC", "false positive rate", "true positive rate", &series);
        let b = line_chart("ROC", "false positive rate", "true positive rate", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(!a.contains("http://") || a.contains("xmlns"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn bar_chart_handles_empty_and_escapes_labels() {
        let svg = paired_bar_chart("a < b", "x", "y", &[], "left", "right");
        assert!(svg.contains("a &lt; b"));
        let svg = paired_bar_chart(
            "hist",
            "sigma",
            "mass",
            &[(0.0, 0.5, 0.2), (0.05, 0.5, 0.8)],
            "correct",
            "incorrect",
        );
        assert!(svg.matches("<rect").count() >= 5);
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let series = vec![Series {
            name: "flat".into(),
            points: vec![(0.5, 0.3), (0.5, 0.3)],
        }];
        let svg = line_chart("flat", "x", "y", &series);
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
    }
}
