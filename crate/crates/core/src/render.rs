//! Standalone SVG rendering for the explanation artifacts: value grids
//! (U-Matrix, cluster map, heatmaps) with optional starburst overlay and
//! unit labels, plus horizontal bar / dot charts for feature rankings.
//!
//! Output is deterministic: identical inputs produce byte-identical
//! documents.

use crate::error::{Error, Result};
use crate::explain::{Grid, StarburstOverlay};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Monotone-luminance color mappings from a value in [0, 1] to a fill.
/// Low values are dark, high values are light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Colormap {
    #[default]
    Grayscale,
    Blues,
}

impl Colormap {
    fn fill(self, v: f64) -> String {
        let v = v.clamp(0.0, 1.0);
        match self {
            Colormap::Grayscale => {
                let l = (v * 255.0).round() as u8;
                format!("#{l:02x}{l:02x}{l:02x}")
            }
            Colormap::Blues => {
                // Dark navy to near-white, increasing luminance.
                let r = (20.0 + v * 215.0).round() as u8;
                let g = (40.0 + v * 200.0).round() as u8;
                let b = (90.0 + v * 165.0).round() as u8;
                format!("#{r:02x}{g:02x}{b:02x}")
            }
        }
    }
}

/// Size, colormap, and labeling options for one rendered artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub width: u32,
    pub height: u32,
    pub colormap: Colormap,
    pub show_labels: bool,
    pub title: String,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            width: 640,
            height: 640,
            colormap: Colormap::Grayscale,
            show_labels: true,
            title: String::new(),
        }
    }
}

impl RenderSpec {
    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(
                "render dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Marker style for [`render_bars`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartStyle {
    /// One horizontal rect per entry.
    #[default]
    Bars,
    /// One circle per entry at the value position.
    Dots,
}

const MARGIN: f64 = 10.0;

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

fn svg_open(out: &mut String, spec: &RenderSpec) {
    let _ = write!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = spec.width,
        h = spec.height
    );
    if !spec.title.is_empty() {
        let _ = writeln!(out, "<title>{}</title>", escape_xml(&spec.title));
    }
}

/// Render a value grid: one rect per unit, colored by the min-max scaled
/// value (constant grids render mid-gray), plus optional starburst segments
/// and per-unit label digits.
pub fn render_grid(
    grid: &Grid,
    spec: &RenderSpec,
    overlay: Option<&StarburstOverlay>,
    labels: Option<&[Option<u8>]>,
) -> Result<String> {
    spec.validate()?;
    if grid.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "grid contains non-finite values".into(),
        ));
    }
    if grid.values.len() != grid.rows * grid.cols {
        return Err(Error::DimensionMismatch {
            expected: grid.rows * grid.cols,
            actual: grid.values.len(),
        });
    }
    if let Some(ls) = labels {
        if ls.len() != grid.values.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.values.len(),
                actual: ls.len(),
            });
        }
    }

    let min = grid.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = grid
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = |v: f64| -> f64 {
        if max > min {
            (v - min) / (max - min)
        } else {
            0.5
        }
    };

    let plot_w = spec.width as f64 - 2.0 * MARGIN;
    let plot_h = spec.height as f64 - 2.0 * MARGIN;
    let cell_w = plot_w / grid.cols as f64;
    let cell_h = plot_h / grid.rows as f64;
    let center = |unit: usize| -> (f64, f64) {
        let r = unit / grid.cols;
        let c = unit % grid.cols;
        (
            MARGIN + (c as f64 + 0.5) * cell_w,
            MARGIN + (r as f64 + 0.5) * cell_h,
        )
    };

    let mut out = String::new();
    svg_open(&mut out, spec);

    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let v = scale(grid.get(r, c));
            let x = MARGIN + c as f64 * cell_w;
            let y = MARGIN + r as f64 * cell_h;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" \
                 fill=\"{}\" stroke=\"#444444\" stroke-width=\"0.5\"/>",
                spec.colormap.fill(v)
            );
        }
    }

    if let Some(sb) = overlay {
        for &(from, to) in &sb.segments {
            let (x1, y1) = center(from);
            let (x2, y2) = center(to);
            let _ = writeln!(
                out,
                "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
                 stroke=\"#cc2222\" stroke-width=\"1.5\"/>"
            );
        }
    }

    if spec.show_labels {
        if let Some(ls) = labels {
            let font = (cell_w.min(cell_h) * 0.45).max(4.0);
            for (unit, label) in ls.iter().enumerate() {
                let Some(digit) = label else { continue };
                let (x, y) = center(unit);
                // Contrast against the cell fill.
                let v = scale(grid.values[unit]);
                let fill = if v > 0.5 { "#000000" } else { "#ffffff" };
                let _ = writeln!(
                    out,
                    "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{font:.2}\" \
                     font-family=\"monospace\" fill=\"{fill}\" text-anchor=\"middle\" \
                     dominant-baseline=\"central\">{digit}</text>"
                );
            }
        }
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Render named values as a horizontal bar chart (or dot plot). Entries are
/// drawn top to bottom in the given order; the value axis spans
/// [0, max(1, largest value)].
pub fn render_bars(
    values: &[(String, f64)],
    spec: &RenderSpec,
    style: ChartStyle,
) -> Result<String> {
    spec.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values to render".into()));
    }
    if values.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "chart contains non-finite values".into(),
        ));
    }

    let name_gutter = (spec.width as f64 * 0.35).min(220.0);
    let plot_x = MARGIN + name_gutter;
    let plot_w = spec.width as f64 - plot_x - MARGIN;
    let plot_h = spec.height as f64 - 2.0 * MARGIN;
    let row_h = plot_h / values.len() as f64;
    let domain = values.iter().map(|(_, v)| *v).fold(1.0f64, f64::max);
    let font = (row_h * 0.55).clamp(4.0, 14.0);

    let mut out = String::new();
    svg_open(&mut out, spec);

    for (i, (name, value)) in values.iter().enumerate() {
        let y = MARGIN + i as f64 * row_h;
        let y_mid = y + row_h / 2.0;
        let len = (value / domain) * plot_w;
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{y_mid:.2}\" font-size=\"{font:.2}\" \
             font-family=\"monospace\" fill=\"#222222\" text-anchor=\"end\" \
             dominant-baseline=\"central\">{}</text>",
            escape_xml(name),
            x = plot_x - 6.0,
        );
        match style {
            ChartStyle::Bars => {
                let bar_h = row_h * 0.7;
                let _ = writeln!(
                    out,
                    "<rect x=\"{plot_x:.2}\" y=\"{by:.2}\" width=\"{len:.2}\" \
                     height=\"{bar_h:.2}\" fill=\"#3366aa\"/>",
                    by = y_mid - bar_h / 2.0,
                );
            }
            ChartStyle::Dots => {
                let radius = (row_h * 0.25).clamp(2.0, 6.0);
                let _ = writeln!(
                    out,
                    "<circle cx=\"{cx:.2}\" cy=\"{y_mid:.2}\" r=\"{radius:.2}\" \
                     fill=\"#3366aa\"/>",
                    cx = plot_x + len,
                );
            }
        }
    }

    // Value axis.
    let _ = writeln!(
        out,
        "<line x1=\"{plot_x:.2}\" y1=\"{y1:.2}\" x2=\"{plot_x:.2}\" y2=\"{y2:.2}\" \
         stroke=\"#222222\" stroke-width=\"1\"/>",
        y1 = MARGIN,
        y2 = MARGIN + plot_h,
    );

    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(hay: &str, needle: &str) -> usize {
        hay.matches(needle).count()
    }

    fn grid(rows: usize, cols: usize, values: &[f64]) -> Grid {
        Grid {
            rows,
            cols,
            values: values.to_vec(),
        }
    }

    #[test]
    fn grid_svg_has_one_rect_per_unit() {
        let g = grid(2, 2, &[0.0, 0.3, 0.7, 1.0]);
        let svg = render_grid(&g, &RenderSpec::default(), None, None).unwrap();
        assert_eq!(count(&svg, "<rect "), 4);
        assert_eq!(count(&svg, "<line "), 0);
        assert_eq!(count(&svg, "<text "), 0);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn constant_grid_renders_mid_gray() {
        let g = grid(2, 2, &[0.7; 4]);
        let svg = render_grid(&g, &RenderSpec::default(), None, None).unwrap();
        assert_eq!(count(&svg, "#808080"), 4);
    }

    #[test]
    fn extreme_values_hit_colormap_ends() {
        let g = grid(1, 2, &[0.0, 1.0]);
        let svg = render_grid(&g, &RenderSpec::default(), None, None).unwrap();
        assert!(svg.contains("#000000")); // low is dark
        assert!(svg.contains("#ffffff")); // high is light
    }

    #[test]
    fn overlay_draws_one_line_per_segment() {
        let g = grid(2, 2, &[0.1, 0.5, 0.6, 0.9]);
        let sb = crate::explain::starburst(&g);
        let svg = render_grid(&g, &RenderSpec::default(), Some(&sb), None).unwrap();
        assert_eq!(count(&svg, "<line "), sb.segments.len());
    }

    #[test]
    fn labels_draw_one_text_per_labeled_unit() {
        let g = grid(1, 3, &[0.1, 0.5, 0.9]);
        let labels = vec![Some(0u8), None, Some(1u8)];
        let svg = render_grid(&g, &RenderSpec::default(), None, Some(&labels)).unwrap();
        assert_eq!(count(&svg, "<text "), 2);
    }

    #[test]
    fn grid_rejects_non_finite() {
        let g = grid(1, 2, &[0.1, f64::NAN]);
        assert!(render_grid(&g, &RenderSpec::default(), None, None).is_err());
    }

    #[test]
    fn bars_full_length_at_one() {
        let spec = RenderSpec {
            width: 400,
            height: 100,
            ..Default::default()
        };
        let svg = render_bars(&[("only".into(), 1.0)], &spec, ChartStyle::Bars).unwrap();
        assert_eq!(count(&svg, "<rect "), 1);
        // Plot width = 400 - (10 + 140) - 10 = 240.
        assert!(svg.contains("width=\"240.00\""));
    }

    #[test]
    fn bars_render_in_given_order() {
        let entries = vec![
            ("zeta".to_string(), 0.2),
            ("alpha".to_string(), 0.9),
            ("mid".to_string(), 0.5),
        ];
        let svg = render_bars(&entries, &RenderSpec::default(), ChartStyle::Bars).unwrap();
        let z = svg.find(">zeta<").unwrap();
        let a = svg.find(">alpha<").unwrap();
        let m = svg.find(">mid<").unwrap();
        assert!(z < a && a < m);
        assert_eq!(count(&svg, "<rect "), 3);
    }

    #[test]
    fn dots_render_one_circle_per_entry() {
        let entries = vec![("a".to_string(), 0.1), ("b".to_string(), 0.8)];
        let svg = render_bars(&entries, &RenderSpec::default(), ChartStyle::Dots).unwrap();
        assert_eq!(count(&svg, "<circle "), 2);
        assert_eq!(count(&svg, "<rect "), 0);
    }

    #[test]
    fn bars_reject_empty_input() {
        assert!(render_bars(&[], &RenderSpec::default(), ChartStyle::Bars).is_err());
    }

    #[test]
    fn names_are_xml_escaped() {
        let entries = vec![("bytes<&>\"s".to_string(), 0.4)];
        let svg = render_bars(&entries, &RenderSpec::default(), ChartStyle::Bars).unwrap();
        assert!(svg.contains("bytes&lt;&amp;&gt;&quot;s"));
        assert!(!svg.contains("bytes<&>"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let g = grid(3, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        let sb = crate::explain::starburst(&g);
        let labels: Vec<Option<u8>> = (0..9).map(|i| Some((i % 2) as u8)).collect();
        let spec = RenderSpec {
            title: "U-Matrix".into(),
            ..Default::default()
        };
        let a = render_grid(&g, &spec, Some(&sb), Some(&labels)).unwrap();
        let b = render_grid(&g, &spec, Some(&sb), Some(&labels)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn colormaps_are_monotone_in_luminance() {
        for cm in [Colormap::Grayscale, Colormap::Blues] {
            let mut prev = -1.0f64;
            for i in 0..=20 {
                let v = i as f64 / 20.0;
                let fill = cm.fill(v);
                let r = u8::from_str_radix(&fill[1..3], 16).unwrap() as f64;
                let g = u8::from_str_radix(&fill[3..5], 16).unwrap() as f64;
                let b = u8::from_str_radix(&fill[5..7], 16).unwrap() as f64;
                let lum = 0.2126 * r + 0.7152 * g + 0.0722 * b;
                assert!(lum >= prev, "{cm:?} not monotone at {v}");
                prev = lum;
            }
        }
    }
}
