//! Minimal self-contained SVG line/scatter charts. CSV is the canonical
//! artifact; these plots are diagnostics, so the emitter stays tiny and
//! dependency-free.

use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 75.0;
const MARGIN_RIGHT: f64 = 25.0;
const MARGIN_TOP: f64 = 45.0;
const MARGIN_BOTTOM: f64 = 55.0;

enum Series {
    Line {
        points: Vec<(f64, f64)>,
        color: &'static str,
        width: f64,
        dashed: bool,
    },
    Scatter {
        points: Vec<(f64, f64)>,
        color: &'static str,
        radius: f64,
    },
    Band {
        x: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        color: &'static str,
        opacity: f64,
    },
}

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series: Vec::new(),
        }
    }

    pub fn line(mut self, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        self.series.push(Series::Line {
            points,
            color,
            width: 1.8,
            dashed: false,
        });
        self
    }

    pub fn dashed_line(mut self, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        self.series.push(Series::Line {
            points,
            color,
            width: 1.5,
            dashed: true,
        });
        self
    }

    pub fn hline(self, y: f64, x_lo: f64, x_hi: f64, color: &'static str) -> Self {
        self.dashed_line(vec![(x_lo, y), (x_hi, y)], color)
    }

    pub fn scatter(mut self, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        self.series.push(Series::Scatter {
            points,
            color,
            radius: 2.6,
        });
        self
    }

    pub fn band(
        mut self,
        x: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        color: &'static str,
    ) -> Self {
        self.series.push(Series::Band {
            x,
            lower,
            upper,
            color,
            opacity: 0.25,
        });
        self
    }

    fn data_ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut feed = |x: f64, y: f64| {
            if x.is_finite() {
                xr.0 = xr.0.min(x);
                xr.1 = xr.1.max(x);
            }
            if y.is_finite() {
                yr.0 = yr.0.min(y);
                yr.1 = yr.1.max(y);
            }
        };
        for s in &self.series {
            match s {
                Series::Line { points, .. } | Series::Scatter { points, .. } => {
                    for &(x, y) in points {
                        feed(x, y);
                    }
                }
                Series::Band { x, lower, upper, .. } => {
                    for i in 0..x.len() {
                        feed(x[i], lower[i]);
                        feed(x[i], upper[i]);
                    }
                }
            }
        }
        if !xr.0.is_finite() {
            xr = (0.0, 1.0);
        }
        if !yr.0.is_finite() {
            yr = (0.0, 1.0);
        }
        if xr.0 == xr.1 {
            xr = (xr.0 - 0.5, xr.1 + 0.5);
        }
        if yr.0 == yr.1 {
            yr = (yr.0 - 0.5, yr.1 + 0.5);
        }
        // 4% padding on y so curves do not hug the frame.
        let pad = 0.04 * (yr.1 - yr.0);
        (xr, (yr.0 - pad, yr.1 + pad))
    }

    pub fn render(&self) -> String {
        let ((x_lo, x_hi), (y_lo, y_hi)) = self.data_ranges();
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = move |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = move |y: f64| {
            let clamped = y.clamp(y_lo, y_hi);
            MARGIN_TOP + (y_hi - clamped) / (y_hi - y_lo) * plot_h
        };

        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
        );
        let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");

        // Frame and ticks.
        let _ = writeln!(
            out,
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
             fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>"
        );
        for i in 0..=4 {
            let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
            let px = sx(fx);
            let _ = writeln!(
                out,
                "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#444\"/>",
                MARGIN_TOP + plot_h,
                MARGIN_TOP + plot_h + 5.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{px}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
                MARGIN_TOP + plot_h + 20.0,
                fmt_tick(fx)
            );
            let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
            let py = sy(fy);
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{MARGIN_LEFT}\" y2=\"{py}\" stroke=\"#444\"/>",
                MARGIN_LEFT - 5.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
                MARGIN_LEFT - 9.0,
                py + 4.0,
                fmt_tick(fy)
            );
        }

        for s in &self.series {
            match s {
                Series::Band {
                    x,
                    lower,
                    upper,
                    color,
                    opacity,
                } => {
                    let mut d = String::new();
                    for (i, &xi) in x.iter().enumerate() {
                        let cmd = if i == 0 { 'M' } else { 'L' };
                        let _ = write!(d, "{cmd}{:.2},{:.2} ", sx(xi), sy(upper[i]));
                    }
                    for (i, &xi) in x.iter().enumerate().rev() {
                        let _ = write!(d, "L{:.2},{:.2} ", sx(xi), sy(lower[i]));
                    }
                    let _ = writeln!(
                        out,
                        "<path d=\"{d}Z\" fill=\"{color}\" fill-opacity=\"{opacity}\" stroke=\"none\"/>"
                    );
                }
                Series::Line {
                    points,
                    color,
                    width,
                    dashed,
                } => {
                    let mut d = String::new();
                    for (i, &(x, y)) in points.iter().enumerate() {
                        let cmd = if i == 0 { 'M' } else { 'L' };
                        let _ = write!(d, "{cmd}{:.2},{:.2} ", sx(x), sy(y));
                    }
                    let dash = if *dashed { " stroke-dasharray=\"6,4\"" } else { "" };
                    let _ = writeln!(
                        out,
                        "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>"
                    );
                }
                Series::Scatter {
                    points,
                    color,
                    radius,
                } => {
                    for &(x, y) in points {
                        let _ = writeln!(
                            out,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{color}\"/>",
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
        }

        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"25\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            xml_escape(&self.title)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            HEIGHT - 12.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
             transform=\"rotate(-90 18 {})\">{}</text>",
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            xml_escape(&self.y_label)
        );
        out.push_str("</svg>\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    let s = if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else if a >= 0.01 || a == 0.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.1e}")
    };
    let trimmed = if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if trimmed == "-0" {
        "0".to_string()
    } else {
        trimmed
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// Fixed palette.
pub const BLUE: &str = "#2a6fdb";
pub const ORANGE: &str = "#e6862a";
pub const GREEN: &str = "#2a9d5c";
pub const GRAY: &str = "#777777";
pub const RED: &str = "#d0342c";
