//! Standalone SVG plots rendered straight from CSV output, with no drawing
//! dependencies. Good enough for eyeballing trajectories, not a charting
//! library.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::{write_atomic, CsvData};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Distinct stroke colors, cycled per agent.
const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Which family of series to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// Follower states plus the leader (dashed black).
    States,
    /// Consensus errors; the settling time is marked with a vertical line.
    Errors,
    /// Sliding surfaces.
    Surfaces,
    /// Auxiliary inputs `v` and physical inputs `u`.
    Inputs,
}

impl SeriesKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "states" => Ok(SeriesKind::States),
            "errors" => Ok(SeriesKind::Errors),
            "surfaces" => Ok(SeriesKind::Surfaces),
            "inputs" => Ok(SeriesKind::Inputs),
            other => Err(Error::UnknownSeries(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SeriesKind::States => "states",
            SeriesKind::Errors => "errors",
            SeriesKind::Surfaces => "surfaces",
            SeriesKind::Inputs => "inputs",
        }
    }
}

struct Line {
    label: String,
    color: String,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

/// Renders one series family of a run to `path`.
pub fn render(data: &CsvData, kind: SeriesKind, path: &Path) -> Result<()> {
    let mut lines: Vec<Line> = Vec::new();
    let color = |i: usize| PALETTE[i % PALETTE.len()].to_string();
    match kind {
        SeriesKind::States => {
            for k in 0..data.order {
                lines.push(Line {
                    label: format!("leader x{}", k + 1),
                    color: "#000000".into(),
                    dashed: true,
                    points: zip(&data.times, data.leader.iter().map(|x| x[k])),
                });
            }
            for (i, agent) in data.agents.iter().enumerate() {
                for k in 0..data.order {
                    lines.push(Line {
                        label: format!("agent {} x{}", i + 1, k + 1),
                        color: color(i),
                        dashed: false,
                        points: zip(&data.times, agent.x.iter().map(|x| x[k])),
                    });
                }
            }
        }
        SeriesKind::Errors => {
            for (i, agent) in data.agents.iter().enumerate() {
                for k in 0..data.order {
                    lines.push(Line {
                        label: format!("agent {} e{}", i + 1, k + 1),
                        color: color(i),
                        dashed: false,
                        points: zip(&data.times, agent.e.iter().map(|e| e[k])),
                    });
                    // Tracking reference e - xi = H(t) e(0), overlaid dashed.
                    lines.push(Line {
                        label: String::new(),
                        color: color(i),
                        dashed: true,
                        points: zip(
                            &data.times,
                            agent.e.iter().zip(&agent.xi).map(|(e, xi)| e[k] - xi[k]),
                        ),
                    });
                }
            }
        }
        SeriesKind::Surfaces => {
            for (i, agent) in data.agents.iter().enumerate() {
                lines.push(Line {
                    label: format!("agent {} s", i + 1),
                    color: color(i),
                    dashed: false,
                    points: zip(&data.times, agent.s.iter().copied()),
                });
            }
        }
        SeriesKind::Inputs => {
            for (i, agent) in data.agents.iter().enumerate() {
                lines.push(Line {
                    label: format!("agent {} v", i + 1),
                    color: color(i),
                    dashed: false,
                    points: zip(&data.times, agent.v.iter().copied()),
                });
                lines.push(Line {
                    label: format!("agent {} u", i + 1),
                    color: color(i),
                    dashed: true,
                    points: zip(&data.times, agent.u.iter().copied()),
                });
            }
        }
    }
    let marker = matches!(kind, SeriesKind::Errors | SeriesKind::Surfaces).then_some(data.t_f);
    let svg = draw(&lines, kind.name(), marker);
    write_atomic(path, &svg)
}

fn zip<I: Iterator<Item = f64>>(times: &[f64], values: I) -> Vec<(f64, f64)> {
    times.iter().copied().zip(values).collect()
}

fn draw(lines: &[Line], title: &str, time_marker: Option<f64>) -> String {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for line in lines {
        for &(x, y) in &line.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max - x_min < 1e-300 {
        x_max = x_min + 1.0;
    }
    if y_max - y_min < 1e-300 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
    .unwrap();

    // Axes with a handful of ticks.
    for k in 0..=5 {
        let frac = k as f64 / 5.0;
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        write!(
            svg,
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" \
             stroke=\"#dddddd\"/>\n",
            px(xv),
            py(y_min),
            py(y_max)
        )
        .unwrap();
        write!(
            svg,
            "<line x1=\"{1:.1}\" y1=\"{0:.1}\" x2=\"{2:.1}\" y2=\"{0:.1}\" \
             stroke=\"#dddddd\"/>\n",
            py(yv),
            px(x_min),
            px(x_max)
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{xv:.3}</text>\n",
            px(xv),
            HEIGHT - MARGIN_B + 18.0
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{yv:.3}</text>\n",
            MARGIN_L - 6.0,
            py(yv) + 4.0
        )
        .unwrap();
    }

    if let Some(t) = time_marker {
        if t >= x_min && t <= x_max {
            write!(
                svg,
                "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" \
                 stroke=\"#999999\" stroke-dasharray=\"2,4\"/>\n",
                px(t),
                py(y_min),
                py(y_max)
            )
            .unwrap();
        }
    }

    for line in lines {
        if line.points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (idx, &(x, y)) in line.points.iter().enumerate() {
            let cmd = if idx == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{:.2} {:.2} ", px(x), py(y)).unwrap();
        }
        let dash = if line.dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        write!(
            svg,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"{dash}/>\n",
            d.trim_end(),
            line.color
        )
        .unwrap();
    }

    // Legend, first entry per label only.
    let mut y_leg = MARGIN_T + 6.0;
    let mut seen: Vec<&str> = Vec::new();
    for line in lines {
        if line.label.is_empty() || seen.contains(&line.label.as_str()) {
            continue;
        }
        seen.push(&line.label);
        if seen.len() > 16 {
            break;
        }
        write!(
            svg,
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"{3}\" \
             stroke-width=\"2\"{4}/>\n",
            WIDTH - MARGIN_R - 150.0,
            y_leg,
            WIDTH - MARGIN_R - 130.0,
            line.color,
            if line.dashed {
                " stroke-dasharray=\"6,4\""
            } else {
                ""
            }
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN_R - 124.0,
            y_leg + 4.0,
            line.label
        )
        .unwrap();
        y_leg += 14.0;
    }

    svg.push_str("</svg>\n");
    svg
}
