//! Vector line chart of one instrument's score history.

use chrono::{Datelike, NaiveDate};

use super::fonts::Font;
use super::layout::{Layout, Op, CONTENT_WIDTH, MARGIN};
use crate::domain::EvolutionPoint;

const PLOT_HEIGHT: f32 = 140.0;
const AXIS_GUTTER: f32 = 36.0;
const LABEL_SIZE: f32 = 8.0;

fn fmt_score(v: f64) -> String {
    format!("{v}")
}

fn day_number(d: NaiveDate) -> f64 {
    f64::from(d.num_days_from_ce())
}

/// Draws the chart below the cursor. Needs at least two points; callers
/// skip the section otherwise.
pub(crate) fn evolution_chart(layout: &mut Layout, instrument: &str, series: &[EvolutionPoint]) {
    if series.len() < 2 {
        return;
    }
    layout.ensure(PLOT_HEIGHT + 70.0);
    layout.text(&format!("Evolution: {instrument}"), Font::Bold, 11.0);
    layout.space(8.0);

    let lo = series.iter().map(|p| p.range_min).fold(f64::INFINITY, f64::min);
    let hi = series.iter().map(|p| p.range_max).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let left = MARGIN + AXIS_GUTTER;
    let width = CONTENT_WIDTH - AXIS_GUTTER - 10.0;
    let top = layout.cursor();
    let bottom = top - PLOT_HEIGHT;

    let first = day_number(series[0].assessed_at);
    let last = day_number(series[series.len() - 1].assessed_at);
    let n = series.len();
    let xs: Vec<f32> = series
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = if last > first {
                (day_number(p.assessed_at) - first) / (last - first)
            } else {
                i as f64 / (n - 1) as f64
            };
            left + (t as f32) * width
        })
        .collect();
    let y_of = |v: f64| bottom + (((v - lo) / span) as f32) * PLOT_HEIGHT;

    // Instrument range band, following each assessment's own bounds.
    let mut band: Vec<(f32, f32)> = xs.iter().zip(series).map(|(x, p)| (*x, y_of(p.range_max))).collect();
    band.extend(xs.iter().zip(series).rev().map(|(x, p)| (*x, y_of(p.range_min))));
    layout.push(Op::Polygon {
        points: band,
        fill: 0.9,
    });

    for (x1, y1, x2, y2) in [(left, bottom, left + width, bottom), (left, bottom, left, top)] {
        layout.push(Op::Line {
            x1,
            y1,
            x2,
            y2,
            width: 0.75,
            gray: 0.0,
        });
    }

    let pts: Vec<(f32, f32)> = xs.iter().zip(series).map(|(x, p)| (*x, y_of(p.score))).collect();
    for w in pts.windows(2) {
        layout.push(Op::Line {
            x1: w[0].0,
            y1: w[0].1,
            x2: w[1].0,
            y2: w[1].1,
            width: 1.5,
            gray: 0.2,
        });
    }
    for (x, y) in &pts {
        layout.push(Op::Rect {
            x: x - 2.0,
            y: y - 2.0,
            w: 4.0,
            h: 4.0,
            stroke: None,
            fill: Some(0.0),
        });
    }

    let label = |layout: &mut Layout, text: String, x: f32, y: f32| {
        layout.push(Op::Text {
            x,
            y,
            font: Font::Regular,
            size: LABEL_SIZE,
            leading: LABEL_SIZE * 1.3,
            lines: vec![super::fonts::encode(&text)],
            volatile: false,
        });
    };
    label(layout, fmt_score(hi), MARGIN, top - LABEL_SIZE);
    label(layout, fmt_score(lo), MARGIN, bottom);
    let first_label = series[0].assessed_at.to_string();
    let last_label = series[n - 1].assessed_at.to_string();
    label(layout, first_label, left, bottom - LABEL_SIZE - 4.0);
    let last_w = Font::Regular.measure_str(&last_label, LABEL_SIZE);
    label(layout, last_label, left + width - last_w, bottom - LABEL_SIZE - 4.0);

    layout.advance_to(bottom - LABEL_SIZE - 16.0);
}
