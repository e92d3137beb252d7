//! Minimal SVG chart writer: line charts (linear or log-10 y-axis) and
//! polar charts, with axes, tick labels, and a legend. Diagnostic plots
//! only — the CSV files next to them are the actual data interface.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_points<'a>(series: &'a [Series], log_y: bool) -> impl Iterator<Item = (f64, f64)> + 'a {
    series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(move |&(x, y)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0))
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let step = 10f64.powf((span / 5.0).log10().floor());
    let step = if span / step > 10.0 {
        step * 2.0
    } else if span / step < 3.0 {
        step / 2.0
    } else {
        step
    };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * span {
        out.push(t);
        t += step;
    }
    out
}

/// Line chart over the given series. With `log_y`, y values must be
/// positive; non-positive points are dropped.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_y: bool,
) -> io::Result<()> {
    let pts: Vec<(f64, f64)> = finite_points(series, log_y).collect();
    let (x_lo, x_hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(x, _)| (l.min(x), h.max(x)));
    let (mut y_lo, mut y_hi) = pts
        .iter()
        .map(|&(_, y)| if log_y { y.log10() } else { y })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), y| (l.min(y), h.max(y)));
    if !x_lo.is_finite() {
        // nothing plottable; emit an empty frame rather than failing
        return std::fs::write(path, empty_chart(title));
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let px = |x: f64| MARGIN_L + (x - x_lo) / x_span * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| {
        let v = if log_y { y.log10() } else { y };
        HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = header(title);
    // axes
    let _ = write!(
        svg,
        "<line x1='{l}' y1='{b}' x2='{r}' y2='{b}' stroke='black'/>\
         <line x1='{l}' y1='{t}' x2='{l}' y2='{b}' stroke='black'/>",
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B
    );
    for t in nice_ticks(x_lo, x_hi) {
        let _ = write!(
            svg,
            "<line x1='{x:.1}' y1='{b}' x2='{x:.1}' y2='{b2}' stroke='black'/>\
             <text x='{x:.1}' y='{ty}' font-size='11' text-anchor='middle'>{t:.3}</text>",
            x = px(t),
            b = HEIGHT - MARGIN_B,
            b2 = HEIGHT - MARGIN_B + 5.0,
            ty = HEIGHT - MARGIN_B + 18.0,
        );
    }
    let y_ticks = if log_y {
        (y_lo.floor() as i64..=y_hi.ceil() as i64).map(|e| e as f64).collect::<Vec<_>>()
    } else {
        nice_ticks(y_lo, y_hi)
    };
    for t in y_ticks {
        if t < y_lo - 1e-12 || t > y_hi + 1e-12 {
            continue;
        }
        let y = HEIGHT - MARGIN_B - (t - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);
        let label = if log_y { format!("1e{}", t as i64) } else { format!("{t:.3}") };
        let _ = write!(
            svg,
            "<line x1='{l2}' y1='{y:.1}' x2='{l}' y2='{y:.1}' stroke='black'/>\
             <text x='{tx}' y='{ty:.1}' font-size='11' text-anchor='end'>{label}</text>",
            l = MARGIN_L,
            l2 = MARGIN_L - 5.0,
            tx = MARGIN_L - 8.0,
            ty = y + 4.0,
        );
    }
    let _ = write!(
        svg,
        "<text x='{cx}' y='{cy}' font-size='13' text-anchor='middle'>{xl}</text>\
         <text x='18' y='{my}' font-size='13' text-anchor='middle' transform='rotate(-90 18 {my})'>{yl}</text>",
        cx = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        cy = HEIGHT - 10.0,
        my = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        xl = esc(x_label),
        yl = esc(y_label),
    );
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut d = String::new();
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) || (log_y && y <= 0.0) {
                continue;
            }
            let cmd = if d.is_empty() { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2},{:.2} ", px(x), py(y));
        }
        let _ = write!(svg, "<path d='{d}' fill='none' stroke='{color}' stroke-width='1.5'/>");
        legend_entry(&mut svg, si, color, &s.label);
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

/// Polar chart: each series is (theta in radians, radius >= 0), drawn as a
/// closed curve around the origin with radial grid circles.
pub fn polar_chart(path: &Path, title: &str, series: &[Series]) -> io::Result<()> {
    let r_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(_, r)| r))
        .filter(|r| r.is_finite())
        .fold(0.0f64, f64::max);
    if r_max <= 0.0 {
        return std::fs::write(path, empty_chart(title));
    }
    let cx = (WIDTH - MARGIN_R) / 2.0 + 20.0;
    let cy = HEIGHT / 2.0 + 10.0;
    let scale = (HEIGHT / 2.0 - 50.0) / r_max;
    let mut svg = header(title);
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let rr = r_max * frac;
        let _ = write!(
            svg,
            "<circle cx='{cx:.1}' cy='{cy:.1}' r='{pr:.1}' fill='none' stroke='#cccccc'/>\
             <text x='{tx:.1}' y='{cy:.1}' font-size='10' fill='#888888'>{rr:.3}</text>",
            pr = rr * scale,
            tx = cx + rr * scale + 3.0,
        );
    }
    let _ = write!(
        svg,
        "<line x1='{x1:.1}' y1='{cy:.1}' x2='{x2:.1}' y2='{cy:.1}' stroke='#cccccc'/>\
         <line x1='{cx:.1}' y1='{y1:.1}' x2='{cx:.1}' y2='{y2:.1}' stroke='#cccccc'/>",
        x1 = cx - r_max * scale,
        x2 = cx + r_max * scale,
        y1 = cy - r_max * scale,
        y2 = cy + r_max * scale,
    );
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut d = String::new();
        for &(theta, r) in &s.points {
            if !(theta.is_finite() && r.is_finite()) {
                continue;
            }
            let cmd = if d.is_empty() { 'M' } else { 'L' };
            let _ = write!(
                d,
                "{cmd}{:.2},{:.2} ",
                cx + r * scale * theta.cos(),
                cy - r * scale * theta.sin()
            );
        }
        if !d.is_empty() {
            d.push('Z');
        }
        let _ = write!(svg, "<path d='{d}' fill='none' stroke='{color}' stroke-width='1.5'/>");
        legend_entry(&mut svg, si, color, &s.label);
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{HEIGHT}' \
         viewBox='0 0 {WIDTH} {HEIGHT}' font-family='sans-serif'>\
         <rect width='{WIDTH}' height='{HEIGHT}' fill='white'/>\
         <text x='{tx}' y='24' font-size='15' text-anchor='middle'>{t}</text>",
        tx = WIDTH / 2.0,
        t = esc(title)
    )
}

fn legend_entry(svg: &mut String, index: usize, color: &str, label: &str) {
    let x = WIDTH - MARGIN_R + 12.0;
    let y = MARGIN_T + 14.0 * index as f64 + 10.0;
    let _ = write!(
        svg,
        "<line x1='{x:.1}' y1='{y:.1}' x2='{x2:.1}' y2='{y:.1}' stroke='{color}' stroke-width='2'/>\
         <text x='{tx:.1}' y='{ty:.1}' font-size='11'>{l}</text>",
        x2 = x + 20.0,
        tx = x + 25.0,
        ty = y + 4.0,
        l = esc(label),
    );
}

fn empty_chart(title: &str) -> String {
    let mut svg = header(title);
    svg.push_str("<text x='360' y='240' font-size='13' text-anchor='middle'>no data</text></svg>\n");
    svg
}
