//! Minimal SVG line charts for experiment CSVs.

use std::fmt::Write;

type Series = (String, Vec<(f64, f64)>);

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn table(contents: &str) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_reader(contents.as_bytes());
    let headers = reader.headers().ok()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()
        .ok()?;
    Some((headers, rows))
}

fn num(s: &str) -> Option<f64> {
    s.parse().ok().filter(|x: &f64| x.is_finite())
}

/// Columns `ys` against column `x`, skipping blank cells.
fn wide(headers: &[String], rows: &[Vec<String>], x: usize, ys: &[usize]) -> Vec<Series> {
    ys.iter()
        .map(|&c| {
            let pts = rows
                .iter()
                .filter_map(|r| Some((num(&r[x])?, num(&r[c])?)))
                .collect();
            (headers[c].clone(), pts)
        })
        .collect()
}

/// Renders the chart that fits a known experiment CSV, if any.
pub fn render(file_name: &str, contents: &str) -> Option<String> {
    let (headers, rows) = table(contents)?;
    let col = |name: &str| headers.iter().position(|h| h == name);
    let stem = file_name.trim_end_matches(".csv");
    let (series, x_label, y_label) = if stem.starts_with("fig2_") {
        let ys: Vec<usize> = (1..headers.len())
            .filter(|&c| headers[c].ends_with("_ngoe"))
            .collect();
        (wide(&headers, &rows, 0, &ys), "slot", "NGoE")
    } else if stem.starts_with("fig3_cdf") {
        let q = col("quantile")?;
        let series = (q + 1..headers.len())
            .map(|c| {
                let pts = rows
                    .iter()
                    .filter_map(|r| Some((num(&r[c])?, num(&r[q])?)))
                    .collect();
                (headers[c].clone(), pts)
            })
            .collect();
        (series, "average NGoE", "CDF")
    } else if stem.starts_with("fig4_") {
        let (p, x, y) = (col("policy")?, col("rate")?, col("mean_ngoe")?);
        let mut series: Vec<Series> = Vec::new();
        for r in &rows {
            let Some(pt) = num(&r[x]).zip(num(&r[y])) else {
                continue;
            };
            match series.iter_mut().find(|s| s.0 == r[p]) {
                Some(s) => s.1.push(pt),
                None => series.push((r[p].clone(), vec![pt])),
            }
        }
        (series, "query rate", "mean NGoE")
    } else if stem.starts_with("fig5_convergence") {
        let ys: Vec<usize> = (1..headers.len()).collect();
        (wide(&headers, &rows, 0, &ys), "iteration", "gain estimate")
    } else {
        return None;
    };
    Some(chart(stem, x_label, y_label, &series))
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#,
        LEFT + pw / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"#,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#,
            LEFT - 6.0,
            py + 4.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/>"##,
            LEFT + pw
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = TOP + 16.0 * i as f64 + 8.0;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{name}</text>"#,
            lx + 24.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
