use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TransferError;
use crate::rng::stream;
use crate::trainer::{multi_seed, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_size: usize,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

/// Pool positions used by the run with `seed` at `size`: the first `size`
/// entries of a seeded permutation, so that smaller subsets are contained in
/// larger ones. Returned in ascending order.
pub fn nested_subset(pool_len: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..pool_len).collect();
    perm.shuffle(&mut stream(seed, "curve-subset", 0));
    let mut subset = perm[..size.min(pool_len)].to_vec();
    subset.sort_unstable();
    subset
}

/// For each size, runs `runner(subset, seed)` for `n_runs` seeds starting at
/// `seed0` and aggregates the test metrics.
pub fn learning_curve<F>(
    pool_len: usize,
    sizes: &[usize],
    n_runs: usize,
    seed0: u64,
    jobs: Option<usize>,
    runner: F,
) -> Result<Vec<CurvePoint>, TransferError>
where
    F: Fn(&[usize], u64) -> Result<RunReport, TransferError> + Sync,
{
    if n_runs == 0 {
        return Err(TransferError::InvalidSetting("n_runs must be >= 1".into()));
    }
    for &s in sizes {
        if s == 0 || s > pool_len {
            return Err(TransferError::SizeExceedsPool {
                size: s,
                pool: pool_len,
            });
        }
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let report = multi_seed(seed0, n_runs, jobs, |seed| {
            runner(&nested_subset(pool_len, size, seed), seed)
        })?;
        points.push(CurvePoint {
            train_size: size,
            mae_mean: report.mae_mean,
            mae_std: report.mae_std,
            rmse_mean: report.rmse_mean,
            rmse_std: report.rmse_std,
        });
    }
    Ok(points)
}

pub fn curve_csv(series: &[(String, Vec<CurvePoint>)]) -> String {
    let mut s = String::from("arm,size,mae_mean,mae_std,rmse_mean,rmse_std\n");
    for (arm, points) in series {
        for p in points {
            writeln!(
                s,
                "{arm},{},{},{},{},{}",
                p.train_size, p.mae_mean, p.mae_std, p.rmse_mean, p.rmse_std
            )
            .unwrap();
        }
    }
    s
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static plot of MAE (mean ± std) against training-set size on a log x axis.
pub fn curve_svg(series: &[(String, Vec<CurvePoint>)], x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let all: Vec<&CurvePoint> = series.iter().flat_map(|(_, p)| p.iter()).collect();
    let xs: Vec<f64> = all
        .iter()
        .map(|p| (p.train_size.max(1) as f64).log10())
        .collect();
    let (mut x0, mut x1) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let lo = all
        .iter()
        .map(|p| p.mae_mean - p.mae_std)
        .fold(f64::INFINITY, f64::min);
    let hi = all
        .iter()
        .map(|p| p.mae_mean + p.mae_std)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut y0, mut y1) = if lo.is_finite() && hi.is_finite() {
        (lo.min(0.0), hi)
    } else {
        (0.0, 1.0)
    };
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    y1 += pad;
    y0 = if y0 < 0.0 { y0 - pad } else { y0 };
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(
        s,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    )
    .unwrap();
    let (ax0, ax1, ay0, ay1) = (left, w - right, h - bottom, top);
    writeln!(
        s,
        r#"<line x1="{ax0}" y1="{ay0}" x2="{ax1}" y2="{ay0}" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{ay1}" stroke="black"/>"#
    )
    .unwrap();
    // decade ticks with 2 and 5 subdivisions
    let mut decade = x0.floor() as i32;
    while (decade as f64) <= x1 {
        for m in [1.0, 2.0, 5.0] {
            let v = m * 10f64.powi(decade);
            let lx = v.log10();
            if lx < x0 - 1e-9 || lx > x1 + 1e-9 {
                continue;
            }
            let x = px(lx);
            writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{ay0}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
                ay0 + 5.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
                ay0 + 18.0
            )
            .unwrap();
        }
        decade += 1;
    }
    for k in 0..=5 {
        let v = y0 + (y1 - y0) * k as f64 / 5.0;
        let y = py(v);
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/>"#,
            ax0 - 5.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ax0 - 8.0,
            y + 4.0,
            format_tick(v)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        h - 10.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (i, (arm, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    px((p.train_size.max(1) as f64).log10()),
                    py(p.mae_mean)
                )
            })
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
        for p in points {
            let x = px((p.train_size.max(1) as f64).log10());
            let (ylo, yhi) = (py(p.mae_mean - p.mae_std), py(p.mae_mean + p.mae_std));
            writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{ylo:.2}" x2="{x:.2}" y2="{yhi:.2}" stroke="{color}"/>"#
            )
            .unwrap();
            writeln!(
                s,
                r#"<line x1="{:.2}" y1="{ylo:.2}" x2="{:.2}" y2="{ylo:.2}" stroke="{color}"/>"#,
                x - 3.0,
                x + 3.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<line x1="{:.2}" y1="{yhi:.2}" x2="{:.2}" y2="{yhi:.2}" stroke="{color}"/>"#,
                x - 3.0,
                x + 3.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                py(p.mae_mean)
            )
            .unwrap();
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        writeln!(s, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, ax1 + 10.0, ax1 + 30.0).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            ax1 + 35.0,
            ly + 4.0,
            escape(arm)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}
