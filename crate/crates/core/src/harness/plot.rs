//! SVG figures rendered from sweep tables.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::output::{DistanceRow, OverheadRow, ResultTable};
use crate::error::{domain, Error, Result};
use crate::protocol::Method;

/// File names written by [`render_plots`], in order.
pub const PLOT_FILES: [&str; 5] = [
    "accuracy_vs_snr.svg",
    "accuracy_vs_b.svg",
    "rate_vs_snr.svg",
    "rate_vs_distance.svg",
    "overhead_vs_codebook.svg",
];

/// SNR at which single-SNR figures are drawn, when the sweep contains it.
const FOCUS_SNR_DB: f64 = 10.0;

const PALETTE: [RGBColor; 5] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
];

type Series = (String, Vec<(f64, f64)>);

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.04;
    (lo - pad, hi + pad)
}

fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    y_range: Option<(f64, f64)>,
) -> Result<()> {
    let x = span(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let y = y_range.unwrap_or_else(|| span(series.iter().flat_map(|s| s.1.iter().map(|p| p.1))));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x.0..x.1, y.0..y.1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn methods_in<'a>(ms: impl Iterator<Item = &'a Method>) -> Vec<Method> {
    let present: Vec<Method> = ms.copied().collect();
    Method::ALL.into_iter().filter(|m| present.contains(m)).collect()
}

fn nearest(values: impl Iterator<Item = f64>, target: f64) -> Option<f64> {
    values.fold(None, |best: Option<f64>, v| match best {
        Some(b) if (b - target).abs() <= (v - target).abs() => Some(b),
        _ => Some(v),
    })
}

/// Renders every figure into `dir` and returns the written paths.
///
/// Single-SNR figures use the SNR nearest 10 dB; SNR figures use the first
/// `(B, L)` point of the table.
pub fn render_plots(
    dir: &Path,
    table: &ResultTable,
    distance: &[DistanceRow],
    overhead: &[OverheadRow],
) -> Result<Vec<PathBuf>> {
    let Some(first) = table.rows.first() else {
        return domain("no results to plot");
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (b0, l0) = (first.b, first.l);
    let methods = methods_in(table.rows.iter().map(|r| &r.method));
    let focus = nearest(table.rows.iter().map(|r| r.snr_db), FOCUS_SNR_DB).unwrap_or(FOCUS_SNR_DB);
    let label = |m: Method| m.name().to_string();
    let paths: Vec<PathBuf> = PLOT_FILES.iter().map(|f| dir.join(f)).collect();

    let by_snr = |value: fn(&super::ResultRow) -> f64| -> Vec<Series> {
        methods
            .iter()
            .map(|&m| {
                let pts = table
                    .method(m)
                    .filter(|r| r.b == b0 && r.l == l0)
                    .map(|r| (r.snr_db, value(r)))
                    .collect();
                (label(m), pts)
            })
            .collect()
    };
    line_chart(
        &paths[0],
        &format!("Accuracy vs SNR (B = {b0}, L = {l0})"),
        "SNR (dB)",
        "accuracy",
        &by_snr(|r| r.accuracy),
        Some((0.0, 1.02)),
    )?;

    let by_b: Vec<Series> = methods
        .iter()
        .map(|&m| {
            let pts = table
                .method(m)
                .filter(|r| r.snr_db == focus && r.l == l0)
                .map(|r| (r.b as f64, r.accuracy))
                .collect();
            (label(m), pts)
        })
        .collect();
    line_chart(
        &paths[1],
        &format!("Accuracy vs B (SNR = {focus} dB, L = {l0})"),
        "buckets B",
        "accuracy",
        &by_b,
        Some((0.0, 1.02)),
    )?;

    line_chart(
        &paths[2],
        &format!("Achievable rate vs SNR (B = {b0}, L = {l0})"),
        "SNR (dB)",
        "rate (bps/Hz)",
        &by_snr(|r| r.rate_bps_hz),
        None,
    )?;

    let dist_focus = nearest(distance.iter().map(|r| r.snr_db), FOCUS_SNR_DB).unwrap_or(focus);
    let by_dist: Vec<Series> = methods_in(distance.iter().map(|r| &r.method))
        .into_iter()
        .map(|m| {
            let pts = distance
                .iter()
                .filter(|r| r.method == m && r.snr_db == dist_focus)
                .map(|r| (r.distance_m, r.rate_bps_hz))
                .collect();
            (label(m), pts)
        })
        .collect();
    line_chart(
        &paths[3],
        &format!("Achievable rate vs AP distance (SNR = {dist_focus} dB)"),
        "distance (m)",
        "rate (bps/Hz)",
        &by_dist,
        None,
    )?;

    let by_size: Vec<Series> = methods_in(overhead.iter().map(|r| &r.method))
        .into_iter()
        .map(|m| {
            let pts = overhead
                .iter()
                .filter(|r| r.method == m)
                .map(|r| (r.codebook_size as f64, r.overhead_slots as f64))
                .collect();
            (label(m), pts)
        })
        .collect();
    line_chart(
        &paths[4],
        "Training overhead vs codebook size",
        "codebook size",
        "slots",
        &by_size,
        None,
    )?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ResultRow;

    fn table() -> ResultTable {
        let mut rows = Vec::new();
        for m in [Method::Hmb, Method::Exhaustive] {
            for b in [8, 16] {
                for snr in [0.0, 10.0, 20.0] {
                    rows.push(ResultRow {
                        method: m,
                        snr_db: snr,
                        b,
                        l: 4,
                        trials: 10,
                        accuracy: snr / 20.0,
                        rate_bps_hz: snr / 3.0,
                        overhead_slots: b * 4,
                        seed: 3,
                    });
                }
            }
        }
        ResultTable { rows }
    }

    #[test]
    fn renders_all_figures_deterministically() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = render_plots(a.path(), &table(), &[], &[]).unwrap();
        let pb = render_plots(b.path(), &table(), &[], &[]).unwrap();
        assert_eq!(pa.len(), PLOT_FILES.len());
        for (x, y) in pa.iter().zip(&pb) {
            let sx = std::fs::read(x).unwrap();
            assert!(String::from_utf8_lossy(&sx).contains("<svg"));
            assert_eq!(sx, std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn empty_table_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        assert!(render_plots(d.path(), &ResultTable::default(), &[], &[]).is_err());
    }

    #[test]
    fn nearest_prefers_first_on_tie() {
        assert_eq!(nearest([5.0, 15.0, 10.0].into_iter(), 10.0), Some(10.0));
        assert_eq!(nearest([5.0, 15.0].into_iter(), 10.0), Some(5.0));
        assert_eq!(nearest(std::iter::empty(), 10.0), None);
    }
}
