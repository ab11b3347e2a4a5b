//! Text artifacts: heatmap CSV and PGM, sweep CSV, comparison CSVs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::localization::SweepMeasurement;
use crate::ris::Codebook;
use crate::scenario::{ComparisonReport, HeatmapResult};

/// `printf("%.{sig}g")`: `sig` significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 10^sig)`.
pub fn format_g(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn g6(x: f64) -> String {
    format_g(x, 6)
}

/// `x_m,y_m,z_m,snr_db,best_path`, one row per cell in grid order.
pub fn heatmap_csv(map: &HeatmapResult) -> String {
    let mut out = String::from("x_m,y_m,z_m,snr_db,best_path\n");
    for c in &map.cells {
        let (snr, label) = match (c.snr_db, c.best_path) {
            (Some(s), Some(l)) => (g6(s), l.to_string()),
            _ => ("nan".into(), "NONE".into()),
        };
        let _ = writeln!(out, "{},{},{},{snr},{label}", g6(c.x), g6(c.y), g6(c.z));
    }
    out
}

/// ASCII graymap with north at the top; SNR is clamped to
/// `[min_db, max_db]` and uncovered cells are black.
pub fn heatmap_pgm(map: &HeatmapResult, min_db: f64, max_db: f64) -> Result<String> {
    if !(min_db < max_db && min_db.is_finite() && max_db.is_finite()) {
        return Err(Error::Domain(format!(
            "PGM window must satisfy min < max, got [{min_db}, {max_db}]"
        )));
    }
    let (nx, ny) = (map.grid.n_x, map.grid.n_y);
    let mut out = format!("P2\n# SNR window [{min_db}, {max_db}] dB\n{nx} {ny}\n255\n");
    for iy in (0..ny).rev() {
        let row: Vec<String> = (0..nx)
            .map(|ix| match map.cells[iy * nx + ix].snr_db {
                Some(s) => {
                    let t = ((s - min_db) / (max_db - min_db)).clamp(0.0, 1.0);
                    ((t * 255.0).round() as u8).to_string()
                }
                None => "0".into(),
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// `index,azimuth_deg,elevation_deg,rss_dbm`; the no-signal sentinel is `-inf`.
pub fn sweep_csv(meas: &SweepMeasurement, codebook: &Codebook) -> Result<String> {
    if meas.len() != codebook.len() {
        return Err(Error::Precondition(format!(
            "measurement has {} entries for a codebook of {}",
            meas.len(),
            codebook.len()
        )));
    }
    let mut out = String::from("index,azimuth_deg,elevation_deg,rss_dbm\n");
    for (i, (entry, rss)) in codebook.entries().iter().zip(meas.rss_dbm()).enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{}",
            g6(entry.azimuth.to_degrees()),
            g6(entry.elevation.to_degrees()),
            g6(*rss)
        );
    }
    Ok(out)
}

/// Per-kind statistics table.
pub fn comparison_stats_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("kind,min_snr_db,max_snr_db,mean_snr_db,coverage_fraction\n");
    for s in &report.stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.label,
            g6(s.min_snr_db),
            g6(s.max_snr_db),
            g6(s.mean_snr_db),
            g6(s.coverage_fraction)
        );
    }
    out
}

/// Ordered pairwise mean deltas.
pub fn comparison_deltas_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("kind_a,kind_b,mean_delta_db,common_cells\n");
    let n = report.stats.len();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let _ = writeln!(
                out,
                "{},{},{},{}",
                report.stats[i].label,
                report.stats[j].label,
                g6(report.deltas[i][j]),
                report.common_cells[i][j]
            );
        }
    }
    out
}
