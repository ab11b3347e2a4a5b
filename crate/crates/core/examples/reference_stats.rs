//! Prints SNR statistics of the reference crater for STAR and amplifying panels.

use std::time::Instant;

use marsris::ris::{RisKind, StarMode};
use marsris::scenario::{build_reference_crater_scenario, compare_ris_kinds, HeatmapOptions};

fn main() -> marsris::Result<()> {
    let (scenario, grid) = build_reference_crater_scenario();
    let options = HeatmapOptions {
        workers: Some(1),
        ..Default::default()
    };
    let amp = RisKind::amplifying();
    let star = RisKind::star(StarMode::Reflect);
    let start = Instant::now();
    let report = compare_ris_kinds(&scenario, &grid, &[amp, star], &options)?;
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    for s in &report.stats {
        println!(
            "{:<12} min {:7.2} max {:7.2} mean {:7.2} coverage {:.3}",
            s.label, s.min_snr_db, s.max_snr_db, s.mean_snr_db, s.coverage_fraction
        );
    }
    println!("amplifying - star = {:.3} dB", report.deltas[0][1]);
    let amp0 = RisKind::Amplifying {
        amp_gain_db: 0.0,
        noise_figure_db: 5.0,
        amplified_noise: false,
    };
    let quiet = RisKind::Amplifying {
        amp_gain_db: 10.0,
        noise_figure_db: 5.0,
        amplified_noise: false,
    };
    let r0 = compare_ris_kinds(&scenario, &grid, &[amp0, star, quiet], &options)?;
    println!(
        "amp0/quiet - star = {:.4} dB, quiet - star = {:.4}, collapse = {:.4} dB",
        r0.deltas[0][1],
        r0.deltas[2][1],
        report.deltas[0][1] - r0.deltas[0][1]
    );
    for (kind, lo, hi) in [(star, 0.0, 20.0), (amp, 20.0, 40.0)] {
        let map =
            marsris::scenario::run_heatmap(&scenario.with_panel_kind(kind)?, &grid, &options)?;
        let covered: Vec<f64> = map.covered().collect();
        let inside = covered.iter().filter(|v| **v >= lo && **v <= hi).count();
        println!(
            "{} in [{lo}, {hi}]: {:.3}",
            kind.label(),
            inside as f64 / covered.len() as f64
        );
    }
    Ok(())
}
