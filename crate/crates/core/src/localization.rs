//! Codebook beam-sweep localization.
//!
//! The panel radiates every codeword in turn, the receiver reports the RSS of
//! each, and the codeword with the largest RSS gives the direction estimate.
//! Panel angles follow [`RisPanel::direction`].

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Position3;
use crate::propagation::LinkBudget;
use crate::ris::{
    cascade_received_power, generate_codebook, Codebook, PhaseConfiguration, RisPanel,
};
use crate::terrain::HeightField;

/// RSS recorded for a codeword whose beam cannot reach the receiver.
pub const NO_SIGNAL: f64 = f64::NEG_INFINITY;

/// Range of the virtual targets used by [`two_stage_sweep`].
pub const DEFAULT_BEAM_RANGE_M: f64 = 1000.0;

/// Everything a sweep needs besides the codebook. Without terrain the sweep
/// runs in free space.
#[derive(Debug, Clone, Copy)]
pub struct SweepContext<'a> {
    pub terrain: Option<&'a HeightField>,
    pub panel: &'a RisPanel,
    pub tx: Position3,
    pub rx: Position3,
    pub link: LinkBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMeasurement {
    rss_dbm: Vec<f64>,
    noise_seed: u64,
}

impl SweepMeasurement {
    pub fn new(rss_dbm: Vec<f64>, noise_seed: u64) -> Result<Self> {
        if let Some(v) = rss_dbm
            .iter()
            .find(|v| !(v.is_finite() || **v == NO_SIGNAL))
        {
            return Err(Error::Domain(format!(
                "RSS value {v} is neither finite nor the no-signal sentinel"
            )));
        }
        Ok(Self {
            rss_dbm,
            noise_seed,
        })
    }

    pub fn rss_dbm(&self) -> &[f64] {
        &self.rss_dbm
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    pub fn len(&self) -> usize {
        self.rss_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss_dbm.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    pub azimuth: f64,
    pub elevation: f64,
    pub half_width: f64,
    pub winning_index: usize,
}

/// Radiates every codeword and records the RSS at the receiver, perturbed by
/// zero-mean Gaussian noise of `noise_stddev_db`.
pub fn beam_sweep(
    ctx: &SweepContext<'_>,
    codebook: &Codebook,
    noise_stddev_db: f64,
    seed: u64,
) -> Result<SweepMeasurement> {
    if codebook.is_empty() {
        return Err(Error::Precondition("codebook is empty".into()));
    }
    if !(noise_stddev_db >= 0.0 && noise_stddev_db.is_finite()) {
        return Err(Error::Domain(format!(
            "noise standard deviation must be >= 0, got {noise_stddev_db}"
        )));
    }
    let mut reaches_rx = true;
    if let Some(terrain) = ctx.terrain {
        if !terrain.line_of_sight(ctx.tx, ctx.panel.center, 0.0)? {
            return Err(Error::Geometry(
                "transmitter has no line of sight to the panel; sweep impossible".into(),
            ));
        }
        reaches_rx = terrain.line_of_sight(ctx.panel.center, ctx.rx, 0.0)?;
    }

    let mut rss = Vec::with_capacity(codebook.len());
    for entry in codebook.entries() {
        let value = if reaches_rx {
            match cascade_received_power(ctx.panel, &entry.config, ctx.tx, ctx.rx, &ctx.link) {
                Ok(c) => c.signal_dbm,
                Err(Error::Geometry(_)) => NO_SIGNAL,
                Err(e) => return Err(e),
            }
        } else {
            NO_SIGNAL
        };
        rss.push(value);
    }

    if noise_stddev_db > 0.0 {
        let normal = Normal::new(0.0, noise_stddev_db)
            .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut rss {
            // Draw for every codeword so each keeps its own perturbation.
            let n = normal.sample(&mut rng);
            if v.is_finite() {
                *v += n;
            }
        }
    }
    SweepMeasurement::new(rss, seed)
}

/// Argmax codeword; ties go to the lowest index.
pub fn estimate_angle(meas: &SweepMeasurement, codebook: &Codebook) -> Result<AngleEstimate> {
    if meas.len() != codebook.len() {
        return Err(Error::Precondition(format!(
            "measurement has {} entries for a codebook of {}",
            meas.len(),
            codebook.len()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in meas.rss_dbm().iter().enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (winning_index, _) = best.ok_or(Error::NoCoverage)?;
    let entry = &codebook.entries()[winning_index];
    Ok(AngleEstimate {
        azimuth: entry.azimuth,
        elevation: entry.elevation,
        half_width: 0.5 * codebook.min_adjacent_spacing(),
        winning_index,
    })
}

/// The winning codeword's configuration.
pub fn configure_from_estimate(
    panel: &RisPanel,
    estimate: &AngleEstimate,
    codebook: &Codebook,
) -> Result<PhaseConfiguration> {
    let entry = codebook
        .entries()
        .get(estimate.winning_index)
        .ok_or_else(|| {
            Error::Precondition(format!(
                "winning index {} outside codebook of {}",
                estimate.winning_index,
                codebook.len()
            ))
        })?;
    if entry.config.len() != panel.n_elements() {
        return Err(Error::Precondition(format!(
            "codebook configurations have {} phases for a {}-element panel",
            entry.config.len(),
            panel.n_elements()
        )));
    }
    Ok(entry.config.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageResult {
    pub estimate: AngleEstimate,
    pub coarse: AngleEstimate,
    /// Codewords radiated over both stages.
    pub evaluations: usize,
}

/// Multiples of `step` strictly inside `(lo, hi)`.
fn anchored_grid(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let first = (lo / step).floor() as i64;
    let last = (hi / step).ceil() as i64;
    (first..=last)
        .map(|m| m as f64 * step)
        .filter(|a| *a > lo && *a < hi)
        .collect()
}

/// Azimuth grid of a single-stage sweep at `spacing` over the panel's front
/// half-plane; both stages of [`two_stage_sweep`] are subsets of the grid at
/// their own spacing.
pub fn azimuth_grid(spacing: f64) -> Vec<f64> {
    anchored_grid(spacing, -FRAC_PI_2, FRAC_PI_2)
}

/// `n` angles whose sines are evenly spaced over `[-sin(max), sin(max)]`,
/// endpoints included; a single angle is zero. Beams of a uniform aperture
/// have the same shape in sine space, so this spacing keeps neighbouring
/// beams equally separated.
pub fn sine_space_grid(n: usize, max_angle: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("grid needs at least one angle".into()));
    }
    if !(0.0..FRAC_PI_2).contains(&max_angle) {
        return Err(Error::Domain(format!(
            "largest grid angle must lie in [0, pi/2) rad, got {max_angle}"
        )));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let s = max_angle.sin();
    let step = 2.0 * s / (n - 1) as f64;
    Ok((0..n).map(|i| (-s + i as f64 * step).asin()).collect())
}

/// Coarse azimuth sweep over the front half-plane followed by a fine sweep
/// within one coarse step of the coarse winner. Both sweeps run at zero
/// elevation with beams focused at [`DEFAULT_BEAM_RANGE_M`].
pub fn two_stage_sweep(
    ctx: &SweepContext<'_>,
    coarse_spacing: f64,
    refine_factor: usize,
    noise_stddev_db: f64,
    seed: u64,
) -> Result<TwoStageResult> {
    if refine_factor < 2 {
        return Err(Error::Precondition(format!(
            "refine factor must be at least 2, got {refine_factor}"
        )));
    }
    if !(coarse_spacing > 0.0 && coarse_spacing < FRAC_PI_2) {
        return Err(Error::Precondition(format!(
            "coarse spacing must lie in (0, pi/2) rad, got {coarse_spacing}"
        )));
    }
    let freq = ctx.link.frequency_hz;
    let coarse_grid = azimuth_grid(coarse_spacing);
    let coarse_book = generate_codebook(
        ctx.panel,
        ctx.tx,
        &coarse_grid,
        &[0.0],
        DEFAULT_BEAM_RANGE_M,
        freq,
    )?;
    let coarse_meas = beam_sweep(ctx, &coarse_book, noise_stddev_db, seed)?;
    let coarse = estimate_angle(&coarse_meas, &coarse_book)?;

    let fine_spacing = coarse_spacing / refine_factor as f64;
    let center = (coarse.azimuth / fine_spacing).round() as i64;
    let r = refine_factor as i64;
    let fine_grid: Vec<f64> = (center - r..=center + r)
        .map(|m| m as f64 * fine_spacing)
        .filter(|a| a.abs() < FRAC_PI_2)
        .collect();
    let fine_book = generate_codebook(
        ctx.panel,
        ctx.tx,
        &fine_grid,
        &[0.0],
        DEFAULT_BEAM_RANGE_M,
        freq,
    )?;
    let fine_meas = beam_sweep(ctx, &fine_book, noise_stddev_db, seed.wrapping_add(1))?;
    let estimate = estimate_angle(&fine_meas, &fine_book)?;
    Ok(TwoStageResult {
        estimate,
        coarse,
        evaluations: coarse_book.len() + fine_book.len(),
    })
}
