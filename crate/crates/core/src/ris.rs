//! Element-level RIS cascade models.
//!
//! Every kind shares the same per-element cascade: the element at `p_e`
//! contributes
//!
//! ```text
//! sqrt(P_t G_t G_r) * (lambda / 4 pi d1) * (lambda / 4 pi d2)
//!     * cos^q(theta1) * cos^q(theta2) * |c| * exp(j (k (d1 + d2) + phi_e))
//! ```
//!
//! with `d1 = |tx - p_e|`, `d2 = |p_e - rx|`, the angles taken from the panel
//! normal, `|c|` the kind's coefficient magnitude and `phi_e` the configured
//! phase. Kinds differ only in `|c|`, in an extra gain factor and in the noise
//! they inject:
//!
//! * passive, semi-passive: `|c| = 1`, no added noise;
//! * STAR: `|c|` is the reflection or transmission magnitude depending on
//!   which side the receiver is on;
//! * active: each element amplifies by `per_element_gain`; the element
//!   amplifiers' noise adds incoherently at the receiver;
//! * amplifying: a receive face, one amplifier and a transmit face. The faces
//!   are matched apertures whose cells collect and radiate with the physical
//!   cell gain `4 pi s_r s_c / lambda^2` (pi at half-wavelength spacing) on
//!   each leg. The amplifier noise is radiated by the transmit face toward the
//!   receiver.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Position3, Vec3};
use crate::propagation::{db_to_linear, linear_to_db, power_sum_dbm, wavelength, LinkBudget};

/// Element pattern exponent giving about 3 dB of two-leg loss at 60 degrees.
pub const DEFAULT_ELEMENT_GAIN_EXPONENT: f64 = 0.285;
pub const DEFAULT_AMP_GAIN_DB: f64 = 10.0;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 5.0;

/// Phase-shifter bias per element.
const PHASE_CONTROL_W: f64 = 1e-3;
/// Reflection amplifier per active element.
const ACTIVE_ELEMENT_AMPLIFIER_W: f64 = 15e-3;
/// Bias of the single amplifier of an amplifying RIS.
const SINGLE_AMPLIFIER_W: f64 = 0.2;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarMode {
    Reflect,
    Transmit,
    DualSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RisKind {
    Passive,
    /// Propagates like a passive panel; the flag only tells the scenario
    /// engine whether channel state is available for configuration.
    SemiPassive {
        csi_available: bool,
    },
    Active {
        per_element_gain_db: f64,
        noise_figure_db: f64,
    },
    Amplifying {
        amp_gain_db: f64,
        noise_figure_db: f64,
        /// Include the amplifier's own noise at the receiver.
        amplified_noise: bool,
    },
    Star {
        mode: StarMode,
        reflect_magnitude: f64,
        transmit_magnitude: f64,
    },
}

impl RisKind {
    pub fn amplifying() -> Self {
        RisKind::Amplifying {
            amp_gain_db: DEFAULT_AMP_GAIN_DB,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
            amplified_noise: true,
        }
    }

    pub fn star(mode: StarMode) -> Self {
        RisKind::Star {
            mode,
            reflect_magnitude: 1.0,
            transmit_magnitude: 1.0,
        }
    }

    pub fn active(per_element_gain_db: f64) -> Self {
        RisKind::Active {
            per_element_gain_db,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
        }
    }

    pub fn family(&self) -> RisFamily {
        match self {
            RisKind::Passive | RisKind::SemiPassive { .. } => RisFamily::Passive,
            RisKind::Star { .. } => RisFamily::Star,
            RisKind::Amplifying { .. } => RisFamily::Amplifying,
            RisKind::Active { .. } => RisFamily::Active,
        }
    }

    /// Short lowercase label used in reports.
    pub fn label(&self) -> String {
        match self {
            RisKind::Passive => "passive".into(),
            RisKind::SemiPassive { .. } => "semi_passive".into(),
            RisKind::Active { .. } => "active".into(),
            RisKind::Amplifying { .. } => "amplifying".into(),
            RisKind::Star { mode, .. } => match mode {
                StarMode::Reflect => "star".into(),
                StarMode::Transmit => "star_transmit".into(),
                StarMode::DualSided => "star_dual".into(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be >= 0, got {v}")))
            }
        };
        match *self {
            RisKind::Passive | RisKind::SemiPassive { .. } => Ok(()),
            RisKind::Active {
                per_element_gain_db,
                noise_figure_db,
            } => {
                if !per_element_gain_db.is_finite() {
                    return Err(Error::Domain("per-element gain must be finite".into()));
                }
                finite_nonneg("noise figure", noise_figure_db)
            }
            RisKind::Amplifying {
                amp_gain_db,
                noise_figure_db,
                ..
            } => {
                finite_nonneg("amplifier gain", amp_gain_db)?;
                finite_nonneg("noise figure", noise_figure_db)
            }
            RisKind::Star {
                reflect_magnitude,
                transmit_magnitude,
                ..
            } => {
                for (name, m) in [
                    ("reflect magnitude", reflect_magnitude),
                    ("transmit magnitude", transmit_magnitude),
                ] {
                    if !(0.0..=1.0).contains(&m) {
                        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {m}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Coefficient magnitude for a source/destination side pair, or a
    /// geometry error if the kind cannot couple those sides.
    fn coupling(&self, source_front: bool, dest_front: bool) -> Result<f64> {
        let same_side = source_front == dest_front;
        let reflect_only = |m: f64| {
            if source_front && dest_front {
                Ok(m)
            } else {
                Err(Error::Geometry(format!(
                    "{} panel only serves its front half-space",
                    self.label()
                )))
            }
        };
        match *self {
            RisKind::Passive | RisKind::SemiPassive { .. } | RisKind::Active { .. } => {
                reflect_only(1.0)
            }
            RisKind::Amplifying { .. } => Ok(1.0),
            RisKind::Star {
                mode,
                reflect_magnitude,
                transmit_magnitude,
            } => match mode {
                StarMode::Reflect => reflect_only(reflect_magnitude),
                StarMode::Transmit if !same_side => Ok(transmit_magnitude),
                StarMode::Transmit => Err(Error::Geometry(
                    "transmit-mode STAR panel needs source and destination on opposite sides"
                        .into(),
                )),
                StarMode::DualSided if same_side => Ok(reflect_magnitude),
                StarMode::DualSided => Ok(transmit_magnitude),
            },
        }
    }
}

/// The four families compared in the RIS trade-off table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RisFamily {
    Passive,
    Star,
    Amplifying,
    Active,
}

impl RisFamily {
    pub const ALL: [RisFamily; 4] = [
        RisFamily::Passive,
        RisFamily::Star,
        RisFamily::Amplifying,
        RisFamily::Active,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RisFamily::Passive => "Passive",
            RisFamily::Star => "STAR",
            RisFamily::Amplifying => "Amplifying",
            RisFamily::Active => "Active",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisPanel {
    pub id: usize,
    pub center: Position3,
    normal: Vec3,
    up: Vec3,
    pub n_rows: usize,
    pub n_cols: usize,
    pub element_spacing: f64,
    pub element_gain_exponent: f64,
    pub kind: RisKind,
}

/// Largest element count accepted for one panel.
pub const MAX_ELEMENTS: usize = 1 << 16;

impl RisPanel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        center: Position3,
        normal: Vec3,
        up: Vec3,
        n_rows: usize,
        n_cols: usize,
        element_spacing: f64,
        kind: RisKind,
    ) -> Result<Self> {
        let panel = Self {
            id,
            center,
            normal,
            up,
            n_rows,
            n_cols,
            element_spacing,
            element_gain_exponent: DEFAULT_ELEMENT_GAIN_EXPONENT,
            kind,
        };
        panel.validate()?;
        Ok(panel)
    }

    /// Panel whose normal points along compass-free azimuth `azimuth_deg`
    /// (counter-clockwise from +x) tilted by `tilt_deg` above the horizon,
    /// with rows running along the panel's upward axis.
    #[allow(clippy::too_many_arguments)]
    pub fn facing(
        id: usize,
        center: Position3,
        azimuth_deg: f64,
        tilt_deg: f64,
        n_rows: usize,
        n_cols: usize,
        element_spacing: f64,
        kind: RisKind,
    ) -> Result<Self> {
        if !(-90.0..=90.0).contains(&tilt_deg) || tilt_deg.abs() == 90.0 {
            return Err(Error::Domain(format!(
                "tilt must lie strictly between -90 and 90 degrees, got {tilt_deg}"
            )));
        }
        let (az, tilt) = (azimuth_deg.to_radians(), tilt_deg.to_radians());
        let normal = Vec3::new(tilt.cos() * az.cos(), tilt.cos() * az.sin(), tilt.sin());
        let up = Vec3::new(-tilt.sin() * az.cos(), -tilt.sin() * az.sin(), tilt.cos());
        Self::new(
            id,
            center,
            normal,
            up,
            n_rows,
            n_cols,
            element_spacing,
            kind,
        )
    }

    pub fn with_gain_exponent(mut self, q: f64) -> Result<Self> {
        self.element_gain_exponent = q;
        self.validate()?;
        Ok(self)
    }

    pub fn with_kind(&self, kind: RisKind) -> Result<Self> {
        let mut p = self.clone();
        p.kind = kind;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::Domain("panel centre must be finite".into()));
        }
        if !self.normal.is_unit() || !self.up.is_unit() {
            return Err(Error::Domain(
                "panel normal and up must be unit vectors".into(),
            ));
        }
        if self.normal.dot(self.up).abs() > 1e-9 {
            return Err(Error::Domain(
                "panel up vector must be orthogonal to the normal".into(),
            ));
        }
        let n = self
            .n_rows
            .checked_mul(self.n_cols)
            .ok_or_else(|| Error::Domain("element count overflows".into()))?;
        if n == 0 || n > MAX_ELEMENTS {
            return Err(Error::Domain(format!(
                "panel needs between 1 and {MAX_ELEMENTS} elements, got {n}"
            )));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(Error::Domain(format!(
                "element spacing must be positive, got {}",
                self.element_spacing
            )));
        }
        if !(self.element_gain_exponent >= 0.0 && self.element_gain_exponent.is_finite()) {
            return Err(Error::Domain(format!(
                "element gain exponent must be >= 0, got {}",
                self.element_gain_exponent
            )));
        }
        self.kind.validate()
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    /// `normal x up`; columns run along this axis.
    pub fn right(&self) -> Vec3 {
        self.normal.cross(self.up)
    }

    pub fn n_elements(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Largest distance between two elements.
    pub fn aperture(&self) -> f64 {
        let h = (self.n_rows - 1) as f64 * self.element_spacing;
        let w = (self.n_cols - 1) as f64 * self.element_spacing;
        (h * h + w * w).sqrt()
    }

    pub fn is_in_front(&self, p: Position3) -> bool {
        self.normal.dot(p - self.center) > 0.0
    }

    /// Unit direction for panel angles. Angles are direction-cosine angles:
    /// `sin(azimuth)` and `sin(elevation)` are the components along the
    /// right and up axes, and the direction always points out of the front.
    pub fn direction(&self, azimuth: f64, elevation: f64) -> Result<Vec3> {
        let (u, v) = (azimuth.sin(), elevation.sin());
        let w2 = 1.0 - u * u - v * v;
        if !(w2 >= 0.0) || azimuth.abs() > PI / 2.0 || elevation.abs() > PI / 2.0 {
            return Err(Error::Domain(format!(
                "panel angles ({azimuth}, {elevation}) rad do not describe a direction"
            )));
        }
        Ok(self.right() * u + self.up * v + self.normal * w2.sqrt())
    }

    /// Direction-cosine angles of the direction from the panel centre to `p`.
    pub fn angles_to(&self, p: Position3) -> (f64, f64) {
        let d = (p - self.center).normalized().unwrap_or(self.normal);
        (
            d.dot(self.right()).clamp(-1.0, 1.0).asin(),
            d.dot(self.up).clamp(-1.0, 1.0).asin(),
        )
    }
}

/// Element centres, row-major (rows along `up`, columns along `normal x up`).
pub fn element_positions(panel: &RisPanel) -> Vec<Position3> {
    let s = panel.element_spacing;
    let right = panel.right();
    let row_mid = (panel.n_rows as f64 - 1.0) / 2.0;
    let col_mid = (panel.n_cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(panel.n_elements());
    for r in 0..panel.n_rows {
        for c in 0..panel.n_cols {
            out.push(
                panel.center
                    + panel.up * ((r as f64 - row_mid) * s)
                    + right * ((c as f64 - col_mid) * s),
            );
        }
    }
    out
}

fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TWO_PI);
    if p >= TWO_PI {
        0.0
    } else {
        p
    }
}

/// Per-element phases in `[0, 2 pi)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfiguration {
    phases: Vec<f64>,
}

impl PhaseConfiguration {
    /// Wraps arbitrary radians into `[0, 2 pi)`.
    pub fn from_radians(phases: impl IntoIterator<Item = f64>) -> Result<Self> {
        let phases: Vec<f64> = phases.into_iter().map(wrap_phase).collect();
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain(
                "phase configuration contains non-finite phases".into(),
            ));
        }
        Ok(Self { phases })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            phases: vec![0.0; n],
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

fn check_sides(panel: &RisPanel, source: Position3, target: Position3) -> Result<f64> {
    for (name, p) in [("source", source), ("target", target)] {
        if !p.is_finite() {
            return Err(Error::InvalidPosition(format!("{name} is not finite")));
        }
        if panel.normal.dot(p - panel.center) == 0.0 {
            return Err(Error::Geometry(format!("{name} lies in the panel plane")));
        }
    }
    panel
        .kind
        .coupling(panel.is_in_front(source), panel.is_in_front(target))
}

/// Phases that bring every element's contribution into phase at `target`.
pub fn steering_phase_profile(
    panel: &RisPanel,
    source: Position3,
    target: Position3,
    frequency_hz: f64,
) -> Result<PhaseConfiguration> {
    check_sides(panel, source, target)?;
    let k = TWO_PI / wavelength(frequency_hz);
    PhaseConfiguration::from_radians(
        element_positions(panel)
            .into_iter()
            .map(|p| -k * (source.distance(p) + p.distance(target))),
    )
}

/// Received signal and the noise power to compare it against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadePower {
    pub signal_dbm: f64,
    pub effective_noise_dbm: f64,
    /// Coherent received field, sqrt(mW).
    pub field: Complex64,
}

/// Cell gain of a matched aperture face, per leg.
pub fn aperture_cell_gain(panel: &RisPanel, frequency_hz: f64) -> f64 {
    let lambda = wavelength(frequency_hz);
    4.0 * PI * panel.element_spacing * panel.element_spacing / (lambda * lambda)
}

/// Coherent tx -> panel -> rx cascade for a given configuration.
pub fn cascade_received_power(
    panel: &RisPanel,
    config: &PhaseConfiguration,
    tx: Position3,
    rx: Position3,
    link: &LinkBudget,
) -> Result<CascadePower> {
    if config.len() != panel.n_elements() {
        return Err(Error::Domain(format!(
            "configuration has {} phases for {} elements",
            config.len(),
            panel.n_elements()
        )));
    }
    let magnitude = check_sides(panel, tx, rx)?;
    let lambda = link.wavelength();
    let k = TWO_PI / lambda;
    let q = panel.element_gain_exponent;
    let leg_const = lambda / (4.0 * PI);

    let kind_gain = match panel.kind {
        RisKind::Active {
            per_element_gain_db,
            ..
        } => db_to_linear(per_element_gain_db).sqrt(),
        RisKind::Amplifying { amp_gain_db, .. } => {
            db_to_linear(amp_gain_db).sqrt() * aperture_cell_gain(panel, link.frequency_hz)
        }
        _ => 1.0,
    };
    let scale = db_to_linear(link.eirp_plus_rx_gain_dbm()).sqrt() * magnitude * kind_gain;

    let mut field = Complex64::new(0.0, 0.0);
    // Receive-leg sums for noise: coherent magnitude and incoherent power.
    let mut leg2_amplitude_sum = 0.0;
    let mut leg2_power_sum = 0.0;
    for (p, &phi) in element_positions(panel).iter().zip(config.phases()) {
        let to_tx = tx - *p;
        let to_rx = rx - *p;
        let d1 = to_tx.norm();
        let d2 = to_rx.norm();
        let cos1 = (panel.normal.dot(to_tx) / d1).abs();
        let cos2 = (panel.normal.dot(to_rx) / d2).abs();
        let leg1 = leg_const / d1 * cos1.powf(q);
        let leg2 = leg_const / d2 * cos2.powf(q);
        field += Complex64::from_polar(scale * leg1 * leg2, k * (d1 + d2) + phi);
        leg2_amplitude_sum += leg2;
        leg2_power_sum += leg2 * leg2;
    }

    let noise_mw = db_to_linear(link.noise_power_dbm);
    let rx_gain = db_to_linear(link.rx_antenna_gain_dbi);
    let injected_mw = match panel.kind {
        RisKind::Active {
            per_element_gain_db,
            noise_figure_db,
        } => {
            noise_mw
                * db_to_linear(per_element_gain_db + noise_figure_db)
                * rx_gain
                * leg2_power_sum
        }
        RisKind::Amplifying {
            amp_gain_db,
            noise_figure_db,
            amplified_noise: true,
        } => {
            let amplifier_out = noise_mw * db_to_linear(amp_gain_db + noise_figure_db);
            let transmit_beam = aperture_cell_gain(panel, link.frequency_hz)
                * rx_gain
                * leg2_amplitude_sum
                * leg2_amplitude_sum
                / panel.n_elements() as f64;
            amplifier_out * transmit_beam
        }
        _ => 0.0,
    };
    let effective_noise_dbm = if injected_mw > 0.0 {
        power_sum_dbm(
            link.noise_power_dbm,
            linear_to_db(injected_mw) + link.lna_gain_db,
        )
    } else {
        link.noise_power_dbm
    };

    Ok(CascadePower {
        signal_dbm: linear_to_db(field.norm_sqr()),
        effective_noise_dbm,
        field,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub azimuth: f64,
    pub elevation: f64,
    pub config: PhaseConfiguration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<CodebookEntry>,
    source_direction: (f64, f64),
    n_azimuth: usize,
    n_elevation: usize,
    beam_range: f64,
}

impl Codebook {
    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_direction(&self) -> (f64, f64) {
        self.source_direction
    }

    pub fn beam_range(&self) -> f64 {
        self.beam_range
    }

    /// `(n_azimuth, n_elevation)`; entries are elevation-major.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_azimuth, self.n_elevation)
    }

    /// Smallest angle between boresights adjacent in the grid, or pi/2 for a
    /// single beam.
    pub fn min_adjacent_spacing(&self) -> f64 {
        let dir = |e: &CodebookEntry| {
            let (u, v) = (e.azimuth.sin(), e.elevation.sin());
            Vec3::new(u, v, (1.0 - u * u - v * v).max(0.0).sqrt())
        };
        let angle =
            |a: &CodebookEntry, b: &CodebookEntry| dir(a).dot(dir(b)).clamp(-1.0, 1.0).acos();
        let idx = |ia: usize, ie: usize| ie * self.n_azimuth + ia;
        let mut best = f64::INFINITY;
        for ie in 0..self.n_elevation {
            for ia in 0..self.n_azimuth {
                let here = &self.entries[idx(ia, ie)];
                if ia + 1 < self.n_azimuth {
                    best = best.min(angle(here, &self.entries[idx(ia + 1, ie)]));
                }
                if ie + 1 < self.n_elevation {
                    best = best.min(angle(here, &self.entries[idx(ia, ie + 1)]));
                }
            }
        }
        if best.is_finite() {
            best
        } else {
            PI / 2.0
        }
    }
}

/// One steering configuration per (elevation, azimuth) pair, each focused on
/// a virtual target `beam_range` metres out along that panel direction.
pub fn generate_codebook(
    panel: &RisPanel,
    source: Position3,
    azimuth_grid: &[f64],
    elevation_grid: &[f64],
    beam_range: f64,
    frequency_hz: f64,
) -> Result<Codebook> {
    if azimuth_grid.is_empty() || elevation_grid.is_empty() {
        return Err(Error::Domain("codebook grids must be non-empty".into()));
    }
    if !(beam_range > 0.0 && beam_range.is_finite()) {
        return Err(Error::Domain(format!(
            "beam range must be positive, got {beam_range}"
        )));
    }
    for grid in [azimuth_grid, elevation_grid] {
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(
                "codebook grid contains duplicate angles".into(),
            ));
        }
    }
    let mut entries = Vec::with_capacity(azimuth_grid.len() * elevation_grid.len());
    for &elevation in elevation_grid {
        for &azimuth in azimuth_grid {
            let target = panel.center + panel.direction(azimuth, elevation)? * beam_range;
            let config = steering_phase_profile(panel, source, target, frequency_hz)?;
            entries.push(CodebookEntry {
                azimuth,
                elevation,
                config,
            });
        }
    }
    Ok(Codebook {
        entries,
        source_direction: panel.angles_to(source),
        n_azimuth: azimuth_grid.len(),
        n_elevation: elevation_grid.len(),
        beam_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub class: Level,
    pub watts: f64,
}

/// Power class of the trade-off table and a rough DC budget.
pub fn ris_power_consumption(panel: &RisPanel) -> PowerEstimate {
    let n = panel.n_elements() as f64;
    match panel.kind {
        RisKind::Passive | RisKind::SemiPassive { .. } | RisKind::Star { .. } => PowerEstimate {
            class: Level::Low,
            watts: n * PHASE_CONTROL_W,
        },
        RisKind::Amplifying { .. } => PowerEstimate {
            class: Level::Medium,
            // Two faces plus one amplifier.
            watts: 2.0 * n * PHASE_CONTROL_W + SINGLE_AMPLIFIER_W,
        },
        RisKind::Active { .. } => PowerEstimate {
            class: Level::High,
            watts: n * (PHASE_CONTROL_W + ACTIVE_ELEMENT_AMPLIFIER_W),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::free_space_path_loss;
    use approx::assert_abs_diff_eq;

    fn panel(n_rows: usize, n_cols: usize, kind: RisKind) -> RisPanel {
        RisPanel::facing(0, Vec3::ZERO, 0.0, 0.0, n_rows, n_cols, 0.03, kind).unwrap()
    }

    #[test]
    fn facing_builds_orthonormal_frame() {
        let p = RisPanel::facing(1, Vec3::ZERO, 30.0, -10.0, 2, 2, 0.03, RisKind::Passive).unwrap();
        assert!(p.normal().is_unit());
        assert!(p.up().is_unit());
        assert!(p.normal().dot(p.up()).abs() < 1e-12);
        assert!(p.up().z > 0.0);
    }

    #[test]
    fn element_layout() {
        let one = panel(1, 1, RisKind::Passive);
        assert_eq!(element_positions(&one), vec![Vec3::ZERO]);

        let p = panel(2, 2, RisKind::Passive);
        let pts = element_positions(&p);
        assert_eq!(pts.len(), 4);
        let side = pts[0].distance(pts[1]);
        assert_abs_diff_eq!(side, 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[0].distance(pts[2]), 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[0].distance(pts[3]), 0.03 * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn single_element_cascade_is_two_friis_legs() {
        let p = panel(1, 1, RisKind::Passive)
            .with_gain_exponent(0.0)
            .unwrap();
        let link = LinkBudget::default();
        let tx = Vec3::new(100.0 * 0.6, 100.0 * 0.8, 0.0);
        let rx = Vec3::new(100.0 * 0.6, -100.0 * 0.8, 0.0);
        let cfg = PhaseConfiguration::zeros(1);
        let out = cascade_received_power(&p, &cfg, tx, rx, &link).unwrap();
        let fspl = free_space_path_loss(100.0, link.frequency_hz).unwrap();
        assert_abs_diff_eq!(out.signal_dbm, 50.0 - 2.0 * fspl, epsilon = 1e-9);
        assert_eq!(out.effective_noise_dbm, -100.0);
    }

    #[test]
    fn reflect_only_panels_reject_dark_side() {
        let p = panel(2, 2, RisKind::Passive);
        let link = LinkBudget::default();
        let cfg = PhaseConfiguration::zeros(4);
        let front = Vec3::new(10.0, 1.0, 0.0);
        let back = Vec3::new(-10.0, 1.0, 0.0);
        assert!(matches!(
            cascade_received_power(&p, &cfg, front, back, &link),
            Err(Error::Geometry(_))
        ));
        assert!(matches!(
            steering_phase_profile(&p, back, front, 5e9),
            Err(Error::Geometry(_))
        ));
        let star_t = p.with_kind(RisKind::star(StarMode::Transmit)).unwrap();
        assert!(cascade_received_power(&star_t, &cfg, front, back, &link).is_ok());
        assert!(cascade_received_power(&star_t, &cfg, front, front, &link).is_err());
    }

    #[test]
    fn dual_sided_star_uses_side_magnitudes() {
        let kind = RisKind::Star {
            mode: StarMode::DualSided,
            reflect_magnitude: 0.0,
            transmit_magnitude: 1.0,
        };
        let p = panel(2, 2, kind);
        let link = LinkBudget::default();
        let tx = Vec3::new(10.0, 3.0, 0.0);
        let same = Vec3::new(10.0, -3.0, 0.0);
        let other = Vec3::new(-10.0, -3.0, 0.0);
        let cfg = steering_phase_profile(&p, tx, same, 5e9).unwrap();
        let out = cascade_received_power(&p, &cfg, tx, same, &link).unwrap();
        assert_eq!(out.signal_dbm, f64::NEG_INFINITY);
        let cfg = steering_phase_profile(&p, tx, other, 5e9).unwrap();
        assert!(cascade_received_power(&p, &cfg, tx, other, &link)
            .unwrap()
            .signal_dbm
            .is_finite());
    }

    #[test]
    fn steering_cophases_every_element() {
        let p = panel(3, 4, RisKind::Passive);
        let link = LinkBudget::default();
        let tx = Vec3::new(40.0, 10.0, 5.0);
        let rx = Vec3::new(30.0, -20.0, -3.0);
        let cfg = steering_phase_profile(&p, tx, rx, link.frequency_hz).unwrap();
        let k = TWO_PI / link.wavelength();
        for (e, phi) in element_positions(&p).iter().zip(cfg.phases()) {
            let total = (k * (tx.distance(*e) + e.distance(rx)) + phi).rem_euclid(TWO_PI);
            assert!(total.min(TWO_PI - total) < 1e-6, "residual phase {total}");
        }
    }

    #[test]
    fn configuration_length_must_match() {
        let p = panel(2, 2, RisKind::Passive);
        let err = cascade_received_power(
            &p,
            &PhaseConfiguration::zeros(3),
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(5.0, 1.0, 0.0),
            &LinkBudget::default(),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn kind_validation() {
        assert!(RisKind::Amplifying {
            amp_gain_db: -1.0,
            noise_figure_db: 5.0,
            amplified_noise: true
        }
        .validate()
        .is_err());
        assert!(RisKind::Star {
            mode: StarMode::Reflect,
            reflect_magnitude: 1.1,
            transmit_magnitude: 1.0
        }
        .validate()
        .is_err());
        assert!(RisKind::amplifying().validate().is_ok());
    }

    #[test]
    fn power_classes() {
        let class = |k| ris_power_consumption(&panel(32, 32, k)).class;
        assert_eq!(class(RisKind::Passive), Level::Low);
        assert_eq!(class(RisKind::star(StarMode::Reflect)), Level::Low);
        assert_eq!(class(RisKind::amplifying()), Level::Medium);
        assert_eq!(class(RisKind::active(10.0)), Level::High);
        let w = |k| ris_power_consumption(&panel(32, 32, k)).watts;
        assert!(w(RisKind::Passive) < w(RisKind::amplifying()));
        assert!(w(RisKind::amplifying()) < w(RisKind::active(10.0)));
    }

    #[test]
    fn direction_round_trip() {
        let p = RisPanel::facing(
            0,
            Vec3::new(1.0, 2.0, 3.0),
            70.0,
            5.0,
            4,
            4,
            0.03,
            RisKind::Passive,
        )
        .unwrap();
        let d = p.direction(0.3, -0.2).unwrap();
        let (az, el) = p.angles_to(p.center + d * 50.0);
        assert_abs_diff_eq!(az, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(el, -0.2, epsilon = 1e-12);
        assert!(p.direction(1.2, 1.2).is_err());
    }

    #[test]
    fn codebook_layout() {
        let p = panel(4, 4, RisKind::Passive);
        let src = Vec3::new(50.0, 20.0, 0.0);
        let cb = generate_codebook(&p, src, &[0.0], &[0.0], 1000.0, 5e9).unwrap();
        assert_eq!(cb.len(), 1);
        let az: Vec<f64> = (0..36)
            .map(|i| (-87.5 + 5.0 * i as f64).to_radians())
            .collect();
        let cb = generate_codebook(&p, src, &az, &[0.0], 1000.0, 5e9).unwrap();
        assert_eq!(cb.len(), 36);
        assert_abs_diff_eq!(cb.min_adjacent_spacing(), 5f64.to_radians(), epsilon = 1e-9);
        assert!(generate_codebook(&p, src, &[0.1, 0.1], &[0.0], 1000.0, 5e9).is_err());
    }
}
