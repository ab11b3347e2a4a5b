//! Channel model: material response, Fresnel ground reflection, free-space
//! loss, coherent multipath summation and SNR.
//!
//! Public quantities are in dB / dBm. Field amplitudes are square roots of
//! milliwatts so that `amplitude^2` is the received power of a contribution.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Position3, Vec3};
use crate::terrain::HeightField;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Upper edge of the frequency range where atmospheric loss is taken as zero.
pub const MAX_MODEL_FREQUENCY_HZ: f64 = 6e9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Sum of two powers given in dBm.
pub fn power_sum_dbm(a: f64, b: f64) -> f64 {
    linear_to_db(db_to_linear(a) + db_to_linear(b))
}

pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProperties {
    /// S/m
    pub conductivity: f64,
    pub relative_permittivity: f64,
}

impl MaterialProperties {
    pub const MARS_REGOLITH: MaterialProperties = MaterialProperties {
        conductivity: 1e-8,
        relative_permittivity: 4.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.conductivity >= 0.0 && self.conductivity.is_finite()) {
            return Err(Error::Domain(format!(
                "conductivity must be non-negative, got {}",
                self.conductivity
            )));
        }
        if !(self.relative_permittivity >= 1.0 && self.relative_permittivity.is_finite()) {
            return Err(Error::Domain(format!(
                "relative permittivity must be >= 1, got {}",
                self.relative_permittivity
            )));
        }
        Ok(())
    }
}

impl Default for MaterialProperties {
    fn default() -> Self {
        Self::MARS_REGOLITH
    }
}

/// Recorded atmospheric state. Carried as scenario metadata; its loss is zero
/// over the supported band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereProfile {
    pub temperature_c: f64,
    pub pressure_mbar: f64,
    pub relative_humidity_pct: f64,
}

impl AtmosphereProfile {
    pub const MARS: AtmosphereProfile = AtmosphereProfile {
        temperature_c: -63.0,
        pressure_mbar: 6.1,
        relative_humidity_pct: 20.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !self.temperature_c.is_finite() {
            return Err(Error::Domain("temperature must be finite".into()));
        }
        if !(self.pressure_mbar > 0.0 && self.pressure_mbar.is_finite()) {
            return Err(Error::Domain(format!(
                "pressure must be positive, got {}",
                self.pressure_mbar
            )));
        }
        if !(0.0..=100.0).contains(&self.relative_humidity_pct) {
            return Err(Error::Domain(format!(
                "relative humidity must lie in [0, 100] %, got {}",
                self.relative_humidity_pct
            )));
        }
        Ok(())
    }
}

impl Default for AtmosphereProfile {
    fn default() -> Self {
        Self::MARS
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub frequency_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    pub lna_gain_db: f64,
    pub noise_power_dbm: f64,
}

impl LinkBudget {
    pub fn wavelength(&self) -> f64 {
        wavelength(self.frequency_hz)
    }

    /// Transmit power plus both antenna gains, dBm.
    pub fn eirp_plus_rx_gain_dbm(&self) -> f64 {
        self.tx_power_dbm + self.tx_antenna_gain_dbi + self.rx_antenna_gain_dbi
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::Domain(format!(
                "frequency must be positive, got {}",
                self.frequency_hz
            )));
        }
        for (name, v) in [
            ("transmit power", self.tx_power_dbm),
            ("transmit antenna gain", self.tx_antenna_gain_dbi),
            ("receive antenna gain", self.rx_antenna_gain_dbi),
            ("LNA gain", self.lna_gain_db),
            ("noise power", self.noise_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            frequency_hz: 5e9,
            tx_power_dbm: 10.0,
            tx_antenna_gain_dbi: 20.0,
            rx_antenna_gain_dbi: 20.0,
            lna_gain_db: 10.0,
            noise_power_dbm: -100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarization {
    /// Electric field perpendicular to the plane of incidence (TE).
    #[default]
    Perpendicular,
    /// Electric field in the plane of incidence (TM).
    Parallel,
}

/// `eps_r - j * sigma / (omega * eps0)`.
pub fn complex_permittivity(mat: &MaterialProperties, frequency_hz: f64) -> Complex64 {
    let omega = 2.0 * PI * frequency_hz;
    Complex64::new(
        mat.relative_permittivity,
        -mat.conductivity / (omega * VACUUM_PERMITTIVITY),
    )
}

/// Fresnel reflection coefficient of a half-space with complex relative
/// permittivity `eps`, for an incidence angle measured from the surface normal.
pub fn fresnel_reflection(
    eps: Complex64,
    incidence_angle: f64,
    polarization: Polarization,
) -> Result<Complex64> {
    if !(0.0..PI / 2.0).contains(&incidence_angle) {
        return Err(Error::Domain(format!(
            "incidence angle must lie in [0, pi/2), got {incidence_angle}"
        )));
    }
    let cos_i = incidence_angle.cos();
    let sin2 = incidence_angle.sin().powi(2);
    let root = (eps - sin2).sqrt();
    Ok(match polarization {
        Polarization::Perpendicular => (cos_i - root) / (cos_i + root),
        Polarization::Parallel => (eps * cos_i - root) / (eps * cos_i + root),
    })
}

/// `20 log10(4 pi d f / c)`.
pub fn free_space_path_loss(distance_m: f64, frequency_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!(
            "path-loss distance must be positive, got {distance_m}"
        )));
    }
    if !(frequency_hz > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {frequency_hz}"
        )));
    }
    Ok(20.0 * (4.0 * PI * distance_m * frequency_hz / SPEED_OF_LIGHT).log10())
}

/// Gaseous and dust loss. Zero over the supported band; frequencies above
/// 6 GHz are refused rather than silently modelled.
pub fn atmospheric_attenuation(
    _profile: &AtmosphereProfile,
    frequency_hz: f64,
    _distance_m: f64,
) -> Result<f64> {
    if frequency_hz > MAX_MODEL_FREQUENCY_HZ || !frequency_hz.is_finite() {
        return Err(Error::UnsupportedFrequency { frequency_hz });
    }
    Ok(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    GroundReflection {
        incidence_angle: f64,
        polarization: Polarization,
    },
    RisInteraction {
        panel_id: usize,
        element_id: usize,
    },
}

/// Transmitter, interaction points and receiver, in travel order.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    vertices: Vec<Position3>,
    interactions: Vec<Interaction>,
    total_length: f64,
}

impl PropagationPath {
    /// `interactions[i]` happens at `vertices[i + 1]`.
    pub fn new(vertices: Vec<Position3>, interactions: Vec<Interaction>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Domain("a path needs at least two vertices".into()));
        }
        if interactions.len() != vertices.len() - 2 {
            return Err(Error::Domain(format!(
                "{} vertices need {} interactions, got {}",
                vertices.len(),
                vertices.len() - 2,
                interactions.len()
            )));
        }
        let total_length = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
        Ok(Self {
            vertices,
            interactions,
            total_length,
        })
    }

    pub fn direct(tx: Position3, rx: Position3) -> Self {
        Self::new(vec![tx, rx], Vec::new()).expect("two vertices")
    }

    pub fn vertices(&self) -> &[Position3] {
        &self.vertices
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }
}

/// One coherent phasor: `amplitude * exp(j * phase)`, amplitude in sqrt(mW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldContribution {
    pub amplitude: f64,
    pub phase: f64,
}

impl FieldContribution {
    pub fn from_phasor(z: Complex64) -> Self {
        Self {
            amplitude: z.norm(),
            phase: z.arg().rem_euclid(2.0 * PI),
        }
    }

    pub fn from_power_dbm(power_dbm: f64, phase: f64) -> Self {
        Self {
            amplitude: db_to_linear(power_dbm).sqrt(),
            phase: phase.rem_euclid(2.0 * PI),
        }
    }

    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    pub fn power_dbm(&self) -> f64 {
        linear_to_db(self.amplitude * self.amplitude)
    }
}

/// Coherent field of a terrain path: Friis over the unfolded length, scaled by
/// each ground reflection coefficient.
pub fn path_field(
    path: &PropagationPath,
    link: &LinkBudget,
    terrain_material: &MaterialProperties,
) -> Result<FieldContribution> {
    let lambda = link.wavelength();
    let fspl = free_space_path_loss(path.total_length(), link.frequency_hz)?;
    let power_dbm = link.eirp_plus_rx_gain_dbm() - fspl;
    let eps = complex_permittivity(terrain_material, link.frequency_hz);
    let mut coefficient = Complex64::new(1.0, 0.0);
    for interaction in path.interactions() {
        match *interaction {
            Interaction::GroundReflection {
                incidence_angle,
                polarization,
            } => coefficient *= fresnel_reflection(eps, incidence_angle, polarization)?,
            Interaction::RisInteraction { .. } => return Err(Error::DelegatedInteraction),
        }
    }
    let propagation_phase = 2.0 * PI * (path.total_length() / lambda).fract();
    let base = Complex64::from_polar(db_to_linear(power_dbm).sqrt(), propagation_phase);
    Ok(FieldContribution::from_phasor(base * coefficient))
}

/// Coherent sum of contributions in dBm; `-inf` when there is nothing to sum.
pub fn aggregate_power(contributions: &[FieldContribution]) -> f64 {
    if contributions.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sum: Complex64 = contributions.iter().map(FieldContribution::phasor).sum();
    linear_to_db(sum.norm_sqr())
}

/// SNR with the receiver LNA applied to the signal against a fixed noise
/// floor. Pass an effective noise power for chains that inject their own noise.
pub fn snr(received_power_dbm: f64, noise_power_dbm: f64, lna_gain_db: f64) -> f64 {
    received_power_dbm + lna_gain_db - noise_power_dbm
}

/// Single ground bounce between `a` and `b` found with the image method on the
/// tangent plane of the bounce cell. Returns `None` when no valid, unblocked
/// bounce exists.
pub fn ground_bounce_path(
    terrain: &HeightField,
    a: Position3,
    b: Position3,
    polarization: Polarization,
) -> Result<Option<PropagationPath>> {
    let ha = terrain.height_above(a)?;
    let hb = terrain.height_above(b)?;
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(None);
    }
    let frac = ha / (ha + hb);
    let mut p = (a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac);
    let tol = 1e-6 * terrain.cell_size();
    for _ in 0..16 {
        let ground = terrain.sample_elevation(p.0, p.1)?;
        let n = terrain.surface_normal(p.0, p.1)?;
        let q = Vec3::new(p.0, p.1, ground);
        let da = (a - q).dot(n);
        let db = (b - q).dot(n);
        if da <= 0.0 || db <= 0.0 {
            return Ok(None);
        }
        let image = b - n * (2.0 * db);
        let hit = a + (image - a) * (da / (da + db));
        if !terrain.contains(hit.x, hit.y) {
            return Ok(None);
        }
        let moved = ((hit.x - p.0).powi(2) + (hit.y - p.1).powi(2)).sqrt();
        p = (hit.x, hit.y);
        if moved <= tol {
            break;
        }
    }
    let bounce = Vec3::new(p.0, p.1, terrain.sample_elevation(p.0, p.1)?);
    let n = terrain.surface_normal(p.0, p.1)?;
    let incoming = match (a - bounce).normalized() {
        Some(v) => v,
        None => return Ok(None),
    };
    let cos_i = incoming.dot(n);
    if cos_i <= 0.0 || (b - bounce).dot(n) <= 0.0 {
        return Ok(None);
    }
    if !terrain.line_of_sight(a, bounce, 0.0)? || !terrain.line_of_sight(bounce, b, 0.0)? {
        return Ok(None);
    }
    let path = PropagationPath::new(
        vec![a, bounce, b],
        vec![Interaction::GroundReflection {
            incidence_angle: cos_i.clamp(-1.0, 1.0).acos(),
            polarization,
        }],
    )?;
    Ok(Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lossless_permittivity_is_real() {
        let eps = complex_permittivity(
            &MaterialProperties {
                conductivity: 0.0,
                relative_permittivity: 4.0,
            },
            5e9,
        );
        assert_eq!(eps, Complex64::new(4.0, 0.0));
    }

    #[test]
    fn mars_permittivity_at_five_ghz() {
        let eps = complex_permittivity(&MaterialProperties::MARS_REGOLITH, 5e9);
        let expected = -1e-8 / (2.0 * PI * 5e9 * 8.854_187_812_8e-12);
        assert_eq!(eps.re, 4.0);
        assert_abs_diff_eq!(eps.im, expected, epsilon = 1e-20);
        assert_abs_diff_eq!(eps.im, -3.6e-8, epsilon = 0.01e-8);
        let low = complex_permittivity(
            &MaterialProperties {
                conductivity: 1e-12,
                relative_permittivity: 4.0,
            },
            5e9,
        );
        assert_abs_diff_eq!(low.im, -3.6e-12, epsilon = 0.01e-12);
    }

    #[test]
    fn fresnel_reference_points() {
        let eps = Complex64::new(4.0, 0.0);
        let g = fresnel_reflection(eps, 0.0, Polarization::Perpendicular).unwrap();
        assert_abs_diff_eq!(g.re, -1.0 / 3.0, epsilon = 1e-12);
        let brewster = 2f64.atan();
        let g = fresnel_reflection(eps, brewster, Polarization::Parallel).unwrap();
        assert!(g.norm() < 1e-6);
        let lossy = complex_permittivity(&MaterialProperties::MARS_REGOLITH, 5e9);
        for pol in [Polarization::Perpendicular, Polarization::Parallel] {
            let g = fresnel_reflection(lossy, 89.999f64.to_radians(), pol).unwrap();
            assert!((g.norm() - 1.0).abs() < 1e-3);
        }
        assert!(fresnel_reflection(eps, PI / 2.0, Polarization::Parallel).is_err());
    }

    #[test]
    fn fspl_reference_points() {
        let f = 5e9;
        let unit = SPEED_OF_LIGHT / (4.0 * PI * f);
        assert_abs_diff_eq!(free_space_path_loss(unit, f).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            free_space_path_loss(1000.0, f).unwrap(),
            106.42,
            epsilon = 0.01
        );
        assert!(matches!(
            free_space_path_loss(0.0, f),
            Err(Error::Domain(_))
        ));
        assert!(free_space_path_loss(-1.0, f).is_err());
    }

    #[test]
    fn atmosphere_is_transparent_below_six_ghz() {
        let mars = AtmosphereProfile::MARS;
        assert_eq!(atmospheric_attenuation(&mars, 5e9, 10_000.0).unwrap(), 0.0);
        assert_eq!(atmospheric_attenuation(&mars, 1e9, 10.0).unwrap(), 0.0);
        assert!(matches!(
            atmospheric_attenuation(&mars, 10e9, 10.0),
            Err(Error::UnsupportedFrequency { .. })
        ));
    }

    #[test]
    fn direct_path_friis() {
        let link = LinkBudget::default();
        let path = PropagationPath::direct(Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0));
        let field = path_field(&path, &link, &MaterialProperties::MARS_REGOLITH).unwrap();
        assert_abs_diff_eq!(field.power_dbm(), -36.42, epsilon = 0.01);
        assert_abs_diff_eq!(
            field.power_dbm(),
            50.0 - free_space_path_loss(100.0, 5e9).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn bounce_scales_amplitude_by_coefficient() {
        let link = LinkBudget::default();
        let lossless = MaterialProperties {
            conductivity: 0.0,
            relative_permittivity: 4.0,
        };
        let direct = PropagationPath::direct(Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0));
        let bounce = PropagationPath::new(
            vec![
                Vec3::ZERO,
                Vec3::new(50.0, 0.0, 0.0),
                Vec3::new(100.0, 0.0, 0.0),
            ],
            vec![Interaction::GroundReflection {
                incidence_angle: 0.0,
                polarization: Polarization::Perpendicular,
            }],
        )
        .unwrap();
        let d = path_field(&direct, &link, &lossless).unwrap();
        let b = path_field(&bounce, &link, &lossless).unwrap();
        assert_abs_diff_eq!(b.amplitude, d.amplitude / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn ris_interactions_are_delegated() {
        let path = PropagationPath::new(
            vec![
                Vec3::ZERO,
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
            ],
            vec![Interaction::RisInteraction {
                panel_id: 0,
                element_id: 3,
            }],
        )
        .unwrap();
        assert_eq!(
            path_field(
                &path,
                &LinkBudget::default(),
                &MaterialProperties::default()
            ),
            Err(Error::DelegatedInteraction)
        );
    }

    #[test]
    fn half_wavelength_offset_cancels() {
        let link = LinkBudget::default();
        let mat = MaterialProperties::default();
        let lambda = link.wavelength();
        let a = path_field(
            &PropagationPath::direct(Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0)),
            &link,
            &mat,
        )
        .unwrap();
        let b = path_field(
            &PropagationPath::direct(Vec3::ZERO, Vec3::new(100.0 + lambda / 2.0, 0.0, 0.0)),
            &link,
            &mat,
        )
        .unwrap();
        let equal_b = FieldContribution {
            amplitude: a.amplitude,
            ..b
        };
        let p = aggregate_power(&[a, equal_b]);
        assert!(p < a.power_dbm() - 100.0, "residual {p}");
    }

    #[test]
    fn aggregate_basics() {
        assert_eq!(aggregate_power(&[]), f64::NEG_INFINITY);
        let c = FieldContribution::from_power_dbm(-40.0, 1.0);
        assert_abs_diff_eq!(aggregate_power(&[c]), -40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            aggregate_power(&[c, c]),
            -40.0 + 20.0 * 2f64.log10(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr(-60.0, -100.0, 0.0), 40.0);
        assert_eq!(snr(-70.0, -100.0, 10.0), 40.0);
        assert_eq!(snr(-100.0, -100.0, 0.0), 0.0);
    }

    #[test]
    fn flat_ground_bounce_geometry() {
        let hf = HeightField::flat([0.0, 0.0], 10.0, 21, 21, 0.0).unwrap();
        let a = Vec3::new(20.0, 100.0, 10.0);
        let b = Vec3::new(180.0, 100.0, 30.0);
        let path = ground_bounce_path(&hf, a, b, Polarization::Perpendicular)
            .unwrap()
            .unwrap();
        let p = path.vertices()[1];
        // Specular point splits the horizontal run in the ratio of heights.
        assert_abs_diff_eq!(p.x, 20.0 + 160.0 * 0.25, epsilon = 1e-6);
        let image_len = ((160.0f64).powi(2) + 40.0f64.powi(2)).sqrt();
        assert_abs_diff_eq!(path.total_length(), image_len, epsilon = 1e-6);
    }
}
