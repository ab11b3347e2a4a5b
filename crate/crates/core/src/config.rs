//! Flat `key = value` scenario files.
//!
//! Keys are dotted (`link.tx_power_dbm`, `panels[0].azimuth_deg`) and carry
//! their unit in the name. `#` starts a comment. Every key is optional;
//! unspecified values take the defaults of [`ScenarioConfig::default`]. The
//! full schema is listed in [`KEYS`] and [`PANEL_KEYS`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::propagation::{
    AtmosphereProfile, LinkBudget, MaterialProperties, Polarization, MAX_MODEL_FREQUENCY_HZ,
};
use crate::ris::{RisKind, RisPanel, StarMode, DEFAULT_ELEMENT_GAIN_EXPONENT};
use crate::scenario::{
    CodebookParams, Combining, ConfigStrategy, HeatmapOptions, Node, ReceiverGrid, Scenario,
};
use crate::terrain::{generate_landform, load_ascii_grid, HeightField, Landform, LandformSpec};

/// Top-level keys.
pub const KEYS: &[&str] = &[
    "scenario.name",
    "scenario.seed",
    "terrain.kind",
    "terrain.path",
    "terrain.n_rows",
    "terrain.n_cols",
    "terrain.cell_size_m",
    "terrain.base_elevation_m",
    "terrain.roughness_m",
    "terrain.diameter_m",
    "terrain.depth_m",
    "terrain.rim_height_m",
    "terrain.width_m",
    "terrain.length_m",
    "terrain.bend_angle_deg",
    "terrain.base_radius_m",
    "terrain.height_m",
    "terrain.top_radius_m",
    "material.conductivity_s_per_m",
    "material.relative_permittivity",
    "atmosphere.temperature_c",
    "atmosphere.pressure_mbar",
    "atmosphere.relative_humidity_pct",
    "link.frequency_hz",
    "link.tx_power_dbm",
    "link.tx_antenna_gain_dbi",
    "link.rx_antenna_gain_dbi",
    "link.lna_gain_db",
    "link.noise_power_dbm",
    "link.polarization",
    "tx.x_m",
    "tx.y_m",
    "tx.antenna_height_m",
    "grid.x_m",
    "grid.y_m",
    "grid.width_m",
    "grid.height_m",
    "grid.n_x",
    "grid.n_y",
    "grid.antenna_height_m",
    "strategy.kind",
    "strategy.combining",
    "strategy.n_azimuth",
    "strategy.n_elevation",
    "strategy.max_azimuth_deg",
    "strategy.max_elevation_deg",
    "strategy.beam_range_m",
    "strategy.noise_stddev_db",
    "sweep.panel",
    "sweep.rx_x_m",
    "sweep.rx_y_m",
    "sweep.rx_antenna_height_m",
    "sweep.noise_stddev_db",
];

/// Keys under `panels[i].`.
pub const PANEL_KEYS: &[&str] = &[
    "x_m",
    "y_m",
    "mast_height_m",
    "azimuth_deg",
    "tilt_deg",
    "rows",
    "cols",
    "element_spacing_m",
    "element_gain_exponent",
    "kind",
    "csi_available",
    "per_element_gain_db",
    "amp_gain_db",
    "noise_figure_db",
    "amplified_noise",
    "star_mode",
    "reflect_magnitude",
    "transmit_magnitude",
];

const UNIT_SUFFIXES: &[&str] = &[
    "m", "hz", "dbm", "dbi", "db", "deg", "c", "mbar", "pct", "s_per_m",
];

const MAX_PANELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerrainKind {
    Flat,
    Crater,
    Canyon,
    Hill,
    Plateau,
    File,
}

impl TerrainKind {
    fn name(self) -> &'static str {
        match self {
            TerrainKind::Flat => "flat",
            TerrainKind::Crater => "crater",
            TerrainKind::Canyon => "canyon",
            TerrainKind::Hill => "hill",
            TerrainKind::Plateau => "plateau",
            TerrainKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainConfig {
    pub kind: TerrainKind,
    pub path: Option<String>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_size_m: f64,
    pub base_elevation_m: f64,
    pub roughness_m: f64,
    pub diameter_m: f64,
    pub depth_m: f64,
    pub rim_height_m: f64,
    pub width_m: f64,
    pub length_m: f64,
    pub bend_angle_deg: f64,
    pub base_radius_m: f64,
    pub height_m: f64,
    pub top_radius_m: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            kind: TerrainKind::Flat,
            path: None,
            n_rows: 101,
            n_cols: 101,
            cell_size_m: 10.0,
            base_elevation_m: 0.0,
            roughness_m: 0.0,
            diameter_m: 2000.0,
            depth_m: 100.0,
            rim_height_m: 15.0,
            width_m: 200.0,
            length_m: 2000.0,
            bend_angle_deg: 30.0,
            base_radius_m: 300.0,
            height_m: 100.0,
            top_radius_m: 300.0,
        }
    }
}

impl TerrainConfig {
    pub fn landform(&self) -> Landform {
        match self.kind {
            TerrainKind::Flat | TerrainKind::File => Landform::Flat,
            TerrainKind::Crater => Landform::Crater {
                diameter: self.diameter_m,
                depth: self.depth_m,
                rim_height: self.rim_height_m,
            },
            TerrainKind::Canyon => Landform::Canyon {
                width: self.width_m,
                depth: self.depth_m,
                length: self.length_m,
                bend_angle_deg: self.bend_angle_deg,
            },
            TerrainKind::Hill => Landform::Hill {
                base_radius: self.base_radius_m,
                height: self.height_m,
            },
            TerrainKind::Plateau => Landform::Plateau {
                height: self.height_m,
                top_radius: self.top_radius_m,
            },
        }
    }

    /// Generates or loads the heightfield. Relative file paths resolve
    /// against `base_dir`.
    pub fn build(&self, seed: u64, base_dir: &Path) -> Result<HeightField> {
        if self.kind == TerrainKind::File {
            let rel = self.path.as_deref().ok_or_else(|| {
                Error::Configuration("terrain.kind = file needs terrain.path".into())
            })?;
            let path = base_dir.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::Configuration(format!("cannot read terrain file {}: {e}", path.display()))
            })?;
            return load_ascii_grid(&text);
        }
        let spec = LandformSpec::new(self.landform(), self.base_elevation_m, seed)
            .with_roughness(self.roughness_m);
        generate_landform(&spec, self.n_rows, self.n_cols, self.cell_size_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelKindName {
    Passive,
    SemiPassive,
    Active,
    Amplifying,
    Star,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub x_m: Option<f64>,
    pub y_m: Option<f64>,
    pub mast_height_m: f64,
    pub azimuth_deg: f64,
    pub tilt_deg: f64,
    pub rows: usize,
    pub cols: usize,
    pub element_spacing_m: f64,
    pub element_gain_exponent: f64,
    pub kind: PanelKindName,
    pub csi_available: bool,
    pub per_element_gain_db: f64,
    pub amp_gain_db: f64,
    pub noise_figure_db: f64,
    pub amplified_noise: bool,
    pub star_mode: StarMode,
    pub reflect_magnitude: f64,
    pub transmit_magnitude: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            x_m: None,
            y_m: None,
            mast_height_m: 5.0,
            azimuth_deg: 0.0,
            tilt_deg: 0.0,
            rows: 32,
            cols: 32,
            element_spacing_m: 0.03,
            element_gain_exponent: DEFAULT_ELEMENT_GAIN_EXPONENT,
            kind: PanelKindName::Amplifying,
            csi_available: true,
            per_element_gain_db: 10.0,
            amp_gain_db: 10.0,
            noise_figure_db: 5.0,
            amplified_noise: true,
            star_mode: StarMode::Reflect,
            reflect_magnitude: 1.0,
            transmit_magnitude: 1.0,
        }
    }
}

impl PanelConfig {
    pub fn ris_kind(&self) -> RisKind {
        match self.kind {
            PanelKindName::Passive => RisKind::Passive,
            PanelKindName::SemiPassive => RisKind::SemiPassive {
                csi_available: self.csi_available,
            },
            PanelKindName::Active => RisKind::Active {
                per_element_gain_db: self.per_element_gain_db,
                noise_figure_db: self.noise_figure_db,
            },
            PanelKindName::Amplifying => RisKind::Amplifying {
                amp_gain_db: self.amp_gain_db,
                noise_figure_db: self.noise_figure_db,
                amplified_noise: self.amplified_noise,
            },
            PanelKindName::Star => RisKind::Star {
                mode: self.star_mode,
                reflect_magnitude: self.reflect_magnitude,
                transmit_magnitude: self.transmit_magnitude,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub x_m: Option<f64>,
    pub y_m: Option<f64>,
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    pub n_x: usize,
    pub n_y: usize,
    pub antenna_height_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_m: None,
            y_m: None,
            width_m: None,
            height_m: None,
            n_x: 50,
            n_y: 50,
            antenna_height_m: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub codebook: bool,
    pub combining: Combining,
    pub n_azimuth: usize,
    pub n_elevation: usize,
    pub max_azimuth_deg: f64,
    pub max_elevation_deg: f64,
    pub beam_range_m: f64,
    pub noise_stddev_db: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        let p = CodebookParams::default();
        Self {
            codebook: false,
            combining: Combining::BestPath,
            n_azimuth: p.n_azimuth,
            n_elevation: p.n_elevation,
            max_azimuth_deg: p.max_azimuth.to_degrees().round(),
            max_elevation_deg: p.max_elevation.to_degrees().round(),
            beam_range_m: p.beam_range,
            noise_stddev_db: p.noise_stddev_db,
        }
    }
}

impl StrategyConfig {
    pub fn codebook_params(&self) -> CodebookParams {
        CodebookParams {
            n_azimuth: self.n_azimuth,
            n_elevation: self.n_elevation,
            max_azimuth: self.max_azimuth_deg.to_radians(),
            max_elevation: self.max_elevation_deg.to_radians(),
            beam_range: self.beam_range_m,
            noise_stddev_db: self.noise_stddev_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub panel: usize,
    pub rx_x_m: Option<f64>,
    pub rx_y_m: Option<f64>,
    pub rx_antenna_height_m: f64,
    pub noise_stddev_db: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            panel: 0,
            rx_x_m: None,
            rx_y_m: None,
            rx_antenna_height_m: 2.0,
            noise_stddev_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub terrain: TerrainConfig,
    pub material: MaterialProperties,
    pub atmosphere: AtmosphereProfile,
    pub link: LinkBudget,
    pub polarization: Polarization,
    pub tx_x_m: Option<f64>,
    pub tx_y_m: Option<f64>,
    pub tx_antenna_height_m: f64,
    pub panels: BTreeMap<usize, PanelConfig>,
    pub grid: GridConfig,
    pub strategy: StrategyConfig,
    pub sweep: SweepConfig,
    /// Directory that relative paths resolve against.
    pub base_dir: PathBuf,
    /// Line on which each key was set.
    lines: BTreeMap<String, usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            terrain: TerrainConfig::default(),
            material: MaterialProperties::default(),
            atmosphere: AtmosphereProfile::default(),
            link: LinkBudget::default(),
            polarization: Polarization::default(),
            tx_x_m: None,
            tx_y_m: None,
            tx_antenna_height_m: 2.0,
            panels: BTreeMap::new(),
            grid: GridConfig::default(),
            strategy: StrategyConfig::default(),
            sweep: SweepConfig::default(),
            base_dir: PathBuf::from("."),
            lines: BTreeMap::new(),
        }
    }
}

fn key_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::ConfigKey {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

struct Value<'a> {
    line: usize,
    key: &'a str,
    raw: &'a str,
}

impl Value<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        key_err(self.line, self.key, message)
    }

    fn f64(&self) -> Result<f64> {
        let v: f64 = self
            .raw
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a number", self.raw)))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("value must be finite"))
        }
    }

    fn positive(&self) -> Result<f64> {
        let v = self.f64()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be positive, got {v}")))
        }
    }

    fn non_negative(&self) -> Result<f64> {
        let v = self.f64()?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be non-negative, got {v}")))
        }
    }

    fn unit_interval(&self) -> Result<f64> {
        let v = self.f64()?;
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(self.err(format!("must lie in [0, 1], got {v}")))
        }
    }

    fn usize(&self) -> Result<usize> {
        self.raw
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a non-negative integer", self.raw)))
    }

    fn count(&self) -> Result<usize> {
        let v = self.usize()?;
        if v >= 1 {
            Ok(v)
        } else {
            Err(self.err("must be at least 1"))
        }
    }

    fn u64(&self) -> Result<u64> {
        self.raw
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a non-negative integer", self.raw)))
    }

    fn bool(&self) -> Result<bool> {
        match self.raw {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(format!("`{other}` is not true or false"))),
        }
    }

    fn choice<T: Copy>(&self, options: &[(&str, T)]) -> Result<T> {
        options
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(self.raw))
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.err(format!("`{}` is not one of {}", self.raw, names.join(", ")))
            })
    }
}

/// Suggests the correctly suffixed key when `key` only differs in its unit.
fn unit_mismatch<'a>(key: &str, known: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    known.into_iter().find(|k| {
        UNIT_SUFFIXES.iter().any(|u| {
            k.strip_suffix(u)
                .and_then(|s| s.strip_suffix('_'))
                .is_some_and(|stem| {
                    key != *k
                        && key
                            .strip_prefix(stem)
                            .and_then(|rest| rest.strip_prefix('_'))
                            .is_some_and(|rest| !rest.is_empty() && !rest.contains('.'))
                })
        })
    })
}

fn parse_panel_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("panels[")?;
    let (index, field) = rest.split_once("].")?;
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) || index.len() > 6 {
        return None;
    }
    Some((index.parse().ok()?, field))
}

const TERRAIN_KINDS: &[(&str, TerrainKind)] = &[
    ("flat", TerrainKind::Flat),
    ("crater", TerrainKind::Crater),
    ("canyon", TerrainKind::Canyon),
    ("hill", TerrainKind::Hill),
    ("plateau", TerrainKind::Plateau),
    ("file", TerrainKind::File),
];

const PANEL_KINDS: &[(&str, PanelKindName)] = &[
    ("passive", PanelKindName::Passive),
    ("semi_passive", PanelKindName::SemiPassive),
    ("active", PanelKindName::Active),
    ("amplifying", PanelKindName::Amplifying),
    ("star", PanelKindName::Star),
];

const STAR_MODES: &[(&str, StarMode)] = &[
    ("reflect", StarMode::Reflect),
    ("transmit", StarMode::Transmit),
    ("dual", StarMode::DualSided),
];

const POLARIZATIONS: &[(&str, Polarization)] = &[
    ("perpendicular", Polarization::Perpendicular),
    ("parallel", Polarization::Parallel),
];

const COMBININGS: &[(&str, Combining)] = &[
    ("best_path", Combining::BestPath),
    ("coherent", Combining::Coherent),
];

fn choice_name<T: PartialEq>(options: &[(&'static str, T)], value: &T) -> &'static str {
    options
        .iter()
        .find(|(_, v)| v == value)
        .map(|(n, _)| *n)
        .expect("every variant is named")
}

impl ScenarioConfig {
    /// Parses a scenario file. `base_dir` anchors relative paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = ScenarioConfig {
            base_dir: base_dir.to_path_buf(),
            ..Default::default()
        };
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            if cfg.lines.contains_key(key) {
                return Err(key_err(line, key, "key set more than once"));
            }
            cfg.set(key, value.trim(), line)?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override on top of the parsed file.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| key_err(0, assignment, "override must have the form key=value"))?;
        let key = key.trim();
        self.lines.remove(key);
        self.set(key, value.trim(), 0)
    }

    /// Sets one key. `line` is reported in diagnostics; 0 marks an override.
    pub fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<()> {
        let v = Value { line, key, raw };
        if let Some((index, field)) = parse_panel_key(key) {
            if index >= MAX_PANELS {
                return Err(v.err(format!("at most {MAX_PANELS} panels are supported")));
            }
            let panel = self.panels.entry(index).or_default();
            set_panel_field(panel, field, &v)?;
            self.lines.insert(key.to_string(), line);
            return Ok(());
        }
        let t = &mut self.terrain;
        match key {
            "scenario.name" => {
                if raw.is_empty() || raw.chars().any(|c| c.is_control()) {
                    return Err(v.err("name must be non-empty printable text"));
                }
                self.name = raw.to_string();
            }
            "scenario.seed" => self.seed = v.u64()?,
            "terrain.kind" => t.kind = v.choice(TERRAIN_KINDS)?,
            "terrain.path" => {
                if raw.is_empty() {
                    return Err(v.err("path must not be empty"));
                }
                t.path = Some(raw.to_string());
            }
            "terrain.n_rows" => t.n_rows = v.usize()?,
            "terrain.n_cols" => t.n_cols = v.usize()?,
            "terrain.cell_size_m" => t.cell_size_m = v.positive()?,
            "terrain.base_elevation_m" => t.base_elevation_m = v.f64()?,
            "terrain.roughness_m" => t.roughness_m = v.non_negative()?,
            "terrain.diameter_m" => t.diameter_m = v.positive()?,
            "terrain.depth_m" => t.depth_m = v.positive()?,
            "terrain.rim_height_m" => t.rim_height_m = v.positive()?,
            "terrain.width_m" => t.width_m = v.positive()?,
            "terrain.length_m" => t.length_m = v.positive()?,
            "terrain.bend_angle_deg" => {
                let a = v.f64()?;
                if !(0.0..=120.0).contains(&a) {
                    return Err(v.err(format!("must lie in [0, 120], got {a}")));
                }
                t.bend_angle_deg = a;
            }
            "terrain.base_radius_m" => t.base_radius_m = v.positive()?,
            "terrain.height_m" => t.height_m = v.positive()?,
            "terrain.top_radius_m" => t.top_radius_m = v.positive()?,
            "material.conductivity_s_per_m" => self.material.conductivity = v.non_negative()?,
            "material.relative_permittivity" => {
                let e = v.f64()?;
                if e < 1.0 {
                    return Err(v.err(format!("must be >= 1, got {e}")));
                }
                self.material.relative_permittivity = e;
            }
            "atmosphere.temperature_c" => self.atmosphere.temperature_c = v.f64()?,
            "atmosphere.pressure_mbar" => self.atmosphere.pressure_mbar = v.positive()?,
            "atmosphere.relative_humidity_pct" => {
                let h = v.f64()?;
                if !(0.0..=100.0).contains(&h) {
                    return Err(v.err(format!("must lie in [0, 100], got {h}")));
                }
                self.atmosphere.relative_humidity_pct = h;
            }
            "link.frequency_hz" => {
                let f = v.positive()?;
                if f > MAX_MODEL_FREQUENCY_HZ {
                    return Err(v.err(Error::UnsupportedFrequency { frequency_hz: f }.to_string()));
                }
                self.link.frequency_hz = f;
            }
            "link.tx_power_dbm" => self.link.tx_power_dbm = v.f64()?,
            "link.tx_antenna_gain_dbi" => self.link.tx_antenna_gain_dbi = v.f64()?,
            "link.rx_antenna_gain_dbi" => self.link.rx_antenna_gain_dbi = v.f64()?,
            "link.lna_gain_db" => self.link.lna_gain_db = v.f64()?,
            "link.noise_power_dbm" => self.link.noise_power_dbm = v.f64()?,
            "link.polarization" => self.polarization = v.choice(POLARIZATIONS)?,
            "tx.x_m" => self.tx_x_m = Some(v.f64()?),
            "tx.y_m" => self.tx_y_m = Some(v.f64()?),
            "tx.antenna_height_m" => self.tx_antenna_height_m = v.positive()?,
            "grid.x_m" => self.grid.x_m = Some(v.f64()?),
            "grid.y_m" => self.grid.y_m = Some(v.f64()?),
            "grid.width_m" => self.grid.width_m = Some(v.positive()?),
            "grid.height_m" => self.grid.height_m = Some(v.positive()?),
            "grid.n_x" => self.grid.n_x = v.count()?,
            "grid.n_y" => self.grid.n_y = v.count()?,
            "grid.antenna_height_m" => self.grid.antenna_height_m = v.positive()?,
            "strategy.kind" => {
                self.strategy.codebook = v.choice(&[("oracle_csi", false), ("codebook", true)])?
            }
            "strategy.combining" => self.strategy.combining = v.choice(COMBININGS)?,
            "strategy.n_azimuth" => self.strategy.n_azimuth = v.count()?,
            "strategy.n_elevation" => self.strategy.n_elevation = v.count()?,
            "strategy.max_azimuth_deg" => self.strategy.max_azimuth_deg = angle_below_90(&v)?,
            "strategy.max_elevation_deg" => self.strategy.max_elevation_deg = angle_below_90(&v)?,
            "strategy.beam_range_m" => self.strategy.beam_range_m = v.positive()?,
            "strategy.noise_stddev_db" => self.strategy.noise_stddev_db = v.non_negative()?,
            "sweep.panel" => self.sweep.panel = v.usize()?,
            "sweep.rx_x_m" => self.sweep.rx_x_m = Some(v.f64()?),
            "sweep.rx_y_m" => self.sweep.rx_y_m = Some(v.f64()?),
            "sweep.rx_antenna_height_m" => self.sweep.rx_antenna_height_m = v.positive()?,
            "sweep.noise_stddev_db" => self.sweep.noise_stddev_db = v.non_negative()?,
            _ => return Err(unknown_key(key, line)),
        }
        self.lines.insert(key.to_string(), line);
        Ok(())
    }

    /// Line a key was set on, if it was.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    fn section_line(&self, prefix: &str) -> usize {
        self.lines
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, l)| *l)
            .min()
            .unwrap_or(0)
    }

    fn wrap(&self, prefix: &str, e: Error) -> Error {
        match e {
            Error::ConfigKey { .. } => e,
            other => key_err(
                self.section_line(prefix),
                prefix.trim_end_matches('.'),
                other.to_string(),
            ),
        }
    }

    pub fn terrain(&self) -> Result<HeightField> {
        self.terrain
            .build(self.seed, &self.base_dir)
            .map_err(|e| self.wrap("terrain.", e))
    }

    /// Validated scenario, receiver grid and heatmap options.
    pub fn build(&self) -> Result<(Scenario, ReceiverGrid, HeatmapOptions)> {
        let terrain = self.terrain()?;
        self.build_on(terrain)
    }

    /// As [`build`](Self::build) on an already generated heightfield.
    pub fn build_on(
        &self,
        terrain: HeightField,
    ) -> Result<(Scenario, ReceiverGrid, HeatmapOptions)> {
        let (cx, cy) = terrain.center();
        let tx = Node::on_terrain(
            &terrain,
            self.tx_x_m.unwrap_or(cx),
            self.tx_y_m.unwrap_or(cy),
            self.tx_antenna_height_m,
        )
        .map_err(|e| self.wrap("tx.", e))?;

        let mut panels = Vec::with_capacity(self.panels.len());
        for (expected, (&index, p)) in self.panels.iter().enumerate() {
            let prefix = format!("panels[{index}].");
            if index != expected {
                return Err(key_err(
                    self.section_line(&prefix),
                    &format!("panels[{index}]"),
                    format!("panels must be numbered from 0 without gaps; panels[{expected}] is missing"),
                ));
            }
            panels.push(
                self.build_panel(index, p, &terrain)
                    .map_err(|e| self.wrap(&prefix, e))?,
            );
        }

        let [ox, oy] = terrain.origin();
        let (ex, ey) = terrain.extent();
        let grid = ReceiverGrid {
            origin: [self.grid.x_m.unwrap_or(ox), self.grid.y_m.unwrap_or(oy)],
            extent: [
                self.grid.width_m.unwrap_or(ex),
                self.grid.height_m.unwrap_or(ey),
            ],
            n_x: self.grid.n_x,
            n_y: self.grid.n_y,
            antenna_height: self.grid.antenna_height_m,
        };
        grid.validate(&terrain).map_err(|e| self.wrap("grid.", e))?;

        let mut scenario = Scenario::new(self.name.clone(), self.seed, terrain, tx);
        scenario.material = self.material;
        scenario.atmosphere = self.atmosphere;
        scenario.link = self.link;
        scenario.polarization = self.polarization;
        scenario.panels = panels;
        scenario.validate().map_err(|e| self.wrap("link.", e))?;

        let options = HeatmapOptions {
            strategy: if self.strategy.codebook {
                ConfigStrategy::Codebook(self.strategy.codebook_params())
            } else {
                ConfigStrategy::OracleCsi
            },
            combining: self.strategy.combining,
            workers: None,
        };
        Ok((scenario, grid, options))
    }

    fn build_panel(
        &self,
        index: usize,
        p: &PanelConfig,
        terrain: &HeightField,
    ) -> Result<RisPanel> {
        let missing = |k: &str| {
            key_err(
                self.section_line(&format!("panels[{index}].")),
                &format!("panels[{index}].{k}"),
                "required key is missing",
            )
        };
        let x = p.x_m.ok_or_else(|| missing("x_m"))?;
        let y = p.y_m.ok_or_else(|| missing("y_m"))?;
        let base = Node::on_terrain(terrain, x, y, p.mast_height_m)?;
        RisPanel::facing(
            index,
            base.position,
            p.azimuth_deg,
            p.tilt_deg,
            p.rows,
            p.cols,
            p.element_spacing_m,
            p.ris_kind(),
        )?
        .with_gain_exponent(p.element_gain_exponent)
    }

    /// Serializes every key, so that parsing the text reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let f = |x: f64| format!("{x:?}");
        kv("scenario.name", self.name.clone());
        kv("scenario.seed", self.seed.to_string());
        let t = &self.terrain;
        kv("terrain.kind", t.kind.name().into());
        if let Some(p) = &t.path {
            kv("terrain.path", p.clone());
        }
        kv("terrain.n_rows", t.n_rows.to_string());
        kv("terrain.n_cols", t.n_cols.to_string());
        kv("terrain.cell_size_m", f(t.cell_size_m));
        kv("terrain.base_elevation_m", f(t.base_elevation_m));
        kv("terrain.roughness_m", f(t.roughness_m));
        kv("terrain.diameter_m", f(t.diameter_m));
        kv("terrain.depth_m", f(t.depth_m));
        kv("terrain.rim_height_m", f(t.rim_height_m));
        kv("terrain.width_m", f(t.width_m));
        kv("terrain.length_m", f(t.length_m));
        kv("terrain.bend_angle_deg", f(t.bend_angle_deg));
        kv("terrain.base_radius_m", f(t.base_radius_m));
        kv("terrain.height_m", f(t.height_m));
        kv("terrain.top_radius_m", f(t.top_radius_m));
        kv(
            "material.conductivity_s_per_m",
            f(self.material.conductivity),
        );
        kv(
            "material.relative_permittivity",
            f(self.material.relative_permittivity),
        );
        kv("atmosphere.temperature_c", f(self.atmosphere.temperature_c));
        kv("atmosphere.pressure_mbar", f(self.atmosphere.pressure_mbar));
        kv(
            "atmosphere.relative_humidity_pct",
            f(self.atmosphere.relative_humidity_pct),
        );
        kv("link.frequency_hz", f(self.link.frequency_hz));
        kv("link.tx_power_dbm", f(self.link.tx_power_dbm));
        kv("link.tx_antenna_gain_dbi", f(self.link.tx_antenna_gain_dbi));
        kv("link.rx_antenna_gain_dbi", f(self.link.rx_antenna_gain_dbi));
        kv("link.lna_gain_db", f(self.link.lna_gain_db));
        kv("link.noise_power_dbm", f(self.link.noise_power_dbm));
        kv(
            "link.polarization",
            choice_name(POLARIZATIONS, &self.polarization).into(),
        );
        if let Some(x) = self.tx_x_m {
            kv("tx.x_m", f(x));
        }
        if let Some(y) = self.tx_y_m {
            kv("tx.y_m", f(y));
        }
        kv("tx.antenna_height_m", f(self.tx_antenna_height_m));
        for (i, p) in &self.panels {
            let mut pk = |k: &str, v: String| kv(&format!("panels[{i}].{k}"), v);
            if let Some(x) = p.x_m {
                pk("x_m", f(x));
            }
            if let Some(y) = p.y_m {
                pk("y_m", f(y));
            }
            pk("mast_height_m", f(p.mast_height_m));
            pk("azimuth_deg", f(p.azimuth_deg));
            pk("tilt_deg", f(p.tilt_deg));
            pk("rows", p.rows.to_string());
            pk("cols", p.cols.to_string());
            pk("element_spacing_m", f(p.element_spacing_m));
            pk("element_gain_exponent", f(p.element_gain_exponent));
            pk("kind", choice_name(PANEL_KINDS, &p.kind).into());
            pk("csi_available", p.csi_available.to_string());
            pk("per_element_gain_db", f(p.per_element_gain_db));
            pk("amp_gain_db", f(p.amp_gain_db));
            pk("noise_figure_db", f(p.noise_figure_db));
            pk("amplified_noise", p.amplified_noise.to_string());
            pk("star_mode", choice_name(STAR_MODES, &p.star_mode).into());
            pk("reflect_magnitude", f(p.reflect_magnitude));
            pk("transmit_magnitude", f(p.transmit_magnitude));
        }
        let g = &self.grid;
        for (k, v) in [
            ("grid.x_m", g.x_m),
            ("grid.y_m", g.y_m),
            ("grid.width_m", g.width_m),
            ("grid.height_m", g.height_m),
        ] {
            if let Some(v) = v {
                kv(k, f(v));
            }
        }
        kv("grid.n_x", g.n_x.to_string());
        kv("grid.n_y", g.n_y.to_string());
        kv("grid.antenna_height_m", f(g.antenna_height_m));
        let s = &self.strategy;
        kv(
            "strategy.kind",
            if s.codebook { "codebook" } else { "oracle_csi" }.into(),
        );
        kv(
            "strategy.combining",
            choice_name(COMBININGS, &s.combining).into(),
        );
        kv("strategy.n_azimuth", s.n_azimuth.to_string());
        kv("strategy.n_elevation", s.n_elevation.to_string());
        kv("strategy.max_azimuth_deg", f(s.max_azimuth_deg));
        kv("strategy.max_elevation_deg", f(s.max_elevation_deg));
        kv("strategy.beam_range_m", f(s.beam_range_m));
        kv("strategy.noise_stddev_db", f(s.noise_stddev_db));
        let w = &self.sweep;
        kv("sweep.panel", w.panel.to_string());
        if let Some(x) = w.rx_x_m {
            kv("sweep.rx_x_m", f(x));
        }
        if let Some(y) = w.rx_y_m {
            kv("sweep.rx_y_m", f(y));
        }
        kv("sweep.rx_antenna_height_m", f(w.rx_antenna_height_m));
        kv("sweep.noise_stddev_db", f(w.noise_stddev_db));
        out
    }

    /// Desk-scale crater: 2 km across, 100 m deep with a 15 m rim on a
    /// 3.2 km square. The transmitter stands outside the north-west rim; one
    /// panel on a 10 m mast on the western crest faces north-east so that
    /// both the transmitter and the bowl lie in front of it. Receivers tile a
    /// 1.2 km square over the bowl floor.
    pub fn reference() -> Self {
        let mut cfg = ScenarioConfig {
            name: "reference_crater".into(),
            seed: 2024,
            ..Default::default()
        };
        cfg.terrain = TerrainConfig {
            kind: TerrainKind::Crater,
            n_rows: 321,
            n_cols: 321,
            cell_size_m: 10.0,
            roughness_m: crate::terrain::DEFAULT_ROUGHNESS_M,
            diameter_m: 2000.0,
            depth_m: 100.0,
            rim_height_m: 15.0,
            ..Default::default()
        };
        cfg.tx_x_m = Some(REFERENCE_TX[0]);
        cfg.tx_y_m = Some(REFERENCE_TX[1]);
        cfg.tx_antenna_height_m = 2.0;
        cfg.panels.insert(
            0,
            PanelConfig {
                x_m: Some(REFERENCE_PANEL[0]),
                y_m: Some(REFERENCE_PANEL[1]),
                mast_height_m: 10.0,
                azimuth_deg: 45.0,
                tilt_deg: -5.0,
                ..Default::default()
            },
        );
        cfg.grid = GridConfig {
            x_m: Some(1000.0),
            y_m: Some(1000.0),
            width_m: Some(1200.0),
            height_m: Some(1200.0),
            n_x: 200,
            n_y: 200,
            antenna_height_m: 2.0,
        };
        cfg.sweep.rx_x_m = Some(1600.0);
        cfg.sweep.rx_y_m = Some(1600.0);
        cfg
    }
}

const REFERENCE_TX: [f64; 2] = [600.0, 2100.0];
const REFERENCE_PANEL: [f64; 2] = [600.0, 1600.0];

fn angle_below_90(v: &Value<'_>) -> Result<f64> {
    let a = v.non_negative()?;
    if a < 90.0 {
        Ok(a)
    } else {
        Err(v.err(format!("must lie in [0, 90), got {a}")))
    }
}

fn set_panel_field(p: &mut PanelConfig, field: &str, v: &Value<'_>) -> Result<()> {
    match field {
        "x_m" => p.x_m = Some(v.f64()?),
        "y_m" => p.y_m = Some(v.f64()?),
        "mast_height_m" => p.mast_height_m = v.positive()?,
        "azimuth_deg" => p.azimuth_deg = v.f64()?,
        "tilt_deg" => {
            let t = v.f64()?;
            if !(t > -90.0 && t < 90.0) {
                return Err(v.err(format!("must lie strictly between -90 and 90, got {t}")));
            }
            p.tilt_deg = t;
        }
        "rows" => p.rows = v.count()?,
        "cols" => p.cols = v.count()?,
        "element_spacing_m" => p.element_spacing_m = v.positive()?,
        "element_gain_exponent" => p.element_gain_exponent = v.non_negative()?,
        "kind" => p.kind = v.choice(PANEL_KINDS)?,
        "csi_available" => p.csi_available = v.bool()?,
        "per_element_gain_db" => p.per_element_gain_db = v.f64()?,
        "amp_gain_db" => p.amp_gain_db = v.non_negative()?,
        "noise_figure_db" => p.noise_figure_db = v.non_negative()?,
        "amplified_noise" => p.amplified_noise = v.bool()?,
        "star_mode" => p.star_mode = v.choice(STAR_MODES)?,
        "reflect_magnitude" => p.reflect_magnitude = v.unit_interval()?,
        "transmit_magnitude" => p.transmit_magnitude = v.unit_interval()?,
        _ => {
            let prefix = &v.key[..v.key.len() - field.len()];
            let known: Vec<String> = PANEL_KEYS.iter().map(|k| format!("{prefix}{k}")).collect();
            return Err(
                match unit_mismatch(v.key, known.iter().map(String::as_str)) {
                    Some(k) => v.err(format!("unit suffix mismatch; expected `{k}`")),
                    None => v.err("unknown key"),
                },
            );
        }
    }
    if p.rows
        .checked_mul(p.cols)
        .is_none_or(|n| n > crate::ris::MAX_ELEMENTS)
    {
        return Err(v.err(format!(
            "panel has more than {} elements",
            crate::ris::MAX_ELEMENTS
        )));
    }
    Ok(())
}

fn unknown_key(key: &str, line: usize) -> Error {
    match unit_mismatch(key, KEYS.iter().copied()) {
        Some(k) => key_err(line, key, format!("unit suffix mismatch; expected `{k}`")),
        None => key_err(line, key, "unknown key"),
    }
}

/// Parses a scenario file and builds it. See [`ScenarioConfig::parse`].
pub fn parse_config(
    text: &str,
    base_dir: &Path,
) -> Result<(Scenario, ReceiverGrid, HeatmapOptions)> {
    ScenarioConfig::parse(text, base_dir)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = parse("terrain.kind = flat\n").unwrap();
        let (s, grid, opts) = cfg.build().unwrap();
        assert_eq!(s.link, LinkBudget::default());
        assert_eq!(s.material, MaterialProperties::MARS_REGOLITH);
        assert_eq!(s.tx.antenna_height, 2.0);
        assert!(s.panels.is_empty());
        assert_eq!(grid.n_x, 50);
        assert_eq!(opts.strategy, ConfigStrategy::OracleCsi);
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg =
            parse("# header\n\n  link.tx_power_dbm=12 # trailing\nscenario.seed = 9\n").unwrap();
        assert_eq!(cfg.link.tx_power_dbm, 12.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.line_of("scenario.seed"), Some(4));
    }

    #[test]
    fn frequency_guard() {
        let err = parse("link.frequency_hz=10e9").unwrap_err();
        match err {
            Error::ConfigKey { line, key, message } => {
                assert_eq!(line, 1);
                assert_eq!(key, "link.frequency_hz");
                assert!(message.contains("unsupported frequency"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_amp_gain_is_rejected() {
        let err = parse("panels[0].kind=amplifying\npanels[0].amp_gain_db=-3").unwrap_err();
        assert!(
            matches!(err, Error::ConfigKey { line: 2, ref key, .. } if key == "panels[0].amp_gain_db")
        );
    }

    #[test]
    fn unknown_and_mismatched_keys() {
        match parse("link.frequency_ghz = 5").unwrap_err() {
            Error::ConfigKey { message, .. } => {
                assert!(message.contains("link.frequency_hz"), "{message}")
            }
            e => panic!("{e:?}"),
        }
        match parse("a=1\nlink.bandwidth_hz = 5").unwrap_err() {
            Error::ConfigKey { line, message, .. } => {
                assert_eq!(line, 1);
                assert_eq!(message, "unknown key");
            }
            e => panic!("{e:?}"),
        }
        match parse("panels[1].mast_height_ft = 5").unwrap_err() {
            Error::ConfigKey { message, .. } => {
                assert!(message.contains("panels[1].mast_height_m"), "{message}")
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(
            parse("no equals sign"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("scenario.seed=1\nscenario.seed=2"),
            Err(Error::ConfigKey { line: 2, .. })
        ));
    }

    #[test]
    fn panel_gaps_and_missing_positions() {
        let err = parse("panels[1].x_m=5\npanels[1].y_m=5")
            .unwrap()
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::ConfigKey { ref key, .. } if key == "panels[1]"));
        let err = parse("panels[0].x_m=5").unwrap().build().unwrap_err();
        assert!(matches!(err, Error::ConfigKey { ref key, .. } if key == "panels[0].y_m"));
    }

    #[test]
    fn text_round_trip() {
        let cfg = ScenarioConfig::reference();
        let back = parse(&cfg.to_text()).unwrap();
        assert_eq!(back.to_text(), cfg.to_text());
        let mut a = back.clone();
        let mut b = cfg.clone();
        a.lines.clear();
        b.lines.clear();
        assert_eq!(a, b);
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = parse("link.tx_power_dbm = 10").unwrap();
        cfg.apply_override("link.tx_power_dbm=13").unwrap();
        assert_eq!(cfg.link.tx_power_dbm, 13.0);
        assert!(matches!(
            cfg.apply_override("link.power=1"),
            Err(Error::ConfigKey { line: 0, .. })
        ));
        assert!(cfg.apply_override("no_equals").is_err());
    }
}
