//! Scenario assembly, SNR heatmaps, RIS-kind comparisons and the landform
//! recommender.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Position3, Vec3};
use crate::localization::{beam_sweep, estimate_angle, sine_space_grid, SweepContext};
use crate::propagation::{
    atmospheric_attenuation, db_to_linear, ground_bounce_path, linear_to_db, path_field, snr,
    AtmosphereProfile, LinkBudget, MaterialProperties, Polarization, PropagationPath,
};
use crate::ris::{
    cascade_received_power, generate_codebook, steering_phase_profile, Codebook, Level,
    PhaseConfiguration, RisFamily, RisKind, RisPanel,
};
use crate::terrain::HeightField;

/// Cells whose SNR falls below this are reported as not covered.
pub const NO_COVERAGE_SNR_DB: f64 = -20.0;

/// A terminal standing `antenna_height` metres above the terrain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub position: Position3,
    pub antenna_height: f64,
}

impl Node {
    pub fn on_terrain(terrain: &HeightField, x: f64, y: f64, antenna_height: f64) -> Result<Self> {
        if !(antenna_height > 0.0 && antenna_height.is_finite()) {
            return Err(Error::InvalidPosition(format!(
                "antenna height must be positive, got {antenna_height}"
            )));
        }
        let ground = terrain.sample_elevation(x, y)?;
        Ok(Self {
            position: Vec3::new(x, y, ground + antenna_height),
            antenna_height,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub terrain: HeightField,
    pub material: MaterialProperties,
    pub atmosphere: AtmosphereProfile,
    pub link: LinkBudget,
    pub polarization: Polarization,
    pub tx: Node,
    pub panels: Vec<RisPanel>,
}

impl Scenario {
    /// Scenario with the default Mars material, atmosphere and link budget.
    pub fn new(name: impl Into<String>, seed: u64, terrain: HeightField, tx: Node) -> Self {
        Self {
            name: name.into(),
            seed,
            terrain,
            material: MaterialProperties::default(),
            atmosphere: AtmosphereProfile::default(),
            link: LinkBudget::default(),
            polarization: Polarization::default(),
            tx,
            panels: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.atmosphere.validate()?;
        self.link.validate()?;
        atmospheric_attenuation(&self.atmosphere, self.link.frequency_hz, 1.0)?;
        if !(self.terrain.height_above(self.tx.position)? > 0.0) {
            return Err(Error::InvalidPosition(
                "transmitter is not above the terrain".into(),
            ));
        }
        for (i, panel) in self.panels.iter().enumerate() {
            panel.validate()?;
            if !(self.terrain.height_above(panel.center)? > 0.0) {
                return Err(Error::InvalidPosition(format!(
                    "panel {} centre is not above the terrain",
                    panel.id
                )));
            }
            if self.panels[..i].iter().any(|p| p.id == panel.id) {
                return Err(Error::Configuration(format!(
                    "duplicate panel id {}",
                    panel.id
                )));
            }
        }
        Ok(())
    }

    /// The same scenario with every panel switched to `kind`.
    pub fn with_panel_kind(&self, kind: RisKind) -> Result<Self> {
        let mut s = self.clone();
        s.panels = self
            .panels
            .iter()
            .map(|p| p.with_kind(kind))
            .collect::<Result<_>>()?;
        Ok(s)
    }
}

/// Receivers at the centres of an `n_x x n_y` tiling of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverGrid {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub n_x: usize,
    pub n_y: usize,
    pub antenna_height: f64,
}

impl ReceiverGrid {
    pub fn validate(&self, terrain: &HeightField) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::Dimension(
                "receiver grid needs at least one cell".into(),
            ));
        }
        if self
            .n_x
            .checked_mul(self.n_y)
            .is_none_or(|n| n > crate::terrain::MAX_NODES)
        {
            return Err(Error::Dimension("receiver grid is too large".into()));
        }
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(Error::Dimension(
                "receiver grid extent must be positive".into(),
            ));
        }
        if !(self.antenna_height > 0.0 && self.antenna_height.is_finite()) {
            return Err(Error::InvalidPosition(
                "receiver antenna height must be positive".into(),
            ));
        }
        let [x0, y0] = self.origin;
        for (x, y) in [(x0, y0), (x0 + self.extent[0], y0 + self.extent[1])] {
            if !terrain.contains(x, y) {
                return Err(Error::OutOfBounds { x, y });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Horizontal position of cell `index` (row-major, y outer).
    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (iy, ix) = (index / self.n_x, index % self.n_x);
        (
            self.origin[0] + (ix as f64 + 0.5) * self.extent[0] / self.n_x as f64,
            self.origin[1] + (iy as f64 + 0.5) * self.extent[1] / self.n_y as f64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookParams {
    pub n_azimuth: usize,
    pub n_elevation: usize,
    /// Largest boresight azimuth magnitude, rad.
    pub max_azimuth: f64,
    pub max_elevation: f64,
    pub beam_range: f64,
    pub noise_stddev_db: f64,
}

impl Default for CodebookParams {
    fn default() -> Self {
        Self {
            n_azimuth: 36,
            n_elevation: 5,
            max_azimuth: 60f64.to_radians(),
            max_elevation: 30f64.to_radians(),
            beam_range: crate::localization::DEFAULT_BEAM_RANGE_M,
            noise_stddev_db: 0.0,
        }
    }
}

impl CodebookParams {
    pub fn build(
        &self,
        panel: &RisPanel,
        source: Position3,
        frequency_hz: f64,
    ) -> Result<Codebook> {
        let az = sine_space_grid(self.n_azimuth, self.max_azimuth)?;
        let el = sine_space_grid(self.n_elevation, self.max_elevation)?;
        generate_codebook(panel, source, &az, &el, self.beam_range, frequency_hz)
    }
}

/// How each panel picks its configuration for a receiver cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigStrategy {
    /// Steer straight at the cell.
    OracleCsi,
    /// Sweep a codebook from the cell and keep the best codeword.
    Codebook(CodebookParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combining {
    /// Report the strongest single mechanism.
    #[default]
    BestPath,
    /// Sum every mechanism's field coherently.
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapOptions {
    pub strategy: ConfigStrategy,
    pub combining: Combining,
    /// Thread count; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            strategy: ConfigStrategy::OracleCsi,
            combining: Combining::BestPath,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathLabel {
    Direct,
    GroundBounce,
    Ris(usize),
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLabel::Direct => f.write_str("DIRECT"),
            PathLabel::GroundBounce => f.write_str("GROUND_BOUNCE"),
            PathLabel::Ris(id) => write!(f, "RIS:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub x: f64,
    pub y: f64,
    /// Receiver antenna height above the datum.
    pub z: f64,
    /// `None` when the cell is not covered.
    pub snr_db: Option<f64>,
    pub best_path: Option<PathLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapResult {
    pub grid: ReceiverGrid,
    pub cells: Vec<CellResult>,
}

impl HeatmapResult {
    pub fn covered(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().filter_map(|c| c.snr_db)
    }

    pub fn coverage_fraction(&self) -> f64 {
        self.covered().count() as f64 / self.cells.len() as f64
    }
}

/// One candidate mechanism at a cell.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    label: PathLabel,
    snr_db: f64,
    field: Complex64,
    extra_noise_mw: f64,
}

struct Prepared<'a> {
    scenario: &'a Scenario,
    grid: &'a ReceiverGrid,
    strategy: ConfigStrategy,
    combining: Combining,
    codebooks: Vec<Option<Codebook>>,
    /// Whether the transmitter sees each panel.
    tx_sees_panel: Vec<bool>,
}

/// Independent per-cell seed derived from the scenario seed.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

impl Prepared<'_> {
    fn terrain_path(&self, path: &PropagationPath, label: PathLabel) -> Result<Candidate> {
        let s = self.scenario;
        let field = path_field(path, &s.link, &s.material)?;
        let loss =
            atmospheric_attenuation(&s.atmosphere, s.link.frequency_hz, path.total_length())?;
        let field = field.phasor() * db_to_linear(-loss).sqrt();
        Ok(Candidate {
            label,
            snr_db: snr(
                linear_to_db(field.norm_sqr()),
                s.link.noise_power_dbm,
                s.link.lna_gain_db,
            ),
            field,
            extra_noise_mw: 0.0,
        })
    }

    fn ris_path(&self, k: usize, rx: Position3, index: usize) -> Result<Option<Candidate>> {
        let s = self.scenario;
        let panel = &s.panels[k];
        if !self.tx_sees_panel[k] || !s.terrain.line_of_sight(panel.center, rx, 0.0)? {
            return Ok(None);
        }
        let config = match self.strategy {
            ConfigStrategy::OracleCsi => {
                match steering_phase_profile(panel, s.tx.position, rx, s.link.frequency_hz) {
                    Ok(c) => c,
                    Err(Error::Geometry(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            ConfigStrategy::Codebook(params) => {
                let book = self.codebooks[k].as_ref().expect("codebook prepared");
                match self.codebook_choice(panel, book, rx, params.noise_stddev_db, index)? {
                    Some(c) => c,
                    None => return Ok(None),
                }
            }
        };
        let out = match cascade_received_power(panel, &config, s.tx.position, rx, &s.link) {
            Ok(out) => out,
            Err(Error::Geometry(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if out.signal_dbm == f64::NEG_INFINITY {
            return Ok(None);
        }
        let length = s.tx.position.distance(panel.center) + panel.center.distance(rx);
        let loss = atmospheric_attenuation(&s.atmosphere, s.link.frequency_hz, length)?;
        let field = out.field * db_to_linear(-loss).sqrt();
        Ok(Some(Candidate {
            label: PathLabel::Ris(panel.id),
            snr_db: snr(
                out.signal_dbm - loss,
                out.effective_noise_dbm,
                s.link.lna_gain_db,
            ),
            field,
            extra_noise_mw: (db_to_linear(out.effective_noise_dbm)
                - db_to_linear(s.link.noise_power_dbm))
            .max(0.0),
        }))
    }

    fn codebook_choice(
        &self,
        panel: &RisPanel,
        book: &Codebook,
        rx: Position3,
        noise_stddev_db: f64,
        index: usize,
    ) -> Result<Option<PhaseConfiguration>> {
        let s = self.scenario;
        let ctx = SweepContext {
            terrain: Some(&s.terrain),
            panel,
            tx: s.tx.position,
            rx,
            link: s.link,
        };
        let meas = beam_sweep(&ctx, book, noise_stddev_db, cell_seed(s.seed, index))?;
        match estimate_angle(&meas, book) {
            Ok(est) => Ok(Some(book.entries()[est.winning_index].config.clone())),
            Err(Error::NoCoverage) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn cell(&self, index: usize) -> Result<CellResult> {
        let s = self.scenario;
        let (x, y) = self.grid.cell_center(index);
        let rx = Node::on_terrain(&s.terrain, x, y, self.grid.antenna_height)?.position;
        let tx = s.tx.position;

        let mut candidates = Vec::with_capacity(2 + s.panels.len());
        if s.terrain.line_of_sight(tx, rx, 0.0)? {
            candidates
                .push(self.terrain_path(&PropagationPath::direct(tx, rx), PathLabel::Direct)?);
        }
        if let Some(path) = ground_bounce_path(&s.terrain, tx, rx, s.polarization)? {
            candidates.push(self.terrain_path(&path, PathLabel::GroundBounce)?);
        }
        for k in 0..s.panels.len() {
            if let Some(c) = self.ris_path(k, rx, index)? {
                candidates.push(c);
            }
        }

        let best = candidates
            .iter()
            .fold(None::<&Candidate>, |best, c| match best {
                Some(b) if b.snr_db >= c.snr_db => Some(b),
                _ => Some(c),
            });
        let snr_db = match (best, self.combining) {
            (None, _) => None,
            (Some(b), Combining::BestPath) => Some(b.snr_db),
            (Some(_), Combining::Coherent) => {
                let field: Complex64 = candidates.iter().map(|c| c.field).sum();
                let noise = db_to_linear(s.link.noise_power_dbm)
                    + candidates.iter().map(|c| c.extra_noise_mw).sum::<f64>();
                Some(snr(
                    linear_to_db(field.norm_sqr()),
                    linear_to_db(noise),
                    s.link.lna_gain_db,
                ))
            }
        };
        let covered = snr_db.filter(|v| *v >= NO_COVERAGE_SNR_DB);
        Ok(CellResult {
            x,
            y,
            z: rx.z,
            snr_db: covered,
            best_path: covered.and(best.map(|b| b.label)),
        })
    }
}

/// SNR heatmap over `grid`. Output does not depend on the worker count.
pub fn run_heatmap(
    scenario: &Scenario,
    grid: &ReceiverGrid,
    options: &HeatmapOptions,
) -> Result<HeatmapResult> {
    scenario.validate()?;
    grid.validate(&scenario.terrain)?;
    let tx = scenario.tx.position;
    let mut tx_sees_panel = Vec::with_capacity(scenario.panels.len());
    let mut codebooks = Vec::with_capacity(scenario.panels.len());
    for panel in &scenario.panels {
        let sees = scenario.terrain.line_of_sight(tx, panel.center, 0.0)?;
        tx_sees_panel.push(sees);
        match options.strategy {
            ConfigStrategy::OracleCsi => {
                if let RisKind::SemiPassive {
                    csi_available: false,
                } = panel.kind
                {
                    return Err(Error::Configuration(format!(
                        "panel {} has no channel state; use the codebook strategy",
                        panel.id
                    )));
                }
                codebooks.push(None);
            }
            ConfigStrategy::Codebook(params) => {
                if !sees {
                    return Err(Error::Configuration(format!(
                        "codebook strategy needs line of sight from the transmitter to panel {}",
                        panel.id
                    )));
                }
                let book = params
                    .build(panel, tx, scenario.link.frequency_hz)
                    .map_err(|e| {
                        Error::Configuration(format!("panel {} codebook: {e}", panel.id))
                    })?;
                codebooks.push(Some(book));
            }
        }
    }
    let prepared = Prepared {
        scenario,
        grid,
        strategy: options.strategy,
        combining: options.combining,
        codebooks,
        tx_sees_panel,
    };
    let run = || {
        (0..grid.len())
            .into_par_iter()
            .map(|i| prepared.cell(i))
            .collect::<Result<Vec<_>>>()
    };
    let cells = match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Configuration(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(HeatmapResult { grid: *grid, cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindStats {
    pub kind: RisKind,
    pub label: String,
    /// `NaN` when nothing is covered.
    pub min_snr_db: f64,
    pub max_snr_db: f64,
    pub mean_snr_db: f64,
    pub coverage_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub stats: Vec<KindStats>,
    /// `deltas[i][j]`: mean of `snr_i - snr_j` over cells both cover.
    pub deltas: Vec<Vec<f64>>,
    /// `common_cells[i][j]`: number of cells both cover.
    pub common_cells: Vec<Vec<usize>>,
}

/// Runs the heatmap once per kind with every panel switched to that kind.
pub fn compare_ris_kinds(
    scenario: &Scenario,
    grid: &ReceiverGrid,
    kinds: &[RisKind],
    options: &HeatmapOptions,
) -> Result<ComparisonReport> {
    if kinds.len() < 2 {
        return Err(Error::Precondition(
            "comparison needs at least two kinds".into(),
        ));
    }
    let maps = kinds
        .iter()
        .map(|k| run_heatmap(&scenario.with_panel_kind(*k)?, grid, options))
        .collect::<Result<Vec<_>>>()?;

    let stats = kinds
        .iter()
        .zip(&maps)
        .map(|(kind, map)| {
            let covered: Vec<f64> = map.covered().collect();
            let (min, max, mean) = if covered.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (
                    covered.iter().copied().fold(f64::INFINITY, f64::min),
                    covered.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    covered.iter().sum::<f64>() / covered.len() as f64,
                )
            };
            KindStats {
                kind: *kind,
                label: kind.label(),
                min_snr_db: min,
                max_snr_db: max,
                mean_snr_db: mean,
                coverage_fraction: map.coverage_fraction(),
            }
        })
        .collect();

    let n = kinds.len();
    let mut deltas = vec![vec![0.0; n]; n];
    let mut common_cells = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            let mut count = 0;
            for (a, b) in maps[i].cells.iter().zip(&maps[j].cells) {
                if let (Some(a), Some(b)) = (a.snr_db, b.snr_db) {
                    sum += a - b;
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::NoCommonCoverage);
            }
            deltas[i][j] = sum / count as f64;
            common_cells[i][j] = count;
        }
    }
    Ok(ComparisonReport {
        stats,
        deltas,
        common_cells,
    })
}

/// Landform classes of the RIS trade-off table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLandform {
    Canyon,
    Crater,
    Mountain,
    Plateau,
}

impl FromStr for TableLandform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "canyon" => Ok(Self::Canyon),
            "crater" => Ok(Self::Crater),
            "mountain" | "hill" => Ok(Self::Mountain),
            "plateau" => Ok(Self::Plateau),
            other => Err(Error::Configuration(format!(
                "unknown landform `{other}` (expected canyon, crater, mountain or plateau)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Suitability {
    pub family: RisFamily,
    pub suitable: bool,
}

/// Which RIS families suit a landform. Reflect-only passive designs and STAR
/// panels are ruled out where the terminals sit on opposite slopes of a
/// raised landform and the cascade must be amplified to close the link.
pub fn recommend_ris(landform: TableLandform) -> [Suitability; 4] {
    let raised = matches!(landform, TableLandform::Mountain | TableLandform::Plateau);
    RisFamily::ALL.map(|family| Suitability {
        family,
        suitable: !raised || matches!(family, RisFamily::Amplifying | RisFamily::Active),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TradeOff {
    pub family: RisFamily,
    pub power: Level,
    pub complexity: Level,
    pub performance: Level,
    pub cost: Level,
}

pub fn trade_off_table() -> [TradeOff; 4] {
    use Level::*;
    let row = |family, power, complexity, performance, cost| TradeOff {
        family,
        power,
        complexity,
        performance,
        cost,
    };
    [
        row(RisFamily::Passive, Low, Low, Low, Low),
        row(RisFamily::Star, Low, Low, Low, Low),
        row(RisFamily::Amplifying, Medium, Medium, High, Medium),
        row(RisFamily::Active, High, High, High, High),
    ]
}

/// Desk-scale crater with one rim-mounted panel serving the bowl from a
/// transmitter outside the rim.
pub fn build_reference_crater_scenario() -> (Scenario, ReceiverGrid) {
    let (scenario, grid, _) = crate::config::ScenarioConfig::reference()
        .build()
        .expect("reference scenario is valid");
    let tx = scenario.tx.position;
    assert!(
        scenario
            .panels
            .iter()
            .all(|p| scenario.terrain.line_of_sight(tx, p.center, 0.0) == Ok(true)),
        "reference transmitter must see its panel"
    );
    let (cx, cy) = scenario.terrain.center();
    let floor = Node::on_terrain(&scenario.terrain, cx, cy, grid.antenna_height)
        .expect("crater centre on grid")
        .position;
    assert_eq!(
        scenario.terrain.line_of_sight(tx, floor, 0.0),
        Ok(false),
        "reference transmitter must not see the crater floor"
    );
    (scenario, grid)
}
