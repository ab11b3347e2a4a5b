//! `marsris` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use marsris::config::{PanelKindName, ScenarioConfig, TerrainKind};
use marsris::export::{
    comparison_deltas_csv, comparison_stats_csv, heatmap_csv, heatmap_pgm, sweep_csv,
};
use marsris::localization::{beam_sweep, estimate_angle, SweepContext};
use marsris::ris::{RisKind, StarMode};
use marsris::scenario::{
    compare_ris_kinds, recommend_ris, run_heatmap, trade_off_table, Node, TableLandform,
};
use marsris::terrain::write_ascii_grid;

#[derive(Parser)]
#[command(
    name = "marsris",
    version,
    about = "Terrain-aware RIS coverage simulator"
)]
struct Cli {
    /// Directory for output artifacts.
    #[arg(long, global = true, env = "MARSRIS_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,

    /// Worker threads for heatmap evaluation. Never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Replace the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a config key, e.g. `--set link.tx_power_dbm=13`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file.
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write the scenario terrain as an ESRI ASCII grid.
    GenerateTerrain(ScenarioArg),
    /// Compute the SNR heatmap.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Also write a graymap rendering.
        #[arg(long)]
        pgm: bool,
        #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
        pgm_min_db: f64,
        #[arg(long, default_value_t = 40.0, allow_hyphen_values = true)]
        pgm_max_db: f64,
    },
    /// Run a codebook beam sweep towards the configured receiver.
    Sweep(ScenarioArg),
    /// Compare RIS kinds on the same geometry.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Comma-separated kinds: passive, semi_passive, active, amplifying,
        /// star, star_transmit, star_dual.
        #[arg(long, value_delimiter = ',', default_value = "amplifying,star")]
        kinds: Vec<String>,
    },
    /// Print which RIS families suit a landform.
    Recommend {
        /// canyon, crater, mountain or plateau.
        #[arg(long)]
        landform: String,
    },
    /// Write the reference crater scenario as a config file.
    Reference {
        /// File name inside the output directory.
        #[arg(long, default_value = "reference.cfg")]
        file: String,
    },
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    seed: Option<u64>,
    inputs_sha256: String,
    overrides: Vec<String>,
    outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
struct OutputDigest {
    file: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Loaded {
    cfg: ScenarioConfig,
    digest: String,
    overrides: Vec<String>,
}

/// Reads the config, applies overrides and digests every input byte.
fn load(cli: &Cli, path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut cfg =
        ScenarioConfig::parse(&text, base).with_context(|| format!("config {}", path.display()))?;
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("scenario.seed={seed}"));
    }
    for o in &overrides {
        cfg.apply_override(o)
            .with_context(|| format!("override `{o}`"))?;
    }

    let mut hasher = Sha256::new();
    hasher.update((text.len() as u64).to_le_bytes());
    hasher.update(text.as_bytes());
    for o in &overrides {
        hasher.update((o.len() as u64).to_le_bytes());
        hasher.update(o.as_bytes());
    }
    if cfg.terrain.kind == TerrainKind::File {
        if let Some(rel) = &cfg.terrain.path {
            let bytes = fs::read(base.join(rel))
                .with_context(|| format!("cannot read terrain file {rel}"))?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    }
    Ok(Loaded {
        cfg,
        digest: hex::encode(hasher.finalize()),
        overrides,
    })
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<OutputDigest>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(OutputDigest {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    fn finish(
        mut self,
        command: &'static str,
        seed: Option<u64>,
        digest: String,
        overrides: Vec<String>,
    ) -> Result<()> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            inputs_sha256: digest,
            overrides,
            outputs: std::mem::take(&mut self.outputs),
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))
    }
}

fn parse_kind(name: &str, template: &ScenarioConfig) -> Result<RisKind> {
    let mut panel = template.panels.get(&0).cloned().unwrap_or_default();
    let (kind, mode) = match name.trim().to_ascii_lowercase().as_str() {
        "passive" => (PanelKindName::Passive, None),
        "semi_passive" => (PanelKindName::SemiPassive, None),
        "active" => (PanelKindName::Active, None),
        "amplifying" => (PanelKindName::Amplifying, None),
        "star" => (PanelKindName::Star, Some(StarMode::Reflect)),
        "star_transmit" => (PanelKindName::Star, Some(StarMode::Transmit)),
        "star_dual" => (PanelKindName::Star, Some(StarMode::DualSided)),
        other => bail!("unknown RIS kind `{other}`"),
    };
    panel.kind = kind;
    if let Some(m) = mode {
        panel.star_mode = m;
    }
    Ok(panel.ris_kind())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenerateTerrain(arg) => {
            let loaded = load(&cli, &arg.config)?;
            let terrain = loaded.cfg.terrain().context("generate-terrain")?;
            let mut w = Writer::new(&cli.output_dir)?;
            w.write("terrain.asc", &write_ascii_grid(&terrain))?;
            w.finish(
                "generate-terrain",
                Some(loaded.cfg.seed),
                loaded.digest,
                loaded.overrides,
            )
        }
        Command::Simulate {
            scenario,
            pgm,
            pgm_min_db,
            pgm_max_db,
        } => {
            let loaded = load(&cli, &scenario.config)?;
            let (s, grid, mut options) = loaded.cfg.build().context("simulate")?;
            options.workers = cli.workers;
            let map = run_heatmap(&s, &grid, &options).context("simulate")?;
            let mut w = Writer::new(&cli.output_dir)?;
            w.write("heatmap.csv", &heatmap_csv(&map))?;
            if *pgm {
                w.write(
                    "heatmap.pgm",
                    &heatmap_pgm(&map, *pgm_min_db, *pgm_max_db).context("simulate")?,
                )?;
            }
            println!(
                "{}: {} of {} cells covered",
                s.name,
                map.covered().count(),
                map.cells.len()
            );
            w.finish("simulate", Some(s.seed), loaded.digest, loaded.overrides)
        }
        Command::Sweep(arg) => {
            let loaded = load(&cli, &arg.config)?;
            let cfg = &loaded.cfg;
            let (s, _, _) = cfg.build().context("sweep")?;
            let panel = s.panels.get(cfg.sweep.panel).with_context(|| {
                format!("sweep: sweep.panel = {} does not exist", cfg.sweep.panel)
            })?;
            let (cx, cy) = s.terrain.center();
            let rx = Node::on_terrain(
                &s.terrain,
                cfg.sweep.rx_x_m.unwrap_or(cx),
                cfg.sweep.rx_y_m.unwrap_or(cy),
                cfg.sweep.rx_antenna_height_m,
            )
            .context("sweep: receiver")?;
            let book = cfg
                .strategy
                .codebook_params()
                .build(panel, s.tx.position, s.link.frequency_hz)
                .context("sweep: codebook")?;
            let ctx = SweepContext {
                terrain: Some(&s.terrain),
                panel,
                tx: s.tx.position,
                rx: rx.position,
                link: s.link,
            };
            let meas =
                beam_sweep(&ctx, &book, cfg.sweep.noise_stddev_db, s.seed).context("sweep")?;
            let mut w = Writer::new(&cli.output_dir)?;
            w.write("sweep.csv", &sweep_csv(&meas, &book)?)?;
            w.finish("sweep", Some(s.seed), loaded.digest, loaded.overrides)?;
            let est = estimate_angle(&meas, &book).context("sweep")?;
            println!(
                "estimate: codeword {} azimuth {:.3} deg elevation {:.3} deg half-width {:.3} deg",
                est.winning_index,
                est.azimuth.to_degrees(),
                est.elevation.to_degrees(),
                est.half_width.to_degrees()
            );
            Ok(())
        }
        Command::Compare { scenario, kinds } => {
            let loaded = load(&cli, &scenario.config)?;
            let (s, grid, mut options) = loaded.cfg.build().context("compare")?;
            if s.panels.is_empty() {
                bail!("compare: the scenario has no panels");
            }
            options.workers = cli.workers;
            let kinds = kinds
                .iter()
                .map(|k| parse_kind(k, &loaded.cfg))
                .collect::<Result<Vec<_>>>()
                .context("compare")?;
            let report = compare_ris_kinds(&s, &grid, &kinds, &options).context("compare")?;
            let mut w = Writer::new(&cli.output_dir)?;
            w.write("compare_stats.csv", &comparison_stats_csv(&report))?;
            w.write("compare_deltas.csv", &comparison_deltas_csv(&report))?;
            for i in 1..report.stats.len() {
                println!(
                    "mean delta {} - {}: {:.2} dB",
                    report.stats[0].label, report.stats[i].label, report.deltas[0][i]
                );
            }
            w.finish("compare", Some(s.seed), loaded.digest, loaded.overrides)
        }
        Command::Recommend { landform } => {
            let landform: TableLandform = landform.parse().context("recommend")?;
            let row: Vec<String> = recommend_ris(landform)
                .iter()
                .map(|s| format!("{} {}", s.family.name(), if s.suitable { "✓" } else { "✗" }))
                .collect();
            println!("{}", row.join(", "));
            for t in trade_off_table() {
                println!(
                    "{:<11} power {:?}, complexity {:?}, performance {:?}, cost {:?}",
                    t.family.name(),
                    t.power,
                    t.complexity,
                    t.performance,
                    t.cost
                );
            }
            Ok(())
        }
        Command::Reference { file } => {
            if Path::new(file).file_name() != Some(std::ffi::OsStr::new(file)) {
                bail!("reference: --file must be a plain file name, got `{file}`");
            }
            let mut cfg = ScenarioConfig::reference();
            for o in &cli.overrides {
                cfg.apply_override(o)
                    .with_context(|| format!("override `{o}`"))?;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            cfg.build().context("reference")?;
            let text = cfg.to_text();
            let mut w = Writer::new(&cli.output_dir)?;
            w.write(file, &text)?;
            w.finish(
                "reference",
                Some(cfg.seed),
                sha256_hex(text.as_bytes()),
                cli.overrides.clone(),
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
