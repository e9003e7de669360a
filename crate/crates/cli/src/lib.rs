//! Command-line driver: experiment configs, field files, heatmaps and studies.

pub mod artifacts;
pub mod config;
pub mod fieldfile;
pub mod render;
pub mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use heatcloak_core::scenarios::{figure_preset, run, ScenarioConfig, FIGURES};

use crate::render::{RenderOptions, Scale};

/// Default output directory when neither `--out` nor `HEATCLOAK_OUT` is set.
pub const DEFAULT_OUT: &str = "heatcloak-out";
pub const OUT_ENV: &str = "HEATCLOAK_OUT";

#[derive(Debug, Parser)]
#[command(name = "heatcloak", version, about = "Active cloaking and mimicking for the heat equation")]
pub struct Cli {
    /// Output directory (default: $HEATCLOAK_OUT, then ./heatcloak-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for field evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
    /// Seed of the density noise, replacing the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run the preset behind a figure (3, 4, 7, 8, 9, 10, 11, 12).
    Figure { figure: u32 },
    /// Reproduction error studies as CSV.
    Sweep {
        /// segments, steps or noise
        #[arg(long)]
        study: Option<String>,
        /// Noise fraction of the perturbed runs.
        #[arg(long)]
        noise: Option<f64>,
        /// Square grid size replacing the preset's.
        #[arg(long)]
        grid: Option<usize>,
        /// Keep every n-th metric time.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Render a field file to PNG.
    Render {
        field: PathBuf,
        /// Map log10 |v| instead of v.
        #[arg(long)]
        log10: bool,
        /// Fixed color range as MIN,MAX.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        /// Output image (default: the field path with .png).
        #[arg(short = 'o', long = "image")]
        image: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

/// `--out`, then `HEATCLOAK_OUT`, then [`DEFAULT_OUT`].
pub fn output_dir(flag: Option<&Path>, env: Option<OsString>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text.split_once(',').ok_or_else(|| anyhow!("range must be MIN,MAX"))?;
    let (lo, hi): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
    Ok((lo, hi))
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    config::parse_config(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn run_and_write(&self, mut cfg: ScenarioConfig, dir: &Path) -> Result<()> {
        if let (Some(seed), Some(n)) = (self.seed, cfg.noise.as_mut()) {
            n.seed = seed;
        }
        self.say(format!("running {} -> {}", cfg.kind.name(), dir.display()));
        let result = run(&cfg)?;
        let written = artifacts::write_run(dir, &cfg, &result)?;
        for w in result.metadata.warnings.iter().chain(&written.warnings) {
            self.say(format!("warning: {w}"));
        }
        for m in &result.metrics {
            let worst = m.values.iter().copied().fold(f64::NAN, f64::max);
            self.say(format!("  {} max {worst:.3e}", m.name));
        }
        Ok(())
    }
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        out: output_dir(cli.out.as_deref(), std::env::var_os(OUT_ENV)),
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            ctx.say(format!("{}: valid {} config", config.display(), cfg.kind.name()));
            Ok(())
        }
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let name = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            ctx.run_and_write(cfg, &ctx.out.join(name))
        }
        Command::Figure { figure } => {
            if !FIGURES.contains(&figure) {
                return Err(anyhow!("no preset for figure {figure}; available: {FIGURES:?}"));
            }
            let cfgs = figure_preset(figure)?;
            let many = cfgs.len() > 1;
            for (i, cfg) in cfgs.into_iter().enumerate() {
                let mut dir = ctx.out.join(format!("figure{figure}"));
                if many {
                    dir = dir.join(format!("{i:02}_{}_n{}_m{}", cfg.kind.name(), cfg.cloak_segments, cfg.steps));
                    if cfg.noise.is_some() {
                        dir.set_file_name(format!("{}_noisy", dir.file_name().unwrap().to_string_lossy()));
                    }
                }
                ctx.run_and_write(cfg, &dir)?;
            }
            Ok(())
        }
        Command::Sweep { study, noise, grid, stride } => {
            let study = match study {
                Some(s) => sweep::Study::from_name(&s)?,
                None if noise.is_some() => sweep::Study::Noise,
                None => sweep::Study::Segments,
            };
            let opts = sweep::SweepOptions { study, noise, seed: ctx.seed, grid, stride: stride.max(1) };
            let csv = sweep::run_sweep(&opts, |i, n, c| {
                ctx.say(format!("[{}/{n}] {} N={} M={}", i + 1, c.kind.name(), c.cloak_segments, c.steps))
            })?;
            let path = ctx.out.join(format!("sweep_{}.csv", study.name()));
            fieldfile::write_atomic(&path, &csv)?;
            ctx.say(format!("wrote {}", path.display()));
            Ok(())
        }
        Command::Render { field, log10, range, image } => {
            let (grid, _) = fieldfile::read_field_grid(&field)?;
            let opts = RenderOptions {
                scale: if log10 { Scale::Log10 } else { Scale::Linear },
                range: range.as_deref().map(parse_range).transpose()?,
            };
            let image = image.unwrap_or_else(|| field.with_extension("png"));
            let info = render::render_heatmap(&grid, opts, &image)?;
            if let Some(w) = info.warning {
                ctx.say(format!("warning: {w}"));
            }
            ctx.say(format!("wrote {} (range {} .. {})", image.display(), info.min, info.max));
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = cli.parallel.max(1);
    let outcome = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| execute(cli)),
        Err(e) => Err(anyhow!("thread pool: {e}")),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
