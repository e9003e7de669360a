//! Refinement and noise studies of the reproduction error, written as long-form CSV.

use anyhow::{bail, Result};
use heatcloak_core::scenarios::{figure_preset, run, GridSpec, NoiseSpec, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Boundary segments 25, 50, 100 at 1000 steps.
    Segments,
    /// Steps 250, 500, 1000 at 100 segments.
    Steps,
    /// Clean against perturbed densities at 100 segments and 1000 steps.
    Noise,
}

impl Study {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "segments" => Study::Segments,
            "steps" => Study::Steps,
            "noise" => Study::Noise,
            _ => bail!("unknown study '{name}' (segments, steps, noise)"),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Study::Segments => "segments",
            Study::Steps => "steps",
            Study::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub study: Study,
    /// Replaces the noise of the perturbed runs.
    pub noise: Option<f64>,
    pub seed: Option<u64>,
    /// Square grid size replacing the preset's.
    pub grid: Option<usize>,
    /// Keeps every `stride`-th metric time.
    pub stride: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { study: Study::Segments, noise: None, seed: None, grid: None, stride: 1 }
    }
}

/// Configurations of a study after applying the options.
pub fn sweep_configs(opts: &SweepOptions) -> Result<Vec<ScenarioConfig>> {
    let fig = match opts.study {
        Study::Segments => 7,
        Study::Steps => 8,
        Study::Noise => 9,
    };
    let mut cfgs = figure_preset(fig)?;
    for c in &mut cfgs {
        if let Some(n) = opts.grid {
            c.grid = GridSpec { nx: n, ny: n, ..c.grid };
        }
        if opts.stride > 1 {
            c.metric_times = c.metric_times.iter().copied().step_by(opts.stride).collect();
        }
        if let Some(noise) = c.noise.as_mut() {
            if let Some(f) = opts.noise {
                noise.fraction = f;
            }
            if let Some(s) = opts.seed {
                noise.seed = s;
            }
        }
    }
    if opts.study != Study::Noise && (opts.noise.is_some() || opts.seed.is_some()) {
        let base = cfgs.clone();
        for mut c in base {
            c.noise = Some(NoiseSpec { fraction: opts.noise.unwrap_or(0.03), seed: opts.seed.unwrap_or(7) });
            cfgs.push(c);
        }
    }
    Ok(cfgs)
}

/// Runs the study; `progress` sees each configuration before it runs.
pub fn run_sweep(opts: &SweepOptions, mut progress: impl FnMut(usize, usize, &ScenarioConfig)) -> Result<Vec<u8>> {
    let cfgs = sweep_configs(opts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["study", "kind", "segments", "steps", "noise", "seed", "time", "metric", "value"])?;
    for (i, cfg) in cfgs.iter().enumerate() {
        progress(i, cfgs.len(), cfg);
        let r = run(cfg)?;
        let (noise, seed) = cfg.noise.map_or((0.0, String::new()), |n| (n.fraction, n.seed.to_string()));
        for m in &r.metrics {
            for (t, v) in r.metric_times.iter().zip(&m.values) {
                w.write_record([
                    opts.study.name().to_string(),
                    cfg.kind.name().to_string(),
                    cfg.cloak_segments.to_string(),
                    cfg.steps.to_string(),
                    noise.to_string(),
                    seed.clone(),
                    t.to_string(),
                    m.name.clone(),
                    v.to_string(),
                ])?;
            }
        }
    }
    Ok(w.into_inner()?)
}
