//! Output directory layout of a run:
//!
//! ```text
//! config.txt                 configuration that produced the run
//! metrics.csv                one row per metric time, one column per metric
//! metadata.txt               discretization, solver diagnostics, chosen parameters
//! identity.csv               harmonic identity samples (harmonic_identity only)
//! fields/<name>_<i>.hf       field grids at snapshot i
//! images/<name>_<i>.png      heatmaps with .range sidecars
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use heatcloak_core::scenarios::{ScenarioConfig, ScenarioResult};

use crate::config::write_config;
use crate::fieldfile::{write_atomic, write_field_grid};
use crate::render::{render_heatmap, RenderOptions, Scale};

/// Color range of error heatmaps in `log10` units.
pub const ERROR_RANGE: (f64, f64) = (-8.0, 0.0);

#[derive(Debug, Clone, Default)]
pub struct WrittenRun {
    pub dir: PathBuf,
    pub fields: Vec<PathBuf>,
    pub images: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn metrics_csv(result: &ScenarioResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend(result.metrics.iter().map(|m| m.name.clone()));
    w.write_record(&header)?;
    for (i, t) in result.metric_times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(result.metrics.iter().map(|m| m.values.get(i).map_or(String::new(), |v| v.to_string())));
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

fn identity_csv(result: &ScenarioResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "volume", "boundary", "difference"])?;
    for s in &result.identity {
        w.write_record([
            s.point.x.to_string(),
            s.point.y.to_string(),
            s.volume.to_string(),
            s.boundary.to_string(),
            (s.volume - s.boundary).to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn metadata_text(cfg: &ScenarioConfig, result: &ScenarioResult) -> String {
    let md = &result.metadata;
    let mut s = String::new();
    let _ = writeln!(s, "kind {}", result.kind.name());
    let _ = writeln!(s, "dt {}", md.dt);
    let _ = writeln!(s, "steps {}", md.steps);
    let _ = writeln!(s, "cloak_segments {}", md.cloak_segments);
    if let Some(n) = md.inclusion_segments {
        let _ = writeln!(s, "inclusion_segments {n}");
    }
    let _ = writeln!(s, "grid {}x{}", cfg.grid.nx, cfg.grid.ny);
    for (label, c) in &md.conditions {
        let _ = writeln!(s, "condition {label} {c:e}");
    }
    for (label, r) in &md.solve_residuals {
        let _ = writeln!(s, "solve_residual {label} {r:e}");
    }
    if let Some(w) = md.wall_seconds {
        let _ = writeln!(s, "wall_seconds {w:.3}");
    }
    for c in &md.chosen {
        let _ = writeln!(s, "chosen {c}");
    }
    let _ = writeln!(s, "chosen error color range log10 [{}, {}]", ERROR_RANGE.0, ERROR_RANGE.1);
    for w in &md.warnings {
        let _ = writeln!(s, "warning {w}");
    }
    s
}

/// Writes every artifact of `result` under `dir`.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, result: &ScenarioResult) -> Result<WrittenRun> {
    let mut out = WrittenRun { dir: dir.to_path_buf(), ..WrittenRun::default() };
    write_atomic(&dir.join("config.txt"), write_config(cfg).as_bytes())?;
    write_atomic(&dir.join("metrics.csv"), &metrics_csv(result)?)?;
    write_atomic(&dir.join("metadata.txt"), metadata_text(cfg, result).as_bytes())?;
    if !result.identity.is_empty() {
        write_atomic(&dir.join("identity.csv"), &identity_csv(result)?)?;
    }
    for series in &result.fields {
        let opts = if series.name == "error" {
            RenderOptions { scale: Scale::Log10, range: Some(ERROR_RANGE) }
        } else {
            // One range per series so frames compare.
            let finite = series.grids.iter().flat_map(|g| g.values.iter().copied()).filter(|v| v.is_finite());
            let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            RenderOptions { scale: Scale::Linear, range: lo.is_finite().then_some((lo, hi)) }
        };
        for (i, grid) in series.grids.iter().enumerate() {
            let stem = format!("{}_{i:03}", series.name);
            let field = dir.join("fields").join(format!("{stem}.hf"));
            write_field_grid(grid, cfg.diffusivity, &field)?;
            out.fields.push(field);
            let image = dir.join("images").join(format!("{stem}.png"));
            let info = render_heatmap(grid, opts, &image)?;
            if let Some(w) = info.warning {
                out.warnings.push(format!("{}: {w}", image.display()));
            }
            out.images.push(image);
        }
    }
    Ok(out)
}
