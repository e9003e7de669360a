//! PNG heatmaps, one pixel per grid cell, with the color range written to a
//! sidecar text file next to the image.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use heatcloak_core::FieldGrid;

use crate::fieldfile::write_atomic;

/// Color of cells that hold NaN (the inside of an inclusion).
pub const NAN_COLOR: [u8; 3] = [255, 0, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Linear,
    /// `log10 |v|`; zeros map to the bottom of the range.
    Log10,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderOptions {
    pub scale: Scale,
    /// Fixed `(min, max)` in scaled units; `None` uses the finite extremes.
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderInfo {
    pub min: f64,
    pub max: f64,
    pub warning: Option<String>,
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    let mut s = png.as_os_str().to_owned();
    s.push(".range");
    PathBuf::from(s)
}

fn transform(v: f64, scale: Scale) -> f64 {
    match scale {
        Scale::Linear => v,
        Scale::Log10 if v.is_nan() => v,
        Scale::Log10 => v.abs().log10(),
    }
}

/// RGB pixels, top row first, and the range used.
pub fn heatmap_pixels(grid: &FieldGrid, opts: RenderOptions) -> (Vec<u8>, RenderInfo) {
    let scaled: Vec<f64> = grid.values.iter().map(|&v| transform(v, opts.scale)).collect();
    let (min, max) = opts.range.unwrap_or_else(|| {
        let finite = scaled.iter().copied().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, hi)
        } else {
            (0.0, 0.0)
        }
    });
    let degenerate = !(max > min);
    let warning = degenerate.then(|| format!("degenerate color range [{min}, {max}]; image is a single color"));
    let mut pixels = Vec::with_capacity(3 * grid.nx * grid.ny);
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            let v = scaled[grid.index(ix, iy)];
            let rgb = if v.is_nan() {
                NAN_COLOR
            } else {
                let t = if degenerate { 0.5 } else { ((v - min) / (max - min)).clamp(0.0, 1.0) };
                let c = colorous::VIRIDIS.eval_continuous(t);
                [c.r, c.g, c.b]
            };
            pixels.extend_from_slice(&rgb);
        }
    }
    (pixels, RenderInfo { min, max, warning })
}

/// Renders `grid` to `path` and writes the range to [`sidecar_path`].
pub fn render_heatmap(grid: &FieldGrid, opts: RenderOptions, path: &Path) -> Result<RenderInfo> {
    let (pixels, info) = heatmap_pixels(grid, opts);
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, grid.nx as u32, grid.ny as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().context("png header")?;
        writer.write_image_data(&pixels).context("png data")?;
    }
    write_atomic(path, &bytes)?;
    let scale = match opts.scale {
        Scale::Linear => "linear",
        Scale::Log10 => "log10",
    };
    let side = format!("scale {scale}\nmin {}\nmax {}\ntime {}\n", info.min, info.max, grid.time);
    write_atomic(&sidecar_path(path), side.as_bytes())?;
    Ok(info)
}
