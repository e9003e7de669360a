//! Plain-text experiment configuration.
//!
//! ```text
//! # comments run to the end of the line
//! [scenario]
//! kind = cloak_object
//! diffusivity = 0.2
//! final_time = 0.5
//! steps = 600
//!
//! [cloak]
//! shape = circle(0.5, 0.5, 0.3333333333333333)
//! segments = 128
//!
//! [inclusion]
//! shape = kite(0.525, 0.5, 0.1)
//! segments = 96
//!
//! [sources]
//! source = 0.9, 0.3
//!
//! [output]
//! snapshots = 0.05, 0.25, 0.5
//! ```
//!
//! Sections: `scenario` (kind, diffusivity, final_time, steps, buffer,
//! object_value, stand_in_offset), `cloak` (shape, segments), `inclusion`
//! (shape, segments), `stand_in` (shape), `sources` (source, mimic; repeatable,
//! `x, y` or `x, y, strength`), `grid` (bbox as `x0, y0, x1, y1`, nx, ny),
//! `output` (snapshots, metric_times), `noise` (fraction, seed), `initial`
//! (polynomial by catalog name, or origin and ten coeffs; points as
//! `x, y; x, y`) and `chosen` (label; repeatable).
//!
//! Shapes: `circle(cx, cy, r)`, `kite(cx, cy, scale)`,
//! `flower(cx, cy, mean_radius, amplitude, petals)`.

use std::collections::HashMap;
use std::fmt::Write as _;

use heatcloak_core::initial::HarmonicPolynomial;
use heatcloak_core::scenarios::{GridSpec, NoiseSpec, ScenarioConfig, ScenarioKind};
use heatcloak_core::{vec2, Error as CoreError, PointSource, Rect, Shape, Vec2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("scenario", &["kind", "diffusivity", "final_time", "steps", "buffer", "object_value", "stand_in_offset"]),
    ("cloak", &["shape", "segments"]),
    ("inclusion", &["shape", "segments"]),
    ("stand_in", &["shape"]),
    ("sources", &["source", "mimic"]),
    ("grid", &["bbox", "nx", "ny"]),
    ("output", &["snapshots", "metric_times"]),
    ("noise", &["fraction", "seed"]),
    ("initial", &["polynomial", "origin", "coeffs", "points"]),
    ("chosen", &["label"]),
];

const REPEATABLE: &[(&str, &str)] = &[("sources", "source"), ("sources", "mimic"), ("chosen", "label")];

struct Entry {
    line: usize,
    value: String,
}

fn numbers(line: usize, key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| err(line, format!("{key}: '{s}' is not a number")))
        })
        .collect()
}

fn exactly<const N: usize>(line: usize, key: &str, text: &str) -> Result<[f64; N], ConfigError> {
    let v = numbers(line, key, text)?;
    v.try_into().map_err(|v: Vec<f64>| err(line, format!("{key}: expected {N} values, got {}", v.len())))
}

fn parse_shape(line: usize, text: &str) -> Result<Shape, ConfigError> {
    let text = text.trim();
    let (name, rest) = text
        .split_once('(')
        .ok_or_else(|| err(line, format!("shape '{text}' must look like name(args)")))?;
    let args = rest
        .strip_suffix(')')
        .ok_or_else(|| err(line, format!("shape '{text}' is missing ')'")))?;
    let name = name.trim();
    let v = numbers(line, name, args)?;
    let want = |n: usize| -> Result<(), ConfigError> {
        if v.len() == n {
            Ok(())
        } else {
            Err(err(line, format!("{name} takes {n} arguments, got {}", v.len())))
        }
    };
    match name {
        "circle" => {
            want(3)?;
            Ok(Shape::Circle { center: vec2(v[0], v[1]), radius: v[2] })
        }
        "kite" => {
            want(3)?;
            Ok(Shape::Kite { center: vec2(v[0], v[1]), scale: v[2] })
        }
        "flower" => {
            want(5)?;
            if v[4] < 1.0 || v[4].fract() != 0.0 {
                return Err(err(line, format!("flower petals must be a positive integer, got {}", v[4])));
            }
            Ok(Shape::Flower { center: vec2(v[0], v[1]), mean_radius: v[2], amplitude: v[3], petals: v[4] as u32 })
        }
        _ => Err(err(line, format!("unknown shape '{name}' (circle, kite, flower)"))),
    }
}

fn shape_text(s: &Shape) -> String {
    match *s {
        Shape::Circle { center, radius } => format!("circle({}, {}, {radius})", center.x, center.y),
        Shape::Kite { center, scale } => format!("kite({}, {}, {scale})", center.x, center.y),
        Shape::Flower { center, mean_radius, amplitude, petals } => {
            format!("flower({}, {}, {mean_radius}, {amplitude}, {petals})", center.x, center.y)
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: HashMap<(String, String), Vec<Entry>> = HashMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("malformed section header '{content}'")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err(line, format!("unknown section '{name}'")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
        let key = key.trim();
        let sec = section.as_deref().ok_or_else(|| err(line, format!("key '{key}' appears before any section")))?;
        let known = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(err(line, format!("unknown key '{key}' in section [{sec}]")));
        }
        let slot = entries.entry((sec.to_string(), key.to_string())).or_default();
        if !slot.is_empty() && !REPEATABLE.contains(&(sec, key)) {
            return Err(err(line, format!("duplicate key '{key}' in section [{sec}] (first on line {})", slot[0].line)));
        }
        slot.push(Entry { line, value: value.trim().to_string() });
    }

    let get = |sec: &str, key: &str| entries.get(&(sec.to_string(), key.to_string())).and_then(|v| v.first());
    let all = |sec: &str, key: &str| entries.get(&(sec.to_string(), key.to_string())).map_or(&[][..], |v| &v[..]);
    let f64_of = |sec: &str, key: &str| -> Result<Option<f64>, ConfigError> {
        get(sec, key).map(|e| Ok(exactly::<1>(e.line, key, &e.value)?[0])).transpose()
    };
    let usize_of = |sec: &str, key: &str| -> Result<Option<usize>, ConfigError> {
        get(sec, key)
            .map(|e| e.value.parse::<usize>().map_err(|_| err(e.line, format!("{key}: '{}' is not a count", e.value))))
            .transpose()
    };

    let kind_entry = get("scenario", "kind").ok_or_else(|| err(0, "missing [scenario] kind"))?;
    let kind = ScenarioKind::from_name(&kind_entry.value).ok_or_else(|| {
        let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
        err(kind_entry.line, format!("unknown kind '{}' (one of {})", kind_entry.value, names.join(", ")))
    })?;
    let cloak_entry = get("cloak", "shape").ok_or_else(|| err(0, "missing [cloak] shape"))?;
    let mut cfg = ScenarioConfig::new(kind, parse_shape(cloak_entry.line, &cloak_entry.value)?);

    if let Some(v) = f64_of("scenario", "diffusivity")? {
        cfg.diffusivity = v;
    }
    if let Some(v) = f64_of("scenario", "final_time")? {
        cfg.final_time = v;
        cfg.snapshots = vec![v];
        cfg.metric_times = vec![v];
    }
    if let Some(v) = usize_of("scenario", "steps")? {
        cfg.steps = v;
    }
    if let Some(v) = f64_of("scenario", "buffer")? {
        cfg.buffer = v;
    }
    if let Some(v) = f64_of("scenario", "object_value")? {
        cfg.object_value = v;
    }
    if let Some(v) = f64_of("scenario", "stand_in_offset")? {
        cfg.stand_in_offset = v;
    }
    if let Some(v) = usize_of("cloak", "segments")? {
        cfg.cloak_segments = v;
    }
    if let Some(e) = get("inclusion", "shape") {
        cfg.inclusion = Some(parse_shape(e.line, &e.value)?);
    }
    if let Some(v) = usize_of("inclusion", "segments")? {
        cfg.inclusion_segments = v;
    }
    if let Some(e) = get("stand_in", "shape") {
        cfg.stand_in = Some(parse_shape(e.line, &e.value)?);
    }
    let source = |e: &Entry, key: &str| -> Result<PointSource, ConfigError> {
        let v = numbers(e.line, key, &e.value)?;
        match v[..] {
            [x, y] => Ok(PointSource::new(vec2(x, y))),
            [x, y, s] => Ok(PointSource::with_strength(vec2(x, y), s)),
            _ => Err(err(e.line, format!("{key}: expected 'x, y' or 'x, y, strength'"))),
        }
    };
    cfg.sources = all("sources", "source").iter().map(|e| source(e, "source")).collect::<Result<_, _>>()?;
    cfg.mimic_sources = all("sources", "mimic").iter().map(|e| source(e, "mimic")).collect::<Result<_, _>>()?;
    if let Some(e) = get("grid", "bbox") {
        let [x0, y0, x1, y1] = exactly::<4>(e.line, "bbox", &e.value)?;
        if !(x1 > x0 && y1 > y0) {
            return Err(err(e.line, "bbox must be x0, y0, x1, y1 with x1 > x0 and y1 > y0"));
        }
        cfg.grid.bbox = Rect::new(vec2(x0, y0), vec2(x1, y1));
    }
    if let Some(v) = usize_of("grid", "nx")? {
        cfg.grid.nx = v;
    }
    if let Some(v) = usize_of("grid", "ny")? {
        cfg.grid.ny = v;
    }
    if let Some(e) = get("output", "snapshots") {
        cfg.snapshots = numbers(e.line, "snapshots", &e.value)?;
        if get("output", "metric_times").is_none() {
            cfg.metric_times = cfg.snapshots.clone();
        }
    }
    if let Some(e) = get("output", "metric_times") {
        cfg.metric_times = numbers(e.line, "metric_times", &e.value)?;
    }
    if let Some(e) = get("noise", "fraction") {
        let fraction = exactly::<1>(e.line, "fraction", &e.value)?[0];
        let seed = usize_of("noise", "seed")?.unwrap_or(0) as u64;
        cfg.noise = Some(NoiseSpec { fraction, seed });
    } else if let Some(e) = get("noise", "seed") {
        return Err(err(e.line, "noise seed given without a fraction"));
    }
    cfg.initial = parse_initial(&get)?;
    if let Some(e) = get("initial", "points") {
        cfg.sample_points = e
            .value
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|p| exactly::<2>(e.line, "points", p).map(|[x, y]| vec2(x, y)))
            .collect::<Result<_, _>>()?;
    }
    cfg.chosen = all("chosen", "label").iter().map(|e| e.value.clone()).collect();

    cfg.validate().map_err(|e| {
        let line = blame(&e, &get, &all);
        err(line, e.to_string())
    })?;
    Ok(cfg)
}

fn parse_initial<'a>(get: &dyn Fn(&str, &str) -> Option<&'a Entry>) -> Result<Option<HarmonicPolynomial>, ConfigError> {
    if let Some(e) = get("initial", "polynomial") {
        if get("initial", "coeffs").is_some() {
            return Err(err(e.line, "give either polynomial or coeffs, not both"));
        }
        return HarmonicPolynomial::from_name(&e.value)
            .map(Some)
            .ok_or_else(|| err(e.line, format!("unknown polynomial '{}' (one, y1, y2, saddle, cross, cubic)", e.value)));
    }
    let Some(e) = get("initial", "coeffs") else {
        return Ok(None);
    };
    let coeffs = exactly::<10>(e.line, "coeffs", &e.value)?;
    let origin = match get("initial", "origin") {
        Some(o) => {
            let [x, y] = exactly::<2>(o.line, "origin", &o.value)?;
            vec2(x, y)
        }
        None => Vec2::zeros(),
    };
    HarmonicPolynomial::new(origin, coeffs).map(Some).map_err(|x| err(e.line, x.to_string()))
}

/// Line most likely responsible for a validation error.
fn blame<'a>(
    e: &CoreError,
    get: &dyn Fn(&str, &str) -> Option<&'a Entry>,
    all: &dyn Fn(&str, &str) -> &'a [Entry],
) -> usize {
    let msg = e.to_string();
    let nth = |key: &str, what: &str| -> Option<usize> {
        let rest = msg.split(what).nth(1)?;
        let i: usize = rest.trim().split_whitespace().next()?.parse().ok()?;
        all("sources", key).get(i).map(|e| e.line)
    };
    let line = if msg.contains("mimicked source") {
        nth("mimic", "mimicked source")
    } else if msg.contains("source ") && !msg.contains("needs") {
        nth("source", "source")
    } else if msg.contains("stand-in") {
        get("stand_in", "shape").map(|e| e.line)
    } else if msg.contains("inclusion") || msg.contains("objects") {
        get("inclusion", "shape").map(|e| e.line)
    } else if msg.contains("output time") {
        get("output", "snapshots").or_else(|| get("output", "metric_times")).map(|e| e.line)
    } else {
        None
    };
    line.unwrap_or(0)
}

/// Writes `cfg` in the format read by [`parse_config`]; the round trip is exact.
pub fn write_config(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[scenario]");
    let _ = writeln!(s, "kind = {}", cfg.kind.name());
    let _ = writeln!(s, "diffusivity = {}", cfg.diffusivity);
    let _ = writeln!(s, "final_time = {}", cfg.final_time);
    let _ = writeln!(s, "steps = {}", cfg.steps);
    let _ = writeln!(s, "buffer = {}", cfg.buffer);
    let _ = writeln!(s, "object_value = {}", cfg.object_value);
    let _ = writeln!(s, "stand_in_offset = {}", cfg.stand_in_offset);
    let _ = writeln!(s, "\n[cloak]\nshape = {}\nsegments = {}", shape_text(&cfg.cloak), cfg.cloak_segments);
    let _ = write!(s, "\n[inclusion]\n");
    if let Some(r) = &cfg.inclusion {
        let _ = writeln!(s, "shape = {}", shape_text(r));
    }
    let _ = writeln!(s, "segments = {}", cfg.inclusion_segments);
    if let Some(r) = &cfg.stand_in {
        let _ = writeln!(s, "\n[stand_in]\nshape = {}", shape_text(r));
    }
    let _ = write!(s, "\n[sources]\n");
    for (key, list) in [("source", &cfg.sources), ("mimic", &cfg.mimic_sources)] {
        for p in list.iter() {
            let _ = writeln!(s, "{key} = {}, {}, {}", p.location.x, p.location.y, p.strength);
        }
    }
    let GridSpec { bbox, nx, ny } = cfg.grid;
    let _ = writeln!(s, "\n[grid]\nbbox = {}, {}, {}, {}\nnx = {nx}\nny = {ny}", bbox.min.x, bbox.min.y, bbox.max.x, bbox.max.y);
    let _ = writeln!(s, "\n[output]\nsnapshots = {}\nmetric_times = {}", join(&cfg.snapshots), join(&cfg.metric_times));
    if let Some(n) = cfg.noise {
        let _ = writeln!(s, "\n[noise]\nfraction = {}\nseed = {}", n.fraction, n.seed);
    }
    if cfg.initial.is_some() || !cfg.sample_points.is_empty() {
        let _ = write!(s, "\n[initial]\n");
        if let Some(f) = &cfg.initial {
            let _ = writeln!(s, "origin = {}, {}\ncoeffs = {}", f.origin().x, f.origin().y, join(f.coeffs()));
        }
        if !cfg.sample_points.is_empty() {
            let pts: Vec<String> = cfg.sample_points.iter().map(|p| format!("{}, {}", p.x, p.y)).collect();
            let _ = writeln!(s, "points = {}", pts.join("; "));
        }
    }
    if !cfg.chosen.is_empty() {
        let _ = write!(s, "\n[chosen]\n");
        for c in &cfg.chosen {
            let _ = writeln!(s, "label = {}", c.replace('#', ""));
        }
    }
    s
}
