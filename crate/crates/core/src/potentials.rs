//! Discrete single and double layer heat potentials and the block-Toeplitz
//! boundary operators.
//!
//! Density row `m` (0-based) is sampled at `(m + 1/2)·dt`; a field at step `j`
//! (time `j·dt`) sums rows `m < j` with time lag `(j − m − 1/2)·dt`. All kernel
//! lags are therefore at least `dt/2`.
//!
//! The potentials carry the diffusivity as a prefactor,
//! `SL[ψ](x, t) = k ∫∫ K(x − y, t − s) ψ(y, s) dS ds` and likewise for the double
//! layer with `∂K/∂n_y`. With this normalization the Green representation of a
//! solution of `u_t = kΔu` is `SL[∂u/∂n] − DL[u]` and the double layer jumps by
//! `±ψ/2` across the boundary.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::BoundaryMesh;
use crate::kernel::{kernel_r2, Diffusivity};
use crate::math;
use crate::Vec2;

/// Uniform time discretization with `steps` density rows on `[0, steps·dt]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one time step required".into()));
        }
        Ok(Self { dt, steps })
    }

    /// `steps` uniform steps ending at `final_time`.
    pub fn from_final_time(final_time: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one time step required".into()));
        }
        Self::new(final_time / steps as f64, steps)
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Sample time of density row `m` (0-based): `(m + 1/2)·dt`.
    #[inline]
    pub fn density_time(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * self.dt
    }

    /// Evaluation time of step `j`: `j·dt`.
    #[inline]
    pub fn eval_time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// Step whose evaluation time equals `t` (to within `1e-9·dt`).
    pub fn step_at(&self, t: f64) -> Result<usize> {
        let s = t / self.dt;
        let j = math::round(s);
        if !(j >= 0.0) || (s - j).abs() > 1e-9 || j as usize > self.steps {
            return Err(Error::InvalidArgument(format!(
                "time {t} is not an evaluation time of the grid (dt = {}, {} steps)",
                self.dt, self.steps
            )));
        }
        Ok(j as usize)
    }

    /// Number of density rows that influence a field at time `t`: the nearest
    /// step index, clamped to `[0, steps]`.
    pub fn rows_for_time(&self, t: f64) -> usize {
        let j = math::round(t / self.dt);
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(self.steps)
        }
    }
}

/// `rows × cols` table of a boundary density: rows are midpoint times, columns
/// mesh segments. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeDensity {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SpaceTimeDensity {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for m in 0..rows {
            for s in 0..cols {
                values.push(f(m, s));
            }
        }
        Self { rows, cols, values }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}×{cols} = {} values", rows * cols),
                found: format!("{}", values.len()),
            });
        }
        Ok(Self { rows, cols, values })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, m: usize, s: usize) -> f64 {
        self.values[m * self.cols + s]
    }

    #[inline]
    pub fn set(&mut self, m: usize, s: usize, v: f64) {
        self.values[m * self.cols + s] = v;
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.cols..(m + 1) * self.cols]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.values[m * self.cols..(m + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, values: self.values.iter().map(|v| v * alpha).collect() }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}×{}", self.rows, self.cols),
                found: format!("{}×{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First `rows` rows.
    pub fn truncated(&self, rows: usize) -> Self {
        let rows = rows.min(self.rows);
        Self { rows, cols: self.cols, values: self.values[..rows * self.cols].to_vec() }
    }

    fn check_against(&self, mesh: &BoundaryMesh, tg: &TimeGrid) -> Result<()> {
        if self.rows != tg.steps() || self.cols != mesh.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}×{} density", tg.steps(), mesh.len()),
                found: format!("{}×{}", self.rows, self.cols),
            });
        }
        Ok(())
    }
}

/// One weighted combination of layer densities on a mesh:
/// `a·SL[single] + b·DL[double]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LayerSource<'a> {
    pub single: Option<(f64, &'a SpaceTimeDensity)>,
    pub double: Option<(f64, &'a SpaceTimeDensity)>,
}

impl<'a> LayerSource<'a> {
    pub fn single(density: &'a SpaceTimeDensity) -> Self {
        Self { single: Some((1.0, density)), double: None }
    }

    pub fn double(density: &'a SpaceTimeDensity) -> Self {
        Self { single: None, double: Some((1.0, density)) }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-lag constants for lags `(i + 1/2)·dt`, `i < len`.
struct LagTable {
    inv4kt: Vec<f64>,
    norm: Vec<f64>,
    inv2kt: Vec<f64>,
}

impl LagTable {
    fn new(tg: &TimeGrid, k: Diffusivity, len: usize) -> Self {
        let k = k.get();
        let mut inv4kt = Vec::with_capacity(len);
        let mut norm = Vec::with_capacity(len);
        let mut inv2kt = Vec::with_capacity(len);
        for i in 0..len {
            let tau = tg.density_time(i);
            inv4kt.push(1.0 / (4.0 * k * tau));
            norm.push(1.0 / (4.0 * PI * k * tau));
            inv2kt.push(1.0 / (2.0 * k * tau));
        }
        Self { inv4kt, norm, inv2kt }
    }
}

/// Segment-major weights `coef·k·dt·ℓ_s·density[m][s]` for rows `m < jmax`,
/// or `None` when the density is absent.
fn segment_weights(
    mesh: &BoundaryMesh,
    tg: &TimeGrid,
    k: Diffusivity,
    jmax: usize,
    term: Option<(f64, &SpaceTimeDensity)>,
) -> Option<Vec<f64>> {
    let (coef, density) = term?;
    let n = mesh.len();
    let scale = coef * k.get() * tg.dt();
    let mut w = vec![0.0; n * jmax];
    for m in 0..jmax {
        let row = density.row(m);
        for s in 0..n {
            w[s * jmax + m] = scale * mesh.lengths[s] * row[s];
        }
    }
    Some(w)
}

struct Prepared {
    jmax: usize,
    // One entry per source: (single weights, double weights).
    weights: Vec<(Option<Vec<f64>>, Option<Vec<f64>>)>,
    lags: LagTable,
}

fn prepare(
    mesh: &BoundaryMesh,
    sources: &[LayerSource<'_>],
    tg: &TimeGrid,
    steps: &[usize],
    k: Diffusivity,
) -> Result<Prepared> {
    for s in sources {
        if let Some((_, d)) = s.single {
            d.check_against(mesh, tg)?;
        }
        if let Some((_, d)) = s.double {
            d.check_against(mesh, tg)?;
        }
    }
    let jmax = steps.iter().copied().max().unwrap_or(0);
    if jmax > tg.steps() {
        return Err(Error::InvalidArgument(format!(
            "evaluation step {jmax} exceeds the {} steps of the time grid",
            tg.steps()
        )));
    }
    let weights = sources
        .iter()
        .map(|s| {
            (
                segment_weights(mesh, tg, k, jmax, s.single),
                segment_weights(mesh, tg, k, jmax, s.double),
            )
        })
        .collect();
    Ok(Prepared { jmax, weights, lags: LagTable::new(tg, k, jmax) })
}

#[cfg(feature = "parallel")]
fn map_targets<T, F>(targets: &[Vec2], per_target: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Vec2, &mut Vec<Vec<f64>>) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    targets
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |bufs, (i, &x)| per_target(i, x, bufs))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn map_targets<T, F>(targets: &[Vec2], per_target: F) -> Result<Vec<T>>
where
    F: Fn(usize, Vec2, &mut Vec<Vec<f64>>) -> Result<T>,
{
    let mut bufs = Vec::new();
    targets.iter().enumerate().map(|(i, &x)| per_target(i, x, &mut bufs)).collect()
}

/// Evaluates several layer combinations on one mesh at several steps.
///
/// Returns `out[source][step_index][target]`. Kernel values for each
/// target/segment pair are computed once and shared by all sources and steps.
pub fn eval_layers(
    mesh: &BoundaryMesh,
    sources: &[LayerSource<'_>],
    targets: &[Vec2],
    tg: &TimeGrid,
    steps: &[usize],
    k: Diffusivity,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let prep = prepare(mesh, sources, tg, steps, k)?;
    let jmax = prep.jmax;
    let ns = sources.len();
    let nsteps = steps.len();
    let has_double = prep.weights.iter().any(|w| w.1.is_some());

    let per_target = |index: usize, x: Vec2, bufs: &mut Vec<Vec<f64>>| -> Result<Vec<f64>> {
        if bufs.len() < 2 {
            *bufs = vec![vec![0.0; jmax]; 2];
        }
        let (sl, rest) = bufs.split_at_mut(1);
        let (sl, dl) = (&mut sl[0], &mut rest[0]);
        let mut out = vec![0.0; ns * nsteps];
        for seg in 0..mesh.len() {
            let d = x - mesh.centers[seg];
            let r2 = d.norm_squared();
            if r2 == 0.0 {
                return Err(Error::TargetOnBoundary { index });
            }
            let dn = d.dot(&mesh.normals[seg]);
            for i in 0..jmax {
                let kv = math::exp(-r2 * prep.lags.inv4kt[i]) * prep.lags.norm[i];
                let slot = jmax - 1 - i;
                sl[slot] = kv;
                if has_double {
                    dl[slot] = kv * dn * prep.lags.inv2kt[i];
                }
            }
            for (c, (ws, wd)) in prep.weights.iter().enumerate() {
                for (si, &j) in steps.iter().enumerate() {
                    let mut acc = 0.0;
                    if let Some(ws) = ws {
                        acc += dot(&ws[seg * jmax..seg * jmax + j], &sl[jmax - j..]);
                    }
                    if let Some(wd) = wd {
                        acc += dot(&wd[seg * jmax..seg * jmax + j], &dl[jmax - j..]);
                    }
                    out[c * nsteps + si] += acc;
                }
            }
        }
        Ok(out)
    };

    let per = map_targets(targets, per_target)?;
    let mut result = vec![vec![vec![0.0; targets.len()]; nsteps]; ns];
    for (t, vals) in per.into_iter().enumerate() {
        for c in 0..ns {
            for si in 0..nsteps {
                result[c][si][t] = vals[c * nsteps + si];
            }
        }
    }
    Ok(result)
}

/// Spatial gradients of layer combinations, `out[source][step_index][target]`.
pub fn eval_layers_gradient(
    mesh: &BoundaryMesh,
    sources: &[LayerSource<'_>],
    targets: &[Vec2],
    tg: &TimeGrid,
    steps: &[usize],
    k: Diffusivity,
) -> Result<Vec<Vec<Vec<Vec2>>>> {
    let prep = prepare(mesh, sources, tg, steps, k)?;
    let jmax = prep.jmax;
    let ns = sources.len();
    let nsteps = steps.len();

    let per_target = |index: usize, x: Vec2, bufs: &mut Vec<Vec<f64>>| -> Result<Vec<Vec2>> {
        if bufs.len() < 4 {
            *bufs = vec![vec![0.0; jmax]; 4];
        }
        let mut out = vec![Vec2::zeros(); ns * nsteps];
        for seg in 0..mesh.len() {
            let d = x - mesh.centers[seg];
            let r2 = d.norm_squared();
            if r2 == 0.0 {
                return Err(Error::TargetOnBoundary { index });
            }
            let n = mesh.normals[seg];
            let dn = d.dot(&n);
            for i in 0..jmax {
                let kv = math::exp(-r2 * prep.lags.inv4kt[i]) * prep.lags.norm[i];
                let a = prep.lags.inv2kt[i];
                let slot = jmax - 1 - i;
                // ∇_x K(x − y) = −K d/(2kτ)
                bufs[0][slot] = -kv * a * d.x;
                bufs[1][slot] = -kv * a * d.y;
                // ∇_x [K (d·n)/(2kτ)] = K/(2kτ) [n − d (d·n)/(2kτ)]
                let f = kv * a;
                let g = dn * a;
                bufs[2][slot] = f * (n.x - d.x * g);
                bufs[3][slot] = f * (n.y - d.y * g);
            }
            for (c, (ws, wd)) in prep.weights.iter().enumerate() {
                for (si, &j) in steps.iter().enumerate() {
                    let mut acc = Vec2::zeros();
                    if let Some(ws) = ws {
                        let w = &ws[seg * jmax..seg * jmax + j];
                        acc.x += dot(w, &bufs[0][jmax - j..]);
                        acc.y += dot(w, &bufs[1][jmax - j..]);
                    }
                    if let Some(wd) = wd {
                        let w = &wd[seg * jmax..seg * jmax + j];
                        acc.x += dot(w, &bufs[2][jmax - j..]);
                        acc.y += dot(w, &bufs[3][jmax - j..]);
                    }
                    out[c * nsteps + si] += acc;
                }
            }
        }
        Ok(out)
    };

    let per = map_targets(targets, per_target)?;
    let mut result = vec![vec![vec![Vec2::zeros(); targets.len()]; nsteps]; ns];
    for (t, vals) in per.into_iter().enumerate() {
        for c in 0..ns {
            for si in 0..nsteps {
                result[c][si][t] = vals[c * nsteps + si];
            }
        }
    }
    Ok(result)
}

/// Value of a layer combination at an arbitrary time `t`, using density rows
/// `m < rows`. Lags `t − (m + 1/2)·dt ≤ 0` contribute nothing.
///
/// With `rows` fixed this is a smooth function of `(x, t)` solving the heat
/// equation, which is what finite-difference checks need.
pub fn eval_layers_at(
    mesh: &BoundaryMesh,
    source: &LayerSource<'_>,
    x: Vec2,
    t: f64,
    rows: usize,
    tg: &TimeGrid,
    k: Diffusivity,
) -> Result<f64> {
    let rows = rows.min(tg.steps());
    let kk = k.get();
    let mut acc = 0.0;
    for seg in 0..mesh.len() {
        let d = x - mesh.centers[seg];
        let r2 = d.norm_squared();
        if r2 == 0.0 {
            return Err(Error::TargetOnBoundary { index: 0 });
        }
        let dn = d.dot(&mesh.normals[seg]);
        let w = kk * tg.dt() * mesh.lengths[seg];
        for m in 0..rows {
            let tau = t - tg.density_time(m);
            if tau <= 0.0 {
                continue;
            }
            let kv = kernel_r2(r2, tau, kk);
            if let Some((a, s)) = source.single {
                acc += a * w * s.get(m, seg) * kv;
            }
            if let Some((b, dd)) = source.double {
                acc += b * w * dd.get(m, seg) * kv * dn / (2.0 * kk * tau);
            }
        }
    }
    Ok(acc)
}

/// Single layer potential `k·dt Σ_{m<j} Σ_s ℓ_s ψ[m][s] K(x − x_s, (j − m − 1/2) dt)`.
pub fn eval_single_layer(
    mesh: &BoundaryMesh,
    density: &SpaceTimeDensity,
    targets: &[Vec2],
    tg: &TimeGrid,
    j: usize,
    k: Diffusivity,
) -> Result<Vec<f64>> {
    let mut out = eval_layers(mesh, &[LayerSource::single(density)], targets, tg, &[j], k)?;
    Ok(out.swap_remove(0).swap_remove(0))
}

/// Double layer potential with kernel `∂K/∂n_y (x − y)`, the normal attached to
/// the source point `y`.
pub fn eval_double_layer(
    mesh: &BoundaryMesh,
    density: &SpaceTimeDensity,
    targets: &[Vec2],
    tg: &TimeGrid,
    j: usize,
    k: Diffusivity,
) -> Result<Vec<f64>> {
    let mut out = eval_layers(mesh, &[LayerSource::double(density)], targets, tg, &[j], k)?;
    Ok(out.swap_remove(0).swap_remove(0))
}

/// Which boundary operator a [`BlockConvOperator`] discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Single layer `V`: entries `ℓ_k K(x_j − x_k, τ)`.
    Single,
    /// Double layer `K`: entries `ℓ_k ∂K/∂n_y(x_j − x_k, τ)`.
    Double,
}

/// Block lower-triangular Toeplitz boundary operator. Block `i` holds the
/// kernel at lag `(i + 1/2)·dt`; only the `M` distinct blocks are stored.
///
/// Blocks hold bare kernel values; applying the operator multiplies by the
/// quadrature weight `w = k·dt`: `out_j = w Σ_{m ≤ j} B_{j−m} ψ_m`, the
/// boundary trace at time `(j + 1)·dt`.
#[derive(Debug, Clone)]
pub struct BlockConvOperator {
    kind: OperatorKind,
    n: usize,
    dt: f64,
    weight: f64,
    // Row-major N×N blocks.
    blocks: Vec<Vec<f64>>,
}

impl BlockConvOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time quadrature weight `k·dt` applied to every block.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Entry `(row, col)` of block `i`.
    pub fn entry(&self, i: usize, row: usize, col: usize) -> f64 {
        self.blocks[i][row * self.n + col]
    }

    pub fn block(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.blocks[i])
    }

    fn block_matvec_acc(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let b = &self.blocks[i];
        for (r, o) in out.iter_mut().enumerate() {
            *o += scale * dot(&b[r * self.n..(r + 1) * self.n], x);
        }
    }
}

/// Assembles the `M` distinct blocks of the single or double layer operator on `mesh`.
pub fn assemble_operator(
    kind: OperatorKind,
    mesh: &BoundaryMesh,
    tg: &TimeGrid,
    k: Diffusivity,
) -> Result<BlockConvOperator> {
    let n = mesh.len();
    let kk = k.get();
    let build = |i: usize| -> Vec<f64> {
        let tau = tg.density_time(i);
        let mut b = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let d = mesh.centers[r] - mesh.centers[c];
                let kv = kernel_r2(d.norm_squared(), tau, kk);
                b[r * n + c] = mesh.lengths[c]
                    * match kind {
                        OperatorKind::Single => kv,
                        OperatorKind::Double => kv * d.dot(&mesh.normals[c]) / (2.0 * kk * tau),
                    };
            }
        }
        b
    };
    #[cfg(feature = "parallel")]
    let blocks = {
        use rayon::prelude::*;
        (0..tg.steps()).into_par_iter().map(build).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let blocks = (0..tg.steps()).map(build).collect();
    Ok(BlockConvOperator { kind, n, dt: tg.dt(), weight: kk * tg.dt(), blocks })
}

fn check_operand(op: &BlockConvOperator, density: &SpaceTimeDensity) -> Result<()> {
    if density.rows() != op.num_blocks() || density.cols() != op.size() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}×{}", op.num_blocks(), op.size()),
            found: format!("{}×{}", density.rows(), density.cols()),
        });
    }
    Ok(())
}

/// Block lower-triangular product `out_j = k·dt Σ_{m ≤ j} B_{j−m} ψ_m`.
pub fn apply_operator(op: &BlockConvOperator, density: &SpaceTimeDensity) -> Result<SpaceTimeDensity> {
    check_operand(op, density)?;
    let m_total = op.num_blocks();
    let mut out = SpaceTimeDensity::zeros(m_total, op.size());
    for j in 0..m_total {
        let row = out.row_mut(j);
        for m in 0..=j {
            op.block_matvec_acc(j - m, density.row(m), op.weight, row);
        }
    }
    Ok(out)
}

/// Largest accepted 1-norm condition number of the first block.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Result of a block forward substitution.
#[derive(Debug, Clone)]
pub struct BlockSolve {
    pub solution: SpaceTimeDensity,
    /// 1-norm condition number of `k·dt·V_{1/2}`.
    pub condition: f64,
    /// `‖Vψ − rhs‖∞ / ‖rhs‖∞` (0 when `rhs` vanishes).
    pub residual: f64,
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `V ψ = rhs` by marching in time:
/// `ψ_j = (w V_{1/2})⁻¹ (rhs_j − w Σ_{m<j} V_{j−m} ψ_m)` with `w = k·dt`.
pub fn forward_block_solve(op: &BlockConvOperator, rhs: &SpaceTimeDensity) -> Result<SpaceTimeDensity> {
    Ok(solve_marching(op, rhs)?.0)
}

/// [`forward_block_solve`] plus the condition number and the relative residual.
pub fn forward_block_solve_report(op: &BlockConvOperator, rhs: &SpaceTimeDensity) -> Result<BlockSolve> {
    let (solution, condition) = solve_marching(op, rhs)?;
    let back = apply_operator(op, &solution)?;
    let scale = rhs.max_abs();
    let diff = back.axpy(-1.0, rhs)?.max_abs();
    let residual = if scale > 0.0 { diff / scale } else { diff };
    Ok(BlockSolve { solution, condition, residual })
}

fn solve_marching(op: &BlockConvOperator, rhs: &SpaceTimeDensity) -> Result<(SpaceTimeDensity, f64)> {
    if op.kind() != OperatorKind::Single {
        return Err(Error::InvalidArgument(
            "forward block solve needs the single layer operator".into(),
        ));
    }
    check_operand(op, rhs)?;
    let n = op.size();
    let a0 = op.block(0) * op.weight;
    let lu = a0.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })?;
    let condition = norm1(&a0) * norm1(&inverse);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition, limit: CONDITION_LIMIT });
    }

    let m_total = op.num_blocks();
    let mut psi = SpaceTimeDensity::zeros(m_total, n);
    let mut r = vec![0.0; n];
    for j in 0..m_total {
        r.copy_from_slice(rhs.row(j));
        for m in 0..j {
            op.block_matvec_acc(j - m, psi.row(m), -op.weight, &mut r);
        }
        let sol = lu
            .solve(&nalgebra::DVector::from_column_slice(&r))
            .ok_or(Error::IllConditioned { condition, limit: CONDITION_LIMIT })?;
        psi.row_mut(j).copy_from_slice(sol.as_slice());
    }
    Ok((psi, condition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, make_curve, Shape};
    use crate::kernel::{kernel_normal_derivative, kernel_value};
    use crate::vec2;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle_mesh(n: usize) -> BoundaryMesh {
        let c = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        discretize(&c, n).unwrap()
    }

    fn kd(v: f64) -> Diffusivity {
        Diffusivity::new(v).unwrap()
    }

    fn random_density(rows: usize, cols: usize, seed: u64) -> SpaceTimeDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpaceTimeDensity::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn time_grid() {
        let tg = TimeGrid::from_final_time(0.2, 200).unwrap();
        assert_relative_eq!(tg.dt(), 1e-3);
        assert_relative_eq!(tg.density_time(0), 5e-4);
        assert_eq!(tg.step_at(0.2).unwrap(), 200);
        assert_eq!(tg.step_at(0.05).unwrap(), 50);
        assert!(tg.step_at(0.2005).is_err());
        assert!(tg.step_at(0.3).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
    }

    #[test]
    fn zero_density_gives_zero() {
        let mesh = circle_mesh(16);
        let tg = TimeGrid::new(0.01, 5).unwrap();
        let z = SpaceTimeDensity::zeros(5, 16);
        let targets = [vec2(0.5, 0.5), vec2(1.0, 1.0)];
        assert_eq!(eval_single_layer(&mesh, &z, &targets, &tg, 5, kd(0.2)).unwrap(), vec![0.0, 0.0]);
        assert_eq!(eval_double_layer(&mesh, &z, &targets, &tg, 5, kd(0.2)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_impulse() {
        let mesh = circle_mesh(16);
        let tg = TimeGrid::new(0.01, 6).unwrap();
        let kk = kd(0.2);
        let mut psi = SpaceTimeDensity::zeros(6, 16);
        psi.set(0, 3, 1.0);
        let x = vec2(0.9, 0.2);
        for j in 1..=6 {
            let tau = (j as f64 - 0.5) * 0.01;
            let sl = eval_single_layer(&mesh, &psi, &[x], &tg, j, kk).unwrap()[0];
            let want = 0.2 * 0.01 * mesh.lengths[3] * kernel_value(x - mesh.centers[3], tau, kk);
            assert_relative_eq!(sl, want, max_relative = 1e-13);
            let dl = eval_double_layer(&mesh, &psi, &[x], &tg, j, kk).unwrap()[0];
            // The double layer kernel is the derivative in the source point y.
            let want = 0.2
                * 0.01
                * mesh.lengths[3]
                * kernel_normal_derivative(mesh.centers[3] - x, mesh.normals[3], tau, kk).unwrap();
            assert_relative_eq!(dl, want, max_relative = 1e-12);
        }
        assert_eq!(eval_single_layer(&mesh, &psi, &[x], &tg, 0, kk).unwrap()[0], 0.0);
    }

    #[test]
    fn rejects_targets_on_nodes() {
        let mesh = circle_mesh(16);
        let tg = TimeGrid::new(0.01, 2).unwrap();
        let psi = SpaceTimeDensity::zeros(2, 16);
        let r = eval_single_layer(&mesh, &psi, &[vec2(0.0, 0.0), mesh.centers[4]], &tg, 2, kd(1.0));
        assert_eq!(r, Err(Error::TargetOnBoundary { index: 1 }));
    }

    #[test]
    fn flipping_normals_negates_double_layer() {
        let mesh = circle_mesh(16);
        let flipped = mesh.with_flipped_normals();
        let tg = TimeGrid::new(0.01, 4).unwrap();
        let psi = random_density(4, 16, 3);
        let x = [vec2(0.45, 0.6), vec2(1.1, 0.3)];
        let a = eval_double_layer(&mesh, &psi, &x, &tg, 4, kd(0.3)).unwrap();
        let b = eval_double_layer(&flipped, &psi, &x, &tg, 4, kd(0.3)).unwrap();
        for (a, b) in a.iter().zip(&b) {
            assert_relative_eq!(*a, -*b, max_relative = 1e-14);
        }
    }

    #[test]
    fn causality_is_exact() {
        let mesh = circle_mesh(16);
        let tg = TimeGrid::new(0.01, 8).unwrap();
        let psi = random_density(8, 16, 9);
        let mut cut = psi.clone();
        for m in 4..8 {
            cut.row_mut(m).fill(0.0);
        }
        let x = [vec2(0.45, 0.6)];
        for j in 0..=4 {
            let a = eval_layers(&mesh, &[LayerSource { single: Some((1.0, &psi)), double: Some((1.0, &psi)) }], &x, &tg, &[j], kd(0.2)).unwrap();
            let b = eval_layers(&mesh, &[LayerSource { single: Some((1.0, &cut)), double: Some((1.0, &cut)) }], &x, &tg, &[j], kd(0.2)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn multi_step_matches_single_time_evaluation() {
        let mesh = circle_mesh(24);
        let tg = TimeGrid::new(0.02, 10).unwrap();
        let s = random_density(10, 24, 1);
        let d = random_density(10, 24, 2);
        let src = LayerSource { single: Some((0.7, &s)), double: Some((-1.3, &d)) };
        let targets = [vec2(0.52, 0.47), vec2(0.1, 0.95), vec2(0.74, 0.5)];
        let steps = [0, 3, 7, 10];
        let all = eval_layers(&mesh, &[src], &targets, &tg, &steps, kd(0.25)).unwrap();
        for (si, &j) in steps.iter().enumerate() {
            for (ti, &x) in targets.iter().enumerate() {
                let v = eval_layers_at(&mesh, &src, x, tg.eval_time(j), j, &tg, kd(0.25)).unwrap();
                assert_relative_eq!(all[0][si][ti], v, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = circle_mesh(24);
        let tg = TimeGrid::new(0.02, 10).unwrap();
        let s = random_density(10, 24, 4);
        let d = random_density(10, 24, 5);
        let src = LayerSource { single: Some((1.0, &s)), double: Some((0.5, &d)) };
        let x = vec2(0.58, 0.41);
        let g = eval_layers_gradient(&mesh, &[src], &[x], &tg, &[10], kd(0.2)).unwrap()[0][0][0];
        let h = 1e-6;
        let f = |p: Vec2| eval_layers(&mesh, &[src], &[p], &tg, &[10], kd(0.2)).unwrap()[0][0][0];
        let gx = (f(x + vec2(h, 0.0)) - f(x - vec2(h, 0.0))) / (2.0 * h);
        let gy = (f(x + vec2(0.0, h)) - f(x - vec2(0.0, h))) / (2.0 * h);
        assert_relative_eq!(g.x, gx, max_relative = 1e-6);
        assert_relative_eq!(g.y, gy, max_relative = 1e-6);
    }

    #[test]
    fn operator_blocks() {
        let mesh = circle_mesh(32);
        let tg = TimeGrid::new(0.01, 5).unwrap();
        let kk = kd(0.2);
        let v = assemble_operator(OperatorKind::Single, &mesh, &tg, kk).unwrap();
        let kop = assemble_operator(OperatorKind::Double, &mesh, &tg, kk).unwrap();
        assert_eq!(v.num_blocks(), 5);
        for j in 0..32 {
            assert_relative_eq!(
                v.entry(0, j, j),
                mesh.lengths[j] / (2.0 * PI * 0.2 * 0.01),
                max_relative = 1e-14
            );
            assert_eq!(kop.entry(2, j, j), 0.0);
        }
        for i in 0..5 {
            let b = v.block(i);
            assert_relative_eq!(b.clone(), b.transpose(), max_relative = 1e-12);
        }
        let longer = assemble_operator(OperatorKind::Single, &mesh, &TimeGrid::new(0.01, 9).unwrap(), kk).unwrap();
        for i in 0..5 {
            assert_eq!(v.block(i), longer.block(i));
        }
    }

    #[test]
    fn apply_matches_dense_oracle() {
        // Four unequal segments on a coarse kite.
        let curve = make_curve(Shape::Kite { center: vec2(0.0, 0.0), scale: 0.3 }).unwrap();
        let full = discretize(&curve, 8).unwrap();
        let mesh = BoundaryMesh {
            centers: full.centers[..4].to_vec(),
            normals: full.normals[..4].to_vec(),
            lengths: full.lengths[..4].to_vec(),
            params: full.params[..4].to_vec(),
            curve,
        };
        let tg = TimeGrid::new(0.05, 3).unwrap();
        let kk = kd(0.4);
        let psi = random_density(3, 4, 11);
        for kind in [OperatorKind::Single, OperatorKind::Double] {
            let op = assemble_operator(kind, &mesh, &tg, kk).unwrap();
            let mut dense = DMatrix::<f64>::zeros(12, 12);
            for j in 0..3 {
                for m in 0..=j {
                    let tau = (j - m) as f64 * 0.05 + 0.025;
                    for r in 0..4 {
                        for c in 0..4 {
                            let d = mesh.centers[r] - mesh.centers[c];
                            let kv = kernel_value(d, tau, kk);
                            let e = match kind {
                                OperatorKind::Single => kv,
                                OperatorKind::Double => kv * d.dot(&mesh.normals[c]) / (2.0 * 0.4 * tau),
                            };
                            dense[(4 * j + r, 4 * m + c)] = 0.4 * 0.05 * mesh.lengths[c] * e;
                        }
                    }
                }
            }
            let want = &dense * nalgebra::DVector::from_column_slice(psi.as_slice());
            let got = apply_operator(&op, &psi).unwrap();
            for (a, b) in got.as_slice().iter().zip(want.iter()) {
                assert!((a - b).abs() <= 1e-13 * want.amax().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn apply_with_one_block() {
        let mesh = circle_mesh(8);
        let tg = TimeGrid::new(0.01, 1).unwrap();
        let op = assemble_operator(OperatorKind::Single, &mesh, &tg, kd(0.2)).unwrap();
        let psi = random_density(1, 8, 5);
        let out = apply_operator(&op, &psi).unwrap();
        let want = op.block(0) * nalgebra::DVector::from_column_slice(psi.row(0)) * (0.2 * 0.01);
        for (a, b) in out.row(0).iter().zip(want.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
        assert!(apply_operator(&op, &SpaceTimeDensity::zeros(2, 8)).is_err());
    }

    #[test]
    fn forward_solve_round_trip() {
        let mesh = circle_mesh(32);
        let tg = TimeGrid::new(0.002, 40).unwrap();
        let op = assemble_operator(OperatorKind::Single, &mesh, &tg, kd(0.2)).unwrap();
        let psi = random_density(40, 32, 17);
        let rhs = apply_operator(&op, &psi).unwrap();
        let report = forward_block_solve_report(&op, &rhs).unwrap();
        let err = report.solution.axpy(-1.0, &psi).unwrap().max_abs() / psi.max_abs();
        assert!(err < 1e-10, "round trip error {err}");
        assert!(report.residual < 1e-10);
        assert!(report.condition > 1.0 && report.condition < CONDITION_LIMIT);

        let zero = forward_block_solve(&op, &SpaceTimeDensity::zeros(40, 32)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn ill_conditioned_first_block_is_reported() {
        // A time step far too large for the spacing makes V_{1/2} nearly rank one.
        let mesh = circle_mesh(64);
        let tg = TimeGrid::new(1e4, 2).unwrap();
        let op = assemble_operator(OperatorKind::Single, &mesh, &tg, kd(1.0)).unwrap();
        let rhs = SpaceTimeDensity::from_fn(2, 64, |_, _| 1.0);
        assert!(matches!(forward_block_solve(&op, &rhs), Err(Error::IllConditioned { .. })));
    }
}
