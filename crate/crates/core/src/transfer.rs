//! Ulam discretisation of the Perron-Frobenius operator with respect to
//! Lebesgue measure.
//!
//! `P[i][j] = Leb(A_i ∩ T^{-1} A_j) / Leb(A_i)` is computed from exact branch
//! preimages of the mesh points. Densities are piecewise constant on the mesh;
//! internally the operator pushes cell masses `m_i = h_i Leb(A_i)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inducing::{compute_yn, Y_LO};
use crate::maps::{Branch, Formula, MapKind, MapSpec};

/// Row sums must equal one to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Preimages `y_n` inserted as mesh boundaries for Manneville-Pomeau maps.
pub const MARKOV_DEPTH: usize = 64;

/// Cell boundaries `0 = t_0 < t_1 < ... < t_M = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    points: Vec<f64>,
    gamma: f64,
}

impl Mesh {
    /// `t_i = (i / M)^gamma`.
    pub fn graded(cells: usize, gamma: f64) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidParameter(format!("mesh needs at least 2 cells, got {cells}")));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("grading exponent must be >= 1, got {gamma}")));
        }
        let m = cells as f64;
        let points = (0..=cells).map(|i| (i as f64 / m).powf(gamma)).collect();
        Ok(Self { points, gamma })
    }

    pub fn uniform(cells: usize) -> Result<Self> {
        Self::graded(cells, 1.0)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 || points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(
                "mesh points must start at 0, end at 1 and define at least 2 cells".into(),
            ));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("mesh points must be strictly increasing".into()));
        }
        Ok(Self { points, gamma: f64::NAN })
    }

    /// Adds extra boundaries, keeping the grading exponent for reference.
    pub fn with_breakpoints(&self, extra: &[f64]) -> Self {
        let mut points = self.points.clone();
        points.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < 1.0));
        points.sort_by(f64::total_cmp);
        points.dedup();
        Self {
            points,
            gamma: self.gamma,
        }
    }

    /// Graded mesh for a Manneville-Pomeau map with boundaries at 1/2, 3/4 and
    /// at `y_n` for `n <= 64`. The default grading is `max(2, 1 + alpha)`.
    pub fn for_manpom(map: &MapSpec, cells: usize, gamma: Option<f64>) -> Result<Self> {
        let alpha = map.alpha().ok_or_else(|| {
            Error::InvalidParameter(format!("expected a Manneville-Pomeau map, got {map}"))
        })?;
        let gamma = gamma.unwrap_or_else(|| default_gamma(alpha));
        let base = Self::graded(cells, gamma)?;
        let mut extra = vec![0.5, 0.75];
        if matches!(map.kind(), MapKind::ManPom { .. }) {
            extra.extend_from_slice(&compute_yn(map, MARKOV_DEPTH)?.y_seq()[1..]);
        }
        Ok(base.with_breakpoints(&extra))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    #[inline]
    pub fn width(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    #[inline]
    pub fn mid(&self, i: usize) -> f64 {
        0.5 * (self.points[i] + self.points[i + 1])
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.cells()).map(|i| self.width(i)).collect()
    }

    pub fn mids(&self) -> Vec<f64> {
        (0..self.cells()).map(|i| self.mid(i)).collect()
    }

    /// Index of the cell `[t_i, t_{i+1})` containing `x` (the last cell is closed).
    pub fn cell_of(&self, x: f64) -> usize {
        let k = self.points.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.cells() - 1)
    }

    /// Position of `x` among the boundaries, if it is one.
    pub fn boundary_index(&self, x: f64) -> Option<usize> {
        self.points.binary_search_by(|t| t.total_cmp(&x)).ok()
    }
}

pub fn default_gamma(alpha: f64) -> f64 {
    (1.0 + alpha).max(2.0)
}

/// Compressed sparse rows.
#[derive(Debug, Clone, Default)]
struct Csr {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    #[inline]
    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.ptr[i]..self.ptr[i + 1];
        self.idx[r.clone()].iter().map(|&j| j as usize).zip(self.val[r].iter().copied())
    }

    fn transpose(&self, ncols: usize) -> Csr {
        let mut counts = vec![0usize; ncols + 1];
        for &j in &self.idx {
            counts[j as usize + 1] += 1;
        }
        for k in 0..ncols {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut idx = vec![0u32; self.idx.len()];
        let mut val = vec![0.0; self.val.len()];
        for i in 0..self.ptr.len() - 1 {
            for (j, v) in self.row(i) {
                let at = fill[j];
                idx[at] = i as u32;
                val[at] = v;
                fill[j] += 1;
            }
        }
        Csr { ptr: counts, idx, val }
    }
}

/// Finite-rank approximation of the transfer operator.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    map: MapSpec,
    mesh: Mesh,
    widths: Vec<f64>,
    rows: Csr,
    cols: Csr,
}

/// Builds the Ulam matrix from exact preimage intersections.
pub fn build_ulam(map: &MapSpec, mesh: &Mesh) -> Result<UlamOperator> {
    let t = mesh.points();
    let cells = mesh.cells();
    let caches: Vec<PreimageCache> = map
        .branches()
        .iter()
        .map(|b| preimage_cache(b, t))
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<(u32, f64)>> = (0..cells)
        .into_par_iter()
        .map(|i| {
            let mut entries = Vec::new();
            for (b, cache) in map.branches().iter().zip(&caches) {
                let a = t[i].max(b.lo);
                let z = t[i + 1].min(b.hi);
                if z <= a {
                    continue;
                }
                row_entries(mesh, b, cache, a, z, &mut entries);
            }
            entries.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
            for (j, w) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += w,
                    _ => merged.push((j, w)),
                }
            }
            let width = mesh.width(i);
            merged.retain(|e| e.1 > 0.0);
            for e in &mut merged {
                e.1 /= width;
            }
            merged
        })
        .collect();

    let widths = mesh.widths();
    let mut csr = Csr {
        ptr: Vec::with_capacity(cells + 1),
        ..Csr::default()
    };
    csr.ptr.push(0);
    for (i, row) in rows.into_iter().enumerate() {
        let sum: f64 = row.iter().map(|e| e.1).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NonConvergence {
                context: format!(
                    "Ulam row {i} on [{}, {}) sums to {sum}",
                    t[i],
                    t[i + 1]
                ),
                iterations: 0,
                increment: sum - 1.0,
            });
        }
        for (j, p) in row {
            csr.idx.push(j);
            csr.val.push(p);
        }
        csr.ptr.push(csr.idx.len());
    }
    let cols = csr.transpose(cells);
    Ok(UlamOperator {
        map: map.clone(),
        mesh: mesh.clone(),
        widths,
        rows: csr,
        cols,
    })
}

/// Per-branch preimage data for the mesh points in the branch's range.
enum PreimageCache {
    Affine(f64),
    /// `d_j = t_j - T^{-1}(t_j) = x (2x)^alpha` at `x = T^{-1}(t_j)`. Working with
    /// offsets keeps cell-escape lengths accurate where `T(x) - x` is below
    /// the resolution of `x`.
    NeutralOffsets(Vec<f64>),
    Inverses(Vec<f64>),
}

fn preimage_cache(b: &Branch, t: &[f64]) -> Result<PreimageCache> {
    if let Some(slope) = b.formula.is_affine() {
        return Ok(PreimageCache::Affine(slope));
    }
    let (fa, fb) = b.image();
    let (lo, hi) = (fa.min(fb), fa.max(fb));
    let inverses = t
        .par_iter()
        .map(|&y| if y >= lo && y <= hi { b.inverse(y) } else { Ok(f64::NAN) })
        .collect::<Result<Vec<f64>>>()?;
    Ok(match b.formula {
        Formula::NeutralLeft { alpha } => {
            PreimageCache::NeutralOffsets(inverses.iter().map(|&x| x * (2.0 * x).powf(alpha)).collect())
        }
        _ => PreimageCache::Inverses(inverses),
    })
}

/// Appends `(j, Leb([a, z) ∩ T^{-1} A_j))` for one branch piece of a cell.
fn row_entries(mesh: &Mesh, b: &Branch, cache: &PreimageCache, a: f64, z: f64, out: &mut Vec<(u32, f64)>) {
    let t = mesh.points();
    let (fa, fz) = (b.value(a).clamp(0.0, 1.0), b.value(z).clamp(0.0, 1.0));
    let increasing = b.increasing();
    let (ylo, yhi) = if increasing { (fa, fz) } else { (fz, fa) };
    if !(yhi > ylo) {
        return;
    }
    let first = mesh.cell_of(ylo);
    // Last cell whose left boundary lies strictly below yhi.
    let last = t.partition_point(|&p| p < yhi).saturating_sub(1).min(mesh.cells() - 1);

    match cache {
        PreimageCache::Affine(slope) => {
            let s = slope.abs();
            for j in first..=last {
                let len = yhi.min(t[j + 1]) - ylo.max(t[j]);
                if len > 0.0 {
                    out.push((j as u32, len / s));
                }
            }
        }
        PreimageCache::NeutralOffsets(d) => {
            // T(x) = x + g(x) is increasing; the preimage of t_j is t_j - d_j.
            // T(a) and T(z) may round onto a or z, so the range of image
            // cells is settled with the offsets.
            let (mut first, mut last) = (first, last);
            while first > 0 && (t[first] - a) - d[first] > 0.0 {
                first -= 1;
            }
            while last + 1 < mesh.cells() && (z - t[last + 1]) + d[last + 1] > 0.0 {
                last += 1;
            }
            for j in first..=last {
                let len = match (j == first, j == last) {
                    (true, true) => z - a,
                    (true, false) => (t[j + 1] - a) - d[j + 1],
                    (false, true) => (z - t[j]) + d[j],
                    (false, false) => (t[j + 1] - t[j]) - (d[j + 1] - d[j]),
                };
                if len > 0.0 {
                    out.push((j as u32, len.min(z - a)));
                }
            }
        }
        PreimageCache::Inverses(inv) => {
            // Preimages of the cut points ylo < t_{first+1} < ... < t_last < yhi,
            // forced monotone and into [a, z] so the pieces telescope to z - a.
            let pre = |j: usize| inv[j].clamp(a, z);
            let (pre_lo, pre_hi) = if increasing { (a, z) } else { (z, a) };
            let mut prev = pre_lo;
            for j in first..=last {
                let next = if j == last { pre_hi } else { pre(j + 1) };
                let len = if increasing {
                    let next = next.max(prev);
                    let len = next - prev;
                    prev = next;
                    len
                } else {
                    let next = next.min(prev);
                    let len = prev - next;
                    prev = next;
                    len
                };
                if len > 0.0 {
                    out.push((j as u32, len));
                }
            }
        }
    }
}

impl UlamOperator {
    pub fn map(&self) -> &MapSpec {
        &self.map
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn cells(&self) -> usize {
        self.mesh.cells()
    }

    pub fn nnz(&self) -> usize {
        self.rows.idx.len()
    }

    /// Row `i` of `P` as `(j, P[i][j])` pairs.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        self.rows.row(i).collect()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// One step of the cell-mass chain: `m'_j = sum_i m_i P[i][j]`.
    ///
    /// Each output is summed in ascending `i`, so the result does not depend
    /// on the number of worker threads.
    pub fn push_mass(&self, mass: &[f64]) -> Vec<f64> {
        (0..self.cells())
            .into_par_iter()
            .map(|j| self.cols.row(j).map(|(i, p)| mass[i] * p).sum())
            .collect()
    }

    /// One application of the discretised operator to a density.
    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        let mass: Vec<f64> = density.iter().zip(&self.widths).map(|(h, w)| h * w).collect();
        self.push_mass(&mass)
            .iter()
            .zip(&self.widths)
            .map(|(m, w)| m / w)
            .collect()
    }

    pub fn integral(&self, density: &[f64]) -> f64 {
        density.iter().zip(&self.widths).map(|(h, w)| h * w).sum()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() == self.cells() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "vector has {} entries, mesh has {} cells",
                f.len(),
                self.cells()
            )))
        }
    }
}

/// `L^n f` for a per-cell density `f`.
pub fn pf_iterate(op: &UlamOperator, f: &[f64], n: usize) -> Result<Vec<f64>> {
    op.check_len(f)?;
    let mut h = f.to_vec();
    for _ in 0..n {
        h = op.apply(&h);
    }
    Ok(h)
}

/// `[∫|L^n f| dλ for n = 0..=n_max]` for a zero-mean `f`.
pub fn exactness_decay(op: &UlamOperator, f: &[f64], n_max: usize) -> Result<Vec<f64>> {
    op.check_len(f)?;
    let mean = op.integral(f);
    if mean.abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("f must have zero integral, got {mean}")));
    }
    let mut mass: Vec<f64> = f.iter().zip(op.widths()).map(|(h, w)| h * w).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(mass.iter().map(|m| m.abs()).sum());
    for _ in 0..n_max {
        mass = op.push_mass(&mass);
        out.push(mass.iter().map(|m| m.abs()).sum());
    }
    Ok(out)
}

/// `[∫_A L^n f dλ for n = 0..=n_max]` where `A` is the union of cells whose
/// midpoints lie in `[region.0, region.1]`.
pub fn finite_set_decay(op: &UlamOperator, region: (f64, f64), f: &[f64], n_max: usize) -> Result<Vec<f64>> {
    op.check_len(f)?;
    if !(region.0 > 0.0 && region.1 >= region.0) {
        return Err(Error::InvalidParameter(format!(
            "region must be [x0, x1] with 0 < x0 <= x1, got {region:?}"
        )));
    }
    let in_a: Vec<bool> = op
        .mesh()
        .mids()
        .iter()
        .map(|&x| x >= region.0 && x <= region.1)
        .collect();
    let over_a = |m: &[f64]| -> f64 { m.iter().zip(&in_a).filter(|(_, &a)| a).map(|(v, _)| v).sum() };
    let mut mass: Vec<f64> = f.iter().zip(op.widths()).map(|(h, w)| h * w).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(over_a(&mass));
    for _ in 0..n_max {
        mass = op.push_mass(&mass);
        out.push(over_a(&mass));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `∫ h dλ = 1`.
    Probability,
    /// `h = 1` on the rightmost cell of `Y`; used when the invariant measure is infinite.
    PinnedRightCell,
}

/// Piecewise-constant invariant density.
#[derive(Debug, Clone, Serialize)]
pub struct DensityVector {
    pub h: Vec<f64>,
    pub mids: Vec<f64>,
    pub widths: Vec<f64>,
    pub normalization: Normalization,
    pub iterations: usize,
    /// L¹ change of the normalised iterate in the last step.
    pub increment: f64,
    /// `Σ|Lm - m| / Σ m` over cells with finite, non-absorbing mass.
    pub residual: f64,
    /// `∫ h dλ` after normalisation.
    pub mass: f64,
    /// Cells from which the discretised chain cannot escape in binary64.
    pub absorbing_cells: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowRatio {
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
    pub cells: usize,
}

impl DensityVector {
    /// sup / inf of `h_i * mid_i^alpha` over cells with midpoints in `[lo, hi]`.
    pub fn weighted_ratio(&self, alpha: f64, lo: f64, hi: f64) -> WindowRatio {
        let (mut sup, mut inf, mut cells) = (0.0f64, f64::INFINITY, 0);
        for (&h, &x) in self.h.iter().zip(&self.mids) {
            if x >= lo && x <= hi {
                let v = h * x.powf(alpha);
                sup = sup.max(v);
                inf = inf.min(v);
                cells += 1;
            }
        }
        WindowRatio {
            sup,
            inf,
            ratio: sup / inf,
            cells,
        }
    }

    /// L¹ distance to another density restricted to `[lo, hi]`, evaluated on
    /// the finer of the two meshes by point lookup at its cell midpoints.
    pub fn l1_distance_on(&self, other: &DensityVector, lo: f64, hi: f64) -> f64 {
        let (fine, coarse) = if self.h.len() >= other.h.len() { (self, other) } else { (other, self) };
        let mut coarse_edges: Vec<f64> = coarse.mids.iter().zip(&coarse.widths).map(|(m, w)| m - 0.5 * w).collect();
        coarse_edges.push(1.0);
        let mut acc = 0.0;
        for ((&x, &w), &h) in fine.mids.iter().zip(&fine.widths).zip(&fine.h) {
            if x < lo || x > hi {
                continue;
            }
            let k = coarse_edges.partition_point(|&e| e <= x).saturating_sub(1).min(coarse.h.len() - 1);
            acc += (h - coarse.h[k]).abs() * w;
        }
        acc
    }

    pub fn integral_on(&self, lo: f64, hi: f64) -> f64 {
        self.h
            .iter()
            .zip(&self.mids)
            .zip(&self.widths)
            .filter(|((_, &x), _)| x >= lo && x <= hi)
            .map(|((h, _), w)| h * w)
            .sum()
    }
}

/// Stationary density of the Ulam chain.
///
/// For Manneville-Pomeau maps on meshes with a boundary at 1/2 the power
/// iteration runs on the chain induced on `Y`: cells left of 1/2 only move
/// rightwards, so their masses follow from the `Y` masses by one forward
/// substitution per sweep. Other maps use plain power iteration with Cesàro
/// averaging of the last ten iterates when the increments stall.
pub fn invariant_density(op: &UlamOperator, tol: f64, max_iter: usize) -> Result<DensityVector> {
    let normalization = match op.map().kind() {
        MapKind::ManPom { alpha } if *alpha >= 1.0 => Normalization::PinnedRightCell,
        _ => Normalization::Probability,
    };
    let split = match op.map().kind() {
        MapKind::ManPom { .. } => op.mesh().boundary_index(Y_LO).filter(|&s| left_block_is_triangular(op, s)),
        _ => None,
    };
    let (mass, iterations, increment, absorbing) = match split {
        Some(s) => induced_power_iteration(op, s, tol, max_iter)?,
        None => plain_power_iteration(op, tol, max_iter)?,
    };
    finish_density(op, mass, normalization, iterations, increment, absorbing)
}

fn left_block_is_triangular(op: &UlamOperator, split: usize) -> bool {
    (0..split).all(|i| op.rows.row(i).all(|(j, _)| j >= i))
}

fn l1_normalise(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
}

/// Returns full cell masses, iteration count, last increment and number of
/// absorbing cells.
fn induced_power_iteration(
    op: &UlamOperator,
    split: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64, usize)> {
    let cells = op.cells();
    let escape: Vec<f64> = (0..split)
        .map(|j| op.rows.row(j).filter(|&(k, _)| k != j).map(|(_, p)| p).sum())
        .collect();
    let absorbing = escape.iter().filter(|&&e| e <= 0.0).count();

    let mut y_mass: Vec<f64> = op.widths()[split..].to_vec();
    l1_normalise(&mut y_mass);
    let mut left = vec![0.0; split];
    let mut increment = f64::INFINITY;
    for iter in 1..=max_iter {
        let mut inflow = vec![0.0; split];
        let mut next_y = vec![0.0; cells - split];
        for (off, &m) in y_mass.iter().enumerate() {
            for (j, p) in op.rows.row(split + off) {
                if j < split {
                    inflow[j] += m * p;
                } else {
                    next_y[j - split] += m * p;
                }
            }
        }
        for j in 0..split {
            let m = if escape[j] > 0.0 { inflow[j] / escape[j] } else { 0.0 };
            left[j] = m;
            if m == 0.0 {
                continue;
            }
            for (k, p) in op.rows.row(j) {
                if k == j {
                    continue;
                }
                if k < split {
                    inflow[k] += m * p;
                } else {
                    next_y[k - split] += m * p;
                }
            }
        }
        let scale: f64 = next_y.iter().sum();
        if !(scale > 0.0) {
            return Err(Error::NonConvergence {
                context: "induced chain lost all mass".into(),
                iterations: iter,
                increment,
            });
        }
        next_y.iter_mut().for_each(|x| *x /= scale);
        increment = next_y.iter().zip(&y_mass).map(|(a, b)| (a - b).abs()).sum();
        y_mass = next_y;
        if increment < tol {
            // Recompute the left masses for the final Y masses.
            let mut full = left_masses(op, split, &escape, &y_mass);
            full.extend_from_slice(&y_mass);
            return Ok((full, iter, increment, absorbing));
        }
    }
    Err(Error::NonConvergence {
        context: "induced power iteration".into(),
        iterations: max_iter,
        increment,
    })
}

fn left_masses(op: &UlamOperator, split: usize, escape: &[f64], y_mass: &[f64]) -> Vec<f64> {
    let mut inflow = vec![0.0; split];
    for (off, &m) in y_mass.iter().enumerate() {
        for (j, p) in op.rows.row(split + off) {
            if j < split {
                inflow[j] += m * p;
            }
        }
    }
    let mut left = vec![0.0; split];
    for j in 0..split {
        let m = if escape[j] > 0.0 { inflow[j] / escape[j] } else { 0.0 };
        left[j] = m;
        for (k, p) in op.rows.row(j) {
            if k != j && k < split {
                inflow[k] += m * p;
            }
        }
    }
    left
}

fn plain_power_iteration(op: &UlamOperator, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64, usize)> {
    const WINDOW: usize = 10;
    let mut mass = op.widths().to_vec();
    l1_normalise(&mut mass);
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(WINDOW);
    let mut increments: Vec<f64> = Vec::new();
    for iter in 1..=max_iter {
        let mut next = op.push_mass(&mass);
        l1_normalise(&mut next);
        let inc: f64 = next.iter().zip(&mass).map(|(a, b)| (a - b).abs()).sum();
        increments.push(inc);
        mass = next;
        if inc < tol {
            return Ok((mass, iter, inc, 0));
        }
        history.push(mass.clone());
        if history.len() > WINDOW {
            history.remove(0);
        }
        let k = increments.len();
        let stalled = k >= 2 * WINDOW && increments[k - 1] > 0.99 * increments[k - 1 - WINDOW];
        if stalled && history.len() == WINDOW {
            let mut avg = vec![0.0; mass.len()];
            for h in &history {
                avg.iter_mut().zip(h).for_each(|(a, b)| *a += b);
            }
            avg.iter_mut().for_each(|a| *a /= WINDOW as f64);
            mass = avg;
            history.clear();
            increments.clear();
        }
    }
    Err(Error::NonConvergence {
        context: "power iteration".into(),
        iterations: max_iter,
        increment: increments.last().copied().unwrap_or(f64::NAN),
    })
}

fn finish_density(
    op: &UlamOperator,
    mass: Vec<f64>,
    normalization: Normalization,
    iterations: usize,
    increment: f64,
    absorbing_cells: usize,
) -> Result<DensityVector> {
    let pushed = op.push_mass(&mass);
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in pushed.iter().zip(&mass) {
        if b.is_finite() && *b > 0.0 {
            num += (a - b).abs();
            den += b;
        }
    }
    let residual = if den > 0.0 { num / den } else { f64::NAN };
    let widths = op.widths().to_vec();
    let mut h: Vec<f64> = mass.iter().zip(&widths).map(|(m, w)| m / w).collect();
    let scale = match normalization {
        Normalization::Probability => mass.iter().sum::<f64>(),
        Normalization::PinnedRightCell => *h.last().unwrap(),
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::NonConvergence {
            context: format!("cannot normalise density (scale {scale})"),
            iterations,
            increment,
        });
    }
    h.iter_mut().for_each(|x| *x /= scale);
    let total = h.iter().zip(&widths).map(|(h, w)| h * w).sum();
    Ok(DensityVector {
        h,
        mids: op.mesh().mids(),
        widths,
        normalization,
        iterations,
        increment,
        residual,
        mass: total,
        absorbing_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn mp(a: f64) -> MapSpec {
        MapSpec::manpom(a).unwrap()
    }

    #[test]
    fn mesh_construction() {
        let m = Mesh::graded(8, 2.0).unwrap();
        assert_eq!(m.cells(), 8);
        assert_eq!(m.points()[0], 0.0);
        assert_eq!(m.points()[8], 1.0);
        assert_eq!(m.points()[4], 0.25);
        assert!(Mesh::graded(1, 2.0).is_err());
        assert!(Mesh::graded(8, 0.5).is_err());
        assert!(Mesh::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());

        let u = Mesh::uniform(4).unwrap();
        assert_eq!(u.cell_of(0.0), 0);
        assert_eq!(u.cell_of(0.25), 1);
        assert_eq!(u.cell_of(0.9999), 3);
        assert_eq!(u.cell_of(1.0), 3);
        assert_eq!(u.boundary_index(0.5), Some(2));
        assert_eq!(u.boundary_index(0.3), None);

        let mp_mesh = Mesh::for_manpom(&mp(2.0), 256, None).unwrap();
        assert_eq!(mp_mesh.gamma(), 3.0);
        assert!(mp_mesh.boundary_index(0.5).is_some());
        assert!(mp_mesh.boundary_index(0.75).is_some());
        let ys = compute_yn(&mp(2.0), MARKOV_DEPTH).unwrap();
        for y in ys.y_seq() {
            assert!(mp_mesh.boundary_index(*y).is_some());
        }
    }

    #[test]
    fn doubling_rows_split_evenly() {
        let op = build_ulam(&MapSpec::doubling(), &Mesh::uniform(4).unwrap()).unwrap();
        for i in 0..4 {
            let row = op.row(i);
            assert_eq!(row.len(), 2, "row {i}: {row:?}");
            for (_, p) in row {
                assert_eq!(p, 0.5);
            }
        }
        assert_eq!(op.row(0), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(op.row(3), vec![(2, 0.5), (3, 0.5)]);
    }

    #[test]
    fn rows_are_stochastic() {
        let maps = [
            mp(0.5),
            mp(2.0),
            mp(4.0),
            MapSpec::manpom_two(1.5, 2.0).unwrap(),
            MapSpec::doubling(),
            MapSpec::custom(vec![
                Branch::new(0.0, 0.3, crate::Formula::Affine { slope: 1.0 / 0.3, offset: 0.0 }),
                Branch::new(0.3, 1.0, crate::Formula::Affine { slope: -1.0 / 0.7, offset: 1.0 / 0.7 }),
            ])
            .unwrap(),
        ];
        for m in &maps {
            for mesh in [Mesh::uniform(97).unwrap(), Mesh::graded(300, 3.0).unwrap()] {
                let op = build_ulam(m, &mesh).unwrap();
                for i in 0..op.cells() {
                    let row = op.row(i);
                    assert!(row.iter().all(|e| e.1 >= 0.0));
                    let s: f64 = row.iter().map(|e| e.1).sum();
                    assert!((s - 1.0).abs() < 1e-10, "{m} row {i}: {s}");
                }
            }
        }
    }

    #[test]
    fn ulam_matches_monte_carlo_transitions() {
        // Oracle: empirical transition frequencies from uniform samples in each cell.
        let m = mp(1.0);
        let mesh = Mesh::uniform(2).unwrap();
        let op = build_ulam(&m, &mesh).unwrap();
        let n = 1_000_000;
        for i in 0..2 {
            let mut rng = StreamRng::new(5, i as u64, 0);
            let mut hits = [0u64; 2];
            for _ in 0..n {
                let x = rng.uniform_in(mesh.points()[i], mesh.points()[i + 1]);
                hits[mesh.cell_of(m.step(x))] += 1;
            }
            let row = op.row(i);
            for (j, p) in row {
                let freq = hits[j] as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
                assert!((freq - p).abs() < 3.0 * se, "cell {i}->{j}: {freq} vs {p}");
            }
        }
        // Leb{x in [0, 1/2): x(1 + 2x) < 1/2} / (1/2) = (sqrt 5 - 1) / 2.
        let p00 = op.row(0)[0].1;
        assert!((p00 - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_rows_match_monte_carlo() {
        let m = mp(2.0);
        let mesh = Mesh::for_manpom(&m, 512, None).unwrap();
        let op = build_ulam(&m, &mesh).unwrap();
        let mut pick = StreamRng::new(9, 0, 0);
        let n = 200_000;
        for r in 0..20 {
            let i = (pick.next_u64() % op.cells() as u64) as usize;
            let mut rng = StreamRng::new(9, 1, r);
            let mut hits = std::collections::HashMap::new();
            for _ in 0..n {
                let x = rng.uniform_in(mesh.points()[i], mesh.points()[i + 1]);
                *hits.entry(mesh.cell_of(m.step(x))).or_insert(0u64) += 1;
            }
            for (j, p) in op.row(i) {
                let freq = *hits.get(&j).unwrap_or(&0) as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((freq - p).abs() <= 4.0 * se + 1e-12, "cell {i}->{j}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn doubling_density_is_uniform() {
        for cells in [4, 64, 1024] {
            let op = build_ulam(&MapSpec::doubling(), &Mesh::uniform(cells).unwrap()).unwrap();
            let d = invariant_density(&op, 1e-12, 100).unwrap();
            assert_eq!(d.iterations, 1);
            assert_eq!(d.increment, 0.0);
            assert!(d.h.iter().all(|&h| h == 1.0), "{:?}", &d.h[..4]);
        }
    }

    #[test]
    fn doubling_odd_indicator_cancels() {
        let op = build_ulam(&MapSpec::doubling(), &Mesh::uniform(16).unwrap()).unwrap();
        let f: Vec<f64> = (0..16).map(|i| if i < 8 { 1.0 } else { -1.0 }).collect();
        let lf = pf_iterate(&op, &f, 1).unwrap();
        assert!(lf.iter().all(|&v| v == 0.0));
        let decay = exactness_decay(&op, &f, 5).unwrap();
        assert_eq!(decay, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(pf_iterate(&op, &f, 0).unwrap(), f);
    }

    #[test]
    fn mass_is_conserved() {
        let m = mp(1.5);
        let op = build_ulam(&m, &Mesh::for_manpom(&m, 400, None).unwrap()).unwrap();
        let mut rng = StreamRng::new(2, 0, 0);
        let f: Vec<f64> = (0..op.cells()).map(|_| rng.uniform()).collect();
        let before = op.integral(&f);
        let after = op.integral(&pf_iterate(&op, &f, 50).unwrap());
        assert!((before - after).abs() < 1e-8);
    }

    #[test]
    fn zero_mean_is_required() {
        let op = build_ulam(&MapSpec::doubling(), &Mesh::uniform(4).unwrap()).unwrap();
        assert!(exactness_decay(&op, &[1.0; 4], 3).is_err());
        assert!(pf_iterate(&op, &[1.0; 3], 1).is_err());
        assert!(finite_set_decay(&op, (0.0, 1.0), &[1.0; 4], 3).is_err());
    }

    #[test]
    fn finite_density_bounds() {
        let m = mp(0.5);
        let op = build_ulam(&m, &Mesh::for_manpom(&m, 4096, None).unwrap()).unwrap();
        let d = invariant_density(&op, 1e-12, 10_000).unwrap();
        assert_eq!(d.normalization, Normalization::Probability);
        assert!((d.mass - 1.0).abs() < 1e-10);
        assert!(d.h.iter().all(|&h| h >= 0.0));
        let w = d.weighted_ratio(0.5, 1e-4, 1.0);
        assert!(w.ratio.is_finite() && w.ratio < 50.0, "{w:?}");
        assert!(d.residual < 1e-8, "{}", d.residual);

        // Plain power iteration on the same operator agrees.
        let (mass, _, _, _) = plain_power_iteration(&op, 1e-13, 100_000).unwrap();
        let total: f64 = mass.iter().sum();
        let dist: f64 = mass
            .iter()
            .zip(&d.h)
            .zip(op.widths())
            .map(|((m, h), w)| (m / total - h * w).abs())
            .sum();
        assert!(dist < 1e-8, "{dist}");
    }

    #[test]
    fn infinite_density_is_pinned_and_mass_grows() {
        let m = mp(2.0);
        let coarse = invariant_density(
            &build_ulam(&m, &Mesh::for_manpom(&m, 1024, None).unwrap()).unwrap(),
            1e-12,
            10_000,
        )
        .unwrap();
        let fine = invariant_density(
            &build_ulam(&m, &Mesh::for_manpom(&m, 8192, None).unwrap()).unwrap(),
            1e-12,
            10_000,
        )
        .unwrap();
        assert_eq!(fine.normalization, Normalization::PinnedRightCell);
        assert_eq!(*fine.h.last().unwrap(), 1.0);
        let w = fine.weighted_ratio(2.0, 1e-3, 1.0);
        assert!(w.ratio.is_finite() && w.ratio < 100.0, "{w:?}");
        assert!(fine.mass > coarse.mass, "{} vs {}", fine.mass, coarse.mass);
    }

    #[test]
    fn finite_set_decay_cases() {
        let m = mp(2.0);
        let op = build_ulam(&m, &Mesh::for_manpom(&m, 2048, None).unwrap()).unwrap();
        let zero = vec![0.0; op.cells()];
        assert!(finite_set_decay(&op, (0.5, 1.0), &zero, 10).unwrap().iter().all(|&v| v == 0.0));
        let one = vec![1.0; op.cells()];
        let d = finite_set_decay(&op, (0.5, 1.0), &one, 2000).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12);
        let tail: f64 = d[1800..].iter().sum::<f64>() / 201.0;
        assert!(tail < 0.1 * d[0], "{tail}");
    }
}
