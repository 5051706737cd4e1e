//! Cell-centred scalar fields on a uniform rectangular grid.
//!
//! Every distribution in the simulation (reference mixture, time-averaged
//! agent distribution, error field, individual deposits) is stored as a
//! [`ScalarField`]: one `f64` sample per cell centre, row-major with `x`
//! varying fastest. Integrals are midpoint Riemann sums weighted by the cell
//! area.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extent and resolution of the rectangular domain `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    /// 400 x 400 domain sampled on 200 x 200 cells.
    fn default() -> Self {
        Self {
            lx: 400.0,
            ly: 400.0,
            nx: 200,
            ny: 200,
        }
    }
}

impl GridSpec {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        let spec = Self { lx, ly, nx, ny };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx.is_finite() && self.lx > 0.0 && self.ly.is_finite() && self.ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive and finite (lx = {}, ly = {})",
                self.lx, self.ly
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per axis (nx = {}, ny = {})",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Quadrature weight of a single cell.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    #[inline]
    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new((ix as f64 + 0.5) * self.dx(), (iy as f64 + 0.5) * self.dy())
    }

    #[inline]
    pub fn center_of(&self, index: usize) -> Point {
        let (ix, iy) = self.coords(index);
        self.center(ix, iy)
    }

    pub fn diagonal(&self) -> f64 {
        self.lx.hypot(self.ly)
    }

    /// Closed-domain membership test.
    pub fn contains(&self, p: Point) -> bool {
        p.is_finite() && p.x >= 0.0 && p.x <= self.lx && p.y >= 0.0 && p.y <= self.ly
    }

    /// Cell containing `p`. Points on the upper boundary belong to the last cell.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let ix = ((p.x / self.dx()) as usize).min(self.nx - 1);
        let iy = ((p.y / self.dy()) as usize).min(self.ny - 1);
        Some((ix, iy))
    }

    pub fn cell_index_of(&self, p: Point) -> Option<usize> {
        self.cell_of(p).map(|(ix, iy)| self.index(ix, iy))
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.lx), p.y.clamp(0.0, self.ly))
    }

    fn describe(&self) -> String {
        format!("{}x{} cells over {}x{}", self.nx, self.ny, self.lx, self.ly)
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.describe(),
                actual: other.describe(),
            })
        }
    }
}

/// A position (or displacement) in domain length units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn distance_sq(self, other: Point) -> f64 {
        let d = self - other;
        d.x * d.x + d.y * d.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Symmetric positive-definite 2x2 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2 {
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Cov2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self> {
        if !(xx.is_finite() && xy.is_finite() && yy.is_finite()) {
            return Err(Error::InvalidCovariance("entries must be finite".into()));
        }
        if xx <= 0.0 || yy <= 0.0 {
            return Err(Error::InvalidCovariance(format!(
                "diagonal must be positive (got {xx}, {yy})"
            )));
        }
        let det = xx * yy - xy * xy;
        if det <= 0.0 {
            return Err(Error::InvalidCovariance(format!(
                "determinant must be positive (got {det})"
            )));
        }
        Ok(Self { xx, xy, yy })
    }

    pub fn diag(xx: f64, yy: f64) -> Result<Self> {
        Self::new(xx, 0.0, yy)
    }

    /// Builds from a full matrix, rejecting asymmetric input.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self> {
        if m[0][1] != m[1][0] {
            return Err(Error::InvalidCovariance(format!(
                "matrix is not symmetric ({} != {})",
                m[0][1], m[1][0]
            )));
        }
        Self::new(m[0][0], m[0][1], m[1][1])
    }

    pub fn to_matrix(self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn xx(&self) -> f64 {
        self.xx
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    /// Squared Mahalanobis length of the displacement `d`.
    #[inline]
    pub fn mahalanobis_sq(&self, d: Point) -> f64 {
        let det = self.det();
        (self.yy * d.x * d.x - 2.0 * self.xy * d.x * d.y + self.xx * d.y * d.y) / det
    }

    /// Bivariate normal density of the displacement `d`.
    #[inline]
    pub fn density(&self, d: Point) -> f64 {
        let norm = 1.0 / (2.0 * std::f64::consts::PI * self.det().sqrt());
        norm * (-0.5 * self.mahalanobis_sq(d)).exp()
    }
}

/// Boolean per-cell selection, e.g. a hole region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
}

impl CellMask {
    pub fn empty(spec: &GridSpec) -> Self {
        Self {
            nx: spec.nx,
            ny: spec.ny,
            cells: vec![false; spec.len()],
        }
    }

    pub fn from_fn(spec: &GridSpec, mut f: impl FnMut(usize, Point) -> bool) -> Self {
        let cells = (0..spec.len()).map(|i| f(i, spec.center_of(i))).collect();
        Self {
            nx: spec.nx,
            ny: spec.ny,
            cells,
        }
    }

    pub fn from_cells(nx: usize, ny: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cells", nx * ny),
                actual: format!("{} cells", cells.len()),
            });
        }
        Ok(Self { nx, ny, cells })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.cells[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.cells[index] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
    }

    pub fn union(&self, other: &CellMask) -> CellMask {
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(&a, &b)| a || b)
            .collect();
        CellMask {
            nx: self.nx,
            ny: self.ny,
            cells,
        }
    }

    pub fn complement(&self) -> CellMask {
        CellMask {
            nx: self.nx,
            ny: self.ny,
            cells: self.cells.iter().map(|&c| !c).collect(),
        }
    }

    pub fn intersects(&self, other: &CellMask) -> bool {
        self.cells.iter().zip(&other.cells).any(|(&a, &b)| a && b)
    }

    fn check_matches(&self, spec: &GridSpec) -> Result<()> {
        if self.nx == spec.nx && self.ny == spec.ny {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{}x{} mask", spec.nx, spec.ny),
                actual: format!("{}x{} mask", self.nx, self.ny),
            })
        }
    }
}

/// Dense grid of samples at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(spec.center_of(i))).collect();
        Self { spec, values }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", spec.len()),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(Self { spec, values })
    }

    /// Bivariate normal density sampled at every cell centre.
    pub fn gaussian(spec: GridSpec, mean: Point, cov: &Cov2) -> Self {
        Self::from_fn(spec, |c| cov.density(c - mean))
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    /// Sample of the cell containing `p`.
    pub fn sample(&self, p: Point) -> Result<f64> {
        self.spec
            .cell_index_of(p)
            .map(|i| self.values[i])
            .ok_or(Error::OutOfDomain { x: p.x, y: p.y })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        self.map(|v| v * factor)
    }

    /// Pointwise `self - other`.
    pub fn difference(&self, other: &ScalarField) -> Result<ScalarField> {
        self.spec.check_same(&other.spec)?;
        Ok(ScalarField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &ScalarField, factor: f64) -> Result<()> {
        self.spec.check_same(&other.spec)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Midpoint Riemann sum over the whole grid, or over `mask` when given.
    pub fn integrate(&self, mask: Option<&CellMask>) -> Result<f64> {
        let sum = match mask {
            None => self.values.iter().sum::<f64>(),
            Some(mask) => {
                mask.check_matches(&self.spec)?;
                self.values
                    .iter()
                    .zip(&mask.cells)
                    .filter_map(|(&v, &m)| m.then_some(v))
                    .sum::<f64>()
            }
        };
        Ok(sum * self.spec.cell_area())
    }

    /// Integral of `|self - other|`, optionally restricted to `mask`, without
    /// materialising the difference.
    pub fn l1_distance(&self, other: &ScalarField, mask: Option<&CellMask>) -> Result<f64> {
        self.spec.check_same(&other.spec)?;
        let pairs = self.values.iter().zip(&other.values);
        let sum = match mask {
            None => pairs.map(|(a, b)| (a - b).abs()).sum::<f64>(),
            Some(mask) => {
                mask.check_matches(&self.spec)?;
                pairs
                    .zip(&mask.cells)
                    .filter(|&(_, &m)| m)
                    .map(|((a, b), _)| (a - b).abs())
                    .sum::<f64>()
            }
        };
        Ok(sum * self.spec.cell_area())
    }

    /// Rescales to unit discrete mass.
    pub fn normalize_deposit(&self) -> Result<ScalarField> {
        let mass = self.integrate(None)?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::DegenerateDeposit(mass));
        }
        Ok(self.scaled(1.0 / mass))
    }

    /// Finite-difference gradient at the cell containing `p`: central in the
    /// interior, one-sided on boundary cells.
    pub fn gradient_at(&self, p: Point) -> Result<Point> {
        let (ix, iy) = self
            .spec
            .cell_of(p)
            .ok_or(Error::OutOfDomain { x: p.x, y: p.y })?;
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let (lo_x, hi_x) = (ix.saturating_sub(1), (ix + 1).min(nx - 1));
        let (lo_y, hi_y) = (iy.saturating_sub(1), (iy + 1).min(ny - 1));
        let gx =
            (self.get(hi_x, iy) - self.get(lo_x, iy)) / ((hi_x - lo_x) as f64 * self.spec.dx());
        let gy =
            (self.get(ix, hi_y) - self.get(ix, lo_y)) / ((hi_y - lo_y) as f64 * self.spec.dy());
        Ok(Point::new(gx, gy))
    }

    /// Centre of the closest cell with a negative value, optionally searching
    /// only inside `within`. Ties go to the lowest row-major index.
    pub fn nearest_negative(&self, p: Point, within: Option<&CellMask>) -> Option<Point> {
        let mut best: Option<(f64, usize)> = None;
        let mut consider = |i: usize| {
            if self.values[i] < 0.0 {
                let d = self.spec.center_of(i).distance_sq(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
        };
        match within {
            Some(mask) => mask.indices().for_each(&mut consider),
            None => (0..self.values.len()).for_each(&mut consider),
        }
        best.map(|(_, i)| self.spec.center_of(i))
    }
}

/// A unit-mass skinny Gaussian restricted to the cells where it is
/// numerically non-zero.
///
/// Cells are stored in increasing row-major order. The window extends to a
/// Mahalanobis radius of [`Stamp::CUTOFF`], beyond which the density is
/// below 1e-31 of its peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Stamp {
    entries: Vec<(usize, f64)>,
}

impl Stamp {
    pub const CUTOFF: f64 = 12.0;

    /// Grid-sampled `N(mean, cov)`, renormalised to unit discrete mass.
    pub fn skinny_gaussian(spec: &GridSpec, mean: Point, cov: &Cov2) -> Result<Self> {
        if !spec.contains(mean) {
            return Err(Error::OutOfDomain {
                x: mean.x,
                y: mean.y,
            });
        }
        let half_x = Self::CUTOFF * cov.xx().sqrt();
        let half_y = Self::CUTOFF * cov.yy().sqrt();
        let (dx, dy) = (spec.dx(), spec.dy());
        let ix_lo = ((mean.x - half_x) / dx - 0.5).floor().max(0.0) as usize;
        let ix_hi = (((mean.x + half_x) / dx - 0.5).ceil().max(0.0) as usize).min(spec.nx - 1);
        let iy_lo = ((mean.y - half_y) / dy - 0.5).floor().max(0.0) as usize;
        let iy_hi = (((mean.y + half_y) / dy - 0.5).ceil().max(0.0) as usize).min(spec.ny - 1);
        let cutoff_sq = Self::CUTOFF * Self::CUTOFF;
        let mut entries = Vec::with_capacity((ix_hi - ix_lo + 1) * (iy_hi - iy_lo + 1));
        for iy in iy_lo..=iy_hi {
            for ix in ix_lo..=ix_hi {
                let d = spec.center(ix, iy) - mean;
                if cov.mahalanobis_sq(d) <= cutoff_sq {
                    entries.push((spec.index(ix, iy), cov.density(d)));
                }
            }
        }
        let mass = entries.iter().map(|&(_, v)| v).sum::<f64>() * spec.cell_area();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::DegenerateDeposit(mass));
        }
        let inv = 1.0 / mass;
        for e in &mut entries {
            e.1 *= inv;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Densifies the stamp.
    pub fn to_field(&self, spec: GridSpec) -> ScalarField {
        let mut field = ScalarField::zeros(spec);
        self.add_to(&mut field, 1.0);
        field
    }

    /// `field += factor * stamp`.
    pub fn add_to(&self, field: &mut ScalarField, factor: f64) {
        let values = field.values_mut();
        for &(i, v) in &self.entries {
            values[i] += factor * v;
        }
    }

    /// Mass of the stamp inside `mask`.
    pub fn mass_in(&self, spec: &GridSpec, mask: &CellMask) -> f64 {
        self.entries
            .iter()
            .filter(|&&(i, _)| mask.contains(i))
            .map(|&(_, v)| v)
            .sum::<f64>()
            * spec.cell_area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn grid_rejects_degenerate_dimensions() {
        assert!(GridSpec::new(0.0, 1.0, 4, 4).is_err());
        assert!(GridSpec::new(1.0, 1.0, 1, 4).is_err());
        assert!(GridSpec::new(1.0, 1.0, 2, 2).is_ok());
    }

    #[test]
    fn cell_centres_follow_half_offset() {
        let spec = default_grid();
        assert_eq!(spec.center(0, 0), Point::new(1.0, 1.0));
        assert_eq!(spec.center(199, 10), Point::new(399.0, 21.0));
        assert_eq!(spec.cell_of(Point::new(400.0, 400.0)), Some((199, 199)));
        assert_eq!(spec.cell_of(Point::new(400.1, 0.0)), None);
    }

    #[test]
    fn gaussian_peak_matches_closed_form() {
        let spec = default_grid();
        let mean = spec.center(100, 60);
        let f = ScalarField::gaussian(spec, mean, &Cov2::diag(3.0, 3.0).unwrap());
        let expected = 1.0 / (6.0 * std::f64::consts::PI);
        assert!((f.get(100, 60) - expected).abs() < 1e-15);
        assert!((expected - 0.053_051_6).abs() < 1e-7);
    }

    #[test]
    fn gaussian_is_mirror_symmetric() {
        let spec = default_grid();
        let mean = spec.center(50, 50);
        let f = ScalarField::gaussian(spec, mean, &Cov2::diag(7.0, 7.0).unwrap());
        assert_eq!(f.get(47, 50), f.get(53, 50));
        assert_eq!(f.get(50, 46), f.get(50, 54));
        assert_eq!(f.get(48, 52), f.get(52, 48));
    }

    #[test]
    fn covariance_validation() {
        assert!(matches!(
            Cov2::diag(-1.0, 3.0),
            Err(Error::InvalidCovariance(_))
        ));
        assert!(matches!(
            Cov2::new(1.0, 2.0, 1.0),
            Err(Error::InvalidCovariance(_))
        ));
        assert!(matches!(
            Cov2::from_matrix([[2.0, 0.5], [0.4, 2.0]]),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn integrate_constant_and_half_mask() {
        let spec = default_grid();
        let ones = ScalarField::constant(spec, 1.0);
        assert_eq!(ones.integrate(None).unwrap(), 160_000.0);
        let half = CellMask::from_fn(&spec, |i, _| i < spec.len() / 2);
        assert_eq!(ones.integrate(Some(&half)).unwrap(), 80_000.0);
    }

    #[test]
    fn integrate_rejects_mismatched_mask() {
        let f = ScalarField::constant(default_grid(), 1.0);
        let other = GridSpec::new(400.0, 400.0, 100, 100).unwrap();
        let mask = CellMask::empty(&other);
        assert!(matches!(
            f.integrate(Some(&mask)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalize_halves_double_mass() {
        let spec = GridSpec::new(2.0, 2.0, 2, 2).unwrap();
        let f = ScalarField::constant(spec, 0.5);
        assert_eq!(f.integrate(None).unwrap(), 2.0);
        let n = f.normalize_deposit().unwrap();
        assert!(n.values().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn normalize_rejects_empty_field() {
        let f = ScalarField::zeros(default_grid());
        assert!(matches!(
            f.normalize_deposit(),
            Err(Error::DegenerateDeposit(_))
        ));
    }

    #[test]
    fn normalize_boundary_gaussian() {
        let spec = default_grid();
        // centre on the x = 0 edge: half the mass falls outside the domain
        let f = ScalarField::gaussian(
            spec,
            Point::new(0.0, 200.0),
            &Cov2::diag(20.0, 20.0).unwrap(),
        );
        let raw = f.integrate(None).unwrap();
        assert!((raw - 0.5).abs() < 2e-3, "raw mass {raw}");
        let n = f.normalize_deposit().unwrap();
        assert!((n.integrate(None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_linear_and_constant_fields() {
        let spec = default_grid();
        let ramp = ScalarField::from_fn(spec, |p| p.x);
        let g = ramp.gradient_at(Point::new(123.0, 77.0)).unwrap();
        assert!((g.x - 1.0).abs() < 1e-12 && g.y.abs() < 1e-12);
        let flat = ScalarField::constant(spec, 4.2);
        assert_eq!(
            flat.gradient_at(Point::new(0.0, 0.0)).unwrap(),
            Point::new(0.0, 0.0)
        );
        assert!(matches!(
            flat.gradient_at(Point::new(-1.0, 3.0)),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn gradient_one_sided_at_boundary() {
        let spec = default_grid();
        let ramp = ScalarField::from_fn(spec, |p| 2.0 * p.x - 3.0 * p.y);
        for p in [Point::new(0.5, 0.5), Point::new(399.5, 399.5)] {
            let g = ramp.gradient_at(p).unwrap();
            assert!((g.x - 2.0).abs() < 1e-9 && (g.y + 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_of_quadratic_converges_under_refinement() {
        let p = Point::new(100.0, 100.0);
        let err = |n: usize| {
            let spec = GridSpec::new(400.0, 400.0, n, n).unwrap();
            let f = ScalarField::from_fn(spec, |c| c.x * c.x + 3.0 * c.y * c.y);
            let g = f.gradient_at(p).unwrap();
            // central differences are exact for quadratics at the cell centre
            let c = spec.center_of(spec.cell_index_of(p).unwrap());
            assert!((g.x - 2.0 * c.x).abs() < 1e-8 && (g.y - 6.0 * c.y).abs() < 1e-8);
            (g.x - 200.0).hypot(g.y - 600.0)
        };
        // the residual comes from sampling at the cell centre and shrinks with dx
        let (coarse, fine) = (err(200), err(800));
        assert!(fine <= 0.5 * coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn nearest_negative_single_and_none() {
        let spec = GridSpec::new(10.0, 10.0, 10, 10).unwrap();
        let mut f = ScalarField::constant(spec, 1.0);
        assert_eq!(f.nearest_negative(Point::new(3.0, 3.0), None), None);
        f.values_mut()[spec.index(7, 2)] = -0.1;
        assert_eq!(
            f.nearest_negative(Point::new(0.0, 9.0), None),
            Some(Point::new(7.5, 2.5))
        );
    }

    #[test]
    fn nearest_negative_tie_prefers_lower_index() {
        let spec = GridSpec::new(10.0, 10.0, 10, 10).unwrap();
        let mut f = ScalarField::constant(spec, 1.0);
        f.values_mut()[spec.index(3, 5)] = -1.0;
        f.values_mut()[spec.index(7, 5)] = -1.0;
        let p = Point::new(5.5, 5.5);
        // brute-force confirmation that the two candidates are equidistant
        let d_a = spec.center(3, 5).distance_sq(p);
        let d_b = spec.center(7, 5).distance_sq(p);
        assert_eq!(d_a, d_b);
        assert_eq!(f.nearest_negative(p, None), Some(spec.center(3, 5)));
    }

    #[test]
    fn stamp_has_unit_mass_and_matches_dense_gaussian() {
        let spec = default_grid();
        let cov = Cov2::diag(3.0, 3.0).unwrap();
        let mean = Point::new(200.3, 117.9);
        let stamp = Stamp::skinny_gaussian(&spec, mean, &cov).unwrap();
        let sparse = stamp.to_field(spec);
        assert!((sparse.integrate(None).unwrap() - 1.0).abs() < 1e-12);
        let dense = ScalarField::gaussian(spec, mean, &cov)
            .normalize_deposit()
            .unwrap();
        let max_diff = sparse
            .values()
            .iter()
            .zip(dense.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-15, "max diff {max_diff}");
        assert!(stamp.entries().windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn stamp_on_corner_is_renormalised() {
        let spec = default_grid();
        let cov = Cov2::diag(3.0, 3.0).unwrap();
        let stamp = Stamp::skinny_gaussian(&spec, Point::new(0.0, 400.0), &cov).unwrap();
        assert!((stamp.to_field(spec).integrate(None).unwrap() - 1.0).abs() < 1e-12);
        assert!(Stamp::skinny_gaussian(&spec, Point::new(-0.1, 3.0), &cov).is_err());
    }
}
