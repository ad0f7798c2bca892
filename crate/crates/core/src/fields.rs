//! Periodic grids, sampled fields and super-level sets.
//!
//! Every field lives on a uniform periodic cube with cell-centred samples:
//! along each axis the sample `k` sits at `(k + 1/2)·L/n − L/2`, so the box
//! is centred on the origin and the origin itself is a cell corner. Samples
//! are stored x-fastest: `index = i + n·(j + n·k)`.

use serde::Serialize;

use crate::error::{invalid, Result};

/// A point in physical coordinates.
pub type Point = [f64; 3];

/// Uniform periodic cube with `n` cells per side and side length `length`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid3 {
    n: usize,
    length: f64,
}

impl Grid3 {
    pub const MIN_N: usize = 8;

    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < Self::MIN_N || !n.is_power_of_two() {
            return invalid(format!("grid size {n} must be a power of two and at least {}", Self::MIN_N));
        }
        if !(length.is_finite() && length > 0.0) {
            return invalid(format!("box length {length} must be positive and finite"));
        }
        Ok(Self { n, length })
    }

    /// `n` cells per side on the default `2π` box.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, std::f64::consts::TAU)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Physical coordinate of cell centre `k` along one axis.
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.spacing() - 0.5 * self.length
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    pub fn center(&self, idx: usize) -> Point {
        let (i, j, k) = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// FFT index mapped to a signed frequency index in `[-n/2, n/2)`.
    #[inline]
    pub fn signed_mode(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Angular wavenumber of FFT index `k` along one axis.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> f64 {
        self.signed_mode(k) as f64 * std::f64::consts::TAU / self.length
    }

    /// Largest resolved wavenumber along an axis, `n/2 · 2π/L`.
    pub fn nyquist(&self) -> f64 {
        0.5 * self.n as f64 * std::f64::consts::TAU / self.length
    }

    /// |ξ| of the Fourier mode stored at `idx`.
    pub fn wavevector_norm(&self, idx: usize) -> f64 {
        let (i, j, k) = self.unravel(idx);
        let (a, b, c) = (self.wavenumber(i), self.wavenumber(j), self.wavenumber(k));
        (a * a + b * b + c * c).sqrt()
    }

    /// Minimum-image displacement on the periodic box.
    #[inline]
    pub fn wrap(&self, d: f64) -> f64 {
        let l = self.length;
        d - l * (d / l).round()
    }

    /// Index of the cell containing `p` (periodic).
    pub fn voxel_of(&self, p: Point) -> usize {
        let h = self.spacing();
        let n = self.n as i64;
        let cell = |x: f64| -> usize {
            let k = ((x + 0.5 * self.length) / h).floor() as i64;
            k.rem_euclid(n) as usize
        };
        self.index(cell(p[0]), cell(p[1]), cell(p[2]))
    }

    /// Displacement `p − centre(idx)` measured in cell units, minimum image.
    pub fn offset_in_cells(&self, p: Point, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        let h = self.spacing();
        let n = self.n as f64;
        let one = |x: f64, c: usize| {
            let d = (x + 0.5 * self.length) / h - (c as f64 + 0.5);
            d - n * (d / n).round()
        };
        [one(p[0], i), one(p[1], j), one(p[2], k)]
    }
}

/// Real samples on a [`Grid3`], all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid3, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return invalid(format!("expected {} samples, got {}", grid.len(), data.len()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite sample at index {pos}"));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid3, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid3, f: impl Fn(Point) -> f64) -> Result<Self> {
        let data = (0..grid.len()).map(|idx| f(grid.center(idx))).collect();
        Self::new(grid, data)
    }

    pub(crate) fn from_parts_unchecked(grid: Grid3, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|v| c * v).collect() }
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Voxel quadrature of the field.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.voxel_volume()
    }

    /// Voxel quadrature of `|f|`; invariant under any permutation of samples.
    pub fn l1_norm(&self) -> f64 {
        abs_sum_sorted(self.data.iter().copied()) * self.grid.voxel_volume()
    }

    /// Voxel quadrature of `∫ f g`.
    pub fn pairing(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return invalid("fields live on different grids");
        }
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.voxel_volume())
    }

    /// Periodic translation by whole cells: `out(x) = f(x + shift·h)`.
    pub fn shifted(&self, shift: [i64; 3]) -> Self {
        let n = self.grid.n();
        let ni = n as i64;
        let mut out = vec![0.0; self.data.len()];
        for k in 0..n {
            let sk = (k as i64 + shift[2]).rem_euclid(ni) as usize;
            for j in 0..n {
                let sj = (j as i64 + shift[1]).rem_euclid(ni) as usize;
                let row = self.grid.index(0, j, k);
                let src = self.grid.index(0, sj, sk);
                for i in 0..n {
                    let si = (i as i64 + shift[0]).rem_euclid(ni) as usize;
                    out[row + i] = self.data[src + si];
                }
            }
        }
        Self { grid: self.grid, data: out }
    }
}

/// Sum of `|v|` taken in ascending order, so the result depends only on the
/// multiset of values. Nonnegative floats order like their bit patterns.
pub fn abs_sum_sorted(values: impl Iterator<Item = f64>) -> f64 {
    let mut bits: Vec<u64> = values.map(|v| v.abs().to_bits()).collect();
    bits.sort_unstable();
    bits.into_iter().map(f64::from_bits).sum()
}

/// Three scalar components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: [ScalarField; 3],
}

impl VectorField {
    pub fn new(components: [ScalarField; 3]) -> Result<Self> {
        let g = components[0].grid;
        if components.iter().any(|c| c.grid != g) {
            return invalid("vector components live on different grids");
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { components: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)] }
    }

    pub fn from_fn(grid: Grid3, f: impl Fn(Point) -> [f64; 3]) -> Result<Self> {
        let mut parts =
            [Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len())];
        for idx in 0..grid.len() {
            let v = f(grid.center(idx));
            for (p, x) in parts.iter_mut().zip(v) {
                p.push(x);
            }
        }
        let [a, b, c] = parts;
        Self::new([ScalarField::new(grid, a)?, ScalarField::new(grid, b)?, ScalarField::new(grid, c)?])
    }

    pub fn grid(&self) -> &Grid3 {
        &self.components[0].grid
    }

    pub fn components(&self) -> &[ScalarField; 3] {
        &self.components
    }

    /// Component `i`, zero-based.
    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn into_components(self) -> [ScalarField; 3] {
        self.components
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { components: self.components.clone().map(|f| f.scaled(c)) }
    }

    /// Max over voxels and components of `|u_i|`.
    pub fn linf_norm(&self) -> f64 {
        self.components.iter().map(ScalarField::linf_norm).fold(0.0, f64::max)
    }

    /// Sum over components of the voxel quadrature of `u_i²`.
    pub fn energy(&self) -> f64 {
        self.components.iter().map(|c| c.pairing(c).unwrap_or(0.0)).sum()
    }
}

/// Either kind of field, as stored in a field file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyField {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl AnyField {
    pub fn grid(&self) -> &Grid3 {
        match self {
            AnyField::Scalar(f) => f.grid(),
            AnyField::Vector(u) => u.grid(),
        }
    }

    pub fn linf_norm(&self) -> f64 {
        match self {
            AnyField::Scalar(f) => f.linf_norm(),
            AnyField::Vector(u) => u.linf_norm(),
        }
    }

    pub fn components(&self) -> Vec<&ScalarField> {
        match self {
            AnyField::Scalar(f) => vec![f],
            AnyField::Vector(u) => u.components().iter().collect(),
        }
    }
}

impl From<ScalarField> for AnyField {
    fn from(f: ScalarField) -> Self {
        AnyField::Scalar(f)
    }
}

impl From<VectorField> for AnyField {
    fn from(u: VectorField) -> Self {
        AnyField::Vector(u)
    }
}

/// Sup norm of a scalar or vector field (max-norm over components).
pub fn linf_norm<'a>(f: impl Into<FieldRef<'a>>) -> f64 {
    match f.into() {
        FieldRef::Scalar(s) => s.linf_norm(),
        FieldRef::Vector(v) => v.linf_norm(),
    }
}

/// Borrowed scalar-or-vector field.
#[derive(Clone, Copy, Debug)]
pub enum FieldRef<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a VectorField),
}

impl<'a> From<&'a ScalarField> for FieldRef<'a> {
    fn from(f: &'a ScalarField) -> Self {
        FieldRef::Scalar(f)
    }
}

impl<'a> From<&'a VectorField> for FieldRef<'a> {
    fn from(u: &'a VectorField) -> Self {
        FieldRef::Vector(u)
    }
}

impl<'a> From<&'a AnyField> for FieldRef<'a> {
    fn from(f: &'a AnyField) -> Self {
        match f {
            AnyField::Scalar(s) => FieldRef::Scalar(s),
            AnyField::Vector(v) => FieldRef::Vector(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    /// Positive (`+`) or negative (`−`) part of `v`, both nonnegative.
    #[inline]
    pub fn part(self, v: f64) -> f64 {
        match self {
            Sign::Plus => v.max(0.0),
            Sign::Minus => (-v).max(0.0),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" | "p" => Ok(Sign::Plus),
            "-" | "minus" | "m" => Ok(Sign::Minus),
            other => invalid(format!("unknown sign '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelSetMeta {
    /// One-based component index, `None` for scalar fields.
    pub component: Option<usize>,
    pub sign: Sign,
    pub threshold: f64,
}

/// Boolean voxel mask standing in for a super-level set.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    grid: Grid3,
    mask: Vec<bool>,
    meta: LevelSetMeta,
}

impl LevelSet {
    pub fn new(grid: Grid3, mask: Vec<bool>, meta: LevelSetMeta) -> Result<Self> {
        if mask.len() != grid.len() {
            return invalid(format!("expected {} mask entries, got {}", grid.len(), mask.len()));
        }
        if !(meta.threshold >= 0.0) {
            return invalid(format!("threshold {} must be nonnegative", meta.threshold));
        }
        Ok(Self { grid, mask, meta })
    }

    /// Plain mask without level-set provenance.
    pub fn from_mask(grid: Grid3, mask: Vec<bool>) -> Result<Self> {
        Self::new(grid, mask, LevelSetMeta { component: None, sign: Sign::Plus, threshold: 0.0 })
    }

    pub fn from_predicate(grid: Grid3, pred: impl Fn(Point) -> bool) -> Self {
        let mask = (0..grid.len()).map(|idx| pred(grid.center(idx))).collect();
        Self { grid, mask, meta: LevelSetMeta { component: None, sign: Sign::Plus, threshold: 0.0 } }
    }

    pub fn empty(grid: Grid3) -> Self {
        Self::from_predicate(grid, |_| false)
    }

    pub fn full(grid: Grid3) -> Self {
        Self::from_predicate(grid, |_| true)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn meta(&self) -> &LevelSetMeta {
        &self.meta
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.voxel_volume()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.count() as f64 / self.grid.len() as f64
    }

    pub fn complement(&self) -> Self {
        Self { grid: self.grid, mask: self.mask.iter().map(|b| !b).collect(), meta: self.meta }
    }

    pub fn is_subset_of(&self, other: &LevelSet) -> bool {
        self.grid == other.grid && self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }

    pub fn union(&self, other: &LevelSet) -> Result<Self> {
        if self.grid != other.grid {
            return invalid("level sets live on different grids");
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        Ok(Self { grid: self.grid, mask, meta: self.meta })
    }
}

/// `{ x : f^±(x) > threshold }` for a scalar field.
pub fn scalar_superlevel(f: &ScalarField, sign: Sign, threshold: f64) -> Result<LevelSet> {
    let mask = f.data().iter().map(|&v| sign.part(v) > threshold).collect();
    LevelSet::new(*f.grid(), mask, LevelSetMeta { component: None, sign, threshold })
}

/// `A^{i,±}_λ = { x : u_i^±(x) > λ‖u‖∞ }` with one-based component index `i`.
pub fn component_superlevel(u: &VectorField, i: usize, sign: Sign, lambda: f64) -> Result<LevelSet> {
    if !(1..=3).contains(&i) {
        return invalid(format!("component index {i} must be 1, 2 or 3"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("level {lambda} must lie in (0, 1)"));
    }
    let threshold = lambda * u.linf_norm();
    let mask = u.component(i - 1).data().iter().map(|&v| sign.part(v) > threshold).collect();
    LevelSet::new(*u.grid(), mask, LevelSetMeta { component: Some(i), sign, threshold })
}

/// The six component super-level sets in the order `1+, 1−, 2+, 2−, 3+, 3−`.
pub fn all_component_superlevels(u: &VectorField, lambda: f64) -> Result<Vec<LevelSet>> {
    let mut out = Vec::with_capacity(6);
    for i in 1..=3 {
        for sign in [Sign::Plus, Sign::Minus] {
            out.push(component_superlevel(u, i, sign, lambda)?);
        }
    }
    Ok(out)
}
