//! Cosine eigenbasis of the Neumann Laplacian on a box.
//!
//! Modes are `e_K(x) = prod_i cos(k_i pi x_i / L_i)`. Fields are stored as
//! coefficients over this basis, so that the coefficient of `e_K` is
//! `<u, e_K> / <e_K, e_K>`. Grids are cell-centred: `x_j = (j + 1/2) L / n`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::DomainSpec;
use crate::scalar::Scalar;

/// Multi-index `K = (k1, k2, k3)`, never the zero mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModeIndex([u32; 3]);

impl ModeIndex {
    pub fn new(k1: u32, k2: u32, k3: u32) -> Result<Self> {
        if k1 == 0 && k2 == 0 && k3 == 0 {
            return Err(Error::ZeroMode([k1, k2, k3]));
        }
        Ok(Self([k1, k2, k3]))
    }

    /// First mode along `axis` (0-based).
    pub fn unit(axis: usize) -> Self {
        let mut k = [0; 3];
        k[axis] = 1;
        Self(k)
    }

    pub fn k(&self) -> [u32; 3] {
        self.0
    }

    /// `J + L`; non-zero whenever either summand is.
    pub fn sum(self, other: Self) -> Self {
        Self([self.0[0] + other.0[0], self.0[1] + other.0[1], self.0[2] + other.0[2]])
    }

    pub fn max_component(&self) -> u32 {
        self.0.into_iter().max().unwrap_or(0)
    }

    /// Number of axes with a non-zero wavenumber.
    pub fn active_axes(&self) -> usize {
        self.0.iter().filter(|&&k| k > 0).count()
    }

    /// All modes with `k_i <= k_max` per axis, zero mode excluded.
    pub fn all_up_to(k_max: u32) -> impl Iterator<Item = ModeIndex> {
        (0..=k_max).flat_map(move |a| {
            (0..=k_max).flat_map(move |b| (0..=k_max).filter_map(move |c| ModeIndex::new(a, b, c).ok()))
        })
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

fn wavenumber<T: Scalar>(k: u32, length: T) -> T {
    T::from_u32(k).unwrap() * T::PI() / length
}

/// `rho_K = sum_i (k_i pi / L_i)^2`.
pub fn laplacian_eigenvalue<T: Scalar>(k: ModeIndex, d: &DomainSpec<T>) -> T {
    k.0.iter()
        .zip(d.lengths())
        .map(|(&ki, l)| {
            let w = wavenumber(ki, l);
            w * w
        })
        .fold(T::zero(), |a, b| a + b)
}

/// `e_K(x)`.
pub fn eval_mode<T: Scalar>(k: ModeIndex, d: &DomainSpec<T>, x: [T; 3]) -> T {
    k.0.iter().zip(d.lengths()).zip(x).map(|((&ki, l), xi)| (wavenumber(ki, l) * xi).cos()).fold(T::one(), |a, b| a * b)
}

/// `<e_K, e_K> = V * prod_{k_i > 0} 1/2`.
pub fn mode_l2_norm_sq<T: Scalar>(k: ModeIndex, d: &DomainSpec<T>) -> T {
    d.volume() * T::lit(0.5).powi(k.active_axes() as i32)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let nf = T::from_usize_lossy(n);
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= T::epsilon() {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: T, b: T, f: impl Fn(T) -> T) -> T {
        self.mapped(a, b).fold(T::zero(), |acc, (x, w)| acc + w * f(x))
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((kf + kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nf = T::from_usize_lossy(n);
    (p1, nf * (x * p1 - p0) / (x * x - T::one()))
}

/// Rule size that integrates products of three cosines with the given
/// wavenumbers to machine precision on one axis.
fn rule_size(a: u32, b: u32, c: u32) -> usize {
    24 + 2 * (a + b + c) as usize
}

/// `int_0^L cos(a.) cos(b.) cos(c.)` (`sines = false`) or
/// `int_0^L cos(a.) sin(b.) sin(c.)` (`sines = true`).
fn axis_integral<T: Scalar>(a: u32, b: u32, c: u32, length: T, sines: bool) -> T {
    let rule = GaussLegendre::<T>::new(rule_size(a, b, c));
    let (wa, wb, wc) = (wavenumber(a, length), wavenumber(b, length), wavenumber(c, length));
    rule.integrate(T::zero(), length, |x| {
        if sines {
            (wa * x).cos() * (wb * x).sin() * (wc * x).sin()
        } else {
            (wa * x).cos() * (wb * x).cos() * (wc * x).cos()
        }
    })
}

/// `int_Omega e_J e_L e_K dx`, by separable Gauss-Legendre quadrature.
pub fn triple_product<T: Scalar>(j: ModeIndex, l: ModeIndex, k: ModeIndex, d: &DomainSpec<T>) -> T {
    (0..3).map(|i| axis_integral(j.0[i], l.0[i], k.0[i], d.lengths()[i], false)).fold(T::one(), |a, b| a * b)
}

/// `int_Omega e_J grad(e_L) . grad(e_K) dx`, by separable Gauss-Legendre quadrature.
pub fn grad_triple_product<T: Scalar>(j: ModeIndex, l: ModeIndex, k: ModeIndex, d: &DomainSpec<T>) -> T {
    let lengths = d.lengths();
    let plain: Vec<T> = (0..3).map(|i| axis_integral(j.0[i], l.0[i], k.0[i], lengths[i], false)).collect();
    (0..3)
        .map(|i| {
            let derivative = wavenumber(l.0[i], lengths[i])
                * wavenumber(k.0[i], lengths[i])
                * axis_integral(j.0[i], l.0[i], k.0[i], lengths[i], true);
            (0..3).filter(|&a| a != i).fold(derivative, |acc, a| acc * plain[a])
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Real samples on a cell-centred tensor grid, row-major `[i1][i2][i3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    shape: [usize; 3],
    values: Vec<T>,
}

impl<T: Scalar> GridField<T> {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self { shape, values: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_values(shape: [usize; 3], values: Vec<T>) -> Result<Self> {
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch { expected: vec![shape.iter().product()], found: vec![values.len()] });
        }
        Ok(Self { shape, values })
    }

    /// Samples `f` at the cell centres of `d`.
    pub fn sample(shape: [usize; 3], d: &DomainSpec<T>, f: impl Fn([T; 3]) -> T) -> Self {
        let mut values = Vec::with_capacity(shape.iter().product());
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    values.push(f(grid_point(shape, d, [i, j, k])));
                }
            }
        }
        Self { shape, values }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mean(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |a, &b| a + b);
        sum / T::from_usize_lossy(self.values.len())
    }

    /// Midpoint-rule integral over the box.
    pub fn integrate(&self, d: &DomainSpec<T>) -> T {
        self.mean() * d.volume()
    }

    /// Flat binary layout: three little-endian `u64` dimensions followed by
    /// row-major little-endian `f64` samples.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for n in self.shape {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut shape = [0usize; 3];
        for n in &mut shape {
            r.read_exact(&mut buf)?;
            *n = usize::try_from(u64::from_le_bytes(buf)).map_err(|e| Error::Io(e.to_string()))?;
        }
        let len: usize = shape.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            values.push(T::lit(f64::from_le_bytes(buf)));
        }
        Ok(Self { shape, values })
    }

    /// `i1,i2,i3,x1,x2,x3,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W, d: &DomainSpec<T>) -> Result<()> {
        writeln!(w, "i1,i2,i3,x1,x2,x3,value")?;
        let mut n = 0;
        for i in 0..self.shape[0] {
            for j in 0..self.shape[1] {
                for k in 0..self.shape[2] {
                    let x = grid_point(self.shape, d, [i, j, k]);
                    writeln!(w, "{i},{j},{k},{},{},{},{:e}", x[0], x[1], x[2], self.values[n].as_f64())?;
                    n += 1;
                }
            }
        }
        Ok(())
    }
}

/// Cell-centre coordinates of grid index `idx`.
pub fn grid_point<T: Scalar>(shape: [usize; 3], d: &DomainSpec<T>, idx: [usize; 3]) -> [T; 3] {
    let l = d.lengths();
    [0, 1, 2].map(|a| (T::from_usize_lossy(idx[a]) + T::lit(0.5)) * l[a] / T::from_usize_lossy(shape[a]))
}

/// Field as dense coefficients over `e_K` with `k_i < shape[i]`; the zero mode is held at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    shape: [usize; 3],
    coeffs: Vec<T>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(shape: [usize; 3]) -> Self {
        assert!(shape.iter().all(|&n| n >= 1), "truncation must be at least 1 per axis");
        Self { shape, coeffs: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_modes(shape: [usize; 3], modes: &[(ModeIndex, T)]) -> Result<Self> {
        let mut f = Self::zeros(shape);
        for &(k, v) in modes {
            f.set(k, v)?;
        }
        Ok(f)
    }

    /// Takes a dense coefficient array; the zero-mode entry is discarded.
    pub fn from_dense(shape: [usize; 3], mut coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch { expected: shape.to_vec(), found: vec![coeffs.len()] });
        }
        coeffs[0] = T::zero();
        Ok(Self { shape, coeffs })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    fn index(&self, k: [u32; 3]) -> Option<usize> {
        let [a, b, c] = k.map(|x| x as usize);
        (a < self.shape[0] && b < self.shape[1] && c < self.shape[2])
            .then(|| (a * self.shape[1] + b) * self.shape[2] + c)
    }

    /// Coefficient of `e_K`; zero outside the truncation.
    pub fn get(&self, k: ModeIndex) -> T {
        self.index(k.0).map_or(T::zero(), |i| self.coeffs[i])
    }

    pub fn set(&mut self, k: ModeIndex, v: T) -> Result<()> {
        let i = self.index(k.0).ok_or_else(|| Error::ShapeMismatch {
            expected: self.shape.to_vec(),
            found: k.0.iter().map(|&x| x as usize).collect(),
        })?;
        self.coeffs[i] = v;
        Ok(())
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coeffs
    }

    /// Non-zero coefficients in lexicographic mode order.
    pub fn nonzero(&self) -> impl Iterator<Item = (ModeIndex, T)> + '_ {
        let [_, n2, n3] = self.shape;
        self.coeffs.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(move |(i, &v)| {
            let k = [(i / (n2 * n3)) as u32, ((i / n3) % n2) as u32, (i % n3) as u32];
            (ModeIndex(k), v)
        })
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |a, &b| a + b * b).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    /// `||u||_{L^2}^2 = sum_K c_K^2 <e_K, e_K>`.
    pub fn l2_norm_sq(&self, d: &DomainSpec<T>) -> T {
        self.nonzero().fold(T::zero(), |a, (k, v)| a + v * v * mode_l2_norm_sq(k, d))
    }
}

/// Basis family along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AxisKind {
    Cos,
    Sin,
}

/// Synthesis/analysis matrices between `modes` coefficients and `points` samples on one axis.
#[derive(Debug, Clone)]
pub(crate) struct AxisBasis<T> {
    modes: usize,
    points: usize,
    cos_synth: Vec<T>,
    sin_synth: Vec<T>,
    cos_anal: Vec<T>,
    sin_anal: Vec<T>,
}

impl<T: Scalar> AxisBasis<T> {
    pub(crate) fn new(modes: usize, points: usize) -> Self {
        assert!(points >= modes, "grid must resolve every retained mode");
        let mf = T::from_usize_lossy(points);
        let theta = |k: usize, j: usize| T::from_usize_lossy(k) * T::PI() * (T::from_usize_lossy(j) + T::lit(0.5)) / mf;
        let mut cos_synth = vec![T::zero(); points * modes];
        let mut sin_synth = vec![T::zero(); points * modes];
        let mut cos_anal = vec![T::zero(); modes * points];
        let mut sin_anal = vec![T::zero(); modes * points];
        for j in 0..points {
            for k in 0..modes {
                let (s, c) = theta(k, j).sin_cos();
                cos_synth[j * modes + k] = c;
                sin_synth[j * modes + k] = s;
                let w = if k == 0 { T::one() } else { T::lit(2.0) };
                cos_anal[k * points + j] = w * c / mf;
                sin_anal[k * points + j] = if k == 0 { T::zero() } else { T::lit(2.0) * s / mf };
            }
        }
        Self { modes, points, cos_synth, sin_synth, cos_anal, sin_anal }
    }

    fn synth(&self, kind: AxisKind) -> &[T] {
        match kind {
            AxisKind::Cos => &self.cos_synth,
            AxisKind::Sin => &self.sin_synth,
        }
    }

    fn anal(&self, kind: AxisKind) -> &[T] {
        match kind {
            AxisKind::Cos => &self.cos_anal,
            AxisKind::Sin => &self.sin_anal,
        }
    }
}

/// `out[o][r][i] = sum_c mat[r][c] * inp[o][c][i]` for `inp` of shape `(outer, cols, inner)`.
fn apply_axis<T: Scalar>(inp: &[T], outer: usize, cols: usize, inner: usize, mat: &[T], rows: usize) -> Vec<T> {
    debug_assert_eq!(inp.len(), outer * cols * inner);
    debug_assert_eq!(mat.len(), rows * cols);
    let mut out = vec![T::zero(); outer * rows * inner];
    if inner == 1 {
        for o in 0..outer {
            let line = &inp[o * cols..(o + 1) * cols];
            let dst = &mut out[o * rows..(o + 1) * rows];
            for (r, d) in dst.iter_mut().enumerate() {
                let row = &mat[r * cols..(r + 1) * cols];
                *d = row.iter().zip(line).fold(T::zero(), |a, (&m, &x)| a + m * x);
            }
        }
        return out;
    }
    for o in 0..outer {
        let src = &inp[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let drow = &mut dst[r * inner..(r + 1) * inner];
            for c in 0..cols {
                let m = mat[r * cols + c];
                if m == T::zero() {
                    continue;
                }
                let srow = &src[c * inner..(c + 1) * inner];
                for (d, &s) in drow.iter_mut().zip(srow) {
                    *d += m * s;
                }
            }
        }
    }
    out
}

/// Separable transform between `modes` coefficients and `points` samples per axis.
#[derive(Debug, Clone)]
pub(crate) struct Transform3<T> {
    axes: [AxisBasis<T>; 3],
}

impl<T: Scalar> Transform3<T> {
    pub(crate) fn new(modes: [usize; 3], points: [usize; 3]) -> Self {
        Self { axes: [0, 1, 2].map(|a| AxisBasis::new(modes[a], points[a])) }
    }

    pub(crate) fn modes(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.axes[a].modes)
    }

    pub(crate) fn points(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.axes[a].points)
    }

    /// Coefficients (mode shape) to samples (point shape).
    pub(crate) fn synthesize(&self, coeffs: &[T], kinds: [AxisKind; 3]) -> Vec<T> {
        let [n1, n2, n3] = self.modes();
        let [m1, m2, m3] = self.points();
        let a = apply_axis(coeffs, n1 * n2, n3, 1, self.axes[2].synth(kinds[2]), m3);
        let b = apply_axis(&a, n1, n2, m3, self.axes[1].synth(kinds[1]), m2);
        apply_axis(&b, 1, n1, m2 * m3, self.axes[0].synth(kinds[0]), m1)
    }

    /// Samples (point shape) to coefficients (mode shape).
    pub(crate) fn analyze(&self, values: &[T], kinds: [AxisKind; 3]) -> Vec<T> {
        let [n1, n2, n3] = self.modes();
        let [_, m2, m3] = self.points();
        let a = apply_axis(values, 1, self.axes[0].points, m2 * m3, self.axes[0].anal(kinds[0]), n1);
        let b = apply_axis(&a, n1, m2, m3, self.axes[1].anal(kinds[1]), n2);
        apply_axis(&b, n1 * n2, m3, 1, self.axes[2].anal(kinds[2]), n3)
    }
}

pub(crate) const ALL_COS: [AxisKind; 3] = [AxisKind::Cos; 3];

/// Discrete cosine analysis/synthesis on an `n1 x n2 x n3` grid with the same truncation.
#[derive(Debug, Clone)]
pub struct CosineTransform<T> {
    inner: Transform3<T>,
}

impl<T: Scalar> CosineTransform<T> {
    pub fn new(shape: [usize; 3]) -> Self {
        Self { inner: Transform3::new(shape, shape) }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.inner.modes()
    }

    /// Grid samples to coefficients. The grid mean (zero mode) is discarded.
    pub fn forward(&self, grid: &GridField<T>) -> Result<SpectralField<T>> {
        if grid.shape() != self.shape() {
            return Err(Error::ShapeMismatch { expected: self.shape().to_vec(), found: grid.shape().to_vec() });
        }
        SpectralField::from_dense(self.shape(), self.inner.analyze(grid.values(), ALL_COS))
    }

    pub fn inverse(&self, field: &SpectralField<T>) -> Result<GridField<T>> {
        if field.shape() != self.shape() {
            return Err(Error::ShapeMismatch { expected: self.shape().to_vec(), found: field.shape().to_vec() });
        }
        GridField::from_values(self.shape(), self.inner.synthesize(field.as_slice(), ALL_COS))
    }
}
