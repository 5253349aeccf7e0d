//! Zonal (rotationally symmetric) functions on `S^n`.
//!
//! A zonal function depends only on the colatitude `theta`; we work in
//! `x = cos(theta)` where the round measure becomes
//! `|S^{n-1}| (1 - x^2)^{(n-2)/2} dx`. The orthonormal zonal harmonics are
//! the Gegenbauer polynomials of index `(n-1)/2`, normalized against the
//! quadrature Gram matrix.
//!
//! The node grid has `N` points and carries a full `N x N` orthogonal
//! transform, so a field may hold up to `N` coefficients (degree `N - 1`).
//! Fields handed in by users are band-limited to `L_max`; nonlinear
//! operations return full-resolution fields so that no truncation error is
//! introduced before a result is consumed.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::quadrature::{
    gauss_gegenbauer_dd, gegenbauer_betas, gegenbauer_recurrence_dd, orthonormal_values,
    orthonormal_values_dd, sphere_volume,
};
use crate::spectra::{self, SphereParams};

pub const DEFAULT_LMAX: usize = 64;
pub const DEFAULT_OVERSAMPLE: f64 = 2.0;
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-9;
const GRAM_TOLERANCE: f64 = 1e-12;
/// Grids at least this large analyze rows in parallel.
const PARALLEL_THRESHOLD: usize = 128;

#[derive(Debug)]
pub struct ZonalBasis {
    params: SphereParams,
    lmax: usize,
    oversample: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    sin_theta: Vec<f64>,
    /// `values[(k, i)] = e_i(x_k)` for all degrees `i < N`.
    values: DMatrix<f64>,
    /// `dtheta[(k, i)] = d e_i / d theta` at `x_k`.
    dtheta: DMatrix<f64>,
    /// `analysis = values^T diag(weights)`, rounded to f64.
    analysis: DMatrix<f64>,
    /// Row-major double-double split of the analysis matrix.
    analysis_hi: Vec<f64>,
    analysis_lo: Vec<f64>,
    recurrence: Vec<f64>,
    scales: Vec<f64>,
    volume: f64,
    tail_threshold: f64,
    /// Floating-point images of `p0(lambda_i)` for every representable degree.
    p0: Vec<f64>,
}

impl ZonalBasis {
    pub fn new(params: SphereParams, lmax: usize, oversample: f64) -> Result<Arc<Self>> {
        Self::with_tail_threshold(params, lmax, oversample, DEFAULT_TAIL_THRESHOLD)
    }

    pub fn with_defaults(params: SphereParams) -> Result<Arc<Self>> {
        Self::new(params, DEFAULT_LMAX, DEFAULT_OVERSAMPLE)
    }

    pub fn with_tail_threshold(
        params: SphereParams,
        lmax: usize,
        oversample: f64,
        tail_threshold: f64,
    ) -> Result<Arc<Self>> {
        if lmax < 8 {
            return Err(Error::InvalidInput(format!("L_max = {lmax} is below 8")));
        }
        if !(oversample >= 1.5) {
            return Err(Error::QuadratureFailure(format!(
                "oversample {oversample} leaves no headroom for nonlinear products (need >= 1.5)"
            )));
        }
        let npts = (oversample * (lmax as f64 + 1.0)).ceil() as usize;
        let n = params.n();
        let lambda = (n as f64 - 1.0) / 2.0;
        let volume = sphere_volume(n);
        let rule_dd = gauss_gegenbauer_dd(npts, lambda, volume);
        let rule = rule_dd.rounded();

        let betas = gegenbauer_betas(lambda, npts);
        let recurrence: Vec<f64> = betas.iter().map(|v| v.sqrt()).collect();
        let recurrence_dd = gegenbauer_recurrence_dd(lambda, npts);
        let inv_sqrt_vol = TwoFloat::from(volume).sqrt().recip();

        let mut values = DMatrix::<f64>::zeros(npts, npts);
        let mut dtheta = DMatrix::<f64>::zeros(npts, npts);
        let mut analysis_hi = vec![0.0; npts * npts];
        let mut analysis_lo = vec![0.0; npts * npts];
        let mut vals_dd = vec![TwoFloat::from(0.0); npts];
        let mut vals = vec![0.0; npts];
        let mut ders = vec![0.0; npts];
        let sin_theta: Vec<f64> = rule.nodes.iter().map(|x| ((1.0 - x) * (1.0 + x)).sqrt()).collect();
        for (k, (&xd, &wd)) in rule_dd.nodes.iter().zip(&rule_dd.weights).enumerate() {
            orthonormal_values_dd(xd, &recurrence_dd, npts, &mut vals_dd);
            orthonormal_values(xd.hi(), &recurrence, npts, &mut vals, &mut ders);
            for i in 0..npts {
                let e = vals_dd[i] * inv_sqrt_vol;
                values[(k, i)] = e.hi();
                dtheta[(k, i)] = -sin_theta[k] * ders[i] * inv_sqrt_vol.hi();
                let a = e * wd;
                analysis_hi[i * npts + k] = a.hi();
                analysis_lo[i * npts + k] = a.lo();
            }
        }
        let analysis = DMatrix::from_row_slice(npts, npts, &analysis_hi);
        let scales = vec![inv_sqrt_vol.hi(); npts];

        let gram = &analysis * &values;
        let mut worst = 0.0f64;
        for i in 0..npts {
            for j in 0..npts {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        if worst >= GRAM_TOLERANCE {
            return Err(Error::QuadratureFailure(format!(
                "Gram matrix deviates from identity by {worst:.3e}"
            )));
        }

        let p0 = (0..npts as u64).map(|i| spectra::to_f64(&spectra::p0_eval(i, &params))).collect();

        Ok(Arc::new(Self {
            params,
            lmax,
            oversample,
            nodes: rule.nodes,
            weights: rule.weights,
            sin_theta,
            values,
            dtheta,
            analysis,
            analysis_hi,
            analysis_lo,
            recurrence,
            scales,
            volume,
            tail_threshold,
            p0,
        }))
    }

    pub fn params(&self) -> &SphereParams {
        &self.params
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn oversample(&self) -> f64 {
        self.oversample
    }

    /// Number of quadrature nodes, which is also the full-resolution
    /// coefficient count.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn tail_threshold(&self) -> f64 {
        self.tail_threshold
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn analysis_matrix(&self) -> &DMatrix<f64> {
        &self.analysis
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn gram_error(&self) -> f64 {
        let gram = &self.analysis * &self.values;
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `p0(lambda_i)` for `i < N`.
    pub fn p0_multipliers(&self) -> &[f64] {
        &self.p0
    }

    /// Laplacian eigenvalue on degree `i`.
    pub fn laplace_eigenvalue(&self, i: usize) -> f64 {
        (i * (i + self.params.n() as usize - 1)) as f64
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let k = coeffs.len();
        assert!(k <= self.node_count(), "{k} coefficients exceed grid capacity");
        let c = DVector::from_column_slice(coeffs);
        (self.values.columns(0, k) * c).as_slice().to_vec()
    }

    /// Full-resolution analysis (all `N` coefficients), accumulated in
    /// double-double so that the result is correctly rounded up to the
    /// rounding already present in `grid`.
    pub fn analyze(&self, grid: &[f64]) -> Vec<f64> {
        let npts = self.node_count();
        assert_eq!(grid.len(), npts);
        let row = |i: usize| {
            let hi = &self.analysis_hi[i * npts..(i + 1) * npts];
            let lo = &self.analysis_lo[i * npts..(i + 1) * npts];
            let mut acc = TwoFloat::from(0.0);
            let mut tail = 0.0;
            for ((h, l), g) in hi.iter().zip(lo).zip(grid) {
                acc += TwoFloat::new_mul(*h, *g);
                tail += l * g;
            }
            (acc + tail).hi()
        };
        if npts >= PARALLEL_THRESHOLD {
            (0..npts).into_par_iter().map(row).collect()
        } else {
            (0..npts).map(row).collect()
        }
    }

    /// Evaluates a coefficient expansion at an arbitrary `x` in `[-1, 1]`.
    pub fn evaluate(&self, coeffs: &[f64], x: f64) -> f64 {
        let len = coeffs.len();
        if len == 0 {
            return 0.0;
        }
        // forward recurrence on the orthonormal family is stable on [-1, 1]
        let b = &self.recurrence;
        let mut prev = 0.0;
        let mut cur = 1.0;
        let mut acc = coeffs[0] * self.scales[0];
        for i in 1..len {
            let bprev = if i >= 2 { b[i - 2] } else { 0.0 };
            let next = (x * cur - bprev * prev) / b[i - 1];
            prev = cur;
            cur = next;
            acc += coeffs[i] * self.scales[i] * cur;
        }
        acc
    }
}

/// A zonal function stored by its orthonormal zonal-harmonic coefficients.
/// Coefficients are authoritative; grid values are a lazily built cache.
#[derive(Debug, Clone)]
pub struct ZonalField {
    basis: Arc<ZonalBasis>,
    coeffs: Vec<f64>,
    grid: OnceLock<Vec<f64>>,
}

impl ZonalField {
    pub fn from_coeffs(basis: &Arc<ZonalBasis>, coeffs: Vec<f64>) -> Self {
        assert!(coeffs.len() <= basis.node_count(), "too many coefficients for the grid");
        Self { basis: Arc::clone(basis), coeffs, grid: OnceLock::new() }
    }

    /// Full-resolution field interpolating the given nodal values.
    pub fn from_grid(basis: &Arc<ZonalBasis>, grid: Vec<f64>) -> Self {
        let coeffs = basis.analyze(&grid);
        let cell = OnceLock::new();
        let _ = cell.set(grid);
        Self { basis: Arc::clone(basis), coeffs, grid: cell }
    }

    pub fn zeros(basis: &Arc<ZonalBasis>) -> Self {
        Self::from_coeffs(basis, vec![0.0; basis.lmax() + 1])
    }

    pub fn constant(basis: &Arc<ZonalBasis>, c: f64) -> Self {
        let mut coeffs = vec![0.0; basis.lmax() + 1];
        coeffs[0] = c * basis.volume().sqrt();
        Self::from_coeffs(basis, coeffs)
    }

    /// Single basis function `e_i`.
    pub fn harmonic(basis: &Arc<ZonalBasis>, i: usize) -> Self {
        let mut coeffs = vec![0.0; (basis.lmax() + 1).max(i + 1)];
        coeffs[i] = 1.0;
        Self::from_coeffs(basis, coeffs)
    }

    /// Full-resolution interpolant of a function of `x = cos(theta)`.
    pub fn from_fn(basis: &Arc<ZonalBasis>, f: impl Fn(f64) -> f64) -> Self {
        let grid: Vec<f64> = basis.nodes().iter().map(|&x| f(x)).collect();
        Self::from_grid(basis, grid)
    }

    pub fn basis(&self) -> &Arc<ZonalBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Mutable access to the coefficients; drops the cached grid.
    pub fn coeffs_mut(&mut self) -> &mut Vec<f64> {
        self.grid.take();
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn grid(&self) -> &[f64] {
        self.grid.get_or_init(|| self.basis.synthesize(&self.coeffs))
    }

    /// Highest stored degree.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn truncate(&self, lmax: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(lmax + 1, 0.0);
        Self::from_coeffs(&self.basis, coeffs)
    }

    /// Truncation to the basis band limit.
    pub fn band_limited(&self) -> Self {
        self.truncate(self.basis.lmax())
    }

    pub fn integral(&self) -> f64 {
        self.grid().iter().zip(self.basis.weights()).map(|(f, w)| f * w).sum()
    }

    /// `int f g dmu_0` by quadrature.
    pub fn inner(&self, other: &ZonalField) -> f64 {
        self.grid()
            .iter()
            .zip(other.grid())
            .zip(self.basis.weights())
            .map(|((f, g), w)| f * g * w)
            .sum()
    }

    /// Inner product weighted by a nodal density.
    pub fn weighted_inner(&self, other: &ZonalField, density: &[f64]) -> f64 {
        self.grid()
            .iter()
            .zip(other.grid())
            .zip(self.basis.weights().iter().zip(density))
            .map(|((f, g), (w, d))| f * g * w * d)
            .sum()
    }

    /// Coefficient-space l2 norm, equal to the L2(dmu_0) norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.grid().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coeffs(&self.basis, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &ZonalField) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &ZonalField) -> Self {
        self.combine(other, -1.0)
    }

    /// `self + s * other`.
    pub fn combine(&self, other: &ZonalField, s: f64) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|i| self.coeff(i) + s * other.coeff(i)).collect();
        Self::from_coeffs(&self.basis, coeffs)
    }

    /// Multiplies coefficient `i` by `multipliers[i]`.
    pub fn apply_multipliers(&self, multipliers: &[f64]) -> Self {
        assert!(multipliers.len() >= self.coeffs.len());
        let coeffs = self.coeffs.iter().zip(multipliers).map(|(c, m)| c * m).collect();
        Self::from_coeffs(&self.basis, coeffs)
    }

    /// Pointwise product, returned at full resolution.
    pub fn mul(&self, other: &ZonalField) -> Self {
        let grid = self.grid().iter().zip(other.grid()).map(|(a, b)| a * b).collect();
        Self::from_grid(&self.basis, grid)
    }

    /// Applies `phi` at the nodes and re-analyzes at full resolution,
    /// failing when the aliasing tail of the result exceeds the basis
    /// threshold.
    pub fn pointwise_map(&self, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let out = self.pointwise_map_unchecked(phi);
        out.check_tail()?;
        Ok(out)
    }

    pub fn pointwise_map_unchecked(&self, phi: impl Fn(f64) -> f64) -> Self {
        let grid = self.grid().iter().map(|&v| phi(v)).collect();
        Self::from_grid(&self.basis, grid)
    }

    /// Relative l2 weight of the top tenth of the stored coefficients.
    pub fn tail(&self) -> f64 {
        relative_tail(&self.coeffs)
    }

    pub fn check_tail(&self) -> Result<()> {
        let tail = self.tail();
        let threshold = self.basis.tail_threshold();
        if tail > threshold || !tail.is_finite() {
            return Err(Error::TailOverflow { tail, threshold });
        }
        Ok(())
    }

    /// `df/dtheta` at the nodes.
    pub fn theta_derivative(&self) -> Vec<f64> {
        let k = self.coeffs.len();
        let c = DVector::from_column_slice(&self.coeffs);
        (self.basis.dtheta.columns(0, k) * c).as_slice().to_vec()
    }

    /// Spectral interpolation at an arbitrary `x = cos(theta)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.basis.evaluate(&self.coeffs, x)
    }

    /// Odd part under the antipodal map `x -> -x`, in l2 norm.
    pub fn odd_norm(&self) -> f64 {
        self.coeffs.iter().skip(1).step_by(2).map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ZonalField) -> f64 {
        self.grid()
            .iter()
            .zip(other.grid())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// l2 distance in coefficient space.
    pub fn distance(&self, other: &ZonalField) -> f64 {
        self.sub(other).norm()
    }
}

/// Largest relative tail level still treated as a roundoff plateau.
pub const PLATEAU_CEILING: f64 = 1e-13;
/// Margin between the plateau level and the truncation point.
const PLATEAU_MARGIN: f64 = 4.0;

/// Truncates a coefficient vector where it meets its roundoff plateau.
///
/// The plateau level is the largest magnitude in the top tenth of the
/// coefficients. When that level is below [`PLATEAU_CEILING`] (relative to
/// the l2 norm) everything from the first degree whose suffix maximum lies
/// within [`PLATEAU_MARGIN`] of it onwards is zeroed, so that high-order
/// multipliers do not amplify noise. Resolved-but-rough spectra, whose tails
/// carry real content, are left alone.
pub fn chop(coeffs: &mut [f64]) {
    let len = coeffs.len();
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    if len < 10 || norm == 0.0 {
        return;
    }
    let mut envelope = vec![0.0; len];
    let mut running = 0.0f64;
    for j in (0..len).rev() {
        running = running.max(coeffs[j].abs());
        envelope[j] = running;
    }
    let plateau = envelope[len - len.div_ceil(10)];
    if plateau > PLATEAU_CEILING * norm {
        return;
    }
    let cut = envelope.iter().position(|&e| e <= PLATEAU_MARGIN * plateau).unwrap_or(len);
    for c in &mut coeffs[cut..] {
        *c = 0.0;
    }
}

pub fn relative_tail(coeffs: &[f64]) -> f64 {
    let len = coeffs.len();
    let top = len.div_ceil(10);
    let total: f64 = coeffs.iter().map(|c| c * c).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = coeffs[len - top..].iter().map(|c| c * c).sum();
    (tail / total).sqrt()
}

/// The first harmonic `z = cos(theta)`, with its grid cache holding the
/// exact nodal values.
pub fn first_harmonic(basis: &Arc<ZonalBasis>) -> ZonalField {
    let nodes = basis.nodes().to_vec();
    let full = basis.analyze(&nodes);
    let mut coeffs = vec![0.0; basis.lmax() + 1];
    coeffs[1] = full[1];
    let cell = OnceLock::new();
    let _ = cell.set(nodes);
    ZonalField { basis: Arc::clone(basis), coeffs, grid: cell }
}

/// `||z||^2_{L^2} = |S^n| / (n + 1)` for `z = cos(theta)`.
pub fn first_harmonic_norm_sq(basis: &ZonalBasis) -> f64 {
    basis.volume() / (basis.params().n() as f64 + 1.0)
}

/// JSON schema of a serialized zonal field.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldFile {
    pub params: SphereParams,
    #[serde(rename = "L_max")]
    pub lmax: usize,
    pub coeffs: Vec<f64>,
}

impl ZonalField {
    pub fn to_file(&self) -> FieldFile {
        FieldFile {
            params: *self.basis.params(),
            lmax: self.basis.lmax(),
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    /// Reads a field onto a basis built from the file's own parameters.
    pub fn from_json(text: &str, oversample: f64) -> Result<Self> {
        let file: FieldFile = serde_json::from_str(text)?;
        let basis = ZonalBasis::new(file.params, file.lmax, oversample)?;
        Self::from_file(&basis, file)
    }

    pub fn from_file(basis: &Arc<ZonalBasis>, file: FieldFile) -> Result<Self> {
        if file.params != *basis.params() {
            return Err(Error::InvalidInput("field parameters do not match the basis".into()));
        }
        if file.coeffs.len() > basis.node_count() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients exceed grid capacity {}",
                file.coeffs.len(),
                basis.node_count()
            )));
        }
        Ok(Self::from_coeffs(basis, file.coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn basis(m: u32, n: u32, lmax: usize) -> Arc<ZonalBasis> {
        ZonalBasis::new(SphereParams::new(m, n).unwrap(), lmax, 2.0).unwrap()
    }

    #[test]
    fn volume_of_constants() {
        let b2 = basis(1, 2, 32);
        assert_relative_eq!(ZonalField::constant(&b2, 1.0).integral(), 4.0 * PI, epsilon = 1e-12);
        let b3 = basis(1, 3, 16);
        assert_relative_eq!(
            ZonalField::constant(&b3, 1.0).integral(),
            2.0 * PI * PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_low_oversampling() {
        let p = SphereParams::new(1, 2).unwrap();
        assert!(matches!(ZonalBasis::new(p, 8, 1.0), Err(Error::QuadratureFailure(_))));
        assert!(matches!(ZonalBasis::new(p, 4, 2.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gram_is_identity() {
        for (m, n) in [(1, 2), (2, 5), (3, 7)] {
            assert!(basis(m, n, 64).gram_error() < 1e-12);
        }
    }

    #[test]
    fn simple_integrals() {
        let b = basis(1, 2, 32);
        let z = first_harmonic(&b);
        assert!(z.integral().abs() < 1e-14);
        assert_relative_eq!(z.mul(&z).integral(), 4.0 * PI / 3.0, epsilon = 1e-13);
        assert_relative_eq!(z.inner(&z), first_harmonic_norm_sq(&b), epsilon = 1e-13);
        let b5 = basis(2, 5, 16);
        assert!(first_harmonic(&b5).integral().abs() < 1e-13);
    }

    #[test]
    fn first_harmonic_is_cos_theta() {
        let b = basis(2, 5, 16);
        let z = first_harmonic(&b);
        assert_eq!(z.grid(), b.nodes());
        let resynth = b.synthesize(z.coeffs());
        for (a, x) in resynth.iter().zip(b.nodes()) {
            assert!((a - x).abs() < 1e-14);
        }
        let e1 = ZonalField::harmonic(&b, 1);
        let ratio: Vec<f64> = e1.grid().iter().zip(b.nodes()).map(|(e, x)| e / x).collect();
        assert!(ratio.iter().all(|r| (r - ratio[0]).abs() < 1e-12 && *r > 0.0));
    }

    #[test]
    fn constant_analyzes_to_degree_zero() {
        let b = basis(1, 4, 16);
        let c = b.analyze(&vec![1.0; b.node_count()]);
        assert_relative_eq!(c[0], b.volume().sqrt(), epsilon = 1e-13);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn round_trip() {
        let b = basis(1, 3, 32);
        let coeffs: Vec<f64> = (0..=32).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let back = b.analyze(&b.synthesize(&coeffs));
        for i in 0..b.node_count() {
            let expect = coeffs.get(i).copied().unwrap_or(0.0);
            assert!((back[i] - expect).abs() < 1e-13, "coefficient {i}");
        }
    }

    #[test]
    fn harmonics_are_laplace_eigenfunctions() {
        // weak form: int |grad e_i|^2 dmu_0 = lambda_i
        let b = basis(1, 4, 16);
        for i in [1usize, 2, 5] {
            let ft = ZonalField::harmonic(&b, i).theta_derivative();
            let weak: f64 = ft.iter().zip(b.weights()).map(|(a, w)| a * a * w).sum();
            assert_relative_eq!(weak, b.laplace_eigenvalue(i), max_relative = 1e-12);
        }
        assert_eq!(b.laplace_eigenvalue(1), 4.0);
    }

    #[test]
    fn theta_derivative_examples() {
        let b = basis(1, 3, 16);
        let z = first_harmonic(&b);
        let zt = z.theta_derivative();
        for (d, s) in zt.iter().zip(b.sin_theta()) {
            assert!((d + s).abs() < 1e-13);
        }
        let c = ZonalField::constant(&b, 2.5);
        assert!(c.theta_derivative().iter().all(|v| v.abs() < 1e-12));
        // integration by parts: int e2_t z_t dmu_0 = lambda_1 int e2 z dmu_0 = 0
        let e2t = ZonalField::harmonic(&b, 2).theta_derivative();
        let pairing: f64 = e2t.iter().zip(&zt).zip(b.weights()).map(|((a, c), w)| a * c * w).sum();
        assert!(pairing.abs() < 1e-13);
    }

    #[test]
    fn exp_matches_series() {
        let b = basis(1, 2, 32);
        let f = first_harmonic(&b).scale(0.1);
        let e = f.pointwise_map(f64::exp).unwrap();
        let series = |x: f64| (0..20).fold((0.0, 1.0), |(s, t), k| (s + t, t * 0.1 * x / (k as f64 + 1.0))).0;
        for (x, v) in b.nodes().iter().zip(e.grid()) {
            assert!((series(*x) - v).abs() < 1e-10);
        }
        let zero = ZonalField::zeros(&b).pointwise_map(f64::exp).unwrap();
        assert!((zero.coeff(0) - b.volume().sqrt()).abs() < 1e-13);
        let same = f.pointwise_map(|v| v).unwrap();
        assert!(same.distance(&f) < 1e-14);
    }

    #[test]
    fn underresolved_map_overflows() {
        let b = basis(1, 2, 8);
        let sharp = first_harmonic(&b).scale(20.0);
        assert!(matches!(sharp.pointwise_map(f64::exp), Err(Error::TailOverflow { .. })));
    }

    #[test]
    fn spectral_interpolation_reproduces_nodes() {
        let b = basis(2, 5, 16);
        let f = first_harmonic(&b).scale(0.3).pointwise_map(f64::exp).unwrap();
        for (x, v) in b.nodes().iter().zip(f.grid()) {
            assert!((f.evaluate(*x) - v).abs() < 1e-13);
        }
        assert!((f.evaluate(0.123) - (0.3f64 * 0.123).exp()).abs() < 1e-13);
    }

    #[test]
    fn grid_cache_invalidates_on_mutation() {
        let b = basis(1, 2, 16);
        let mut f = ZonalField::constant(&b, 1.0);
        let before = f.grid()[0];
        f.coeffs_mut()[0] *= 2.0;
        assert_relative_eq!(f.grid()[0], 2.0 * before, epsilon = 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let b = basis(1, 3, 16);
        let f = first_harmonic(&b).scale(0.25);
        let text = f.to_json().unwrap();
        let back = ZonalField::from_json(&text, 2.0).unwrap();
        assert_eq!(back.coeffs(), f.coeffs());
        assert!(text.contains("\"L_max\":16"));
    }
}
