//! Full (non-symmetric) fields on `S^2` for the critical pair `(m, n) = (1, 2)`.
//!
//! Real spherical harmonics without the Condon–Shortley phase:
//! `Y_{l,0} = P_l`, `Y_{l,k} = sqrt(2) P_l^k cos(k phi)` and
//! `Y_{l,-k} = sqrt(2) P_l^k sin(k phi)` for `k > 0`, with `P_l^k` the
//! associated Legendre functions normalized so that every `Y` has unit
//! `L2` norm on the sphere of area `4 pi`. In this convention
//! `(Y_{1,1}, Y_{1,-1}, Y_{1,0}) = sqrt(3 / 4 pi) (x, y, z)`.
//!
//! The grid is Gauss–Legendre in `cos(theta)` times a uniform longitude
//! grid, sized so that fields up to degree `nlat - 1` transform exactly.
//! As in the zonal basis, nonlinear results keep that full resolution.

mod newton;
mod ops;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::DEFAULT_TAIL_THRESHOLD;
use crate::error::{Error, Result};
use crate::quadrature::gauss_gegenbauer;
use crate::random::{degree_std, normal, rng};

pub use newton::{
    defect2, defect_equivariance, defect_witness2, local_inverse2, moser2, Defect2Report,
    Moser2Outcome, Sphere2Solution,
};
pub use ops::{
    apply_p0, expansion_coeffs2, gauss_bonnet_defect, kw_integral2, kw_pairing2, kw_scale2,
    linearize_at2, modified_op2, p1_project2, q_increment2, self_adjointness_defect2,
    Expansion2, Linearization2,
};

/// Flat index of `Y_{l,order}`, `-l <= order <= l`.
pub fn sh_index(l: usize, order: i64) -> usize {
    debug_assert!(order.unsigned_abs() as usize <= l);
    ((l * l + l) as i64 + order) as usize
}

/// Number of coefficients of a field of degree `l`.
pub fn sh_len(l: usize) -> usize {
    (l + 1) * (l + 1)
}

/// `(l, order)` of a flat index.
pub fn sh_degree_order(idx: usize) -> (usize, i64) {
    let l = (idx as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
    (l, idx as i64 - (l * l + l) as i64)
}

#[derive(Debug)]
pub struct Sphere2Basis {
    lmax: usize,
    oversample: f64,
    /// Highest degree a grid function carries, `nlat - 1`.
    full: usize,
    nlat: usize,
    nlon: usize,
    nodes: Vec<f64>,
    sin_theta: Vec<f64>,
    /// Gauss–Legendre weights times `2 pi / nlon`; they sum to `4 pi`.
    cell_weights: Vec<f64>,
    phi: Vec<f64>,
    /// `legendre[k][(lat, l - k)]` is the normalized `P_l^k` at a node.
    legendre: Vec<DMatrix<f64>>,
    /// `d/dtheta` of the same.
    legendre_dtheta: Vec<DMatrix<f64>>,
    /// `trig[(j, k)] = cos(k phi_j)`, `sin(k phi_j)`.
    cos_table: DMatrix<f64>,
    sin_table: DMatrix<f64>,
    tail_threshold: f64,
}

/// Normalized associated Legendre values `P_l^k(x)`, `l = k..=lmax`, for a
/// fixed order `k`, given `s = sqrt(1 - x^2)`.
fn legendre_column(k: usize, lmax: usize, x: f64, s: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut pkk = 1.0 / (4.0 * PI).sqrt();
    for j in 1..=k {
        let jf = j as f64;
        pkk *= ((2.0 * jf + 1.0) / (2.0 * jf)).sqrt() * s;
    }
    out.push(pkk);
    if k == lmax {
        return;
    }
    let kf = k as f64;
    out.push((2.0 * kf + 3.0).sqrt() * x * pkk);
    for l in k + 2..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - kf * kf)).sqrt();
        let lm = lf - 1.0;
        let b = ((lm * lm - kf * kf) / (4.0 * lm * lm - 1.0)).sqrt();
        let next = a * (x * out[l - k - 1] - b * out[l - k - 2]);
        out.push(next);
    }
}

/// `d/dtheta` of the column from [`legendre_column`], via
/// `sin(theta) dP_l^k/dtheta = l x P_l^k - c_{l,k} P_{l-1}^k`.
fn legendre_dtheta_column(k: usize, x: f64, s: f64, vals: &[f64]) -> Vec<f64> {
    let kf = k as f64;
    vals.iter()
        .enumerate()
        .map(|(j, &p)| {
            let l = (k + j) as f64;
            let prev = if j == 0 { 0.0 } else { vals[j - 1] };
            let c = ((2.0 * l + 1.0) * (l - kf) * (l + kf) / (2.0 * l - 1.0)).sqrt();
            let c = if l == 0.0 { 0.0 } else { c };
            (l * x * p - c * prev) / s
        })
        .collect()
}

impl Sphere2Basis {
    /// Band limit `L_max` with `ceil(oversample (L_max + 1))` colatitudes and
    /// `2 nlat` longitudes.
    pub fn new(lmax: usize, oversample: f64) -> Result<Arc<Self>> {
        Self::with_tail_threshold(lmax, oversample, DEFAULT_TAIL_THRESHOLD)
    }

    pub fn with_tail_threshold(lmax: usize, oversample: f64, tail_threshold: f64) -> Result<Arc<Self>> {
        if lmax < 2 {
            return Err(Error::InvalidInput(format!("L_max = {lmax} is below 2")));
        }
        if !(oversample >= 1.5) || !oversample.is_finite() {
            return Err(Error::QuadratureFailure(format!("oversample {oversample} is below 1.5")));
        }
        let nlat = (oversample * (lmax + 1) as f64).ceil() as usize;
        let full = nlat - 1;
        let nlon = 2 * nlat;
        let rule = gauss_gegenbauer(nlat, 0.5, 2.0);
        let nodes = rule.nodes;
        let sin_theta: Vec<f64> = nodes.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let dphi = 2.0 * PI / nlon as f64;
        let cell_weights = rule.weights.iter().map(|w| w * dphi).collect();
        let phi: Vec<f64> = (0..nlon).map(|j| j as f64 * dphi).collect();

        let (legendre, legendre_dtheta): (Vec<_>, Vec<_>) = (0..=full)
            .into_par_iter()
            .map(|k| {
                let rows = full + 1 - k;
                let mut vals = DMatrix::zeros(nlat, rows);
                let mut ders = DMatrix::zeros(nlat, rows);
                let mut col = Vec::with_capacity(rows);
                for (lat, (&x, &s)) in nodes.iter().zip(&sin_theta).enumerate() {
                    legendre_column(k, full, x, s, &mut col);
                    let d = legendre_dtheta_column(k, x, s, &col);
                    for j in 0..rows {
                        vals[(lat, j)] = col[j];
                        ders[(lat, j)] = d[j];
                    }
                }
                (vals, ders)
            })
            .unzip();
        let cos_table = DMatrix::from_fn(nlon, full + 1, |j, k| (k as f64 * phi[j]).cos());
        let sin_table = DMatrix::from_fn(nlon, full + 1, |j, k| (k as f64 * phi[j]).sin());

        let basis = Self {
            lmax,
            oversample,
            full,
            nlat,
            nlon,
            nodes,
            sin_theta,
            cell_weights,
            phi,
            legendre,
            legendre_dtheta,
            cos_table,
            sin_table,
            tail_threshold,
        };
        let err = basis.orthonormality_error();
        if err > ORTHONORMALITY_TOLERANCE {
            return Err(Error::QuadratureFailure(format!("discrete orthonormality error {err:.3e}")));
        }
        Ok(Arc::new(basis))
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn oversample(&self) -> f64 {
        self.oversample
    }

    /// Highest degree representable on the grid.
    pub fn full_degree(&self) -> usize {
        self.full
    }

    pub fn nlat(&self) -> usize {
        self.nlat
    }

    pub fn nlon(&self) -> usize {
        self.nlon
    }

    pub fn grid_len(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn tail_threshold(&self) -> f64 {
        self.tail_threshold
    }

    /// Quadrature weight of grid point `lat * nlon + lon`.
    pub fn weight(&self, lat: usize) -> f64 {
        self.cell_weights[lat]
    }

    /// Unit vector of grid point `(lat, lon)`.
    pub fn point(&self, lat: usize, lon: usize) -> Vector3<f64> {
        let (s, x) = (self.sin_theta[lat], self.nodes[lat]);
        let (sp, cp) = self.phi[lon].sin_cos();
        Vector3::new(s * cp, s * sp, x)
    }

    /// Largest deviation of the discrete Gram matrix from the identity over
    /// all `(l, order)` with `l <= L_max`, checked order by order (distinct
    /// orders are orthogonal by the exact longitude sums).
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..=self.lmax {
            let vals = &self.legendre[k];
            let rows = self.lmax + 1 - k;
            for a in 0..rows {
                for b in a..rows {
                    let mut g = 0.0;
                    for lat in 0..self.nlat {
                        let w = self.cell_weights[lat] * self.nlon as f64 / (2.0 * PI);
                        g += w * vals[(lat, a)] * vals[(lat, b)];
                    }
                    // the longitude factor is 2 pi for every order
                    g *= 2.0 * PI;
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((g - want).abs());
                }
            }
        }
        // longitude sums: cos/sin orthogonality up to the full degree
        let n = self.nlon as f64;
        for k in 0..=self.full {
            for q in k..=self.full {
                let cc: f64 = (0..self.nlon).map(|j| self.cos_table[(j, k)] * self.cos_table[(j, q)]).sum();
                let ss: f64 = (0..self.nlon).map(|j| self.sin_table[(j, k)] * self.sin_table[(j, q)]).sum();
                let want_c = if k != q { 0.0 } else if k == 0 { n } else { n / 2.0 };
                let want_s = if k != q || k == 0 { 0.0 } else { n / 2.0 };
                worst = worst.max(((cc - want_c) / n).abs()).max(((ss - want_s) / n).abs());
            }
        }
        worst
    }

    /// Grid values of the coefficient vector (any length `(d + 1)^2`,
    /// `d <= full`).
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let deg = degree_of_len(coeffs.len());
        let sqrt2 = std::f64::consts::SQRT_2;
        // per-latitude Fourier coefficients
        let mut a = DMatrix::zeros(self.nlat, deg + 1);
        let mut b = DMatrix::zeros(self.nlat, deg + 1);
        for k in 0..=deg {
            let vals = &self.legendre[k];
            let scale = if k == 0 { 1.0 } else { sqrt2 };
            for lat in 0..self.nlat {
                let (mut sc, mut ss) = (0.0, 0.0);
                for l in k..=deg {
                    let p = vals[(lat, l - k)];
                    sc += coeffs[sh_index(l, k as i64)] * p;
                    if k > 0 {
                        ss += coeffs[sh_index(l, -(k as i64))] * p;
                    }
                }
                a[(lat, k)] = scale * sc;
                b[(lat, k)] = scale * ss;
            }
        }
        let mut grid = vec![0.0; self.grid_len()];
        grid.par_chunks_mut(self.nlon).enumerate().for_each(|(lat, row)| {
            for (j, out) in row.iter_mut().enumerate() {
                let mut v = 0.0;
                for k in 0..=deg {
                    v += a[(lat, k)] * self.cos_table[(j, k)] + b[(lat, k)] * self.sin_table[(j, k)];
                }
                *out = v;
            }
        });
        grid
    }

    /// Coefficients up to the full degree of a grid function.
    pub fn analyze(&self, grid: &[f64]) -> Vec<f64> {
        assert_eq!(grid.len(), self.grid_len());
        let deg = self.full;
        let dphi = 2.0 * PI / self.nlon as f64;
        let rows: Vec<(Vec<f64>, Vec<f64>)> = grid
            .par_chunks(self.nlon)
            .map(|row| {
                let mut ca = vec![0.0; deg + 1];
                let mut sa = vec![0.0; deg + 1];
                for k in 0..=deg {
                    let (mut c, mut s) = (0.0, 0.0);
                    for (j, g) in row.iter().enumerate() {
                        c += g * self.cos_table[(j, k)];
                        s += g * self.sin_table[(j, k)];
                    }
                    ca[k] = c * dphi;
                    sa[k] = s * dphi;
                }
                (ca, sa)
            })
            .collect();
        let sqrt2 = std::f64::consts::SQRT_2;
        let gl: Vec<f64> = self.cell_weights.iter().map(|w| w / dphi).collect();
        let mut out = vec![0.0; sh_len(deg)];
        for k in 0..=deg {
            let vals = &self.legendre[k];
            let scale = if k == 0 { 1.0 } else { sqrt2 };
            for l in k..=deg {
                let (mut c, mut s) = (0.0, 0.0);
                for lat in 0..self.nlat {
                    let w = gl[lat] * vals[(lat, l - k)];
                    c += w * rows[lat].0[k];
                    s += w * rows[lat].1[k];
                }
                out[sh_index(l, k as i64)] = scale * c;
                if k > 0 {
                    out[sh_index(l, -(k as i64))] = scale * s;
                }
            }
        }
        out
    }

    /// `(d/dtheta f, (1/sin theta) d/dphi f)` on the grid.
    pub fn gradient(&self, coeffs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let deg = degree_of_len(coeffs.len());
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut da = DMatrix::zeros(self.nlat, deg + 1);
        let mut db = DMatrix::zeros(self.nlat, deg + 1);
        let mut pa = DMatrix::zeros(self.nlat, deg + 1);
        let mut pb = DMatrix::zeros(self.nlat, deg + 1);
        for k in 0..=deg {
            let (vals, ders) = (&self.legendre[k], &self.legendre_dtheta[k]);
            let scale = if k == 0 { 1.0 } else { sqrt2 };
            for lat in 0..self.nlat {
                let (mut dc, mut ds, mut pc, mut ps) = (0.0, 0.0, 0.0, 0.0);
                for l in k..=deg {
                    let c = coeffs[sh_index(l, k as i64)];
                    let s = if k > 0 { coeffs[sh_index(l, -(k as i64))] } else { 0.0 };
                    dc += c * ders[(lat, l - k)];
                    ds += s * ders[(lat, l - k)];
                    pc += c * vals[(lat, l - k)];
                    ps += s * vals[(lat, l - k)];
                }
                let over_sin = k as f64 / self.sin_theta[lat];
                da[(lat, k)] = scale * dc;
                db[(lat, k)] = scale * ds;
                // d/dphi of cos(k phi) is -k sin(k phi), of sin(k phi) is k cos(k phi)
                pa[(lat, k)] = scale * ps * over_sin;
                pb[(lat, k)] = -scale * pc * over_sin;
            }
        }
        let mut dtheta = vec![0.0; self.grid_len()];
        let mut dphi = vec![0.0; self.grid_len()];
        for lat in 0..self.nlat {
            for j in 0..self.nlon {
                let (mut t, mut p) = (0.0, 0.0);
                for k in 0..=deg {
                    let (c, s) = (self.cos_table[(j, k)], self.sin_table[(j, k)]);
                    t += da[(lat, k)] * c + db[(lat, k)] * s;
                    p += pa[(lat, k)] * c + pb[(lat, k)] * s;
                }
                dtheta[lat * self.nlon + j] = t;
                dphi[lat * self.nlon + j] = p;
            }
        }
        (dtheta, dphi)
    }

    /// Value of the coefficient vector at a unit vector.
    pub fn evaluate(&self, coeffs: &[f64], p: &Vector3<f64>) -> f64 {
        let deg = degree_of_len(coeffs.len());
        let x = p.z.clamp(-1.0, 1.0);
        let s = (p.x * p.x + p.y * p.y).sqrt();
        let phi = p.y.atan2(p.x);
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut col = Vec::with_capacity(deg + 1);
        let mut v = 0.0;
        for k in 0..=deg {
            legendre_column(k, deg, x, s, &mut col);
            let (sk, ck) = (k as f64 * phi).sin_cos();
            for l in k..=deg {
                let pv = col[l - k];
                if k == 0 {
                    v += coeffs[sh_index(l, 0)] * pv;
                } else {
                    v += sqrt2 * pv * (coeffs[sh_index(l, k as i64)] * ck + coeffs[sh_index(l, -(k as i64))] * sk);
                }
            }
        }
        v
    }
}

/// Discrete orthonormality tolerance of the basis tables.
const ORTHONORMALITY_TOLERANCE: f64 = 1e-11;

fn degree_of_len(len: usize) -> usize {
    let d = (len as f64).sqrt().round() as usize;
    assert_eq!(d * d, len, "coefficient length {len} is not a square");
    d - 1
}

/// A function on `S^2` as real spherical-harmonic coefficients, with
/// lazily cached grid values.
#[derive(Debug, Clone)]
pub struct Sphere2Field {
    basis: Arc<Sphere2Basis>,
    coeffs: Vec<f64>,
    grid: OnceLock<Vec<f64>>,
}

impl Sphere2Field {
    pub fn from_coeffs(basis: &Arc<Sphere2Basis>, coeffs: Vec<f64>) -> Self {
        let deg = degree_of_len(coeffs.len());
        assert!(deg <= basis.full, "degree {deg} exceeds the grid capacity {}", basis.full);
        Self { basis: Arc::clone(basis), coeffs, grid: OnceLock::new() }
    }

    /// Full-resolution field of a grid function.
    pub fn from_grid(basis: &Arc<Sphere2Basis>, grid: Vec<f64>) -> Self {
        let coeffs = basis.analyze(&grid);
        Self { basis: Arc::clone(basis), coeffs, grid: OnceLock::new() }
    }

    pub fn zeros(basis: &Arc<Sphere2Basis>) -> Self {
        Self::from_coeffs(basis, vec![0.0; sh_len(basis.lmax)])
    }

    pub fn constant(basis: &Arc<Sphere2Basis>, c: f64) -> Self {
        let mut coeffs = vec![0.0; sh_len(basis.lmax)];
        coeffs[0] = c * (4.0 * PI).sqrt();
        Self::from_coeffs(basis, coeffs)
    }

    /// `Y_{l,order}`.
    pub fn harmonic(basis: &Arc<Sphere2Basis>, l: usize, order: i64) -> Self {
        let mut coeffs = vec![0.0; sh_len(basis.lmax.max(l))];
        coeffs[sh_index(l, order)] = 1.0;
        Self::from_coeffs(basis, coeffs)
    }

    /// The linear function `d . x` for a direction `d`.
    pub fn linear(basis: &Arc<Sphere2Basis>, d: &Vector3<f64>) -> Self {
        let c = (4.0 * PI / 3.0).sqrt();
        let mut coeffs = vec![0.0; sh_len(basis.lmax)];
        coeffs[sh_index(1, 1)] = c * d.x;
        coeffs[sh_index(1, -1)] = c * d.y;
        coeffs[sh_index(1, 0)] = c * d.z;
        Self::from_coeffs(basis, coeffs)
    }

    /// Full-resolution interpolant of a function of the unit vector.
    pub fn from_fn(basis: &Arc<Sphere2Basis>, f: impl Fn(&Vector3<f64>) -> f64 + Sync) -> Self {
        let grid = (0..basis.grid_len())
            .into_par_iter()
            .map(|i| f(&basis.point(i / basis.nlon, i % basis.nlon)))
            .collect();
        Self::from_grid(basis, grid)
    }

    pub fn basis(&self) -> &Arc<Sphere2Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        degree_of_len(self.coeffs.len())
    }

    pub fn coeff(&self, l: usize, order: i64) -> f64 {
        self.coeffs.get(sh_index(l, order)).copied().unwrap_or(0.0)
    }

    pub fn grid(&self) -> &[f64] {
        self.grid.get_or_init(|| self.basis.synthesize(&self.coeffs))
    }

    /// Coefficients of degrees `0..=lmax` (zero padded).
    pub fn truncate(&self, lmax: usize) -> Self {
        let mut coeffs = vec![0.0; sh_len(lmax)];
        let k = coeffs.len().min(self.coeffs.len());
        coeffs[..k].copy_from_slice(&self.coeffs[..k]);
        Self::from_coeffs(&self.basis, coeffs)
    }

    pub fn band_limited(&self) -> Self {
        self.truncate(self.basis.lmax)
    }

    /// `L2(dmu_0)` norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.grid().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn integral(&self) -> f64 {
        self.weighted_integral(None)
    }

    /// `sum w_k f_k d_k` with an optional nodal density.
    pub fn weighted_integral(&self, density: Option<&[f64]>) -> f64 {
        let nlon = self.basis.nlon;
        self.grid()
            .iter()
            .enumerate()
            .map(|(i, f)| f * self.basis.cell_weights[i / nlon] * density.map_or(1.0, |d| d[i]))
            .sum()
    }

    pub fn weighted_inner(&self, other: &Sphere2Field, density: &[f64]) -> f64 {
        let nlon = self.basis.nlon;
        self.grid()
            .iter()
            .zip(other.grid())
            .enumerate()
            .map(|(i, (f, g))| f * g * self.basis.cell_weights[i / nlon] * density[i])
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coeffs(&self.basis, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Sphere2Field) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Sphere2Field) -> Self {
        self.combine(other, -1.0)
    }

    /// `self + s other`, at the larger of the two degrees.
    pub fn combine(&self, other: &Sphere2Field, s: f64) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| self.coeffs.get(i).copied().unwrap_or(0.0) + s * other.coeffs.get(i).copied().unwrap_or(0.0))
            .collect();
        Self::from_coeffs(&self.basis, coeffs)
    }

    pub fn distance(&self, other: &Sphere2Field) -> f64 {
        self.sub(other).norm()
    }

    /// Multiplies degree `l` by `mult(l)`.
    pub fn apply_degree_multipliers(&self, mult: impl Fn(usize) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * mult(sh_degree_order(i).0))
            .collect();
        Self::from_coeffs(&self.basis, coeffs)
    }

    /// `phi(f)` pointwise, with the aliasing tail checked.
    pub fn pointwise_map(&self, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let out = self.pointwise_map_unchecked(phi);
        out.check_tail()?;
        Ok(out)
    }

    pub fn pointwise_map_unchecked(&self, phi: impl Fn(f64) -> f64) -> Self {
        let grid = self.grid().iter().map(|&v| phi(v)).collect();
        Self::from_grid(&self.basis, grid)
    }

    /// Relative `l2` weight of the top tenth of the degrees.
    pub fn tail(&self) -> f64 {
        let deg = self.degree();
        let top = (deg + 1).div_ceil(10);
        let total: f64 = self.coeffs.iter().map(|c| c * c).sum();
        if total == 0.0 {
            return 0.0;
        }
        // degrees deg + 1 - top ..= deg
        let tail: f64 = self.coeffs[(deg + 1 - top) * (deg + 1 - top)..].iter().map(|c| c * c).sum();
        (tail / total).sqrt()
    }

    pub fn check_tail(&self) -> Result<()> {
        let tail = self.tail();
        let threshold = self.basis.tail_threshold;
        if tail > threshold || !tail.is_finite() {
            return Err(Error::TailOverflow { tail, threshold });
        }
        Ok(())
    }

    /// `l2` norm of the odd-degree coefficients.
    pub fn odd_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| sh_degree_order(*i).0 % 2 == 1)
            .map(|(_, c)| c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn evaluate(&self, p: &Vector3<f64>) -> f64 {
        self.basis.evaluate(&self.coeffs, p)
    }

    /// `(d/dtheta f, (1/sin theta) d/dphi f)` on the grid.
    pub fn gradient(&self) -> (Vec<f64>, Vec<f64>) {
        self.basis.gradient(&self.coeffs)
    }

    /// `f o R`, resampled at the rotated grid and re-analyzed at the
    /// field's own degree.
    pub fn rotated(&self, r: &Rotation3<f64>) -> Self {
        let b = &self.basis;
        let grid = (0..b.grid_len())
            .into_par_iter()
            .map(|i| self.evaluate(&(r * b.point(i / b.nlon, i % b.nlon))))
            .collect();
        Self::from_grid(b, grid).truncate(self.degree())
    }

    /// The three `l = 1` coefficients as the Cartesian vector `c` with
    /// `P1 f = sqrt(3 / 4 pi) c . x`.
    pub fn first_harmonic_vector(&self) -> Vector3<f64> {
        Vector3::new(self.coeff(1, 1), self.coeff(1, -1), self.coeff(1, 0))
    }

    pub fn to_file(&self) -> Sphere2FieldFile {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let (l, order) = sh_degree_order(i);
                HarmonicCoeff { l, order, value }
            })
            .collect();
        Sphere2FieldFile { lmax: self.basis.lmax, coeffs }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_file(basis: &Arc<Sphere2Basis>, file: &Sphere2FieldFile) -> Result<Self> {
        let deg = file.coeffs.iter().map(|c| c.l).max().unwrap_or(0).max(basis.lmax);
        if deg > basis.full {
            return Err(Error::InvalidInput(format!("degree {deg} exceeds grid capacity {}", basis.full)));
        }
        let mut coeffs = vec![0.0; sh_len(deg)];
        for c in &file.coeffs {
            if c.order.unsigned_abs() as usize > c.l {
                return Err(Error::InvalidInput(format!("order {} exceeds degree {}", c.order, c.l)));
            }
            coeffs[sh_index(c.l, c.order)] = c.value;
        }
        Ok(Self::from_coeffs(basis, coeffs))
    }

    pub fn from_json(text: &str, oversample: f64) -> Result<Self> {
        let file: Sphere2FieldFile = serde_json::from_str(text)?;
        let basis = Sphere2Basis::new(file.lmax, oversample)?;
        Self::from_file(&basis, &file)
    }
}

/// JSON schema of a serialized `S^2` field: coefficients keyed by degree
/// and order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Sphere2FieldFile {
    #[serde(rename = "L_max")]
    pub lmax: usize,
    pub coeffs: Vec<HarmonicCoeff>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HarmonicCoeff {
    pub l: usize,
    pub order: i64,
    pub value: f64,
}

/// Random field band-limited to `L_max` with sup-norm `amplitude`; degree
/// `l` coefficients have standard deviation `degree_std(l, L_max)`.
pub fn random_sphere2(basis: &Arc<Sphere2Basis>, seed: u64, amplitude: f64) -> Sphere2Field {
    random_with(basis, seed, amplitude, |_| true)
}

/// Antipodally even random field (odd degrees removed).
pub fn random_even_sphere2(basis: &Arc<Sphere2Basis>, seed: u64, amplitude: f64) -> Sphere2Field {
    random_with(basis, seed, amplitude, |l| l % 2 == 0)
}

fn random_with(
    basis: &Arc<Sphere2Basis>,
    seed: u64,
    amplitude: f64,
    keep: impl Fn(usize) -> bool,
) -> Sphere2Field {
    let mut r = rng(seed);
    let lmax = basis.lmax;
    let coeffs = (0..sh_len(lmax))
        .map(|i| {
            let l = sh_degree_order(i).0;
            let c = degree_std(l, lmax) * normal(&mut r);
            if keep(l) { c } else { 0.0 }
        })
        .collect();
    let field = Sphere2Field::from_coeffs(basis, coeffs);
    let sup = field.sup_norm();
    field.scale(amplitude / sup)
}

/// Seeded uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_rotation(seed: u64) -> Rotation3<f64> {
    let mut r = rng(seed);
    let q = nalgebra::Quaternion::new(normal(&mut r), normal(&mut r), normal(&mut r), normal(&mut r));
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis(lmax: usize) -> Arc<Sphere2Basis> {
        Sphere2Basis::new(lmax, 2.0).unwrap()
    }

    #[test]
    fn indexing_round_trips() {
        for i in 0..200 {
            let (l, o) = sh_degree_order(i);
            assert!(o.unsigned_abs() as usize <= l);
            assert_eq!(sh_index(l, o), i);
        }
    }

    #[test]
    fn weights_and_orthonormality() {
        let b = basis(16);
        let area: f64 = (0..b.nlat()).map(|k| b.weight(k) * b.nlon() as f64).sum();
        assert_relative_eq!(area, 4.0 * PI, max_relative = 1e-13);
        assert!(b.orthonormality_error() < 1e-12);
    }

    #[test]
    fn round_trip() {
        let b = basis(16);
        let f = random_sphere2(&b, 3, 1.0);
        let back = b.analyze(f.grid());
        for (i, c) in f.coeffs().iter().enumerate() {
            assert!((back[i] - c).abs() < 1e-12, "{i}");
        }
        assert!(back[f.coeffs().len()..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn first_harmonics_are_coordinates() {
        let b = basis(8);
        let d = Vector3::new(0.3, -0.5, 0.8).normalize();
        let lin = Sphere2Field::linear(&b, &d);
        for i in [0, 7, 40, 100] {
            let p = b.point(i / b.nlon(), i % b.nlon());
            assert!((lin.grid()[i] - d.dot(&p)).abs() < 1e-13);
        }
        assert_relative_eq!(lin.first_harmonic_vector().normalize(), d, epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let b = basis(12);
        let f = random_sphere2(&b, 1, 1.0);
        let (dt, dp) = f.gradient();
        let h = 1e-6;
        for i in [5, 77, 301] {
            let (lat, lon) = (i / b.nlon(), i % b.nlon());
            let theta = b.nodes()[lat].acos();
            let phi = b.phi()[lon];
            let at = |t: f64, p: f64| f.evaluate(&Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()));
            let fd_t = (at(theta + h, phi) - at(theta - h, phi)) / (2.0 * h);
            let fd_p = (at(theta, phi + h) - at(theta, phi - h)) / (2.0 * h) / theta.sin();
            assert!((dt[i] - fd_t).abs() < 1e-7, "{} vs {fd_t}", dt[i]);
            assert!((dp[i] - fd_p).abs() < 1e-7, "{} vs {fd_p}", dp[i]);
        }
    }

    #[test]
    fn rotation_resampling_is_spectral() {
        let b = basis(12);
        let f = random_sphere2(&b, 4, 1.0);
        let r = random_rotation(9);
        let g = f.rotated(&r);
        assert!((g.norm() - f.norm()).abs() < 1e-12);
        let p = Vector3::new(0.2, 0.6, -0.3).normalize();
        assert!((g.evaluate(&p) - f.evaluate(&(r * p))).abs() < 1e-12);
        // rotating a linear function rotates its vector by R^T
        let d = Vector3::new(0.0, 0.6, 0.8);
        let lin = Sphere2Field::linear(&b, &d).rotated(&r);
        let want = r.transpose() * Sphere2Field::linear(&b, &d).first_harmonic_vector();
        assert_relative_eq!(lin.first_harmonic_vector(), want, epsilon = 1e-13);
    }

    #[test]
    fn json_round_trip() {
        let b = basis(6);
        let f = random_sphere2(&b, 2, 0.1);
        let g = Sphere2Field::from_json(&f.to_json().unwrap(), 2.0).unwrap();
        assert_eq!(f.coeffs(), g.coeffs());
        assert!(f.to_json().unwrap().contains("\"order\""));
    }
}
