//! The curvature operators in spectral form.
//!
//! With `a = n/2 - m`, `b = n/2 + m` and `P0 = p0(Laplacian)`:
//!
//! * critical case `n = 2m`: `Q[u] = e^{-2mu} (Q0 + P0 u) - Q0`;
//! * otherwise `Q[u] = e^{-bu} P0[e^{au}] - p0(lambda_0)`, which is the
//!   renormalized increment `(n/2 - m)(Q(g_u) - Q0)`.
//!
//! Linear parts act in coefficient space, pointwise parts on the grid.
//! Every nonlinear result is returned at full grid resolution.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{chop, ZonalBasis, ZonalField};
use crate::error::{Error, Result};
use crate::spectra::{self, SphereParams};

/// A spectral multiplier sequence indexed by harmonic degree.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    multipliers: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(multipliers: Vec<f64>) -> Self {
        Self { multipliers }
    }

    /// `p0(lambda_i)`, `i < len`.
    pub fn p0(params: &SphereParams, len: usize) -> Self {
        Self::new((0..len as u64).map(|i| spectra::to_f64(&spectra::p0_eval(i, params))).collect())
    }

    /// Eigenvalues of `L = dQ[0]`, `i < len`.
    pub fn linearization_at_zero(params: &SphereParams, len: usize) -> Self {
        Self::new(
            (0..len as u64)
                .map(|i| spectra::to_f64(&spectra::l_multiplier(i, params)))
                .collect(),
        )
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn apply(&self, f: &ZonalField) -> ZonalField {
        f.apply_multipliers(&self.multipliers)
    }
}

/// `P0 f`, after chopping roundoff-level coefficients of `f`.
pub fn apply_p0(f: &ZonalField) -> ZonalField {
    let mut coeffs = f.coeffs().to_vec();
    chop(&mut coeffs);
    ZonalField::from_coeffs(f.basis(), coeffs).apply_multipliers(f.basis().p0_multipliers())
}

fn q0_f64(p: &SphereParams) -> f64 {
    spectra::to_f64(&spectra::q0(p))
}

fn p0_zero(basis: &ZonalBasis) -> f64 {
    basis.p0_multipliers()[0]
}

/// `Q[u]` at the nodes, with the `u = 0` value split off analytically:
/// `q0 expm1(-2mu) + e^{-2mu} P0 u` in the critical case and
/// `p0(lambda_0) expm1(-bu) + e^{-bu} P0[expm1(au)]` otherwise. Applying
/// `P0` to `expm1(au)` instead of `e^{au}` keeps the roundoff that `P0`
/// amplifies proportional to `|au|` rather than to `1`.
fn increment_grid(u: &ZonalField) -> Result<Vec<f64>> {
    let basis = u.basis();
    let p = basis.params();
    let (base, outer, pu) = if p.is_critical() {
        let m2 = 2.0 * p.m() as f64;
        u.pointwise_map(|v| (-m2 * v).exp())?;
        (q0_f64(p), -m2, apply_p0(u))
    } else {
        let a = p.a();
        let w = u.pointwise_map_unchecked(|v| (a * v).exp_m1());
        // the aliasing check is on e^{au} itself, whose tail is that of w
        w.add(&ZonalField::constant(basis, 1.0)).check_tail()?;
        (p0_zero(basis), -p.b(), apply_p0(&w))
    };
    Ok(u
        .grid()
        .iter()
        .zip(pu.grid())
        .map(|(&uk, &pk)| base * (outer * uk).exp_m1() + (outer * uk).exp() * pk)
        .collect())
}

/// The curvature increment `Q[u]` at full resolution.
pub fn q_increment(u: &ZonalField) -> Result<ZonalField> {
    Ok(ZonalField::from_grid(u.basis(), increment_grid(u)?))
}

/// Unrenormalized increment `Q(g_u) - Q0`; differs from [`q_increment`]
/// by the factor `1/(n/2 - m)` away from the critical case.
pub fn q_increment_raw(u: &ZonalField) -> Result<ZonalField> {
    let q = q_increment(u)?;
    let p = u.basis().params();
    Ok(if p.is_critical() { q } else { q.scale(1.0 / p.a()) })
}

/// `Q~[v] = (1+v)^{1-2*} P0(1+v) - (n/2 - m) Q0`, defined away from the
/// critical case for `1 + v > 0`.
pub fn q_tilde(v: &ZonalField) -> Result<ZonalField> {
    let basis = v.basis();
    let p = basis.params();
    let exponent = 1.0 - spectra::to_f64(&spectra::two_star(p)?);
    let min = 1.0 + v.min_value();
    if !(min > 0.0) {
        return Err(Error::NonPositiveConformalFactor { min });
    }
    let p0 = p0_zero(basis);
    v.pointwise_map(|x| (1.0 + x).powf(exponent))?;
    let pv = apply_p0(v);
    let grid = v
        .grid()
        .iter()
        .zip(pv.grid())
        .map(|(&vk, &pk)| (1.0 + vk).powf(exponent) * (p0 + pk) - p0)
        .collect();
    Ok(ZonalField::from_grid(basis, grid))
}

/// `e^{nu}`, the density of `dmu_u` against `dmu_0`.
pub fn measure_weight(u: &ZonalField) -> Result<ZonalField> {
    let n = u.basis().params().n() as f64;
    u.pointwise_map(|v| (n * v).exp())
}

/// Orthogonal projection onto the first harmonics.
pub fn p1_project(f: &ZonalField) -> ZonalField {
    ZonalField::from_coeffs(f.basis(), vec![0.0, f.coeff(1)])
}

/// Asymmetry of `dQ[u]` in `L2(dmu_u)`: `|<dQ v, w> - <v, dQ w>|` relative
/// to the Cauchy-Schwarz size `max(|dQ v| |w|, |v| |dQ w|)` of either term.
pub fn self_adjointness_defect(u: &ZonalField, v: &ZonalField, w: &ZonalField) -> Result<f64> {
    let weight = measure_weight(u)?;
    let density = weight.grid();
    let lin = linearize_at(u)?;
    let (lv, lw) = (lin.apply(v), lin.apply(w));
    let norm = |f: &ZonalField| f.weighted_inner(f, density).sqrt();
    let gap = (lv.weighted_inner(w, density) - v.weighted_inner(&lw, density)).abs();
    let scale = f64::max(norm(&lv) * norm(w), norm(v) * norm(&lw));
    Ok(if scale == 0.0 { gap } else { gap / scale })
}

/// The linearization `dQ[u]`. At `u = 0` it is the diagonal operator of
/// exact multipliers; elsewhere `v -> outer * P0[inner * v] - diag * v`.
#[derive(Debug, Clone)]
pub enum Linearization {
    Diagonal { basis: Arc<ZonalBasis>, op: DiagonalOperator },
    General(GeneralLinearization),
}

#[derive(Debug, Clone)]
pub struct GeneralLinearization {
    basis: Arc<ZonalBasis>,
    outer: Vec<f64>,
    /// `None` in the critical case, where `P0` acts on `v` directly.
    inner: Option<Vec<f64>>,
    diag: Vec<f64>,
}

pub fn linearize_at(u: &ZonalField) -> Result<Linearization> {
    let basis = Arc::clone(u.basis());
    let p = *basis.params();
    if u.coeffs().iter().all(|c| *c == 0.0) {
        let op = DiagonalOperator::linearization_at_zero(&p, basis.node_count());
        return Ok(Linearization::Diagonal { basis, op });
    }
    let base = if p.is_critical() { q0_f64(&p) } else { p0_zero(&basis) };
    let pu1: Vec<f64> = increment_grid(u)?.into_iter().map(|q| q + base).collect();
    if p.is_critical() {
        let m2 = 2.0 * p.m() as f64;
        Ok(Linearization::General(GeneralLinearization {
            outer: u.grid().iter().map(|&v| (-m2 * v).exp()).collect(),
            inner: None,
            diag: pu1.iter().map(|q| m2 * q).collect(),
            basis,
        }))
    } else {
        let (a, b) = (p.a(), p.b());
        Ok(Linearization::General(GeneralLinearization {
            outer: u.grid().iter().map(|&v| a * (-b * v).exp()).collect(),
            inner: Some(u.grid().iter().map(|&v| (a * v).exp()).collect()),
            diag: pu1.iter().map(|q| b * q).collect(),
            basis,
        }))
    }
}

impl Linearization {
    pub fn apply(&self, v: &ZonalField) -> ZonalField {
        match self {
            Self::Diagonal { op, .. } => op.apply(v),
            Self::General(g) => g.apply(v),
        }
    }

    /// Dense Galerkin matrix of the action on degrees `0..=lmax`.
    pub fn matrix(&self, lmax: usize) -> DMatrix<f64> {
        match self {
            Self::Diagonal { op, .. } => {
                DMatrix::from_diagonal(&DVector::from_column_slice(&op.multipliers()[..=lmax]))
            }
            Self::General(g) => g.matrix(lmax),
        }
    }

    pub fn basis(&self) -> &Arc<ZonalBasis> {
        match self {
            Self::Diagonal { basis, .. } => basis,
            Self::General(g) => &g.basis,
        }
    }

    /// Applies the Galerkin matrix to a coefficient vector.
    pub fn apply_coeffs(&self, lmax: usize, coeffs: &[f64]) -> Vec<f64> {
        let m = self.matrix(lmax);
        (m * DVector::from_column_slice(coeffs)).as_slice().to_vec()
    }
}

impl GeneralLinearization {
    pub fn apply(&self, v: &ZonalField) -> ZonalField {
        let p0v = match &self.inner {
            None => apply_p0(v),
            Some(inner) => {
                let prod: Vec<f64> = inner.iter().zip(v.grid()).map(|(a, b)| a * b).collect();
                apply_p0(&ZonalField::from_grid(&self.basis, prod))
            }
        };
        let grid = self
            .outer
            .iter()
            .zip(p0v.grid())
            .zip(self.diag.iter().zip(v.grid()))
            .map(|((o, pv), (d, vk))| o * pv - d * vk)
            .collect();
        ZonalField::from_grid(&self.basis, grid)
    }

    /// Dense Galerkin matrix of the action on degrees `0..=lmax`.
    pub fn matrix(&self, lmax: usize) -> DMatrix<f64> {
        let cols = lmax + 1;
        let values = self.basis.values();
        let p0 = self.basis.p0_multipliers();
        let v = values.columns(0, cols);
        let mut g = match &self.inner {
            None => {
                let mut g = v.clone_owned();
                for j in 0..cols {
                    g.column_mut(j).scale_mut(p0[j]);
                }
                g
            }
            Some(inner) => {
                let mut scaled = v.clone_owned();
                for (k, w) in inner.iter().enumerate() {
                    scaled.row_mut(k).scale_mut(*w);
                }
                let mut c = self.basis.analysis_matrix() * scaled;
                for mut col in c.column_iter_mut() {
                    chop(col.as_mut_slice());
                }
                for (i, mult) in p0.iter().enumerate() {
                    c.row_mut(i).scale_mut(*mult);
                }
                values * c
            }
        };
        for k in 0..g.nrows() {
            let o = self.outer[k];
            let d = self.diag[k];
            for j in 0..cols {
                g[(k, j)] = o * g[(k, j)] - d * v[(k, j)];
            }
        }
        self.basis.analysis_matrix().rows(0, cols) * g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::first_harmonic;
    use crate::random::random_zonal;

    fn basis(m: u32, n: u32, lmax: usize) -> Arc<ZonalBasis> {
        ZonalBasis::new(SphereParams::new(m, n).unwrap(), lmax, 3.0).unwrap()
    }

    #[test]
    fn p0_on_constants_and_first_harmonic() {
        let b = basis(1, 3, 16);
        let one = ZonalField::constant(&b, 1.0);
        let p = apply_p0(&one);
        assert!((p.grid()[0] - 0.75).abs() < 1e-14);
        let bc = basis(2, 4, 16);
        assert!(apply_p0(&ZonalField::constant(&bc, 1.0)).norm() < 1e-13);
        let z = first_harmonic(&bc);
        assert!(apply_p0(&z).distance(&z.scale(24.0)) < 1e-12);
    }

    #[test]
    fn zero_maps_to_zero() {
        for (m, n) in [(1, 2), (2, 5), (3, 6)] {
            let b = basis(m, n, 16);
            let u = ZonalField::zeros(&b);
            assert!(q_increment(&u).unwrap().norm() < 1e-12);
            if !b.params().is_critical() {
                assert!(q_tilde(&u).unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn critical_first_harmonic_closed_form() {
        // Q[tz]/Q0 = e^{-ntz}(1 + ntz) - 1 pointwise for z in the first harmonics
        for (m, n) in [(1u32, 2u32), (2, 4), (3, 6)] {
            let b = basis(m, n, 32);
            let t = 0.05;
            let q = q_increment(&first_harmonic(&b).scale(t)).unwrap();
            let q0 = q0_f64(b.params());
            let nf = n as f64;
            for (x, v) in b.nodes().iter().zip(q.grid()) {
                let s = nf * t * x;
                let expect = q0 * ((-s).exp() * (1.0 + s) - 1.0);
                assert!((v - expect).abs() < 1e-12 * q0.max(1.0), "({m},{n}) {v} {expect}");
            }
        }
    }

    #[test]
    fn substitution_equivalence() {
        for (m, n) in [(1, 3), (2, 5), (1, 4), (3, 7)] {
            let b = basis(m, n, 24);
            let u = random_zonal(&b, 11, 0.1);
            let a = b.params().a();
            let v = u.pointwise_map(|x| (a * x).exp() - 1.0).unwrap();
            let lhs = q_tilde(&v).unwrap();
            let rhs = q_increment(&u).unwrap();
            let scale = rhs.norm().max(1.0);
            assert!(lhs.distance(&rhs) < 1e-8 * scale, "({m},{n}) {:e} {:e}", lhs.distance(&rhs), scale);
        }
    }

    #[test]
    fn q_tilde_rejects_nonpositive_factor() {
        let b = basis(1, 3, 16);
        let v = first_harmonic(&b).scale(-1.5);
        assert!(matches!(q_tilde(&v), Err(Error::NonPositiveConformalFactor { .. })));
    }

    #[test]
    fn linearization_at_zero_is_diagonal() {
        for (m, n) in [(1, 2), (2, 4), (3, 6), (1, 3), (2, 5), (3, 7), (1, 4)] {
            let b = basis(m, n, 16);
            let lin = linearize_at(&ZonalField::zeros(&b)).unwrap();
            let diag = DiagonalOperator::linearization_at_zero(b.params(), 17);
            let mat = lin.matrix(16);
            let scale = diag.multipliers().iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for i in 0..=16 {
                for j in 0..=16 {
                    let expect = if i == j { diag.multipliers()[i] } else { 0.0 };
                    assert!((mat[(i, j)] - expect).abs() < 1e-12 * scale, "({m},{n}) [{i},{j}]");
                }
            }
            let z = first_harmonic(&b);
            assert!(lin.apply(&z).norm() < 1e-11 * z.norm());
        }
    }

    #[test]
    fn action_matches_matrix() {
        let b = basis(2, 5, 16);
        let u = random_zonal(&b, 3, 0.2);
        let v = random_zonal(&b, 4, 1.0);
        let lin = linearize_at(&u).unwrap();
        let by_action = lin.apply(&v).truncate(16);
        let by_matrix = lin.apply_coeffs(16, v.coeffs());
        let scale = by_action.norm();
        for (a, c) in by_action.coeffs().iter().zip(&by_matrix) {
            assert!((a - c).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (m, n) in [(1, 2), (2, 4), (1, 3), (2, 5)] {
            let b = basis(m, n, 24);
            let u = random_zonal(&b, 21, 0.2);
            let v = random_zonal(&b, 22, 1.0);
            let eps = 1e-5;
            let plus = q_increment(&u.combine(&v, eps)).unwrap();
            let minus = q_increment(&u.combine(&v, -eps)).unwrap();
            let fd = plus.sub(&minus).scale(0.5 / eps);
            let exact = linearize_at(&u).unwrap().apply(&v);
            let rel = fd.distance(&exact) / exact.norm();
            assert!(rel < 1e-6, "({m},{n}): {rel:e}");
        }
    }

    #[test]
    fn p1_projection() {
        let b = basis(1, 2, 32);
        let z = first_harmonic(&b);
        assert!(p1_project(&z).distance(&z) < 1e-15);
        assert!(p1_project(&ZonalField::constant(&b, 1.0)).norm() < 1e-15);
        let z3 = z.mul(&z).mul(&z);
        assert!(p1_project(&z3).distance(&z.scale(0.6)) < 1e-13);
    }

    #[test]
    fn measure_weight_examples() {
        let b = basis(1, 3, 16);
        let w = measure_weight(&ZonalField::constant(&b, 0.1)).unwrap();
        assert!(w.grid().iter().all(|v| (v - 0.3f64.exp()).abs() < 1e-13));
        assert!(measure_weight(&random_zonal(&b, 1, 0.2)).unwrap().integral() > 0.0);
    }

    #[test]
    fn linearization_is_self_adjoint() {
        for (m, n) in [(1, 2), (2, 4), (3, 6), (1, 3), (2, 5), (3, 7), (1, 4)] {
            let b = ZonalBasis::new(SphereParams::new(m, n).unwrap(), 24, 5.0).unwrap();
            for seed in 0..3 {
                let u = random_zonal(&b, seed, 0.2);
                let v = random_zonal(&b, seed + 100, 1.0);
                let w = random_zonal(&b, seed + 200, 1.0);
                let d = self_adjointness_defect(&u, &v, &w).unwrap();
                assert!(d <= 1e-9, "({m},{n}) seed {seed}: {d:e}");
            }
        }
    }
}
