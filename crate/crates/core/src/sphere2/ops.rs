//! The increment operator on `S^2`, `Q[u] = e^{-2u} (1 + P0 u) - 1` with
//! `P0 = -Laplacian`, its linearization and the integral identities.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;

use super::{Sphere2Basis, Sphere2Field};
use crate::error::{Error, Result};

fn eigenvalue(l: usize) -> f64 {
    (l * (l + 1)) as f64
}

/// `P0 = -Laplacian`, multiplier `l (l + 1)`.
pub fn apply_p0(f: &Sphere2Field) -> Sphere2Field {
    f.apply_degree_multipliers(eigenvalue)
}

/// `e^{-2u} (1 + P0 u)` at the nodes.
fn curvature_grid(u: &Sphere2Field) -> Result<Vec<f64>> {
    let e = u.pointwise_map(|v| (-2.0 * v).exp())?;
    Ok(e.grid().iter().zip(apply_p0(u).grid()).map(|(e, p)| e * (1.0 + p)).collect())
}

/// `Q[u]`, full resolution.
pub fn q_increment2(u: &Sphere2Field) -> Result<Sphere2Field> {
    if u.coeffs().iter().all(|c| *c == 0.0) {
        return Ok(Sphere2Field::zeros(u.basis()));
    }
    let grid = curvature_grid(u)?.into_iter().map(|q| q - 1.0).collect();
    Ok(Sphere2Field::from_grid(u.basis(), grid))
}

/// Orthogonal projection onto the first harmonics.
pub fn p1_project2(f: &Sphere2Field) -> Sphere2Field {
    let mut coeffs = vec![0.0; 4];
    coeffs[1..4].copy_from_slice(&f.coeffs()[1..4]);
    Sphere2Field::from_coeffs(f.basis(), coeffs)
}

/// `Q[u] + P1 u`.
pub fn modified_op2(u: &Sphere2Field) -> Result<Sphere2Field> {
    Ok(q_increment2(u)?.add(&p1_project2(u)))
}

/// `dQ[u] v = e^{-2u} P0 v - 2 (1 + Q[u]) v`; at `u = 0` the diagonal
/// operator with multipliers `l (l + 1) - 2`.
#[derive(Debug, Clone)]
pub enum Linearization2 {
    AtZero(Arc<Sphere2Basis>),
    General { basis: Arc<Sphere2Basis>, outer: Vec<f64>, diag: Vec<f64> },
}

pub fn linearize_at2(u: &Sphere2Field) -> Result<Linearization2> {
    let basis = Arc::clone(u.basis());
    if u.coeffs().iter().all(|c| *c == 0.0) {
        return Ok(Linearization2::AtZero(basis));
    }
    let curv = curvature_grid(u)?;
    Ok(Linearization2::General {
        outer: u.grid().iter().map(|v| (-2.0 * v).exp()).collect(),
        diag: curv.iter().map(|q| 2.0 * q).collect(),
        basis,
    })
}

impl Linearization2 {
    pub fn apply(&self, v: &Sphere2Field) -> Sphere2Field {
        match self {
            Self::AtZero(_) => v.apply_degree_multipliers(|l| eigenvalue(l) - 2.0),
            Self::General { basis, outer, diag } => {
                let p0v = apply_p0(v);
                let grid = outer
                    .iter()
                    .zip(p0v.grid())
                    .zip(diag.iter().zip(v.grid()))
                    .map(|((o, p), (d, w))| o * p - d * w)
                    .collect();
                Sphere2Field::from_grid(basis, grid)
            }
        }
    }
}

/// Asymmetry of `dQ[u]` in `L2(e^{2u} dmu_0)` relative to
/// `max(|dQ v| |w|, |v| |dQ w|)`.
pub fn self_adjointness_defect2(u: &Sphere2Field, v: &Sphere2Field, w: &Sphere2Field) -> Result<f64> {
    let weight = u.pointwise_map(|x| (2.0 * x).exp())?;
    let density = weight.grid();
    let lin = linearize_at2(u)?;
    let (lv, lw) = (lin.apply(v), lin.apply(w));
    let norm = |f: &Sphere2Field| f.weighted_inner(f, density).sqrt();
    let gap = (lv.weighted_inner(w, density) - v.weighted_inner(&lw, density)).abs();
    let scale = f64::max(norm(&lv) * norm(w), norm(v) * norm(&lw));
    Ok(if scale == 0.0 { gap } else { gap / scale })
}

/// `|int Q[u] e^{2u} + int e^{2u} - 4 pi|`: the total curvature
/// `int (1 + P0 u) dmu_0` is conserved.
pub fn gauss_bonnet_defect(u: &Sphere2Field) -> Result<f64> {
    let weight = u.pointwise_map(|x| (2.0 * x).exp())?;
    let q = q_increment2(u)?;
    Ok((q.weighted_integral(Some(weight.grid())) + weight.integral() - 4.0 * PI).abs())
}

/// `grad(d . x) . grad q` at the nodes.
fn directional_derivative(q: &Sphere2Field, d: &Vector3<f64>) -> Vec<f64> {
    let b = q.basis();
    let (dt, dp) = q.gradient();
    let mut out = vec![0.0; b.grid_len()];
    for lat in 0..b.nlat() {
        let (x, s) = (b.nodes()[lat], b.sin_theta()[lat]);
        for lon in 0..b.nlon() {
            let (sp, cp) = b.phi()[lon].sin_cos();
            let e_theta = Vector3::new(x * cp, x * sp, -s);
            let e_phi = Vector3::new(-sp, cp, 0.0);
            let i = lat * b.nlon() + lon;
            out[i] = d.dot(&e_theta) * dt[i] + d.dot(&e_phi) * dp[i];
        }
    }
    out
}

fn unit(direction: &Vector3<f64>) -> Result<Vector3<f64>> {
    let norm = direction.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidInput("direction must be a nonzero finite vector".into()));
    }
    Ok(direction / norm)
}

/// `int (X . q) e^{2u} dmu_0` for `X = grad(d . x)`.
pub fn kw_pairing2(u: &Sphere2Field, q: &Sphere2Field, direction: &Vector3<f64>) -> Result<f64> {
    let d = unit(direction)?;
    let weight = u.pointwise_map(|x| (2.0 * x).exp())?;
    let b = u.basis();
    Ok(directional_derivative(q, &d)
        .iter()
        .zip(weight.grid())
        .enumerate()
        .map(|(i, (xq, e))| xq * e * b.weight(i / b.nlon()))
        .sum())
}

/// `int (X . Q[u]) dmu_u`, which vanishes identically.
pub fn kw_integral2(u: &Sphere2Field, direction: &Vector3<f64>) -> Result<f64> {
    kw_pairing2(u, &q_increment2(u)?, direction)
}

/// `sup|grad q| 4 pi`, the natural size of the integrand (`|grad z| <= 1`).
pub fn kw_scale2(q: &Sphere2Field) -> f64 {
    let (dt, dp) = q.gradient();
    let sup = dt.iter().zip(&dp).fold(0.0f64, |a, (t, p)| a.max(t.hypot(*p)));
    sup * 4.0 * PI
}

#[derive(Debug, Clone)]
pub struct Expansion2 {
    pub c2: Sphere2Field,
    pub c3: Sphere2Field,
    /// `int z c3 dmu_0`.
    pub z_pairing: f64,
}

/// Richardson-extrapolated `t^2`, `t^3` coefficients of `Q[tz]`.
pub fn expansion_coeffs2(z: &Sphere2Field, h: f64) -> Result<Expansion2> {
    if !(1e-3..=5e-2).contains(&h) {
        return Err(Error::InvalidInput(format!("step h = {h} outside [1e-3, 5e-2]")));
    }
    let eval = |t: f64| q_increment2(&z.scale(t));
    let (p1, m1, p2, m2) = (eval(h)?, eval(-h)?, eval(2.0 * h)?, eval(-2.0 * h)?);
    let even = |p: &Sphere2Field, m: &Sphere2Field| p.add(m).scale(0.5);
    let odd = |p: &Sphere2Field, m: &Sphere2Field| p.sub(m).scale(0.5);
    let c2 = even(&p1, &m1).scale(16.0).sub(&even(&p2, &m2)).scale(1.0 / (12.0 * h * h));
    let c3 = odd(&p1, &m1).scale(32.0).sub(&odd(&p2, &m2)).scale(1.0 / (24.0 * h * h * h));
    let ones = vec![1.0; z.basis().grid_len()];
    let z_pairing = z.weighted_inner(&c3, &ones);
    Ok(Expansion2 { c2, c3, z_pairing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::q_increment;
    use crate::random::random_zonal;
    use crate::sphere2::random_sphere2;
    use crate::spectra::SphereParams;
    use crate::ZonalBasis;

    fn basis(lmax: usize) -> Arc<Sphere2Basis> {
        Sphere2Basis::new(lmax, 3.0).unwrap()
    }

    #[test]
    fn zero_and_multipliers() {
        let b = basis(8);
        assert_eq!(q_increment2(&Sphere2Field::zeros(&b)).unwrap().norm(), 0.0);
        let lin = linearize_at2(&Sphere2Field::zeros(&b)).unwrap();
        for (l, order) in [(0, 0), (1, -1), (1, 0), (1, 1), (3, 2), (8, -5)] {
            let y = Sphere2Field::harmonic(&b, l, order);
            let out = lin.apply(&y);
            assert_eq!(out.coeff(l, order), eigenvalue(l) - 2.0);
        }
        // the general form at a tiny u agrees with the diagonal one
        let tiny = Sphere2Field::constant(&b, 1e-300);
        let y = Sphere2Field::harmonic(&b, 4, 3);
        assert!((linearize_at2(&tiny).unwrap().apply(&y).coeff(4, 3) - 18.0).abs() < 1e-10);
    }

    #[test]
    fn matches_zonal_pipeline() {
        let b2 = basis(16);
        let bz = ZonalBasis::new(SphereParams::new(1, 2).unwrap(), 16, 3.0).unwrap();
        let uz = random_zonal(&bz, 5, 0.2);
        let u2 = Sphere2Field::from_fn(&b2, |p| uz.evaluate(p.z));
        let q2 = q_increment2(&u2).unwrap();
        let qz = q_increment(&uz).unwrap();
        let worst = (0..b2.grid_len())
            .map(|i| (q2.grid()[i] - qz.evaluate(b2.nodes()[i / b2.nlon()])).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst:e}");
    }

    #[test]
    fn self_adjoint_and_total_curvature() {
        let b = basis(12);
        for seed in 0..3 {
            let u = random_sphere2(&b, seed, 0.2);
            let v = random_sphere2(&b, seed + 10, 1.0);
            let w = random_sphere2(&b, seed + 20, 1.0);
            assert!(self_adjointness_defect2(&u, &v, &w).unwrap() < 1e-12);
            assert!(gauss_bonnet_defect(&u).unwrap() < 1e-11);
        }
    }

    #[test]
    fn kw_identity_and_control() {
        let b = basis(12);
        let u = random_sphere2(&b, 7, 0.15);
        let q = q_increment2(&u).unwrap();
        for d in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let kw = kw_pairing2(&u, &q, &d).unwrap();
            assert!(kw.abs() <= 1e-10 * kw_scale2(&q), "{kw:e}");
        }
        // q = z at u = 0: lambda_1 int z^2 = 2 * 4 pi / 3
        let z = Sphere2Field::linear(&b, &Vector3::z());
        let ctrl = kw_pairing2(&Sphere2Field::zeros(&b), &z, &Vector3::z()).unwrap();
        assert!((ctrl - 8.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn critical_expansion() {
        let b = basis(8);
        let z = Sphere2Field::linear(&b, &Vector3::z());
        let e = expansion_coeffs2(&z, 0.01).unwrap();
        assert!((e.z_pairing - 32.0 * PI / 15.0).abs() < 1e-8, "{}", e.z_pairing);
        // c2 = -2 z^2, c3 = (8/3) z^3
        let want2 = Sphere2Field::from_fn(&b, |p| -2.0 * p.z * p.z);
        let want3 = Sphere2Field::from_fn(&b, |p| 8.0 / 3.0 * p.z.powi(3));
        assert!(e.c2.distance(&want2) < 1e-6 * want2.norm());
        assert!(e.c3.distance(&want3) < 1e-6 * want3.norm());
    }
}
