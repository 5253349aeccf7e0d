//! Newton inversion of `u -> Q[u] + P1 u` on `S^2` and the 3-dimensional
//! defect map `D = P1 S`.
//!
//! Unknowns are the coefficients of degrees `0..=L_max`. Jacobian solves are
//! matrix-free GMRES, right-preconditioned by the operator at `u = 0`,
//! whose multipliers are `l (l + 1) - 2 + [l = 1]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use serde::Serialize;

use super::ops::{linearize_at2, modified_op2, p1_project2, q_increment2};
use super::{sh_degree_order, sh_len, Sphere2Field};
use crate::error::{Error, Result};
use crate::solver::{NewtonOptions, WitnessFit, NEIGHBORHOOD_RADIUS, SYMMETRY_TOLERANCE};

/// Krylov dimension between restarts.
const RESTART: usize = 60;
/// Total GMRES iterations allowed per linear solve.
const MAX_KRYLOV: usize = 600;
/// Relative step size that, failing to lower the residual, marks the
/// evaluation roundoff floor.
const STALL_STEP: f64 = 1e-8;

/// Restarted GMRES with right preconditioning by the diagonal `precond`
/// (applied as `x -> x / precond`). Returns the solution, the iteration
/// count and the final relative residual.
fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: &[f64],
    rhs: &[f64],
    rtol: f64,
) -> (Vec<f64>, usize, f64) {
    let n = rhs.len();
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut total = 0;
    let mut rel = 1.0;
    while total < MAX_KRYLOV {
        let ax = apply(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rtol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(RESTART + 1, RESTART);
        let (mut cs, mut sn) = (vec![0.0; RESTART], vec![0.0; RESTART]);
        let mut g = vec![0.0; RESTART + 1];
        g[0] = beta;
        let mut k = 0;
        while k < RESTART && total < MAX_KRYLOV {
            let z: Vec<f64> = basis[k].iter().zip(precond).map(|(v, p)| v / p).collect();
            let mut w = apply(&z);
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                h[(i, k)] = hij;
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= hij * b);
            }
            let wn = norm(&w);
            h[(k + 1, k)] = wn;
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let d = h[(k, k)].hypot(h[(k + 1, k)]);
            cs[k] = h[(k, k)] / d;
            sn[k] = h[(k + 1, k)] / d;
            h[(k, k)] = d;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            rel = g[k].abs() / bnorm;
            if rel <= rtol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the k x k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[(i, j)] * y[j]).sum();
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            for ((xi, q), p) in x.iter_mut().zip(&basis[j]).zip(precond) {
                *xi += yj * q / p;
            }
        }
        if rel <= rtol {
            break;
        }
    }
    (x, total, rel)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Converged Newton iterate on `S^2` with its diagnostics.
#[derive(Debug, Clone)]
pub struct Sphere2Solution {
    pub u: Sphere2Field,
    pub iterations: usize,
    pub krylov_iterations: usize,
    pub residual: f64,
}

fn residual(u: &Sphere2Field, f: &Sphere2Field, lmax: usize) -> Result<Vec<f64>> {
    let r = modified_op2(u)?.sub(f).truncate(lmax);
    let v = r.coeffs().to_vec();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite residual".into()));
    }
    Ok(v)
}

/// `S(f)` on `S^2`: damped Newton from `u = 0` with matrix-free Jacobian
/// solves, for small data.
pub fn local_inverse2(f: &Sphere2Field, opts: &NewtonOptions) -> Result<Sphere2Solution> {
    let basis = f.basis().clone();
    let lmax = basis.lmax();
    let len = sh_len(lmax);
    let precond: Vec<f64> = (0..len)
        .map(|i| {
            let l = sh_degree_order(i).0;
            (l * (l + 1)) as f64 - 2.0 + if l == 1 { 1.0 } else { 0.0 }
        })
        .collect();
    let target = opts.tol * f.truncate(lmax).norm().max(1.0);

    let mut u = Sphere2Field::zeros(&basis);
    let mut r = residual(&u, f, lmax)?;
    let mut res = norm(&r);
    let (mut iter, mut krylov, mut polish) = (0, 0, 0);
    loop {
        if res <= target {
            if polish == 2 {
                break;
            }
            polish += 1;
        } else if iter >= opts.max_iter {
            return Err(Error::NewtonDiverged { iterations: iter, residual: res });
        }
        let lin = linearize_at2(&u)?;
        let apply = |x: &[f64]| {
            let v = Sphere2Field::from_coeffs(&basis, x.to_vec());
            let mut out = lin.apply(&v).truncate(lmax).coeffs().to_vec();
            for i in 1..4 {
                out[i] += x[i];
            }
            out
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let rtol = (res / f.truncate(lmax).norm().max(1.0)).clamp(1e-14, 1e-3);
        let (step, its, _) = gmres(apply, &precond, &neg, rtol);
        krylov += its;

        let scale = u.coeffs().iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let small = step.iter().fold(0.0f64, |a, s| a.max(s.abs())) <= STALL_STEP * scale;
        let halvings = if res <= target || small { 0 } else { opts.max_halvings };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=halvings {
            let coeffs = u.coeffs().iter().zip(&step).map(|(c, s)| c + alpha * s).collect();
            let trial = Sphere2Field::from_coeffs(&basis, coeffs);
            if trial.sup_norm() <= NEIGHBORHOOD_RADIUS {
                if let Ok(rt) = residual(&trial, f, lmax) {
                    if norm(&rt) < res {
                        accepted = Some((trial, rt));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, rt)) => {
                u = trial;
                res = norm(&rt);
                r = rt;
                if polish == 0 {
                    iter += 1;
                }
            }
            None if res <= target || small => break,
            None => return Err(Error::NewtonDiverged { iterations: iter + 1, residual: res }),
        }
    }
    Ok(Sphere2Solution { u, iterations: iter, krylov_iterations: krylov, residual: res })
}

#[derive(Debug, Clone, Serialize)]
pub struct Defect2Report {
    /// `l = 1` coefficients of `S(f)` for orders `-1, 0, 1`.
    pub defect: [f64; 3],
    /// The same as the Cartesian vector `c`, `P1 S(f) = sqrt(3 / 4 pi) c . x`.
    pub vector: [f64; 3],
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub residual: f64,
    /// `|Q[S(f)] - (f - D(f))|` on degrees up to `L_max`.
    pub fredholm_residual: f64,
}

fn defect_with_solution(f: &Sphere2Field, opts: &NewtonOptions) -> Result<(Defect2Report, Sphere2Field)> {
    let sol = local_inverse2(f, opts)?;
    let lmax = f.basis().lmax();
    let d = p1_project2(&sol.u);
    let lhs = q_increment2(&sol.u)?.truncate(lmax);
    let rhs = f.truncate(lmax).sub(&d);
    let v = sol.u.first_harmonic_vector();
    let report = Defect2Report {
        defect: [sol.u.coeff(1, -1), sol.u.coeff(1, 0), sol.u.coeff(1, 1)],
        vector: [v.x, v.y, v.z],
        newton_iters: sol.iterations,
        krylov_iters: sol.krylov_iterations,
        residual: sol.residual,
        fredholm_residual: lhs.distance(&rhs),
    };
    Ok((report, sol.u))
}

/// `D(f) = P1 S(f)` as its three `l = 1` coefficients.
pub fn defect2(f: &Sphere2Field, opts: &NewtonOptions) -> Result<Defect2Report> {
    Ok(defect_with_solution(f, opts)?.0)
}

#[derive(Debug, Clone)]
pub struct Moser2Outcome {
    pub report: Defect2Report,
    pub u: Sphere2Field,
    /// `|Q[u] - f|` on degrees up to `L_max`.
    pub image_residual: f64,
}

/// Solves `Q[u] = f` for antipodally even `f`.
pub fn moser2(f: &Sphere2Field, opts: &NewtonOptions) -> Result<Moser2Outcome> {
    let odd_norm = f.odd_norm();
    if odd_norm > SYMMETRY_TOLERANCE {
        return Err(Error::SymmetryViolation { odd_norm });
    }
    let (report, u) = defect_with_solution(f, opts)?;
    let lmax = f.basis().lmax();
    let image_residual = q_increment2(&u)?.truncate(lmax).distance(&f.truncate(lmax));
    Ok(Moser2Outcome { report, u, image_residual })
}

/// `|D(f o R) - R^T D(f)|` with defects as Cartesian vectors.
pub fn defect_equivariance(f: &Sphere2Field, r: &Rotation3<f64>, opts: &NewtonOptions) -> Result<f64> {
    let d0 = Vector3::from(defect2(f, opts)?.vector);
    let d1 = Vector3::from(defect2(&f.rotated(r), opts)?.vector);
    Ok((d1 - r.transpose() * d0).norm())
}

/// Fits the `d . x` component of `D(Q[t d . x])` to a cubic in `t`.
pub fn defect_witness2(direction: &Vector3<f64>, basis: &std::sync::Arc<super::Sphere2Basis>, t_values: &[f64], opts: &NewtonOptions) -> Result<WitnessFit> {
    if t_values.len() < 3 {
        return Err(Error::InvalidInput("the cubic fit needs at least three t-values".into()));
    }
    let d = direction.normalize();
    let z = Sphere2Field::linear(basis, &d);
    let unit = (3.0 / (4.0 * PI)).sqrt();
    let mut samples = Vec::with_capacity(t_values.len());
    let mut worst = 0.0f64;
    for &t in t_values {
        let report = defect2(&q_increment2(&z.scale(t))?, opts)?;
        worst = worst.max(report.fredholm_residual);
        samples.push(unit * Vector3::from(report.vector).dot(&d));
    }
    let design = DMatrix::from_fn(t_values.len(), 3, |i, j| t_values[i].powi(j as i32 + 1));
    let fit = design
        .svd(true, true)
        .solve(&DVector::from_column_slice(&samples), 1e-300)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(WitnessFit {
        t_values: t_values.to_vec(),
        samples,
        linear: fit[0],
        quadratic: fit[1],
        cubic: fit[2],
        max_fredholm_residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere2::{random_even_sphere2, random_rotation, random_sphere2, Sphere2Basis};
    use crate::solver::FINE_WITNESS_T;
    use std::sync::Arc;

    fn basis(lmax: usize) -> Arc<Sphere2Basis> {
        Sphere2Basis::new(lmax, 3.0).unwrap()
    }

    #[test]
    fn gmres_solves_a_diagonal_system() {
        let diag = [3.0, -2.0, 5.0, 7.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let (x, _, rel) = gmres(|v| v.iter().zip(&diag).map(|(a, b)| a * b).collect(), &[1.0; 4], &rhs, 1e-14);
        assert!(rel <= 1e-14);
        for i in 0..4 {
            assert!((x[i] - rhs[i] / diag[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_and_first_harmonic_data() {
        let b = basis(8);
        let opts = NewtonOptions::default();
        assert_eq!(defect2(&Sphere2Field::zeros(&b), &opts).unwrap().defect, [0.0; 3]);
        for (slot, order) in [(0, -1), (1, 0), (2, 1)] {
            let eps = 1e-4;
            let f = Sphere2Field::harmonic(&b, 1, order).scale(eps);
            let rep = defect2(&f, &opts).unwrap();
            assert!((rep.defect[slot] - eps).abs() < 1e-6 * eps, "{rep:?}");
            for other in 0..3 {
                if other != slot {
                    assert!(rep.defect[other].abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn inverts_small_data() {
        let b = basis(12);
        let u0 = random_sphere2(&b, 3, 0.02);
        let f = modified_op2(&u0).unwrap();
        let sol = local_inverse2(&f, &NewtonOptions::default()).unwrap();
        assert!(sol.u.distance(&u0) < 1e-10, "{:e}", sol.u.distance(&u0));
    }

    #[test]
    fn even_data_have_no_defect() {
        let b = basis(12);
        let f = random_even_sphere2(&b, 2, 0.05);
        let out = moser2(&f, &NewtonOptions::default()).unwrap();
        assert!(Vector3::from(out.report.vector).norm() <= 1e-9);
        assert!(out.image_residual <= 1e-9);
        let odd = Sphere2Field::harmonic(&b, 1, 0).scale(0.01);
        assert!(matches!(moser2(&odd, &NewtonOptions::default()), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn defect_is_equivariant() {
        let b = basis(10);
        let f = random_sphere2(&b, 8, 0.02);
        let opts = NewtonOptions::default();
        assert!(defect_equivariance(&f, &Rotation3::identity(), &opts).unwrap() < 1e-14);
        let e = defect_equivariance(&f, &random_rotation(1), &opts).unwrap();
        assert!(e <= 1e-8, "{e:e}");
        let axial = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.7);
        let z = Sphere2Field::linear(&b, &Vector3::z()).scale(0.01);
        let zonal = q_increment2(&z).unwrap().truncate(10);
        assert!(defect_equivariance(&zonal, &axial, &opts).unwrap() <= 1e-10);
    }

    #[test]
    fn witness_matches_zonal_value() {
        let b = basis(8);
        let fit = defect_witness2(&Vector3::new(1.0, 1.0, 0.0), &b, &FINE_WITNESS_T, &NewtonOptions::default()).unwrap();
        assert!((fit.cubic - 1.6).abs() < 1e-3, "{fit:?}");
        assert!(fit.linear.abs() <= 1e-8);
    }
}
