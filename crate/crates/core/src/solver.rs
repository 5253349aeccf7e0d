//! Local inversion of the modified operator `u -> Q[u] + P1 u`, the defect
//! map `D = P1 S`, perturbation coefficients of `Q[tz]` and the
//! demonstrations built on them.
//!
//! Newton works in Galerkin form: unknowns and residuals live on degrees
//! `0..=L_max`, while the nonlinear evaluations run at full grid resolution.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::{first_harmonic_norm_sq, ZonalBasis, ZonalField};
use crate::error::{Error, Result};
use crate::kw::{kw_pairing, KillingField};
use crate::qops::{self, linearize_at, p1_project, q_increment, q_tilde};
use crate::spectra;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    /// Coefficient-space l2 residual, relative to `max(1, |f|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per iteration before giving up.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 30, max_halvings: 20 }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Self { tol, ..Self::default() })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    /// Coefficient of `z = cos(theta)` in `P1 S(f)`.
    pub defect: f64,
    pub newton_iters: usize,
    pub residual: f64,
    /// `|Q[S(f)] - (f - D(f))|` on degrees up to `L_max`.
    pub fredholm_residual: f64,
}

/// `Q[u] + P1 u`, full resolution.
pub fn modified_op(u: &ZonalField) -> Result<ZonalField> {
    Ok(q_increment(u)?.add(&p1_project(u)))
}

/// Converged Newton iterate with its diagnostics.
#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub u: ZonalField,
    pub iterations: usize,
    pub residual: f64,
}

fn galerkin_residual(u: &ZonalField, f: &ZonalField, lmax: usize) -> Result<DVector<f64>> {
    let r = modified_op(u)?;
    let v: Vec<f64> = (0..=lmax).map(|i| r.coeff(i) - f.coeff(i)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite residual".into()));
    }
    Ok(DVector::from_vec(v))
}

/// Sup-norm radius of the neighborhood of `0` in which the local inverse is
/// sought; Newton iterates leaving it are rejected.
pub const NEIGHBORHOOD_RADIUS: f64 = 1.0;

/// Extra Newton steps taken after the tolerance is met, kept only while
/// they reduce the residual.
const POLISH_STEPS: usize = 2;

/// Relative size of a full Newton step that, failing to lower the residual,
/// marks the evaluation roundoff floor. For `m >= 2` at large `L_max` that
/// floor sits above `tol`; the achieved residual is then reported as is.
const STALL_STEP: f64 = 1e-8;

/// Smallest continuation step before the branch is declared lost.
const MIN_STEP: f64 = 1.0 / 1024.0;

/// Largest corrector displacement, relative to the predictor step, that is
/// still taken to stay on the branch.
const MAX_CORRECTION: f64 = 0.5;

/// Newton iterations allowed when correcting a continuation step.
const CORRECTOR_ITERS: usize = 8;

/// `S(f)`: solves `Q[u] + P1 u = f` on degrees `0..=L_max` on the branch
/// through `u = 0`.
///
/// The branch is followed along `s f`, `s` from `0` to `1`, with a tangent
/// predictor and a full-step Newton corrector that must decrease the
/// residual at every iteration. Failed steps are halved, successful easy
/// ones doubled; for small `f` this is a single Newton solve from the
/// linearized solution. A fold or a step below `1/1024` is reported as
/// `NewtonDiverged`.
pub fn local_inverse(f: &ZonalField, opts: &NewtonOptions) -> Result<NewtonSolution> {
    let basis = Arc::clone(f.basis());
    let lmax = basis.lmax();
    let rhs = DVector::from_iterator(lmax + 1, (0..=lmax).map(|i| f.coeff(i)));
    let corrector = NewtonOptions { max_iter: CORRECTOR_ITERS, max_halvings: 0, ..*opts };
    let mut u = ZonalField::zeros(&basis);
    let (mut s, mut ds, mut total) = (0.0, 1.0, 0);
    let mut last = None;
    while s < 1.0 {
        let step = f64::min(ds, 1.0 - s);
        let diverged = |res| Error::NewtonDiverged { iterations: total, residual: res };
        let tangent = jacobian(&u, lmax)?.lu().solve(&rhs).ok_or_else(|| diverged(f64::NAN))?;
        let mut coeffs = u.coeffs().to_vec();
        for (c, t) in coeffs.iter_mut().zip(tangent.iter()) {
            *c += step * t;
        }
        let predictor = ZonalField::from_coeffs(&basis, coeffs);
        let target = if s + step >= 1.0 { f.clone() } else { f.scale(s + step) };
        let advance: f64 = tangent.amax() * step;
        let tracked = newton(&target, predictor.clone(), &corrector).and_then(|sol| {
            let moved = sol.u.coeffs().iter().zip(predictor.coeffs()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            if moved <= MAX_CORRECTION * advance {
                Ok(sol)
            } else {
                Err(Error::NewtonDiverged { iterations: sol.iterations, residual: sol.residual })
            }
        });
        match tracked {
            Ok(sol) => {
                total += sol.iterations;
                s += step;
                if sol.iterations <= CORRECTOR_ITERS / 2 {
                    ds = f64::min(2.0 * step, 1.0);
                }
                u = sol.u.clone();
                last = Some(sol);
            }
            Err(Error::NewtonDiverged { residual, .. }) => {
                ds = 0.5 * step;
                if ds < MIN_STEP {
                    return Err(diverged(residual));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let sol = last.expect("loop runs at least once");
    Ok(NewtonSolution { iterations: total, ..sol })
}

/// Galerkin Jacobian of the modified operator on degrees `0..=lmax`.
fn jacobian(u: &ZonalField, lmax: usize) -> Result<DMatrix<f64>> {
    let mut jac = linearize_at(u)?.matrix(lmax);
    jac[(1, 1)] += 1.0;
    Ok(jac)
}

fn newton(f: &ZonalField, start: ZonalField, opts: &NewtonOptions) -> Result<NewtonSolution> {
    let basis = Arc::clone(f.basis());
    let lmax = basis.lmax();
    let target = opts.tol * f.truncate(lmax).norm().max(1.0);

    let mut u = start;
    let mut r = galerkin_residual(&u, f, lmax)?;
    let mut res = r.norm();
    let mut iter = 0;
    let mut polish = 0;
    loop {
        if res <= target {
            if polish == POLISH_STEPS {
                break;
            }
            polish += 1;
        } else if iter >= opts.max_iter {
            return Err(Error::NewtonDiverged { iterations: iter, residual: res });
        }
        let Some(step) = jacobian(&u, lmax)?.lu().solve(&(-&r)) else {
            if res <= target {
                break;
            }
            return Err(Error::NewtonDiverged { iterations: iter, residual: res });
        };
        let scale = u.coeffs().iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let small = step.amax() <= STALL_STEP * scale;

        let mut alpha = 1.0;
        let mut accepted = None;
        let halvings = if res <= target || small { 0 } else { opts.max_halvings };
        for _ in 0..=halvings {
            let mut coeffs = u.coeffs().to_vec();
            for (c, s) in coeffs.iter_mut().zip(step.iter()) {
                *c += alpha * s;
            }
            let trial = ZonalField::from_coeffs(&basis, coeffs);
            if trial.sup_norm() <= NEIGHBORHOOD_RADIUS {
                if let Ok(rt) = galerkin_residual(&trial, f, lmax) {
                    if rt.norm() < res {
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
                res = rt.norm();
                r = rt;
                if polish == 0 {
                    iter += 1;
                }
            }
            None if res <= target || small => break,
            None => return Err(Error::NewtonDiverged { iterations: iter + 1, residual: res }),
        }
    }
    Ok(NewtonSolution { u, iterations: iter, residual: res })
}

/// z-component of a field's first-harmonic projection, for `z = cos(theta)`.
pub fn z_component(f: &ZonalField) -> f64 {
    f.coeff(1) / first_harmonic_norm_sq(f.basis()).sqrt()
}

/// `D(f) = P1 S(f)` with the residual of `Q[S(f)] = f - D(f)`.
pub fn defect(f: &ZonalField, opts: &NewtonOptions) -> Result<DefectReport> {
    Ok(defect_with_solution(f, opts)?.0)
}

pub fn defect_with_solution(
    f: &ZonalField,
    opts: &NewtonOptions,
) -> Result<(DefectReport, ZonalField)> {
    let sol = local_inverse(f, opts)?;
    let lmax = f.basis().lmax();
    let d = p1_project(&sol.u);
    let lhs = q_increment(&sol.u)?.truncate(lmax);
    let rhs = f.truncate(lmax).sub(&d);
    let report = DefectReport {
        defect: z_component(&sol.u),
        newton_iters: sol.iterations,
        residual: sol.residual,
        fredholm_residual: lhs.distance(&rhs),
    };
    Ok((report, sol.u))
}

#[derive(Debug, Clone)]
pub struct ExpansionCoeffs {
    pub c2: ZonalField,
    pub c3: ZonalField,
    /// `int z c3 dmu_0`.
    pub z_pairing: f64,
}

/// Richardson-extrapolated `t^2` and `t^3` coefficients of `F(t)` from
/// `F(+-h)`, `F(+-2h)`, assuming `F(0) = 0` and no linear term.
fn richardson(eval: impl Fn(f64) -> Result<ZonalField>, h: f64) -> Result<(ZonalField, ZonalField)> {
    let (p1, m1, p2, m2) = (eval(h)?, eval(-h)?, eval(2.0 * h)?, eval(-2.0 * h)?);
    let even = |p: &ZonalField, m: &ZonalField| p.add(m).scale(0.5);
    let odd = |p: &ZonalField, m: &ZonalField| p.sub(m).scale(0.5);
    let c2 = even(&p1, &m1).scale(16.0).sub(&even(&p2, &m2)).scale(1.0 / (12.0 * h * h));
    let c3 = odd(&p1, &m1).scale(32.0).sub(&odd(&p2, &m2)).scale(1.0 / (24.0 * h * h * h));
    Ok((c2, c3))
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-3..=5e-2).contains(&h) {
        return Err(Error::InvalidInput(format!("step h = {h} outside [1e-3, 5e-2]")));
    }
    Ok(())
}

/// Coefficients of `Q[tz]` in the critical case and of `Q~[tz]` otherwise.
pub fn expansion_coeffs(z: &ZonalField, h: f64) -> Result<ExpansionCoeffs> {
    check_step(h)?;
    let (c2, c3) = if z.basis().params().is_critical() {
        richardson(|t| q_increment(&z.scale(t)), h)?
    } else {
        richardson(|t| q_tilde(&z.scale(t)), h)?
    };
    let z_pairing = z.inner(&c3);
    Ok(ExpansionCoeffs { c2, c3, z_pairing })
}

/// Coefficients of `Q[tz]` in every case; these drive the curve
/// `u_t = S(Q[tz])`.
pub fn expansion_coeffs_q(z: &ZonalField, h: f64) -> Result<ExpansionCoeffs> {
    check_step(h)?;
    let (c2, c3) = richardson(|t| q_increment(&z.scale(t)), h)?;
    let z_pairing = z.inner(&c3);
    Ok(ExpansionCoeffs { c2, c3, z_pairing })
}

/// Closed forms `(c2, c3)`: `-2m^2 Q0 z^2`, `(8/3) m^3 Q0 z^3` in the
/// critical case, otherwise `-(1/2)(p-2)(p-1) p0(0) z^2` and
/// `(1/3)(p-2)(p-1) p p0(0) z^3` with `p = 2*`.
pub fn closed_form_coeffs(basis: &Arc<ZonalBasis>) -> Result<(ZonalField, ZonalField)> {
    let p = basis.params();
    let (k2, k3) = if p.is_critical() {
        let m = p.m() as f64;
        let q0 = spectra::to_f64(&spectra::q0(p));
        (-2.0 * m * m * q0, 8.0 / 3.0 * m * m * m * q0)
    } else {
        let s = spectra::to_f64(&spectra::two_star(p)?);
        let p00 = basis.p0_multipliers()[0];
        (-0.5 * (s - 2.0) * (s - 1.0) * p00, (s - 2.0) * (s - 1.0) * s * p00 / 3.0)
    };
    Ok((
        ZonalField::from_fn(basis, |x| k2 * x * x),
        ZonalField::from_fn(basis, |x| k3 * x * x * x),
    ))
}

/// Expansion coefficients of `u_t = S(Q[tz])` from the linear problems
/// `(L + P1) u_k = c_k`, `k = 2, 3`.
pub fn curve_coeffs(coeffs: &ExpansionCoeffs) -> Result<(ZonalField, ZonalField)> {
    let basis = coeffs.c2.basis();
    let lmax = basis.lmax();
    let l = qops::DiagonalOperator::linearization_at_zero(basis.params(), lmax + 1);
    let solve = |c: &ZonalField| {
        let out = (0..=lmax)
            .map(|i| {
                let d = l.multipliers()[i] + if i == 1 { 1.0 } else { 0.0 };
                c.coeff(i) / d
            })
            .collect();
        ZonalField::from_coeffs(basis, out)
    };
    Ok((solve(&coeffs.c2), solve(&coeffs.c3)))
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessFit {
    pub t_values: Vec<f64>,
    /// z-components of `D(Q[tz])`.
    pub samples: Vec<f64>,
    /// Least-squares coefficients of `a1 t + a2 t^2 + a3 t^3`.
    pub linear: f64,
    pub quadratic: f64,
    pub cubic: f64,
    pub max_fredholm_residual: f64,
}

pub const DEFAULT_WITNESS_T: [f64; 3] = [0.01, 0.02, 0.04];

/// Parameters small enough that the `t^5` term of the odd defect curve
/// stays below `1e-8` in the fitted linear coefficient; with
/// `DEFAULT_WITNESS_T` it leaks about `t1 t2 t3 (t1 + t2 + t3) ~ 6e-7` times
/// the quintic coefficient.
pub const FINE_WITNESS_T: [f64; 3] = [2.5e-4, 5e-4, 1e-3];

/// Fits the z-component of `D(Q[tz])` to a cubic in `t`.
pub fn defect_witness(z: &ZonalField, t_values: &[f64], opts: &NewtonOptions) -> Result<WitnessFit> {
    if t_values.len() < 3 {
        return Err(Error::InvalidInput("the cubic fit needs at least three t-values".into()));
    }
    let mut samples = Vec::with_capacity(t_values.len());
    let mut worst = 0.0f64;
    for &t in t_values {
        let f = q_increment(&z.scale(t))?;
        let report = defect(&f, opts)?;
        worst = worst.max(report.fredholm_residual);
        samples.push(report.defect);
    }
    let design = DMatrix::from_fn(t_values.len(), 3, |i, j| t_values[i].powi(j as i32 + 1));
    let rhs = DVector::from_column_slice(&samples);
    let fit = design
        .svd(true, true)
        .solve(&rhs, 1e-300)
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

/// Antipodal symmetry tolerance for the Moser-type demonstration.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MoserOutcome {
    pub report: DefectReport,
    pub u: ZonalField,
    /// `|Q[u] - f|` on degrees up to `L_max`.
    pub image_residual: f64,
}

/// Solves `Q[u] = f` for antipodally even `f`, where the defect vanishes.
pub fn moser_demo(f: &ZonalField, opts: &NewtonOptions) -> Result<MoserOutcome> {
    let odd_norm = f.odd_norm();
    if odd_norm > SYMMETRY_TOLERANCE {
        return Err(Error::SymmetryViolation { odd_norm });
    }
    let (report, u) = defect_with_solution(f, opts)?;
    let lmax = f.basis().lmax();
    let image_residual = q_increment(&u)?.truncate(lmax).distance(&f.truncate(lmax));
    Ok(MoserOutcome { report, u, image_residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub epsilon: f64,
    pub defect: f64,
    pub fredholm_residual: f64,
    /// `|Q[S(f)] - f|`, nonzero exactly when the defect is.
    pub image_gap: f64,
    /// `int (X . f) dmu_u` at the near-solution `u = S(f)`.
    pub kw_integral: f64,
}

/// Attempts `Q[u] = eps z`, which has no solution; the defect and the
/// Kazdan–Warner integral both measure the failure.
pub fn obstruction_demo(basis: &Arc<ZonalBasis>, epsilon: f64, opts: &NewtonOptions) -> Result<ObstructionReport> {
    let z = crate::basis::first_harmonic(basis);
    let f = z.scale(epsilon);
    let (report, u) = defect_with_solution(&f, opts)?;
    let lmax = basis.lmax();
    let image_gap = q_increment(&u)?.truncate(lmax).distance(&f);
    let kw_integral = kw_pairing(&u, &f, &KillingField::axial(basis))?;
    Ok(ObstructionReport {
        epsilon,
        defect: report.defect,
        fredholm_residual: report.fredholm_residual,
        image_gap,
        kw_integral,
    })
}
