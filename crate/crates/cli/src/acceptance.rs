//! The acceptance suite: one function per criterion, each returning its
//! measured values against the pinned thresholds of [`crate::tolerances`].

use std::f64::consts::PI;
use std::fmt::Display;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use qsphere::basis::{first_harmonic, first_harmonic_norm_sq};
use qsphere::kw::{derivative_check, group_law_error, kw_pairing, KillingField, PullbackFamily};
use qsphere::qops::{linearize_at, q_increment, self_adjointness_defect};
use qsphere::random::{random_even_zonal, random_zonal};
use qsphere::solver::{
    closed_form_coeffs, defect_with_solution, defect_witness, expansion_coeffs, expansion_coeffs_q,
    modified_op, moser_demo, z_component, NewtonOptions, FINE_WITNESS_T,
};
use qsphere::spectra::{self, admissible, check_identities, l_multiplier};
use qsphere::sphere2::{
    defect2, defect_equivariance, kw_pairing2, kw_scale2, moser2, q_increment2, random_even_sphere2,
    random_rotation, random_sphere2, self_adjointness_defect2, Sphere2Basis, Sphere2Field,
};
use qsphere::{SphereParams, ZonalBasis, ZonalField};

use crate::output::status;
use crate::tolerances as tol;

/// Number of criteria, the last being run-to-run determinism.
pub const CRITERIA: u8 = 11;

/// Inputs shared by every criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    /// Offset of every random seed.
    pub seed: u64,
    /// Newton tolerance.
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, tol: 1e-12 }
    }
}

impl SuiteConfig {
    fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.tol, ..NewtonOptions::default() }
    }

    /// Seed `k` of stream `stream`, shifted by the configured offset.
    fn seed(&self, stream: u64, k: u64) -> u64 {
        self.seed.wrapping_mul(1 << 32).wrapping_add(stream << 16).wrapping_add(k)
    }
}

/// One measured quantity and its verdict.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub label: String,
    pub measured: Option<f64>,
    /// `<=`, `>=`, `holds` or `info`; `info` rows never fail.
    pub relation: &'static str,
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn at_most(label: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::compare(label, measured, "<=", tolerance, measured <= tolerance)
    }

    pub fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::compare(label, measured, ">=", bound, measured >= bound)
    }

    fn compare(label: impl Into<String>, measured: f64, relation: &'static str, tolerance: f64, pass: bool) -> Self {
        Self {
            label: label.into(),
            measured: Some(measured),
            relation,
            tolerance: Some(tolerance),
            pass,
            error: None,
        }
    }

    pub fn holds(label: impl Into<String>, pass: bool) -> Self {
        Self { label: label.into(), measured: None, relation: "holds", tolerance: None, pass, error: None }
    }

    pub fn info(label: impl Into<String>, measured: f64) -> Self {
        Self {
            label: label.into(),
            measured: Some(measured),
            relation: "info",
            tolerance: None,
            pass: true,
            error: None,
        }
    }

    pub fn failed(label: impl Into<String>, error: impl Display) -> Self {
        Self {
            label: label.into(),
            measured: None,
            relation: "holds",
            tolerance: None,
            pass: false,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub status: &'static str,
    pub checks: Vec<Check>,
}

impl Criterion {
    pub fn new(id: u8, name: &'static str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { id, name, status: status(pass), checks }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `criterion  6 [name]: PASS`, followed by the failing checks if any.
    pub fn summary(&self) -> String {
        let mut line = format!("criterion {:>2} [{}]: {}", self.id, self.name, self.status);
        for c in self.checks.iter().filter(|c| !c.pass) {
            line.push_str(&format!("\n    FAIL {}", c.label));
            if let Some(m) = c.measured {
                line.push_str(&format!(": {m:e}"));
            }
            if let Some(t) = c.tolerance {
                line.push_str(&format!(" {} {t:e}", c.relation));
            }
            if let Some(e) = &c.error {
                line.push_str(&format!(": {e}"));
            }
        }
        line
    }
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "exact spectral identities",
        2 => "kernel of the linearization",
        3 => "self-adjointness of dQ[u]",
        4 => "closed forms of c2 and c3",
        5 => "third-order witness pairing",
        6 => "Fredholm reduction and defect witness",
        7 => "Kazdan-Warner identity",
        8 => "even data have no defect",
        9 => "conformal pullback family",
        10 => "rotational equivariance of the defect",
        11 => "determinism",
        _ => "unknown",
    }
}

/// Runs criterion `id` in `1..=10`; criterion 11 compares whole reports and
/// lives with the `report` command.
pub fn run(id: u8, cfg: &SuiteConfig) -> Criterion {
    let checks = match id {
        1 => spectra_exactness(),
        2 => kernel(),
        3 => self_adjointness(cfg),
        4 => closed_forms(),
        5 => witness_pairing(),
        6 => fredholm(cfg),
        7 => kazdan_warner(cfg),
        8 => moser(cfg),
        9 => pullback(),
        10 => equivariance(cfg),
        _ => vec![Check::failed("criterion id", format!("no criterion {id} in 1..=10"))],
    };
    Criterion::new(id, name(id), checks)
}

/// Criteria `1..=10`, evaluated concurrently and returned in order.
pub fn run_numbered(cfg: &SuiteConfig) -> Vec<Criterion> {
    (1..CRITERIA).into_par_iter().map(|id| run(id, cfg)).collect()
}

fn zonal_basis(m: u32, n: u32) -> qsphere::Result<Arc<ZonalBasis>> {
    ZonalBasis::new(SphereParams::new(m, n)?, tol::ZONAL_LMAX, tol::ZONAL_OVERSAMPLE)
}

fn sphere2_basis() -> qsphere::Result<Arc<Sphere2Basis>> {
    Sphere2Basis::new(tol::SPHERE2_LMAX, tol::SPHERE2_OVERSAMPLE)
}

fn tag(m: u32, n: u32) -> String {
    format!("({m},{n})")
}

/// Evaluates `body` for every pair concurrently, reporting errors as
/// failed checks, and concatenates the results in pair order.
fn per_pair(
    pairs: &[(u32, u32)],
    body: impl Fn(u32, u32) -> qsphere::Result<Vec<Check>> + Sync,
) -> Vec<Check> {
    pairs
        .par_iter()
        .map(|&(m, n)| body(m, n).unwrap_or_else(|e| vec![Check::failed(tag(m, n), e)]))
        .collect::<Vec<_>>()
        .concat()
}

fn guarded(label: &str, body: impl FnOnce() -> qsphere::Result<Vec<Check>>) -> Vec<Check> {
    body().unwrap_or_else(|e| vec![Check::failed(label, e)])
}

/// Largest of `f(k)` over `k in 0..count`, evaluated concurrently; the
/// first error in seed order wins.
fn par_max(count: u64, f: impl Fn(u64) -> qsphere::Result<f64> + Sync + Send) -> qsphere::Result<f64> {
    let values: Vec<qsphere::Result<f64>> = (0..count).into_par_iter().map(f).collect();
    let mut worst = 0.0f64;
    for v in values {
        worst = worst.max(v?);
    }
    Ok(worst)
}

fn spectra_exactness() -> Vec<Check> {
    let start = Instant::now();
    let pairs: Vec<SphereParams> = (1..=tol::SPECTRA_MAX_M)
        .flat_map(|m| (2..=tol::SPECTRA_MAX_N).map(move |n| (m, n)))
        .filter(|&(m, n)| admissible(m, n))
        .map(|(m, n)| SphereParams::new(m, n).expect("admissible"))
        .collect();
    let results: Vec<_> = pairs.iter().map(|p| check_identities(p, tol::SPECTRA_IMAX)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let all = |f: fn(&spectra::IdentityCheck) -> bool| results.iter().all(f);
    vec![
        Check::info("admissible pairs with m <= 5, n <= 12", pairs.len() as f64),
        Check::holds("product formula equals polynomial evaluation", all(|c| c.product_matches_polynomial)),
        Check::holds("ratio recursion", all(|c| c.ratio_recursion)),
        Check::holds("strictly increasing |p0|", all(|c| c.strictly_increasing_modulus)),
        Check::holds("first eigenvalue balance", all(|c| c.first_eigen_balance)),
        Check::holds("closed product formula", all(|c| c.closed_product_formula)),
        Check::holds("l-multiplier vanishes exactly at i = 1", all(|c| c.kernel_is_first_harmonics)),
        Check::holds("runtime under 1 s", elapsed < tol::SPECTRA_RUNTIME_SECONDS),
    ]
}

fn kernel() -> Vec<Check> {
    per_pair(&tol::PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let p = *b.params();
        let z = first_harmonic(&b);
        let lz = linearize_at(&ZonalField::zeros(&b))?.apply(&z);
        let nonzero = (0..=b.lmax() as u64)
            .filter(|&i| i != 1)
            .all(|i| spectra::format_rational(&l_multiplier(i, &p)) != "0");
        Ok(vec![
            Check::at_most(format!("|L z| / |z| {}", tag(m, n)), lz.norm() / z.norm(), tol::KERNEL),
            Check::holds(format!("l_multiplier(i) != 0 for i != 1, i <= L_max {}", tag(m, n)), nonzero),
        ])
    })
}

fn self_adjointness(cfg: &SuiteConfig) -> Vec<Check> {
    let seeds = tol::SELF_ADJOINT_SEEDS;
    let amp = tol::SELF_ADJOINT_AMPLITUDE;
    let mut checks = per_pair(&tol::PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let worst = par_max(seeds, |k| {
            let u = random_zonal(&b, cfg.seed(1, 3 * k), amp);
            let v = random_zonal(&b, cfg.seed(1, 3 * k + 1), 1.0);
            let w = random_zonal(&b, cfg.seed(1, 3 * k + 2), 1.0);
            self_adjointness_defect(&u, &v, &w)
        })?;
        Ok(vec![Check::at_most(format!("max relative asymmetry {}", tag(m, n)), worst, tol::SELF_ADJOINT)])
    });
    checks.extend(guarded("full S2", || {
        let b = sphere2_basis()?;
        let worst = par_max(seeds, |k| {
            let u = random_sphere2(&b, cfg.seed(2, 3 * k), amp);
            let v = random_sphere2(&b, cfg.seed(2, 3 * k + 1), 1.0);
            let w = random_sphere2(&b, cfg.seed(2, 3 * k + 2), 1.0);
            self_adjointness_defect2(&u, &v, &w)
        })?;
        Ok(vec![Check::at_most("max relative asymmetry full S2", worst, tol::SELF_ADJOINT)])
    }));
    checks
}

fn relative_distance(a: &ZonalField, b: &ZonalField) -> f64 {
    a.distance(b) / b.norm()
}

fn closed_forms() -> Vec<Check> {
    let pairs: Vec<_> = tol::CRITICAL_PAIRS.iter().chain(&tol::SUBCRITICAL_PAIRS).copied().collect();
    per_pair(&pairs, |m, n| {
        let b = zonal_basis(m, n)?;
        let ec = expansion_coeffs(&first_harmonic(&b), tol::EXPANSION_STEP)?;
        let (c2, c3) = closed_form_coeffs(&b)?;
        Ok(vec![
            Check::at_most(format!("c2 relative L2 error {}", tag(m, n)), relative_distance(&ec.c2, &c2), tol::CLOSED_FORM),
            Check::at_most(format!("c3 relative L2 error {}", tag(m, n)), relative_distance(&ec.c3, &c3), tol::CLOSED_FORM),
        ])
    })
}

fn witness_pairing() -> Vec<Check> {
    per_pair(&tol::PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let z = first_harmonic(&b);
        let ec = expansion_coeffs(&z, tol::EXPANSION_STEP)?;
        let expected = z.inner(&closed_form_coeffs(&b)?.1);
        let mut checks = vec![
            Check::info(format!("z_pairing {}", tag(m, n)), ec.z_pairing),
            Check::holds(
                format!("z_pairing nonzero with the closed-form sign {}", tag(m, n)),
                ec.z_pairing != 0.0 && ec.z_pairing.signum() == expected.signum(),
            ),
        ];
        if (m, n) == (1, 2) {
            checks.push(Check::at_most(
                "|z_pairing - 32 pi / 15| (1,2)",
                (ec.z_pairing - 32.0 * PI / 15.0).abs(),
                tol::Z_PAIRING_S2,
            ));
        }
        Ok(checks)
    })
}

struct Recovery {
    /// `sup |S(f) - u|` when the solve converged.
    error: Option<f64>,
    /// Fredholm residual over `max(1, |f|)`.
    fredholm: Option<f64>,
}

fn fredholm(cfg: &SuiteConfig) -> Vec<Check> {
    let opts = cfg.newton();
    let bound = tol::FREDHOLM_FACTOR * cfg.tol;
    per_pair(&tol::FREDHOLM_PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let t = tag(m, n);
        let seeds = tol::LOCAL_INVERSE_SEEDS;
        let runs: Vec<qsphere::Result<Recovery>> = (0..seeds)
            .into_par_iter()
            .map(|k| {
                let u = random_zonal(&b, cfg.seed(3, k), tol::LOCAL_INVERSE_AMPLITUDE);
                let f = modified_op(&u)?;
                Ok(match defect_with_solution(&f, &opts) {
                    Ok((report, s)) => Recovery {
                        error: Some(s.max_abs_diff(&u)),
                        fredholm: Some(report.fredholm_residual / f.norm().max(1.0)),
                    },
                    Err(qsphere::Error::NewtonDiverged { .. }) => Recovery { error: None, fredholm: None },
                    Err(e) => return Err(e),
                })
            })
            .collect();
        let runs = runs.into_iter().collect::<qsphere::Result<Vec<_>>>()?;
        let recovered = runs.iter().filter(|r| r.error.is_some_and(|e| e <= tol::LOCAL_INVERSE)).count();
        let converged = runs.iter().filter(|r| r.error.is_some()).count();
        let worst_error = runs.iter().filter_map(|r| r.error).fold(0.0, f64::max);
        let mut worst_fredholm = runs.iter().filter_map(|r| r.fredholm).fold(0.0, f64::max);

        let z = first_harmonic(&b);
        let fit = defect_witness(&z, &FINE_WITNESS_T, &opts)?;
        worst_fredholm = worst_fredholm.max(fit.max_fredholm_residual);
        let ec = expansion_coeffs_q(&z, tol::EXPANSION_STEP)?;
        let expected = z_component(&ec.c3);
        Ok(vec![
            Check::at_least(
                format!("seeds with |S(modified_op(u)) - u| <= 1e-10, of {seeds} {t}"),
                recovered as f64,
                seeds as f64,
            ),
            Check::info(format!("converged solves {t}"), converged as f64),
            Check::info(format!("max |S(modified_op(u)) - u| over converged solves {t}"), worst_error),
            Check::at_most(format!("max Fredholm residual / max(1, |f|) {t}"), worst_fredholm, bound),
            Check::info(format!("witness cubic {t}"), fit.cubic),
            Check::info(format!("z-component of P1 c3 {t}"), expected),
            Check::at_most(
                format!("witness cubic relative error {t}"),
                ((fit.cubic - expected) / expected).abs(),
                tol::WITNESS_CUBIC,
            ),
            Check::at_most(format!("|witness linear coefficient| {t}"), fit.linear.abs(), tol::WITNESS_LINEAR),
        ])
    })
}

const AXES: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn kazdan_warner(cfg: &SuiteConfig) -> Vec<Check> {
    let mut checks = per_pair(&tol::PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let x = KillingField::axial(&b);
        let worst = par_max(tol::KW_ZONAL_SEEDS, |k| {
            let u = random_zonal(&b, cfg.seed(4, k), tol::KW_AMPLITUDE);
            let q = q_increment(&u)?;
            Ok(kw_pairing(&u, &q, &x)?.abs() / qsphere::kw::kw_scale(&q, &x))
        })?;
        let z = first_harmonic(&b);
        let control = kw_pairing(&ZonalField::zeros(&b), &z, &x)?;
        let expected = n as f64 * first_harmonic_norm_sq(&b);
        Ok(vec![
            Check::at_most(format!("max scale-relative |kw| {}", tag(m, n)), worst, tol::KW),
            Check::info(format!("off-graph control {}", tag(m, n)), control),
            Check::at_most(
                format!("|control - lambda_1 int z^2| {}", tag(m, n)),
                (control - expected).abs(),
                tol::KW_CONTROL,
            ),
        ])
    });
    checks.extend(guarded("full S2", || {
        let b = sphere2_basis()?;
        let count = tol::KW_SPHERE2_SEEDS * AXES.len() as u64;
        let worst = par_max(count, |k| {
            let d = Vector3::from(AXES[(k % 3) as usize]);
            let u = random_sphere2(&b, cfg.seed(5, k / 3), tol::KW_SPHERE2_AMPLITUDE);
            let q = q_increment2(&u)?;
            Ok(kw_pairing2(&u, &q, &d)?.abs() / kw_scale2(&q))
        })?;
        let mut out = vec![Check::at_most("max scale-relative |kw| full S2", worst, tol::KW)];
        for (axis, d) in ["x", "y", "z"].iter().zip(AXES) {
            let d = Vector3::from(d);
            let control = kw_pairing2(&Sphere2Field::zeros(&b), &Sphere2Field::linear(&b, &d), &d)?;
            out.push(Check::at_most(
                format!("|control - 8 pi / 3| full S2, direction {axis}"),
                (control - 8.0 * PI / 3.0).abs(),
                tol::KW_CONTROL,
            ));
        }
        Ok(out)
    }));
    checks
}

fn moser(cfg: &SuiteConfig) -> Vec<Check> {
    let opts = cfg.newton();
    let mut checks = per_pair(&tol::PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let outcomes: Vec<qsphere::Result<(f64, f64)>> = (0..tol::MOSER_SEEDS)
            .into_par_iter()
            .map(|k| {
                let f = random_even_zonal(&b, cfg.seed(6, k), tol::MOSER_AMPLITUDE);
                let out = moser_demo(&f, &opts)?;
                Ok((out.report.defect.abs(), out.image_residual))
            })
            .collect();
        let (mut d, mut r) = (0.0f64, 0.0f64);
        for o in outcomes {
            let (dk, rk) = o?;
            d = d.max(dk);
            r = r.max(rk);
        }
        Ok(vec![
            Check::at_most(format!("max |D(f)| {}", tag(m, n)), d, tol::MOSER),
            Check::at_most(format!("max |Q[S(f)] - f| {}", tag(m, n)), r, tol::MOSER),
        ])
    });
    checks.extend(guarded("full S2", || {
        let b = sphere2_basis()?;
        let outcomes: Vec<qsphere::Result<(f64, f64)>> = (0..tol::MOSER_SEEDS)
            .into_par_iter()
            .map(|k| {
                let f = random_even_sphere2(&b, cfg.seed(7, k), tol::MOSER_AMPLITUDE);
                let out = moser2(&f, &opts)?;
                Ok((Vector3::from(out.report.vector).norm(), out.image_residual))
            })
            .collect();
        let (mut d, mut r) = (0.0f64, 0.0f64);
        for o in outcomes {
            let (dk, rk) = o?;
            d = d.max(dk);
            r = r.max(rk);
        }
        Ok(vec![
            Check::at_most("max |D(f)| full S2", d, tol::MOSER),
            Check::at_most("max |Q[S(f)] - f| full S2", r, tol::MOSER),
        ])
    }));
    checks
}

fn pullback() -> Vec<Check> {
    per_pair(&tol::PAIRS, |m, n| {
        let b = zonal_basis(m, n)?;
        let t = tag(m, n);
        let level = spectra::to_f64(&spectra::q0(b.params())).abs() * b.volume().sqrt();
        let mut checks = Vec::new();
        for s in tol::PULLBACK_T {
            let fam = PullbackFamily::new(&b, s);
            let q = q_increment(&fam.u_t())?.norm();
            checks.push(Check::at_most(format!("|Q[u_t]| at t = {s} {t}"), q, tol::PULLBACK_FLAT));
            checks.push(Check::info(format!("|Q[u_t]| / (|Q0| Vol^1/2) at t = {s} {t}"), q / level));
            checks.push(Check::at_most(
                format!("conformal factor agreement at t = {s} {t}"),
                fam.conformality_error(),
                tol::CONFORMALITY,
            ));
        }
        let d = derivative_check(&b, tol::DERIVATIVE_STEP, tol::DERIVATIVE_LEVELS);
        let order_gap = d.orders.iter().fold(0.0f64, |a, o| a.max((o - 2.0).abs()));
        checks.push(Check::at_most(format!("max |observed order - 2| {t}"), order_gap, tol::DERIVATIVE_ORDER));
        let group = tol::GROUP_LAW_PAIRS.iter().fold(0.0f64, |a, &(x, y)| a.max(group_law_error(&b, x, y)));
        checks.push(Check::at_most(format!("max group-law error {t}"), group, tol::GROUP_LAW));
        Ok(checks)
    })
}

fn equivariance(cfg: &SuiteConfig) -> Vec<Check> {
    let opts = cfg.newton();
    guarded("full S2", || {
        let b = sphere2_basis()?;
        let f = random_sphere2(&b, cfg.seed(8, 0), tol::EQUIVARIANCE_AMPLITUDE);
        let size = Vector3::from(defect2(&f, &opts)?.vector).norm();
        let worst = par_max(tol::EQUIVARIANCE_ROTATIONS, |k| {
            defect_equivariance(&f, &random_rotation(cfg.seed(9, k)), &opts)
        })?;
        Ok(vec![
            Check::info("|D(f)|", size),
            Check::at_most(
                format!("max |D(f o R) - R^T D(f)| over {} rotations", tol::EQUIVARIANCE_ROTATIONS),
                worst,
                tol::EQUIVARIANCE,
            ),
        ])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_verdicts() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass);
        assert!(!Check::at_least("a", 19.0, 20.0).pass);
        assert!(Check::info("a", f64::MAX).pass);
        let c = Criterion::new(3, name(3), vec![Check::holds("x", true), Check::failed("y", "boom")]);
        assert_eq!(c.status, "FAIL");
        assert!(c.summary().contains("FAIL y: boom"));
    }

    #[test]
    fn seeds_are_distinct_across_streams() {
        let cfg = SuiteConfig { seed: 7, tol: 1e-12 };
        assert_ne!(cfg.seed(1, 0), cfg.seed(2, 0));
        assert_ne!(cfg.seed(1, 0), SuiteConfig::default().seed(1, 0));
    }
}
