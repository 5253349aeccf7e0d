//! One function per subcommand, each producing a [`Report`].

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use qsphere::basis::{first_harmonic, first_harmonic_norm_sq, FieldFile};
use qsphere::kw::{derivative_check_at, group_law_error, kw_pairing, kw_scale, KillingField, PullbackFamily};
use qsphere::qops::q_increment;
use qsphere::random::{random_even_zonal, random_zonal};
use qsphere::solver::{
    closed_form_coeffs, defect, defect_witness, expansion_coeffs, expansion_coeffs_q, moser_demo,
    obstruction_demo, z_component, DefectReport,
};
use qsphere::spectra::{
    check_identities, eigenvalue, format_rational, l_multiplier, p0_eval, p0_ratio, q0, two_star, SphereParams,
};
use qsphere::ZonalField;

use crate::acceptance::{self, Check, Criterion, SuiteConfig, CRITERIA};
use crate::args::DefectData;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{num, status, Report, Table};
use crate::tolerances as tol;

fn pair_json(cfg: &RunConfig) -> Value {
    json!({
        "m": cfg.params.m(),
        "n": cfg.params.n(),
        "lmax": cfg.lmax,
        "oversample": cfg.oversample,
        "tol": cfg.tol,
        "seed": cfg.seed,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(x), Value::Object(y)) = (&mut a, b) {
        x.extend(y);
    }
    a
}

/// `λ_i`, `p0(λ_i)`, ratios and l-multipliers for `i <= imax`, with the
/// identity verdicts.
pub fn spectra(m: u32, n: u32, imax: u64) -> Result<Report> {
    let p = SphereParams::new(m, n)?;
    let mut table = Table::new(&["i", "lambda", "p0", "ratio", "l_multiplier"]);
    let mut rows = Vec::new();
    for i in 0..=imax {
        let lambda = eigenvalue(i, n as u64);
        let p0 = format_rational(&p0_eval(i, &p));
        let ratio = p0_ratio(i, &p).ok().map(|r| format_rational(&r));
        let lm = format_rational(&l_multiplier(i, &p));
        table.push(vec![
            i.to_string(),
            lambda.to_string(),
            p0.clone(),
            ratio.clone().unwrap_or_default(),
            lm.clone(),
        ]);
        rows.push(json!({"i": i, "lambda": lambda, "p0": p0, "ratio": ratio, "l_multiplier": lm}));
    }
    let ids = check_identities(&p, imax);
    let body = json!({
        "m": m,
        "n": n,
        "imax": imax,
        "critical": p.is_critical(),
        "q0": format_rational(&q0(&p)),
        "two_star": two_star(&p).ok().map(|s| format_rational(&s)),
        "rows": rows,
        "identities": {
            "product_matches_polynomial": status(ids.product_matches_polynomial),
            "ratio_recursion": status(ids.ratio_recursion),
            "strictly_increasing_modulus": status(ids.strictly_increasing_modulus),
            "first_eigen_balance": status(ids.first_eigen_balance),
            "closed_product_formula": status(ids.closed_product_formula),
            "kernel_is_first_harmonics": status(ids.kernel_is_first_harmonics),
        },
    });
    Ok(Report::new("spectra", ids.all(), body, table))
}

/// Richardson coefficients of `Q[tz]` (critical) or `Q~[tz]` against the
/// closed forms.
pub fn expand(cfg: &RunConfig, h: f64) -> Result<Report> {
    let b = cfg.basis()?;
    let z = first_harmonic(&b);
    let ec = expansion_coeffs(&z, h)?;
    let (k2, k3) = closed_form_coeffs(&b)?;
    let rel = |a: &ZonalField, b: &ZonalField| a.distance(b) / b.norm();
    let error = rel(&ec.c2, &k2).max(rel(&ec.c3, &k3));
    let monomial = |c: &ZonalField, k: i32| {
        let zk = ZonalField::from_fn(&b, |x| x.powi(k));
        c.inner(&zk) / zk.inner(&zk)
    };
    let lmax = cfg.lmax;
    let c2: Vec<f64> = (0..=lmax).map(|i| ec.c2.coeff(i)).collect();
    let c3: Vec<f64> = (0..=lmax).map(|i| ec.c3.coeff(i)).collect();
    let mut table = Table::new(&["degree", "c2", "c3"]);
    for i in 0..=lmax {
        table.push(vec![i.to_string(), num(c2[i]), num(c3[i])]);
    }
    let body = merge(
        pair_json(cfg),
        json!({
            "h": h,
            "form": if cfg.params.is_critical() { "Q" } else { "Q~" },
            "c2_coeffs": c2,
            "c3_coeffs": c3,
            "c2_z2_coefficient": monomial(&ec.c2, 2),
            "c3_z3_coefficient": monomial(&ec.c3, 3),
            "z_pairing": ec.z_pairing,
            "closed_form_error": error,
            "closed_form_tolerance": tol::CLOSED_FORM,
        }),
    );
    Ok(Report::new("expand", error <= tol::CLOSED_FORM, body, table))
}

/// Kazdan-Warner integrals of `seeds` random fields and the off-graph control.
pub fn kw(cfg: &RunConfig, amplitude: f64, seeds: u64) -> Result<Report> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(CliError::Usage(format!("--amplitude must be finite and non-negative, got {amplitude}")));
    }
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let b = cfg.basis()?;
    let x = KillingField::axial(&b);
    let runs: Vec<qsphere::Result<(f64, f64)>> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let u = random_zonal(&b, cfg.seed.wrapping_add(k), amplitude);
            let q = q_increment(&u)?;
            Ok((kw_pairing(&u, &q, &x)?, kw_scale(&q, &x)))
        })
        .collect();
    let mut table = Table::new(&["seed", "kw_integral", "scale", "relative"]);
    let mut samples = Vec::new();
    let mut worst = 0.0f64;
    for (k, run) in runs.into_iter().enumerate() {
        let (value, scale) = run?;
        let relative = if scale > 0.0 { value.abs() / scale } else { value.abs() };
        worst = worst.max(relative);
        let seed = cfg.seed.wrapping_add(k as u64);
        table.push(vec![seed.to_string(), num(value), num(scale), num(relative)]);
        samples.push(json!({"seed": seed, "kw_integral": value, "scale": scale, "relative": relative}));
    }
    let control = kw_pairing(&ZonalField::zeros(&b), &first_harmonic(&b), &x)?;
    let expected = cfg.params.n() as f64 * first_harmonic_norm_sq(&b);
    let control_error = (control - expected).abs();
    let pass = worst <= tol::KW && control_error <= tol::KW_CONTROL;
    let body = merge(
        pair_json(cfg),
        json!({
            "amplitude": amplitude,
            "seeds": seeds,
            "max_relative_kw": worst,
            "kw_tolerance": tol::KW,
            "samples": samples,
            "control": control,
            "control_expected": expected,
            "control_error": control_error,
        }),
    );
    Ok(Report::new("kw", pass, body, table))
}

const DEFECT_COLUMNS: [&str; 5] = ["t", "defect", "newton_iters", "residual", "fredholm_residual"];

fn defect_row(t: Option<f64>, r: &DefectReport) -> Vec<String> {
    vec![
        t.map(num).unwrap_or_default(),
        num(r.defect),
        r.newton_iters.to_string(),
        num(r.residual),
        num(r.fredholm_residual),
    ]
}

fn fredholm_bound(cfg: &RunConfig, f: &ZonalField) -> f64 {
    tol::FREDHOLM_FACTOR * cfg.tol * f.norm().max(1.0)
}

fn read_field(cfg: &RunConfig, path: &Path) -> Result<ZonalField> {
    let file: FieldFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.params != cfg.params {
        return Err(CliError::Usage(format!(
            "field file is for (m, n) = ({}, {}), not ({}, {})",
            file.params.m(),
            file.params.n(),
            cfg.params.m(),
            cfg.params.n()
        )));
    }
    Ok(ZonalField::from_file(&cfg.basis()?, file)?)
}

/// `D(f)` for file data, `Q[tz]` (one value or a cubic sweep), symmetric
/// data, or the obstruction `eps z`.
pub fn defect_cmd(cfg: &RunConfig, data: &DefectData) -> Result<Report> {
    let opts = cfg.newton();
    let b = cfg.basis()?;
    let z = first_harmonic(&b);
    let mut table = Table::new(&DEFECT_COLUMNS);
    let single = |source: &str, f: &ZonalField, t: Option<f64>, table: &mut Table| -> Result<(bool, Value)> {
        let report = defect(f, &opts)?;
        let bound = fredholm_bound(cfg, f);
        table.push(defect_row(t, &report));
        let body = json!({"source": source, "t": t, "report": report, "fredholm_bound": bound});
        Ok((report.fredholm_residual <= bound, body))
    };

    let (pass, body) = if let Some(path) = &data.file {
        let f = read_field(cfg, path)?;
        single("file", &f, None, &mut table)?
    } else if let Some(ts) = &data.tz {
        match ts.len() {
            1 => single("tz", &q_increment(&z.scale(ts[0]))?, Some(ts[0]), &mut table)?,
            2 => return Err(CliError::Usage("--tz takes one value or at least three".into())),
            _ => {
                let fit = defect_witness(&z, ts, &opts)?;
                let expected = z_component(&expansion_coeffs_q(&z, tol::EXPANSION_STEP)?.c3);
                let cubic_error = ((fit.cubic - expected) / expected).abs();
                for (t, d) in fit.t_values.iter().zip(&fit.samples) {
                    table.push(vec![num(*t), num(*d), String::new(), String::new(), String::new()]);
                }
                let bound = tol::FREDHOLM_FACTOR * cfg.tol;
                let pass = fit.max_fredholm_residual <= bound && cubic_error <= tol::WITNESS_CUBIC;
                let body = json!({
                    "source": "tz-sweep",
                    "fit": fit,
                    "expected_cubic": expected,
                    "cubic_relative_error": cubic_error,
                    "cubic_tolerance": tol::WITNESS_CUBIC,
                    "fredholm_bound": bound,
                });
                (pass, body)
            }
        }
    } else if data.moser {
        let f = random_even_zonal(&b, cfg.seed, tol::MOSER_AMPLITUDE);
        let out = moser_demo(&f, &opts)?;
        table.push(defect_row(None, &out.report));
        let pass = out.report.defect.abs() <= tol::MOSER && out.image_residual <= tol::MOSER;
        let body = json!({
            "source": "moser",
            "amplitude": tol::MOSER_AMPLITUDE,
            "report": out.report,
            "image_residual": out.image_residual,
            "tolerance": tol::MOSER,
        });
        (pass, body)
    } else if let Some(eps) = data.obstruction {
        let out = obstruction_demo(&b, eps, &opts)?;
        let bound = fredholm_bound(cfg, &z.scale(eps));
        table.push(vec![
            String::new(),
            num(out.defect),
            String::new(),
            String::new(),
            num(out.fredholm_residual),
        ]);
        let body = json!({"source": "obstruction", "report": out, "fredholm_bound": bound});
        (out.fredholm_residual <= bound, body)
    } else {
        return Err(CliError::Usage("one of --f, --tz, --moser, --obstruction is required".into()));
    };
    Ok(Report::new("defect", pass, merge(pair_json(cfg), body), table))
}

/// Flatness, derivative and group law of the pullback family at `t`.
pub fn pullback(cfg: &RunConfig, t: f64) -> Result<Report> {
    if !(t.abs() <= 1.0) {
        return Err(CliError::Usage(format!("--t must satisfy |t| <= 1, got {t}")));
    }
    let b = cfg.basis()?;
    let fam = PullbackFamily::new(&b, t);
    let q_residual = q_increment(&fam.u_t())?.norm();
    let d = derivative_check_at(&b, t, tol::DERIVATIVE_STEP, tol::DERIVATIVE_LEVELS);
    let derivative_error = *d.errors.last().expect("at least one level");
    let order_gap = d.orders.iter().fold(0.0f64, |a, o| a.max((o - 2.0).abs()));
    let group = tol::PULLBACK_T.iter().fold(0.0f64, |a, &s| a.max(group_law_error(&b, t, s)));
    let conformality = fam.conformality_error();
    let pass = q_residual <= tol::PULLBACK_FLAT
        && order_gap <= tol::DERIVATIVE_ORDER
        && group <= tol::GROUP_LAW
        && conformality <= tol::CONFORMALITY;
    let mut table = Table::new(&["t", "q_residual", "derivative_error", "group_law_error", "conformality_error"]);
    table.push(vec![num(t), num(q_residual), num(derivative_error), num(group), num(conformality)]);
    let body = merge(
        pair_json(cfg),
        json!({
            "t": t,
            "q_residual": q_residual,
            "derivative_error": derivative_error,
            "derivative": d,
            "group_law_error": group,
            "conformality_error": conformality,
        }),
    );
    Ok(Report::new("pullback", pass, body, table))
}

/// The acceptance suite: criteria 1-10 concurrently, then criterion 11 by
/// rerunning them one at a time and comparing the serialized results.
pub fn report(cfg: &SuiteConfig) -> Result<Report> {
    let mut criteria = acceptance::run_numbered(cfg);
    let first = serde_json::to_vec(&criteria)?;
    let again: Vec<Criterion> = (1..CRITERIA).map(|id| acceptance::run(id, cfg)).collect();
    let identical = first == serde_json::to_vec(&again)?;
    criteria.push(Criterion::new(
        CRITERIA,
        acceptance::name(CRITERIA),
        vec![Check::holds("concurrent and sequential runs serialize identically", identical)],
    ));

    let mut table = Table::new(&["id", "criterion", "status", "check", "measured", "relation", "tolerance", "pass"]);
    for c in &criteria {
        for check in &c.checks {
            table.push(vec![
                c.id.to_string(),
                c.name.to_string(),
                c.status.to_string(),
                check.label.clone(),
                check.measured.map(num).unwrap_or_default(),
                check.relation.to_string(),
                check.tolerance.map(num).unwrap_or_default(),
                status(check.pass).to_string(),
            ]);
        }
    }
    let passed = criteria.iter().filter(|c| c.pass()).count();
    let pass = passed == criteria.len();
    let body = json!({
        "seed": cfg.seed,
        "tol": cfg.tol,
        "resolution": {
            "zonal_lmax": tol::ZONAL_LMAX,
            "zonal_oversample": tol::ZONAL_OVERSAMPLE,
            "sphere2_lmax": tol::SPHERE2_LMAX,
            "sphere2_oversample": tol::SPHERE2_OVERSAMPLE,
        },
        "passed": passed,
        "total": criteria.len(),
        "criteria": criteria,
    });
    Ok(Report::new("report", pass, body, table))
}
