//! Gauss quadrature for the symmetric Jacobi weight `(1 - x^2)^(lambda - 1/2)`
//! on `[-1, 1]` (Gauss–Gegenbauer; `lambda = 1/2` is Gauss–Legendre).
//!
//! Nodes come from the Golub–Welsch eigenproblem and are then polished by
//! Newton steps on the three-term recurrence. Weights use the Christoffel
//! formula `w_j = mass / sum_k p_k(x_j)^2`, which stays accurate where the
//! eigenvector route loses digits near the endpoints. The polish and the
//! weights run in double-double arithmetic so that spectral transforms
//! built on the rule are accurate below f64 roundoff.

use nalgebra::DMatrix;
use twofloat::TwoFloat;

/// Squared off-diagonal Jacobi-matrix entries `beta_k`, `k = 1..len`, of the
/// monic recurrence `p_{k+1} = x p_k - beta_k p_{k-1}` for Gegenbauer index
/// `lambda > -1/2`.
pub fn gegenbauer_betas(lambda: f64, len: usize) -> Vec<f64> {
    (1..=len)
        .map(|k| {
            let k = k as f64;
            if k == 1.0 {
                1.0 / (2.0 * (1.0 + lambda))
            } else {
                k * (k + 2.0 * lambda - 1.0) / (4.0 * (k + lambda) * (k + lambda - 1.0))
            }
        })
        .collect()
}

/// Evaluates the probability-normalized orthonormal polynomials
/// `p_0 = 1, ..., p_{len-1}` and their x-derivatives at `x`.
pub fn orthonormal_values(x: f64, b: &[f64], len: usize, vals: &mut [f64], ders: &mut [f64]) {
    vals[0] = 1.0;
    ders[0] = 0.0;
    if len == 1 {
        return;
    }
    vals[1] = x / b[0];
    ders[1] = 1.0 / b[0];
    for k in 1..len - 1 {
        vals[k + 1] = (x * vals[k] - b[k - 1] * vals[k - 1]) / b[k];
        ders[k + 1] = (x * ders[k] + vals[k] - b[k - 1] * ders[k - 1]) / b[k];
    }
}

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A Gauss rule carried in double-double precision.
#[derive(Debug, Clone)]
pub struct GaussRuleDd {
    pub nodes: Vec<TwoFloat>,
    pub weights: Vec<TwoFloat>,
}

impl GaussRuleDd {
    pub fn rounded(&self) -> GaussRule {
        GaussRule {
            nodes: self.nodes.iter().map(|x| x.hi()).collect(),
            weights: self.weights.iter().map(|w| w.hi()).collect(),
        }
    }
}

/// Double-double version of [`orthonormal_values`] (values only).
pub fn orthonormal_values_dd(x: TwoFloat, b: &[TwoFloat], len: usize, vals: &mut [TwoFloat]) {
    vals[0] = TwoFloat::from(1.0);
    if len == 1 {
        return;
    }
    vals[1] = x / b[0];
    for k in 1..len - 1 {
        vals[k + 1] = (x * vals[k] - b[k - 1] * vals[k - 1]) / b[k];
    }
}

/// Recurrence coefficients `sqrt(beta_k)` in double-double precision.
pub fn gegenbauer_recurrence_dd(lambda: f64, len: usize) -> Vec<TwoFloat> {
    let lam = TwoFloat::from(lambda);
    let one = TwoFloat::from(1.0);
    (1..=len)
        .map(|k| {
            let k = TwoFloat::from(k as f64);
            let beta = if k == one {
                one / (TwoFloat::from(2.0) * (one + lam))
            } else {
                k * (k + TwoFloat::from(2.0) * lam - one)
                    / (TwoFloat::from(4.0) * (k + lam) * (k + lam - one))
            };
            beta.sqrt()
        })
        .collect()
}

/// `npts`-point Gauss rule for `(1 - x^2)^(lambda - 1/2)`, with weights
/// scaled to sum to `mass`.
pub fn gauss_gegenbauer(npts: usize, lambda: f64, mass: f64) -> GaussRule {
    gauss_gegenbauer_dd(npts, lambda, mass).rounded()
}

/// As [`gauss_gegenbauer`], with nodes and weights accurate to double-double
/// precision.
pub fn gauss_gegenbauer_dd(npts: usize, lambda: f64, mass: f64) -> GaussRuleDd {
    assert!(npts >= 1);
    let beta = gegenbauer_betas(lambda, npts);
    let b: Vec<f64> = beta.iter().map(|v| v.sqrt()).collect();

    let mut jacobi = DMatrix::<f64>::zeros(npts, npts);
    for k in 0..npts - 1 {
        jacobi[(k, k + 1)] = b[k];
        jacobi[(k + 1, k)] = b[k];
    }
    let mut guess: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guess.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut vals = vec![0.0; npts + 1];
    let mut ders = vec![0.0; npts + 1];
    for x in guess.iter_mut() {
        for _ in 0..3 {
            orthonormal_values(*x, &b, npts + 1, &mut vals, &mut ders);
            let step = vals[npts] / ders[npts];
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
    }

    // final Newton steps in double-double; the derivative only needs f64
    let bdd = gegenbauer_recurrence_dd(lambda, npts);
    let mut vdd = vec![TwoFloat::from(0.0); npts + 1];
    let mut nodes: Vec<TwoFloat> = guess
        .iter()
        .map(|&x0| {
            let mut x = TwoFloat::from(x0);
            for _ in 0..2 {
                orthonormal_values_dd(x, &bdd, npts + 1, &mut vdd);
                orthonormal_values(x.hi(), &b, npts + 1, &mut vals, &mut ders);
                let step = vdd[npts] / ders[npts];
                if !step.hi().is_finite() {
                    break;
                }
                x -= step;
            }
            x
        })
        .collect();

    // enforce the reflection symmetry of the weight exactly
    for j in 0..npts / 2 {
        let x = (nodes[npts - 1 - j] - nodes[j]) / 2.0;
        nodes[j] = -x;
        nodes[npts - 1 - j] = x;
    }
    if npts % 2 == 1 {
        nodes[npts / 2] = TwoFloat::from(0.0);
    }

    let mass = TwoFloat::from(mass);
    let mut weights: Vec<TwoFloat> = nodes
        .iter()
        .map(|&x| {
            orthonormal_values_dd(x, &bdd, npts, &mut vdd);
            let sum = vdd[..npts].iter().fold(TwoFloat::from(0.0), |acc, v| acc + *v * *v);
            mass / sum
        })
        .collect();
    for j in 0..npts / 2 {
        let w = (weights[j] + weights[npts - 1 - j]) / 2.0;
        weights[j] = w;
        weights[npts - 1 - j] = w;
    }

    GaussRuleDd { nodes, weights }
}

/// Surface area of the unit `n`-sphere `S^n` in `R^(n+1)`.
pub fn sphere_volume(n: u32) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * sphere_volume(n - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn volumes() {
        assert_relative_eq!(sphere_volume(2), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_volume(3), 2.0 * PI * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_volume(4), 8.0 * PI * PI / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn legendre_rule_integrates_monomials() {
        let rule = gauss_gegenbauer(12, 0.5, 2.0);
        for deg in 0..24 {
            let q: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn gegenbauer_rule_integrates_monomials() {
        // lambda = 3/2: weight (1 - x^2), moments of x^(2k) are 2/(2k+1) - 2/(2k+3)
        let rule = gauss_gegenbauer(9, 1.5, 4.0 / 3.0);
        for k in 0..9 {
            let q: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(2 * k))
                .sum();
            let k = k as f64;
            let exact = 2.0 / (2.0 * k + 1.0) - 2.0 / (2.0 * k + 3.0);
            assert!((q - exact).abs() < 1e-14, "{q} vs {exact}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_interior() {
        let rule = gauss_gegenbauer(131, 3.0, 1.0);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(rule.nodes[0] > -1.0 && rule.nodes[130] < 1.0);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }
}
