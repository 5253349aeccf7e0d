//! Seeded smooth random fields used by the experiments.
//!
//! Degree-`l` coefficients are Gaussian with variance `exp(-(l/Lc)^2)`,
//! `Lc = L_max / 4`, and the result is rescaled to a requested sup-norm.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{ZonalBasis, ZonalField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard deviation of degree `l` for band limit `lmax`.
pub fn degree_std(l: usize, lmax: usize) -> f64 {
    let lc = lmax as f64 / 4.0;
    (-(l as f64 / lc).powi(2) / 2.0).exp()
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random zonal field band-limited to `L_max` with sup-norm `amplitude`.
pub fn random_zonal(basis: &Arc<ZonalBasis>, seed: u64, amplitude: f64) -> ZonalField {
    let mut rng = rng(seed);
    let lmax = basis.lmax();
    let coeffs = (0..=lmax).map(|l| degree_std(l, lmax) * normal(&mut rng)).collect();
    let field = ZonalField::from_coeffs(basis, coeffs);
    let sup = field.sup_norm();
    field.scale(amplitude / sup)
}

/// Antipodally even random zonal field (odd degrees removed).
pub fn random_even_zonal(basis: &Arc<ZonalBasis>, seed: u64, amplitude: f64) -> ZonalField {
    let mut rng = rng(seed);
    let lmax = basis.lmax();
    let coeffs = (0..=lmax)
        .map(|l| {
            let c = degree_std(l, lmax) * normal(&mut rng);
            if l % 2 == 0 { c } else { 0.0 }
        })
        .collect();
    let field = ZonalField::from_coeffs(basis, coeffs);
    let sup = field.sup_norm();
    field.scale(amplitude / sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SphereParams;

    #[test]
    fn seeded_and_scaled() {
        let b = ZonalBasis::new(SphereParams::new(1, 3).unwrap(), 32, 2.0).unwrap();
        let f = random_zonal(&b, 7, 0.2);
        let g = random_zonal(&b, 7, 0.2);
        assert_eq!(f.coeffs(), g.coeffs());
        assert!((f.sup_norm() - 0.2).abs() < 1e-15);
        assert_ne!(random_zonal(&b, 8, 0.2).coeffs(), f.coeffs());
        let e = random_even_zonal(&b, 3, 0.05);
        assert_eq!(e.odd_norm(), 0.0);
    }
}
