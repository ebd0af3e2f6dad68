use crate::bounds::BoundChain;
use crate::config::Tolerances;
use crate::error::{Error, Result};

use super::field::MatrixField;

/// Largest useful cut level `η > 0` such that, at every point, at least
/// `g(x)` eigenvalues of `a(x)` lie above every `η' ∈ (0, η]`.
pub fn find_uniform_gap(a: &MatrixField, g: &BoundChain, tol: &Tolerances) -> Result<f64> {
    uniform_gap_with(a, |x| g.at(x), tol)
}

pub(crate) fn uniform_gap_with(a: &MatrixField, g: impl Fn(usize) -> i64, tol: &Tolerances) -> Result<f64> {
    let spectra: Vec<(usize, Vec<f64>)> = a.iter().map(|(x, v)| (x, v.eigh(tol).values_desc())).collect();
    let mut floor = f64::INFINITY;
    for (x, vals) in &spectra {
        let need = g(*x);
        if need <= 0 {
            continue;
        }
        let need = need as usize;
        let norm = vals.first().copied().unwrap_or(0.0).max(vals.last().map_or(0.0, |v| -v));
        let thresh = tol.rank * norm;
        let have = vals.iter().filter(|&&l| l > thresh).count();
        if have < need || norm == 0.0 {
            return Err(Error::rank(*x, format!("rank {have} is below the required lower bound {need}")));
        }
        floor = floor.min(vals[need - 1]);
    }
    let mut eta = if floor.is_finite() {
        0.5 * floor
    } else {
        let n = a.norm(tol);
        if n > 0.0 {
            0.5 * n
        } else {
            0.5
        }
    };
    for _ in 0..400 {
        let clash = spectra.iter().any(|(_, vals)| {
            vals.iter()
                .any(|&l| [eta, 0.5 * eta, 0.1 * eta].iter().any(|&c| (l - c).abs() <= tol.gap))
        });
        if !clash {
            return Ok(eta);
        }
        eta *= 0.9;
    }
    Err(Error::NeedsRefinement(
        "no cut level stays clear of the spectrum".to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bounds::BoundKind;
    use crate::matcalc::{spectral_proj, HermMatrix};
    use crate::space::SampledSpace;

    #[test]
    fn constant_projection_field() {
        let k = Arc::new(SampledSpace::point());
        let tol = Tolerances::default();
        let a = MatrixField::full(k.clone(), vec![HermMatrix::from_diag(&[1.0, 0.0])], &tol).unwrap();
        let g = BoundChain::constant(&k, BoundKind::UscLower, 1);
        let eta = find_uniform_gap(&a, &g, &tol).unwrap();
        assert!(eta > 0.0 && eta < 1.0);
    }

    #[test]
    fn diag_x_one_on_interval() {
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 8).unwrap());
        let tol = Tolerances::default();
        let vals = k.vertices().iter().map(|v| HermMatrix::from_diag(&[v[0], 1.0])).collect();
        let a = MatrixField::full(k.clone(), vals, &tol).unwrap();
        let g = BoundChain::constant(&k, BoundKind::UscLower, 1);
        let eta = find_uniform_gap(&a, &g, &tol).unwrap();
        for (_, v) in a.iter() {
            for c in [eta, eta / 2.0, eta / 10.0] {
                assert!(spectral_proj(v, c, &tol).unwrap().trace() >= 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn witness_reported() {
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 2).unwrap());
        let tol = Tolerances::default();
        let vals = k.vertices().iter().map(|v| HermMatrix::from_diag(&[v[0], 0.0])).collect();
        let a = MatrixField::full(k.clone(), vals, &tol).unwrap();
        let g = BoundChain::constant(&k, BoundKind::UscLower, 1);
        match find_uniform_gap(&a, &g, &tol) {
            Err(Error::RankViolation { point, .. }) => assert_eq!(point, 0),
            other => panic!("expected a witness, got {other:?}"),
        }
    }
}
