#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rsh_rank::realize::TargetProfile;
use rsh_rank::rsh::{ClutchEntry, ClutchRef, RshDecomposition, Stage};
use rsh_rank::space::SampledSpace;
use rsh_rank::Tolerances;

/// Point stage of size `n0` glued into both ends of an interval stage of
/// size `n1` with the given multiplicity.
pub fn dimension_drop(n0: usize, n1: usize, mult: usize, segments: usize) -> RshDecomposition {
    let pt = Arc::new(SampledSpace::point());
    let iv = Arc::new(SampledSpace::interval(0.0, 1.0, segments).unwrap());
    let ends = [0, segments];
    let entry = ClutchEntry {
        refs: vec![ClutchRef {
            stage: 0,
            point: 0,
            multiplicity: mult,
        }],
        unitary: None,
    };
    let clutch: BTreeMap<usize, ClutchEntry> = ends.iter().map(|&y| (y, entry.clone())).collect();
    RshDecomposition::new(vec![
        Stage {
            space: pt.clone(),
            size: n0,
            boundary: pt.empty(),
            clutch: BTreeMap::new(),
        },
        Stage {
            boundary: iv.full_subcomplex(&ends),
            space: iv,
            size: n1,
            clutch,
        },
    ])
}

pub fn flagship() -> (RshDecomposition, TargetProfile) {
    let r = dimension_drop(40, 160, 4, 200);
    let h1 = r.stages()[1]
        .space
        .vertices()
        .iter()
        .map(|v| 0.3 + 1.6 * v[0] * (1.0 - v[0]))
        .collect();
    let t = TargetProfile::new(&r, vec![vec![0.3], h1], 0.5, &Tolerances::default()).unwrap();
    (r, t)
}

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rsh_rank::homotopy::MatrixField;
use rsh_rank::matcalc::{lowdin, CMatrix, HermMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of eigenvalues of `a` strictly above `sigma`, by Sylvester's law
/// of inertia applied to an unpivoted LDL* factorization of `a - sigma`.
pub fn count_above(a: &HermMatrix, sigma: f64) -> usize {
    let n = a.n();
    let mut shift = sigma;
    'retry: for attempt in 0..8 {
        let mut m: Vec<Vec<Complex64>> = (0..n)
            .map(|i| (0..n).map(|j| a.get(i, j) - if i == j { shift } else { 0.0 }).collect())
            .collect();
        let scale = 1.0 + sigma.abs() + a.max_abs();
        let mut positive = 0;
        for k in 0..n {
            let d = m[k][k].re;
            if d.abs() < 1e-13 * scale {
                shift = sigma + scale * 1e-12 * (attempt + 1) as f64;
                continue 'retry;
            }
            if d > 0.0 {
                positive += 1;
            }
            for i in k + 1..n {
                let li = m[i][k] / d;
                for j in k + 1..n {
                    let t = li * m[k][j];
                    m[i][j] -= t;
                }
            }
        }
        return positive;
    }
    panic!("inertia count did not stabilize");
}

/// Eigenvalues of a Hermitian matrix by bisection on the inertia count.
pub fn bisect_eigenvalues(a: &HermMatrix) -> Vec<f64> {
    let n = a.n();
    let r = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).norm()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            // k-th largest: the smallest s with count_above(s) <= k.
            let (mut lo, mut hi) = (-r, r);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_above(a, mid) <= k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-15 * r {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    lowdin(&gaussian(rng, n, n), &Tolerances::default()).0
}

/// `x ↦ u(x) diag(spectrum(x)) u(x)*` with `u(x)` a continuous unitary family
/// that rotates with the first two coordinates.
pub fn rotating_field(
    space: &Arc<SampledSpace>,
    n: usize,
    seed: u64,
    spectrum: impl Fn(&[f64]) -> Vec<f64>,
) -> MatrixField {
    let mut r = rng(seed);
    let u0 = random_unitary(&mut r, n);
    let g1 = gaussian(&mut r, n, n).scale(Complex64::new(0.3, 0.0));
    let g2 = gaussian(&mut r, n, n).scale(Complex64::new(0.3, 0.0));
    let tol = Tolerances::default();
    let vals = space
        .vertices()
        .iter()
        .map(|v| {
            let x = v.first().copied().unwrap_or(0.0);
            let y = v.get(1).copied().unwrap_or(0.0);
            let z = u0.add(&g1.scale(Complex64::new(x, 0.0))).add(&g2.scale(Complex64::new(y, 0.0)));
            let u = lowdin(&z, &tol).0;
            HermMatrix::from_diag(&spectrum(v)).conjugate(&u)
        })
        .collect();
    MatrixField::full(space.clone(), vals, &tol).unwrap()
}

/// Rank of `a` at the relative threshold `tol.rank`, from the inertia count.
pub fn oracle_rank(a: &HermMatrix, tol: &Tolerances) -> usize {
    let norm = largest_eigenvalue(a);
    if norm <= 0.0 {
        0
    } else {
        count_above(a, tol.rank * norm)
    }
}

/// Largest eigenvalue by bisection on the inertia count.
pub fn largest_eigenvalue(a: &HermMatrix) -> f64 {
    let n = a.n();
    let r = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if r == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-r, r);
    while hi - lo > 1e-13 * r {
        let mid = 0.5 * (lo + hi);
        if count_above(a, mid) == 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
