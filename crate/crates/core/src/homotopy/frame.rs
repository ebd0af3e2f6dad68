use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::{lowdin, CMatrix, HermMatrix, C64};

use super::field::MatrixField;

/// Candidate scores at or above this are accepted without trying further seeds.
const GOOD_SCORE: f64 = 0.25;
const RANDOM_CANDIDATES: usize = 8;

/// A projection field `p ≤ P` with a global orthonormal frame spanning it.
#[derive(Clone, Debug)]
pub struct TrivialProjection {
    pub p: MatrixField,
    /// Per-point isometries (`n × r`), ordered like `p.points()`.
    pub frames: Vec<CMatrix>,
    /// The constant seed subspace the frames were projected from.
    pub seed: CMatrix,
    /// Smallest singular value of `P(x) W` over the domain.
    pub score: f64,
}

impl TrivialProjection {
    pub fn rank(&self) -> usize {
        self.seed.cols()
    }

    /// Largest `‖F*F - I‖` entry over the domain.
    pub fn frame_defect(&self) -> f64 {
        let r = self.rank();
        self.frames
            .iter()
            .map(|f| f.adjoint().matmul(f).sub(&CMatrix::identity(r)).max_abs())
            .fold(0.0, f64::max)
    }
}

/// Extract a trivial rank-`r` subprojection of the projection field `proj`.
///
/// A fixed subspace `W` is pushed into every fiber as `P(x) W` and
/// orthonormalized symmetrically; the resulting frames vary continuously
/// whenever `P` does and `P(x) W` keeps full rank. Several seed subspaces
/// are tried in a fixed order.
pub fn find_trivial_subprojection(
    proj: &MatrixField,
    r: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<TrivialProjection> {
    let mut out = find_joint(&[proj], r, tol, seed, None)?;
    Ok(out.remove(0))
}

/// One seed subspace serving several projection fields at once.
pub(crate) fn find_joint(
    projs: &[&MatrixField],
    r: usize,
    tol: &Tolerances,
    seed: u64,
    hint: Option<&CMatrix>,
) -> Result<Vec<TrivialProjection>> {
    let Some(first) = projs.first() else {
        return Err(Error::invalid("frame search needs at least one projection field"));
    };
    let n = first.n();
    if projs.iter().any(|p| p.n() != n) {
        return Err(Error::invalid("projection fields must share a fiber size"));
    }
    if r > n {
        return Err(Error::invalid(format!("cannot find rank {r} inside {n}x{n} matrices")));
    }
    for p in projs {
        for (x, v) in p.iter() {
            let rank = v.trace().round() as i64;
            if rank < r as i64 {
                return Err(Error::rank(x, format!("projection rank {rank} is below the requested {r}")));
            }
        }
    }
    if r == 0 {
        return Ok(projs.iter().map(|p| zero_projection(p, n)).collect());
    }

    let mut best: Option<(f64, CMatrix)> = None;
    let consider = |w: CMatrix, best: &mut Option<(f64, CMatrix)>| -> bool {
        let score = projs.iter().map(|p| score(p, &w, tol)).fold(f64::INFINITY, f64::min);
        let better = best.as_ref().is_none_or(|(s, _)| score > *s);
        if better {
            *best = Some((score, w));
        }
        score >= GOOD_SCORE
    };

    let mut done = false;
    if let Some(h) = hint {
        if h.rows() == n && h.cols() == r {
            done = consider(h.clone(), &mut best);
        }
    }
    if !done {
        done = consider(coordinate_candidate(projs, r), &mut best);
    }
    if !done {
        if let Some(v) = first.values().first() {
            let pairs = v.eigh(tol).pairs_desc();
            let cols: Vec<Vec<C64>> = pairs.into_iter().take(r).map(|(_, c)| c).collect();
            done = consider(CMatrix::from_columns(n, &cols), &mut best);
        }
    }
    if !done {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..RANDOM_CANDIDATES {
            let g = CMatrix::from_fn(n, r, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            });
            let (w, _) = lowdin(&g, tol);
            if consider(w, &mut best) {
                break;
            }
        }
    }

    let (score, w) = best.expect("at least one candidate was scored");
    if score < tol.frame_floor {
        return Err(Error::NeedsRefinement(format!(
            "no global frame of rank {r} found (best conditioning {score:.3e})"
        )));
    }
    projs.iter().map(|p| realize_frame(p, &w, tol)).collect()
}

fn zero_projection(p: &MatrixField, n: usize) -> TrivialProjection {
    let zero = HermMatrix::zeros(n);
    TrivialProjection {
        p: p.map(|_, _| zero.clone()),
        frames: vec![CMatrix::zeros(n, 0); p.len()],
        seed: CMatrix::zeros(n, 0),
        score: f64::INFINITY,
    }
}

fn score(p: &MatrixField, w: &CMatrix, tol: &Tolerances) -> f64 {
    p.values()
        .iter()
        .map(|v| lowdin(&v.as_cmatrix().matmul(w), tol).1)
        .fold(f64::INFINITY, f64::min)
}

/// Coordinate axes with the largest worst-case diagonal weight.
fn coordinate_candidate(projs: &[&MatrixField], r: usize) -> CMatrix {
    let n = projs[0].n();
    let mut weight = vec![f64::INFINITY; n];
    for p in projs {
        for v in p.values() {
            for (i, w) in weight.iter_mut().enumerate() {
                *w = w.min(v.get(i, i).re);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| weight[j].total_cmp(&weight[i]).then(i.cmp(&j)));
    let mut axes: Vec<usize> = order.into_iter().take(r).collect();
    axes.sort_unstable();
    CMatrix::from_fn(n, r, |i, j| if axes[j] == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

fn realize_frame(p: &MatrixField, w: &CMatrix, tol: &Tolerances) -> Result<TrivialProjection> {
    let mut frames = Vec::with_capacity(p.len());
    let mut vals = Vec::with_capacity(p.len());
    let mut worst = f64::INFINITY;
    for (x, v) in p.iter() {
        let (f, smin) = lowdin(&v.as_cmatrix().matmul(w), tol);
        if smin < tol.frame_floor {
            return Err(Error::NeedsRefinement(format!("frame degenerates at sample point {x}")));
        }
        worst = worst.min(smin);
        vals.push(HermMatrix::projector(&f));
        frames.push(f);
    }
    Ok(TrivialProjection {
        p: MatrixField::unchecked(p.space_arc().clone(), p.points().to_vec(), vals),
        frames,
        seed: w.clone(),
        score: worst,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::space::SampledSpace;

    #[test]
    fn identity_gives_identity() {
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 3).unwrap());
        let tol = Tolerances::default();
        let p = MatrixField::full(k, vec![HermMatrix::identity(3); 4], &tol).unwrap();
        let t = find_trivial_subprojection(&p, 3, &tol, 1).unwrap();
        assert!(t.p.values().iter().all(|v| v.sub(&HermMatrix::identity(3)).max_abs() < 1e-12));
        assert!(t.frame_defect() < 1e-12);
    }

    #[test]
    fn rotating_rank_two_projection() {
        // P(x) projects onto span{e0, cos(θ)e1 + sin(θ)e2} with θ = πx.
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 16).unwrap());
        let tol = Tolerances::default();
        let vals = k
            .vertices()
            .iter()
            .map(|v| {
                let th = std::f64::consts::PI * v[0];
                let u = [C64::new(0.0, 0.0), C64::new(th.cos(), 0.0), C64::new(th.sin(), 0.0)];
                let e0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
                HermMatrix::projector(&CMatrix::from_columns(3, &[e0.to_vec(), u.to_vec()]))
            })
            .collect();
        let p = MatrixField::full(k.clone(), vals, &tol).unwrap();
        let t = find_trivial_subprojection(&p, 1, &tol, 7).unwrap();
        for (x, q) in t.p.iter() {
            let big = p.at(x);
            assert!(big.sub(q).min_eig(&tol) > -1e-9);
            assert!((q.matmul(q).sub(q.as_cmatrix())).max_abs() < 1e-9);
        }
        assert!(t.p.omega(&tol) <= 4.0 * k.mesh_width());
    }

    #[test]
    fn rank_too_small_is_rejected() {
        let k = Arc::new(SampledSpace::point());
        let tol = Tolerances::default();
        let p = MatrixField::full(k, vec![HermMatrix::from_diag(&[1.0, 0.0])], &tol).unwrap();
        assert!(find_trivial_subprojection(&p, 2, &tol, 0).is_err());
    }
}
