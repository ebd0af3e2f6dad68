use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::HermMatrix;

use super::field::{path_tol_for, FieldPath, MatrixField};
use super::frame::find_trivial_subprojection;
use super::support::{computed_strata, well_supported_in};

/// Push the minimum rank of `a` up to `l + dim` while staying in `[l, k]`.
pub fn raise_min_rank(
    a: &MatrixField,
    l: usize,
    k: usize,
    steps: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<FieldPath> {
    raise_in(a, l, k, None, steps, tol, seed)
}

/// As [`raise_min_rank`] inside the range of an ambient projection field
/// that contains the support of `a`; `k` is then bounded by its rank.
pub(crate) fn raise_in(
    a: &MatrixField,
    l: usize,
    k: usize,
    ambient: Option<&MatrixField>,
    steps: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<FieldPath> {
    let dim = a.space().dim();
    let ws = well_supported_in(a, &computed_strata(a, tol), ambient, tol)?;
    let room = ws.ambient_rank();
    if k > room {
        return Err(Error::invalid(format!("upper rank {k} exceeds the available size {room}")));
    }
    if l > dim {
        return Err(Error::invalid(format!("lower rank {l} exceeds the dimension {dim}; peel a summand first")));
    }
    if 4 * dim > k.saturating_sub(l) || k < l {
        return Err(Error::invalid(format!("band [{l}, {k}] is narrower than 4 * dim = {}", 4 * dim)));
    }
    a.check_band(|_| l as i64, |_| k as i64, tol)?;
    let ranks = a.ranks(tol);
    if ranks.iter().all(|&r| r >= l + dim) {
        return Ok(FieldPath::constant(a.clone()));
    }

    let top = ranks.iter().copied().max().unwrap_or(0);
    let (summand, r) = if top <= l + 2 * dim {
        // Everything fits below l + 2 dim: add a trivial piece orthogonal to
        // the union of the stratum projections.
        let comp = a.map(|x, _| {
            let m = ws.strata_at(x).map(|s| s.rank).max().unwrap_or(0);
            ws.tail_projection(x, m)
        });
        (comp, dim)
    } else {
        let cut = ws
            .strata
            .iter()
            .map(|s| s.rank)
            .find(|&r| r > l + 2 * dim)
            .expect("some stratum exceeds l + 2 dim");
        let psi = a.map(|x, _| {
            let m = ws.strata_at(x).map(|s| s.rank).filter(|&r| r >= cut).min();
            match m {
                Some(m) => ws.prefix_projection(x, m),
                None => ambient.map_or_else(|| HermMatrix::identity(a.n()), |amb| amb.at(x).clone()),
            }
        });
        (psi, l + dim)
    };
    let p = find_trivial_subprojection(&summand, r, tol, seed)?.p;
    let end = a.add(&p)?;
    let ptol = path_tol_for(&[a.norm(tol), end.norm(tol)], tol);
    let path = FieldPath::build(a, steps, ptol, tol, |t| a.add(&p.scale(t)))?;
    path.check_band(l as i64, k as i64, tol)?;
    if let Some((x, r)) = path
        .end()
        .points()
        .iter()
        .zip(path.end().ranks(tol))
        .find(|(_, r)| *r < l + dim)
    {
        return Err(Error::rank(*x, format!("raised rank {r} is still below {}", l + dim)));
    }
    Ok(path)
}
