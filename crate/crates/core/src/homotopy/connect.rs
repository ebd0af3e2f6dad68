use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::{lowdin, CMatrix, HermMatrix};

use super::field::{path_tol_for, FieldPath, MatrixField};
use super::flatten::normalize;
use super::frame::TrivialProjection;
use super::peel::{peel_joint, peel_with_rank};
use super::raise::raise_in;

/// A path from `a` to `b` whose every slice has rank in `[l, k]` pointwise.
///
/// Each endpoint is first raised to minimum rank `l + dim`, then flattened
/// until a trivial rank-`l` projection `q` splits off. The complement of `q`
/// is contracted to zero, and the two copies of `q` are joined through the
/// constant projection onto their common seed subspace.
pub fn connect_in_band(
    a: &MatrixField,
    b: &MatrixField,
    l: usize,
    k: usize,
    steps: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<FieldPath> {
    if a.points() != b.points() {
        return Err(Error::invalid("endpoints must live on the same domain"));
    }
    if a.n() != b.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            got: b.n(),
        });
    }
    let dim = a.space().dim();
    if k > a.n() || k < l || 4 * dim > k - l {
        return Err(Error::invalid(format!(
            "band [{l}, {k}] needs k <= {} and width at least {}",
            a.n(),
            4 * dim
        )));
    }
    let (li, ki) = (l as i64, k as i64);
    a.check_band(|_| li, |_| ki, tol).map_err(|e| e.in_stage("start field"))?;
    b.check_band(|_| li, |_| ki, tol).map_err(|e| e.in_stage("end field"))?;
    if a == b {
        return Ok(FieldPath::constant(a.clone()));
    }

    let prep_a = raise_endpoint(a, l, k, steps, tol, seed)?;
    let prep_b = raise_endpoint(b, l, k, steps, tol, seed.wrapping_add(1))?;
    let mut peeled = peel_joint(&[prep_a.end(), prep_b.end()], l + dim, l, steps, tol, seed, None)?;
    let peel_b = peeled.pop().expect("two peeled fields");
    let peel_a = peeled.pop().expect("two peeled fields");
    let w = peel_a.summand.seed.clone();

    let contract_a = contract(peel_a.path.end(), peel_a.p(), steps, tol)?;
    let contract_b = contract(peel_b.path.end(), peel_b.p(), steps, tol)?;
    let rotate_a = to_seed(&peel_a.summand, &w, steps, tol)?;
    let rotate_b = to_seed(&peel_b.summand, &w, steps, tol)?;

    let path = FieldPath::chain(
        vec![
            prep_a,
            peel_a.path,
            contract_a,
            rotate_a,
            rotate_b.reversed(),
            contract_b.reversed(),
            peel_b.path.reversed(),
            prep_b.reversed(),
        ],
        tol,
    )?;
    path.check_band(li, ki, tol)?;
    Ok(path)
}

/// Path from `c` to a field of norm at most one with minimum rank `l + dim`.
fn raise_endpoint(c: &MatrixField, l: usize, k: usize, steps: usize, tol: &Tolerances, seed: u64) -> Result<FieldPath> {
    let dim = c.space().dim();
    let raised = if l <= dim {
        raise_in(c, l, k, None, steps, tol, seed)?
    } else {
        let norm = normalize(c, steps, tol)?;
        let peeled = peel_with_rank(norm.end(), l, l - dim, steps, tol, seed, None)?;
        let p = peeled.p().clone();
        let top = peeled.path.end();
        let amb = p.map(|_, v| HermMatrix::identity(v.n()).sub(v));
        let rest = top.try_map(|x, v| Ok(v.compress(amb.at(x))))?;
        let inner = raise_in(&rest, dim, k - (l - dim), Some(&amb), steps, tol, seed ^ 0x5eed)?;
        let lifted = lift(&inner, &p)?;
        FieldPath::chain(vec![norm, peeled.path, lifted], tol)?
    };
    let tail = normalize(raised.end(), steps, tol)?;
    FieldPath::chain(vec![raised, tail], tol)
}

fn lift(path: &FieldPath, p: &MatrixField) -> Result<FieldPath> {
    let steps = path.steps().iter().map(|s| s.add(p)).collect::<Result<Vec<_>>>()?;
    FieldPath::new(path.times().to_vec(), steps)
}

/// `s ↦ (1 - s)(1 - q) c (1 - q) + q`, from `c` to `q`.
fn contract(c: &MatrixField, q: &MatrixField, steps: usize, tol: &Tolerances) -> Result<FieldPath> {
    let rest = c.try_map(|x, v| {
        let comp = HermMatrix::identity(v.n()).sub(q.at(x));
        Ok(v.compress(&comp))
    })?;
    let start = rest.add(q)?;
    let ptol = path_tol_for(&[c.norm(tol), q.norm(tol).max(f64::MIN_POSITIVE)], tol);
    let path = FieldPath::build(&start, steps, ptol, tol, |s| rest.scale(1.0 - s).add(q))?;
    let mut slices = path.steps().to_vec();
    slices[0] = c.clone();
    FieldPath::new(path.times().to_vec(), slices)
}

/// Rotate the frame projections `F F*` onto the constant `W W*` along
/// `t ↦ span((1 - t) F + t W)`; `W* F` is positive definite, so the span
/// keeps full rank.
fn to_seed(t: &TrivialProjection, w: &CMatrix, steps: usize, tol: &Tolerances) -> Result<FieldPath> {
    if t.rank() == 0 {
        return Ok(FieldPath::constant(t.p.clone()));
    }
    let frames = &t.frames;
    let slice = |s: f64| -> Result<MatrixField> {
        let vals = frames
            .iter()
            .map(|f| {
                let z = f.scale((1.0 - s).into()).add(&w.scale(s.into()));
                HermMatrix::projector(&lowdin(&z, tol).0)
            })
            .collect();
        Ok(MatrixField::unchecked(t.p.space_arc().clone(), t.p.points().to_vec(), vals))
    };
    let target = slice(1.0)?;
    if target.sup_dist(&t.p, tol)? <= tol.herm {
        return Ok(FieldPath::constant(t.p.clone()));
    }
    FieldPath::build(&t.p, steps, path_tol_for(&[1.0], tol), tol, slice)
}
