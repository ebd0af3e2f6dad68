use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::ramp_apply;

use super::field::{path_tol_for, FieldPath, MatrixField};

/// The spectral flattening path `h(t) = f_s(a)` with `s = 1 - t(1 - η/2)`.
pub fn flatten_spectrum(a: &MatrixField, eta: f64, steps: usize, tol: &Tolerances) -> Result<FieldPath> {
    let norm = a.norm(tol);
    if norm > 1.0 + tol.herm {
        return Err(Error::invalid(format!("flattening needs a field of norm at most 1, got {norm:.6}")));
    }
    if !(eta > 0.0 && eta <= 2.0) {
        return Err(Error::invalid(format!("flattening level must lie in (0, 2], got {eta}")));
    }
    let slice = |t: f64| -> Result<MatrixField> {
        let s = 1.0 - t * (1.0 - 0.5 * eta);
        a.try_map(|_, v| ramp_apply(v, s, tol))
    };
    let end = slice(1.0)?;
    let ptol = path_tol_for(&[norm, end.norm(tol)], tol);
    FieldPath::build(a, steps, ptol, tol, slice)
}

/// Linear rescaling path from `a` to `a / ‖a‖` when `‖a‖ > 1`, else constant.
pub fn normalize(a: &MatrixField, steps: usize, tol: &Tolerances) -> Result<FieldPath> {
    let norm = a.norm(tol);
    if norm <= 1.0 {
        return Ok(FieldPath::constant(a.clone()));
    }
    let ptol = path_tol_for(&[norm, 1.0], tol);
    FieldPath::build(a, steps, ptol, tol, |t| Ok(a.scale((1.0 - t) + t / norm)))
}
