use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::{spectral_proj, CMatrix};

use super::field::{FieldPath, MatrixField};
use super::flatten::flatten_spectrum;
use super::frame::{find_joint, TrivialProjection};
use super::gap::uniform_gap_with;

/// A rank-preserving path ending in a field with a trivial direct summand.
#[derive(Clone, Debug)]
pub struct Peeled {
    pub path: FieldPath,
    pub summand: TrivialProjection,
    /// Cut level used for the spectral projection.
    pub eta: f64,
}

impl Peeled {
    pub fn p(&self) -> &MatrixField {
        &self.summand.p
    }

    /// Largest `‖p h(1) - p‖` over the domain.
    pub fn summand_defect(&self) -> f64 {
        let end = self.path.end();
        self.summand
            .p
            .iter()
            .map(|(x, p)| p.matmul(end.at(x)).sub(p.as_cmatrix()).max_abs())
            .fold(0.0, f64::max)
    }
}

/// Flatten `a` (rank at least `k` everywhere, `‖a‖ ≤ 1`) until a trivial
/// projection of rank at least `k - dim` splits off its endpoint.
pub fn peel_trivial_summand(
    a: &MatrixField,
    k: usize,
    steps: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<(FieldPath, MatrixField)> {
    let r = k.saturating_sub(a.space().dim());
    let out = peel_with_rank(a, k, r, steps, tol, seed, None)?;
    Ok((out.path, out.summand.p))
}

/// As [`peel_trivial_summand`] with an explicit summand rank `r ≤ k`.
pub(crate) fn peel_with_rank(
    a: &MatrixField,
    k: usize,
    r: usize,
    steps: usize,
    tol: &Tolerances,
    seed: u64,
    hint: Option<&CMatrix>,
) -> Result<Peeled> {
    let mut out = peel_joint(&[a], k, r, steps, tol, seed, hint)?;
    Ok(out.remove(0))
}

/// Peel several fields with one common seed subspace.
pub(crate) fn peel_joint(
    fields: &[&MatrixField],
    k: usize,
    r: usize,
    steps: usize,
    tol: &Tolerances,
    seed: u64,
    hint: Option<&CMatrix>,
) -> Result<Vec<Peeled>> {
    if r > k {
        return Err(Error::invalid(format!("summand rank {r} exceeds the rank bound {k}")));
    }
    let mut prepared = Vec::with_capacity(fields.len());
    for a in fields {
        if r == 0 {
            prepared.push((FieldPath::constant((*a).clone()), 1.0, None));
            continue;
        }
        let eta = uniform_gap_with(a, |_| k as i64, tol)?;
        let path = flatten_spectrum(a, eta, steps, tol)?;
        let big = a.try_map(|_, v| spectral_proj(v, eta, tol))?;
        prepared.push((path, eta, Some(big)));
    }
    let projs: Vec<&MatrixField> = prepared.iter().zip(fields).map(|((_, _, b), a)| b.as_ref().unwrap_or(*a)).collect();
    let summands = find_joint(&projs, r, tol, seed, hint)?;
    let mut out = Vec::with_capacity(fields.len());
    for ((path, eta, _), summand) in prepared.into_iter().zip(summands) {
        let peeled = Peeled { path, summand, eta };
        let defect = peeled.summand_defect();
        if defect > 10.0 * tol.herm {
            return Err(Error::invalid(format!("summand certificate fails (defect {defect:.3e})")));
        }
        out.push(peeled);
    }
    Ok(out)
}
