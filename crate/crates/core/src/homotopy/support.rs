use std::collections::BTreeMap;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::{CMatrix, HermMatrix, C64};
use crate::space::Subcomplex;

use super::field::MatrixField;

/// One rank stratum: the closure of `{rank = rank}` and its projection field.
#[derive(Clone, Debug)]
pub struct Stratum {
    pub rank: usize,
    pub closure: Subcomplex,
    /// Constant-rank projection field on the closure's sample points.
    pub proj: MatrixField,
}

/// A positive field together with nested constant-rank support projections
/// on the closures of its rank strata.
#[derive(Clone, Debug)]
pub struct WellSupportedField {
    pub base: MatrixField,
    pub strata: Vec<Stratum>,
    /// Ordered orthonormal basis at each base point; every stratum
    /// projection at `x` spans a prefix of it.
    bases: Vec<CMatrix>,
    /// Number of leading basis vectors inside the ambient projection.
    ambient_rank: usize,
}

impl WellSupportedField {
    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    /// Projection onto the first `m` basis vectors at `x`.
    pub fn prefix_projection(&self, x: usize, m: usize) -> HermMatrix {
        let basis = &self.bases[self.base.index_of(x).expect("point in domain")];
        HermMatrix::projector(&leading_columns(basis, 0, m))
    }

    /// Projection onto basis vectors `m..ambient_rank` at `x`.
    pub fn tail_projection(&self, x: usize, m: usize) -> HermMatrix {
        let basis = &self.bases[self.base.index_of(x).expect("point in domain")];
        HermMatrix::projector(&leading_columns(basis, m, self.ambient_rank))
    }

    /// Strata whose closure contains `x`.
    pub fn strata_at(&self, x: usize) -> impl Iterator<Item = &Stratum> {
        self.strata.iter().filter(move |s| s.closure.contains_vertex(x))
    }

    /// Check monotonicity on overlaps and agreement with supports.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let slack = 10.0 * tol.psd.max(tol.herm);
        for (i, si) in self.strata.iter().enumerate() {
            for sj in &self.strata[i + 1..] {
                for (x, pi) in si.proj.iter() {
                    if let Some(pj) = sj.proj.get(x) {
                        let m = pj.sub(pi).min_eig(tol);
                        if m < -slack {
                            return Err(Error::rank(
                                x,
                                format!("stratum projections of ranks {} and {} are not nested", si.rank, sj.rank),
                            ));
                        }
                    }
                }
            }
            for (x, p) in si.proj.iter() {
                let e = self.base.at(x).eigh(tol);
                if e.rank(tol) == si.rank {
                    let thresh = tol.rank * e.norm();
                    let support = e.apply(|l| if l > thresh { 1.0 } else { 0.0 });
                    if support.sub(p).max_abs() > slack {
                        return Err(Error::rank(x, "stratum projection differs from the support projection"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn leading_columns(basis: &CMatrix, from: usize, to: usize) -> CMatrix {
    let cols: Vec<Vec<C64>> = (from..to).map(|j| basis.column(j)).collect();
    CMatrix::from_columns(basis.rows(), &cols)
}

/// Rank strata of `a` on its domain: each closure is the stratum plus the
/// adjacent domain points of lower rank.
pub fn computed_strata(a: &MatrixField, tol: &Tolerances) -> Vec<(usize, Subcomplex)> {
    let ranks: BTreeMap<usize, usize> = a.points().iter().copied().zip(a.ranks(tol)).collect();
    let mut by_rank: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&x, &r) in &ranks {
        by_rank.entry(r).or_default().push(x);
    }
    by_rank
        .into_iter()
        .map(|(r, pts)| {
            let mut verts = pts.clone();
            for &x in &pts {
                for &y in a.space().neighbors(x) {
                    if ranks.get(&y).is_some_and(|&ry| ry < r) {
                        verts.push(y);
                    }
                }
            }
            verts.sort_unstable();
            verts.dedup();
            (r, a.space().full_subcomplex(&verts))
        })
        .collect()
}

/// A well-supported field within `η` of `a` and below it.
///
/// The returned base is `a` itself; its stratum projections are built from
/// an ordered eigenbasis at each point, with kernel directions ranked by
/// their overlap with neighboring higher-rank values.
pub fn well_supported_approx(
    a: &MatrixField,
    eta: f64,
    declared: &[(usize, Subcomplex)],
    tol: &Tolerances,
) -> Result<WellSupportedField> {
    if !(eta > 0.0) {
        return Err(Error::invalid("approximation radius must be positive"));
    }
    check_declared(a, declared, tol)?;
    well_supported_in(a, declared, None, tol)
}

fn check_declared(a: &MatrixField, declared: &[(usize, Subcomplex)], tol: &Tolerances) -> Result<()> {
    for (x, r) in a.points().iter().copied().zip(a.ranks(tol)) {
        let Some((_, closure)) = declared.iter().find(|(dr, _)| *dr == r) else {
            return Err(Error::rank(x, format!("rank {r} belongs to no declared stratum")));
        };
        if !closure.contains_vertex(x) {
            return Err(Error::rank(x, format!("point of rank {r} lies outside the declared stratum closure")));
        }
        if let Some((dr, _)) = declared.iter().find(|(dr, c)| c.contains_vertex(x) && r > *dr) {
            return Err(Error::rank(x, format!("rank {r} exceeds the declared stratum rank {dr}")));
        }
    }
    Ok(())
}

/// Core construction, optionally confined to an ambient projection field
/// that dominates the support of `a`.
pub(crate) fn well_supported_in(
    a: &MatrixField,
    strata: &[(usize, Subcomplex)],
    ambient: Option<&MatrixField>,
    tol: &Tolerances,
) -> Result<WellSupportedField> {
    let n = a.n();
    let ranks = a.ranks(tol);
    let rank_at: BTreeMap<usize, usize> = a.points().iter().copied().zip(ranks.iter().copied()).collect();
    let ambient_rank = match ambient {
        Some(amb) => {
            let r = amb.values().first().map_or(0.0, HermMatrix::trace).round() as usize;
            if amb.values().iter().any(|v| (v.trace() - r as f64).abs() > 1e-6) {
                return Err(Error::invalid("ambient projection must have constant rank"));
            }
            r
        }
        None => n,
    };
    let mut bases = Vec::with_capacity(a.len());
    for (i, (x, v)) in a.iter().enumerate() {
        let r = ranks[i];
        let pairs = v.eigh(tol).pairs_desc();
        let support: Vec<Vec<C64>> = pairs[..r].iter().map(|(_, c)| c.clone()).collect();
        let kernel = CMatrix::from_columns(n, &pairs[r..].iter().map(|(_, c)| c.clone()).collect::<Vec<_>>());
        let (inside, outside) = match ambient {
            Some(amb) => split_by_ambient(&kernel, amb.at(x), tol),
            None => (kernel, CMatrix::zeros(n, 0)),
        };
        let mut pull = HermMatrix::zeros(n);
        for &y in a.space().neighbors(x) {
            if let (Some(&ry), Some(vy)) = (rank_at.get(&y), a.get(y)) {
                if ry > r {
                    let s = vy.op_norm(tol);
                    if s > 0.0 {
                        pull = pull.add(&vy.scale(1.0 / s));
                    }
                }
            }
        }
        let ordered = order_by(&inside, &pull, tol);
        let mut cols = support;
        cols.extend((0..ordered.cols()).map(|j| ordered.column(j)));
        cols.extend((0..outside.cols()).map(|j| outside.column(j)));
        bases.push(CMatrix::from_columns(n, &cols));
    }

    let mut sorted: Vec<(usize, Subcomplex)> = strata.to_vec();
    sorted.sort_by_key(|(r, _)| *r);
    let mut out_strata = Vec::with_capacity(sorted.len());
    for (r, closure) in sorted {
        if r > ambient_rank {
            return Err(Error::invalid(format!("stratum rank {r} exceeds the ambient rank {ambient_rank}")));
        }
        let pts: Vec<usize> = a.points().iter().copied().filter(|&x| closure.contains_vertex(x)).collect();
        let vals = pts
            .iter()
            .map(|&x| {
                let basis = &bases[a.index_of(x).expect("point in domain")];
                HermMatrix::projector(&leading_columns(basis, 0, r))
            })
            .collect();
        out_strata.push(Stratum {
            rank: r,
            closure,
            proj: MatrixField::unchecked(a.space_arc().clone(), pts, vals),
        });
    }
    Ok(WellSupportedField {
        base: a.clone(),
        strata: out_strata,
        bases,
        ambient_rank,
    })
}

/// Split the span of `kernel` into the part inside the projection `amb` and
/// its orthogonal complement within the span.
fn split_by_ambient(kernel: &CMatrix, amb: &HermMatrix, tol: &Tolerances) -> (CMatrix, CMatrix) {
    let n = kernel.rows();
    if kernel.cols() == 0 {
        return (kernel.clone(), kernel.clone());
    }
    let g = HermMatrix::from_cmatrix_unchecked(kernel.adjoint().matmul(amb.as_cmatrix()).matmul(kernel));
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (l, v) in g.eigh(tol).pairs_desc() {
        let col = CMatrix::from_columns(kernel.cols(), &[v]);
        let w = kernel.matmul(&col).column(0);
        if l > 0.5 {
            inside.push(w);
        } else {
            outside.push(w);
        }
    }
    (CMatrix::from_columns(n, &inside), CMatrix::from_columns(n, &outside))
}

/// Rotate the frame `k` to the eigenbasis of `k* m k`, largest first.
fn order_by(k: &CMatrix, m: &HermMatrix, tol: &Tolerances) -> CMatrix {
    if k.cols() <= 1 {
        return k.clone();
    }
    let g = HermMatrix::from_cmatrix_unchecked(k.adjoint().matmul(m.as_cmatrix()).matmul(k));
    if g.max_abs() == 0.0 {
        return k.clone();
    }
    let cols: Vec<Vec<C64>> = g.eigh(tol).pairs_desc().into_iter().map(|(_, v)| v).collect();
    k.matmul(&CMatrix::from_columns(k.cols(), &cols))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::space::SampledSpace;

    #[test]
    fn projection_field_is_its_own_approximation() {
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 4).unwrap());
        let tol = Tolerances::default();
        let p = HermMatrix::from_diag(&[1.0, 0.0, 1.0]);
        let a = MatrixField::full(k.clone(), vec![p.clone(); 5], &tol).unwrap();
        let ws = well_supported_approx(&a, 0.5, &[(2, k.whole())], &tol).unwrap();
        ws.validate(&tol).unwrap();
        assert!(ws.strata[0].proj.values().iter().all(|q| q.sub(&p).max_abs() < 1e-12));
    }

    #[test]
    fn diag_x_one_two_strata() {
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 8).unwrap());
        let tol = Tolerances::default();
        let vals = k.vertices().iter().map(|v| HermMatrix::from_diag(&[v[0], 1.0])).collect();
        let a = MatrixField::full(k.clone(), vals, &tol).unwrap();
        let declared = vec![(1, k.full_subcomplex(&[0])), (2, k.whole())];
        let ws = well_supported_approx(&a, 0.5, &declared, &tol).unwrap();
        ws.validate(&tol).unwrap();
        let p1 = ws.strata[0].proj.at(0);
        assert!(p1.sub(&HermMatrix::from_diag(&[0.0, 1.0])).max_abs() < 1e-12);
    }

    #[test]
    fn undeclared_rank_is_rejected() {
        let k = Arc::new(SampledSpace::interval(0.0, 1.0, 2).unwrap());
        let tol = Tolerances::default();
        let vals = k.vertices().iter().map(|v| HermMatrix::from_diag(&[v[0], 1.0])).collect();
        let a = MatrixField::full(k.clone(), vals, &tol).unwrap();
        assert!(well_supported_approx(&a, 0.5, &[(2, k.whole())], &tol).is_err());
    }
}
