//! Recursive subhomogeneous algebras as iterated pullbacks of matrix-valued
//! function algebras, with clutching maps in block-diagonal normal form.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::homotopy::MatrixField;
use crate::matcalc::{CMatrix, Eigh, HermMatrix};
use crate::space::{SampledSpace, Subcomplex};

/// One diagonal block of a clutching value: evaluation of stage `stage` at
/// sample point `point`, repeated `multiplicity` times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClutchRef {
    pub stage: usize,
    pub point: usize,
    pub multiplicity: usize,
}

/// Clutching datum at one boundary point: blocks plus an optional unitary
/// (identity when absent).
#[derive(Clone, Debug, PartialEq)]
pub struct ClutchEntry {
    pub refs: Vec<ClutchRef>,
    pub unitary: Option<CMatrix>,
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub space: Arc<SampledSpace>,
    pub size: usize,
    pub boundary: Subcomplex,
    /// Keyed by boundary sample point.
    pub clutch: BTreeMap<usize, ClutchEntry>,
}

#[derive(Clone, Debug)]
pub struct RshDecomposition {
    stages: Vec<Stage>,
    /// Largest allowed change of clutch data across a boundary edge.
    pub variation_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, witness: Option<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed: witness.is_none(),
            witness,
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl RshDecomposition {
    pub fn new(stages: Vec<Stage>) -> Self {
        Self {
            stages,
            variation_tol: 1.0,
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [Stage] {
        &mut self.stages
    }

    pub fn stage(&self, k: usize) -> Result<&Stage> {
        self.stages
            .get(k)
            .ok_or_else(|| Error::invalid(format!("stage {k} does not exist ({} stages)", self.stages.len())))
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Check block fit, unitarity, edgewise variation and the empty base boundary.
    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let mut rep = ValidationReport::default();
        if self.stages.is_empty() {
            rep.push("nonempty", Some("decomposition has no stages".into()));
            return rep;
        }
        rep.push(
            "stage 0 boundary empty",
            (!self.stages[0].boundary.is_empty()).then(|| "stage 0 has boundary points".to_string()),
        );
        for (k, st) in self.stages.iter().enumerate() {
            rep.push(
                format!("stage {k} boundary closed"),
                (!st.boundary.is_closed_in(&st.space)).then(|| "boundary is not a subcomplex".to_string()),
            );
            let bverts: Vec<usize> = st.boundary.vertices().iter().copied().collect();
            let keys: Vec<usize> = st.clutch.keys().copied().collect();
            rep.push(
                format!("stage {k} clutch covers boundary"),
                (bverts != keys).then(|| format!("boundary points {bverts:?} but clutch entries at {keys:?}")),
            );
            let mut fit = None;
            let mut unit = None;
            let mut refs_ok = None;
            for (&y, e) in &st.clutch {
                let mut total = 0;
                for r in &e.refs {
                    if r.stage >= k {
                        refs_ok.get_or_insert(format!("point {y} references stage {} >= {k}", r.stage));
                        continue;
                    }
                    if r.point >= self.stages[r.stage].space.num_vertices() {
                        refs_ok.get_or_insert(format!("point {y} references missing point {} of stage {}", r.point, r.stage));
                        continue;
                    }
                    total += r.multiplicity * self.stages[r.stage].size;
                }
                if total != st.size {
                    fit.get_or_insert(format!("point {y}: blocks fill {total} of {}", st.size));
                }
                if let Some(u) = &e.unitary {
                    let defect = if u.rows() != st.size || u.cols() != st.size {
                        f64::INFINITY
                    } else {
                        u.adjoint().matmul(u).sub(&CMatrix::identity(st.size)).max_abs()
                    };
                    if defect > 10.0 * tol.herm {
                        unit.get_or_insert(format!("point {y}: unitarity defect {defect:.3e}"));
                    }
                }
            }
            rep.push(format!("stage {k} references"), refs_ok);
            rep.push(format!("stage {k} block fit"), fit);
            rep.push(format!("stage {k} unitary"), unit);
            rep.push(format!("stage {k} clutch variation"), self.variation_witness(k));
        }
        rep
    }

    fn variation_witness(&self, k: usize) -> Option<String> {
        let st = &self.stages[k];
        for &(u, v) in st.space.edges() {
            let (Some(eu), Some(ev)) = (st.clutch.get(&u), st.clutch.get(&v)) else {
                continue;
            };
            if eu.refs.len() != ev.refs.len()
                || eu
                    .refs
                    .iter()
                    .zip(&ev.refs)
                    .any(|(a, b)| a.stage != b.stage || a.multiplicity != b.multiplicity)
            {
                return Some(format!("block structure changes along edge {u}-{v}"));
            }
            let moved: f64 = eu
                .refs
                .iter()
                .zip(&ev.refs)
                .map(|(a, b)| self.stages[a.stage].space.distance(a.point, b.point))
                .sum();
            let du = match (&eu.unitary, &ev.unitary) {
                (None, None) => 0.0,
                (a, b) => {
                    let id = CMatrix::identity(st.size);
                    a.as_ref().unwrap_or(&id).sub(b.as_ref().unwrap_or(&id)).max_abs()
                }
            };
            if moved + du > self.variation_tol {
                return Some(format!("clutch data varies by {:.3} along edge {u}-{v}", moved + du));
            }
        }
        None
    }

    pub fn trace_samples(&self) -> Vec<TraceSample> {
        self.stages
            .iter()
            .enumerate()
            .flat_map(|(k, st)| {
                (0..st.space.num_vertices())
                    .filter(|x| !st.boundary.contains_vertex(*x))
                    .map(move |x| TraceSample { stage: k, point: x })
            })
            .collect()
    }

    /// The first `k + 1` stages.
    pub fn truncate(&self, k: usize) -> Result<RshDecomposition> {
        self.stage(k)?;
        Ok(Self {
            stages: self.stages[..=k].to_vec(),
            variation_tol: self.variation_tol,
        })
    }
}

/// An extreme trace: normalized trace of evaluation at a non-boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TraceSample {
    pub stage: usize,
    pub point: usize,
}

/// Element of the pullback algebra: one full matrix field per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct RshElement {
    pub fields: Vec<MatrixField>,
}

impl RshElement {
    pub fn identity(r: &RshDecomposition) -> Self {
        Self::constant(r, HermMatrix::identity)
    }

    pub fn zero(r: &RshDecomposition) -> Self {
        Self::constant(r, HermMatrix::zeros)
    }

    fn constant(r: &RshDecomposition, m: impl Fn(usize) -> HermMatrix) -> Self {
        let fields = r
            .stages
            .iter()
            .map(|st| {
                let pts: Vec<usize> = (0..st.space.num_vertices()).collect();
                MatrixField::constant(st.space.clone(), pts, m(st.size)).expect("well-formed constant field")
            })
            .collect();
        Self { fields }
    }

    /// Shapes plus compatibility with the clutching at every boundary point.
    pub fn validate(&self, r: &RshDecomposition, tol: &Tolerances) -> Result<()> {
        if self.fields.len() != r.len() {
            return Err(Error::Dimension {
                expected: r.len(),
                got: self.fields.len(),
            });
        }
        for (k, (f, st)) in self.fields.iter().zip(&r.stages).enumerate() {
            if f.n() != st.size || f.len() != st.space.num_vertices() {
                return Err(Error::invalid(format!("stage {k} field has the wrong shape")));
            }
            if k > 0 {
                let pushed = clutch_pushforward(r, &self.fields[..k], k)?;
                for (y, v) in pushed.iter() {
                    let dev = v.sub(f.at(y)).max_abs();
                    if dev > 10.0 * tol.herm {
                        return Err(Error::rank(y, format!("stage {k} value departs from its clutching by {dev:.3e}")));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn eval_at(a: &RshElement, k: usize, x: usize) -> Result<HermMatrix> {
    let f = a
        .fields
        .get(k)
        .ok_or_else(|| Error::invalid(format!("stage {k} does not exist")))?;
    f.get(x)
        .cloned()
        .ok_or_else(|| Error::invalid(format!("sample point {x} is not in stage {k}")))
}

/// Image in the `k`-th stage algebra.
pub fn restrict(r: &RshDecomposition, a: &RshElement, k: usize) -> Result<(RshDecomposition, RshElement)> {
    let rk = r.truncate(k)?;
    if a.fields.len() <= k {
        return Err(Error::invalid(format!("element has no stage {k}")));
    }
    Ok((
        rk,
        RshElement {
            fields: a.fields[..=k].to_vec(),
        },
    ))
}

/// Boundary values `u(y) · blockdiag(evaluations) · u(y)*` of stage `next`
/// computed from the fields of the earlier stages.
pub fn clutch_pushforward(r: &RshDecomposition, partial: &[MatrixField], next: usize) -> Result<MatrixField> {
    let st = r.stage(next)?;
    let pts: Vec<usize> = st.boundary.vertices().iter().copied().collect();
    let mut vals = Vec::with_capacity(pts.len());
    for &y in &pts {
        let e = st
            .clutch
            .get(&y)
            .ok_or_else(|| Error::invalid(format!("stage {next} has no clutch entry at {y}")))?;
        let mut blocks: Vec<&HermMatrix> = Vec::new();
        for c in &e.refs {
            let f = partial.get(c.stage).ok_or_else(|| {
                Error::invalid(format!("clutch at {y} references stage {} beyond the given data", c.stage))
            })?;
            let v = f
                .get(c.point)
                .ok_or_else(|| Error::invalid(format!("stage {} has no value at {}", c.stage, c.point)))?;
            for _ in 0..c.multiplicity {
                blocks.push(v);
            }
        }
        let bd = HermMatrix::block_diag(&blocks);
        if bd.n() != st.size {
            return Err(Error::Dimension {
                expected: st.size,
                got: bd.n(),
            });
        }
        vals.push(match &e.unitary {
            Some(u) => bd.conjugate(u),
            None => bd,
        });
    }
    Ok(MatrixField::unchecked(st.space.clone(), pts, vals).into_sized(st.size))
}

/// `rank(a_k(x)) / n(k)` at an extreme trace.
pub fn d_tau(r: &RshDecomposition, a: &RshElement, t: TraceSample, tol: &Tolerances) -> Result<f64> {
    let st = r.stage(t.stage)?;
    if st.boundary.contains_vertex(t.point) {
        return Err(Error::invalid(format!("point {} is a boundary point of stage {}", t.point, t.stage)));
    }
    let v = eval_at(a, t.stage, t.point)?;
    let e = v.eigh(tol);
    if e.min() < -tol.psd * e.norm().max(1.0) {
        return Err(Error::NotPositive { min_eig: e.min() });
    }
    Ok(e.rank(tol) as f64 / st.size as f64)
}

/// Rank-based value next to the extrapolated limit of `τ(a^{1/2^m})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DTauCheck {
    pub rank_ratio: f64,
    pub limit: f64,
    pub agrees: bool,
}

/// [`d_tau`] cross-checked against the iterated square-root limit.
pub fn d_tau_checked(r: &RshDecomposition, a: &RshElement, t: TraceSample, tol: &Tolerances) -> Result<DTauCheck> {
    let rank_ratio = d_tau(r, a, t, tol)?;
    let limit = sqrt_trace_limit(&eval_at(a, t.stage, t.point)?, 12, tol);
    Ok(DTauCheck {
        rank_ratio,
        limit,
        agrees: (limit - rank_ratio).abs() <= 2.0 * tol.rank,
    })
}

/// Normalized traces `τ(a^{1/2^i})` for `i = 0..=m`, with eigenvalues at or
/// below `noise_floor · ‖a‖` treated as zero.
pub fn sqrt_trace_sequence(a: &HermMatrix, m: usize, tol: &Tolerances) -> Vec<f64> {
    sequence_from(&a.eigh(tol), a.n(), m, tol)
}

pub(crate) fn sequence_from(e: &Eigh, n: usize, m: usize, tol: &Tolerances) -> Vec<f64> {
    let norm = e.norm();
    let floor = tol.noise_floor * norm;
    let vals: Vec<f64> = e
        .values()
        .into_iter()
        .map(|l| if l > floor && norm > 0.0 { l / norm } else { 0.0 })
        .collect();
    let n = n.max(1) as f64;
    (0..=m)
        .map(|i| {
            let p = 0.5f64.powi(i as i32);
            vals.iter().map(|&l| if l > 0.0 { l.powf(p) } else { 0.0 }).sum::<f64>() / n
        })
        .collect()
}

/// Richardson extrapolation (ratio 2) of [`sqrt_trace_sequence`].
///
/// The spectrum is normalized first; this leaves the limit unchanged.
pub fn sqrt_trace_limit(a: &HermMatrix, m: usize, tol: &Tolerances) -> f64 {
    richardson(&sqrt_trace_sequence(a, m, tol))
}

pub(crate) fn richardson(seq: &[f64]) -> f64 {
    const DEPTH: usize = 8;
    let mut row: Vec<f64> = seq.to_vec();
    let mut factor = 1.0;
    for _ in 0..DEPTH.min(seq.len().saturating_sub(1)) {
        factor *= 2.0;
        row = row.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
    }
    *row.last().expect("nonempty sequence")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdgReport {
    /// `max_j dim(X_j) / n(j)` for each algebra.
    pub ratios: Vec<f64>,
    /// `max_{i' >= i} ratio_{i'}`, the finite-length stand-in for the limsup.
    pub tail_max: Vec<f64>,
}

pub fn sdg_ratio(system: &[RshDecomposition]) -> Result<SdgReport> {
    if system.is_empty() {
        return Err(Error::invalid("slow dimension growth needs at least one algebra"));
    }
    let ratios: Vec<f64> = system
        .iter()
        .map(|r| {
            r.stages
                .iter()
                .map(|s| s.space.dim() as f64 / s.size as f64)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut tail_max = ratios.clone();
    for i in (0..tail_max.len().saturating_sub(1)).rev() {
        tail_max[i] = tail_max[i].max(tail_max[i + 1]);
    }
    Ok(SdgReport { ratios, tail_max })
}
