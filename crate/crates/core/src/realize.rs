//! Realizing a strictly positive target profile as the rank profile
//! `x ↦ rank(b_k(x)) / n(k)` of an element of an RSH model.

use serde::Serialize;

use crate::bounds::{ceil_env, discretize_to_chain, floor_env, BoundChain};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::extension::{extend_envelopes, ExtendOptions};
use crate::homotopy::MatrixField;
use crate::rsh::{clutch_pushforward, richardson, sequence_from, RshDecomposition, RshElement};

/// Per-stage sampled target values with an accuracy and a tolerance chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetProfile {
    h: Vec<Vec<f64>>,
    eps: f64,
    deltas: Vec<f64>,
    etas: Vec<f64>,
}

impl TargetProfile {
    /// Default schedule: `δ_0 = 3ε/4` and `δ_j = ε/(8l)` for `1 <= j <= l`.
    pub fn new(r: &RshDecomposition, h: Vec<Vec<f64>>, eps: f64, tol: &Tolerances) -> Result<Self> {
        let l = r.len().saturating_sub(1);
        let mut deltas = vec![0.75 * eps];
        deltas.extend(std::iter::repeat_n(eps / (8.0 * l.max(1) as f64), l));
        Self::with_deltas(r, h, eps, deltas, tol)
    }

    pub fn with_deltas(r: &RshDecomposition, h: Vec<Vec<f64>>, eps: f64, deltas: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if h.len() != r.len() || deltas.len() != r.len() {
            return Err(Error::Dimension {
                expected: r.len(),
                got: if h.len() != r.len() { h.len() } else { deltas.len() },
            });
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid(format!("accuracy {eps} must be positive")));
        }
        if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("tolerances must be strictly positive"));
        }
        if deltas[0] < 0.75 * eps {
            return Err(Error::invalid(format!("first tolerance {} is below 3ε/4 = {}", deltas[0], 0.75 * eps)));
        }
        let total: f64 = deltas.iter().sum();
        if total >= eps {
            return Err(Error::invalid(format!("tolerances sum to {total}, which is not below ε = {eps}")));
        }
        let mut sup: f64 = 0.0;
        for (k, (hk, st)) in h.iter().zip(r.stages()).enumerate() {
            if hk.len() != st.space.num_vertices() {
                return Err(Error::invalid(format!(
                    "stage {k} target has {} samples for {} points",
                    hk.len(),
                    st.space.num_vertices()
                )));
            }
            if let Some(x) = hk.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid(format!("stage {k} target is not strictly positive at point {x}")));
            }
            if let Some(x) = hk.iter().position(|v| *v > 1.0) {
                return Err(Error::invalid(format!("stage {k} target exceeds 1 at point {x}")));
            }
            sup = hk.iter().copied().fold(sup, f64::max);
        }
        if eps >= sup {
            return Err(Error::invalid(format!("accuracy {eps} must be below the target norm {sup}")));
        }
        for (k, st) in r.stages().iter().enumerate() {
            for (&y, e) in &st.clutch {
                let mut want = 0.0;
                for c in &e.refs {
                    let n = r.stage(c.stage)?.size as f64;
                    let v = h.get(c.stage).and_then(|v| v.get(c.point)).copied().ok_or_else(|| {
                        Error::invalid(format!("clutch at stage {k} point {y} references a missing sample"))
                    })?;
                    want += c.multiplicity as f64 * n * v;
                }
                want /= st.size as f64;
                if (want - h[k][y]).abs() > 10.0 * tol.herm {
                    return Err(Error::invalid(format!(
                        "stage {k} target {} at boundary point {y} disagrees with its clutching value {want}",
                        h[k][y]
                    )));
                }
            }
        }
        let etas = deltas
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        Ok(Self { h, eps, deltas, etas })
    }

    pub fn h(&self, k: usize) -> &[f64] {
        &self.h[k]
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Partial sums of the tolerances.
    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn eta_final(&self) -> f64 {
        *self.etas.last().expect("at least one stage")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimboundStage {
    pub stage: usize,
    pub n: usize,
    pub dim: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimboundReport {
    pub eps: f64,
    pub stages: Vec<DimboundStage>,
}

impl DimboundReport {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }
}

/// `(ε/4)·n(j) > 4·dim(X_j) + 4` at every stage.
pub fn check_dimbound(r: &RshDecomposition, eps: f64) -> DimboundReport {
    let stages = r
        .stages()
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let dim = st.space.dim();
            let lhs = eps / 4.0 * st.size as f64;
            let rhs = 4.0 * dim as f64 + 4.0;
            DimboundStage {
                stage: k,
                n: st.size,
                dim,
                lhs,
                rhs,
                margin: lhs - rhs,
                passed: lhs > rhs,
            }
        })
        .collect();
    DimboundReport { eps, stages }
}

/// Rank bounds for stage `k`: lower chain from `ceil_env(h - η_k)`, upper
/// chain from `floor_env(h)`.
pub fn stage_bounds(r: &RshDecomposition, t: &TargetProfile, k: usize) -> Result<(BoundChain, BoundChain)> {
    let st = r.stage(k)?;
    let n = st.size as u64;
    let lowered: Vec<f64> = t.h(k).iter().map(|v| v - t.etas[k]).collect();
    let g = discretize_to_chain(&ceil_env(&lowered, n)?, &st.space)?;
    let f = discretize_to_chain(&floor_env(t.h(k), n)?, &st.space)?;
    Ok((f, g))
}

pub fn realize_rank(r: &RshDecomposition, t: &TargetProfile, opts: &ExtendOptions, tol: &Tolerances) -> Result<RshElement> {
    let rep = r.validate(tol);
    if let Some(c) = rep.failures().next() {
        return Err(Error::invalid(format!(
            "decomposition check '{}' failed: {}",
            c.name,
            c.witness.as_deref().unwrap_or("")
        )));
    }
    let db = check_dimbound(r, t.eps);
    if let Some(s) = db.stages.iter().find(|s| !s.passed) {
        return Err(Error::invalid(format!(
            "stage {} has (ε/4)·n = {} which does not exceed 4·dim + 4 = {}",
            s.stage, s.lhs, s.rhs
        )));
    }
    if t.h.iter().all(|hk| hk.iter().all(|&v| v >= 1.0)) {
        return Ok(RshElement::identity(r));
    }

    let mut fields: Vec<MatrixField> = Vec::with_capacity(r.len());
    for (k, st) in r.stages().iter().enumerate() {
        let label = format!("stage {k}");
        let (f, g) = stage_bounds(r, t, k).map_err(|e| e.in_stage(label.clone()))?;
        let dim = st.space.dim() as i64;
        for x in 0..st.space.num_vertices() {
            let slack = f.eval(x)? - g.eval(x)?;
            if slack <= 4 * dim {
                return Err(Error::rank(x, format!("envelope slack {slack} does not exceed 4·dim = {}", 4 * dim))
                    .in_stage(label));
            }
        }
        let start = if k == 0 {
            MatrixField::empty(st.space.clone(), st.size)
        } else {
            let pushed = clutch_pushforward(r, &fields, k).map_err(|e| e.in_stage(label.clone()))?;
            for ((y, _), rank) in pushed.iter().zip(pushed.ranks(tol)) {
                let (lo, hi) = (g.eval(y)?, f.eval(y)?);
                if (rank as i64) < lo || (rank as i64) > hi {
                    return Err(
                        Error::rank(y, format!("boundary rank {rank} lies outside [{lo}, {hi}]")).in_stage(label)
                    );
                }
            }
            pushed
        };
        let stage_opts = ExtendOptions {
            seed: opts.seed.wrapping_add(k as u64),
            ..opts.clone()
        };
        let b = extend_envelopes(&start, &f, &g, &stage_opts, tol).map_err(|e| e.in_stage(label.clone()))?;
        let n = st.size as f64;
        for (x, rank) in b.ranks(tol).into_iter().enumerate() {
            let ratio = rank as f64 / n;
            let hx = t.h(k)[x];
            if ratio > hx || ratio < hx - t.etas[k] {
                return Err(Error::rank(
                    x,
                    format!("rank ratio {ratio} leaves [{}, {hx}]", hx - t.etas[k]),
                )
                .in_stage(label));
            }
        }
        fields.push(b);
    }
    let b = RshElement { fields };
    b.validate(r, tol)?;
    Ok(b)
}

/// Worst margins at one stage; a negative margin marks a violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageVerdict {
    pub stage: usize,
    /// `min (ε - |h - d_τ|)` over trace samples and the point attaining it.
    pub trace_margin: f64,
    pub trace_witness: Option<usize>,
    /// `min (rank/n - (h - η_l))`.
    pub lower_margin: f64,
    pub lower_witness: Option<usize>,
    /// `min (h - rank/n)`.
    pub upper_margin: f64,
    pub upper_witness: Option<usize>,
    /// Largest `|rank/n - limit of τ(b^{1/2^m})|` over trace samples.
    pub dtau_disagreement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealizationReport {
    pub stages: Vec<StageVerdict>,
    pub dtau_tolerance: f64,
}

impl RealizationReport {
    pub fn bracket_passed(&self) -> bool {
        self.stages.iter().all(|s| s.trace_margin > 0.0 && s.lower_margin >= 0.0 && s.upper_margin >= 0.0)
    }

    pub fn dtau_passed(&self) -> bool {
        self.stages.iter().all(|s| s.dtau_disagreement <= self.dtau_tolerance)
    }

    pub fn passed(&self) -> bool {
        self.bracket_passed() && self.dtau_passed()
    }
}

/// One CSV row of a rank profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub stage: usize,
    pub point: usize,
    pub coords: Vec<f64>,
    pub n: usize,
    pub rank: usize,
    pub ratio: f64,
    pub h: f64,
    /// `min(rank/n - (h - η_l), h - rank/n)`.
    pub margin: f64,
}

/// Pointwise rank data, with the square-root trace limit at trace samples.
fn pointwise(r: &RshDecomposition, b: &RshElement, t: &TargetProfile, tol: &Tolerances) -> Result<Vec<(ProfileRow, Option<f64>)>> {
    if b.fields.len() != r.len() {
        return Err(Error::Dimension {
            expected: r.len(),
            got: b.fields.len(),
        });
    }
    let eta = t.eta_final();
    let mut out = Vec::new();
    for (k, (st, f)) in r.stages().iter().zip(&b.fields).enumerate() {
        for x in 0..st.space.num_vertices() {
            let v = f
                .get(x)
                .ok_or_else(|| Error::invalid(format!("element has no value at stage {k} point {x}")))?;
            let e = v.eigh(tol);
            let rank = e.rank(tol);
            let ratio = rank as f64 / st.size as f64;
            let h = t.h(k)[x];
            let limit = (!st.boundary.contains_vertex(x)).then(|| richardson(&sequence_from(&e, st.size, 12, tol)));
            out.push((
                ProfileRow {
                    stage: k,
                    point: x,
                    coords: st.space.vertex(x).to_vec(),
                    n: st.size,
                    rank,
                    ratio,
                    h,
                    margin: (ratio - (h - eta)).min(h - ratio),
                },
                limit,
            ));
        }
    }
    Ok(out)
}

pub fn profile_rows(r: &RshDecomposition, b: &RshElement, t: &TargetProfile, tol: &Tolerances) -> Result<Vec<ProfileRow>> {
    Ok(pointwise(r, b, t, tol)?.into_iter().map(|(row, _)| row).collect())
}

/// Exhaustive pointwise check of the accuracy and bracketing conclusions.
pub fn verify_realization(r: &RshDecomposition, b: &RshElement, t: &TargetProfile, tol: &Tolerances) -> Result<RealizationReport> {
    let eta = t.eta_final();
    let mut stages: Vec<StageVerdict> = (0..r.len())
        .map(|k| StageVerdict {
            stage: k,
            trace_margin: f64::INFINITY,
            trace_witness: None,
            lower_margin: f64::INFINITY,
            lower_witness: None,
            upper_margin: f64::INFINITY,
            upper_witness: None,
            dtau_disagreement: 0.0,
        })
        .collect();
    for (row, limit) in pointwise(r, b, t, tol)? {
        let s = &mut stages[row.stage];
        let lower = row.ratio - (row.h - eta);
        if lower < s.lower_margin {
            s.lower_margin = lower;
            s.lower_witness = Some(row.point);
        }
        let upper = row.h - row.ratio;
        if upper < s.upper_margin {
            s.upper_margin = upper;
            s.upper_witness = Some(row.point);
        }
        if let Some(limit) = limit {
            let tm = t.eps - (row.h - row.ratio).abs();
            if tm < s.trace_margin {
                s.trace_margin = tm;
                s.trace_witness = Some(row.point);
            }
            s.dtau_disagreement = s.dtau_disagreement.max((limit - row.ratio).abs());
        }
    }
    Ok(RealizationReport {
        stages,
        dtau_tolerance: 2.0 * tol.rank,
    })
}
