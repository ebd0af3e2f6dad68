//! Task dispatch: each operation returns a pass flag, margins and witnesses.

use std::cmp::Ordering;

use crate::bounds::{ceil_env, floor_env};
use crate::error::{Error, Result};
use crate::extension::{extend_band, extend_envelopes, ExtendOptions};
use crate::homotopy::{
    connect_in_band, find_uniform_gap, flatten_spectrum, peel_trivial_summand, raise_min_rank, FieldPath, MatrixField,
};
use crate::matcalc::spectral_proj;
use crate::realize::{check_dimbound, profile_rows, realize_rank, verify_realization, RealizationReport};
use crate::rsh::{sdg_ratio, sqrt_trace_limit, RshElement};

use super::report::{profile_csv, Margin};
use super::scenario::{sample_function, FunctionDef, Scenario, TaskDef};

#[derive(Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub margins: Vec<Margin>,
    pub witnesses: Vec<String>,
    /// Rank profile CSV contents, when the operation produces one.
    pub csv: Option<String>,
}

impl Outcome {
    fn margin(&mut self, name: impl Into<String>, value: f64) {
        self.margins.push(Margin {
            name: name.into(),
            value,
        });
    }

    fn witness(&mut self, w: impl Into<String>) {
        self.witnesses.push(w.into());
    }
}

/// Short description of the statement each operation checks.
pub fn anchor(op: &str) -> &'static str {
    match op {
        "check_dimbound" => "dimension bound (eps/4)*n > 4*dim + 4 per stage",
        "validate_rsh" => "recursive subhomogeneous decomposition well-formedness",
        "realize" => "rank profile realization with (h - eta_l) <= rank/n <= h",
        "verify" => "pointwise accuracy |h - d_tau(b)| < eps and final bracketing",
        "d_tau" => "rank/n against the iterated square-root trace limit",
        "find_uniform_gap" => "uniform spectral gap below the lower rank bound",
        "flatten_spectrum" => "rank-preserving spectral flattening",
        "raise_min_rank" => "minimum-rank raising inside a rank band",
        "peel_trivial_summand" => "trivial projection peeled from a flattened field",
        "connect_in_band" => "homotopy between fields inside a rank band",
        "extend_band" => "extension from a closed subset inside a constant rank band",
        "extend_envelopes" => "extension between semicontinuous rank envelopes",
        "envelopes" => "grid-valued lower and upper semicontinuous envelopes",
        "sdg_ratio" => "slow dimension growth ratio",
        _ => "unknown operation",
    }
}

struct Args<'a> {
    task: &'a TaskDef,
}

impl<'a> Args<'a> {
    fn err(&self, msg: String) -> Error {
        Error::Scenario(format!("task {}: {msg}", self.task.id))
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        match self.task.args.get(key) {
            Some(toml::Value::String(s)) => Ok(s),
            Some(_) => Err(self.err(format!("argument {key} must be a string"))),
            None => Err(self.err(format!("missing argument {key}"))),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        match self.task.args.get(key) {
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(_) => Err(self.err(format!("argument {key} must be a number"))),
            None => Err(self.err(format!("missing argument {key}"))),
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.task.args.get(key) {
            None => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self.task.args.get(key) {
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
            Some(_) => Err(self.err(format!("argument {key} must be a nonnegative integer"))),
            None => Err(self.err(format!("missing argument {key}"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.task.args.get(key) {
            None => Ok(default),
            Some(_) => self.usize(key),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.task.args.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.err(format!("argument {key} must be a boolean"))),
        }
    }

    fn strings(&self, key: &str) -> Result<Vec<&'a str>> {
        match self.task.args.get(key) {
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().ok_or_else(|| self.err(format!("argument {key} must list strings"))))
                .collect(),
            Some(_) => Err(self.err(format!("argument {key} must be an array"))),
            None => Err(self.err(format!("missing argument {key}"))),
        }
    }

    fn function(&self, key: &str) -> Result<FunctionDef> {
        let v = self
            .task
            .args
            .get(key)
            .cloned()
            .ok_or_else(|| self.err(format!("missing argument {key}")))?;
        v.try_into().map_err(|e| self.err(format!("argument {key}: {e}")))
    }
}

pub fn run_task(s: &Scenario, task: &TaskDef, index: usize) -> Result<Outcome> {
    let a = Args { task };
    let tol = &s.tol;
    let seed = s.seed.wrapping_add(index as u64);
    let opts = || -> Result<ExtendOptions> {
        let d = ExtendOptions::default();
        Ok(ExtendOptions {
            shells: a.usize_or("shells", d.shells)?,
            steps: a.usize_or("steps", d.steps)?,
            seed,
            random_reference: a.bool_or("random_reference", d.random_reference)?,
        })
    };
    let mut out = Outcome::default();
    match task.op.as_str() {
        "check_dimbound" => {
            let r = s.decomposition(a.str("rsh")?)?;
            let rep = check_dimbound(r, a.f64("eps")?);
            for st in &rep.stages {
                out.margin(format!("stage {}", st.stage), st.margin);
                if !st.passed {
                    out.witness(format!("stage {}: {} <= {}", st.stage, st.lhs, st.rhs));
                }
            }
            out.passed = rep.passed();
        }
        "validate_rsh" => {
            let rep = s.decomposition(a.str("rsh")?)?.validate(tol);
            for c in rep.failures() {
                out.witness(format!("{}: {}", c.name, c.witness.as_deref().unwrap_or("")));
            }
            out.passed = rep.passed();
        }
        "realize" => {
            let (rname, t) = s.target(a.str("target")?)?;
            let r = s.decomposition(rname)?;
            let b = realize_rank(r, t, &opts()?, tol)?;
            let rep = verify_realization(r, &b, t, tol)?;
            record_verdicts(&mut out, &rep);
            out.csv = Some(profile_csv(&profile_rows(r, &b, t, tol)?));
        }
        "verify" => {
            let (rname, t) = s.target(a.str("target")?)?;
            let r = s.decomposition(rname)?;
            let b = match a.str("element")? {
                "zero" => RshElement::zero(r),
                "identity" => RshElement::identity(r),
                other => return Err(a.err(format!("unknown element {other}; use zero or identity"))),
            };
            record_verdicts(&mut out, &verify_realization(r, &b, t, tol)?);
        }
        "d_tau" => {
            let f = s.field(a.str("field")?)?;
            let ranks = f.ranks(tol);
            let mut worst: f64 = 0.0;
            for ((x, v), rank) in f.iter().zip(ranks) {
                let gap = (sqrt_trace_limit(v, 12, tol) - rank as f64 / f.n() as f64).abs();
                if gap > 2.0 * tol.rank {
                    out.witness(format!("point {x}: disagreement {gap:e}"));
                }
                worst = worst.max(gap);
            }
            out.margin("agreement", 2.0 * tol.rank - worst);
            out.passed = worst <= 2.0 * tol.rank;
        }
        "find_uniform_gap" => {
            let f = s.field(a.str("field")?)?;
            let g = s.bound(a.str("bound")?)?;
            let eta = find_uniform_gap(f, g, tol)?;
            out.margin("eta", eta);
            let mut slack = i64::MAX;
            for (x, v) in f.iter() {
                for cut in [eta, eta / 2.0, eta / 10.0] {
                    let rank = spectral_proj(v, cut, tol)?.eigh(tol).rank(tol) as i64;
                    let d = rank - g.eval(x)?;
                    if d < 0 {
                        out.witness(format!("point {x}: rank {rank} above {cut:e} is below the bound"));
                    }
                    slack = slack.min(d);
                }
            }
            out.margin("rank slack", slack as f64);
            out.passed = slack >= 0;
        }
        "flatten_spectrum" => {
            let f = s.field(a.str("field")?)?;
            let eta = match a.opt_f64("eta")? {
                Some(e) => e,
                None => find_uniform_gap(f, s.bound(a.str("bound")?)?, tol)?,
            };
            let p = flatten_spectrum(f, eta, a.usize_or("steps", 32)?, tol)?;
            let start = f.ranks(tol);
            let mut changed = 0;
            for (i, slice) in p.steps().iter().enumerate() {
                for ((x, r0), r) in f.points().iter().zip(&start).zip(slice.ranks(tol)) {
                    if *r0 != r {
                        changed += 1;
                        if changed <= 5 {
                            out.witness(format!("slice {i}, point {x}: rank {r0} became {r}"));
                        }
                    }
                }
            }
            out.margin("rank changes", -(changed as f64));
            out.passed = changed == 0 && p.start() == f;
            record_path(&mut out, &p, tol);
        }
        "raise_min_rank" => {
            let f = s.field(a.str("field")?)?;
            let (l, k) = (a.usize("l")?, a.usize("k")?);
            let p = raise_min_rank(f, l, k, a.usize_or("steps", 32)?, tol, seed)?;
            let target = l + f.space().dim();
            let low = p.end().ranks(tol).into_iter().min().unwrap_or(target);
            out.margin("end rank above l + dim", low as f64 - target as f64);
            out.passed = band_ok(&mut out, &p, l, k, tol) && low >= target && p.start() == f;
            record_path(&mut out, &p, tol);
        }
        "peel_trivial_summand" => {
            let f = s.field(a.str("field")?)?;
            let k = a.usize("k")?;
            let (path, p) = peel_trivial_summand(f, k, a.usize_or("steps", 32)?, tol, seed)?;
            let cert = p
                .iter()
                .map(|(x, px)| px.matmul(path.end().at(x)).sub(px.as_cmatrix()).max_abs())
                .fold(0.0, f64::max);
            let rank = p.ranks(tol).into_iter().min().unwrap_or(0);
            let want = k.saturating_sub(f.space().dim());
            out.margin("certificate", 1e-8 - cert);
            out.margin("summand rank", rank as f64 - want as f64);
            out.passed = cert <= 1e-8 && rank >= want && path.start() == f;
            record_path(&mut out, &path, tol);
        }
        "connect_in_band" => {
            let f = s.field(a.str("from")?)?;
            let g = s.field(a.str("to")?)?;
            let (l, k) = (a.usize("l")?, a.usize("k")?);
            let p = connect_in_band(f, g, l, k, a.usize_or("steps", 32)?, tol, seed)?;
            out.passed = band_ok(&mut out, &p, l, k, tol) && p.start() == f && p.end() == g;
            record_path(&mut out, &p, tol);
        }
        "extend_band" => {
            let f = s.field(a.str("field")?)?;
            let (l, k) = (a.usize("l")?, a.usize("k")?);
            let e = extend_band(f, l, k, &opts()?, tol)?;
            let exact = restriction_exact(&mut out, f, &e);
            let ranks = e.ranks(tol);
            let lo = ranks.iter().map(|&r| r as f64 - l as f64).fold(f64::INFINITY, f64::min);
            let hi = ranks.iter().map(|&r| k as f64 - r as f64).fold(f64::INFINITY, f64::min);
            out.margin("lower band", lo);
            out.margin("upper band", hi);
            out.passed = exact && lo >= 0.0 && hi >= 0.0;
        }
        "extend_envelopes" => {
            let f = s.field(a.str("field")?)?;
            let upper = s.bound(a.str("upper")?)?;
            let lower = s.bound(a.str("lower")?)?;
            let e = extend_envelopes(f, upper, lower, &opts()?, tol)?;
            let exact = restriction_exact(&mut out, f, &e);
            let (mut lo, mut hi) = (i64::MAX, i64::MAX);
            for (x, r) in e.ranks(tol).into_iter().enumerate() {
                lo = lo.min(r as i64 - lower.eval(x)?);
                hi = hi.min(upper.eval(x)? - r as i64);
            }
            out.margin("lower band", lo as f64);
            out.margin("upper band", hi as f64);
            out.passed = exact && lo >= 0 && hi >= 0;
        }
        "envelopes" => {
            let sp = s.space(a.str("space")?)?;
            let alpha = sample_function(&a.function("alpha")?, sp)?;
            let n = a.usize("n")? as u64;
            let lo = floor_env(&alpha, n)?;
            let hi = ceil_env(&alpha, n)?;
            let (mut below, mut above) = (f64::INFINITY, f64::INFINITY);
            let mut ok = true;
            for (x, &v) in alpha.iter().enumerate() {
                let (kl, kh) = (lo.numerator(x), hi.numerator(x));
                let lower_ok = cmp_scaled(v, n, kl).is_gt() && cmp_scaled(v, n, kl + 1).is_le();
                let upper_ok = cmp_scaled(v, n, kh - 1).is_ge() && cmp_scaled(v, n, kh).is_lt();
                if !(lower_ok && upper_ok) {
                    ok = false;
                    out.witness(format!("point {x}: alpha = {v}, envelopes {kl}/{n} and {kh}/{n}"));
                }
                below = below.min(v - kl as f64 / n as f64);
                above = above.min(kh as f64 / n as f64 - v);
            }
            out.margin("alpha - lower", below);
            out.margin("upper - alpha", above);
            out.passed = ok;
        }
        "sdg_ratio" => {
            let models = a
                .strings("rsh")?
                .into_iter()
                .map(|n| s.decomposition(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            let rep = sdg_ratio(&models)?;
            for (i, (r, t)) in rep.ratios.iter().zip(&rep.tail_max).enumerate() {
                out.margin(format!("ratio {i}"), *r);
                out.margin(format!("tail max {i}"), *t);
            }
            out.passed = match a.opt_f64("below")? {
                Some(limit) => rep.tail_max.last().is_some_and(|&t| t < limit),
                None => true,
            };
        }
        other => return Err(a.err(format!("unknown operation {other}"))),
    }
    Ok(out)
}

/// Exact comparison of `x * n` with the integer `k`: the rounded product and
/// its `mul_add` residual represent `x * n` without error.
fn cmp_scaled(x: f64, n: u64, k: i64) -> Ordering {
    let nf = n as f64;
    let p = x * nf;
    let k = k as f64;
    match p.partial_cmp(&k).expect("finite envelope input") {
        Ordering::Equal => x.mul_add(nf, -p).partial_cmp(&0.0).expect("finite residual"),
        o => o,
    }
}

fn record_verdicts(out: &mut Outcome, rep: &RealizationReport) {
    for v in &rep.stages {
        out.margin(format!("stage {} accuracy", v.stage), v.trace_margin);
        out.margin(format!("stage {} lower bracket", v.stage), v.lower_margin);
        out.margin(format!("stage {} upper bracket", v.stage), v.upper_margin);
        out.margin(format!("stage {} d_tau agreement", v.stage), rep.dtau_tolerance - v.dtau_disagreement);
        for (what, m, w) in [
            ("accuracy", v.trace_margin, v.trace_witness),
            ("lower bracket", v.lower_margin, v.lower_witness),
            ("upper bracket", v.upper_margin, v.upper_witness),
        ] {
            let bad = if what == "accuracy" { m <= 0.0 } else { m < 0.0 };
            if bad {
                out.witness(format!("stage {} point {}: {what} margin {m}", v.stage, w.unwrap_or(0)));
            }
        }
    }
    out.passed = rep.passed();
}

fn band_ok(out: &mut Outcome, p: &FieldPath, l: usize, k: usize, tol: &crate::Tolerances) -> bool {
    match p.check_band(l as i64, k as i64, tol) {
        Ok(()) => true,
        Err(e) => {
            out.witness(e.to_string());
            false
        }
    }
}

fn record_path(out: &mut Outcome, p: &FieldPath, tol: &crate::Tolerances) {
    out.margin("time steps", p.len() as f64);
    out.margin("step gap slack", p.path_tol(tol) - p.step_gap(tol));
}

fn restriction_exact(out: &mut Outcome, a: &MatrixField, e: &MatrixField) -> bool {
    let exact = a.iter().all(|(x, v)| e.get(x) == Some(v));
    if !exact {
        out.witness("extension changes the given values".to_string());
    }
    exact
}
