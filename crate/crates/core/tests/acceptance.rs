//! Acceptance run: one PASS/FAIL line per criterion, all tolerances pinned.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{count_above, oracle_rank, rng, rotating_field};
use rand::Rng;
use rsh_rank::bounds::{ceil_env, discretize_to_chain, floor_env, BoundChain, BoundKind, GridFunction, Semicontinuity};
use rsh_rank::cli::run_scenario;
use rsh_rank::extension::{extend_band, extend_envelopes, extend_local, ExtendOptions};
use rsh_rank::homotopy::{
    connect_in_band, find_uniform_gap, flatten_spectrum, peel_trivial_summand, raise_min_rank, FieldPath, MatrixField,
};
use rsh_rank::matcalc::{spectral_proj, HermMatrix};
use rsh_rank::realize::{check_dimbound, realize_rank, verify_realization};
use rsh_rank::rsh::{d_tau, d_tau_checked, RshDecomposition, RshElement, Stage};
use rsh_rank::space::SampledSpace;
use rsh_rank::Tolerances;

/// Dyadic resolution for envelope inputs; `p / 2^20` times `n <= 10` is exact.
const DYADIC: f64 = (1u64 << 20) as f64;
const PEEL_CERTIFICATE: f64 = 1e-8;
const PATH_STEPS: usize = 32;

struct Verdict {
    passed: bool,
    detail: String,
}

fn report(id: usize, name: &str, start: Instant, limit: Duration, v: Verdict) -> bool {
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let ok = v.passed && in_time;
    println!(
        "criterion {id} [{name}]: {} ({}; {:.2}s of {}s allowed)",
        if ok { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn envelope_spaces() -> Vec<SampledSpace> {
    vec![
        SampledSpace::interval(0.0, 1.0, 4).unwrap().subdivide(2),
        SampledSpace::standard_simplex(2).subdivide(2),
    ]
}

/// Exact check with `alpha = p / 2^20`: `k_lo/n < alpha <= (k_lo+1)/n` and
/// `k_hi/n - 1/n <= alpha < k_hi/n`, compared as integers.
fn criterion_envelopes() -> Verdict {
    let mut r = rng(101);
    let mut checked = 0usize;
    let mut bad = Vec::new();
    let specials = [0.0, 0.5, 1.0, 0.25];
    for space in envelope_spaces() {
        for trial in 0..50 {
            let alpha: Vec<f64> = (0..space.num_vertices())
                .map(|i| {
                    if i < specials.len() && trial % 5 == 0 {
                        specials[i]
                    } else {
                        r.random_range(0..=(1u64 << 20)) as f64 / DYADIC
                    }
                })
                .collect();
            for n in [3u64, 10] {
                let lo = floor_env(&alpha, n).unwrap();
                let hi = ceil_env(&alpha, n).unwrap();
                for (x, &a) in alpha.iter().enumerate() {
                    let p = (a * DYADIC) as i128;
                    let d = DYADIC as i128;
                    let an = p * n as i128;
                    let (kl, kh) = (lo.numerator(x) as i128, hi.numerator(x) as i128);
                    let lower_ok = kl * d < an && an <= (kl + 1) * d;
                    let upper_ok = (kh - 1) * d <= an && an < kh * d;
                    checked += 1;
                    if !(lower_ok && upper_ok) {
                        bad.push(format!("alpha={a}, n={n}: {kl}/{n}, {kh}/{n}"));
                    }
                }
                for _ in 0..20 {
                    let f: Vec<i64> = alpha
                        .iter()
                        .map(|&a| {
                            let least = ((a * DYADIC) as i128 * n as i128).div_euclid(DYADIC as i128)
                                + i128::from((a * DYADIC) as i128 * n as i128 % DYADIC as i128 != 0);
                            r.random_range(least as i64..=n as i64)
                        })
                        .collect();
                    let f = GridFunction::new(n, f, Semicontinuity::None).unwrap();
                    for delta in [0.01, 0.1] {
                        let shifted: Vec<f64> = alpha.iter().map(|a| a - delta).collect();
                        let g = ceil_env(&shifted, n).unwrap();
                        for x in 0..alpha.len() {
                            checked += 1;
                            if f.numerator(x) < g.numerator(x) {
                                bad.push(format!("f below ceil_env(alpha - {delta}) at {x}"));
                            }
                        }
                    }
                }
            }
        }
    }
    Verdict {
        passed: bad.is_empty(),
        detail: format!("{checked} exact comparisons, {} violations {:?}", bad.len(), bad.first()),
    }
}

/// Spectrum `max(0, c_i + s_i (x0 - x1))`, with entries under 0.02 zeroed.
fn constructed_field(space: &Arc<SampledSpace>, n: usize, seed: u64) -> MatrixField {
    let mut r = rng(seed);
    let coeffs: Vec<(f64, f64)> = (0..n).map(|_| (r.random_range(-0.5..1.0), r.random_range(-1.0..1.0))).collect();
    rotating_field(space, n, seed ^ 0xabc, |v| {
        let t = v.first().copied().unwrap_or(0.0) - v.get(1).copied().unwrap_or(0.0);
        coeffs
            .iter()
            .map(|(c, s)| {
                let l = (c + s * t).clamp(0.0, 1.0);
                if l < 0.02 {
                    0.0
                } else {
                    l
                }
            })
            .collect()
    })
}

fn criterion_gap(tol: &Tolerances) -> Verdict {
    let spaces = [
        Arc::new(SampledSpace::interval(0.0, 1.0, 8).unwrap()),
        Arc::new(SampledSpace::standard_simplex(2).subdivide(1)),
    ];
    let mut r = rng(202);
    let mut checked = 0;
    let mut bad = Vec::new();
    for trial in 0..25u64 {
        let space = &spaces[trial as usize % 2];
        let n = 4 + (trial as usize % 9);
        let a = constructed_field(space, n, 2000 + trial);
        let ranks: Vec<i64> = a.values().iter().map(|v| oracle_rank(v, tol) as i64).collect();
        let g = GridFunction::new(
            n as u64,
            ranks.iter().map(|&k| (k - r.random_range(0..=2)).max(0)).collect(),
            Semicontinuity::Usc,
        )
        .unwrap();
        let g = discretize_to_chain(&g, space).unwrap();
        let eta = match find_uniform_gap(&a, &g, tol) {
            Ok(e) => e,
            Err(e) => {
                bad.push(format!("trial {trial}: {e}"));
                continue;
            }
        };
        for (x, v) in a.iter() {
            for cut in [eta, eta / 2.0, eta / 10.0] {
                let above = count_above(v, cut);
                let proj_rank = oracle_rank(&spectral_proj(v, cut, tol).unwrap(), tol);
                checked += 1;
                if proj_rank != above || (proj_rank as i64) < g.eval(x).unwrap() {
                    bad.push(format!("trial {trial}, point {x}, cut {cut:e}: rank {proj_rank}"));
                }
            }
        }
    }
    Verdict {
        passed: bad.is_empty(),
        detail: format!("{checked} cut checks on 25 fields, {} violations {:?}", bad.len(), bad.first()),
    }
}

fn band_violations(p: &FieldPath, l: usize, k: usize, tol: &Tolerances) -> Vec<String> {
    let mut bad = Vec::new();
    for (t, slice) in p.times().iter().zip(p.steps()) {
        for (x, v) in slice.iter() {
            let r = oracle_rank(v, tol);
            if r < l || r > k {
                bad.push(format!("t={t:.4}, x={x}: rank {r}"));
            }
        }
    }
    bad
}

/// Spectra for the homotopy suite: `l` unit eigenvalues plus bumps.
fn band_spectrum(n: usize, l: usize, extra: usize, phase: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    move |v: &[f64]| {
        let t = v.first().copied().unwrap_or(0.0) + 0.5 * v.get(1).copied().unwrap_or(0.0);
        let mut d = vec![0.0; n];
        for slot in d.iter_mut().take(l) {
            *slot = 1.0;
        }
        for j in 0..extra {
            let c = (phase + j as f64 / extra as f64).fract();
            d[l + j] = (0.6 - 3.0 * (t - c).abs()).max(0.0);
        }
        d
    }
}

fn criterion_homotopy(tol: &Tolerances) -> Verdict {
    let cases = [
        ("interval", Arc::new(SampledSpace::interval(0.0, 1.0, 8).unwrap()), 9usize, 1usize, 5usize),
        ("triangle", Arc::new(SampledSpace::standard_simplex(2).subdivide(2)), 16, 2, 10),
    ];
    let mut bad: Vec<String> = Vec::new();
    let mut paths = 0;
    for (name, space, n, l, k) in cases {
        let dim = space.dim();
        let a = rotating_field(&space, n, 31, band_spectrum(n, l, k - l, 0.1));
        let b = rotating_field(&space, n, 32, band_spectrum(n, l + 1, k - l - 2, 0.6));
        let full = rotating_field(&space, n, 33, band_spectrum(n, k, n - k, 0.3));

        let g = BoundChain::constant(&space, BoundKind::UscLower, l as i64);
        let flat = find_uniform_gap(&a, &g, tol).and_then(|eta| flatten_spectrum(&a, eta, PATH_STEPS, tol));
        match flat {
            Ok(p) => {
                paths += 1;
                let start: Vec<usize> = a.values().iter().map(|v| oracle_rank(v, tol)).collect();
                if p.start() != &a {
                    bad.push(format!("{name}: flatten start differs"));
                }
                for (t, slice) in p.times().iter().zip(p.steps()) {
                    for ((x, v), r0) in slice.iter().zip(&start) {
                        if oracle_rank(v, tol) != *r0 {
                            bad.push(format!("{name}: flatten changes rank at t={t:.4}, x={x}"));
                        }
                    }
                }
            }
            Err(e) => bad.push(format!("{name}: flatten: {e}")),
        }

        match raise_min_rank(&a, l, k, PATH_STEPS, tol, 5) {
            Ok(p) => {
                paths += 1;
                if p.start() != &a {
                    bad.push(format!("{name}: raise start differs"));
                }
                bad.extend(band_violations(&p, l, k, tol).into_iter().map(|s| format!("{name}: raise {s}")));
                if p.end().values().iter().any(|v| oracle_rank(v, tol) < l + dim) {
                    bad.push(format!("{name}: raise end below l + dim"));
                }
            }
            Err(e) => bad.push(format!("{name}: raise: {e}")),
        }

        match connect_in_band(&a, &b, l, k, PATH_STEPS, tol, 6) {
            Ok(p) => {
                paths += 1;
                if p.start() != &a || p.end() != &b {
                    bad.push(format!("{name}: connect endpoints differ"));
                }
                bad.extend(band_violations(&p, l, k, tol).into_iter().map(|s| format!("{name}: connect {s}")));
            }
            Err(e) => bad.push(format!("{name}: connect: {e}")),
        }

        match peel_trivial_summand(&full, k, PATH_STEPS, tol, 7) {
            Ok((path, p)) => {
                paths += 1;
                if path.start() != &full {
                    bad.push(format!("{name}: peel start differs"));
                }
                for (x, px) in p.iter() {
                    let cert = px.matmul(path.end().at(x)).sub(px.as_cmatrix()).max_abs();
                    if cert > PEEL_CERTIFICATE {
                        bad.push(format!("{name}: peel certificate {cert:e} at {x}"));
                    }
                    if oracle_rank(px, tol) < k - dim {
                        bad.push(format!("{name}: peeled rank below k - dim at {x}"));
                    }
                }
            }
            Err(e) => bad.push(format!("{name}: peel: {e}")),
        }
    }
    Verdict {
        passed: bad.is_empty(),
        detail: format!("{paths} of 8 paths produced, {} violations {:?}", bad.len(), bad.first()),
    }
}


fn check_extension(
    name: &str,
    a: &MatrixField,
    e: &MatrixField,
    lo: impl Fn(usize) -> i64,
    hi: impl Fn(usize) -> i64,
    tol: &Tolerances,
    bad: &mut Vec<String>,
) {
    if a.iter().any(|(x, v)| e.get(x) != Some(v)) {
        bad.push(format!("{name}: values on the given domain changed"));
    }
    for (x, v) in e.iter() {
        let r = oracle_rank(v, tol) as i64;
        if r < lo(x) || r > hi(x) {
            bad.push(format!("{name}: rank {r} at {x} outside [{}, {}]", lo(x), hi(x)));
        }
    }
}

fn criterion_extension(tol: &Tolerances) -> Verdict {
    let mut bad = Vec::new();
    let mut families = 0;
    let iv = Arc::new(SampledSpace::interval(0.0, 1.0, 20).unwrap());
    let opts = ExtendOptions::default();

    // Local extension near a point, with and without a tightened upper bound.
    let y0 = MatrixField::new(iv.clone(), vec![0], vec![HermMatrix::from_diag(&[1.0, 0.0])], tol).unwrap();
    let f2 = BoundChain::constant(&iv, BoundKind::LscUpper, 2);
    let g1 = BoundChain::constant(&iv, BoundKind::UscLower, 1);
    match extend_local(&y0, &f2, &g1, 8, tol) {
        Ok(loc) => {
            families += 1;
            check_extension("local", &y0, &loc.b, |_| 1, |_| 1, tol, &mut bad);
        }
        Err(e) => bad.push(format!("local: {e}")),
    }
    let y1 = MatrixField::new(iv.clone(), vec![0], vec![HermMatrix::from_diag(&[1.0, 0.5])], tol).unwrap();
    let dip = iv.full_subcomplex_in_box(&[0.2], &[0.4], 1e-12);
    let f21 = BoundChain::new(&iv, BoundKind::LscUpper, vec![1, 2], vec![dip, iv.whole()]).unwrap();
    match extend_local(&y1, &f21, &g1, 8, tol) {
        Ok(loc) => {
            families += 1;
            check_extension("local tightening", &y1, &loc.b, |_| 1, |x| f21.eval(x).unwrap(), tol, &mut bad);
        }
        Err(e) => bad.push(format!("local tightening: {e}")),
    }

    // Band extension from one point and from both endpoints.
    let start = rotating_field(&iv, 8, 41, |_| vec![1.0, 0.7, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0]).restrict(&[0]).unwrap();
    let ends = rotating_field(&iv, 8, 42, |v| {
        let r = if v[0] < 0.5 { 3 } else { 5 };
        (0..8).map(|i| if i < r { 0.9 } else { 0.0 }).collect()
    })
    .restrict(&[0, 20])
    .unwrap();
    for (name, a) in [("band from a point", &start), ("band from both ends", &ends)] {
        match extend_band(a, 1, 6, &opts, tol) {
            Ok(e) => {
                families += 1;
                check_extension(name, a, &e, |_| 1, |_| 6, tol, &mut bad);
                if e.len() != iv.num_vertices() {
                    bad.push(format!("{name}: extension misses sample points"));
                }
            }
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }

    // Two-level envelopes on a subdivided triangle, slack exactly 4 * dim on
    // the low upper level.
    let tri = Arc::new(SampledSpace::standard_simplex(2).subdivide(2));
    let low_f = tri.full_subcomplex_in_box(&[0.6, 0.0], &[1.0, 1.0], 1e-12);
    let high_g = tri.full_subcomplex_in_box(&[0.0, 0.6], &[1.0, 1.0], 1e-12);
    let f = BoundChain::new(&tri, BoundKind::LscUpper, vec![10, 14], vec![low_f, tri.whole()]).unwrap();
    let g = BoundChain::new(&tri, BoundKind::UscLower, vec![5, 2], vec![high_g, tri.whole()]).unwrap();
    let slack = (0..tri.num_vertices()).map(|x| f.eval(x).unwrap() - g.eval(x).unwrap()).min().unwrap();
    if slack != 8 {
        bad.push(format!("envelope fixture slack is {slack}, expected 8"));
    }
    let corner: Vec<usize> = tri
        .full_subcomplex_in_box(&[0.0, 0.0], &[0.2, 0.2], 1e-12)
        .vertices()
        .iter()
        .copied()
        .collect();
    let seeded = rotating_field(&tri, 16, 43, |v| (0..16).map(|i| if i < 6 + (v[0] + v[1] < 0.1) as usize { 0.8 } else { 0.0 }).collect())
        .restrict(&corner)
        .unwrap();
    let empty = MatrixField::empty(tri.clone(), 16);
    for (name, a) in [("envelopes from scratch", &empty), ("envelopes from a corner", &seeded)] {
        match extend_envelopes(a, &f, &g, &opts, tol) {
            Ok(e) => {
                families += 1;
                check_extension(name, a, &e, |x| g.eval(x).unwrap(), |x| f.eval(x).unwrap(), tol, &mut bad);
            }
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    Verdict {
        passed: bad.is_empty(),
        detail: format!("{families} of 6 extensions produced, {} violations {:?}", bad.len(), bad.first()),
    }
}

fn criterion_flagship(tol: &Tolerances) -> Verdict {
    let (r, t) = common::flagship();
    let db = check_dimbound(&r, t.eps());
    let margins: Vec<f64> = db.stages.iter().map(|s| s.margin).collect();
    let mut bad = Vec::new();
    if margins != [1.0, 12.0] || db.stages[0].lhs != 5.0 || db.stages[1].lhs != 20.0 || db.stages[1].rhs != 8.0 {
        bad.push(format!("dimension bound margins {margins:?}"));
    }
    let b = match realize_rank(&r, &t, &ExtendOptions::default(), tol) {
        Ok(b) => b,
        Err(e) => {
            return Verdict {
                passed: false,
                detail: format!("realization failed: {e}"),
            }
        }
    };
    let rep = verify_realization(&r, &b, &t, tol).unwrap();
    if !rep.passed() {
        bad.push(format!("verification report {:?}", rep.stages));
    }
    // Independent rank count on every sample point of both stages.
    let eta = t.eta_final();
    let mut samples = 0;
    for (k, (st, field)) in r.stages().iter().zip(&b.fields).enumerate() {
        for (x, v) in field.iter() {
            let ratio = count_above(v, tol.rank * v.op_norm(tol)) as f64 / st.size as f64;
            let h = t.h(k)[x];
            if !st.boundary.contains_vertex(x) {
                samples += 1;
                if (h - ratio).abs() >= t.eps() {
                    bad.push(format!("stage {k} point {x}: |h - d_tau| = {}", (h - ratio).abs()));
                }
            }
            if ratio < h - eta || ratio > h {
                bad.push(format!("stage {k} point {x}: rank/n = {ratio} outside [{}, {h}]", h - eta));
            }
        }
    }
    if samples < 200 {
        bad.push(format!("only {samples} trace samples"));
    }
    let worst = rep.stages.iter().map(|s| s.trace_margin).fold(f64::INFINITY, f64::min);
    Verdict {
        passed: bad.is_empty(),
        detail: format!(
            "margins {margins:?}, {samples} trace samples, worst accuracy margin {worst:.4} of eps = 0.5, {} violations {:?}",
            bad.len(),
            bad.first()
        ),
    }
}

/// Richardson tableau with ratio 2 over the full sequence.
fn extrapolate(seq: &[f64]) -> f64 {
    let mut table = seq.to_vec();
    let mut best = *table.last().unwrap();
    let mut factor = 1.0;
    while table.len() > 1 && factor < 256.0 {
        factor *= 2.0;
        table = table.windows(2).map(|w| w[1] + (w[1] - w[0]) / (factor - 1.0)).collect();
        best = *table.last().unwrap();
    }
    best
}

fn criterion_dtau(tol: &Tolerances) -> Verdict {
    let mut r = rng(606);
    let mut bad = Vec::new();
    let mut points = 0;
    let mut worst: f64 = 0.0;
    let spaces = [
        Arc::new(SampledSpace::interval(0.0, 1.0, 6).unwrap()),
        Arc::new(SampledSpace::standard_simplex(2).subdivide(1)),
    ];
    for trial in 0..25u64 {
        let space = &spaces[trial as usize % 2];
        let n = 2 + (trial as usize % 11);
        let pattern: Vec<Vec<f64>> = (0..space.num_vertices())
            .map(|_| {
                let rank = r.random_range(0..=n);
                (0..n).map(|i| if i < rank { 10f64.powf(r.random_range(-4.0..0.0)) } else { 0.0 }).collect()
            })
            .collect();
        let field = rotating_field(space, n, 6000 + trial, |v| pattern[space.find_vertex(v, 1e-12).unwrap()].clone());
        let model = RshDecomposition::new(vec![Stage {
            space: space.clone(),
            size: n,
            boundary: space.empty(),
            clutch: Default::default(),
        }]);
        let element = RshElement { fields: vec![field] };
        for sample in model.trace_samples() {
            let v = element.fields[0].at(sample.point);
            let ratio = d_tau(&model, &element, sample, tol).unwrap();
            let eig = common::bisect_eigenvalues(v);
            let top = eig.iter().copied().fold(0.0, f64::max);
            let seq: Vec<f64> = (0..=12)
                .map(|m| {
                    eig.iter()
                        .filter(|&&l| top > 0.0 && l > tol.noise_floor * top)
                        .map(|l| (l / top).powf(0.5f64.powi(m)))
                        .sum::<f64>()
                        / n as f64
                })
                .collect();
            let limit = extrapolate(&seq);
            let gap = (limit - ratio).abs();
            let checked = d_tau_checked(&model, &element, sample, tol).unwrap();
            points += 1;
            worst = worst.max(gap);
            if gap > 2.0 * tol.rank || !checked.agrees {
                bad.push(format!("trial {trial} point {}: rank/n {ratio}, limit {limit}", sample.point));
            }
        }
    }
    Verdict {
        passed: bad.is_empty(),
        detail: format!("{points} points, worst |rank/n - limit| = {worst:.2e} <= 2e-6, {} violations {:?}", bad.len(), bad.first()),
    }
}

fn criterion_determinism() -> Verdict {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut bad = Vec::new();
    let mut runs = 0;
    for file in ["flagship.toml", "homotopy.toml", "dimbound_failure.toml"] {
        let text = std::fs::read_to_string(dir.join(file)).unwrap();
        for seed in [None, Some(99)] {
            let first = run_scenario(&text, seed, &[], false).unwrap();
            let second = run_scenario(&text, seed, &[], false).unwrap();
            runs += 2;
            if first.report.to_json_without_timing() != second.report.to_json_without_timing() {
                bad.push(format!("{file} seed {seed:?}: reports differ"));
            }
            if first.csv != second.csv {
                bad.push(format!("{file} seed {seed:?}: CSV output differs"));
            }
        }
    }
    Verdict {
        passed: bad.is_empty(),
        detail: format!("{runs} runs over 3 scenarios, {} differences {:?}", bad.len(), bad.first()),
    }
}

#[test]
fn acceptance() {
    let tol = Tolerances::default();
    let mut all = true;

    let t = Instant::now();
    all &= report(1, "envelopes, exact grid comparison", t, Duration::from_secs(10), criterion_envelopes());
    let t = Instant::now();
    all &= report(2, "uniform gap, cuts eta, eta/2, eta/10", t, Duration::from_secs(30), criterion_gap(&tol));
    let t = Instant::now();
    all &= report(
        3,
        "homotopies, T = 32, certificate <= 1e-8",
        t,
        Duration::from_secs(300),
        criterion_homotopy(&tol),
    );
    let t = Instant::now();
    all &= report(4, "extensions, tol_rank = 1e-6 relative", t, Duration::from_secs(300), criterion_extension(&tol));
    let t = Instant::now();
    all &= report(5, "flagship realization, eps = 0.5", t, Duration::from_secs(600), criterion_flagship(&tol));
    let t = Instant::now();
    all &= report(6, "d_tau against 12 square-root halvings, within 2e-6", t, Duration::from_secs(60), criterion_dtau(&tol));
    let t = Instant::now();
    all &= report(7, "byte-identical reports without timing", t, Duration::from_secs(600), criterion_determinism());

    assert!(all, "some acceptance criteria failed");
}
