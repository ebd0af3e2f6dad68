//! Rank-constrained extension of positive matrix fields from a closed set of
//! sample points to a larger one.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::BoundChain;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::homotopy::{connect_in_band, uniform_gap_with, MatrixField};
use crate::matcalc::{cutdown, lowdin, CMatrix, HermMatrix, C64};
use crate::space::{dist_to_points, nearest_point, Subcomplex};

/// Knobs shared by the extension operations.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendOptions {
    /// Number of nested distance shells in the local extension.
    pub shells: usize,
    /// Initial time grid for connecting homotopies.
    pub steps: usize,
    pub seed: u64,
    /// Conjugate the reference projection by a seeded random unitary.
    pub random_reference: bool,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self {
            shells: 8,
            steps: 32,
            seed: 0,
            random_reference: false,
        }
    }
}

/// Output of [`extend_local`].
#[derive(Clone, Debug)]
pub struct LocalExtension {
    pub u: Subcomplex,
    /// The extension on the sample points of `u`.
    pub b: MatrixField,
    /// Cut level bounding the cutoff.
    pub eta: f64,
    /// The cutoff value at each point of `u` (zero on the original domain).
    pub cutoff: BTreeMap<usize, f64>,
    /// Outer shell radius that was accepted.
    pub radius: f64,
}

/// `ã(x) = a(y)` for the nearest sample point `y` of the domain of `a`
/// (lowest index on ties), at every vertex of the space.
pub fn extend_nearest(a: &MatrixField) -> Result<MatrixField> {
    let all: Vec<usize> = (0..a.space().num_vertices()).collect();
    nearest_to(a, &all)
}

pub(crate) fn nearest_to(a: &MatrixField, zone: &[usize]) -> Result<MatrixField> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut pts = zone.to_vec();
    pts.extend_from_slice(a.points());
    pts.sort_unstable();
    pts.dedup();
    let space = a.space();
    let vals = pts
        .iter()
        .map(|&x| match a.get(x) {
            Some(v) => v.clone(),
            None => a.at(nearest_point(space, a.points().iter().copied(), x).expect("nonempty")).clone(),
        })
        .collect();
    Ok(MatrixField::unchecked(a.space_arc().clone(), pts, vals))
}

/// Extend `a` to a neighborhood `U` of its domain with
/// `g ≤ rank ≤ f` on `U`, by cutting a nearest-point extension down by a
/// cutoff that vanishes on the domain and grows across nested shells.
pub fn extend_local(
    a: &MatrixField,
    f: &BoundChain,
    g: &BoundChain,
    shells: usize,
    tol: &Tolerances,
) -> Result<LocalExtension> {
    let all: Vec<usize> = (0..a.space().num_vertices()).collect();
    local_in(a, &|x| f.at(x), &|x| g.at(x), &all, shells, tol)
}

type Bound<'a> = &'a dyn Fn(usize) -> i64;

pub(crate) fn local_in(
    a: &MatrixField,
    f: Bound,
    g: Bound,
    zone: &[usize],
    shells: usize,
    tol: &Tolerances,
) -> Result<LocalExtension> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let shells = shells.max(1);
    for (x, r) in a.points().iter().zip(a.ranks(tol)) {
        let r = r as i64;
        if r < g(*x) || r > f(*x) {
            return Err(Error::rank(*x, format!("rank {r} outside [{}, {}] on the given domain", g(*x), f(*x))));
        }
    }
    let space = a.space();
    let tilde = nearest_to(a, zone)?;
    let fresh: Vec<usize> = tilde.points().iter().copied().filter(|&x| !a.contains(x)).collect();

    // Domain points grouped by their upper-bound value, lowest first.
    let mut levels: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for &y in a.points() {
        levels.entry(f(y)).or_default().push(y);
    }
    // Distance from each level's points to zone points with a smaller bound.
    let low_dist: BTreeMap<i64, f64> = levels
        .iter()
        .map(|(&lv, ys)| {
            let lower: Vec<usize> = fresh.iter().copied().filter(|&x| f(x) < lv).collect();
            let d = ys
                .iter()
                .filter_map(|&y| dist_to_points(space, lower.iter().copied(), y).ok())
                .fold(f64::INFINITY, f64::min);
            (lv, d)
        })
        .collect();

    let mut radius = 0.25 * space.diameter().max(space.mesh_width());
    loop {
        let depth = shell_depths(space, &levels, &low_dist, &fresh, radius, shells);
        let u_pts: Vec<usize> = a.points().iter().copied().chain(depth.keys().copied()).collect();
        if let Some(ext) = try_local(a, &tilde, f, g, &u_pts, &depth, radius, tol)? {
            return Ok(ext);
        }
        if depth.is_empty() {
            return Err(Error::NeedsRefinement("local extension fails even on the bare domain".into()));
        }
        radius *= 0.5;
    }
}

/// For each fresh point inside the outer shell, the index of its innermost shell.
fn shell_depths(
    space: &crate::space::SampledSpace,
    levels: &BTreeMap<i64, Vec<usize>>,
    low_dist: &BTreeMap<i64, f64>,
    fresh: &[usize],
    radius: f64,
    shells: usize,
) -> BTreeMap<usize, usize> {
    let mut depth = BTreeMap::new();
    for n in 1..=shells {
        let r_n = radius * 0.5f64.powi(n as i32 - 1);
        let mut covered: BTreeSet<usize> = BTreeSet::new();
        for (lv, ys) in levels {
            let delta = r_n.min(low_dist[lv]);
            let seeds: Vec<usize> = ys.iter().copied().filter(|y| !covered.contains(y)).collect();
            if seeds.is_empty() {
                continue;
            }
            for &x in fresh {
                let d = dist_to_points(space, seeds.iter().copied(), x).expect("nonempty seeds");
                if d < delta {
                    covered.insert(x);
                }
            }
            // Later levels skip domain points already inside earlier shells.
            for (_, other) in levels.range(lv + 1..) {
                for &y in other {
                    if dist_to_points(space, seeds.iter().copied(), y).expect("nonempty") < delta {
                        covered.insert(y);
                    }
                }
            }
        }
        for x in covered {
            if fresh.binary_search(&x).is_ok() {
                depth.insert(x, n);
            }
        }
    }
    depth
}

#[allow(clippy::too_many_arguments)]
fn try_local(
    a: &MatrixField,
    tilde: &MatrixField,
    f: Bound,
    g: Bound,
    u_pts: &[usize],
    depth: &BTreeMap<usize, usize>,
    radius: f64,
    tol: &Tolerances,
) -> Result<Option<LocalExtension>> {
    let tilde_u = tilde.restrict(u_pts)?;
    let eta = match uniform_gap_with(&tilde_u, g, tol) {
        Ok(e) => e,
        Err(Error::RankViolation { .. }) if !depth.is_empty() => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut cutoff = BTreeMap::new();
    let b = tilde_u.try_map(|x, v| {
        if a.contains(x) {
            cutoff.insert(x, 0.0);
            return Ok(a.at(x).clone());
        }
        let c = eta * 0.5f64.powi(depth[&x] as i32);
        cutoff.insert(x, c);
        cutdown(v, c, tol)
    })?;
    if b.check_band(g, f, tol).is_err() {
        if depth.is_empty() {
            return Err(Error::NeedsRefinement("bounds fail on the domain itself".into()));
        }
        return Ok(None);
    }
    let u = a.space().full_subcomplex(u_pts);
    Ok(Some(LocalExtension {
        u,
        b,
        eta,
        cutoff,
        radius,
    }))
}

/// Extend `a` to every vertex with `l ≤ rank ≤ k` everywhere.
pub fn extend_band(a: &MatrixField, l: usize, k: usize, opts: &ExtendOptions, tol: &Tolerances) -> Result<MatrixField> {
    let all: Vec<usize> = (0..a.space().num_vertices()).collect();
    band_in(a, l, k, &all, opts, tol)
}

pub(crate) fn band_in(
    a: &MatrixField,
    l: usize,
    k: usize,
    zone: &[usize],
    opts: &ExtendOptions,
    tol: &Tolerances,
) -> Result<MatrixField> {
    let dim = a.space().dim();
    let n = a.n();
    if k > n || k < l || k - l < 4 * dim {
        return Err(Error::invalid(format!(
            "band [{l}, {k}] needs k <= {n} and width at least {}",
            4 * dim
        )));
    }
    let (li, ki) = (l as i64, k as i64);
    let mut zone: Vec<usize> = zone.iter().copied().chain(a.points().iter().copied()).collect();
    zone.sort_unstable();
    zone.dedup();
    let d_val = reference(n, l, k, opts, tol);
    if a.is_empty() {
        return Ok(MatrixField::unchecked(a.space_arc().clone(), zone.clone(), vec![d_val; zone.len()]));
    }
    a.check_band(|_| li, |_| ki, tol)?;
    if zone.len() == a.len() {
        return Ok(a.clone());
    }
    let local = local_in(a, &|_| ki, &|_| li, &zone, opts.shells, tol)?;
    let space = a.space();
    let outside: Vec<usize> = zone.iter().copied().filter(|x| !local.b.contains(*x)).collect();
    if outside.is_empty() {
        return Ok(local.b);
    }
    let u_val: BTreeMap<usize, f64> = zone
        .iter()
        .map(|&x| {
            let dy = dist_to_points(space, a.points().iter().copied(), x).expect("nonempty");
            let dc = dist_to_points(space, outside.iter().copied(), x).expect("nonempty");
            (x, dy / (dy + dc))
        })
        .collect();
    let collar: Vec<usize> = local.b.points().iter().copied().filter(|x| u_val[x] > 1.0 / 3.0).collect();
    let mut pieces = local.b.restrict(&local.b.points().iter().copied().filter(|x| u_val[x] <= 1.0 / 3.0).collect::<Vec<_>>())?;
    let far = MatrixField::unchecked(a.space_arc().clone(), outside.clone(), vec![d_val.clone(); outside.len()]);
    pieces = pieces.merge(&far)?;
    if !collar.is_empty() {
        let start = local.b.restrict(&collar)?;
        let end = MatrixField::unchecked(a.space_arc().clone(), collar.clone(), vec![d_val.clone(); collar.len()]);
        let path = connect_in_band(&start, &end, l, k, opts.steps, tol, opts.seed)?;
        let glued = start.map(|x, _| {
            let t = (u_val[&x] - 1.0 / 3.0) / (2.0 / 3.0);
            path.steps()[path.nearest_index(t)].at(x).clone()
        });
        pieces = pieces.merge(&glued)?;
    }
    pieces.check_band(|_| li, |_| ki, tol)?;
    Ok(pieces)
}

/// Constant reference projection of rank `⌈(l + k) / 2⌉`.
fn reference(n: usize, l: usize, k: usize, opts: &ExtendOptions, tol: &Tolerances) -> HermMatrix {
    let m = (l + k).div_ceil(2);
    let axes: Vec<usize> = (0..m).collect();
    let d = HermMatrix::coordinate_projection(n, &axes);
    if !opts.random_reference {
        return d;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let (u, _) = lowdin(&g, tol);
    d.conjugate(&u)
}

/// Extend `a` to the whole space with `g ≤ rank ≤ f` pointwise, by sweeping
/// the level sets of `f` and, within each, the level sets of `g`.
pub fn extend_envelopes(
    a: &MatrixField,
    f: &BoundChain,
    g: &BoundChain,
    opts: &ExtendOptions,
    tol: &Tolerances,
) -> Result<MatrixField> {
    let space = a.space_arc().clone();
    let dim = space.dim() as i64;
    for x in 0..space.num_vertices() {
        if f.at(x) - g.at(x) < 4 * dim {
            return Err(Error::rank(x, format!("bound gap {} is below 4 * dim = {}", f.at(x) - g.at(x), 4 * dim)));
        }
        if f.at(x) > a.n() as i64 {
            return Err(Error::rank(x, format!("upper bound {} exceeds the fiber size {}", f.at(x), a.n())));
        }
    }
    a.check_band(|x| g.at(x), |x| f.at(x), tol)?;

    let mut cur = a.clone();
    for (i, level) in f.levels().iter().enumerate() {
        let new_pts: Vec<usize> = level.vertices().iter().copied().filter(|x| !cur.contains(*x)).collect();
        if new_pts.is_empty() {
            continue;
        }
        let top = f.values()[i];
        for (j, glevel) in g.levels().iter().enumerate() {
            let step: Vec<usize> = new_pts
                .iter()
                .copied()
                .filter(|x| glevel.contains_vertex(*x) && !cur.contains(*x))
                .collect();
            if step.is_empty() {
                continue;
            }
            let low = g.values()[j].max(0) as usize;
            let stage = format!("upper level {i} (value {top}), lower level {j} (value {})", g.values()[j]);
            cur = extend_step(&cur, &step, low, top as usize, f, g, opts, tol).map_err(|e| e.in_stage(stage))?;
        }
    }
    if cur.len() != space.num_vertices() {
        return Err(Error::invalid("level sweep did not reach every sample point"));
    }
    cur.check_band(|x| g.at(x), |x| f.at(x), tol)?;
    Ok(cur)
}

/// Extend `cur` over the fresh points `step`, all of which carry the bounds
/// `[low, top]`.
#[allow(clippy::too_many_arguments)]
fn extend_step(
    cur: &MatrixField,
    step: &[usize],
    low: usize,
    top: usize,
    f: &BoundChain,
    g: &BoundChain,
    opts: &ExtendOptions,
    tol: &Tolerances,
) -> Result<MatrixField> {
    if cur.is_empty() {
        let b = band_in(cur, low, top, step, opts, tol)?;
        return Ok(b);
    }
    let mut zone: Vec<usize> = cur.points().to_vec();
    zone.extend_from_slice(step);
    zone.sort_unstable();
    let fb = |x: usize| f.at(x);
    let gb = |x: usize| g.at(x).max(0);
    let local = local_in(cur, &fb, &gb, &zone, opts.shells, tol)?;
    let space = cur.space();
    let outside: Vec<usize> = step.iter().copied().filter(|x| !local.b.contains(*x)).collect();
    if outside.is_empty() {
        return Ok(local.b);
    }
    let inner: Vec<usize> = local
        .b
        .points()
        .iter()
        .copied()
        .filter(|&x| {
            if cur.contains(x) {
                return true;
            }
            let dy = dist_to_points(space, cur.points().iter().copied(), x).expect("nonempty");
            let dc = dist_to_points(space, outside.iter().copied(), x).expect("nonempty");
            dy / (dy + dc) <= 1.0 / 3.0
        })
        .collect();
    let kept = local.b.restrict(&inner)?;
    let interface: Vec<usize> = local.b.points().iter().copied().filter(|x| !kept.contains(*x)).collect();
    let rest_zone: Vec<usize> = step.iter().copied().filter(|x| !kept.contains(*x)).collect();
    let seed_field = local.b.restrict(&interface)?;
    let rest = band_in(&seed_field, low, top, &rest_zone, opts, tol)?;
    kept.merge(&rest)
}
