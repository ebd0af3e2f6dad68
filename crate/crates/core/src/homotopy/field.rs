use std::sync::{Arc, OnceLock};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matcalc::{rank_tol, HermMatrix};
use crate::space::{SampledSpace, Subcomplex};

/// A positive matrix field sampled at a set of vertices of a complex.
///
/// The domain is a sorted list of vertex indices; full fields use every
/// vertex. Continuity is certified by `ω`, the largest operator-norm jump
/// across a mesh edge with both ends in the domain.
#[derive(Clone, Debug)]
pub struct MatrixField {
    space: Arc<SampledSpace>,
    n: usize,
    points: Vec<usize>,
    values: Vec<HermMatrix>,
    omega: OnceLock<f64>,
    norm: OnceLock<f64>,
}

impl MatrixField {
    pub fn new(
        space: Arc<SampledSpace>,
        points: Vec<usize>,
        values: Vec<HermMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let f = Self::build(space, points, values)?;
        for (x, v) in f.points.iter().zip(&f.values) {
            let scale = v.op_norm(tol).max(1.0);
            let m = v.min_eig(tol);
            if m < -tol.psd * scale {
                return Err(Error::RankViolation {
                    point: *x,
                    detail: format!("field value is not positive (min eigenvalue {m:.3e})"),
                });
            }
        }
        Ok(f)
    }

    /// A field on every vertex of `space`.
    pub fn full(space: Arc<SampledSpace>, values: Vec<HermMatrix>, tol: &Tolerances) -> Result<Self> {
        let points = (0..space.num_vertices()).collect();
        Self::new(space, points, values, tol)
    }

    pub fn from_fn(
        space: Arc<SampledSpace>,
        points: Vec<usize>,
        mut f: impl FnMut(usize) -> HermMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let values = points.iter().map(|&x| f(x)).collect();
        Self::new(space, points, values, tol)
    }

    pub fn constant(space: Arc<SampledSpace>, points: Vec<usize>, m: HermMatrix) -> Result<Self> {
        let values = vec![m; points.len()];
        Self::build(space, points, values)
    }

    /// A field with no sample points but a definite fiber size.
    pub fn empty(space: Arc<SampledSpace>, n: usize) -> Self {
        Self::unchecked(space, Vec::new(), Vec::new()).into_sized(n)
    }

    pub(crate) fn into_sized(mut self, n: usize) -> Self {
        if self.values.is_empty() {
            self.n = n;
        }
        self
    }

    /// Skips the positivity check; callers guarantee it by construction.
    pub(crate) fn unchecked(space: Arc<SampledSpace>, points: Vec<usize>, values: Vec<HermMatrix>) -> Self {
        Self::build(space, points, values).expect("well-formed field data")
    }

    fn build(space: Arc<SampledSpace>, points: Vec<usize>, values: Vec<HermMatrix>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                got: values.len(),
            });
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("field domain must be sorted and free of repeats"));
        }
        if let Some(&x) = points.iter().find(|&&x| x >= space.num_vertices()) {
            return Err(Error::invalid(format!("{x} is not a sample point of the space")));
        }
        let n = values.first().map_or(0, HermMatrix::n);
        if let Some(bad) = values.iter().find(|v| v.n() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.n(),
            });
        }
        Ok(Self {
            space,
            n,
            points,
            values,
            omega: OnceLock::new(),
            norm: OnceLock::new(),
        })
    }

    pub fn space(&self) -> &SampledSpace {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<SampledSpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn values(&self) -> &[HermMatrix] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, x: usize) -> Option<usize> {
        self.points.binary_search(&x).ok()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.index_of(x).is_some()
    }

    pub fn get(&self, x: usize) -> Option<&HermMatrix> {
        self.index_of(x).map(|i| &self.values[i])
    }

    /// Value at `x`; panics when `x` is outside the domain.
    pub fn at(&self, x: usize) -> &HermMatrix {
        self.get(x)
            .unwrap_or_else(|| panic!("sample point {x} is outside the field's domain"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &HermMatrix)> {
        self.points.iter().copied().zip(self.values.iter())
    }

    pub fn domain(&self) -> Subcomplex {
        self.space.full_subcomplex(&self.points)
    }

    pub fn same_domain(&self, other: &MatrixField) -> bool {
        Arc::ptr_eq(&self.space, &other.space) && self.points == other.points && self.n == other.n
    }

    pub fn restrict(&self, points: &[usize]) -> Result<MatrixField> {
        let mut pts: Vec<usize> = points.to_vec();
        pts.sort_unstable();
        pts.dedup();
        let mut values = Vec::with_capacity(pts.len());
        for &x in &pts {
            match self.get(x) {
                Some(v) => values.push(v.clone()),
                None => return Err(Error::invalid(format!("sample point {x} is outside the field's domain"))),
            }
        }
        Ok(Self::unchecked(self.space.clone(), pts, values).into_sized(self.n))
    }

    pub fn restrict_to(&self, s: &Subcomplex) -> Result<MatrixField> {
        let pts: Vec<usize> = s.vertices().iter().copied().collect();
        self.restrict(&pts)
    }

    /// Union of two fields; on shared points the values must agree bit for bit.
    pub fn merge(&self, other: &MatrixField) -> Result<MatrixField> {
        if !Arc::ptr_eq(&self.space, &other.space) && self.space.num_vertices() != other.space.num_vertices() {
            return Err(Error::invalid("cannot merge fields over different spaces"));
        }
        if !self.is_empty() && !other.is_empty() && self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        let mut pts = Vec::with_capacity(self.len() + other.len());
        let mut vals = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let xi = self.points.get(i).copied().unwrap_or(usize::MAX);
            let xj = other.points.get(j).copied().unwrap_or(usize::MAX);
            match xi.cmp(&xj) {
                std::cmp::Ordering::Less => {
                    pts.push(xi);
                    vals.push(self.values[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    pts.push(xj);
                    vals.push(other.values[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    if self.values[i] != other.values[j] {
                        return Err(Error::invalid(format!("fields disagree at shared sample point {xi}")));
                    }
                    pts.push(xi);
                    vals.push(self.values[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(Self::unchecked(self.space.clone(), pts, vals).into_sized(self.n.max(other.n)))
    }

    pub fn map(&self, mut f: impl FnMut(usize, &HermMatrix) -> HermMatrix) -> MatrixField {
        let values = self.iter().map(|(x, v)| f(x, v)).collect();
        Self::unchecked(self.space.clone(), self.points.clone(), values).into_sized(self.n)
    }

    pub fn try_map(&self, mut f: impl FnMut(usize, &HermMatrix) -> Result<HermMatrix>) -> Result<MatrixField> {
        let values = self.iter().map(|(x, v)| f(x, v)).collect::<Result<Vec<_>>>()?;
        Ok(Self::unchecked(self.space.clone(), self.points.clone(), values))
    }

    pub fn scale(&self, s: f64) -> MatrixField {
        self.map(|_, v| v.scale(s))
    }

    /// Pointwise sum with a field on the same domain.
    pub fn add(&self, other: &MatrixField) -> Result<MatrixField> {
        if self.points != other.points {
            return Err(Error::invalid("pointwise sum needs fields on the same domain"));
        }
        Ok(self.map(|x, v| v.add(other.at(x))))
    }

    /// Largest pointwise operator norm.
    pub fn norm(&self, tol: &Tolerances) -> f64 {
        *self
            .norm
            .get_or_init(|| self.values.iter().map(|v| v.op_norm(tol)).fold(0.0, f64::max))
    }

    /// Continuity certificate `ω`.
    pub fn omega(&self, tol: &Tolerances) -> f64 {
        *self.omega.get_or_init(|| self.compute_omega(tol))
    }

    fn compute_omega(&self, tol: &Tolerances) -> f64 {
        self.space
            .edges()
            .iter()
            .filter_map(|&(u, v)| Some((self.get(u)?, self.get(v)?)))
            .map(|(a, b)| a.dist(b, tol))
            .fold(0.0, f64::max)
    }

    pub fn ranks(&self, tol: &Tolerances) -> Vec<usize> {
        self.values.iter().map(|v| rank_tol(v, tol)).collect()
    }

    /// Sup-norm distance to a field on the same domain.
    pub fn sup_dist(&self, other: &MatrixField, tol: &Tolerances) -> Result<f64> {
        if self.points != other.points {
            return Err(Error::invalid("distance needs fields on the same domain"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| if a.ptr_eq(b) { 0.0 } else { a.dist(b, tol) })
            .fold(0.0, f64::max))
    }

    /// Re-check positivity and the stored continuity certificate.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        Self::new(self.space.clone(), self.points.clone(), self.values.clone(), tol)?;
        let stored = self.omega(tol);
        let fresh = self.compute_omega(tol);
        if stored != fresh {
            return Err(Error::invalid(format!("stored continuity certificate {stored} differs from {fresh}")));
        }
        Ok(())
    }

    /// `Ok` iff `lo(x) <= rank(a(x)) <= hi(x)` at every point of the domain.
    pub fn check_band(
        &self,
        lo: impl Fn(usize) -> i64,
        hi: impl Fn(usize) -> i64,
        tol: &Tolerances,
    ) -> Result<()> {
        for (x, v) in self.iter() {
            let r = rank_tol(v, tol) as i64;
            let (l, k) = (lo(x), hi(x));
            if r < l || r > k {
                return Err(Error::rank(x, format!("rank {r} outside [{l}, {k}]")));
            }
        }
        Ok(())
    }
}

impl PartialEq for MatrixField {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.points == other.points && self.values == other.values
    }
}

/// A homotopy sampled on a time grid `0 = t_0 < … < t_m = 1`.
#[derive(Clone, Debug)]
pub struct FieldPath {
    times: Vec<f64>,
    steps: Vec<MatrixField>,
}

/// Refinement depth cap for adaptive path building.
const MAX_BISECTIONS: usize = 14;

impl FieldPath {
    pub fn constant(a: MatrixField) -> Self {
        Self {
            times: vec![0.0, 1.0],
            steps: vec![a.clone(), a],
        }
    }

    pub fn new(times: Vec<f64>, steps: Vec<MatrixField>) -> Result<Self> {
        if times.len() != steps.len() || steps.len() < 2 {
            return Err(Error::invalid("a path needs at least two slices and one time per slice"));
        }
        if times[0] != 0.0 || *times.last().expect("nonempty") != 1.0 || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("path times must increase from 0 to 1"));
        }
        if steps.iter().any(|s| s.points != steps[0].points || (!s.is_empty() && s.n != steps[0].n)) {
            return Err(Error::invalid("all path slices must share domain and fiber size"));
        }
        Ok(Self { times, steps })
    }

    /// Sample `h` on a uniform grid of `steps` intervals, then bisect every
    /// interval whose sup-norm jump exceeds `path_tol`. The slice at `t = 0`
    /// is `start` itself.
    pub fn build(
        start: &MatrixField,
        steps: usize,
        path_tol: f64,
        tol: &Tolerances,
        h: impl Fn(f64) -> Result<MatrixField>,
    ) -> Result<Self> {
        let steps = steps.max(1);
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let mut slices = Vec::with_capacity(times.len());
        slices.push(start.clone());
        for &t in &times[1..] {
            slices.push(h(t)?);
        }
        for _ in 0..MAX_BISECTIONS {
            let mut refined_t = vec![times[0]];
            let mut refined_s = vec![slices[0].clone()];
            let mut changed = false;
            for i in 0..times.len() - 1 {
                if slices[i].sup_dist(&slices[i + 1], tol)? > path_tol {
                    let mid = 0.5 * (times[i] + times[i + 1]);
                    refined_t.push(mid);
                    refined_s.push(h(mid)?);
                    changed = true;
                }
                refined_t.push(times[i + 1]);
                refined_s.push(slices[i + 1].clone());
            }
            times = refined_t;
            slices = refined_s;
            if !changed {
                return Self::new(times, slices);
            }
        }
        Err(Error::NeedsRefinement(format!(
            "path step gap stays above {path_tol:.3e} after {MAX_BISECTIONS} bisections"
        )))
    }

    /// Concatenate paths in equal time shares. Consecutive endpoints must
    /// agree to within `10 * tol.herm`; the earlier slice is kept at joins.
    pub fn concat(paths: Vec<FieldPath>, tol: &Tolerances) -> Result<Self> {
        let paths: Vec<FieldPath> = paths.into_iter().filter(|p| !p.is_stationary()).collect();
        let Some(first) = paths.first() else {
            return Err(Error::invalid("concatenation needs at least one nonconstant path"));
        };
        if paths.len() == 1 {
            return Ok(first.clone());
        }
        let share = 1.0 / paths.len() as f64;
        let mut times = vec![0.0];
        let mut steps = vec![first.start().clone()];
        for (k, p) in paths.iter().enumerate() {
            if k > 0 {
                let gap = steps.last().expect("nonempty").sup_dist(p.start(), tol)?;
                if gap > 10.0 * tol.herm {
                    return Err(Error::invalid(format!("paths do not join (gap {gap:.3e})")));
                }
            }
            for (t, s) in p.times.iter().zip(&p.steps).skip(1) {
                let tt = if k + 1 == paths.len() && *t == 1.0 { 1.0 } else { (k as f64 + t) * share };
                times.push(tt);
                steps.push(s.clone());
            }
        }
        Self::new(times, steps)
    }

    /// Concatenation that tolerates constant pieces, returning a constant path
    /// if nothing moves.
    pub fn chain(paths: Vec<FieldPath>, tol: &Tolerances) -> Result<Self> {
        let start = paths
            .first()
            .map(|p| p.start().clone())
            .ok_or_else(|| Error::invalid("chain needs at least one path"))?;
        if paths.iter().all(FieldPath::is_stationary) {
            return Ok(Self::constant(start));
        }
        Self::concat(paths, tol)
    }

    pub fn reversed(&self) -> Self {
        let times = self.times.iter().rev().map(|t| 1.0 - t).collect();
        let steps = self.steps.iter().rev().cloned().collect();
        Self { times, steps }
    }

    /// True when every slice is bit-identical to the first.
    pub fn is_stationary(&self) -> bool {
        self.steps.iter().all(|s| s == &self.steps[0])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> &[MatrixField] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn start(&self) -> &MatrixField {
        &self.steps[0]
    }

    pub fn end(&self) -> &MatrixField {
        self.steps.last().expect("paths have at least two slices")
    }

    /// Index of the time node closest to `t` (earlier node on ties).
    pub fn nearest_index(&self, t: f64) -> usize {
        let t = t.clamp(0.0, 1.0);
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return 0;
        }
        if i == self.times.len() {
            return i - 1;
        }
        if t - self.times[i - 1] <= self.times[i] - t {
            i - 1
        } else {
            i
        }
    }

    /// Max sup-norm jump between consecutive slices.
    pub fn step_gap(&self, tol: &Tolerances) -> f64 {
        self.steps
            .windows(2)
            .map(|w| w[0].sup_dist(&w[1], tol).expect("slices share a domain"))
            .fold(0.0, f64::max)
    }

    /// `path_factor` times the largest slice norm.
    pub fn path_tol(&self, tol: &Tolerances) -> f64 {
        tol.path_factor * self.steps.iter().map(|s| s.norm(tol)).fold(0.0, f64::max)
    }

    /// Band membership at every slice and every point.
    pub fn check_band(&self, l: i64, k: i64, tol: &Tolerances) -> Result<()> {
        for (t, s) in self.times.iter().zip(&self.steps) {
            s.check_band(|_| l, |_| k, tol)
                .map_err(|e| e.in_stage(format!("path slice t={t:.6}")))?;
        }
        Ok(())
    }

    /// Step-gap bound plus slice validity.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let gap = self.step_gap(tol);
        let limit = self.path_tol(tol);
        if gap > limit + tol.herm {
            return Err(Error::invalid(format!("path step gap {gap:.3e} exceeds {limit:.3e}")));
        }
        for s in &self.steps {
            s.validate(tol)?;
        }
        Ok(())
    }
}

/// Path tolerance for a homotopy between fields of the given norms.
pub fn path_tol_for(norms: &[f64], tol: &Tolerances) -> f64 {
    tol.path_factor * norms.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}
