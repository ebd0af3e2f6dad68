//! Finite geometric simplicial complexes standing in for compact metric spaces.
//!
//! Sample points are the vertices. A closed subset is a [`Subcomplex`].

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SampledSpace {
    vertices: Vec<Vec<f64>>,
    /// Sorted vertex lists, closed under faces. The first `vertices.len()`
    /// entries are the 0-simplices in vertex order.
    simplices: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    dim: usize,
    mesh_width: f64,
}

impl SampledSpace {
    /// Build from vertex coordinates and a list of simplices (any faces
    /// missing from the list are added).
    pub fn new(vertices: Vec<Vec<f64>>, simplices: &[Vec<usize>]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::invalid("a space needs at least one vertex"));
        }
        let m = vertices[0].len();
        if vertices.iter().any(|v| v.len() != m) {
            return Err(Error::invalid("vertex coordinates must share one ambient dimension"));
        }
        for i in 0..vertices.len() {
            for j in i + 1..vertices.len() {
                if vertices[i] == vertices[j] {
                    return Err(Error::invalid(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        let mut all: BTreeSet<Vec<usize>> = BTreeSet::new();
        for s in simplices {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                continue;
            }
            if let Some(&bad) = s.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::invalid(format!("simplex references missing vertex {bad}")));
            }
            for face in nonempty_subsets(&s) {
                all.insert(face);
            }
        }
        for v in 0..vertices.len() {
            all.insert(vec![v]);
        }
        Ok(Self::assemble(vertices, all.into_iter().collect()))
    }

    fn assemble(vertices: Vec<Vec<f64>>, mut simplices: Vec<Vec<usize>>) -> Self {
        simplices.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let index = simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let edges: Vec<(usize, usize)> = simplices
            .iter()
            .filter(|s| s.len() == 2)
            .map(|s| (s[0], s[1]))
            .collect();
        let mut neighbors = vec![Vec::new(); vertices.len()];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        let dim = simplices.iter().map(|s| s.len()).max().unwrap_or(1) - 1;
        let mesh_width = edges
            .iter()
            .map(|&(a, b)| euclid(&vertices[a], &vertices[b]))
            .fold(0.0, f64::max);
        Self {
            vertices,
            simplices,
            index,
            edges,
            neighbors,
            dim,
            mesh_width,
        }
    }

    /// A single point.
    pub fn point() -> Self {
        Self::new(vec![vec![0.0]], &[]).expect("point space")
    }

    /// `[a, b]` cut into `segments` equal edges.
    pub fn interval(a: f64, b: f64, segments: usize) -> Result<Self> {
        if segments == 0 || !(b > a) {
            return Err(Error::invalid("interval needs a < b and at least one segment"));
        }
        let vertices = (0..=segments)
            .map(|i| vec![a + (b - a) * i as f64 / segments as f64])
            .collect();
        let simplices: Vec<Vec<usize>> = (0..segments).map(|i| vec![i, i + 1]).collect();
        Self::new(vertices, &simplices)
    }

    /// The standard `d`-simplex with vertices `0, e_1, …, e_d` in `R^d`.
    pub fn standard_simplex(d: usize) -> Self {
        let d_amb = d.max(1);
        let mut vertices = vec![vec![0.0; d_amb]];
        for i in 0..d {
            let mut v = vec![0.0; d_amb];
            v[i] = 1.0;
            vertices.push(v);
        }
        Self::new(vertices, &[(0..=d).collect()]).expect("standard simplex")
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn simplices(&self) -> &[Vec<usize>] {
        &self.simplices
    }

    pub fn simplex_id(&self, s: &[usize]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh_width(&self) -> f64 {
        self.mesh_width
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        euclid(&self.vertices[x], &self.vertices[y])
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.vertices.len() {
            for j in i + 1..self.vertices.len() {
                d = d.max(self.distance(i, j));
            }
        }
        d
    }

    /// Vertex whose coordinates match `coords` within `eps`.
    pub fn find_vertex(&self, coords: &[f64], eps: f64) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| v.len() == coords.len() && euclid(v, coords) <= eps)
    }

    /// `r`-fold barycentric subdivision.
    pub fn subdivide(&self, r: usize) -> SampledSpace {
        self.subdivide_tracking(r, &[]).0
    }

    /// Subdivide and carry subcomplexes along: a new simplex (a chain of old
    /// simplices) lies in the image of `S` iff the chain's top lies in `S`.
    pub fn subdivide_tracking(&self, r: usize, subs: &[Subcomplex]) -> (SampledSpace, Vec<Subcomplex>) {
        let mut space = self.clone();
        let mut subs: Vec<Subcomplex> = subs.to_vec();
        for _ in 0..r {
            let (next, tops) = space.barycentric_once();
            subs = subs
                .iter()
                .map(|s| {
                    let ids = next
                        .simplices
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| s.simplices.contains(&tops[*i]))
                        .map(|(i, _)| i)
                        .collect();
                    Subcomplex::from_ids(&next, ids)
                })
                .collect();
            space = next;
        }
        (space, subs)
    }

    /// One barycentric subdivision. Returns the new space and, for every new
    /// simplex, the id of the old simplex at the top of its chain.
    fn barycentric_once(&self) -> (SampledSpace, Vec<usize>) {
        // New vertex i is the barycenter of old simplex i; 0-simplices come
        // first, so old vertex coordinates keep their indices.
        let vertices: Vec<Vec<f64>> = self
            .simplices
            .iter()
            .map(|s| {
                let m = self.ambient_dim();
                let mut c = vec![0.0; m];
                for &v in s {
                    for (ci, x) in c.iter_mut().zip(&self.vertices[v]) {
                        *ci += x;
                    }
                }
                c.iter().map(|x| x / s.len() as f64).collect()
            })
            .collect();
        // Chains ending at each simplex, built in order of increasing size.
        let mut chains: Vec<Vec<Vec<usize>>> = Vec::with_capacity(self.simplices.len());
        for (sid, s) in self.simplices.iter().enumerate() {
            let mut mine = vec![vec![sid]];
            for face in proper_faces(s) {
                let fid = self.index[&face];
                for c in &chains[fid] {
                    let mut c = c.clone();
                    c.push(sid);
                    mine.push(c);
                }
            }
            chains.push(mine);
        }
        let mut new_simplices = Vec::new();
        let mut tops = Vec::new();
        for (sid, cs) in chains.into_iter().enumerate() {
            for mut c in cs {
                c.sort_unstable();
                new_simplices.push(c);
                tops.push(sid);
            }
        }
        let space = Self::assemble(vertices, new_simplices.clone());
        // `assemble` reorders; map tops to the new order.
        let mut top_of = vec![0; space.simplices.len()];
        for (s, t) in new_simplices.iter().zip(tops) {
            top_of[space.index[s]] = t;
        }
        (space, top_of)
    }

    pub fn whole(&self) -> Subcomplex {
        Subcomplex::from_ids(self, (0..self.simplices.len()).collect())
    }

    pub fn empty(&self) -> Subcomplex {
        Subcomplex {
            simplices: BTreeSet::new(),
            vertices: BTreeSet::new(),
        }
    }

    /// Smallest subcomplex containing the given simplices.
    pub fn closure_of(&self, simplices: &[Vec<usize>]) -> Result<Subcomplex> {
        let mut ids = BTreeSet::new();
        for s in simplices {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            if self.simplex_id(&s).is_none() {
                return Err(Error::invalid(format!("{s:?} is not a simplex of the space")));
            }
            for f in nonempty_subsets(&s) {
                ids.insert(self.index[&f]);
            }
        }
        Ok(Subcomplex::from_ids(self, ids))
    }

    /// Full subcomplex spanned by a vertex set: every simplex all of whose
    /// vertices lie in the set.
    pub fn full_subcomplex<'a>(&self, verts: impl IntoIterator<Item = &'a usize>) -> Subcomplex {
        let set: BTreeSet<usize> = verts.into_iter().copied().collect();
        let ids = self
            .simplices
            .iter()
            .enumerate()
            .filter(|(_, s)| s.iter().all(|v| set.contains(v)))
            .map(|(i, _)| i)
            .collect();
        Subcomplex::from_ids(self, ids)
    }

    /// Full subcomplex on the vertices inside an axis-aligned box.
    pub fn full_subcomplex_in_box(&self, lo: &[f64], hi: &[f64], eps: f64) -> Subcomplex {
        let verts: Vec<usize> = (0..self.num_vertices())
            .filter(|&v| {
                self.vertices[v]
                    .iter()
                    .enumerate()
                    .all(|(k, x)| *x >= lo[k] - eps && *x <= hi[k] + eps)
            })
            .collect();
        self.full_subcomplex(&verts)
    }
}

/// Closed subset encoded as a face-closed set of simplex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subcomplex {
    simplices: BTreeSet<usize>,
    vertices: BTreeSet<usize>,
}

impl Subcomplex {
    fn from_ids(space: &SampledSpace, ids: BTreeSet<usize>) -> Self {
        let vertices = ids
            .iter()
            .filter(|&&i| space.simplices[i].len() == 1)
            .map(|&i| space.simplices[i][0])
            .collect();
        Self {
            simplices: ids,
            vertices,
        }
    }

    pub fn simplex_ids(&self) -> &BTreeSet<usize> {
        &self.simplices
    }

    pub fn vertices(&self) -> &BTreeSet<usize> {
        &self.vertices
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn is_subset_of(&self, other: &Subcomplex) -> bool {
        self.simplices.is_subset(&other.simplices)
    }

    /// Face-closure check against the parent space.
    pub fn is_closed_in(&self, space: &SampledSpace) -> bool {
        self.simplices.iter().all(|&i| {
            proper_faces(&space.simplices[i])
                .iter()
                .all(|f| space.simplex_id(f).is_some_and(|id| self.simplices.contains(&id)))
        })
    }

    pub fn union(&self, other: &Subcomplex) -> Subcomplex {
        Subcomplex {
            simplices: self.simplices.union(&other.simplices).copied().collect(),
            vertices: self.vertices.union(&other.vertices).copied().collect(),
        }
    }

    pub fn intersection(&self, other: &Subcomplex) -> Subcomplex {
        Subcomplex {
            simplices: self.simplices.intersection(&other.simplices).copied().collect(),
            vertices: self.vertices.intersection(&other.vertices).copied().collect(),
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn nonempty_subsets(s: &[usize]) -> Vec<Vec<usize>> {
    let k = s.len();
    (1u64..(1u64 << k))
        .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect())
        .collect()
}

fn proper_faces(s: &[usize]) -> Vec<Vec<usize>> {
    let mut f = nonempty_subsets(s);
    f.retain(|x| x.len() < s.len());
    f
}

/// Euclidean distance from sample point `x` to the nearest sample point of `s`.
pub fn dist_to(space: &SampledSpace, s: &Subcomplex, x: usize) -> Result<f64> {
    dist_to_points(space, s.vertices.iter().copied(), x)
}

pub(crate) fn dist_to_points(
    space: &SampledSpace,
    points: impl IntoIterator<Item = usize>,
    x: usize,
) -> Result<f64> {
    points
        .into_iter()
        .map(|y| space.distance(x, y))
        .min_by(f64::total_cmp)
        .ok_or(Error::EmptySet)
}

/// Nearest sample point of a set (lowest index on ties).
pub(crate) fn nearest_point(
    space: &SampledSpace,
    points: impl IntoIterator<Item = usize>,
    x: usize,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for y in points {
        let d = space.distance(x, y);
        if best.is_none_or(|(bd, by)| d < bd || (d == bd && y < by)) {
            best = Some((d, y));
        }
    }
    best.map(|b| b.1)
}

/// `f(x) = d(x, A) / (d(x, A) + d(x, B))` at every sample point.
pub fn urysohn(space: &SampledSpace, a: &Subcomplex, b: &Subcomplex) -> Result<Vec<f64>> {
    if a.vertices.is_empty() || b.vertices.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(v) = a.vertices.intersection(&b.vertices).next() {
        return Err(Error::invalid(format!("urysohn sets share sample point {v}")));
    }
    (0..space.num_vertices())
        .map(|x| {
            let da = dist_to(space, a, x)?;
            let db = dist_to(space, b, x)?;
            Ok(da / (da + db))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval() -> SampledSpace {
        SampledSpace::new(vec![vec![0.0], vec![1.0]], &[vec![0, 1]]).unwrap()
    }

    #[test]
    fn subdivide_zero_is_identity() {
        let k = unit_interval();
        assert_eq!(k.subdivide(0), k);
    }

    #[test]
    fn subdivide_interval_once() {
        let k = unit_interval().subdivide(1);
        assert_eq!(k.num_vertices(), 3);
        assert_eq!(k.edges().len(), 2);
        assert!((k.mesh_width() - 0.5).abs() < 1e-15);
        assert_eq!(k.dim(), 1);
    }

    #[test]
    fn subdivide_keeps_original_vertices() {
        let k = SampledSpace::standard_simplex(2);
        let s = k.subdivide(2);
        for (i, v) in k.vertices().iter().enumerate() {
            assert_eq!(s.vertex(i), v.as_slice());
        }
        assert!(s.mesh_width() < k.mesh_width());
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn faces_are_listed() {
        let k = SampledSpace::standard_simplex(3).subdivide(1);
        for s in k.simplices() {
            for f in proper_faces(s) {
                assert!(k.simplex_id(&f).is_some());
            }
        }
    }

    #[test]
    fn distance_examples() {
        let k = unit_interval().subdivide(3);
        let zero = k.full_subcomplex(&[0]);
        let one = k.find_vertex(&[1.0], 1e-12).unwrap();
        assert_eq!(dist_to(&k, &zero, 0).unwrap(), 0.0);
        assert!((dist_to(&k, &zero, one).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(dist_to(&k, &k.empty(), 0), Err(Error::EmptySet));
    }

    #[test]
    fn urysohn_examples() {
        let k = unit_interval().subdivide(1);
        let a = k.full_subcomplex(&[0]);
        let b = k.full_subcomplex(&[1]);
        let f = urysohn(&k, &a, &b).unwrap();
        let mid = k.find_vertex(&[0.5], 1e-12).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 1.0);
        assert!((f[mid] - 0.5).abs() < 1e-15);
        assert!(urysohn(&k, &a, &a).is_err());
    }

    #[test]
    fn tracking_subcomplexes() {
        let k = unit_interval();
        let left = k.full_subcomplex(&[0]);
        let (s, subs) = k.subdivide_tracking(2, &[left, k.whole()]);
        assert_eq!(subs[0].vertices().len(), 1);
        assert!(subs[0].is_closed_in(&s));
        assert_eq!(subs[1].vertices().len(), s.num_vertices());
    }
}
