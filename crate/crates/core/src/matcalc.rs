//! Dense Hermitian matrix numerics.
//!
//! Eigendecomposition is cyclic complex Jacobi. Before rotating, the matrix is
//! split into the connected components of its exact sparsity pattern, so
//! block-diagonal (in particular diagonal) inputs cost only as much as their
//! blocks. Everything downstream (functional calculus, spectral projections,
//! rank) goes through [`Eigh`].

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const MAX_SWEEPS: usize = 100;

/// General dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Product skipping exact zeros of the left factor, which keeps sparse
    /// (coordinate) operands cheap.
    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { data, ..*self }
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { data, ..*self }
    }

    pub fn scale(&self, s: C64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self { data, ..*self }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value, via the Gram matrix.
    pub fn op_norm(&self, tol: &Tolerances) -> f64 {
        let gram = HermMatrix::from_cmatrix_unchecked(self.adjoint().matmul(self));
        gram.eigh(tol).max().max(0.0).sqrt()
    }
}

/// Hermitian matrix; the stored entries are exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix {
    inner: Arc<CMatrix>,
}

impl HermMatrix {
    /// Accepts `m` if it equals its adjoint within `tol.herm` (relative to the
    /// largest entry), storing the exact Hermitian part.
    pub fn new(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::Dimension {
                expected: m.rows,
                got: m.cols,
            });
        }
        let n = m.rows;
        let mut deviation: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                deviation = deviation.max((m.get(i, j) - m.get(j, i).conj()).norm());
            }
        }
        if deviation > tol.herm * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::from_cmatrix_unchecked(m))
    }

    /// Symmetrizes without checking.
    pub(crate) fn from_cmatrix_unchecked(mut m: CMatrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            let d = m.get(i, i);
            m.set(i, i, C64::new(d.re, 0.0));
            for j in i + 1..n {
                let v = (m.get(i, j) + m.get(j, i).conj()) * 0.5;
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        Self { inner: Arc::new(m) }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Arc::new(CMatrix::zeros(n, n)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Arc::new(CMatrix::identity(n)),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, C64::new(*d, 0.0));
        }
        Self { inner: Arc::new(m) }
    }

    /// Orthogonal projection onto the span of the columns of an isometry `frame`.
    pub fn projector(frame: &CMatrix) -> Self {
        Self::from_cmatrix_unchecked(frame.matmul(&frame.adjoint()))
    }

    /// Projection onto the given coordinate axes.
    pub fn coordinate_projection(n: usize, axes: &[usize]) -> Self {
        let mut diag = vec![0.0; n];
        for &a in axes {
            diag[a] = 1.0;
        }
        Self::from_diag(&diag)
    }

    pub fn n(&self) -> usize {
        self.inner.rows
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner.get(i, j)
    }

    pub fn as_cmatrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn add(&self, other: &HermMatrix) -> Self {
        Self {
            inner: Arc::new(self.inner.add(&other.inner)),
        }
    }

    pub fn sub(&self, other: &HermMatrix) -> Self {
        Self {
            inner: Arc::new(self.inner.sub(&other.inner)),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: Arc::new(self.inner.scale(C64::new(s, 0.0))),
        }
    }

    /// `(1 - s) self + s other`.
    pub fn lerp(&self, other: &HermMatrix, s: f64) -> Self {
        let data = self
            .inner
            .data
            .iter()
            .zip(&other.inner.data)
            .map(|(a, b)| a * (1.0 - s) + b * s)
            .collect();
        Self {
            inner: Arc::new(CMatrix { data, ..*self.inner }),
        }
    }

    pub fn matmul(&self, other: &HermMatrix) -> CMatrix {
        self.inner.matmul(&other.inner)
    }

    /// `u self u*`.
    pub fn conjugate(&self, u: &CMatrix) -> Self {
        Self::from_cmatrix_unchecked(u.matmul(&self.inner).matmul(&u.adjoint()))
    }

    /// `p self p` for a projection `p`.
    pub fn compress(&self, p: &HermMatrix) -> Self {
        Self::from_cmatrix_unchecked(p.inner.matmul(&self.inner).matmul(&p.inner))
    }

    pub fn block_diag(blocks: &[&HermMatrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.n()).sum();
        let mut m = CMatrix::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n() {
                for j in 0..b.n() {
                    m.set(off + i, off + j, b.get(i, j));
                }
            }
            off += b.n();
        }
        Self { inner: Arc::new(m) }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    pub fn eigh(&self, tol: &Tolerances) -> Eigh {
        eigh(self, tol)
    }

    pub fn op_norm(&self, tol: &Tolerances) -> f64 {
        let e = self.eigh(tol);
        e.max().abs().max(e.min().abs())
    }

    pub fn min_eig(&self, tol: &Tolerances) -> f64 {
        self.eigh(tol).min()
    }

    pub fn is_psd(&self, tol: &Tolerances) -> bool {
        let e = self.eigh(tol);
        e.min() >= -tol.psd * e.max().abs().max(1.0)
    }

    /// Operator norm of `self - other`.
    pub fn dist(&self, other: &HermMatrix, tol: &Tolerances) -> f64 {
        if Arc::ptr_eq(&self.inner, &other.inner) {
            return 0.0;
        }
        self.sub(other).op_norm(tol)
    }

    pub fn ptr_eq(&self, other: &HermMatrix) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// Report serialization: size plus interleaved real/imaginary parts.
    pub fn to_wire(&self) -> WireMatrix {
        let entries = self.inner.data.iter().flat_map(|z| [z.re, z.im]).collect();
        WireMatrix { n: self.n(), entries }
    }
}

/// Serialized matrix: `entries` holds `re, im` pairs in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
}

impl WireMatrix {
    pub fn to_matrix(&self, tol: &Tolerances) -> Result<HermMatrix> {
        if self.entries.len() != 2 * self.n * self.n {
            return Err(Error::Dimension {
                expected: 2 * self.n * self.n,
                got: self.entries.len(),
            });
        }
        let data = self
            .entries
            .chunks_exact(2)
            .map(|c| C64::new(c[0], c[1]))
            .collect();
        HermMatrix::new(CMatrix::from_vec(self.n, self.n, data)?, tol)
    }
}

#[derive(Clone, Debug)]
struct EigBlock {
    idx: Vec<usize>,
    values: Vec<f64>,
    /// Columns are eigenvectors in block-local coordinates.
    vecs: CMatrix,
}

/// Eigendecomposition `A = U diag(λ) U*`, stored per sparsity block.
#[derive(Clone, Debug)]
pub struct Eigh {
    n: usize,
    blocks: Vec<EigBlock>,
}

impl Eigh {
    /// All eigenvalues in ascending order.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn max(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
            .max(if self.n == 0 { 0.0 } else { f64::NEG_INFINITY })
    }

    pub fn min(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .fold(f64::INFINITY, f64::min)
            .min(if self.n == 0 { 0.0 } else { f64::INFINITY })
    }

    pub fn norm(&self) -> f64 {
        self.max().abs().max(self.min().abs())
    }

    /// Eigenpairs in descending eigenvalue order (ties broken by position),
    /// with eigenvectors embedded in `C^n`.
    pub fn pairs_desc(&self) -> Vec<(f64, Vec<C64>)> {
        let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(self.n);
        for (bi, b) in self.blocks.iter().enumerate() {
            for (k, v) in b.values.iter().enumerate() {
                keyed.push((*v, bi, k));
            }
        }
        keyed.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(self.blocks[a.1].idx[0].cmp(&self.blocks[b.1].idx[0]))
                .then(a.2.cmp(&b.2))
        });
        keyed
            .into_iter()
            .map(|(v, bi, k)| {
                let b = &self.blocks[bi];
                let mut vec = vec![ZERO; self.n];
                for (local, &global) in b.idx.iter().enumerate() {
                    vec[global] = b.vecs.get(local, k);
                }
                (v, vec)
            })
            .collect()
    }

    /// `U diag(φ(λ)) U*`.
    pub fn apply(&self, phi: impl Fn(f64) -> f64) -> HermMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for b in &self.blocks {
            let fvals: Vec<f64> = b.values.iter().map(|&l| phi(l)).collect();
            let m = b.idx.len();
            for i in 0..m {
                for j in i..m {
                    let mut acc = ZERO;
                    for k in 0..m {
                        if fvals[k] != 0.0 {
                            acc += b.vecs.get(i, k) * b.vecs.get(j, k).conj() * fvals[k];
                        }
                    }
                    out.set(b.idx[i], b.idx[j], acc);
                    out.set(b.idx[j], b.idx[i], acc.conj());
                }
            }
        }
        HermMatrix::from_cmatrix_unchecked(out)
    }

    /// Number of eigenvalues strictly above `level`.
    pub fn count_above(&self, level: f64) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter())
            .filter(|&&v| v > level)
            .count()
    }

    /// Numerical rank: eigenvalues above `tol.rank * ‖A‖`.
    pub fn rank(&self, tol: &Tolerances) -> usize {
        let norm = self.norm();
        if norm == 0.0 {
            return 0;
        }
        self.count_above(tol.rank * norm)
    }

    /// Eigenvalues sorted descending.
    pub fn values_desc(&self) -> Vec<f64> {
        let mut v = self.values();
        v.reverse();
        v
    }
}

/// Connected components of the exact nonzero pattern.
fn sparsity_blocks(a: &CMatrix) -> Vec<Vec<usize>> {
    let n = a.rows;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if a.get(i, j) != ZERO {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn eigh(a: &HermMatrix, tol: &Tolerances) -> Eigh {
    let m = a.as_cmatrix();
    let n = m.rows;
    let blocks = sparsity_blocks(m)
        .into_iter()
        .map(|idx| {
            let b = idx.len();
            if b == 1 {
                return EigBlock {
                    values: vec![m.get(idx[0], idx[0]).re],
                    vecs: CMatrix::identity(1),
                    idx,
                };
            }
            let mut local = CMatrix::from_fn(b, b, |i, j| m.get(idx[i], idx[j]));
            let (values, vecs) = jacobi(&mut local, tol.eig);
            EigBlock { idx, values, vecs }
        })
        .collect();
    Eigh { n, blocks }
}

/// Cyclic Jacobi on a dense Hermitian matrix. Returns ascending eigenvalues
/// and the matching eigenvector columns.
fn jacobi(a: &mut CMatrix, rel_tol: f64) -> (Vec<f64>, CMatrix) {
    let n = a.rows;
    let mut v = CMatrix::identity(n);
    let frob = a.frobenius();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= rel_tol * frob || frob == 0.0 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let z = a.get(p, q);
                let r = z.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                if r < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a.set(p, q, ZERO);
                    a.set(q, p, ZERO);
                    continue;
                }
                let phase = z / r;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e_minus = phase.conj();
                // A <- A J
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * e_minus * s);
                    a.set(k, q, akp * s + akq * e_minus * c);
                }
                // A <- J* A
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * phase * s);
                    a.set(q, k, apk * s + aqk * phase * c);
                }
                a.set(p, p, C64::new(app - t * r, 0.0));
                a.set(q, q, C64::new(aqq + t * r, 0.0));
                a.set(p, q, ZERO);
                a.set(q, p, ZERO);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * e_minus * s);
                    v.set(k, q, vkp * s + vkq * e_minus * c);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a.get(i, i).re).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    (values, vecs)
}

/// `U diag(φ(λ_i)) U*`.
pub fn func_calc(phi: impl Fn(f64) -> f64, a: &HermMatrix, tol: &Tolerances) -> HermMatrix {
    a.eigh(tol).apply(phi)
}

/// Positive part `(A - t)_+`.
pub fn cutdown(a: &HermMatrix, t: f64, tol: &Tolerances) -> Result<HermMatrix> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("cutdown level must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(a.eigh(tol).apply(|l| l.max(0.0)));
    }
    Ok(func_calc(|l| (l - t).max(0.0), a, tol))
}

/// Projection onto the eigenspaces with eigenvalue above `eta`.
pub fn spectral_proj(a: &HermMatrix, eta: f64, tol: &Tolerances) -> Result<HermMatrix> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("cut level must be positive, got {eta}")));
    }
    let e = a.eigh(tol);
    check_gap(&e, eta, tol)?;
    Ok(e.apply(|l| if l > eta { 1.0 } else { 0.0 }))
}

pub(crate) fn check_gap(e: &Eigh, level: f64, tol: &Tolerances) -> Result<()> {
    for l in e.values() {
        if (l - level).abs() <= tol.gap {
            return Err(Error::IllPosedCut {
                level,
                eigenvalue: l,
                gap: tol.gap,
            });
        }
    }
    Ok(())
}

/// Count of eigenvalues above `tol.rank * ‖A‖`.
pub fn rank_tol(a: &HermMatrix, tol: &Tolerances) -> usize {
    a.eigh(tol).rank(tol)
}

/// The ramp `f_s`: zero at 0, linear on `[0, s]`, one on `[s, ∞)`.
pub fn ramp(s: f64) -> impl Fn(f64) -> f64 {
    move |l: f64| {
        if l <= 0.0 {
            0.0
        } else if l >= s {
            1.0
        } else {
            l / s
        }
    }
}

/// `f_s(A)`. For `s = 1` and spectrum in `[0, 1]` this is `A` itself.
pub fn ramp_apply(a: &HermMatrix, s: f64, tol: &Tolerances) -> Result<HermMatrix> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::invalid(format!("ramp parameter must lie in (0, 1], got {s}")));
    }
    Ok(func_calc(ramp(s), a, tol))
}

/// Orthonormalize the columns of `m` symmetrically (`M (M*M)^{-1/2}`).
/// Returns the frame and the smallest singular value of `m`.
pub fn lowdin(m: &CMatrix, tol: &Tolerances) -> (CMatrix, f64) {
    if m.cols == 0 {
        return (m.clone(), f64::INFINITY);
    }
    let gram = HermMatrix::from_cmatrix_unchecked(m.adjoint().matmul(m));
    let e = gram.eigh(tol);
    let smin = e.min().max(0.0).sqrt();
    if smin == 0.0 {
        return (m.clone(), 0.0);
    }
    let inv_sqrt = e.apply(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
    (m.matmul(inv_sqrt.as_cmatrix()), smin)
}
