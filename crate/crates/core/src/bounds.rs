//! Integer rank bounds encoded as nested chains of closed subcomplexes, and
//! grid-valued semicontinuous envelopes of real functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{SampledSpace, Subcomplex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Lower semicontinuous upper bound `f`; levels are `{f <= n_i}`, values increase.
    LscUpper,
    /// Upper semicontinuous lower bound `g`; levels are `{g >= m_j}`, values decrease.
    UscLower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundChain {
    kind: BoundKind,
    values: Vec<i64>,
    levels: Vec<Subcomplex>,
    num_vertices: usize,
}

impl BoundChain {
    pub fn new(
        space: &SampledSpace,
        kind: BoundKind,
        values: Vec<i64>,
        levels: Vec<Subcomplex>,
    ) -> Result<Self> {
        if values.is_empty() || values.len() != levels.len() {
            return Err(Error::invalid("a bound chain needs one value per level"));
        }
        let monotone = values.windows(2).all(|w| match kind {
            BoundKind::LscUpper => w[0] < w[1],
            BoundKind::UscLower => w[0] > w[1],
        });
        if !monotone {
            return Err(Error::invalid(format!("{kind:?} chain values must be strictly monotone: {values:?}")));
        }
        for (i, l) in levels.iter().enumerate() {
            if !l.is_closed_in(space) {
                return Err(Error::invalid(format!("level {i} is not closed under faces")));
            }
        }
        for (i, w) in levels.windows(2).enumerate() {
            if !w[0].is_subset_of(&w[1]) {
                return Err(Error::invalid(format!("level {i} is not contained in level {}", i + 1)));
            }
        }
        if levels.last().map(|l| l.simplex_ids().len()) != Some(space.simplices().len()) {
            return Err(Error::invalid("the last level of a bound chain must be the whole space"));
        }
        Ok(Self {
            kind,
            values,
            levels,
            num_vertices: space.num_vertices(),
        })
    }

    pub fn constant(space: &SampledSpace, kind: BoundKind, c: i64) -> Self {
        Self {
            kind,
            values: vec![c],
            levels: vec![space.whole()],
            num_vertices: space.num_vertices(),
        }
    }

    pub fn kind(&self) -> BoundKind {
        self.kind
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn levels(&self) -> &[Subcomplex] {
        &self.levels
    }

    /// Index of the innermost level containing `x`.
    pub fn level_of(&self, x: usize) -> Result<usize> {
        if x >= self.num_vertices {
            return Err(Error::invalid(format!("{x} is not a sample point of the bound's space")));
        }
        Ok(self
            .levels
            .iter()
            .position(|l| l.contains_vertex(x))
            .expect("last level is the whole space"))
    }

    pub fn eval(&self, x: usize) -> Result<i64> {
        Ok(self.values[self.level_of(x)?])
    }

    pub(crate) fn at(&self, x: usize) -> i64 {
        self.eval(x).expect("sample point in range")
    }
}

/// Free-function form of [`BoundChain::eval`].
pub fn eval_bound(b: &BoundChain, x: usize) -> Result<i64> {
    b.eval(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semicontinuity {
    Lsc,
    Usc,
    None,
}

/// Function with values in `{k/n}`, stored as exact numerators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridFunction {
    n: u64,
    numerators: Vec<i64>,
    tag: Semicontinuity,
}

impl GridFunction {
    pub fn new(n: u64, numerators: Vec<i64>, tag: Semicontinuity) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid denominator must be positive"));
        }
        Ok(Self { n, numerators, tag })
    }

    pub fn denominator(&self) -> u64 {
        self.n
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn numerator(&self, x: usize) -> i64 {
        self.numerators[x]
    }

    pub fn value(&self, x: usize) -> f64 {
        self.numerators[x] as f64 / self.n as f64
    }

    pub fn tag(&self) -> Semicontinuity {
        self.tag
    }
}

/// Exact `floor(x * n)` for finite `x`, computed on the binary expansion of `x`.
pub fn floor_mul(x: f64, n: u64) -> i64 {
    assert!(x.is_finite(), "floor_mul needs a finite value");
    if x == 0.0 {
        return 0;
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i128;
    let (mantissa, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1i128 << 52), exp_bits - 1075)
    };
    let p = sign * mantissa * n as i128;
    let out = if exp >= 0 {
        p << exp
    } else if -exp >= 127 {
        if p < 0 {
            -1
        } else {
            0
        }
    } else {
        p >> (-exp)
    };
    out as i64
}

/// Exact `ceil(x * n)`.
pub fn ceil_mul(x: f64, n: u64) -> i64 {
    -floor_mul(-x, n)
}

/// Lower envelope `g_α`: `g(x) = k/n` where `k/n < α(x) <= (k+1)/n`.
pub fn floor_env(alpha: &[f64], n: u64) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::invalid("grid denominator must be positive"));
    }
    check_finite(alpha)?;
    let nums = alpha.iter().map(|&a| ceil_mul(a, n) - 1).collect();
    GridFunction::new(n, nums, Semicontinuity::Lsc)
}

/// Upper envelope `h_α`: `h(x) = (k+1)/n` where `k/n <= α(x) < (k+1)/n`.
pub fn ceil_env(alpha: &[f64], n: u64) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::invalid("grid denominator must be positive"));
    }
    check_finite(alpha)?;
    let nums = alpha.iter().map(|&a| floor_mul(a, n) + 1).collect();
    GridFunction::new(n, nums, Semicontinuity::Usc)
}

fn check_finite(alpha: &[f64]) -> Result<()> {
    match alpha.iter().position(|a| !a.is_finite()) {
        Some(i) => Err(Error::invalid(format!("envelope input is not finite at sample point {i}"))),
        None => Ok(()),
    }
}

/// Turn a semicontinuous grid function into a bound chain with values
/// `n * G(x)`.
///
/// Level sets are taken as full subcomplexes on their vertex sets. This
/// reads `G` on an open simplex as the max (lsc) or min (usc) of its vertex
/// values, which makes every level set closed.
pub fn discretize_to_chain(g: &GridFunction, space: &SampledSpace) -> Result<BoundChain> {
    if g.numerators.len() != space.num_vertices() {
        return Err(Error::Dimension {
            expected: space.num_vertices(),
            got: g.numerators.len(),
        });
    }
    let mut distinct: Vec<i64> = g.numerators.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let (kind, values) = match g.tag {
        Semicontinuity::Lsc => (BoundKind::LscUpper, distinct),
        Semicontinuity::Usc => {
            distinct.reverse();
            (BoundKind::UscLower, distinct)
        }
        Semicontinuity::None => {
            return Err(Error::invalid("only lsc or usc grid functions define a bound chain"))
        }
    };
    let levels = values
        .iter()
        .map(|&v| {
            let verts: Vec<usize> = (0..space.num_vertices())
                .filter(|&x| match kind {
                    BoundKind::LscUpper => g.numerators[x] <= v,
                    BoundKind::UscLower => g.numerators[x] >= v,
                })
                .collect();
            space.full_subcomplex(&verts)
        })
        .collect();
    BoundChain::new(space, kind, values, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval() -> SampledSpace {
        SampledSpace::interval(0.0, 1.0, 4).unwrap()
    }

    #[test]
    fn exact_floor_and_ceil() {
        assert_eq!(floor_mul(0.5, 2), 1);
        assert_eq!(floor_mul(-0.25, 2), -1);
        assert_eq!(ceil_mul(0.25, 2), 1);
        assert_eq!(floor_mul(0.7, 10), 6); // 0.7 is slightly below 7/10
        assert_eq!(ceil_mul(0.7, 10), 7);
        assert_eq!(floor_mul(1e-300, 7), 0);
        assert_eq!(floor_mul(-1e-300, 7), -1);
    }

    #[test]
    fn floor_env_half_open_convention() {
        let g = floor_env(&[0.5], 2).unwrap();
        assert_eq!(g.numerator(0), 0);
        let k = interval();
        let alpha: Vec<f64> = k.vertices().iter().map(|v| v[0]).collect();
        let g = floor_env(&alpha, 2).unwrap();
        assert_eq!(g.value(1), 0.0); // x = 0.25
        assert_eq!(g.value(3), 0.5); // x = 0.75
        assert_eq!(g.value(4), 0.5); // x = 1
    }

    #[test]
    fn ceil_env_examples() {
        let h = ceil_env(&[0.0], 3).unwrap();
        assert_eq!(h.numerator(0), 1);
        let h = ceil_env(&[0.25, 0.5], 2).unwrap();
        assert_eq!(h.value(0), 0.5);
        assert_eq!(h.value(1), 1.0);
        assert!(ceil_env(&[0.1], 0).is_err());
        assert!(floor_env(&[0.1], 0).is_err());
    }

    #[test]
    fn chain_lookup() {
        let k = interval();
        let c = BoundChain::constant(&k, BoundKind::UscLower, 3);
        assert!((0..5).all(|x| c.eval(x).unwrap() == 3));
        let e1 = k.full_subcomplex(&[0]);
        let f = BoundChain::new(&k, BoundKind::LscUpper, vec![1, 2], vec![e1, k.whole()]).unwrap();
        assert_eq!(f.eval(0).unwrap(), 1);
        assert_eq!(f.eval(2).unwrap(), 2);
        assert!(f.eval(99).is_err());
    }

    #[test]
    fn chain_validation() {
        let k = interval();
        let e1 = k.full_subcomplex(&[0]);
        assert!(BoundChain::new(&k, BoundKind::LscUpper, vec![2, 1], vec![e1.clone(), k.whole()]).is_err());
        assert!(BoundChain::new(&k, BoundKind::LscUpper, vec![1, 2], vec![k.whole(), e1.clone()]).is_err());
        assert!(BoundChain::new(&k, BoundKind::LscUpper, vec![1], vec![e1]).is_err());
    }

    #[test]
    fn discretize_examples() {
        let k = interval();
        let c = discretize_to_chain(&GridFunction::new(4, vec![2; 5], Semicontinuity::Lsc).unwrap(), &k).unwrap();
        assert_eq!(c.values(), &[2]);
        let g = GridFunction::new(4, vec![1, 1, 3, 3, 3], Semicontinuity::Lsc).unwrap();
        let c = discretize_to_chain(&g, &k).unwrap();
        assert_eq!(c.values(), &[1, 3]);
        assert_eq!(c.kind(), BoundKind::LscUpper);
        assert!((0..5).all(|x| c.eval(x).unwrap() == g.numerator(x)));
        let none = GridFunction::new(4, vec![1; 5], Semicontinuity::None).unwrap();
        assert!(discretize_to_chain(&none, &k).is_err());
    }
}
