//! TOML scenario schema and name resolution.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::bounds::{BoundChain, BoundKind};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::homotopy::MatrixField;
use crate::matcalc::{CMatrix, HermMatrix};
use crate::realize::TargetProfile;
use crate::rsh::{ClutchEntry, ClutchRef, RshDecomposition, Stage};
use crate::space::{SampledSpace, Subcomplex};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub spaces: BTreeMap<String, SpaceDef>,
    #[serde(default)]
    pub subcomplexes: BTreeMap<String, SubcomplexDef>,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldDef>,
    #[serde(default)]
    pub bounds: BTreeMap<String, BoundDef>,
    #[serde(default)]
    pub rsh: BTreeMap<String, RshDef>,
    #[serde(default)]
    pub targets: BTreeMap<String, TargetDef>,
    #[serde(default)]
    pub tasks: Vec<TaskDef>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceDef {
    Point,
    Interval {
        a: f64,
        b: f64,
        segments: usize,
    },
    Simplex {
        dim: usize,
        #[serde(default)]
        subdivisions: usize,
    },
    Complex {
        vertices: Vec<Vec<f64>>,
        simplices: Vec<Vec<usize>>,
        #[serde(default)]
        subdivisions: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcomplexDef {
    pub space: String,
    #[serde(default)]
    pub vertices: Option<Vec<usize>>,
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub whole: bool,
}

/// Matrix field generators. Fields live on `domain` (a subcomplex name) or on
/// the whole space.
#[derive(Debug, Deserialize)]
pub struct FieldDef {
    pub space: String,
    #[serde(default)]
    pub domain: Option<String>,
    pub n: usize,
    #[serde(flatten)]
    pub gen: FieldGen,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldGen {
    /// Constant coordinate projection.
    Projection { coords: Vec<usize> },
    /// Diagonal entries `max(0, c0 + c1·x0 + c2·x0² + …)` per coordinate.
    PolyDiag { entries: Vec<Vec<f64>> },
    /// Literal diagonal values per domain point.
    Diag { values: Vec<Vec<f64>> },
    /// `u D u*` with seeded Gaussian unitary `u` and spectrum `D` of rank
    /// between `rank_min` and `rank_max` at each point.
    RandomPsd {
        rank_min: usize,
        rank_max: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundDef {
    pub space: String,
    pub kind: BoundKind,
    #[serde(default)]
    pub constant: Option<i64>,
    #[serde(default)]
    pub values: Vec<i64>,
    /// Subcomplex names for each level; the last level may be omitted and is
    /// then the whole space.
    #[serde(default)]
    pub levels: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RshDef {
    pub stages: Vec<StageDef>,
    #[serde(default)]
    pub variation_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDef {
    pub space: String,
    pub size: usize,
    #[serde(default)]
    pub boundary: Option<String>,
    #[serde(default)]
    pub clutch: Vec<ClutchDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutchDef {
    pub points: Vec<usize>,
    pub refs: Vec<ClutchRefDef>,
    #[serde(default)]
    pub unitary: Option<UnitaryDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutchRefDef {
    pub stage: usize,
    pub point: usize,
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum UnitaryDef {
    /// `"identity"`.
    Named(String),
    Matrix {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDef {
    pub rsh: String,
    pub eps: f64,
    pub stages: Vec<FunctionDef>,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
}

/// A real function on the sample points of a space.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDef {
    #[serde(default)]
    pub constant: Option<f64>,
    /// Coefficients in the first coordinate, lowest degree first.
    #[serde(default)]
    pub poly: Option<Vec<f64>>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDef {
    pub id: String,
    pub op: String,
    #[serde(default)]
    pub args: toml::Table,
    #[serde(default)]
    pub expect: Expect,
}

#[derive(Debug, Clone, Deserialize, serde::Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default = "yes")]
    pub passed: bool,
}

impl Default for Expect {
    fn default() -> Self {
        Self { passed: true }
    }
}

fn yes() -> bool {
    true
}

fn scen(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

/// A scenario with every named object built.
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub tol: Tolerances,
    pub spaces: HashMap<String, Arc<SampledSpace>>,
    pub subcomplexes: HashMap<String, (String, Subcomplex)>,
    pub fields: HashMap<String, MatrixField>,
    pub bounds: HashMap<String, BoundChain>,
    pub rsh: HashMap<String, RshDecomposition>,
    pub targets: HashMap<String, (String, TargetProfile)>,
    pub tasks: Vec<TaskDef>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<ScenarioFile> {
        toml::from_str(text).map_err(|e| scen(e.to_string()))
    }

    /// Build everything; `seed` and `overrides` take precedence over the file.
    pub fn build(file: ScenarioFile, seed: Option<u64>, overrides: &[String]) -> Result<Self> {
        let mut tol = Tolerances::default();
        for (k, v) in &file.tolerances {
            tol.set(k, *v).map_err(|e| scen(format!("[tolerances]: {e}")))?;
        }
        for o in overrides {
            tol.apply_override(o)?;
        }
        let seed = seed.unwrap_or(file.seed);
        let mut s = Scenario {
            name: file.name.clone().unwrap_or_default(),
            seed,
            tol,
            spaces: HashMap::new(),
            subcomplexes: HashMap::new(),
            fields: HashMap::new(),
            bounds: HashMap::new(),
            rsh: HashMap::new(),
            targets: HashMap::new(),
            tasks: file.tasks.clone(),
        };
        for (name, d) in &file.spaces {
            let sp = build_space(d).map_err(|e| scen(format!("spaces.{name}: {e}")))?;
            s.spaces.insert(name.clone(), Arc::new(sp));
        }
        for (name, d) in &file.subcomplexes {
            let sub = s.build_subcomplex(d).map_err(|e| scen(format!("subcomplexes.{name}: {e}")))?;
            s.subcomplexes.insert(name.clone(), (d.space.clone(), sub));
        }
        for (i, (name, d)) in file.fields.iter().enumerate() {
            let f = s
                .build_field(d, seed.wrapping_add(1000 + i as u64))
                .map_err(|e| scen(format!("fields.{name}: {e}")))?;
            s.fields.insert(name.clone(), f);
        }
        for (name, d) in &file.bounds {
            let b = s.build_bound(d).map_err(|e| scen(format!("bounds.{name}: {e}")))?;
            s.bounds.insert(name.clone(), b);
        }
        for (name, d) in &file.rsh {
            let r = s.build_rsh(d).map_err(|e| scen(format!("rsh.{name}: {e}")))?;
            s.rsh.insert(name.clone(), r);
        }
        for (name, d) in &file.targets {
            let t = s.build_target(d).map_err(|e| scen(format!("targets.{name}: {e}")))?;
            s.targets.insert(name.clone(), (d.rsh.clone(), t));
        }
        let mut ids = std::collections::HashSet::new();
        for t in &s.tasks {
            if !ids.insert(t.id.clone()) {
                return Err(scen(format!("duplicate task id {}", t.id)));
            }
        }
        Ok(s)
    }

    pub fn space(&self, name: &str) -> Result<&Arc<SampledSpace>> {
        self.spaces.get(name).ok_or_else(|| scen(format!("unknown space {name}")))
    }

    pub fn subcomplex(&self, name: &str, space: &str) -> Result<&Subcomplex> {
        match self.subcomplexes.get(name) {
            Some((sp, sub)) if sp == space => Ok(sub),
            Some((sp, _)) => Err(scen(format!("subcomplex {name} lives on {sp}, not {space}"))),
            None => Err(scen(format!("unknown subcomplex {name}"))),
        }
    }

    pub fn field(&self, name: &str) -> Result<&MatrixField> {
        self.fields.get(name).ok_or_else(|| scen(format!("unknown field {name}")))
    }

    pub fn bound(&self, name: &str) -> Result<&BoundChain> {
        self.bounds.get(name).ok_or_else(|| scen(format!("unknown bound {name}")))
    }

    pub fn decomposition(&self, name: &str) -> Result<&RshDecomposition> {
        self.rsh.get(name).ok_or_else(|| scen(format!("unknown rsh model {name}")))
    }

    pub fn target(&self, name: &str) -> Result<&(String, TargetProfile)> {
        self.targets.get(name).ok_or_else(|| scen(format!("unknown target {name}")))
    }

    fn build_subcomplex(&self, d: &SubcomplexDef) -> Result<Subcomplex> {
        let sp = self.space(&d.space)?;
        match (&d.vertices, &d.lo, &d.hi, d.whole) {
            (Some(v), None, None, false) => {
                if let Some(x) = v.iter().find(|&&x| x >= sp.num_vertices()) {
                    return Err(scen(format!("vertex {x} out of range")));
                }
                Ok(sp.full_subcomplex(v))
            }
            (None, Some(lo), Some(hi), false) => {
                if lo.len() != sp.ambient_dim() || hi.len() != sp.ambient_dim() {
                    return Err(scen(format!("box corners need {} coordinates", sp.ambient_dim())));
                }
                Ok(sp.full_subcomplex_in_box(lo, hi, 1e-12))
            }
            (None, None, None, true) => Ok(sp.whole()),
            (None, None, None, false) => Ok(sp.empty()),
            _ => Err(scen("give exactly one of vertices, lo/hi or whole")),
        }
    }

    fn build_field(&self, d: &FieldDef, seed: u64) -> Result<MatrixField> {
        let sp = self.space(&d.space)?.clone();
        let points: Vec<usize> = match &d.domain {
            Some(sub) => self.subcomplex(sub, &d.space)?.vertices().iter().copied().collect(),
            None => (0..sp.num_vertices()).collect(),
        };
        let vals: Vec<HermMatrix> = match &d.gen {
            FieldGen::Projection { coords } => {
                if coords.iter().any(|&c| c >= d.n) {
                    return Err(scen("projection coordinate exceeds n"));
                }
                vec![HermMatrix::coordinate_projection(d.n, coords); points.len()]
            }
            FieldGen::PolyDiag { entries } => {
                if entries.len() > d.n {
                    return Err(scen("more diagonal entries than n"));
                }
                points
                    .iter()
                    .map(|&x| {
                        let t = sp.vertex(x).first().copied().unwrap_or(0.0);
                        let mut diag = vec![0.0; d.n];
                        for (slot, c) in diag.iter_mut().zip(entries) {
                            *slot = poly(c, t).max(0.0);
                        }
                        HermMatrix::from_diag(&diag)
                    })
                    .collect()
            }
            FieldGen::Diag { values } => {
                if values.len() != points.len() || values.iter().any(|v| v.len() != d.n) {
                    return Err(scen(format!("need {} rows of {} diagonal values", points.len(), d.n)));
                }
                values.iter().map(|v| HermMatrix::from_diag(v)).collect()
            }
            FieldGen::RandomPsd {
                rank_min,
                rank_max,
                seed: own,
            } => {
                if rank_min > rank_max || *rank_max > d.n {
                    return Err(scen("need rank_min <= rank_max <= n"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(own.unwrap_or(seed));
                points
                    .iter()
                    .map(|_| random_psd(&mut rng, d.n, *rank_min, *rank_max))
                    .collect()
            }
        };
        MatrixField::new(sp, points, vals, &self.tol)
    }

    fn build_bound(&self, d: &BoundDef) -> Result<BoundChain> {
        let sp = self.space(&d.space)?;
        if let Some(c) = d.constant {
            if !d.values.is_empty() || !d.levels.is_empty() {
                return Err(scen("constant bounds take no values or levels"));
            }
            return Ok(BoundChain::constant(sp, d.kind, c));
        }
        let mut levels = d
            .levels
            .iter()
            .map(|l| self.subcomplex(l, &d.space).cloned())
            .collect::<Result<Vec<_>>>()?;
        if levels.len() + 1 == d.values.len() {
            levels.push(sp.whole());
        }
        BoundChain::new(sp, d.kind, d.values.clone(), levels)
    }

    fn build_rsh(&self, d: &RshDef) -> Result<RshDecomposition> {
        let mut stages = Vec::new();
        for (k, st) in d.stages.iter().enumerate() {
            let sp = self.space(&st.space)?.clone();
            let boundary = match &st.boundary {
                Some(b) => self.subcomplex(b, &st.space)?.clone(),
                None => sp.empty(),
            };
            let mut clutch = BTreeMap::new();
            for c in &st.clutch {
                let unitary = match &c.unitary {
                    None => None,
                    Some(UnitaryDef::Named(n)) if n == "identity" => None,
                    Some(UnitaryDef::Named(n)) => return Err(scen(format!("stage {k}: unknown unitary {n}"))),
                    Some(UnitaryDef::Matrix { re, im }) => Some(complex_matrix(re, im.as_deref())?),
                };
                let refs: Vec<ClutchRef> = c
                    .refs
                    .iter()
                    .map(|r| ClutchRef {
                        stage: r.stage,
                        point: r.point,
                        multiplicity: r.multiplicity,
                    })
                    .collect();
                for &y in &c.points {
                    let entry = ClutchEntry {
                        refs: refs.clone(),
                        unitary: unitary.clone(),
                    };
                    if clutch.insert(y, entry).is_some() {
                        return Err(scen(format!("stage {k}: point {y} has two clutch entries")));
                    }
                }
            }
            stages.push(Stage {
                space: sp,
                size: st.size,
                boundary,
                clutch,
            });
        }
        let mut r = RshDecomposition::new(stages);
        if let Some(v) = d.variation_tol {
            r.variation_tol = v;
        }
        Ok(r)
    }

    fn build_target(&self, d: &TargetDef) -> Result<TargetProfile> {
        let r = self.decomposition(&d.rsh)?;
        if d.stages.len() != r.len() {
            return Err(scen(format!("{} stage functions for {} stages", d.stages.len(), r.len())));
        }
        let h = d
            .stages
            .iter()
            .zip(r.stages())
            .map(|(f, st)| sample_function(f, &st.space))
            .collect::<Result<Vec<_>>>()?;
        match &d.deltas {
            Some(ds) => TargetProfile::with_deltas(r, h, d.eps, ds.clone(), &self.tol),
            None => TargetProfile::new(r, h, d.eps, &self.tol),
        }
    }
}

pub fn sample_function(f: &FunctionDef, sp: &SampledSpace) -> Result<Vec<f64>> {
    match (f.constant, &f.poly, &f.values) {
        (Some(c), None, None) => Ok(vec![c; sp.num_vertices()]),
        (None, Some(p), None) => Ok(sp
            .vertices()
            .iter()
            .map(|v| poly(p, v.first().copied().unwrap_or(0.0)))
            .collect()),
        (None, None, Some(v)) if v.len() == sp.num_vertices() => Ok(v.clone()),
        (None, None, Some(v)) => Err(scen(format!("{} values for {} sample points", v.len(), sp.num_vertices()))),
        _ => Err(scen("give exactly one of constant, poly or values")),
    }
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn build_space(d: &SpaceDef) -> Result<SampledSpace> {
    match d {
        SpaceDef::Point => Ok(SampledSpace::point()),
        SpaceDef::Interval { a, b, segments } => SampledSpace::interval(*a, *b, *segments),
        SpaceDef::Simplex { dim, subdivisions } => Ok(SampledSpace::standard_simplex(*dim).subdivide(*subdivisions)),
        SpaceDef::Complex {
            vertices,
            simplices,
            subdivisions,
        } => Ok(SampledSpace::new(vertices.clone(), simplices)?.subdivide(*subdivisions)),
    }
}

fn complex_matrix(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<CMatrix> {
    let n = re.len();
    if re.iter().any(|r| r.len() != n) || im.is_some_and(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
        return Err(scen("unitary must be a square matrix"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

/// Seeded Gaussian unitary.
pub fn random_unitary(rng: &mut impl Rng, n: usize, tol: &Tolerances) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    crate::matcalc::lowdin(&z, tol).0
}

/// `u D u*` with a spectrum in `[0.05, 1]` of random rank in `[lo, hi]`.
pub fn random_psd(rng: &mut impl Rng, n: usize, lo: usize, hi: usize) -> HermMatrix {
    let rank = rng.random_range(lo..=hi);
    let mut diag = vec![0.0; n];
    for d in diag.iter_mut().take(rank) {
        *d = rng.random_range(0.05..=1.0);
    }
    let u = random_unitary(rng, n, &Tolerances::default());
    HermMatrix::from_diag(&diag).conjugate(&u)
}
