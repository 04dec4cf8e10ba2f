//! The trapezoid family T_{a,b,d} in 2D and the prismatoid family in 3D:
//! lattice points and weights, explicit Horn pairs, blending functions,
//! staged trees, and the catalog of minimal Horn matrices.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{binomial, compositions, multinomial, pow_rat, IntMatrix, MPoly, Rat};
use crate::horn::{minimize, positive_part, sign_pow, validate_horn_pair, HornError, HornPair};
use crate::polytope::{hull_in_span, ldm_at, matrix_m_at, AffineLattice, LatticePolytope, PolytopeError};
use crate::stagedtree::{StagedTree, TreeBuilder, TreeError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("variant {variant} requires {need}")]
    InvalidVariant { variant: String, need: String },
    #[error("row {row} vanishes at the point but has a negative exponent in column {col}")]
    BoundaryPoint { row: usize, col: usize },
    #[error("parameters {0} match no catalog row")]
    UnclassifiedParams(String),
    #[error("toric blending needs a full-dimensional polytope")]
    NotFullDimensional,
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { got: usize, expected: usize },
    #[error("cannot parse row specification `{0}`")]
    RowSpec(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Horn(#[from] HornError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Family2DParams {
    pub a: u32,
    pub b: u32,
    pub d: u32,
}

impl Family2DParams {
    pub fn new(a: u32, b: u32, d: u32) -> Self {
        Self { a, b, d }
    }
}

impl fmt::Display for Family2DParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={} b={} d={}", self.a, self.b, self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrismatoidParams {
    pub a: u32,
    pub a_prime: u32,
    pub b: u32,
    pub b_prime: u32,
    pub d: u32,
    pub l: u32,
}

impl PrismatoidParams {
    pub fn new(a: u32, a_prime: u32, b: u32, b_prime: u32, d: u32, l: u32) -> Result<Self, FamilyError> {
        let p = Self { a, a_prime, b, b_prime, d, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FamilyError> {
        if self.a_prime > self.a || self.b_prime > self.b {
            return Err(FamilyError::InvalidParams(format!("{self}: need a' <= a and b' <= b")));
        }
        if self.l == 0 {
            return Err(FamilyError::InvalidParams(format!("{self}: need l >= 1")));
        }
        Ok(())
    }

    /// a + db, the bottom width at t = 0.
    fn top(&self) -> i64 {
        (self.a + self.d * self.b) as i64
    }

    /// a' + db'.
    fn top_prime(&self) -> i64 {
        (self.a_prime + self.d * self.b_prime) as i64
    }

    /// All tuples with entries in 0..=k and 1 <= l <= k.
    pub fn sweep(k: u32) -> Vec<Self> {
        let mut out = Vec::new();
        for a in 0..=k {
            for a_prime in 0..=a {
                for b in 0..=k {
                    for b_prime in 0..=b {
                        for d in 0..=k {
                            for l in 1..=k.max(1) {
                                out.push(Self { a, a_prime, b, b_prime, d, l });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for PrismatoidParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={} a'={} b={} b'={} d={} l={}",
            self.a, self.a_prime, self.b, self.b_prime, self.d, self.l
        )
    }
}

/// x ↦ ⟨n, x⟩ + c.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineForm {
    pub linear: Vec<i64>,
    pub constant: i64,
}

impl AffineForm {
    pub fn new(linear: Vec<i64>, constant: i64) -> Self {
        Self { linear, constant }
    }

    pub fn eval_int(&self, x: &[i64]) -> i64 {
        self.linear.iter().zip(x).map(|(a, b)| a * b).sum::<i64>() + self.constant
    }

    pub fn eval(&self, x: &[Rat]) -> Rat {
        self.linear
            .iter()
            .zip(x)
            .fold(Rat::from_integer(self.constant.into()), |acc, (a, b)| acc + b * Rat::from_integer((*a).into()))
    }

    /// Σ c_γ h_γ.
    pub fn combine(forms: &[AffineForm], coeffs: &[i64]) -> AffineForm {
        let n = forms.first().map_or(0, |f| f.linear.len());
        let mut linear = vec![0; n];
        let mut constant = 0;
        for (f, &c) in forms.iter().zip(coeffs) {
            for (x, y) in linear.iter_mut().zip(&f.linear) {
                *x += c * y;
            }
            constant += c * f.constant;
        }
        AffineForm { linear, constant }
    }
}

/// One row of a Horn matrix written as an integer combination of h_1, …, h_r.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalRow {
    pub label: String,
    pub coeffs: Vec<i64>,
}

/// Parse `h1,h2,-(h1+h3),-(h2+h5-h6)` into formal rows over `r` forms.
pub fn parse_rows(spec: &str, r: usize) -> Result<Vec<FormalRow>, FamilyError> {
    let bad = || FamilyError::RowSpec(spec.to_string());
    let mut items = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in spec.chars().filter(|c| !c.is_whitespace()) {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    items.push(cur);
    let mut rows = Vec::new();
    for item in items {
        let (outer, body) = match item.strip_prefix("-(").and_then(|s| s.strip_suffix(')')) {
            Some(b) => (-1, b.to_string()),
            None => (1, item.clone()),
        };
        let mut coeffs = vec![0i64; r];
        let mut sign = 1;
        let mut rest = body.as_str();
        while !rest.is_empty() {
            if let Some(s) = rest.strip_prefix('+') {
                sign = 1;
                rest = s;
                continue;
            }
            if let Some(s) = rest.strip_prefix('-') {
                sign = -sign;
                rest = s;
                continue;
            }
            let s = rest.strip_prefix('h').ok_or_else(bad)?;
            let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
            let k: usize = digits.parse().map_err(|_| bad())?;
            if k == 0 || k > r {
                return Err(bad());
            }
            coeffs[k - 1] += outer * sign;
            sign = 1;
            rest = &s[digits.len()..];
        }
        rows.push(FormalRow { label: item, coeffs });
    }
    Ok(rows)
}

const HORN_2D: &str = "h1,h2,h3,h4,-(h1+h3),-(h2+h4)";
const HORN_3D: &str = "h1,h2,h3,h4,h5,h6,-(h1+h4),-(h2+h5),-(h3+h6)";

/// h_1 = s, h_2 = t, h_3 = a+db−s−dt, h_4 = b−t.
pub fn forms_2d(p: Family2DParams) -> Vec<AffineForm> {
    let (a, b, d) = (p.a as i64, p.b as i64, p.d as i64);
    vec![
        AffineForm::new(vec![1, 0], 0),
        AffineForm::new(vec![0, 1], 0),
        AffineForm::new(vec![-1, -d], a + d * b),
        AffineForm::new(vec![0, -1], b),
    ]
}

/// h_1 = s, h_2 = t, h_3 = v and the three translates cutting the right, back and upper facets.
pub fn forms_3d(p: PrismatoidParams) -> Vec<AffineForm> {
    let (b, bp, d, l) = (p.b as i64, p.b_prime as i64, p.d as i64, p.l as i64);
    let drop = p.top() - p.top_prime();
    vec![
        AffineForm::new(vec![1, 0, 0], 0),
        AffineForm::new(vec![0, 1, 0], 0),
        AffineForm::new(vec![0, 0, 1], 0),
        AffineForm::new(vec![-1, -d, -drop], p.top() * l),
        AffineForm::new(vec![0, -1, -(b - bp)], b * l),
        AffineForm::new(vec![0, 0, -1], l),
    ]
}

/// {(i,j): 0≤j≤b, 0≤i≤a+d(b−j)} with j descending, then i ascending.
pub fn points_2d(p: Family2DParams) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for j in (0..=p.b).rev() {
        for i in 0..=p.a + p.d * (p.b - j) {
            out.push(vec![i as i64, j as i64]);
        }
    }
    out
}

pub fn weights_2d(p: Family2DParams) -> Vec<BigInt> {
    points_2d(p)
        .iter()
        .map(|m| {
            let (i, j) = (m[0] as u64, m[1] as u64);
            let wide = (p.a + p.d * (p.b - j as u32)) as u64;
            binomial(p.b as u64, j) * binomial(wide, i)
        })
        .collect()
}

/// Widths of the k and j slices: (bl − (b−b')k, (a+db)l − ((a+db)−(a'+db'))k − dj).
fn slice_3d(p: PrismatoidParams, k: i64, j: i64) -> (i64, i64) {
    let (b, bp, d, l) = (p.b as i64, p.b_prime as i64, p.d as i64, p.l as i64);
    let depth = b * l - (b - bp) * k;
    let width = p.top() * l - (p.top() - p.top_prime()) * k - d * j;
    (depth, width)
}

/// Lattice points (i,j,k) ordered by k, then j, then i.
pub fn points_3d(p: PrismatoidParams) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for k in 0..=p.l as i64 {
        let (depth, _) = slice_3d(p, k, 0);
        for j in 0..=depth {
            let (_, width) = slice_3d(p, k, j);
            for i in 0..=width {
                out.push(vec![i, j, k]);
            }
        }
    }
    out
}

pub fn weights_3d(p: PrismatoidParams) -> Vec<BigInt> {
    points_3d(p)
        .iter()
        .map(|m| {
            let (depth, width) = slice_3d(p, m[2], m[1]);
            binomial(p.l as u64, m[2] as u64) * binomial(depth as u64, m[1] as u64) * binomial(width as u64, m[0] as u64)
        })
        .collect()
}

/// (1+s)^a ((1+s)^d + t)^b.
pub fn f_2d(p: Family2DParams) -> MPoly {
    trapezoid_poly(p.a, p.b, p.d, MPoly::symbol_list(&["s", "t"]))
}

fn trapezoid_poly(a: u32, b: u32, d: u32, sy: std::sync::Arc<[String]>) -> MPoly {
    let one = MPoly::one(sy.clone());
    let s1 = &one + &MPoly::var(sy.clone(), 0);
    let inner = &s1.pow(d) + &MPoly::var(sy.clone(), 1);
    &s1.pow(a) * &inner.pow(b)
}

/// (f_{a,b,d} + v f_{a',b',d})^l.
pub fn f_3d(p: PrismatoidParams) -> MPoly {
    let sy = MPoly::symbol_list(&["s", "t", "v"]);
    let low = trapezoid_poly(p.a, p.b, p.d, sy.clone());
    let high = trapezoid_poly(p.a_prime, p.b_prime, p.d, sy.clone());
    let v = MPoly::var(sy, 2);
    (&low + &(&v * &high)).pow(p.l)
}

fn horn_from_forms(
    forms: &[AffineForm],
    spec: &str,
    points: &[Vec<i64>],
    lambda: Vec<Rat>,
) -> Result<HornPair, FamilyError> {
    let rows = parse_rows(spec, forms.len())?;
    let mut h = Vec::with_capacity(rows.len());
    for r in &rows {
        let f = AffineForm::combine(forms, &r.coeffs);
        h.push(points.iter().map(|m| f.eval_int(m)).collect());
    }
    let h = IntMatrix::from_rows_with_cols(h, points.len()).expect("rectangular");
    Ok(HornPair::with_labels(h, lambda, rows.into_iter().map(|r| r.label).collect())?)
}

pub fn horn_2d(p: Family2DParams) -> HornPair {
    let points = points_2d(p);
    let lambda = points
        .iter()
        .zip(weights_2d(p))
        .map(|(m, w)| {
            let e = (p.a + p.d * (p.b - m[1] as u32) + p.b) as i64;
            Rat::from_integer(sign_pow(e) * w)
        })
        .collect();
    horn_from_forms(&forms_2d(p), HORN_2D, &points, lambda).expect("family rows are well formed")
}

pub fn horn_3d(p: PrismatoidParams) -> HornPair {
    let points = points_3d(p);
    let forms = forms_3d(p);
    let lambda = points
        .iter()
        .zip(weights_3d(p))
        .map(|(m, w)| {
            let e: i64 = forms.iter().map(|f| f.eval_int(m)).sum();
            Rat::from_integer(sign_pow(e) * w)
        })
        .collect();
    horn_from_forms(&forms, HORN_3D, &points, lambda).expect("family rows are well formed")
}

/// A point configuration with weights, its polytope, and the lattice coordinates of each point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyPair {
    /// Points in ambient coordinates, in family order.
    pub points: Vec<Vec<i64>>,
    pub weights: Vec<BigInt>,
    /// Points in the polytope's own lattice coordinates.
    pub projected: Vec<Vec<i64>>,
    /// Lattice points are stored in family order.
    pub polytope: LatticePolytope,
    pub map: AffineLattice,
}

impl FamilyPair {
    /// The points must be exactly the lattice points of their convex hull.
    pub fn from_points(points: Vec<Vec<i64>>, weights: Vec<BigInt>) -> Result<Self, FamilyError> {
        let (polytope, map) = hull_in_span(&points)?;
        let projected: Vec<Vec<i64>> = if map.rank == map.ambient {
            points.clone()
        } else {
            points.iter().map(|x| map.project(x)).collect()
        };
        let polytope = polytope.with_point_order(projected.clone())?;
        Ok(Self { points, weights, projected, polytope, map })
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.map.rank == self.map.ambient
    }

    /// Cartesian product with product weights; `self` varies slowest.
    pub fn product(&self, other: &FamilyPair) -> Result<Self, FamilyError> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (x, w) in self.points.iter().zip(&self.weights) {
            for (y, v) in other.points.iter().zip(&other.weights) {
                points.push(x.iter().chain(y).copied().collect());
                weights.push(w * v);
            }
        }
        Self::from_points(points, weights)
    }
}

pub fn pair_2d(p: Family2DParams) -> Result<FamilyPair, FamilyError> {
    FamilyPair::from_points(points_2d(p), weights_2d(p))
}

pub fn pair_3d(p: PrismatoidParams) -> Result<FamilyPair, FamilyError> {
    p.validate()?;
    FamilyPair::from_points(points_3d(p), weights_3d(p))
}

/// kΔ_dim with multinomial weights.
pub fn simplex_pair(dim: usize, k: u32) -> Result<FamilyPair, FamilyError> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for c in compositions(dim + 1, k) {
        points.push(c[1..].iter().map(|&x| x as i64).collect());
        weights.push(multinomial(&c));
    }
    FamilyPair::from_points(points, weights)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StrictCheck {
    pub np_zero: bool,
    pub betaw_constant: bool,
    #[serde(with = "opt_rat")]
    pub c: Option<Rat>,
}

mod opt_rat {
    use super::Rat;
    use crate::exactmath::fmt_rat;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&fmt_rat(r)),
            None => s.serialize_none(),
        }
    }
}

impl StrictCheck {
    pub fn is_strict(&self) -> bool {
        self.np_zero && self.betaw_constant && self.c.as_ref().is_some_and(|c| !c.is_zero())
    }
}

fn facet_polys(poly: &LatticePolytope) -> Vec<MPoly> {
    let sy: std::sync::Arc<[String]> = (1..=poly.dim).map(|i| format!("x{i}")).collect();
    poly.facets
        .iter()
        .map(|f| {
            f.n.iter().enumerate().fold(
                MPoly::constant(sy.clone(), Rat::from_integer(f.a.into())),
                |acc, (i, &c)| &acc + &MPoly::var(sy.clone(), i).scale(&Rat::from_integer(c.into())),
            )
        })
        .collect()
}

/// n_P = 0 and β_w = Σ_j w_j Π_i h_i^{h_i(m_j)} constant, computed symbolically.
pub fn strict_linear_precision_check(pair: &FamilyPair) -> StrictCheck {
    let poly = &pair.polytope;
    let np_zero = poly.normal_sum().iter().all(|x| *x == 0);
    let hs = facet_polys(poly);
    let sy: std::sync::Arc<[String]> = (1..=poly.dim).map(|i| format!("x{i}")).collect();
    let mut cache: BTreeMap<(usize, i64), MPoly> = BTreeMap::new();
    let mut beta = MPoly::zero(sy.clone());
    for (m, w) in pair.projected.iter().zip(&pair.weights) {
        let mut term = MPoly::constant(sy.clone(), Rat::from_integer(w.clone()));
        for (i, e) in poly.h(m).into_iter().enumerate() {
            if e == 0 {
                continue;
            }
            let pw = cache.entry((i, e)).or_insert_with(|| hs[i].pow(e as u32));
            term = &term * pw;
        }
        beta = &beta + &term;
    }
    let c = beta.as_constant();
    StrictCheck { np_zero, betaw_constant: c.is_some(), c }
}

/// The Horn pair with rows h_1..h_r and −a_P, valid when the pair has strict linear precision.
pub fn strict_horn_pair(pair: &FamilyPair) -> Option<HornPair> {
    let check = strict_linear_precision_check(pair);
    if !check.is_strict() {
        return None;
    }
    let c = check.c.unwrap();
    let poly = &pair.polytope;
    let ap: i64 = poly.facets.iter().map(|f| f.a).sum();
    let mut h = ldm_at(poly, &pair.projected);
    h.push_row(&vec![-ap; pair.points.len()]);
    let scale = pow_rat(&Rat::from_integer((-ap).into()), ap).expect("a_P > 0");
    let lambda = pair.weights.iter().map(|w| Rat::from_integer(w.clone()) / &c * &scale).collect();
    let mut labels: Vec<String> = (1..=poly.facets.len()).map(|i| format!("h{i}")).collect();
    labels.push("-a_P".into());
    HornPair::with_labels(h, lambda, labels).ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Planar(Family2DParams),
    Prismatoid(PrismatoidParams),
}

impl Family {
    pub fn points(&self) -> Vec<Vec<i64>> {
        match *self {
            Family::Planar(p) => points_2d(p),
            Family::Prismatoid(p) => points_3d(p),
        }
    }

    pub fn weights(&self) -> Vec<BigInt> {
        match *self {
            Family::Planar(p) => weights_2d(p),
            Family::Prismatoid(p) => weights_3d(p),
        }
    }

    pub fn forms(&self) -> Vec<AffineForm> {
        match *self {
            Family::Planar(p) => forms_2d(p),
            Family::Prismatoid(p) => forms_3d(p),
        }
    }

    fn spec(&self) -> &'static str {
        match self {
            Family::Planar(_) => HORN_2D,
            Family::Prismatoid(_) => HORN_3D,
        }
    }

    pub fn horn(&self) -> HornPair {
        match *self {
            Family::Planar(p) => horn_2d(p),
            Family::Prismatoid(p) => horn_3d(p),
        }
    }

    pub fn pair(&self) -> Result<FamilyPair, FamilyError> {
        match *self {
            Family::Planar(p) => pair_2d(p),
            Family::Prismatoid(p) => pair_3d(p),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Family::Planar(_) => 2,
            Family::Prismatoid(_) => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlendKind {
    Toric,
    Rational,
}

/// Blending functions at a rational point; both kinds sum to one.
pub fn blending_eval(family: &Family, kind: BlendKind, p: &[Rat]) -> Result<Vec<Rat>, FamilyError> {
    if p.len() != family.ambient_dim() {
        return Err(FamilyError::PointLength { got: p.len(), expected: family.ambient_dim() });
    }
    match kind {
        BlendKind::Rational => rational_blending(family, p),
        BlendKind::Toric => toric_blending(family, p),
    }
}

fn rational_blending(family: &Family, p: &[Rat]) -> Result<Vec<Rat>, FamilyError> {
    let forms = family.forms();
    let pair = family.horn();
    let rows = parse_rows(family.spec(), forms.len())?;
    let values: Vec<Rat> = rows.iter().map(|r| AffineForm::combine(&forms, &r.coeffs).eval(p)).collect();
    let h = pair.h();
    let mut out = Vec::with_capacity(pair.ncols());
    for col in 0..pair.ncols() {
        let mut v = pair.lambda()[col].clone();
        for (r, x) in values.iter().enumerate() {
            let e = h.get(r, col);
            if e == 0 {
                continue;
            }
            v *= pow_rat(x, e).ok_or(FamilyError::BoundaryPoint { row: r, col })?;
        }
        out.push(v);
    }
    Ok(out)
}

fn toric_blending(family: &Family, p: &[Rat]) -> Result<Vec<Rat>, FamilyError> {
    let pair = family.pair()?;
    if !pair.is_full_dimensional() {
        return Err(FamilyError::NotFullDimensional);
    }
    let hp: Vec<Rat> = pair.polytope.facets.iter().map(|f| f.eval_rat(p)).collect();
    let raw: Vec<Rat> = pair
        .points
        .iter()
        .zip(&pair.weights)
        .map(|(m, w)| {
            pair.polytope.h(m).iter().zip(&hp).fold(Rat::from_integer(w.clone()), |acc, (&e, x)| {
                acc * pow_rat(x, e).expect("nonnegative exponent")
            })
        })
        .collect();
    let total: Rat = raw.iter().sum();
    if total.is_zero() {
        return Err(FamilyError::BoundaryPoint { row: 0, col: 0 });
    }
    Ok(raw.into_iter().map(|x| x / &total).collect())
}

/// A random point in the relative interior: a convex combination with all weights positive.
pub fn interior_point<R: Rng>(points: &[Vec<i64>], rng: &mut R) -> Vec<Rat> {
    let c: Vec<i64> = (0..points.len()).map(|_| rng.gen_range(1..=20)).collect();
    let total: i64 = c.iter().sum();
    let dim = points[0].len();
    (0..dim)
        .map(|k| {
            let s: i64 = points.iter().zip(&c).map(|(m, w)| m[k] * w).sum();
            Rat::new(s.into(), total.into())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearPrecision {
    pub partition_of_unity: bool,
    pub reproduces_point: bool,
    pub samples: usize,
}

impl LinearPrecision {
    pub fn holds(&self) -> bool {
        self.partition_of_unity && self.reproduces_point
    }
}

/// Σ β̂_j(p) = 1 and Σ β̂_j(p) m_j = p at random interior points.
pub fn linear_precision_check(family: &Family, samples: usize, seed: u64) -> Result<LinearPrecision, FamilyError> {
    let points = family.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LinearPrecision { partition_of_unity: true, reproduces_point: true, samples };
    for _ in 0..samples {
        let p = interior_point(&points, &mut rng);
        let beta = blending_eval(family, BlendKind::Rational, &p)?;
        out.partition_of_unity &= beta.iter().sum::<Rat>().is_one();
        for (k, pk) in p.iter().enumerate() {
            let s: Rat = beta.iter().zip(&points).map(|(b, m)| b * Rat::from_integer(m[k].into())).sum();
            out.reproduces_point &= &s == pk;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- trees

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeVariant {
    /// One floret on three symbols (2D, requires a = 0 and d = 1).
    Simplex,
    /// Two levels of binary florets (2D).
    Trapezoid,
    /// Three levels of binary florets; degree-zero florets are contracted.
    A1,
    /// As A1, requires a' = 0.
    A2,
    /// As A1, requires b' = 0.
    A3,
    /// As A1, requires a' = b' = 0.
    A4,
    /// Ternary root floret over binary florets (3D, requires b = 1, b' = 0, l = 1).
    Minimal,
}

impl TreeVariant {
    fn need(self, need: &str) -> FamilyError {
        FamilyError::InvalidVariant { variant: format!("{self:?}"), need: need.into() }
    }
}

fn names(list: &[&[&str]]) -> Vec<Vec<String>> {
    list.iter().map(|s| s.iter().map(|x| x.to_string()).collect()).collect()
}

pub fn tree_2d(p: Family2DParams, variant: TreeVariant) -> Result<StagedTree, FamilyError> {
    match variant {
        TreeVariant::Simplex => {
            if p.a != 0 || p.d != 1 {
                return Err(variant.need("a = 0 and d = 1"));
            }
            let mut t = TreeBuilder::new(names(&[&["s0", "s1", "s2"]]));
            if p.b > 0 {
                t.floret(0, 0, p.b)?;
            }
            Ok(t.build()?)
        }
        TreeVariant::Trapezoid => {
            let mut t = TreeBuilder::new(names(&[&["s0", "s1"], &["s2", "s3"]]));
            if p.b == 0 {
                if p.a > 0 {
                    t.floret(0, 1, p.a)?;
                }
                return Ok(t.build()?);
            }
            let kids = t.floret(0, 0, p.b)?;
            for (j, v) in (0..=p.b).rev().zip(kids) {
                let width = p.a + p.d * (p.b - j);
                if width > 0 {
                    t.floret(v, 1, width)?;
                }
            }
            Ok(t.build()?)
        }
        _ => Err(variant.need("prismatoid parameters")),
    }
}

pub fn tree_3d(p: PrismatoidParams, variant: TreeVariant) -> Result<StagedTree, FamilyError> {
    p.validate()?;
    match variant {
        TreeVariant::A1 => {}
        TreeVariant::A2 if p.a_prime != 0 => return Err(variant.need("a' = 0")),
        TreeVariant::A3 if p.b_prime != 0 => return Err(variant.need("b' = 0")),
        TreeVariant::A4 if p.a_prime != 0 || p.b_prime != 0 => return Err(variant.need("a' = b' = 0")),
        TreeVariant::A2 | TreeVariant::A3 | TreeVariant::A4 => {}
        TreeVariant::Minimal => return minimal_tree(p),
        _ => return Err(variant.need("planar parameters")),
    }
    let mut t = TreeBuilder::new(names(&[&["s0", "s1"], &["s2", "s3"], &["s4", "s5"]]));
    let levels = t.floret(0, 0, p.l)?;
    for (k, v) in levels.into_iter().enumerate() {
        let k = k as i64;
        let (depth, _) = slice_3d(p, k, 0);
        let rows: Vec<(i64, usize)> = if depth == 0 {
            vec![(0, v)]
        } else {
            let order: Vec<Vec<u32>> = (0..=depth as u32).map(|j| vec![j, depth as u32 - j]).collect();
            let kids = t.floret_ordered(v, 1, depth as u32, order)?;
            (0..=depth).zip(kids).collect()
        };
        for (j, w) in rows {
            let (_, width) = slice_3d(p, k, j);
            if width > 0 {
                t.floret(w, 2, width as u32)?;
            }
        }
    }
    Ok(t.build()?)
}

fn minimal_tree(p: PrismatoidParams) -> Result<StagedTree, FamilyError> {
    if p.b != 1 || p.b_prime != 0 || p.l != 1 {
        return Err(TreeVariant::Minimal.need("b = 1, b' = 0 and l = 1"));
    }
    let mut t = TreeBuilder::new(names(&[&["s0", "s1", "s2"], &["s3", "s4"]]));
    let kids = t.floret(0, 0, 1)?;
    for (v, width) in kids.into_iter().zip([p.a + p.d, p.a, p.a_prime]) {
        if width > 0 {
            t.floret(v, 1, width)?;
        }
    }
    Ok(t.build()?)
}

/// Lattice point (i,j,k) of each atom of a prismatoid tree.
pub fn tree_points_3d(tree: &StagedTree, variant: TreeVariant) -> Vec<Vec<i64>> {
    let (i, j, k) = match variant {
        TreeVariant::Minimal => (4, 1, 2),
        _ => (5, 2, 1),
    };
    tree.atoms().iter().map(|a| vec![a.exps[i] as i64, a.exps[j] as i64, a.exps[k] as i64]).collect()
}

// ---------------------------------------------------------------- catalog

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub group: char,
    /// Rows of the minimal Horn matrix as combinations of h_1..h_6.
    pub columns: &'static str,
    /// One parameter tuple in this subfamily.
    pub example: PrismatoidParams,
}

const fn ex(a: u32, a_prime: u32, b: u32, b_prime: u32, d: u32) -> PrismatoidParams {
    PrismatoidParams { a, a_prime, b, b_prime, d, l: 1 }
}

const ROWS6: &str = "h1,h2,h3,h4,h5,h6,-(h1+h4),-(h2+h5),-(h3+h6)";
const WEDGE: &str = "h1,h2,h3,h4,h5,-(h1+h4),-(h2+h5-h6),-(h3+h6)";
const WEDGE1: &str = "h1,h2,h3,h4,h5,-(h1+h4),-(h2+h3+h5)";

pub const CATALOG: [CatalogEntry; 24] = [
    CatalogEntry { name: "Trapezoidal frusta", group: 'A', columns: ROWS6, example: ex(2, 1, 2, 1, 1) },
    CatalogEntry { name: "Triangle top", group: 'A', columns: ROWS6, example: ex(1, 0, 2, 1, 1) },
    CatalogEntry { name: "Trapezoidal wedges with b!=1", group: 'A', columns: WEDGE, example: ex(1, 1, 2, 0, 1) },
    CatalogEntry { name: "Trapezoidal wedges with b=1", group: 'A', columns: WEDGE1, example: ex(1, 1, 1, 0, 1) },
    CatalogEntry { name: "Trapezoidal pyramids with b!=1", group: 'A', columns: WEDGE, example: ex(1, 0, 2, 0, 1) },
    CatalogEntry { name: "Trapezoidal pyramids with b=1", group: 'A', columns: WEDGE1, example: ex(1, 0, 1, 0, 1) },
    CatalogEntry { name: "General tensor product frusta", group: 'B', columns: ROWS6, example: ex(2, 1, 3, 1, 0) },
    CatalogEntry {
        name: "Tensor product frusta with a'=a",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,h6,-(h2+h5),-(h1+h3+h4+h6)",
        example: ex(2, 2, 2, 1, 0),
    },
    CatalogEntry {
        name: "Tensor product frusta with b'=b",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,h6,-(h1+h4),-(h2+h3+h5+h6)",
        example: ex(2, 1, 2, 2, 0),
    },
    CatalogEntry {
        name: "3D Tensor Product",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,h6,-(h1+h2+h3+h4+h5+h6)",
        example: ex(1, 1, 2, 2, 0),
    },
    CatalogEntry {
        name: "Tensor product frusta with proportional sides",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,h6,-(h1+h2+h4+h5),-(h3+h6)",
        example: ex(4, 2, 2, 1, 0),
    },
    CatalogEntry {
        name: "Tensor product wedges (a'=0) with a!=1",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,-(h1+h4-h6),-(h2+h5),-(h3+h6)",
        example: ex(2, 0, 2, 1, 0),
    },
    CatalogEntry {
        name: "Tensor product wedges (a'=0) with a=1",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,-(h2+h5),-(h1+h3+h4)",
        example: ex(1, 0, 2, 1, 0),
    },
    CatalogEntry { name: "Tensor product wedges (b'=0) with b!=1", group: 'B', columns: WEDGE, example: ex(2, 1, 2, 0, 0) },
    CatalogEntry { name: "Tensor product wedges (b'=0) with b=1", group: 'B', columns: WEDGE1, example: ex(2, 1, 1, 0, 0) },
    CatalogEntry {
        name: "Tensor product pyramids",
        group: 'B',
        columns: "h1,h2,h3,h4,h5,-(h1+h2+h4+h5-h6),-(h3+h6)",
        example: ex(1, 0, 2, 0, 0),
    },
    CatalogEntry {
        name: "Triangular frusta (b'!=b) with d!=1",
        group: 'C',
        columns: "h1,h2,h3,h4,h6,-(h1+h4-h5),-(h2+h5),-(h3+h6)",
        example: ex(0, 0, 2, 1, 2),
    },
    CatalogEntry {
        name: "Triangular prism (b'=b) with d!=1",
        group: 'C',
        columns: "h1,h2,h3,h4,h6,-(h1+h4-h5),-(h2+h3+h5+h6)",
        example: ex(0, 0, 1, 1, 2),
    },
    CatalogEntry {
        name: "Triangular frusta (b'!=b) with d=1",
        group: 'C',
        columns: "h1,h2,h3,h4,h6,-(h1+h2+h4),-(h3+h6)",
        example: ex(0, 0, 2, 1, 1),
    },
    CatalogEntry {
        name: "Triangular prism (b'=b) with d=1",
        group: 'C',
        columns: "h1,h2,h3,h4,h6,-(h1+h2+h3+h4+h6)",
        example: ex(0, 0, 1, 1, 1),
    },
    CatalogEntry {
        name: "Triangular based pyramid with b!=1 and d!=1",
        group: 'C',
        columns: "h1,h2,h3,h4,-(h1+h4-h5),-(h2+h5-h6),-(h3+h6)",
        example: ex(0, 0, 2, 0, 2),
    },
    CatalogEntry {
        name: "Triangular based pyramid with b=1 and d!=1",
        group: 'C',
        columns: "h1,h2,h3,h4,-(h1+h4-h5),-(h2+h3+h5)",
        example: ex(0, 0, 1, 0, 2),
    },
    CatalogEntry {
        name: "Triangular based pyramid with b!=1 and d=1",
        group: 'C',
        columns: "h1,h2,h3,h4,-(h1+h2+h4-h6),-(h3+h6)",
        example: ex(0, 0, 2, 0, 1),
    },
    CatalogEntry { name: "3D simplex", group: 'C', columns: "h1,h2,h3,h4,-(h1+h2+h3+h4)", example: ex(0, 0, 1, 0, 1) },
];

fn entry(name: &str) -> &'static CatalogEntry {
    CATALOG.iter().find(|e| e.name == name).expect("catalog name")
}

/// Catalog row of a parameter tuple; degenerate subcases are decided before general ones.
pub fn classify(p: PrismatoidParams) -> Result<&'static CatalogEntry, FamilyError> {
    p.validate()?;
    let PrismatoidParams { a, a_prime: ap, b, b_prime: bp, d, .. } = p;
    let name = if a > 0 && b > 0 && d > 0 {
        match (ap > 0, bp > 0) {
            (true, true) => "Trapezoidal frusta",
            (false, true) => "Triangle top",
            (true, false) if b == 1 => "Trapezoidal wedges with b=1",
            (true, false) => "Trapezoidal wedges with b!=1",
            (false, false) if b == 1 => "Trapezoidal pyramids with b=1",
            (false, false) => "Trapezoidal pyramids with b!=1",
        }
    } else if a > 0 && b > 0 && d == 0 {
        if ap == 0 && bp == 0 {
            "Tensor product pyramids"
        } else if ap == 0 {
            if a == 1 {
                "Tensor product wedges (a'=0) with a=1"
            } else {
                "Tensor product wedges (a'=0) with a!=1"
            }
        } else if bp == 0 {
            if b == 1 {
                "Tensor product wedges (b'=0) with b=1"
            } else {
                "Tensor product wedges (b'=0) with b!=1"
            }
        } else if ap == a && bp == b {
            "3D Tensor Product"
        } else if ap == a {
            "Tensor product frusta with a'=a"
        } else if bp == b {
            "Tensor product frusta with b'=b"
        } else if ap * b == a * bp {
            "Tensor product frusta with proportional sides"
        } else {
            "General tensor product frusta"
        }
    } else if a == 0 && b > 0 && d > 0 {
        match (bp == 0, bp == b, b == 1, d == 1) {
            (true, _, true, true) => "3D simplex",
            (true, _, true, false) => "Triangular based pyramid with b=1 and d!=1",
            (true, _, false, true) => "Triangular based pyramid with b!=1 and d=1",
            (true, _, false, false) => "Triangular based pyramid with b!=1 and d!=1",
            (false, true, _, true) => "Triangular prism (b'=b) with d=1",
            (false, true, _, false) => "Triangular prism (b'=b) with d!=1",
            (false, false, _, true) => "Triangular frusta (b'!=b) with d=1",
            (false, false, _, false) => "Triangular frusta (b'!=b) with d!=1",
        }
    } else {
        return Err(FamilyError::UnclassifiedParams(p.to_string()));
    };
    Ok(entry(name))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogCheck {
    pub subfamily: &'static str,
    pub params: PrismatoidParams,
    /// All rows of the minimal Horn matrix agree with the catalog.
    pub matched: bool,
    /// The negative rows alone agree.
    pub negative_rows_match: bool,
    pub rows: usize,
    pub cols: usize,
}

fn catalog_rows(entry: &CatalogEntry, p: PrismatoidParams) -> Result<Vec<Vec<i64>>, FamilyError> {
    let forms = forms_3d(p);
    let points = points_3d(p);
    let mut out = Vec::new();
    for r in parse_rows(entry.columns, forms.len())? {
        let f = AffineForm::combine(&forms, &r.coeffs);
        let row: Vec<i64> = points.iter().map(|m| f.eval_int(m)).collect();
        if row.iter().any(|x| *x != 0) {
            out.push(row);
        }
    }
    out.sort();
    Ok(out)
}

fn negative(rows: &[Vec<i64>]) -> Vec<Vec<i64>> {
    rows.iter().filter(|r| r.iter().any(|x| *x < 0)).cloned().collect()
}

/// Compare minimize(horn_3d) with the catalog row for these parameters.
pub fn appendix_a_check(p: PrismatoidParams) -> Result<CatalogCheck, FamilyError> {
    let e = classify(p)?;
    let minimal = minimize(&horn_3d(p))?;
    let got = minimal.h().sorted_rows();
    let want = catalog_rows(e, p)?;
    Ok(CatalogCheck {
        subfamily: e.name,
        params: p,
        matched: got == want,
        negative_rows_match: negative(&got) == negative(&want),
        rows: minimal.h().nrows(),
        cols: minimal.h().ncols(),
    })
}

/// Check every classifiable tuple with entries ≤ k, in sweep order.
pub fn appendix_a_sweep(k: u32) -> Vec<CatalogCheck> {
    PrismatoidParams::sweep(k)
        .into_par_iter()
        .filter_map(|p| appendix_a_check(p).ok())
        .collect()
}

/// Rows of minimize(H) that are ≥ 0 equal the lattice distance rows of P.
pub fn positive_part_is_ldm(p: PrismatoidParams) -> Result<bool, FamilyError> {
    let pair = pair_3d(p)?;
    let minimal = minimize(&horn_3d(p))?;
    let (pos, _) = positive_part(minimal.h())?;
    let ldm = ldm_at(&pair.polytope, &pair.projected);
    Ok(pos.same_rows_up_to_order(&ldm))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixMCheck {
    /// M has zero column sums.
    pub is_horn: bool,
    /// minimize(M) and minimize(horn_2d) have the same rows.
    pub rows_match: bool,
    /// minimize(M) with the minimal λ passes the validator.
    pub validates: bool,
}

impl MatrixMCheck {
    pub fn passed(&self) -> bool {
        self.is_horn && self.rows_match && self.validates
    }
}

/// Compare M_{A,Σ} of T_{a,b,d} with the minimal Horn pair of the family.
pub fn check_m_2d(p: Family2DParams, samples: usize, seed: u64) -> Result<MatrixMCheck, FamilyError> {
    let minimal = minimize(&horn_2d(p))?;
    let pair = pair_2d(p)?;
    let m = matrix_m_at(&pair.polytope, &pair.projected);
    if !m.is_horn {
        return Ok(MatrixMCheck { is_horn: false, rows_match: false, validates: false });
    }
    let ones = vec![Rat::one(); m.matrix.ncols()];
    let reduced = minimize(&HornPair::new(m.matrix, ones)?)?;
    let rows_match = reduced.h().same_rows_up_to_order(minimal.h());
    let candidate = HornPair::new(reduced.h().clone(), minimal.lambda().to_vec())?;
    let validates = validate_horn_pair(&candidate, samples, seed).passed();
    Ok(MatrixMCheck { is_horn: true, rows_match, validates })
}
