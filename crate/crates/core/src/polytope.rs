//! Lattice polytopes of dimension at most three: exact hulls, lattice distances,
//! normal fans and primitive collections.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{gcd_slice, int, IntMatrix, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolytopeError {
    #[error("affine span has dimension {0}, more than 3")]
    DimensionTooHigh(usize),
    #[error("points span dimension {actual}, but dimension {claimed} was requested")]
    Degenerate { claimed: usize, actual: usize },
    #[error("no points given")]
    Empty,
    #[error("point has {got} coordinates, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("requested point order is not a permutation of the lattice points")]
    PointOrder,
    #[error("normal {0:?} is not a facet normal of this polytope")]
    UnknownNormal(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Facet {
    pub n: Vec<i64>,
    pub a: i64,
}

impl Facet {
    pub fn eval(&self, m: &[i64]) -> i64 {
        self.n.iter().zip(m).map(|(x, y)| x * y).sum::<i64>() + self.a
    }

    pub fn eval_rat(&self, p: &[Rat]) -> Rat {
        let mut acc = int(self.a);
        for (x, y) in self.n.iter().zip(p) {
            if *x != 0 {
                acc += y * int(*x);
            }
        }
        acc
    }
}

/// A lattice polytope in its facet presentation together with its ordered lattice points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePolytope {
    pub dim: usize,
    pub vertices: Vec<Vec<i64>>,
    pub facets: Vec<Facet>,
    pub points: Vec<Vec<i64>>,
}

/// Lattice isomorphism from an affine sublattice of Z^d onto Z^r.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineLattice {
    pub ambient: usize,
    pub rank: usize,
    pub origin: Vec<i64>,
    /// Unimodular d×d matrix; the first `rank` rows give coordinates.
    pub u: Vec<Vec<i64>>,
}

impl AffineLattice {
    pub fn identity(d: usize) -> Self {
        let u = (0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()).collect();
        Self { ambient: d, rank: d, origin: vec![0; d], u }
    }

    /// Coordinates of `x` in the sublattice. Only meaningful for `x` in its affine span.
    pub fn project(&self, x: &[i64]) -> Vec<i64> {
        let diff: Vec<i64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.u[..self.rank]
            .iter()
            .map(|row| row.iter().zip(&diff).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Whether `x` lies in the affine span.
    pub fn contains(&self, x: &[i64]) -> bool {
        let diff: Vec<i64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.u[self.rank..]
            .iter()
            .all(|row| row.iter().zip(&diff).map(|(a, b)| a * b).sum::<i64>() == 0)
    }

    /// Smallest lattice containing every difference `p - points[0]`, saturated.
    pub fn spanned_by(points: &[Vec<i64>]) -> Result<Self, PolytopeError> {
        let first = points.first().ok_or(PolytopeError::Empty)?;
        let d = first.len();
        let mut a: Vec<Vec<i128>> = vec![Vec::with_capacity(points.len()); d];
        for p in points {
            if p.len() != d {
                return Err(PolytopeError::WrongLength { got: p.len(), expected: d });
            }
            for (i, row) in a.iter_mut().enumerate() {
                row.push((p[i] - first[i]) as i128);
            }
        }
        let mut u: Vec<Vec<i128>> =
            (0..d).map(|i| (0..d).map(|j| i128::from(i == j)).collect()).collect();
        let ncols = points.len();
        let mut r = 0;
        for c in 0..ncols {
            if r == d {
                break;
            }
            for i in r + 1..d {
                while a[i][c] != 0 {
                    let q = a[r][c] / a[i][c];
                    for k in 0..ncols {
                        a[r][k] -= q * a[i][k];
                    }
                    for k in 0..d {
                        u[r][k] -= q * u[i][k];
                    }
                    a.swap(r, i);
                    u.swap(r, i);
                }
            }
            if a[r][c] != 0 {
                r += 1;
            }
        }
        let u = u.into_iter().map(|row| row.into_iter().map(|x| x as i64).collect()).collect();
        Ok(Self { ambient: d, rank: r, origin: first.clone(), u })
    }
}

fn cross(a: [i128; 3], b: [i128; 3]) -> [i128; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [i128; 3], b: [i128; 3]) -> i128 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: [i128; 3], b: [i128; 3]) -> [i128; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn primitive(v: &[i128]) -> Vec<i64> {
    let small: Vec<i64> = v.iter().map(|&x| x as i64).collect();
    let g = gcd_slice(&small);
    if g == 0 {
        small
    } else {
        small.iter().map(|x| x / g).collect()
    }
}

/// Strict convex hull of 2D points in counter-clockwise order (collinear points dropped).
fn hull2(points: &[[i128; 2]]) -> Vec<[i128; 2]> {
    let mut p = points.to_vec();
    p.sort();
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: [i128; 2], a: [i128; 2], b: [i128; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[i128; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[i128; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn facets_1d(points: &[Vec<i64>]) -> Vec<Facet> {
    let lo = points.iter().map(|p| p[0]).min().unwrap();
    let hi = points.iter().map(|p| p[0]).max().unwrap();
    vec![Facet { n: vec![1], a: -lo }, Facet { n: vec![-1], a: hi }]
}

fn facets_2d(points: &[Vec<i64>]) -> Vec<Facet> {
    let pts: Vec<[i128; 2]> = points.iter().map(|p| [p[0] as i128, p[1] as i128]).collect();
    let h = hull2(&pts);
    let mut out = Vec::with_capacity(h.len());
    for k in 0..h.len() {
        let p = h[k];
        let q = h[(k + 1) % h.len()];
        let n = primitive(&[-(q[1] - p[1]), q[0] - p[0]]);
        let a = -(n[0] as i128 * p[0] + n[1] as i128 * p[1]) as i64;
        out.push(Facet { n, a });
    }
    out
}

fn facets_3d(points: &[Vec<i64>]) -> Vec<Facet> {
    let mut pts: Vec<[i128; 3]> =
        points.iter().map(|p| [p[0] as i128, p[1] as i128, p[2] as i128]).collect();
    pts.sort();
    pts.dedup();
    let side = |n: [i128; 3], a: i128, x: [i128; 3]| dot3(n, x) + a;

    let v0 = pts[0];
    let mut first: Option<([i128; 3], i128)> = None;
    'outer: for (qi, &q) in pts.iter().enumerate() {
        for &r in &pts[qi + 1..] {
            let n = cross(sub3(q, v0), sub3(r, v0));
            if n == [0, 0, 0] {
                continue;
            }
            let vals = pts.iter().map(|&x| dot3(n, sub3(x, v0)));
            let (mut pos, mut neg) = (false, false);
            for v in vals {
                pos |= v > 0;
                neg |= v < 0;
            }
            if !(pos && neg) {
                let n = if neg { [-n[0], -n[1], -n[2]] } else { n };
                first = Some((n, -dot3(n, v0)));
                break 'outer;
            }
        }
    }
    let (n0, a0) = first.expect("full-dimensional point set has a facet");
    let normalize = |n: [i128; 3], p: [i128; 3]| -> Facet {
        let n = primitive(&n);
        let a = -(n[0] as i128 * p[0] + n[1] as i128 * p[1] + n[2] as i128 * p[2]) as i64;
        Facet { n, a }
    };

    let mut seen: BTreeSet<Facet> = BTreeSet::new();
    let mut queue = VecDeque::new();
    let f0 = normalize(n0, v0);
    let _ = a0;
    seen.insert(f0.clone());
    queue.push_back(f0);
    while let Some(f) = queue.pop_front() {
        let n = [f.n[0] as i128, f.n[1] as i128, f.n[2] as i128];
        let a = f.a as i128;
        let on: Vec<[i128; 3]> = pts.iter().copied().filter(|&x| side(n, a, x) == 0).collect();
        // Drop the coordinate along which the facet plane projects injectively.
        let k = (0..3).max_by_key(|&k| n[k].abs()).unwrap();
        let keep: Vec<usize> = (0..3).filter(|&i| i != k).collect();
        let proj: Vec<[i128; 2]> = on.iter().map(|x| [x[keep[0]], x[keep[1]]]).collect();
        let poly2 = hull2(&proj);
        let lift = |y: [i128; 2]| -> [i128; 3] {
            *on.iter().find(|x| x[keep[0]] == y[0] && x[keep[1]] == y[1]).unwrap()
        };
        let poly: Vec<[i128; 3]> = poly2.into_iter().map(lift).collect();
        for e in 0..poly.len() {
            let p = poly[e];
            let q = poly[(e + 1) % poly.len()];
            let c = poly[(e + 2) % poly.len()];
            let dir = sub3(q, p);
            let start = pts.iter().copied().find(|&x| side(n, a, x) > 0).unwrap();
            let orient = |m: [i128; 3]| {
                if dot3(m, sub3(c, p)) < 0 {
                    [-m[0], -m[1], -m[2]]
                } else {
                    m
                }
            };
            let mut m = orient(cross(dir, sub3(start, p)));
            for &s in &pts {
                if dot3(m, sub3(s, p)) < 0 {
                    m = orient(cross(dir, sub3(s, p)));
                }
            }
            let g = normalize(m, p);
            debug_assert!(points.iter().all(|x| g.eval(x) >= 0));
            if seen.insert(g.clone()) {
                queue.push_back(g);
            }
        }
    }
    seen.into_iter().collect()
}

fn facets_of(points: &[Vec<i64>], dim: usize) -> Vec<Facet> {
    match dim {
        0 => Vec::new(),
        1 => facets_1d(points),
        2 => facets_2d(points),
        3 => facets_3d(points),
        _ => unreachable!("dimension checked by caller"),
    }
}

/// Exact convex hull of full-dimensional points in Z^dim, dim ≤ 3.
pub fn hull_facets(points: &[Vec<i64>], dim: usize) -> Result<LatticePolytope, PolytopeError> {
    if dim > 3 {
        return Err(PolytopeError::DimensionTooHigh(dim));
    }
    if points.is_empty() {
        return Err(PolytopeError::Empty);
    }
    for p in points {
        if p.len() != dim {
            return Err(PolytopeError::WrongLength { got: p.len(), expected: dim });
        }
    }
    let span = AffineLattice::spanned_by(points)?;
    if span.rank != dim {
        return Err(PolytopeError::Degenerate { claimed: dim, actual: span.rank });
    }
    let mut facets = facets_of(points, dim);
    facets.sort();
    Ok(LatticePolytope::from_facets(dim, facets, points))
}

/// Hull of points whose affine span may be lower dimensional: project onto
/// the saturated affine lattice first. Full-dimensional input keeps its coordinates.
pub fn hull_in_span(points: &[Vec<i64>]) -> Result<(LatticePolytope, AffineLattice), PolytopeError> {
    let span = AffineLattice::spanned_by(points)?;
    if span.rank > 3 {
        return Err(PolytopeError::DimensionTooHigh(span.rank));
    }
    if span.rank == span.ambient {
        let p = hull_facets(points, span.rank)?;
        return Ok((p, AffineLattice::identity(span.ambient)));
    }
    let proj: Vec<Vec<i64>> = points.iter().map(|x| span.project(x)).collect();
    let p = hull_facets(&proj, span.rank)?;
    Ok((p, span))
}

impl LatticePolytope {
    fn from_facets(dim: usize, facets: Vec<Facet>, seed_points: &[Vec<i64>]) -> Self {
        let mut vertices: Vec<Vec<i64>> = seed_points
            .iter()
            .filter(|x| facets.iter().filter(|f| f.eval(x) == 0).count() >= dim)
            .cloned()
            .collect();
        // A point on `dim` facets need not be a vertex when the fan is not
        // simplicial; keep only points where the tight normals have full rank.
        vertices.retain(|x| {
            let tight: Vec<Vec<i64>> =
                facets.iter().filter(|f| f.eval(x) == 0).map(|f| f.n.clone()).collect();
            rank_of(&tight) == dim
        });
        vertices.sort();
        vertices.dedup();
        let mut p = Self { dim, vertices, facets, points: Vec::new() };
        p.points = p.enumerate_points();
        p
    }

    fn enumerate_points(&self) -> Vec<Vec<i64>> {
        if self.dim == 0 {
            return self.vertices.clone();
        }
        let lo: Vec<i64> =
            (0..self.dim).map(|k| self.vertices.iter().map(|v| v[k]).min().unwrap()).collect();
        let hi: Vec<i64> =
            (0..self.dim).map(|k| self.vertices.iter().map(|v| v[k]).max().unwrap()).collect();
        let mut out = Vec::new();
        let mut cur = lo.clone();
        loop {
            if self.contains(&cur) {
                out.push(cur.clone());
            }
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    for j in k + 1..self.dim {
                        cur[j] = lo[j];
                    }
                    break;
                }
            }
        }
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        self.facets.iter().all(|f| f.eval(m) >= 0)
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// Put facets in the order of `normals`; normals not present are skipped,
    /// unlisted facets follow in their current order.
    pub fn with_facet_order(mut self, normals: &[Vec<i64>]) -> Self {
        let mut ordered = Vec::with_capacity(self.facets.len());
        for n in normals {
            if let Some(k) = self.facets.iter().position(|f| &f.n == n) {
                ordered.push(self.facets.remove(k));
            }
        }
        ordered.append(&mut self.facets);
        self.facets = ordered;
        self
    }

    /// Replace the point order; `order` must be a permutation of the lattice points.
    pub fn with_point_order(mut self, order: Vec<Vec<i64>>) -> Result<Self, PolytopeError> {
        let mut a = order.clone();
        let mut b = self.points.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(PolytopeError::PointOrder);
        }
        self.points = order;
        Ok(self)
    }

    pub fn facet_index(&self, n: &[i64]) -> Option<usize> {
        self.facets.iter().position(|f| f.n == n)
    }

    /// h(m) for an integer point.
    pub fn h(&self, m: &[i64]) -> Vec<i64> {
        self.facets.iter().map(|f| f.eval(m)).collect()
    }

    pub fn is_simple(&self) -> bool {
        self.vertices
            .iter()
            .all(|v| self.facets.iter().filter(|f| f.eval(v) == 0).count() == self.dim)
    }

    /// n_P, the sum of all facet normals.
    pub fn normal_sum(&self) -> Vec<i64> {
        let mut s = vec![0; self.dim];
        for f in &self.facets {
            for (acc, x) in s.iter_mut().zip(&f.n) {
                *acc += x;
            }
        }
        s
    }
}

fn rank_of(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> =
        rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(rank, p);
        for i in 0..m.len() {
            if i != rank && m[i][c] != 0 {
                let (x, y) = (m[rank][c], m[i][c]);
                for k in 0..cols {
                    m[i][k] = m[i][k] * x - m[rank][k] * y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// (h_1(p), …, h_r(p)) at a rational point.
pub fn lattice_distance(p: &LatticePolytope, x: &[Rat]) -> Vec<Rat> {
    p.facets.iter().map(|f| f.eval_rat(x)).collect()
}

/// Matrix with entry (i, j) = h_i(m_j) over the polytope's own point order.
pub fn lattice_distance_matrix(p: &LatticePolytope) -> IntMatrix {
    ldm_at(p, &p.points)
}

/// Lattice distances of arbitrary integer points, one column per point.
pub fn ldm_at(p: &LatticePolytope, points: &[Vec<i64>]) -> IntMatrix {
    let rows = p.facets.iter().map(|f| points.iter().map(|m| f.eval(m)).collect()).collect();
    IntMatrix::from_rows_with_cols(rows, points.len()).expect("rectangular by construction")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalFan {
    pub rays: Vec<Vec<i64>>,
    /// One entry per vertex: indices of the facets through it.
    pub maximal_cones: Vec<BTreeSet<usize>>,
}

pub fn normal_fan(p: &LatticePolytope) -> NormalFan {
    let rays = p.facets.iter().map(|f| f.n.clone()).collect();
    let maximal_cones = p
        .vertices
        .iter()
        .map(|v| (0..p.facets.len()).filter(|&i| p.facets[i].eval(v) == 0).collect())
        .collect();
    NormalFan { rays, maximal_cones }
}

/// Minimal ray sets not contained in any maximal cone, by size then lex.
pub fn primitive_collections(fan: &NormalFan) -> Vec<Vec<usize>> {
    let r = fan.rays.len();
    let in_cone = |s: &[usize]| fan.maximal_cones.iter().any(|c| s.iter().all(|i| c.contains(i)));
    let mut out = Vec::new();
    for size in 1..=r {
        for subset in itertools::Itertools::combinations(0..r, size) {
            if in_cone(&subset) {
                continue;
            }
            let minimal = (0..size).all(|skip| {
                let smaller: Vec<usize> =
                    subset.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &i)| i).collect();
                in_cone(&smaller)
            });
            if minimal {
                out.push(subset);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixM {
    pub matrix: IntMatrix,
    pub collections: Vec<Vec<usize>>,
    pub is_horn: bool,
}

/// Lattice distance rows followed by one row −Σ_{i∈C} h_i per primitive collection C.
pub fn matrix_m(p: &LatticePolytope) -> MatrixM {
    matrix_m_at(p, &p.points)
}

pub fn matrix_m_at(p: &LatticePolytope, points: &[Vec<i64>]) -> MatrixM {
    let mut matrix = ldm_at(p, points);
    let collections = primitive_collections(&normal_fan(p));
    for c in &collections {
        let row: Vec<i64> =
            (0..points.len()).map(|j| -c.iter().map(|&i| matrix.get(i, j)).sum::<i64>()).collect();
        matrix.push_row(&row);
    }
    let is_horn = matrix.column_sums().iter().all(Zero::is_zero);
    MatrixM { matrix, collections, is_horn }
}

/// Facet lookup by normal, returned as a map from normal to index.
pub fn facet_map(p: &LatticePolytope) -> BTreeMap<Vec<i64>, usize> {
    p.facets.iter().enumerate().map(|(i, f)| (f.n.clone(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::rat;
    use proptest::prelude::*;

    fn trapex() -> LatticePolytope {
        let pts = vec![vec![0, 0], vec![3, 0], vec![1, 2], vec![0, 2]];
        hull_facets(&pts, 2)
            .unwrap()
            .with_facet_order(&[vec![1, 0], vec![0, 1], vec![-1, -1], vec![0, -1]])
    }

    #[test]
    fn trapezoid_facets() {
        let p = trapex();
        let fs: Vec<(Vec<i64>, i64)> = p.facets.iter().map(|f| (f.n.clone(), f.a)).collect();
        assert_eq!(
            fs,
            vec![(vec![1, 0], 0), (vec![0, 1], 0), (vec![-1, -1], 3), (vec![0, -1], 2)]
        );
        assert_eq!(p.points.len(), 9);
        assert_eq!(p.vertices, vec![vec![0, 0], vec![0, 2], vec![1, 2], vec![3, 0]]);
        assert_eq!(lattice_distance(&p, &[int(0), int(0)]), vec![int(0), int(0), int(3), int(2)]);
        assert_eq!(lattice_distance(&p, &[int(1), int(2)]), vec![int(1), int(2), int(0), int(0)]);
    }

    #[test]
    fn unit_simplex_lex_facet_order() {
        let p = hull_facets(&[vec![0, 0], vec![1, 0], vec![0, 1]], 2).unwrap();
        let fs: Vec<(Vec<i64>, i64)> = p.facets.iter().map(|f| (f.n.clone(), f.a)).collect();
        assert_eq!(fs, vec![(vec![-1, -1], 1), (vec![0, 1], 0), (vec![1, 0], 0)]);
    }

    #[test]
    fn unit_segment() {
        let p = hull_facets(&[vec![0], vec![1]], 1).unwrap();
        let p = p.with_facet_order(&[vec![-1], vec![1]]);
        assert_eq!(lattice_distance_matrix(&p).to_rows(), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            hull_facets(&[vec![0, 0], vec![1, 1], vec![2, 2]], 2),
            Err(PolytopeError::Degenerate { claimed: 2, actual: 1 })
        );
        assert!(matches!(
            hull_facets(&[vec![0, 0, 0, 0]], 4),
            Err(PolytopeError::DimensionTooHigh(4))
        ));
    }

    #[test]
    fn prismatoid_all_ones() {
        // Vertices of the prismatoid with a = a' = b = b' = d = l = 1.
        let pts = vec![
            vec![0, 0, 0],
            vec![2, 0, 0],
            vec![0, 1, 0],
            vec![1, 1, 0],
            vec![0, 0, 1],
            vec![2, 0, 1],
            vec![0, 1, 1],
            vec![1, 1, 1],
        ];
        let p = hull_facets(&pts, 3).unwrap();
        let normals: BTreeSet<Vec<i64>> = p.facets.iter().map(|f| f.n.clone()).collect();
        let expect: BTreeSet<Vec<i64>> = [
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![-1, -1, 0],
            vec![0, -1, 0],
            vec![0, 0, -1],
        ]
        .into_iter()
        .collect();
        assert_eq!(normals, expect);
        assert_eq!(p.vertices.len(), 8);
        assert!(p.is_simple());
    }

    #[test]
    fn pyramid_not_simple() {
        // Trapezoid base with apex above the origin.
        let pts = vec![vec![0, 0, 0], vec![2, 0, 0], vec![0, 1, 0], vec![1, 1, 0], vec![0, 0, 1]];
        let p = hull_facets(&pts, 3).unwrap();
        assert_eq!(p.num_facets(), 5);
        assert!(!p.is_simple());
        let m = matrix_m(&p);
        assert!(!m.is_horn);
    }

    #[test]
    fn fans_and_collections() {
        let p = trapex();
        let pc = primitive_collections(&normal_fan(&p));
        assert_eq!(pc, vec![vec![0, 2], vec![1, 3]]);
        let tri = hull_facets(&[vec![0, 0], vec![2, 0], vec![0, 2]], 2).unwrap();
        assert_eq!(primitive_collections(&normal_fan(&tri)), vec![vec![0, 1, 2]]);
        let m = matrix_m(&tri);
        assert!(m.is_horn);
        assert_eq!(m.matrix.row(3), &[-2; 6][..]);
    }

    #[test]
    fn span_projection() {
        let pts = vec![vec![1, 0, 1, 0], vec![0, 1, 1, 0], vec![1, 0, 0, 1], vec![0, 1, 0, 1]];
        let (p, map) = hull_in_span(&pts).unwrap();
        assert_eq!(map.rank, 2);
        assert_eq!(p.points.len(), 4);
        assert_eq!(p.num_facets(), 4);
        assert!(pts.iter().all(|x| map.contains(x)));
        assert!(!map.contains(&[1, 1, 1, 1]));
    }

    fn random_points() -> impl Strategy<Value = Vec<Vec<i64>>> {
        prop::collection::vec(prop::collection::vec(-3i64..4, 3), 5..14)
    }

    proptest! {
        #[test]
        fn hull_contains_all_and_is_tight(pts in random_points()) {
            let span = AffineLattice::spanned_by(&pts).unwrap();
            prop_assume!(span.rank == 3);
            let p = hull_facets(&pts, 3).unwrap();
            for x in &pts {
                prop_assert!(p.contains(x));
            }
            for f in &p.facets {
                prop_assert_eq!(gcd_slice(&f.n), 1);
                // every facet carries at least three affinely independent input points
                let on: Vec<Vec<i64>> = pts.iter().filter(|x| f.eval(x) == 0).cloned().collect();
                prop_assert!(AffineLattice::spanned_by(&on).unwrap().rank == 2);
            }
            for v in &p.vertices {
                prop_assert!(p.facets.iter().filter(|f| f.eval(v) == 0).count() >= 3);
            }
        }

        #[test]
        fn lattice_distance_is_affine(x in -5i64..6, y in -5i64..6, t in 0i64..7) {
            let p = trapex();
            let a = [rat(x, 3), rat(y, 2)];
            let b = [rat(y, 5), rat(-x, 7)];
            let s = rat(t, 6);
            let one_minus = int(1) - &s;
            let mix: Vec<Rat> = a.iter().zip(&b).map(|(u, v)| &s * u + &one_minus * v).collect();
            let ha = lattice_distance(&p, &a);
            let hb = lattice_distance(&p, &b);
            let hm = lattice_distance(&p, &mix);
            for i in 0..4 {
                prop_assert_eq!(&hm[i], &(&s * &ha[i] + &one_minus * &hb[i]));
            }
        }
    }
}
