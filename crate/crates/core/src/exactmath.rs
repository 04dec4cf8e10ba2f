//! Exact scalars, integer matrices and sparse multivariate polynomials.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational number. Always stored reduced with a positive denominator.
pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("cannot parse rational `{0}`")]
    BadRational(String),
    #[error("ragged matrix: row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("malformed polynomial: {0}")]
    BadPoly(String),
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// `p/q`, or just `p` when the denominator is one.
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat, ExactError> {
    let bad = || ExactError::BadRational(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(p, q))
        }
        None => Ok(Rat::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Serde adapters that write rationals as decimal-free strings.
pub mod rat_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(fmt_rat))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse_rat(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// `r^e` for any integer exponent. Returns `None` for `0^e` with `e < 0`.
pub fn pow_rat(r: &Rat, e: i64) -> Option<Rat> {
    if e == 0 {
        return Some(Rat::one());
    }
    if r.is_zero() {
        return if e > 0 { Some(Rat::zero()) } else { None };
    }
    let k = e.unsigned_abs() as u32;
    let n = num_traits::pow(r.numer().clone(), k as usize);
    let d = num_traits::pow(r.denom().clone(), k as usize);
    Some(if e > 0 { Rat::new_raw_sign(n, d) } else { Rat::new_raw_sign(d, n) })
}

trait RawSign {
    fn new_raw_sign(n: BigInt, d: BigInt) -> Rat;
}

impl RawSign for Rat {
    // Powers of a reduced fraction stay reduced; only the sign may need moving.
    fn new_raw_sign(n: BigInt, d: BigInt) -> Rat {
        if d.is_negative() {
            Rat::new_raw(-n, -d)
        } else {
            Rat::new_raw(n, d)
        }
    }
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Multinomial coefficient `(|K| choose K)`.
pub fn multinomial(parts: &[u32]) -> BigInt {
    let mut total = 0u64;
    let mut acc = BigInt::one();
    for &k in parts {
        total += k as u64;
        acc *= binomial(total, k as u64);
    }
    acc
}

/// All compositions of `total` into `parts` nonnegative entries, lex-descending.
pub fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
    fn rec(parts: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=total).rev() {
            prefix.push(k);
            rec(parts - 1, total - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(parts, total, &mut Vec::with_capacity(parts), &mut out);
    out
}

pub fn gcd_slice(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}

/// Dense row-major integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self, ExactError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(ExactError::Ragged { row: i, got: r.len(), expected: cols });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Build with an explicit column count so that zero-row matrices keep their width.
    pub fn from_rows_with_cols(rows: Vec<Vec<i64>>, cols: usize) -> Result<Self, ExactError> {
        if rows.is_empty() {
            return Ok(Self::zeros(0, cols));
        }
        let m = Self::from_rows(rows)?;
        if m.cols != cols {
            return Err(ExactError::Ragged { row: 0, got: m.cols, expected: cols });
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.rows().map(<[i64]>::to_vec).collect()
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_sums(&self) -> Vec<i64> {
        let mut s = vec![0; self.cols];
        for r in self.rows() {
            for (acc, x) in s.iter_mut().zip(r) {
                *acc += x;
            }
        }
        s
    }

    pub fn select_rows(&self, idx: &[usize]) -> IntMatrix {
        let rows = idx.iter().map(|&i| self.row(i).to_vec()).collect();
        IntMatrix::from_rows_with_cols(rows, self.cols).expect("rows share a width")
    }

    pub fn select_cols(&self, idx: &[usize]) -> IntMatrix {
        let rows = self.rows().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
        IntMatrix::from_rows_with_cols(rows, idx.len()).expect("rows share a width")
    }

    pub fn push_row(&mut self, row: &[i64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Rows in lexicographic order; the canonical form for comparing Horn matrices.
    pub fn sorted_rows(&self) -> Vec<Vec<i64>> {
        let mut r = self.to_rows();
        r.sort();
        r
    }

    pub fn same_rows_up_to_order(&self, other: &IntMatrix) -> bool {
        self.cols == other.cols && self.sorted_rows() == other.sorted_rows()
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(i64::to_string).collect();
            writeln!(f, "{}", line.join("\t"))?;
        }
        Ok(())
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<i64>>::deserialize(d)?;
        IntMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Exponent vector with graded-lex order: total degree first, then lex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial with rational coefficients over an ordered list of named symbols.
///
/// Equality is structural: two polynomials over different symbol lists are
/// different values even if they denote the same function. Use `is_zero` on a
/// difference for a semantic comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MPoly {
    symbols: Arc<[String]>,
    terms: BTreeMap<Monomial, Rat>,
}

impl MPoly {
    pub fn zero(symbols: Arc<[String]>) -> Self {
        Self { symbols, terms: BTreeMap::new() }
    }

    pub fn constant(symbols: Arc<[String]>, c: Rat) -> Self {
        let n = symbols.len();
        let mut p = Self::zero(symbols);
        if !c.is_zero() {
            p.terms.insert(Monomial(vec![0; n]), c);
        }
        p
    }

    pub fn one(symbols: Arc<[String]>) -> Self {
        Self::constant(symbols, Rat::one())
    }

    pub fn var(symbols: Arc<[String]>, i: usize) -> Self {
        let mut e = vec![0; symbols.len()];
        e[i] = 1;
        Self::monomial(symbols, Rat::one(), e)
    }

    pub fn monomial(symbols: Arc<[String]>, c: Rat, exps: Vec<u32>) -> Self {
        assert_eq!(exps.len(), symbols.len(), "exponent length mismatch");
        let mut p = Self::zero(symbols);
        if !c.is_zero() {
            p.terms.insert(Monomial(exps), c);
        }
        p
    }

    pub fn symbol_list(names: &[&str]) -> Arc<[String]> {
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn symbols(&self) -> &Arc<[String]> {
        &self.symbols
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rat)> {
        self.terms.iter().map(|(m, c)| (m.0.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u64 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// The constant value if the polynomial has no non-constant terms.
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn coefficient(&self, exps: &[u32]) -> Rat {
        self.terms.get(&Monomial(exps.to_vec())).cloned().unwrap_or_else(Rat::zero)
    }

    fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Re-express over `target`, which must contain every symbol actually used.
    pub fn with_symbols(&self, target: &Arc<[String]>) -> Self {
        if Arc::ptr_eq(&self.symbols, target) || self.symbols[..] == target[..] {
            return Self { symbols: target.clone(), terms: self.terms.clone() };
        }
        let map: Vec<usize> = self
            .symbols
            .iter()
            .map(|s| target.iter().position(|t| t == s).unwrap_or(usize::MAX))
            .collect();
        let mut out = Self::zero(target.clone());
        for (m, c) in &self.terms {
            let mut e = vec![0; target.len()];
            for (i, &k) in m.0.iter().enumerate() {
                if k > 0 {
                    assert!(map[i] != usize::MAX, "symbol {} missing from target", self.symbols[i]);
                    e[map[i]] = k;
                }
            }
            out.add_term(Monomial(e), c.clone());
        }
        out
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        if Arc::ptr_eq(&self.symbols, &other.symbols) || self.symbols[..] == other.symbols[..] {
            return (self.clone(), other.with_symbols(&self.symbols));
        }
        let mut union: Vec<String> = self.symbols.to_vec();
        for s in other.symbols.iter() {
            if !union.contains(s) {
                union.push(s.clone());
            }
        }
        let union: Arc<[String]> = union.into();
        (self.with_symbols(&union), other.with_symbols(&union))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self::zero(self.symbols.clone());
        if c.is_zero() {
            return out;
        }
        for (m, k) in &self.terms {
            out.terms.insert(m.clone(), k * c);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut result = Self::one(self.symbols.clone());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Evaluate at a point given in symbol order. Uses 0^0 = 1.
    pub fn eval(&self, point: &[Rat]) -> Rat {
        assert_eq!(point.len(), self.symbols.len(), "point dimension mismatch");
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(&m.0) {
                if e > 0 {
                    t *= pow_rat(x, e as i64).expect("nonnegative exponent");
                }
            }
            acc += t;
        }
        acc
    }

    /// Evaluate at a point given by name; every symbol must be assigned.
    pub fn eval_named(&self, point: &BTreeMap<String, Rat>) -> Option<Rat> {
        let v: Option<Vec<Rat>> = self.symbols.iter().map(|s| point.get(s).cloned()).collect();
        v.map(|v| self.eval(&v))
    }

    /// Substitute `images[i]` for symbol `i`; all images must share one symbol list.
    pub fn substitute(&self, images: &[MPoly], target: &Arc<[String]>) -> MPoly {
        assert_eq!(images.len(), self.symbols.len(), "one image per symbol");
        let images: Vec<MPoly> = images.iter().map(|p| p.with_symbols(target)).collect();
        let mut cache: Vec<Vec<MPoly>> = vec![Vec::new(); images.len()];
        let mut out = MPoly::zero(target.clone());
        for (m, c) in &self.terms {
            let mut t = MPoly::constant(target.clone(), c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let powers = &mut cache[i];
                if powers.is_empty() {
                    powers.push(MPoly::one(target.clone()));
                }
                while powers.len() <= e as usize {
                    let next = powers.last().unwrap() * &images[i];
                    powers.push(next);
                }
                t = &t * &powers[e as usize];
            }
            out = &out + &t;
        }
        out
    }

    /// Fast substitution when every image is a single term `coef * x^exps`.
    pub fn substitute_monomials(&self, images: &[(Rat, Vec<u32>)], target: &Arc<[String]>) -> MPoly {
        assert_eq!(images.len(), self.symbols.len(), "one image per symbol");
        let mut out = MPoly::zero(target.clone());
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            let mut e = vec![0u32; target.len()];
            for (i, &k) in m.0.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let (ic, ie) = &images[i];
                coef *= pow_rat(ic, k as i64).expect("nonnegative exponent");
                for (acc, &x) in e.iter_mut().zip(ie) {
                    *acc += x * k;
                }
            }
            out.add_term(Monomial(e), coef);
        }
        out
    }

    pub fn to_json(&self) -> PolyJson {
        PolyJson {
            symbols: self.symbols.to_vec(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermJson { exp: m.0.clone(), coef: c.clone() })
                .collect(),
        }
    }

    pub fn from_json(j: &PolyJson) -> Result<Self, ExactError> {
        let symbols: Arc<[String]> = j.symbols.clone().into();
        let mut p = MPoly::zero(symbols.clone());
        for t in &j.terms {
            if t.exp.len() != symbols.len() {
                return Err(ExactError::BadPoly(format!(
                    "exponent of length {} over {} symbols",
                    t.exp.len(),
                    symbols.len()
                )));
            }
            p.add_term(Monomial(t.exp.clone()), t.coef.clone());
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    #[serde(with = "rat_serde")]
    pub coef: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyJson {
    pub symbols: Vec<String>,
    pub terms: Vec<TermJson>,
}

impl Serialize for MPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = PolyJson::deserialize(d)?;
        MPoly::from_json(&j).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let vars: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        self.symbols[i].clone()
                    } else {
                        format!("{}^{}", self.symbols[i], e)
                    }
                })
                .collect();
            if vars.is_empty() {
                write!(f, "{}", fmt_rat(&mag))?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{}*{}", fmt_rat(&mag), vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl Add for &MPoly {
    type Output = MPoly;
    fn add(self, rhs: &MPoly) -> MPoly {
        let (mut a, b) = self.aligned(rhs);
        for (m, c) in b.terms {
            a.add_term(m, c);
        }
        a
    }
}

impl Sub for &MPoly {
    type Output = MPoly;
    fn sub(self, rhs: &MPoly) -> MPoly {
        let (mut a, b) = self.aligned(rhs);
        for (m, c) in b.terms {
            a.add_term(m, -c);
        }
        a
    }
}

impl Neg for &MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        self.scale(&-Rat::one())
    }
}

impl Mul for &MPoly {
    type Output = MPoly;
    fn mul(self, rhs: &MPoly) -> MPoly {
        let (a, b) = self.aligned(rhs);
        let mut out = MPoly::zero(a.symbols.clone());
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                let e: Vec<u32> = ma.0.iter().zip(&mb.0).map(|(x, y)| x + y).collect();
                out.add_term(Monomial(e), ca * cb);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for MPoly {
            type Output = MPoly;
            fn $m(self, rhs: MPoly) -> MPoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Convert a small rational to `f64`; used only for reporting.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st() -> Arc<[String]> {
        MPoly::symbol_list(&["s", "t"])
    }

    fn f121() -> MPoly {
        let s = MPoly::var(st(), 0);
        let t = MPoly::var(st(), 1);
        let one = MPoly::one(st());
        let a = &one + &s;
        &a * &(&a + &t).pow(2)
    }

    #[test]
    fn rational_round_trip() {
        for s in ["0", "-3", "4/6", "-10/4"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&fmt_rat(&r)).unwrap(), r);
        }
        assert_eq!(fmt_rat(&rat(4, 6)), "2/3");
        assert_eq!(fmt_rat(&rat(3, -1)), "-3");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("1.5").is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(3, 4), BigInt::zero());
        assert_eq!(multinomial(&[1, 1, 0]), BigInt::from(2));
        assert_eq!(multinomial(&[2, 1, 1]), BigInt::from(12));
    }

    #[test]
    fn compositions_lex_descending() {
        assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(compositions(3, 2).len(), 6);
        assert_eq!(compositions(3, 2)[0], vec![2, 0, 0]);
        assert_eq!(compositions(2, 0), vec![vec![0, 0]]);
    }

    #[test]
    fn trapezoid_polynomial() {
        let p = f121();
        let expect = [
            ((0, 2), 1),
            ((1, 2), 1),
            ((0, 1), 2),
            ((1, 1), 4),
            ((2, 1), 2),
            ((0, 0), 1),
            ((1, 0), 3),
            ((2, 0), 3),
            ((3, 0), 1),
        ];
        assert_eq!(p.num_terms(), 9);
        for ((i, j), c) in expect {
            assert_eq!(p.coefficient(&[i, j]), int(c));
        }
        assert_eq!(p.eval(&[int(1), int(1)]), int(18));
    }

    #[test]
    fn small_cases() {
        let sy = MPoly::symbol_list(&["s2", "s3"]);
        let a = MPoly::var(sy.clone(), 0);
        let b = MPoly::var(sy.clone(), 1);
        let sum = &(&a + &b) + &(&a - &b);
        assert_eq!(sum, a.scale(&int(2)));
        let sq = (&a + &b).pow(2);
        assert_eq!(sq.coefficient(&[1, 1]), int(2));
        assert_eq!((&a + &b).pow(0), MPoly::one(sy));
        let f111 = {
            let s = MPoly::var(st(), 0);
            let t = MPoly::var(st(), 1);
            let a = &MPoly::one(st()) + &s;
            &a * &(&a + &t)
        };
        assert_eq!(f111.num_terms(), 5);
        assert_eq!(f111.coefficient(&[1, 0]), int(2));
    }

    #[test]
    fn alignment_by_union() {
        let p = MPoly::var(MPoly::symbol_list(&["x"]), 0);
        let q = MPoly::var(MPoly::symbol_list(&["y"]), 0);
        let r = &p * &q;
        assert_eq!(r.symbols().to_vec(), vec!["x".to_string(), "y".to_string()]);
        assert_eq!(r.coefficient(&[1, 1]), int(1));
    }

    #[test]
    fn json_round_trip() {
        let p = f121().scale(&rat(-2, 3));
        let s = serde_json::to_string(&p).unwrap();
        let back: MPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(s.contains("\"coef\":\"-2/3\""));
    }

    #[test]
    fn zero_to_zero_is_one() {
        let s = MPoly::var(st(), 0).pow(0);
        assert_eq!(s.eval(&[int(0), int(0)]), int(1));
        assert_eq!(pow_rat(&int(0), 0), Some(int(1)));
        assert_eq!(pow_rat(&int(0), -1), None);
        assert_eq!(pow_rat(&rat(-2, 3), -3), Some(rat(-27, 8)));
    }

    #[test]
    fn substitution() {
        // x -> s + t, y -> s t
        let xy = MPoly::symbol_list(&["x", "y"]);
        let p = &MPoly::var(xy.clone(), 0).pow(2) - &MPoly::var(xy, 1);
        let s = MPoly::var(st(), 0);
        let t = MPoly::var(st(), 1);
        let img = [&s + &t, &s * &t];
        let q = p.substitute(&img, &st());
        let expect = &(&s.pow(2) + &t.pow(2)) + &(&s * &t);
        assert_eq!(q, expect);
        let mono = p.substitute_monomials(
            &[(int(2), vec![1, 0]), (int(3), vec![1, 1])],
            &st(),
        );
        assert_eq!(mono.coefficient(&[2, 0]), int(4));
        assert_eq!(mono.coefficient(&[1, 1]), int(-3));
    }

    fn small_poly() -> impl Strategy<Value = MPoly> {
        prop::collection::vec(((0u32..3, 0u32..3, 0u32..3), -5i64..6, 1i64..4), 0..5).prop_map(
            |terms| {
                let sy = MPoly::symbol_list(&["a", "b", "c"]);
                terms.into_iter().fold(MPoly::zero(sy.clone()), |acc, ((x, y, z), n, d)| {
                    &acc + &MPoly::monomial(sy.clone(), rat(n, d), vec![x, y, z])
                })
            },
        )
    }

    proptest! {
        #[test]
        fn distributive(p in small_poly(), q in small_poly(), r in small_poly()) {
            prop_assert_eq!(&(&p + &q) * &r, &(&p * &r) + &(&q * &r));
        }

        #[test]
        fn power_law(p in small_poly(), a in 0u32..4, b in 0u32..4) {
            prop_assert_eq!(p.pow(a + b), &p.pow(a) * &p.pow(b));
        }

        #[test]
        fn canonical_serialization(p in small_poly(), q in small_poly()) {
            let sp = serde_json::to_string(&p).unwrap();
            let sq = serde_json::to_string(&q).unwrap();
            prop_assert_eq!(p == q, sp == sq);
        }

        #[test]
        fn eval_is_ring_hom(p in small_poly(), q in small_poly(), x in -4i64..5, y in 1i64..4) {
            let pt = [rat(x, y), rat(y, 3), rat(-1, y)];
            prop_assert_eq!((&p * &q).eval(&pt), p.eval(&pt) * q.eval(&pt));
            prop_assert_eq!((&p + &q).eval(&pt), p.eval(&pt) + q.eval(&pt));
        }
    }
}
