//! Horn matrices and pairs: evaluation, validation, minimality and row reduction.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{fmt_rat, gcd_slice, int, pow_rat, rat_serde, IntMatrix, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HornError {
    #[error("column {col} sums to {sum}, not zero")]
    ColumnSum { col: usize, sum: i64 },
    #[error("lambda has {got} entries for {cols} columns")]
    LambdaLength { got: usize, cols: usize },
    #[error("lambda entry {0} is zero")]
    ZeroLambda(usize),
    #[error("{got} row labels for {rows} rows")]
    LabelCount { got: usize, rows: usize },
    #[error("u has {got} entries for {cols} columns")]
    ULength { got: usize, cols: usize },
    #[error("(Hu)_{row} = 0 but column {col} needs it")]
    ZeroBase { row: usize, col: usize },
    #[error("rows {rows:?} cancel but their common direction has mixed signs")]
    DegenerateClass { rows: Vec<usize> },
    #[error("row {0} has entries of both signs")]
    MixedSignRow(usize),
    #[error("minimized pair disagrees with the input at u = {0:?}")]
    PostCheck(Vec<i64>),
    #[error(transparent)]
    Shape(#[from] crate::exactmath::ExactError),
}

/// Integer matrix with zero column sums and a nonzero coefficient per column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HornPair {
    h: IntMatrix,
    lambda: Vec<Rat>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct HornJson {
    #[serde(rename = "H")]
    h: Vec<Vec<i64>>,
    #[serde(with = "rat_serde::vec")]
    lambda: Vec<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

impl HornPair {
    pub fn new(h: IntMatrix, lambda: Vec<Rat>) -> Result<Self, HornError> {
        let labels = default_labels(h.nrows());
        Self::with_labels(h, lambda, labels)
    }

    pub fn with_labels(h: IntMatrix, lambda: Vec<Rat>, labels: Vec<String>) -> Result<Self, HornError> {
        if lambda.len() != h.ncols() {
            return Err(HornError::LambdaLength { got: lambda.len(), cols: h.ncols() });
        }
        if labels.len() != h.nrows() {
            return Err(HornError::LabelCount { got: labels.len(), rows: h.nrows() });
        }
        if let Some((col, &sum)) = h.column_sums().iter().enumerate().find(|(_, s)| **s != 0) {
            return Err(HornError::ColumnSum { col, sum });
        }
        if let Some(j) = lambda.iter().position(Zero::is_zero) {
            return Err(HornError::ZeroLambda(j));
        }
        Ok(Self { h, lambda, labels })
    }

    pub fn h(&self) -> &IntMatrix {
        &self.h
    }

    pub fn lambda(&self) -> &[Rat] {
        &self.lambda
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ncols(&self) -> usize {
        self.h.ncols()
    }

    /// Rows sorted lexicographically; λ does not depend on row order.
    pub fn canonical_rows(&self) -> Vec<Vec<i64>> {
        self.h.sorted_rows()
    }

    /// Equal up to a permutation of rows (labels ignored).
    pub fn equivalent(&self, other: &HornPair) -> bool {
        self.lambda == other.lambda && self.h.same_rows_up_to_order(&other.h)
    }

    /// Reorder columns (and λ) by `perm`, where new column k is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> HornPair {
        HornPair {
            h: self.h.select_cols(perm),
            lambda: perm.iter().map(|&j| self.lambda[j].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(HornJson {
            h: self.h.to_rows(),
            lambda: self.lambda.clone(),
            labels: Some(self.labels.clone()),
        })
        .expect("plain data serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, String> {
        let j: HornJson = serde_json::from_str(s).map_err(|e| e.to_string())?;
        let cols = j.lambda.len();
        let h = IntMatrix::from_rows_with_cols(j.h, cols).map_err(|e| e.to_string())?;
        let labels = j.labels.unwrap_or_else(|| default_labels(h.nrows()));
        HornPair::with_labels(h, j.lambda, labels).map_err(|e| e.to_string())
    }

    /// Tab-separated rows, each prefixed by its label, then a `lambda` row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (label, row) in self.labels.iter().zip(self.h.rows()) {
            out.push_str(label);
            for x in row {
                out.push('\t');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out.push_str("lambda");
        for l in &self.lambda {
            out.push('\t');
            out.push_str(&fmt_rat(l));
        }
        out.push('\n');
        out
    }
}

impl Serialize for HornPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HornPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        HornPair::from_json_str(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

/// λ_j Π_i (Hu)_i^{H_ij}, exactly.
pub fn horn_eval(pair: &HornPair, u: &[Rat]) -> Result<Vec<Rat>, HornError> {
    let h = &pair.h;
    if u.len() != h.ncols() {
        return Err(HornError::ULength { got: u.len(), cols: h.ncols() });
    }
    let hu: Vec<Rat> = h
        .rows()
        .map(|row| {
            row.iter()
                .zip(u)
                .filter(|(x, _)| **x != 0)
                .fold(Rat::zero(), |acc, (x, y)| acc + y * int(*x))
        })
        .collect();
    let mut out = Vec::with_capacity(h.ncols());
    for j in 0..h.ncols() {
        let mut num = pair.lambda[j].numer().clone();
        let mut den = pair.lambda[j].denom().clone();
        for (i, v) in hu.iter().enumerate() {
            let e = h.get(i, j);
            if e == 0 {
                continue;
            }
            if v.is_zero() {
                return Err(HornError::ZeroBase { row: i, col: j });
            }
            let k = e.unsigned_abs() as usize;
            let (a, b) = if e > 0 { (v.numer(), v.denom()) } else { (v.denom(), v.numer()) };
            num *= num_traits::pow(a.clone(), k);
            den *= num_traits::pow(b.clone(), k);
        }
        out.push(Rat::new(num, den));
    }
    Ok(out)
}

/// Evaluate at a positive integer vector.
pub fn horn_eval_int(pair: &HornPair, u: &[i64]) -> Result<Vec<Rat>, HornError> {
    let u: Vec<Rat> = u.iter().map(|&x| int(x)).collect();
    horn_eval(pair, &u)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Failure {
    SumNot1(#[serde(with = "rat_serde")] Rat),
    NonPositive(usize),
    ZeroBase { row: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub u: Vec<i64>,
    pub failure: Failure,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub samples: usize,
    pub counterexample: Option<Counterexample>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Draw `count` positive integer vectors with entries in 1..=100.
pub fn sample_positive(n: usize, count: usize, seed: u64) -> Vec<Vec<i64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.gen_range(1..=100)).collect()).collect()
}

fn check_sample(pair: &HornPair, u: &[i64]) -> Option<Failure> {
    match horn_eval_int(pair, u) {
        Err(HornError::ZeroBase { row, col }) => Some(Failure::ZeroBase { row, col }),
        Err(e) => panic!("sample has the right length: {e}"),
        Ok(p) => {
            if let Some(j) = p.iter().position(|x| !x.is_positive()) {
                return Some(Failure::NonPositive(j));
            }
            let s: Rat = p.iter().sum();
            (!s.is_one()).then_some(Failure::SumNot1(s))
        }
    }
}

/// Probabilistic acceptance, sound refutation: exact checks at random positive u.
pub fn validate_horn_pair(pair: &HornPair, samples: usize, seed: u64) -> Validation {
    let us = sample_positive(pair.ncols(), samples, seed);
    let first_bad = us
        .par_iter()
        .enumerate()
        .filter_map(|(k, u)| check_sample(pair, u).map(|f| (k, f)))
        .min_by_key(|(k, _)| *k);
    Validation {
        samples,
        counterexample: first_bad.map(|(k, failure)| Counterexample { u: us[k].clone(), failure }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Witness {
    ZeroRow(usize),
    DependentRows(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinimalityCertificate {
    pub is_minimal: bool,
    pub witness: Option<Witness>,
}

/// Primitive direction with positive leading entry, and the multiplier c with row = c·v.
fn direction(row: &[i64]) -> Option<(Vec<i64>, i64)> {
    let g = gcd_slice(row);
    if g == 0 {
        return None;
    }
    let lead = row.iter().find(|x| **x != 0).unwrap();
    let c = if *lead < 0 { -g } else { g };
    Some((row.iter().map(|x| x / c).collect(), c))
}

pub fn is_minimal(h: &IntMatrix) -> MinimalityCertificate {
    if let Some(i) = (0..h.nrows()).find(|&i| h.row(i).iter().all(|x| *x == 0)) {
        return MinimalityCertificate { is_minimal: false, witness: Some(Witness::ZeroRow(i)) };
    }
    let dirs: Vec<Vec<i64>> = h.rows().map(|r| direction(r).unwrap().0).collect();
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            if dirs[i] == dirs[j] {
                return MinimalityCertificate {
                    is_minimal: false,
                    witness: Some(Witness::DependentRows(i, j)),
                };
            }
        }
    }
    MinimalityCertificate { is_minimal: true, witness: None }
}

/// Merge collinear rows and drop zero rows, adjusting λ so the Horn map is unchanged.
pub fn minimize(pair: &HornPair) -> Result<HornPair, HornError> {
    let h = &pair.h;
    let mut classes: Vec<(Vec<i64>, Vec<(usize, i64)>)> = Vec::new();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    for (i, row) in h.rows().enumerate() {
        let Some((v, c)) = direction(row) else { continue };
        match index.get(&v) {
            Some(&k) => classes[k].1.push((i, c)),
            None => {
                index.insert(v.clone(), classes.len());
                classes.push((v, vec![(i, c)]));
            }
        }
    }
    let mut lambda = pair.lambda.clone();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (v, members) in &classes {
        let total: i64 = members.iter().map(|(_, c)| c).sum();
        if members.len() == 1 {
            rows.push(h.row(members[0].0).to_vec());
            labels.push(pair.labels[members[0].0].clone());
            continue;
        }
        let mixed = v.iter().any(|x| *x > 0) && v.iter().any(|x| *x < 0);
        if total == 0 && mixed {
            return Err(HornError::DegenerateClass { rows: members.iter().map(|m| m.0).collect() });
        }
        for (j, l) in lambda.iter_mut().enumerate() {
            if v[j] == 0 {
                continue;
            }
            for (_, c) in members {
                *l *= pow_rat(&int(*c), c * v[j]).expect("nonzero multiplier");
            }
            if total != 0 {
                *l /= pow_rat(&int(total), total * v[j]).expect("nonzero total");
            }
        }
        if total != 0 {
            rows.push(v.iter().map(|x| x * total).collect());
            let parts: Vec<&str> = members.iter().map(|(i, _)| pair.labels[*i].as_str()).collect();
            labels.push(parts.join(" + "));
        }
    }
    let out = HornPair::with_labels(IntMatrix::from_rows_with_cols(rows, h.ncols())?, lambda, labels)?;
    post_check(pair, &out)?;
    Ok(out)
}

fn post_check(before: &HornPair, after: &HornPair) -> Result<(), HornError> {
    for u in sample_positive(before.ncols(), 4, 0x5eed) {
        if let (Ok(a), Ok(b)) = (horn_eval_int(before, &u), horn_eval_int(after, &u)) {
            if a != b {
                return Err(HornError::PostCheck(u));
            }
        }
    }
    Ok(())
}

/// Rows with all entries ≥ 0, together with their indices.
pub fn positive_part(h: &IntMatrix) -> Result<(IntMatrix, Vec<usize>), HornError> {
    let mut keep = Vec::new();
    for (i, row) in h.rows().enumerate() {
        let pos = row.iter().any(|x| *x > 0);
        let neg = row.iter().any(|x| *x < 0);
        if pos && neg {
            return Err(HornError::MixedSignRow(i));
        }
        if !neg {
            keep.push(i);
        }
    }
    Ok((h.select_rows(&keep), keep))
}

/// Integer sign helper for λ exponents of the form (−1)^k.
pub fn sign_pow(k: i64) -> BigInt {
    if k.rem_euclid(2) == 0 {
        BigInt::one()
    } else {
        -BigInt::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::rat;
    use proptest::prelude::*;

    pub(crate) fn independence() -> HornPair {
        let h = IntMatrix::from_rows(vec![
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
            vec![-2, -2, -2, -2],
        ])
        .unwrap();
        HornPair::new(h, vec![int(4); 4]).unwrap()
    }

    fn raw_independence() -> HornPair {
        let h = IntMatrix::from_rows(vec![
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
            vec![-1, -1, -1, -1],
            vec![-1, -1, -1, -1],
        ])
        .unwrap();
        HornPair::new(h, vec![int(1); 4]).unwrap()
    }

    #[test]
    fn independence_eval() {
        let p = independence();
        assert_eq!(horn_eval_int(&p, &[1, 1, 1, 1]).unwrap(), vec![rat(1, 4); 4]);
        assert_eq!(horn_eval_int(&p, &[2, 1, 1, 2]).unwrap(), vec![rat(1, 4); 4]);
        assert_eq!(
            horn_eval_int(&p, &[3, 1, 1, 1]).unwrap(),
            vec![rat(4, 9), rat(2, 9), rat(2, 9), rat(1, 9)]
        );
    }

    #[test]
    fn validation() {
        assert!(validate_horn_pair(&independence(), 100, 0).passed());
        let p = independence();
        let doubled = HornPair::new(p.h().clone(), vec![int(8); 4]).unwrap();
        let v = validate_horn_pair(&doubled, 10, 0);
        assert_eq!(v.counterexample.unwrap().failure, Failure::SumNot1(int(2)));
    }

    #[test]
    fn invalid_pairs_rejected() {
        let h = IntMatrix::from_rows(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(matches!(HornPair::new(h.clone(), vec![int(1); 2]), Err(HornError::ColumnSum { .. })));
        let h = IntMatrix::from_rows(vec![vec![1], vec![-1]]).unwrap();
        assert_eq!(HornPair::new(h, vec![int(0)]), Err(HornError::ZeroLambda(0)));
    }

    #[test]
    fn minimality() {
        assert!(is_minimal(independence().h()).is_minimal);
        let mut h = independence().h().clone();
        h.push_row(&[0, 0, 0, 0]);
        assert_eq!(is_minimal(&h).witness, Some(Witness::ZeroRow(5)));
        assert_eq!(is_minimal(raw_independence().h()).witness, Some(Witness::DependentRows(4, 5)));
    }

    #[test]
    fn minimize_independence() {
        let m = minimize(&raw_independence()).unwrap();
        assert!(m.equivalent(&independence()));
        assert_eq!(m.lambda(), &[int(4), int(4), int(4), int(4)]);
        assert_eq!(minimize(&m).unwrap(), m);
    }

    #[test]
    fn cancelling_class_is_dropped() {
        // rows r and -r cancel; λ picks up (1)^{v}(-1)^{-v}
        let h = IntMatrix::from_rows(vec![
            vec![1, 0],
            vec![0, 1],
            vec![-1, -1],
            vec![1, 1],
            vec![-1, -1],
        ])
        .unwrap();
        let p = HornPair::new(h, vec![int(-1), int(-1)]).unwrap();
        let m = minimize(&p).unwrap();
        assert_eq!(m.h().nrows(), 3);
        assert_eq!(horn_eval_int(&m, &[2, 3]).unwrap(), horn_eval_int(&p, &[2, 3]).unwrap());
    }

    #[test]
    fn positive_part_rows() {
        let (pp, idx) = positive_part(independence().h()).unwrap();
        assert_eq!(pp.nrows(), 4);
        assert_eq!(idx, vec![0, 1, 2, 3]);
        let h = IntMatrix::from_rows(vec![vec![1, -1], vec![-1, 1]]).unwrap();
        assert_eq!(positive_part(&h).unwrap_err(), HornError::MixedSignRow(0));
    }

    #[test]
    fn json_and_tsv() {
        let p = minimize(&raw_independence()).unwrap();
        let s = p.to_json_value().to_string();
        assert_eq!(HornPair::from_json_str(&s).unwrap(), p);
        let tsv = p.to_tsv();
        assert!(tsv.ends_with("lambda\t4\t4\t4\t4\n"));
        assert!(tsv.lines().all(|l| l.split('\t').count() == 5));
        let bare = r#"{"H":[[1,1],[-1,-1]],"lambda":["-1/2","-1/2"]}"#;
        let q = HornPair::from_json_str(bare).unwrap();
        assert_eq!(q.labels(), &["1".to_string(), "2".to_string()]);
    }

    fn positive_u() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(1i64..60, 4)
    }

    proptest! {
        #[test]
        fn minimize_preserves_the_map(u in positive_u()) {
            let raw = raw_independence();
            let m = minimize(&raw).unwrap();
            prop_assert_eq!(horn_eval_int(&raw, &u).unwrap(), horn_eval_int(&m, &u).unwrap());
            let s: Rat = horn_eval_int(&m, &u).unwrap().iter().sum();
            prop_assert_eq!(s, int(1));
        }

        #[test]
        fn minimize_scaled_copies(k in 1i64..4, u in positive_u()) {
            // Split the negative row into k + 1 proportional pieces.
            let mut rows = independence().h().to_rows();
            let neg = rows.pop().unwrap();
            for _ in 0..k {
                rows.push(neg.iter().map(|x| x / 2).collect());
            }
            let last: Vec<i64> = neg.iter().map(|x| x - (x / 2) * k).collect();
            rows.push(last);
            let p = HornPair::new(IntMatrix::from_rows(rows).unwrap(), vec![int(1); 4]);
            let p = p.unwrap();
            let m = minimize(&p).unwrap();
            prop_assert!(is_minimal(m.h()).is_minimal);
            prop_assert_eq!(m.h().column_sums(), vec![0; 4]);
            prop_assert_eq!(horn_eval_int(&p, &u).unwrap(), horn_eval_int(&m, &u).unwrap());
        }
    }
}
