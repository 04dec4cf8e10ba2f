//! Floating-point cross-checks for the closed-form estimator: a damped
//! multiplicative ascent with restarts, a brute-force grid search, and the
//! exact Birch-point test for toric trees.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::exactmath::Rat;
use crate::stagedtree::{is_balanced, rational_mle, StagedTree, TreeError};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iters: 100_000, restarts: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericMle {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no convergence after {} iterations (log-likelihood {})", best.iterations, best.loglik)]
    NonConvergence { best: NumericMle },
    #[error("{0} free parameters; the grid search handles at most 2")]
    TooManyParams(usize),
    #[error("the tree is not balanced, so the model is not toric")]
    NotToric,
    #[error("{got} counts for {expected} atoms")]
    CountLength { got: usize, expected: usize },
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Coefficients and exponents of the atoms as floats.
struct FloatModel {
    coef: Vec<f64>,
    exps: Vec<Vec<u32>>,
    stages: Vec<std::ops::Range<usize>>,
}

impl FloatModel {
    fn new(tree: &StagedTree) -> Self {
        let coef = tree.atoms().iter().map(|a| a.coef.to_f64().unwrap_or(f64::INFINITY)).collect();
        let exps = tree.atoms().iter().map(|a| a.exps.clone()).collect();
        let stages = (0..tree.stages().len()).map(|k| tree.stage_symbols(k)).collect();
        Self { coef, exps, stages }
    }

    fn p(&self, theta: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.exps)
            .map(|(c, e)| e.iter().zip(theta).fold(*c, |acc, (&k, t)| acc * t.powi(k as i32)))
            .collect()
    }

    fn loglik(&self, theta: &[f64], u: &[u64]) -> f64 {
        self.p(theta)
            .iter()
            .zip(u)
            .filter(|(_, &n)| n > 0)
            .map(|(p, &n)| n as f64 * p.ln())
            .sum()
    }

    /// ∂ℓ/∂θ_i = Σ_j (u_j / p_j) ∂p_j/∂θ_i.
    fn gradient(&self, theta: &[f64], u: &[u64]) -> Vec<f64> {
        let p = self.p(theta);
        let mut g = vec![0.0; theta.len()];
        for (j, e) in self.exps.iter().enumerate() {
            if u[j] == 0 {
                continue;
            }
            let w = u[j] as f64 / p[j];
            for i in 0..theta.len() {
                if e[i] == 0 {
                    continue;
                }
                let mut d = self.coef[j] * e[i] as f64 * theta[i].powi(e[i] as i32 - 1);
                for (k, (&ek, tk)) in e.iter().zip(theta).enumerate() {
                    if k != i {
                        d *= tk.powi(ek as i32);
                    }
                }
                g[i] += w * d;
            }
        }
        g
    }

    /// θ_i ∂ℓ/∂θ_i normalised within each stage; stages without data stay put.
    fn em_step(&self, theta: &[f64], u: &[u64]) -> Vec<f64> {
        let g = self.gradient(theta, u);
        let mut next = theta.to_vec();
        for r in &self.stages {
            let total: f64 = r.clone().map(|i| theta[i] * g[i]).sum();
            if total > 0.0 {
                for i in r.clone() {
                    next[i] = theta[i] * g[i] / total;
                }
            }
        }
        next
    }

    fn random_start(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut theta = vec![0.0; n];
        for r in &self.stages {
            let draws: Vec<f64> = r.clone().map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = draws.iter().sum();
            for (i, x) in r.clone().zip(draws) {
                theta[i] = x / s;
            }
        }
        theta
    }
}

fn check_counts(tree: &StagedTree, u: &[u64]) -> Result<(), OracleError> {
    if u.len() != tree.num_atoms() {
        return Err(OracleError::CountLength { got: u.len(), expected: tree.num_atoms() });
    }
    Ok(())
}

/// Log-likelihood Σ u_j log p_j(θ) in floating point.
pub fn loglik(tree: &StagedTree, theta: &[f64], u: &[u64]) -> f64 {
    FloatModel::new(tree).loglik(theta, u)
}

const DAMPING: f64 = 0.5;

/// Maximise the likelihood by damped multiplicative updates from several random starts.
pub fn numeric_mle(tree: &StagedTree, u: &[u64], config: &OptimizerConfig) -> Result<NumericMle, OracleError> {
    check_counts(tree, u)?;
    if config.tolerance <= 0.0 {
        return Err(OracleError::BadTolerance);
    }
    let model = FloatModel::new(tree);
    let n = tree.symbols().len();
    let runs: Vec<(bool, NumericMle)> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            let mut theta = model.random_start(&mut rng, n);
            let mut converged = false;
            let mut iterations = 0;
            while iterations < config.max_iters {
                iterations += 1;
                let em = model.em_step(&theta, u);
                let gap = em.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if gap < config.tolerance {
                    theta = em;
                    converged = true;
                    break;
                }
                theta = theta.iter().zip(&em).map(|(t, e)| (1.0 - DAMPING) * t + DAMPING * e).collect();
            }
            let p = model.p(&theta);
            let ll = model.loglik(&theta, u);
            (converged, NumericMle { theta, p, loglik: ll, iterations })
        })
        .collect();
    let (converged, best) = runs
        .into_iter()
        .max_by(|a, b| a.1.loglik.total_cmp(&b.1.loglik))
        .expect("at least one restart");
    if converged {
        Ok(best)
    } else {
        Err(OracleError::NonConvergence { best })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMle {
    pub theta: Vec<f64>,
    pub loglik: f64,
}

/// Exhaustive search over interior grid points k·resolution, for at most two free parameters.
pub fn grid_mle(tree: &StagedTree, u: &[u64], resolution: f64) -> Result<GridMle, OracleError> {
    check_counts(tree, u)?;
    let model = FloatModel::new(tree);
    let free: usize = model.stages.iter().map(|r| r.len() - 1).sum();
    if free > 2 {
        return Err(OracleError::TooManyParams(free));
    }
    let steps = (1.0 / resolution).round() as usize;
    // candidate values of each stage, each a full probability vector
    let per_stage: Vec<Vec<Vec<f64>>> = model
        .stages
        .iter()
        .map(|r| match r.len() {
            1 => vec![vec![1.0]],
            2 => (1..steps).map(|k| vec![k as f64 * resolution, 1.0 - k as f64 * resolution]).collect(),
            _ => {
                let mut v = Vec::new();
                for k in 1..steps {
                    for m in 1..steps - k {
                        let (x, y) = (k as f64 * resolution, m as f64 * resolution);
                        v.push(vec![x, y, 1.0 - x - y]);
                    }
                }
                v
            }
        })
        .collect();
    let varying: Vec<usize> = (0..per_stage.len()).filter(|&k| per_stage[k].len() > 1).collect();
    let assemble = |choice: &[usize]| -> Vec<f64> {
        let mut theta = vec![0.0; tree.symbols().len()];
        for (k, r) in model.stages.iter().enumerate() {
            let pick = &per_stage[k][choice[k]];
            for (i, x) in r.clone().zip(pick) {
                theta[i] = *x;
            }
        }
        theta
    };
    let outer = varying.first().map_or(1, |&k| per_stage[k].len());
    let best = (0..outer)
        .into_par_iter()
        .map(|a| {
            let mut choice = vec![0usize; per_stage.len()];
            if let Some(&k) = varying.first() {
                choice[k] = a;
            }
            let inner = varying.get(1).map_or(1, |&k| per_stage[k].len());
            let mut best: Option<GridMle> = None;
            for b in 0..inner {
                if let Some(&k) = varying.get(1) {
                    choice[k] = b;
                }
                let theta = assemble(&choice);
                let ll = model.loglik(&theta, u);
                if best.as_ref().is_none_or(|g| ll > g.loglik) {
                    best = Some(GridMle { theta, loglik: ll });
                }
            }
            best.expect("nonempty grid")
        })
        .reduce_with(|x, y| if y.loglik > x.loglik { y } else { x })
        .expect("nonempty grid");
    Ok(best)
}

/// Σ_j Φ(u)_j a_j = Σ_j (u_j/|u|) a_j, checked exactly; only defined for toric trees.
pub fn birch_check(tree: &StagedTree, u: &[u64]) -> Result<bool, OracleError> {
    check_counts(tree, u)?;
    if !is_balanced(tree)?.balanced {
        return Err(OracleError::NotToric);
    }
    let mle = rational_mle(tree, u)?;
    let total: u64 = u.iter().sum();
    let n = tree.symbols().len();
    let mut lhs = vec![Rat::from_integer(0.into()); n];
    let mut rhs = lhs.clone();
    for ((atom, p), &uj) in tree.atoms().iter().zip(&mle.p).zip(u) {
        let share = Rat::new(uj.into(), total.into());
        for (i, &e) in atom.exps.iter().enumerate() {
            if e > 0 {
                let e = Rat::from_integer(e.into());
                lhs[i] += p * &e;
                rhs[i] += &share * e;
            }
        }
    }
    Ok(lhs == rhs)
}

/// Float copy of an exact vector, for comparing with the oracle.
pub fn to_f64(v: &[Rat]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stagedtree::TreeBuilder;
    use proptest::prelude::{prop, prop_assert, proptest, ProptestConfig};

    fn independence() -> StagedTree {
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"]]);
        for v in b.floret(0, 0, 1).unwrap() {
            b.floret(v, 1, 1).unwrap();
        }
        b.build().unwrap()
    }

    fn bernoulli() -> StagedTree {
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"]]);
        b.floret(0, 0, 1).unwrap();
        b.build().unwrap()
    }

    fn trapezoid() -> StagedTree {
        let mut t = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"]]);
        let kids = t.floret(0, 0, 2).unwrap();
        for (j, v) in (0..=2u32).rev().zip(kids) {
            t.floret(v, 1, 1 + (2 - j)).unwrap();
        }
        t.build().unwrap()
    }

    #[test]
    fn uniform_counts() {
        let r = numeric_mle(&independence(), &[1, 1, 1, 1], &OptimizerConfig::default()).unwrap();
        for t in &r.theta {
            assert!((t - 0.5).abs() < 1e-9);
        }
        for p in &r.p {
            assert!((p - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn agrees_with_closed_form() {
        let t = trapezoid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u: Vec<u64> = (0..t.num_atoms()).map(|_| rng.gen_range(1..=20)).collect();
            let exact = rational_mle(&t, &u).unwrap();
            let num = numeric_mle(&t, &u, &OptimizerConfig::default()).unwrap();
            for (a, b) in to_f64(&exact.theta).iter().zip(&num.theta) {
                assert!((a - b).abs() < 1e-6);
            }
            assert!(num.loglik <= loglik(&t, &to_f64(&exact.theta), &u) + 1e-9);
        }
    }

    #[test]
    fn grid_search() {
        let g = grid_mle(&independence(), &[3, 1, 1, 1], 1e-3).unwrap();
        assert!((g.theta[0] - 2.0 / 3.0).abs() <= 1e-3);
        assert!((g.theta[2] - 2.0 / 3.0).abs() <= 1e-3);
        let g = grid_mle(&bernoulli(), &[2, 1], 1e-3).unwrap();
        assert!((g.theta[0] - 2.0 / 3.0).abs() <= 1e-3);
        let g = grid_mle(&bernoulli(), &[10, 0], 1e-2).unwrap();
        assert!((g.theta[0] - 0.99).abs() < 1e-12);
        assert!(matches!(grid_mle(&trapezoid(), &[1; 9], 0.1), Ok(_)));
        let mut three = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"], &["s4", "s5"]]);
        let k = three.floret(0, 0, 1).unwrap();
        three.floret(k[0], 1, 1).unwrap();
        three.floret(k[1], 2, 1).unwrap();
        assert_eq!(grid_mle(&three.build().unwrap(), &[1; 4], 0.1), Err(OracleError::TooManyParams(3)));
    }

    #[test]
    fn birch() {
        assert_eq!(birch_check(&independence(), &[3, 1, 1, 1]), Ok(true));
        let t = trapezoid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let u: Vec<u64> = (0..9).map(|_| rng.gen_range(1..=30)).collect();
            assert_eq!(birch_check(&t, &u), Ok(true));
        }
        assert!(matches!(birch_check(&t, &[1; 3]), Err(OracleError::CountLength { .. })));
    }

    #[test]
    fn stops_when_budget_runs_out() {
        let cfg = OptimizerConfig { max_iters: 2, ..OptimizerConfig::default() };
        assert!(matches!(
            numeric_mle(&trapezoid(), &[1, 2, 3, 4, 5, 6, 7, 8, 9], &cfg),
            Err(OracleError::NonConvergence { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn grid_never_beats_closed_form(u in prop::collection::vec(1u64..15, 4)) {
            let t = independence();
            let g = grid_mle(&t, &u, 1e-2).unwrap();
            let exact = rational_mle(&t, &u).unwrap();
            let best = loglik(&t, &to_f64(&exact.theta), &u);
            prop_assert!(g.loglik <= best + 1e-12 * best.abs().max(1.0));
        }
    }
}
