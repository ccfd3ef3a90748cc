//! Ridge leverage scores of `A^{1/2}` estimated through the oracle.
//!
//! For a weighted column sample `S` of `A^{1/2}`, with `B = A^{1/2}S` and
//! `BᵀB = SᵀAS = VΘVᵀ`, the regularised score of column `x_i` splits into the
//! part inside `range(B)` and the Nyström residual:
//!
//! `x_iᵀ(BBᵀ + λI)⁻¹x_i = Σ_j c_ij²/(θ_j + λ) + (A_ii − Σ_j c_ij²)/λ`,
//! `c_i = Θ^{-1/2} Vᵀ SᵀA e_i`.
//!
//! Only entries of `A` in the sampled columns and the diagonal are read. The
//! sample itself comes from the usual halving recursion: estimate scores on a
//! random half, resample the full set by those estimates.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::AlgoConfig;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig_desc, PINV_CUTOFF};
use crate::oracle::PsdOracle;
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTarget {
    OfA,
    OfSqrtA,
    /// Column scores of an arbitrary rectangular matrix.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeScores {
    pub scores: Vec<f64>,
    pub k: usize,
    pub target: ScoreTarget,
    pub sum: f64,
}

impl RidgeScores {
    pub fn new(scores: Vec<f64>, k: usize, target: ScoreTarget) -> Self {
        let sum = scores.iter().sum();
        RidgeScores { scores, k, target, sum }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Factor by which the estimator inflates raw scores.
pub const OVERESTIMATE: f64 = 1.5;

const SCORE_FLOOR: f64 = 1e-15;

const PROXY_BAND: f64 = 1.5;

/// Estimates for several ranks sharing one sample.
#[derive(Debug, Clone)]
pub struct ScoreEstimate {
    pub families: Vec<RidgeScores>,
    pub lambdas: Vec<f64>,
    pub sample_size: usize,
    pub depth: usize,
}

struct Weighted {
    idx: Vec<usize>,
    w: Vec<f64>,
}

/// Sorted core eigenvalues (clamped at 0) and the coefficients `c_i` for `set`.
struct Nystrom {
    theta: Vec<f64>,
    coeffs: DMatrix<f64>,
}

fn nystrom(oracle: &PsdOracle, set: &[usize], sample: &Weighted) -> Nystrom {
    let s = sample.idx.len();
    if s == 0 {
        return Nystrom { theta: vec![], coeffs: DMatrix::zeros(0, set.len()) };
    }
    let mut core = oracle.submatrix(&sample.idx, &sample.idx);
    for r in 0..s {
        for c in 0..s {
            core[(r, c)] *= sample.w[r] * sample.w[c];
        }
    }
    let (vals, vecs) = sym_eig_desc(&core);
    let top = vals[0].max(0.0);
    let rank = vals.iter().take_while(|&&v| v > PINV_CUTOFF * top).count();
    let mut cross = oracle.submatrix(&sample.idx, set);
    for r in 0..s {
        cross.row_mut(r).scale_mut(sample.w[r]);
    }
    let mut coeffs = vecs.columns(0, rank).tr_mul(&cross);
    for j in 0..rank {
        coeffs.row_mut(j).scale_mut(1.0 / vals[j].sqrt());
    }
    Nystrom { theta: vals.iter().map(|v| v.max(0.0)).collect(), coeffs }
}

/// Ridge proxy from the sampled top-`k` directions `u_j`.
///
/// `(tr − Σ θ_j)/k` uses the sampled Gram and tends to land low (it cancels
/// badly on fast-decaying spectra); `(tr − Σ u_jᵀ A u_j)/k` is the exact residual
/// of a rank-`k` projection of `A^{1/2}` and so never falls below the true ridge.
/// The first is clamped into `[upper/PROXY_BAND, upper]`.
fn ridge_proxy(ny: &Nystrom, trace: f64, rank: usize) -> f64 {
    let r = ny.coeffs.nrows().min(rank);
    let rayleigh: f64 = (0..r).map(|j| ny.coeffs.row(j).norm_squared()).sum();
    let sampled: f64 = ny.theta.iter().take(rank).sum();
    let upper = ((trace - rayleigh) / rank as f64).max(0.0);
    let lambda = ((trace - sampled) / rank as f64).max(upper / PROXY_BAND).min(upper);
    lambda.max(1e-12 * trace)
}

fn regularised_scores(ny: &Nystrom, diag: &[f64], lambda: f64) -> Vec<f64> {
    let r = ny.coeffs.nrows();
    (0..diag.len())
        .map(|i| {
            let mut inside = 0.0;
            let mut captured = 0.0;
            for j in 0..r {
                let c2 = ny.coeffs[(j, i)] * ny.coeffs[(j, i)];
                captured += c2;
                inside += c2 / (ny.theta[j] + lambda);
            }
            let raw = inside + (diag[i] - captured).max(0.0) / lambda;
            (OVERESTIMATE * raw).clamp(SCORE_FLOOR, 1.0)
        })
        .collect()
}

struct Recursion<'o, 'a> {
    oracle: &'o PsdOracle<'a>,
    diag: Vec<f64>,
    rank: usize,
    base: usize,
    max_depth: usize,
    config: AlgoConfig,
    seed: Seed,
    deepest: usize,
}

impl Recursion<'_, '_> {
    /// A weighted sample whose Gram approximates that of `set`, built from a
    /// score-driven sample of a random half.
    fn gram_sample(&mut self, set: &[usize], depth: usize) -> Result<Weighted> {
        self.deepest = self.deepest.max(depth);
        if set.len() <= self.base {
            return Ok(Weighted { idx: set.to_vec(), w: vec![1.0; set.len()] });
        }
        if depth > self.max_depth {
            return Err(Error::Numerical {
                retries: 0,
                reason: format!("score recursion exceeded depth {}", self.max_depth),
            });
        }
        let mut rng = self.seed.stream(&format!("scores/half/{depth}"));
        let half: Vec<usize> = set.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let sub = self.resample(&half, depth + 1)?;
        // The half-sample approximates the Gram of the half; rescale to the full set.
        let lift = (set.len() as f64 / half.len().max(1) as f64).sqrt();
        Ok(Weighted { w: sub.w.iter().map(|w| w * lift).collect(), idx: sub.idx })
    }

    /// Scores on `set` from [`Self::gram_sample`], then an independent
    /// Bernoulli resample of `set` by those scores.
    fn resample(&mut self, set: &[usize], depth: usize) -> Result<Weighted> {
        if set.len() <= self.base {
            self.deepest = self.deepest.max(depth);
            return Ok(Weighted { idx: set.to_vec(), w: vec![1.0; set.len()] });
        }
        let sample = self.gram_sample(set, depth)?;
        let ny = nystrom(self.oracle, set, &sample);
        let d: Vec<f64> = set.iter().map(|&i| self.diag[i]).collect();
        let trace: f64 = d.iter().sum();
        let est = regularised_scores(&ny, &d, ridge_proxy(&ny, trace, self.rank));
        let total: f64 = est.iter().sum();
        let q = self.config.c_sample * self.config.log_factor(total / self.config.failure_delta);
        let mut rng = self.seed.stream(&format!("scores/keep/{depth}"));
        let mut idx = Vec::new();
        let mut w = Vec::new();
        for (pos, &i) in set.iter().enumerate() {
            let p = (q * est[pos]).min(1.0);
            if p >= 1.0 || rng.random::<f64>() < p {
                idx.push(i);
                w.push(1.0 / p.sqrt());
            }
        }
        Ok(Weighted { idx, w })
    }
}

/// Overestimates of `τ_i^k(A^{1/2})` for each requested rank, from one shared sample.
pub fn approx_sqrt_ridge_scores_multi(
    oracle: &PsdOracle,
    ranks: &[usize],
    config: &AlgoConfig,
    seed: Seed,
) -> Result<ScoreEstimate> {
    config.validate()?;
    let n = oracle.n();
    if ranks.is_empty() || ranks.iter().any(|&k| k == 0 || k >= n) {
        return Err(Error::validation(format!("ranks {ranks:?} must satisfy 1 <= k < n = {n}")));
    }
    let rank = *ranks.iter().max().unwrap();
    let diag = oracle.diagonal();
    let trace: f64 = diag.iter().sum();
    if !(trace > 0.0) {
        // A PSD matrix with zero trace is zero; every score is vacuous.
        let families = ranks
            .iter()
            .map(|&k| RidgeScores::new(vec![(k as f64 / n as f64).min(1.0); n], k, ScoreTarget::OfSqrtA))
            .collect();
        return Ok(ScoreEstimate { families, lambdas: vec![0.0; ranks.len()], sample_size: 0, depth: 0 });
    }
    let kf = rank as f64;
    let base = ((4.0 * kf * (1.0 + kf).ln()).ceil() as usize).max(16);
    let max_depth = (usize::BITS - n.leading_zeros()) as usize;
    let mut rec = Recursion { oracle, diag, rank, base, max_depth, config: *config, seed, deepest: 0 };
    let all: Vec<usize> = (0..n).collect();
    let top = rec.gram_sample(&all, 0)?;
    let ny = nystrom(oracle, &all, &top);
    let mut families = Vec::with_capacity(ranks.len());
    let mut lambdas = Vec::with_capacity(ranks.len());
    for &k in ranks {
        let lambda = ridge_proxy(&ny, trace, k);
        families.push(RidgeScores::new(regularised_scores(&ny, &rec.diag, lambda), k, ScoreTarget::OfSqrtA));
        lambdas.push(lambda);
    }
    Ok(ScoreEstimate { families, lambdas, sample_size: top.idx.len(), depth: rec.deepest })
}

pub fn approx_sqrt_ridge_scores(oracle: &PsdOracle, k: usize, config: &AlgoConfig, seed: Seed) -> Result<RidgeScores> {
    Ok(approx_sqrt_ridge_scores_multi(oracle, &[k], config, seed)?.families.remove(0))
}
