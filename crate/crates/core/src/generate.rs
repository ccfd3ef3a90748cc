//! Synthetic instances: prescribed spectra, hard block distributions, and the
//! square-root counterexample.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::random_orthonormal;
use crate::matrix::PsdMatrix;
use crate::rng::Seed;

/// `U diag(λ) Uᵀ` with `U` Haar-random from the seed.
pub fn gen_spectrum_psd(n: usize, eigenvalues: &[f64], seed: Seed) -> Result<PsdMatrix> {
    if eigenvalues.len() != n || n == 0 {
        return Err(Error::validation(format!(
            "need {n} eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    if let Some(bad) = eigenvalues.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::validation(format!("eigenvalue {bad} is not a finite nonnegative number")));
    }
    let mut rng = seed.stream("spectrum/basis");
    let u = random_orthonormal(n, n, &mut rng);
    let mut scaled = u.clone();
    for (j, &l) in eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l);
    }
    PsdMatrix::from_dmatrix(scaled * u.transpose())
}

pub fn power_law_spectrum(n: usize, exponent: f64) -> Vec<f64> {
    (1..=n).map(|i| (i as f64).powf(-exponent)).collect()
}

/// One large eigenvalue `√n` above a flat unit spectrum.
pub fn spike_spectrum(n: usize) -> Vec<f64> {
    let mut v = vec![1.0; n];
    v[0] = (n as f64).sqrt();
    v
}

pub fn geometric_spectrum(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.5f64.powi(i as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardVariant {
    /// One planted all-ones block in an `n × n` identity.
    Mu,
    /// The `n × n` identity.
    Nu,
    /// `Mu` or `Nu` with probability 1/2 each.
    Gamma,
    /// `k` independent `Gamma` blocks on a random half of the indices.
    GammaB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub variant: HardVariant,
    pub seed: Seed,
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub matrix: PsdMatrix,
    /// Index sets of the planted all-ones blocks.
    pub planted: Vec<Vec<usize>>,
    pub planted_size: usize,
    pub block_size: usize,
}

impl HardInstanceSpec {
    pub fn block_size(&self) -> usize {
        match self.variant {
            HardVariant::GammaB => self.n / (2 * self.k.max(1)),
            _ => self.n,
        }
    }

    pub fn planted_size(&self) -> usize {
        let m = self.block_size();
        let raw = (16.0 * self.eps * m as f64).sqrt().round() as usize;
        raw.clamp(2, m.max(2))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::validation(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        let n = self.n as f64;
        match self.variant {
            HardVariant::GammaB => {
                if self.k == 0 || self.n % (2 * self.k) != 0 {
                    return Err(Error::validation(format!(
                        "n = {} must be a positive multiple of 2k = {}",
                        self.n,
                        2 * self.k
                    )));
                }
                if 2.0 * n * self.k as f64 / self.eps > n * n {
                    return Err(Error::validation("need 2nk/eps <= n^2"));
                }
            }
            _ => {}
        }
        let m = self.block_size() as f64;
        if m < 2.0 || m / self.eps > m * m || 16.0 * self.eps > m {
            return Err(Error::validation(format!(
                "block size {m} too small for eps = {} (need m/eps <= m^2 and 16 eps <= m)",
                self.eps
            )));
        }
        Ok(())
    }

    /// Exact `‖A − A_k‖_F²` for a draw with `planted` blocks of the planted size.
    ///
    /// Each block contributes one eigenvalue `s` and `s − 1` zeros; all other
    /// eigenvalues are 1. With `b ≤ k` blocks the top `k` take every block plus
    /// `k − b` unit eigenvalues.
    pub fn optimal_tail(&self, planted_blocks: usize) -> f64 {
        let s = self.planted_size() as f64;
        let b = planted_blocks as f64;
        let k = self.k as f64;
        let ones = self.n as f64 - b * s;
        if b >= k {
            (b - k) * s * s + ones
        } else {
            (ones - (k - b)).max(0.0)
        }
    }
}

fn plant(a: &mut DMatrix<f64>, members: &[usize]) {
    for &i in members {
        for &j in members {
            a[(i, j)] = 1.0;
        }
    }
}

pub fn gen_hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let n = spec.n;
    let s = spec.planted_size();
    let m = spec.block_size();
    let mut rng = spec.seed.stream("hard/instance");
    let mut a = DMatrix::identity(n, n);
    let mut planted = Vec::new();
    let blocks: Vec<Vec<usize>> = match spec.variant {
        HardVariant::GammaB => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(n / 2);
            idx.chunks(m).map(|c| c.to_vec()).collect()
        }
        _ => vec![(0..n).collect()],
    };
    for block in blocks {
        let use_mu = match spec.variant {
            HardVariant::Mu => true,
            HardVariant::Nu => false,
            HardVariant::Gamma | HardVariant::GammaB => rng.random_bool(0.5),
        };
        if use_mu {
            let mut members: Vec<usize> = block.choose_multiple(&mut rng, s).cloned().collect();
            members.sort_unstable();
            plant(&mut a, &members);
            planted.push(members);
        }
    }
    Ok(HardInstance { matrix: PsdMatrix::from_dmatrix(a)?, planted, planted_size: s, block_size: m })
}

/// The diagonal `A` and sparse rank-`k` `B` showing that a near-optimal
/// approximation of `A^{1/2}` can span a poor subspace for `A`.
pub struct Counterexample {
    pub a: PsdMatrix,
    pub b: DMatrix<f64>,
}

pub fn gen_counterexample(n: usize, k: usize, alpha: f64, beta: f64, eps: f64) -> Result<Counterexample> {
    if !(alpha > beta && beta > 0.0) {
        return Err(Error::validation(format!("need alpha > beta > 0, got alpha = {alpha}, beta = {beta}")));
    }
    if k == 0 || n < k + 2 {
        return Err(Error::validation(format!("need 1 <= k and n >= k + 2, got n = {n}, k = {k}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::validation(format!("eps must be positive, got {eps}")));
    }
    let mut diag = vec![beta * beta; n];
    for d in diag.iter_mut().take(k) {
        *d = alpha * alpha;
    }
    diag[k] = 0.0;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..k {
        b[(i, i)] = alpha;
    }
    b[(0, k + 1)] = (eps * (n - k - 1) as f64).sqrt() * beta;
    Ok(Counterexample { a: PsdMatrix::from_diagonal(&diag)?, b })
}
