//! Projection-cost preserving sketches and their test-time verification.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{check_eps, AlgoConfig};
use crate::error::{Error, Result};
use crate::exact::{eig_psd, SpectralData};
use crate::linalg::{dense_spectral_norm_sq, random_orthonormal, svd};
use crate::matrix::PsdMatrix;
use crate::oracle::PsdOracle;
use crate::rng::Seed;
use crate::sampling::{sample_or_dense, sample_size, Provenance, SampleSet};
use crate::scores::{approx_sqrt_ridge_scores, approx_sqrt_ridge_scores_multi, RidgeScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PcpKind {
    ColumnFrob,
    RowFrob,
    RowSpectral,
    ColumnSpectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowMode {
    Frobenius,
    Spectral,
}

#[derive(Debug, Clone)]
pub struct PcpSketch {
    pub kind: PcpKind,
    /// `A·S₁` for column kinds, `S₂ᵀ·A·S₁` for row kinds.
    pub sketch: DMatrix<f64>,
    pub col_sample: SampleSet,
    pub row_sample: Option<SampleSet>,
    pub eps: f64,
    pub k: usize,
    /// Only ever filled in by [`verify_pcp`].
    pub delta_offset: Option<f64>,
    /// Scores that a subsequent row sketch must sample by, with the mode they serve.
    pub row_scores: Option<(RowMode, RidgeScores)>,
}

/// `k₁` for the row step: `⌈c·k/ε⌉` (Frobenius) or `⌈c·k/ε²⌉` (spectral), capped below `n`.
pub fn row_rank(k: usize, eps: f64, mode: RowMode, config: &AlgoConfig, n: usize) -> usize {
    let raw = match mode {
        RowMode::Frobenius => config.c_rank * k as f64 / eps,
        RowMode::Spectral => config.c_rank * k as f64 / (eps * eps),
    };
    (raw.ceil() as usize).max(k).min(n - 1)
}

fn check_rank(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::validation(format!("rank k = {k} must satisfy 1 <= k < n = {n}")));
    }
    Ok(())
}

fn scaled(scores: &[f64], c: f64) -> Vec<f64> {
    scores.iter().map(|s| s * c).collect()
}

/// Column sketch `A·S₁` sampled by `2√(n/k)`-scaled square-root ridge scores.
pub fn column_pcp(oracle: &PsdOracle, k: usize, eps: f64, config: &AlgoConfig, seed: Seed) -> Result<PcpSketch> {
    check_eps(eps)?;
    let n = oracle.n();
    check_rank(k, n)?;
    let tau = approx_sqrt_ridge_scores(oracle, k, config, seed.derive("scores"))?;
    let ell = scaled(&tau.scores, 2.0 * (n as f64 / k as f64).sqrt());
    let total: f64 = ell.iter().sum();
    let t = sample_size(
        config.c1 * config.log_factor(k as f64 / config.failure_delta) * total / (eps * eps),
        n,
    );
    let s = sample_or_dense(&ell, t, &mut seed.stream("column_pcp/S1"), Provenance::RidgeScores { ranks: vec![k] })?;
    Ok(PcpSketch {
        kind: PcpKind::ColumnFrob,
        sketch: oracle.sketch_columns(&s),
        col_sample: s,
        row_sample: None,
        eps,
        k,
        delta_offset: None,
        row_scores: None,
    })
}

/// A column sample together with the score family its row sketch will need.
#[derive(Debug, Clone)]
pub struct ColumnSampling {
    pub sample: SampleSet,
    pub k: usize,
    pub eps: f64,
    pub row_scores: (RowMode, RidgeScores),
    /// Size of the sample behind the score estimates.
    pub score_sample: usize,
}

/// Draws `S₁` so that it supports a row sketch in the given mode, reading only
/// what score estimation needs.
///
/// Frobenius: `ℓ = √(n/k)·τ̃^k + √(nε⁴/k₁)·τ̃^{c'k₁}`. Spectral: `ℓ = 4ε√(n/k)·τ̃^{k₁}`.
/// In both cases `t₁ = c₁·log n·Σℓ/ε²` (`c1_spec` in spectral mode).
pub fn mixed_column_sampling(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    mode: RowMode,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<ColumnSampling> {
    check_eps(eps)?;
    let n = oracle.n();
    check_rank(k, n)?;
    let nf = n as f64;
    let k1 = row_rank(k, eps, mode, config, n);
    let (ell, row_family, ranks, score_sample) = match mode {
        RowMode::Frobenius => {
            let k2 = ((config.c_prime * k1 as f64).ceil() as usize).clamp(k1, n - 1);
            let mut est = approx_sqrt_ridge_scores_multi(oracle, &[k, k2], config, seed.derive("scores"))?;
            let high = est.families.pop().unwrap();
            let low = est.families.pop().unwrap();
            let a = (nf / k as f64).sqrt();
            let b = (nf * eps.powi(4) / k1 as f64).sqrt();
            let ell: Vec<f64> = low.scores.iter().zip(&high.scores).map(|(x, y)| a * x + b * y).collect();
            (ell, high, vec![k, k2], est.sample_size)
        }
        RowMode::Spectral => {
            let mut est = approx_sqrt_ridge_scores_multi(oracle, &[k1], config, seed.derive("scores"))?;
            let tau = est.families.pop().unwrap();
            let ell = scaled(&tau.scores, 4.0 * eps * (nf / k as f64).sqrt());
            (ell, tau, vec![k1], est.sample_size)
        }
    };
    let total: f64 = ell.iter().sum();
    let c1 = match mode {
        RowMode::Frobenius => config.c1,
        RowMode::Spectral => config.c1_spec,
    };
    // A sketch narrower than the rank it must carry is useless; floor at 2k₁.
    let t1 = sample_size((c1 * config.log_factor(nf) * total / (eps * eps)).max(2.0 * k1 as f64), n);
    let sample = sample_or_dense(&ell, t1, &mut seed.stream("pcp/S1"), Provenance::RidgeScores { ranks })?;
    Ok(ColumnSampling { sample, k, eps, row_scores: (mode, row_family), score_sample })
}

/// [`mixed_column_sampling`] followed by materialising `A·S₁`.
pub fn column_pcp_mixed(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    mode: RowMode,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<PcpSketch> {
    let cs = mixed_column_sampling(oracle, k, eps, mode, config, seed)?;
    Ok(PcpSketch {
        kind: match mode {
            RowMode::Frobenius => PcpKind::ColumnFrob,
            RowMode::Spectral => PcpKind::ColumnSpectral,
        },
        sketch: oracle.sketch_columns(&cs.sample),
        col_sample: cs.sample,
        row_sample: None,
        eps,
        k,
        delta_offset: None,
        row_scores: Some(cs.row_scores),
    })
}

/// Row sampling matrix `S₂` for a compatible column sample, without reading `A`.
pub fn row_sample(
    col_sample: &SampleSet,
    row_scores: Option<&(RowMode, RidgeScores)>,
    k: usize,
    eps: f64,
    mode: RowMode,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<SampleSet> {
    let n = col_sample.n();
    let k1 = row_rank(k, eps, mode, config, n);
    let family = match row_scores {
        Some((m, fam)) if *m == mode && fam.k >= k1 && fam.len() == n => fam,
        _ => {
            return Err(Error::validation(format!(
                "column sample lacks rank-{k1} square-root ridge scores for a {mode:?} row sketch"
            )))
        }
    };
    if !col_sample.provenance_has_rank(k1) {
        return Err(Error::validation(format!("column sample was not drawn with rank-{k1} scores")));
    }
    let nf = n as f64;
    let (ell, raw_t) = match mode {
        RowMode::Frobenius => {
            let ell = scaled(&family.scores, (nf / k1 as f64).sqrt());
            let total: f64 = ell.iter().sum();
            (ell, config.c2 * config.log_factor(nf) * total)
        }
        RowMode::Spectral => {
            let ell = scaled(&family.scores, 4.0 * eps * (nf / k as f64).sqrt());
            let total: f64 = ell.iter().sum();
            (ell, config.c2_spec * config.log_factor(nf) * total / (eps * eps))
        }
    };
    sample_or_dense(
        &ell,
        sample_size(raw_t.max(2.0 * k1 as f64), n),
        &mut seed.stream("pcp/S2"),
        Provenance::RidgeScores { ranks: vec![family.k] },
    )
}

/// `Ã = S₂ᵀ·A·S₁` for a column sketch from [`column_pcp_mixed`].
pub fn row_pcp(
    oracle: &PsdOracle,
    col_sketch: &PcpSketch,
    k: usize,
    eps: f64,
    mode: RowMode,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<PcpSketch> {
    if col_sketch.col_sample.n() != oracle.n() {
        return Err(Error::validation("column sketch and oracle have different dimensions"));
    }
    if col_sketch.row_sample.is_some() {
        return Err(Error::validation("row sketch requested from a sketch that is already a row sketch"));
    }
    if col_sketch.k != k || (col_sketch.eps - eps).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "column sketch was built for (k = {}, eps = {}), not (k = {k}, eps = {eps})",
            col_sketch.k, col_sketch.eps
        )));
    }
    let s2 = row_sample(&col_sketch.col_sample, col_sketch.row_scores.as_ref(), k, eps, mode, config, seed)?;
    let sketch = oracle.sketch_cross(&s2, &col_sketch.col_sample);
    Ok(PcpSketch {
        kind: match mode {
            RowMode::Frobenius => PcpKind::RowFrob,
            RowMode::Spectral => PcpKind::RowSpectral,
        },
        sketch,
        col_sample: col_sketch.col_sample.clone(),
        row_sample: Some(s2),
        eps,
        k,
        delta_offset: None,
        row_scores: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PcpReport {
    pub kind: PcpKind,
    pub projections: usize,
    /// Largest relative violation over the battery (after the additive slack or Δ).
    pub worst_distortion: f64,
    pub fitted_delta: Option<f64>,
    pub delta_bound: Option<f64>,
    pub delta_within_bound: Option<bool>,
    pub additive_slack: f64,
}

enum Side {
    /// `P` multiplies from the left: cost `‖M − PM‖`.
    Left,
    /// `P` multiplies from the right: cost `‖M − MP‖`.
    Right,
}

fn cost(m: &DMatrix<f64>, u: &DMatrix<f64>, side: &Side, spectral: bool) -> f64 {
    match (side, spectral) {
        (Side::Left, false) => (m.norm_squared() - u.tr_mul(m).norm_squared()).max(0.0),
        (Side::Right, false) => (m.norm_squared() - (m * u).norm_squared()).max(0.0),
        (Side::Left, true) => dense_spectral_norm_sq(&(m - u * u.tr_mul(m))),
        (Side::Right, true) => dense_spectral_norm_sq(&(m - (m * u) * u.transpose())),
    }
}

/// Least-squares offset minimising `Σ ((a_P + Δ − c_P)/c_P)²`.
pub fn fit_delta(sketch_costs: &[f64], ref_costs: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &c) in sketch_costs.iter().zip(ref_costs) {
        if c > 0.0 {
            num += (c - a) / (c * c);
            den += 1.0 / (c * c);
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn verify_pcp(sketch: &PcpSketch, a: &PsdMatrix, trials: usize, seed: Seed) -> Result<PcpReport> {
    let spec = eig_psd(a)?;
    verify_pcp_with(sketch, a, &spec, trials, seed)
}

/// Tests the PCP inequality over `trials` random rank-`k` projections plus
/// projections onto the top-`k` and bottom-`k` singular directions of the
/// reference.
pub fn verify_pcp_with(
    sketch: &PcpSketch,
    a: &PsdMatrix,
    spec: &SpectralData,
    trials: usize,
    seed: Seed,
) -> Result<PcpReport> {
    let k = sketch.k;
    let tail = spec.frob_tail_sq(k);
    let (reference, side) = match sketch.kind {
        PcpKind::ColumnFrob | PcpKind::ColumnSpectral => (a.as_dmatrix().clone(), Side::Left),
        PcpKind::RowFrob | PcpKind::RowSpectral => {
            (sketch.col_sample.right_apply(a.as_dmatrix()), Side::Right)
        }
    };
    let spectral = matches!(sketch.kind, PcpKind::RowSpectral | PcpKind::ColumnSpectral);
    let dim = match side {
        Side::Left => reference.nrows(),
        Side::Right => reference.ncols(),
    };
    if k >= dim {
        return Err(Error::validation(format!("rank {k} leaves no room in dimension {dim}")));
    }
    let mut rng = seed.stream("verify_pcp");
    let mut battery: Vec<DMatrix<f64>> = (0..trials).map(|_| random_orthonormal(dim, k, &mut rng)).collect();
    let dec = svd(&reference);
    let directions = match side {
        Side::Left => &dec.u,
        Side::Right => &dec.v,
    };
    battery.push(directions.columns(0, k).into_owned());
    let rank = directions.ncols();
    battery.push(directions.columns(rank - k, k).into_owned());
    let sketch_costs: Vec<f64> = battery.iter().map(|u| cost(&sketch.sketch, u, &side, spectral)).collect();
    let ref_costs: Vec<f64> = battery.iter().map(|u| cost(&reference, u, &side, spectral)).collect();
    let (delta, slack) = match sketch.kind {
        PcpKind::RowFrob => (fit_delta(&sketch_costs, &ref_costs), 0.0),
        PcpKind::ColumnFrob => (0.0, 0.0),
        _ => (0.0, sketch.eps / k as f64 * tail),
    };
    let worst = sketch_costs
        .iter()
        .zip(&ref_costs)
        .map(|(&s, &c)| {
            let gap = ((s + delta - c).abs() - slack).max(0.0);
            if c > 0.0 {
                gap / c
            } else if gap > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let row_frob = sketch.kind == PcpKind::RowFrob;
    let bound = 600.0 * tail;
    Ok(PcpReport {
        kind: sketch.kind,
        projections: battery.len(),
        worst_distortion: worst,
        fitted_delta: row_frob.then_some(delta),
        delta_bound: row_frob.then_some(bound),
        delta_within_bound: row_frob.then_some(delta.abs() <= bound),
        additive_slack: slack,
    })
}
