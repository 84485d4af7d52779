//! Estimators for the limit covariance Σ and area drift Γ, moment-scaling
//! and p-variation tightness diagnostics, and distributional tests.
//!
//! Two independent routes to Σ: the batch estimator averages
//! `n^{-1} v_n ⊗ v_n` over replicas, the Green–Kubo estimator truncates the
//! lag series `∫v⊗v dμ + Σ_l ∫{v⊗(v∘Tˡ) + (v∘Tˡ)⊗v} dμ`. Two routes to Γ:
//! the empirical mean of `𝕎_n(1)` and the one-sided lag series
//! `Σ_{l≥1} ∫ v⊗(v∘Tˡ) dμ`. The lag-series ("series") estimators require a
//! mixing driver.
//!
//! Error bars are delete-one jackknife over replicas throughout; replica
//! reductions are sequential compensated sums over ordered results, so the
//! numbers do not depend on thread count.

pub mod stats;

use nalgebra::DMatrix;

use crate::drivers::{ContinuousSource, IncrementSource};
use crate::mc::{self, replica_map};
use crate::rough::{p_var_homog, RoughPathGrid};
use crate::{Error, Result};
use stats::{ols_slope, KsResult};

/// A matrix-valued estimate with entrywise standard errors.
#[derive(Debug, Clone)]
pub struct MatrixEstimate {
    pub value: DMatrix<f64>,
    pub se: DMatrix<f64>,
}

impl MatrixEstimate {
    pub fn max_se(&self) -> f64 {
        self.se.amax()
    }
}

/// Estimated limit statistics with provenance metadata.
#[derive(Debug, Clone)]
pub struct LimitStatistics {
    pub sigma: Option<MatrixEstimate>,
    pub gamma: Option<MatrixEstimate>,
    pub method: String,
    pub n: usize,
    pub replicas: u64,
    pub lag_max: Option<usize>,
    /// Geometric-extrapolation estimate of the neglected series tail
    /// (series methods only).
    pub truncation_tail: Option<f64>,
}

impl LimitStatistics {
    /// Sigma invariants: symmetric to 1e-12 and PSD up to statistical error
    /// (smallest eigenvalue > -3 max stderr).
    pub fn check_sigma_invariants(&self) -> Result<()> {
        let Some(sig) = &self.sigma else {
            return Ok(());
        };
        let asym = (&sig.value - sig.value.transpose()).amax();
        if asym > 1e-12 * (1.0 + sig.value.amax()) {
            return Err(Error::InvalidParameter(format!(
                "sigma estimate asymmetric by {asym}"
            )));
        }
        let eig = sig.value.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig < -3.0 * sig.max_se() {
            return Err(Error::InvalidParameter(format!(
                "sigma estimate indefinite beyond statistical error (min eig {min_eig})"
            )));
        }
        Ok(())
    }
}

fn jackknife_matrix(rows: &[Vec<f64>], dim: usize) -> MatrixEstimate {
    let mut value = DMatrix::zeros(dim, dim);
    let mut se = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let k = r * dim + c;
            let col: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            let (m, s) = mc::mean_with_jackknife_se(&col);
            value[(r, c)] = m;
            se[(r, c)] = s;
        }
    }
    MatrixEstimate { value, se }
}

/// Batch estimator of Σ: Monte-Carlo average of `n^{-1} v_n ⊗ v_n`.
pub fn estimate_sigma_batch(
    source: &dyn IncrementSource,
    n: usize,
    replicas: u64,
) -> Result<LimitStatistics> {
    if n == 0 || replicas < 2 {
        return Err(Error::InvalidParameter("need n >= 1 and replicas >= 2".into()));
    }
    let dim = source.dim();
    let rows = replica_map(replicas, |r| {
        let mut incs = vec![0.0; n * dim];
        source.fill(r, &mut incs);
        let mut sum = vec![0.0; dim];
        for j in 0..n {
            for k in 0..dim {
                sum[k] += incs[j * dim + k];
            }
        }
        let scale = 1.0 / n as f64;
        let mut row = vec![0.0; dim * dim];
        for r0 in 0..dim {
            for c0 in 0..dim {
                row[r0 * dim + c0] = scale * sum[r0] * sum[c0];
            }
        }
        row
    });
    let sigma = jackknife_matrix(&rows, dim);
    Ok(LimitStatistics {
        sigma: Some(sigma),
        gamma: None,
        method: "sigma-batch".into(),
        n,
        replicas,
        lag_max: None,
        truncation_tail: None,
    })
}

/// Per-replica lag autocovariances `c_l = (n-l)^{-1} Σ_j v_j ⊗ v_{j+l}`,
/// `l = 0..=lag_cap`, flattened row-major per lag.
fn lag_rows(
    source: &dyn IncrementSource,
    n: usize,
    replicas: u64,
    lag_cap: usize,
) -> Vec<Vec<f64>> {
    let dim = source.dim();
    replica_map(replicas, |r| {
        let mut incs = vec![0.0; n * dim];
        source.fill(r, &mut incs);
        let mut out = vec![0.0; (lag_cap + 1) * dim * dim];
        if dim == 1 {
            for l in 0..=lag_cap {
                let mut acc = 0.0;
                for j in 0..n - l {
                    acc += incs[j] * incs[j + l];
                }
                out[l] = acc / (n - l) as f64;
            }
            return out;
        }
        for l in 0..=lag_cap {
            let denom = (n - l) as f64;
            let block = &mut out[l * dim * dim..(l + 1) * dim * dim];
            for j in 0..n - l {
                let v = &incs[j * dim..(j + 1) * dim];
                let w = &incs[(j + l) * dim..(j + l + 1) * dim];
                for r0 in 0..dim {
                    for c0 in 0..dim {
                        block[r0 * dim + c0] += v[r0] * w[c0];
                    }
                }
            }
            for x in block.iter_mut() {
                *x /= denom;
            }
        }
        out
    })
}

/// Entrywise jackknife of one lag block.
fn lag_estimate(rows: &[Vec<f64>], dim: usize, lag: usize) -> MatrixEstimate {
    let base = lag * dim * dim;
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row[base..base + dim * dim].to_vec())
        .collect();
    jackknife_matrix(&sub, dim)
}

/// Truncation lag rule: the first lag whose correlation magnitude falls
/// below twice its standard error for 5 consecutive lags (capped at
/// `lag_cap`).
fn auto_truncation_lag(rows: &[Vec<f64>], dim: usize, lag_cap: usize) -> usize {
    let mut quiet = 0;
    for l in 1..=lag_cap {
        let est = lag_estimate(rows, dim, l);
        if est.value.amax() < 2.0 * est.max_se().max(f64::MIN_POSITIVE) {
            quiet += 1;
            if quiet >= 5 {
                return l;
            }
        } else {
            quiet = 0;
        }
    }
    lag_cap
}

/// Geometric extrapolation of the neglected tail from the last decade of
/// kept lags; a rough scale, not an error bar.
fn tail_estimate(rows: &[Vec<f64>], dim: usize, lag_max: usize) -> f64 {
    if lag_max < 3 {
        return f64::NAN;
    }
    let lo = ((lag_max as f64) * 0.9).floor() as usize;
    let lo = lo.clamp(1, lag_max - 1);
    let first = lag_estimate(rows, dim, lo).value.amax();
    let last = lag_estimate(rows, dim, lag_max).value.amax();
    if first <= 0.0 || last <= 0.0 {
        return 0.0;
    }
    let span = (lag_max - lo).max(1) as f64;
    let rho = (last / first).powf(1.0 / span).clamp(0.0, 0.99);
    last * rho / (1.0 - rho)
}

/// Green–Kubo estimator of Σ: truncated lag series
/// `c_0 + Σ_{l=1}^{L} (c_l + c_lᵀ)` with ergodic-average lag terms.
///
/// `lag_max = None` applies the automatic truncation rule. Requires a
/// mixing driver.
pub fn estimate_sigma_green_kubo(
    source: &dyn IncrementSource,
    n: usize,
    replicas: u64,
    lag_max: Option<usize>,
) -> Result<LimitStatistics> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("need replicas >= 2".into()));
    }
    if !source.mixing() {
        return Err(Error::InvalidParameter(
            "lag-series estimators need a mixing driver".into(),
        ));
    }
    let dim = source.dim();
    let lag_cap = lag_max.unwrap_or(200).min(n.saturating_sub(1) / 2);
    if n < 4 * (lag_cap + 1) {
        return Err(Error::InvalidParameter(format!(
            "orbit length {n} too short for lag cap {lag_cap}"
        )));
    }
    let rows = lag_rows(source, n, replicas, lag_cap);
    let lag = match lag_max {
        Some(l) => l.min(lag_cap),
        None => auto_truncation_lag(&rows, dim, lag_cap),
    };
    // per-replica truncated series, then jackknife
    let series_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            let mut acc = row[0..dim * dim].to_vec();
            for l in 1..=lag {
                let block = &row[l * dim * dim..(l + 1) * dim * dim];
                for r0 in 0..dim {
                    for c0 in 0..dim {
                        acc[r0 * dim + c0] += block[r0 * dim + c0] + block[c0 * dim + r0];
                    }
                }
            }
            acc
        })
        .collect();
    let sigma = jackknife_matrix(&series_rows, dim);
    let tail = tail_estimate(&rows, dim, lag);
    Ok(LimitStatistics {
        sigma: Some(sigma),
        gamma: None,
        method: "sigma-green-kubo".into(),
        n,
        replicas,
        lag_max: Some(lag),
        truncation_tail: Some(tail),
    })
}

/// How Γ is estimated for a discrete driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    /// Monte-Carlo mean of `𝕎_n(1)`.
    Empirical,
    /// Truncated one-sided lag series `Σ_{l≥1} c_l` (mixing drivers only).
    Series,
}

/// Estimates the area drift Γ of a discrete driver.
pub fn estimate_gamma(
    source: &dyn IncrementSource,
    n: usize,
    replicas: u64,
    method: GammaMethod,
    lag_max: Option<usize>,
) -> Result<LimitStatistics> {
    if n == 0 || replicas < 2 {
        return Err(Error::InvalidParameter("need n >= 1 and replicas >= 2".into()));
    }
    let dim = source.dim();
    match method {
        GammaMethod::Empirical => {
            let rows = replica_map(replicas, |r| {
                let mut incs = vec![0.0; n * dim];
                source.fill(r, &mut incs);
                // strict lower-triangular double sum, accumulated as
                // prefix ⊗ increment
                let mut prefix = vec![0.0; dim];
                let mut acc = vec![0.0; dim * dim];
                for j in 0..n {
                    let v = &incs[j * dim..(j + 1) * dim];
                    for r0 in 0..dim {
                        for c0 in 0..dim {
                            acc[r0 * dim + c0] += prefix[r0] * v[c0];
                        }
                    }
                    for k in 0..dim {
                        prefix[k] += v[k];
                    }
                }
                let scale = 1.0 / n as f64;
                for x in acc.iter_mut() {
                    *x *= scale;
                }
                acc
            });
            let gamma = jackknife_matrix(&rows, dim);
            Ok(LimitStatistics {
                sigma: None,
                gamma: Some(gamma),
                method: "gamma-empirical".into(),
                n,
                replicas,
                lag_max: None,
                truncation_tail: None,
            })
        }
        GammaMethod::Series => {
            if !source.mixing() {
                return Err(Error::InvalidParameter(
                    "lag-series estimators need a mixing driver".into(),
                ));
            }
            let lag_cap = lag_max.unwrap_or(200).min(n.saturating_sub(1) / 2);
            if n < 4 * (lag_cap + 1) {
                return Err(Error::InvalidParameter(format!(
                    "orbit length {n} too short for lag cap {lag_cap}"
                )));
            }
            let rows = lag_rows(source, n, replicas, lag_cap);
            let lag = match lag_max {
                Some(l) => l.min(lag_cap),
                None => auto_truncation_lag(&rows, dim, lag_cap),
            };
            let series_rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|row| {
                    let mut acc = vec![0.0; dim * dim];
                    for l in 1..=lag {
                        let block = &row[l * dim * dim..(l + 1) * dim * dim];
                        for (a, b) in acc.iter_mut().zip(block) {
                            *a += b;
                        }
                    }
                    acc
                })
                .collect();
            let gamma = jackknife_matrix(&series_rows, dim);
            let tail = tail_estimate(&rows, dim, lag);
            Ok(LimitStatistics {
                sigma: None,
                gamma: Some(gamma),
                method: "gamma-series".into(),
                n,
                replicas,
                lag_max: Some(lag),
                truncation_tail: Some(tail),
            })
        }
    }
}

/// Σ and Γ of a continuous driver from replica paths: Σ̂ is the empirical
/// covariance of `W_ε(1)` and `Γ̂ = E 𝕎_ε(1) - ½ Σ̂` (the Stratonovich
/// convention; the limit theory makes Γ skew-symmetric here).
pub fn estimate_limit_continuous(
    source: &dyn ContinuousSource,
    replicas: u64,
) -> Result<LimitStatistics> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("need replicas >= 2".into()));
    }
    let dim = source.dim();
    let rows = replica_map(replicas, |r| {
        let path = source.sample_path(r);
        let last = path.len() - 1;
        let w = path.first_row(last);
        let area = path.second_row(last);
        let mut row = vec![0.0; 2 * dim * dim];
        for r0 in 0..dim {
            for c0 in 0..dim {
                row[r0 * dim + c0] = w[r0] * w[c0];
                row[dim * dim + r0 * dim + c0] = area[r0 * dim + c0];
            }
        }
        row
    });
    let cov_rows: Vec<Vec<f64>> = rows.iter().map(|r| r[..dim * dim].to_vec()).collect();
    let area_rows: Vec<Vec<f64>> = rows.iter().map(|r| r[dim * dim..].to_vec()).collect();
    let sigma = jackknife_matrix(&cov_rows, dim);
    let area = jackknife_matrix(&area_rows, dim);
    let gamma_value = &area.value - &sigma.value * 0.5;
    let mut gamma_se = area.se.clone();
    for r0 in 0..dim {
        for c0 in 0..dim {
            let s = sigma.se[(r0, c0)];
            gamma_se[(r0, c0)] = (gamma_se[(r0, c0)].powi(2) + 0.25 * s * s).sqrt();
        }
    }
    Ok(LimitStatistics {
        sigma: Some(sigma),
        gamma: Some(MatrixEstimate {
            value: gamma_value,
            se: gamma_se,
        }),
        method: "continuous-empirical(stratonovich)".into(),
        n: 0,
        replicas,
        lag_max: None,
        truncation_tail: None,
    })
}

/// Moment-scaling diagnostic: slopes of `log ‖v_n‖_{2q}` and
/// `log ‖S_n‖_q` against `log n`.
#[derive(Debug, Clone)]
pub struct MomentScalingReport {
    pub q: f64,
    pub n_list: Vec<usize>,
    /// Empirical `‖v_n‖_{2q}` per n.
    pub vn_norms: Vec<f64>,
    /// Empirical `‖S_n‖_q` per n.
    pub sn_norms: Vec<f64>,
    pub vn_slope: f64,
    pub vn_slope_se: f64,
    pub sn_slope: f64,
    pub sn_slope_se: f64,
    pub replicas: u64,
    /// Set when the v_n slope drifts above ½ + 0.1: the moment-blow-up
    /// regime boundary diagnostic (soft flag, never a hard failure).
    pub regime_flag: bool,
}

impl MomentScalingReport {
    /// One-sided pass rule: slopes do not exceed their theoretical scaling
    /// by more than `tol`.
    pub fn pass_upper(&self, tol: f64) -> bool {
        self.vn_slope <= 0.5 + tol && self.sn_slope <= 1.0 + tol
    }

    /// Two-sided band around the exact scalings (½, 1).
    pub fn within_band(&self, tol: f64) -> bool {
        (self.vn_slope - 0.5).abs() <= tol && (self.sn_slope - 1.0).abs() <= tol
    }
}

/// Regresses empirical moment norms of `v_n` and `S_n` over `n_list`
/// (one orbit per replica, read at nested checkpoints).
pub fn moment_scaling_diagnostic(
    source: &dyn IncrementSource,
    q: f64,
    n_list: &[usize],
    replicas: u64,
) -> Result<MomentScalingReport> {
    if q <= 1.0 {
        return Err(Error::InvalidParameter("moment diagnostic needs q > 1".into()));
    }
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::InvalidParameter(
            "n_list must be increasing with at least two entries".into(),
        ));
    }
    if replicas < 8 {
        return Err(Error::InvalidParameter("need replicas >= 8".into()));
    }
    let dim = source.dim();
    let n_max = *n_list.last().unwrap();
    let cols = n_list.len();
    // per replica: |v_n|^{2q} and |S_n|_F^q at each checkpoint
    let rows = replica_map(replicas, |r| {
        let mut incs = vec![0.0; n_max * dim];
        source.fill(r, &mut incs);
        let mut prefix = vec![0.0; dim];
        let mut s = vec![0.0; dim * dim];
        let mut out = vec![0.0; 2 * cols];
        let mut next = 0usize;
        for j in 0..n_max {
            let v = &incs[j * dim..(j + 1) * dim];
            for k in 0..dim {
                prefix[k] += v[k];
            }
            for r0 in 0..dim {
                for c0 in 0..dim {
                    s[r0 * dim + c0] += prefix[r0] * v[c0];
                }
            }
            while next < cols && j + 1 == n_list[next] {
                let vn2: f64 = prefix.iter().map(|x| x * x).sum();
                let sn2: f64 = s.iter().map(|x| x * x).sum();
                out[next] = vn2.powf(q); // |v_n|^{2q}
                out[cols + next] = sn2.powf(q / 2.0); // |S_n|^q
                next += 1;
            }
        }
        out
    });
    let ln_n: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let vn_rows: Vec<Vec<f64>> = rows.iter().map(|r| r[..cols].to_vec()).collect();
    let sn_rows: Vec<Vec<f64>> = rows.iter().map(|r| r[cols..].to_vec()).collect();
    let (vn_slope, vn_slope_se) = mc::jackknife_of_column_means(&vn_rows, |means| {
        let ys: Vec<f64> = means.iter().map(|m| m.ln() / (2.0 * q)).collect();
        ols_slope(&ln_n, &ys)
    });
    let (sn_slope, sn_slope_se) = mc::jackknife_of_column_means(&sn_rows, |means| {
        let ys: Vec<f64> = means.iter().map(|m| m.ln() / q).collect();
        ols_slope(&ln_n, &ys)
    });
    let vn_norms: Vec<f64> = (0..cols)
        .map(|k| {
            let mean = vn_rows.iter().map(|r| r[k]).sum::<f64>() / replicas as f64;
            mean.powf(1.0 / (2.0 * q))
        })
        .collect();
    let sn_norms: Vec<f64> = (0..cols)
        .map(|k| {
            let mean = sn_rows.iter().map(|r| r[k]).sum::<f64>() / replicas as f64;
            mean.powf(1.0 / q)
        })
        .collect();
    Ok(MomentScalingReport {
        q,
        n_list: n_list.to_vec(),
        vn_norms,
        sn_norms,
        vn_slope,
        vn_slope_se,
        sn_slope,
        sn_slope_se,
        replicas,
        regime_flag: vn_slope > 0.5 + 0.1,
    })
}

/// p-variation tightness report: empirical `E ⦀·⦀^{2q}_{p-var}` across
/// scales, with the log-log slope.
#[derive(Debug, Clone)]
pub struct PvarTightnessReport {
    pub p: f64,
    pub q: f64,
    pub n_list: Vec<usize>,
    pub moments: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub replicas: u64,
}

impl PvarTightnessReport {
    /// No systematic growth in n.
    pub fn flat(&self, tol: f64) -> bool {
        self.slope.abs() <= tol
    }
}

/// Computes the tightness diagnostic from an arbitrary rough-path sampler
/// `sample(replica, n)`.
pub fn pvar_moment_diagnostic(
    sample: impl Fn(u64, usize) -> RoughPathGrid + Sync + Send,
    p: f64,
    q: f64,
    n_list: &[usize],
    replicas: u64,
) -> Result<PvarTightnessReport> {
    if !(2.0 < p && p < 3.0) {
        return Err(Error::InvalidParameter("tightness diagnostic needs p in (2,3)".into()));
    }
    if n_list.len() < 2 || replicas < 8 {
        return Err(Error::InvalidParameter(
            "need at least two scales and 8 replicas".into(),
        ));
    }
    let cols = n_list.len();
    let rows = replica_map(replicas, |r| {
        let mut out = vec![0.0; cols];
        for (k, &n) in n_list.iter().enumerate() {
            let path = sample(r, n);
            let norm = p_var_homog(&path, p).expect("p in (2,3)");
            out[k] = norm.powf(2.0 * q);
        }
        out
    });
    let ln_n: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let (slope, slope_se) = mc::jackknife_of_column_means(&rows, |means| {
        let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        ols_slope(&ln_n, &ys)
    });
    let moments: Vec<f64> = (0..cols)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / replicas as f64)
        .collect();
    Ok(PvarTightnessReport {
        p,
        q,
        n_list: n_list.to_vec(),
        moments,
        slope,
        slope_se,
        replicas,
    })
}

/// Convenience wrapper: tightness of the Itô lifts of a discrete driver.
pub fn pvar_moment_diagnostic_discrete(
    source: &dyn IncrementSource,
    p: f64,
    q: f64,
    n_list: &[usize],
    replicas: u64,
) -> Result<PvarTightnessReport> {
    pvar_moment_diagnostic(
        |r, n| {
            crate::drivers::iterated_sum_path(source, r, n)
                .expect("n >= 1")
                .grid
        },
        p,
        q,
        n_list,
        replicas,
    )
}

/// One-sample KS of CLT-normalized Birkhoff sums against `N(0, σ²)`.
pub fn ks_test_normal(samples: &[f64], sigma_sq: f64) -> Result<KsResult> {
    stats::ks_test_normal(samples, sigma_sq)
}

/// The CLT samples `n^{-1/2} v_n` (scalar observables).
pub fn clt_samples(source: &dyn IncrementSource, n: usize, replicas: u64) -> Vec<f64> {
    assert_eq!(source.dim(), 1, "CLT samples are scalar");
    replica_map(replicas, |r| {
        let mut incs = vec![0.0; n];
        source.fill(r, &mut incs);
        mc::compensated_total(incs.iter().copied()) / (n as f64).sqrt()
    })
}
