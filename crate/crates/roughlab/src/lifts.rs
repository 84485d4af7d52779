//! Canonical rough-path lifts.
//!
//! Continuous BV paths lift through `𝕏_t = ∫_0^t (X_s - X_0) ⊗ dX_s`
//! (piecewise-linear / Stratonovich), càdlàg BV paths through
//! `𝕏_t = ∫_{(0,t]} (X_s^- - X_0) ⊗ dX_s` (piecewise-constant / Itô, samples
//! are post-jump values). Brownian rough paths carry an injected area drift
//! `(t-s) Γ` on top of the Stratonovich lift, and pure-area paths isolate
//! the drift with a vanishing first level.
//!
//! Constructors are pure; RNG state is always passed in.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::psd_factor;
use crate::rough::{uniform_times, PathFlavor, RoughPathGrid};
use crate::{Error, Result};

/// Samples of a base path together with the lift mode.
#[derive(Debug, Clone)]
pub struct LiftRequest {
    dim: usize,
    times: Vec<f64>,
    /// `times.len() × dim`, row-major.
    values: Vec<f64>,
    mode: LiftMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftMode {
    PiecewiseLinear,
    PiecewiseConstantIto,
}

impl LiftRequest {
    pub fn new(dim: usize, times: Vec<f64>, values: Vec<f64>, mode: LiftMode) -> Result<Self> {
        if dim == 0 || values.len() != times.len() * dim {
            return Err(Error::InvalidParameter(
                "sample array must be times.len() x dim".into(),
            ));
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite samples".into()));
        }
        Ok(Self {
            dim,
            times,
            values,
            mode,
        })
    }

    pub fn mode(&self) -> LiftMode {
        self.mode
    }
}

/// Dispatches on the request mode.
pub fn lift(req: &LiftRequest) -> Result<RoughPathGrid> {
    match req.mode {
        LiftMode::PiecewiseLinear => lift_piecewise_linear(req),
        LiftMode::PiecewiseConstantIto => lift_piecewise_constant_ito(req),
    }
}

/// Canonical lift of the piecewise-linear interpolation of the samples.
///
/// Over a segment with increment Δ the second level gains
/// `(X_start - X_0) ⊗ Δ + ½ Δ ⊗ Δ`; every increment of the result has zero
/// symmetry defect.
pub fn lift_piecewise_linear(req: &LiftRequest) -> Result<RoughPathGrid> {
    if req.mode != LiftMode::PiecewiseLinear {
        return Err(Error::InvalidParameter("request mode is not piecewise_linear".into()));
    }
    build_lift(req, true)
}

/// Canonical Itô lift of the piecewise-constant càdlàg path through the
/// samples (post-jump values): `𝕏_t = Σ_{r ≤ t} (X_r^- - X_0) ⊗ ΔX_r`.
pub fn lift_piecewise_constant_ito(req: &LiftRequest) -> Result<RoughPathGrid> {
    if req.mode != LiftMode::PiecewiseConstantIto {
        return Err(Error::InvalidParameter(
            "request mode is not piecewise_constant_ito".into(),
        ));
    }
    build_lift(req, false)
}

fn build_lift(req: &LiftRequest, stratonovich_half: bool) -> Result<RoughPathGrid> {
    let d = req.dim;
    let n = req.times.len();
    let mut first = vec![0.0; n * d];
    let mut second = vec![0.0; n * d * d];
    let x0 = &req.values[0..d];
    for k in 1..n {
        let prev = &req.values[(k - 1) * d..k * d];
        let cur = &req.values[k * d..(k + 1) * d];
        for i in 0..d {
            first[k * d + i] = cur[i] - x0[i];
        }
        let (pre, post) = second.split_at_mut(k * d * d);
        let prev_level = &pre[(k - 1) * d * d..];
        let row = &mut post[..d * d];
        for r in 0..d {
            let anchored = prev[r] - x0[r];
            let dr = cur[r] - prev[r];
            for c in 0..d {
                let dc = cur[c] - prev[c];
                let mut acc = prev_level[r * d + c] + anchored * dc;
                if stratonovich_half {
                    acc += 0.5 * dr * dc;
                }
                row[r * d + c] = acc;
            }
        }
    }
    let flavor = if stratonovich_half {
        PathFlavor::GeometricContinuous
    } else {
        PathFlavor::CadlagIto
    };
    RoughPathGrid::from_parts(d, req.times.clone(), first, second, flavor)
}

/// Brownian rough path with covariance `sigma` and injected area drift
/// `gamma`: Gaussian increments of covariance `sigma/mesh` per step, the
/// Stratonovich lift, plus `(t-s) gamma` on every second-level increment.
/// Deterministic given the RNG stream.
pub fn brownian_rough_path(
    sigma: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    mesh: usize,
    rng: &mut impl Rng,
) -> Result<RoughPathGrid> {
    let m = sigma.nrows();
    if gamma.shape() != (m, m) {
        return Err(Error::InvalidParameter("gamma must match sigma's shape".into()));
    }
    if mesh == 0 {
        return Err(Error::InvalidParameter("mesh must be >= 1".into()));
    }
    let factor = psd_factor(sigma)?;
    let step_scale = (mesh as f64).sqrt().recip();
    let mut values = vec![0.0; (mesh + 1) * m];
    let mut z = vec![0.0; m];
    for k in 1..=mesh {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for r in 0..m {
            let mut inc = 0.0;
            for c in 0..m {
                inc += factor[(r, c)] * z[c];
            }
            values[k * m + r] = values[(k - 1) * m + r] + step_scale * inc;
        }
    }
    let req = LiftRequest::new(m, uniform_times(mesh), values, LiftMode::PiecewiseLinear)?;
    let grid = lift_piecewise_linear(&req)?;
    add_area_drift(grid, gamma)
}

/// Pure-area path: first level identically zero, second-level increment
/// `(t-s) gamma`. With `gamma = 0` this is the identity path.
pub fn pure_area_path(gamma: &DMatrix<f64>, times: Vec<f64>) -> Result<RoughPathGrid> {
    let m = gamma.nrows();
    if gamma.ncols() != m || m == 0 {
        return Err(Error::InvalidParameter("gamma must be square".into()));
    }
    let n = times.len();
    let first = vec![0.0; n * m];
    let mut second = vec![0.0; n * m * m];
    for (k, t) in times.iter().enumerate() {
        for r in 0..m {
            for c in 0..m {
                second[k * m * m + r * m + c] = t * gamma[(r, c)];
            }
        }
    }
    RoughPathGrid::from_parts(m, times, first, second, PathFlavor::GeometricContinuous)
}

/// Adds `t · gamma` to the anchored second level, which shifts every
/// increment's second level by `(t-s) gamma`.
pub fn add_area_drift(grid: RoughPathGrid, gamma: &DMatrix<f64>) -> Result<RoughPathGrid> {
    let m = grid.dim();
    if gamma.shape() != (m, m) {
        return Err(Error::InvalidParameter("gamma must match path dimension".into()));
    }
    let n = grid.len();
    let times = grid.times().to_vec();
    let mut first = Vec::with_capacity(n * m);
    let mut second = Vec::with_capacity(n * m * m);
    for k in 0..n {
        first.extend_from_slice(grid.first_row(k));
        let row = grid.second_row(k);
        let t = times[k];
        for r in 0..m {
            for c in 0..m {
                second.push(row[r * m + c] + t * gamma[(r, c)]);
            }
        }
    }
    RoughPathGrid::from_parts(m, times, first, second, grid.flavor())
}
