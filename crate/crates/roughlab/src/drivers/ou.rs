//! Physical Brownian motion: `W_ε(t) = ε ∫_0^{t/ε²} Y_s ds` with
//! `dY = -M Y dt + dB`.
//!
//! The pair `(Y, I)`, `I = ∫ Y`, is a linear SDE, so one mesh step is an
//! exact Gaussian update: transition `exp(A h)` and noise covariance
//! `∫_0^h e^{As} C e^{Aᵀs} ds` are computed once per driver (matrix
//! exponential by scaling-and-squaring, the covariance by Gauss–Legendre
//! quadrature). No discretization error enters the Σ tests; the mesh only
//! sets where the path is sampled for its piecewise-linear lift.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::ContinuousSource;
use crate::linalg::{min_real_eigenvalue, psd_factor};
use crate::lifts::{lift_piecewise_linear, LiftMode, LiftRequest};
use crate::mc::{SeedSplitter, StreamPurpose};
use crate::rough::RoughPathGrid;
use crate::{Error, Result};

/// OU fast driver with friction matrix `M` (spectrum in the right half
/// plane), mass scale ε and a fast-time mesh.
pub struct OuDriver {
    friction: DMatrix<f64>,
    epsilon: f64,
    mesh_per_unit_time: f64,
    splitter: SeedSplitter,
    steps: usize,
    transition: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
}

impl OuDriver {
    /// Validates the spectrum and the mesh (at least 10 steps per OU
    /// relaxation time `1 / min Re λ(M)`), then precomputes the exact
    /// one-step update for the slow horizon `[0, 1]`.
    pub fn new(
        friction: DMatrix<f64>,
        epsilon: f64,
        mesh_per_unit_time: f64,
        splitter: SeedSplitter,
    ) -> Result<Self> {
        let m = friction.nrows();
        if friction.ncols() != m || m == 0 {
            return Err(Error::InvalidParameter("friction matrix must be square".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        let min_re = min_real_eigenvalue(&friction);
        if !(min_re > 0.0) {
            return Err(Error::SpectrumCheck(min_re));
        }
        // relaxation time 1/min_re; require >= 10 mesh steps per relaxation
        if mesh_per_unit_time < 10.0 * min_re {
            return Err(Error::InvalidParameter(format!(
                "mesh {mesh_per_unit_time} under-resolves the OU relaxation time; need >= {}",
                10.0 * min_re
            )));
        }
        let fast_horizon = epsilon.powi(-2);
        let steps = (fast_horizon * mesh_per_unit_time).ceil() as usize;
        let h = fast_horizon / steps as f64;

        // augmented generator for (Y, I): d(Y,I) = A (Y,I) dt + (dB, 0)
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        for r in 0..m {
            for c in 0..m {
                a[(r, c)] = -friction[(r, c)];
            }
            a[(m + r, r)] = 1.0;
        }
        let transition = (a.clone() * h).exp();
        let noise_cov = van_loan_noise_cov(&a, m, h);
        let noise_factor = psd_factor(&noise_cov)?;

        Ok(Self {
            friction,
            epsilon,
            mesh_per_unit_time,
            splitter,
            steps,
            transition,
            noise_factor,
        })
    }

    pub fn friction(&self) -> &DMatrix<f64> {
        &self.friction
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mesh_per_unit_time(&self) -> f64 {
        self.mesh_per_unit_time
    }

    /// The limiting covariance `M^{-1} (M^{-1})ᵀ` of `W_ε(1)`.
    pub fn limit_covariance(&self) -> DMatrix<f64> {
        let inv = self
            .friction
            .clone()
            .try_inverse()
            .expect("spectrum check guarantees invertibility");
        &inv * inv.transpose()
    }

    /// Samples the slow-time values of `W_ε` on the uniform grid `{k/steps}`
    /// (exact joint Gaussian updates of `(Y, I)`, `Y_0 = 0`).
    pub fn sample_values(&self, replica: u64) -> Vec<f64> {
        let m = self.friction.nrows();
        let mut rng = self.splitter.stream(StreamPurpose::Ou, replica);
        let mut state = DVector::<f64>::zeros(2 * m);
        let mut z = DVector::<f64>::zeros(2 * m);
        let mut values = vec![0.0; (self.steps + 1) * m];
        for k in 1..=self.steps {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            state = &self.transition * state + &self.noise_factor * &z;
            for r in 0..m {
                values[k * m + r] = self.epsilon * state[m + r];
            }
        }
        values
    }
}

/// `∫_0^h e^{As} C e^{Aᵀs} ds` with `C = diag(I_m, 0)`, by 24-node
/// Gauss–Legendre quadrature (the integrand is entire and the step resolves
/// the relaxation time, so the rule is effectively exact).
fn van_loan_noise_cov(a: &DMatrix<f64>, m: usize, h: f64) -> DMatrix<f64> {
    let dim = a.nrows();
    let (nodes, weights) = gauss_legendre(24);
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    for (x, w) in nodes.iter().zip(&weights) {
        let s = 0.5 * h * (x + 1.0);
        let e = (a.clone() * s).exp();
        // e * C * e^T where C keeps only the top-left m x m identity block
        let left = e.columns(0, m);
        q += (&left * left.transpose()) * (w * 0.5 * h);
    }
    // symmetrize rounding
    (&q + q.transpose()) * 0.5
}

/// Gauss–Legendre nodes and weights on (-1, 1) via Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl ContinuousSource for OuDriver {
    fn dim(&self) -> usize {
        self.friction.nrows()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn label(&self) -> String {
        format!(
            "ou(m={}, eps={}, mesh={})",
            self.friction.nrows(),
            self.epsilon,
            self.mesh_per_unit_time
        )
    }

    fn sample_path(&self, replica: u64) -> RoughPathGrid {
        let m = self.friction.nrows();
        let values = self.sample_values(replica);
        let times: Vec<f64> = (0..=self.steps)
            .map(|k| k as f64 / self.steps as f64)
            .collect();
        let req = LiftRequest::new(m, times, values, LiftMode::PiecewiseLinear)
            .expect("OU samples are finite on a valid grid");
        lift_piecewise_linear(&req).expect("valid lift request")
    }
}
