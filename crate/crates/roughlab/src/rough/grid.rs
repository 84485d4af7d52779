//! Group-valued paths on a finite time grid.
//!
//! A [`RoughPathGrid`] stores values `X_t = (X_{0,t}, 𝕏_{0,t})` anchored at
//! the identity, on a strictly increasing grid over `[0,1]`. Increments are
//! defined through group division, `X_{s,t} = X_s^{-1} ⋆ X_t`, so Chen's
//! relation holds exactly by construction; what lift constructors must get
//! right is the stored second level itself.

use nalgebra::{DMatrix, DVector};

use super::group::Level2Increment;
use crate::{Error, Result};

/// How the path was built; decides Itô (left-limit) versus Stratonovich
/// conventions downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFlavor {
    /// Continuous path with a geometric (piecewise-linear) second level.
    GeometricContinuous,
    /// Càdlàg path with the Itô (left-limit) second level.
    CadlagIto,
}

/// A level-2 rough path sampled on a finite grid.
#[derive(Debug, Clone)]
pub struct RoughPathGrid {
    dim: usize,
    times: Vec<f64>,
    /// `(len) x dim`, row-major; row 0 is zero.
    first: Vec<f64>,
    /// `(len) x dim*dim`, row-major; row 0 is zero.
    second: Vec<f64>,
    flavor: PathFlavor,
}

impl RoughPathGrid {
    /// Builds a grid path from anchored values.
    ///
    /// `first` and `second` are row-major with `times.len()` rows; the first
    /// row must be zero (value at time 0 is the group identity).
    pub fn from_parts(
        dim: usize,
        times: Vec<f64>,
        first: Vec<f64>,
        second: Vec<f64>,
        flavor: PathFlavor,
    ) -> Result<Self> {
        validate_times(&times)?;
        let len = times.len();
        if first.len() != len * dim || second.len() != len * dim * dim {
            return Err(Error::InvalidParameter(
                "value arrays do not match grid length and dimension".into(),
            ));
        }
        if !first.iter().chain(second.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite path values".into()));
        }
        if first[..dim].iter().any(|&x| x != 0.0) || second[..dim * dim].iter().any(|&x| x != 0.0)
        {
            return Err(Error::InvalidParameter(
                "path values must be anchored: value(0) = identity".into(),
            ));
        }
        Ok(Self {
            dim,
            times,
            first,
            second,
            flavor,
        })
    }

    /// The constant-identity path on `times` (dimension `dim`).
    pub fn identity(dim: usize, times: Vec<f64>) -> Result<Self> {
        let len = times.len();
        Self::from_parts(
            dim,
            times,
            vec![0.0; len * dim],
            vec![0.0; len * dim * dim],
            PathFlavor::GeometricContinuous,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn flavor(&self) -> PathFlavor {
        self.flavor
    }

    /// First-level value row at grid index `k` (anchored, `X_{0,t_k}`).
    #[inline]
    pub fn first_row(&self, k: usize) -> &[f64] {
        &self.first[k * self.dim..(k + 1) * self.dim]
    }

    /// All first-level values, row-major (`len × dim`).
    pub fn first_values(&self) -> &[f64] {
        &self.first
    }

    /// Second-level value row at grid index `k` (anchored, `𝕏_{0,t_k}`).
    #[inline]
    pub fn second_row(&self, k: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.second[k * d2..(k + 1) * d2]
    }

    /// Group value at grid index `k`.
    pub fn value(&self, k: usize) -> Level2Increment {
        Level2Increment::new(
            DVector::from_column_slice(self.first_row(k)),
            DMatrix::from_row_slice(self.dim, self.dim, self.second_row(k)),
        )
    }

    /// Group increment `X_{t_i, t_j} = X_{t_i}^{-1} ⋆ X_{t_j}` for `i <= j`.
    pub fn increment(&self, i: usize, j: usize) -> Level2Increment {
        let mut a = vec![0.0; self.dim];
        let mut m = vec![0.0; self.dim * self.dim];
        self.increment_into(i, j, &mut a, &mut m);
        Level2Increment::new(
            DVector::from_vec(a),
            DMatrix::from_row_slice(self.dim, self.dim, &m),
        )
    }

    /// Allocation-free increment: writes `X_{t_i,t_j}` into `a` (dim) and
    /// `m` (dim*dim, row-major).
    ///
    /// `X_{s,t} = (a_t - a_s, M_t - M_s - a_s ⊗ (a_t - a_s))`.
    #[inline]
    pub fn increment_into(&self, i: usize, j: usize, a: &mut [f64], m: &mut [f64]) {
        debug_assert!(i <= j);
        let d = self.dim;
        let ai = self.first_row(i);
        let aj = self.first_row(j);
        for k in 0..d {
            a[k] = aj[k] - ai[k];
        }
        let mi = self.second_row(i);
        let mj = self.second_row(j);
        for r in 0..d {
            for c in 0..d {
                m[r * d + c] = mj[r * d + c] - mi[r * d + c] - ai[r] * a[c];
            }
        }
    }

    /// Euclidean norm of the first-level increment between grid indices.
    #[inline]
    pub fn first_increment_norm(&self, i: usize, j: usize) -> f64 {
        let ai = self.first_row(i);
        let aj = self.first_row(j);
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = aj[k] - ai[k];
            s += d * d;
        }
        s.sqrt()
    }

    /// Frobenius norm of the second-level increment between grid indices.
    #[inline]
    pub fn second_increment_norm(&self, i: usize, j: usize) -> f64 {
        let d = self.dim;
        let ai = self.first_row(i);
        let aj = self.first_row(j);
        let mi = self.second_row(i);
        let mj = self.second_row(j);
        let mut s = 0.0;
        for r in 0..d {
            let ar = ai[r];
            for c in 0..d {
                let x = mj[r * d + c] - mi[r * d + c] - ar * (aj[c] - ai[c]);
                s += x * x;
            }
        }
        s.sqrt()
    }

    /// Largest Chen defect `|X_{s,u} ⋆ X_{u,t}  -  X_{s,t}|_∞` over a set of
    /// grid triples, relative to `1 + |increment|_∞`. Zero up to rounding by
    /// construction; useful as a lift self-check.
    pub fn max_chen_defect(&self, triples: &[(usize, usize, usize)]) -> f64 {
        let mut worst = 0.0f64;
        for &(s, u, t) in triples {
            assert!(s < u && u < t && t < self.len());
            let left = self.increment(s, u).mul(&self.increment(u, t));
            let right = self.increment(s, t);
            let scale = 1.0 + right.norm_inf();
            worst = worst.max(left.dist_inf(&right) / scale);
        }
        worst
    }

    /// Largest symmetry defect over all one-step increments, relative to
    /// `1 + |increment|²`.
    pub fn max_step_sym_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.len() - 1 {
            let inc = self.increment(k, k + 1);
            let scale = 1.0 + inc.norm_inf() * inc.norm_inf();
            worst = worst.max(inc.sym_defect().amax() / scale);
        }
        worst
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidGrid);
    }
    if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
        return Err(Error::InvalidGrid);
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidGrid);
        }
    }
    Ok(())
}

/// Uniform grid `{k/n : k = 0..n}` on `[0,1]`.
pub fn uniform_times(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(validate_times(&[0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(validate_times(&[0.0, 0.5]).is_err());
        assert!(validate_times(&[0.1, 1.0]).is_err());
        assert!(validate_times(&[0.0]).is_err());
        assert!(validate_times(&[0.0, 0.25, 1.0]).is_ok());
    }

    #[test]
    fn rejects_unanchored_values() {
        let r = RoughPathGrid::from_parts(
            1,
            vec![0.0, 1.0],
            vec![0.5, 1.0],
            vec![0.0, 0.0],
            PathFlavor::GeometricContinuous,
        );
        assert!(r.is_err());
    }

    #[test]
    fn increment_matches_group_division() {
        // monotone linear path t -> t with second level t^2/2 (canonical lift)
        let times = uniform_times(4);
        let first: Vec<f64> = times.clone();
        let second: Vec<f64> = times.iter().map(|t| t * t / 2.0).collect();
        let g = RoughPathGrid::from_parts(1, times, first, second, PathFlavor::GeometricContinuous)
            .unwrap();
        // X_{s,t} = (t - s, (t-s)^2/2)
        let inc = g.increment(1, 3);
        assert!((inc.first()[0] - 0.5).abs() < 1e-15);
        assert!((inc.second()[(0, 0)] - 0.125).abs() < 1e-15);
        // against the explicit group formula
        let v1 = g.value(1);
        let v3 = g.value(3);
        let byhand = v1.inv().mul(&v3);
        assert!(inc.dist_inf(&byhand) < 1e-15);
    }

    #[test]
    fn chen_defect_zero_by_construction() {
        let times = uniform_times(8);
        let first: Vec<f64> = times.iter().map(|t| (6.0 * t).sin()).collect();
        let second: Vec<f64> = times.iter().map(|t| (3.0 * t).cos()).collect();
        // anchor
        let mut first = first;
        let mut second = second;
        let f0 = first[0];
        let s0 = second[0];
        for x in &mut first {
            *x -= f0;
        }
        for x in &mut second {
            *x -= s0;
        }
        let g = RoughPathGrid::from_parts(1, times, first, second, PathFlavor::CadlagIto).unwrap();
        let triples: Vec<_> = (0..7).flat_map(|s| ((s + 2)..9).map(move |t| (s, s + 1, t))).collect();
        assert!(g.max_chen_defect(&triples) < 1e-14);
    }
}
