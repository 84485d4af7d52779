//! The step-2 group `G = R^m ⊕ (R^m ⊗ R^m)`.
//!
//! Multiplication `(a, M) ⋆ (b, N) = (a + b, M + a ⊗ b + N)`, inverse
//! `(a, M)^{-1} = (-a, -M + a ⊗ a)`, identity `(0, 0)`. Weakly geometric
//! elements are exactly those with zero symmetry defect; they form a
//! subgroup and are recognized by [`Level2Increment::sym_defect`] rather
//! than a separate type.

use nalgebra::{DMatrix, DVector};

/// An element `(a, M)` of the step-2 group: a first-level increment `a`
/// and a second-level (iterated-integral) increment `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Level2Increment {
    a: DVector<f64>,
    m: DMatrix<f64>,
}

impl Level2Increment {
    /// Builds `(a, M)`. Panics if `M` is not `dim(a) × dim(a)`.
    pub fn new(a: DVector<f64>, m: DMatrix<f64>) -> Self {
        assert_eq!(
            (a.len(), a.len()),
            m.shape(),
            "second level must be dim x dim"
        );
        Self { a, m }
    }

    /// The group identity `(0, 0)` in dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Self {
            a: DVector::zeros(dim),
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn second(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Group product `(a, M) ⋆ (b, N) = (a + b, M + a ⊗ b + N)`.
    ///
    /// Panics on dimension mismatch.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in group mul");
        let a = &self.a + &rhs.a;
        let m = &self.m + &self.a * rhs.a.transpose() + &rhs.m;
        Self { a, m }
    }

    /// Group inverse `(a, M)^{-1} = (-a, -M + a ⊗ a)`.
    pub fn inv(&self) -> Self {
        let a = -&self.a;
        let m = -&self.m + &self.a * self.a.transpose();
        Self { a, m }
    }

    /// Symmetry defect `Sym(M) - ½ a ⊗ a`.
    ///
    /// Zero exactly for weakly geometric increments; an Itô lift of a path
    /// with jumps Δ picks up `-½ Σ Δ ⊗ Δ`.
    pub fn sym_defect(&self) -> DMatrix<f64> {
        let sym = (&self.m + self.m.transpose()) * 0.5;
        sym - &self.a * self.a.transpose() * 0.5
    }

    /// Max-norm distance to the identity, used for "is identity" checks.
    pub fn norm_inf(&self) -> f64 {
        let a = self.a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let m = self.m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        a.max(m)
    }

    /// Max-norm of the componentwise difference.
    pub fn dist_inf(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        let a = self
            .a
            .iter()
            .zip(rhs.a.iter())
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        let m = self
            .m
            .iter()
            .zip(rhs.m.iter())
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        a.max(m)
    }
}

/// Free function form of [`Level2Increment::mul`].
pub fn group_mul(x: &Level2Increment, y: &Level2Increment) -> Level2Increment {
    x.mul(y)
}

/// Free function form of [`Level2Increment::inv`].
pub fn group_inv(x: &Level2Increment) -> Level2Increment {
    x.inv()
}

/// Free function form of [`Level2Increment::sym_defect`].
pub fn sym_defect(x: &Level2Increment) -> DMatrix<f64> {
    x.sym_defect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{SeedSplitter, StreamPurpose};
    use rand::Rng;

    fn random_increment(rng: &mut impl Rng, dim: usize) -> Level2Increment {
        let a = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        Level2Increment::new(a, m)
    }

    #[test]
    fn identity_is_neutral() {
        let id = Level2Increment::identity(2);
        let x = Level2Increment::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -1.0, 2.0]),
        );
        assert_eq!(id.mul(&x), x);
        assert_eq!(x.mul(&id), x);
    }

    #[test]
    fn product_formula_direct_substitution() {
        // m = 2: a = (1,0), b = (0,1), M = N = 0 -> (a+b, a⊗b)
        let x = Level2Increment::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::zeros(2, 2));
        let y = Level2Increment::new(DVector::from_vec(vec![0.0, 1.0]), DMatrix::zeros(2, 2));
        let z = x.mul(&y);
        assert_eq!(z.first().as_slice(), &[1.0, 1.0]);
        assert_eq!(
            z.second(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn inverse_scalar_substitution() {
        // m = 1: (2, 3)^{-1} = (-2, -3 + 4) = (-2, 1)
        let x = Level2Increment::new(DVector::from_vec(vec![2.0]), DMatrix::from_vec(1, 1, vec![3.0]));
        let xi = x.inv();
        assert_eq!(xi.first()[0], -2.0);
        assert_eq!(xi.second()[(0, 0)], 1.0);
        assert_eq!(Level2Increment::identity(1).inv(), Level2Increment::identity(1));
    }

    #[test]
    fn randomized_group_laws() {
        let sp = SeedSplitter::new(11);
        let mut rng = sp.stream(StreamPurpose::Scratch, 0);
        for dim in [1usize, 2, 3] {
            for _ in 0..300 {
                let x = random_increment(&mut rng, dim);
                let y = random_increment(&mut rng, dim);
                let z = random_increment(&mut rng, dim);
                let scale = 1.0 + x.norm_inf().max(y.norm_inf()).max(z.norm_inf());
                // associativity
                let lhs = x.mul(&y).mul(&z);
                let rhs = x.mul(&y.mul(&z));
                assert!(lhs.dist_inf(&rhs) <= 1e-12 * scale);
                // inverse law
                assert!(x.mul(&x.inv()).norm_inf() <= 1e-12 * scale);
                assert!(x.inv().mul(&x).norm_inf() <= 1e-12 * scale);
                // double inverse
                assert!(x.inv().inv().dist_inf(&x) <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn sym_defect_examples() {
        // (a, ½ a⊗a) has zero defect by definition
        let a = DVector::from_vec(vec![0.7, -1.3]);
        let half = &a * a.transpose() * 0.5;
        let x = Level2Increment::new(a, half);
        assert!(x.sym_defect().amax() == 0.0);
        // m = 1: (1, 0) -> -1/2
        let y = Level2Increment::new(DVector::from_vec(vec![1.0]), DMatrix::zeros(1, 1));
        assert_eq!(y.sym_defect()[(0, 0)], -0.5);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mul_rejects_dimension_mismatch() {
        let x = Level2Increment::identity(1);
        let y = Level2Increment::identity(2);
        let _ = x.mul(&y);
    }
}
