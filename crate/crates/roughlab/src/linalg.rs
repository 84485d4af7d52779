//! Small shared matrix helpers.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Factor `L` with `L Lᵀ = sigma` for a symmetric positive semidefinite
/// matrix, via a symmetric eigendecomposition so that semidefinite inputs
/// (including zero) are accepted. Rejects asymmetric or indefinite inputs.
pub(crate) fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = sigma.nrows();
    if sigma.ncols() != m {
        return Err(Error::NotPsd);
    }
    let scale = sigma.amax().max(1.0);
    if (sigma - sigma.transpose()).amax() > 1e-10 * scale {
        return Err(Error::NotPsd);
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-10 * scale {
            return Err(Error::NotPsd);
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals))
}

/// Minimum real part of the spectrum of a real square matrix.
pub(crate) fn min_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_roundtrip_and_rejections() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_factor(&sigma).unwrap();
        assert!(((&l * l.transpose()) - &sigma).amax() < 1e-12);
        // zero is fine
        assert!(psd_factor(&DMatrix::zeros(3, 3)).is_ok());
        // indefinite rejected
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_factor(&bad).is_err());
        // asymmetric rejected
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert!(psd_factor(&asym).is_err());
    }

    #[test]
    fn spectrum_bound() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, -5.0, 1.0]);
        assert!((min_real_eigenvalue(&m) - 1.0).abs() < 1e-10);
    }
}
