//! Observables `v : [0,1] -> R^m` evaluated along fast orbits.

use std::sync::Arc;

use super::map::MapKind;
use crate::{Error, Result};

/// An observable of the fast variable.
///
/// `mean_zero_under` reports whether `∫ v dμ = 0` holds exactly for the
/// invariant measure of the given map, in which case no empirical centering
/// is needed.
pub trait Observable: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, y: f64, out: &mut [f64]);
    fn name(&self) -> &'static str;
    fn mean_zero_under(&self, kind: MapKind) -> bool;
}

/// `v(y) = y - ½` ("centered-id"). Mean zero for the doubling map, whose
/// invariant measure is Lebesgue; not for the intermittent maps.
pub struct CenteredId;

impl Observable for CenteredId {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn eval_into(&self, y: f64, out: &mut [f64]) {
        out[0] = y - 0.5;
    }

    fn name(&self) -> &'static str {
        "centered-id"
    }

    fn mean_zero_under(&self, kind: MapKind) -> bool {
        matches!(kind, MapKind::Doubling)
    }
}

/// `v(y) = cos 2πy`. Mean zero for the doubling map; all lagged
/// autocorrelations vanish there as well, so Σ = ½, Γ = 0.
pub struct CosObservable;

impl Observable for CosObservable {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn eval_into(&self, y: f64, out: &mut [f64]) {
        out[0] = (2.0 * std::f64::consts::PI * y).cos();
    }

    fn name(&self) -> &'static str {
        "cos"
    }

    fn mean_zero_under(&self, kind: MapKind) -> bool {
        matches!(kind, MapKind::Doubling)
    }
}

const OBSERVABLES: &[&str] = &["centered-id", "cos"];

/// Builds a named observable. Known names: `centered-id`, `cos`.
pub fn build_observable(name: &str) -> Result<Arc<dyn Observable>> {
    match name {
        "centered-id" => Ok(Arc::new(CenteredId)),
        "cos" => Ok(Arc::new(CosObservable)),
        _ => Err(Error::UnknownName {
            kind: "observable",
            name: name.to_string(),
            known: OBSERVABLES.join(", "),
        }),
    }
}

/// Names accepted by [`build_observable`].
pub fn observable_names() -> &'static [&'static str] {
    OBSERVABLES
}
