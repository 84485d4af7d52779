//! Chaotic interval maps: the doubling map and the intermittent (LSV)
//! family
//!
//! ```text
//! T y = y (1 + (2y)^γ)   y < ½
//!       2y - 1           y ≥ ½
//! ```
//!
//! with γ ∈ [0, ½) (the CLT regime). γ = 0 is the doubling map.

use std::sync::Arc;

use rand::Rng;

use super::observable::Observable;
use super::IncrementSource;
use crate::mc::{replica_map, CompensatedSum, SeedSplitter, StreamPurpose};
use crate::{Error, Result};

/// Which interval map drives the fast dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapKind {
    Doubling,
    Lsv { gamma: f64 },
}

impl MapKind {
    /// Intermittent map with parameter `gamma`; rejected outside `[0, ½)`
    /// where the CLT with √n scaling fails.
    pub fn lsv(gamma: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "lsv gamma must lie in [0, 0.5), got {gamma}"
            )));
        }
        Ok(if gamma == 0.0 {
            MapKind::Doubling
        } else {
            MapKind::Lsv { gamma }
        })
    }

    /// One application of the map. Branch arithmetic keeps [0,1] invariant:
    /// the left branch is evaluated as `y (1 + (2y)^γ)` to avoid
    /// cancellation, values ≥ ½ (including a floating tie at ½) take the
    /// right branch, and T(1) = 1.
    #[inline]
    pub fn step(self, y: f64) -> f64 {
        match self {
            MapKind::Doubling => {
                if y < 0.5 {
                    2.0 * y
                } else {
                    2.0 * y - 1.0
                }
            }
            MapKind::Lsv { gamma } => {
                if y < 0.5 {
                    y * (1.0 + (2.0 * y).powf(gamma))
                } else {
                    2.0 * y - 1.0
                }
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            MapKind::Doubling => "doubling".into(),
            MapKind::Lsv { gamma } => format!("lsv(gamma={gamma})"),
        }
    }
}

/// Orbit `(y0, T y0, ..., T^{n-1} y0)` under the literal floating-point map.
///
/// Statistical sources do not use this for the doubling map: binary doubling
/// in f64 sheds one mantissa bit per step and every f64 orbit collapses to 0
/// within ~53 iterations. See [`MapIncrementSource`].
pub fn iterate_map(kind: MapKind, y0: f64, n: usize) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&y0), "y0 must lie in [0,1]");
    let mut orbit = Vec::with_capacity(n);
    let mut y = y0;
    for _ in 0..n {
        orbit.push(y);
        y = kind.step(y);
    }
    orbit
}

/// Lazily extends a uniformly random initial condition bit by bit.
struct BitSource<R: Rng> {
    rng: R,
    buf: u64,
    left: u8,
}

impl<R: Rng> BitSource<R> {
    fn new(rng: R) -> Self {
        Self { rng, buf: 0, left: 0 }
    }

    #[inline]
    fn next_bit(&mut self) -> u64 {
        if self.left == 0 {
            self.buf = self.rng.random();
            self.left = 64;
        }
        let b = self.buf >> 63;
        self.buf <<= 1;
        self.left -= 1;
        b
    }
}

/// Orbit state. The doubling map is iterated symbolically: the state is a
/// 64-bit window onto the binary expansion of a Lebesgue-random initial
/// condition, shifted one bit per step with fresh bits drawn lazily. This is
/// the exact map on a random irrational; a plain f64 orbit would reach the
/// fixed point 0 after ~53 steps. The intermittent branch refreshes the
/// mantissa through `powf`, so γ > 0 iterates in f64 directly.
enum OrbitState<R: Rng> {
    Bits { window: u64, bits: BitSource<R> },
    Float { y: f64, gamma: f64 },
}

impl<R: Rng> OrbitState<R> {
    fn new(kind: MapKind, mut rng: R) -> Self {
        match kind {
            MapKind::Doubling => {
                let window = rng.random();
                Self::Bits {
                    window,
                    bits: BitSource::new(rng),
                }
            }
            MapKind::Lsv { gamma } => {
                let y = rng.random::<f64>();
                Self::Float { y, gamma }
            }
        }
    }

    #[inline]
    fn current(&self) -> f64 {
        match self {
            Self::Bits { window, .. } => (window >> 11) as f64 * (0.5f64).powi(53),
            Self::Float { y, .. } => *y,
        }
    }

    #[inline]
    fn advance(&mut self) {
        match self {
            Self::Bits { window, bits } => {
                *window = (*window << 1) | bits.next_bit();
            }
            Self::Float { y, gamma } => {
                *y = if *y < 0.5 {
                    *y * (1.0 + (2.0 * *y).powf(*gamma))
                } else {
                    2.0 * *y - 1.0
                };
            }
        }
    }
}

/// How the observable is centered against the map's invariant measure.
#[derive(Debug, Clone, Copy)]
pub enum Centering {
    /// Trust the observable's declared mean-zero property; no offset.
    Declared,
    /// Subtract an orbit-average estimate of `∫ v dμ`, computed once at
    /// construction from `orbits` independent calibration orbits totalling
    /// `total_iters` iterations (burn-in 10⁴ each).
    Empirical { total_iters: u64, orbits: u64 },
}

impl Centering {
    /// Declared when the observable is exactly mean-zero under `kind`,
    /// otherwise a default empirical budget.
    pub fn auto(kind: MapKind, observable: &dyn Observable) -> Self {
        if observable.mean_zero_under(kind) {
            Centering::Declared
        } else {
            Centering::Empirical {
                total_iters: 1 << 25,
                orbits: 32,
            }
        }
    }
}

/// A fast map orbit composed with an observable, the increment stream
/// `v(Y_0), v(Y_1), ...` feeding Birkhoff sums and lifts.
///
/// Initial conditions are Lebesgue on [0,1] with `burn_in` discarded
/// iterations; each replica owns the stream `(FastInit, replica)`.
pub struct MapIncrementSource {
    kind: MapKind,
    burn_in: u32,
    observable: Arc<dyn Observable>,
    offset: Vec<f64>,
    splitter: SeedSplitter,
}

impl MapIncrementSource {
    pub fn new(
        kind: MapKind,
        observable: Arc<dyn Observable>,
        burn_in: u32,
        splitter: SeedSplitter,
        centering: Centering,
    ) -> Self {
        let offset = match centering {
            Centering::Declared => vec![0.0; observable.dim()],
            Centering::Empirical { total_iters, orbits } => {
                calibrate_mean(kind, observable.as_ref(), splitter, total_iters, orbits)
            }
        };
        Self {
            kind,
            burn_in,
            observable,
            offset,
            splitter,
        }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    /// The subtracted estimate of `∫ v dμ` (zero under declared centering).
    pub fn mean_offset(&self) -> &[f64] {
        &self.offset
    }

    /// Raw orbit positions for one replica (post burn-in), mostly for
    /// occupancy diagnostics.
    pub fn orbit_positions(&self, replica: u64, n: usize) -> Vec<f64> {
        let rng = self.splitter.stream(StreamPurpose::FastInit, replica);
        let mut state = OrbitState::new(self.kind, rng);
        for _ in 0..self.burn_in {
            state.advance();
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(state.current());
            state.advance();
        }
        out
    }
}

fn calibrate_mean(
    kind: MapKind,
    observable: &dyn Observable,
    splitter: SeedSplitter,
    total_iters: u64,
    orbits: u64,
) -> Vec<f64> {
    let dim = observable.dim();
    let orbits = orbits.max(1);
    let per_orbit = (total_iters / orbits).max(1);
    let burn = 10_000u64;
    let sums = replica_map(orbits, |o| {
        let rng = splitter.stream(StreamPurpose::Calibration, o);
        let mut state = OrbitState::new(kind, rng);
        for _ in 0..burn {
            state.advance();
        }
        let mut acc = vec![CompensatedSum::new(); dim];
        let mut val = vec![0.0; dim];
        for _ in 0..per_orbit {
            observable.eval_into(state.current(), &mut val);
            for (a, &v) in acc.iter_mut().zip(&val) {
                a.add(v);
            }
            state.advance();
        }
        acc.iter().map(|a| a.total()).collect::<Vec<f64>>()
    });
    let denom = (per_orbit * orbits) as f64;
    (0..dim)
        .map(|k| crate::mc::compensated_total(sums.iter().map(|s| s[k])) / denom)
        .collect()
}

impl IncrementSource for MapIncrementSource {
    fn dim(&self) -> usize {
        self.observable.dim()
    }

    fn mixing(&self) -> bool {
        // both named maps are mixing, which licenses the lag-series
        // estimators for Σ and Γ
        true
    }

    fn label(&self) -> String {
        format!("{}:{}", self.kind.label(), self.observable.name())
    }

    fn fill(&self, replica: u64, out: &mut [f64]) {
        let dim = self.dim();
        assert_eq!(out.len() % dim, 0);
        let rng = self.splitter.stream(StreamPurpose::FastInit, replica);
        let mut state = OrbitState::new(self.kind, rng);
        for _ in 0..self.burn_in {
            state.advance();
        }
        for chunk in out.chunks_exact_mut(dim) {
            self.observable.eval_into(state.current(), chunk);
            for (c, off) in chunk.iter_mut().zip(&self.offset) {
                *c -= off;
            }
            state.advance();
        }
    }
}
