//! Fast-dynamics drivers behind a common registry.
//!
//! Every driver variant sits behind one of two traits — [`IncrementSource`]
//! for discrete-time noise (chaotic maps composed with an observable, IID
//! walks) and [`ContinuousSource`] for continuous-time noise (OU physical
//! Brownian motion) — and is registered by name, selected at runtime from
//! config or CLI flags via [`build_driver`].

mod map;
mod observable;
mod ou;
mod walk;

pub use map::{iterate_map, Centering, MapIncrementSource, MapKind};
pub use observable::{build_observable, observable_names, CenteredId, CosObservable, Observable};
pub use ou::OuDriver;
pub use walk::{WalkIncrementSource, WalkLaw};

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::lifts::{lift, LiftMode, LiftRequest};
use crate::mc::SeedSplitter;
use crate::rough::RoughPathGrid;
use crate::{Error, Result};

/// Discrete-time fast noise: per replica, the increment stream
/// `v(Y_0), v(Y_1), ...` whose partial sums build `W_n`.
///
/// Implementations own their seed-splitting, so `fill(replica, ..)` is
/// deterministic and independent of batch size.
pub trait IncrementSource: Send + Sync {
    fn dim(&self) -> usize;
    /// Whether the one-sided lag-series estimators (Green–Kubo Σ, series Γ)
    /// apply; they require a mixing driver.
    fn mixing(&self) -> bool;
    fn label(&self) -> String;
    /// Fills `out` (`n × dim`, row-major) with one replica's increments.
    fn fill(&self, replica: u64, out: &mut [f64]);
}

/// Continuous-time fast noise sampled on its simulation mesh.
pub trait ContinuousSource: Send + Sync {
    fn dim(&self) -> usize;
    fn epsilon(&self) -> f64;
    fn label(&self) -> String;
    /// The piecewise-linear lift of one replica of `W_ε` on `[0, 1]`.
    fn sample_path(&self, replica: u64) -> RoughPathGrid;
}

/// A driver built from the registry.
pub enum Driver {
    Discrete(Box<dyn IncrementSource>),
    Continuous(Box<dyn ContinuousSource>),
}

impl Driver {
    pub fn label(&self) -> String {
        match self {
            Driver::Discrete(d) => d.label(),
            Driver::Continuous(c) => c.label(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Driver::Discrete(d) => d.dim(),
            Driver::Continuous(c) => c.dim(),
        }
    }

    pub fn as_discrete(&self) -> Option<&dyn IncrementSource> {
        match self {
            Driver::Discrete(d) => Some(d.as_ref()),
            Driver::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&dyn ContinuousSource> {
        match self {
            Driver::Continuous(c) => Some(c.as_ref()),
            Driver::Discrete(_) => None,
        }
    }
}

/// First level of the scaled partial-sum path: values
/// `W(j/n) = n^{-1/2} Σ_{i<j} ξ_i` on the grid `{j/n}`, from `n` increments.
pub fn scaled_walk_values(increments: &[f64], dim: usize) -> Vec<f64> {
    assert!(dim >= 1 && increments.len() % dim == 0);
    let n = increments.len() / dim;
    let scale = (n as f64).sqrt().recip();
    let mut values = vec![0.0; (n + 1) * dim];
    let mut prefix = vec![0.0; dim];
    for j in 0..n {
        for k in 0..dim {
            prefix[k] += increments[j * dim + k];
            values[(j + 1) * dim + k] = scale * prefix[k];
        }
    }
    values
}

/// Rescaled-walk rough path `ε Z_{t/ε²}`, `ε = n^{-1/2}`, with the Itô
/// (piecewise-constant) or Stratonovich (piecewise-linear) lift.
pub fn walk_rough_path(
    source: &dyn IncrementSource,
    replica: u64,
    n: usize,
    mode: LiftMode,
) -> Result<RoughPathGrid> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let dim = source.dim();
    let mut increments = vec![0.0; n * dim];
    source.fill(replica, &mut increments);
    let values = scaled_walk_values(&increments, dim);
    let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    lift(&LiftRequest::new(dim, times, values, mode)?)
}

/// A Birkhoff-sum path: the first-level càdlàg path
/// `t ↦ n^{-1/2} v_{⌊nt⌋}` together with the raw sum `v_n`.
pub struct BirkhoffData {
    pub grid: RoughPathGrid,
    /// Unscaled `v_n = Σ_{j<n} v(Y_j)`.
    pub raw_sum: Vec<f64>,
}

/// Builds the Birkhoff path of one replica. The displayed upper summation
/// limit is `⌊nt⌋` (the sum must depend on `t`).
pub fn birkhoff_path(source: &dyn IncrementSource, replica: u64, n: usize) -> Result<BirkhoffData> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let dim = source.dim();
    let mut increments = vec![0.0; n * dim];
    source.fill(replica, &mut increments);
    let values = scaled_walk_values(&increments, dim);
    let mut raw_sum = vec![0.0; dim];
    let scale = (n as f64).sqrt();
    for k in 0..dim {
        raw_sum[k] = values[n * dim + k] * scale;
    }
    let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let len = values.len();
    let grid = RoughPathGrid::from_parts(
        dim,
        times,
        values,
        vec![0.0; len * dim],
        crate::rough::PathFlavor::CadlagIto,
    )?;
    Ok(BirkhoffData { grid, raw_sum })
}

/// An iterated-sum path: the Itô lift of the Birkhoff path (its second
/// level is `𝕎_n(t) = n^{-1} Σ_{i<j<⌊nt⌋} v_i ⊗ v_j`) plus the raw
/// iterated sum `S_n = Σ_{i≤j<n} v_i ⊗ v_j`.
pub struct IteratedSumData {
    pub grid: RoughPathGrid,
    pub s_n: DMatrix<f64>,
    pub raw_sum: Vec<f64>,
}

pub fn iterated_sum_path(
    source: &dyn IncrementSource,
    replica: u64,
    n: usize,
) -> Result<IteratedSumData> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let dim = source.dim();
    let mut increments = vec![0.0; n * dim];
    source.fill(replica, &mut increments);

    // S_n includes the diagonal: accumulate prefix through j, then ⊗ v_j
    let mut s_n = DMatrix::<f64>::zeros(dim, dim);
    let mut prefix = vec![0.0; dim];
    for j in 0..n {
        let v = &increments[j * dim..(j + 1) * dim];
        for k in 0..dim {
            prefix[k] += v[k];
        }
        for r in 0..dim {
            for c in 0..dim {
                s_n[(r, c)] += prefix[r] * v[c];
            }
        }
    }
    let raw_sum = prefix;

    let values = scaled_walk_values(&increments, dim);
    let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let grid = lift(&LiftRequest::new(
        dim,
        times,
        values,
        LiftMode::PiecewiseConstantIto,
    )?)?;
    Ok(IteratedSumData { grid, s_n, raw_sum })
}

/// OU rough path on the slow horizon `[0, 1]`.
pub fn ou_rough_path(driver: &OuDriver, replica: u64) -> RoughPathGrid {
    driver.sample_path(replica)
}

/// Runtime parameters for the driver registry. Unset fields fall back to
/// per-driver defaults.
#[derive(Debug, Clone)]
pub struct DriverParams {
    pub seed: u64,
    /// Intermittency parameter for `lsv`.
    pub gamma: Option<f64>,
    /// Burn-in iterations for map drivers (default 1000).
    pub burn_in: Option<u32>,
    /// Observable name for map drivers (default `centered-id`).
    pub observable: Option<String>,
    /// Dimension for walk drivers (default 1).
    pub dim: Option<usize>,
    /// Increment covariance for `gaussian-walk` (default identity).
    pub sigma: Option<DMatrix<f64>>,
    /// Friction matrix for `ou` (default identity 1x1).
    pub friction: Option<DMatrix<f64>>,
    /// Mass scale for `ou` (default 0.1).
    pub epsilon: Option<f64>,
    /// Fast-time mesh for `ou` (default 20 steps per unit time).
    pub mesh: Option<f64>,
    /// Centering budget for map observables that are not exactly mean-zero
    /// under the map's invariant measure.
    pub centering_iters: Option<u64>,
}

impl DriverParams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            gamma: None,
            burn_in: None,
            observable: None,
            dim: None,
            sigma: None,
            friction: None,
            epsilon: None,
            mesh: None,
            centering_iters: None,
        }
    }
}

/// One registered driver variant.
pub struct DriverEntry {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn(&DriverParams) -> Result<Driver>,
}

fn build_map_driver(kind: MapKind, p: &DriverParams) -> Result<Driver> {
    let obs_name = p.observable.as_deref().unwrap_or("centered-id");
    let observable = build_observable(obs_name)?;
    let splitter = SeedSplitter::new(p.seed);
    let centering = match p.centering_iters {
        _ if observable.mean_zero_under(kind) => Centering::Declared,
        Some(total_iters) => Centering::Empirical {
            total_iters,
            orbits: 32,
        },
        None => Centering::auto(kind, observable.as_ref()),
    };
    Ok(Driver::Discrete(Box::new(MapIncrementSource::new(
        kind,
        observable,
        p.burn_in.unwrap_or(1000),
        splitter,
        centering,
    ))))
}

fn registry_entries() -> Vec<DriverEntry> {
    vec![
        DriverEntry {
            name: "doubling",
            summary: "doubling map 2y mod 1 with a named observable",
            build: |p| build_map_driver(MapKind::Doubling, p),
        },
        DriverEntry {
            name: "lsv",
            summary: "intermittent LSV map, gamma in [0, 0.5)",
            build: |p| {
                let gamma = p.gamma.ok_or_else(|| {
                    Error::InvalidParameter("lsv driver requires gamma".into())
                })?;
                build_map_driver(MapKind::lsv(gamma)?, p)
            },
        },
        DriverEntry {
            name: "rademacher",
            summary: "IID walk with independent +/-1 coordinates",
            build: |p| {
                let dim = p.dim.unwrap_or(1);
                Ok(Driver::Discrete(Box::new(WalkIncrementSource::new(
                    WalkLaw::Rademacher { dim },
                    SeedSplitter::new(p.seed),
                )?)))
            },
        },
        DriverEntry {
            name: "gaussian-walk",
            summary: "IID centered Gaussian walk with covariance sigma",
            build: |p| {
                let sigma = p
                    .sigma
                    .clone()
                    .unwrap_or_else(|| DMatrix::identity(p.dim.unwrap_or(1), p.dim.unwrap_or(1)));
                Ok(Driver::Discrete(Box::new(WalkIncrementSource::new(
                    WalkLaw::Gaussian { sigma },
                    SeedSplitter::new(p.seed),
                )?)))
            },
        },
        DriverEntry {
            name: "ou",
            summary: "OU physical Brownian motion with friction matrix M",
            build: |p| {
                let friction = p
                    .friction
                    .clone()
                    .unwrap_or_else(|| DMatrix::identity(p.dim.unwrap_or(1), p.dim.unwrap_or(1)));
                Ok(Driver::Continuous(Box::new(OuDriver::new(
                    friction,
                    p.epsilon.unwrap_or(0.1),
                    p.mesh.unwrap_or(20.0),
                    SeedSplitter::new(p.seed),
                )?)))
            },
        },
    ]
}

/// The driver registry, keyed by name.
pub fn driver_registry() -> &'static [DriverEntry] {
    static REG: OnceLock<Vec<DriverEntry>> = OnceLock::new();
    REG.get_or_init(registry_entries)
}

/// Builds a named driver with the given parameters.
pub fn build_driver(name: &str, params: &DriverParams) -> Result<Driver> {
    let reg = driver_registry();
    match reg.iter().find(|e| e.name == name) {
        Some(entry) => (entry.build)(params),
        None => Err(Error::UnknownName {
            kind: "driver",
            name: name.to_string(),
            known: reg.iter().map(|e| e.name).collect::<Vec<_>>().join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::StreamPurpose;
    use nalgebra::DVector;
    use rand::Rng;

    #[test]
    fn registry_knows_all_drivers() {
        let names: Vec<_> = driver_registry().iter().map(|e| e.name).collect();
        assert_eq!(
            names,
            vec!["doubling", "lsv", "rademacher", "gaussian-walk", "ou"]
        );
        let p = DriverParams::new(7);
        assert!(build_driver("doubling", &p).unwrap().as_discrete().is_some());
        assert!(build_driver("ou", &p).unwrap().as_continuous().is_some());
        assert!(matches!(
            build_driver("unknown", &p),
            Err(Error::UnknownName { .. })
        ));
        // lsv without gamma is a usage error
        assert!(build_driver("lsv", &p).is_err());
        let mut p2 = DriverParams::new(7);
        p2.gamma = Some(0.25);
        p2.centering_iters = Some(1 << 18);
        assert!(build_driver("lsv", &p2).is_ok());
    }

    #[test]
    fn birkhoff_two_step_hand_computation() {
        // doubling, y0 = 0.3, v = y - 1/2: orbit (0.3, 0.6),
        // W_2(1) = 2^{-1/2} (-0.2 + 0.1)
        struct Fixed;
        impl IncrementSource for Fixed {
            fn dim(&self) -> usize {
                1
            }
            fn mixing(&self) -> bool {
                true
            }
            fn label(&self) -> String {
                "fixed".into()
            }
            fn fill(&self, _replica: u64, out: &mut [f64]) {
                let orbit = iterate_map(MapKind::Doubling, 0.3, out.len());
                for (o, y) in out.iter_mut().zip(orbit) {
                    *o = y - 0.5;
                }
            }
        }
        let b = birkhoff_path(&Fixed, 0, 2).unwrap();
        let w1 = b.grid.first_row(2)[0];
        let expect = (-0.2f64 + 0.1) / 2.0f64.sqrt();
        assert!((w1 - expect).abs() < 1e-15);
        assert!((b.raw_sum[0] - (-0.1)).abs() < 1e-15);
        // v ≡ 0 -> zero path
        struct Zero;
        impl IncrementSource for Zero {
            fn dim(&self) -> usize {
                1
            }
            fn mixing(&self) -> bool {
                true
            }
            fn label(&self) -> String {
                "zero".into()
            }
            fn fill(&self, _r: u64, out: &mut [f64]) {
                out.fill(0.0);
            }
        }
        let z = birkhoff_path(&Zero, 0, 8).unwrap();
        assert!(z.grid.first_row(8).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn iterated_sum_matches_brute_force_exactly() {
        let sp = SeedSplitter::new(19);
        struct Rand {
            sp: SeedSplitter,
        }
        impl IncrementSource for Rand {
            fn dim(&self) -> usize {
                2
            }
            fn mixing(&self) -> bool {
                true
            }
            fn label(&self) -> String {
                "rand".into()
            }
            fn fill(&self, r: u64, out: &mut [f64]) {
                let mut rng = self.sp.stream(StreamPurpose::Scratch, r);
                for x in out.iter_mut() {
                    *x = rng.random::<f64>() * 2.0 - 1.0;
                }
            }
        }
        let src = Rand { sp };
        for n in 1..=50usize {
            let data = iterated_sum_path(&src, n as u64, n).unwrap();
            // brute force with the same accumulation order (j outer, prefix inner)
            let mut incs = vec![0.0; n * 2];
            src.fill(n as u64, &mut incs);
            let mut prefix = [0.0f64; 2];
            let mut brute = DMatrix::<f64>::zeros(2, 2);
            for j in 0..n {
                prefix[0] += incs[2 * j];
                prefix[1] += incs[2 * j + 1];
                for r in 0..2 {
                    for c in 0..2 {
                        brute[(r, c)] += prefix[r] * incs[2 * j + c];
                    }
                }
            }
            assert_eq!(data.s_n, brute, "n={n}");

            // identity n 𝕎_n(1) = S_n - Σ_j v_j ⊗ v_j
            let mut diag = DMatrix::<f64>::zeros(2, 2);
            for j in 0..n {
                let v = DVector::from_column_slice(&incs[2 * j..2 * j + 2]);
                diag += &v * v.transpose();
            }
            let wn1 = DMatrix::from_row_slice(2, 2, data.grid.second_row(n));
            let lhs = wn1 * n as f64;
            let rhs = &data.s_n - diag;
            assert!((lhs - rhs).amax() < 1e-12 * (1.0 + data.s_n.amax()));
        }
    }

    #[test]
    fn iterated_sum_n1_trivial() {
        struct One;
        impl IncrementSource for One {
            fn dim(&self) -> usize {
                1
            }
            fn mixing(&self) -> bool {
                true
            }
            fn label(&self) -> String {
                "one".into()
            }
            fn fill(&self, _r: u64, out: &mut [f64]) {
                out.fill(0.7);
            }
        }
        let d = iterated_sum_path(&One, 0, 1).unwrap();
        assert_eq!(d.grid.second_row(1)[0], 0.0);
        assert!((d.s_n[(0, 0)] - 0.49).abs() < 1e-15);
    }

    #[test]
    fn walk_rough_path_modes() {
        let sp = SeedSplitter::new(2);
        let src = WalkIncrementSource::new(WalkLaw::Rademacher { dim: 1 }, sp).unwrap();
        let ito = walk_rough_path(&src, 0, 64, LiftMode::PiecewiseConstantIto).unwrap();
        let strat = walk_rough_path(&src, 0, 64, LiftMode::PiecewiseLinear).unwrap();
        assert_eq!(ito.flavor(), crate::rough::PathFlavor::CadlagIto);
        assert_eq!(strat.flavor(), crate::rough::PathFlavor::GeometricContinuous);
        // same first level, second levels differ by half the quadratic
        // variation in the symmetric part: here 𝕏_strat - 𝕏_ito = n*(1/n)/2
        assert_eq!(ito.first_row(64), strat.first_row(64));
        let gap = strat.second_row(64)[0] - ito.second_row(64)[0];
        assert!((gap - 0.5).abs() < 1e-13);
    }
}
