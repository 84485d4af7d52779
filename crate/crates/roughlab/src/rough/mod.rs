//! Level-2 rough-path algebra: the step-2 group, grid paths, and
//! p-variation / Hölder functionals.
//!
//! All types are immutable values after construction and all operations are
//! pure functions, so everything here can be evaluated concurrently.

mod grid;
mod group;
mod pvar;

pub use grid::{uniform_times, PathFlavor, RoughPathGrid};
pub use group::{group_inv, group_mul, sym_defect, Level2Increment};
pub use pvar::{
    first_level_qvar_upper_dyadic, holder_norm, p_var_homog, p_var_inhomog_dist,
    path_p_variation, q_power, q_variation_dp,
};
