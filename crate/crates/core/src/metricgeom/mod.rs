//! Finite-scale estimators: packings, Hausdorff cover sums, Minkowski volumes,
//! normalized entropies and scaling-exponent regression.
//!
//! Greedy packings are lower bounds and greedy covers are upper bounds. Comparisons
//! in the harness are arranged so that each estimator sits on the side of an
//! inequality that its bound direction supports.

mod chart;
mod cloud;
mod cover;
mod entropy;
mod minkowski;
mod orbitvol;
mod transfer;

pub use chart::{tangent_chart, TangentChart};
pub use cloud::PointCloud;
pub use cover::{
    constrained_cover_sum, cover_candidates, cover_sum, cover_sum_with, greedy_cover, greedy_packing,
    hausdorff_profile, log_cover_sum, log_cover_sum_with, packing_number, packing_number_best, Cover,
    CoverOptions,
};
pub use entropy::{
    log_sum_exp, normalized_log_entropy, scaling_exponent, DimensionEstimate, KTrend, ScaleFit, Statistic,
};
pub use minkowski::{minkowski_log_volume, MinkowskiEstimate};
pub use orbitvol::{orbit_packing_profile, NestedSamplingOptions, OrbitProfile};
pub use transfer::{certify_packing_constant, lemma61_transfer, PackingCertificate};
