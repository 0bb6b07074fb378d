//! Memory-behaviour metrics: address entropy, reuse distance at several
//! line sizes, and the spatial-locality score built on top of them.

mod entropy;
mod locality;
mod reuse;

pub use entropy::{entropy_sweep, memory_entropy, EntropyPoint, EntropyReport};
pub use locality::{
    distribution_map, line_sizes, locality_profile, spatial_locality, DistributionMap,
    LocalityProfile, PairScore, SpatialLocalityReport,
};
pub use reuse::{
    bin_bounds, bin_of, reuse_distance_stream, reuse_signature, Distance, ReuseBin, ReuseSignature,
};
