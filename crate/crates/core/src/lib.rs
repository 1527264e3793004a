//! Global rigid registration of 3-D curves onto surfaces (and curves onto
//! curves) from pairs of oriented points.

pub mod bench;
pub mod differential;
pub mod error;
pub mod geometry;
pub mod io;

pub mod matching;
pub mod random;
pub mod registration;
pub mod spatial;
pub mod synth;

pub use differential::{estimate_normals, estimate_tangents, Curve, OrientedCloud, SurfaceSamples};
pub use error::{BenchError, DifferentialError, GeometryError, IoError, MatchingError, RegistrationError};
pub use geometry::{
    compute_descriptor, pose_from_match_cc, pose_from_match_cs, rotation_error, translation_error, Descriptor,
    DescriptorGuards, Point3, PointVectorTuple, RigidTransform, UnitVec3, Vec3, VectorKind,
};
pub use matching::{
    build_pair_index, check_conditions_cc, check_necessary_cs, check_simultaneous_cs, extract_pairs_cc,
    query_pair_index, PairIndex, PairIndexConfig, QueryParams,
};
pub use registration::{
    count_inliers, register_curve_to_curve, register_curve_to_surface, register_surface_to_surface,
    MatchTolerances, RansacParams, RegistrationResult, Termination,
};
