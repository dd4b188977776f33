//! Procedural foliage environments and biosonar echo simulation.
//!
//! Trees are grown from an L-system trunk layout fused with a randomized
//! reference tree, placed by inhomogeneous Poisson thinning, and probed by a
//! sonar whose main-lobe leaf echoes are superposed in the frequency domain
//! and inverse transformed into impulse responses.
//!
//! Every numeric type is generic over [`num::Real`]; the aliases below fix
//! the scalar to `f64`.

// Negated float comparisons deliberately treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod cli;
pub mod export;
pub mod geom;
pub mod lsystem;
pub mod num;
pub mod scene;
pub mod seed;
pub mod trajectory;
pub mod treegen;

pub use num::Real;

pub type Vec2 = geom::Vec2<f64>;
pub type Vec3 = geom::Vec3<f64>;
pub type LSystemSpec = lsystem::LSystemSpec<f64>;
pub type TurtleParams = lsystem::TurtleParams<f64>;
pub type BranchAttachment = lsystem::BranchAttachment<f64>;
pub type TrunkLayout = lsystem::TrunkLayout<f64>;
pub type ReferenceTree = treegen::ReferenceTree<f64>;
pub type TreeTemplate = treegen::TreeTemplate<f64>;
pub type RandomizationParams = treegen::RandomizationParams<f64>;
pub type TreeGeometry = treegen::TreeGeometry<f64>;
pub type LeafDisk = treegen::LeafDisk<f64>;
pub type IppConfig = scene::IppConfig<f64>;
pub type Scene = scene::Scene<f64>;
pub type SceneFile = scene::SceneFile<f64>;
pub type FacetObservation = scene::FacetObservation<f64>;
pub type AcousticConfig = acoustics::AcousticConfig<f64>;
pub type SonarBeampatternParams = acoustics::SonarBeampatternParams<f64>;
pub type LeafBeampatternParams = acoustics::LeafBeampatternParams<f64>;
pub type Spectrum = acoustics::Spectrum<f64>;
pub type ImpulseResponse = acoustics::ImpulseResponse<f64>;
pub type SonarPose = trajectory::SonarPose<f64>;
pub type TrajectorySpec = trajectory::TrajectorySpec<f64>;
pub type RunReport = trajectory::RunReport<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type Scene = crate::scene::Scene<f32>;
    pub type AcousticConfig = crate::acoustics::AcousticConfig<f32>;
    pub type ImpulseResponse = crate::acoustics::ImpulseResponse<f32>;
    pub type TreeGeometry = crate::treegen::TreeGeometry<f32>;
    pub type SonarPose = crate::trajectory::SonarPose<f32>;
}
