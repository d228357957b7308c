//! A numerical laboratory for isomonodromic deformations of rank-2 Fuchsian
//! systems `dy/dz = (Σ_i B_i/(z−a_i)) y` with 2×2 residue matrices.
//!
//! The crate integrates the deformation (Schlesinger) equations along paths of
//! pole positions, computes monodromy generators by analytic continuation,
//! conjugates two-pole families into their normalized form near a pole
//! collision, fits the local power / logarithmic-power expansions of the
//! residue entries, and specializes the four-pole case to Painlevé VI.
//!
//! Layout:
//! - [`linalg`]: exact-shape complex 2×2 algebra, eigenstructure, matrix powers
//! - [`path`]: piecewise line/arc paths in ℂ and the adaptive ODE integrator
//! - [`schlesinger`]: pole configurations, the deformation flow, conservation checks
//! - [`monodromy`]: generators, pair loops, invariants, exponent extraction
//! - [`canonical`]: the conjugated two-pole family and its Euler-system limit
//! - [`fit`]: geometric sampling ladders and least-squares expansion fits
//! - [`p6`]: the Painlevé VI reduction and the two-route cross-check

pub mod canonical;
pub mod error;
pub mod fit;
pub mod linalg;
mod lstsq;
pub mod monodromy;
pub mod p6;
pub mod path;
pub mod schlesinger;
pub mod serial;

pub use canonical::{CanonicalFamily, DefectSample};
pub use error::{Error, Result};
pub use fit::{ExpansionFit, ExpansionModel, ModelCase, RayLadder, SampleSet, SectorSpec};
pub use linalg::{CMatrix2, Eigensystem2, LogBranch, MatrixKind};
pub use monodromy::{ExpansionCase, FuchsianSystem, MonodromySet, PhiClassification};
pub use p6::{P6ComparisonRow, P6CrossCheck, P6Params, P6Sample};
pub use path::{ComplexPath, Segment, ToleranceSpec};
pub use schlesinger::{PoleConfiguration, SchlesingerState, SpectralData};

/// Complex double-precision scalar used throughout.
///
/// All numerics are binary64; this alias is the single seam through which a
/// different precision would be threaded.
pub type C64 = num_complex::Complex64;
