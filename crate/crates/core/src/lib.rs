//! Finite-element laboratory for a coupled heat / thin-wave / thick-wave
//! interaction system on a cube-in-box geometry.
//!
//! The pieces, bottom-up:
//!
//! * [`geometry`] builds tagged tetrahedral meshes and reads/writes them.
//! * [`linalg`] holds the sparse kernels (banded direct solvers, power
//!   iteration for operator norms).
//! * [`assembly`] produces the P1 block matrices, the shared-trace DOF layout
//!   and the first-order pair `(M, A)` with `M ẋ = A x`.
//! * [`evolution`] integrates the semi-discrete system with the implicit
//!   midpoint rule and fits decay exponents.
//! * [`resolvent`] solves `(iβM − A)x = Mb`, estimates resolvent norms and
//!   runs frequency sweeps.
//! * [`proof_probe`] houses the harmonic extension, Dirichlet-to-Neumann map,
//!   the `z` lift and the multiplier identities.
//! * [`io`] writes the CSV/JSON artifacts consumed by the command line tool.

pub mod assembly;
pub mod evolution;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod proof_probe;
pub mod resolvent;
