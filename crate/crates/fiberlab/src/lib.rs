//! Numerical laboratory for a semi-relativistic matter particle coupled to a
//! quantized radiation field at fixed total momentum.
//!
//! The infrared behaviour of the model is probed through a multiscale
//! scheme: photon momenta are split into dyadic annuli, the field content of
//! a Hamiltonian is grown one annulus at a time, and at each step coherent
//! dressing transforms absorb the freshly added soft modes. The crate builds
//! every object in that scheme on finite mode grids with occupation caps, so
//! all operators are honest finite Hermitian matrices and every claimed
//! inequality can be measured.
//!
//! Module layout:
//!
//! * [`scales`]: dyadic scale geometry, annular mode grids, coupling
//!   function, polarization vectors.
//! * [`fock`]: truncated bosonic Fock spaces over a mode grid, creation and
//!   annihilation matrix elements, field and conjugate field operators,
//!   second quantization of multipliers.
//! * [`hamiltonian`]: Dirac-type fiber operators and the full matter-field
//!   Hamiltonian at fixed total momentum, including analytic derivatives in
//!   the momentum parameter.
//! * [`spectral`]: dense and Krylov eigensolvers, ground clusters, reduced
//!   resolvents, degeneracy bookkeeping via the time-reversal structure.
//! * [`iapt`]: the scale-by-scale flow driver with first and second order
//!   perturbation data per step.
//! * [`coherent`]: dressing transforms, their generators, overlap ledgers
//!   and the dressed comparison operators.
//! * [`massshell`]: dispersion sweeps over total momentum and log-log rate
//!   fits against the scale parameter.
//! * [`linalg`], [`quad`], [`par`], [`config`]: dense kernels, operator
//!   function quadratures, optional data parallelism, run configuration.

pub mod config;
pub mod linalg;
pub mod par;
pub mod quad;

pub mod scales;

pub mod fock;

pub mod hamiltonian;

pub mod spectral;

pub mod iapt;

pub mod coherent;

pub mod massshell;

use thiserror::Error;

/// Crate wide error type. Variants mirror the contract violations the
/// individual modules can detect; IO concerns stay with the caller.
#[derive(Debug, Error)]
pub enum Error {
    #[error("eigensolver failed with code {code} (n = {n})")]
    Eigensolver { code: i32, n: usize },

    #[error("ground cluster of multiplicity {found} touches the rest of the spectrum: gap {gap:.3e} below resolution {resolution:.3e}")]
    ClusterAmbiguous {
        found: usize,
        gap: f64,
        resolution: f64,
    },

    #[error("resolvent shift Re z = {re_z:.3e} reaches the spectrum (allowed Re z > {bound:.3e})")]
    ResolventShift { re_z: f64, bound: f64 },

    #[error("no time-reversal compatible vector inside the ground cluster (best residual {residual:.3e})")]
    NoFixedVector { residual: f64 },

    #[error("scale depth {requested} exceeds the guard {guard}; pass the override to go deeper")]
    DepthGuard { requested: u32, guard: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("krylov iteration failed to converge within {max_iter} steps (residual {residual:.3e})")]
    KrylovStall { max_iter: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
