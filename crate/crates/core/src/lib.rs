//! Spectral representation learning on synthetic multi-manifold data.
//!
//! The crate builds radius neighborhood graphs and their Laplacians (the
//! classical method), augmentation-averaged weights and the corresponding
//! Laplacian (augmentation invariant manifold learning), solves for the
//! smallest eigenpairs, and measures how well the resulting representations
//! separate the component manifolds. Around that core sit a downstream
//! logistic-regression task, the chi-square lower-bound machinery for the
//! single-vs-multiple manifold testing problem, and an experiment harness.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`manifolds`] | model descriptions, sampling, augmentation, analytic spectra |
//! | [`graph`] | radius graph, Laplacian, Dirichlet energies, components |
//! | [`aiml`] | augmentation-averaged weights (Monte Carlo and closed-form kernel) |
//! | [`spectral`] | block eigensolver, alignment, clustering, out-of-sample extension |
//! | [`downstream`] | labels, logistic regression by gradient descent, hard-margin oracle |
//! | [`lowerbound`] | chi-square bounds and likelihood-ratio test simulation |
//! | [`harness`] | experiment sweeps, CSV/JSON persistence, SVG plots |

pub mod aiml;
pub mod downstream;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lowerbound;
pub mod manifolds;
pub mod rng;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
