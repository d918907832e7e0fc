//! Numerical free probability: free additive convolution of compactly
//! supported measures through Cauchy/K-transform machinery.
//!
//! The crate computes moments, G- and K-series, pointwise K-functions,
//! support edges of free convolutions, spectral densities via
//! Stieltjes-Perron inversion, and superconvergence certificates that
//! bound the support of a sum of free random variables. A Monte Carlo
//! module cross-checks predictions against sums of randomly rotated
//! symmetric matrices.
//!
//! Entry points by task:
//! - [`measure::AtomicMeasure`]: weighted-atom measures, moments, dilation.
//! - [`series`]: G-series to K-series conversion (formal, contour, and
//!   non-crossing-partition routes).
//! - [`transform`]: pointwise G and K evaluation, density recovery.
//! - [`conv`]: rows of free summands, K-addition, support edges, densities.
//! - [`certificate`]: row statistics and support-interval certificates.
//! - [`mc`]: random-matrix cross-validation.
//! - [`rowfile`]: the text format consumed by the command-line tool.

pub mod certificate;
pub mod cli;
pub mod conv;
pub mod mc;
pub mod measure;
pub mod rowfile;
pub mod series;
pub mod transform;
