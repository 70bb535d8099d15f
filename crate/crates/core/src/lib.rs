//! Error-bounded approximate dot products.
//!
//! `qdot` splits a dot product into exponent bins, scores every bin against a
//! relative tolerance and evaluates each bin at the cheapest precision that keeps
//! the total error under the tolerance: perforated (skipped), binary16,
//! binary32, or the input binary64.
//!
//! The pipeline is:
//!
//! 1. [`float_bits::exponent_preprocess`] sums the unbiased exponents of each
//!    component pair.
//! 2. [`binning`] sorts those sums (counting sort or comparison sort) and groups
//!    them into bins.
//! 3. [`scoring`] assigns every bin a score and a [`Precision`].
//! 4. [`emu`] evaluates each bin in its (emulated) precision and accumulates.
//!
//! [`kernel::qdot`] runs the whole thing and reports the value together with the
//! absolute and relative error bounds that hold for it.

pub mod apps;
pub mod binning;
pub mod emu;
mod error;
pub mod float_bits;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod scoring;
pub mod sparse;
pub mod sum;

pub use binning::{Bin, BinPartition, SortMethod, Strategy};
pub use error::{QdotError, Result};
pub use float_bits::{flexp, ExponentSummary};
pub use kernel::{qdot, reference_dot, select_parameters, BoundHypothesis, QdotReport};
pub use scoring::{
    ParameterSet, Precision, PrecisionCounts, ScoredBin, SplitMode, ToleranceConfig,
};
