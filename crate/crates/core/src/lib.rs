//! Core algorithms for estimating survey outcomes (asset wealth, education)
//! from the text of nearby geolocated articles and nightlight imagery.
//!
//! The crate is `no_std` and needs only `alloc`. Everything here is pure
//! computation over in-memory data: reading and writing files, spawning
//! worker threads and the command line live in the `wikiwealth` crate.
//!
//! Pipeline, in order of data flow:
//!
//! * [`corpus`]: geolocated articles and their token streams.
//! * [`embed`]: PV-DBOW paragraph vectors trained with negative sampling.
//! * [`geo`]: great-circle distances and an exact k-nearest-neighbour index.
//! * [`survey`]: ground-truth points, the asset wealth index, coordinate jitter.
//! * [`features`]: nearest-article feature vectors and nightlight grids.
//! * [`nn`]: dense/convolutional regressors with manual backprop and Adam.
//! * [`eval`]: correlation metrics and the train/test regimes.
//! * [`interpret`]: neighbour-count sweeps and embedding projections.
//! * [`synth`]: synthetic regions with a planted wealth signal.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod interpret;
pub mod math;
pub mod nn;
pub mod pca;
pub mod survey;
pub mod synth;

pub use error::{Error, Result};
