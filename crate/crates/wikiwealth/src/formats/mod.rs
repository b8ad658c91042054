//! On-disk formats. Binary formats are little-endian.

mod binary;
pub mod checkpoint;
pub mod corpus;
pub mod features;
pub mod image;
pub mod regressor;
pub mod survey;

pub(crate) use binary::write_file;
