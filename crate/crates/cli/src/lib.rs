//! Library side of the `treeaug` command: treebank statistics, the
//! augmentation experiment driver and size-versus-gain correlation.

pub mod correlate;
pub mod experiment;
pub mod stats;
