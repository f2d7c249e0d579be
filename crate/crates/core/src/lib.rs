//! Dependency-tree crop and rotate augmentation for CoNLL-U treebanks, and a
//! character-level bidirectional LSTM part-of-speech tagger for measuring
//! what the augmentation buys.

pub mod augment;
pub mod conllu;
pub mod deptree;
pub mod fixtures;
pub mod rng;
pub mod tagger;
