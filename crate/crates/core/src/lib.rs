//! Property-conditioned molecule generation toolkit: SMILES graphs,
//! scaffold-aware curation, a small conditional sequence VAE, decoding,
//! generation metrics, structure–property analysis and editing.

pub mod analysis;
pub mod chem;
pub mod curation;
pub mod decoding;
pub mod descriptors;
pub mod editing;
pub mod fingerprints;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod scaffolds;
pub mod synthetic;
