//! Synthetic data: atom maps, decay fields, STEM noise, degradation
//! sequences and the damage/drift benchmark generators.

mod atoms;
mod bench;
mod decay;
mod noise;
mod perlin;
mod sequence;

pub use atoms::{gen_atom_map, AtomMapSpec};
pub use bench::{gen_damage_benchmark, gen_drift_benchmark, DamageFrame, DamageNoiseType, DriftCase};
pub use decay::{decay_with_intensity, interpolate_affine, interpolate_decay, make_final_decay};
pub use noise::{add_noise, NoiseConfig};
pub use perlin::perlin_field;
pub use sequence::{gen_sequence_sample, DegradationSpec, SequenceSample, SpecSampler};
