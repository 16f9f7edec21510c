//! Seeded pseudo-random generation.
//!
//! Every random draw in the crate (splits, weight init, mask init, node
//! sampling, synthetic fixtures) goes through [`SeededRng`], which is the
//! PCG XSL-RR 128/64 generator (`Pcg64` from `rand_pcg`). Its output stream
//! is fixed by the PCG reference definition, so a seed reproduces the same
//! draws on every platform.

use rand::SeedableRng;

pub type SeededRng = rand_pcg::Pcg64;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}
