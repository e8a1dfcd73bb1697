//! Seeded random fields for norm experiments.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::Result;
use crate::lattice::{SpaceTimeField, TimeGrid, Torus, ValueKind};
use crate::stochastic::noise::standard_normal;

/// Field with independent standard normal entries.
pub fn random_field(torus: Torus, times: &TimeGrid, kind: ValueKind, seed: u64) -> Result<SpaceTimeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = times.len() * torus.num_sites() * kind.components();
    let data = (0..len).map(|_| standard_normal(&mut rng)).collect();
    SpaceTimeField::from_data(torus, times.clone(), kind, data)
}

/// Standard normal snapshot with its mean removed.
pub fn random_mean_zero(torus: &Torus, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<f64> = (0..torus.num_sites()).map(|_| standard_normal(&mut rng)).collect();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    f.iter_mut().for_each(|v| *v -= mean);
    f
}
