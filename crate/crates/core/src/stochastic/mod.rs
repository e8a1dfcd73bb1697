//! Cylindrical Brownian noise, adapted simple processes and stochastic
//! convolutions.

pub mod convolution;
pub mod noise;
pub mod process;

pub use convolution::{
    deterministic_convolution, grad_stochastic_convolution, grad_stochastic_convolution_checked,
    stochastic_convolution, stochastic_convolution_spectral, DeterministicConvolution,
    SpectralSeries,
};
pub use noise::{counter_normal, sample_noise, NoiseConfig, NoisePath};
pub use process::{AdaptedBuilder, PastIncrements, Piece, SimpleProcess};
