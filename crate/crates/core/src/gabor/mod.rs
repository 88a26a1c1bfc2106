//! Complex Gabor kernels and their convolution with images.

mod convolve;
mod kernel;

pub use convolve::{convolve, response_norm, Backend, GaborOptions, ResponseField, SpectralImage};
pub(crate) use convolve::reflect;
pub use kernel::{make_kernel, ComplexKernel, GaborParams};
