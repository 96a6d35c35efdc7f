#pragma once

#include "nph/volume.hpp"

namespace nph {

/// Separable Gaussian smoothing, sigma in voxels, reflect-padded borders.
/// Kernel radius is ceil(3*sigma).
ScalarVolume gaussian_smooth(const ScalarVolume& volume, double sigma_voxels);

/// Discrete Gaussian kernel as used by gaussian_smooth (normalized).
Eigen::ArrayXd gaussian_kernel(double sigma_voxels);

/// Gradient magnitude by central differences, in intensity units per mm.
ScalarVolume gradient_magnitude(const ScalarVolume& volume);

/// Noise standard deviation estimate: 1.4826 * MAD of the noise-normalized
/// 6-neighbor Laplacian response.
double estimate_noise_sigma(const ScalarVolume& volume);

}  // namespace nph
