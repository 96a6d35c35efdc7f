#pragma once

#include "nph/volume.hpp"

namespace nph {

/// Bone threshold for skull extraction. Scanner calibration varies, so the
/// 250 HU default is configurable.
struct SkullThreshold {
  double min_hu = 250.0;
};

/// Non-local-means settings. patch_radius 1 means 3^3 patches, search_radius
/// 3 means a 7^3 window; h is the filtering strength in HU.
struct DenoiseParams {
  int patch_radius = 1;
  int search_radius = 3;
  double h = 15.0;

  void validate() const;
};

/// Thresholds at min_hu and keeps the largest 26-connected component, which
/// suppresses calcifications and table artifacts. Throws InvalidInput when
/// nothing clears the threshold (non-CT or mis-scaled input).
LabelVolume extract_skull(const ScalarVolume& volume, const SkullThreshold& threshold = {});

/// 3-D non-local means: each voxel becomes a weight-normalized average over
/// its search window, weights exp(-max(d^2 - 2*sigma^2, 0)/h^2) where d^2 is
/// the mean squared patch difference and sigma is estimated from the data.
/// h == 0 returns the input unchanged by convention.
ScalarVolume nlm_denoise(const ScalarVolume& volume, const DenoiseParams& params = {});

}  // namespace nph
