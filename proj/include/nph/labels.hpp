#pragma once

#include <cstdint>

namespace nph {

/// Voxel classes produced by the tissue random forest.
enum class TissueClass : std::uint8_t {
  Background = 0,
  Csf = 1,
  CerebralMass = 2,
  Skull = 3,
};
inline constexpr int kTissueClassCount = 4;

/// Final segmentation scheme after contour evolution and post-processing.
enum class SegLabel : std::uint8_t {
  Background = 0,
  Ventricle = 1,
  Subarachnoid = 2,
  CerebralMass = 3,
  Skull = 4,
};
inline constexpr int kSegLabelCount = 5;

}  // namespace nph
