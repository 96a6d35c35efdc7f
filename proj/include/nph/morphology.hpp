#pragma once

#include "nph/volume.hpp"

#include <cstdint>

namespace nph {

/// Keeps only the largest 26-connected component of a binary mask.
/// Returns an empty mask when the input is empty.
LabelVolume largest_component_26(const LabelVolume& mask);

/// Region enclosed by a binary mask: complement voxels not 6-connected to the
/// grid border, excluding the mask itself.
LabelVolume fill_interior(const LabelVolume& mask);

/// Binary dilation / erosion with the full 3x3x3 structuring element.
LabelVolume dilate27(const LabelVolume& mask);
LabelVolume erode27(const LabelVolume& mask);

std::int64_t count_nonzero(const LabelVolume& mask);

/// mask_a AND NOT mask_b (same grid).
LabelVolume mask_difference(const LabelVolume& a, const LabelVolume& b);

/// Binary mask of voxels equal to the given label.
LabelVolume mask_of_label(const LabelVolume& labels, std::uint8_t id);

}  // namespace nph
