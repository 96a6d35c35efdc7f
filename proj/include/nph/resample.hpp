#pragma once

#include "nph/volume.hpp"

namespace nph {

enum class Interp { Nearest, Trilinear };

/// Samples the source at the inverse-mapped location of every target voxel.
/// `transform` maps source mm to target mm. Out-of-bounds samples become 0
/// (the background class / air-adjacent intensity in both label schemes).
ScalarVolume resample(const ScalarVolume& source, const AffineTransform& transform,
                      const GridGeometry& target, Interp mode);

/// Label variant; mode must be Nearest (trilinear would invent label IDs).
LabelVolume resample(const LabelVolume& source, const AffineTransform& transform,
                     const GridGeometry& target, Interp mode);

}  // namespace nph
